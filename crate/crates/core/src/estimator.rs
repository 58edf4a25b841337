//! Data-driven weights from grouped test statistics.
//!
//! Tests come labeled with groups believed to share an alternative
//! fraction and effect size. Per group, method-of-moments turns the
//! sample mean and variance of the statistics into estimates (pi_hat,
//! xi_hat); the estimated effects then feed the oracle weight solver as
//! if they were known, groups estimated null getting weight zero. A
//! linear blend toward the across-group mean keeps one bad estimate from
//! zeroing a group out entirely, and a final renormalization restores
//! the budget.
//!
//! The chi-square model reads the battery's statistics as z-scale values
//! and squares them, so both models accept the same input files.
//!
//! Estimating weights from the same data that gets tested barely moves
//! the familywise error: the estimates depend on a handful of group
//! moments, not on any single test. That argument needs groups large
//! enough that one extreme statistic cannot drag its own group's moments
//! (hundreds of tests, not tens; at r = 50 the inflation is measurable).
//! `fwer_of_estimated_weights` checks the claim by Monte Carlo over the
//! full pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::distfn;
use crate::error::{Error, Result};
use crate::hypotheses::{EffectConfiguration, Probability, TestBattery, WeightVector};
use crate::optimal::{self, XI_FLOOR};
use crate::procedures::{Procedure, WeightedBonferroni};

/// Which mixture model the group statistics follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// Statistics are N(0,1) under the null, N(xi,1) under the alternative.
    Normal,
    /// Squared statistics are chi-square(1), noncentrality xi^2 under the
    /// alternative.
    Chisq,
}

/// The chi-square estimator has two published forms; see [`mom_chisq_variant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChisqMomVariant {
    /// xi^2 = (S2 + Y^2 + 3)/(Y - 1), the commonly quoted form.
    Printed,
    /// xi^2 = (S2 + Y^2 - 3)/(Y - 1) - 6, which inverts the mixture's
    /// population moments exactly.
    Derived,
}

/// Moment summary and mixture estimate for one group.
#[derive(Debug, Clone, Copy)]
pub struct GroupEstimate {
    pub group_id: usize,
    pub r: usize,
    /// Sample mean of the (model-scale) statistics.
    pub y: f64,
    /// Unbiased sample variance.
    pub s2: f64,
    pub pi_hat: Probability,
    /// Zero whenever a guard condition fails.
    pub xi_hat: f64,
}

/// Per-group and per-test weights after smoothing and renormalization.
#[derive(Debug, Clone)]
pub struct SmoothedWeights {
    pub gamma_smooth: Probability,
    /// Weight the oracle solver gave each group's estimated effect.
    pub raw: Vec<f64>,
    /// Final per-group weights: blended toward the group mean, then
    /// renormalized so the per-test expansion sums to m.
    pub smoothed: Vec<f64>,
    pub per_test: WeightVector,
    pub estimates: Vec<GroupEstimate>,
    pub warnings: Vec<String>,
    /// True when every group looked null and unit weights were used.
    pub used_fallback: bool,
}

fn check_moment_inputs(y: f64, s2: f64, r: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::domain(format!("need at least 2 observations, got {r}")));
    }
    if !y.is_finite() || !s2.is_finite() || s2 < 0.0 {
        return Err(Error::domain(format!("bad moments Y = {y}, S2 = {s2}")));
    }
    Ok(())
}

/// Sample mean and unbiased variance of one group's statistics.
pub fn group_moments(stats: &[f64]) -> Result<(f64, f64, usize)> {
    let r = stats.len();
    if r < 2 {
        return Err(Error::domain(format!(
            "group variance needs at least 2 observations, got {r}"
        )));
    }
    if let Some(bad) = stats.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain(format!("statistic must be finite, got {bad}")));
    }
    let y = stats.iter().sum::<f64>() / r as f64;
    let s2 = stats.iter().map(|&x| (x - y) * (x - y)).sum::<f64>() / (r - 1) as f64;
    Ok((y, s2, r))
}

/// Normal-model method of moments: pi_hat = Y^2/(Y^2 + S2 - 1) and
/// xi_hat = Y/pi_hat. The estimate only counts when pi_hat exceeds 1/r;
/// below that (or when the variance carries no excess over the null)
/// the group is treated as null, xi_hat = 0.
pub fn mom_normal(y: f64, s2: f64, r: usize) -> Result<(Probability, f64)> {
    check_moment_inputs(y, s2, r)?;
    let denom = y * y + s2 - 1.0;
    if denom <= 0.0 {
        return Ok((Probability::new_unchecked(0.0), 0.0));
    }
    let pi = (y * y / denom).clamp(0.0, 1.0);
    let xi = if pi > 1.0 / r as f64 { y / pi } else { 0.0 };
    Ok((Probability::new_unchecked(pi), xi))
}

/// Chi-square-model method of moments in the printed form; see
/// [`mom_chisq_variant`] for the alternative.
pub fn mom_chisq(y: f64, s2: f64, r: usize) -> Result<(Probability, f64)> {
    mom_chisq_variant(y, s2, r, ChisqMomVariant::Printed)
}

/// Chi-square-model method of moments. Guards: Y must exceed 1 (the
/// null mean) and pi_hat must land strictly between 1/r and (r-1)/r,
/// else xi_hat = 0.
///
/// The printed form does not invert the population moments: for the
/// two-component mixture, E[T^2] = 3 + pi(6 lambda + lambda^2), which
/// solves to the `Derived` expression. Both are provided; `Printed`
/// stays the default so results line up with the published numbers.
pub fn mom_chisq_variant(
    y: f64,
    s2: f64,
    r: usize,
    variant: ChisqMomVariant,
) -> Result<(Probability, f64)> {
    check_moment_inputs(y, s2, r)?;
    if y <= 1.0 {
        return Ok((Probability::new_unchecked(0.0), 0.0));
    }
    let xi2 = match variant {
        ChisqMomVariant::Printed => (s2 + y * y + 3.0) / (y - 1.0),
        ChisqMomVariant::Derived => (s2 + y * y - 3.0) / (y - 1.0) - 6.0,
    };
    if xi2 <= 0.0 {
        return Ok((Probability::new_unchecked(0.0), 0.0));
    }
    let rf = r as f64;
    let pi = (y - 1.0) / xi2;
    if pi > 1.0 / rf && pi < (rf - 1.0) / rf {
        Ok((Probability::new_unchecked(pi.clamp(0.0, 1.0)), xi2.sqrt()))
    } else {
        Ok((Probability::new_unchecked(pi.clamp(0.0, 1.0)), 0.0))
    }
}

struct Grouping {
    /// Distinct labels in order of first appearance.
    labels: Vec<usize>,
    /// Group index (into `labels`) per test.
    group_of: Vec<usize>,
    first_ix: Vec<usize>,
}

fn build_grouping(labels: &[usize]) -> Grouping {
    let mut order = Vec::new();
    let mut first_ix = Vec::new();
    let mut map = std::collections::HashMap::new();
    let mut group_of = Vec::with_capacity(labels.len());
    for (j, &lab) in labels.iter().enumerate() {
        let gx = *map.entry(lab).or_insert_with(|| {
            order.push(lab);
            first_ix.push(j);
            order.len() - 1
        });
        group_of.push(gx);
    }
    Grouping { labels: order, group_of, first_ix }
}

fn estimate_one(stats: &[f64], model: Model) -> Result<(f64, f64, usize, f64, f64)> {
    let (y, s2, r) = match model {
        Model::Normal => group_moments(stats)?,
        Model::Chisq => {
            let sq: Vec<f64> = stats.iter().map(|&t| t * t).collect();
            group_moments(&sq)?
        }
    };
    let (pi, xi) = match model {
        Model::Normal => mom_normal(y, s2, r)?,
        Model::Chisq => mom_chisq(y, s2, r)?,
    };
    Ok((y, s2, r, pi.get(), xi))
}

/// Raw solver weights per group, then the blend
/// w_hat = (1 - gamma) w + gamma * mean(w), then renormalization.
/// Returns (per-test weights, per-group raw weights, fallback flag).
fn assemble_weights(
    xi_hats: &[f64],
    group_of: &[usize],
    gamma: f64,
    alpha: Probability,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let m = group_of.len();
    let k = xi_hats.len();
    if gamma == 1.0 || xi_hats.iter().all(|&x| x <= XI_FLOOR) {
        // Full smoothing erases the data; all-null estimates leave
        // nothing to up-weight. Either way the answer is unit weights.
        let fallback = gamma != 1.0;
        return Ok((vec![1.0; m], vec![1.0; k], fallback));
    }
    let means: Vec<f64> = group_of.iter().map(|&g| xi_hats[g]).collect();
    let config = EffectConfiguration::one_sided(means)?;
    let solution = optimal::solve_c(&config, alpha)?;
    let raw: Vec<f64> = (0..k)
        .map(|g| {
            let j = group_of.iter().position(|&gx| gx == g).expect("group is nonempty");
            solution.weights.get(j)
        })
        .collect();
    let group_mean = raw.iter().sum::<f64>() / k as f64;
    let blended: Vec<f64> = raw.iter().map(|&w| (1.0 - gamma) * w + gamma * group_mean).collect();
    let per_test: Vec<f64> = group_of.iter().map(|&g| blended[g]).collect();
    let (wv, _) = WeightVector::normalized(per_test)?;
    Ok((wv.as_slice().to_vec(), raw, false))
}

/// The full pipeline: group moments, method-of-moments estimates, oracle
/// weights at the estimated effects, smoothing, renormalization. Groups
/// estimated null get raw weight zero; when every group looks null the
/// result falls back to unit weights (with a warning rather than an
/// error, since that is a legitimate outcome on null data).
pub fn weights_from_groups(
    battery: &TestBattery,
    model: Model,
    gamma_smooth: Probability,
    alpha: Probability,
) -> Result<SmoothedWeights> {
    let labels = battery
        .group_labels()
        .ok_or_else(|| Error::contract("battery has no group column"))?;
    let stats = battery.statistics().ok_or_else(|| {
        Error::contract("battery has no statistics column; estimation needs statistics, not p-values")
    })?;
    if !(alpha.get() > 0.0 && alpha.get() < 1.0) {
        return Err(Error::domain(format!(
            "alpha must be in (0, 1), got {}",
            alpha.get()
        )));
    }
    let grouping = build_grouping(labels);
    let k = grouping.labels.len();
    let mut warnings = Vec::new();

    let mut estimates = Vec::with_capacity(k);
    let mut xi_hats = Vec::with_capacity(k);
    for g in 0..k {
        let member_stats: Vec<f64> = grouping
            .group_of
            .iter()
            .zip(stats)
            .filter(|(&gx, _)| gx == g)
            .map(|(_, &t)| t)
            .collect();
        let r = member_stats.len();
        if r < 20 {
            warnings.push(format!(
                "group {} has only {r} tests; moment estimates may be unstable",
                grouping.labels[g]
            ));
        }
        let (y, s2, r, pi, xi) = estimate_one(&member_stats, model).map_err(|e| {
            Error::contract(format!("group {}: {e}", grouping.labels[g]))
        })?;
        estimates.push(GroupEstimate {
            group_id: grouping.labels[g],
            r,
            y,
            s2,
            pi_hat: Probability::new_unchecked(pi),
            xi_hat: xi,
        });
        xi_hats.push(xi);
    }

    let (per_test, raw, used_fallback) =
        assemble_weights(&xi_hats, &grouping.group_of, gamma_smooth.get(), alpha)?;
    if used_fallback {
        warnings.push("every group estimated null; using unit weights".to_string());
    }
    let per_test = WeightVector::new(per_test)?;
    let smoothed: Vec<f64> = grouping.first_ix.iter().map(|&j| per_test.get(j)).collect();
    Ok(SmoothedWeights {
        gamma_smooth,
        raw,
        smoothed,
        per_test,
        estimates,
        warnings,
        used_fallback,
    })
}

/// Optional planted signals for [`fwer_of_estimated_weights`]: `count`
/// tests at the front of group `group` get mean `mean`. False positives
/// are still counted over the null tests only.
#[derive(Debug, Clone, Copy)]
pub struct SignalPlan {
    pub group: usize,
    pub count: usize,
    pub mean: f64,
}

/// Monte Carlo configuration for the estimate-then-test pipeline.
/// Groups are contiguous blocks of as equal size as m allows.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorNullSim {
    pub m: usize,
    pub n_groups: usize,
    pub model: Model,
    pub gamma_smooth: Probability,
    pub alpha: Probability,
    pub reps: usize,
    pub seed: u64,
    pub signal: Option<SignalPlan>,
}

#[derive(Debug, Clone, Copy)]
pub struct FwerEstimate {
    /// Fraction of replicates with at least one false rejection.
    pub fwer: f64,
    /// Binomial standard error of that fraction.
    pub se: f64,
    pub reps: usize,
    pub mean_rejections: f64,
}

fn block_groups(m: usize, k: usize) -> Vec<usize> {
    let base = m / k;
    let extra = m % k;
    let mut group_of = Vec::with_capacity(m);
    for g in 0..k {
        let size = base + usize::from(g < extra);
        group_of.extend(std::iter::repeat_n(g, size));
    }
    group_of
}

/// Estimate weights from the very data being tested, run weighted
/// Bonferroni, and tally how often a null test gets rejected. Replicates
/// run in parallel; each derives its own generator from (seed, replicate
/// index), so the result does not depend on thread scheduling.
pub fn fwer_of_estimated_weights(cfg: &EstimatorNullSim) -> Result<FwerEstimate> {
    if cfg.reps == 0 {
        return Err(Error::contract("reps must be >= 1"));
    }
    if cfg.n_groups == 0 || cfg.m < 2 * cfg.n_groups {
        return Err(Error::contract(format!(
            "need at least 2 tests per group, got m = {} over {} groups",
            cfg.m, cfg.n_groups
        )));
    }
    let group_of = block_groups(cfg.m, cfg.n_groups);
    let mut alt = vec![false; cfg.m];
    if let Some(plan) = cfg.signal {
        if plan.group >= cfg.n_groups {
            return Err(Error::contract(format!(
                "signal group {} out of range (K = {})",
                plan.group, cfg.n_groups
            )));
        }
        let start = group_of
            .iter()
            .position(|&g| g == plan.group)
            .expect("group exists");
        let size = group_of.iter().filter(|&&g| g == plan.group).count();
        if plan.count > size {
            return Err(Error::contract(format!(
                "{} signals do not fit in a group of {size}",
                plan.count
            )));
        }
        for flag in alt.iter_mut().skip(start).take(plan.count) {
            *flag = true;
        }
    }

    let outcomes = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64 + 1);
            let stats: Vec<f64> = alt
                .iter()
                .map(|&is_alt| {
                    let z: f64 = rng.sample(StandardNormal);
                    if is_alt {
                        z + cfg.signal.expect("alt implies signal").mean
                    } else {
                        z
                    }
                })
                .collect();
            let mut xi_hats = Vec::with_capacity(cfg.n_groups);
            for g in 0..cfg.n_groups {
                let member: Vec<f64> = group_of
                    .iter()
                    .zip(&stats)
                    .filter(|(&gx, _)| gx == g)
                    .map(|(_, &t)| t)
                    .collect();
                let (.., xi) = estimate_one(&member, cfg.model)?;
                xi_hats.push(xi);
            }
            let (ws, _, _) =
                assemble_weights(&xi_hats, &group_of, cfg.gamma_smooth.get(), cfg.alpha)?;
            let ps: Vec<f64> = stats.iter().map(|&t| distfn::upper_tail(t)).collect();
            let rejected = WeightedBonferroni.reject_slices(&ps, &ws, cfg.alpha.get())?;
            let fp = rejected.iter().any(|&j| !alt[j]);
            Ok((fp, rejected.len()))
        })
        .collect::<Result<Vec<_>>>()?;

    let fps = outcomes.iter().filter(|(fp, _)| *fp).count();
    let fwer = fps as f64 / cfg.reps as f64;
    Ok(FwerEstimate {
        fwer,
        se: (fwer * (1.0 - fwer) / cfg.reps as f64).sqrt(),
        reps: cfg.reps,
        mean_rejections: outcomes.iter().map(|&(_, n)| n as f64).sum::<f64>()
            / cfg.reps as f64,
    })
}
