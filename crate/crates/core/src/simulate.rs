//! Synthetic genome studies and the Monte Carlo harness.
//!
//! The study model: a linkage trace (a smooth Gaussian process over
//! genome positions, elevated near planted disease variants) plus
//! independent association statistics, normal under the null and
//! mean-shifted at tests co-located with the variants. Thresholding the
//! trace turns side information into binary weights; the harness
//! measures what that buys in discoveries and costs in familywise error.
//!
//! Every stochastic entry point takes an explicit seed. Replicates
//! derive their generators from (seed, replicate index), so results are
//! identical across runs and across thread counts.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::distfn;
use crate::hypotheses::{weighted_p, MCOutcome, Probability, WeightVector};
use crate::procedures::Procedure;
use crate::robustness::BinaryWeightScheme;

/// Parameters for [`synth_genome`]. Defaults give a desk-scale study
/// that runs in milliseconds; the real-scale setting mostly just raises
/// `n_assoc`.
#[derive(Debug, Clone, Copy)]
pub struct SynthGenomeConfig {
    pub n_chrom: usize,
    pub positions_per_chrom: usize,
    /// Planted linkage variants, at most one per chromosome.
    pub n_linkage_signals: usize,
    /// Association tests, spread evenly over the genome.
    pub n_assoc: usize,
    /// Tests co-located with variants that carry a real effect.
    pub n_assoc_signals: usize,
    /// Mean of a signal's association statistic.
    pub signal_mean: f64,
    /// Lag-1 autocorrelation of the trace noise; correlation length is
    /// -1/ln(phi) positions.
    pub phi: f64,
    /// Peak added to the trace mean at a variant...
    pub bump_height: f64,
    /// ...decaying linearly to zero this many positions away.
    pub bump_halfwidth: usize,
}

impl Default for SynthGenomeConfig {
    fn default() -> Self {
        SynthGenomeConfig {
            n_chrom: 23,
            positions_per_chrom: 500,
            n_linkage_signals: 20,
            n_assoc: 10_000,
            n_assoc_signals: 20,
            signal_mean: 3.5,
            phi: 0.98,
            bump_height: 3.0,
            bump_halfwidth: 40,
        }
    }
}

/// One synthetic study: the trace, where the truth was planted, and the
/// association statistics to be tested.
#[derive(Debug, Clone)]
pub struct LinkageStudy {
    /// Chromosome of each trace position (positions are global indices,
    /// chromosome blocks laid end to end).
    pub chrom_of_position: Vec<usize>,
    /// Observed linkage trace, one value per position.
    pub trace: Vec<f64>,
    /// The deterministic mean under the trace (zero away from variants).
    pub trace_mean: Vec<f64>,
    /// Global positions of the planted linkage variants.
    pub linkage_positions: Vec<usize>,
    /// Trace position of each association test.
    pub assoc_position: Vec<usize>,
    pub assoc_stats: Vec<f64>,
    pub is_signal: Vec<bool>,
    pub seed: u64,
}

impl LinkageStudy {
    pub fn m(&self) -> usize {
        self.assoc_stats.len()
    }

    pub fn m1(&self) -> usize {
        self.is_signal.iter().filter(|&&s| s).count()
    }

    /// Upper-tail p-values of the association statistics.
    pub fn p_values(&self) -> Vec<f64> {
        self.assoc_stats.iter().map(|&t| distfn::upper_tail(t)).collect()
    }

    pub fn signal_indices(&self) -> Vec<usize> {
        (0..self.m()).filter(|&j| self.is_signal[j]).collect()
    }
}

fn validate_config(config: &SynthGenomeConfig) -> Result<()> {
    if config.n_chrom == 0 || config.positions_per_chrom == 0 || config.n_assoc == 0 {
        return Err(Error::contract("genome dimensions must be positive"));
    }
    if config.n_linkage_signals > config.n_chrom {
        return Err(Error::infeasible(format!(
            "{} linkage variants do not fit one-per-chromosome in {} chromosomes",
            config.n_linkage_signals, config.n_chrom
        )));
    }
    if config.n_assoc_signals > config.n_linkage_signals {
        return Err(Error::infeasible(format!(
            "{} association signals need at least as many linkage variants, got {}",
            config.n_assoc_signals, config.n_linkage_signals
        )));
    }
    if config.n_assoc_signals > config.n_assoc {
        return Err(Error::contract("more signals than association tests"));
    }
    if !(config.phi >= 0.0 && config.phi < 1.0) {
        return Err(Error::domain(format!(
            "phi must be in [0, 1), got {}",
            config.phi
        )));
    }
    if !config.signal_mean.is_finite() || !config.bump_height.is_finite() || config.bump_height < 0.0
    {
        return Err(Error::domain("signal_mean and bump_height must be finite (height >= 0)"));
    }
    Ok(())
}

fn synth_with_rng(config: &SynthGenomeConfig, rng: &mut ChaCha8Rng, seed: u64) -> Result<LinkageStudy> {
    validate_config(config)?;
    let per = config.positions_per_chrom;
    let total = config.n_chrom * per;

    // One variant per chromosome: partial Fisher-Yates picks the
    // chromosomes, then a uniform offset within each.
    let mut chroms: Vec<usize> = (0..config.n_chrom).collect();
    for i in 0..config.n_linkage_signals {
        let j = rng.random_range(i..config.n_chrom);
        chroms.swap(i, j);
    }
    let linkage_positions: Vec<usize> = chroms[..config.n_linkage_signals]
        .iter()
        .map(|&c| c * per + rng.random_range(0..per))
        .collect();

    let mut trace_mean = vec![0.0; total];
    if config.bump_halfwidth > 0 {
        for &s in &linkage_positions {
            let chrom = s / per;
            let lo = s.saturating_sub(config.bump_halfwidth).max(chrom * per);
            let hi = (s + config.bump_halfwidth + 1).min((chrom + 1) * per);
            for (t, mu) in trace_mean.iter_mut().enumerate().take(hi).skip(lo) {
                let dist = s.abs_diff(t) as f64;
                *mu += config.bump_height * (1.0 - dist / config.bump_halfwidth as f64);
            }
        }
    }

    // Stationary AR(1) noise, unit marginal variance, restarted per
    // chromosome.
    let mut trace = Vec::with_capacity(total);
    let innovation_sd = (1.0 - config.phi * config.phi).sqrt();
    for _ in 0..config.n_chrom {
        let mut x: f64 = rng.sample(StandardNormal);
        trace.push(x);
        for _ in 1..per {
            let e: f64 = rng.sample(StandardNormal);
            x = config.phi * x + innovation_sd * e;
            trace.push(x);
        }
    }
    for (z, mu) in trace.iter_mut().zip(&trace_mean) {
        *z += mu;
    }

    let m = config.n_assoc;
    let assoc_position: Vec<usize> = (0..m).map(|j| j * total / m).collect();

    // Each signal sits at the association test nearest its variant,
    // resolving collisions by stepping to the nearest free test.
    let mut is_signal = vec![false; m];
    let mut taken = BTreeSet::new();
    for &s in linkage_positions.iter().take(config.n_assoc_signals) {
        let guess = ((s * m) / total).min(m - 1);
        let mut best = None;
        for cand in guess.saturating_sub(2)..=(guess + 2).min(m - 1) {
            if taken.contains(&cand) {
                continue;
            }
            let d = assoc_position[cand].abs_diff(s);
            if best.map(|(bd, _)| d < bd).unwrap_or(true) {
                best = Some((d, cand));
            }
        }
        let (_, j) = best.ok_or_else(|| {
            Error::infeasible("variants are too crowded to give each its own association test")
        })?;
        taken.insert(j);
        is_signal[j] = true;
    }

    let assoc_stats: Vec<f64> = is_signal
        .iter()
        .map(|&sig| {
            let z: f64 = rng.sample(StandardNormal);
            if sig {
                z + config.signal_mean
            } else {
                z
            }
        })
        .collect();

    let chrom_of_position = (0..total).map(|t| t / per).collect();
    Ok(LinkageStudy {
        chrom_of_position,
        trace,
        trace_mean,
        linkage_positions,
        assoc_position,
        assoc_stats,
        is_signal,
        seed,
    })
}

/// Generate one study. The same (config, seed) is bit-identical.
pub fn synth_genome(config: &SynthGenomeConfig, seed: u64) -> Result<LinkageStudy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synth_with_rng(config, &mut rng, seed)
}

/// Threshold the trace at its genome-wide (1 - epsilon) quantile and
/// give raw weight B to association tests in the exceedance region, 1
/// to the rest. Normalization uses the realized up-weighted fraction of
/// tests (not the nominal epsilon), so the budget holds exactly. B = 1,
/// or a threshold that captures all or none of the tests, gives unit
/// weights.
pub fn trace_to_binary_weights(study: &LinkageStudy, epsilon: f64, b: f64) -> Result<WeightVector> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if !(b >= 1.0) {
        return Err(Error::domain(format!("B must be >= 1, got {b}")));
    }
    let m = study.m();
    if b == 1.0 {
        return Ok(WeightVector::unit(m));
    }
    let mut sorted = study.trace.clone();
    sorted.sort_by(f64::total_cmp);
    let ix = ((1.0 - epsilon) * sorted.len() as f64).floor() as usize;
    let threshold = sorted[ix.min(sorted.len() - 1)];

    let up: Vec<bool> = study
        .assoc_position
        .iter()
        .map(|&pos| study.trace[pos] >= threshold)
        .collect();
    let k = up.iter().filter(|&&u| u).count();
    if k == 0 || k == m {
        return Ok(WeightVector::unit(m));
    }
    let scheme = BinaryWeightScheme::new(k as f64 / m as f64, b, m)?;
    let ws = up
        .iter()
        .map(|&u| if u { scheme.w1 } else { scheme.w0 })
        .collect();
    WeightVector::new(ws)
}

/// Test the study's p-values with the given weights and tally the
/// outcome against the planted truth.
pub fn run_experiment(
    study: &LinkageStudy,
    weights: &WeightVector,
    alpha: Probability,
    procedure: &dyn Procedure,
) -> Result<MCOutcome> {
    if weights.len() != study.m() {
        return Err(Error::contract(format!(
            "{} weights for {} tests",
            weights.len(),
            study.m()
        )));
    }
    let ps = study.p_values();
    let rejected = procedure.reject_slices(&ps, weights.as_slice(), alpha.get())?;
    let tp = rejected.iter().filter(|&&j| study.is_signal[j]).count();
    let fp = rejected.len() - tp;
    let m1 = study.m1();
    MCOutcome::new(fp, tp, study.m() - m1, m1)
}

/// One cell of the (epsilon, B) power surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceCell {
    pub epsilon: f64,
    pub b: f64,
    pub mean_true_discoveries: f64,
    /// Mean fraction of planted signals discovered.
    pub mean_power: f64,
    /// Fraction of replicates with at least one false rejection.
    pub fwer: f64,
}

/// Sweep binary weighting over the grid. Every cell of a replicate is
/// evaluated on the same study (common random numbers), so comparisons
/// across cells are paired and the B = 1 column is exactly the
/// unweighted baseline regardless of epsilon.
pub fn power_surface(
    config: &SynthGenomeConfig,
    epsilon_grid: &[f64],
    b_grid: &[f64],
    reps: usize,
    alpha: Probability,
    procedure: &dyn Procedure,
    seed: u64,
) -> Result<Vec<SurfaceCell>> {
    if epsilon_grid.is_empty() || b_grid.is_empty() {
        return Err(Error::contract("epsilon and B grids must be nonempty"));
    }
    if reps == 0 {
        return Err(Error::contract("reps must be >= 1"));
    }
    if config.n_assoc_signals == 0 {
        return Err(Error::contract("power surface needs planted signals"));
    }
    validate_config(config)?;

    let cells = epsilon_grid.len() * b_grid.len();
    let per_rep = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let study = synth_with_rng(config, &mut rng, seed)?;
            let mut row = Vec::with_capacity(cells);
            for &eps in epsilon_grid {
                for &b in b_grid {
                    let ws = trace_to_binary_weights(&study, eps, b)?;
                    let out = run_experiment(&study, &ws, alpha, procedure)?;
                    row.push((out.true_positives, out.false_positives > 0));
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let m1 = config.n_assoc_signals as f64;
    let mut out = Vec::with_capacity(cells);
    for (cx, (&eps, &b)) in epsilon_grid
        .iter()
        .flat_map(|e| b_grid.iter().map(move |b| (e, b)))
        .enumerate()
    {
        let tp_sum: usize = per_rep.iter().map(|row| row[cx].0).sum();
        let fp_reps = per_rep.iter().filter(|row| row[cx].1).count();
        out.push(SurfaceCell {
            epsilon: eps,
            b,
            mean_true_discoveries: tp_sum as f64 / reps as f64,
            mean_power: tp_sum as f64 / reps as f64 / m1,
            fwer: fp_reps as f64 / reps as f64,
        });
    }
    Ok(out)
}

/// How the null-calibration harness picks weights each replicate.
#[derive(Debug, Clone)]
pub enum WeightsSpec {
    Unit,
    Fixed(WeightVector),
    /// Fresh i.i.d. Exp(1) draws each replicate, normalized to mean one.
    /// Independent of the p-values, so the fixed-weight guarantee
    /// applies conditionally.
    RandomExponential,
    /// All budget on one test: w = (m, 0, ..., 0).
    ExtremeOneHot,
    /// w_j = exp(c V_j - c^2/2) with V_j fresh independent N(0,1): mean
    /// one in expectation rather than by normalization. The union bound
    /// still holds, but only for the fixed-threshold rule, so this
    /// variant is restricted to bonferroni.
    DataDependent { c: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct FwerMcResult {
    pub fwer: f64,
    /// Binomial standard error of the estimate.
    pub se: f64,
    pub reps: usize,
}

/// Monte Carlo familywise error of a procedure at an all-null battery of
/// m independent uniform p-values.
pub fn fwer_mc(
    procedure: &dyn Procedure,
    spec: &WeightsSpec,
    m: usize,
    alpha: Probability,
    reps: usize,
    seed: u64,
) -> Result<FwerMcResult> {
    if reps < 1000 {
        return Err(Error::contract(format!(
            "need at least 1000 replicates for a stable estimate, got {reps}"
        )));
    }
    if m == 0 {
        return Err(Error::contract("m must be >= 1"));
    }
    match spec {
        WeightsSpec::Fixed(wv) if wv.len() != m => {
            return Err(Error::contract(format!(
                "{} fixed weights for m = {m}",
                wv.len()
            )));
        }
        WeightsSpec::DataDependent { c } => {
            if !c.is_finite() {
                return Err(Error::domain("c must be finite"));
            }
            if procedure.name() != "bonferroni" {
                return Err(Error::contract(
                    "data-dependent weights are only guaranteed for bonferroni",
                ));
            }
        }
        _ => {}
    }

    let extreme = {
        let mut w = vec![0.0; m];
        w[0] = m as f64;
        w
    };
    let false_positive_reps = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64 + 1);
            let ps: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let any = match spec {
                WeightsSpec::Unit => {
                    !procedure.reject_slices(&ps, &vec![1.0; m], alpha.get())?.is_empty()
                }
                WeightsSpec::Fixed(wv) => {
                    !procedure.reject_slices(&ps, wv.as_slice(), alpha.get())?.is_empty()
                }
                WeightsSpec::ExtremeOneHot => {
                    !procedure.reject_slices(&ps, &extreme, alpha.get())?.is_empty()
                }
                WeightsSpec::RandomExponential => {
                    let raw: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
                    let (wv, _) = WeightVector::normalized(raw)?;
                    !procedure.reject_slices(&ps, wv.as_slice(), alpha.get())?.is_empty()
                }
                WeightsSpec::DataDependent { c } => {
                    let cut = alpha.get() / m as f64;
                    ps.iter().any(|&p| {
                        let v: f64 = rng.sample(StandardNormal);
                        let w = (c * v - c * c / 2.0).exp();
                        weighted_p(p, w) <= cut
                    })
                }
            };
            Ok(any)
        })
        .collect::<Result<Vec<bool>>>()?;

    let fwer = false_positive_reps.iter().filter(|&&f| f).count() as f64 / reps as f64;
    Ok(FwerMcResult {
        fwer,
        se: (fwer * (1.0 - fwer) / reps as f64).sqrt(),
        reps,
    })
}
