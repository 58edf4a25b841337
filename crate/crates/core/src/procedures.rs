//! Multiple testing procedures over weighted p-values.
//!
//! Every procedure here consumes the same inputs: p-values, a nonnegative
//! weight vector with mean one, and a level alpha. A hypothesis with
//! weight `w_j` is effectively tested at the inflated level
//! `alpha * w_j / m`; the mean-one budget makes the total spent level sum
//! to alpha, which is what preserves the familywise guarantee no matter
//! how the weights are distributed.
//!
//! Procedures are registered by name behind the [`Procedure`] trait so
//! callers (the CLI, the simulation harness) can select one at runtime;
//! see [`REGISTRY`] and [`by_name`].
//!
//! Ranking is by the weighted p-value `q_j = p_j / w_j` with the
//! conventions `0/0 = 0` and `x/0 = +inf`, so a zero-weight hypothesis is
//! only ever rejected when its p-value is literally zero.

use crate::error::{Error, Result};
use crate::hypotheses::{weighted_p, Probability, RejectionSet, TestBattery, WeightVector};
use crate::roots::bisect;
use crate::{distfn, hypotheses};

fn validate_slices(ps: &[f64], ws: &[f64], alpha: f64) -> Result<()> {
    if ps.len() != ws.len() {
        return Err(Error::contract(format!(
            "{} p-values but {} weights",
            ps.len(),
            ws.len()
        )));
    }
    if ps.is_empty() {
        return Err(Error::contract("need at least one hypothesis"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if let Some(bad) = ws.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::domain(format!("weights must be finite and >= 0, got {bad}")));
    }
    let mean = ws.iter().sum::<f64>() / ws.len() as f64;
    if (mean - 1.0).abs() > hypotheses::WEIGHT_BUDGET_TOL {
        return Err(Error::contract(format!(
            "weights must average to 1 (got mean {mean})"
        )));
    }
    Ok(())
}

/// Indices sorted by ascending weighted p-value, ties broken by index so
/// results are deterministic.
fn order_by_q(ps: &[f64], ws: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let q: Vec<f64> = ps.iter().zip(ws).map(|(&p, &w)| weighted_p(p, w)).collect();
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
    (q, order)
}

/// A multiple testing procedure selectable by name at runtime.
pub trait Procedure: Sync {
    /// Registry key, e.g. `"bonferroni"`.
    fn name(&self) -> &'static str;

    /// One-line description for listings.
    fn describe(&self) -> &'static str;

    /// Rejected indices in ascending order. `ps` and `ws` must have equal
    /// length, weights nonnegative with mean one, `0 < alpha < 1`.
    fn reject_slices(&self, ps: &[f64], ws: &[f64], alpha: f64) -> Result<Vec<usize>>;

    /// Battery-level entry point.
    fn reject(
        &self,
        battery: &TestBattery,
        weights: &WeightVector,
        alpha: Probability,
    ) -> Result<RejectionSet> {
        if weights.len() != battery.m() {
            return Err(Error::contract(format!(
                "battery has {} tests but weight vector has {}",
                battery.m(),
                weights.len()
            )));
        }
        let ps: Vec<f64> = battery.p_values().collect();
        let idx = self.reject_slices(&ps, weights.as_slice(), alpha.get())?;
        RejectionSet::new(battery.m(), idx.into_iter().collect())
    }
}

/// Weighted Bonferroni: reject j exactly when `p_j / w_j <= alpha / m`.
pub struct WeightedBonferroni;

impl Procedure for WeightedBonferroni {
    fn name(&self) -> &'static str {
        "bonferroni"
    }

    fn describe(&self) -> &'static str {
        "single-step: reject when p/w <= alpha/m"
    }

    fn reject_slices(&self, ps: &[f64], ws: &[f64], alpha: f64) -> Result<Vec<usize>> {
        validate_slices(ps, ws, alpha)?;
        let threshold = alpha / ps.len() as f64;
        Ok((0..ps.len())
            .filter(|&j| weighted_p(ps[j], ws[j]) <= threshold)
            .collect())
    }
}

/// Weighted Holm: step down through ascending `q_j = p_j / w_j`, testing
/// each against alpha divided by the weight still in play (the sum of
/// weights of hypotheses not yet rejected), and stop at the first failure.
///
/// With unit weights the denominators are `m, m-1, ...` and this is the
/// classical Holm procedure. The first threshold equals alpha/m, so the
/// rejection set always contains the weighted Bonferroni set.
pub struct WeightedHolm;

impl Procedure for WeightedHolm {
    fn name(&self) -> &'static str {
        "holm"
    }

    fn describe(&self) -> &'static str {
        "step-down with remaining-weight denominators"
    }

    fn reject_slices(&self, ps: &[f64], ws: &[f64], alpha: f64) -> Result<Vec<usize>> {
        validate_slices(ps, ws, alpha)?;
        let (q, order) = order_by_q(ps, ws);
        let mut remaining: f64 = ws.iter().sum();
        let mut rejected = Vec::new();
        for &j in &order {
            // Zero-weight hypotheses have q = inf (or 0 when p = 0, in
            // which case they are rejected for free and shed no weight).
            if !(remaining > 0.0) || !q[j].is_finite() && q[j] != 0.0 {
                break;
            }
            if q[j] <= alpha / remaining {
                rejected.push(j);
                remaining -= ws[j];
            } else {
                break;
            }
        }
        rejected.sort_unstable();
        Ok(rejected)
    }
}

/// Weighted Benjamini-Hochberg: step up through ascending
/// `q_j = p_j / w_j`, find the largest i with `q_(i) <= alpha * i / m`,
/// and reject that many from the bottom. Unit weights give the classical
/// procedure exactly.
pub struct WeightedBenjaminiHochberg;

impl Procedure for WeightedBenjaminiHochberg {
    fn name(&self) -> &'static str {
        "bh"
    }

    fn describe(&self) -> &'static str {
        "step-up on p/w against alpha*i/m"
    }

    fn reject_slices(&self, ps: &[f64], ws: &[f64], alpha: f64) -> Result<Vec<usize>> {
        validate_slices(ps, ws, alpha)?;
        let m = ps.len();
        let (q, order) = order_by_q(ps, ws);
        let mut cut = 0;
        for (i, &j) in order.iter().enumerate() {
            if q[j] <= alpha * (i + 1) as f64 / m as f64 {
                cut = i + 1;
            }
        }
        let mut rejected: Vec<usize> = order[..cut].to_vec();
        rejected.sort_unstable();
        Ok(rejected)
    }
}

/// All procedures, selectable by [`Procedure::name`].
pub static REGISTRY: &[&dyn Procedure] =
    &[&WeightedBonferroni, &WeightedHolm, &WeightedBenjaminiHochberg];

/// Look up a procedure by registry name.
pub fn by_name(name: &str) -> Option<&'static dyn Procedure> {
    REGISTRY.iter().copied().find(|p| p.name() == name)
}

/// Registry names, for CLI help and error messages.
pub fn names() -> Vec<&'static str> {
    REGISTRY.iter().map(|p| p.name()).collect()
}

// Free-function forms of the three procedures.

pub fn weighted_bonferroni(
    battery: &TestBattery,
    weights: &WeightVector,
    alpha: Probability,
) -> Result<RejectionSet> {
    WeightedBonferroni.reject(battery, weights, alpha)
}

pub fn weighted_holm(
    battery: &TestBattery,
    weights: &WeightVector,
    alpha: Probability,
) -> Result<RejectionSet> {
    WeightedHolm.reject(battery, weights, alpha)
}

pub fn weighted_bh(
    battery: &TestBattery,
    weights: &WeightVector,
    alpha: Probability,
) -> Result<RejectionSet> {
    WeightedBenjaminiHochberg.reject(battery, weights, alpha)
}

/// Classical (unweighted) Benjamini-Hochberg.
pub fn bh(battery: &TestBattery, alpha: Probability) -> Result<RejectionSet> {
    WeightedBenjaminiHochberg.reject(battery, &WeightVector::unit(battery.m()), alpha)
}

// --- Asymptotic step-up threshold ------------------------------------------

/// The limiting rejection threshold of the step-up procedure under a
/// two-group model, from [`bh_asymptotic_threshold`].
#[derive(Debug, Clone, Copy)]
pub struct BhAsymptotic {
    /// Largest positive solution of `H(u) = beta * u`, or 0 when none is
    /// numerically detectable.
    pub u_star: f64,
    /// Slope `(1/alpha - a0) / (1 - a0)`.
    pub beta: f64,
    /// False when only the trivial root u = 0 was found.
    pub positive_root: bool,
    /// Whether `alpha/m <= u_star <= alpha` held for the returned root.
    pub bounds_hold: bool,
}

/// Asymptotic threshold of the step-up procedure when a fraction `a0` of
/// hypotheses are null and the alternatives share the statistic mean
/// `alt_mean`.
///
/// The p-value CDF of an alternative is
/// `H(u) = upper_tail(upper_quantile(u) - alt_mean)`; in the large-m limit
/// the procedure rejects p-values below the largest u solving
/// `H(u) = beta u`. H is concave with infinite slope at 0, so a positive
/// root is unique when it exists; `beta > 1` guarantees `u_star < alpha`.
pub fn bh_asymptotic_threshold(
    alt_mean: f64,
    a0: f64,
    alpha: Probability,
    m: usize,
) -> Result<BhAsymptotic> {
    let alpha = alpha.get();
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0, 1), got {alpha}")));
    }
    if !(alt_mean > 0.0) {
        return Err(Error::domain(format!(
            "alternative mean must be positive, got {alt_mean}"
        )));
    }
    if !(0.0..1.0).contains(&a0) {
        return Err(Error::domain(format!("null fraction must be in [0, 1), got {a0}")));
    }
    if m == 0 {
        return Err(Error::contract("m must be >= 1"));
    }
    let beta = (1.0 / alpha - a0) / (1.0 - a0);
    let g = |u: f64| distfn::upper_tail(distfn::upper_quantile(u).unwrap() - alt_mean) - beta * u;

    // Geometric scan for the last sign change from positive to negative.
    // g > 0 just above zero whenever the root is numerically visible.
    const GRID: usize = 2000;
    let lo_exp = -18.0_f64;
    let hi = 1.0_f64 - 1e-12;
    let mut bracket = None;
    let mut prev_u = 10f64.powf(lo_exp);
    let mut prev_g = g(prev_u);
    for i in 1..=GRID {
        let u = 10f64.powf(lo_exp + (i as f64 / GRID as f64) * (hi.log10() - lo_exp));
        let gu = g(u);
        if prev_g > 0.0 && gu <= 0.0 {
            bracket = Some((prev_u, u));
        }
        prev_u = u;
        prev_g = gu;
    }
    let Some((lo, hi)) = bracket else {
        return Ok(BhAsymptotic { u_star: 0.0, beta, positive_root: false, bounds_hold: false });
    };
    let u_star = bisect(g, lo, hi, 0.0)?;
    let bounds_hold = u_star >= alpha / m as f64 * (1.0 - 1e-9) && u_star <= alpha * (1.0 + 1e-9);
    Ok(BhAsymptotic { u_star, beta, positive_root: true, bounds_hold })
}
