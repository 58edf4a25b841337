//! Closed-form binary weight designs.
//!
//! Both designs work at the marginal effect z_{alpha/m}, the mean a test
//! statistic needs for 50% power under unit weights. `design_min_power`
//! fixes the up-weighted fraction epsilon and asks for power 1 - beta on
//! it, spending as little of the budget as possible so the floor on the
//! remaining hypotheses stays as high as it can. `design_max_count` turns
//! the problem around: given the target 1 - beta and a floor delta for
//! everything else, it finds the largest fraction that can be served.
//!
//! Solutions are two-valued weight vectors: the per-test level needed for
//! a given power is a fixed number c, so the budget splits into k
//! hypotheses at w1 = cm/alpha and the rest at whatever is left over.

use crate::distfn;
use crate::error::{Error, Result};
use crate::hypotheses::Probability;
use crate::power::power_one_sided;
use crate::robustness::BinaryWeightScheme;

/// A solved design, assessed at the marginal effect z_{alpha/m}.
#[derive(Debug, Clone, Copy)]
pub struct DesignResult {
    pub scheme: BinaryWeightScheme,
    /// Power the up-weighted hypotheses are designed to reach.
    pub target_power: Probability,
    /// Power at the small weight w0: the floor across the whole family.
    pub min_power: Probability,
    /// Per-test level spent on each up-weighted hypothesis, alpha w1 / m.
    pub c_value: f64,
}

fn check_alpha_m(alpha: Probability, m: usize) -> Result<f64> {
    if !(alpha.get() > 0.0 && alpha.get() < 1.0) {
        return Err(Error::domain(format!(
            "alpha must be in (0, 1), got {}",
            alpha.get()
        )));
    }
    if m == 0 {
        return Err(Error::contract("m must be >= 1"));
    }
    distfn::upper_quantile(alpha.get() / m as f64)
}

fn check_beta(beta: Probability) -> Result<()> {
    if !(beta.get() > 0.0 && beta.get() < 0.5) {
        return Err(Error::domain(format!(
            "beta must be in (0, 1/2), got {}",
            beta.get()
        )));
    }
    Ok(())
}

/// Give a fraction `epsilon` of hypotheses power `1 - beta` at the
/// marginal effect while keeping the floor on the rest as high as
/// possible. The solution is the binary scheme whose large weight makes
/// the per-test level exactly c = Phibar(z_{alpha/m} + z_{1-beta}).
///
/// Infeasible when the favored fraction alone would exhaust the budget
/// (alpha - epsilon c m <= 0).
pub fn design_min_power(
    epsilon: Probability,
    beta: Probability,
    alpha: Probability,
    m: usize,
) -> Result<DesignResult> {
    let eps = epsilon.get();
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must be in (0, 1), got {eps}"
        )));
    }
    check_beta(beta)?;
    let xi_m = check_alpha_m(alpha, m)?;
    let z_pow = distfn::upper_quantile(1.0 - beta.get())?;
    let c = distfn::upper_tail(xi_m + z_pow);
    let leftover = alpha.get() - eps * c * m as f64;
    if leftover <= 0.0 {
        return Err(Error::infeasible(format!(
            "epsilon = {eps} hypotheses at power {} need level {:.3e} each, \
             more than alpha = {} allows",
            1.0 - beta.get(),
            c,
            alpha.get()
        )));
    }
    let b = c * m as f64 * (1.0 - eps) / leftover;
    let scheme = BinaryWeightScheme::new(eps, b, m)?;
    let min_power = power_one_sided(xi_m, scheme.w0, alpha, m);
    Ok(DesignResult {
        scheme,
        target_power: Probability::new_unchecked(1.0 - beta.get()),
        min_power: Probability::new_unchecked(min_power),
        c_value: c,
    })
}

/// Maximize the number of hypotheses reaching power `1 - beta` at the
/// marginal effect, subject to every hypothesis keeping power at least
/// `delta`. Both weights are pinned by their power constraints and the
/// budget fixes the fraction: epsilon = (1 - w0) / (w1 - w0). With
/// delta = 0 the rest of the family is written off entirely (w0 = 0).
///
/// The scheme's k is floor(m epsilon); `scheme.epsilon` carries the
/// exact fraction so the truncation is auditable. One more hypothesis
/// at w1 would overrun the budget: k' > m epsilon forces
/// k' w1 + (m - k') w0 > m.
pub fn design_max_count(
    beta: Probability,
    delta: Probability,
    alpha: Probability,
    m: usize,
) -> Result<DesignResult> {
    check_beta(beta)?;
    if delta.get() >= 1.0 - beta.get() {
        return Err(Error::domain(format!(
            "delta = {} must stay below the target power {}",
            delta.get(),
            1.0 - beta.get()
        )));
    }
    let xi_m = check_alpha_m(alpha, m)?;
    let scale = m as f64 / alpha.get();
    let c = distfn::upper_tail(xi_m + distfn::upper_quantile(1.0 - beta.get())?);
    let w1 = scale * c;
    let w0 = if delta.get() == 0.0 {
        0.0
    } else {
        scale * distfn::upper_tail(xi_m + distfn::upper_quantile(delta.get())?)
    };
    if w1 <= 1.0 {
        return Err(Error::infeasible(format!(
            "target power {} is reachable at unit weights; nothing to design (w1 = {w1})",
            1.0 - beta.get()
        )));
    }
    if w0 >= 1.0 {
        return Err(Error::infeasible(format!(
            "floor delta = {} already holds at unit weights (w0 = {w0})",
            delta.get()
        )));
    }
    let eps = (1.0 - w0) / (w1 - w0);
    let scheme = BinaryWeightScheme {
        epsilon: eps,
        b: w1 / w0,
        w1,
        w0,
        k: (m as f64 * eps).floor() as usize,
    };
    let min_power = power_one_sided(xi_m, w0, alpha, m);
    Ok(DesignResult {
        scheme,
        target_power: Probability::new_unchecked(1.0 - beta.get()),
        min_power: Probability::new_unchecked(min_power),
        c_value: c,
    })
}

/// Build a binary scheme directly from its raw ratio. Check
/// [`BinaryWeightScheme::is_degenerate`] before expanding: rounding can
/// leave nothing (or everything) up-weighted.
pub fn binary_scheme(epsilon: f64, b: f64, m: usize) -> Result<BinaryWeightScheme> {
    BinaryWeightScheme::new(epsilon, b, m)
}
