//! Power of weighted threshold tests under normal shift alternatives.
//!
//! A test with weight w is run at level `alpha * w / m`, so its one-sided
//! power at effect size xi is `upper_tail(upper_quantile(alpha w / m) - xi)`.
//! Everything else in this module aggregates that formula: averages over
//! the alternatives of a configuration, expectations over a mixing
//! distribution, and the value attained by the optimal weights.
//!
//! Conventions at the edges: weight 0 means an infinite threshold and
//! power 0; `alpha w / m >= 1` means the threshold is -infinity and the
//! power is 1 (the continuous limit of the formula).

use crate::error::{Error, Result};
use crate::hypotheses::{EffectConfiguration, MixtureSpec, Probability, Sidedness, WeightVector};
use crate::{distfn, optimal};

/// A power value; always in [0, 1].
pub type PowerValue = f64;

/// One-sided power `P(Z + xi > z_{alpha w / m})`.
pub fn power_one_sided(xi: f64, w: f64, alpha: Probability, m: usize) -> PowerValue {
    let level = alpha.get() * w / m as f64;
    if level >= 1.0 {
        return 1.0;
    }
    if !(level > 0.0) {
        return 0.0;
    }
    let z = distfn::upper_quantile(level).expect("level is in (0, 1)");
    distfn::upper_tail(z - xi)
}

/// Two-sided power `P(|Z + xi| > z_{alpha w / 2m})`. Symmetric in xi.
pub fn power_two_sided(xi: f64, w: f64, alpha: Probability, m: usize) -> PowerValue {
    let level = alpha.get() * w / m as f64;
    if level >= 1.0 {
        return 1.0;
    }
    if !(level > 0.0) {
        return 0.0;
    }
    let z = distfn::upper_quantile(level / 2.0).expect("level/2 is in (0, 0.5)");
    // The two rejection regions are disjoint (z > 0), so the sum is <= 1.
    distfn::upper_tail(z - xi) + distfn::upper_tail(z + xi)
}

/// Mean power over the alternatives of `config`, each tested at its own
/// weight. Uses the configuration's sidedness.
pub fn average_power(
    config: &EffectConfiguration,
    weights: &WeightVector,
    alpha: Probability,
) -> Result<PowerValue> {
    if weights.len() != config.m() {
        return Err(Error::contract(format!(
            "configuration has {} means but weight vector has {}",
            config.m(),
            weights.len()
        )));
    }
    if config.m1() == 0 {
        return Err(Error::domain(
            "average power is undefined without alternatives",
        ));
    }
    let m = config.m();
    let mut total = 0.0;
    for (j, &xi) in config.means().iter().enumerate() {
        if !config.is_alternative(j) {
            continue;
        }
        total += match config.sidedness() {
            Sidedness::OneSided => power_one_sided(xi, weights.get(j), alpha, m),
            Sidedness::TwoSided => power_two_sided(xi, weights.get(j), alpha, m),
        };
    }
    Ok(total / config.m1() as f64)
}

/// Mean one-sided power when effects are drawn from the mixing
/// distribution `q` and each atom location gets the matching entry of
/// `atom_weights`. The weights must satisfy the budget
/// `sum(mass * weight) = 1`; the average runs over the positive-location
/// mass only.
pub fn average_power_mixture(
    q: &MixtureSpec,
    atom_weights: &[f64],
    alpha: Probability,
    m: usize,
) -> Result<PowerValue> {
    if atom_weights.len() != q.atoms().len() {
        return Err(Error::contract(format!(
            "mixture has {} atoms but {} weights were supplied",
            q.atoms().len(),
            atom_weights.len()
        )));
    }
    if let Some(bad) = atom_weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::domain(format!(
            "atom weights must be finite and >= 0, got {bad}"
        )));
    }
    let budget: f64 = q
        .atoms()
        .iter()
        .zip(atom_weights)
        .map(|(a, &w)| a.mass * w)
        .sum();
    if (budget - 1.0).abs() > crate::hypotheses::WEIGHT_BUDGET_TOL {
        return Err(Error::contract(format!(
            "mixture weights must integrate to 1 against q (got {budget})"
        )));
    }
    let mut alt_mass = 0.0;
    let mut total = 0.0;
    for (a, &w) in q.atoms().iter().zip(atom_weights) {
        if a.location > 0.0 {
            alt_mass += a.mass;
            total += a.mass * power_one_sided(a.location, w, alpha, m);
        }
    }
    if !(alt_mass > 0.0) {
        return Err(Error::domain("mixture has no mass on positive locations"));
    }
    Ok(total / alt_mass)
}

/// Mean power over alternatives when each is tested with its optimal
/// weight; cheaper than materializing the weights because the cutoff form
/// `upper_tail(c/xi - xi/2)` needs only the normalizing constant c.
pub fn oracle_power(config: &EffectConfiguration, alpha: Probability) -> Result<PowerValue> {
    Ok(optimal::solve_c(config, alpha)?.oracle_power)
}
