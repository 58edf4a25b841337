//! The power-optimal weight family and its normalizing constant.
//!
//! For a configuration of effect sizes, the weights that maximize average
//! power under the mean-one budget have the closed form
//! `w_j = (m/alpha) * upper_tail(xi_j/2 + c/xi_j)` for positive effects
//! and zero otherwise, with the single constant c chosen so the weights
//! average to one. The map from c to that average is strictly decreasing,
//! so c is found by bracketed bisection. c can be negative (it is, for
//! well-separated alternatives) and carries units of a squared Gaussian
//! argument.
//!
//! The same rejection region can be written as a statistic cutoff
//! `T_j > xi_j/2 + c/xi_j`; [`equivalent_cutoffs`] exposes that form and
//! [`cutoff_power`] the resulting power `upper_tail(c/xi - xi/2)`.

use crate::error::{Error, Result};
use crate::hypotheses::{
    EffectConfiguration, MixtureAtom, MixtureSpec, Probability, WeightVector,
};
use crate::roots::bisect_decreasing;
use crate::distfn;

/// Effects in (0, XI_FLOOR] are treated as null: c/xi is numerically
/// useless there and the attainable power is negligible anyway.
pub const XI_FLOOR: f64 = 1e-12;

/// The optimal weight of an effect of size `xi` given the normalizing
/// constant `c`: `(m/alpha) * upper_tail(xi/2 + c/xi)`, zero for xi <= 0.
///
/// Far-tail arguments are assembled in log space so the m/alpha factor is
/// applied before the exponential underflows.
pub fn rho(xi: f64, c: f64, alpha: Probability, m: usize) -> f64 {
    if xi <= XI_FLOOR {
        return 0.0;
    }
    let t = 0.5 * xi + c / xi;
    let scale = m as f64 / alpha.get();
    if t > 8.0 {
        (scale.ln() + distfn::log_upper_tail(t)).exp()
    } else {
        scale * distfn::upper_tail(t)
    }
}

/// Power of the optimal-weight test at effect `xi`:
/// `upper_tail(c/xi - xi/2)`. Zero for non-positive effects.
pub fn cutoff_power(xi: f64, c: f64) -> f64 {
    if xi <= XI_FLOOR {
        return 0.0;
    }
    distfn::upper_tail(c / xi - 0.5 * xi)
}

/// Root of `sum_k mass_k * rho(x_k, c) = 1` over the positive-effect
/// atoms. Returns (c, residual).
fn solve_c_atoms(
    locations: &[f64],
    masses: &[f64],
    alpha: Probability,
    m: usize,
) -> Result<(f64, f64)> {
    let g = |c: f64| {
        locations
            .iter()
            .zip(masses)
            .map(|(&x, &q)| q * rho(x, c, alpha, m))
            .sum::<f64>()
            - 1.0
    };
    let c = bisect_decreasing(&g, 0.0, 1e12, 0.0)?;
    Ok((c, g(c).abs()))
}

/// Optimal weights for a full configuration.
#[derive(Debug, Clone)]
pub struct OptimalWeightSolution {
    pub c: f64,
    pub weights: WeightVector,
    /// Mean power over the positive effects at these weights.
    pub oracle_power: f64,
    /// Final |mean(rho_c) - 1| from the normalization solve.
    pub residual: f64,
}

/// Solve for the normalizing constant of `config` and materialize the
/// weight vector. Effects are read on the one-sided scale; anything at or
/// below [`XI_FLOOR`] gets weight zero.
pub fn solve_c(config: &EffectConfiguration, alpha: Probability) -> Result<OptimalWeightSolution> {
    let m = config.m();
    // Group repeated effect sizes into atoms; grouped configurations (the
    // common case downstream) then cost O(#distinct) per solver step.
    let mut vals: Vec<f64> = config
        .means()
        .iter()
        .copied()
        .filter(|&x| x > XI_FLOOR)
        .collect();
    if vals.is_empty() {
        return Err(Error::domain(
            "no positive effects: the weight normalization has no solution",
        ));
    }
    vals.sort_by(f64::total_cmp);
    let mut locations = Vec::new();
    let mut masses = Vec::new();
    let mut i = 0;
    while i < vals.len() {
        let mut j = i + 1;
        while j < vals.len() && vals[j] == vals[i] {
            j += 1;
        }
        locations.push(vals[i]);
        masses.push((j - i) as f64 / m as f64);
        i = j;
    }

    let (c, residual) = solve_c_atoms(&locations, &masses, alpha, m)?;
    let weights = WeightVector::new(
        config
            .means()
            .iter()
            .map(|&x| rho(x, c, alpha, m))
            .collect(),
    )?;
    let alt_count: f64 = masses.iter().sum::<f64>() * m as f64;
    let oracle_power = locations
        .iter()
        .zip(&masses)
        .map(|(&x, &q)| q * m as f64 * cutoff_power(x, c))
        .sum::<f64>()
        / alt_count;
    Ok(OptimalWeightSolution { c, weights, oracle_power, residual })
}

/// Optimal weights for a mixing distribution; one weight per atom.
#[derive(Debug, Clone)]
pub struct MixtureWeightSolution {
    pub c: f64,
    /// Weight at each atom, in the mixture's atom order. These average
    /// to one against the mixture, not arithmetically.
    pub atom_weights: Vec<f64>,
    /// Mass-weighted mean power over the positive-location atoms.
    pub oracle_power: f64,
    pub residual: f64,
}

/// Solve `integral of rho_c against q = 1` for a discrete mixture.
pub fn solve_c_mixture(
    q: &MixtureSpec,
    alpha: Probability,
    m: usize,
) -> Result<MixtureWeightSolution> {
    let mut locations = Vec::new();
    let mut masses = Vec::new();
    for atom in q.atoms() {
        if atom.location > XI_FLOOR && atom.mass > 0.0 {
            locations.push(atom.location);
            masses.push(atom.mass);
        }
    }
    if locations.is_empty() {
        return Err(Error::domain(
            "mixture has no mass on positive locations: no normalization exists",
        ));
    }
    let (c, residual) = solve_c_atoms(&locations, &masses, alpha, m)?;
    let atom_weights: Vec<f64> = q
        .atoms()
        .iter()
        .map(|a| rho(a.location, c, alpha, m))
        .collect();
    let alt_mass: f64 = masses.iter().sum();
    let oracle_power = locations
        .iter()
        .zip(&masses)
        .map(|(&x, &mass)| mass * cutoff_power(x, c))
        .sum::<f64>()
        / alt_mass;
    Ok(MixtureWeightSolution { c, atom_weights, oracle_power, residual })
}

/// Statistic-scale cutoffs equivalent to the weighted p-value thresholds:
/// `t_j = xi_j/2 + c/xi_j`, infinite where the weight is zero. Rejecting
/// when `T_j > t_j` is the same event as `p_j <= alpha w_j / m` when
/// `p_j = upper_tail(T_j)`.
pub fn equivalent_cutoffs(solution: &OptimalWeightSolution, config: &EffectConfiguration) -> Vec<f64> {
    config
        .means()
        .iter()
        .map(|&x| {
            if x > XI_FLOOR {
                0.5 * x + solution.c / x
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// The two-mixture construction showing that optimal weights are not
/// continuous in the mixing distribution: a contaminating atom at a tiny
/// location u soaks up nearly all the weight that the main alternative at
/// xi held before, even though the two mixtures are close in
/// Kolmogorov-Smirnov distance.
#[derive(Debug, Clone, Copy)]
pub struct DiscontinuityExample {
    /// Quantile A = upper_quantile(alpha / (m (gamma K + a))).
    pub a_upper: f64,
    /// Quantile B = upper_quantile(K alpha / (m (gamma K + a))).
    pub b_upper: f64,
    /// Main alternative location, A + sqrt(A^2 - 2c).
    pub xi: f64,
    /// Contaminating location, B - sqrt(B^2 - 2c).
    pub u: f64,
    pub w_xi_under_q: f64,
    pub w_xi_under_q_tilde: f64,
    /// w under q divided by w under q-tilde.
    pub ratio: f64,
    /// Kolmogorov-Smirnov distance between the two mixtures (= gamma).
    pub ks_distance: f64,
    pub c_under_q: f64,
    pub c_under_q_tilde: f64,
}

/// Build the contamination pair q = (1-a) d0 + a d_xi and
/// q~ = (1-a-gamma) d0 + gamma d_u + a d_xi whose optimal weights at xi
/// differ by the factor (gamma K + a)/a, and solve both numerically.
pub fn discontinuity_example(
    m: usize,
    alpha: Probability,
    a: f64,
    gamma: f64,
    k_factor: f64,
    c: f64,
) -> Result<DiscontinuityExample> {
    if m == 0 {
        return Err(Error::contract("m must be >= 1"));
    }
    if !(a > 0.0 && gamma > 0.0 && a + gamma <= 1.0) {
        return Err(Error::domain(format!(
            "need a > 0, gamma > 0, a + gamma <= 1; got a = {a}, gamma = {gamma}"
        )));
    }
    if !(k_factor > 0.0) {
        return Err(Error::domain(format!("K must be positive, got {k_factor}")));
    }
    let arg_a = alpha.get() / (m as f64 * (gamma * k_factor + a));
    let arg_b = k_factor * arg_a;
    if !(arg_a > 0.0 && arg_a < 1.0) {
        return Err(Error::domain(format!(
            "alpha/(m(gamma K + a)) = {arg_a} is outside (0, 1)"
        )));
    }
    if !(arg_b > 0.0 && arg_b < 1.0) {
        return Err(Error::domain(format!(
            "K alpha/(m(gamma K + a)) = {arg_b} is outside (0, 1)"
        )));
    }
    let a_upper = distfn::upper_quantile(arg_a)?;
    let b_upper = distfn::upper_quantile(arg_b)?;
    if a_upper * a_upper < 2.0 * c {
        return Err(Error::domain(format!(
            "A^2 = {} < 2c = {}: xi is not real",
            a_upper * a_upper,
            2.0 * c
        )));
    }
    if b_upper * b_upper < 2.0 * c {
        return Err(Error::domain(format!(
            "B^2 = {} < 2c = {}: u is not real",
            b_upper * b_upper,
            2.0 * c
        )));
    }
    let xi = a_upper + (a_upper * a_upper - 2.0 * c).sqrt();
    let u = b_upper - (b_upper * b_upper - 2.0 * c).sqrt();
    if u <= XI_FLOOR {
        return Err(Error::domain(format!(
            "contaminating location u = {u} is not positive; pick c > 0"
        )));
    }

    let q = MixtureSpec::two_point(a, xi)?;
    let q_tilde = MixtureSpec::new(vec![
        MixtureAtom { mass: 1.0 - a - gamma, location: 0.0 },
        MixtureAtom { mass: gamma, location: u },
        MixtureAtom { mass: a, location: xi },
    ])?;
    let sol_q = solve_c_mixture(&q, alpha, m)?;
    let sol_qt = solve_c_mixture(&q_tilde, alpha, m)?;
    let w_xi_under_q = sol_q.atom_weights[1];
    let w_xi_under_q_tilde = sol_qt.atom_weights[2];
    Ok(DiscontinuityExample {
        a_upper,
        b_upper,
        xi,
        u,
        w_xi_under_q,
        w_xi_under_q_tilde,
        ratio: w_xi_under_q / w_xi_under_q_tilde,
        ks_distance: q.ks_distance(&q_tilde),
        c_under_q: sol_q.c,
        c_under_q_tilde: sol_qt.c,
    })
}
