//! How much power weighting can lose when the guesses behind the weights
//! are wrong, and how bad the worst case can get.
//!
//! The central object is the binary scheme: a fraction epsilon of
//! hypotheses get the large weight w1 and the rest get w0, with the raw
//! ratio B normalized so the weights average to one. The robustness
//! function R(B, epsilon) compares up-weighting the true alternative
//! against down-weighting it, relative to not weighting at all; it is
//! zero at B = 1, rises, and (once epsilon exceeds the per-test level)
//! eventually turns negative at the turnaround point B0.
//!
//! The worst-case analysis asks a harder question: an adversary moves a
//! fraction gamma of the null mass to a small effect u, chosen to soak up
//! as much weight as possible before the weights are computed. The least
//! favorable u and the resulting power floor have closed forms up to one
//! scalar root.

use crate::error::{Error, Result};
use crate::hypotheses::{Probability, WeightVector};
use crate::power::{power_one_sided, PowerValue};
use crate::roots::{bisect, bisect_decreasing, golden_max};
use crate::{distfn, optimal};

/// Two-level weights: w1 on a fraction epsilon of hypotheses, w0 on the
/// rest, normalized from the raw ratio B so that the mean is one.
#[derive(Debug, Clone, Copy)]
pub struct BinaryWeightScheme {
    pub epsilon: f64,
    /// Raw up/down ratio; w1/w0 = b exactly.
    pub b: f64,
    pub w1: f64,
    pub w0: f64,
    /// Number of up-weighted hypotheses, round(epsilon * m) for the m
    /// given at construction.
    pub k: usize,
}

impl BinaryWeightScheme {
    pub fn new(epsilon: f64, b: f64, m: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::domain(format!(
                "epsilon must be in (0, 1), got {epsilon}"
            )));
        }
        if !(b >= 1.0) {
            return Err(Error::domain(format!("B must be >= 1, got {b}")));
        }
        let denom = epsilon * b + (1.0 - epsilon);
        Ok(BinaryWeightScheme {
            epsilon,
            b,
            w1: b / denom,
            w0: 1.0 / denom,
            k: (epsilon * m as f64).round() as usize,
        })
    }

    /// True when rounding leaves nothing (or everything) up-weighted.
    pub fn is_degenerate(&self, m: usize) -> bool {
        let k = (self.epsilon * m as f64).round() as usize;
        k == 0 || k == m
    }

    /// Materialize as a length-m weight vector: round(epsilon m) entries
    /// at w1, the rest at w0, renormalized so the mean is exactly one
    /// (a no-op when epsilon m is integral).
    pub fn weight_vector(&self, m: usize) -> Result<WeightVector> {
        if m == 0 {
            return Err(Error::contract("m must be >= 1"));
        }
        let k = ((self.epsilon * m as f64).round() as usize).min(m);
        let mut raw = vec![self.w0; m];
        for w in raw.iter_mut().take(k) {
            *w = self.w1;
        }
        let (wv, _) = WeightVector::normalized(raw)?;
        Ok(wv)
    }
}

fn check_level_inputs(xi: f64, alpha: Probability, m: usize) -> Result<()> {
    if !xi.is_finite() {
        return Err(Error::domain(format!("xi must be finite, got {xi}")));
    }
    if !(alpha.get() > 0.0 && alpha.get() < 1.0) {
        return Err(Error::domain(format!(
            "alpha must be in (0, 1), got {}",
            alpha.get()
        )));
    }
    if m == 0 {
        return Err(Error::contract("m must be >= 1"));
    }
    Ok(())
}

fn r_two_point(b: f64, epsilon: f64, xi: f64, alpha: Probability, m: usize) -> f64 {
    let denom = epsilon * b + (1.0 - epsilon);
    let w1 = b / denom;
    let w0 = 1.0 / denom;
    power_one_sided(xi, w1, alpha, m) + power_one_sided(xi, w0, alpha, m)
        - 2.0 * power_one_sided(xi, 1.0, alpha, m)
}

/// The robustness function R(B, epsilon) at effect xi: the power gained
/// by up-weighting the alternative plus the power kept when
/// down-weighting it, minus twice the unweighted power. Positive means
/// weighting is worth the risk even if the guess lands on w0.
pub fn robustness_two_point(
    b: f64,
    epsilon: f64,
    xi: f64,
    alpha: Probability,
    m: usize,
) -> Result<f64> {
    check_level_inputs(xi, alpha, m)?;
    if !(b >= 1.0) {
        return Err(Error::domain(format!("B must be >= 1, got {b}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    Ok(r_two_point(b, epsilon, xi, alpha, m))
}

/// Lower-tail probability at the weighted threshold:
/// `Phi(z_{alpha w/m} - xi)`, with w = 0 giving 1 and a saturated level
/// giving 0.
fn lower_at_weight(w: f64, xi: f64, alpha: Probability, m: usize) -> f64 {
    let level = alpha.get() * w / m as f64;
    if !(level > 0.0) {
        return 1.0;
    }
    if level >= 1.0 {
        return 0.0;
    }
    let z = distfn::upper_quantile(level).expect("level in (0, 1)");
    distfn::upper_tail(xi - z)
}

/// Outcome of the worst-case weighting condition at a single effect size.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseCondition {
    /// `Phi(z_{alpha B/m} - xi) + Phi(z_{alpha b/m} - xi) - 2 Phi(z_{alpha/m} - xi)`.
    pub r_bb: f64,
    /// Weighting cannot hurt at this xi exactly when r_bb <= 0.
    pub robust: bool,
    /// The gain term `Phi(z_{alpha/m} - xi) - Phi(z_{alpha B/m} - xi)`.
    pub delta: f64,
}

/// Necessary and sufficient condition for a weight scheme whose smallest
/// weight is `b_down` and whose smallest above-one weight is `b_up` to be
/// at least as powerful as unit weights at effect xi, whichever hypothesis
/// turns out to be the alternative.
pub fn worst_case_condition(
    xi: f64,
    b_down: f64,
    b_up: f64,
    alpha: Probability,
    m: usize,
) -> Result<WorstCaseCondition> {
    check_level_inputs(xi, alpha, m)?;
    if !(0.0..=1.0).contains(&b_down) {
        return Err(Error::domain(format!(
            "the down-weight must be in [0, 1], got {b_down}"
        )));
    }
    if !(b_up >= 1.0) {
        return Err(Error::domain(format!(
            "the up-weight must be >= 1, got {b_up}"
        )));
    }
    let up = lower_at_weight(b_up, xi, alpha, m);
    let down = lower_at_weight(b_down, xi, alpha, m);
    let unit = lower_at_weight(1.0, xi, alpha, m);
    let r_bb = up + down - 2.0 * unit;
    Ok(WorstCaseCondition { r_bb, robust: r_bb <= 0.0, delta: unit - up })
}

/// Effect size below which a scheme with down-weight 0 and up-weight
/// `b_up` is guaranteed robust: `z_{alpha/m} - 1/(z_{alpha/m} - z_{B alpha/m})`.
/// Meaningful (positive) only when B is well above e; small B gives a
/// negative value and the guarantee covers nothing.
pub fn safe_zone_bound(b_up: f64, alpha: Probability, m: usize) -> Result<f64> {
    check_level_inputs(0.0, alpha, m)?;
    if !(b_up >= 2.0) {
        return Err(Error::domain(format!(
            "the bound requires B >= 2, got {b_up}"
        )));
    }
    let level_b = alpha.get() * b_up / m as f64;
    if level_b >= 1.0 {
        return Err(Error::domain(format!(
            "B alpha / m = {level_b} leaves no threshold to compare"
        )));
    }
    let z1 = distfn::upper_quantile(alpha.get() / m as f64)?;
    let zb = distfn::upper_quantile(level_b)?;
    Ok(z1 - 1.0 / (z1 - zb))
}

/// Where the robustness function gives out as B grows, at a fixed epsilon.
#[derive(Debug, Clone, Copy)]
pub struct Turnaround {
    /// Last B with R(B) > 0; infinite when R never turns negative within
    /// the bracket limit (epsilon at or below alpha/m), and 1 when R is
    /// negative immediately (epsilon too large to up-weight at all).
    pub b0: f64,
    /// argmax of R on [1, b0].
    pub b_star: f64,
    pub r_at_b_star: f64,
}

/// Find the turnaround point B0 (the sign change of R beyond its maximum)
/// and the maximizing B_star. The conventional effect size is the
/// marginal one, xi = z_{alpha/m}; callers pass xi explicitly.
pub fn turnaround(epsilon: f64, xi: f64, alpha: Probability, m: usize) -> Result<Turnaround> {
    check_level_inputs(xi, alpha, m)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    let r = |b: f64| r_two_point(b, epsilon, xi, alpha, m);

    const B_LIMIT: f64 = 1e12;
    let mut b_neg = None;
    let mut b = 2.0;
    while b <= B_LIMIT {
        if r(b) < 0.0 {
            b_neg = Some(b);
            break;
        }
        b *= 2.0;
    }
    let Some(b_neg) = b_neg else {
        let b_star = golden_max(r, 1.0, B_LIMIT, 1e-8 * B_LIMIT);
        return Ok(Turnaround { b0: f64::INFINITY, b_star, r_at_b_star: r(b_star) });
    };
    let b_star = golden_max(&r, 1.0, b_neg, 1e-8);
    let r_star = r(b_star);
    if r_star <= 0.0 {
        // R goes negative straight away: nothing positive to give out.
        return Ok(Turnaround { b0: 1.0, b_star: 1.0, r_at_b_star: 0.0 });
    }
    let b0 = bisect(r, b_star, b_neg, 0.0)?;
    Ok(Turnaround { b0, b_star, r_at_b_star: r_star })
}

/// Power floor under adversarial contamination of the mixing distribution.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseReport {
    /// z_{alpha/(m(gamma+a))}: the largest effect a contaminating atom can
    /// fake while soaking up the whole budget.
    pub xi0: f64,
    /// Effect size up to which the weighted worst case still beats plain
    /// Bonferroni; absent when the defining quantiles do not exist.
    pub xi_star: Option<f64>,
    /// The binding normalization constant C(xi): the endpoint closed form
    /// when u is restricted to (0, xi] and xi <= xi0, otherwise the
    /// interior root c_star.
    pub c_of_xi: f64,
    /// Least favorable contamination location.
    pub u_star: f64,
    pub c_star: f64,
    pub inf_power: PowerValue,
    pub bonf_power: PowerValue,
    pub beats_bonf: bool,
}

/// Worst-case power at effect xi when an adversary may move mass gamma of
/// the nulls to any location u (restricted to u <= xi when `restrict_u`)
/// before the optimal weights are computed against the contaminated
/// mixture. The alternative keeps mass a at xi.
pub fn misspec_worst_case(
    xi: f64,
    a: f64,
    gamma: f64,
    alpha: Probability,
    m: usize,
    restrict_u: bool,
) -> Result<WorstCaseReport> {
    check_level_inputs(xi, alpha, m)?;
    if !(xi > 0.0) {
        return Err(Error::domain(format!("xi must be positive, got {xi}")));
    }
    if !(a >= 0.0 && gamma >= 0.0 && a + gamma <= 1.0) {
        return Err(Error::domain(format!(
            "need a >= 0, gamma >= 0, a + gamma <= 1; got a = {a}, gamma = {gamma}"
        )));
    }
    let base_level = alpha.get() / m as f64;
    if gamma + a < base_level {
        return Err(Error::domain(format!(
            "gamma + a = {} is below alpha/m = {base_level}; no contamination scenario exists",
            gamma + a
        )));
    }
    let xi0 = distfn::upper_quantile(alpha.get() / (m as f64 * (gamma + a)))?;
    let bonf_power = power_one_sided(xi, 1.0, alpha, m);

    // Crossing point with Bonferroni.
    let z_am = distfn::upper_quantile(base_level)?;
    let q = alpha.get() * (1.0 - a) / (m as f64 * gamma);
    let xi_star = if q > 0.0 && q < 1.0 {
        let zq = distfn::upper_quantile(q)?;
        let disc = z_am * z_am - zq * zq;
        if disc >= 0.0 {
            Some(z_am + disc.sqrt())
        } else {
            None
        }
    } else {
        None
    };

    let (c_of_xi, c_star, u_star) = if restrict_u && xi <= xi0 {
        // The supremum of c(u) over u in (0, xi] binds at the endpoint,
        // where the normalization collapses to (gamma + a) upper_tail(
        // xi/2 + c/xi) = alpha/m, i.e. c = xi xi0 - xi^2/2.
        let c_end = xi * xi0 - 0.5 * xi * xi;
        (c_end, c_end, xi)
    } else {
        let g = |c: f64| {
            gamma * distfn::upper_tail((2.0 * c).sqrt())
                + a * distfn::upper_tail(0.5 * xi + c / xi)
                - base_level
        };
        if g(0.0) <= 0.0 {
            return Err(Error::solver(
                "the least favorable contamination point is not interior: \
                 gamma + a is too close to alpha/m",
            ));
        }
        let c = bisect_decreasing(g, 0.0, 1e12, 0.0)?;
        (c, c, (2.0 * c).sqrt())
    };
    let inf_power = optimal::cutoff_power(xi, c_of_xi);
    Ok(WorstCaseReport {
        xi0,
        xi_star,
        c_of_xi,
        u_star,
        c_star,
        inf_power,
        bonf_power,
        beats_bonf: inf_power >= bonf_power - 1e-12,
    })
}

/// One grid row of the worst-case comparison curves.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseCurveRow {
    pub xi: f64,
    pub worst: PowerValue,
    pub bonf: PowerValue,
    /// Power of the uncontaminated two-point optimal weights (weight 1/a
    /// on the alternative).
    pub oracle: PowerValue,
    pub u_least: f64,
}

/// Worst-case, Bonferroni, and oracle power across an effect-size grid,
/// with the least favorable contamination location per point.
pub fn worst_case_power_curves(
    a: f64,
    gamma: f64,
    alpha: Probability,
    m: usize,
    xi_grid: &[f64],
    restrict_u: bool,
) -> Result<Vec<WorstCaseCurveRow>> {
    if !(a > 0.0) {
        return Err(Error::domain(format!(
            "the oracle column needs a > 0, got {a}"
        )));
    }
    xi_grid
        .iter()
        .map(|&xi| {
            let report = misspec_worst_case(xi, a, gamma, alpha, m, restrict_u)?;
            Ok(WorstCaseCurveRow {
                xi,
                worst: report.inf_power,
                bonf: report.bonf_power,
                oracle: power_one_sided(xi, 1.0 / a, alpha, m),
                u_least: report.u_star,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::MixtureAtom;
    use crate::hypotheses::MixtureSpec;

    fn alpha(a: f64) -> Probability {
        Probability::new(a).unwrap()
    }

    const XI_MARGINAL_1000: f64 = 3.890591886413093967036; // z_{0.05/1000}

    #[test]
    fn scheme_normalization_identities() {
        let s = BinaryWeightScheme::new(0.005, 25.8113703935335083268, 1000).unwrap();
        assert!((s.w1 - 22.9626912093908472383).abs() < 1e-12);
        assert!((s.w0 - 0.8896347175407495113653).abs() < 1e-13);
        assert!((s.epsilon * s.w1 + (1.0 - s.epsilon) * s.w0 - 1.0).abs() < 1e-12);
        assert!((s.w1 / s.w0 - s.b).abs() < 1e-12);
        assert_eq!(s.k, 5);
    }

    #[test]
    fn scheme_expansion_is_mean_one() {
        let s = BinaryWeightScheme::new(0.2, 7.0, 10).unwrap();
        let wv = s.weight_vector(10).unwrap();
        assert_eq!(wv.len(), 10);
        assert!((wv.mean() - 1.0).abs() < 1e-15);
        assert!(wv.get(0) > wv.get(9));
        // Non-integral epsilon m: renormalization fixes the mean.
        let s = BinaryWeightScheme::new(0.23, 7.0, 10).unwrap();
        let wv = s.weight_vector(10).unwrap();
        assert!((wv.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scheme_degeneracy_detection() {
        let s = BinaryWeightScheme::new(0.001, 5.0, 10).unwrap();
        assert!(s.is_degenerate(10));
        assert!(!s.is_degenerate(10_000));
        // B = 1 collapses to unit weights.
        let s = BinaryWeightScheme::new(0.3, 1.0, 10).unwrap();
        assert_eq!(s.w1, 1.0);
        assert_eq!(s.w0, 1.0);
    }

    #[test]
    fn robustness_zero_at_b_one_and_rising() {
        let a = alpha(0.05);
        let r1 = robustness_two_point(1.0, 0.1, XI_MARGINAL_1000, a, 1000).unwrap();
        assert_eq!(r1, 0.0);
        let r_just_above = robustness_two_point(1.0001, 0.1, XI_MARGINAL_1000, a, 1000).unwrap();
        assert!(r_just_above > 0.0);
    }

    #[test]
    fn robustness_reference_value_and_small_epsilon() {
        let a = alpha(0.05);
        let r10 = robustness_two_point(10.0, 0.1, XI_MARGINAL_1000, a, 1000).unwrap();
        assert!((r10 - 0.1032578168547992046021).abs() < 1e-14, "R(10) = {r10}");
        // The gain survives epsilon -> 0.
        let r = robustness_two_point(10.0, 1e-6, XI_MARGINAL_1000, a, 1000).unwrap();
        assert!(r > 0.0);
    }

    #[test]
    fn condition_matches_two_point_gain_loss_balance() {
        // R_bB written with lower tails is exactly the negative of the
        // direct gain-plus-loss comparison at raw weights (b, B).
        let a = alpha(0.05);
        for &(b_down, b_up) in &[(0.0, 2.0), (0.3, 5.0), (0.9, 1.5), (1.0, 1.0)] {
            for &xi in &[0.0, 1.0, 3.0, XI_MARGINAL_1000, 6.0] {
                let cond = worst_case_condition(xi, b_down, b_up, a, 1000).unwrap();
                let direct = power_one_sided(xi, b_up, a, 1000)
                    + power_one_sided(xi, b_down, a, 1000)
                    - 2.0 * power_one_sided(xi, 1.0, a, 1000);
                assert!(
                    (cond.r_bb + direct).abs() < 1e-14,
                    "identity fails at b = {b_down}, B = {b_up}, xi = {xi}"
                );
                assert_eq!(cond.robust, direct >= 0.0 || cond.r_bb == 0.0);
            }
        }
    }

    #[test]
    fn condition_edge_cases() {
        let a = alpha(0.05);
        let boundary = worst_case_condition(2.0, 1.0, 1.0, a, 1000).unwrap();
        assert_eq!(boundary.r_bb, 0.0);
        assert!(boundary.robust);

        // b -> 1: the condition tends to -Delta (robust).
        let near = worst_case_condition(3.0, 1.0 - 1e-6, 4.0, a, 1000).unwrap();
        assert!((near.r_bb + near.delta).abs() < 1e-4);
        assert!(near.robust);
        assert!(near.delta > 0.0);

        // Total down-weighting is still robust at xi = 0.
        let at_zero = worst_case_condition(0.0, 0.0, 2.0, a, 1000).unwrap();
        assert!(at_zero.robust, "r_bb = {}", at_zero.r_bb);
    }

    #[test]
    fn safe_zone_reference_values() {
        let a = alpha(0.05);
        let b2 = safe_zone_bound(2.0, a, 1000).unwrap();
        assert!((b2 - -1.937749440023375940056).abs() < 1e-12, "bound = {b2}");
        let b10 = safe_zone_bound(10.0, a, 1000).unwrap();
        assert!((b10 - 2.224106185987245293952).abs() < 1e-12, "bound = {b10}");
        assert!(b10 < XI_MARGINAL_1000);
        assert!(matches!(safe_zone_bound(1.5, a, 1000), Err(Error::Domain(_))));
    }

    #[test]
    fn safe_zone_guarantee_holds_where_positive() {
        // For B = 10 the bound is positive; zero-down-weighting must be
        // robust everywhere below it.
        let a = alpha(0.05);
        let bound = safe_zone_bound(10.0, a, 1000).unwrap();
        assert!(bound > 0.0);
        let n = 200;
        for i in 0..=n {
            let xi = bound * i as f64 / n as f64;
            let cond = worst_case_condition(xi, 0.0, 10.0, a, 1000).unwrap();
            assert!(cond.robust, "not robust at xi = {xi}, r_bb = {}", cond.r_bb);
        }
    }

    #[test]
    fn turnaround_reference_case() {
        let t = turnaround(0.1, XI_MARGINAL_1000, alpha(0.05), 1000).unwrap();
        assert!((t.b0 - 118.9612408993748677517).abs() < 1e-6, "B0 = {}", t.b0);
        assert!((t.b_star - 9.537575436570360870549).abs() < 1e-6, "B* = {}", t.b_star);
        assert!(
            (t.r_at_b_star - 0.1033098604330465106134).abs() < 1e-12,
            "R(B*) = {}",
            t.r_at_b_star
        );
        let residual =
            robustness_two_point(t.b0, 0.1, XI_MARGINAL_1000, alpha(0.05), 1000).unwrap();
        assert!(residual.abs() <= 1e-8);
    }

    #[test]
    fn turnaround_never_negative_below_per_test_level() {
        // epsilon <= alpha/m: the up-weight saturates and R stays positive.
        let t = turnaround(1e-6, 3.0, alpha(0.05), 1000).unwrap();
        assert!(t.b0.is_infinite());
        assert!(t.r_at_b_star > 0.0);
    }

    #[test]
    fn turnaround_collapses_for_huge_epsilon() {
        // Up-weighting 70% of hypotheses costs more than it gains.
        let t = turnaround(0.7, XI_MARGINAL_1000, alpha(0.05), 1000).unwrap();
        assert_eq!(t.b0, 1.0);
        assert_eq!(t.r_at_b_star, 0.0);
    }

    #[test]
    fn turnaround_shrinks_with_epsilon() {
        let mut prev = f64::INFINITY;
        for eps in [0.01, 0.05, 0.1, 0.2] {
            let t = turnaround(eps, XI_MARGINAL_1000, alpha(0.05), 1000).unwrap();
            assert!(t.b0 < prev, "B0 not decreasing at epsilon = {eps}");
            assert!(t.b_star < t.b0);
            prev = t.b0;
        }
    }

    #[test]
    fn robustness_is_unimodal_up_to_the_turnaround() {
        let a = alpha(0.05);
        let t = turnaround(0.1, XI_MARGINAL_1000, a, 1000).unwrap();
        let n = 400;
        let mut last = 0.0;
        let mut drops_seen = 0;
        let mut rising = true;
        for i in 1..=n {
            let b = 1.0 + (t.b0 - 1.0) * i as f64 / n as f64;
            let r = r_two_point(b, 0.1, XI_MARGINAL_1000, a, 1000);
            if rising && r < last {
                rising = false;
                drops_seen += 1;
            }
            if !rising {
                assert!(r <= last + 1e-12, "R rose again at B = {b}");
            }
            last = r;
        }
        assert!(drops_seen <= 1);
    }

    #[test]
    fn worst_case_reference_values() {
        let a = alpha(0.05);
        let expected = [
            (3.0, 5.413791890612927154406, 3.290529407439759427991,
             0.3803364395172018751349, 0.1865740767674770919348),
            (4.0, 5.413790474044597320636, 3.290528976941123161285,
             0.7410391573516237552198, 0.5435606006647459363453),
            (5.0, 5.413786232818339635187, 3.290527688021585280515,
             0.9217940170467425175436, 0.8663729181048323009237),
        ];
        for &(xi, c_star, u_star, inf, bonf) in &expected {
            let rep = misspec_worst_case(xi, 1e-6, 0.1, a, 1000, false).unwrap();
            assert!((rep.c_star - c_star).abs() < 1e-10, "c* at xi = {xi}: {}", rep.c_star);
            assert!((rep.u_star - u_star).abs() < 1e-10, "u* at xi = {xi}: {}", rep.u_star);
            assert!((rep.inf_power - inf).abs() < 1e-12, "inf at xi = {xi}: {}", rep.inf_power);
            assert!((rep.bonf_power - bonf).abs() < 1e-12);
            assert!(rep.beats_bonf);
            assert!((rep.xi0 - 3.290529544906424641091).abs() < 1e-12);
            let xs = rep.xi_star.expect("xi_star exists here");
            assert!((xs - 5.966438028213261272056).abs() < 1e-10, "xi* = {xs}");
        }
    }

    #[test]
    fn worst_case_matches_small_a_asymptotics() {
        // With a = 1e-6 the O(a) terms are invisible at 1e-4.
        let a = alpha(0.05);
        let z_gamma = distfn::upper_quantile(0.05 / (1000.0 * 0.1)).unwrap();
        for xi in [3.0, 4.0, 5.0] {
            let rep = misspec_worst_case(xi, 1e-6, 0.1, a, 1000, false).unwrap();
            assert!((rep.u_star - z_gamma).abs() < 1e-4);
            let approx = distfn::upper_tail((z_gamma * z_gamma - xi * xi) / (2.0 * xi));
            assert!((rep.inf_power - approx).abs() < 1e-4);
        }
    }

    #[test]
    fn worst_case_restricted_endpoint_form() {
        let a = alpha(0.05);
        let rep = misspec_worst_case(3.0, 1e-6, 0.1, a, 1000, true).unwrap();
        assert!((rep.c_of_xi - 5.371588634719273923272).abs() < 1e-11, "C(3) = {}", rep.c_of_xi);
        assert!(
            (rep.inf_power - 0.3857055757205296520739).abs() < 1e-12,
            "restricted inf = {}",
            rep.inf_power
        );
        assert_eq!(rep.u_star, 3.0);
        // Restricting the adversary can only help the power floor.
        let unrestricted = misspec_worst_case(3.0, 1e-6, 0.1, a, 1000, false).unwrap();
        assert!(rep.inf_power > unrestricted.inf_power);
    }

    #[test]
    fn worst_case_beats_bonferroni_below_the_crossing() {
        let a = alpha(0.05);
        let xi_star = misspec_worst_case(1.0, 1e-6, 0.1, a, 1000, true)
            .unwrap()
            .xi_star
            .unwrap();
        for i in 1..24 {
            let xi = 0.25 * i as f64;
            let rep = misspec_worst_case(xi, 1e-6, 0.1, a, 1000, true).unwrap();
            assert_eq!(
                rep.beats_bonf,
                xi < xi_star,
                "crossing misplaced at xi = {xi} (xi* = {xi_star})"
            );
        }
    }

    #[test]
    fn worst_case_degenerates_to_the_two_point_solve() {
        // gamma -> 0: nothing to contaminate with, so the floor is the
        // oracle power of the honest two-point mixture.
        let a = alpha(0.05);
        let rep = misspec_worst_case(3.0, 0.1, 1e-9, a, 1000, false).unwrap();
        assert!((rep.c_star - 5.371580194475684379665).abs() < 1e-6);
        assert!((rep.inf_power - 0.385706651727616594798).abs() < 1e-7);
    }

    #[test]
    fn grid_minimization_agrees_with_the_interior_root() {
        // Brute-force the adversary: solve the weights for each candidate
        // u and take the worst resulting power at xi.
        let a = alpha(0.05);
        let (aa, gamma, xi, m) = (1e-6, 0.1, 4.0, 1000usize);
        let rep = misspec_worst_case(xi, aa, gamma, a, m, false).unwrap();
        let z4 = 4.0 * distfn::upper_quantile(0.05 / 1000.0).unwrap();
        let n = 600;
        let mut min_power = f64::INFINITY;
        let mut argmin = 0.0;
        for i in 1..=n {
            let u = z4 * i as f64 / n as f64;
            let q = MixtureSpec::new(vec![
                MixtureAtom { mass: 1.0 - aa - gamma, location: 0.0 },
                MixtureAtom { mass: gamma, location: u },
                MixtureAtom { mass: aa, location: xi },
            ])
            .unwrap();
            let sol = optimal::solve_c_mixture(&q, a, m).unwrap();
            let p = optimal::cutoff_power(xi, sol.c);
            if p < min_power {
                min_power = p;
                argmin = u;
            }
        }
        assert!((argmin - rep.u_star).abs() <= z4 / n as f64 * 1.5);
        assert!(min_power >= rep.inf_power - 1e-9);
        assert!((min_power - rep.inf_power).abs() < 1e-4);
    }

    #[test]
    fn curve_table_has_the_expected_shape() {
        let a = alpha(0.05);
        let grid: Vec<f64> = (1..=20).map(|i| 0.5 * i as f64).collect();
        let xi_star = misspec_worst_case(1.0, 0.01, 0.1, a, 1000, true)
            .unwrap()
            .xi_star
            .unwrap();

        // Restricted adversary: the weighted worst case dominates plain
        // Bonferroni below the crossing point.
        let restricted = worst_case_power_curves(0.01, 0.1, a, 1000, &grid, true).unwrap();
        for row in &restricted {
            assert!(row.worst <= row.oracle + 1e-12, "worst beats oracle at xi = {}", row.xi);
            if row.xi < xi_star {
                assert!(row.worst >= row.bonf - 1e-12, "ordering fails at xi = {}", row.xi);
            }
            if row.xi >= 9.0 {
                assert!(row.worst > 0.99 && row.bonf > 0.99);
            }
        }

        // Unrestricted adversary: inf >= bonf is the quadratic condition
        // c*/xi + xi/2 <= z_{alpha/m}, which holds between the roots
        // z_{alpha/m} -+ sqrt(z^2 - 2c*); past the upper root the
        // comparison flips. The least favorable u (roughly constant)
        // crosses the line u = xi exactly once.
        let unrestricted = worst_case_power_curves(0.01, 0.1, a, 1000, &grid, false).unwrap();
        let mut crossings = 0;
        let mut prev_sign = None;
        for row in &unrestricted {
            assert!(row.worst <= row.oracle + 1e-12);
            if row.xi >= 2.0 && row.xi <= xi_star - 0.25 {
                assert!(row.worst >= row.bonf - 1e-12, "ordering fails at xi = {}", row.xi);
            }
            if row.xi >= xi_star + 0.25 {
                assert!(row.worst <= row.bonf + 1e-12, "expected bonf to win at xi = {}", row.xi);
            }
            let sign = row.u_least > row.xi;
            if let Some(p) = prev_sign {
                if p != sign {
                    crossings += 1;
                }
            }
            prev_sign = Some(sign);
        }
        assert_eq!(crossings, 1, "least-favorable u should cross u = xi once");
    }

    #[test]
    fn heavy_contamination_still_recovers_at_large_effects() {
        // Past the Bonferroni crossing the power floor is
        // 1 - gamma/(1-a) up to O(a).
        let a = alpha(0.05);
        let (aa, gamma) = (0.01, 0.2);
        let xi_star = misspec_worst_case(1.0, aa, gamma, a, 1000, true)
            .unwrap()
            .xi_star
            .unwrap();
        let floor = 1.0 - gamma / (1.0 - aa) - 0.05;
        for step in 0..6 {
            let xi = xi_star + 0.5 * step as f64;
            let rep = misspec_worst_case(xi, aa, gamma, a, 1000, true).unwrap();
            assert!(rep.inf_power >= floor, "floor broken at xi = {xi}: {}", rep.inf_power);
        }
        // Even with all remaining mass misspecified the curve reaches 1.
        let rows = worst_case_power_curves(0.01, 0.99, a, 1000, &[12.0], false).unwrap();
        assert!(rows[0].worst > 0.99);
    }
}
