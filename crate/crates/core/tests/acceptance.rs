//! End-to-end checks, one per headline behavior, each printing a PASS
//! line with its runtime. Several have explicit runtime budgets.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use wmtest::hypotheses::{
    EffectConfiguration, MixtureAtom, MixtureSpec, Probability, TestBattery, WeightVector,
};
use wmtest::procedures::{bh, weighted_bh, Procedure, WeightedBonferroni, WeightedHolm};
use wmtest::simulate::{
    power_surface, run_experiment, synth_genome, trace_to_binary_weights, fwer_mc,
    SynthGenomeConfig, WeightsSpec,
};
use wmtest::{designer, distfn, estimator, optimal, power, robustness};

const ALPHA: f64 = 0.05;

fn p(x: f64) -> Probability {
    Probability::new(x).unwrap()
}

#[test]
fn criterion_01_discontinuity_example() {
    let t0 = Instant::now();
    let ex = optimal::discontinuity_example(1000, p(ALPHA), 0.1, 0.1, 1000.0, 0.1).unwrap();

    assert!((ex.u - 0.03).abs() <= 0.005, "u = {}", ex.u);
    assert!((ex.xi - 9.8).abs() <= 0.05, "xi = {}", ex.xi);
    assert!(
        (ex.ratio - 1001.0).abs() <= 0.01 * 1001.0,
        "weight drop ratio = {}",
        ex.ratio
    );
    assert!((ex.w_xi_under_q - 10.0).abs() < 1e-6);
    assert!((ex.w_xi_under_q_tilde - 0.00999).abs() < 1e-4);

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:.2?}");
    println!("criterion 01 (discontinuity example): PASS in {elapsed:.2?}");
}

#[test]
fn criterion_02_marginal_effect_power() {
    let t0 = Instant::now();
    for m in [1_000usize, 1_000_000] {
        let xi = distfn::upper_quantile(ALPHA / m as f64).unwrap();
        let pi = power::power_one_sided(xi, 1.0, p(ALPHA), m);
        assert!((pi - 0.5).abs() < 1e-12, "m = {m}: power = {pi}");
    }
    println!("criterion 02 (marginal-effect power 1/2): PASS in {:.2?}", t0.elapsed());
}

#[test]
fn criterion_03_fwer_control() {
    let t0 = Instant::now();
    let (m, reps) = (1000, 20_000);
    let bound = ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / reps as f64).sqrt();
    for (name, spec) in [
        ("unit", WeightsSpec::Unit),
        ("random", WeightsSpec::RandomExponential),
        ("extreme", WeightsSpec::ExtremeOneHot),
    ] {
        let est = fwer_mc(&WeightedBonferroni, &spec, m, p(ALPHA), reps, 101).unwrap();
        assert!(est.fwer <= bound, "{name}: fwer = {} > {bound}", est.fwer);
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:.2?}");
    println!("criterion 03 (familywise error control): PASS in {elapsed:.2?}");
}

/// Euclidean projection onto the budget set (w >= 0, sum = target).
fn project_budget(v: &[f64], target: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = (v.iter().sum::<f64>() - target) / v.len() as f64;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let cand = (cumsum - target) / (i as f64 + 1.0);
        if ui - cand > 0.0 {
            theta = cand;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

#[test]
fn criterion_04_oracle_optimality() {
    let t0 = Instant::now();
    let a = p(ALPHA);
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    for trial in 0..100 {
        let m = rng.random_range(2..=20usize);
        let m1 = rng.random_range(1..=m);
        let mut means = vec![0.0; m];
        for mu in means.iter_mut().take(m1) {
            *mu = 0.3 + 5.2 * rng.random::<f64>();
        }
        let config = EffectConfiguration::one_sided(means.clone()).unwrap();
        let solution = optimal::solve_c(&config, a).unwrap();

        // Objective without the budget validator, usable off-simplex
        // during the search. Mean power over the alternatives.
        let avg = |w: &[f64]| -> f64 {
            means
                .iter()
                .zip(w)
                .filter(|(&mu, _)| mu > 0.0)
                .map(|(&mu, &wj)| power::power_one_sided(mu, wj, a, m))
                .sum::<f64>()
                / m1 as f64
        };
        let oracle = avg(solution.weights.as_slice());

        // 10^4 random mean-one weight vectors.
        let mut best_random = 0.0f64;
        for _ in 0..10_000 {
            let raw: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let sum: f64 = raw.iter().sum();
            let ws: Vec<f64> = raw.iter().map(|&e| e * m as f64 / sum).collect();
            best_random = best_random.max(avg(&ws));
        }
        assert!(
            oracle >= best_random - 1e-9,
            "trial {trial}: best of 10^4 random vectors {best_random} beat the oracle {oracle}"
        );

        // Projected gradient ascent from unit weights.
        let mut w = vec![1.0; m];
        let mut fw = avg(&w);
        let mut eta = 1.0;
        for _ in 0..400 {
            let mut g = vec![0.0; m];
            for j in 0..m {
                let h = 1e-6;
                let mut up = w.clone();
                up[j] += h;
                let mut dn = w.clone();
                dn[j] = (dn[j] - h).max(0.0);
                g[j] = (avg(&up) - avg(&dn)) / (up[j] - dn[j]);
            }
            let mut improved = false;
            while eta > 1e-10 {
                let cand: Vec<f64> = w.iter().zip(&g).map(|(&x, &gj)| x + eta * gj).collect();
                let cand = project_budget(&cand, m as f64);
                let fc = avg(&cand);
                if fc > fw {
                    w = cand;
                    fw = fc;
                    eta *= 1.5;
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        assert!(
            oracle >= fw - 1e-9,
            "trial {trial}: projected gradient found {fw} above the oracle {oracle}"
        );
    }

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:.2?}");
    println!("criterion 04 (oracle weight optimality): PASS in {elapsed:.2?}");
}

#[test]
fn criterion_05_worst_case_formulas() {
    let t0 = Instant::now();
    let a = p(ALPHA);
    let (aa, gamma, m) = (1e-6, 0.1, 1000usize);

    for xi in [3.0, 4.0, 5.0] {
        let rep = robustness::misspec_worst_case(xi, aa, gamma, a, m, false).unwrap();

        // Brute force over 10^4 contamination points.
        let n = 10_000;
        let (u_lo, u_hi) = (0.5, 8.0);
        let spacing = (u_hi - u_lo) / n as f64;
        let mut min_power = f64::INFINITY;
        let mut argmin = 0.0;
        for i in 0..=n {
            let u = u_lo + spacing * i as f64;
            let q = MixtureSpec::new(vec![
                MixtureAtom { mass: 1.0 - aa - gamma, location: 0.0 },
                MixtureAtom { mass: gamma, location: u },
                MixtureAtom { mass: aa, location: xi },
            ])
            .unwrap();
            let sol = optimal::solve_c_mixture(&q, a, m).unwrap();
            let pw = optimal::cutoff_power(xi, sol.c);
            if pw < min_power {
                min_power = pw;
                argmin = u;
            }
        }
        assert!(
            (min_power - rep.inf_power).abs() < 1e-6,
            "xi = {xi}: grid min {min_power} vs closed form {}",
            rep.inf_power
        );
        assert!(
            (argmin - rep.u_star).abs() <= spacing,
            "xi = {xi}: argmin {argmin} vs u* {}",
            rep.u_star
        );
    }

    // The dominance threshold: the weighted worst case crosses plain
    // Bonferroni exactly at xi*.
    let xi_star = robustness::misspec_worst_case(3.0, aa, gamma, a, m, false)
        .unwrap()
        .xi_star
        .unwrap();
    let h = |xi: f64| {
        let r = robustness::misspec_worst_case(xi, aa, gamma, a, m, false).unwrap();
        r.inf_power - r.bonf_power
    };
    let (mut lo, mut hi) = (xi_star - 0.3, xi_star + 0.3);
    assert!(h(lo) > 0.0 && h(hi) < 0.0, "crossing not bracketed");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let crossing = 0.5 * (lo + hi);
    assert!(
        (crossing - xi_star).abs() < 1e-6,
        "crossing {crossing} vs xi* {xi_star}"
    );

    // Regime check on both sides: restricted adversary below, where the
    // weighted floor dominates; above x*, plain Bonferroni wins.
    let below = robustness::misspec_worst_case(xi_star - 0.3, aa, gamma, a, m, true).unwrap();
    assert!(below.beats_bonf && below.inf_power >= below.bonf_power - 1e-12);
    let above = robustness::misspec_worst_case(xi_star + 0.3, aa, gamma, a, m, false).unwrap();
    assert!(!above.beats_bonf && above.inf_power < above.bonf_power);

    println!("criterion 05 (worst-case misspecification): PASS in {:.2?}", t0.elapsed());
}

#[test]
fn criterion_06_designer_exactness() {
    let t0 = Instant::now();
    let m = 1000;
    let a = p(ALPHA);
    let xi_m = distfn::upper_quantile(ALPHA / m as f64).unwrap();

    let d = designer::design_min_power(p(0.005), p(0.2), a, m).unwrap();
    let budget = 0.005 * d.scheme.w1 + 0.995 * d.scheme.w0;
    assert!((budget - 1.0).abs() < 1e-12);
    let at_w1 = power::power_one_sided(xi_m, d.scheme.w1, a, m);
    assert!((at_w1 - 0.8).abs() < 1e-12, "power at w1 = {at_w1}");

    let d = designer::design_max_count(p(0.2), p(0.1), a, m).unwrap();
    let budget = d.scheme.epsilon * d.scheme.w1 + (1.0 - d.scheme.epsilon) * d.scheme.w0;
    assert!((budget - 1.0).abs() < 1e-12);
    let at_w1 = power::power_one_sided(xi_m, d.scheme.w1, a, m);
    let at_w0 = power::power_one_sided(xi_m, d.scheme.w0, a, m);
    assert!((at_w1 - 0.8).abs() < 1e-12, "power at w1 = {at_w1}");
    assert!((at_w0 - 0.1).abs() < 1e-12, "power at w0 = {at_w0}");

    let d0 = designer::design_max_count(p(0.2), p(0.0), a, m).unwrap();
    assert_eq!(d0.scheme.w0, 0.0);
    assert!((d0.scheme.epsilon - 1.0 / d0.scheme.w1).abs() < 1e-15);

    println!("criterion 06 (designer exactness): PASS in {:.2?}", t0.elapsed());
}

#[test]
fn criterion_07_robustness_shape() {
    let t0 = Instant::now();
    let m = 1000;
    let a = p(ALPHA);
    let xi = distfn::upper_quantile(ALPHA / m as f64).unwrap();

    for eps in [0.01, 0.1, 0.3] {
        assert_eq!(robustness::robustness_two_point(1.0, eps, xi, a, m).unwrap(), 0.0);
        assert!(robustness::robustness_two_point(1.001, eps, xi, a, m).unwrap() > 0.0);
    }

    // Unique sign change at the turnaround point.
    let eps = 0.1;
    let turn = robustness::turnaround(eps, xi, a, m).unwrap();
    let r_at_b0 = robustness::robustness_two_point(turn.b0, eps, xi, a, m).unwrap();
    assert!(r_at_b0.abs() <= 1e-8, "R(B0) = {r_at_b0}");
    let mut changes = 0;
    let mut prev = robustness::robustness_two_point(1.01, eps, xi, a, m).unwrap();
    for i in 1..=2000 {
        let b = 1.01 * (10.0 * turn.b0 / 1.01).powf(i as f64 / 2000.0);
        let r = robustness::robustness_two_point(b, eps, xi, a, m).unwrap();
        if (r > 0.0) != (prev > 0.0) {
            changes += 1;
        }
        prev = r;
    }
    assert_eq!(changes, 1, "expected exactly one sign change");

    // Tiny epsilon never turns against weighting in this range.
    for i in 0..=200 {
        let b = 1.01 * (1000.0f64 / 1.01).powf(i as f64 / 200.0);
        let r = robustness::robustness_two_point(b, 1e-6, xi, a, m).unwrap();
        assert!(r > 0.0, "R({b}, 1e-6) = {r}");
    }

    println!("criterion 07 (robustness function shape): PASS in {:.2?}", t0.elapsed());
}

#[test]
fn criterion_08_estimator_recovery() {
    let t0 = Instant::now();

    // Population moments invert exactly on the grid.
    for i in 1..=10 {
        let pi = 0.05 * i as f64;
        for xi in [1.0, 2.0, 3.0, 4.0, 5.0] {
            let y = pi * xi;
            let s2 = 1.0 + pi * xi * xi - y * y;
            let (pi_hat, xi_hat) = estimator::mom_normal(y, s2, 10_000).unwrap();
            assert!((pi_hat.get() - pi).abs() < 1e-12);
            assert!((xi_hat - xi).abs() < 1e-12);
        }
    }

    // Simulated groups at r = 10^4: estimates within Monte Carlo error.
    let reps: u64 = 50;
    let mut pis = Vec::new();
    let mut xis = Vec::new();
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        rng.set_stream(rep);
        let stats: Vec<f64> = (0..10_000)
            .map(|_| {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                if rng.random::<f64>() < 0.2 {
                    z + 3.0
                } else {
                    z
                }
            })
            .collect();
        let (y, s2, r) = estimator::group_moments(&stats).unwrap();
        let (pi_hat, xi_hat) = estimator::mom_normal(y, s2, r).unwrap();
        pis.push(pi_hat.get());
        xis.push(xi_hat);
    }
    for (vals, truth, name) in [(&pis, 0.2, "pi"), (&xis, 3.0, "xi")] {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!(
            (mean - truth).abs() <= 3.0 * se,
            "{name}: mean {mean} vs {truth} (se {se})"
        );
    }

    // Chi-square printed formula, exact arithmetic.
    let (pi_hat, xi_hat) = estimator::mom_chisq(2.0, 5.0, 100).unwrap();
    assert!((pi_hat.get() - 1.0 / 12.0).abs() < 1e-15);
    assert!((xi_hat - 12f64.sqrt()).abs() < 1e-15);

    println!("criterion 08 (estimator recovery): PASS in {:.2?}", t0.elapsed());
}

#[test]
fn criterion_09_two_stage_scan_reproduction() {
    let t0 = Instant::now();
    let config = SynthGenomeConfig::default();
    assert_eq!(config.n_assoc, 10_000);
    assert_eq!(config.n_assoc_signals, 20);
    let a = p(ALPHA);
    let reps = 100u64;

    let mut weighted_wins = 0;
    let mut fp_reps = 0;
    for rep in 0..reps {
        let study = synth_genome(&config, 7000 + rep).unwrap();
        let ws = trace_to_binary_weights(&study, 0.05, 10.0).unwrap();
        let weighted = run_experiment(&study, &ws, a, &WeightedBonferroni).unwrap();
        let unweighted = run_experiment(
            &study,
            &WeightVector::unit(study.m()),
            a,
            &WeightedBonferroni,
        )
        .unwrap();
        if weighted.true_positives >= unweighted.true_positives {
            weighted_wins += 1;
        }
        if weighted.false_positives > 0 {
            fp_reps += 1;
        }
    }
    assert!(
        weighted_wins >= 90,
        "weighted matched or beat unweighted in only {weighted_wins}/100 replicates"
    );
    let fwer = fp_reps as f64 / reps as f64;
    let bound = ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / reps as f64).sqrt();
    assert!(fwer <= bound, "fwer = {fwer} > {bound}");

    // The (epsilon, B) surface rises in B to a plateau.
    let eps_grid = [0.01, 0.05, 0.1, 0.2];
    let b_grid = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
    let cells = power_surface(&config, &eps_grid, &b_grid, 100, a, &WeightedBonferroni, 424).unwrap();
    for &eps in &eps_grid {
        let row: Vec<f64> = cells
            .iter()
            .filter(|c| c.epsilon == eps)
            .map(|c| c.mean_true_discoveries)
            .collect();
        assert_eq!(row.len(), b_grid.len());
        let peak = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let peak_ix = row.iter().position(|&v| v == peak).unwrap();
        for i in 0..peak_ix {
            assert!(
                row[i + 1] >= row[i] - 0.05,
                "eps = {eps}: discoveries dipped before the plateau: {row:?}"
            );
        }
        for &v in &row[peak_ix..] {
            assert!(v >= peak - 1.0, "eps = {eps}: collapsed after the plateau: {row:?}");
        }
        assert!(
            peak >= row[0],
            "eps = {eps}: weighting never beat the baseline: {row:?}"
        );
    }
    for c in &cells {
        let bound = ALPHA + 3.0 * (ALPHA * (1.0 - ALPHA) / 100f64).sqrt();
        assert!(c.fwer <= bound, "cell ({}, {}): fwer = {}", c.epsilon, c.b, c.fwer);
    }

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:.2?}");
    println!("criterion 09 (two-stage scan, qualitative): PASS in {elapsed:.2?}");
}

#[test]
fn criterion_10_procedure_identities() {
    let t0 = Instant::now();
    let a = p(ALPHA);

    // Unit-weight BH is plain BH, replicate by replicate.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..100 {
        let m = rng.random_range(1..=150usize);
        let ps: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let ids: Vec<String> = (0..m).map(|j| format!("t{j}")).collect();
        let battery = TestBattery::new(ids, ps, None, None).unwrap();
        let w = weighted_bh(&battery, &WeightVector::unit(m), a).unwrap();
        let plain = bh(&battery, a).unwrap();
        assert_eq!(
            w.indices().collect::<Vec<_>>(),
            plain.indices().collect::<Vec<_>>()
        );
    }

    // Holm rejects everything Bonferroni rejects: exhaustive over small
    // instances.
    let grid = [0.0005, 0.004, 0.02, 0.3, 0.97];
    for m in 1..=5usize {
        let shapes: Vec<Vec<f64>> = vec![
            vec![1.0; m],
            (0..m).map(|j| (j + 1) as f64).collect(),
            {
                let mut v = vec![0.5; m];
                v[0] = 0.5 * m as f64;
                v
            },
        ];
        let mut index = vec![0usize; m];
        loop {
            let ps: Vec<f64> = index.iter().map(|&i| grid[i]).collect();
            for shape in &shapes {
                let sum: f64 = shape.iter().sum();
                let ws: Vec<f64> = shape.iter().map(|&w| w * m as f64 / sum).collect();
                let bonf = WeightedBonferroni.reject_slices(&ps, &ws, ALPHA).unwrap();
                let holm = WeightedHolm.reject_slices(&ps, &ws, ALPHA).unwrap();
                for j in &bonf {
                    assert!(holm.contains(j), "holm missed {j}: ps {ps:?} ws {ws:?}");
                }
            }
            // Odometer over the p-grid.
            let mut k = 0;
            loop {
                if k == m {
                    break;
                }
                index[k] += 1;
                if index[k] < grid.len() {
                    break;
                }
                index[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }

    // Cutoff duality: the solved weights reject exactly when the
    // statistic clears its equivalent cutoff.
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..50 {
        let m = rng.random_range(2..=10usize);
        let means: Vec<f64> = (0..m).map(|_| 0.5 + 4.5 * rng.random::<f64>()).collect();
        let config = EffectConfiguration::one_sided(means).unwrap();
        let solution = optimal::solve_c(&config, a).unwrap();
        let cutoffs = optimal::equivalent_cutoffs(&solution, &config);
        let stats: Vec<f64> = cutoffs
            .iter()
            .map(|&t| {
                let off = 0.01 + 1.5 * rng.random::<f64>();
                if rng.random::<bool>() {
                    t + off
                } else {
                    t - off
                }
            })
            .collect();
        let ps: Vec<f64> = stats.iter().map(|&z| distfn::upper_tail(z)).collect();
        let rejected = WeightedBonferroni
            .reject_slices(&ps, solution.weights.as_slice(), ALPHA)
            .unwrap();
        for j in 0..m {
            assert_eq!(
                rejected.contains(&j),
                stats[j] >= cutoffs[j],
                "duality failed at test {j}"
            );
        }
    }

    println!("criterion 10 (procedure identities): PASS in {:.2?}", t0.elapsed());
}
