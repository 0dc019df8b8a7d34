use approx_sensing::harness::synth::piecewise_linear;
use approx_sensing::recon::{gradient, objective, reconstruct, smoothed_lp, Penalty, ReconParams};
use approx_sensing::sensing::{gen_bernoulli_plan, SensingPlan};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line objective over the dense matrix.
fn naive_objective(x: &[f64], y: &[f64], phi: &[Vec<u8>], pen: &Penalty) -> f64 {
    let mut data = 0.0;
    for (row, &yk) in phi.iter().zip(y) {
        let mut s = 0.0;
        for (j, &p) in row.iter().enumerate() {
            if p == 1 {
                s += x[j];
            }
        }
        data += (s - yk) * (s - yk);
    }
    let mut reg = 0.0;
    for i in 0..x.len() - 2 {
        let v = x[i + 2] - 2.0 * x[i + 1] + x[i];
        reg += (v * v + pen.eps * pen.eps).powf(pen.p / 2.0);
    }
    0.5 * data + pen.lambda * reg
}

#[test]
fn objective_matches_dense_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for s in 0..20 {
        let plan = gen_bernoulli_plan(24, 48, 3, s).unwrap();
        let x: Vec<f64> = (0..48).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..24).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pen = Penalty {
            p: rng.gen_range(0.3..1.0),
            eps: rng.gen_range(0.01..1.0),
            lambda: rng.gen_range(0.0..2.0),
        };
        let got = objective(&x, &y, &plan, &pen).unwrap();
        let want = naive_objective(&x, &y, &plan.dense(), &pen);
        assert!(
            (got - want).abs() <= 1e-12 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }
}

/// Minimizes the tiny instance with Newton steps on a dense, separately
/// written gradient, differentiated numerically for the Hessian.
fn newton_minimizer(plan: &SensingPlan, y: &[f64], pen: &Penalty) -> Vec<f64> {
    let phi = plan.dense();
    let n = plan.n();
    let grad = |x: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; n];
        for (row, &yk) in phi.iter().zip(y) {
            let r: f64 = row.iter().zip(x).map(|(&p, &v)| p as f64 * v).sum::<f64>() - yk;
            for (gj, &p) in g.iter_mut().zip(row) {
                *gj += p as f64 * r;
            }
        }
        for i in 0..n - 2 {
            let v = x[i + 2] - 2.0 * x[i + 1] + x[i];
            let w = pen.lambda * pen.p * v * (v * v + pen.eps * pen.eps).powf(pen.p / 2.0 - 1.0);
            g[i] += w;
            g[i + 1] -= 2.0 * w;
            g[i + 2] += w;
        }
        g
    };
    let mut x = vec![0.0; n];
    for _ in 0..100 {
        let g = grad(&x);
        let h = 1e-6;
        let mut hess = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (gp, gm) = (grad(&xp), grad(&xm));
            for i in 0..n {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        // Gaussian elimination on [H | -g].
        let mut a: Vec<Vec<f64>> = hess
            .iter()
            .zip(&g)
            .map(|(row, gi)| row.iter().copied().chain([-gi]).collect())
            .collect();
        for c in 0..n {
            let piv = (c..n)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(c, piv);
            let pivot = a[c].clone();
            for (r, row) in a.iter_mut().enumerate() {
                if r != c {
                    let f = row[c] / pivot[c];
                    for (v, p) in row.iter_mut().zip(&pivot).skip(c) {
                        *v -= f * p;
                    }
                }
            }
        }
        for i in 0..n {
            x[i] += a[i][n] / a[i][i];
        }
    }
    x
}

#[test]
fn gradient_vanishes_at_newton_minimizer() {
    let plan = SensingPlan::from_indices(3, 5, 2, 0, vec![0, 3, 1, 4, 2, 3]).unwrap();
    let y = [0.7, -0.4, 1.1];
    for p in [0.9, 1.0] {
        let pen = Penalty {
            p,
            eps: 1.0,
            lambda: 0.5,
        };
        let x = newton_minimizer(&plan, &y, &pen);
        let g = gradient(&x, &y, &plan, &pen).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "p={p}: |g| = {norm:e}");
    }
}

#[test]
fn continuation_shrinks_eps_to_floor() {
    let plan = gen_bernoulli_plan(128, 256, 2, 5).unwrap();
    let x0 = piecewise_linear(256, 6, 0.8, 5);
    let mut y = vec![0.0; 128];
    plan.apply(&x0, &mut y);
    let params = ReconParams {
        delta: 1e-30,
        outer_iterations: 14,
        ..Default::default()
    };
    let r = reconstruct(&y, &plan, &params).unwrap();
    assert_eq!(r.eps_history.len(), 14);
    for w in r.eps_history.windows(2) {
        assert!(
            w[1] < w[0] || w[1] == params.eps_floor,
            "{:?}",
            r.eps_history
        );
    }
    assert_eq!(*r.eps_history.last().unwrap(), params.eps_floor);
}

/// Each of the 256 columns is hit `M r / N = 1` time per plan on average;
/// over 1000 plans the per-column total is Binomial(128 000, 1/128).
///
/// A 3-sigma band per column is expected to miss about 0.7 of 256 columns
/// even for a perfect sampler, so the band is checked as a count (at most
/// 4 misses, P(>= 5) < 1e-3) together with a Bonferroni bound on the
/// worst column and a chi-square test over all columns.
#[test]
fn columns_are_covered_uniformly() {
    let (m, n, r, seeds) = (128usize, 256usize, 2usize, 1000u64);
    let mut hits = vec![0u64; n];
    for s in 0..seeds {
        for &j in gen_bernoulli_plan(m, n, r, s).unwrap().indices() {
            hits[j] += 1;
        }
    }
    let trials = (m as u64 * seeds) as f64;
    let q = r as f64 / n as f64;
    let (mean, sigma) = (trials * q, (trials * q * (1.0 - q)).sqrt());
    let z: Vec<f64> = hits.iter().map(|&h| (h as f64 - mean) / sigma).collect();
    let outside = z.iter().filter(|v| v.abs() > 3.0).count();
    assert!(outside <= 4, "{outside} columns outside 3 sigma");
    let worst = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    assert!(worst <= 4.0, "worst column z = {worst:.2}");
    // sum z^2 is close to chi-square with n - 1 degrees of freedom
    let chi2: f64 = z.iter().map(|v| v * v).sum();
    let df = (n - 1) as f64;
    assert!(
        (chi2 - df).abs() <= 5.0 * (2.0 * df).sqrt(),
        "chi2 = {chi2:.1}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn history_never_increases(seed in 0u64..1000, kinks in 1usize..12, noise in 0.0f64..0.05) {
        let plan = gen_bernoulli_plan(32, 64, 2, seed).unwrap();
        let x0 = piecewise_linear(64, kinks, 1.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; 32];
        plan.apply(&x0, &mut y);
        for v in &mut y {
            *v += noise * rng.gen_range(-1.0..1.0);
        }
        let r = reconstruct(&y, &plan, &ReconParams::default()).unwrap();
        for w in r.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0], "{:?}", r.objective_history);
        }
    }

    #[test]
    fn smoothed_lp_between_bounds(
        v in prop::collection::vec(-10.0f64..10.0, 1..40),
        p in 0.05f64..=1.0,
        eps in 1e-6f64..2.0,
    ) {
        let got = smoothed_lp(&v, p, eps);
        let lo: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
        let hi: f64 = v.iter().map(|x| (x.abs() + eps).powf(p)).sum();
        prop_assert!(got >= lo * (1.0 - 1e-12) && got <= hi * (1.0 + 1e-12));
    }
}
