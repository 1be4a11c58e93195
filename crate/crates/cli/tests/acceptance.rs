//! Acceptance gate for the whole pipeline: ten numbered criteria covering
//! the scalar risk layer, the allocation optimum, the iteration, the
//! predicted/observed MSE agreement at desk scale, and CLI determinism.
//! Each test prints one `ACCEPTANCE NN <label>: PASS` line on success.
//!
//! Oracles here are deliberately independent of the library's own
//! numerics: quadrature instead of closed forms, plain-loop linear algebra
//! instead of `ndarray`, random search instead of the closed-form optimum.

use std::process::Command;
use std::time::{Duration, Instant};

use ampalloc::{
    allocation_objective, amp_p_step, minimax_mse, optimal_allocation, predicted_mse,
    sweep_noise, sweep_ratio, AllocMode, AllocationProfile, AmpState, BlockProfile, Experiment,
    ExperimentSpec, SensingOperator, ThreePointPrior, TrialResult,
};
use ampalloc::optim::bisect_increasing;
use ndarray::{Array1, Array2};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// ---------------------------------------------------------------------
// Shared desk-scale operating point for the Monte Carlo criteria.
// ---------------------------------------------------------------------

fn desk_spec() -> ExperimentSpec {
    ExperimentSpec {
        n: 1000,
        m: 500,
        block_fractions: vec![0.5, 0.5],
        epsilon_ratio: 1.0,
        rho: 0.18,
        noise_var: 0.2,
        a_param: 0.02,
        trials: 50,
        seed: 42,
        alloc_mode: AllocMode::Optimal,
    }
}

fn mean_mse(results: &[TrialResult]) -> f64 {
    results.iter().map(|r| r.mse).sum::<f64>() / results.len() as f64
}

// ---------------------------------------------------------------------
// 01: scalar risk closed form vs adaptive quadrature.
// ---------------------------------------------------------------------

fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn soft(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

/// Adaptive Simpson with Richardson acceptance.
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        left + right + (left + right - whole) / 15.0
    } else {
        adaptive(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive(f, a, b, fa, fm, fb, whole, eps, 48)
}

/// Soft-thresholding risk at unit noise by quadrature: the integrand has
/// kinks where `mu + z` crosses the threshold, so those points cut the
/// integration range.
fn risk_by_quadrature(mu: f64, alpha: f64) -> f64 {
    let f = move |z: f64| (soft(mu + z, alpha) - mu).powi(2) * pdf(z);
    let mut cuts = vec![-13.0, 13.0];
    for kink in [alpha - mu, -alpha - mu] {
        if kink > -13.0 && kink < 13.0 {
            cuts.push(kink);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2)
        .map(|w| integrate(&f, w[0], w[1], 1e-12))
        .sum()
}

#[test]
fn criterion_01_risk_closed_form_matches_quadrature() {
    let started = Instant::now();
    for mu in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0] {
        for alpha in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let closed: f64 = ampalloc::st_risk(mu, alpha);
            let oracle = risk_by_quadrature(mu, alpha);
            assert!(
                (closed - oracle).abs() <= 1e-8,
                "risk mismatch at mu={mu}, alpha={alpha}: {closed} vs {oracle}"
            );
        }
    }
    assert!(started.elapsed() < Duration::from_secs(5), "over time budget");
    println!("ACCEPTANCE 01 scalar risk closed form vs quadrature: PASS");
}

// ---------------------------------------------------------------------
// 02: minimax risk boundary value and monotonicity.
// ---------------------------------------------------------------------

#[test]
fn criterion_02_minimax_risk_boundary_and_monotonicity() {
    let started = Instant::now();
    let edge = minimax_mse(1.0_f64).unwrap();
    assert!((edge.m_sharp - 1.0).abs() <= 1e-9);
    assert!(edge.alpha_star.abs() <= 1e-9);

    let mut prev = 0.0;
    for i in 1..=99 {
        let eps = i as f64 / 100.0;
        let m = minimax_mse(eps).unwrap().m_sharp;
        assert!(m > 0.0 && m <= 1.0, "m_sharp({eps}) = {m} out of range");
        assert!(m > prev, "m_sharp not strictly increasing at eps={eps}");
        prev = m;
    }
    assert!(started.elapsed() < Duration::from_secs(10), "over time budget");
    println!("ACCEPTANCE 02 minimax risk boundary and monotonicity: PASS");
}

// ---------------------------------------------------------------------
// 03: single-block prediction reduces to the scalar fixed-point formula.
// ---------------------------------------------------------------------

#[test]
fn criterion_03_single_block_prediction_reduces_to_scalar_formula() {
    let noise_var = 0.7;
    for i in 0..10 {
        let eps = 0.02 * (i + 1) as f64;
        for j in 0..10 {
            let delta = 0.55 + 0.40 * j as f64 / 9.0;
            let m = minimax_mse(eps).unwrap().m_sharp;
            let profile =
                BlockProfile::uniform(ThreePointPrior::least_favorable(eps).unwrap(), delta)
                    .unwrap();
            let alloc = AllocationProfile::uniform(1);
            let pred = predicted_mse(&profile, &alloc, noise_var).unwrap();
            assert!(pred.converges, "unexpected divergence at ({eps}, {delta})");
            let scalar = m * noise_var / (1.0 - m / delta);
            let got = pred.mse.unwrap();
            assert!(
                (got - scalar).abs() <= 1e-12,
                "prediction {got} vs scalar formula {scalar} at ({eps}, {delta})"
            );
        }
    }
    println!("ACCEPTANCE 03 single-block prediction reduction: PASS");
}

// ---------------------------------------------------------------------
// 04: no random feasible allocation beats the closed-form optimum.
// ---------------------------------------------------------------------

#[test]
fn criterion_04_closed_form_allocation_is_unbeaten() {
    let mut rng = StdRng::seed_from_u64(11);
    for case in 0..20 {
        let k = if case % 2 == 0 { 2 } else { 3 };
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let fractions: Vec<f64> = raw.iter().map(|c| c / total).collect();
        let blocks: Vec<(f64, ThreePointPrior<f64>)> = fractions
            .iter()
            .map(|&c| {
                let eps = rng.random_range(0.005..0.85);
                (c, ThreePointPrior::least_favorable(eps).unwrap())
            })
            .collect();
        let profile = BlockProfile::new(blocks, 0.5).unwrap();
        let best = optimal_allocation(&profile).unwrap();
        let best_objective = allocation_objective(&profile, &best).unwrap();

        for _ in 0..100 {
            let sigma2: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..3.0)).collect();
            let budget: f64 = sigma2
                .iter()
                .zip(&fractions)
                .map(|(s, c)| c * s)
                .sum();
            let scaled: Vec<f64> = sigma2.iter().map(|s| s / budget).collect();
            let candidate = AllocationProfile::new(scaled, &fractions).unwrap();
            let objective = allocation_objective(&profile, &candidate).unwrap();
            assert!(
                best_objective <= objective + 1e-12,
                "random allocation beat the optimum in case {case}: {objective} < {best_objective}"
            );
        }
    }
    println!("ACCEPTANCE 04 closed-form allocation optimality: PASS");
}

// ---------------------------------------------------------------------
// 05: with unit column variances the iteration coincides with an
// independently coded standard AMP, step for step.
// ---------------------------------------------------------------------

#[test]
fn criterion_05_unit_variance_iteration_matches_standard_amp() {
    let (m, n) = (500, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let signal: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if u < 0.9 {
                0.0
            } else if u < 0.95 {
                3.0
            } else {
                -3.0
            }
        })
        .collect();
    let scale = 1.0 / (m as f64).sqrt();
    let matrix: Vec<f64> = (0..m * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let y: Vec<f64> = (0..m)
        .map(|row| {
            let ax: f64 = (0..n).map(|col| matrix[row * n + col] * signal[col]).sum();
            ax + 0.2 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let alpha = minimax_mse(0.1_f64).unwrap().alpha_star;

    // Library side.
    let op = SensingOperator::new(
        Array2::from_shape_vec((m, n), matrix.clone()).unwrap(),
        Array1::ones(n),
    )
    .unwrap();
    let y_arr = Array1::from_vec(y.clone());
    let alpha_arr = Array1::from_elem(n, alpha);
    let mut state = AmpState::initial(m, n);

    // Oracle side: plain vectors and explicit loops.
    let mut x = vec![0.0_f64; n];
    let mut r = vec![0.0_f64; m];

    for step in 0..50 {
        state = amp_p_step(&y_arr, &op, &alpha_arr, &state, true).unwrap();

        let support = x.iter().filter(|&&v| v != 0.0).count() as f64;
        let mut r_new = vec![0.0; m];
        for row in 0..m {
            let ax: f64 = (0..n).map(|col| matrix[row * n + col] * x[col]).sum();
            r_new[row] = y[row] - ax + support / m as f64 * r[row];
        }
        let gamma = r_new.iter().map(|v| v * v).sum::<f64>().sqrt() / (m as f64).sqrt();
        let mut x_new = vec![0.0; n];
        for col in 0..n {
            let corr: f64 = (0..m).map(|row| matrix[row * n + col] * r_new[row]).sum();
            x_new[col] = soft(x[col] + corr, alpha * gamma);
        }
        x = x_new;
        r = r_new;

        assert!(
            (state.gamma_hat - gamma).abs() <= 1e-10,
            "noise estimate diverged from oracle at step {step}"
        );
        let worst = state
            .x
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            worst <= 1e-10,
            "iterate mismatch at step {step}: max coordinate gap {worst}"
        );
    }
    println!("ACCEPTANCE 05 standard-AMP reduction at unit variance: PASS");
}

// ---------------------------------------------------------------------
// 06: noiseless recovery succeeds below the predicted boundary and fails
// above it.
// ---------------------------------------------------------------------

fn noiseless_run(aggregate_target: f64, seed: u64) -> Vec<TrialResult> {
    let delta = 0.5;
    let eps = bisect_increasing(
        |e: f64| minimax_mse(e).unwrap().m_sharp - aggregate_target,
        1e-4,
        0.999,
        1e-12,
        200,
    );
    let spec = ExperimentSpec {
        block_fractions: vec![1.0],
        rho: eps / delta,
        noise_var: 0.0,
        seed,
        alloc_mode: AllocMode::Uniform,
        ..desk_spec()
    };
    let mut experiment = Experiment::new(spec).unwrap();
    experiment.amp.x_tol = 1e-9;
    experiment.run_mode(AllocMode::Uniform).unwrap()
}

#[test]
fn criterion_06_noiseless_recovery_flips_at_the_boundary() {
    let started = Instant::now();

    let below = noiseless_run(0.8 * 0.5, 4242);
    let exact = below.iter().filter(|r| r.mse < 1e-6).count();
    assert!(
        exact >= 45,
        "only {exact}/50 exact recoveries below the boundary"
    );

    let above = noiseless_run(1.2 * 0.5, 4242);
    let best = above.iter().map(|r| r.mse).fold(f64::INFINITY, f64::min);
    assert!(
        best >= 1e-3,
        "recovery above the boundary reached mse {best}"
    );

    assert!(
        started.elapsed() < Duration::from_secs(300),
        "over time budget"
    );
    println!("ACCEPTANCE 06 noiseless recovery boundary: PASS");
}

// ---------------------------------------------------------------------
// 07: Monte Carlo means track predictions across the sparsity-ratio
// sweep, and the optimal allocation never loses once blocks differ.
// ---------------------------------------------------------------------

#[test]
fn criterion_07_allocation_gain_across_sparsity_ratios() {
    let started = Instant::now();
    let ratios = [1.0, 5.0, 10.0, 50.0, 100.0];
    let rows = sweep_ratio(&desk_spec(), &ratios).unwrap();
    assert_eq!(rows.len(), 2 * ratios.len());

    for pair in rows.chunks(2) {
        let uniform = pair[0].stats.as_ref().expect("admissible point");
        let optimal = pair[1].stats.as_ref().expect("admissible point");
        assert_eq!(pair[0].alloc_mode, AllocMode::Uniform);
        assert_eq!(pair[1].alloc_mode, AllocMode::Optimal);
        let ratio = pair[0].ratio;

        for (label, stats) in [("uniform", uniform), ("optimal", optimal)] {
            let theory = stats.mse_theory.expect("convergent point");
            let gap = (stats.mse_mean / theory - 1.0).abs();
            assert!(
                gap <= 0.15,
                "{label} mean off theory by {:.1}% at ratio {ratio}",
                100.0 * gap
            );
        }
        if ratio >= 5.0 {
            assert!(
                optimal.mse_mean <= uniform.mse_mean,
                "optimal allocation lost at ratio {ratio}"
            );
        }
        if ratio == 100.0 {
            let combined = uniform.mse_stderr.hypot(optimal.mse_stderr);
            assert!(
                uniform.mse_mean - optimal.mse_mean >= 2.0 * combined,
                "allocation gain at ratio 100 not significant: gap {} vs stderr {combined}",
                uniform.mse_mean - optimal.mse_mean
            );
        }
    }
    assert!(
        started.elapsed() < Duration::from_secs(900),
        "over time budget"
    );
    println!("ACCEPTANCE 07 allocation gain across sparsity ratios: PASS");
}

// ---------------------------------------------------------------------
// 08: empirical MSE grows linearly in the noise variance with the
// predicted slope; predicted points are exactly linear.
// ---------------------------------------------------------------------

#[test]
fn criterion_08_mse_grows_linearly_with_noise() {
    let noise_vars = [0.2, 0.4, 0.6, 0.8, 1.0];
    for ratio in [5.0, 100.0] {
        let spec = ExperimentSpec {
            rho: 0.1,
            epsilon_ratio: ratio,
            ..desk_spec()
        };
        let (_, fits) = sweep_noise(&spec, &noise_vars).unwrap();
        assert_eq!(fits.len(), 2);
        for fit in fits {
            assert!(
                fit.empirical.r_squared >= 0.99,
                "{} fit at ratio {ratio} not linear: R^2 = {}",
                fit.alloc_mode,
                fit.empirical.r_squared
            );
            let slope_gap = (fit.empirical.slope / fit.theory.slope - 1.0).abs();
            assert!(
                slope_gap <= 0.15,
                "{} slope off theory by {:.1}% at ratio {ratio}",
                fit.alloc_mode,
                100.0 * slope_gap
            );
            assert!(
                fit.theory.r_squared >= 1.0 - 1e-12,
                "theory points not exactly linear at ratio {ratio}"
            );
        }
    }
    println!("ACCEPTANCE 08 MSE linearity in noise variance: PASS");
}

// ---------------------------------------------------------------------
// 09: removing the residual memory term costs at least 1.5x in MSE.
// ---------------------------------------------------------------------

#[test]
fn criterion_09_memory_term_ablation_degrades_mse() {
    let spec = ExperimentSpec {
        epsilon_ratio: 5.0,
        ..desk_spec()
    };
    let mut experiment = Experiment::new(spec).unwrap();
    let with_memory = mean_mse(&experiment.run_mode(AllocMode::Optimal).unwrap());
    experiment.amp.onsager = false;
    let without_memory = mean_mse(&experiment.run_mode(AllocMode::Optimal).unwrap());
    assert!(
        without_memory >= 1.5 * with_memory,
        "ablation degraded MSE only {:.2}x ({with_memory} -> {without_memory})",
        without_memory / with_memory
    );
    println!("ACCEPTANCE 09 residual memory-term ablation: PASS");
}

// ---------------------------------------------------------------------
// 10: every command is deterministic end to end.
// ---------------------------------------------------------------------

#[test]
fn criterion_10_reruns_are_byte_identical() {
    let commands: [&[&str]; 5] = [
        &["theory", "--n", "200", "--m", "100", "--rho", "0.15"],
        &[
            "run", "--n", "200", "--m", "100", "--rho", "0.15", "--epsilon-ratio", "10",
            "--trials", "2",
        ],
        &[
            "sweep-ratio", "--n", "200", "--m", "100", "--rho", "0.15", "--trials", "2",
            "--ratios", "1,5",
        ],
        &[
            "sweep-noise", "--n", "200", "--m", "100", "--rho", "0.15", "--epsilon-ratio", "10",
            "--trials", "2", "--noise-vars", "0.2,0.6",
        ],
        &[
            "contour", "--rho-min", "0.1", "--rho-max", "0.3", "--delta-min", "0.4",
            "--delta-max", "0.7", "--grid-width", "4", "--grid-height", "3",
        ],
    ];
    for args in commands {
        let run = || {
            let out = Command::new(env!("CARGO_BIN_EXE_ampalloc"))
                .env_remove("AMPALLOC_THREADS")
                .args(args)
                .output()
                .expect("binary should spawn");
            assert!(
                out.status.success(),
                "{args:?} failed: {}",
                String::from_utf8_lossy(&out.stderr)
            );
            out.stdout
        };
        assert_eq!(run(), run(), "rerun of {args:?} differed");
    }
    println!("ACCEPTANCE 10 pipeline determinism: PASS");
}
