//! Acceptance criteria 1–10. Runs without the libtest harness so that every
//! criterion prints exactly one `[PASS]`/`[FAIL]` line; the process exits
//! non-zero when any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use dpboot::RayonRunner;
use dpboot_core::base_measure::thresholded_labels;
use dpboot_core::rng::{stream, StreamRng, DOMAIN_BASE_SAMPLE, DOMAIN_USER};
use dpboot_core::{
    calibrate_alpha_coverage, calibrate_alpha_ppi, credible_interval, empirical_sandwich, ppi_variance_mean,
    run_posterior_bootstrap, sample_weights, solve_weighted_erm, AtomicBase, BaseMeasure, CoverageOptions, Design,
    ImputedDataset, LabeledDataset, LossModel, PosteriorDraws, PredictiveBase, RunConfig, SolverControls,
};

const SEED: u64 = 20_240_611;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(index: u64) -> StreamRng {
    stream(SEED, DOMAIN_USER, index)
}

fn normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

fn bernoulli(rng: &mut StreamRng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn config(alpha: f64, truncation: usize, draws: usize, seed: u64) -> RunConfig {
    RunConfig {
        alpha,
        truncation,
        draws,
        seed,
        ..RunConfig::default()
    }
}

fn runner() -> RayonRunner {
    RayonRunner::new(None).expect("thread pool")
}

fn within_budget(elapsed: Duration, limit_secs: f64) -> std::result::Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs {
        Ok(())
    } else {
        Err(format!("runtime {:.2}s exceeds {limit_secs}s", elapsed.as_secs_f64()))
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac1_bayesian_bootstrap() -> Outcome {
    let mut r = rng(1);
    let y: Vec<f64> = (0..200).map(|_| bernoulli(&mut r, 0.3)).collect();
    let data = LabeledDataset::from_responses(y.clone()).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let draws = run_posterior_bootstrap(&data, None, &LossModel::Mean, &config(0.0, 1, 2000, SEED), &runner())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let p_hat = mean(&y);
    let post_mean = draws.mean(0);
    let post_sd = draws.sd(0);
    let mc_se = post_sd / (draws.len() as f64).sqrt();
    let z = (post_mean - p_hat).abs() / mc_se;
    let target_sd = (p_hat * (1.0 - p_hat) / y.len() as f64).sqrt();
    let ratio = post_sd / target_sd;
    within_budget(elapsed, 5.0)?;
    verdict(
        z <= 3.0 && (ratio - 1.0).abs() <= 0.10,
        format!(
            "|mean - p̂| = {z:.2} MC SE, sd / sqrt(p̂(1-p̂)/n) = {ratio:.4}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn skew_kurtosis(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    let n = v.len() as f64;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = v.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

fn ac2_asymptotic_normality() -> Outcome {
    let n = 2000;
    let mut r = rng(2);
    let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let atoms: Vec<f64> = (0..200).map(|_| 0.5 + normal(&mut r)).collect();
    let data = LabeledDataset::from_responses(y).map_err(|e| e.to_string())?;
    let atoms = ImputedDataset::from_labels(Vec::new(), 0, atoms).map_err(|e| e.to_string())?;
    let base = BaseMeasure::from(AtomicBase::new(atoms.clone()).map_err(|e| e.to_string())?);
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, gamma) in [0.1, 0.5].into_iter().enumerate() {
        let alpha = gamma * n as f64;
        let sandwich = empirical_sandwich(&data, Some(&atoms), &LossModel::Mean, alpha, &SolverControls::default())
            .map_err(|e| e.to_string())?;
        let draws = run_posterior_bootstrap(
            &data,
            Some(&base),
            &LossModel::Mean,
            &config(alpha, 200, 2000, SEED + i as u64),
            &runner(),
        )
        .map_err(|e| e.to_string())?;
        let scale = (n as f64 * (1.0 + gamma)).sqrt();
        let z: Vec<f64> = draws
            .column(0)
            .iter()
            .map(|t| scale * (t - sandwich.theta_center[0]))
            .collect();
        let ratio = variance(&z) / sandwich.trace();
        let (skew, kurt) = skew_kurtosis(&z);
        ok &= (ratio - 1.0).abs() <= 0.15 && skew.abs() < 0.15 && kurt.abs() < 0.3;
        parts.push(format!(
            "γ={gamma}: var/trΣ̂ = {ratio:.4}, skew = {skew:.3}, excess kurtosis = {kurt:.3}"
        ));
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, 60.0)?;
    parts.push(format!("{:.2}s", elapsed.as_secs_f64()));
    verdict(ok, parts.join("; "))
}

/// Weighted multinomial negative log-likelihood with the last class as
/// reference; `classes == 2` is the logistic model.
fn oracle_objective(theta: &[f64], y: &[usize], x: &[Vec<f64>], w: &[f64], classes: usize) -> f64 {
    let d = x[0].len();
    let mut total = 0.0;
    let mut z = vec![0.0; classes];
    for ((yi, xi), wi) in y.iter().zip(x).zip(w) {
        for c in 0..classes - 1 {
            z[c] = (0..d).map(|j| theta[c * d + j] * xi[j]).sum();
        }
        z[classes - 1] = 0.0;
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += wi * (lse - z[*yi]);
    }
    total
}

const GRID_STEP: f64 = 0.01;
const GRID_HALF_WIDTH: f64 = 3.0;

/// Minimizes over the lattice `center + k·step` within `radius` of `center`
/// (clipped to the outer box).
fn lattice_argmin(f: &dyn Fn(&[f64]) -> f64, center: &[f64], radius: usize, step: f64) -> Vec<f64> {
    let p = center.len();
    let span = 2 * radius + 1;
    let mut best = (f64::INFINITY, center.to_vec());
    let mut point = vec![0.0; p];
    for flat in 0..span.pow(p as u32) {
        let mut rest = flat;
        let mut inside = true;
        for j in 0..p {
            let k = (rest % span) as f64 - radius as f64;
            rest /= span;
            point[j] = center[j] + k * step;
            inside &= point[j].abs() <= GRID_HALF_WIDTH + 1e-9;
        }
        if inside {
            let v = f(&point);
            if v < best.0 {
                best = (v, point.clone());
            }
        }
    }
    best.1
}

/// Minimizer over the 0.01 lattice of `[-3, 3]^p`: exhaustive for `p = 1`,
/// coarse-to-fine otherwise (the objective is convex).
fn grid_argmin(f: &dyn Fn(&[f64]) -> f64, p: usize) -> Vec<f64> {
    let origin = vec![0.0; p];
    let full = (GRID_HALF_WIDTH / GRID_STEP).round() as usize;
    if p == 1 {
        return lattice_argmin(f, &origin, full, GRID_STEP);
    }
    let coarse = lattice_argmin(f, &origin, 30, 0.1);
    let snap = |v: &[f64]| {
        v.iter()
            .map(|t| (t / GRID_STEP).round() * GRID_STEP)
            .collect::<Vec<f64>>()
    };
    let mut center = snap(&coarse);
    loop {
        let next = lattice_argmin(f, &center, 15, GRID_STEP);
        let moved_to_edge = next
            .iter()
            .zip(&center)
            .any(|(a, b)| ((a - b).abs() / GRID_STEP).round() >= 15.0);
        center = snap(&next);
        if !moved_to_edge {
            return center;
        }
    }
}

fn ac3_erm_oracle() -> Outcome {
    let shapes: [(usize, usize); 20] = [
        (1, 2),
        (2, 2),
        (3, 2),
        (1, 2),
        (2, 2),
        (3, 2),
        (1, 2),
        (2, 2),
        (3, 2),
        (2, 2),
        (1, 3),
        (1, 4),
        (1, 3),
        (1, 4),
        (1, 3),
        (1, 4),
        (1, 3),
        (1, 4),
        (1, 3),
        (1, 4),
    ];
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, &(d, classes)) in shapes.iter().enumerate() {
        let logistic = i < 10;
        let p = d * (classes - 1);
        let mut r = rng(300 + i as u64);
        let truth: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
        let n = 100;
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let xi: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
            let mut z: Vec<f64> = (0..classes - 1)
                .map(|c| (0..d).map(|j| truth[c * d + j] * xi[j]).sum::<f64>())
                .collect();
            z.push(0.0);
            let total: f64 = z.iter().map(|v| v.exp()).sum();
            let u: f64 = r.random::<f64>() * total;
            let mut acc = 0.0;
            let mut label = classes - 1;
            for (c, v) in z.iter().enumerate() {
                acc += v.exp();
                if u < acc {
                    label = c;
                    break;
                }
            }
            x.push(xi);
            y.push(label);
        }
        let w: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut r)).collect();

        // the logistic model labels class 1 as the event, which is the
        // reference-class parameterization with the sign of θ flipped
        let (loss, labels): (LossModel, Vec<f64>) = if logistic {
            (
                LossModel::Logistic { dim: d },
                y.iter().map(|&c| if c == 0 { 0.0 } else { 1.0 }).collect(),
            )
        } else {
            (
                LossModel::softmax(d, classes).map_err(|e| e.to_string())?,
                y.iter().map(|&c| c as f64).collect(),
            )
        };
        let covariates: Vec<f64> = x.iter().flatten().copied().collect();
        let data = LabeledDataset::new(labels, covariates, d).map_err(|e| e.to_string())?;
        let design = Design::new(data.rows(), None);
        let solution = solve_weighted_erm(&loss, &design, &w, &SolverControls::default()).map_err(|e| e.to_string())?;
        if !solution.converged {
            return Err(format!("instance {i}: solver did not converge"));
        }

        let oracle = grid_argmin(
            &|theta: &[f64]| {
                if logistic {
                    let flipped: Vec<f64> = theta.iter().map(|t| -t).collect();
                    oracle_objective(&flipped, &y, &x, &w, 2)
                } else {
                    oracle_objective(theta, &y, &x, &w, classes)
                }
            },
            p,
        );
        let gap = solution
            .theta
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if solution.theta.iter().any(|t| t.abs() > GRID_HALF_WIDTH - GRID_STEP) {
            return Err(format!(
                "instance {i}: solution {:?} outside the search box",
                solution.theta
            ));
        }
        worst = worst.max(gap);
    }
    let elapsed = start.elapsed();
    within_budget(elapsed, 30.0)?;
    verdict(
        worst <= GRID_STEP + 1e-12,
        format!(
            "20 instances, max |θ_solver - θ_grid|∞ = {worst:.4} (step 0.01), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn ac4_derivatives() -> Outcome {
    let losses = [
        (LossModel::Mean, 0usize),
        (LossModel::Ols { dim: 3 }, 3),
        (LossModel::Logistic { dim: 3 }, 3),
        (LossModel::softmax(2, 3).map_err(|e| e.to_string())?, 2),
    ];
    let mut r = rng(4);
    let mut worst_grad: f64 = 0.0;
    let mut worst_hess: f64 = 0.0;
    for (loss, d) in &losses {
        let p = loss.dim();
        for _ in 0..100 {
            let theta: Vec<f64> = (0..p).map(|_| normal(&mut r)).collect();
            let x: Vec<f64> = (0..*d).map(|_| normal(&mut r)).collect();
            let y = match loss {
                LossModel::Logistic { .. } => bernoulli(&mut r, 0.5),
                LossModel::Softmax { classes, .. } => r.random_range(0..*classes) as f64,
                _ => 2.0 * normal(&mut r),
            };
            let mut grad = vec![0.0; p];
            loss.gradient(&theta, y, &x, &mut grad);
            let mut hess = vec![0.0; p * p];
            loss.hessian(&theta, y, &x, &mut hess).map_err(|e| e.to_string())?;

            let h = 1e-5;
            let mut fd_grad = vec![0.0; p];
            let mut fd_hess = vec![0.0; p * p];
            for j in 0..p {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[j] += h;
                minus[j] -= h;
                fd_grad[j] = (loss.value(&plus, y, &x) - loss.value(&minus, y, &x)) / (2.0 * h);
                let mut gp = vec![0.0; p];
                let mut gm = vec![0.0; p];
                loss.gradient(&plus, y, &x, &mut gp);
                loss.gradient(&minus, y, &x, &mut gm);
                for k in 0..p {
                    fd_hess[k * p + j] = (gp[k] - gm[k]) / (2.0 * h);
                }
            }
            let diff_g: Vec<f64> = grad.iter().zip(&fd_grad).map(|(a, b)| a - b).collect();
            let diff_h: Vec<f64> = hess.iter().zip(&fd_hess).map(|(a, b)| a - b).collect();
            worst_grad = worst_grad.max(max_abs(&diff_g) / max_abs(&fd_grad).max(1e-8));
            worst_hess = worst_hess.max(max_abs(&diff_h) / max_abs(&fd_hess).max(1e-8));
        }
    }
    verdict(
        worst_grad <= 1e-4 && worst_hess <= 1e-3,
        format!("mean/ols/logistic/softmax, 400 points: max relative error gradient {worst_grad:.2e}, Hessian {worst_hess:.2e}"),
    )
}

fn ac5_thresholding_bias() -> Outcome {
    let big_n = 10_000;
    let mut r = rng(5);
    let p_star: Vec<f64> = (0..big_n).map(|_| r.random::<f64>()).collect();
    let target = mean(&p_star);
    let rows = ImputedDataset::from_probabilities(Vec::new(), 0, p_star.clone(), 1).map_err(|e| e.to_string())?;
    let base = PredictiveBase::new(rows).map_err(|e| e.to_string())?;

    let thresholded = thresholded_labels(&base, 0.5).map_err(|e| e.to_string())?;
    let hard = thresholded.labels().expect("thresholded labels");
    let gaps: Vec<f64> = hard.iter().zip(&p_star).map(|(h, p)| h - p).collect();
    let threshold_se = (variance(&gaps) / big_n as f64).sqrt();
    let threshold_z = mean(&gaps).abs() / threshold_se;

    let labeled: Vec<f64> = (0..100)
        .map(|_| {
            let p = r.random::<f64>();
            bernoulli(&mut r, p)
        })
        .collect();
    let data = LabeledDataset::from_responses(labeled).map_err(|e| e.to_string())?;
    let base = BaseMeasure::from(base);
    let draws = run_posterior_bootstrap(
        &data,
        Some(&base),
        &LossModel::Mean,
        &config(1e5, big_n, 200, SEED),
        &runner(),
    )
    .map_err(|e| e.to_string())?;
    let sampling_se = (target * (1.0 - target) / big_n as f64).sqrt();
    let sampling_z = (draws.mean(0) - target).abs() / sampling_se;
    verdict(
        threshold_z > 3.0 && sampling_z <= 3.0,
        format!(
            "thresholded mean - mean p* = {:.5} ({threshold_z:.2} SE, need > 3); sampling-base posterior mean off by {sampling_z:.2} SE (need ≤ 3)",
            mean(&gaps)
        ),
    )
}

fn ac6_width_monotonicity() -> Outcome {
    let alphas = [0.0, 1.0, 10.0, 100.0, 1000.0];
    let (n, p, reps) = (200, 0.3, 10);
    let rows = ImputedDataset::from_probabilities(Vec::new(), 0, vec![p; 1000], 1).map_err(|e| e.to_string())?;
    let base = BaseMeasure::from(PredictiveBase::new(rows).map_err(|e| e.to_string())?);
    let runner = runner();
    let mut widths = vec![Vec::new(); alphas.len()];
    let mut classical = Vec::new();
    for rep in 0..reps {
        let mut r = rng(600 + rep);
        let y: Vec<f64> = (0..n).map(|_| bernoulli(&mut r, p)).collect();
        let p_hat = mean(&y);
        classical.push(2.0 * 1.645 * (p_hat * (1.0 - p_hat) / n as f64).sqrt());
        let data = LabeledDataset::from_responses(y).map_err(|e| e.to_string())?;
        for (k, &alpha) in alphas.iter().enumerate() {
            let draws: PosteriorDraws = run_posterior_bootstrap(
                &data,
                Some(&base),
                &LossModel::Mean,
                &config(alpha, 2000, 1000, SEED + rep),
                &runner,
            )
            .map_err(|e| e.to_string())?;
            let (lo, hi) = credible_interval(&draws, 0, 0.9).map_err(|e| e.to_string())?;
            widths[k].push(hi - lo);
        }
    }
    let medians: Vec<f64> = widths.iter().map(|w| median(w)).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= 1.05 * w[0]);
    let ratio = medians[0] / median(&classical);
    verdict(
        monotone && (ratio - 1.0).abs() <= 0.15,
        format!(
            "median widths {:?}; width(α=0) / normal-approximation width = {ratio:.4}",
            medians.iter().map(|w| (w * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    )
}

fn ac7_ppi_root() -> Outcome {
    let (n, big_n, truncation) = (200, 10_000, 10_000);
    let mut r = rng(7);
    let mut y = Vec::with_capacity(n);
    let mut predictions = Vec::with_capacity(n);
    for _ in 0..n {
        let p = r.random::<f64>();
        predictions.push(p);
        y.push(bernoulli(&mut r, p));
    }
    let imputed: Vec<f64> = (0..big_n).map(|_| r.random::<f64>()).collect();
    let ppi = ppi_variance_mean(&y, &predictions, &imputed).map_err(|e| e.to_string())?;
    let data = LabeledDataset::from_responses(y).map_err(|e| e.to_string())?;
    let rows = ImputedDataset::from_probabilities(Vec::new(), 0, imputed, 1).map_err(|e| e.to_string())?;
    let base = BaseMeasure::from(PredictiveBase::new(rows).map_err(|e| e.to_string())?);
    let cfg = config(0.0, truncation, 1000, SEED);
    let result =
        calibrate_alpha_ppi(&data, &base, &LossModel::Mean, &ppi, (0.0, 1e5), &cfg).map_err(|e| e.to_string())?;

    // re-evaluate the variance equation at the returned α on the same base sample
    let base_draws = base
        .draw_base(truncation, &mut stream(SEED, DOMAIN_BASE_SAMPLE, 0))
        .map_err(|e| e.to_string())?;
    let alpha = result.alpha_star;
    let sandwich = empirical_sandwich(
        &data,
        Some(&base_draws),
        &LossModel::Mean,
        alpha,
        &SolverControls::default(),
    )
    .map_err(|e| e.to_string())?;
    let residual = (sandwich.trace() / (n as f64 + alpha) - ppi.total).abs() / ppi.total;
    verdict(
        result.converged && residual <= 1e-8 && result.iterations <= 60,
        format!(
            "α̂ = {alpha:.4}, relative residual {residual:.2e}, {} bisections, v_PPI = {:.3e}",
            result.iterations, ppi.total
        ),
    )
}

fn ac8_coverage_calibration() -> Outcome {
    let n = 200;
    let n_boot = 200;
    let level = 0.9;
    let noise = (level * (1.0 - level) / n_boot as f64).sqrt();
    let se = 1.0 / (n as f64).sqrt();
    let mut r = rng(8);
    let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
    let data = LabeledDataset::from_responses(y).map_err(|e| e.to_string())?;
    let mut raw: Vec<f64> = (0..1000).map(|_| normal(&mut r)).collect();
    let centre = mean(&raw);
    raw.iter_mut().for_each(|v| *v -= centre);
    let atomic = |shift: f64| -> std::result::Result<BaseMeasure, String> {
        let labels = raw.iter().map(|v| v + shift).collect();
        let atoms = ImputedDataset::from_labels(Vec::new(), 0, labels).map_err(|e| e.to_string())?;
        Ok(BaseMeasure::from(AtomicBase::new(atoms).map_err(|e| e.to_string())?))
    };
    let cfg = config(0.0, 1000, 1000, SEED);
    let runner = runner();
    let options = |alphas: Vec<f64>| CoverageOptions {
        alphas,
        n_boot,
        level,
        slack: 3.0 * noise,
        coordinate: 0,
    };

    let biased_grid = vec![0.0, 10.0, 30.0, 100.0, 300.0, 1000.0];
    let biased = calibrate_alpha_coverage(
        &data,
        Some(&atomic(2.0 * se)?),
        &LossModel::Mean,
        &options(biased_grid.clone()),
        &cfg,
        &runner,
    )
    .map_err(|e| e.to_string())?;
    let coverage: Vec<f64> = biased.diagnostics.iter().map(|d| d.value).collect();
    let nonincreasing = coverage.windows(2).all(|w| w[1] <= w[0] + 3.0 * noise);
    let finite = biased.alpha_star < *biased_grid.last().unwrap() && biased.flags.is_empty();

    let unbiased_grid = vec![0.0, 2.0, 5.0, 10.0];
    let unbiased = calibrate_alpha_coverage(
        &data,
        Some(&atomic(0.0)?),
        &LossModel::Mean,
        &options(unbiased_grid.clone()),
        &cfg,
        &runner,
    )
    .map_err(|e| e.to_string())?;
    let at_max = unbiased.alpha_star == *unbiased_grid.last().unwrap();
    verdict(
        nonincreasing && finite && at_max,
        format!(
            "biased coverage {coverage:?}, α* = {}; unbiased coverage {:?}, α* = {} (grid max {})",
            biased.alpha_star,
            unbiased.diagnostics.iter().map(|d| d.value).collect::<Vec<_>>(),
            unbiased.alpha_star,
            unbiased_grid.last().unwrap()
        ),
    )
}

fn ac9_weight_marginals() -> Outcome {
    let (n, m, alpha, draws) = (20usize, 10usize, 5.0, 100_000);
    let mut r = rng(9);
    let mut obs = Vec::with_capacity(draws);
    let mut imag = Vec::with_capacity(draws);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..draws {
        let w = sample_weights(n, m, alpha, &mut r).map_err(|e| e.to_string())?;
        worst_sum = worst_sum.max((w.as_slice().iter().sum::<f64>() - 1.0).abs());
        obs.push(w.observed().iter().sum::<f64>() / n as f64);
        imag.push(w.imaginary().iter().sum::<f64>() / m as f64);
    }
    let z_obs = (mean(&obs) - 1.0 / (n as f64 + alpha)).abs() / (variance(&obs) / draws as f64).sqrt();
    let z_imag = (mean(&imag) - alpha / m as f64 / (n as f64 + alpha)).abs() / (variance(&imag) / draws as f64).sqrt();
    verdict(
        z_obs <= 3.0 && z_imag <= 3.0 && worst_sum <= 1e-12,
        format!("observed {z_obs:.2} SE, imaginary {z_imag:.2} SE, max |Σw - 1| = {worst_sum:.1e}"),
    )
}

fn run_sample(dir: &Path, out: &str, threads: usize) -> std::result::Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_dpboot"))
        .current_dir(dir)
        .args([
            "sample",
            "--labeled",
            "labeled.csv",
            "--loss",
            "logistic",
            "--alpha",
            "20",
            "--imputed",
            "imputed.csv",
            "--base",
            "predictive",
            "--m",
            "200",
            "--B",
            "300",
            "--seed",
            "11",
            "--out",
            out,
            "--threads",
        ])
        .arg(threads.to_string())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("dpboot sample exited with {status}"));
    }
    fs::read(dir.join(out).join("draws.csv")).map_err(|e| e.to_string())
}

fn ac10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(10);
    let mut labeled = String::from("y,x1,x2\n");
    for _ in 0..150 {
        let (x1, x2) = (normal(&mut r), normal(&mut r));
        let p = 1.0 / (1.0 + (-(0.8 * x1 - 0.5 * x2)).exp());
        labeled.push_str(&format!("{},{x1},{x2}\n", bernoulli(&mut r, p)));
    }
    let mut imputed = String::from("x1,x2,p1\n");
    for _ in 0..400 {
        let (x1, x2) = (normal(&mut r), normal(&mut r));
        let p = 1.0 / (1.0 + (-(0.7 * x1 - 0.4 * x2)).exp());
        imputed.push_str(&format!("{x1},{x2},{p}\n"));
    }
    fs::write(dir.path().join("labeled.csv"), labeled).map_err(|e| e.to_string())?;
    fs::write(dir.path().join("imputed.csv"), imputed).map_err(|e| e.to_string())?;
    let serial = run_sample(dir.path(), "serial", 1)?;
    let parallel = run_sample(dir.path(), "parallel", 4)?;
    let again = run_sample(dir.path(), "again", 4)?;
    verdict(
        serial == parallel && parallel == again && !serial.is_empty(),
        format!(
            "draws.csv ({} bytes) identical for 1 vs 4 threads: {}, across reruns: {}",
            serial.len(),
            serial == parallel,
            parallel == again
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 Bayesian-bootstrap reduction", ac1_bayesian_bootstrap),
        ("AC2 asymptotic normality vs sandwich", ac2_asymptotic_normality),
        ("AC3 ERM vs dense grid search", ac3_erm_oracle),
        ("AC4 gradient/Hessian vs finite differences", ac4_derivatives),
        ("AC5 thresholding bias vs sampling base", ac5_thresholding_bias),
        ("AC6 interval width monotone in alpha", ac6_width_monotonicity),
        ("AC7 PPI-match root residual", ac7_ppi_root),
        ("AC8 coverage calibration behavior", ac8_coverage_calibration),
        ("AC9 weight-sampler marginals", ac9_weight_marginals),
        ("AC10 determinism serial vs parallel", ac10_determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
