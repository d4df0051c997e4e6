//! Acceptance suite: one test per criterion, each printing a `criterion N:
//! PASS/FAIL` line with the measured quantities (run with `-- --nocapture` to
//! see the lines for passing tests).
//!
//! The synthetic-benchmark runs drive the actual CLI binary end to end and
//! share one pair of trained models across criteria 1 and 2.
#![allow(clippy::needless_range_loop)]

use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use thindeep::checkpoint::{Checkpoint, ModelState};
use thindeep::deep::{
    augmented_layer, flatness_fractions, sample_prior, saturation_stats, DepthConfig, MeanMode,
    ModelKind,
};
use thindeep::gp::robust_cholesky;
use thindeep::kernels::derivative::kernel_1d;
use thindeep::kernels::{
    derivative_variance_1d, find_lmx_triangle_violation, DerivativeKernelKind, FnField, FnW,
    WField,
};
use thindeep::metrics::EvalReport;
use thindeep::tdgp::sgp::SgpModel;
use thindeep::tdgp::{
    collapsed_elbo, psi_stats, qw_marginals, relevance_profile, TdgpModel, TdgpObjective,
};
use thindeep::train::Objective;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_thindeep")
}

fn run(args: &[&str]) {
    let status = Command::new(bin())
        .args(args)
        .status()
        .expect("spawn thindeep binary");
    assert!(status.success(), "command failed: {args:?}");
}

struct SyntheticRun {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    tdgp_report: EvalReport,
    sgp_report: EvalReport,
    tdgp_model: TdgpModel,
    sgp_model: SgpModel,
    out_root: PathBuf,
}

/// The pinned end-to-end synthetic benchmark: `gen` (n = 200, seed 0), one
/// TDGP fit and one shallow-GP fit with the three-phase schedule, both
/// evaluated on the held-out half.
fn synthetic_run() -> &'static SyntheticRun {
    static RUN: OnceLock<SyntheticRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().expect("tempdir");
        let root = dir.path().to_path_buf();
        let p = |s: &str| root.join(s).to_string_lossy().to_string();
        run(&["gen", "--n", "200", "--seed", "0", "--out", &p("data")]);
        run(&[
            "fit",
            "--data",
            &p("data/train.csv"),
            "--model",
            "tdgp",
            "--seed",
            "0",
            "--out",
            &p("tdgp_fit"),
        ]);
        run(&[
            "eval",
            "--data",
            &p("data/val.csv"),
            "--model-file",
            &p("tdgp_fit/checkpoint.json"),
            "--out",
            &p("tdgp_eval"),
        ]);
        run(&[
            "fit",
            "--data",
            &p("data/train.csv"),
            "--model",
            "sgp-shallow",
            "--seed",
            "0",
            "--out",
            &p("sgp_fit"),
        ]);
        run(&[
            "eval",
            "--data",
            &p("data/val.csv"),
            "--model-file",
            &p("sgp_fit/checkpoint.json"),
            "--out",
            &p("sgp_eval"),
        ]);
        let tdgp_report: EvalReport = serde_json::from_str(
            &std::fs::read_to_string(root.join("tdgp_eval/report.json")).unwrap(),
        )
        .unwrap();
        let sgp_report: EvalReport = serde_json::from_str(
            &std::fs::read_to_string(root.join("sgp_eval/report.json")).unwrap(),
        )
        .unwrap();
        let tdgp_model = match Checkpoint::load(&root.join("tdgp_fit/checkpoint.json"))
            .unwrap()
            .state
        {
            ModelState::Tdgp { model } => model,
            _ => panic!("expected tdgp checkpoint"),
        };
        let sgp_model = match Checkpoint::load(&root.join("sgp_fit/checkpoint.json"))
            .unwrap()
            .state
        {
            ModelState::Sgp { model } => model,
            _ => panic!("expected sgp checkpoint"),
        };
        SyntheticRun {
            dir,
            tdgp_report,
            sgp_report,
            tdgp_model,
            sgp_model,
            out_root: root,
        }
    })
}

#[test]
fn criterion_1_synthetic_benchmark_reproduction() {
    let run = synthetic_run();
    let t_nlpd = run.tdgp_report.aggregate.nlpd_mean;
    let t_mrae = run.tdgp_report.aggregate.mrae_mean;
    let s_nlpd = run.sgp_report.aggregate.nlpd_mean;
    let s_mrae = run.sgp_report.aggregate.mrae_mean;
    let tdgp_ok = t_nlpd <= -2.0 && t_mrae <= 0.05;
    let sgp_ok = (-2.0..=-0.8).contains(&s_nlpd) && (0.05..=0.25).contains(&s_mrae);
    println!(
        "criterion 1: {} (tdgp nlpd {t_nlpd:.3} [<= -2.0] mrae {t_mrae:.4} [<= 0.05]; \
         sgp nlpd {s_nlpd:.3} [in -2.0..-0.8] mrae {s_mrae:.4} [in 0.05..0.25])",
        if tdgp_ok && sgp_ok { "PASS" } else { "FAIL" }
    );
    assert!(
        tdgp_ok,
        "TDGP off target: nlpd {t_nlpd}, mrae {t_mrae} (expected nlpd <= -2.0, mrae <= 0.05)"
    );
    // The shallow baseline band is taken verbatim from the benchmark table;
    // see the project notes on its attainability at n = 200.
    assert!(
        sgp_ok,
        "shallow GP outside its band: nlpd {s_nlpd} (expected [-2.0, -0.8]), mrae {s_mrae} \
         (expected [0.05, 0.25])"
    );
}

#[test]
fn criterion_2_relevance_gap() {
    let run = synthetic_run();
    let rel = relevance_profile(&run.tdgp_model);
    let t_ratio = rel.relevance.min() / rel.relevance.max();
    let s_rel = run.sgp_model.relevance();
    let s_ratio = s_rel.min() / s_rel.max();
    let tdgp_ok = t_ratio <= 0.1;
    let sgp_ok = s_ratio >= 0.15;
    println!(
        "criterion 2: {} (tdgp min/max relevance {t_ratio:.4} [<= 0.1]; \
         sgp inverse-lengthscale ratio {s_ratio:.4} [>= 0.15])",
        if tdgp_ok && sgp_ok { "PASS" } else { "FAIL" }
    );
    assert!(tdgp_ok, "TDGP relevance ratio {t_ratio} above 0.1");
    // Baseline side of the figure-level claim; see the project notes on its
    // attainability at n = 200.
    assert!(sgp_ok, "shallow ratio {s_ratio} below 0.15");
}

/// Example-level check tied to the synthetic run: on the interior of the
/// data region, the dominant learned latent coordinate is a monotone
/// reparameterization of the true manifold coordinate on each monotone
/// branch of the funnel. The comparison must be branch-wise and interior:
/// the funnel is even in x0 and the outer map is even in its argument, so
/// the latent is only identifiable up to those symmetries (a locally linear
/// latent also fixes the origin), and near the data boundary the posterior
/// mean reverts toward the prior.
#[test]
fn latent_export_recovers_the_manifold() {
    let run = synthetic_run();
    let model = &run.tdgp_model;
    let rel = relevance_profile(model);
    let dominant = rel.relevance.argmax().0;
    // 2D grid over the interior of the raw data region
    let ck = Checkpoint::load(&run.out_root.join("tdgp_fit/checkpoint.json")).unwrap();
    let count = 23;
    let axis: Vec<f64> = (0..count)
        .map(|i| -0.7 + 1.4 * i as f64 / (count - 1) as f64)
        .collect();
    let mut raw = DMatrix::zeros(count * count, 2);
    for (r, &a) in axis.iter().enumerate() {
        for (c, &b) in axis.iter().enumerate() {
            raw[(r * count + c, 0)] = a;
            raw[(r * count + c, 1)] = b;
        }
    }
    let grid = ck.normalization.transform_x(&raw);
    let latent = thindeep::tdgp::export_latent(model, &grid).unwrap();
    let mut worst: f64 = 1.0;
    for branch in [true, false] {
        let idx: Vec<usize> = (0..raw.nrows())
            .filter(|&i| (raw[(i, 0)] > 0.05) == branch && raw[(i, 0)].abs() > 0.05)
            .collect();
        let h_model: Vec<f64> = idx.iter().map(|&i| latent[(i, dominant)]).collect();
        let h_true: Vec<f64> = idx
            .iter()
            .map(|&i| {
                let x0 = raw[(i, 0)];
                2.0 * x0 * (std::f64::consts::PI * x0).sin()
                    + 2.0 * (std::f64::consts::PI * x0).cos()
            })
            .collect();
        let rho = spearman(&h_model, &h_true).abs();
        worst = worst.min(rho);
    }
    println!("latent export: |spearman| per branch >= {worst:.3} (required 0.9)");
    assert!(worst >= 0.9, "rank correlation {worst} below 0.9");
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    // midranks for ties
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[start]] {
            end += 1;
        }
        let mid = (start + end) as f64 / 2.0;
        for &i in &idx[start..=end] {
            r[i] = mid;
        }
        start = end + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma).powi(2);
        db += (rb[i] - mb).powi(2);
    }
    num / (da.sqrt() * db.sqrt())
}

fn random_small_model(seed: u64, n: usize) -> (TdgpModel, DMatrix<f64>, DVector<f64>) {
    let (d, q, m_u, m_v) = (2, 2, 3, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut norm = |s: f64| -> f64 { s * rng.sample::<f64, _>(StandardNormal) };
    let mut q_mu = Vec::new();
    let mut q_sigma_chol = Vec::new();
    for _ in 0..q {
        q_mu.push(DMatrix::from_fn(m_v, d, |_, _| norm(0.8)));
        let a = DMatrix::from_fn(m_v, m_v, |_, _| norm(0.4));
        let spd = &a * a.transpose() + DMatrix::identity(m_v, m_v) * 0.4;
        q_sigma_chol.push(robust_cholesky(&spd).unwrap().l());
    }
    let model = TdgpModel {
        input_dim: d,
        latent_dim: q,
        sigma_f_sq: 0.9 + norm(0.15).abs(),
        noise_sq: 0.08 + norm(0.02).abs(),
        sigma_w_sq: DVector::from_fn(q, |_, _| 0.5 + norm(0.1).abs()),
        lengthscales: DVector::from_fn(d, |_, _| 0.9 + norm(0.2).abs()),
        prior_mean_w: DMatrix::from_fn(q, d, |_, _| norm(0.7)),
        z_out: DMatrix::from_fn(m_u, q, |_, _| norm(1.1)),
        z_hidden: DMatrix::from_fn(m_v, d, |_, _| norm(1.1)),
        q_mu,
        q_sigma_chol,
        bias_augmented: false,
    };
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5f64));
    let y = DVector::from_fn(n, |i, _| {
        (2.0 * x[(i, 0)]).sin() + 0.3 * rng.sample::<f64, _>(StandardNormal)
    });
    (model, x, y)
}

#[test]
fn criterion_3_psi_statistics_against_monte_carlo() {
    let samples = 1_000_000usize;
    let mut worst_z: f64 = 0.0;
    for instance in 0..10 {
        let (model, x, _) = random_small_model(9000 + instance, 6);
        let psi = psi_stats(&model, &x).unwrap();
        let marg = qw_marginals(&model, &x).unwrap();
        let n = 6;
        let m_u = 3;
        let q_dim = 2;
        let d = 2;
        let sigma_f = model.sigma_f_sq.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(7200 + instance);
        let mut p1_sum = DMatrix::<f64>::zeros(n, m_u);
        let mut p1_sq = DMatrix::<f64>::zeros(n, m_u);
        let mut p2_sum = DMatrix::<f64>::zeros(m_u, m_u);
        let mut p2_sq = DMatrix::<f64>::zeros(m_u, m_u);
        let mut k_rows = DMatrix::<f64>::zeros(n, m_u);
        for _ in 0..samples {
            for i in 0..n {
                let mut h = [0.0; 2];
                for qd in 0..q_dim {
                    let sd = marg.var[(i, qd)].max(0.0).sqrt();
                    let mut acc = 0.0;
                    for dd in 0..d {
                        let w = marg.mu[qd][(i, dd)]
                            + sd * rng.sample::<f64, _>(StandardNormal);
                        acc += w * x[(i, dd)];
                    }
                    h[qd] = acc;
                }
                for j in 0..m_u {
                    let mut d2 = 0.0;
                    for qd in 0..q_dim {
                        let diff = h[qd] - model.z_out[(j, qd)];
                        d2 += diff * diff;
                    }
                    let k = sigma_f * (-0.5 * d2).exp();
                    k_rows[(i, j)] = k;
                    p1_sum[(i, j)] += k;
                    p1_sq[(i, j)] += k * k;
                }
            }
            for j in 0..m_u {
                for k2 in 0..m_u {
                    let mut v = 0.0;
                    for i in 0..n {
                        v += k_rows[(i, j)] * k_rows[(i, k2)];
                    }
                    p2_sum[(j, k2)] += v;
                    p2_sq[(j, k2)] += v * v;
                }
            }
        }
        let s = samples as f64;
        for i in 0..n {
            for j in 0..m_u {
                let mean = p1_sum[(i, j)] / s;
                let se = ((p1_sq[(i, j)] / s - mean * mean).max(0.0) / s).sqrt().max(1e-12);
                let z = (psi.psi1[(i, j)] - mean).abs() / se;
                worst_z = worst_z.max(z);
                assert!(
                    z <= 3.0,
                    "instance {instance}: Psi1[{i},{j}] z = {z:.2} ({} vs {mean} +- {se})",
                    psi.psi1[(i, j)]
                );
            }
        }
        for j in 0..m_u {
            for k2 in 0..m_u {
                let mean = p2_sum[(j, k2)] / s;
                let se = ((p2_sq[(j, k2)] / s - mean * mean).max(0.0) / s).sqrt().max(1e-12);
                let z = (psi.psi2[(j, k2)] - mean).abs() / se;
                worst_z = worst_z.max(z);
                assert!(
                    z <= 3.0,
                    "instance {instance}: Psi2[{j},{k2}] z = {z:.2} ({} vs {mean} +- {se})",
                    psi.psi2[(j, k2)]
                );
            }
        }
    }
    println!("criterion 3: PASS (10 instances, worst |z| = {worst_z:.2} <= 3)");
}

#[test]
fn criterion_4_gradient_suite() {
    let mut worst: f64 = 0.0;
    for instance in 0..5 {
        let (model, x, y) = random_small_model(4000 + instance, 8);
        let objective = TdgpObjective {
            template: &model,
            x: &x,
            y: &y,
        };
        let params = model.pack();
        let eval = objective.eval(&params).unwrap();
        let h = 1e-4;
        for idx in 0..params.len() {
            let mut plus = params.clone();
            plus.values_mut()[idx] += h;
            let mut minus = params.clone();
            minus.values_mut()[idx] -= h;
            let fd = (objective.eval(&plus).unwrap().value
                - objective.eval(&minus).unwrap().value)
                / (2.0 * h);
            let g = eval.grad[idx];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            worst = worst.max(rel);
            assert!(
                rel <= 1e-4,
                "instance {instance}, {}: analytic {g}, fd {fd}, rel {rel}",
                params.name_of(idx)
            );
        }
    }
    println!("criterion 4: PASS (5 instances, worst rel error {worst:.2e} <= 1e-4)");
}

#[test]
fn criterion_5_bound_sanity() {
    let n = 8;
    let d = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(5001);
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.5..1.5f64));
    let y = DVector::from_fn(n, |i, _| (1.5 * x[(i, 0)]).sin() + 0.2 * x[(i, 1)]);
    let prior_mean_w = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -0.3, 0.9]);
    let images = &x * prior_mean_w.transpose();
    let sigma_f_sq = 1.2;
    let noise_sq = 0.05;

    let tiny: f64 = 1e-14;
    let m_v = 3;
    let z_hidden = DMatrix::from_fn(m_v, d, |j, k| -1.0 + j as f64 + 0.3 * k as f64);
    let lengthscales = DVector::from_element(d, 1.0);
    let r = {
        let mut r = DMatrix::identity(m_v, m_v);
        for i in 0..m_v {
            for j in 0..i {
                let mut acc = 0.0;
                for dd in 0..d {
                    let diff = z_hidden[(i, dd)] - z_hidden[(j, dd)];
                    acc += diff * diff;
                }
                r[(i, j)] = (-0.5 * acc).exp();
                r[(j, i)] = r[(i, j)];
            }
        }
        r
    };
    let r_l = robust_cholesky(&r).unwrap().l();
    let build = |z_out: DMatrix<f64>| TdgpModel {
        input_dim: d,
        latent_dim: 2,
        sigma_f_sq,
        noise_sq,
        sigma_w_sq: DVector::from_element(2, tiny),
        lengthscales: lengthscales.clone(),
        prior_mean_w: prior_mean_w.clone(),
        z_out,
        z_hidden: z_hidden.clone(),
        q_mu: (0..2)
            .map(|q| DMatrix::from_fn(m_v, d, |_, dd| prior_mean_w[(q, dd)]))
            .collect(),
        q_sigma_chol: vec![&r_l * tiny.sqrt(); 2],
        bias_augmented: false,
    };

    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut d2 = 0.0;
            for q in 0..2 {
                let diff = images[(i, q)] - images[(j, q)];
                d2 += diff * diff;
            }
            k[(i, j)] = sigma_f_sq * (-0.5 * d2).exp();
        }
    }
    let mut c = k.clone();
    for i in 0..n {
        c[(i, i)] += noise_sq;
    }
    let chol = robust_cholesky(&c).unwrap();
    let exact = -0.5 * chol.inv_quad(&y)
        - 0.5 * chol.ln_det()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    let (elbo_full, _) = collapsed_elbo(&build(images.clone()), &x, &y).unwrap();
    let dev = (elbo_full - exact).abs();
    let z_small = DMatrix::from_fn(3, 2, |i, j| images[(i, j)]);
    let (elbo_small, _) = collapsed_elbo(&build(z_small), &x, &y).unwrap();
    let strictly_below = elbo_small < exact - 1e-6;
    let ok = dev <= 1e-6 && strictly_below;
    println!(
        "criterion 5: {} (|elbo - exact| = {dev:.2e} <= 1e-6; m_u < n bound {elbo_small:.6} < exact {exact:.6})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(dev <= 1e-6, "saturated bound off by {dev}");
    assert!(strictly_below, "small-m bound not strictly below");
}

#[test]
fn criterion_6_augmented_reduction_exactness() {
    // (a) the explicit augmented layer with a zero W block is pure
    // composition; (b) the augmented sampler with zero W variance reproduces
    // the compositional hierarchy on 100 random points, layer by layer.
    let mut rng = ChaCha8Rng::seed_from_u64(6001);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rng.random_range(1..4usize);
        let d = rng.random_range(1..4usize);
        let w = DMatrix::zeros(q, d);
        let dv = DVector::from_fn(q, |_, _| rng.random_range(-2.0..2.0f64));
        let x = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0f64));
        let h = augmented_layer(&w, &dv, &x).unwrap();
        worst = worst.max((h - &dv).abs().max());
    }

    let grid = DMatrix::from_fn(100, 2, |_, _| rng.random_range(-2.0..2.0f64));
    let depth = 3;
    let width = 2;
    let mut aug = DepthConfig::uniform(ModelKind::TdgpAugmented, depth, width, MeanMode::Zero);
    for l in aug.layers.iter_mut() {
        l.w_variance = Some(0.0);
    }
    let cdgp = DepthConfig::uniform(ModelKind::Cdgp, depth, width, MeanMode::Zero);
    let a = sample_prior(&aug, &grid, 61).unwrap();
    let c = sample_prior(&cdgp, &grid, 61).unwrap();
    for l in 1..depth {
        for i in 0..grid.nrows() {
            for q in 0..width {
                worst = worst.max((a.layers[l][(i, q)] - c.layers[l][(i, q)]).abs());
            }
        }
    }
    worst = worst.max((&a.f - &c.f).abs().max());
    println!("criterion 6: PASS (max |deviation| = {worst:.2e} <= 1e-10)");
    assert!(worst <= 1e-10, "max deviation {worst}");
}

// Thresholds frozen from a 500-seed pilot pre-run of the same configurations
// (see `pilot_pathology_thresholds`, run with `--ignored`):
//   cdgp depth-5 flatness fraction: pilot 0.952           -> require >= 0.90
//   tdgp depth-5 flatness fraction: pilot 0.632           -> require <= 0.75
//   cdgp depth-5 mean |corr|:       pilot 0.945 +- 0.004  -> require >= 0.85
//   tdgp depth-5 mean |corr|:       pilot 0.630 +- 0.007  -> require <= 0.70
//   (depth-1 baseline for both kinds: 0.493 +- 0.000; cdgp grows with depth,
//   tdgp stays flat)
const CDGP_FLAT_FRACTION_MIN: f64 = 0.90;
const TDGP_FLAT_FRACTION_MAX: f64 = 0.75;
const CDGP_SATURATION_MIN: f64 = 0.85;
const TDGP_SATURATION_MAX: f64 = 0.70;

fn pathology_grid() -> DMatrix<f64> {
    DMatrix::from_fn(101, 1, |i, _| -2.0 + 4.0 * i as f64 / 100.0)
}

#[test]
fn criterion_7_pathology_contrast() {
    let grid = pathology_grid();
    let seeds: Vec<u64> = (0..200).collect();
    let cdgp = DepthConfig::uniform(ModelKind::Cdgp, 5, 1, MeanMode::Zero);
    let tdgp = DepthConfig::uniform(ModelKind::Tdgp, 5, 1, MeanMode::Zero);

    let flat_cdgp = flatness_fractions(&cdgp, &grid, &seeds).unwrap();
    let flat_tdgp = flatness_fractions(&tdgp, &grid, &seeds).unwrap();
    let sat_cdgp = saturation_stats(&cdgp, &grid, &seeds).unwrap();
    let sat_tdgp = saturation_stats(&tdgp, &grid, &seeds).unwrap();
    let cdgp_sat_5 = sat_cdgp[4].mean_abs_corr;
    let tdgp_sat_5 = sat_tdgp[4].mean_abs_corr;
    // saturation grows with depth for the zero-mean compositional prior
    let monotone = sat_cdgp.windows(2).all(|w| {
        w[1].mean_abs_corr >= w[0].mean_abs_corr - 3.0 * w[0].std_err.max(w[1].std_err)
    });
    let ok = flat_cdgp.fraction_collapsed >= CDGP_FLAT_FRACTION_MIN
        && flat_tdgp.fraction_collapsed <= TDGP_FLAT_FRACTION_MAX
        && cdgp_sat_5 >= CDGP_SATURATION_MIN
        && tdgp_sat_5 <= TDGP_SATURATION_MAX
        && cdgp_sat_5 > sat_cdgp[0].mean_abs_corr
        && monotone;
    println!(
        "criterion 7: {} (cdgp flat {:.3} >= {CDGP_FLAT_FRACTION_MIN}, tdgp flat {:.3} <= {TDGP_FLAT_FRACTION_MAX}, \
         cdgp |corr| {cdgp_sat_5:.3} >= {CDGP_SATURATION_MIN}, tdgp |corr| {tdgp_sat_5:.3} <= {TDGP_SATURATION_MAX})",
        if ok { "PASS" } else { "FAIL" },
        flat_cdgp.fraction_collapsed,
        flat_tdgp.fraction_collapsed,
    );
    assert!(flat_cdgp.fraction_collapsed >= CDGP_FLAT_FRACTION_MIN);
    assert!(flat_tdgp.fraction_collapsed <= TDGP_FLAT_FRACTION_MAX);
    assert!(cdgp_sat_5 >= CDGP_SATURATION_MIN);
    assert!(tdgp_sat_5 <= TDGP_SATURATION_MAX);
    assert!(cdgp_sat_5 > sat_cdgp[0].mean_abs_corr);
    assert!(monotone);
}

/// 500-seed pre-run used to pick the frozen thresholds above.
#[test]
#[ignore = "pilot calibration; run explicitly with --ignored"]
fn pilot_pathology_thresholds() {
    let grid = pathology_grid();
    let seeds: Vec<u64> = (0..500).collect();
    for kind in [ModelKind::Cdgp, ModelKind::Tdgp] {
        let cfg = DepthConfig::uniform(kind, 5, 1, MeanMode::Zero);
        let flat = flatness_fractions(&cfg, &grid, &seeds).unwrap();
        let sat = saturation_stats(&cfg, &grid, &seeds).unwrap();
        println!(
            "{kind:?}: flat fraction {:.3} (std shallow {:.3}, deep {:.3})",
            flat.fraction_collapsed, flat.mean_std_shallow, flat.mean_std_deep
        );
        for s in sat {
            println!(
                "  depth {}: mean |corr| {:.3} +- {:.3}",
                s.depth, s.mean_abs_corr, s.std_err
            );
        }
    }
}

#[test]
fn criterion_8_derivative_variance_identities() {
    let l = |x: f64| 0.9 + 0.35 * (1.3 * x).sin();
    let lp = |x: f64| 0.35 * 1.3 * (1.3 * x).cos();
    let mut rng = ChaCha8Rng::seed_from_u64(8001);
    let mut worst: f64 = 0.0;
    let fd = |kind: DerivativeKernelKind, x: f64, lf: &dyn Fn(f64) -> f64| {
        let h = 1e-4;
        let k = |a: f64, b: f64| kernel_1d(kind, a, b, lf).unwrap();
        (k(x + h, x + h) - k(x + h, x - h) - k(x - h, x + h) + k(x - h, x - h)) / (4.0 * h * h)
    };
    for kind in [
        DerivativeKernelKind::StationarySe,
        DerivativeKernelKind::LengthscaleMixture,
        DerivativeKernelKind::Tdgp,
    ] {
        for _ in 0..20 {
            let x = rng.random_range(-2.0..2.0f64);
            let (analytic, numeric) = if kind == DerivativeKernelKind::StationarySe {
                let lx = l(x);
                let frozen = move |_: f64| lx;
                let zero = |_: f64| 0.0;
                (
                    derivative_variance_1d(kind, x, &frozen, &zero).unwrap(),
                    fd(kind, x, &frozen),
                )
            } else {
                (
                    derivative_variance_1d(kind, x, &l, &lp).unwrap(),
                    fd(kind, x, &l),
                )
            };
            let rel = (analytic - numeric).abs() / analytic.abs().max(1e-12);
            worst = worst.max(rel);
            assert!(rel <= 1e-4, "{kind:?} at {x}: rel {rel}");
        }
    }
    println!("criterion 8: PASS (worst rel error {worst:.2e} <= 1e-4)");
}

#[test]
fn criterion_9_metric_axioms() {
    // deformation metric: no violations over all triples of 200 points
    let w = FnW {
        out_dim: 2,
        f: |x: &DVector<f64>| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    1.0 + 0.5 * x[0].sin(),
                    0.3 * x[1],
                    0.1 * (x[0] + x[1]).cos(),
                    0.8 + 0.2 * x[0].cos(),
                ],
            )
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let n = 200;
    let points: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0f64)))
        .collect();
    let images: Vec<DVector<f64>> = points.iter().map(|x| w.w(x) * x).collect();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..i {
            let d = (&images[i] - &images[j]).norm();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut violations = 0usize;
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in (i + 1)..n {
                if k != j && dist[i * n + k] > dist[i * n + j] + dist[j * n + k] + 1e-12 {
                    violations += 1;
                }
            }
        }
    }

    // lengthscale-mixture pseudo-metric: the search exhibits a violation for
    // a rapidly varying field
    let field = FnField(|x: &DVector<f64>| {
        DMatrix::from_element(1, 1, 0.01 + 100.0 * (-x[0] * x[0] / 0.02).exp())
    });
    let line: Vec<DVector<f64>> = (0..21)
        .map(|i| DVector::from_vec(vec![-1.0 + i as f64 * 0.1]))
        .collect();
    let found = find_lmx_triangle_violation(&field, &line).unwrap();
    let ok = violations == 0 && found.is_some();
    println!(
        "criterion 9: {} (deformation-metric violations {violations} = 0; \
         lengthscale-mixture violation found: {})",
        if ok { "PASS" } else { "FAIL" },
        found.is_some()
    );
    assert_eq!(violations, 0);
    let (i, j, k, lhs, rhs) = found.expect("violation must be found");
    assert!(lhs > rhs, "triple ({i},{j},{k})");
}
