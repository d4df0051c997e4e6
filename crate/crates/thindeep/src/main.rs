use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nalgebra::{DMatrix, DVector};

use thindeep::checkpoint::{Checkpoint, ModelState, CHECKPOINT_VERSION};
use thindeep::data::{gen_synthetic, kfold, load_csv, normalize, write_dataset_csv, Dataset};
use thindeep::deep::{sample_prior, saturation_stats, DepthConfig, MeanMode, ModelKind};
use thindeep::gp::derive_stream;
use thindeep::metrics::{mrae, nlpd, EvalReport, FoldMetrics, MraeMode};
use thindeep::tdgp::sgp::{SgpModel, SgpObjective, SgpPosterior};
use thindeep::tdgp::{
    export_field, export_latent, relevance_profile, TdgpInit, TdgpModel, TdgpObjective,
    TdgpPosterior,
};
use thindeep::train::{fit, EpochRecord, Phase, Schedule};

#[derive(Parser, Debug)]
#[command(name = "thindeep", version, about = "Nonstationary GP regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic funnel dataset (full/train/validation CSVs).
    Gen(GenArgs),
    /// Fit a model on a training CSV and write a checkpoint plus loss trace.
    Fit(FitArgs),
    /// Evaluate a checkpoint on a test CSV.
    Eval(EvalArgs),
    /// k-fold cross-validation: per-fold fits and an aggregate report.
    Cv(CvArgs),
    /// Draw prior samples of a deep hierarchy on a 1D grid.
    SamplePrior(SamplePriorArgs),
    /// Export latent images, lengthscale-field eigenvalues, and relevances.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct GenArgs {
    /// Number of rows.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum ModelArg {
    Tdgp,
    SgpShallow,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct ModelOpts {
    #[arg(long, value_enum, default_value_t = ModelArg::Tdgp)]
    model: ModelArg,
    /// Latent dimension Q; defaults to the input dimension.
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Output-layer inducing points.
    #[arg(long, default_value_t = 50)]
    inducing_out: usize,
    /// Hidden-layer inducing points.
    #[arg(long, default_value_t = 25)]
    inducing_hidden: usize,
    /// Append a constant bias coordinate to the inputs (affine layers).
    #[arg(long, default_value_t = false)]
    augment_bias: bool,
    #[arg(long, default_value_t = 500)]
    epochs_phase1: usize,
    #[arg(long, default_value_t = 1500)]
    epochs_phase2: usize,
    #[arg(long, default_value_t = 5000)]
    epochs_phase3: usize,
    #[arg(long, default_value_t = 0.1)]
    lr_phase1: f64,
    #[arg(long, default_value_t = 0.01)]
    lr_phase2: f64,
    #[arg(long, default_value_t = 0.001)]
    lr_phase3: f64,
}

impl ModelOpts {
    fn schedule(&self) -> Result<Schedule> {
        let noise = vec!["noise_sq".to_string()];
        Ok(Schedule::new(vec![
            Phase {
                epochs: self.epochs_phase1,
                step_size: self.lr_phase1,
                frozen: noise.clone(),
            },
            Phase {
                epochs: self.epochs_phase2,
                step_size: self.lr_phase2,
                frozen: noise,
            },
            Phase {
                epochs: self.epochs_phase3,
                step_size: self.lr_phase3,
                frozen: vec![],
            },
        ])?)
    }
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct FitArgs {
    /// Training CSV (all rows are used for fitting).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target_col: String,
    #[command(flatten)]
    model_opts: ModelOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct EvalArgs {
    /// Test CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target_col: String,
    /// Checkpoint produced by `fit`.
    #[arg(long)]
    model_file: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "y")]
    target_col: String,
    #[command(flatten)]
    model_opts: ModelOpts,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Parallel fold workers.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum KindArg {
    Cdgp,
    Tdgp,
    TdgpAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize)]
enum MeanArg {
    Zero,
    LinearIdentity,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct SamplePriorArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Tdgp)]
    kind: KindArg,
    #[arg(long, default_value_t = 5)]
    depth: usize,
    #[arg(long, default_value_t = 1)]
    width: usize,
    #[arg(long, value_enum, default_value_t = MeanArg::Zero)]
    mean: MeanArg,
    /// 1D evaluation grid as `min:max:count`.
    #[arg(long, default_value = "-2:2:101", allow_hyphen_values = true)]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// With 30 or more, also writes per-depth saturation statistics.
    #[arg(long, default_value_t = 1)]
    num_seeds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, serde::Serialize)]
struct ExportArgs {
    #[arg(long)]
    model_file: PathBuf,
    /// Per-axis grid as `min:max:count`, meshed over the input dimensions
    /// (normalized coordinates).
    #[arg(long, default_value = "-2:2:30", allow_hyphen_values = true)]
    grid: String,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("THINDEEP_LOG")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Cv(a) => cmd_cv(&a),
        Command::SamplePrior(a) => cmd_sample_prior(&a),
        Command::Export(a) => cmd_export(&a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn write_config_snapshot<T: serde::Serialize>(out: &Path, command: &str, args: &T) -> Result<()> {
    let snapshot = serde_json::json!({ "command": command, "args": args });
    std::fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&snapshot)?,
    )?;
    Ok(())
}

fn ensure_out(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating output directory {}", path.display()))
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "gen", args)?;
    let ds = gen_synthetic(args.n, args.seed)?;
    write_dataset_csv(&ds, &args.out.join("dataset.csv"))?;
    let train = ds.select(&ds.fold_indices(0));
    let val = ds.select(&ds.fold_indices(1));
    write_dataset_csv(&train, &args.out.join("train.csv"))?;
    write_dataset_csv(&val, &args.out.join("val.csv"))?;
    info!(
        "wrote {} rows ({} train / {} validation) to {}",
        ds.n(),
        train.n(),
        val.n(),
        args.out.display()
    );
    Ok(())
}

fn trace_csv(trace: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,phase,step_size,elbo,blue_box,kl_hidden,noise_sq,sigma_f_sq\n");
    for r in trace {
        let term = |name: &str| -> f64 {
            r.terms
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, v)| *v)
                .unwrap_or(f64::NAN)
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.epoch,
            r.phase,
            r.step_size,
            r.value,
            term("blue_box"),
            term("kl_hidden"),
            term("noise_sq"),
            term("sigma_f_sq"),
        ));
    }
    out
}

struct TrainedModel {
    state: ModelState,
    trace: Vec<EpochRecord>,
    aborted: Option<String>,
}

fn train_on(ds_norm: &Dataset, opts: &ModelOpts, seed: u64) -> Result<TrainedModel> {
    let x = &ds_norm.x;
    let y = &ds_norm.y;
    let schedule = opts.schedule()?;
    match opts.model {
        ModelArg::Tdgp => {
            let init = TdgpInit {
                latent_dim: opts.latent_dim.unwrap_or(ds_norm.dim()),
                num_inducing_out: opts.inducing_out,
                num_inducing_hidden: opts.inducing_hidden,
                bias_augmented: opts.augment_bias,
                seed,
            };
            let template = TdgpModel::init(x, &init)?;
            let objective = TdgpObjective { template: &template, x, y };
            let outcome = fit(&objective, template.pack(), &schedule)?;
            let model = template.unpack(outcome.params.values());
            Ok(TrainedModel {
                state: ModelState::Tdgp { model },
                trace: outcome.trace,
                aborted: outcome.aborted.map(|a| format!("{a:?}")),
            })
        }
        ModelArg::SgpShallow => {
            let template = SgpModel::init(x, opts.inducing_out, seed)?;
            let objective = SgpObjective { template: &template, x, y };
            let outcome = fit(&objective, template.pack(), &schedule)?;
            let model = template.unpack(outcome.params.values());
            Ok(TrainedModel {
                state: ModelState::Sgp { model },
                trace: outcome.trace,
                aborted: outcome.aborted.map(|a| format!("{a:?}")),
            })
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "fit", args)?;
    let ds = load_csv(&args.data, &args.target_col)?;
    let ds_norm = normalize(&ds, &vec![true; ds.n()])?;
    let trained = train_on(&ds_norm, &args.model_opts, args.seed)?;
    std::fs::write(args.out.join("trace.csv"), trace_csv(&trained.trace))?;
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        state: trained.state,
        normalization: ds_norm.norm.clone().expect("normalized dataset"),
        train_x: ds_norm.x.clone(),
        train_y: ds_norm.y.clone(),
        partial: trained.aborted.is_some(),
    };
    ck.save(&args.out.join("checkpoint.json"))?;
    if let Some(reason) = trained.aborted {
        bail!("training aborted ({reason}); last-good checkpoint written as partial");
    }
    info!("checkpoint written to {}", args.out.display());
    Ok(())
}

fn predict_with(
    state: &ModelState,
    train_x: &DMatrix<f64>,
    train_y: &DVector<f64>,
    x_star: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let (preds, clamps) = match state {
        ModelState::Tdgp { model } => {
            let posterior = TdgpPosterior::new(model.clone(), train_x, train_y)?;
            posterior.predict(x_star)?
        }
        ModelState::Sgp { model } => {
            let posterior = SgpPosterior::new(model.clone(), train_x, train_y)?;
            posterior.predict(x_star)?
        }
    };
    let mean = DVector::from_fn(preds.len(), |i, _| preds[i].mean);
    let var = DVector::from_fn(preds.len(), |i, _| preds[i].var_observed);
    Ok((mean, var, clamps))
}

#[allow(clippy::too_many_arguments)]
fn eval_fold(
    state: &ModelState,
    train_x: &DMatrix<f64>,
    train_y: &DVector<f64>,
    test_x: &DMatrix<f64>,
    test_y: &DVector<f64>,
    y_std: f64,
    fold: usize,
    wall_secs: f64,
) -> Result<FoldMetrics> {
    let (mean, var, clamps) = predict_with(state, train_x, train_y, test_x)?;
    let nlpd_v = nlpd(&mean, &var, test_y)?;
    let mrae_v = mrae(&mean, test_y, MraeMode::PerPoint)?;
    Ok(FoldMetrics {
        fold,
        n_test: test_y.len(),
        nlpd: nlpd_v,
        nlpd_denormalized: nlpd_v + y_std.ln(),
        mrae: mrae_v,
        variance_clamps: clamps,
        wall_secs,
    })
}

fn model_name(state: &ModelState) -> &'static str {
    match state {
        ModelState::Tdgp { .. } => "tdgp",
        ModelState::Sgp { .. } => "sgp-shallow",
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "eval", args)?;
    let ck = Checkpoint::load(&args.model_file)?;
    if ck.partial {
        bail!("checkpoint is partial (aborted fit); refusing to evaluate");
    }
    let ds = load_csv(&args.data, &args.target_col)?;
    let x_star = ck.normalization.transform_x(&ds.x);
    let y_star = ck.normalization.transform_y(&ds.y);
    let started = Instant::now();
    let metrics = eval_fold(
        &ck.state,
        &ck.train_x,
        &ck.train_y,
        &x_star,
        &y_star,
        ck.normalization.y_std,
        0,
        0.0,
    )?;
    let metrics = FoldMetrics {
        wall_secs: started.elapsed().as_secs_f64(),
        ..metrics
    };
    let dataset_name = args
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".to_string());
    let report = EvalReport::new(model_name(&ck.state), &dataset_name, vec![metrics]);
    std::fs::write(args.out.join("report.json"), report.to_json())?;
    std::fs::write(args.out.join("report.csv"), report.to_csv())?;
    println!(
        "nlpd {:.4} mrae {:.4}",
        report.aggregate.nlpd_mean, report.aggregate.mrae_mean
    );
    Ok(())
}

fn run_fold(
    ds: &Dataset,
    fold: usize,
    opts: &ModelOpts,
    seed: u64,
    out_dir: &Path,
) -> Result<FoldMetrics> {
    let started = Instant::now();
    let test_rows = ds.fold_indices(fold);
    let train_mask: Vec<bool> = (0..ds.n()).map(|i| ds.folds[i] != fold).collect();
    let ds_norm = normalize(ds, &train_mask)?;
    let train_rows: Vec<usize> = (0..ds.n()).filter(|&i| train_mask[i]).collect();
    let train = ds_norm.select(&train_rows);
    let test = ds_norm.select(&test_rows);
    let fold_seed = derive_stream(seed, 0xF0 + fold as u64);
    let trained = train_on(&train, opts, fold_seed)?;
    if let Some(reason) = &trained.aborted {
        bail!("fold {fold}: training aborted ({reason})");
    }
    let fold_dir = out_dir.join(format!("fold_{fold}"));
    ensure_out(&fold_dir)?;
    std::fs::write(fold_dir.join("trace.csv"), trace_csv(&trained.trace))?;
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        state: trained.state,
        normalization: ds_norm.norm.clone().expect("normalized"),
        train_x: train.x.clone(),
        train_y: train.y.clone(),
        partial: false,
    };
    ck.save(&fold_dir.join("checkpoint.json"))?;
    eval_fold(
        &ck.state,
        &train.x,
        &train.y,
        &test.x,
        &test.y,
        ck.normalization.y_std,
        fold,
        started.elapsed().as_secs_f64(),
    )
}

fn cmd_cv(args: &CvArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "cv", args)?;
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let mut ds = load_csv(&args.data, &args.target_col)?;
    ds.folds = kfold(ds.n(), args.folds, args.seed)?;
    let fold_ids: Vec<usize> = (0..args.folds).collect();
    let mut metrics: Vec<FoldMetrics> = Vec::with_capacity(args.folds);
    for chunk in fold_ids.chunks(args.jobs.max(1)) {
        let results: Vec<Result<FoldMetrics>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&fold| {
                    let ds_ref = &ds;
                    let out_dir = args.out.clone();
                    let opts = args.model_opts.clone();
                    scope.spawn(move || run_fold(ds_ref, fold, &opts, args.seed, &out_dir))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fold thread")).collect()
        });
        for r in results {
            metrics.push(r?);
        }
    }
    let dataset_name = args
        .data
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "dataset".to_string());
    let model = match args.model_opts.model {
        ModelArg::Tdgp => "tdgp",
        ModelArg::SgpShallow => "sgp-shallow",
    };
    let report = EvalReport::new(model, &dataset_name, metrics);
    std::fs::write(args.out.join("report.json"), report.to_json())?;
    std::fs::write(args.out.join("report.csv"), report.to_csv())?;
    println!(
        "cv nlpd {:.4} +- {:.4} mrae {:.4} +- {:.4}",
        report.aggregate.nlpd_mean,
        report.aggregate.nlpd_std,
        report.aggregate.mrae_mean,
        report.aggregate.mrae_std
    );
    Ok(())
}

fn parse_grid_spec(spec: &str) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("--grid must be min:max:count, got `{spec}`");
    }
    let min: f64 = parts[0].parse().context("grid min")?;
    let max: f64 = parts[1].parse().context("grid max")?;
    let count: usize = parts[2].parse().context("grid count")?;
    // NaN-catching domain check
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if count < 2 || !(max > min) {
        bail!("--grid needs max > min and count >= 2");
    }
    Ok((min, max, count))
}

fn matrix_csv(header: &[String], m: &DMatrix<f64>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn cmd_sample_prior(args: &SamplePriorArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "sample-prior", args)?;
    let (min, max, count) = parse_grid_spec(&args.grid)?;
    let grid = DMatrix::from_fn(count, 1, |i, _| {
        min + (max - min) * i as f64 / (count - 1) as f64
    });
    let kind = match args.kind {
        KindArg::Cdgp => ModelKind::Cdgp,
        KindArg::Tdgp => ModelKind::Tdgp,
        KindArg::TdgpAugmented => ModelKind::TdgpAugmented,
    };
    let mean = match args.mean {
        MeanArg::Zero => MeanMode::Zero,
        MeanArg::LinearIdentity => MeanMode::LinearIdentity,
    };
    let cfg = DepthConfig::uniform(kind, args.depth, args.width, mean);
    let sample = sample_prior(&cfg, &grid, args.seed)?;
    for (l, h) in sample.layers.iter().enumerate() {
        let header: Vec<String> = (0..h.ncols()).map(|q| format!("h{l}_{q}")).collect();
        std::fs::write(
            args.out.join(format!("layer_{l}.csv")),
            matrix_csv(&header, h),
        )?;
    }
    for (l, c) in sample.layer_covs.iter().enumerate() {
        let header: Vec<String> = (0..c.ncols()).map(|j| format!("c{j}")).collect();
        std::fs::write(
            args.out.join(format!("cov_{}.csv", l + 1)),
            matrix_csv(&header, c),
        )?;
    }
    let f_mat = DMatrix::from_fn(sample.f.len(), 2, |i, j| {
        if j == 0 {
            grid[(i, 0)]
        } else {
            sample.f[i]
        }
    });
    std::fs::write(
        args.out.join("sample.csv"),
        matrix_csv(&["x".to_string(), "f".to_string()], &f_mat),
    )?;
    if args.num_seeds >= 30 {
        let seeds: Vec<u64> = (0..args.num_seeds as u64)
            .map(|i| derive_stream(args.seed, i))
            .collect();
        let stats = saturation_stats(&cfg, &grid, &seeds)?;
        let mut csv = String::from("depth,mean_abs_corr,std_err\n");
        for s in stats {
            csv.push_str(&format!("{},{},{}\n", s.depth, s.mean_abs_corr, s.std_err));
        }
        std::fs::write(args.out.join("saturation.csv"), csv)?;
    }
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    ensure_out(&args.out)?;
    write_config_snapshot(&args.out, "export", args)?;
    let ck = Checkpoint::load(&args.model_file)?;
    let model = match &ck.state {
        ModelState::Tdgp { model } => model,
        ModelState::Sgp { .. } => {
            // The shallow baseline has no latent map or field; only
            // relevances are exported.
            let ModelState::Sgp { model } = &ck.state else { unreachable!() };
            let rel = model.relevance();
            let mut csv = String::from("dim,relevance\n");
            for (d, r) in rel.iter().enumerate() {
                csv.push_str(&format!("{d},{r}\n"));
            }
            std::fs::write(args.out.join("relevance.csv"), csv)?;
            return Ok(());
        }
    };
    let (min, max, count) = parse_grid_spec(&args.grid)?;
    let d = model.input_dim;
    let axis: Vec<f64> = (0..count)
        .map(|i| min + (max - min) * i as f64 / (count - 1) as f64)
        .collect();
    // mesh over input dims (row-major over the last axis fastest)
    let total = count.pow(d as u32);
    let grid = DMatrix::from_fn(total, d, |i, j| {
        let stride = count.pow((d - 1 - j) as u32);
        axis[(i / stride) % count]
    });
    let latent = export_latent(model, &grid)?;
    let field = export_field(model, &grid)?;
    let mut latent_header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    latent_header.extend((0..latent.ncols()).map(|q| format!("h{q}")));
    let mut latent_mat = DMatrix::zeros(total, d + latent.ncols());
    latent_mat.view_mut((0, 0), (total, d)).copy_from(&grid);
    latent_mat
        .view_mut((0, d), (total, latent.ncols()))
        .copy_from(&latent);
    std::fs::write(args.out.join("latent.csv"), matrix_csv(&latent_header, &latent_mat))?;

    let mut field_header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    field_header.extend((0..field.ncols()).map(|q| format!("eig{q}")));
    let mut field_mat = DMatrix::zeros(total, d + field.ncols());
    field_mat.view_mut((0, 0), (total, d)).copy_from(&grid);
    field_mat
        .view_mut((0, d), (total, field.ncols()))
        .copy_from(&field);
    std::fs::write(args.out.join("field.csv"), matrix_csv(&field_header, &field_mat))?;

    let rel = relevance_profile(model);
    let mut csv = String::from("row,relevance,kernel_variance,mean_row_meansq\n");
    for q in 0..rel.relevance.len() {
        csv.push_str(&format!(
            "{q},{},{},{}\n",
            rel.relevance[q], rel.kernel_variance[q], rel.mean_row_meansq[q]
        ));
    }
    std::fs::write(args.out.join("relevance.csv"), csv)?;
    Ok(())
}
