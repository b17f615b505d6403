use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use qracle_core::dataset::{build_dataset, load_dataset, save_dataset, split, DatasetConfig, InitPolicy, SplitManifest};
use qracle_core::eval::{create_run_dir, evaluate_scheme, report, Scheme, SchemeResult};
use qracle_core::gnn::{train, GnnConfig, GnnModel, Readout};
use qracle_core::models::Application;
use qracle_core::sim::VqeConfig;

use crate::settings::{usage, Settings};

#[derive(Debug, Parser)]
#[command(name = "qracle", version, about = "GNN-predicted VQE initialization: data, training, evaluation")]
pub struct Cli {
    /// Plain-text `key = value` file; keys mirror the long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for dataset generation and evaluation (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Global seed; falls back to the config file, then QRACLE_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample Hamiltonians, run the label VQE and write a dataset file.
    GenData {
        #[arg(long)]
        app: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// VQE steps per instance.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// `shared` (one draw for every instance) or `per-instance`.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        history_cap: Option<usize>,
    },
    /// Write a seeded 70/30 split manifest for a dataset.
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the GNN on the training split.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Output directory for the checkpoint, report and config echo.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        gnn_learning_rate: Option<f64>,
        #[arg(long)]
        gcn_hidden: Option<usize>,
        #[arg(long)]
        gat_hidden: Option<usize>,
        #[arg(long)]
        mlp_hidden: Option<usize>,
        #[arg(long)]
        heads: Option<usize>,
        /// `mean`, `sum` or `max`.
        #[arg(long)]
        readout: Option<String>,
        /// Continue from a checkpoint directory instead of fresh weights.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Print the predicted initial parameters for one dataset record.
    Init {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Run VQE on the test split from each scheme's initialization.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        /// Parent directory of the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of `random,gnn`.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Summarize several eval run directories side by side.
    Compare {
        /// Eval run directories.
        runs: Vec<PathBuf>,
    },
}

fn parse_app(s: &str) -> Result<Application> {
    s.parse().map_err(|_| {
        let names: Vec<_> = Application::ALL.iter().map(|a| a.name()).collect();
        usage(format!("unknown application {s:?}; expected one of {}", names.join(", ")))
    })
}

/// Accepts either a checkpoint directory or the output directory of `train`.
fn load_model(path: &Path) -> Result<GnnModel> {
    let nested = path.join("model");
    let dir = if nested.is_dir() { nested } else { path.to_owned() };
    GnnModel::load(&dir).with_context(|| format!("loading checkpoint {}", dir.display()))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn open_dataset(path: &Path) -> Result<Vec<qracle_core::dataset::VqeRecord>> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

struct Globals {
    settings: Settings,
    seed: u64,
    jobs: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let env_seed = match std::env::var("QRACLE_SEED") {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|e| usage(format!("QRACLE_SEED={v:?}: {e}")))?),
        Err(_) => None,
    };
    let seed = settings.pick(cli.seed, "seed")?.or(env_seed).unwrap_or(0);
    let jobs = settings.or(cli.jobs, "jobs", 0)?;
    let g = Globals { settings, seed, jobs };
    match cli.command {
        Command::GenData { app, count, out, steps, learning_rate, init, history_cap } => {
            gen_data(&g, app, count, out, steps, learning_rate, init, history_cap)
        }
        Command::Split { data, out } => cmd_split(&g, data, out),
        Command::Train {
            data,
            split,
            out,
            epochs,
            batch_size,
            gnn_learning_rate,
            gcn_hidden,
            gat_hidden,
            mlp_hidden,
            heads,
            readout,
            resume,
        } => {
            let s = &g.settings;
            let opts = TrainOpts {
                data: s.require(data, "data")?,
                split: s.require(split, "split")?,
                out: s.require(out, "out")?,
                epochs: s.pick(epochs, "epochs")?,
                batch_size: s.pick(batch_size, "batch-size")?,
                lr: s.pick(gnn_learning_rate, "gnn-learning-rate")?,
                gcn_hidden: s.pick(gcn_hidden, "gcn-hidden")?,
                gat_hidden: s.pick(gat_hidden, "gat-hidden")?,
                mlp_hidden: s.pick(mlp_hidden, "mlp-hidden")?,
                heads: s.pick(heads, "heads")?,
                readout: s.pick(readout, "readout")?,
                resume: s.pick(resume, "resume")?,
            };
            cmd_train(&g, opts)
        }
        Command::Init { model, data, index } => {
            let s = &g.settings;
            let model = load_model(&s.require::<PathBuf>(model, "model")?)?;
            let records = open_dataset(&s.require::<PathBuf>(data, "data")?)?;
            let index: usize = s.require(index, "index")?;
            let rec = records
                .get(index)
                .ok_or_else(|| usage(format!("record {index} out of range ({} records)", records.len())))?;
            println!("{}", serde_json::to_string(&model.predict_init(&rec.graph)?)?);
            Ok(())
        }
        Command::Eval { model, data, split, out, schemes, steps, learning_rate } => {
            cmd_eval(&g, model, data, split, out, schemes, steps, learning_rate)
        }
        Command::Compare { runs } => cmd_compare(&runs),
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_data(
    g: &Globals,
    app: Option<String>,
    count: Option<usize>,
    out: Option<PathBuf>,
    steps: Option<usize>,
    lr: Option<f64>,
    init: Option<String>,
    history_cap: Option<usize>,
) -> Result<()> {
    let s = &g.settings;
    let app = parse_app(&s.require::<String>(app, "app")?)?;
    let out: PathBuf = s.require(out, "out")?;
    let mut cfg = DatasetConfig::new(app, s.or(count, "count", app.default_count())?, g.seed);
    cfg.jobs = g.jobs;
    cfg.vqe.max_steps = s.or(steps, "steps", cfg.vqe.max_steps)?;
    cfg.vqe.learning_rate = s.or(lr, "learning-rate", cfg.vqe.learning_rate)?;
    cfg.history_cap = s.or(history_cap, "history-cap", cfg.history_cap)?;
    cfg.init = match s.pick::<String>(init, "init")?.as_deref() {
        None | Some("shared") => InitPolicy::Shared,
        Some("per-instance") => InitPolicy::PerInstance,
        Some(other) => return Err(usage(format!("unknown init policy {other:?}"))),
    };
    let start = Instant::now();
    let (records, stats) = build_dataset(&cfg)?;
    save_dataset(&records, &out)?;
    write_json(&sidecar(&out), &json!({ "command": "gen-data", "dataset": cfg, "stats": stats }))?;
    println!(
        "instances: {}  skipped: {}  wall time: {:.1}s  -> {}",
        records.len(),
        stats.skipped.len(),
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

fn cmd_split(g: &Globals, data: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let data: PathBuf = g.settings.require(data, "data")?;
    let out: PathBuf = g.settings.require(out, "out")?;
    let records = open_dataset(&data)?;
    let m = split(records.len(), g.seed)?;
    m.save(&out)?;
    println!("train: {}  test: {}  -> {}", m.train_indices.len(), m.test_indices.len(), out.display());
    Ok(())
}

struct TrainOpts {
    data: PathBuf,
    split: PathBuf,
    out: PathBuf,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    gcn_hidden: Option<usize>,
    gat_hidden: Option<usize>,
    mlp_hidden: Option<usize>,
    heads: Option<usize>,
    readout: Option<String>,
    resume: Option<PathBuf>,
}

fn cmd_train(g: &Globals, o: TrainOpts) -> Result<()> {
    let records = open_dataset(&o.data)?;
    let manifest = SplitManifest::load(&o.split).with_context(|| format!("loading split {}", o.split.display()))?;
    let (train_set, val_set) = manifest.select(&records)?;
    let app = records.first().map(|r| r.meta().application).context("dataset is empty")?;
    let mut model = match &o.resume {
        Some(dir) => load_model(dir)?,
        None => {
            let base = GnnConfig::for_application(app, g.seed);
            let readout = match o.readout.as_deref() {
                None | Some("mean") => Readout::Mean,
                Some("sum") => Readout::Sum,
                Some("max") => Readout::Max,
                Some(other) => return Err(usage(format!("unknown readout {other:?}"))),
            };
            GnnModel::new(GnnConfig {
                gcn_hidden: o.gcn_hidden.unwrap_or(base.gcn_hidden),
                gat_hidden: o.gat_hidden.unwrap_or(base.gat_hidden),
                mlp_hidden: o.mlp_hidden.unwrap_or(base.mlp_hidden),
                gat_heads: o.heads.unwrap_or(base.gat_heads),
                readout,
                ..base
            })?
        }
    };
    if model.config.application != app {
        bail!(qracle_core::Error::Compatibility(format!(
            "checkpoint is for {}, dataset is {app}",
            model.config.application
        )));
    }
    let c = &mut model.config;
    c.epochs = o.epochs.unwrap_or(c.epochs);
    c.batch_size = o.batch_size.unwrap_or(c.batch_size);
    c.lr = o.lr.unwrap_or(c.lr);
    let start = Instant::now();
    let report = train(&mut model, &train_set, &val_set)?;
    std::fs::create_dir_all(&o.out)?;
    model.save(o.out.join("model"))?;
    write_json(&o.out.join("report.json"), &serde_json::to_value(&report)?)?;
    write_json(
        &o.out.join("config.json"),
        &json!({
            "command": "train",
            "data": o.data,
            "split": o.split,
            "resume": o.resume,
            "seed": g.seed,
            "gnn": model.config,
        }),
    )?;
    println!(
        "epochs: {}  initial val mse: {:?}  best epoch: {}  best score: {:.6e}  wall time: {:.1}s  -> {}",
        report.epochs.len(),
        report.initial_val_mse,
        report.best_epoch,
        report.best_score,
        start.elapsed().as_secs_f64(),
        o.out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    g: &Globals,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    split_path: Option<PathBuf>,
    out: Option<PathBuf>,
    schemes: Option<String>,
    steps: Option<usize>,
    lr: Option<f64>,
) -> Result<()> {
    let s = &g.settings;
    let data: PathBuf = s.require(data, "data")?;
    let split_path: PathBuf = s.require(split_path, "split")?;
    let out: PathBuf = s.or(out, "out", PathBuf::from("runs"))?;
    let schemes: Vec<Scheme> = s
        .or(schemes, "schemes", "random,gnn".to_string())?
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| usage(format!("unknown scheme {x:?}"))))
        .collect::<Result<_>>()?;
    let model_path: Option<PathBuf> = s.pick(model, "model")?;
    let model = match (&model_path, schemes.contains(&Scheme::Gnn)) {
        (Some(p), _) => Some(load_model(p)?),
        (None, true) => return Err(usage("the gnn scheme needs --model")),
        (None, false) => None,
    };
    let records = open_dataset(&data)?;
    let manifest = SplitManifest::load(&split_path)?;
    manifest.validate(records.len())?;
    let test: Vec<_> = manifest.test_indices.iter().map(|&i| records[i].clone()).collect();
    let app = test.first().map(|r| r.meta().application).context("test split is empty")?;
    let mut vqe = VqeConfig { seed: g.seed, ..VqeConfig::for_application(app) };
    vqe.max_steps = s.or(steps, "steps", vqe.max_steps)?;
    vqe.learning_rate = s.or(lr, "learning-rate", vqe.learning_rate)?;

    let start = Instant::now();
    let results: Vec<SchemeResult> = schemes
        .iter()
        .map(|&sc| evaluate_scheme(sc, model.as_ref(), &test, &vqe, g.seed, g.jobs))
        .collect::<qracle_core::Result<_>>()?;
    let rep = report(&results)?;
    let dir = create_run_dir(&out, g.seed)?;
    rep.write_csv(dir.join("report.csv"))?;
    write_json(&dir.join("report.json"), &serde_json::to_value(&rep)?)?;
    write_json(&dir.join("results.json"), &serde_json::to_value(&results)?)?;
    write_json(
        &dir.join("config.json"),
        &json!({
            "command": "eval",
            "data": data,
            "split": split_path,
            "model": model_path,
            "schemes": schemes,
            "seed": g.seed,
            "vqe": vqe,
        }),
    )?;
    print!("{}", rep.to_table());
    println!("wall time: {:.1}s  -> {}", start.elapsed().as_secs_f64(), dir.display());
    Ok(())
}

fn cmd_compare(runs: &[PathBuf]) -> Result<()> {
    if runs.is_empty() {
        return Err(usage("compare needs at least one run directory"));
    }
    println!(
        "{:<40} {:>12} {:>12} {:>10} {:>10} {:>9} {:>9}",
        "run", "init(gnn)", "init(rand)", "conv(gnn)", "conv(rand)", "smape(g)", "smape(r)"
    );
    let mut wins = [0usize; 3];
    for run in runs {
        let path = run.join("results.json");
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let results: Vec<SchemeResult> = serde_json::from_str(&text)?;
        let find = |sc| results.iter().find(|r| r.scheme == sc);
        let (Some(gn), Some(rd)) = (find(Scheme::Gnn), find(Scheme::Random)) else {
            bail!("{} does not hold both schemes", run.display());
        };
        let checks = [
            gn.mean_initial_loss < rd.mean_initial_loss,
            gn.mean_converged_step <= 0.95 * rd.mean_converged_step,
            gn.smape <= rd.smape + 2.0,
        ];
        for (w, c) in wins.iter_mut().zip(checks) {
            *w += c as usize;
        }
        println!(
            "{:<40} {:>12.4} {:>12.4} {:>10.2} {:>10.2} {:>9.3} {:>9.3}",
            run.display(),
            gn.mean_initial_loss,
            rd.mean_initial_loss,
            gn.mean_converged_step,
            rd.mean_converged_step,
            gn.smape,
            rd.smape
        );
    }
    println!(
        "gnn lower initial loss: {}/{}  convergence <= 0.95x: {}/{}  smape within 2 points: {}/{}",
        wins[0],
        runs.len(),
        wins[1],
        runs.len(),
        wins[2],
        runs.len()
    );
    Ok(())
}
