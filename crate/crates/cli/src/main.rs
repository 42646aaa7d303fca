use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use antfdtd::bench::{display_millions, run_bench, TABLE2};
use antfdtd::config::RunConfig;
use antfdtd::dataset::{self, DatasetFile, GenerateRequest};
use antfdtd::ml::{self, Metrics, TrainedModel};
use antfdtd::pipeline::{prepare, simulate_antenna, Window};
use antfdtd::plot::{metrics_svg, s11_svg};
use antfdtd::sparams::{resonance_minimum, S11Curve};
use antfdtd::validation::{validate, ValidationOptions};
use antfdtd::{total_cells, Error, Precision, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "antfdtd", version, about = "FDTD antenna simulation, datasets and shape-parameter prediction")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Clone)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the dataset master seed and the network seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    precision: Option<Precision>,
    /// Record the whole 33.4 ns window instead of stopping early.
    #[arg(long, global = true)]
    full_window: bool,
    /// Validate and report sizes without running anything.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one antenna and write its S11.
    Simulate {
        /// Cell size (mm), all axes.
        #[arg(long)]
        cell: Option<f64>,
    },
    /// Simulate one antenna on several grids and overlay the curves.
    Sweep {
        /// Comma-separated cell sizes (mm).
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<f64>,
    },
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Fit models on a dataset's training split.
    Train {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelChoice::All)]
        model: ModelChoice,
    },
    /// Print metrics of a saved model on a dataset split.
    Eval {
        model: PathBuf,
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
        split: SplitChoice,
    },
    /// Overlay S11 CSV files as SVG.
    Plot {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, default_value = "S11")]
        title: String,
    },
    /// Time the update loop.
    Bench {
        /// Cell sizes as dx:dy:dz (mm); the published grid set when omitted.
        #[arg(long, value_delimiter = ',')]
        grids: Vec<String>,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Run the physics self-checks.
    Validate {
        /// Skip the 0.25 mm convergence run.
        #[arg(long)]
        quick: bool,
        /// Courant factor for the stability check.
        #[arg(long)]
        safety: Option<f64>,
    },
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Sample and simulate a dataset.
    Generate {
        #[arg(long)]
        count: Option<usize>,
        /// Output file (default: OUT/dataset.antd).
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Print a dataset header summary.
    Info { file: PathBuf },
    /// Write a dataset as CSV.
    Export {
        file: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelChoice {
    Linear,
    Ridge,
    Lasso,
    Mlp,
    Voting,
    All,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum SplitChoice {
    Train,
    Test,
    All,
}

fn load_config(g: &Global) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.dataset.master_seed = s;
        c.train.mlp.seed = s;
    }
    if let Some(p) = g.precision {
        c.solver.precision = p;
    }
    if g.full_window {
        c.solver.window = Window::Full;
    }
    if let Some(o) = &g.out {
        c.output.dir = o.clone();
    }
    c.validate()?;
    Ok(c)
}

fn out_dir(c: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&c.output.dir)?;
    Ok(c.output.dir.clone())
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Rough resident size of the solver state.
fn predicted_bytes(nodes: usize, precision: Precision) -> usize {
    let real = match precision {
        Precision::F32 => 4,
        Precision::F64 => 8,
    };
    nodes * (6 * real + 3 + 3)
}

fn cmd_simulate(c: &mut RunConfig, g: &Global, cell: Option<f64>) -> Result<()> {
    if let Some(d) = cell {
        c.solver.cell_mm = [d; 3];
    }
    let geom = c.antenna.build()?;
    let (cfg, feed, snap) = prepare(&geom, &c.solver)?;
    cfg.validate()?;
    if g.dry_run {
        let grid = cfg.grid;
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "cells": grid.cells(),
                "total_cells": total_cells(&grid),
                "dt_s": cfg.dt,
                "max_steps": cfg.steps,
                "predicted_memory_bytes": predicted_bytes(grid.node_count(), c.solver.precision),
                "snap_max_error_mm": snap.max_error_mm(),
                "feed": { "node": feed.node, "axis": format!("{:?}", feed.axis) },
            }))?
        );
        return Ok(());
    }
    let dir = out_dir(c)?;
    let out = simulate_antenna(&c.antenna, &c.solver, g.threads)?;
    out.curve.write_csv(&dir.join("s11.csv"))?;
    let label = format!("{} {} mm", c.antenna.family, c.solver.cell_mm[0]);
    fs::write(dir.join("s11.svg"), s11_svg(&label, &[(label.clone(), &out.curve)]))?;
    let (f, db) = resonance_minimum(&out.curve, (0.0, 6e9))?;
    write_json(
        &dir.join("meta.json"),
        &json!({
            "config": c,
            "cells": out.grid.cells(),
            "total_cells": total_cells(&out.grid),
            "dt_s": out.dt,
            "steps": out.steps,
            "feed": { "node": out.feed.node, "axis": format!("{:?}", out.feed.axis) },
            "snap": out.snap,
            "resonance_hz": f,
            "resonance_db": db,
        }),
    )?;
    eprintln!("deepest minimum {:.3} GHz at {:.2} dB after {} steps", f / 1e9, db, out.steps);
    Ok(())
}

fn cmd_sweep(c: &RunConfig, g: &Global, grids: &[f64]) -> Result<()> {
    if grids.len() < 2 {
        return Err(Error::Config("a sweep needs at least two grids".into()));
    }
    if g.dry_run {
        for &d in grids {
            let s = c.solver.with_cell(d);
            let (cfg, _, _) = prepare(&c.antenna.build()?, &s)?;
            println!("{d} mm: {} cells", total_cells(&cfg.grid));
        }
        return Ok(());
    }
    let dir = out_dir(c)?;
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for &d in grids {
        let s = c.solver.with_cell(d);
        match simulate_antenna(&c.antenna, &s, g.threads) {
            Ok(out) => {
                out.curve.write_csv(&dir.join(format!("s11_{d}mm.csv")))?;
                let (f, db) = resonance_minimum(&out.curve, (0.0, 6e9))?;
                summary.push(
                    json!({ "cell_mm": d, "ok": true, "resonance_hz": f, "resonance_db": db, "steps": out.steps }),
                );
                curves.push((format!("{d} mm"), out.curve));
            }
            Err(e) => {
                eprintln!("grid {d} mm failed: {e}");
                summary.push(json!({ "cell_mm": d, "ok": false, "error": e.to_string() }));
            }
        }
    }
    let refs: Vec<(String, &S11Curve)> = curves.iter().map(|(l, c)| (l.clone(), c)).collect();
    fs::write(dir.join("sweep.svg"), s11_svg(&format!("{} grid sweep", c.antenna.family), &refs))?;
    write_json(&dir.join("sweep.json"), &json!({ "config": c, "grids": summary }))?;
    if curves.is_empty() {
        return Err(Error::Config("every grid of the sweep failed".into()));
    }
    Ok(())
}

fn cmd_dataset(c: &RunConfig, g: &Global, cmd: &DatasetCmd) -> Result<()> {
    match cmd {
        DatasetCmd::Generate { count, file } => {
            let mut req = GenerateRequest::new(
                c.antenna.family,
                count.unwrap_or(c.dataset.count),
                c.solver,
                c.dataset.master_seed,
            );
            req.template = c.antenna.clone();
            req.ranges = c.ranges()?;
            let header = req.header()?;
            if g.dry_run {
                println!("{}", serde_json::to_string_pretty(&header)?);
                return Ok(());
            }
            let path = match file {
                Some(f) => f.clone(),
                None => out_dir(c)?.join("dataset.antd"),
            };
            let workers = g.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |v| v.get()));
            let total = req.count;
            let report = dataset::generate(&req, workers, &|i| eprintln!("record {} of {total} done", i + 1))?;
            dataset::write(&path, &report.header, &report.records)?;
            eprintln!(
                "{} records written to {}, {} failed",
                report.header.count,
                path.display(),
                report.header.failed.len()
            );
            Ok(())
        }
        DatasetCmd::Info { file } => {
            let d = DatasetFile::open(file)?;
            let h = &d.header;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "family": h.family,
                    "param_names": h.param_names,
                    "count": h.count,
                    "requested": h.requested,
                    "failed": h.failed,
                    "rejections": h.total_rejections(),
                    "cells": h.cells,
                    "cell_mm": h.solver.cell_mm,
                    "master_seed": h.master_seed,
                    "stride": h.stride,
                }))?
            );
            Ok(())
        }
        DatasetCmd::Export { file, csv } => DatasetFile::open(file)?.export_csv(csv),
    }
}

struct Split {
    x: ml::Matrix,
    y: ml::Matrix,
    train: Vec<usize>,
    test: Vec<usize>,
    names: Vec<String>,
}

impl Split {
    fn rows(&self, idx: &[usize]) -> (ml::Matrix, ml::Matrix) {
        (ml::select_rows(&self.x, idx), ml::select_rows(&self.y, idx))
    }
}

fn load_split(c: &RunConfig, path: &Path) -> Result<Split> {
    let d = DatasetFile::open(path)?;
    let (xs, ys) = d.matrices();
    let x = ml::to_matrix(&xs)?;
    let y = ml::to_matrix(&ys)?;
    let n = x.nrows();
    let n_train = c.train.n_train.unwrap_or_else(|| ml::default_train_count(n));
    let (train, test) = ml::split(n, n_train, c.train.split_seed)?;
    Ok(Split { x, y, train, test, names: d.header.param_names.clone() })
}

fn cmd_train(c: &RunConfig, g: &Global, path: &Path, choice: ModelChoice) -> Result<()> {
    let s = load_split(c, path)?;
    if g.dry_run {
        println!("train {} rows, test {} rows, {} features", s.train.len(), s.test.len(), s.x.ncols());
        return Ok(());
    }
    let (x_train, y_train) = s.rows(&s.train);
    let (x_test, y_test) = s.rows(&s.test);
    let dir = out_dir(c)?;
    let t = &c.train;
    let want = |m: ModelChoice| choice == m || choice == ModelChoice::All;
    let need_members = want(ModelChoice::Voting);
    let mut models: Vec<TrainedModel> = Vec::new();
    let linear =
        if want(ModelChoice::Linear) || need_members { Some(ml::fit_linear(&x_train, &y_train)?) } else { None };
    let ridge = if want(ModelChoice::Ridge) || need_members {
        Some(ml::fit_ridge(&x_train, &y_train, t.ridge_alpha)?)
    } else {
        None
    };
    let mlp = if want(ModelChoice::Mlp) || need_members {
        let (m, trace) = ml::fit_mlp(&x_train, &y_train, &t.mlp)?;
        eprintln!("mlp final training loss {:.4}", trace.last().copied().unwrap_or(f64::NAN));
        Some(m)
    } else {
        None
    };
    if want(ModelChoice::Linear) {
        models.push(linear.clone().unwrap());
    }
    if want(ModelChoice::Ridge) {
        models.push(ridge.clone().unwrap());
    }
    if want(ModelChoice::Lasso) {
        let m = ml::fit_lasso(&x_train, &y_train, t.lasso_alpha, t.lasso_tol, t.lasso_max_iter)?;
        if let ml::ModelKind::Lasso { converged: false, iterations, .. } = m.kind {
            eprintln!("warning: lasso stopped after {iterations} sweeps without converging");
        }
        models.push(m);
    }
    if want(ModelChoice::Mlp) {
        models.push(mlp.clone().unwrap());
    }
    if need_members {
        models.push(TrainedModel::voting(vec![linear.unwrap(), ridge.unwrap(), mlp.unwrap()])?);
    }
    let mut all = Vec::new();
    for m in models {
        let m = m.with_targets(&s.names);
        m.save(&dir.join(format!("{}.antm", m.kind.name())))?;
        all.push(ml::evaluate(&m, &x_test, &y_test)?);
    }
    write_json(&dir.join("metrics.json"), &serde_json::to_value(&all)?)?;
    fs::write(dir.join("metrics.svg"), metrics_svg("Shape-parameter prediction error (test split)", &all))?;
    println!("{}", serde_json::to_string_pretty(&all)?);
    Ok(())
}

fn cmd_eval(c: &RunConfig, model: &Path, path: &Path, split: SplitChoice) -> Result<()> {
    let m = TrainedModel::load(model)?;
    let s = load_split(c, path)?;
    let metrics: Metrics = match split {
        SplitChoice::Train => {
            let (x, y) = s.rows(&s.train);
            ml::evaluate(&m, &x, &y)?
        }
        SplitChoice::Test => {
            let (x, y) = s.rows(&s.test);
            ml::evaluate(&m, &x, &y)?
        }
        SplitChoice::All => ml::evaluate(&m, &s.x, &s.y)?,
    };
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    Ok(())
}

fn read_s11_csv(path: &Path) -> Result<S11Curve> {
    let text = fs::read_to_string(path)?;
    let mut db = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let v = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("{}:{}: expected freq_hz,s11_db", path.display(), n + 1)))?;
        db.push(v);
    }
    S11Curve::from_db(db)
}

fn cmd_plot(c: &RunConfig, csv: &[PathBuf], title: &str) -> Result<()> {
    let curves = csv.iter().map(|p| read_s11_csv(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<(String, &S11Curve)> = csv
        .iter()
        .zip(&curves)
        .map(|(p, c)| (p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()), c))
        .collect();
    let path = out_dir(c)?.join("plot.svg");
    fs::write(&path, s11_svg(title, &refs))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn parse_grid(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("grid '{s}' is not dx:dy:dz")))?;
    match v.as_slice() {
        [d] => Ok([*d; 3]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(Error::Config(format!("grid '{s}' is not dx:dy:dz"))),
    }
}

fn cmd_bench(c: &RunConfig, g: &Global, grids: &[String], steps: usize) -> Result<()> {
    let list: Vec<([f64; 3], Option<&str>)> = if grids.is_empty() {
        TABLE2.iter().map(|(mm, shown, _)| (*mm, Some(*shown))).collect()
    } else {
        grids.iter().map(|s| parse_grid(s).map(|g| (g, None))).collect::<Result<_>>()?
    };
    let dir = out_dir(c)?;
    let mut reports = Vec::new();
    println!("{:<18} {:>10} {:>8} {:>12} {:>16}", "grid (mm)", "Mcells", "threads", "iter/s", "cell-updates/s");
    for (mm, shown) in list {
        let r = run_bench(mm, steps, g.threads, c.solver.precision)?;
        let cells =
            shown.map_or_else(|| format!("{:.4}", r.total_cells as f64 / 1e6), |s| display_millions(r.total_cells, s));
        println!(
            "{:<18} {:>10} {:>8} {:>12.1} {:>16.3e}",
            format!("{}:{}:{}", mm[0], mm[1], mm[2]),
            cells,
            r.threads,
            r.iterations_per_s,
            r.cell_updates_per_s
        );
        reports.push(r);
    }
    write_json(&dir.join("bench.json"), &serde_json::to_value(&reports)?)?;
    Ok(())
}

fn cmd_validate(c: &RunConfig, g: &Global, quick: bool, safety: Option<f64>) -> Result<bool> {
    let mut opts =
        ValidationOptions { threads: g.threads, precision: c.solver.precision, fine: !quick, ..Default::default() };
    if let Some(s) = safety {
        opts.safety = s;
    }
    let r = validate(&opts)?;
    for ch in &r.checks {
        println!(
            "{} {:<26} measured {:.6e} expected {}",
            if ch.passed { "PASS" } else { "FAIL" },
            ch.name,
            ch.measured,
            ch.expected
        );
    }
    println!("threads {} precision {:?} cores {}", r.threads, r.precision, r.available_cores);
    Ok(r.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let g = &cli.global;
    let mut c = load_config(g)?;
    match &cli.cmd {
        Command::Simulate { cell } => cmd_simulate(&mut c, g, *cell)?,
        Command::Sweep { grids } => cmd_sweep(&c, g, grids)?,
        Command::Dataset(d) => cmd_dataset(&c, g, d)?,
        Command::Train { dataset, model } => cmd_train(&c, g, dataset, *model)?,
        Command::Eval { model, dataset, split } => cmd_eval(&c, model, dataset, *split)?,
        Command::Plot { csv, title } => cmd_plot(&c, csv, title)?,
        Command::Bench { grids, steps } => cmd_bench(&c, g, grids, *steps)?,
        Command::Validate { quick, safety } => return cmd_validate(&c, g, *quick, *safety),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
