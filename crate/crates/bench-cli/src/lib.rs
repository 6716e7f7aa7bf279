//! Command-line front end for learning, evaluating, sampling and
//! benchmarking probabilistic circuits.
//!
//! [`run`] parses arguments and dispatches; every command writes its
//! human-readable output to the given writer and files under `--out`.

pub mod datasets;
pub mod error;
pub mod experiments;
pub mod report;
pub mod toy;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softspn::circuit::{validate, Circuit};
use softspn::learner::{ClustererKind, Hyperparams, Method};

use crate::datasets::{default_data_dir, load_dataset};
use crate::error::{CliError, EXIT_OK, EXIT_USAGE};
use crate::experiments::{
    grid_cells, run_cell, run_grid, select_best, synthetic_quality, thread_pool, Cell, ALPHA_GRID, CLUSTERERS,
    DEFAULT_REPS, P_GRID, SYNTHETIC_REPS,
};
use crate::report::{append_rows, completed_cells, PlotData};

#[derive(Debug, Parser)]
#[command(name = "bench-cli", version, about = "Learn and benchmark probabilistic circuits")]
pub struct Cli {
    /// Directory holding `<name>.{train,valid,test}.data` files
    /// (default: $SOFTSPN_DATA_DIR or ./data).
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct HpArgs {
    #[arg(long, default_value = "softlearn", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value = "em", value_parser = parse_clusterer)]
    pub clusterer: ClustererKind,
    /// Independence test significance.
    #[arg(long = "p", default_value_t = 0.01)]
    pub p: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = softspn::clustering::DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 50.0)]
    pub min_instances: f64,
    #[arg(long, default_value_t = 100)]
    pub max_cluster_iters: usize,
    #[arg(long, default_value_t = softspn::independence::DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = softspn::estimators::EPSILON_W)]
    pub epsilon_w: f64,
}

impl HpArgs {
    pub fn hyperparams(&self, seed: u64) -> Hyperparams {
        Hyperparams {
            p_threshold: self.p,
            alpha: self.alpha,
            beta: self.beta,
            k: self.k,
            min_instances: self.min_instances,
            max_cluster_iters: self.max_cluster_iters,
            bins: self.bins,
            epsilon_w: self.epsilon_w,
            clusterer: self.clusterer,
            seed,
            ..Hyperparams::default()
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method {s:?} (learnspn | softlearn)"))
}

fn parse_clusterer(s: &str) -> Result<ClustererKind, String> {
    ClustererKind::parse(s).ok_or_else(|| format!("unknown clusterer {s:?} (em | kmeans)"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the train split, report valid/test LL, write the model.
    Learn {
        #[arg(long)]
        data: String,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        /// Append the report to this results table.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Full p × alpha × clusterer grid with repetitions.
    Grid {
        #[arg(long)]
        data: String,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: usize,
        /// Restrict the p values (comma separated).
        #[arg(long, value_delimiter = ',')]
        ps: Option<Vec<f64>>,
        /// Restrict the alpha values (comma separated).
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Restrict the clusterers (comma separated).
        #[arg(long, value_delimiter = ',', value_parser = parse_clusterer)]
        clusterers: Option<Vec<ClustererKind>>,
        /// Rerun cells already present in the results table.
        #[arg(long)]
        force: bool,
    },
    /// Mean valid/test LL of a saved model.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: String,
    },
    /// Draw rows from a saved model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Learn, sample a synthetic train set, relearn, compare test LL.
    SyntheticQuality {
        #[arg(long)]
        data: String,
        #[command(flatten)]
        hp: HpArgs,
        #[arg(long, default_value_t = SYNTHETIC_REPS)]
        reps: usize,
    },
    /// Two-Gaussian toy problem, optionally with the adversarial X = 0 root split.
    ToyExample {
        #[arg(long, default_value_t = 1000)]
        n_per_component: usize,
        #[arg(long)]
        adversarial: bool,
        /// Number of seeds, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Sharpness of the injected soft split (default: the k-means beta).
        #[arg(long)]
        split_beta: Option<f64>,
        #[command(flatten)]
        hp: HpArgs,
    },
    /// Check a model file; exit 3 when it is invalid.
    ValidateModel {
        #[arg(long)]
        model: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let data_dir = cli.data_dir.clone().unwrap_or_else(default_data_dir);
    let pool = thread_pool(cli.threads)?;
    match &cli.command {
        Command::Learn { data, hp, reps, results } => {
            if *reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let bundle = load_dataset(data, &data_dir, hp.alpha)?;
            let base = hp.hyperparams(cli.seed);
            base.check()?;
            let cell = Cell { method: hp.method, clusterer: hp.clusterer, p: hp.p, alpha: hp.alpha };
            let (report, model) = pool.install(|| -> Result<_, CliError> {
                let report = run_cell(&bundle, &cell, &base, cli.seed, *reps)?;
                let model = experiments::fit_once(&bundle, &cell, &base, cli.seed)?.circuit;
                Ok((report, model))
            })?;
            let model_path = cli.out.clone().unwrap_or_else(|| PathBuf::from("model.json"));
            ensure_parent(&model_path)?;
            model.save(&model_path)?;
            if let Some(path) = results {
                append_rows(path, std::slice::from_ref(&report))?;
            }
            write_out(out, &format!("{}\nmodel        {}", report.summary(), model_path.display()))
        }
        Command::Grid { data, hp, reps, ps, alphas, clusterers, force } => {
            if *reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let bundle = load_dataset(data, &data_dir, hp.alpha)?;
            let base = hp.hyperparams(cli.seed);
            let ps = ps.clone().unwrap_or_else(|| P_GRID.to_vec());
            let alphas = alphas.clone().unwrap_or_else(|| ALPHA_GRID.to_vec());
            let clusterers = clusterers.clone().unwrap_or_else(|| CLUSTERERS.to_vec());
            for &p in &ps {
                Hyperparams { p_threshold: p, ..base.clone() }.check()?;
            }
            for &a in &alphas {
                Hyperparams { alpha: a, ..base.clone() }.check()?;
            }
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
            let results_path = dir.join("results.tsv");
            let done = completed_cells(&results_path)?;
            let cells: Vec<Cell> = grid_cells(hp.method, &clusterers, &ps, &alphas)
                .into_iter()
                .filter(|c| {
                    *force
                        || !done.contains(&report::CellKey::new(
                            &bundle.name,
                            c.method.name(),
                            c.clusterer.name(),
                            c.p,
                            c.alpha,
                        ))
                })
                .collect();
            if cells.is_empty() {
                return write_out(out, &format!("all cells already recorded in {}", results_path.display()));
            }
            let reports = run_grid(&bundle, &cells, &base, cli.seed, *reps, &pool)?;
            append_rows(&results_path, &reports)?;
            let mut plot = PlotData::default();
            for r in &reports {
                let series = format!("{}/{}/p={}/alpha={}", r.method, r.clusterer, r.p, r.alpha);
                for (i, ll) in r.ll_test.iter().enumerate() {
                    plot.push(i as f64, *ll, series.clone());
                }
            }
            plot.write(&dir.join("plot.tsv"))?;
            let best = select_best(&reports).expect("at least one cell");
            write_out(
                out,
                &format!("{} cell(s) written to {}\nbest by validation LL:\n{}", reports.len(), results_path.display(), best.summary()),
            )
        }
        Command::Eval { model, data } => {
            let circuit = Circuit::load(model)?;
            let bundle = load_dataset(data, &data_dir, 1.0)?;
            if circuit.schema() != &bundle.schema {
                return Err(CliError::Data("model schema does not match the dataset".into()));
            }
            let valid = experiments::mean_ll(&circuit, &bundle.valid)?;
            let test = experiments::mean_ll(&circuit, &bundle.test)?;
            write_out(out, &format!("valid LL     {valid:.10}\ntest LL      {test:.10}"))
        }
        Command::Sample { model, n } => {
            let circuit = Circuit::load(model)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
            let rows = circuit.sample(&mut rng, *n);
            let text = format_rows(&rows, circuit.schema().all_categorical());
            match &cli.out {
                Some(path) => {
                    ensure_parent(path)?;
                    fs::write(path, text)?;
                    Ok(())
                }
                None => Ok(out.write_all(text.as_bytes())?),
            }
        }
        Command::SyntheticQuality { data, hp, reps } => {
            if *reps == 0 {
                return Err(CliError::Usage("--reps must be at least 1".into()));
            }
            let bundle = load_dataset(data, &data_dir, hp.alpha)?;
            let h = hp.hyperparams(cli.seed);
            h.check()?;
            let r = pool.install(|| synthetic_quality(&bundle, hp.method, &h, cli.seed, *reps))?;
            write_out(
                out,
                &format!(
                    "dataset      {}\nmethod       {}\noriginal LL  {:.6}\nsynthetic LL {:.6}\ndrop         {:.6}",
                    r.dataset,
                    r.method,
                    r.original_mean(),
                    r.synthetic_mean(),
                    r.drop()
                ),
            )
        }
        Command::ToyExample { n_per_component, adversarial, seeds, split_beta, hp } => {
            let base = hp.hyperparams(cli.seed);
            base.check()?;
            let text = toy_command(*n_per_component, *adversarial, cli.seed, *seeds, *split_beta, &base, cli.out.as_deref())?;
            write_out(out, &text)
        }
        Command::ValidateModel { model } => {
            let text = fs::read_to_string(model).map_err(|e| CliError::Data(format!("{}: {e}", model.display())))?;
            let circuit = Circuit::from_json(&text)?;
            let v = validate(&circuit);
            debug_assert!(v.is_empty());
            let st = circuit.stats();
            write_out(
                out,
                &format!("ok: {} nodes ({} sum, {} product, {} leaf), {} edges", st.nodes, st.sums, st.products, st.leaves, st.edges),
            )
        }
    }
}

/// Comma-separated rows: integers for all-categorical schemas, shortest
/// round-trip reals otherwise.
pub fn format_rows(rows: &[Vec<f64>], categorical: bool) -> String {
    let mut s = String::new();
    for r in rows {
        let fields: Vec<String> =
            r.iter().map(|&x| if categorical { format!("{}", x as i64) } else { format!("{x}") }).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn toy_command(
    n_per: usize,
    adversarial: bool,
    seed: u64,
    seeds: u64,
    split_beta: Option<f64>,
    base: &Hyperparams,
    out_dir: Option<&Path>,
) -> Result<String, CliError> {
    let mut text = String::new();
    let mut leaves = String::from("method\tseed\tx_mu\tx_sigma\ty_mu\ty_sigma\n");
    let mut plot = PlotData::default();
    for method in [Method::Hard, Method::Soft] {
        let mut mads = Vec::new();
        let mut ydev: f64 = 0.0;
        for s in seed..seed + seeds.max(1) {
            let (table, run) = toy::toy_run_with(method, n_per, adversarial, s, base, split_beta)?;
            if s == seed && method == Method::Hard {
                for (i, row) in table.rows().enumerate() {
                    plot.push(row[0], row[1], if i < n_per { "points_component1" } else { "points_component2" });
                }
            }
            for p in &run.pairs {
                let _ = writeln!(leaves, "{}\t{s}\t{}\t{}\t{}\t{}", method.name(), p.x_mu, p.x_sigma, p.y_mu, p.y_sigma);
                if s == seed && p.x_mu.is_finite() && p.y_mu.is_finite() {
                    plot.push(p.x_mu, p.y_mu, format!("{}_means", method.name()));
                }
            }
            mads.push(run.x_mad);
            ydev = ydev.max(run.y_max_dev);
        }
        let _ = writeln!(
            text,
            "{:<10} X-mean MAD from ±0.5: {:.4}   max Y-mean deviation from ±2: {:.4}",
            method.name(),
            report::mean(&mads),
            ydev
        );
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("leaves.tsv"), leaves)?;
        plot.write(&dir.join("plot.tsv"))?;
    }
    Ok(text)
}
