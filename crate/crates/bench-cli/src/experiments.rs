//! Benchmark protocols: single cells, the hyperparameter grid and the
//! learn-sample-relearn synthetic-quality pipeline.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use softspn::circuit::Circuit;
use softspn::data::{DatasetBundle, Table, WeightedDataset};
use softspn::learner::{learn, ClustererKind, Hyperparams, Method};

use crate::error::CliError;
use crate::report::{mean, RunReport};

pub const P_GRID: [f64; 3] = [0.01, 0.001, 0.0001];
pub const ALPHA_GRID: [f64; 3] = [0.1, 0.01, 1e-6];
pub const CLUSTERERS: [ClustererKind; 2] = [ClustererKind::Em, ClustererKind::KMeans];
pub const DEFAULT_REPS: usize = 9;
pub const SYNTHETIC_REPS: usize = 3;

/// Mean per-row log-likelihood in nats.
pub fn mean_ll(c: &Circuit, table: &Table) -> Result<f64, CliError> {
    Ok(c.mean_log_likelihood(table.rows())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub method: Method,
    pub clusterer: ClustererKind,
    pub p: f64,
    pub alpha: f64,
}

impl Cell {
    pub fn hyperparams(&self, base: &Hyperparams, seed: u64) -> Hyperparams {
        Hyperparams { p_threshold: self.p, alpha: self.alpha, clusterer: self.clusterer, seed, ..base.clone() }
    }
}

/// All grid cells for one method in a fixed order: clusterer, then p, then alpha.
pub fn grid_cells(method: Method, clusterers: &[ClustererKind], ps: &[f64], alphas: &[f64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &clusterer in clusterers {
        for &p in ps {
            for &alpha in alphas {
                cells.push(Cell { method, clusterer, p, alpha });
            }
        }
    }
    cells
}

/// One trained model with its evaluation.
pub struct Fitted {
    pub circuit: Circuit,
    pub ll_valid: f64,
    pub ll_test: f64,
}

pub fn fit_once(bundle: &DatasetBundle, cell: &Cell, base: &Hyperparams, seed: u64) -> Result<Fitted, CliError> {
    let hp = cell.hyperparams(base, seed);
    let learned = learn(cell.method, &bundle.train_dataset(), &hp)?;
    Ok(Fitted {
        ll_valid: mean_ll(&learned.circuit, &bundle.valid)?,
        ll_test: mean_ll(&learned.circuit, &bundle.test)?,
        circuit: learned.circuit,
    })
}

/// Runs `reps` repetitions with seeds `seed + r`. Size statistics are those
/// of the first repetition.
pub fn run_cell(bundle: &DatasetBundle, cell: &Cell, base: &Hyperparams, seed: u64, reps: usize) -> Result<RunReport, CliError> {
    assert!(reps >= 1);
    let start = Instant::now();
    let seeds: Vec<u64> = (0..reps as u64).map(|r| seed.wrapping_add(r)).collect();
    let fits: Vec<Fitted> =
        seeds.par_iter().map(|&s| fit_once(bundle, cell, base, s)).collect::<Result<Vec<_>, _>>()?;
    let stats = fits[0].circuit.stats();
    Ok(RunReport {
        dataset: bundle.name.clone(),
        method: cell.method.name().to_string(),
        clusterer: cell.clusterer.name().to_string(),
        p: cell.p,
        alpha: cell.alpha,
        ll_valid: fits.iter().map(|f| f.ll_valid).collect(),
        ll_test: fits.iter().map(|f| f.ll_test).collect(),
        nodes: stats.nodes,
        edges: stats.edges,
        params: stats.params,
        seconds: start.elapsed().as_secs_f64(),
        seeds,
    })
}

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| CliError::Internal(e.to_string()))
}

/// Runs every cell; results come back in cell order whatever the thread
/// count.
pub fn run_grid(
    bundle: &DatasetBundle,
    cells: &[Cell],
    base: &Hyperparams,
    seed: u64,
    reps: usize,
    pool: &rayon::ThreadPool,
) -> Result<Vec<RunReport>, CliError> {
    pool.install(|| cells.par_iter().map(|c| run_cell(bundle, c, base, seed, reps)).collect())
}

/// Highest validation LL; the earliest cell wins ties.
pub fn select_best(reports: &[RunReport]) -> Option<&RunReport> {
    reports.iter().fold(None, |best: Option<&RunReport>, r| match best {
        Some(b) if b.ll_valid_mean() >= r.ll_valid_mean() => Some(b),
        _ => Some(r),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticReport {
    pub dataset: String,
    pub method: String,
    pub original: Vec<f64>,
    pub synthetic: Vec<f64>,
}

impl SyntheticReport {
    pub fn original_mean(&self) -> f64 {
        mean(&self.original)
    }

    pub fn synthetic_mean(&self) -> f64 {
        mean(&self.synthetic)
    }

    /// Original minus synthetic-trained test LL.
    pub fn drop(&self) -> f64 {
        self.original_mean() - self.synthetic_mean()
    }
}

/// Learns on train, samples a synthetic train set of the same size, relearns
/// on it with the same hyperparameters and compares test LLs.
pub fn synthetic_quality(
    bundle: &DatasetBundle,
    method: Method,
    hp: &Hyperparams,
    seed: u64,
    reps: usize,
) -> Result<SyntheticReport, CliError> {
    let one = |r: u64| -> Result<(f64, f64), CliError> {
        let s = seed.wrapping_add(r);
        let hp = Hyperparams { seed: s, ..hp.clone() };
        let first = learn(method, &bundle.train_dataset(), &hp)?.circuit;
        let mut rng = ChaCha8Rng::seed_from_u64(s ^ 0x5eed_5eed_5eed_5eed);
        let rows = first.sample(&mut rng, bundle.train.n_rows());
        let synthetic = Table::from_rows(bundle.schema.clone(), &rows)?;
        let second = learn(method, &WeightedDataset::unit(Arc::new(synthetic)), &hp)?.circuit;
        Ok((mean_ll(&first, &bundle.test)?, mean_ll(&second, &bundle.test)?))
    };
    let results: Vec<(f64, f64)> = (0..reps as u64).into_par_iter().map(one).collect::<Result<_, _>>()?;
    Ok(SyntheticReport {
        dataset: bundle.name.clone(),
        method: method.name().to_string(),
        original: results.iter().map(|r| r.0).collect(),
        synthetic: results.iter().map(|r| r.1).collect(),
    })
}
