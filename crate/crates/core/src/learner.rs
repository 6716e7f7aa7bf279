//! Recursive structure learning.
//!
//! Both learners drive the same engine over a worklist of partial-tree slots.
//! An open slot holds a weighted dataset over a scope and is resolved, in
//! order, into a leaf (single variable), a product (the scope splits into
//! independent groups), a factorized cap (too little mass, or clustering
//! finds a single cluster) or a sum over clusters of instances. The hard
//! learner sends each row to exactly one cluster; the soft learner sends every
//! row to every cluster with its weight multiplied by the responsibility.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, NodeId};
use crate::clustering::{em_factorized, harden, soft_kmeans, Membership, DEFAULT_BETA};
use crate::data::{Table, VarKind, WeightedDataset};
use crate::estimators::{fit_gaussian, fit_multinomial, FitError, LeafDist, WeightedColumn, EPSILON_W, SIGMA_FLOOR};
use crate::independence::{partition_scope, DEFAULT_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClustererKind {
    Em,
    KMeans,
}

impl ClustererKind {
    pub fn name(self) -> &'static str {
        match self {
            ClustererKind::Em => "em",
            ClustererKind::KMeans => "kmeans",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "em" => Some(ClustererKind::Em),
            "kmeans" | "k-means" => Some(ClustererKind::KMeans),
            _ => None,
        }
    }
}

impl fmt::Display for ClustererKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// LearnSPN: hard instance splits.
    Hard,
    /// SoftLearn: soft instance splits.
    Soft,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Hard => "learnspn",
            Method::Soft => "softlearn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "learnspn" | "hard" => Some(Method::Hard),
            "softlearn" | "soft" => Some(Method::Soft),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Significance level of the pairwise independence tests.
    pub p_threshold: f64,
    /// Laplace pseudo-count for multinomial leaves and EM components.
    pub alpha: f64,
    /// Softmax sharpness of the k-means weight function.
    pub beta: f64,
    /// Clusters per sum node.
    pub k: usize,
    /// Below this effective sample size the slot is factorized.
    pub min_instances: f64,
    pub max_cluster_iters: usize,
    /// EM stops when the per-unit-weight objective improves by less.
    pub em_tol: f64,
    pub bins: usize,
    pub sigma_floor: f64,
    /// Soft splits drop rows whose weight falls below this.
    pub epsilon_w: f64,
    pub clusterer: ClustererKind,
    pub seed: u64,
    /// Record the alternative-circuit train log-likelihood after every step.
    pub trace_alternative: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            p_threshold: 0.01,
            alpha: 0.1,
            beta: DEFAULT_BETA,
            k: 2,
            min_instances: 50.0,
            max_cluster_iters: 100,
            em_tol: 1e-6,
            bins: DEFAULT_BINS,
            sigma_floor: SIGMA_FLOOR,
            epsilon_w: EPSILON_W,
            clusterer: ClustererKind::Em,
            seed: 0,
            trace_alternative: false,
        }
    }
}

impl Hyperparams {
    pub fn check(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::Hyperparams(m));
        if !(self.p_threshold > 0.0 && self.p_threshold < 1.0) {
            return bad(format!("p_threshold {} outside (0, 1)", self.p_threshold));
        }
        if !(self.alpha >= 0.0) {
            return bad(format!("alpha {} is negative", self.alpha));
        }
        if !(self.min_instances >= 2.0) {
            return bad(format!("min_instances {} < 2", self.min_instances));
        }
        if self.k < 2 {
            return bad(format!("k = {} < 2", self.k));
        }
        if self.bins < 2 {
            return bad(format!("bins = {} < 2", self.bins));
        }
        if !(self.beta >= 0.0) || !(self.sigma_floor > 0.0) || !(self.epsilon_w >= 0.0) {
            return bad("beta, sigma_floor and epsilon_w must be nonnegative (sigma_floor positive)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no rows to learn from")]
    Empty,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("hard learner needs unit row weights")]
    NonUnitWeights,
    #[error("scope variable {0} outside the schema")]
    Scope(usize),
    #[error("leaf fit failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Leaf,
    Product,
    Sum,
    Factorize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub kind: StepKind,
    /// Effective sample size of the slot.
    pub mass: f64,
    /// Index of the step that created this slot.
    pub parent: Option<usize>,
    /// Mean weighted train log-likelihood of the alternative circuit after
    /// this step: every open slot capped by a factorized product.
    pub alternative_ll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnTrace {
    /// Alternative-circuit likelihood before the first step (the fully
    /// factorized model over the root data).
    pub initial_alternative_ll: Option<f64>,
    pub steps: Vec<TraceStep>,
    pub clustering_calls: usize,
}

impl LearnTrace {
    pub fn count(&self, kind: StepKind) -> usize {
        self.steps.iter().filter(|s| s.kind == kind).count()
    }
}

#[derive(Debug, Clone)]
pub struct Learned {
    pub circuit: Circuit,
    pub trace: LearnTrace,
}

/// Replaces the clusterer's output at selected clustering calls. Calls are
/// numbered in the order the depth-first engine makes them; call 0 is the
/// first instance split (at the root unless the root is a product).
pub trait SplitOverride {
    fn membership(&mut self, call: usize, data: &WeightedDataset) -> Option<Membership>;
}

/// No overrides.
pub struct NoOverride;

impl SplitOverride for NoOverride {
    fn membership(&mut self, _call: usize, _data: &WeightedDataset) -> Option<Membership> {
        None
    }
}

/// Overrides only the first clustering call.
pub struct FirstSplit<F>(pub F);

impl<F: FnMut(&WeightedDataset) -> Membership> SplitOverride for FirstSplit<F> {
    fn membership(&mut self, call: usize, data: &WeightedDataset) -> Option<Membership> {
        (call == 0).then(|| (self.0)(data))
    }
}

/// Univariate leaf for `var` fitted on the weighted rows.
pub fn fit_leaf(data: &WeightedDataset, var: usize, hp: &Hyperparams) -> Result<LeafDist, LearnError> {
    let col = WeightedColumn::new(data.column(var), data.weights().to_vec())?;
    Ok(match data.schema().var(var).kind {
        VarKind::Categorical { arity } => LeafDist::Multinomial(fit_multinomial(&col, arity, hp.alpha)?),
        VarKind::Continuous => LeafDist::Gaussian(fit_gaussian(&col, hp.sigma_floor)?),
    })
}

/// One leaf per scope variable, in scope order.
pub fn fit_factorized(data: &WeightedDataset, hp: &Hyperparams) -> Result<Vec<(usize, LeafDist)>, LearnError> {
    data.scope().iter().map(|&v| Ok((v, fit_leaf(data, v, hp)?))).collect()
}

enum Slot {
    Open(WeightedDataset),
    Leaf(usize, LeafDist),
    Factorized(Vec<(usize, LeafDist)>),
    Product(Vec<usize>),
    Sum(Vec<usize>, Vec<f64>),
}

struct Engine<'a> {
    hp: &'a Hyperparams,
    method: Method,
    slots: Vec<Slot>,
    rng: ChaCha8Rng,
    calls: usize,
    root_data: WeightedDataset,
}

impl<'a> Engine<'a> {
    fn cluster(&mut self, data: &WeightedDataset, overrides: &mut dyn SplitOverride) -> Membership {
        let call = self.calls;
        self.calls += 1;
        let seed: u64 = self.rng.random();
        let m = match overrides.membership(call, data) {
            Some(m) => m,
            None => match self.hp.clusterer {
                ClustererKind::Em => {
                    em_factorized(data, self.hp.k, self.hp.max_cluster_iters, self.hp.em_tol, seed, self.hp.alpha).membership
                }
                ClustererKind::KMeans => soft_kmeans(data, self.hp.k, self.hp.beta, self.hp.max_cluster_iters, seed),
            },
        };
        match self.method {
            Method::Hard => harden(&m),
            Method::Soft => m,
        }
    }

    /// Splits rows among clusters. Returns (child data, child mass) for every
    /// cluster that keeps at least one row.
    fn split(&self, data: &WeightedDataset, m: &Membership) -> Vec<(WeightedDataset, f64)> {
        let eps = match self.method {
            Method::Hard => 0.0,
            Method::Soft => self.hp.epsilon_w,
        };
        let mut out = Vec::new();
        for i in 0..m.k() {
            let mut rows = Vec::new();
            let mut weights = Vec::new();
            let mut mass = 0.0;
            for (j, (&r, &w)) in data.rows().iter().zip(data.weights()).enumerate() {
                let v = m.row(j)[i] * w;
                mass += v;
                if v > 0.0 && v >= eps {
                    rows.push(r);
                    weights.push(v);
                }
            }
            if !rows.is_empty() && mass > 0.0 {
                out.push((data.with_rows(rows, weights), mass));
            }
        }
        out
    }

    fn step(&mut self, id: usize, overrides: &mut dyn SplitOverride) -> Result<(StepKind, Vec<usize>), LearnError> {
        let Slot::Open(data) = std::mem::replace(&mut self.slots[id], Slot::Product(Vec::new())) else {
            unreachable!("only open slots are stepped")
        };
        let hp = self.hp;
        if data.scope().len() == 1 {
            let var = data.scope()[0];
            self.slots[id] = Slot::Leaf(var, fit_leaf(&data, var, hp)?);
            return Ok((StepKind::Leaf, Vec::new()));
        }
        let groups = partition_scope(&data, hp.p_threshold, hp.bins);
        if groups.len() > 1 {
            let children: Vec<usize> = groups
                .into_iter()
                .map(|g| {
                    self.slots.push(Slot::Open(data.restrict_scope(g)));
                    self.slots.len() - 1
                })
                .collect();
            self.slots[id] = Slot::Product(children.clone());
            return Ok((StepKind::Product, children));
        }
        if data.total_weight() < hp.min_instances || data.len() < 2 {
            self.slots[id] = Slot::Factorized(fit_factorized(&data, hp)?);
            return Ok((StepKind::Factorize, Vec::new()));
        }
        let m = self.cluster(&data, overrides);
        let parts = self.split(&data, &m);
        if parts.len() <= 1 {
            self.slots[id] = Slot::Factorized(fit_factorized(&data, hp)?);
            return Ok((StepKind::Factorize, Vec::new()));
        }
        let total: f64 = parts.iter().map(|p| p.1).sum();
        let mut children = Vec::with_capacity(parts.len());
        let mut weights = Vec::with_capacity(parts.len());
        for (child, mass) in parts {
            self.slots.push(Slot::Open(child));
            children.push(self.slots.len() - 1);
            weights.push(mass / total);
        }
        self.slots[id] = Slot::Sum(children.clone(), weights);
        Ok((StepKind::Sum, children))
    }

    /// Assembles the circuit; open slots become factorized caps.
    fn build(&self) -> Result<Circuit, LearnError> {
        let mut b = CircuitBuilder::new(self.root_data.schema().clone());
        let mut ids: Vec<Option<NodeId>> = vec![None; self.slots.len()];
        // children always have larger slot indices than their parent
        for s in (0..self.slots.len()).rev() {
            let node = match &self.slots[s] {
                Slot::Leaf(var, dist) => b.leaf(*var, dist.clone()),
                Slot::Factorized(leaves) => factorized_node(&mut b, leaves),
                Slot::Open(data) => factorized_node(&mut b, &fit_factorized(data, self.hp)?),
                Slot::Product(children) => b.product(children.iter().map(|&c| ids[c].unwrap()).collect()),
                Slot::Sum(children, weights) => b.sum(children.iter().map(|&c| ids[c].unwrap()).collect(), weights.clone()),
            };
            ids[s] = Some(node);
        }
        Ok(b.build(ids[0].unwrap())?)
    }

    fn alternative_ll(&self) -> Result<f64, LearnError> {
        let c = self.build()?;
        weighted_mean_ll(&c, &self.root_data)
    }
}

fn factorized_node(b: &mut CircuitBuilder, leaves: &[(usize, LeafDist)]) -> NodeId {
    let ids: Vec<NodeId> = leaves.iter().map(|(v, d)| b.leaf(*v, d.clone())).collect();
    if ids.len() == 1 {
        ids[0]
    } else {
        b.product(ids)
    }
}

/// `Σ w log p(x) / Σ w` over the rows of `data`.
pub fn weighted_mean_ll(c: &Circuit, data: &WeightedDataset) -> Result<f64, LearnError> {
    let mut buf = Vec::new();
    let mut total = 0.0;
    for (&r, &w) in data.rows().iter().zip(data.weights()) {
        total += w * c.log_density_with(data.table().row(r), &mut buf)?;
    }
    Ok(total / data.total_weight())
}

fn check_input(data: &WeightedDataset, hp: &Hyperparams, method: Method) -> Result<(), LearnError> {
    hp.check()?;
    if data.is_empty() {
        return Err(LearnError::Empty);
    }
    if let Some(&v) = data.scope().iter().find(|&&v| v >= data.schema().len()) {
        return Err(LearnError::Scope(v));
    }
    if method == Method::Hard && data.weights().iter().any(|&w| w != 1.0) {
        return Err(LearnError::NonUnitWeights);
    }
    Ok(())
}

/// Runs the engine with optional clustering overrides.
pub fn learn_with(
    method: Method,
    data: &WeightedDataset,
    hp: &Hyperparams,
    overrides: &mut dyn SplitOverride,
) -> Result<Learned, LearnError> {
    check_input(data, hp, method)?;
    // the circuit covers the whole schema; the root scope must as well
    let data = data.restrict_scope((0..data.schema().len()).collect());
    let mut engine = Engine {
        hp,
        method,
        slots: vec![Slot::Open(data.clone())],
        rng: ChaCha8Rng::seed_from_u64(hp.seed),
        calls: 0,
        root_data: data,
    };
    let mut trace = LearnTrace::default();
    if hp.trace_alternative {
        trace.initial_alternative_ll = Some(engine.alternative_ll()?);
    }
    let mut stack: Vec<(usize, Option<usize>)> = vec![(0, None)];
    while let Some((id, parent)) = stack.pop() {
        let mass = match &engine.slots[id] {
            Slot::Open(d) => d.total_weight(),
            _ => unreachable!("stack holds open slots"),
        };
        let (kind, children) = engine.step(id, overrides)?;
        let step = trace.steps.len();
        stack.extend(children.into_iter().rev().map(|c| (c, Some(step))));
        let alternative_ll = if hp.trace_alternative { Some(engine.alternative_ll()?) } else { None };
        trace.steps.push(TraceStep { kind, mass, parent, alternative_ll });
    }
    trace.clustering_calls = engine.calls;
    let circuit = engine.build()?;
    Ok(Learned { circuit, trace })
}

/// LearnSPN over unit-weight rows.
pub fn learn_spn(data: &WeightedDataset, hp: &Hyperparams) -> Result<Learned, LearnError> {
    learn_with(Method::Hard, data, hp, &mut NoOverride)
}

/// SoftLearn over positively weighted rows.
pub fn soft_learn(data: &WeightedDataset, hp: &Hyperparams) -> Result<Learned, LearnError> {
    learn_with(Method::Soft, data, hp, &mut NoOverride)
}

pub fn learn(method: Method, data: &WeightedDataset, hp: &Hyperparams) -> Result<Learned, LearnError> {
    learn_with(method, data, hp, &mut NoOverride)
}

/// Mean weighted train LL of the fully factorized model over `data`.
pub fn factorized_ll(data: &WeightedDataset, hp: &Hyperparams) -> Result<f64, LearnError> {
    let data = data.restrict_scope((0..data.schema().len()).collect());
    let mut b = CircuitBuilder::new(data.schema().clone());
    factorized_node(&mut b, &fit_factorized(&data, hp)?);
    weighted_mean_ll(&b.finish()?, &data)
}

/// Mean weighted train LL of the alternative circuit after a single sum split
/// of the root with memberships `m`: a mixture of factorized products, each
/// fitted on its child's rows, weighted by child mass.
pub fn split_alternative_ll(data: &WeightedDataset, m: &Membership, hp: &Hyperparams, method: Method) -> Result<f64, LearnError> {
    let data = data.restrict_scope((0..data.schema().len()).collect());
    let engine = Engine {
        hp,
        method,
        slots: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(0),
        calls: 0,
        root_data: data.clone(),
    };
    let m = if method == Method::Hard { harden(m) } else { m.clone() };
    let parts = engine.split(&data, &m);
    let total: f64 = parts.iter().map(|p| p.1).sum();
    let mut b = CircuitBuilder::new(data.schema().clone());
    let mut children = Vec::new();
    let mut weights = Vec::new();
    for (child, mass) in &parts {
        children.push(factorized_node(&mut b, &fit_factorized(child, hp)?));
        weights.push(mass / total);
    }
    b.sum(children, weights);
    weighted_mean_ll(&b.finish()?, &data)
}

/// Convenience for tests and tools: unit-weight dataset over a table.
pub fn unit_dataset(table: Table) -> WeightedDataset {
    WeightedDataset::unit(Arc::new(table))
}
