//! Probabilistic circuits: node table, structural validation, log-space
//! evaluation, marginal queries, ancestral sampling and the JSON model file.
//!
//! The node table is append-only and children always precede their parents,
//! so every evaluation is a single forward pass over the table.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::data::{Schema, VarKind, Variable};
use crate::estimators::{Gaussian, LeafDist, Multinomial};
use crate::math::log_sum_exp;

/// Tolerance on the sum of sum-node weights and multinomial probabilities.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Sum { children: Vec<NodeId>, weights: Vec<f64> },
    Product { children: Vec<NodeId> },
    Leaf { var: usize, dist: LeafDist },
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match self {
            Node::Sum { children, .. } | Node::Product { children } => children,
            Node::Leaf { .. } => &[],
        }
    }
}

/// A structural defect found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RootOutOfRange { root: usize, len: usize },
    ChildOutOfRange { node: usize, child: usize },
    /// A child that does not precede its parent; the only way a cycle can form.
    ChildOrder { node: usize, child: usize },
    /// A node other than the root that nobody points to.
    ExtraRoot { node: usize },
    RootHasParent { root: usize },
    NoChildren { node: usize },
    WeightCount { node: usize, children: usize, weights: usize },
    NegativeWeight { node: usize, weight: f64 },
    Unnormalized { node: usize, sum: f64 },
    /// A1: children of a sum node with different scopes.
    NotSmooth { node: usize },
    /// A2: children of a product node sharing variables.
    NotDecomposable { node: usize, shared: Vec<usize> },
    LeafVariable { node: usize, var: usize },
    LeafKind { node: usize, var: usize },
    LeafParameters { node: usize, reason: String },
    RootScope { missing: Vec<usize> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootOutOfRange { root, len } => write!(f, "root {root} outside node table of {len}"),
            Violation::ChildOutOfRange { node, child } => write!(f, "node {node}: child {child} out of range"),
            Violation::ChildOrder { node, child } => write!(f, "node {node}: child {child} does not precede it"),
            Violation::ExtraRoot { node } => write!(f, "node {node} has no parent but is not the root"),
            Violation::RootHasParent { root } => write!(f, "root {root} has a parent"),
            Violation::NoChildren { node } => write!(f, "node {node} has no children"),
            Violation::WeightCount { node, children, weights } => {
                write!(f, "sum {node}: {children} children but {weights} weights")
            }
            Violation::NegativeWeight { node, weight } => write!(f, "sum {node}: weight {weight} is negative"),
            Violation::Unnormalized { node, sum } => write!(f, "sum {node}: weights sum to {sum}"),
            Violation::NotSmooth { node } => write!(f, "sum {node}: children scopes differ (smoothness)"),
            Violation::NotDecomposable { node, shared } => {
                write!(f, "product {node}: children share variables {shared:?} (decomposability)")
            }
            Violation::LeafVariable { node, var } => write!(f, "leaf {node}: variable {var} not in schema"),
            Violation::LeafKind { node, var } => write!(f, "leaf {node}: distribution does not match variable {var}"),
            Violation::LeafParameters { node, reason } => write!(f, "leaf {node}: {reason}"),
            Violation::RootScope { missing } => write!(f, "root scope misses variables {missing:?}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid circuit: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("query has {found} entries, schema has {expected}")]
    QueryLength { found: usize, expected: usize },
    #[error("variable {var}: {reason}")]
    SchemaMismatch { var: usize, reason: String },
    #[error("interval [{lo}, {hi}] on variable {var} is empty or malformed")]
    BadInterval { var: usize, lo: f64, hi: f64 },
    #[error("model parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Evidence on one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evidence {
    /// Summed (integrated) out.
    Marginalized,
    Category(usize),
    Value(f64),
    /// Closed interval `[lo, hi]`; bounds may be infinite.
    Interval { lo: f64, hi: f64 },
}

/// One [`Evidence`] per schema variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Query(pub Vec<Evidence>);

impl Query {
    pub fn all_marginalized(n: usize) -> Self {
        Query(vec![Evidence::Marginalized; n])
    }

    pub fn full(row: &[f64]) -> Self {
        Query(row.iter().map(|&x| Evidence::Value(x)).collect())
    }

    pub fn set(mut self, var: usize, ev: Evidence) -> Self {
        self.0[var] = ev;
        self
    }
}

/// A smooth, decomposable, single-rooted circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    nodes: Vec<Node>,
    root: NodeId,
    scopes: Vec<Vec<usize>>,
    log_weights: Vec<Vec<f64>>,
    schema: Schema,
}

/// Size statistics reported alongside learned models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CircuitStats {
    pub nodes: usize,
    pub sums: usize,
    pub products: usize,
    pub leaves: usize,
    pub edges: usize,
    pub params: usize,
    pub depth: usize,
}

impl Circuit {
    /// Builds a circuit without checking it. Scopes are still derived; use
    /// [`validate`] to inspect the result. Evaluating an invalid circuit
    /// gives meaningless numbers.
    pub fn from_nodes_unchecked(schema: Schema, nodes: Vec<Node>, root: NodeId) -> Self {
        let n = nodes.len();
        let mut scopes: Vec<Vec<usize>> = Vec::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            let scope = match node {
                Node::Leaf { var, .. } => vec![*var],
                _ => {
                    let mut s = BTreeSet::new();
                    for c in node.children() {
                        if c.0 < i {
                            s.extend(scopes[c.0].iter().copied());
                        }
                    }
                    s.into_iter().collect()
                }
            };
            scopes.push(scope);
        }
        let log_weights = nodes
            .iter()
            .map(|node| match node {
                Node::Sum { weights, .. } => weights.iter().map(|w| w.ln()).collect(),
                _ => Vec::new(),
            })
            .collect();
        Circuit { nodes, root, scopes, log_weights, schema }
    }

    /// Builds and validates.
    pub fn new(schema: Schema, nodes: Vec<Node>, root: NodeId) -> Result<Self, CircuitError> {
        let c = Circuit::from_nodes_unchecked(schema, nodes, root);
        let violations = validate(&c);
        if violations.is_empty() {
            Ok(c)
        } else {
            Err(CircuitError::Invalid(violations))
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn scope(&self, id: NodeId) -> &[usize] {
        &self.scopes[id.0]
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn stats(&self) -> CircuitStats {
        let mut st = CircuitStats { nodes: self.nodes.len(), ..Default::default() };
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            st.edges += node.children().len();
            depth[i] = node.children().iter().map(|c| depth[c.0] + 1).max().unwrap_or(0);
            match node {
                Node::Sum { weights, .. } => {
                    st.sums += 1;
                    st.params += weights.len();
                }
                Node::Product { .. } => st.products += 1,
                Node::Leaf { dist, .. } => {
                    st.leaves += 1;
                    st.params += dist.param_count();
                }
            }
        }
        st.depth = depth.get(self.root.0).copied().unwrap_or(0);
        st
    }

    /// Forward pass with a caller-supplied leaf evaluator.
    fn forward<F>(&self, buf: &mut Vec<f64>, mut leaf: F) -> Result<f64, CircuitError>
    where
        F: FnMut(usize, &LeafDist) -> Result<f64, CircuitError>,
    {
        buf.clear();
        buf.resize(self.nodes.len(), 0.0);
        let mut terms: Vec<f64> = Vec::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let v = match node {
                Node::Leaf { var, dist } => leaf(*var, dist)?,
                Node::Product { children } => children.iter().map(|c| buf[c.0]).sum(),
                Node::Sum { children, .. } => {
                    terms.clear();
                    for (c, lw) in children.iter().zip(&self.log_weights[i]) {
                        if *lw > f64::NEG_INFINITY {
                            terms.push(lw + buf[c.0]);
                        }
                    }
                    log_sum_exp(&terms)
                }
            };
            buf[i] = v;
        }
        Ok(buf[self.root.0])
    }

    fn leaf_evidence(&self, var: usize, dist: &LeafDist, ev: Evidence) -> Result<f64, CircuitError> {
        let mismatch = |reason: &str| CircuitError::SchemaMismatch { var, reason: reason.to_string() };
        match (dist, ev) {
            (_, Evidence::Marginalized) => Ok(0.0),
            (LeafDist::Multinomial(m), Evidence::Category(k)) => {
                if k >= m.arity() {
                    return Err(mismatch(&format!("category {k} outside arity {}", m.arity())));
                }
                Ok(m.log_prob(k))
            }
            (LeafDist::Multinomial(m), Evidence::Value(x)) => {
                if x.fract() != 0.0 || x < 0.0 || x >= m.arity() as f64 {
                    return Err(mismatch(&format!("value {x} is not a category below {}", m.arity())));
                }
                Ok(m.log_prob(x as usize))
            }
            (LeafDist::Multinomial(m), Evidence::Interval { lo, hi }) => {
                let terms: Vec<f64> =
                    (0..m.arity()).filter(|&k| k as f64 >= lo && k as f64 <= hi).map(|k| m.log_prob(k)).collect();
                Ok(log_sum_exp(&terms))
            }
            (LeafDist::Gaussian(_), Evidence::Category(_)) => Err(mismatch("categorical evidence on a continuous variable")),
            (LeafDist::Gaussian(g), Evidence::Value(x)) => {
                if !x.is_finite() {
                    return Err(mismatch("non-finite value"));
                }
                Ok(g.log_pdf(x))
            }
            (LeafDist::Gaussian(g), Evidence::Interval { lo, hi }) => Ok(g.log_interval(lo, hi)),
        }
    }

    /// Log-density of a complete assignment: log-sum-exp at sums, addition at
    /// products.
    pub fn log_density(&self, row: &[f64]) -> Result<f64, CircuitError> {
        let mut buf = Vec::new();
        self.log_density_with(row, &mut buf)
    }

    /// [`Circuit::log_density`] reusing an evaluation buffer.
    pub fn log_density_with(&self, row: &[f64], buf: &mut Vec<f64>) -> Result<f64, CircuitError> {
        if row.len() != self.schema.len() {
            return Err(CircuitError::QueryLength { found: row.len(), expected: self.schema.len() });
        }
        self.forward(buf, |var, dist| self.leaf_evidence(var, dist, Evidence::Value(row[var])))
    }

    /// Log-probability of a query: marginalized variables contribute 1,
    /// observed ones their mass or density, intervals their CDF difference.
    pub fn log_marginal(&self, query: &Query) -> Result<f64, CircuitError> {
        if query.0.len() != self.schema.len() {
            return Err(CircuitError::QueryLength { found: query.0.len(), expected: self.schema.len() });
        }
        for (var, ev) in query.0.iter().enumerate() {
            if let Evidence::Interval { lo, hi } = *ev {
                if lo.is_nan() || hi.is_nan() || lo > hi {
                    return Err(CircuitError::BadInterval { var, lo, hi });
                }
            }
        }
        let mut buf = Vec::new();
        self.forward(&mut buf, |var, dist| self.leaf_evidence(var, dist, query.0[var]))
    }

    /// Mean per-row log-likelihood over the rows of a table.
    pub fn mean_log_likelihood<'a, I>(&self, rows: I) -> Result<f64, CircuitError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut buf = Vec::new();
        let mut total = 0.0;
        let mut n = 0usize;
        for row in rows {
            total += self.log_density_with(row, &mut buf)?;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    /// Draws one complete assignment top-down: one child per sum node by
    /// weight, every child of a product, one value per leaf.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut row = vec![f64::NAN; self.schema.len()];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id.0] {
                Node::Leaf { var, dist } => {
                    row[*var] = match dist {
                        LeafDist::Multinomial(m) => m.sample(rng) as f64,
                        LeafDist::Gaussian(g) => g.sample(rng),
                    };
                }
                Node::Product { children } => stack.extend(children.iter().rev().copied()),
                Node::Sum { children, weights } => {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = None;
                    for (c, &w) in children.iter().zip(weights) {
                        if w <= 0.0 {
                            continue;
                        }
                        acc += w;
                        chosen = Some(*c);
                        if u < acc {
                            break;
                        }
                    }
                    stack.push(chosen.expect("sum node with positive weight"));
                }
            }
        }
        row
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    // -----------------------------------------------------------------------
    // Model file
    // -----------------------------------------------------------------------

    /// Serializes to the JSON model format. Reals are written with 17
    /// significant digits so parsing restores them bit for bit.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        out.push_str("{\n  \"schema\": [");
        for (i, v) in self.schema.vars().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let name = v.name.as_ref().map(|n| format!(", \"name\": {}", json_string(n))).unwrap_or_default();
            match v.kind {
                VarKind::Categorical { arity } => out.push_str(&format!("{{\"kind\": \"cat\", \"arity\": {arity}{name}}}")),
                VarKind::Continuous => out.push_str(&format!("{{\"kind\": \"cont\"{name}}}")),
            }
        }
        out.push_str(&format!("],\n  \"root\": {},\n  \"nodes\": [\n", self.root.0));
        for (i, node) in self.nodes.iter().enumerate() {
            out.push_str("    ");
            match node {
                Node::Sum { children, weights } => out.push_str(&format!(
                    "{{\"type\": \"sum\", \"children\": [{}], \"weights\": [{}]}}",
                    join_ids(children),
                    join_reals(weights)
                )),
                Node::Product { children } => {
                    out.push_str(&format!("{{\"type\": \"prod\", \"children\": [{}]}}", join_ids(children)))
                }
                Node::Leaf { var, dist } => {
                    let d = match dist {
                        LeafDist::Multinomial(m) => {
                            format!("{{\"kind\": \"multinomial\", \"probs\": [{}]}}", join_reals(m.probs()))
                        }
                        LeafDist::Gaussian(g) => {
                            format!("{{\"kind\": \"gaussian\", \"mu\": {}, \"sigma\": {}}}", real(g.mu()), real(g.sigma()))
                        }
                    };
                    out.push_str(&format!("{{\"type\": \"leaf\", \"var\": {var}, \"dist\": {d}}}"));
                }
            }
            out.push_str(if i + 1 < self.nodes.len() { ",\n" } else { "\n" });
        }
        out.push_str("  ]\n}\n");
        out
    }

    /// Parses and validates a model file.
    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| CircuitError::Parse(e.to_string()))?;
        let vars = file
            .schema
            .into_iter()
            .map(|v| match v {
                VarSpec::Cat { arity, name } => Variable { kind: VarKind::Categorical { arity }, name },
                VarSpec::Cont { name } => Variable { kind: VarKind::Continuous, name },
            })
            .collect();
        let schema = Schema::new(vars).map_err(|e| CircuitError::Parse(e.to_string()))?;
        let mut nodes = Vec::with_capacity(file.nodes.len());
        let mut bad_leaves = Vec::new();
        for (i, n) in file.nodes.into_iter().enumerate() {
            nodes.push(match n {
                NodeSpec::Sum { children, weights } => {
                    Node::Sum { children: children.into_iter().map(NodeId).collect(), weights }
                }
                NodeSpec::Prod { children } => Node::Product { children: children.into_iter().map(NodeId).collect() },
                NodeSpec::Leaf { var, dist } => {
                    let dist = match dist {
                        DistSpec::Multinomial { probs } => Multinomial::new(probs).map(LeafDist::Multinomial),
                        DistSpec::Gaussian { mu, sigma } => Gaussian::new(mu, sigma).map(LeafDist::Gaussian),
                    };
                    match dist {
                        Ok(dist) => Node::Leaf { var, dist },
                        Err(e) => {
                            bad_leaves.push(Violation::LeafParameters { node: i, reason: e.to_string() });
                            // keeps indices aligned; rejected below
                            Node::Product { children: Vec::new() }
                        }
                    }
                }
            });
        }
        // structural checks on placeholders would only add noise
        if !bad_leaves.is_empty() {
            return Err(CircuitError::Invalid(bad_leaves));
        }
        let circuit = Circuit::from_nodes_unchecked(schema, nodes, NodeId(file.root));
        let violations = validate(&circuit);
        if violations.is_empty() {
            Ok(circuit)
        } else {
            Err(CircuitError::Invalid(violations))
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CircuitError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CircuitError> {
        Circuit::from_json(&fs::read_to_string(path)?)
    }
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_reals(xs: &[f64]) -> String {
    xs.iter().map(|&x| real(x)).collect::<Vec<_>>().join(", ")
}

fn join_ids(ids: &[NodeId]) -> String {
    ids.iter().map(|c| c.0.to_string()).collect::<Vec<_>>().join(", ")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

#[derive(Deserialize)]
struct ModelFile {
    schema: Vec<VarSpec>,
    root: usize,
    nodes: Vec<NodeSpec>,
}

#[derive(Deserialize)]
#[serde(tag = "kind")]
enum VarSpec {
    #[serde(rename = "cat")]
    Cat {
        arity: usize,
        #[serde(default)]
        name: Option<String>,
    },
    #[serde(rename = "cont")]
    Cont {
        #[serde(default)]
        name: Option<String>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "type")]
enum NodeSpec {
    #[serde(rename = "sum")]
    Sum { children: Vec<usize>, weights: Vec<f64> },
    #[serde(rename = "prod")]
    Prod { children: Vec<usize> },
    #[serde(rename = "leaf")]
    Leaf { var: usize, dist: DistSpec },
}

#[derive(Deserialize)]
#[serde(tag = "kind")]
enum DistSpec {
    #[serde(rename = "multinomial")]
    Multinomial { probs: Vec<f64> },
    #[serde(rename = "gaussian")]
    Gaussian { mu: f64, sigma: f64 },
}

/// Lists every structural defect of `circuit`; empty iff the circuit is
/// acyclic, single-rooted, smooth, decomposable, covers the schema at the
/// root and has normalized parameters.
pub fn validate(circuit: &Circuit) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = circuit.nodes.len();
    let root = circuit.root.0;
    if root >= n {
        out.push(Violation::RootOutOfRange { root, len: n });
        return out;
    }
    let mut in_degree = vec![0usize; n];
    for (i, node) in circuit.nodes.iter().enumerate() {
        for c in node.children() {
            if c.0 >= n {
                out.push(Violation::ChildOutOfRange { node: i, child: c.0 });
            } else {
                in_degree[c.0] += 1;
                if c.0 >= i {
                    out.push(Violation::ChildOrder { node: i, child: c.0 });
                }
            }
        }
        match node {
            Node::Sum { children, weights } => {
                if children.is_empty() {
                    out.push(Violation::NoChildren { node: i });
                }
                if children.len() != weights.len() {
                    out.push(Violation::WeightCount { node: i, children: children.len(), weights: weights.len() });
                }
                for &w in weights {
                    if !(w >= 0.0) {
                        out.push(Violation::NegativeWeight { node: i, weight: w });
                    }
                }
                let sum: f64 = weights.iter().sum();
                if !((sum - 1.0).abs() <= WEIGHT_TOLERANCE) {
                    out.push(Violation::Unnormalized { node: i, sum });
                }
                let scopes: Vec<&Vec<usize>> =
                    children.iter().filter(|c| c.0 < n).map(|c| &circuit.scopes[c.0]).collect();
                if scopes.windows(2).any(|w| w[0] != w[1]) {
                    out.push(Violation::NotSmooth { node: i });
                }
            }
            Node::Product { children } => {
                if children.is_empty() {
                    out.push(Violation::NoChildren { node: i });
                }
                let mut seen = BTreeSet::new();
                let mut shared = BTreeSet::new();
                for c in children.iter().filter(|c| c.0 < n) {
                    for &v in &circuit.scopes[c.0] {
                        if !seen.insert(v) {
                            shared.insert(v);
                        }
                    }
                }
                if !shared.is_empty() {
                    out.push(Violation::NotDecomposable { node: i, shared: shared.into_iter().collect() });
                }
            }
            Node::Leaf { var, dist } => {
                if *var >= circuit.schema.len() {
                    out.push(Violation::LeafVariable { node: i, var: *var });
                    continue;
                }
                match (circuit.schema.var(*var).kind, dist) {
                    (VarKind::Categorical { arity }, LeafDist::Multinomial(m)) if m.arity() == arity => {
                        let sum: f64 = m.probs().iter().sum();
                        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                            out.push(Violation::LeafParameters { node: i, reason: format!("probabilities sum to {sum}") });
                        }
                    }
                    (VarKind::Continuous, LeafDist::Gaussian(_)) => {}
                    _ => out.push(Violation::LeafKind { node: i, var: *var }),
                }
            }
        }
    }
    for (i, &d) in in_degree.iter().enumerate() {
        if i == root {
            if d > 0 {
                out.push(Violation::RootHasParent { root });
            }
        } else if d == 0 {
            out.push(Violation::ExtraRoot { node: i });
        }
    }
    let root_scope: BTreeSet<usize> = circuit.scopes[root].iter().copied().collect();
    let missing: Vec<usize> = (0..circuit.schema.len()).filter(|v| !root_scope.contains(v)).collect();
    if !missing.is_empty() {
        out.push(Violation::RootScope { missing });
    }
    out
}

/// Append-only construction. Children must already exist when a parent is
/// added, so the table is topologically ordered by construction.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    schema: Schema,
    nodes: Vec<Node>,
}

impl CircuitBuilder {
    pub fn new(schema: Schema) -> Self {
        CircuitBuilder { schema, nodes: Vec::new() }
    }

    fn push(&mut self, node: Node) -> NodeId {
        for c in node.children() {
            assert!(c.0 < self.nodes.len(), "child {} added before it exists", c.0);
        }
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, var: usize, dist: LeafDist) -> NodeId {
        self.push(Node::Leaf { var, dist })
    }

    pub fn gaussian(&mut self, var: usize, mu: f64, sigma: f64) -> NodeId {
        self.leaf(var, LeafDist::Gaussian(Gaussian::new(mu, sigma).expect("valid gaussian")))
    }

    pub fn multinomial(&mut self, var: usize, probs: Vec<f64>) -> NodeId {
        self.leaf(var, LeafDist::Multinomial(Multinomial::new(probs).expect("valid multinomial")))
    }

    pub fn product(&mut self, children: Vec<NodeId>) -> NodeId {
        self.push(Node::Product { children })
    }

    pub fn sum(&mut self, children: Vec<NodeId>, weights: Vec<f64>) -> NodeId {
        self.push(Node::Sum { children, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Finishes with `root` as the root node and validates.
    pub fn build(self, root: NodeId) -> Result<Circuit, CircuitError> {
        Circuit::new(self.schema, self.nodes, root)
    }

    /// Finishes with the most recently added node as the root.
    pub fn finish(self) -> Result<Circuit, CircuitError> {
        let root = NodeId(self.nodes.len().saturating_sub(1));
        self.build(root)
    }

    pub fn finish_unchecked(self) -> Circuit {
        let root = NodeId(self.nodes.len().saturating_sub(1));
        Circuit::from_nodes_unchecked(self.schema, self.nodes, root)
    }
}

/// The two-component mixture used as the running toy example:
/// `0.5·N_X(−0.5, 1)·N_Y(−2, 0.2) + 0.5·N_X(0.5, 1)·N_Y(2, 0.2)`
/// (second parameters are standard deviations).
pub fn toy_mixture() -> Circuit {
    let schema = Schema::new(vec![Variable::continuous().named("x"), Variable::continuous().named("y")]).unwrap();
    let mut b = CircuitBuilder::new(schema);
    let x1 = b.gaussian(0, -0.5, 1.0);
    let y1 = b.gaussian(1, -2.0, 0.2);
    let x2 = b.gaussian(0, 0.5, 1.0);
    let y2 = b.gaussian(1, 2.0, 0.2);
    let p1 = b.product(vec![x1, y1]);
    let p2 = b.product(vec![x2, y2]);
    b.sum(vec![p1, p2], vec![0.5, 0.5]);
    b.finish().expect("toy mixture is valid")
}
