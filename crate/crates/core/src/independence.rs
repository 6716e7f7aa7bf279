//! Weighted chi-square independence tests and scope partitioning.
//!
//! Weights act as frequencies: observed cells are sums of row weights, so a
//! row of weight 3 counts exactly like three copies of that row.

use libm::lgamma as ln_gamma;

use crate::data::{VarKind, WeightedDataset};

/// Default number of equal-frequency bins for continuous columns.
pub const DEFAULT_BINS: usize = 4;

/// Weighted r×c contingency table.
#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    cells: Vec<Vec<f64>>,
    row_margins: Vec<f64>,
    col_margins: Vec<f64>,
    total: f64,
}

impl ContingencyTable {
    /// Accumulates `w[k]` into cell `(x[k], y[k])`.
    pub fn from_columns(x: &[usize], y: &[usize], w: &[f64]) -> Self {
        assert_eq!(x.len(), y.len(), "column lengths differ");
        assert_eq!(x.len(), w.len(), "weight length differs");
        let r = x.iter().max().map_or(0, |m| m + 1);
        let c = y.iter().max().map_or(0, |m| m + 1);
        let mut cells = vec![vec![0.0; c]; r];
        for ((&i, &j), &wk) in x.iter().zip(y).zip(w) {
            cells[i][j] += wk;
        }
        ContingencyTable::from_cells(cells)
    }

    pub fn from_cells(cells: Vec<Vec<f64>>) -> Self {
        let c = cells.first().map_or(0, Vec::len);
        let row_margins: Vec<f64> = cells.iter().map(|r| r.iter().sum()).collect();
        let col_margins: Vec<f64> = (0..c).map(|j| cells.iter().map(|r| r[j]).sum()).collect();
        let total = row_margins.iter().sum();
        ContingencyTable { cells, row_margins, col_margins, total }
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn row_margins(&self) -> &[f64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[f64] {
        &self.col_margins
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Pearson statistic over cells with positive expected weight.
    pub fn test(&self) -> Chi2Test {
        let active_rows = self.row_margins.iter().filter(|&&m| m > 0.0).count();
        let active_cols = self.col_margins.iter().filter(|&&m| m > 0.0).count();
        if active_rows <= 1 || active_cols <= 1 || self.total <= 0.0 {
            return Chi2Test { stat: 0.0, dof: 0, p_value: 1.0 };
        }
        let mut stat = 0.0;
        for (i, row) in self.cells.iter().enumerate() {
            for (j, &o) in row.iter().enumerate() {
                let e = self.row_margins[i] * self.col_margins[j] / self.total;
                if e > 0.0 {
                    stat += (o - e) * (o - e) / e;
                }
            }
        }
        let dof = (active_rows - 1) * (active_cols - 1);
        let p_value = if self.total < (2 * active_rows * active_cols) as f64 {
            1.0
        } else {
            chi2_sf(stat, dof as f64)
        };
        Chi2Test { stat, dof, p_value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Test {
    pub stat: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Weighted Pearson chi-square test of independence between two categorical
/// columns.
pub fn weighted_chi2(x: &[usize], y: &[usize], weights: &[f64]) -> Chi2Test {
    ContingencyTable::from_columns(x, y, weights).test()
}

/// Upper tail `P(χ²_dof > stat)`.
pub fn chi2_sf(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    if stat.is_infinite() {
        return 0.0;
    }
    gamma_q(dof / 2.0, stat / 2.0)
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_MAX_ITER: usize = 10_000;

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

// modified Lentz
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (h.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Weighted equal-frequency discretization.
///
/// Returns bin indices and the interior edges. A cut is placed after the
/// first distinct value whose cumulative weight reaches `k·W/bins`; the edge
/// is the midpoint to the next distinct value. Coinciding cuts collapse, so
/// the effective bin count never exceeds the number of distinct values.
pub fn discretize(values: &[f64], weights: &[f64], bins: usize) -> (Vec<usize>, Vec<f64>) {
    assert!(bins >= 2, "need at least two bins");
    assert_eq!(values.len(), weights.len());
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut distinct: Vec<f64> = Vec::new();
    let mut cum: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if distinct.last() == Some(&values[i]) {
            *cum.last_mut().unwrap() = acc;
        } else {
            distinct.push(values[i]);
            cum.push(acc);
        }
    }
    let total = acc;
    let mut edges: Vec<f64> = Vec::new();
    let mut start = 0usize;
    for k in 1..bins {
        let threshold = total * k as f64 / bins as f64 - 1e-9 * total;
        let Some(j) = (start..distinct.len()).find(|&j| cum[j] >= threshold) else { break };
        if j + 1 >= distinct.len() {
            break;
        }
        edges.push(0.5 * (distinct[j] + distinct[j + 1]));
        start = j + 1;
    }
    let idx = values.iter().map(|&v| edges.partition_point(|&e| e < v)).collect();
    (idx, edges)
}

/// A column prepared for testing: categorical codes, continuous bin indices.
fn test_column(data: &WeightedDataset, var: usize, bins: usize) -> Vec<usize> {
    let col = data.column(var);
    match data.schema().var(var).kind {
        VarKind::Categorical { .. } => col.iter().map(|&v| v as usize).collect(),
        VarKind::Continuous => discretize(&col, data.weights(), bins).0,
    }
}

/// All pairs `(a, b)` of scope variables with `a < b` whose test rejects
/// independence at `p_threshold`.
pub fn dependency_graph(data: &WeightedDataset, p_threshold: f64, bins: usize) -> Vec<(usize, usize)> {
    let scope = data.scope();
    let cols: Vec<Vec<usize>> = scope.iter().map(|&v| test_column(data, v, bins)).collect();
    let mut edges = Vec::new();
    for a in 0..scope.len() {
        for b in a + 1..scope.len() {
            if weighted_chi2(&cols[a], &cols[b], data.weights()).p_value < p_threshold {
                edges.push((scope[a], scope[b]));
            }
        }
    }
    edges
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components of the dependency graph over the active scope, each
/// sorted, ordered by smallest member. Pairs already connected are not
/// tested, which leaves the components unchanged.
pub fn partition_scope(data: &WeightedDataset, p_threshold: f64, bins: usize) -> Vec<Vec<usize>> {
    let scope = data.scope();
    let m = scope.len();
    if m <= 1 {
        return vec![scope.to_vec()];
    }
    let cols: Vec<Vec<usize>> = scope.iter().map(|&v| test_column(data, v, bins)).collect();
    let mut uf = UnionFind((0..m).collect());
    for a in 0..m {
        for b in a + 1..m {
            if uf.find(a) == uf.find(b) {
                continue;
            }
            if weighted_chi2(&cols[a], &cols[b], data.weights()).p_value < p_threshold {
                uf.union(a, b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; m];
    for i in 0..m {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(scope[i]);
    }
    groups
}
