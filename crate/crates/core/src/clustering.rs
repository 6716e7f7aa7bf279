//! Instance clustering over weighted rows: soft k-means with softmax
//! responsibilities, EM over mixtures of fully factorized distributions, and
//! hardening of soft memberships.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{VarKind, WeightedDataset};
use crate::estimators::{fit_gaussian, multinomial_from_counts, LeafDist, WeightedColumn, SIGMA_FLOOR};
use crate::math::{log_sum_exp, softmax, weighted_mean_std};

pub const DEFAULT_BETA: f64 = 4.0;
/// Centroid movement below which k-means stops.
pub const CENTROID_TOL: f64 = 1e-6;
/// Mixture priors below this count as a collapsed component.
pub const COLLAPSE_PRIOR: f64 = 1e-8;

/// Row-stochastic n×K responsibility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    resp: Vec<Vec<f64>>,
    k: usize,
}

impl Membership {
    /// Panics if a row has the wrong width, a negative entry, or does not sum
    /// to 1 within 1e-9.
    pub fn new(resp: Vec<Vec<f64>>, k: usize) -> Self {
        for (i, row) in resp.iter().enumerate() {
            assert_eq!(row.len(), k, "row {i} has width {}", row.len());
            assert!(row.iter().all(|&r| (0.0..=1.0 + 1e-12).contains(&r)), "row {i} has entries outside [0,1]");
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() <= 1e-9, "row {i} sums to {s}");
        }
        Membership { resp, k }
    }

    /// One-hot rows from cluster labels in `0..k`.
    pub fn from_labels(labels: &[usize], k: usize) -> Self {
        let resp = labels
            .iter()
            .map(|&l| {
                let mut r = vec![0.0; k];
                r[l] = 1.0;
                r
            })
            .collect();
        Membership::new(resp, k)
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        Membership { resp: vec![vec![1.0 / k as f64; k]; n], k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.resp.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.resp[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.resp
    }

    pub fn is_hard(&self) -> bool {
        self.resp.iter().all(|r| r.iter().all(|&x| x == 0.0 || x == 1.0))
    }

    /// Σ_d w_d·resp_i(d) per cluster.
    pub fn masses(&self, weights: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.k];
        for (row, &w) in self.resp.iter().zip(weights) {
            for (mi, &r) in m.iter_mut().zip(row) {
                *mi += w * r;
            }
        }
        m
    }

    /// Permutes cluster columns: new column `j` is old column `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> Membership {
        let resp = self.resp.iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
        Membership { resp, k: self.k }
    }
}

/// Argmax per row with ties to the lowest index; clusters that never win are
/// dropped.
pub fn harden(m: &Membership) -> Membership {
    let labels: Vec<usize> = m
        .resp
        .iter()
        .map(|r| {
            let mut best = 0;
            for (j, &x) in r.iter().enumerate() {
                if x > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    let mut remap = vec![usize::MAX; m.k];
    let mut next = 0;
    for j in 0..m.k {
        if labels.contains(&j) {
            remap[j] = next;
            next += 1;
        }
    }
    let relabeled: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    Membership::from_labels(&relabeled, next.max(1))
}

/// Encodes scope columns for distances: one-hot categoricals, weighted
/// standardized continuous columns.
#[derive(Debug, Clone)]
pub struct Encoder {
    parts: Vec<EncodedVar>,
    width: usize,
}

#[derive(Debug, Clone)]
enum EncodedVar {
    OneHot { var: usize, arity: usize },
    Scaled { var: usize, mean: f64, std: f64 },
}

impl Encoder {
    pub fn fit(data: &WeightedDataset) -> Self {
        let mut parts = Vec::new();
        let mut width = 0;
        for &var in data.scope() {
            match data.schema().var(var).kind {
                VarKind::Categorical { arity } => {
                    parts.push(EncodedVar::OneHot { var, arity });
                    width += arity;
                }
                VarKind::Continuous => {
                    let (mean, std) = weighted_mean_std(&data.column(var), data.weights());
                    parts.push(EncodedVar::Scaled { var, mean, std });
                    width += 1;
                }
            }
        }
        Encoder { parts, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Encodes a full-schema row.
    pub fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        for p in &self.parts {
            match *p {
                EncodedVar::OneHot { var, arity } => {
                    let k = row[var] as usize;
                    out.extend((0..arity).map(|j| if j == k { 1.0 } else { 0.0 }));
                }
                EncodedVar::Scaled { var, mean, std } => {
                    out.push(if std > 0.0 { (row[var] - mean) / std } else { row[var] - mean });
                }
            }
        }
        out
    }

    pub fn encode_all(&self, data: &WeightedDataset) -> Vec<Vec<f64>> {
        data.rows().iter().map(|&r| self.encode(data.table().row(r))).collect()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Responsibilities of one encoded point given centroids:
/// `softmax_i(β·(1 − ‖d − C_i‖ / Σ_j ‖d − C_j‖))`, uniform when the point
/// sits on every centroid.
pub fn kmeans_weights(point: &[f64], centroids: &[Vec<f64>], beta: f64) -> Vec<f64> {
    let d: Vec<f64> = centroids.iter().map(|c| dist(point, c)).collect();
    let total: f64 = d.iter().sum();
    if total == 0.0 {
        return vec![1.0 / centroids.len() as f64; centroids.len()];
    }
    let args: Vec<f64> = d.iter().map(|di| beta * (1.0 - di / total)).collect();
    softmax(&args)
}

fn weighted_centroids(points: &[Vec<f64>], weights: &[f64], resp: &[Vec<f64>], k: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let width = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; width]; k];
    let mut mass = vec![0.0; k];
    for ((p, &w), r) in points.iter().zip(weights).zip(resp) {
        for i in 0..k {
            let v = w * r[i];
            if v == 0.0 {
                continue;
            }
            mass[i] += v;
            for (s, x) in sums[i].iter_mut().zip(p) {
                *s += v * x;
            }
        }
    }
    for (s, &m) in sums.iter_mut().zip(&mass) {
        if m > 0.0 {
            for x in s.iter_mut() {
                *x /= m;
            }
        }
    }
    (sums, mass)
}

/// Weighted k-means++ seeding: first centroid by row weight, later ones by
/// weight times squared distance to the nearest chosen centroid.
fn seed_centroids(points: &[Vec<f64>], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let pick = |scores: &[f64], rng: &mut ChaCha8Rng| -> usize {
        let total: f64 = scores.iter().sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s <= 0.0 {
                continue;
            }
            acc += s;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    };
    let mut centroids = vec![points[pick(weights, rng)].clone()];
    while centroids.len() < k {
        let scores: Vec<f64> = points
            .iter()
            .zip(weights)
            .map(|(p, &w)| {
                let d = centroids.iter().map(|c| dist(p, c)).fold(f64::INFINITY, f64::min);
                w * d * d
            })
            .collect();
        let idx = if scores.iter().sum::<f64>() > 0.0 { pick(&scores, rng) } else { pick(weights, rng) };
        centroids.push(points[idx].clone());
    }
    centroids
}

/// Result of a soft k-means run in encoded space.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub membership: Membership,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Weighted soft k-means on the active scope of `data`.
pub fn soft_kmeans(data: &WeightedDataset, k: usize, beta: f64, max_iter: usize, seed: u64) -> Membership {
    soft_kmeans_fit(data, k, beta, max_iter, seed).membership
}

pub fn soft_kmeans_fit(data: &WeightedDataset, k: usize, beta: f64, max_iter: usize, seed: u64) -> KMeansFit {
    assert!(k >= 1 && beta >= 0.0);
    let n = data.len();
    let k = k.min(n).max(1);
    let points = Encoder::fit(data).encode_all(data);
    let weights = data.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, weights, k, &mut rng);
    let responsibilities =
        |centroids: &[Vec<f64>]| -> Vec<Vec<f64>> { points.iter().map(|p| kmeans_weights(p, centroids, beta)).collect() };
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let resp = responsibilities(&centroids);
        let (mut next, mass) = weighted_centroids(&points, weights, &resp, k);
        for i in 0..k {
            if mass[i] <= 1e-12 {
                // re-seed at the point farthest (in weighted distance) from its nearest centroid
                let far = points
                    .iter()
                    .zip(weights)
                    .map(|(p, &w)| w * next.iter().map(|c| dist(p, c)).fold(f64::INFINITY, f64::min))
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (j, s)| if s > best.1 { (j, s) } else { best })
                    .0;
                next[i] = points[far].clone();
            }
        }
        let shift = centroids.iter().zip(&next).map(|(a, b)| dist(a, b)).fold(0.0, f64::max);
        centroids = next;
        if shift < CENTROID_TOL {
            break;
        }
    }
    let membership = Membership { resp: responsibilities(&centroids), k };
    KMeansFit { membership, centroids, iterations }
}

/// Mixture of fully factorized distributions over a scope:
/// `P(x) = Σ_i π_i Π_v P_i(x_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedMixture {
    pub priors: Vec<f64>,
    /// `components[i][j]` is the leaf of component `i` for `scope[j]`.
    pub components: Vec<Vec<LeafDist>>,
    pub scope: Vec<usize>,
}

impl FactorizedMixture {
    pub fn k(&self) -> usize {
        self.priors.len()
    }

    pub fn component_log_density(&self, i: usize, row: &[f64]) -> f64 {
        self.scope
            .iter()
            .zip(&self.components[i])
            .map(|(&v, leaf)| match leaf {
                LeafDist::Multinomial(m) => m.log_prob(row[v] as usize),
                LeafDist::Gaussian(g) => g.log_pdf(row[v]),
            })
            .sum()
    }

    pub fn log_density(&self, row: &[f64]) -> f64 {
        let terms: Vec<f64> =
            (0..self.k()).map(|i| self.priors[i].ln() + self.component_log_density(i, row)).collect();
        log_sum_exp(&terms)
    }

    /// `α·Σ ln θ` over every multinomial parameter: the log of the
    /// Dirichlet(α+1) prior implied by Laplace smoothing, up to a constant.
    fn log_prior(&self, alpha: f64) -> f64 {
        if alpha == 0.0 {
            return 0.0;
        }
        self.components
            .iter()
            .flatten()
            .map(|leaf| match leaf {
                LeafDist::Multinomial(m) => alpha * m.probs().iter().map(|p| p.ln()).sum::<f64>(),
                LeafDist::Gaussian(_) => 0.0,
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub membership: Membership,
    pub mixture: FactorizedMixture,
    /// Weighted train log-likelihood plus the smoothing log-prior after each
    /// iteration. Equals the plain weighted log-likelihood when `alpha = 0`.
    pub trace: Vec<f64>,
}

fn m_step(data: &WeightedDataset, resp: &[Vec<f64>], k: usize, alpha: f64) -> Option<FactorizedMixture> {
    let weights = data.weights();
    let table = data.table();
    let mut masses = vec![0.0; k];
    let mut components = Vec::with_capacity(k);
    for (i, mass) in masses.iter_mut().enumerate() {
        let eff: Vec<f64> = weights.iter().zip(resp).map(|(&w, r)| w * r[i]).collect();
        *mass = eff.iter().sum();
        let mut leaves = Vec::with_capacity(data.scope().len());
        for &var in data.scope() {
            let leaf = match data.schema().var(var).kind {
                VarKind::Categorical { arity } => {
                    let mut counts = vec![0.0; arity];
                    for (&r, &e) in data.rows().iter().zip(&eff) {
                        counts[table.get(r, var) as usize] += e;
                    }
                    LeafDist::Multinomial(multinomial_from_counts(&counts, alpha).ok()?)
                }
                VarKind::Continuous => {
                    let col = WeightedColumn::thresholded(data.column(var), eff.clone(), 0.0).ok()?;
                    LeafDist::Gaussian(fit_gaussian(&col, SIGMA_FLOOR).ok()?)
                }
            };
            leaves.push(leaf);
        }
        components.push(leaves);
    }
    let total: f64 = masses.iter().sum();
    let priors = masses.iter().map(|m| m / total).collect();
    Some(FactorizedMixture { priors, components, scope: data.scope().to_vec() })
}

fn e_step(data: &WeightedDataset, mix: &FactorizedMixture) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let mut resp = Vec::with_capacity(data.len());
    for (&r, &w) in data.rows().iter().zip(data.weights()) {
        let row = data.table().row(r);
        let mut terms: Vec<f64> =
            (0..mix.k()).map(|i| mix.priors[i].ln() + mix.component_log_density(i, row)).collect();
        let lse = log_sum_exp(&terms);
        ll += w * lse;
        if lse == f64::NEG_INFINITY {
            terms.iter_mut().for_each(|t| *t = 1.0 / mix.k() as f64);
        } else {
            terms.iter_mut().for_each(|t| *t = (*t - lse).exp());
        }
        resp.push(terms);
    }
    (resp, ll)
}

/// Weighted EM for a K-component factorized mixture, initialized from a soft
/// k-means pass with the default sharpness.
pub fn em_factorized(data: &WeightedDataset, k: usize, max_iter: usize, tol: f64, seed: u64, alpha: f64) -> EmFit {
    let init = soft_kmeans(data, k, DEFAULT_BETA, max_iter.max(1), seed);
    em_factorized_from(data, &init, max_iter, tol, alpha)
}

/// EM from given initial responsibilities. Each iteration is an M-step
/// followed by an E-step; stops after `max_iter` iterations or when the
/// per-unit-weight objective improves by less than `tol`.
pub fn em_factorized_from(data: &WeightedDataset, init: &Membership, max_iter: usize, tol: f64, alpha: f64) -> EmFit {
    let k = init.k();
    let total_weight = data.total_weight();
    let mut resp = init.resp.clone();
    let mut trace: Vec<f64> = Vec::new();
    let mut mixture = None;
    for _ in 0..max_iter.max(1) {
        let mut mix = m_step(data, &resp, k, alpha).expect("positive total weight");
        for c in 0..k {
            if mix.priors[c] < COLLAPSE_PRIOR {
                // hand the collapsed component the heaviest row among the
                // worst explained ones
                let scores: Vec<f64> = data
                    .rows()
                    .iter()
                    .zip(data.weights())
                    .map(|(&r, &w)| w * (-mix.log_density(data.table().row(r))).exp().min(1e300).ln_1p())
                    .collect();
                let pick = scores
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (j, &s)| if s > b.1 { (j, s) } else { b })
                    .0;
                resp[pick] = (0..k).map(|j| if j == c { 1.0 } else { 0.0 }).collect();
                mix = m_step(data, &resp, k, alpha).expect("positive total weight");
            }
        }
        let (next_resp, ll) = e_step(data, &mix);
        let objective = ll + mix.log_prior(alpha);
        resp = next_resp;
        mixture = Some(mix);
        let converged = trace.last().is_some_and(|&prev| (objective - prev) / total_weight < tol);
        trace.push(objective);
        if converged {
            break;
        }
    }
    EmFit { membership: Membership { resp, k }, mixture: mixture.unwrap(), trace }
}
