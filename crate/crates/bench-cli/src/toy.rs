//! The two-component Gaussian toy problem and the adversarial first split.
//!
//! Data: equal halves from `N_X(−0.5, 1)·N_Y(−2, 0.2)` and
//! `N_X(0.5, 1)·N_Y(2, 0.2)` (standard deviations). The adversarial root
//! split cuts at X = 0, which is orthogonal to the split that separates the
//! two generating components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use softspn::circuit::{Circuit, Node};
use softspn::clustering::{kmeans_weights, Encoder, Membership};
use softspn::data::{Schema, Table, Variable, WeightedDataset};
use softspn::estimators::LeafDist;
use softspn::learner::{learn_with, FirstSplit, Hyperparams, LearnError, Method, NoOverride};
use std::sync::Arc;

pub const X_MEANS: [f64; 2] = [-0.5, 0.5];
pub const Y_MEANS: [f64; 2] = [-2.0, 2.0];
pub const X_SIGMA: f64 = 1.0;
pub const Y_SIGMA: f64 = 0.2;

/// `n_per` rows from each component; the first half is component 0.
pub fn toy_table(n_per: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per);
    for c in 0..2 {
        for _ in 0..n_per {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            rows.push(vec![X_MEANS[c] + X_SIGMA * zx, Y_MEANS[c] + Y_SIGMA * zy]);
        }
    }
    let schema = Schema::new(vec![Variable::continuous().named("x"), Variable::continuous().named("y")])
        .expect("two continuous variables");
    Table::from_rows(schema, &rows).expect("finite toy rows")
}

/// Hard split at X = 0: label 0 for X < 0.
pub fn hard_x_split(data: &WeightedDataset) -> Membership {
    let labels: Vec<usize> = (0..data.len()).map(|i| usize::from(data.value(i, 0) >= 0.0)).collect();
    Membership::from_labels(&labels, 2)
}

/// Soft version of the same split: the k-means weight function evaluated at
/// the centroids of the two X = 0 halves.
pub fn soft_x_split(data: &WeightedDataset, beta: f64) -> Membership {
    let enc = Encoder::fit(data);
    let points = enc.encode_all(data);
    let mut centroids = vec![vec![0.0; enc.width()]; 2];
    let mut mass = [0.0; 2];
    for (i, p) in points.iter().enumerate() {
        let side = usize::from(data.value(i, 0) >= 0.0);
        let w = data.weights()[i];
        mass[side] += w;
        for (c, x) in centroids[side].iter_mut().zip(p) {
            *c += w * x;
        }
    }
    for (c, m) in centroids.iter_mut().zip(mass) {
        c.iter_mut().for_each(|x| *x /= m);
    }
    let resp = points.iter().map(|p| kmeans_weights(p, &centroids, beta)).collect();
    Membership::new(resp, 2)
}

/// Gaussian leaf parameters of one product node over {X, Y}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPair {
    pub x_mu: f64,
    pub x_sigma: f64,
    pub y_mu: f64,
    pub y_sigma: f64,
}

/// X and Y leaves grouped by their parent product. X leaves without a Y
/// sibling get `NaN` Y entries and vice versa.
pub fn leaf_pairs(c: &Circuit) -> Vec<LeafPair> {
    let gaussian = |id: softspn::NodeId| match c.node(id) {
        Node::Leaf { var, dist: LeafDist::Gaussian(g) } => Some((*var, g.mu(), g.sigma())),
        _ => None,
    };
    let mut out = Vec::new();
    let mut paired = vec![false; c.len()];
    for node in c.nodes() {
        if let Node::Product { children } = node {
            let x = children.iter().find(|&&ch| gaussian(ch).is_some_and(|g| g.0 == 0));
            let y = children.iter().find(|&&ch| gaussian(ch).is_some_and(|g| g.0 == 1));
            if let (Some(&x), Some(&y)) = (x, y) {
                paired[x.0] = true;
                paired[y.0] = true;
                let (_, x_mu, x_sigma) = gaussian(x).unwrap();
                let (_, y_mu, y_sigma) = gaussian(y).unwrap();
                out.push(LeafPair { x_mu, x_sigma, y_mu, y_sigma });
            }
        }
    }
    for (i, _) in c.nodes().iter().enumerate().filter(|(i, _)| !paired[*i]) {
        if let Some((var, mu, sigma)) = gaussian(softspn::NodeId(i)) {
            let nan = f64::NAN;
            out.push(if var == 0 {
                LeafPair { x_mu: mu, x_sigma: sigma, y_mu: nan, y_sigma: nan }
            } else {
                LeafPair { x_mu: nan, x_sigma: nan, y_mu: mu, y_sigma: sigma }
            });
        }
    }
    out
}

/// Mean absolute deviation of X-means from the generating mean of the
/// component indicated by the sibling Y-mean (nearest of ±0.5 when unpaired).
pub fn x_mean_mad(pairs: &[LeafPair]) -> f64 {
    let devs: Vec<f64> = pairs
        .iter()
        .filter(|p| p.x_mu.is_finite())
        .map(|p| {
            if p.y_mu.is_finite() {
                let target = if p.y_mu < 0.0 { X_MEANS[0] } else { X_MEANS[1] };
                (p.x_mu - target).abs()
            } else {
                X_MEANS.iter().map(|t| (p.x_mu - t).abs()).fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    devs.iter().sum::<f64>() / devs.len().max(1) as f64
}

/// Largest distance of a Y-mean from the nearest of ±2.
pub fn y_mean_max_dev(pairs: &[LeafPair]) -> f64 {
    pairs
        .iter()
        .filter(|p| p.y_mu.is_finite())
        .map(|p| Y_MEANS.iter().map(|t| (p.y_mu - t).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ToyRun {
    pub method: Method,
    pub seed: u64,
    pub circuit: Circuit,
    pub pairs: Vec<LeafPair>,
    pub x_mad: f64,
    pub y_max_dev: f64,
}

/// Learns one circuit on fresh toy data, optionally forcing the X = 0 root
/// split (hard for LearnSPN, soft for SoftLearn).
pub fn toy_run(method: Method, n_per: usize, adversarial: bool, seed: u64, hp: &Hyperparams) -> Result<(Table, ToyRun), LearnError> {
    toy_run_with(method, n_per, adversarial, seed, hp, None)
}

/// [`toy_run`] with the soft split's sharpness set apart from `hp.beta`.
pub fn toy_run_with(
    method: Method,
    n_per: usize,
    adversarial: bool,
    seed: u64,
    hp: &Hyperparams,
    split_beta: Option<f64>,
) -> Result<(Table, ToyRun), LearnError> {
    let table = toy_table(n_per, seed);
    let data = WeightedDataset::unit(Arc::new(table.clone()));
    let hp = Hyperparams { seed, ..hp.clone() };
    let beta = split_beta.unwrap_or(hp.beta);
    let learned = if !adversarial {
        learn_with(method, &data, &hp, &mut NoOverride)?
    } else {
        match method {
            Method::Hard => learn_with(method, &data, &hp, &mut FirstSplit(hard_x_split))?,
            Method::Soft => learn_with(method, &data, &hp, &mut FirstSplit(|d: &WeightedDataset| soft_x_split(d, beta)))?,
        }
    };
    let pairs = leaf_pairs(&learned.circuit);
    let run = ToyRun {
        method,
        seed,
        x_mad: x_mean_mad(&pairs),
        y_max_dev: y_mean_max_dev(&pairs),
        pairs,
        circuit: learned.circuit,
    };
    Ok((table, run))
}
