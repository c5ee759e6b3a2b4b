use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Component, GmmModel};
use crate::data::Frames;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

const MAX_LLOYD_ITERS: usize = 100;

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y))
}

fn nearest<T: Scalar>(x: &[T], centroids: &[T], dim: usize) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, mu) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(x, mu);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<T: Scalar>(data: Frames<'_, T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = data.len();
    let dim = data.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(data.row(rng.random_range(0..n)));
    let mut min_d2: Vec<f64> = data
        .rows()
        .map(|x| sq_dist(x, &centroids[..dim]).to_f64().unwrap_or(0.0))
        .collect();
    for _ in 1..k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 && total.is_finite() {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, d) in min_d2.iter().enumerate() {
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let new_centroid = data.row(pick);
        centroids.extend_from_slice(new_centroid);
        for (d2, x) in min_d2.iter_mut().zip(data.rows()) {
            let d = sq_dist(x, new_centroid).to_f64().unwrap_or(0.0);
            if d < *d2 {
                *d2 = d;
            }
        }
    }
    centroids
}

/// Moves the farthest point of a multi-member cluster into each empty cluster.
/// Returns whether anything changed.
fn reseed_empty<T: Scalar>(
    data: Frames<'_, T>,
    assign: &mut [usize],
    centroids: &mut [T],
    counts: &mut [usize],
) -> bool {
    let dim = data.dim();
    let mut changed = false;
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, x) in data.rows().enumerate() {
            let c = assign[i];
            if counts[c] < 2 {
                continue;
            }
            let d = sq_dist(x, &centroids[c * dim..(c + 1) * dim]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= n leaves a multi-member cluster");
        counts[assign[i]] -= 1;
        assign[i] = empty;
        counts[empty] = 1;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(data.row(i));
        changed = true;
    }
    changed
}

/// k-means++ seeding then Lloyd iterations; the clustering becomes a mixture
/// with cluster fractions as weights and floored within-cluster variances.
pub fn kmeans_init<T: Scalar>(
    data: Frames<'_, T>,
    k: usize,
    seed: u64,
    variance_floor: T,
) -> Result<GmmModel<T>> {
    let n = data.len();
    let dim = data.dim();
    if k == 0 {
        return Err(Error::InvalidConfig(
            "number of clusters must be positive".into(),
        ));
    }
    if k > n {
        return Err(Error::InsufficientData(format!(
            "{k} clusters requested from {n} rows"
        )));
    }
    if data.as_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(data, k, &mut rng);
    let mut assign = vec![usize::MAX; n];
    let mut counts = vec![0usize; k];

    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, x) in data.rows().enumerate() {
            let (c, _) = nearest(x, &centroids, dim);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
            counts[c] += 1;
        }
        changed |= reseed_empty(data, &mut assign, &mut centroids, &mut counts);
        if !changed {
            break;
        }
        centroids.iter_mut().for_each(|v| *v = T::zero());
        for (i, x) in data.rows().enumerate() {
            let mu = &mut centroids[assign[i] * dim..(assign[i] + 1) * dim];
            mu.iter_mut().zip(x).for_each(|(m, v)| *m = *m + *v);
        }
        for (c, mu) in centroids.chunks_exact_mut(dim).enumerate() {
            let inv: T = lit::<T>(1.0) / lit(counts[c] as f64);
            mu.iter_mut().for_each(|m| *m = *m * inv);
        }
    }

    let mut variances = vec![T::zero(); k * dim];
    for (i, x) in data.rows().enumerate() {
        let c = assign[i];
        let mu = &centroids[c * dim..(c + 1) * dim];
        let var = &mut variances[c * dim..(c + 1) * dim];
        for ((v, xi), mi) in var.iter_mut().zip(x).zip(mu) {
            *v = *v + (*xi - *mi) * (*xi - *mi);
        }
    }
    let n_t: T = lit(n as f64);
    let components = (0..k)
        .map(|c| {
            let count: T = lit(counts[c] as f64);
            Component {
                weight: count / n_t,
                mean: centroids[c * dim..(c + 1) * dim].to_vec(),
                variance: variances[c * dim..(c + 1) * dim]
                    .iter()
                    .map(|v| (*v / count).max(variance_floor))
                    .collect(),
            }
        })
        .collect::<Vec<_>>();
    GmmModel::new(renormalized(components))
}

pub(super) fn renormalized<T: Scalar>(mut components: Vec<Component<T>>) -> Vec<Component<T>> {
    let total: T = components.iter().map(|c| c.weight).sum();
    components
        .iter_mut()
        .for_each(|c| c.weight = c.weight / total);
    components
}
