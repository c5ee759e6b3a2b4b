use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kmeans::{kmeans_init, renormalized};
use super::{Component, GmmModel};
use crate::data::Frames;
use crate::error::{Error, Result};
use crate::scalar::{lit, log_sum_exp, Scalar};

/// Components whose responsibility mass drops below this fraction of the
/// data are re-seeded on a random point.
const DEAD_COMPONENT_FRACTION: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the relative log-likelihood improvement falls below this.
    pub tol: f64,
    pub seed: u64,
    pub variance_floor: f64,
    /// Independent k-means++ starts; the best final log-likelihood wins.
    pub n_init_restarts: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
            variance_floor: 1e-6,
            n_init_restarts: 1,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || self.n_init_restarts == 0 {
            return Err(Error::InvalidConfig(
                "max_iters and n_init_restarts must be positive".into(),
            ));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "variance_floor must be positive, got {}",
                self.variance_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EmFit<T> {
    pub model: GmmModel<T>,
    /// Total training log-likelihood of `model`.
    pub final_loglik: T,
    /// Total log-likelihood evaluated at the start of every iteration.
    pub loglik_trace: Vec<T>,
    pub converged: bool,
}

/// Fits a `k`-component diagonal mixture by EM from a k-means++ start.
pub fn fit_em<T: Scalar>(data: Frames<'_, T>, k: usize, cfg: &EmConfig) -> Result<EmFit<T>> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig(
            "number of components must be positive".into(),
        ));
    }
    if k > data.len() {
        return Err(Error::InsufficientData(format!(
            "{k} components requested from {} rows",
            data.len()
        )));
    }
    if data.as_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("EM training data".into()));
    }
    let mut best: Option<EmFit<T>> = None;
    for restart in 0..cfg.n_init_restarts {
        let seed = cfg
            .seed
            .wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let fit = fit_single(data, k, cfg, seed)?;
        if best
            .as_ref()
            .is_none_or(|b| fit.final_loglik > b.final_loglik)
        {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn fit_single<T: Scalar>(
    data: Frames<'_, T>,
    k: usize,
    cfg: &EmConfig,
    seed: u64,
) -> Result<EmFit<T>> {
    let floor: T = lit(cfg.variance_floor);
    let tol: T = lit(cfg.tol);
    let mut model = kmeans_init(data, k, seed, floor)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_5EED);
    let mut resp = vec![T::zero(); data.len() * k];
    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    loop {
        let ll = e_step(&model, data, &mut resp);
        if !ll.is_finite() {
            return Err(Error::Numeric(format!(
                "training log-likelihood became {ll} at iteration {}",
                trace.len()
            )));
        }
        if let Some(&prev) = trace.last() {
            if ll - prev <= tol * prev.abs() {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        if trace.len() >= cfg.max_iters {
            break;
        }
        model = m_step(data, &resp, k, floor, &mut rng)?;
    }
    let final_loglik = *trace.last().expect("at least one iteration");
    Ok(EmFit {
        model,
        final_loglik,
        loglik_trace: trace,
        converged,
    })
}

/// Fills `resp` (row-major `n x k`) with posterior responsibilities and
/// returns the total log-likelihood.
fn e_step<T: Scalar>(model: &GmmModel<T>, data: Frames<'_, T>, resp: &mut [T]) -> T {
    let k = model.n_components();
    let mut total = T::zero();
    for (x, r) in data.rows().zip(resp.chunks_exact_mut(k)) {
        for (j, rj) in r.iter_mut().enumerate() {
            *rj = model.component_log_density(j, x);
        }
        let lse = log_sum_exp(r);
        r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        total = total + lse;
    }
    total
}

fn m_step<T: Scalar>(
    data: Frames<'_, T>,
    resp: &[T],
    k: usize,
    floor: T,
    rng: &mut ChaCha8Rng,
) -> Result<GmmModel<T>> {
    let n = data.len();
    let dim = data.dim();
    let mut mass = vec![T::zero(); k];
    let mut means = vec![T::zero(); k * dim];
    for (x, r) in data.rows().zip(resp.chunks_exact(k)) {
        for j in 0..k {
            mass[j] = mass[j] + r[j];
            let mu = &mut means[j * dim..(j + 1) * dim];
            mu.iter_mut().zip(x).for_each(|(m, v)| *m = *m + r[j] * *v);
        }
    }
    let dead: T = lit(DEAD_COMPONENT_FRACTION * n as f64);
    let alive: Vec<bool> = mass.iter().map(|m| *m >= dead).collect();
    for j in 0..k {
        let mu = &mut means[j * dim..(j + 1) * dim];
        if alive[j] {
            let inv = T::one() / mass[j];
            mu.iter_mut().for_each(|m| *m = *m * inv);
        } else {
            mu.copy_from_slice(data.row(rng.random_range(0..n)));
        }
    }
    let mut vars = vec![T::zero(); k * dim];
    for (x, r) in data.rows().zip(resp.chunks_exact(k)) {
        for j in (0..k).filter(|&j| alive[j]) {
            let mu = &means[j * dim..(j + 1) * dim];
            let var = &mut vars[j * dim..(j + 1) * dim];
            for ((v, xi), mi) in var.iter_mut().zip(x).zip(mu) {
                let d = *xi - *mi;
                *v = *v + r[j] * d * d;
            }
        }
    }
    let n_t: T = lit(n as f64);
    let components = (0..k)
        .map(|j| {
            let (weight, variance) = if alive[j] {
                let inv = T::one() / mass[j];
                (
                    mass[j] / n_t,
                    vars[j * dim..(j + 1) * dim]
                        .iter()
                        .map(|v| (*v * inv).max(floor))
                        .collect(),
                )
            } else {
                (T::one() / n_t, vec![floor; dim])
            };
            Component {
                weight,
                mean: means[j * dim..(j + 1) * dim].to_vec(),
                variance,
            }
        })
        .collect();
    GmmModel::new(renormalized(components))
}
