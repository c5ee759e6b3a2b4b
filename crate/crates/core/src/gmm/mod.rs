//! Diagonal-covariance Gaussian mixtures: density evaluation, k-means++
//! seeding, EM training, per-activity model sets and the model file format.

mod em;
mod io;
mod kmeans;
mod model_set;

use crate::error::{Error, Result};
use crate::scalar::{lit, ln_2pi, LogSumExp, Scalar};

pub use em::{fit_em, EmConfig, EmFit};
pub use io::{read_model, read_model_file, write_model, write_model_file, MODEL_HEADER};
pub use kmeans::kmeans_init;
pub use model_set::{train_activity_models, ActivityModelSet, ComponentCounts, TrainedActivity};

#[derive(Clone, Debug, PartialEq)]
pub struct Component<T> {
    pub weight: T,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

/// Mixture of axis-aligned Gaussians. Construction validates the parameters
/// and precomputes the per-component constants used by [`GmmModel::log_pdf`].
#[derive(Clone, Debug)]
pub struct GmmModel<T> {
    dim: usize,
    components: Vec<Component<T>>,
    log_coef: Vec<T>,
    means: Vec<T>,
    neg_half_precision: Vec<T>,
}

impl<T: PartialEq> PartialEq for GmmModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.components == other.components
    }
}

impl<T: Scalar> GmmModel<T> {
    pub fn new(components: Vec<Component<T>>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidConfig("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidConfig(
                "mixture dimension must be positive".into(),
            ));
        }
        let mut weight_sum = T::zero();
        for (j, c) in components.iter().enumerate() {
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: if c.mean.len() != dim {
                        c.mean.len()
                    } else {
                        c.variance.len()
                    },
                });
            }
            if !(c.weight.is_finite() && c.weight > T::zero()) {
                return Err(Error::InvalidConfig(format!(
                    "component {j} has non-positive weight {}",
                    c.weight
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFinite(format!("component {j} mean")));
            }
            if c.variance
                .iter()
                .any(|v| !(v.is_finite() && *v > T::zero()))
            {
                return Err(Error::InvalidConfig(format!(
                    "component {j} has a non-positive or non-finite variance"
                )));
            }
            weight_sum = weight_sum + c.weight;
        }
        if (weight_sum - T::one()).abs() > T::normalization_tolerance() {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {weight_sum}, expected 1"
            )));
        }

        let half: T = lit(0.5);
        let d: T = lit(dim as f64);
        let log_coef = components
            .iter()
            .map(|c| {
                let log_det: T = c.variance.iter().map(|v| v.ln()).sum();
                c.weight.ln() - half * (d * ln_2pi::<T>() + log_det)
            })
            .collect();
        let means = components
            .iter()
            .flat_map(|c| c.mean.iter().copied())
            .collect();
        let neg_half_precision = components
            .iter()
            .flat_map(|c| c.variance.iter().map(move |v| -half / *v))
            .collect();
        Ok(Self {
            dim,
            components,
            log_coef,
            means,
            neg_half_precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// `ln Σ_j w_j N(x; μ_j, diag σ²_j)`.
    pub fn log_pdf(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(self.log_pdf_unchecked(x))
    }

    /// [`GmmModel::log_pdf`] without the dimension check. `x.len()` must
    /// equal [`GmmModel::dim`].
    #[inline]
    pub fn log_pdf_unchecked(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.dim);
        let mut acc = LogSumExp::default();
        for j in 0..self.components.len() {
            acc.push(self.component_log_density(j, x));
        }
        acc.value()
    }

    /// `ln w_j + ln N(x; μ_j, diag σ²_j)`.
    #[inline]
    pub fn component_log_density(&self, j: usize, x: &[T]) -> T {
        let off = j * self.dim;
        let mu = &self.means[off..off + self.dim];
        let nhp = &self.neg_half_precision[off..off + self.dim];
        let mut quad = T::zero();
        for ((xi, mi), pi) in x.iter().zip(mu).zip(nhp) {
            let diff = *xi - *mi;
            quad = quad + *pi * diff * diff;
        }
        self.log_coef[j] + quad
    }

    pub fn cast<U: Scalar>(&self) -> Result<GmmModel<U>> {
        let conv = |v: &T| U::from(*v).unwrap_or_else(U::nan);
        let components = self
            .components
            .iter()
            .map(|c| Component {
                weight: conv(&c.weight),
                mean: c.mean.iter().map(conv).collect(),
                variance: c.variance.iter().map(conv).collect(),
            })
            .collect::<Vec<_>>();
        let total: U = components.iter().map(|c| c.weight).sum();
        let components = components
            .into_iter()
            .map(|mut c| {
                c.weight = c.weight / total;
                c
            })
            .collect();
        GmmModel::new(components)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard_normal() -> GmmModel<f64> {
        GmmModel::new(vec![Component {
            weight: 1.0,
            mean: vec![0.0],
            variance: vec![1.0],
        }])
        .unwrap()
    }

    #[test]
    fn standard_normal_at_mode() {
        let v = standard_normal().log_pdf(&[0.0]).unwrap();
        assert!((v - (-0.9189385332046727)).abs() < 1e-15);
    }

    #[test]
    fn identical_components_collapse() {
        let mixed = GmmModel::new(vec![
            Component {
                weight: 0.3,
                mean: vec![0.0],
                variance: vec![1.0],
            },
            Component {
                weight: 0.7,
                mean: vec![0.0],
                variance: vec![1.0],
            },
        ])
        .unwrap();
        let single = standard_normal();
        for x in [-2.0, -0.3, 0.0, 1.7, 5.0] {
            let a = mixed.log_pdf(&[x]).unwrap();
            let b = single.log_pdf(&[x]).unwrap();
            assert!((a - b).abs() < 1e-14, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(matches!(
            standard_normal().log_pdf(&[0.0, 1.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn far_points_stay_finite() {
        let v = standard_normal().log_pdf(&[1e6]).unwrap();
        assert!(v.is_finite() && v < -1e11);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad_weight = vec![Component {
            weight: 0.5,
            mean: vec![0.0],
            variance: vec![1.0],
        }];
        assert!(GmmModel::new(bad_weight).is_err());
        let bad_var = vec![Component {
            weight: 1.0,
            mean: vec![0.0],
            variance: vec![0.0],
        }];
        assert!(GmmModel::new(bad_var).is_err());
        assert!(GmmModel::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn f32_agrees_with_f64() {
        let m = GmmModel::new(vec![
            Component {
                weight: 0.25,
                mean: vec![0.1, -0.2],
                variance: vec![0.05, 0.2],
            },
            Component {
                weight: 0.75,
                mean: vec![-0.4, 0.3],
                variance: vec![0.1, 0.01],
            },
        ])
        .unwrap();
        let m32 = m.cast::<f32>().unwrap();
        let a = m.log_pdf(&[0.0, 0.1]).unwrap();
        let b = m32.log_pdf(&[0.0, 0.1]).unwrap() as f64;
        assert!((a - b).abs() < 1e-4);
    }
}
