#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rapidhare::{ActivityLabel, ActivityModelSet, Component, FrameMatrix, GmmModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_gmm(
    rng: &mut ChaCha8Rng,
    k: usize,
    dim: usize,
    var_range: (f64, f64),
) -> GmmModel<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    GmmModel::new(
        raw.iter()
            .map(|w| Component {
                weight: w / total,
                mean: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                variance: (0..dim)
                    .map(|_| rng.random_range(var_range.0..var_range.1))
                    .collect(),
            })
            .collect(),
    )
    .unwrap()
}

/// First `n` activities, each with `k` random components.
pub fn random_models(
    rng: &mut ChaCha8Rng,
    n: usize,
    k: usize,
    dim: usize,
) -> ActivityModelSet<f64> {
    ActivityModelSet::new(
        ActivityLabel::ALL[..n]
            .iter()
            .map(|l| (*l, random_gmm(rng, k, dim, (0.05, 1.0))))
            .collect(),
    )
    .unwrap()
}

pub fn uniform_frames(rng: &mut ChaCha8Rng, dim: usize, len: usize) -> FrameMatrix<f64> {
    FrameMatrix::from_flat(
        dim,
        (0..dim * len)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Blocky label sequence with random run lengths in `1..=max_run`.
pub fn random_runs(
    rng: &mut ChaCha8Rng,
    len: usize,
    n_labels: usize,
    max_run: usize,
) -> Vec<ActivityLabel> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let label = ActivityLabel::ALL[rng.random_range(0..n_labels)];
        let run = rng.random_range(1..=max_run).min(len - out.len());
        out.extend(std::iter::repeat_n(label, run));
    }
    out
}

/// Double-double arithmetic for the density oracle: a value is `hi + lo`
/// with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn norm(hi: f64, lo: f64) -> Self {
        let (h, l) = two_sum(hi, lo);
        Self { hi: h, lo: l }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        Dd::norm(s, e + self.lo + o.lo)
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        Dd::norm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn div(self, o: Dd) -> Dd {
        let q = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::new(q)));
        Dd::norm(q, r.hi / o.hi)
    }

    pub fn sqrt(self) -> Dd {
        let s = self.hi.sqrt();
        let r = self.sub(Dd::new(s).mul(Dd::new(s)));
        Dd::norm(s, r.hi / (2.0 * s))
    }

    /// `exp` with first-order correction for the low word.
    pub fn exp(self) -> Dd {
        let e = self.hi.exp();
        Dd::new(e).mul(Dd::new(1.0).add(Dd::new(self.lo)))
    }

    /// `ln` with first-order correction for the low word.
    pub fn ln(self) -> Dd {
        Dd::norm(self.hi.ln(), self.lo / self.hi)
    }
}

/// `ln Σ_j w_j N(x; μ_j, σ_j²)` by direct summation of the densities,
/// carried in double-double. Independent of the log-sum-exp path.
pub fn log_pdf_oracle(model: &GmmModel<f64>, x: &[f64]) -> f64 {
    let two_pi = Dd::norm(std::f64::consts::TAU, 2.4492935982947064e-16);
    let mut total = Dd::new(0.0);
    for c in model.components() {
        let mut coef = Dd::new(c.weight);
        let mut q = Dd::new(0.0);
        for ((xi, mu), var) in x.iter().zip(&c.mean).zip(&c.variance) {
            let v = Dd::new(*var);
            coef = coef.div(two_pi.mul(v).sqrt());
            let diff = Dd::new(*xi).sub(Dd::new(*mu));
            q = q.add(diff.mul(diff).div(v));
        }
        let half = Dd::new(-0.5).mul(q);
        total = total.add(coef.mul(half.exp()));
    }
    let l = total.ln();
    l.hi + l.lo
}
