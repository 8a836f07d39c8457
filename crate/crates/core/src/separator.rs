//! EASI separation loop and its optimizers.
//!
//! Every sample goes through the same datapath: `y = B·x`, `g(y)` element-wise, then the
//! relative gradient
//!
//! ```text
//! H = y·yᵀ − I + g(y)·yᵀ − y·g(y)ᵀ
//! ```
//!
//! The separator is always updated multiplicatively, `B ← (I − Δ)·B`. What `Δ` is depends
//! on the optimizer:
//!
//! * [`Optimizer::Sgd`]: `Δ = μ·H`, applied on every sample.
//! * [`Optimizer::MomentumSgd`]: `v ← γ·v + μ·H`, `Δ = v`, applied on every sample.
//! * [`Optimizer::Smbgd`]: sequential mini-batch accumulation. Within a batch of `P`
//!   samples the accumulator chains as `Ĥ ← β·Ĥ + μ·H`; the first sample of a batch
//!   seeds it with `γ·Ĥ_prev + μ·H`, where `Ĥ_prev` is the final accumulator of the
//!   previous batch (zero for the first batch). `B` only changes when a batch completes,
//!   so every sample of a batch sees the same separator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{mat_combine, matmul, matvec, outer, Mat, Scalar, Vector};

/// Entry magnitude of `B` beyond which a run is considered diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    MomentumSgd,
    Smbgd,
}

impl Optimizer {
    pub fn name(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::MomentumSgd => "momentum_sgd",
            Optimizer::Smbgd => "smbgd",
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "sgd" => Ok(Optimizer::Sgd),
            "momentum_sgd" | "momentum" => Ok(Optimizer::MomentumSgd),
            "smbgd" => Ok(Optimizer::Smbgd),
            other => Err(Error::InvalidHyperparameter {
                name: "optimizer",
                reason: format!("unknown optimizer `{other}` (expected sgd, momentum_sgd or smbgd)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    #[default]
    Cubic,
    Tanh,
}

/// Learning-rule settings shared by all optimizers.
///
/// `beta` is only read by SMBGD, `gamma` by SMBGD and momentum SGD, `batch_size` by SMBGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    #[serde(default)]
    pub nonlinearity: Nonlinearity,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            mu: 0.01,
            beta: 0.5,
            gamma: 0.5,
            batch_size: 8,
            optimizer: Optimizer::Smbgd,
            nonlinearity: Nonlinearity::Cubic,
        }
    }
}

impl Hyperparameters {
    pub fn with_optimizer(optimizer: Optimizer) -> Self {
        Self { optimizer, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| Err(Error::InvalidHyperparameter { name, reason: reason.to_string() });
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad("mu", "must be finite and > 0");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("beta", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        Ok(())
    }
}

/// Element-wise nonlinearity `g(y)`.
pub fn apply_nonlinearity<T: Scalar>(y: &Vector<T>, kind: Nonlinearity) -> Vector<T> {
    match kind {
        Nonlinearity::Cubic => y.map(|v| v * v * v),
        Nonlinearity::Tanh => y.map(T::tanh),
    }
}

/// EASI relative gradient `H = y·yᵀ − I + g(y)·yᵀ − y·g(y)ᵀ`.
pub fn relative_gradient<T: Scalar>(y: &Vector<T>, gy: &Vector<T>) -> Result<Mat<T>> {
    if y.len() != gy.len() {
        return Err(Error::len("relative_gradient", y.len(), gy.len()));
    }
    let whitening = whitening_term(y);
    let separation = separation_term(y, gy);
    mat_combine(T::one(), &whitening, T::one(), &separation)
}

/// Symmetric part `y·yᵀ − I`.
pub fn whitening_term<T: Scalar>(y: &Vector<T>) -> Mat<T> {
    let mut m = outer(y, y);
    for i in 0..y.len() {
        m[(i, i)] = m[(i, i)] - T::one();
    }
    m
}

/// Antisymmetric part `g(y)·yᵀ − y·g(y)ᵀ`.
///
/// Each entry is a single rounded difference, so `K[j][i] == -K[i][j]` holds bitwise.
pub fn separation_term<T: Scalar>(y: &Vector<T>, gy: &Vector<T>) -> Mat<T> {
    let n = y.len();
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = gy[i] * y[j] - y[i] * gy[j];
        }
    }
    k
}

/// Output of one [`SeparatorState::step_sample`] call.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult<T = f32> {
    /// Separated output `y = B·x`, computed with the separator before this sample's update.
    pub y: Vector<T>,
    /// Instantaneous relative gradient.
    pub h: Mat<T>,
    /// Whether `B` changed on this sample.
    pub updated: bool,
}

/// Mutable learning state of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatorState<T = f32> {
    /// Separation matrix, `n × m`.
    pub b: Mat<T>,
    /// Working SMBGD accumulator, `n × n`.
    pub h_hat: Mat<T>,
    /// Final accumulator of the previous batch, feeding the γ term.
    pub h_momentum: Mat<T>,
    /// Momentum-SGD velocity, `n × n`.
    pub velocity: Mat<T>,
    /// Sample index within the current batch.
    pub p: usize,
    /// Mini-batch index.
    pub k: usize,
}

impl<T: Scalar> SeparatorState<T> {
    /// Random separator with entries i.i.d. uniform on `[−0.5, 0.5]`.
    pub fn init(n: usize, m: usize, hyper: &Hyperparameters, seed: u64) -> Result<Self> {
        check_dims(n, m)?;
        hyper.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * m).map(|_| T::lit(rng.random_range(-0.5..=0.5))).collect();
        Self::from_matrix(Mat::from_vec(n, m, data)?)
    }

    /// Starts from a given separator with cleared accumulators.
    pub fn from_matrix(b: Mat<T>) -> Result<Self> {
        check_dims(b.rows(), b.cols())?;
        if !b.is_finite() {
            return Err(Error::NonFinite("separator"));
        }
        let n = b.rows();
        Ok(Self { b, h_hat: Mat::zeros(n, n), h_momentum: Mat::zeros(n, n), velocity: Mat::zeros(n, n), p: 0, k: 0 })
    }

    /// Number of separated outputs.
    pub fn n(&self) -> usize {
        self.b.rows()
    }

    /// Number of observed inputs.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn is_diverged(&self) -> bool {
        !self.b.is_finite() || self.b.max_abs().to_f64_lossless() > DIVERGENCE_LIMIT
    }

    fn check_gradient(&self, h: &Mat<T>, op: &'static str) -> Result<()> {
        let n = self.n();
        if h.shape() != (n, n) {
            return Err(Error::shape(op, (n, n), h.shape()));
        }
        Ok(())
    }

    /// `B ← (I − Δ)·B`.
    fn apply_relative_update(&mut self, delta: &Mat<T>) -> Result<()> {
        let step = mat_combine(T::one(), &Mat::identity(self.n()), -T::one(), delta)?;
        self.b = matmul(&step, &self.b)?;
        Ok(())
    }

    /// Folds one instantaneous gradient into the SMBGD accumulator.
    ///
    /// Does not advance `p`; [`step_sample`](Self::step_sample) owns the batch counter.
    pub fn smbgd_accumulate(&mut self, h: &Mat<T>, hyper: &Hyperparameters) -> Result<()> {
        require_optimizer(hyper, Optimizer::Smbgd)?;
        self.check_gradient(h, "smbgd_accumulate")?;
        let mu = T::lit(hyper.mu);
        self.h_hat = if self.p == 0 {
            // The first batch has no predecessor to carry momentum from.
            let carry = if self.k == 0 { T::zero() } else { T::lit(hyper.gamma) };
            mat_combine(carry, &self.h_momentum, mu, h)?
        } else {
            mat_combine(T::lit(hyper.beta), &self.h_hat, mu, h)?
        };
        Ok(())
    }

    /// Closes a batch: `B ← (I − Ĥ)·B`, keeps `Ĥ` for the momentum term, then clears it.
    pub fn commit_batch(&mut self) -> Result<()> {
        let n = self.n();
        let h_hat = std::mem::replace(&mut self.h_hat, Mat::zeros(n, n));
        self.apply_relative_update(&h_hat)?;
        self.h_momentum = h_hat;
        self.p = 0;
        self.k += 1;
        Ok(())
    }

    /// Vanilla EASI step, `B ← (I − μ·H)·B`.
    pub fn sgd_update(&mut self, h: &Mat<T>, hyper: &Hyperparameters) -> Result<()> {
        require_optimizer(hyper, Optimizer::Sgd)?;
        self.check_gradient(h, "sgd_update")?;
        let delta = h.scale(T::lit(hyper.mu));
        self.apply_relative_update(&delta)
    }

    /// `v ← γ·v + μ·H`, `B ← (I − v)·B`.
    pub fn momentum_update(&mut self, h: &Mat<T>, hyper: &Hyperparameters) -> Result<()> {
        require_optimizer(hyper, Optimizer::MomentumSgd)?;
        self.check_gradient(h, "momentum_update")?;
        self.velocity = mat_combine(T::lit(hyper.gamma), &self.velocity, T::lit(hyper.mu), h)?;
        let velocity = self.velocity.clone();
        self.apply_relative_update(&velocity)
    }

    /// Pushes one observation through the separator and the active optimizer.
    pub fn step_sample(&mut self, x: &Vector<T>, hyper: &Hyperparameters) -> Result<SampleResult<T>> {
        if x.len() != self.m() {
            return Err(Error::len("step_sample", self.m(), x.len()));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("observation"));
        }
        let y = matvec(&self.b, x)?;
        let gy = apply_nonlinearity(&y, hyper.nonlinearity);
        let h = relative_gradient(&y, &gy)?;

        let updated = match hyper.optimizer {
            Optimizer::Sgd => {
                self.sgd_update(&h, hyper)?;
                true
            }
            Optimizer::MomentumSgd => {
                self.momentum_update(&h, hyper)?;
                true
            }
            Optimizer::Smbgd => {
                self.smbgd_accumulate(&h, hyper)?;
                if self.p + 1 >= hyper.batch_size {
                    self.commit_batch()?;
                    true
                } else {
                    self.p += 1;
                    false
                }
            }
        };
        Ok(SampleResult { y, h, updated })
    }
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if n == 0 || n > m {
        return Err(Error::InvalidDimensions(format!("separator needs 1 <= n <= m, got n={n}, m={m}")));
    }
    Ok(())
}

fn require_optimizer(hyper: &Hyperparameters, expected: Optimizer) -> Result<()> {
    if hyper.optimizer != expected {
        return Err(Error::InvalidHyperparameter {
            name: "optimizer",
            reason: format!("{} update called with optimizer {}", expected.name(), hyper.optimizer.name()),
        });
    }
    Ok(())
}
