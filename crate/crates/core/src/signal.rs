//! Synthetic sources, mixing matrices and non-stationary mixing schedules.
//!
//! Generation runs in `f64`. Stochastic sources are counter-based: the value of source `i`
//! at sample `t` is a pure function of `(seed, i, t)`, so streams can be replayed, sliced
//! or generated in parallel without changing a single bit.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matmul, matvec, Mat, Vector};

/// Upper bound on the condition number of generated mixing matrices.
pub const MAX_CONDITION: f64 = 100.0;

const MAX_MIXING_ATTEMPTS: usize = 10_000;

/// One independent source. Every kind is emitted with zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Uniform on `[−√3, √3]` (sub-Gaussian, excess kurtosis −1.2).
    Uniform,
    /// Laplace with scale `1/√2` (super-Gaussian, excess kurtosis 3).
    Laplace,
    /// `√2·sin(2π·frequency·t + phase)`, frequency in cycles per sample.
    Sinusoid { frequency: f64, phase: f64 },
}

/// How the mixing matrix evolves over time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    #[default]
    Stationary,
    /// `A_t = A·R(θ_t)`, where `R` rotates the source plane `(plane.0, plane.1)` and
    /// `θ_t = rate·(t − start)` for `t ≥ start` (zero before).
    ///
    /// Sign convention: `R[i][i] = R[j][j] = cos θ`, `R[i][j] = −sin θ`, `R[j][i] = sin θ`,
    /// so a quarter turn in plane `(0, 1)` maps `s = [1, 0]` to `[0, 1]`.
    Rotating {
        rate: f64,
        plane: (usize, usize),
        #[serde(default)]
        start: u64,
    },
}

impl Schedule {
    pub fn angle(&self, t: u64) -> f64 {
        match *self {
            Schedule::Stationary => 0.0,
            Schedule::Rotating { rate, start, .. } => rate * t.saturating_sub(start) as f64,
        }
    }
}

/// Ground-truth generative model `x_t = A_t·s_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel {
    a: Mat<f64>,
    sources: Vec<SourceSpec>,
    schedule: Schedule,
}

/// One generated observation together with the ground truth behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixed {
    pub x: Vector<f64>,
    pub s: Vector<f64>,
    pub a_t: Mat<f64>,
}

impl MixingModel {
    pub fn new(a: Mat<f64>, sources: Vec<SourceSpec>, schedule: Schedule) -> Result<Self> {
        let (m, n) = a.shape();
        if sources.len() != n {
            return Err(Error::len("MixingModel::new (sources vs mixing columns)", n, sources.len()));
        }
        if m < n {
            return Err(Error::InvalidDimensions(format!("mixing needs m >= n, got m={m}, n={n}")));
        }
        let cond = condition_number(&a);
        if cond.is_nan() || cond > MAX_CONDITION {
            return Err(Error::InvalidDimensions(format!("mixing condition number {cond:.3} exceeds {MAX_CONDITION}")));
        }
        for spec in &sources {
            if let SourceSpec::Sinusoid { frequency, phase } = spec {
                if !frequency.is_finite() || !phase.is_finite() {
                    return Err(Error::NonFinite("sinusoid parameters"));
                }
            }
        }
        if let Schedule::Rotating { rate, plane: (i, j), .. } = schedule {
            if !rate.is_finite() {
                return Err(Error::NonFinite("rotation rate"));
            }
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidDimensions(format!(
                    "rotation plane ({i}, {j}) must be two distinct indices below {n}"
                )));
            }
        }
        Ok(Self { a, sources, schedule })
    }

    /// Random well-conditioned `m × n` mixing of the given sources.
    pub fn random(m: usize, sources: Vec<SourceSpec>, schedule: Schedule, seed: u64) -> Result<Self> {
        let a = build_mixing(m, sources.len(), seed)?;
        Self::new(a, sources, schedule)
    }

    pub fn a(&self) -> &Mat<f64> {
        &self.a
    }

    pub fn sources(&self) -> &[SourceSpec] {
        &self.sources
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// Mixing matrix in effect at sample `t`.
    pub fn mixing_at(&self, t: u64) -> Mat<f64> {
        match self.schedule {
            Schedule::Stationary => self.a.clone(),
            Schedule::Rotating { plane: (i, j), .. } => {
                let theta = self.schedule.angle(t);
                if theta == 0.0 {
                    return self.a.clone();
                }
                let mut r = Mat::identity(self.n());
                let (sin, cos) = theta.sin_cos();
                r[(i, i)] = cos;
                r[(j, j)] = cos;
                r[(i, j)] = -sin;
                r[(j, i)] = sin;
                matmul(&self.a, &r).expect("rotation is n x n")
            }
        }
    }

    /// Observation at sample `t`.
    pub fn mix(&self, t: u64, seed: u64) -> Mixed {
        let s = draw_sources(&self.sources, t, seed);
        self.mix_sources(t, s)
    }

    fn mix_sources(&self, t: u64, s: Vector<f64>) -> Mixed {
        let a_t = self.mixing_at(t);
        let x = matvec(&a_t, &s).expect("sources match mixing columns");
        Mixed { x, s, a_t }
    }

    /// Sequential sample iterator starting at `t = 0`.
    pub fn stream(&self, seed: u64) -> MixtureStream<'_> {
        MixtureStream { model: self, sources: SourceStream::new(&self.sources, seed), t: 0 }
    }
}

/// Iterator over `(t, Mixed)` produced by [`MixingModel::stream`].
pub struct MixtureStream<'a> {
    model: &'a MixingModel,
    sources: SourceStream,
    t: u64,
}

impl Iterator for MixtureStream<'_> {
    type Item = (u64, Mixed);

    fn next(&mut self) -> Option<Self::Item> {
        let t = self.t;
        self.t += 1;
        let s = self.sources.sample(t);
        Some((t, self.model.mix_sources(t, s)))
    }
}

/// Counter-based source generator with one ChaCha stream per source.
///
/// Sequential access reuses the generator state; any other access pattern seeks to the
/// position of sample `t`. Both paths yield identical values.
#[derive(Debug, Clone)]
pub struct SourceStream {
    specs: Vec<SourceSpec>,
    rngs: Vec<ChaCha8Rng>,
    next_t: Option<u64>,
}

// Each sample consumes one u64, i.e. two 32-bit words of the stream.
const WORDS_PER_SAMPLE: u128 = 2;

impl SourceStream {
    pub fn new(specs: &[SourceSpec], seed: u64) -> Self {
        let rngs = (0..specs.len())
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        Self { specs: specs.to_vec(), rngs, next_t: Some(0) }
    }

    pub fn sample(&mut self, t: u64) -> Vector<f64> {
        if self.next_t != Some(t) {
            for rng in &mut self.rngs {
                rng.set_word_pos(t as u128 * WORDS_PER_SAMPLE);
            }
        }
        self.next_t = t.checked_add(1);
        let data = self
            .specs
            .iter()
            .zip(&mut self.rngs)
            .map(|(spec, rng)| match *spec {
                SourceSpec::Uniform => {
                    let u: f64 = rng.sample(Open01);
                    3f64.sqrt() * (2.0 * u - 1.0)
                }
                SourceSpec::Laplace => {
                    let u: f64 = rng.sample(Open01);
                    let c = u - 0.5;
                    -c.signum() * std::f64::consts::FRAC_1_SQRT_2 * (1.0 - 2.0 * c.abs()).ln()
                }
                SourceSpec::Sinusoid { frequency, phase } => {
                    // Keep the word position aligned with stochastic sources.
                    rng.next_u64();
                    std::f64::consts::SQRT_2 * (std::f64::consts::TAU * frequency * t as f64 + phase).sin()
                }
            })
            .collect();
        Vector::from_vec(data).expect("at least one finite source")
    }
}

/// One sample of every source at index `t`.
pub fn draw_sources(specs: &[SourceSpec], t: u64, seed: u64) -> Vector<f64> {
    let mut stream = SourceStream::new(specs, seed);
    stream.sample(t)
}

/// Random `m × n` mixing matrix, entries uniform on `[−1, 1]`, redrawn until its condition
/// number is at most [`MAX_CONDITION`].
pub fn build_mixing(m: usize, n: usize, seed: u64) -> Result<Mat<f64>> {
    if n == 0 || m < n {
        return Err(Error::InvalidDimensions(format!("mixing needs m >= n >= 1, got m={m}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_MIXING_ATTEMPTS {
        let data = (0..m * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let a = Mat::from_vec(m, n, data)?;
        if condition_number(&a) <= MAX_CONDITION {
            return Ok(a);
        }
    }
    Err(Error::InvalidDimensions(format!(
        "no {m}x{n} mixing with condition number <= {MAX_CONDITION} after {MAX_MIXING_ATTEMPTS} draws"
    )))
}

/// Ratio of largest to smallest singular value, via the eigenvalues of `AᵀA`.
/// Rank-deficient matrices report infinity.
pub fn condition_number(a: &Mat<f64>) -> f64 {
    let dm = DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice());
    let gram = dm.transpose() * &dm;
    let eig = gram.symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 {
        return f64::INFINITY;
    }
    (max / min).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mixing_is_deterministic_and_conditioned() {
        let a = build_mixing(4, 2, 42).unwrap();
        assert_eq!(a, build_mixing(4, 2, 42).unwrap());
        assert_ne!(a, build_mixing(4, 2, 43).unwrap());
        assert_eq!(a.shape(), (4, 2));
        assert!(condition_number(&a) <= MAX_CONDITION);
        assert!(a.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn mixing_rejects_m_below_n() {
        assert!(matches!(build_mixing(1, 2, 0), Err(Error::InvalidDimensions(_))));
        assert!(build_mixing(3, 0, 0).is_err());
    }

    #[test]
    fn model_validation() {
        let a = Mat::identity(2);
        let two = vec![SourceSpec::Uniform; 2];
        assert!(MixingModel::new(a.clone(), vec![SourceSpec::Uniform], Schedule::Stationary).is_err());
        let bad_plane = Schedule::Rotating { rate: 0.1, plane: (0, 2), start: 0 };
        assert!(MixingModel::new(a.clone(), two.clone(), bad_plane).is_err());
        let same_plane = Schedule::Rotating { rate: 0.1, plane: (1, 1), start: 0 };
        assert!(MixingModel::new(a.clone(), two.clone(), same_plane).is_err());
        let singular = Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(MixingModel::new(singular, two.clone(), Schedule::Stationary).is_err());
        assert!(MixingModel::new(a, two, Schedule::Stationary).is_ok());
    }

    #[test]
    fn sinusoid_quarter_frequency() {
        let spec = [SourceSpec::Sinusoid { frequency: 0.25, phase: 0.0 }];
        let vals: Vec<f64> = (0..4).map(|t| draw_sources(&spec, t, 0)[0]).collect();
        let a = 2f64.sqrt();
        for (got, want) in vals.iter().zip([0.0, a, 0.0, -a]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_access_matches_sequential() {
        let specs = [SourceSpec::Uniform, SourceSpec::Laplace, SourceSpec::Sinusoid { frequency: 0.01, phase: 0.3 }];
        let mut stream = SourceStream::new(&specs, 99);
        let sequential: Vec<_> = (0..50).map(|t| stream.sample(t)).collect();
        for t in [49u64, 0, 17, 3, 4, 5] {
            assert_eq!(draw_sources(&specs, t, 99), sequential[t as usize]);
        }
    }

    #[test]
    fn stationary_identity_mix() {
        let model = MixingModel::new(Mat::identity(2), vec![SourceSpec::Uniform; 2], Schedule::Stationary).unwrap();
        let mixed = model.mix(5, 1);
        assert_eq!(mixed.x, mixed.s);
        assert_eq!(mixed.a_t, Mat::identity(2));
    }

    #[test]
    fn zero_rate_rotation_is_stationary() {
        let a = build_mixing(4, 2, 3).unwrap();
        let specs = vec![SourceSpec::Uniform; 2];
        let still = MixingModel::new(a.clone(), specs.clone(), Schedule::Stationary).unwrap();
        let rot = MixingModel::new(a, specs, Schedule::Rotating { rate: 0.0, plane: (0, 1), start: 0 }).unwrap();
        for t in [0u64, 1, 1000] {
            assert_eq!(still.mix(t, 8), rot.mix(t, 8));
        }
    }

    #[test]
    fn quarter_turn_rotation() {
        let rate = std::f64::consts::FRAC_PI_2;
        let sched = Schedule::Rotating { rate, plane: (0, 1), start: 0 };
        let model = MixingModel::new(Mat::identity(2), vec![SourceSpec::Uniform; 2], sched).unwrap();
        let a_t = model.mixing_at(1);
        let s = Vector::from_vec(vec![1.0, 0.0]).unwrap();
        let x = matvec(&a_t, &s).unwrap();
        assert_abs_diff_eq!(x[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_waits_for_start() {
        let sched = Schedule::Rotating { rate: 0.5, plane: (0, 1), start: 10 };
        assert_eq!(sched.angle(3), 0.0);
        assert_eq!(sched.angle(10), 0.0);
        assert_eq!(sched.angle(12), 1.0);
    }
}
