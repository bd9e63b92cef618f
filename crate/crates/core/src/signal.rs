//! Target AC signal and the stochastic/deterministic noise models that enter
//! the probe Hamiltonian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// The AC signal to be recovered: `S(t) = A sin(w t + beta)`.
///
/// `amplitude_a` carries angular-frequency units (rad/s) — it is the
/// sigma_z coupling strength in the probe Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetSignal {
    pub amplitude_a: f64,
    pub omega: f64,
    pub beta: f64,
}

impl TargetSignal {
    /// Build a signal, normalizing `beta` into [-pi, pi).
    pub fn new(amplitude_a: f64, omega: f64, beta: f64) -> Result<Self> {
        if !(amplitude_a >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "amplitude must be >= 0, got {amplitude_a}"
            )));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidInput(format!("omega must be > 0, got {omega}")));
        }
        let mut b = beta.rem_euclid(std::f64::consts::TAU);
        if b >= std::f64::consts::PI {
            b -= std::f64::consts::TAU;
        }
        Ok(TargetSignal { amplitude_a, omega, beta: b })
    }

    /// Half period `tau = pi / omega` — the lock-in pulse spacing.
    pub fn half_period(&self) -> f64 {
        std::f64::consts::PI / self.omega
    }

    /// `S(t) = A sin(w t + beta)`.
    pub fn value(&self, t: f64) -> f64 {
        self.amplitude_a * (self.omega * t + self.beta).sin()
    }
}

/// Noise entering the probe Hamiltonian alongside the target signal.
///
/// Values are dimensionless relative to the target amplitude: the effective
/// coupling is `A * [sin(w t + beta) + N(t)]`, so `sigma` is the per-sample
/// noise-to-signal amplitude ratio (SNR = 1/sigma).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    None,
    /// Piecewise-constant Gaussian draws held for `sample_dt` each.
    WhiteGaussian { sigma: f64, sample_dt: f64 },
    /// Mains tone `N_n sin(w_ma t + beta_n)`; `phase_beta_n = None` draws the
    /// phase uniformly on [0, 2 pi).
    Mains { amplitude_nn: f64, omega_ma: f64, phase_beta_n: Option<f64> },
}

impl NoiseModel {
    /// Default white-noise sample spacing for a given target: tau / 50.
    pub fn default_sample_dt(sig: &TargetSignal) -> f64 {
        sig.half_period() / 50.0
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::None => Ok(()),
            NoiseModel::WhiteGaussian { sigma, sample_dt } => {
                if !(sigma >= 0.0) {
                    return Err(Error::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
                }
                if !(sample_dt > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "sample_dt must be > 0, got {sample_dt}"
                    )));
                }
                Ok(())
            }
            NoiseModel::Mains { omega_ma, .. } => {
                if !(omega_ma > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "omega_ma must be > 0, got {omega_ma}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// A sampled noise waveform, piecewise constant: `values[k]` holds on
/// `[times[k], times[k+1])` and the last value extends beyond the final edge.
/// Reproducible bit-exactly from `(model, times, seed)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
}

impl SignalTrace {
    /// All-zero trace (no noise).
    pub fn zero() -> Self {
        SignalTrace { times: vec![0.0], values: vec![0.0], seed: 0 }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Value held at time `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&edge| edge <= t) {
            0 => self.values[0],
            k => self.values[k - 1],
        }
    }
}

/// Sample a noise model on the given time grid.
///
/// For `WhiteGaussian` the underlying draws live on the `sample_dt` grid; the
/// returned trace holds the draw of the cell containing each requested time.
pub fn sample_noise(model: &NoiseModel, times: &[f64], seed: u64) -> Result<SignalTrace> {
    model.validate()?;
    if times.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }

    let values = match *model {
        NoiseModel::None => vec![0.0; times.len()],
        NoiseModel::WhiteGaussian { sigma, sample_dt } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let first_cell = (times[0] / sample_dt).floor() as i64;
            let last_cell = (times[times.len() - 1] / sample_dt).floor() as i64;
            let n_cells = (last_cell - first_cell + 1) as usize;
            let draws: Vec<f64> = (0..n_cells)
                .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect();
            times
                .iter()
                .map(|&t| {
                    let cell = ((t / sample_dt).floor() as i64 - first_cell) as usize;
                    draws[cell.min(n_cells - 1)]
                })
                .collect()
        }
        NoiseModel::Mains { amplitude_nn, omega_ma, phase_beta_n } => {
            let beta_n = match phase_beta_n {
                Some(b) => b,
                None => {
                    let mut rng = ChaCha12Rng::seed_from_u64(seed);
                    rng.gen_range(0.0..std::f64::consts::TAU)
                }
            };
            times.iter().map(|&t| amplitude_nn * (omega_ma * t + beta_n).sin()).collect()
        }
    };
    Ok(SignalTrace { times: times.to_vec(), values, seed })
}

/// Uniform white-noise sample grid over `[0, t_end]` for a target signal.
pub fn noise_grid(sample_dt: f64, t_end: f64) -> Vec<f64> {
    let n = (t_end / sample_dt).ceil() as usize;
    (0..=n).map(|k| k as f64 * sample_dt).collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic per-task seed: each scan point / realization gets
/// `split_seed(master, point_index, realization_index)`.
pub fn split_seed(master: u64, point_index: u64, realization_index: u64) -> u64 {
    splitmix64(master ^ splitmix64(point_index ^ splitmix64(realization_index)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn target_value_examples() {
        let s = TargetSignal::new(1.0, PI, 0.0).unwrap();
        assert!((s.value(0.5) - 1.0).abs() < 1e-15);

        let s = TargetSignal::new(2.0, PI, -PI / 6.0).unwrap();
        assert!((s.value(0.0) + 1.0).abs() < 1e-15);

        let s = TargetSignal::new(0.01, PI, PI / 2.0).unwrap();
        assert!((s.value(0.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn beta_normalized() {
        let s = TargetSignal::new(1.0, 1.0, 3.5 * PI).unwrap();
        assert!(s.beta >= -PI && s.beta < PI);
        assert!((s.beta - (-0.5 * PI)).abs() < 1e-12);
    }

    #[test]
    fn none_noise_is_zero() {
        let times: Vec<f64> = (0..10).map(|k| k as f64 * 0.1).collect();
        let tr = sample_noise(&NoiseModel::None, &times, 42).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_gaussian_statistics() {
        let n = 100_000;
        let dt = 1e-3;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let model = NoiseModel::WhiteGaussian { sigma: 100.0, sample_dt: dt };
        let tr = sample_noise(&model, &times, 7).unwrap();
        let mean: f64 = tr.values.iter().sum::<f64>() / n as f64;
        let var: f64 = tr.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        assert!((std - 100.0).abs() / 100.0 < 0.02, "std = {std}");
        // mean within 3 sigma / sqrt(N)
        assert!(mean.abs() < 3.0 * 100.0 / (n as f64).sqrt(), "mean = {mean}");
    }

    #[test]
    fn mains_example() {
        let model =
            NoiseModel::Mains { amplitude_nn: 1.0, omega_ma: 2.0 * PI * 50.0, phase_beta_n: Some(0.0) };
        let tr = sample_noise(&model, &[0.0, 5e-3], 0).unwrap();
        assert!((tr.values[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mains_periodicity() {
        let omega_ma = 2.0 * PI * 50.0;
        let period = 2.0 * PI / omega_ma;
        let model = NoiseModel::Mains { amplitude_nn: 0.7, omega_ma, phase_beta_n: Some(1.1) };
        let times: Vec<f64> = (0..100).map(|k| k as f64 * period / 16.0).collect();
        let tr = sample_noise(&model, &times, 0).unwrap();
        for k in 0..(100 - 16) {
            assert!((tr.values[k] - tr.values[k + 16]).abs() < 1e-9);
        }
    }

    #[test]
    fn determinism() {
        let times: Vec<f64> = (0..5000).map(|k| k as f64 * 2e-4).collect();
        let model = NoiseModel::WhiteGaussian { sigma: 3.0, sample_dt: 1e-3 };
        let a = sample_noise(&model, &times, 123).unwrap();
        let b = sample_noise(&model, &times, 123).unwrap();
        assert_eq!(a, b);
        let c = sample_noise(&model, &times, 124).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn non_monotone_times_rejected() {
        let model = NoiseModel::None;
        assert!(sample_noise(&model, &[0.0, 1.0, 0.5], 0).is_err());
    }

    #[test]
    fn seed_split_distinct() {
        let s = split_seed(9, 0, 0);
        assert_ne!(s, split_seed(9, 1, 0));
        assert_ne!(s, split_seed(9, 0, 1));
        assert_eq!(s, split_seed(9, 0, 0));
    }
}
