//! PDD and CP pi-pulse trains: pulse positions, the integrated drive phase
//! alpha(t), the square-wave modulation h(t) they imprint on the probe, and
//! their spectral filter functions.
//!
//! Pulse-center positions are the ground truth here: PDD places pulses at
//! j*tau_m (j = 1..n-1), CP at (j - 1/2)*tau_m (j = 1..n). h(t) and alpha(t)
//! are always derived from those positions.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SequenceKind {
    Pdd,
    Cp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PulseShape {
    /// Idealized zero-width pi pulses.
    Delta,
    /// Square pi pulses of width `t_omega` centered on the delta positions;
    /// Rabi rate pi / t_omega inside each window.
    Square { t_omega: f64 },
}

/// An equally spaced pi-pulse train over the interval [0, n * tau_m].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseTrain {
    pub kind: SequenceKind,
    pub tau_m: f64,
    pub n: usize,
    pub shape: PulseShape,
}

impl PulseTrain {
    /// `n` must be even and positive (even pulse-interval counts suppress DC
    /// bias); square pulses must fit inside one spacing.
    pub fn new(kind: SequenceKind, tau_m: f64, n: usize, shape: PulseShape) -> Result<Self> {
        if !(tau_m > 0.0) {
            return Err(Error::InvalidInput(format!("tau_m must be > 0, got {tau_m}")));
        }
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidInput(format!("n must be even and positive, got {n}")));
        }
        if let PulseShape::Square { t_omega } = shape {
            if !(t_omega > 0.0 && t_omega <= tau_m) {
                return Err(Error::InvalidInput(format!(
                    "square pulse width must satisfy 0 < T_Omega <= tau_m, got {t_omega}"
                )));
            }
        }
        Ok(PulseTrain { kind, tau_m, n, shape })
    }

    /// Total evolution time `t_n = n * tau_m`.
    pub fn total_time(&self) -> f64 {
        self.n as f64 * self.tau_m
    }

    /// Number of pi pulses: n-1 for PDD, n for CP.
    pub fn pulse_count(&self) -> usize {
        match self.kind {
            SequenceKind::Pdd => self.n - 1,
            SequenceKind::Cp => self.n,
        }
    }

    /// Center time of pulse `j` (1-based).
    pub fn pulse_center(&self, j: usize) -> f64 {
        match self.kind {
            SequenceKind::Pdd => j as f64 * self.tau_m,
            SequenceKind::Cp => (j as f64 - 0.5) * self.tau_m,
        }
    }

    /// All pulse centers in order.
    pub fn pulse_centers(&self) -> Vec<f64> {
        (1..=self.pulse_count()).map(|j| self.pulse_center(j)).collect()
    }

    /// Number of pulse centers at or before `t`.
    pub fn pulses_by(&self, t: f64) -> usize {
        let raw = match self.kind {
            SequenceKind::Pdd => (t / self.tau_m).floor() as i64,
            SequenceKind::Cp => (t / self.tau_m + 0.5).floor() as i64,
        };
        raw.clamp(0, self.pulse_count() as i64) as usize
    }

    /// Square-wave modulation `h(t) = cos(alpha(t))` = (-1)^(pulses completed
    /// by t). Delta shape only.
    pub fn modulation_h(&self, t: f64) -> i32 {
        if self.pulses_by(t) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Integrated drive phase `alpha(t)`: pi per completed pulse, ramping
    /// linearly at rate pi / T_Omega through each square window.
    pub fn alpha(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Delta => std::f64::consts::PI * self.pulses_by(t) as f64,
            PulseShape::Square { t_omega } => {
                let mut a = 0.0;
                for j in 1..=self.pulse_count() {
                    let c = self.pulse_center(j);
                    let x = (t - (c - 0.5 * t_omega)) / t_omega;
                    a += std::f64::consts::PI * x.clamp(0.0, 1.0);
                }
                a
            }
        }
    }

    /// Segment boundaries of constant h over [0, t_end]: 0, the pulse centers
    /// strictly inside, and t_end.
    pub(crate) fn h_segments(&self, t_end: f64) -> Vec<f64> {
        let mut edges = vec![0.0];
        for j in 1..=self.pulse_count() {
            let c = self.pulse_center(j);
            if c > 0.0 && c < t_end {
                edges.push(c);
            }
        }
        edges.push(t_end);
        edges
    }
}

/// Spectral filter function `|int_0^{t_n} h(t') e^{i w t'} dt'|^2`, evaluated
/// by exact per-segment integration (delta shape).
///
/// Peaks sit at odd harmonics `w_k = k pi / tau_m` (k = 1, 3, 5, ...); even
/// harmonics are suppressed.
pub fn filter_function(train: &PulseTrain, omega: f64) -> f64 {
    let t_n = train.total_time();
    let edges = train.h_segments(t_n);
    let mut acc = C64::default();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = train.modulation_h(0.5 * (a + b)) as f64;
        if omega.abs() * t_n > 1e-9 {
            let ea = C64::new(0.0, omega * a).exp();
            let eb = C64::new(0.0, omega * b).exp();
            acc += h * (eb - ea) / C64::new(0.0, omega);
        } else {
            acc += C64::new(h * (b - a), 0.0);
        }
    }
    acc.norm_sqr()
}
