//! Classical double lock-in amplifier: mix the input with two orthogonal
//! references and integrate. Serves as an independent oracle for the quantum
//! protocol's extraction chain.

use crate::error::{Error, Result};
use crate::signal::{NoiseModel, SignalTrace, TargetSignal};

/// Integrated mixer outputs `I = int V_s sin(w_m t) dt`,
/// `Q = int V_s cos(w_m t) dt` over `[0, T]`.
#[derive(Clone, Copy, Debug)]
pub struct IQPair {
    pub i: f64,
    pub q: f64,
    pub t_total: f64,
    pub omega_m: f64,
}

/// Composite-Simpson quadrature of `f` sampled uniformly (odd sample count).
fn simpson(values: &[f64], dt: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1);
    let mut acc = values[0] + values[values.len() - 1];
    for (i, v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * dt / 3.0
}

/// Mix a signal (plus optional noise) with the two references and integrate
/// over `[0, T]` on a uniform grid of `samples_per_period` points per signal
/// period. Warns via the returned flag when `T` is under 10 periods.
pub fn mix_and_integrate(
    sig: &TargetSignal,
    noise: &NoiseModel,
    seed: u64,
    omega_m: f64,
    t_total: f64,
    samples_per_period: usize,
) -> Result<(IQPair, bool)> {
    if !(t_total > 0.0) {
        return Err(Error::InvalidInput("integration time must be positive".into()));
    }
    let period = 2.0 * std::f64::consts::PI / sig.omega;
    let short = t_total < 10.0 * period;

    let n_periods = (t_total / period).ceil() as usize;
    let mut n_samples = n_periods * samples_per_period.max(16);
    if n_samples % 2 == 1 {
        n_samples += 1;
    }
    let dt = t_total / n_samples as f64;
    let times: Vec<f64> = (0..=n_samples).map(|k| k as f64 * dt).collect();
    let trace = crate::signal::sample_noise(noise, &times, seed)?;

    let vs: Vec<f64> = times
        .iter()
        .zip(&trace.values)
        .map(|(&t, &nv)| sig.value(t) + sig.amplitude_a * nv)
        .collect();
    let vi: Vec<f64> = times.iter().zip(&vs).map(|(&t, &v)| v * (omega_m * t).sin()).collect();
    let vq: Vec<f64> = times.iter().zip(&vs).map(|(&t, &v)| v * (omega_m * t).cos()).collect();

    Ok((
        IQPair { i: simpson(&vi, dt), q: simpson(&vq, dt), t_total, omega_m },
        short,
    ))
}

/// Integrate a pre-sampled trace against the references (trapezoid on the
/// trace's own grid).
pub fn mix_and_integrate_trace(trace: &SignalTrace, omega_m: f64) -> Result<IQPair> {
    if trace.times.len() < 2 {
        return Err(Error::InvalidInput("trace too short".into()));
    }
    let mut i = 0.0;
    let mut q = 0.0;
    for w in trace.times.windows(2).zip(trace.values.windows(2)) {
        let (ts, vs) = w;
        let dt = ts[1] - ts[0];
        let f0 = vs[0] * (omega_m * ts[0]).sin();
        let f1 = vs[1] * (omega_m * ts[1]).sin();
        i += 0.5 * (f0 + f1) * dt;
        let g0 = vs[0] * (omega_m * ts[0]).cos();
        let g1 = vs[1] * (omega_m * ts[1]).cos();
        q += 0.5 * (g0 + g1) * dt;
    }
    let t_total = trace.times[trace.times.len() - 1] - trace.times[0];
    Ok(IQPair { i, q, t_total, omega_m })
}

/// Recover amplitude and full-quadrant phase at the lock-in point:
/// `A = 2 sqrt(I^2 + Q^2) / T`, `beta = atan2(Q, I)`.
pub fn extract_classical(iq: &IQPair) -> Result<(f64, f64)> {
    if iq.t_total <= 0.0 {
        return Err(Error::InvalidInput("zero integration time".into()));
    }
    let a_hat = 2.0 * (iq.i * iq.i + iq.q * iq.q).sqrt() / iq.t_total;
    let beta_hat = iq.q.atan2(iq.i);
    Ok((a_hat, beta_hat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn in_phase_reference_picks_cos_beta() {
        let omega = 2.0 * PI * 5.0e4;
        let sig = TargetSignal::new(1.0, omega, 0.0).unwrap();
        let t_total = 100.0 * 2.0 * PI / omega;
        let (iq, short) =
            mix_and_integrate(&sig, &NoiseModel::None, 0, omega, t_total, 64).unwrap();
        assert!(!short);
        assert!((iq.i - 0.5 * t_total).abs() < 1.0 / omega, "I = {}", iq.i);
        assert!(iq.q.abs() < 1.0 / omega, "Q = {}", iq.q);
    }

    #[test]
    fn quadrature_reference_picks_sin_beta() {
        let omega = 2.0 * PI * 5.0e4;
        let sig = TargetSignal::new(1.0, omega, PI / 2.0).unwrap();
        let t_total = 100.0 * 2.0 * PI / omega;
        let (iq, _) = mix_and_integrate(&sig, &NoiseModel::None, 0, omega, t_total, 64).unwrap();
        assert!(iq.i.abs() < 1.0 / omega);
        assert!((iq.q - 0.5 * t_total).abs() < 1.0 / omega);
    }

    #[test]
    fn out_of_band_rejection() {
        let omega = 2.0 * PI * 5.0e4;
        let sig = TargetSignal::new(1.0, omega, 0.4).unwrap();
        let t_total = 100.0 * 2.0 * PI / omega;
        let (iq, _) =
            mix_and_integrate(&sig, &NoiseModel::None, 0, 2.0 * omega, t_total, 128).unwrap();
        let bound = 1.0 / (2.0 * omega - omega);
        assert!(iq.i.abs() <= bound, "I = {} bound {bound}", iq.i);
        assert!(iq.q.abs() <= bound);
    }

    #[test]
    fn extract_trivial_cases() {
        let t = 3.0;
        let (a, b) = extract_classical(&IQPair { i: 0.5 * t, q: 0.0, t_total: t, omega_m: 1.0 })
            .unwrap();
        assert!((a - 1.0).abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = extract_classical(&IQPair { i: 0.0, q: 0.5 * t, t_total: t, omega_m: 1.0 })
            .unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_with_negative_beta() {
        let omega = 2.0 * PI * 5.0e4;
        let beta = -PI / 6.0;
        let sig = TargetSignal::new(1.0, omega, beta).unwrap();
        let t_total = 100.0 * 2.0 * PI / omega;
        let (iq, _) = mix_and_integrate(&sig, &NoiseModel::None, 0, omega, t_total, 128).unwrap();
        let (a_hat, beta_hat) = extract_classical(&iq).unwrap();
        assert!((a_hat - 1.0).abs() < 0.01, "a_hat {a_hat}");
        assert!((beta_hat - beta).abs() < 0.01, "beta_hat {beta_hat}");
    }

    #[test]
    fn scale_equivariance() {
        let omega = 2.0 * PI * 1.0e3;
        let t_total = 50.0 * 2.0 * PI / omega;
        let s1 = TargetSignal::new(1.0, omega, 0.7).unwrap();
        let s2 = TargetSignal::new(2.0, omega, 0.7).unwrap();
        let (iq1, _) = mix_and_integrate(&s1, &NoiseModel::None, 0, omega, t_total, 64).unwrap();
        let (iq2, _) = mix_and_integrate(&s2, &NoiseModel::None, 0, omega, t_total, 64).unwrap();
        assert!((iq2.i / iq1.i - 2.0).abs() < 1e-9);
        assert!((iq2.q / iq1.q - 2.0).abs() < 1e-9);
        let (a1, b1) = extract_classical(&iq1).unwrap();
        let (a2, b2) = extract_classical(&iq2).unwrap();
        assert!((a2 / a1 - 2.0).abs() < 1e-9);
        assert!((b1 - b2).abs() < 1e-9);
    }

    #[test]
    fn white_noise_averages_out() {
        let omega = 2.0 * PI * 1.0e3;
        let sig = TargetSignal::new(1.0, omega, 0.0).unwrap();
        let t_total = 200.0 * 2.0 * PI / omega;
        let dt = sig.half_period() / 50.0;
        let noise = NoiseModel::WhiteGaussian { sigma: 10.0, sample_dt: dt };
        let mut sum = 0.0;
        let runs = 100;
        for seed in 0..runs {
            let (iq, _) = mix_and_integrate(&sig, &noise, seed, omega, t_total, 64).unwrap();
            let (a_hat, _) = extract_classical(&iq).unwrap();
            sum += a_hat;
        }
        let mean = sum / runs as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean A over noise = {mean}");
    }
}
