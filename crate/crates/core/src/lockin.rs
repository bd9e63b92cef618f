//! Combining the two channels' measurement records, locating the lock-in
//! point (pattern symmetry in the weak regime, spectral localization in the
//! strong regime), and recovering (omega, A, |beta|).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanAxis {
    TauMScan,
    NScan,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordRegime {
    /// Weak signals: populations P_up in [0, 1].
    WeakPUp,
    /// Strong signals: sigma_z expectations in [-1, 1].
    StrongPz,
}

/// Per-channel measurement series over a scan axis.
#[derive(Clone, Debug)]
pub struct MeasurementRecord {
    pub axis: ScanAxis,
    pub abscissa: Vec<f64>,
    pub p_pdd: Vec<f64>,
    pub p_cp: Vec<f64>,
    pub regime: RecordRegime,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<()> {
        if self.abscissa.len() != self.p_pdd.len() || self.abscissa.len() != self.p_cp.len() {
            return Err(Error::InvalidInput("record arrays must have equal length".into()));
        }
        Ok(())
    }
}

/// Weak-regime combination `P_up^PDD + P_up^CP` — symmetric about the
/// lock-in point while the single channels are not.
pub fn weak_combined(rec: &MeasurementRecord) -> Result<Vec<f64>> {
    rec.validate()?;
    if rec.regime != RecordRegime::WeakPUp {
        return Err(Error::RegimeMismatch {
            expected: "weak_Pup".into(),
            got: format!("{:?}", rec.regime),
        });
    }
    Ok(rec.p_pdd.iter().zip(&rec.p_cp).map(|(a, b)| a + b).collect())
}

/// Strong-regime combination `P_z^PDD + P_z^CP = -[cos(phi_pdd) + cos(phi_cp)]`.
pub fn strong_combined(rec: &MeasurementRecord) -> Result<Vec<f64>> {
    rec.validate()?;
    if rec.regime != RecordRegime::StrongPz {
        return Err(Error::RegimeMismatch {
            expected: "strong_Pz".into(),
            got: format!("{:?}", rec.regime),
        });
    }
    Ok(rec.p_pdd.iter().zip(&rec.p_cp).map(|(a, b)| a + b).collect())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 1.0;
    }
    num / (va * vb).sqrt()
}

/// Locate the weak-regime lock-in point on a uniform tau_m grid.
///
/// `tau_hat` is the argmax of the combined curve; the symmetry score is the
/// Pearson correlation of the curve with its mirror about the peak (score
/// >= 0.99 accepts). `pulse_n` sizes the main lobe (full width
/// `4 pi / (n omega_hat)`) for the grid-resolution check.
pub fn locate_lock_in_weak(
    tau_grid: &[f64],
    p_sum: &[f64],
    pulse_n: usize,
) -> Result<(f64, f64)> {
    if tau_grid.len() != p_sum.len() || tau_grid.len() < 3 {
        return Err(Error::InvalidInput("grid and curve must match, length >= 3".into()));
    }
    let step = tau_grid[1] - tau_grid[0];
    if tau_grid.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step) {
        return Err(Error::InvalidInput("tau_m grid must be uniform".into()));
    }

    let imax = p_sum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let tau_hat = tau_grid[imax];

    let omega_hat = std::f64::consts::PI / tau_hat;
    let lobe_width = 4.0 * std::f64::consts::PI / (pulse_n as f64 * omega_hat);
    let points_under_lobe = (lobe_width / step).floor() as usize;
    if points_under_lobe < 8 {
        return Err(Error::Resolution { points_under_lobe });
    }

    // mirror about the peak over the symmetric overlap
    let half = imax.min(p_sum.len() - 1 - imax);
    let seg = &p_sum[imax - half..=imax + half];
    let mirrored: Vec<f64> = seg.iter().rev().copied().collect();
    let score = pearson(seg, &mirrored);
    Ok((tau_hat, score))
}

/// Weak-regime amplitude and |beta| from an accepted lock-in.
///
/// The combined curve follows `(A/w)^2 [sin(n x)/sin(x)]^2` with
/// `x = w (tau_m - tau)/2`, linear in `A^2`, so the least-squares amplitude
/// is solved directly; `|beta|` then comes from inverting the PDD channel at
/// the lock-in point via `cos(beta) = w phi_pdd / (2 n A)`.
pub fn fit_weak(
    rec: &MeasurementRecord,
    p_sum: &[f64],
    tau_hat: f64,
    pulse_n: usize,
) -> Result<(f64, f64)> {
    rec.validate()?;
    if rec.regime != RecordRegime::WeakPUp {
        return Err(Error::RegimeMismatch {
            expected: "weak_Pup".into(),
            got: format!("{:?}", rec.regime),
        });
    }
    let omega_hat = std::f64::consts::PI / tau_hat;
    let nf = pulse_n as f64;

    let mut num = 0.0;
    let mut den = 0.0;
    for (&tau_m, &p) in rec.abscissa.iter().zip(p_sum) {
        let x = omega_hat * (tau_m - tau_hat) / 2.0;
        let s = x.sin();
        let ratio = if s.abs() < 1e-8 { nf } else { (nf * x).sin() / s };
        let g = (ratio / omega_hat) * (ratio / omega_hat);
        num += p * g;
        den += g * g;
    }
    if den <= 0.0 || num <= 0.0 {
        return Err(Error::FitDivergence { residual: f64::INFINITY });
    }
    let a_sq = num / den;
    let a_hat = a_sq.sqrt();

    // residual sanity: reject fits that explain nothing
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mean = p_sum.iter().sum::<f64>() / p_sum.len() as f64;
    for (&tau_m, &p) in rec.abscissa.iter().zip(p_sum) {
        let x = omega_hat * (tau_m - tau_hat) / 2.0;
        let s = x.sin();
        let ratio = if s.abs() < 1e-8 { nf } else { (nf * x).sin() / s };
        let model = a_sq * (ratio / omega_hat) * (ratio / omega_hat);
        ss_res += (p - model) * (p - model);
        ss_tot += (p - mean) * (p - mean);
    }
    if ss_tot > 0.0 && ss_res > ss_tot {
        return Err(Error::FitDivergence { residual: (ss_res / p_sum.len() as f64).sqrt() });
    }

    // |beta| from the PDD channel at the lock-in grid point
    let i_lock = rec
        .abscissa
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - tau_hat).abs().partial_cmp(&(b.1 - tau_hat).abs()).unwrap()
        })
        .map(|(i, _)| i)
        .unwrap();
    let phi_pdd = (1.0 - 2.0 * rec.p_pdd[i_lock].clamp(0.0, 1.0)).clamp(-1.0, 1.0).acos();
    let cos_beta = (omega_hat * phi_pdd / (2.0 * nf * a_hat)).clamp(-1.0, 1.0);
    let beta_hat_abs = cos_beta.acos();
    Ok((a_hat, beta_hat_abs))
}

/// Discrete spectrum of a strong-regime series sampled at n = 2, 4, ..., n_m:
/// `F_k = sum_n P_n e^{-i 2 pi n k / n_m}` for k = 0 .. n_m/2 - 1 (the
/// spectrum repeats with period n_m/2 in k because n is even).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub bins: Vec<usize>,
    pub amplitudes: Vec<C64>,
    pub n_m: usize,
    pub excluded_low_bins: usize,
}

impl Spectrum {
    /// Retained bins per the localization measure: k in
    /// [excluded_low_bins, n_m/2).
    pub fn retained(&self) -> impl Iterator<Item = (usize, &C64)> {
        self.amplitudes
            .iter()
            .enumerate()
            .skip(self.excluded_low_bins)
            .map(|(k, f)| (k, f))
    }

    /// Per-n angular rate of bin k, in units of the (known or estimated)
    /// signal frequency: `omega_fft = omega * 2 pi k / n_m`.
    pub fn omega_fft(&self, k_star: f64, omega: f64) -> f64 {
        omega * 2.0 * std::f64::consts::PI * k_star / self.n_m as f64
    }
}

/// DFT of the even-n series exactly as the localization measure defines it.
pub fn fft_spectrum(series: &[f64], n_m: usize, excluded_low_bins: usize) -> Result<Spectrum> {
    if n_m % 2 != 0 {
        return Err(Error::InvalidInput(format!("n_m must be even, got {n_m}")));
    }
    if series.len() != n_m / 2 || series.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "series must hold n = 2, 4, ..., n_m ({} samples), got {}",
            n_m / 2,
            series.len()
        )));
    }
    let m = n_m / 2;
    let mut amplitudes = Vec::with_capacity(m);
    for k in 0..m {
        let mut acc = C64::default();
        for (idx, &p) in series.iter().enumerate() {
            let n = 2 * (idx + 1);
            let ang = -2.0 * std::f64::consts::PI * (n * k) as f64 / n_m as f64;
            acc += p * C64::new(ang.cos(), ang.sin());
        }
        amplitudes.push(acc);
    }
    Ok(Spectrum { bins: (0..m).collect(), amplitudes, n_m, excluded_low_bins })
}

/// Inverse participation ratio over the retained bins:
/// `sum |F_k|^4 / (sum |F_k|^2)^2`; 0 when all retained bins vanish.
pub fn ipr(spec: &Spectrum) -> f64 {
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    for (_, f) in spec.retained() {
        let m2 = f.norm_sqr();
        s2 += m2;
        s4 += m2 * m2;
    }
    if s2 == 0.0 {
        0.0
    } else {
        s4 / (s2 * s2)
    }
}

/// Locate the strong-regime lock-in point as the argmax of the IPR curve.
/// `tau_true` (diagnostics mode) reports the shift `D = tau_hat - tau_true`.
pub fn locate_lock_in_strong(
    tau_grid: &[f64],
    ipr_curve: &[f64],
    tau_true: Option<f64>,
) -> Result<(f64, Option<f64>)> {
    if tau_grid.len() != ipr_curve.len() || tau_grid.is_empty() {
        return Err(Error::InvalidInput("grid and IPR curve must match".into()));
    }
    let max = ipr_curve.iter().cloned().fold(f64::MIN, f64::max);
    let min = ipr_curve.iter().cloned().fold(f64::MAX, f64::min);
    if max - min < 0.02 {
        return Err(Error::NoLock(format!(
            "IPR curve is flat (max - min = {:.4})",
            max - min
        )));
    }
    let imax = ipr_curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let tau_hat = tau_grid[imax];
    Ok((tau_hat, tau_true.map(|t| tau_hat - t)))
}

/// Sub-bin peak location by 3-point parabolic interpolation on |F|;
/// searches k in [excluded, n_m/4) — the alias-free primary band.
fn primary_peak(spec: &Spectrum) -> Result<f64> {
    let m = spec.amplitudes.len();
    let hi = m / 2; // per-sample Nyquist
    let lo = spec.excluded_low_bins.max(1);
    let (k0, _) = spec
        .amplitudes
        .iter()
        .enumerate()
        .take(hi)
        .skip(lo)
        .map(|(k, f)| (k, f.norm()))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .ok_or_else(|| Error::InvalidInput("empty spectrum".into()))?;
    if k0 + 2 >= hi {
        return Err(Error::Aliasing(format!(
            "peak bin {k0} within 2 bins of the Nyquist bin {hi}"
        )));
    }
    let ym = spec.amplitudes[k0 - 1].norm();
    let y0 = spec.amplitudes[k0].norm();
    let yp = spec.amplitudes[k0 + 1].norm();
    let denom = ym - 2.0 * y0 + yp;
    let d = if denom.abs() > 1e-300 { 0.5 * (ym - yp) / denom } else { 0.0 };
    Ok(k0 as f64 + d.clamp(-0.5, 0.5))
}

/// Amplitude and |beta| from the two per-channel spectra:
/// `A = (1/2) sqrt(w_pdd^2 + w_cp^2)`, `|beta| = arctan(w_cp / w_pdd)`
/// with `w_ch` the interpolated peak of each channel mapped through
/// `omega_fft = omega 2 pi k* / n_m`.
pub fn extract_a_beta_strong(
    spec_pdd: &Spectrum,
    spec_cp: &Spectrum,
    omega: f64,
) -> Result<(f64, f64)> {
    let k_pdd = primary_peak(spec_pdd)?;
    let k_cp = primary_peak(spec_cp)?;
    let m = spec_pdd.amplitudes.len() as f64;
    // mirror of the other channel's peak (alias pair around the Nyquist)
    if (k_pdd - (m - k_cp)).abs() < 2.0 || (k_cp - (m - k_pdd)).abs() < 2.0 {
        return Err(Error::Aliasing(format!(
            "channel peaks {k_pdd:.1} and {k_cp:.1} collide with each other's mirrors"
        )));
    }
    let w_pdd = spec_pdd.omega_fft(k_pdd, omega).abs();
    let w_cp = spec_cp.omega_fft(k_cp, omega).abs();
    let a_hat = 0.5 * (w_pdd * w_pdd + w_cp * w_cp).sqrt();
    let beta_hat_abs = (w_cp / w_pdd).atan();
    Ok((a_hat, beta_hat_abs))
}

/// Amplitude and folded |beta| from a single summed spectrum (the only
/// observable in the CPT realization): the two dominant primary peaks give
/// `A = (1/2) sqrt(p1^2 + p2^2)` and `arctan(min/max)`, which folds beta
/// into [0, pi/4] because the channel assignment is unobservable.
pub fn extract_pair_from_sum(spec_sum: &Spectrum, omega: f64) -> Result<(f64, f64, (f64, f64))> {
    let m = spec_sum.amplitudes.len();
    let hi = m / 2;
    let lo = spec_sum.excluded_low_bins.max(1);
    // local maxima by magnitude in the primary band
    let mags: Vec<f64> = spec_sum.amplitudes.iter().map(|f| f.norm()).collect();
    let mut peaks: Vec<(usize, f64)> = (lo.max(1)..hi.saturating_sub(1))
        .filter(|&k| mags[k] >= mags[k - 1] && mags[k] >= mags[k + 1])
        .map(|k| (k, mags[k]))
        .collect();
    peaks.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    // drop local maxima adjacent to an already chosen stronger peak
    let mut chosen: Vec<usize> = Vec::new();
    for (k, _) in &peaks {
        if chosen.iter().all(|&c| (*k as i64 - c as i64).unsigned_abs() > 2) {
            chosen.push(*k);
        }
        if chosen.len() == 2 {
            break;
        }
    }
    if chosen.len() < 2 {
        return Err(Error::NoLock("fewer than two distinct peaks in the summed spectrum".into()));
    }
    let mut interp = Vec::new();
    for &k0 in &chosen {
        let (ym, y0, yp) = (mags[k0 - 1], mags[k0], mags[k0 + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let d = if denom.abs() > 1e-300 { 0.5 * (ym - yp) / denom } else { 0.0 };
        interp.push(k0 as f64 + d.clamp(-0.5, 0.5));
    }
    let w1 = spec_sum.omega_fft(interp[0], omega).abs();
    let w2 = spec_sum.omega_fft(interp[1], omega).abs();
    let (wlo, whi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
    let a_hat = 0.5 * (wlo * wlo + whi * whi).sqrt();
    let beta_folded = (wlo / whi).atan();
    Ok((a_hat, beta_folded, (wlo, whi)))
}
