//! Five-level double-Lambda CPT realization in 87Rb: Lindblad evolution
//! under the four-component pump light, dark-state preparation, DD-driven
//! sensing on the two ground-state qubits, and excited-state-population
//! detection.
//!
//! Level order: |0> = F=1,mF=-1; |1> = F=2,mF=-1; |2> = F=1,mF=+1;
//! |3> = F=2,mF=+1; |4> = excited. The {0,1} pair carries the PDD channel,
//! {2,3} the CP channel.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::sequence::PulseTrain;
use crate::signal::{SignalTrace, TargetSignal};
use crate::spin::{propagate_numeric_to, QubitState};
use crate::util::linalg::{eigh, fidelity, CMat};
use crate::util::ode::integrate_segment;

const DIM: usize = 5;

/// Physical parameters of the five-level system. Defaults follow the 87Rb
/// D1-line realization.
#[derive(Clone, Copy, Debug)]
pub struct CptParams {
    /// Common Rabi frequency of the four pump components (rad/s).
    pub omega_rabi: f64,
    /// Total excited-state decay rate Gamma (rad/s); each ground channel
    /// decays at Gamma/4.
    pub gamma_total: f64,
    /// Average detunings (rad/s).
    pub delta1: f64,
    pub delta2: f64,
    /// Two-photon detunings (rad/s).
    pub two_photon_delta1: f64,
    pub two_photon_delta2: f64,
    /// Ground-state gyromagnetic ratio (rad/(s T)) mapping field amplitude
    /// to coupling amplitude A = |gamma_g| B0.
    pub gamma_g: f64,
    /// Dark-state preparation time (s).
    pub t_prep: f64,
    /// Query-pulse detection time (s).
    pub t_detect: f64,
}

impl Default for CptParams {
    fn default() -> Self {
        let gamma_total = 2.0 * std::f64::consts::PI * 5.746e6;
        CptParams {
            omega_rabi: 0.035 * gamma_total,
            gamma_total,
            delta1: 2.0 * std::f64::consts::PI * 1.0e6,
            delta2: 2.0 * std::f64::consts::PI * 1.0e6,
            two_photon_delta1: 0.0,
            two_photon_delta2: 0.0,
            // -1.0014 * 2 pi * 1.4 MHz/G in SI units
            gamma_g: -1.0014 * 2.0 * std::f64::consts::PI * 1.4e6 * 1e4,
            t_prep: 1e-4,
            t_detect: 2e-6,
        }
    }
}

impl CptParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_total > 0.0) || !(self.t_prep > 0.0) || !(self.t_detect > 0.0) {
            return Err(Error::InvalidInput(
                "Gamma, T_prep and T_detect must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Signal amplitude (rad/s) seen by the ground qubits for a field B0 (T).
    pub fn amplitude_for_field(&self, b0_tesla: f64) -> f64 {
        self.gamma_g.abs() * b0_tesla
    }
}

/// Hermitian, trace-one, positive-semidefinite state of dimension 2 or 5.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub mat: CMat,
}

impl DensityMatrix {
    pub fn new(mat: CMat) -> Self {
        DensityMatrix { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.dim
    }

    /// Uniform mixture of the four ground states — the preparation input.
    pub fn uniform_ground() -> Self {
        let mut m = CMat::zeros(DIM);
        for j in 0..4 {
            m[(j, j)] = C64::new(0.25, 0.0);
        }
        DensityMatrix { mat: m }
    }

    /// Target mixture of the two dark states
    /// `(|0> - |1>)/sqrt(2)` and `(|2> - |3>)/sqrt(2)`.
    pub fn dark_pair() -> Self {
        DensityMatrix { mat: pair_mixture(-1.0) }
    }

    /// Mixture of the two bright states `(|0> + |1>)/sqrt(2)`,
    /// `(|2> + |3>)/sqrt(2)` — the detection normalization input.
    pub fn bright_pair() -> Self {
        DensityMatrix { mat: pair_mixture(1.0) }
    }

    /// Post-sensing state with preset channel phases:
    /// `|Psi_12> = (|0> - e^{i phi_pdd} |1>)/sqrt(2)` and the CP analogue.
    pub fn with_channel_phases(phi_pdd: f64, phi_cp: f64) -> Self {
        let mut m = CMat::zeros(DIM);
        let half = C64::new(0.5, 0.0);
        for (base, phi) in [(0usize, phi_pdd), (2usize, phi_cp)] {
            let e = C64::new(0.0, phi).exp();
            m[(base, base)] += half * 0.5;
            m[(base + 1, base + 1)] += half * 0.5;
            m[(base, base + 1)] += -half * 0.5 * e.conj();
            m[(base + 1, base)] += -half * 0.5 * e;
        }
        DensityMatrix { mat: m }
    }

    pub fn rho55(&self) -> f64 {
        self.mat[(4, 4)].re
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.mul(&self.mat).trace().re
    }

    /// Validate Hermiticity (1e-10), unit trace (1e-8) and positivity
    /// (eigenvalues >= -1e-8).
    pub fn check_invariants(&self) -> Result<()> {
        let h = self.mat.hermiticity_defect();
        if h > 1e-10 {
            return Err(Error::IntegrationFailure(format!("hermiticity defect {h:.3e}")));
        }
        let t = self.trace();
        if (t - 1.0).abs() > 1e-8 {
            return Err(Error::IntegrationFailure(format!("trace drift {:.3e}", t - 1.0)));
        }
        let (vals, _) = eigh(&self.mat);
        if vals.iter().any(|&l| l < -1e-8) {
            return Err(Error::IntegrationFailure(format!(
                "negative eigenvalue {:.3e}",
                vals.iter().cloned().fold(f64::MAX, f64::min)
            )));
        }
        Ok(())
    }

    /// Uhlmann fidelity with another state.
    pub fn fidelity_with(&self, other: &DensityMatrix) -> f64 {
        fidelity(&self.mat, &other.mat)
    }
}

fn pair_mixture(sign: f64) -> CMat {
    let mut m = CMat::zeros(DIM);
    for base in [0usize, 2usize] {
        m[(base, base)] = C64::new(0.25, 0.0);
        m[(base + 1, base + 1)] = C64::new(0.25, 0.0);
        m[(base, base + 1)] = C64::new(0.25 * sign, 0.0);
        m[(base + 1, base)] = C64::new(0.25 * sign, 0.0);
    }
    m
}

/// The rotating-frame Hamiltonian: diagonal detunings plus, with the light
/// on, the common Rabi coupling of all four ground states to |4>.
pub fn build_hamiltonian(p: &CptParams, light_on: bool) -> CMat {
    let mut h = CMat::zeros(DIM);
    h[(0, 0)] = C64::new(-p.delta1 - p.two_photon_delta1 / 2.0, 0.0);
    h[(1, 1)] = C64::new(-p.delta1 + p.two_photon_delta1 / 2.0, 0.0);
    h[(2, 2)] = C64::new(p.delta2 - p.two_photon_delta2 / 2.0, 0.0);
    h[(3, 3)] = C64::new(p.delta2 + p.two_photon_delta2 / 2.0, 0.0);
    if light_on {
        for j in 0..4 {
            h[(j, 4)] = C64::new(p.omega_rabi, 0.0);
            h[(4, j)] = C64::new(p.omega_rabi, 0.0);
        }
    }
    h
}

/// Time-dependent ground-state terms added during a full five-level sensing
/// cross-check: per-channel sigma_z splittings and sigma_x pulse couplings.
#[derive(Clone, Copy, Debug, Default)]
pub struct GroundDrive {
    pub wz_pdd: f64,
    pub wz_cp: f64,
    pub wx_pdd: f64,
    pub wx_cp: f64,
}

/// Integrate the Lindblad master equation with four decay channels
/// `|j><4|` at rate Gamma/4 each.
pub fn lindblad_evolve(
    rho0: &DensityMatrix,
    p: &CptParams,
    duration: f64,
    light_on: bool,
    drive: Option<&dyn Fn(f64) -> GroundDrive>,
) -> Result<DensityMatrix> {
    p.validate()?;
    if rho0.dim() != DIM {
        return Err(Error::InvalidInput(format!("expected a {DIM}x{DIM} state")));
    }
    let h0 = build_hamiltonian(p, light_on);
    let gamma = p.gamma_total;
    let mut y = rho0.mat.data.clone();

    let mut rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        // H(t)
        let mut h = h0.data.clone();
        if let Some(dr) = drive {
            let g = dr(t);
            h[0 * DIM + 0] += 0.5 * g.wz_pdd;
            h[1 * DIM + 1] -= 0.5 * g.wz_pdd;
            h[2 * DIM + 2] += 0.5 * g.wz_cp;
            h[3 * DIM + 3] -= 0.5 * g.wz_cp;
            h[0 * DIM + 1] += 0.5 * g.wx_pdd;
            h[1 * DIM + 0] += 0.5 * g.wx_pdd;
            h[2 * DIM + 3] += 0.5 * g.wx_cp;
            h[3 * DIM + 2] += 0.5 * g.wx_cp;
        }
        // -i [H, rho]
        for i in 0..DIM {
            for j in 0..DIM {
                let mut acc = C64::default();
                for k in 0..DIM {
                    acc += h[i * DIM + k] * y[k * DIM + j] - y[i * DIM + k] * h[k * DIM + j];
                }
                dy[i * DIM + j] = C64::new(0.0, -1.0) * acc;
            }
        }
        // decay: feed Gamma/4 * rho_44 into each ground population, drain
        // the excited row/column at Gamma/2
        let r44 = y[4 * DIM + 4];
        for j in 0..4 {
            dy[j * DIM + j] += 0.25 * gamma * r44;
        }
        for k in 0..DIM {
            dy[4 * DIM + k] -= 0.5 * gamma * y[4 * DIM + k];
            dy[k * DIM + 4] -= 0.5 * gamma * y[k * DIM + 4];
        }
    };

    integrate_segment(&mut rhs, &mut y, 0.0, duration, 1e-9, 1e-13)?;

    let mut out = CMat::zeros(DIM);
    out.data = y;
    let rho = DensityMatrix::new(out);
    rho.check_invariants()?;
    Ok(rho)
}

/// Pump the uniform ground mixture into the dark pair for `t_prep`;
/// returns the prepared state and its fidelity against the target.
pub fn prepare_dark_states(p: &CptParams) -> Result<(DensityMatrix, f64)> {
    let rho = lindblad_evolve(&DensityMatrix::uniform_ground(), p, p.t_prep, true, None)?;
    let fid = rho.fidelity_with(&DensityMatrix::dark_pair());
    Ok((rho, fid))
}

/// 2x2 unitary for one sensing channel, built by propagating the
/// computational basis through the spin engine.
fn block_unitary(
    train: &PulseTrain,
    sig: &TargetSignal,
    noise: Option<&SignalTrace>,
    t_end: f64,
) -> Result<[C64; 4]> {
    let e0 = propagate_numeric_to(
        train,
        sig,
        noise,
        &QubitState { up: C64::new(1.0, 0.0), down: C64::default() },
        t_end,
    )?;
    let e1 = propagate_numeric_to(
        train,
        sig,
        noise,
        &QubitState { up: C64::default(), down: C64::new(1.0, 0.0) },
        t_end,
    )?;
    Ok([e0.up, e1.up, e0.down, e1.down])
}

/// Sensing stage: the light is off and the two ground pairs evolve
/// independently under the signal with their PDD / CP trains (delegated per
/// block to the spin engine); |4> is untouched. By default both channels see
/// the same signal sign; `strict_physical_signs` flips it on the CP pair
/// (gamma_34 = -gamma_12), which shifts that channel's effective beta by pi.
pub fn sensing_evolution(
    rho: &DensityMatrix,
    sig: &TargetSignal,
    noise: Option<&SignalTrace>,
    train_pdd: &PulseTrain,
    train_cp: &PulseTrain,
    strict_physical_signs: bool,
) -> Result<DensityMatrix> {
    sensing_evolution_to(
        rho,
        sig,
        noise,
        train_pdd,
        train_cp,
        strict_physical_signs,
        train_pdd.total_time(),
    )
}

/// [`sensing_evolution`] up to an arbitrary time `t_end`.
pub fn sensing_evolution_to(
    rho: &DensityMatrix,
    sig: &TargetSignal,
    noise: Option<&SignalTrace>,
    train_pdd: &PulseTrain,
    train_cp: &PulseTrain,
    strict_physical_signs: bool,
    t_end: f64,
) -> Result<DensityMatrix> {
    if (train_pdd.tau_m - train_cp.tau_m).abs() > 1e-12 * train_pdd.tau_m
        || train_pdd.n != train_cp.n
    {
        return Err(Error::InvalidInput(
            "PDD and CP trains must share tau_m and n during sensing".into(),
        ));
    }
    let u_pdd = block_unitary(train_pdd, sig, noise, t_end)?;
    let sig_cp = if strict_physical_signs {
        TargetSignal::new(sig.amplitude_a, sig.omega, sig.beta + std::f64::consts::PI)?
    } else {
        *sig
    };
    let u_cp = block_unitary(train_cp, &sig_cp, noise, t_end)?;

    let mut u = CMat::identity(DIM);
    u[(0, 0)] = u_pdd[0];
    u[(0, 1)] = u_pdd[1];
    u[(1, 0)] = u_pdd[2];
    u[(1, 1)] = u_pdd[3];
    u[(2, 2)] = u_cp[0];
    u[(2, 3)] = u_cp[1];
    u[(3, 2)] = u_cp[2];
    u[(3, 3)] = u_cp[3];

    let out = u.mul(&rho.mat).mul(&u.adjoint());
    Ok(DensityMatrix::new(out))
}

/// Excited-state population after the query pulse, plus the value normalized
/// by the bright-pair response `a = rho55(bright)`.
pub fn detect_rho55(rho: &DensityMatrix, p: &CptParams) -> Result<(f64, f64)> {
    let a = bright_normalization(p)?;
    let raw = detect_rho55_raw(rho, p)?;
    Ok((raw, raw / a))
}

/// Query-pulse response of the given state (unnormalized rho55).
pub fn detect_rho55_raw(rho: &DensityMatrix, p: &CptParams) -> Result<f64> {
    let out = lindblad_evolve(rho, p, p.t_detect, true, None)?;
    Ok(out.rho55())
}

/// Detection normalization coefficient: the query-pulse response of the
/// bright pair.
pub fn bright_normalization(p: &CptParams) -> Result<f64> {
    detect_rho55_raw(&DensityMatrix::bright_pair(), p)
}

/// Mean-subtracted excited-state series (the strong-regime observable).
pub fn tilde_rho55(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 samples".into()));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    Ok(series.iter().map(|v| v - mean).collect())
}
