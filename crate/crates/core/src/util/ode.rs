//! Adaptive embedded Runge-Kutta stepping (Dormand-Prince 5(4)) over complex
//! state vectors.
//!
//! The integrands in this crate are piecewise smooth: callers are expected to
//! break the integration at every discontinuity (pulse edges, noise-sample
//! edges) and call [`integrate_segment`] per smooth piece.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

// Dormand-Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order embedded weights (include the FSAL stage).
const E1: f64 = 5179.0 / 57600.0;
const E3: f64 = 7571.0 / 16695.0;
const E4: f64 = 393.0 / 640.0;
const E5: f64 = -92097.0 / 339200.0;
const E6: f64 = 187.0 / 2100.0;
const E7: f64 = 1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t1` in place.
///
/// The step error is controlled against `rtol`/`atol` per component; the step
/// never crosses `t1`. Fails with [`Error::IntegrationFailure`] on step-size
/// underflow.
pub fn integrate_segment<F>(
    rhs: &mut F,
    y: &mut Vec<C64>,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(());
    }
    let dim = y.len();
    let mut k: Vec<Vec<C64>> = (0..7).map(|_| vec![C64::default(); dim]).collect();
    let mut ytmp = vec![C64::default(); dim];
    let mut yerr = vec![C64::default(); dim];

    let mut t = t0;
    let mut h = span / 16.0;
    let h_min = span * 1e-14;
    rhs(t, y, &mut k[0]);

    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }

        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * A21, &k[0]);
        rhs(t + C2 * h, &ytmp, &mut k[1]);

        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * A31, &k[0]);
        axpy(&mut ytmp, h * A32, &k[1]);
        rhs(t + C3 * h, &ytmp, &mut k[2]);

        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * A41, &k[0]);
        axpy(&mut ytmp, h * A42, &k[1]);
        axpy(&mut ytmp, h * A43, &k[2]);
        rhs(t + C4 * h, &ytmp, &mut k[3]);

        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * A51, &k[0]);
        axpy(&mut ytmp, h * A52, &k[1]);
        axpy(&mut ytmp, h * A53, &k[2]);
        axpy(&mut ytmp, h * A54, &k[3]);
        rhs(t + C5 * h, &ytmp, &mut k[4]);

        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * A61, &k[0]);
        axpy(&mut ytmp, h * A62, &k[1]);
        axpy(&mut ytmp, h * A63, &k[2]);
        axpy(&mut ytmp, h * A64, &k[3]);
        axpy(&mut ytmp, h * A65, &k[4]);
        rhs(t + h, &ytmp, &mut k[5]);

        // 5th-order solution.
        ytmp.copy_from_slice(y);
        axpy(&mut ytmp, h * B1, &k[0]);
        axpy(&mut ytmp, h * B3, &k[2]);
        axpy(&mut ytmp, h * B4, &k[3]);
        axpy(&mut ytmp, h * B5, &k[4]);
        axpy(&mut ytmp, h * B6, &k[5]);
        rhs(t + h, &ytmp, &mut k[6]);

        for i in 0..dim {
            yerr[i] = (B1 - E1) * k[0][i] + (B3 - E3) * k[2][i] + (B4 - E4) * k[3][i]
                + (B5 - E5) * k[4][i]
                + (B6 - E6) * k[5][i]
                - E7 * k[6][i];
        }

        let mut err: f64 = 0.0;
        for i in 0..dim {
            let scale = atol + rtol * y[i].norm().max(ytmp[i].norm());
            err = err.max(h * yerr[i].norm() / scale);
        }

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&ytmp);
            k.swap(0, 6); // FSAL
        }

        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h < h_min {
            return Err(Error::IntegrationFailure(format!(
                "step size underflow at t = {t:.6e} (h = {h:.3e})"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = -y[0];
        };
        integrate_segment(&mut rhs, &mut y, 0.0, 2.0, 1e-10, 1e-14).unwrap();
        assert!((y[0].re - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rotation_preserves_norm() {
        // dy/dt = i * w * y, |y| conserved
        let mut y = vec![C64::new(0.6, 0.8)];
        let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
            dy[0] = C64::new(0.0, 3.0) * y[0];
        };
        integrate_segment(&mut rhs, &mut y, 0.0, 10.0, 1e-11, 1e-14).unwrap();
        assert!((y[0].norm() - 1.0).abs() < 1e-9);
    }
}
