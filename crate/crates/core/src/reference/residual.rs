use nalgebra::{Matrix3, Vector3, Vector6};

use super::OracleError;
use crate::medium::EtaSet;
use crate::units::Units;
use crate::{Direction, Kpar, C64};

fn curl(k: (C64, C64), f: &Vector3<C64>, df: &Vector3<C64>) -> Vector3<C64> {
    let (ikx, iky) = k;
    Vector3::new(
        iky * f[2] - df[1],
        df[0] - ikx * f[2],
        ikx * f[1] - iky * f[0],
    )
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn split(v: &Vector6<C64>) -> (Vector3<C64>, Vector3<C64>) {
    (
        Vector3::new(v[0], v[1], v[2]),
        Vector3::new(v[3], v[4], v[5]),
    )
}

/// Max-norm residual of the Fourier-reduced Maxwell system
///
/// ```text
/// ∇×E + σ s μ₀ (H + η₃E + η₄H) = J_upper
/// ∇×H − σ s (ε₀E + η₁E + η₂H) = J_lower
/// ```
///
/// with `∇∥ → σ i k∥` and `∂_z` from a centred fourth-order stencil on the
/// uniform grid `z`. Two points at each end are skipped.
#[allow(clippy::too_many_arguments)]
pub fn residual_full_system<J: Fn(f64) -> Vector6<C64>>(
    z: &[f64],
    fields: &[Vector6<C64>],
    eta: &EtaSet,
    kpar: Kpar,
    s: C64,
    dir: Direction,
    j: J,
    units: &Units,
) -> Result<f64, OracleError> {
    if z.len() != fields.len() {
        return Err(OracleError::Resolution(format!(
            "{} grid points but {} field samples",
            z.len(),
            fields.len()
        )));
    }
    if z.len() < 5 {
        return Err(OracleError::Resolution(
            "the stencil needs at least five points".into(),
        ));
    }
    let h = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
    if !(h.is_finite() && h > 0.0) || z.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(OracleError::Resolution(
            "grid must be uniform and increasing".into(),
        ));
    }
    let sigma = dir.sign();
    let ik = (
        C64::new(0.0, sigma * kpar.kx),
        C64::new(0.0, sigma * kpar.ky),
    );
    let ss = s * sigma;
    let mu0 = C64::new(units.mu0, 0.0);
    let eps0 = Matrix3::identity() * C64::new(units.eps0, 0.0);

    let mut worst = 0.0_f64;
    let mut stencil_gap = 0.0_f64;
    let mut deriv_scale = 0.0_f64;
    for i in 2..z.len() - 2 {
        let d4 = (fields[i - 2] - fields[i - 1] * C64::new(8.0, 0.0)
            + fields[i + 1] * C64::new(8.0, 0.0)
            - fields[i + 2])
            / C64::new(12.0 * h, 0.0);
        let d2 = (fields[i + 1] - fields[i - 1]) / C64::new(2.0 * h, 0.0);
        stencil_gap = stencil_gap.max(max_norm((d4 - d2).as_slice()));
        deriv_scale = deriv_scale.max(max_norm(d4.as_slice()));

        let (e, hf) = split(&fields[i]);
        let (de, dh) = split(&d4);
        let (ju, jl) = split(&j(z[i]));
        let r1 = curl(ik, &e, &de) + (hf + eta.eta3 * e + eta.eta4 * hf) * (ss * mu0) - ju;
        let r2 = curl(ik, &hf, &dh) - (eps0 * e + eta.eta1 * e + eta.eta2 * hf) * ss - jl;
        worst = worst
            .max(max_norm(r1.as_slice()))
            .max(max_norm(r2.as_slice()));
    }
    if stencil_gap > 1e-2 * deriv_scale {
        return Err(OracleError::Resolution(format!(
            "grid step {h:e} too coarse: stencils of order 2 and 4 differ by {:.1e} of the derivative",
            stencil_gap / deriv_scale
        )));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    const U: Units = Units::NORMALIZED;

    /// Vacuum plane wave `E = ŷ e^{−qz}`, `H` from Faraday's law, forward direction.
    fn plane_wave(kx: f64, s: C64, z: f64, scale_hx: f64) -> Vector6<C64> {
        let q = (C64::new(kx * kx, 0.0) + s * s).sqrt();
        let ph = (-q * z).exp();
        // ∇×E + sH = 0 with ∇ = (ikx, 0, −q)
        let curl_e = Vector3::new(q * ph, C64::new(0.0, 0.0), C64::new(0.0, kx) * ph);
        let h = -curl_e / s;
        Vector6::new(
            C64::new(0.0, 0.0),
            ph,
            C64::new(0.0, 0.0),
            h[0] * scale_hx,
            h[1],
            h[2],
        )
    }

    fn grid(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }

    #[test]
    fn zero_fields_zero_residual() {
        let z = grid(20, 0.0, 1.0);
        let f = vec![Vector6::zeros(); 20];
        let r = residual_full_system(
            &z,
            &f,
            &EtaSet::zero(),
            Kpar::new(0.3, 0.1),
            c64(1.0, 0.2),
            Direction::Forward,
            |_| Vector6::zeros(),
            &U,
        )
        .unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn plane_wave_and_perturbation() {
        let (kx, s) = (0.6, c64(0.4, -1.3));
        let z = grid(401, 0.0, 2.0);
        let exact: Vec<_> = z.iter().map(|&zz| plane_wave(kx, s, zz, 1.0)).collect();
        let r = residual_full_system(
            &z,
            &exact,
            &EtaSet::zero(),
            Kpar::new(kx, 0.0),
            s,
            Direction::Forward,
            |_| Vector6::zeros(),
            &U,
        )
        .unwrap();
        assert!(r < 1e-10, "{r}");
        let bad: Vec<_> = z.iter().map(|&zz| plane_wave(kx, s, zz, 1.01)).collect();
        let r = residual_full_system(
            &z,
            &bad,
            &EtaSet::zero(),
            Kpar::new(kx, 0.0),
            s,
            Direction::Forward,
            |_| Vector6::zeros(),
            &U,
        )
        .unwrap();
        assert!(r > 1e-3, "{r}");
    }

    #[test]
    fn coarse_grid_rejected() {
        let (kx, s) = (0.0, c64(0.0, -30.0));
        let z = grid(8, 0.0, 2.0);
        let f: Vec<_> = z.iter().map(|&zz| plane_wave(kx, s, zz, 1.0)).collect();
        let r = residual_full_system(
            &z,
            &f,
            &EtaSet::zero(),
            Kpar::ZERO,
            s,
            Direction::Forward,
            |_| Vector6::zeros(),
            &U,
        );
        assert!(matches!(r, Err(OracleError::Resolution(_))));
    }
}
