//! Closed-form elimination formulas written entry by entry.
//!
//! The blocks are rebuilt here from the `η` tensors with the forward-direction
//! signs; indices in the comments are one-based to match the usual
//! `T₁₃, W₃₂, …` notation.

use nalgebra::{Matrix3, Matrix4, Vector4, Vector6};

use crate::medium::EtaSet;
use crate::units::Units;
use crate::{Kpar, C64};

struct Blocks {
    t: Matrix3<C64>,
    y: Matrix3<C64>,
    z: Matrix3<C64>,
    w: Matrix3<C64>,
}

fn blocks(eta: &EtaSet, kpar: Kpar, s: C64, units: &Units) -> Blocks {
    let i = C64::new(0.0, 1.0);
    let mu0 = C64::new(units.mu0, 0.0);
    let eps0 = C64::new(units.eps0, 0.0);
    let mut curl = Matrix3::<C64>::zeros();
    curl[(0, 2)] = i * kpar.ky;
    curl[(1, 2)] = -i * kpar.kx;
    curl[(2, 0)] = -i * kpar.ky;
    curl[(2, 1)] = i * kpar.kx;
    Blocks {
        t: curl + eta.eta3 * (mu0 * s),
        y: (Matrix3::identity() + eta.eta4) * (mu0 * s),
        z: -(Matrix3::identity() * eps0 + eta.eta1) * s,
        w: curl - eta.eta2 * s,
    }
}

/// `E_z`, `H_z` elimination coefficients and the common denominator
/// `T₃₃W₃₃ − Z₃₃Y₃₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCoefficients {
    pub alpha1: C64,
    pub beta1: C64,
    pub gamma1: C64,
    pub delta1: C64,
    pub alpha2: C64,
    pub beta2: C64,
    pub gamma2: C64,
    pub delta2: C64,
    pub pivot: C64,
}

impl ClosedFormCoefficients {
    pub fn as_array(&self) -> [C64; 8] {
        [
            self.alpha1,
            self.beta1,
            self.gamma1,
            self.delta1,
            self.alpha2,
            self.beta2,
            self.gamma2,
            self.delta2,
        ]
    }
}

pub fn closed_form_coefficients(
    eta: &EtaSet,
    kpar: Kpar,
    s: C64,
    units: &Units,
) -> ClosedFormCoefficients {
    let Blocks { t, y, z, w } = blocks(eta, kpar, s, units);
    let (t33, y33, z33, w33) = (t[(2, 2)], y[(2, 2)], z[(2, 2)], w[(2, 2)]);
    let p = t33 * w33 - z33 * y33;
    ClosedFormCoefficients {
        alpha1: (y33 * z[(2, 0)] - w33 * t[(2, 0)]) / p,
        beta1: (y33 * z[(2, 1)] - w33 * t[(2, 1)]) / p,
        gamma1: (y33 * w[(2, 0)] - w33 * y[(2, 0)]) / p,
        delta1: (y33 * w[(2, 1)] - w33 * y[(2, 1)]) / p,
        alpha2: (z33 * t[(2, 0)] - t33 * z[(2, 0)]) / p,
        beta2: (z33 * t[(2, 1)] - t33 * z[(2, 1)]) / p,
        gamma2: (z33 * y[(2, 0)] - t33 * w[(2, 0)]) / p,
        delta2: (z33 * y[(2, 1)] - t33 * w[(2, 1)]) / p,
        pivot: p,
    }
}

/// The sixteen `Θ` entries exactly as tabulated, including `Θ₄₄ = −sη⁽²⁾₁₂ − …`.
pub fn closed_form_theta(eta: &EtaSet, kpar: Kpar, s: C64, units: &Units) -> Matrix4<C64> {
    let Blocks { t, y, z, w } = blocks(eta, kpar, s, units);
    let c = closed_form_coefficients(eta, kpar, s, units);
    let mu0 = C64::new(units.mu0, 0.0);
    let (a1, b1, g1, d1) = (c.alpha1, c.beta1, c.gamma1, c.delta1);
    let (a2, b2, g2, d2) = (c.alpha2, c.beta2, c.gamma2, c.delta2);
    let e3 = &eta.eta3;
    let e2 = &eta.eta2;
    let mut th = Matrix4::zeros();
    // row 1
    th[(0, 0)] = mu0 * s * e3[(1, 0)] + t[(1, 2)] * a1 + y[(1, 2)] * a2;
    th[(0, 1)] = t[(1, 1)] + t[(1, 2)] * b1 + y[(1, 2)] * b2;
    th[(0, 2)] = y[(1, 0)] + t[(1, 2)] * g1 + y[(1, 2)] * g2;
    th[(0, 3)] = y[(1, 1)] + t[(1, 2)] * d1 + y[(1, 2)] * d2;
    // row 2
    th[(1, 0)] = -t[(0, 0)] - t[(0, 2)] * a1 - y[(0, 2)] * a2;
    th[(1, 1)] = -mu0 * s * e3[(0, 1)] - t[(0, 2)] * b1 - y[(0, 2)] * b2;
    th[(1, 2)] = -y[(0, 0)] - t[(0, 2)] * g1 - y[(0, 2)] * g2;
    th[(1, 3)] = -y[(0, 1)] - t[(0, 2)] * d1 - y[(0, 2)] * d2;
    // row 3
    th[(2, 0)] = z[(1, 0)] + z[(1, 2)] * a1 + w[(1, 2)] * a2;
    th[(2, 1)] = z[(1, 1)] + z[(1, 2)] * b1 + w[(1, 2)] * b2;
    th[(2, 2)] = -s * e2[(1, 0)] + z[(1, 2)] * g1 + w[(1, 2)] * g2;
    th[(2, 3)] = w[(1, 1)] + z[(1, 2)] * d1 + w[(1, 2)] * d2;
    // row 4
    th[(3, 0)] = -z[(0, 0)] - z[(0, 2)] * a1 - w[(0, 2)] * a2;
    th[(3, 1)] = -z[(0, 1)] - z[(0, 2)] * b1 - w[(0, 2)] * b2;
    th[(3, 2)] = -w[(0, 0)] - z[(0, 2)] * g1 - w[(0, 2)] * g2;
    th[(3, 3)] = -s * e2[(0, 1)] - z[(0, 2)] * d1 - w[(0, 2)] * d2;
    th
}

/// Source vector `G` from the six source components `J₁…J₆`.
pub fn closed_form_source(
    eta: &EtaSet,
    kpar: Kpar,
    s: C64,
    units: &Units,
    j: &Vector6<C64>,
) -> Vector4<C64> {
    let Blocks { t, y, z, w } = blocks(eta, kpar, s, units);
    let (t33, y33, z33, w33) = (t[(2, 2)], y[(2, 2)], z[(2, 2)], w[(2, 2)]);
    let p = t33 * w33 - z33 * y33;
    let (j1, j2, j3, j4, j5, j6) = (j[0], j[1], j[2], j[3], j[4], j[5]);
    let (t13, t23, y13, y23) = (t[(0, 2)], t[(1, 2)], y[(0, 2)], y[(1, 2)]);
    let (z13, z23, w13, w23) = (z[(0, 2)], z[(1, 2)], w[(0, 2)], w[(1, 2)]);
    Vector4::new(
        j2 + (z33 * y23 - t23 * w33) / p * j3 + (t23 * y33 - y23 * t33) / p * j6,
        -j1 + (t13 * w33 - y13 * z33) / p * j3 + (t33 * y13 - y33 * t13) / p * j6,
        j5 + (w23 * z33 - z23 * w33) / p * j3 + (z23 * y33 - w23 * t33) / p * j6,
        -j4 + (w33 * z13 - z33 * w13) / p * j3 + (w13 * t33 - z13 * y33) / p * j6,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    const U: Units = Units::NORMALIZED;

    #[test]
    fn vacuum_coefficients() {
        let (kx, ky, s) = (0.7, -0.3, c64(1.1, 0.4));
        let c = closed_form_coefficients(&EtaSet::zero(), Kpar::new(kx, ky), s, &U);
        let i = c64(0.0, 1.0);
        assert_eq!(c.alpha1, c64(0.0, 0.0));
        assert_eq!(c.beta1, c64(0.0, 0.0));
        assert!((c.gamma1 + i * ky / s).norm() < 1e-15);
        assert!((c.delta1 - i * kx / s).norm() < 1e-15);
        assert!((c.alpha2 - i * ky / s).norm() < 1e-15);
        assert!((c.beta2 + i * kx / s).norm() < 1e-15);
        assert_eq!(c.gamma2, c64(0.0, 0.0));
        assert_eq!(c.delta2, c64(0.0, 0.0));
    }

    #[test]
    fn vacuum_theta_entries() {
        let (kx, ky, s) = (0.5, 0.8, c64(0.9, -0.6));
        let th = closed_form_theta(&EtaSet::zero(), Kpar::new(kx, ky), s, &U);
        assert!((th[(0, 2)] + kx * ky / s).norm() < 1e-14);
        assert!((th[(0, 3)] - (s + kx * kx / s)).norm() < 1e-14);
        assert!((th[(1, 2)] + (s + ky * ky / s)).norm() < 1e-14);
        assert!((th[(2, 1)] + (s + kx * kx / s)).norm() < 1e-14);
        assert!((th[(3, 0)] - (s + ky * ky / s)).norm() < 1e-14);
        for (r, c) in [
            (0, 0),
            (0, 1),
            (1, 0),
            (1, 1),
            (2, 2),
            (2, 3),
            (3, 2),
            (3, 3),
        ] {
            assert!(th[(r, c)].norm() < 1e-15);
        }
    }

    #[test]
    fn vacuum_source() {
        let (kx, ky, s) = (0.4, 0.2, c64(1.0, 0.5));
        // J = [B; −D]
        let b = [c64(0.1, 0.0), c64(0.2, 0.1), c64(-0.3, 0.0)];
        let d = [c64(0.0, 0.4), c64(0.5, 0.0), c64(0.6, -0.2)];
        let j = Vector6::new(b[0], b[1], b[2], -d[0], -d[1], -d[2]);
        let g = closed_form_source(&EtaSet::zero(), Kpar::new(kx, ky), s, &U, &j);
        let i = c64(0.0, 1.0);
        assert!((g[0] - (b[1] + i * kx / s * d[2])).norm() < 1e-14);
        assert!((g[1] - (-b[0] + i * ky / s * d[2])).norm() < 1e-14);
        assert!((g[2] - (-d[1] + i * kx / s * b[2])).norm() < 1e-14);
        assert!((g[3] - (d[0] + i * ky / s * b[2])).norm() < 1e-14);
    }
}
