use super::OracleError;
use crate::units::Units;
use crate::C64;

/// `S`: electric field normal to the plane of incidence. `P`: magnetic field
/// normal to it; `P` amplitudes are ratios of that magnetic component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    S,
    P,
}

/// Reflection and transmission of a nonmagnetic isotropic slab of index `n`
/// and thickness `d` in vacuum, from single-interface Fresnel coefficients
/// composed by the Airy sum.
///
/// `r` is referenced at the front face and `t` at the back face.
pub fn fresnel_airy(
    n: C64,
    d: f64,
    omega: f64,
    theta: f64,
    pol: Polarization,
    units: &Units,
) -> Result<(C64, C64), OracleError> {
    if n == C64::new(0.0, 0.0) {
        return Err(OracleError::ZeroIndex);
    }
    if !(theta.is_finite() && theta.abs() <= std::f64::consts::FRAC_PI_2) {
        return Err(OracleError::InvalidAngle(theta));
    }
    let cos = theta.cos();
    if cos.abs() < 1e-12 {
        return Err(OracleError::GrazingIncidence(cos));
    }
    let k0 = omega * (units.eps0 * units.mu0).sqrt();
    let kx = k0 * theta.sin();
    let kz0 = C64::new(k0 * cos, 0.0);
    let mut kz1 = (n * n * k0 * k0 - kx * kx).sqrt();
    if kz1.im < 0.0 || (kz1.im == 0.0 && kz1.re < 0.0) {
        kz1 = -kz1;
    }
    let weight = match pol {
        Polarization::S => C64::new(1.0, 0.0),
        Polarization::P => n * n,
    };
    // into the slab, then out of it
    let r01 = (weight * kz0 - kz1) / (weight * kz0 + kz1);
    let r12 = -r01;
    let t01 = 1.0 + r01;
    let t12 = 1.0 + r12;
    let phase = (C64::new(0.0, 1.0) * kz1 * d).exp();
    let denom = 1.0 + r01 * r12 * phase * phase;
    let r = (r01 + r12 * phase * phase) / denom;
    let t = t01 * t12 * phase / denom;
    if !(r.re.is_finite() && r.im.is_finite() && t.re.is_finite() && t.im.is_finite()) {
        return Err(OracleError::NonFinite(format!("slab n = {n}, d = {d}")));
    }
    Ok((r, t))
}
