//! Oscillator-coupling description of a medium.
//!
//! Each reservoir contributes a pair of coupling tensors `F(ω)`, `G(ω)`. The
//! susceptibility densities are `F Fᵀ` (χ₁), `G Gᵀ` (χ₄) and `F Gᵀ` (χ₂), with
//! χ₃ = χ₂ᵀ. Time-domain susceptibilities carry the kernel `sin(ωt)/ω`, their
//! Laplace transforms the kernel `1/(s² + ω²)`.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use super::{MediumError, SusceptibilitySet};
use crate::quadrature::{
    integrate, integrate_oscillatory, integrate_semi_infinite, QuadConfig, QuadError,
};
use crate::C64;

/// Smallest envelope width accepted.
pub const ENVELOPE_MIN_WIDTH: f64 = 1e-12;

/// One reservoir of oscillators coupled to the field.
#[derive(Debug, Clone, PartialEq)]
pub enum Reservoir {
    /// `F(ω) = √w(ω)·f`, `G(ω) = √w(ω)·g` with `w(ω) = (2a/π)/(ω² + a²)`.
    Envelope {
        width: f64,
        f: Matrix3<f64>,
        g: Matrix3<f64>,
    },
    /// Samples on a strictly increasing grid, linearly interpolated and zero
    /// outside it.
    Tabulated {
        omega: Vec<f64>,
        f: Vec<Matrix3<f64>>,
        g: Vec<Matrix3<f64>>,
    },
}

impl Reservoir {
    fn validate(&self) -> Result<(), MediumError> {
        let finite = |m: &Matrix3<f64>| m.iter().all(|x| x.is_finite());
        match self {
            Reservoir::Envelope { width, f, g } => {
                if !(width.is_finite() && *width >= ENVELOPE_MIN_WIDTH) {
                    return Err(MediumError::InvalidModel(format!(
                        "envelope width must be finite and positive, got {width}"
                    )));
                }
                if !finite(f) || !finite(g) {
                    return Err(MediumError::InvalidModel(
                        "non-finite coupling tensor".into(),
                    ));
                }
            }
            Reservoir::Tabulated { omega, f, g } => {
                if omega.len() < 2 || f.len() != omega.len() || g.len() != omega.len() {
                    return Err(MediumError::InvalidModel(format!(
                        "tabulated reservoir needs ≥ 2 samples and matching lengths (ω: {}, f: {}, g: {})",
                        omega.len(),
                        f.len(),
                        g.len()
                    )));
                }
                if omega[0] < 0.0 || omega.iter().any(|w| !w.is_finite()) {
                    return Err(MediumError::InvalidModel(
                        "tabulated ω grid must be finite and ≥ 0".into(),
                    ));
                }
                if let Some(i) = omega.windows(2).position(|p| p[1] <= p[0]) {
                    return Err(MediumError::InvalidModel(format!(
                        "tabulated ω grid not strictly increasing at index {}",
                        i + 1
                    )));
                }
                if !f.iter().all(finite) || !g.iter().all(finite) {
                    return Err(MediumError::InvalidModel(
                        "non-finite tabulated coupling".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Densities (χ₁, χ₄, χ₂) at frequency ω.
    fn densities(&self, w: f64) -> [Matrix3<f64>; 3] {
        let (f, g) = match self {
            Reservoir::Envelope { width, f, g } => {
                let env = (2.0 * width / PI) / (w * w + width * width);
                return [
                    f * f.transpose() * env,
                    g * g.transpose() * env,
                    f * g.transpose() * env,
                ];
            }
            Reservoir::Tabulated { omega, f, g } => {
                let last = omega.len() - 1;
                if w < omega[0] || w > omega[last] {
                    return [Matrix3::zeros(); 3];
                }
                let i = match omega.partition_point(|x| *x <= w) {
                    0 => 0,
                    p => (p - 1).min(last - 1),
                };
                let t = (w - omega[i]) / (omega[i + 1] - omega[i]);
                (
                    f[i] * (1.0 - t) + f[i + 1] * t,
                    g[i] * (1.0 - t) + g[i + 1] * t,
                )
            }
        };
        [f * f.transpose(), g * g.transpose(), f * g.transpose()]
    }

    /// Closed-form Laplace transform of an envelope reservoir.
    fn envelope_laplace(&self, s: C64) -> Option<[Matrix3<C64>; 3]> {
        let Reservoir::Envelope { width, f, g } = self else {
            return None;
        };
        let k = C64::new(1.0, 0.0) / (s * (s + *width));
        let lift = |m: Matrix3<f64>| m.map(|x| k * x);
        Some([
            lift(f * f.transpose()),
            lift(g * g.transpose()),
            lift(f * g.transpose()),
        ])
    }

    /// Closed-form time kernel of an envelope reservoir: `(1 − e^{−at})/a`.
    fn envelope_time(&self, t: f64) -> Option<[Matrix3<f64>; 3]> {
        let Reservoir::Envelope { width, f, g } = self else {
            return None;
        };
        let k = -(-width * t).exp_m1() / width;
        Some([
            f * f.transpose() * k,
            g * g.transpose() * k,
            f * g.transpose() * k,
        ])
    }
}

/// Coupling tensors of all reservoirs attached to a layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CouplingModel {
    pub reservoirs: Vec<Reservoir>,
}

impl CouplingModel {
    pub fn new(reservoirs: Vec<Reservoir>) -> Result<Self, MediumError> {
        for r in &reservoirs {
            r.validate()?;
        }
        Ok(CouplingModel { reservoirs })
    }

    /// Scalar envelope model `F Fᵀ = (2a/π)/(ω² + a²)·I`, `G = 0`.
    pub fn scalar_envelope(width: f64) -> Result<Self, MediumError> {
        Self::new(vec![Reservoir::Envelope {
            width,
            f: Matrix3::identity(),
            g: Matrix3::zeros(),
        }])
    }

    /// Closed-form Laplace transform, available when every reservoir is an envelope.
    pub fn laplace_closed_form(&self, s: C64) -> Option<SusceptibilitySet<C64>> {
        let mut acc = [Matrix3::zeros(); 3];
        for r in &self.reservoirs {
            let d = r.envelope_laplace(s)?;
            for (a, b) in acc.iter_mut().zip(d) {
                *a += b;
            }
        }
        Some(assemble(acc))
    }

    /// Closed-form time-domain slice, available when every reservoir is an envelope.
    pub fn time_closed_form(&self, t: f64) -> Option<SusceptibilitySet<f64>> {
        if t <= 0.0 {
            return Some(SusceptibilitySet::zero());
        }
        let mut acc = [Matrix3::zeros(); 3];
        for r in &self.reservoirs {
            let d = r.envelope_time(t)?;
            for (a, b) in acc.iter_mut().zip(d) {
                *a += b;
            }
        }
        Some(SusceptibilitySet {
            chi1: acc[0],
            chi2: acc[2],
            chi3: acc[2].transpose(),
            chi4: acc[1],
        })
    }

    /// Closed form for envelope reservoirs, quadrature for tabulated ones.
    pub(crate) fn laplace_mixed(
        &self,
        s: C64,
        cfg: &QuadConfig,
    ) -> Result<SusceptibilitySet<C64>, MediumError> {
        check_laplace_point(s)?;
        let mut acc = [Matrix3::zeros(); 3];
        for r in &self.reservoirs {
            let d = match r.envelope_laplace(s) {
                Some(d) => d,
                None => reservoir_laplace_quad(r, s, cfg)?,
            };
            for (a, b) in acc.iter_mut().zip(d) {
                *a += b;
            }
        }
        Ok(assemble(acc))
    }
}

fn assemble(acc: [Matrix3<C64>; 3]) -> SusceptibilitySet<C64> {
    SusceptibilitySet {
        chi1: acc[0],
        chi2: acc[2],
        chi3: acc[2].transpose(),
        chi4: acc[1],
    }
}

fn check_laplace_point(s: C64) -> Result<(), MediumError> {
    if !(s.re.is_finite() && s.im.is_finite()) || s.re < 0.0 || s.norm() == 0.0 {
        return Err(MediumError::InvalidLaplacePoint { s });
    }
    Ok(())
}

const TENSORS: [&str; 3] = ["chi1", "chi4", "chi2"];

fn component_name(c: usize) -> (&'static str, usize, usize) {
    (TENSORS[c / 9], (c % 9) / 3, c % 3)
}

fn pack(d: &[Matrix3<f64>; 3], kernel: C64) -> [C64; 27] {
    let mut out = [C64::new(0.0, 0.0); 27];
    for (t, m) in d.iter().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                out[t * 9 + r * 3 + c] = kernel * m[(r, c)];
            }
        }
    }
    out
}

fn unpack(v: &[C64; 27]) -> [Matrix3<C64>; 3] {
    let mut out = [Matrix3::zeros(); 3];
    for (t, m) in out.iter_mut().enumerate() {
        for r in 0..3 {
            for c in 0..3 {
                m[(r, c)] = v[t * 9 + r * 3 + c];
            }
        }
    }
    out
}

fn laplace_error(e: QuadError, s: C64) -> MediumError {
    let component = match &e {
        QuadError::NoConvergence { component, .. } | QuadError::NonFinite { component, .. } => {
            *component
        }
    };
    let (tensor, row, col) = component_name(component);
    if s.re <= 1e-6 * s.norm() {
        MediumError::Resonance {
            omega: s.im.abs(),
            tensor,
            row,
            col,
        }
    } else {
        MediumError::Quadrature {
            tensor,
            row,
            col,
            source: e,
        }
    }
}

fn time_error(e: QuadError) -> MediumError {
    let component = match &e {
        QuadError::NoConvergence { component, .. } | QuadError::NonFinite { component, .. } => {
            *component
        }
    };
    let (tensor, row, col) = component_name(component);
    MediumError::Quadrature {
        tensor,
        row,
        col,
        source: e,
    }
}

/// Integrates a reservoir's densities against `kernel(ω)` over its support.
fn reservoir_quad<K>(r: &Reservoir, kernel: K, cfg: &QuadConfig) -> Result<[C64; 27], QuadError>
where
    K: Fn(f64) -> C64,
{
    let integrand = |w: f64| pack(&r.densities(w), kernel(w));
    match r {
        Reservoir::Envelope { width, .. } => {
            Ok(integrate_semi_infinite(integrand, *width, cfg)?.value)
        }
        Reservoir::Tabulated { omega, .. } => {
            let mut total = [C64::new(0.0, 0.0); 27];
            // split at every sample so each piece is a smooth polynomial times the kernel
            for pair in omega.windows(2) {
                let part = integrate(integrand, pair[0], pair[1], cfg)?;
                for (t, v) in total.iter_mut().zip(part.value) {
                    *t += v;
                }
            }
            Ok(total)
        }
    }
}

fn reservoir_laplace_quad(
    r: &Reservoir,
    s: C64,
    cfg: &QuadConfig,
) -> Result<[Matrix3<C64>; 3], MediumError> {
    let s2 = s * s;
    let v = reservoir_quad(r, |w| C64::new(1.0, 0.0) / (s2 + w * w), cfg)
        .map_err(|e| laplace_error(e, s))?;
    Ok(unpack(&v))
}

/// `χ̃ᵢ(s) = ∫₀^∞ dω ρᵢ(ω)/(s² + ω²)` by adaptive quadrature.
///
/// `Re s = 0` is accepted as the boundary limit; a pole of the integrand on the
/// real ω axis then surfaces as [`MediumError::Resonance`].
pub fn susceptibility_laplace(
    model: &CouplingModel,
    s: C64,
    cfg: &QuadConfig,
) -> Result<SusceptibilitySet<C64>, MediumError> {
    check_laplace_point(s)?;
    let mut acc = [Matrix3::zeros(); 3];
    for r in &model.reservoirs {
        let d = reservoir_laplace_quad(r, s, cfg)?;
        for (a, b) in acc.iter_mut().zip(d) {
            *a += b;
        }
    }
    Ok(assemble(acc))
}

/// `χᵢ(t) = ∫₀^∞ dω ρᵢ(ω) sin(ωt)/ω` by adaptive quadrature; zero for `t ≤ 0`.
pub fn susceptibility_time(
    model: &CouplingModel,
    t: f64,
    cfg: &QuadConfig,
) -> Result<SusceptibilitySet<f64>, MediumError> {
    if !t.is_finite() {
        return Err(MediumError::NonFinitePoint(t));
    }
    if t <= 0.0 {
        return Ok(SusceptibilitySet::zero());
    }
    let kernel = |w: f64| {
        let x = w * t;
        // sin(ωt)/ω → t as ω → 0
        C64::new(
            if x.abs() < 1e-8 {
                t * (1.0 - x * x / 6.0)
            } else {
                x.sin() / w
            },
            0.0,
        )
    };
    let mut acc = [Matrix3::<f64>::zeros(); 3];
    for r in &model.reservoirs {
        let v = match r {
            // split at the zeros of sin(ωt) and extrapolate the alternating tail
            Reservoir::Envelope { .. } => integrate_oscillatory(
                |w: f64| pack(&r.densities(w), kernel(w)),
                std::f64::consts::PI / t,
                cfg,
            )
            .map(|q| q.value),
            Reservoir::Tabulated { .. } => reservoir_quad(r, kernel, cfg),
        }
        .map_err(time_error)?;
        for (a, b) in acc.iter_mut().zip(unpack(&v)) {
            *a += b.map(|z| z.re);
        }
    }
    Ok(SusceptibilitySet {
        chi1: acc[0],
        chi2: acc[2],
        chi3: acc[2].transpose(),
        chi4: acc[1],
    })
}
