//! Susceptibilities prescribed directly in the Laplace domain.

use nalgebra::Matrix3;

use super::{MediumError, SusceptibilitySet};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseKind {
    /// `1/(s² + γs + ω₀²)`.
    Lorentz { resonance: f64, damping: f64 },
    /// Frequency-independent response. In the time domain it is a delta at
    /// `t = 0` and contributes nothing for `t > 0`.
    Instantaneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTerm {
    pub tensor: Matrix3<C64>,
    pub kind: ResponseKind,
}

impl ResponseTerm {
    pub fn lorentz(tensor: Matrix3<C64>, resonance: f64, damping: f64) -> Self {
        ResponseTerm {
            tensor,
            kind: ResponseKind::Lorentz { resonance, damping },
        }
    }

    pub fn instantaneous(tensor: Matrix3<C64>) -> Self {
        ResponseTerm {
            tensor,
            kind: ResponseKind::Instantaneous,
        }
    }

    fn laplace(&self, s: C64) -> Matrix3<C64> {
        match self.kind {
            ResponseKind::Lorentz { resonance, damping } => {
                let d = s * s + s * damping + resonance * resonance;
                self.tensor / d
            }
            ResponseKind::Instantaneous => self.tensor,
        }
    }

    fn time(&self, t: f64) -> Matrix3<f64> {
        match self.kind {
            ResponseKind::Lorentz { resonance, damping } => {
                let nu = C64::new(resonance * resonance - 0.25 * damping * damping, 0.0).sqrt();
                let decay = (-0.5 * damping * t).exp();
                let k = if nu.norm() * t < 1e-8 {
                    C64::new(t * decay, 0.0)
                } else {
                    (nu * t).sin() / nu * decay
                };
                self.tensor.map(|x| (x * k).re)
            }
            ResponseKind::Instantaneous => Matrix3::zeros(),
        }
    }
}

/// Sums of response terms for χ₁, χ₃ and χ₄; χ₂ is always χ₃ᵀ.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoleModel {
    pub chi1: Vec<ResponseTerm>,
    pub chi3: Vec<ResponseTerm>,
    pub chi4: Vec<ResponseTerm>,
}

impl PoleModel {
    pub fn validate(&self) -> Result<(), MediumError> {
        for (name, terms) in [
            ("chi1", &self.chi1),
            ("chi3", &self.chi3),
            ("chi4", &self.chi4),
        ] {
            for term in terms {
                if term
                    .tensor
                    .iter()
                    .any(|z| !(z.re.is_finite() && z.im.is_finite()))
                {
                    return Err(MediumError::InvalidModel(format!(
                        "{name}: non-finite tensor"
                    )));
                }
                if let ResponseKind::Lorentz { resonance, damping } = term.kind {
                    if !(resonance.is_finite() && damping.is_finite()) {
                        return Err(MediumError::InvalidModel(format!(
                            "{name}: non-finite Lorentz parameters"
                        )));
                    }
                    if term.tensor.iter().any(|z| z.im != 0.0) {
                        return Err(MediumError::InvalidModel(format!(
                            "{name}: Lorentz term strengths must be real"
                        )));
                    }
                    if resonance == 0.0 && damping == 0.0 {
                        return Err(MediumError::InvalidModel(format!(
                            "{name}: Lorentz term with ω₀ = γ = 0 has a double pole at s = 0"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.chi1.is_empty() && self.chi3.is_empty() && self.chi4.is_empty()
    }

    /// Terms with negative damping (gain).
    pub fn active_terms(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        for (name, terms) in [
            ("chi1", &self.chi1),
            ("chi3", &self.chi3),
            ("chi4", &self.chi4),
        ] {
            for (i, t) in terms.iter().enumerate() {
                if matches!(t.kind, ResponseKind::Lorentz { damping, .. } if damping < 0.0) {
                    out.push((name, i));
                }
            }
        }
        out
    }

    pub fn laplace(&self, s: C64) -> SusceptibilitySet<C64> {
        let sum = |terms: &[ResponseTerm]| {
            terms
                .iter()
                .fold(Matrix3::zeros(), |acc, t| acc + t.laplace(s))
        };
        let chi3 = sum(&self.chi3);
        SusceptibilitySet {
            chi1: sum(&self.chi1),
            chi2: chi3.transpose(),
            chi3,
            chi4: sum(&self.chi4),
        }
    }

    pub fn time(&self, t: f64) -> Result<SusceptibilitySet<f64>, MediumError> {
        if !t.is_finite() {
            return Err(MediumError::NonFinitePoint(t));
        }
        if t <= 0.0 {
            return Ok(SusceptibilitySet::zero());
        }
        let sum = |terms: &[ResponseTerm]| {
            terms
                .iter()
                .fold(Matrix3::zeros(), |acc, x| acc + x.time(t))
        };
        let chi3 = sum(&self.chi3);
        Ok(SusceptibilitySet {
            chi1: sum(&self.chi1),
            chi2: chi3.transpose(),
            chi3,
            chi4: sum(&self.chi4),
        })
    }
}
