//! Elimination of the magnetization from the constitutive relations.
//!
//! Starting from `P = P_N + χ₁E + χ₂B`, `M = M_N + χ₃E + χ₄B` and
//! `B = μ₀(H + M)`, solving for `M` gives `P = P′_N + η₁E + η₂H` and
//! `M = M′_N + η₃E + η₄H` with `A = I − μ₀χ₄`:
//!
//! ```text
//! η₁ = χ₁ + μ₀χ₂A⁻¹χ₃   η₂ = μ₀χ₂A⁻¹   η₃ = A⁻¹χ₃   η₄ = μ₀A⁻¹χ₄
//! M′_N = A⁻¹M_N          P′_N = P_N + μ₀χ₂A⁻¹M_N
//! ```
//!
//! A second set of formulas built on `(I − μ₀χ₃)⁻¹` is available for
//! comparison only; it does not satisfy the original relations in general and
//! is never used by the solver.

use nalgebra::{Matrix3, SMatrix};

use super::{MediumError, SusceptibilitySet};
use crate::linalg::invert3;
use crate::profile::Profile;
use crate::C64;

/// Condition number above which `I − μ₀χ` is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaConvention {
    /// `(I − μ₀χ₄)⁻¹` elimination, used everywhere in the solver.
    Derived,
    /// `(I − μ₀χ₃)⁻¹` formulas, kept for comparison reports.
    Alternate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSet {
    pub eta1: Matrix3<C64>,
    pub eta2: Matrix3<C64>,
    pub eta3: Matrix3<C64>,
    pub eta4: Matrix3<C64>,
    pub convention: EtaConvention,
    /// Condition number of the inverted matrix.
    pub condition: f64,
}

impl EtaSet {
    pub fn zero() -> Self {
        EtaSet {
            eta1: Matrix3::zeros(),
            eta2: Matrix3::zeros(),
            eta3: Matrix3::zeros(),
            eta4: Matrix3::zeros(),
            convention: EtaConvention::Derived,
            condition: 1.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        let z = C64::new(0.0, 0.0);
        [self.eta1, self.eta2, self.eta3, self.eta4]
            .iter()
            .all(|m| m.iter().all(|x| *x == z))
    }
}

fn inverse_checked(a: &Matrix3<C64>) -> Result<(Matrix3<C64>, f64), MediumError> {
    match invert3(a) {
        Some((inv, cond)) if cond <= SINGULAR_CONDITION => Ok((inv, cond)),
        Some((_, cond)) => Err(MediumError::SingularElimination { condition: cond }),
        None => Err(MediumError::SingularElimination {
            condition: f64::INFINITY,
        }),
    }
}

pub fn eliminate_magnetization(
    chi: &SusceptibilitySet<C64>,
    mu0: f64,
) -> Result<EtaSet, MediumError> {
    let mu0 = C64::new(mu0, 0.0);
    let a = Matrix3::identity() - chi.chi4 * mu0;
    let (ainv, condition) = inverse_checked(&a)?;
    let chi2_ainv = chi.chi2 * ainv;
    Ok(EtaSet {
        eta1: chi.chi1 + chi2_ainv * chi.chi3 * mu0,
        eta2: chi2_ainv * mu0,
        eta3: ainv * chi.chi3,
        eta4: ainv * chi.chi4 * mu0,
        convention: EtaConvention::Derived,
        condition,
    })
}

/// The `(I − μ₀χ₃)⁻¹` variant, for comparison only.
pub fn eliminate_magnetization_alternate(
    chi: &SusceptibilitySet<C64>,
    mu0: f64,
) -> Result<EtaSet, MediumError> {
    let mu0 = C64::new(mu0, 0.0);
    let a = Matrix3::identity() - chi.chi3 * mu0;
    let (ainv, condition) = inverse_checked(&a)?;
    Ok(EtaSet {
        eta1: chi.chi1 + chi.chi2 * ainv * chi.chi4 * mu0,
        eta2: chi.chi2 * ainv * mu0,
        eta3: ainv * chi.chi4,
        eta4: chi.chi3 * ainv * mu0,
        convention: EtaConvention::Alternate,
        condition,
    })
}

/// Frobenius distance between the two conventions, per η tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaComparison {
    pub derived: EtaSet,
    pub alternate: EtaSet,
    pub difference: [f64; 4],
}

pub fn compare_eta_conventions(
    chi: &SusceptibilitySet<C64>,
    mu0: f64,
) -> Result<EtaComparison, MediumError> {
    let derived = eliminate_magnetization(chi, mu0)?;
    let alternate = eliminate_magnetization_alternate(chi, mu0)?;
    let difference = [
        (derived.eta1 - alternate.eta1).norm(),
        (derived.eta2 - alternate.eta2).norm(),
        (derived.eta3 - alternate.eta3).norm(),
        (derived.eta4 - alternate.eta4).norm(),
    ];
    Ok(EtaComparison {
        derived,
        alternate,
        difference,
    })
}

/// Classical noise polarization and magnetization amplitudes as functions of
/// `z` at fixed `(k∥, s)`.
#[derive(Debug, Clone, Default)]
pub struct NoiseSourceSpec {
    pub p: Profile<3>,
    pub m: Profile<3>,
    /// `true` once transformed into `P′_N`, `M′_N`.
    pub primed: bool,
    pub convention: Option<EtaConvention>,
}

impl NoiseSourceSpec {
    pub fn zero() -> Self {
        NoiseSourceSpec::default()
    }

    pub fn new(p: Profile<3>, m: Profile<3>) -> Self {
        NoiseSourceSpec {
            p,
            m,
            primed: false,
            convention: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.m.is_zero()
    }
}

/// `M′_N = A⁻¹M_N`, `P′_N = P_N + μ₀χ₂A⁻¹M_N` with `A = I − μ₀χ₄`.
pub fn transform_noise_sources(
    chi: &SusceptibilitySet<C64>,
    raw: &NoiseSourceSpec,
    mu0: f64,
) -> Result<NoiseSourceSpec, MediumError> {
    transform_with(chi, raw, mu0, EtaConvention::Derived)
}

pub(crate) fn transform_with(
    chi: &SusceptibilitySet<C64>,
    raw: &NoiseSourceSpec,
    mu0: f64,
    convention: EtaConvention,
) -> Result<NoiseSourceSpec, MediumError> {
    let mu0 = C64::new(mu0, 0.0);
    let inverted = match convention {
        EtaConvention::Derived => chi.chi4,
        EtaConvention::Alternate => chi.chi3,
    };
    let (ainv, _) = inverse_checked(&(Matrix3::identity() - inverted * mu0))?;
    let m_prime = raw.m.map(&ainv);
    let cross: SMatrix<C64, 3, 3> = chi.chi2 * ainv * mu0;
    let p_prime = raw.p.add(&raw.m.map(&cross));
    Ok(NoiseSourceSpec {
        p: p_prime,
        m: m_prime,
        primed: true,
        convention: Some(convention),
    })
}
