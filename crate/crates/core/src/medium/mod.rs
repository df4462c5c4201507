//! Constitutive response of a layer.
//!
//! A medium is described either by an oscillator [`CouplingModel`] (the
//! susceptibilities follow from sine transforms of the coupling tensors) or by
//! a [`PoleModel`] that prescribes the Laplace-domain susceptibilities
//! directly. Either way the result is a [`SusceptibilitySet`], which
//! [`eliminate_magnetization`] turns into the `η` tensors used by the field
//! equations.

mod coupling;
mod eta;
mod poles;

pub use coupling::{
    susceptibility_laplace, susceptibility_time, CouplingModel, Reservoir, ENVELOPE_MIN_WIDTH,
};
pub use eta::{
    compare_eta_conventions, eliminate_magnetization, eliminate_magnetization_alternate,
    transform_noise_sources, EtaComparison, EtaConvention, EtaSet, NoiseSourceSpec,
    SINGULAR_CONDITION,
};
pub use poles::{PoleModel, ResponseKind, ResponseTerm};

use nalgebra::{Matrix3, Scalar};
use thiserror::Error;

use crate::quadrature::{QuadConfig, QuadError};
use crate::units::Units;
use crate::C64;

/// The four response tensors of a layer at one evaluation point.
///
/// `T = C64` for a Laplace-domain slice, `T = f64` for a time-domain slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilitySet<T: Scalar> {
    pub chi1: Matrix3<T>,
    pub chi2: Matrix3<T>,
    pub chi3: Matrix3<T>,
    pub chi4: Matrix3<T>,
}

impl<T: Scalar + num_zero::Zero> SusceptibilitySet<T> {
    pub fn zero() -> Self {
        SusceptibilitySet {
            chi1: Matrix3::from_element(T::zero()),
            chi2: Matrix3::from_element(T::zero()),
            chi3: Matrix3::from_element(T::zero()),
            chi4: Matrix3::from_element(T::zero()),
        }
    }
}

mod num_zero {
    pub trait Zero {
        fn zero() -> Self;
    }
    impl Zero for f64 {
        fn zero() -> Self {
            0.0
        }
    }
    impl Zero for crate::C64 {
        fn zero() -> Self {
            crate::C64::new(0.0, 0.0)
        }
    }
}

impl SusceptibilitySet<C64> {
    /// Symmetry defect `‖χ₂ − χ₃ᵀ‖_F`.
    pub fn symmetry_defect(&self) -> f64 {
        (self.chi2 - self.chi3.transpose()).norm()
    }

    /// Isotropic dielectric with relative permittivity `ε_r`: `χ₁ = ε₀(ε_r − 1)·I`.
    pub fn isotropic_dielectric(eps_r: C64, units: &Units) -> Self {
        let mut out = Self::zero();
        out.chi1 = Matrix3::identity() * ((eps_r - 1.0) * units.eps0);
        out
    }
}

impl SusceptibilitySet<f64> {
    pub fn symmetry_defect(&self) -> f64 {
        (self.chi2 - self.chi3.transpose()).norm()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MediumError {
    #[error("invalid medium model: {0}")]
    InvalidModel(String),
    #[error("susceptibility quadrature failed for {tensor}[{row}][{col}]: {source}")]
    Quadrature {
        tensor: &'static str,
        row: usize,
        col: usize,
        source: QuadError,
    },
    #[error("susceptibility quadrature failed near the resonance ω = {omega} (s² + ω² ≈ 0) for {tensor}[{row}][{col}]")]
    Resonance {
        omega: f64,
        tensor: &'static str,
        row: usize,
        col: usize,
    },
    #[error("Laplace variable s = {s} outside the closed right half-plane")]
    InvalidLaplacePoint { s: C64 },
    #[error("non-finite evaluation point {0}")]
    NonFinitePoint(f64),
    #[error("(I − μ₀χ₄) is singular (condition number {condition:.3e})")]
    SingularElimination { condition: f64 },
}

/// Response model of a region.
#[derive(Debug, Clone)]
pub enum MediumModel {
    Vacuum,
    Coupling(CouplingModel),
    Poles(PoleModel),
}

/// A named medium.
#[derive(Debug, Clone)]
pub struct Medium {
    pub name: String,
    pub model: MediumModel,
}

impl Medium {
    pub fn vacuum() -> Self {
        Medium {
            name: "vacuum".into(),
            model: MediumModel::Vacuum,
        }
    }

    pub fn new(name: impl Into<String>, model: MediumModel) -> Self {
        Medium {
            name: name.into(),
            model,
        }
    }

    /// Non-dispersive isotropic dielectric of refractive index `n` (μ_r = 1).
    pub fn isotropic(name: impl Into<String>, n: C64, units: &Units) -> Self {
        let chi1 = Matrix3::identity() * ((n * n - 1.0) * units.eps0);
        Medium::new(
            name,
            MediumModel::Poles(PoleModel {
                chi1: vec![ResponseTerm::instantaneous(chi1)],
                ..PoleModel::default()
            }),
        )
    }

    pub fn is_vacuum(&self) -> bool {
        match &self.model {
            MediumModel::Vacuum => true,
            MediumModel::Poles(p) => p.is_empty(),
            MediumModel::Coupling(c) => c.reservoirs.is_empty(),
        }
    }

    /// Laplace-domain susceptibilities used on the solver path.
    ///
    /// Envelope reservoirs of a coupling model use their closed-form transform;
    /// tabulated reservoirs go through quadrature.
    pub fn laplace(&self, s: C64) -> Result<SusceptibilitySet<C64>, MediumError> {
        match &self.model {
            MediumModel::Vacuum => Ok(SusceptibilitySet::zero()),
            MediumModel::Coupling(c) => c.laplace_mixed(s, &QuadConfig::default()),
            MediumModel::Poles(p) => Ok(p.laplace(s)),
        }
    }

    /// Time-domain susceptibilities, zero for `t ≤ 0`.
    pub fn time(&self, t: f64) -> Result<SusceptibilitySet<f64>, MediumError> {
        match &self.model {
            MediumModel::Vacuum => Ok(SusceptibilitySet::zero()),
            MediumModel::Coupling(c) => susceptibility_time(c, t, &QuadConfig::default()),
            MediumModel::Poles(p) => p.time(t),
        }
    }

    /// `η` tensors at `s` (re-derived elimination).
    pub fn eta(&self, s: C64, units: &Units) -> Result<EtaSet, MediumError> {
        if self.is_vacuum() {
            return Ok(EtaSet::zero());
        }
        eliminate_magnetization(&self.laplace(s)?, units.mu0)
    }
}
