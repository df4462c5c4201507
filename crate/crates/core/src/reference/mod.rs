//! Independent ground-truth generators.
//!
//! Nothing here calls into the solver path: the slab formulas, the ODE
//! integrator, the full-system residual and the closed-form elimination
//! coefficients are all written out from scratch so that agreement with the
//! solver is meaningful.

mod closed_form;
mod fresnel;
mod ode;
mod residual;

use std::fmt;

use thiserror::Error;

use crate::C64;

pub use closed_form::{
    closed_form_coefficients, closed_form_source, closed_form_theta, ClosedFormCoefficients,
};
pub use fresnel::{fresnel_airy, Polarization};
pub use ode::{integrate_layer, IntegratorConfig};
pub use residual::residual_full_system;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grazing incidence (cos θ = {0:e})")]
    GrazingIncidence(f64),
    #[error("refractive index must be nonzero")]
    ZeroIndex,
    #[error("incidence angle {0} rad is not a propagating direction")]
    InvalidAngle(f64),
    #[error("step size underflow after {steps} steps; the layer is too stiff")]
    Stiffness { steps: usize },
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Absolute,
    Relative,
}

/// Side-by-side comparison of an oracle value and a solver value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub scenario: String,
    pub oracle: Vec<C64>,
    pub solver: Vec<C64>,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub mode: ErrorMode,
    pub pass: bool,
}

impl OracleReport {
    /// Max-norm errors; the relative error is scaled by the largest oracle entry.
    pub fn compare(
        scenario: impl Into<String>,
        oracle: &[C64],
        solver: &[C64],
        tolerance: f64,
        mode: ErrorMode,
    ) -> Self {
        assert_eq!(
            oracle.len(),
            solver.len(),
            "oracle and solver lengths differ"
        );
        let abs_error = oracle
            .iter()
            .zip(solver)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = oracle.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let rel_error = if scale > 0.0 {
            abs_error / scale
        } else {
            abs_error
        };
        let err = match mode {
            ErrorMode::Absolute => abs_error,
            ErrorMode::Relative => rel_error,
        };
        OracleReport {
            scenario: scenario.into(),
            oracle: oracle.to_vec(),
            solver: solver.to_vec(),
            abs_error,
            rel_error,
            tolerance,
            mode,
            pass: err <= tolerance,
        }
    }

    pub fn error(&self) -> f64 {
        match self.mode {
            ErrorMode::Absolute => self.abs_error,
            ErrorMode::Relative => self.rel_error,
        }
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.mode {
            ErrorMode::Absolute => "abs",
            ErrorMode::Relative => "rel",
        };
        write!(
            f,
            "{} {}: {kind} error {:.3e} (tolerance {:.1e})",
            if self.pass { "ok  " } else { "FAIL" },
            self.scenario,
            self.error(),
            self.tolerance
        )
    }
}
