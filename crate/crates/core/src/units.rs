//! Unit systems.

use crate::C64;

/// Vacuum constants of the unit system in use.
///
/// Every operation takes the unit system explicitly; nothing is global.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub eps0: f64,
    pub mu0: f64,
}

impl Units {
    /// `ε₀ = μ₀ = c = 1`.
    pub const NORMALIZED: Units = Units {
        eps0: 1.0,
        mu0: 1.0,
    };

    /// SI values (CODATA 2018).
    pub const SI: Units = Units {
        eps0: 8.8541878128e-12,
        mu0: 1.25663706212e-6,
    };

    pub fn normalized() -> Self {
        Self::NORMALIZED
    }

    pub fn si() -> Self {
        Self::SI
    }

    /// Speed of light `1/√(ε₀μ₀)`.
    pub fn c(&self) -> f64 {
        1.0 / (self.eps0 * self.mu0).sqrt()
    }

    /// Vacuum wave impedance `√(μ₀/ε₀)`.
    pub fn impedance(&self) -> f64 {
        (self.mu0 / self.eps0).sqrt()
    }

    /// `s² ε₀ μ₀`.
    pub fn s2_eps_mu(&self, s: C64) -> C64 {
        s * s * (self.eps0 * self.mu0)
    }
}

impl Default for Units {
    fn default() -> Self {
        Self::NORMALIZED
    }
}
