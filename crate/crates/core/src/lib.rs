//! Laplace-domain field solver for stratified bi-anisotropic magnetodielectric media.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`medium`] builds causal susceptibility tensors (from oscillator coupling
//!    models or Lorentz pole lists) and eliminates the magnetization to obtain the
//!    `η` tensors relating `P`, `M` to `E`, `H`.
//! 2. [`em_system`] assembles the Fourier-reduced 6×6 Maxwell block system and
//!    eliminates the longitudinal components, leaving the 4×4 propagation matrix
//!    `Θ` acting on the tangential state `Λ = (E_x, E_y, H_x, H_y)`.
//! 3. [`mode_solver`] eigen-decomposes `Θ` in each layer and classifies the modes by
//!    decay direction.
//! 4. [`stack_solver`] matches the per-layer solutions across interfaces, and
//!    [`synthesis`] turns the result back into field profiles and time signals.
//!
//! [`reference`] holds independent closed-form and brute-force oracles used to
//! validate the solver path.

pub mod em_system;
pub mod linalg;
pub mod medium;
pub mod mode_solver;
pub mod profile;
pub mod quadrature;
pub mod reference;
pub mod stack_solver;
pub mod synthesis;
pub mod units;

pub use nalgebra::Complex;

/// Complex double used throughout the crate.
pub type C64 = Complex<f64>;

/// Shorthand for building a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Sign convention of the one-sided Laplace transform.
///
/// `Forward` transforms `O(t)` for `t > 0` and uses the upper signs of the
/// block system; `Backward` transforms `O(-t)` and uses the lower signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    /// `+1` for forward, `-1` for backward.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// In-plane wave vector `k∥ = (k_x, k_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kpar {
    pub kx: f64,
    pub ky: f64,
}

impl Kpar {
    pub const ZERO: Kpar = Kpar { kx: 0.0, ky: 0.0 };

    pub fn new(kx: f64, ky: f64) -> Self {
        Kpar { kx, ky }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}
