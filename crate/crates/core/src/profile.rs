//! z-dependent vector amplitudes used for sources.
//!
//! A [`Profile`] is a finite sum of exponentials `a·e^{κz}` (constants and
//! plane waves are special cases) plus any number of compactly supported
//! arbitrary functions. Exponential parts are handled in closed form by the
//! particular-solution machinery; function parts go through quadrature.

use std::fmt;
use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::C64;

/// `amplitude · e^{rate·z}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm<const N: usize> {
    pub amplitude: SVector<C64, N>,
    pub rate: C64,
}

type VecFn<const N: usize> = Arc<dyn Fn(f64) -> SVector<C64, N> + Send + Sync>;

/// A function that vanishes outside `support`.
#[derive(Clone)]
pub struct FunctionTerm<const N: usize> {
    pub support: (f64, f64),
    pub f: VecFn<N>,
}

impl<const N: usize> FunctionTerm<N> {
    pub fn eval(&self, z: f64) -> SVector<C64, N> {
        if z < self.support.0 || z > self.support.1 {
            SVector::zeros()
        } else {
            (self.f)(z)
        }
    }
}

impl<const N: usize> fmt::Debug for FunctionTerm<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FunctionTerm")
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Profile<const N: usize> {
    pub exponentials: Vec<ExpTerm<N>>,
    pub functions: Vec<FunctionTerm<N>>,
}

impl<const N: usize> Profile<N> {
    pub fn zero() -> Self {
        Profile {
            exponentials: Vec::new(),
            functions: Vec::new(),
        }
    }

    pub fn constant(amplitude: SVector<C64, N>) -> Self {
        Self::exponential(amplitude, C64::new(0.0, 0.0))
    }

    pub fn exponential(amplitude: SVector<C64, N>, rate: C64) -> Self {
        Profile {
            exponentials: vec![ExpTerm { amplitude, rate }],
            functions: Vec::new(),
        }
    }

    pub fn function<F>(support: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> SVector<C64, N> + Send + Sync + 'static,
    {
        Profile {
            exponentials: Vec::new(),
            functions: vec![FunctionTerm {
                support,
                f: Arc::new(f),
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.functions.is_empty()
            && self
                .exponentials
                .iter()
                .all(|t| t.amplitude.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }

    pub fn eval(&self, z: f64) -> SVector<C64, N> {
        let mut out = SVector::zeros();
        for t in &self.exponentials {
            out += t.amplitude * (t.rate * z).exp();
        }
        for t in &self.functions {
            out += t.eval(z);
        }
        out
    }

    /// Pointwise linear map `z ↦ M·p(z)`.
    pub fn map<const M: usize>(&self, m: &SMatrix<C64, M, N>) -> Profile<M> {
        let exponentials = self
            .exponentials
            .iter()
            .map(|t| ExpTerm {
                amplitude: m * t.amplitude,
                rate: t.rate,
            })
            .collect();
        let functions = self
            .functions
            .iter()
            .map(|t| {
                let inner = t.f.clone();
                let m = *m;
                FunctionTerm {
                    support: t.support,
                    f: Arc::new(move |z| m * inner(z)) as VecFn<M>,
                }
            })
            .collect();
        Profile {
            exponentials,
            functions,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(&(SMatrix::<C64, N, N>::identity() * c))
    }

    pub fn add(&self, other: &Profile<N>) -> Profile<N> {
        let mut out = self.clone();
        out.exponentials.extend(other.exponentials.iter().cloned());
        out.functions.extend(other.functions.iter().cloned());
        out
    }
}

/// Stacks a 3-vector profile on top of (or below) zeros into a 6-vector profile.
pub fn embed3_into6(p: &Profile<3>, upper: bool) -> Profile<6> {
    let offset = if upper { 0 } else { 3 };
    let m = SMatrix::<C64, 6, 3>::from_fn(|i, j| {
        if i == j + offset {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    p.map(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use nalgebra::{Matrix2x3, Vector3};

    #[test]
    fn eval_sums_all_parts() {
        let p = Profile::exponential(
            Vector3::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 2.0)),
            c64(0.0, 1.0),
        )
        .add(&Profile::function((0.0, 1.0), |z| {
            Vector3::new(c64(z, 0.0), c64(0.0, 0.0), c64(0.0, 0.0))
        }));
        let v = p.eval(0.5);
        assert!((v[0] - (c64(0.0, 0.5).exp() + c64(0.5, 0.0))).norm() < 1e-15);
        assert_eq!(p.eval(2.0)[0], c64(0.0, 2.0).exp());
    }

    #[test]
    fn map_is_pointwise() {
        let p = Profile::constant(Vector3::new(c64(1.0, 0.0), c64(2.0, 0.0), c64(3.0, 0.0))).add(
            &Profile::function((-1.0, 1.0), |z| Vector3::repeat(c64(z, 0.0))),
        );
        let m = Matrix2x3::new(
            c64(1.0, 0.0),
            c64(0.0, 0.0),
            c64(0.0, 1.0),
            c64(0.0, 0.0),
            c64(2.0, 0.0),
            c64(0.0, 0.0),
        );
        let q = p.map(&m);
        for z in [-0.5, 0.0, 0.25, 3.0] {
            assert!((q.eval(z) - m * p.eval(z)).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_detection() {
        assert!(Profile::<3>::zero().is_zero());
        assert!(Profile::<3>::constant(Vector3::zeros()).is_zero());
        assert!(!Profile::<3>::constant(Vector3::repeat(c64(1.0, 0.0))).is_zero());
    }
}
