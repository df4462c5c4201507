//! Eigenmodes of the propagation matrix `Θ`.
//!
//! A homogeneous layer carries the four modes `R_j e^{−σΩ_j z}`. Eigenvalues
//! come from a shifted QR iteration; eigenvectors are taken from the null
//! space of `Θ − ΩI` so that degenerate pairs (always present in vacuum) are
//! resolved into a well-conditioned basis.

use nalgebra::{DMatrix, Matrix2, Matrix4, Vector4};
use thiserror::Error;

use crate::linalg::{condition_number, eigenvalues4};
use crate::units::Units;
use crate::{Direction, Kpar, C64};

/// Eigenvector matrices above this condition number are rejected.
pub const DEFECTIVE_CONDITION: f64 = 1e12;
/// `|Re Ω| ≤ MARGINAL_TOL·‖Θ‖` is classified marginal.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error("Θ has non-finite entries")]
    NonFinite,
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("Θ is defective or nearly so (eigenvector condition {condition:.3e})")]
    Defective { condition: f64 },
    #[error("eigenpair residual {residual:.3e} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("vacuum Θ undefined at s = 0")]
    ZeroFrequency,
    #[error("branch point: k∥² + s²ε₀μ₀ = {value}")]
    BranchPoint { value: C64 },
}

/// Direction in which `e^{−Ωz}` decays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decay {
    TowardPlusInfinity,
    TowardMinusInfinity,
    Marginal,
}

impl Decay {
    fn flipped(self) -> Self {
        match self {
            Decay::TowardPlusInfinity => Decay::TowardMinusInfinity,
            Decay::TowardMinusInfinity => Decay::TowardPlusInfinity,
            Decay::Marginal => Decay::Marginal,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeBasis {
    pub omega: [C64; 4],
    /// Eigenvectors as columns.
    pub r: Matrix4<C64>,
    /// Classification of the forward factor `e^{−Ω_j z}`.
    pub decay: [Decay; 4],
    pub theta_norm: f64,
    pub kpar: Option<Kpar>,
    pub s: Option<C64>,
}

impl ModeBasis {
    pub fn vector(&self, j: usize) -> Vector4<C64> {
        self.r.column(j).into_owned()
    }

    /// Classification of mode `j` for the given transform direction.
    ///
    /// The backward solution carries `e^{+Ω_j z}`, so its decay direction is
    /// the mirror image of the forward one.
    pub fn decay_for(&self, j: usize, dir: Direction) -> Decay {
        match dir {
            Direction::Forward => self.decay[j],
            Direction::Backward => self.decay[j].flipped(),
        }
    }

    /// Exponent rates `λ_j = σΩ_j` of the factors `e^{−λ_j z}`.
    pub fn rates(&self, dir: Direction) -> [C64; 4] {
        let sg = dir.sign();
        self.omega.map(|w| w * sg)
    }

    pub fn inverse(&self) -> Option<Matrix4<C64>> {
        self.r.try_inverse()
    }

    /// Spectral projector onto the span of the modes in `idx`.
    pub fn projector(&self, idx: &[usize]) -> Option<Matrix4<C64>> {
        let inv = self.inverse()?;
        let mut p = Matrix4::zeros();
        for &j in idx {
            p += self.r.column(j) * inv.row(j);
        }
        Some(p)
    }

    pub fn with_point(mut self, kpar: Kpar, s: C64) -> Self {
        self.kpar = Some(kpar);
        self.s = Some(s);
        self
    }

    /// Largest `‖ΘR_j − Ω_jR_j‖` over the four pairs.
    pub fn residual(&self, theta: &Matrix4<C64>) -> f64 {
        (0..4)
            .map(|j| (theta * self.vector(j) - self.vector(j) * self.omega[j]).norm())
            .fold(0.0, f64::max)
    }
}

fn classify(w: C64, scale: f64) -> Decay {
    let tol = MARGINAL_TOL * scale;
    if w.re > tol {
        Decay::TowardPlusInfinity
    } else if w.re < -tol {
        Decay::TowardMinusInfinity
    } else {
        Decay::Marginal
    }
}

/// Unit max-magnitude component; first significant component real positive.
fn normalize(v: Vector4<C64>) -> Vector4<C64> {
    let m = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return v;
    }
    let v = v / C64::new(m, 0.0);
    let lead = v
        .iter()
        .find(|z| z.norm() > 1e-10)
        .copied()
        .unwrap_or(C64::new(1.0, 0.0));
    let phase = lead.conj() / lead.norm();
    v * phase
}

/// Sorts by real part, then by imaginary part among entries whose real parts
/// agree to within `tol`.
fn sort_by_eig<T>(items: &mut [T], key: impl Fn(&T) -> C64, tol: f64) {
    items.sort_by(|a, b| key(a).re.total_cmp(&key(b).re));
    let mut start = 0;
    while start < items.len() {
        let mut end = start + 1;
        while end < items.len() && key(&items[end]).re - key(&items[end - 1]).re <= tol {
            end += 1;
        }
        items[start..end].sort_by(|a, b| key(a).im.total_cmp(&key(b).im));
        start = end;
    }
}

/// Full eigendecomposition of a general complex 4×4 matrix.
pub fn eigenmodes(theta: &Matrix4<C64>) -> Result<ModeBasis, ModeError> {
    if theta
        .iter()
        .any(|z| !(z.re.is_finite() && z.im.is_finite()))
    {
        return Err(ModeError::NonFinite);
    }
    let scale = theta.norm();
    if scale == 0.0 {
        return Ok(ModeBasis {
            omega: [C64::new(0.0, 0.0); 4],
            r: Matrix4::identity(),
            decay: [Decay::Marginal; 4],
            theta_norm: 0.0,
            kpar: None,
            s: None,
        });
    }
    let mut eig = eigenvalues4(theta)
        .ok_or(ModeError::NoConvergence)?
        .to_vec();
    let cluster_tol = 1e-8 * scale;
    sort_by_eig(&mut eig, |w| *w, cluster_tol);

    // group nearly equal eigenvalues
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for w in eig {
        match clusters.last_mut() {
            Some(c) if (c[0] - w).norm() <= cluster_tol => c.push(w),
            _ => clusters.push(vec![w]),
        }
    }

    let mut pairs: Vec<(C64, Vector4<C64>)> = Vec::with_capacity(4);
    for cluster in clusters {
        let m = cluster.len();
        let mean = cluster.iter().sum::<C64>() / C64::new(m as f64, 0.0);
        let shifted =
            DMatrix::from_iterator(4, 4, (theta - Matrix4::identity() * mean).iter().cloned());
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        // singular values are sorted in descending order
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let basis: Vec<Vector4<C64>> = order[..m]
            .iter()
            .map(|&i| Vector4::from_fn(|k, _| v_t[(i, k)].conj()))
            .collect();
        if m == 1 {
            let v = basis[0];
            let w = (v.adjoint() * theta * v)[(0, 0)];
            pairs.push((w, normalize(v)));
            continue;
        }
        // restricted operator on the candidate subspace
        let b = DMatrix::from_fn(m, m, |i, j| (basis[i].adjoint() * theta * basis[j])[(0, 0)]);
        let off = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| b[(i, j)].norm())
            .fold(0.0, f64::max);
        if off <= 1e-12 * scale {
            for (i, v) in basis.iter().enumerate() {
                pairs.push((b[(i, i)], normalize(*v)));
            }
        } else if m == 2 {
            let bb = Matrix2::new(b[(0, 0)], b[(0, 1)], b[(1, 0)], b[(1, 1)]);
            let half_tr = (bb[(0, 0)] + bb[(1, 1)]) * 0.5;
            let disc = (((bb[(0, 0)] - bb[(1, 1)]) * 0.5).powi(2) + bb[(0, 1)] * bb[(1, 0)]).sqrt();
            for w in [half_tr - disc, half_tr + disc] {
                let (a, c) = (bb[(0, 1)], w - bb[(0, 0)]);
                let y = if a.norm() + c.norm() > 0.0 {
                    if a.norm() >= (w - bb[(1, 1)]).norm() {
                        nalgebra::Vector2::new(a, c)
                    } else {
                        nalgebra::Vector2::new(w - bb[(1, 1)], bb[(1, 0)])
                    }
                } else {
                    nalgebra::Vector2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
                };
                let v = basis[0] * y[0] + basis[1] * y[1];
                pairs.push((w, normalize(v)));
            }
        } else {
            // higher multiplicity without a diagonal restriction: defective
            return Err(ModeError::Defective {
                condition: f64::INFINITY,
            });
        }
    }

    sort_by_eig(&mut pairs, |p| p.0, cluster_tol);
    let omega = [pairs[0].0, pairs[1].0, pairs[2].0, pairs[3].0];
    let r = Matrix4::from_columns(&[pairs[0].1, pairs[1].1, pairs[2].1, pairs[3].1]);
    let condition = condition_number(&r);
    if condition.is_nan() || condition > DEFECTIVE_CONDITION {
        return Err(ModeError::Defective { condition });
    }
    let basis = ModeBasis {
        omega,
        r,
        decay: omega.map(|w| classify(w, scale)),
        theta_norm: scale,
        kpar: None,
        s: None,
    };
    let residual = basis.residual(theta);
    if residual > 1e-10 * scale {
        return Err(ModeError::Residual { residual });
    }
    Ok(basis)
}

/// Closed-form vacuum propagation matrix.
pub fn vacuum_theta(
    kpar: Kpar,
    s: C64,
    _dir: Direction,
    units: &Units,
) -> Result<Matrix4<C64>, ModeError> {
    if s.norm() == 0.0 {
        return Err(ModeError::ZeroFrequency);
    }
    let (kx, ky) = (kpar.kx, kpar.ky);
    let se = s * units.eps0;
    let sm = s * units.mu0;
    let z = C64::new(0.0, 0.0);
    Ok(Matrix4::new(
        z,
        z,
        -(kx * ky) / se,
        sm + kx * kx / se,
        z,
        z,
        -sm - ky * ky / se,
        (kx * ky) / se,
        (kx * ky) / sm,
        -se - kx * kx / sm,
        z,
        z,
        se + ky * ky / sm,
        -(kx * ky) / sm,
        z,
        z,
    ))
}

/// Vacuum wavenumber `q = √(k∥² + s²ε₀μ₀)`, principal branch.
pub fn vacuum_q(kpar: Kpar, s: C64, units: &Units) -> Result<C64, ModeError> {
    let arg = units.s2_eps_mu(s) + kpar.norm_sqr();
    if arg.norm() == 0.0 {
        return Err(ModeError::BranchPoint { value: arg });
    }
    Ok(arg.sqrt())
}

/// Closed-form vacuum eigenvalues `(−q, −q, q, q)` and the matching unnormalized
/// eigenvectors.
pub fn vacuum_modes(kpar: Kpar, s: C64, units: &Units) -> Result<ModeBasis, ModeError> {
    if s.norm() == 0.0 {
        return Err(ModeError::ZeroFrequency);
    }
    let q = vacuum_q(kpar, s, units)?;
    let (kx, ky) = (kpar.kx, kpar.ky);
    let s2em = units.s2_eps_mu(s);
    let den = s * units.eps0 * q;
    let a = (s2em + kx * kx) / den;
    let b = C64::new(kx * ky, 0.0) / den;
    let c = (s2em + ky * ky) / den;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let r1 = Vector4::new(-a, -b, zero, one);
    let r2 = Vector4::new(b, c, one, zero);
    let r3 = Vector4::new(a, b, zero, one);
    let r4 = Vector4::new(-b, -c, one, zero);
    let omega = [-q, -q, q, q];
    let theta = vacuum_theta(kpar, s, Direction::Forward, units)?;
    let scale = theta.norm();
    Ok(ModeBasis {
        omega,
        r: Matrix4::from_columns(&[r1, r2, r3, r4]),
        decay: omega.map(|w| classify(w, scale)),
        theta_norm: scale,
        kpar: Some(kpar),
        s: Some(s),
    })
}
