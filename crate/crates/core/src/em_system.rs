//! Fourier-reduced Maxwell system and elimination of the longitudinal fields.
//!
//! With fields ordered `F = (E_x, E_y, E_z, H_x, H_y, H_z)` the reduced system
//! reads `D ∂_z F + K F = J`. `D` is a fixed pattern of `±1` in the curl
//! positions; `K` collects the transverse wavevector and the medium response.
//! Rows 3 and 6 contain no derivative, so `E_z`, `H_z` are solved for
//! algebraically and substituted back, leaving
//!
//! ```text
//! Λ' + σ Θ Λ = G,   Λ = (E_x, E_y, H_x, H_y),   σ = +1 forward, −1 backward.
//! ```
//!
//! For the backward transform every entry of `K` changes sign while `D` does
//! not, so `Θ` is the same matrix for both directions.

use nalgebra::{
    Matrix2, Matrix2x4, Matrix3, Matrix4, Matrix4x6, SMatrix, Vector2, Vector4, Vector6,
};
use thiserror::Error;

use crate::medium::{EtaSet, NoiseSourceSpec};
use crate::profile::{embed3_into6, Profile};
use crate::units::Units;
use crate::{Direction, Kpar, C64};

pub type Matrix6 = SMatrix<C64, 6, 6>;

const LONG: [usize; 2] = [2, 5];
const TRANS: [usize; 4] = [0, 1, 3, 4];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmError {
    #[error("degenerate longitudinal pivot T33·W33 − Z33·Y33 = {pivot}")]
    DegeneratePivot { pivot: C64 },
    #[error("non-finite block entries at s = {s}")]
    NonFinite { s: C64 },
}

fn ic(x: f64) -> C64 {
    C64::new(0.0, x)
}

/// Coefficient pattern of `∂_z`.
pub fn derivative_pattern() -> Matrix6 {
    let mut d = Matrix6::zeros();
    d[(0, 1)] = C64::new(-1.0, 0.0);
    d[(1, 0)] = C64::new(1.0, 0.0);
    d[(3, 4)] = C64::new(-1.0, 0.0);
    d[(4, 3)] = C64::new(1.0, 0.0);
    d
}

/// Inverse of the transverse part of [`derivative_pattern`].
fn dtt_inverse() -> Matrix4<C64> {
    let one = C64::new(1.0, 0.0);
    let mut s = Matrix4::zeros();
    s[(0, 1)] = one;
    s[(1, 0)] = -one;
    s[(2, 3)] = one;
    s[(3, 2)] = -one;
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    /// Non-derivative part of the operator.
    pub k: Matrix6,
    pub kpar: Kpar,
    pub s: C64,
    pub dir: Direction,
}

impl BlockSystem {
    fn block(&self, r: usize, c: usize) -> Matrix3<C64> {
        self.k.fixed_view::<3, 3>(r, c).into_owned()
    }

    /// Non-derivative part of `T`.
    pub fn t(&self) -> Matrix3<C64> {
        self.block(0, 0)
    }

    pub fn y(&self) -> Matrix3<C64> {
        self.block(0, 3)
    }

    pub fn z(&self) -> Matrix3<C64> {
        self.block(3, 0)
    }

    /// Non-derivative part of `W`.
    pub fn w(&self) -> Matrix3<C64> {
        self.block(3, 3)
    }

    /// Applies the full operator to a field sample and its z-derivative.
    pub fn apply(&self, f: &Vector6<C64>, df: &Vector6<C64>) -> Vector6<C64> {
        derivative_pattern() * df + self.k * f
    }
}

pub fn assemble_blocks(
    eta: &EtaSet,
    kpar: Kpar,
    s: C64,
    dir: Direction,
    units: &Units,
) -> BlockSystem {
    let (kx, ky) = (kpar.kx, kpar.ky);
    let mut curl = Matrix3::zeros();
    curl[(0, 2)] = ic(ky);
    curl[(1, 2)] = ic(-kx);
    curl[(2, 0)] = ic(-ky);
    curl[(2, 1)] = ic(kx);
    let id = Matrix3::<C64>::identity();
    let t = curl + eta.eta3 * (s * units.mu0);
    let y = (id + eta.eta4) * (s * units.mu0);
    let z = -(id * C64::new(units.eps0, 0.0) + eta.eta1) * s;
    let w = curl - eta.eta2 * s;
    let mut k = Matrix6::zeros();
    k.fixed_view_mut::<3, 3>(0, 0).copy_from(&t);
    k.fixed_view_mut::<3, 3>(0, 3).copy_from(&y);
    k.fixed_view_mut::<3, 3>(3, 0).copy_from(&z);
    k.fixed_view_mut::<3, 3>(3, 3).copy_from(&w);
    if dir == Direction::Backward {
        k = -k;
    }
    BlockSystem { k, kpar, s, dir }
}

/// `E_z = α₁E_x + β₁E_y + γ₁H_x + δ₁H_y + e·(J₃, J₆)` and likewise for `H_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationCoeffs {
    pub alpha1: C64,
    pub beta1: C64,
    pub gamma1: C64,
    pub delta1: C64,
    pub alpha2: C64,
    pub beta2: C64,
    pub gamma2: C64,
    pub delta2: C64,
    /// Coefficients of `(J₃, J₆)` in `E_z`.
    pub ez_source: [C64; 2],
    /// Coefficients of `(J₃, J₆)` in `H_z`.
    pub hz_source: [C64; 2],
    pub pivot: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSystem {
    pub theta: Matrix4<C64>,
    pub coeffs: EliminationCoeffs,
    pub blocks: BlockSystem,
    /// `G = source_map · J`.
    pub source_map: Matrix4x6<C64>,
    /// `(E_z, H_z) = recover_lambda · Λ + recover_source · J`.
    pub recover_lambda: Matrix2x4<C64>,
    pub recover_source: SMatrix<C64, 2, 6>,
}

impl ThetaSystem {
    pub fn kpar(&self) -> Kpar {
        self.blocks.kpar
    }

    pub fn s(&self) -> C64 {
        self.blocks.s
    }

    pub fn dir(&self) -> Direction {
        self.blocks.dir
    }

    /// `σΘ`, the matrix appearing in `Λ' + σΘΛ = G`.
    pub fn signed_theta(&self) -> Matrix4<C64> {
        self.theta * C64::new(self.dir().sign(), 0.0)
    }
}

pub fn eliminate_longitudinal(blocks: &BlockSystem) -> Result<ThetaSystem, EmError> {
    let k = &blocks.k;
    if k.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(EmError::NonFinite { s: blocks.s });
    }
    let p = Matrix2::new(k[(2, 2)], k[(2, 5)], k[(5, 2)], k[(5, 5)]);
    let pivot = p[(0, 0)] * p[(1, 1)] - p[(1, 0)] * p[(0, 1)];
    let scale = (p[(0, 0)] * p[(1, 1)]).norm() + (p[(1, 0)] * p[(0, 1)]).norm();
    if pivot.norm() <= 1e-14 * scale || pivot.norm() == 0.0 {
        return Err(EmError::DegeneratePivot { pivot });
    }
    let pinv = Matrix2::new(p[(1, 1)], -p[(0, 1)], -p[(1, 0)], p[(0, 0)]) / pivot;

    let k_lt = Matrix2x4::from_fn(|i, j| k[(LONG[i], TRANS[j])]);
    let k_tl = SMatrix::<C64, 4, 2>::from_fn(|i, j| k[(TRANS[i], LONG[j])]);
    let k_tt = Matrix4::from_fn(|i, j| k[(TRANS[i], TRANS[j])]);

    let recover_lambda = -(pinv * k_lt);
    let mut recover_source = SMatrix::<C64, 2, 6>::zeros();
    for (c, &l) in LONG.iter().enumerate() {
        recover_source[(0, l)] = pinv[(0, c)];
        recover_source[(1, l)] = pinv[(1, c)];
    }

    let s_mat = dtt_inverse();
    let sigma = C64::new(blocks.dir.sign(), 0.0);
    let theta = s_mat * (k_tt + k_tl * recover_lambda) * sigma;

    let mut select_t = Matrix4x6::zeros();
    for (r, &t) in TRANS.iter().enumerate() {
        select_t[(r, t)] = C64::new(1.0, 0.0);
    }
    let source_map = s_mat * (select_t - k_tl * recover_source);

    let coeffs = EliminationCoeffs {
        alpha1: recover_lambda[(0, 0)],
        beta1: recover_lambda[(0, 1)],
        gamma1: recover_lambda[(0, 2)],
        delta1: recover_lambda[(0, 3)],
        alpha2: recover_lambda[(1, 0)],
        beta2: recover_lambda[(1, 1)],
        gamma2: recover_lambda[(1, 2)],
        delta2: recover_lambda[(1, 3)],
        ez_source: [pinv[(0, 0)], pinv[(0, 1)]],
        hz_source: [pinv[(1, 0)], pinv[(1, 1)]],
        pivot,
    };
    Ok(ThetaSystem {
        theta,
        coeffs,
        blocks: blocks.clone(),
        source_map,
        recover_lambda,
        recover_source,
    })
}

/// Source vector `J` of the reduced system as a function of `z`.
#[derive(Debug, Clone, Default)]
pub struct SourceJ {
    pub j: Profile<6>,
}

impl SourceJ {
    pub fn zero() -> Self {
        SourceJ { j: Profile::zero() }
    }

    /// `J = ±[−μ₀s M′_N + B(0); s P′_N − D(0)]` with the upper sign for forward.
    ///
    /// `noise` must already be primed; `b0`, `d0` are the initial-field spectra.
    pub fn build(
        noise: &NoiseSourceSpec,
        b0: &Profile<3>,
        d0: &Profile<3>,
        s: C64,
        dir: Direction,
        units: &Units,
    ) -> Self {
        let sigma = dir.sign();
        let upper = noise
            .m
            .scale(-s * units.mu0)
            .add(b0)
            .scale(C64::new(sigma, 0.0));
        let lower = noise
            .p
            .scale(s)
            .add(&d0.scale(C64::new(-1.0, 0.0)))
            .scale(C64::new(sigma, 0.0));
        SourceJ {
            j: embed3_into6(&upper, true).add(&embed3_into6(&lower, false)),
        }
    }

    pub fn eval(&self, z: f64) -> Vector6<C64> {
        self.j.eval(z)
    }
}

/// `G(z) = S (J_t − K_tl P⁻¹ J_l)` as a profile.
pub fn reduce_source(theta: &ThetaSystem, j: &SourceJ) -> Profile<4> {
    j.j.map(&theta.source_map)
}

/// `G` at a single point.
pub fn reduce_source_at(theta: &ThetaSystem, j: &Vector6<C64>) -> Vector4<C64> {
    theta.source_map * j
}

/// `(E_z, H_z)` from the tangential state and the local source value.
pub fn recover_longitudinal(
    theta: &ThetaSystem,
    lambda: &Vector4<C64>,
    j: &Vector6<C64>,
) -> (C64, C64) {
    let v: Vector2<C64> = theta.recover_lambda * lambda + theta.recover_source * j;
    (v[0], v[1])
}

/// Reassembles the six field components from `Λ` and `(E_z, H_z)`.
pub fn full_fields(lambda: &Vector4<C64>, ez: C64, hz: C64) -> Vector6<C64> {
    Vector6::new(lambda[0], lambda[1], ez, lambda[2], lambda[3], hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::profile::Profile;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn units() -> Units {
        Units::NORMALIZED
    }

    fn zero() -> C64 {
        C64::new(0.0, 0.0)
    }

    fn cmat4(rows: [[f64; 4]; 4]) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| c64(rows[i][j], 0.0))
    }

    #[test]
    fn vacuum_blocks() {
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(1.0, 0.0),
            c64(1.0, 0.0),
            Direction::Forward,
            &units(),
        );
        assert_eq!(b.t()[(0, 2)], zero());
        assert_eq!(b.y(), Matrix3::identity());
        assert_eq!(b.z(), -Matrix3::<C64>::identity());
        let bb = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(1.0, 0.0),
            c64(1.0, 0.0),
            Direction::Backward,
            &units(),
        );
        assert_eq!(bb.y(), -Matrix3::<C64>::identity());
    }

    #[test]
    fn eta3_enters_t() {
        let mut eta = EtaSet::zero();
        eta.eta3[(0, 1)] = c64(0.2, 0.0);
        let b = assemble_blocks(
            &eta,
            Kpar::ZERO,
            c64(1.0, 0.0),
            Direction::Forward,
            &units(),
        );
        assert_eq!(b.t()[(0, 1)], c64(0.2, 0.0));
        assert_eq!(derivative_pattern()[(0, 1)], c64(-1.0, 0.0));
    }

    #[test]
    fn vacuum_theta_values() {
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(1.0, 0.0),
            c64(1.0, 0.0),
            Direction::Forward,
            &units(),
        );
        let th = eliminate_longitudinal(&b).unwrap();
        let want = cmat4([
            [0.0, 0.0, 0.0, 2.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, -2.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]);
        assert!((th.theta - want).norm() < 1e-15);
        assert_eq!(th.coeffs.pivot, c64(1.0, 0.0));

        let b0 = assemble_blocks(
            &EtaSet::zero(),
            Kpar::ZERO,
            c64(1.0, 0.0),
            Direction::Backward,
            &units(),
        );
        let th0 = eliminate_longitudinal(&b0).unwrap();
        let want0 = cmat4([
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
        ]);
        assert!((th0.theta - want0).norm() < 1e-15);
    }

    #[test]
    fn vacuum_coefficients() {
        let (kx, ky, s) = (0.7, -0.4, c64(0.5, 1.2));
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(kx, ky),
            s,
            Direction::Forward,
            &units(),
        );
        let c = eliminate_longitudinal(&b).unwrap().coeffs;
        assert_eq!(c.alpha1, zero());
        assert_eq!(c.beta1, zero());
        assert_eq!(c.gamma2, zero());
        assert_eq!(c.delta2, zero());
        assert!((c.gamma1 - ic(-ky) / s).norm() < 1e-15);
        assert!((c.delta1 - ic(kx) / s).norm() < 1e-15);
        assert!((c.alpha2 - ic(ky) / s).norm() < 1e-15);
        assert!((c.beta2 - ic(-kx) / s).norm() < 1e-15);
    }

    #[test]
    fn degenerate_pivot() {
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(1.0, 0.0),
            zero(),
            Direction::Forward,
            &units(),
        );
        assert!(matches!(
            eliminate_longitudinal(&b),
            Err(EmError::DegeneratePivot { .. })
        ));
    }

    #[test]
    fn vacuum_source_reduction() {
        let (kx, s) = (0.8, c64(0.3, 0.9));
        let d = c64(0.4, -0.2);
        let by = c64(-1.1, 0.5);
        for dir in [Direction::Forward, Direction::Backward] {
            let b = assemble_blocks(&EtaSet::zero(), Kpar::new(kx, 0.0), s, dir, &units());
            let th = eliminate_longitudinal(&b).unwrap();
            let b0 = Profile::constant(Vector3::new(zero(), by, zero()));
            let d0 = Profile::constant(Vector3::new(zero(), zero(), d));
            let j = SourceJ::build(&NoiseSourceSpec::zero(), &b0, &d0, s, dir, &units());
            let g = reduce_source(&th, &j).eval(0.0);
            let want = (by + ic(kx) / s * d) * dir.sign();
            assert!((g[0] - want).norm() < 1e-15, "{dir:?}");
            assert_eq!(
                reduce_source(&th, &SourceJ::zero()).eval(0.3),
                Vector4::zeros()
            );
        }
    }

    #[test]
    fn recover_vacuum_hy() {
        let (kx, s) = (1.3, c64(0.7, 0.0));
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(kx, 0.0),
            s,
            Direction::Forward,
            &units(),
        );
        let th = eliminate_longitudinal(&b).unwrap();
        let h = c64(0.25, 0.5);
        let (ez, hz) = recover_longitudinal(
            &th,
            &Vector4::new(zero(), zero(), zero(), h),
            &Vector6::zeros(),
        );
        assert!((ez - ic(kx) / s * h).norm() < 1e-15);
        assert_eq!(hz, zero());
    }

    #[test]
    fn vacuum_plane_wave_ez() {
        // E ∝ e^{i(k_x x + k_z z)}, s = −iω with ω² = k_x² + k_z²
        let (kx, kz) = (0.6, 0.8);
        let omega = 1.0;
        let s = c64(0.0, -omega);
        let ey = zero();
        let e = Vector3::new(c64(kz, 0.0), ey, c64(-kx, 0.0));
        // H = k × E / ω
        let k = Vector3::new(kx, 0.0, kz);
        let h = Vector3::new(
            c64(k[1], 0.0) * e[2] - c64(k[2], 0.0) * e[1],
            c64(k[2], 0.0) * e[0] - c64(k[0], 0.0) * e[2],
            c64(k[0], 0.0) * e[1] - c64(k[1], 0.0) * e[0],
        ) / c64(omega, 0.0);
        let b = assemble_blocks(
            &EtaSet::zero(),
            Kpar::new(kx, 0.0),
            s,
            Direction::Forward,
            &units(),
        );
        let th = eliminate_longitudinal(&b).unwrap();
        let lambda = Vector4::new(e[0], e[1], h[0], h[1]);
        let (ez, hz) = recover_longitudinal(&th, &lambda, &Vector6::zeros());
        assert!((ez - e[2]).norm() < 1e-12, "{ez}");
        assert!((hz - h[2]).norm() < 1e-12);
        // and the six-component residual vanishes
        let f = full_fields(&lambda, ez, hz);
        let r = b.apply(&f, &(f * ic(kz)));
        assert!(r.norm() < 1e-12, "{r}");
    }

    fn rand_c(v: (f64, f64)) -> C64 {
        c64(v.0, v.1)
    }

    fn eta_strategy() -> impl Strategy<Value = EtaSet> {
        prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5), 36).prop_map(|v| {
            let m = |o: usize| Matrix3::from_fn(|i, j| rand_c(v[o + 3 * i + j]));
            EtaSet {
                eta1: m(0),
                eta2: m(9),
                eta3: m(18),
                eta4: m(27),
                ..EtaSet::zero()
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sign_duality(eta in eta_strategy(), kx in -2.0f64..2.0, ky in -2.0f64..2.0, sr in 0.1f64..3.0, si in -3.0f64..3.0) {
            let s = c64(sr, si);
            let kp = Kpar::new(kx, ky);
            let f = assemble_blocks(&eta, kp, s, Direction::Forward, &units());
            let b = assemble_blocks(&eta, kp, s, Direction::Backward, &units());
            prop_assert_eq!(f.k, -b.k);
            let tf = eliminate_longitudinal(&f).unwrap();
            let tb = eliminate_longitudinal(&b).unwrap();
            prop_assert!((tf.theta - tb.theta).norm() <= 1e-13 * (1.0 + tf.theta.norm()));
        }

        #[test]
        fn reduced_solution_satisfies_full_system(eta in eta_strategy(), kx in -2.0f64..2.0, ky in -2.0f64..2.0, sr in 0.1f64..3.0, si in -3.0f64..3.0,
                                                  l in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4),
                                                  jv in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 6),
                                                  backward in any::<bool>()) {
            let dir = if backward { Direction::Backward } else { Direction::Forward };
            let s = c64(sr, si);
            let blocks = assemble_blocks(&eta, Kpar::new(kx, ky), s, dir, &units());
            let th = eliminate_longitudinal(&blocks).unwrap();
            let lambda = Vector4::from_fn(|i, _| rand_c(l[i]));
            let j = Vector6::from_fn(|i, _| rand_c(jv[i]));
            // Λ' from the reduced equation at a single point
            let dl = reduce_source_at(&th, &j) - th.signed_theta() * lambda;
            let (ez, hz) = recover_longitudinal(&th, &lambda, &j);
            let f = full_fields(&lambda, ez, hz);
            let df = full_fields(&dl, zero(), zero());
            let r = blocks.apply(&f, &df) - j;
            prop_assert!(r.norm() < 1e-10 * (1.0 + f.norm() + j.norm()), "residual {}", r.norm());
        }
    }
}
