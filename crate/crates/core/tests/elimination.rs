use bianiso::em_system::{
    assemble_blocks, eliminate_longitudinal, full_fields, recover_longitudinal,
};
use bianiso::medium::{EtaConvention, EtaSet};
use bianiso::mode_solver::eigenmodes;
use bianiso::reference::{closed_form_coefficients, closed_form_theta, residual_full_system};
use bianiso::units::Units;
use bianiso::{Direction, Kpar, C64};
use nalgebra::{Matrix3, Matrix4, Vector6};
use proptest::prelude::*;

const U: Units = Units::NORMALIZED;

fn mat(v: [f64; 18]) -> Matrix3<C64> {
    Matrix3::from_fn(|r, c| C64::new(v[2 * (3 * r + c)], v[2 * (3 * r + c) + 1]))
}

fn eta_strategy() -> impl Strategy<Value = EtaSet> {
    let m = || prop::array::uniform18(-0.5f64..0.5).prop_map(mat);
    (m(), m(), m(), m()).prop_map(|(eta1, eta2, eta3, eta4)| EtaSet {
        eta1,
        eta2,
        eta3,
        eta4,
        convention: EtaConvention::Derived,
        condition: 1.0,
    })
}

fn sample_eta() -> EtaSet {
    let m = |seed: f64| {
        Matrix3::from_fn(|r, c| {
            C64::new(
                0.3 * (seed + r as f64 * 1.7 + c as f64).sin(),
                0.2 * (seed * 2.3 + c as f64 - r as f64).cos(),
            )
        })
    };
    EtaSet {
        eta1: m(0.4),
        eta2: m(1.1),
        eta3: m(2.7),
        eta4: m(3.9),
        convention: EtaConvention::Derived,
        condition: 1.0,
    }
}

/// Fields of one eigenmode of `theta`, with `E_z`, `H_z` from `recover`, on a uniform grid.
fn mode_fields(
    theta: &Matrix4<C64>,
    recover: impl Fn(&nalgebra::Vector4<C64>) -> (C64, C64),
    z: &[f64],
) -> Vec<Vector6<C64>> {
    let basis = eigenmodes(theta).expect("diagonalizable");
    let (w, r) = (basis.omega[0], basis.vector(0));
    z.iter()
        .map(|&zz| {
            let l = r * (-w * zz).exp();
            let (ez, hz) = recover(&l);
            full_fields(&l, ez, hz)
        })
        .collect()
}

#[test]
fn closed_form_theta44_fails_the_full_system_while_elimination_satisfies_it() {
    let eta = sample_eta();
    assert!(eta.eta2[(0, 1)].norm() > 0.05);
    let (k, s) = (Kpar::new(0.4, -0.3), C64::new(0.8, 0.6));
    let sys = eliminate_longitudinal(&assemble_blocks(&eta, k, s, Direction::Forward, &U)).unwrap();
    let z: Vec<f64> = (0..401).map(|i| i as f64 * 0.0025).collect();
    let zero = |_: f64| Vector6::zeros();

    let ours = mode_fields(
        &sys.theta,
        |l| recover_longitudinal(&sys, l, &Vector6::zeros()),
        &z,
    );
    let r_ours = residual_full_system(&z, &ours, &eta, k, s, Direction::Forward, zero, &U).unwrap();
    assert!(r_ours < 1e-9, "{r_ours}");

    let c = closed_form_coefficients(&eta, k, s, &U);
    let closed = closed_form_theta(&eta, k, s, &U);
    let recover = |l: &nalgebra::Vector4<C64>| {
        (
            c.alpha1 * l[0] + c.beta1 * l[1] + c.gamma1 * l[2] + c.delta1 * l[3],
            c.alpha2 * l[0] + c.beta2 * l[1] + c.gamma2 * l[2] + c.delta2 * l[3],
        )
    };
    let theirs = mode_fields(&closed, recover, &z);
    let r_theirs =
        residual_full_system(&z, &theirs, &eta, k, s, Direction::Forward, zero, &U).unwrap();
    assert!(r_theirs > 1e-3, "{r_theirs}");

    let mut fixed = closed;
    fixed[(3, 3)] += s * eta.eta2[(0, 1)] * 2.0;
    let repaired = mode_fields(&fixed, recover, &z);
    let r_fixed =
        residual_full_system(&z, &repaired, &eta, k, s, Direction::Forward, zero, &U).unwrap();
    assert!(r_fixed < 1e-9, "{r_fixed}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn elimination_matches_closed_form_up_to_the_theta44_sign(
        eta in eta_strategy(),
        kx in -2.0f64..2.0, ky in -2.0f64..2.0,
        sr in 0.1f64..5.0, si in -5.0f64..5.0,
    ) {
        let (k, s) = (Kpar::new(kx, ky), C64::new(sr, si));
        let sys = eliminate_longitudinal(&assemble_blocks(&eta, k, s, Direction::Forward, &U)).unwrap();
        let p = closed_form_coefficients(&eta, k, s, &U).as_array();
        let g = &sys.coeffs;
        let ours = [g.alpha1, g.beta1, g.gamma1, g.delta1, g.alpha2, g.beta2, g.gamma2, g.delta2];
        let scale = p.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        for (a, b) in ours.iter().zip(p) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
        let mut closed = closed_form_theta(&eta, k, s, &U);
        let scale = closed.iter().map(|z| z.norm()).fold(0.0, f64::max);
        // the closed-form Θ44 carries −sη2₁₂ where the elimination gives +sη2₁₂
        closed[(3, 3)] += s * eta.eta2[(0, 1)] * 2.0;
        prop_assert!((sys.theta - closed).iter().all(|d| d.norm() <= 1e-12 * scale));
    }

    #[test]
    fn backward_theta_is_the_forward_theta(
        eta in eta_strategy(),
        kx in -2.0f64..2.0, ky in -2.0f64..2.0,
        sr in 0.1f64..5.0, si in -5.0f64..5.0,
    ) {
        let (k, s) = (Kpar::new(kx, ky), C64::new(sr, si));
        let f = eliminate_longitudinal(&assemble_blocks(&eta, k, s, Direction::Forward, &U)).unwrap();
        let b = eliminate_longitudinal(&assemble_blocks(&eta, k, s, Direction::Backward, &U)).unwrap();
        let scale = f.theta.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!((f.theta - b.theta).iter().all(|d| d.norm() <= 1e-13 * scale));
        prop_assert!((f.signed_theta() + b.signed_theta()).iter().all(|d| d.norm() <= 1e-13 * scale));
    }
}
