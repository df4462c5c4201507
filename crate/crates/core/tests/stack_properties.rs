use bianiso::em_system::SourceJ;
use bianiso::medium::{Medium, MediumModel, PoleModel, ResponseTerm};
use bianiso::profile::Profile;
use bianiso::quadrature::QuadConfig;
use bianiso::reference::{integrate_layer, residual_full_system, IntegratorConfig};
use bianiso::stack_solver::{solve_stack, IncidentData, Layer, LayerStack, LimitOptions};
use bianiso::units::Units;
use bianiso::{Direction, Kpar, C64};
use nalgebra::{Matrix3, Vector6};
use proptest::prelude::*;

const U: Units = Units::NORMALIZED;

fn real_mat(scale: f64) -> impl Strategy<Value = Matrix3<f64>> {
    prop::array::uniform9(-scale..scale).prop_map(|a| Matrix3::from_row_slice(&a))
}

fn cplx(m: Matrix3<f64>) -> Matrix3<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Passive random media: symmetric positive pole strengths and weak,
/// reciprocal magnetoelectric coupling.
fn medium() -> impl Strategy<Value = Medium> {
    (
        0.2f64..2.0,
        real_mat(0.1),
        real_mat(0.7),
        1.0f64..3.0,
        0.1f64..0.5,
        real_mat(0.05),
        real_mat(0.05),
    )
        .prop_map(|(eps, aniso, pole, w0, gamma, chi3, chi4)| {
            let model = PoleModel {
                chi1: vec![
                    ResponseTerm::instantaneous(cplx(
                        Matrix3::identity() * eps + (aniso + aniso.transpose()) * 0.5,
                    )),
                    ResponseTerm::lorentz(cplx(pole * pole.transpose()), w0, gamma),
                ],
                chi3: vec![ResponseTerm::lorentz(cplx(chi3), w0, gamma)],
                chi4: vec![ResponseTerm::instantaneous(cplx(
                    (chi4 + chi4.transpose()) * 0.5,
                ))],
            };
            Medium::new("random", MediumModel::Poles(model))
        })
}

fn source() -> impl Strategy<Value = SourceJ> {
    prop::array::uniform12(-1.0f64..1.0).prop_map(|a| SourceJ {
        j: Profile::constant(Vector6::from_fn(|i, _| C64::new(a[2 * i], a[2 * i + 1]))),
    })
}

#[derive(Debug, Clone)]
struct Case {
    stack: LayerStack,
    sources: Vec<SourceJ>,
    kpar: Kpar,
    s: C64,
    dir: Direction,
}

fn case() -> impl Strategy<Value = Case> {
    (
        medium(),
        prop::collection::vec((medium(), 0.1f64..1.0), 1..4),
        medium(),
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            0.2f64..2.0,
            -3.0f64..3.0,
            any::<bool>(),
        ),
    )
        .prop_flat_map(|(left, layers, right, (kx, ky, sr, si, fwd))| {
            let n = layers.len() + 2;
            let stack = LayerStack::new(
                left,
                layers
                    .into_iter()
                    .map(|(medium, thickness)| Layer { thickness, medium })
                    .collect(),
                right,
            )
            .unwrap();
            prop::collection::vec(source(), n).prop_map(move |sources| Case {
                stack: stack.clone(),
                sources,
                kpar: Kpar::new(kx, ky),
                s: C64::new(sr, si),
                dir: if fwd {
                    Direction::Forward
                } else {
                    Direction::Backward
                },
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tangential_state_is_continuous_and_half_spaces_decay(c in case()) {
        let sol = solve_stack(&c.stack, c.kpar, c.s, c.dir, &U, &c.sources, &IncidentData::default(), &LimitOptions::default())
            .unwrap();
        for (i, jump) in sol.interface_jumps().unwrap().iter().enumerate() {
            let scale = sol.lambda_in(i + 1, sol.interfaces[i]).unwrap().norm().max(1.0);
            prop_assert!(jump / scale < 1e-10, "jump {jump} at interface {i}");
        }
        let last = c.stack.region_count() - 1;
        for (reg, left) in [(&sol.regions[0], true), (&sol.regions[last], false)] {
            let mut kept = 0;
            for j in 0..4 {
                let re = reg.system.rates[j].re;
                let decays = if left { re < 0.0 } else { re > 0.0 };
                if decays {
                    kept += 1;
                } else {
                    prop_assert_eq!(reg.coeffs[j], C64::new(0.0, 0.0));
                }
            }
            prop_assert_eq!(kept, 2);
        }
        // far from the stack only the particular part of a constant source survives
        let slowest = sol.regions[0].system.rates.iter().map(|r| r.re).filter(|&re| re < 0.0).map(f64::abs).fold(f64::INFINITY, f64::min);
        let far = 40.0 / slowest;
        let g_left = sol.lambda_in(0, -far).unwrap();
        let g_left2 = sol.lambda_in(0, -far - 5.0).unwrap();
        let scale = g_left.norm().max(sol.regions[0].coeffs.norm()).max(1.0);
        prop_assert!((g_left - g_left2).norm() <= 1e-6 * scale);
    }

    #[test]
    fn layers_agree_with_direct_integration(c in case()) {
        let sol = solve_stack(&c.stack, c.kpar, c.s, c.dir, &U, &c.sources, &IncidentData::default(), &LimitOptions::default())
            .unwrap();
        for r in 1..=c.stack.layers.len() {
            let reg = &sol.regions[r];
            let (a, b) = c.stack.bounds(r);
            let spread = reg.system.modes.omega.iter().map(|w| w.norm()).fold(0.0, f64::max) * (b - a);
            prop_assume!(spread <= 5.0);
            let start = reg.lambda(a, &QuadConfig::default()).unwrap();
            let end = reg.lambda(b, &QuadConfig::default()).unwrap();
            let g = reg.g.clone();
            let ode = integrate_layer(&reg.system.theta.theta, c.dir.sign(), |z| g.eval(z), start, a, b, &IntegratorConfig::default())
                .unwrap();
            prop_assert!((ode - end).norm() <= 1e-6 * end.norm(), "{} vs {}", ode, end);
        }
    }
}

#[test]
fn full_system_residual_inside_a_bianisotropic_layer() {
    let chi =
        |a: f64| Matrix3::from_fn(|r, c| C64::new(a * (1.0 + r as f64 - 0.5 * c as f64), 0.0));
    let model = PoleModel {
        chi1: vec![
            ResponseTerm::instantaneous(Matrix3::identity() * C64::new(1.2, 0.0)),
            ResponseTerm::lorentz(chi(0.2), 2.0, 0.3),
        ],
        chi3: vec![ResponseTerm::lorentz(chi(0.05), 1.5, 0.2)],
        chi4: vec![ResponseTerm::instantaneous(chi(0.04))],
    };
    let layer = Medium::new("film", MediumModel::Poles(model));
    let stack = LayerStack::slab(vec![Layer {
        thickness: 0.7,
        medium: layer.clone(),
    }])
    .unwrap();
    let (k, s) = (Kpar::new(0.3, 0.2), C64::new(0.6, -1.1));
    for dir in [Direction::Forward, Direction::Backward] {
        let mut sources = vec![SourceJ::zero(); 3];
        sources[1].j = Profile::exponential(
            Vector6::from_fn(|i, _| C64::new(0.3 * i as f64, -0.2)),
            C64::new(0.4, 0.9),
        );
        let sol = solve_stack(
            &stack,
            k,
            s,
            dir,
            &U,
            &sources,
            &IncidentData::default(),
            &LimitOptions::default(),
        )
        .unwrap();
        let z: Vec<f64> = (0..701).map(|i| 0.7 * i as f64 / 700.0).collect();
        let fields: Vec<Vector6<C64>> = z.iter().map(|&zz| sol.fields_in(1, zz).unwrap()).collect();
        let eta = layer.eta(s, &U).unwrap();
        let src = &sol.regions[1].source;
        let r = residual_full_system(&z, &fields, &eta, k, s, dir, |zz| src.eval(zz), &U).unwrap();
        assert!(r < 1e-8, "{dir:?}: {r}");
    }
}
