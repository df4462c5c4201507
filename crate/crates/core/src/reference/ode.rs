use nalgebra::{Matrix4, Vector4};

use super::OracleError;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Accepted step-doubling difference relative to `max(1, ‖Λ‖)`.
    pub tolerance: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            tolerance: 1e-10,
            max_steps: 1 << 24,
        }
    }
}

fn rk4<G: Fn(f64) -> Vector4<C64>>(
    a: &Matrix4<C64>,
    g: &G,
    y0: Vector4<C64>,
    z0: f64,
    z1: f64,
    steps: usize,
) -> Vector4<C64> {
    let h = (z1 - z0) / steps as f64;
    let hc = C64::new(h, 0.0);
    let f = |z: f64, y: &Vector4<C64>| -(a * y) + g(z);
    let mut y = y0;
    for i in 0..steps {
        let z = z0 + i as f64 * h;
        let k1 = f(z, &y);
        let k2 = f(z + 0.5 * h, &(y + k1 * (hc * 0.5)));
        let k3 = f(z + 0.5 * h, &(y + k2 * (hc * 0.5)));
        let k4 = f(z + h, &(y + k3 * hc));
        y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (hc / 6.0);
    }
    y
}

/// Integrates `Λ' = −σΘΛ + G(z)` from `z0` to `z1` with classic fixed-step
/// RK4, halving the step until two successive step counts agree.
pub fn integrate_layer<G: Fn(f64) -> Vector4<C64>>(
    theta: &Matrix4<C64>,
    sigma: f64,
    g: G,
    lambda0: Vector4<C64>,
    z0: f64,
    z1: f64,
    cfg: &IntegratorConfig,
) -> Result<Vector4<C64>, OracleError> {
    if !(z0.is_finite() && z1.is_finite()) {
        return Err(OracleError::NonFinite(format!("interval [{z0}, {z1}]")));
    }
    if z0 == z1 {
        return Ok(lambda0);
    }
    let a = theta * C64::new(sigma, 0.0);
    let scale = a.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let mut steps = ((scale * (z1 - z0).abs() / 0.25).ceil() as usize).max(4);
    let mut coarse = rk4(&a, &g, lambda0, z0, z1, steps);
    loop {
        let fine_steps = 2 * steps;
        if fine_steps > cfg.max_steps {
            return Err(OracleError::Stiffness { steps: fine_steps });
        }
        let fine = rk4(&a, &g, lambda0, z0, z1, fine_steps);
        let diff = (fine - coarse).norm();
        if !diff.is_finite() {
            return Err(OracleError::NonFinite(format!(
                "RK4 with {fine_steps} steps"
            )));
        }
        if diff / 15.0 <= cfg.tolerance * fine.norm().max(1.0) {
            return Ok(fine);
        }
        steps = fine_steps;
        coarse = fine;
    }
}
