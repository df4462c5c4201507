//! From Laplace-domain solutions back to fields in `z` and `t`.

use nalgebra::{Vector3, Vector4, Vector6};
use thiserror::Error;

use crate::em_system::{assemble_blocks, eliminate_longitudinal, reduce_source, SourceJ};
use crate::medium::{EtaSet, NoiseSourceSpec};
use crate::profile::Profile;
use crate::stack_solver::{
    build_regions, incident_templates, match_slab, IncidentData, LayerStack, LimitOptions,
    StackError, StackSolution,
};
use crate::units::Units;
use crate::{Direction, Kpar, C64};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid amplitudes: {0}")]
    Amplitudes(String),
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Classical amplitudes `a_{kλ}(0)` on a `k_z` line at fixed `k∥`.
///
/// `plus[i][λ]` belongs to `k = (k∥, k_z[i])` and `minus[i][λ]` to `−k`. A single
/// sample is treated as one discrete mode with unit weight; longer grids must
/// be uniform and are integrated with the trapezoid rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpaceAmplitudes {
    pub kpar: Kpar,
    pub kz: Vec<f64>,
    pub plus: Vec<[C64; 2]>,
    pub minus: Vec<[C64; 2]>,
    pub hbar: f64,
}

impl FreeSpaceAmplitudes {
    pub fn new(
        kpar: Kpar,
        kz: Vec<f64>,
        plus: Vec<[C64; 2]>,
        minus: Vec<[C64; 2]>,
        hbar: f64,
    ) -> Result<Self, SynthesisError> {
        if kz.is_empty() || kz.len() != plus.len() || kz.len() != minus.len() {
            return Err(SynthesisError::Amplitudes(format!(
                "{} k_z samples, {} and {} amplitude rows",
                kz.len(),
                plus.len(),
                minus.len()
            )));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(SynthesisError::Amplitudes(format!(
                "hbar must be positive, got {hbar}"
            )));
        }
        if kz.iter().any(|k| !k.is_finite()) {
            return Err(SynthesisError::Amplitudes("non-finite k_z sample".into()));
        }
        if kz.len() > 1 {
            let h = (kz[kz.len() - 1] - kz[0]) / (kz.len() - 1) as f64;
            if h.is_nan() || h <= 0.0 || kz.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
            {
                return Err(SynthesisError::Amplitudes(
                    "k_z grid must be uniform and increasing".into(),
                ));
            }
        }
        Ok(FreeSpaceAmplitudes {
            kpar,
            kz,
            plus,
            minus,
            hbar,
        })
    }

    fn weights(&self) -> Vec<f64> {
        let n = self.kz.len();
        if n == 1 {
            return vec![1.0];
        }
        let h = (self.kz[n - 1] - self.kz[0]) / (n - 1) as f64;
        (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect()
    }
}

/// `e_{k1} = ẑ×k/|ẑ×k|` (or `x̂` along the axis), `e_{k2} = e_{k3}×e_{k1}`, `e_{k3} = k/|k|`.
pub fn polarization_vectors(k: Vector3<f64>) -> [Vector3<f64>; 3] {
    let e3 = k / k.norm();
    let zk = Vector3::z().cross(&k);
    let e1 = if zk.norm() <= 1e-14 * k.norm() {
        Vector3::x()
    } else {
        zk / zk.norm()
    };
    let e2 = e3.cross(&e1);
    [e1, e2, e3]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    /// Accepted estimated quadrature error relative to the integrated magnitude.
    pub tolerance: f64,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig { tolerance: 1e-6 }
    }
}

/// Free-space source data at one `(k∥, s)` and direction.
#[derive(Debug, Clone)]
pub struct FreeSpaceDrive {
    pub dir: Direction,
    pub s: C64,
    pub kz: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per-sample `Q(k_z)`.
    pub q: Vec<Vector4<C64>>,
    /// Per-sample integrands of the initial `B` and `D` spectra.
    pub b_density: Vec<Vector3<C64>>,
    pub d_density: Vec<Vector3<C64>>,
    /// `B(k∥, z, t = 0)` and `D(k∥, z, t = 0)` as sums of `e^{±ik_z z}`.
    pub b0: Profile<3>,
    pub d0: Profile<3>,
    /// `G(z) = Σ w Q e^{±ik_z z}`.
    pub g: Profile<4>,
    pub error_estimate: f64,
}

impl FreeSpaceDrive {
    /// Source vector built from the initial-field spectra.
    pub fn source(&self, units: &Units) -> SourceJ {
        SourceJ::build(
            &NoiseSourceSpec::zero(),
            &self.b0,
            &self.d0,
            self.s,
            self.dir,
            units,
        )
    }
}

fn lift(v: Vector3<f64>) -> Vector3<C64> {
    v.map(|x| C64::new(x, 0.0))
}

/// Initial `B`, `D` spectra of classical free-space modes and the resulting
/// reduced source `Q`.
///
/// The creation-operator terms use the complex conjugate of the amplitude at
/// the indicated wave vector.
pub fn free_space_drive(
    amps: &FreeSpaceAmplitudes,
    kpar: Kpar,
    s: C64,
    dir: Direction,
    units: &Units,
    cfg: &DriveConfig,
) -> Result<FreeSpaceDrive, SynthesisError> {
    if (kpar.kx - amps.kpar.kx).abs() > 1e-12 * (1.0 + kpar.norm())
        || (kpar.ky - amps.kpar.ky).abs() > 1e-12 * (1.0 + kpar.norm())
    {
        return Err(SynthesisError::Amplitudes(format!(
            "amplitudes sampled at k∥ = ({}, {}), requested ({}, {})",
            amps.kpar.kx, amps.kpar.ky, kpar.kx, kpar.ky
        )));
    }
    if s.norm() == 0.0 {
        return Err(SynthesisError::Stack(StackError::InvalidFrequency(0.0)));
    }
    let sigma = dir.sign();
    let i = C64::new(0.0, 1.0);
    let si = i * sigma;
    let c = units.c();
    let (eps0, mu0) = (units.eps0, units.mu0);
    let weights = amps.weights();
    let mut q = Vec::with_capacity(amps.kz.len());
    let mut b_density = Vec::with_capacity(amps.kz.len());
    let mut d_density = Vec::with_capacity(amps.kz.len());
    for (idx, &kz) in amps.kz.iter().enumerate() {
        let k = Vector3::new(kpar.kx, kpar.ky, kz);
        let kn = k.norm();
        if kn == 0.0 {
            return Err(SynthesisError::Amplitudes(
                "k = 0 sample has no frequency".into(),
            ));
        }
        let omega = c * kn;
        let e_plus = polarization_vectors(k);
        let e_minus = polarization_vectors(-k);
        // "same" is ±k for the direction, "other" is ∓k
        let (a_same, a_other, e_same, e_other) = match dir {
            Direction::Forward => (amps.plus[idx], amps.minus[idx], e_plus, e_minus),
            Direction::Backward => (amps.minus[idx], amps.plus[idx], e_minus, e_plus),
        };
        let fd = (amps.hbar * omega / (4.0 * std::f64::consts::PI)).sqrt();
        let fb = (amps.hbar / (4.0 * std::f64::consts::PI * omega)).sqrt();
        let mut d = Vector3::zeros();
        let mut b = Vector3::zeros();
        for l in 0..2 {
            d += (lift(e_other[l]) * a_other[l].conj() - lift(e_same[l]) * a_same[l].conj())
                * (-i * fd);
            b += (lift(k.cross(&e_same[l])) * (si * a_same[l])
                + lift(k.cross(&e_other[l])) * (si * a_other[l].conj()))
                * C64::new(fb, 0.0);
        }
        let ikx = i * kpar.kx;
        let iky = i * kpar.ky;
        let qv = Vector4::new(
            b[1] + ikx / (s * eps0) * d[2],
            -b[0] + iky / (s * eps0) * d[2],
            -d[1] + ikx / (s * mu0) * b[2],
            d[0] + iky / (s * mu0) * b[2],
        ) * C64::new(sigma, 0.0);
        q.push(qv);
        b_density.push(b);
        d_density.push(d);
    }

    let mut b0 = Profile::zero();
    let mut d0 = Profile::zero();
    let mut g = Profile::zero();
    for (idx, &kz) in amps.kz.iter().enumerate() {
        let w = C64::new(weights[idx], 0.0);
        let rate = si * kz;
        b0.exponentials.push(crate::profile::ExpTerm {
            amplitude: b_density[idx] * w,
            rate,
        });
        d0.exponentials.push(crate::profile::ExpTerm {
            amplitude: d_density[idx] * w,
            rate,
        });
        g.exponentials.push(crate::profile::ExpTerm {
            amplitude: q[idx] * w,
            rate,
        });
    }

    let error_estimate = quadrature_error(&weights, &b_density, &d_density);
    let scale: f64 = weights
        .iter()
        .zip(b_density.iter().zip(&d_density))
        .map(|(w, (b, d))| w * (b.norm() + d.norm()))
        .sum();
    if error_estimate > cfg.tolerance * scale.max(f64::MIN_POSITIVE) {
        return Err(SynthesisError::Resolution(format!(
            "estimated k_z quadrature error {:.2e} exceeds {:.1e} of the integrated amplitude {:.2e}",
            error_estimate, cfg.tolerance, scale
        )));
    }
    Ok(FreeSpaceDrive {
        dir,
        s,
        kz: amps.kz.clone(),
        weights,
        q,
        b_density,
        d_density,
        b0,
        d0,
        g,
        error_estimate,
    })
}

/// Trapezoid on the full grid against every other point, plus the edge samples.
fn quadrature_error(weights: &[f64], b: &[Vector3<C64>], d: &[Vector3<C64>]) -> f64 {
    let n = weights.len();
    if n == 1 {
        return 0.0;
    }
    let h = weights[1.min(n - 1)].max(2.0 * weights[0]);
    let f = |i: usize| {
        let mut v = [C64::new(0.0, 0.0); 6];
        for k in 0..3 {
            v[k] = b[i][k];
            v[k + 3] = d[i][k];
        }
        v
    };
    let mut fine = [C64::new(0.0, 0.0); 6];
    for (i, w) in weights.iter().enumerate() {
        let fi = f(i);
        for k in 0..6 {
            fine[k] += fi[k] * *w;
        }
    }
    let coarse_idx: Vec<usize> = (0..n).step_by(2).collect();
    let m = coarse_idx.len();
    let mut coarse = [C64::new(0.0, 0.0); 6];
    if m >= 2 {
        for (j, &i) in coarse_idx.iter().enumerate() {
            let w = if j == 0 || j == m - 1 { h } else { 2.0 * h };
            let fi = f(i);
            for k in 0..6 {
                coarse[k] += fi[k] * w;
            }
        }
    } else {
        coarse = fine;
    }
    let gap = fine
        .iter()
        .zip(&coarse)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let edge = |i: usize| f(i).iter().map(|x| x.norm()).fold(0.0, f64::max);
    gap + h * (edge(0) + edge(n - 1))
}

/// `Q` assembled through the generic source reduction, for cross-checking.
pub fn reduced_drive(
    drive: &FreeSpaceDrive,
    kpar: Kpar,
    units: &Units,
) -> Result<Profile<4>, SynthesisError> {
    let blocks = assemble_blocks(&EtaSet::zero(), kpar, drive.s, drive.dir, units);
    let theta =
        eliminate_longitudinal(&blocks).map_err(|source| StackError::Em { region: 0, source })?;
    Ok(reduce_source(&theta, &drive.source(units)))
}

/// What the second axis of a [`FieldFrame`] means.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameAxis {
    Laplace { s: C64, dir: Direction },
    Time { t: Vec<f64> },
}

/// Sampled `E`, `H` at fixed `k∥`, stored row-major as `[z][column]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrame {
    pub kpar: Kpar,
    pub z: Vec<f64>,
    pub axis: FrameAxis,
    /// Transform directions that contributed.
    pub contributions: Vec<Direction>,
    pub e: Vec<Vector3<C64>>,
    pub h: Vec<Vector3<C64>>,
}

impl FieldFrame {
    pub fn columns(&self) -> usize {
        match &self.axis {
            FrameAxis::Laplace { .. } => 1,
            FrameAxis::Time { t } => t.len(),
        }
    }

    pub fn at(&self, iz: usize, col: usize) -> (Vector3<C64>, Vector3<C64>) {
        let k = iz * self.columns() + col;
        (self.e[k], self.h[k])
    }

    /// Largest imaginary part over all samples.
    pub fn max_imag(&self) -> f64 {
        self.e
            .iter()
            .chain(&self.h)
            .flat_map(|v| v.iter())
            .map(|c| c.im.abs())
            .fold(0.0, f64::max)
    }
}

fn check_z_grid(z: &[f64]) -> Result<(), SynthesisError> {
    if z.iter().any(|v| !v.is_finite()) {
        return Err(SynthesisError::Stack(StackError::OutOfDomain {
            z: *z.iter().find(|v| !v.is_finite()).unwrap_or(&f64::NAN),
        }));
    }
    if z.windows(2).any(|w| w[1] < w[0]) {
        return Err(SynthesisError::Grid("z grid must be nondecreasing".into()));
    }
    Ok(())
}

/// All six components of a matched solution on a `z` grid.
///
/// Points on an interface use the region to their right.
pub fn field_profile(solution: &StackSolution, z: &[f64]) -> Result<FieldFrame, SynthesisError> {
    check_z_grid(z)?;
    let mut e = Vec::with_capacity(z.len());
    let mut h = Vec::with_capacity(z.len());
    for &zz in z {
        let f = solution.fields(zz)?;
        e.push(Vector3::new(f[0], f[1], f[2]));
        h.push(Vector3::new(f[3], f[4], f[5]));
    }
    Ok(FieldFrame {
        kpar: solution.kpar,
        z: z.to_vec(),
        axis: FrameAxis::Laplace {
            s: solution.s,
            dir: solution.dir,
        },
        contributions: vec![solution.dir],
        e,
        h,
    })
}

/// Total fields on `z` for a unit `s`- (`pol = 0`) or `p`-polarized (`pol = 1`)
/// wave entering from the left at `s = −iω + shift`.
///
/// Negative `ω` is allowed; the incoming root is picked by the same probe as
/// for positive frequencies.
pub fn harmonic_fields(
    stack: &LayerStack,
    kpar: Kpar,
    omega: f64,
    pol: usize,
    z: &[f64],
    units: &Units,
    opts: &LimitOptions,
) -> Result<Vec<Vector6<C64>>, SynthesisError> {
    check_z_grid(z)?;
    if !(omega.is_finite() && omega != 0.0) {
        return Err(StackError::InvalidFrequency(omega).into());
    }
    if !stack.left.is_vacuum() {
        return Err(StackError::NonVacuumHalfSpace {
            region: 0,
            name: stack.left.name.clone(),
        }
        .into());
    }
    let k0 = omega.abs() / units.c();
    if kpar.norm() >= k0 {
        return Err(StackError::Evanescent {
            kpar: kpar.norm(),
            k0,
        }
        .into());
    }
    let s = C64::new(opts.limit_shift, -omega);
    let templates = incident_templates(kpar, s, units, opts)?;
    let regions = build_regions(stack, kpar, s, Direction::Forward, units, opts)?;
    let sol = match_slab(
        regions,
        &stack.interfaces(),
        &[],
        &IncidentData {
            left: templates[pol.min(1)],
            right: Vector4::zeros(),
        },
        kpar,
        s,
        Direction::Forward,
    )?;
    z.iter()
        .map(|&zz| sol.fields(zz).map_err(Into::into))
        .collect()
}

/// Laplace transform `∫ g(t) e^{−st} dt` of `g(t) = exp(−(t − t₀)²/(2τ²))`.
pub fn gaussian_pulse_laplace(s: C64, t0: f64, tau: f64) -> C64 {
    (-s * t0 + s * s * (tau * tau / 2.0)).exp() * (tau * (2.0 * std::f64::consts::PI).sqrt())
}

/// Field spectra sampled on an `ω` grid, `values[iω][iz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub z: Vec<f64>,
    pub values: Vec<Vec<Vector6<C64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    /// Multiply by `½(1 + cos(πω/ω_max))` before summing. Changes amplitudes.
    pub window: bool,
    /// Largest accepted edge-sample magnitude relative to the spectrum peak.
    pub edge_tolerance: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            window: false,
            edge_tolerance: 1e-6,
        }
    }
}

/// Symmetric uniform grid `−ω_max … ω_max` with `n` points. Even `n` avoids `ω = 0`.
pub fn symmetric_omega_grid(omega_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| -omega_max + 2.0 * omega_max * i as f64 / (n - 1) as f64)
        .collect()
}

fn check_omega_grid(omega: &[f64]) -> Result<f64, SynthesisError> {
    let n = omega.len();
    if n < 2 {
        return Err(SynthesisError::Grid("need at least two frequencies".into()));
    }
    let h = (omega[n - 1] - omega[0]) / (n - 1) as f64;
    if !(h.is_finite() && h > 0.0) {
        return Err(SynthesisError::Grid(
            "frequency grid must be increasing".into(),
        ));
    }
    let wmax = omega[n - 1].abs().max(omega[0].abs());
    for (i, w) in omega.iter().enumerate() {
        if ((w - omega[0]) - i as f64 * h).abs() > 1e-9 * wmax {
            return Err(SynthesisError::Grid(
                "frequency grid must be uniform".into(),
            ));
        }
        if (w + omega[n - 1 - i]).abs() > 1e-9 * wmax {
            return Err(SynthesisError::Grid(
                "frequency grid must be symmetric about zero".into(),
            ));
        }
    }
    Ok(h)
}

/// `(1/2π) Σ w_ω e^{−iωt} [F(ω) e^{ik∥·r∥} + B(ω) e^{−ik∥·r∥}]` on a symmetric
/// trapezoid grid, at every `z` of the spectra and every `t`.
///
/// The remaining `k∥` integral is left to the caller.
pub fn time_reconstruct(
    kpar: Kpar,
    forward: Option<&Spectrum>,
    backward: Option<&Spectrum>,
    rpar: (f64, f64),
    t: &[f64],
    cfg: &TimeConfig,
) -> Result<FieldFrame, SynthesisError> {
    let first = forward
        .or(backward)
        .ok_or_else(|| SynthesisError::Grid("no spectrum given".into()))?;
    let omega = &first.omega;
    let zs = &first.z;
    for sp in [forward, backward].into_iter().flatten() {
        if sp.omega != *omega || sp.z != *zs {
            return Err(SynthesisError::Grid(
                "forward and backward spectra use different grids".into(),
            ));
        }
        if sp.values.len() != omega.len() || sp.values.iter().any(|row| row.len() != zs.len()) {
            return Err(SynthesisError::Grid(
                "spectrum shape does not match its grids".into(),
            ));
        }
        if sp
            .values
            .iter()
            .flatten()
            .flat_map(|v| v.iter())
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(SynthesisError::Grid("non-finite spectrum sample".into()));
        }
    }
    let dw = check_omega_grid(omega)?;
    let n = omega.len();
    let wmax = omega[n - 1];
    let horizon = std::f64::consts::PI / dw;
    if let Some(bad) = t.iter().find(|tt| !(tt.is_finite() && tt.abs() < horizon)) {
        return Err(SynthesisError::Resolution(format!(
            "t = {bad} outside the alias-free window |t| < π/Δω = {horizon:.4e}"
        )));
    }
    for sp in [forward, backward].into_iter().flatten() {
        let mag = |i: usize| sp.values[i].iter().map(|v| v.norm()).fold(0.0, f64::max);
        let peak = (0..n).map(mag).fold(0.0, f64::max);
        let edge = mag(0).max(mag(n - 1));
        if peak > 0.0 && edge > cfg.edge_tolerance * peak {
            return Err(SynthesisError::Resolution(format!(
                "spectrum at ±ω_max = {wmax:.4e} is {:.2e} of its peak; the signal bandwidth exceeds the grid",
                edge / peak
            )));
        }
    }

    let weights: Vec<f64> = (0..n)
        .map(|i| {
            let trap = if i == 0 || i == n - 1 { 0.5 * dw } else { dw };
            let win = if cfg.window {
                0.5 * (1.0 + (std::f64::consts::PI * omega[i] / wmax).cos())
            } else {
                1.0
            };
            trap * win / (2.0 * std::f64::consts::PI)
        })
        .collect();
    let phase = C64::new(0.0, kpar.kx * rpar.0 + kpar.ky * rpar.1).exp();
    let mut contributions = Vec::new();
    if forward.is_some() {
        contributions.push(Direction::Forward);
    }
    if backward.is_some() {
        contributions.push(Direction::Backward);
    }

    let mut e = Vec::with_capacity(zs.len() * t.len());
    let mut h = Vec::with_capacity(zs.len() * t.len());
    for iz in 0..zs.len() {
        for &tt in t {
            let mut acc = Vector6::<C64>::zeros();
            for i in 0..n {
                let mut v = Vector6::zeros();
                if let Some(f) = forward {
                    v += f.values[i][iz] * phase;
                }
                if let Some(b) = backward {
                    v += b.values[i][iz] * phase.conj();
                }
                acc += v * (C64::new(0.0, -omega[i] * tt).exp() * weights[i]);
            }
            e.push(Vector3::new(acc[0], acc[1], acc[2]));
            h.push(Vector3::new(acc[3], acc[4], acc[5]));
        }
    }
    Ok(FieldFrame {
        kpar,
        z: zs.clone(),
        axis: FrameAxis::Time { t: t.to_vec() },
        contributions,
        e,
        h,
    })
}
