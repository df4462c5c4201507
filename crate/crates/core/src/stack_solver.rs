//! Layered-medium solutions and interface matching.
//!
//! Regions are numbered left half-space `0`, finite layers `1..=N`, right
//! half-space `N + 1`; the first interface sits at `z = 0`. In every region the
//! tangential state is
//!
//! ```text
//! Λ(z) = Σ_j c_j R_j e^{−λ_j (z − z_j)} + Λ_p(z),   λ_j = σΩ_j,
//! ```
//!
//! where each mode is anchored at the interface `z_j` from which it decays, so
//! every stored exponential has modulus at most one. Half-spaces only keep the
//! modes that decay away from the stack; the other two carry prescribed
//! incident data. All interface conditions are collected into one dense system
//! of size `4N + 4`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector3, Vector4, Vector6};
use thiserror::Error;

use crate::em_system::{
    assemble_blocks, eliminate_longitudinal, full_fields, recover_longitudinal, reduce_source,
    EmError, SourceJ, ThetaSystem,
};
use crate::linalg::{condition_number_dyn, eigenvalues4};
use crate::medium::{transform_noise_sources, Medium, MediumError, NoiseSourceSpec};
use crate::mode_solver::{eigenmodes, ModeBasis, ModeError};
use crate::profile::Profile;
use crate::quadrature::{integrate, QuadConfig, QuadError};
use crate::units::Units;
use crate::{Direction, Kpar, C64};

/// Matching systems above this condition number are rejected.
pub const MATCH_CONDITION_LIMIT: f64 = 1e14;
/// Largest exponent magnitude evaluated directly.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StackError {
    #[error("invalid stack: {0}")]
    InvalidStack(String),
    #[error("region {region}: {source}")]
    Medium { region: usize, source: MediumError },
    #[error("region {region}: {source}")]
    Em { region: usize, source: EmError },
    #[error("region {region}: {source}")]
    Mode { region: usize, source: ModeError },
    #[error(
        "half-space region {region} splits its modes {toward_plus}/{toward_minus} instead of 2/2"
    )]
    Geometry {
        region: usize,
        toward_plus: usize,
        toward_minus: usize,
    },
    #[error("interface matching system is ill-conditioned (condition {condition:.3e})")]
    IllConditioned { condition: f64 },
    #[error("exponent {exponent:.3e} exceeds the overflow guard; use an anchored representation")]
    Overflow { exponent: f64 },
    #[error(
        "incident data on the {side} side has a component {residual:.3e} along outgoing modes"
    )]
    NotIncoming { side: &'static str, residual: f64 },
    #[error(
        "source in half-space region {region} does not decay fast enough (Re(λ + κ) = {rate:.3e})"
    )]
    SourceDivergence { region: usize, rate: f64 },
    #[error("source quadrature failed: {0}")]
    Quadrature(QuadError),
    #[error("z = {z} outside the domain")]
    OutOfDomain { z: f64 },
    #[error("noise source given for vacuum region {region}")]
    NoiseInVacuum { region: usize },
    #[error("evanescent incidence (k∥ = {kpar}, ω/c = {k0}) is not supported")]
    Evanescent { kpar: f64, k0: f64 },
    #[error("scattering requires vacuum half-spaces (region {region} is '{name}')")]
    NonVacuumHalfSpace { region: usize, name: String },
    #[error("invalid frequency ω = {0}")]
    InvalidFrequency(f64),
    #[error("source count {got} does not match region count {want}")]
    SourceCount { got: usize, want: usize },
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub thickness: f64,
    pub medium: Medium,
}

#[derive(Debug, Clone)]
pub struct LayerStack {
    pub left: Medium,
    pub layers: Vec<Layer>,
    pub right: Medium,
}

impl LayerStack {
    pub fn new(left: Medium, layers: Vec<Layer>, right: Medium) -> Result<Self, StackError> {
        for (i, l) in layers.iter().enumerate() {
            if !(l.thickness.is_finite() && l.thickness > 0.0) {
                return Err(StackError::InvalidStack(format!(
                    "layer {} has thickness {}; thicknesses must be finite and positive",
                    i + 1,
                    l.thickness
                )));
            }
        }
        Ok(LayerStack {
            left,
            layers,
            right,
        })
    }

    /// Vacuum half-spaces around the given layers.
    pub fn slab(layers: Vec<Layer>) -> Result<Self, StackError> {
        Self::new(Medium::vacuum(), layers, Medium::vacuum())
    }

    pub fn region_count(&self) -> usize {
        self.layers.len() + 2
    }

    /// Interface positions `0 = z_0 < z_1 < … < z_N`.
    pub fn interfaces(&self) -> Vec<f64> {
        let mut z = vec![0.0];
        let mut acc = 0.0;
        for l in &self.layers {
            acc += l.thickness;
            z.push(acc);
        }
        z
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    pub fn medium(&self, region: usize) -> &Medium {
        if region == 0 {
            &self.left
        } else if region <= self.layers.len() {
            &self.layers[region - 1].medium
        } else {
            &self.right
        }
    }

    /// `(z_left, z_right)` of a region, infinite for the half-spaces.
    pub fn bounds(&self, region: usize) -> (f64, f64) {
        let z = self.interfaces();
        let n = self.layers.len();
        if region == 0 {
            (f64::NEG_INFINITY, 0.0)
        } else if region <= n {
            (z[region - 1], z[region])
        } else {
            (z[n], f64::INFINITY)
        }
    }

    /// Region containing `z`; interfaces belong to the region on their right.
    pub fn region_of(&self, z: f64) -> Result<usize, StackError> {
        if !z.is_finite() {
            return Err(StackError::OutOfDomain { z });
        }
        let zs = self.interfaces();
        Ok(zs.iter().filter(|zi| **zi <= z).count())
    }
}

/// Everything needed to write down the homogeneous solution in one region.
#[derive(Debug, Clone)]
pub struct RegionSystem {
    pub index: usize,
    pub theta: ThetaSystem,
    pub modes: ModeBasis,
    /// `λ_j = σΩ_j`; mode `j` behaves as `e^{−λ_j z}`.
    pub rates: [C64; 4],
    /// Whether mode `j` decays toward `+∞`.
    pub decays_right: [bool; 4],
    pub bounds: (f64, f64),
    pub anchors: [f64; 4],
    pub r_inv: Matrix4<C64>,
}

impl RegionSystem {
    pub fn is_left_half_space(&self) -> bool {
        self.bounds.0 == f64::NEG_INFINITY
    }

    pub fn is_right_half_space(&self) -> bool {
        self.bounds.1 == f64::INFINITY
    }

    /// Modes kept by the decay conditions.
    pub fn allowed(&self) -> Vec<usize> {
        (0..4)
            .filter(|&j| {
                if self.is_left_half_space() {
                    !self.decays_right[j]
                } else if self.is_right_half_space() {
                    self.decays_right[j]
                } else {
                    true
                }
            })
            .collect()
    }

    /// Modes fixed by incident data (empty for finite layers).
    pub fn incoming(&self) -> Vec<usize> {
        let allowed = self.allowed();
        (0..4).filter(|j| !allowed.contains(j)).collect()
    }

    /// `R_j e^{−λ_j (z − z_j)}`.
    pub fn mode_at(&self, j: usize, z: f64) -> Result<Vector4<C64>, StackError> {
        let x = -self.rates[j] * (z - self.anchors[j]);
        if x.re > MAX_EXPONENT {
            return Err(StackError::Overflow { exponent: x.re });
        }
        Ok(self.modes.vector(j) * x.exp())
    }

    pub fn homogeneous(&self, coeffs: &Vector4<C64>, z: f64) -> Result<Vector4<C64>, StackError> {
        let mut out = Vector4::zeros();
        for j in 0..4 {
            if coeffs[j] != C64::new(0.0, 0.0) {
                out += self.mode_at(j, z)? * coeffs[j];
            }
        }
        Ok(out)
    }
}

/// `Σ_j C_j R_j e^{−σΩ_j z}` without anchoring.
pub fn general_solution(
    basis: &ModeBasis,
    coeffs: &Vector4<C64>,
    z: f64,
    dir: Direction,
) -> Result<Vector4<C64>, StackError> {
    let mut out = Vector4::zeros();
    for j in 0..4 {
        if coeffs[j] == C64::new(0.0, 0.0) {
            continue;
        }
        let x = -basis.omega[j] * dir.sign() * z;
        if x.re.abs() > MAX_EXPONENT {
            return Err(StackError::Overflow { exponent: x.re });
        }
        out += basis.vector(j) * (coeffs[j] * x.exp());
    }
    Ok(out)
}

/// Controls for the harmonic limit `s → −iω + 0⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    /// Real part added to `s = −iω`.
    pub limit_shift: f64,
    /// Relative size of the probe step used to classify marginal modes.
    pub probe: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            limit_shift: 0.0,
            probe: 1e-6,
        }
    }
}

fn decays_right_by_probe(
    theta_probe: &Matrix4<C64>,
    rates: &[C64; 4],
    sigma: f64,
) -> Option<[bool; 4]> {
    let eig = eigenvalues4(theta_probe)?;
    let mut out = [false; 4];
    for (j, l) in rates.iter().enumerate() {
        let near = eig
            .iter()
            .map(|w| *w * sigma)
            .min_by(|a, b| (a - l).norm().total_cmp(&(b - l).norm()))?;
        out[j] = near.re > 0.0;
    }
    Some(out)
}

/// Builds `Θ`, its modes and the anchoring of every region at `(k∥, s)`.
pub fn build_regions(
    stack: &LayerStack,
    kpar: Kpar,
    s: C64,
    dir: Direction,
    units: &Units,
    opts: &LimitOptions,
) -> Result<Vec<RegionSystem>, StackError> {
    let n = stack.region_count();
    let sigma = dir.sign();
    let mut out = Vec::with_capacity(n);
    for region in 0..n {
        let medium = stack.medium(region);
        let theta_at = |s: C64| -> Result<ThetaSystem, StackError> {
            let eta = medium
                .eta(s, units)
                .map_err(|source| StackError::Medium { region, source })?;
            let blocks = assemble_blocks(&eta, kpar, s, dir, units);
            eliminate_longitudinal(&blocks).map_err(|source| StackError::Em { region, source })
        };
        let theta = theta_at(s)?;
        let modes = eigenmodes(&theta.theta)
            .map_err(|source| StackError::Mode { region, source })?
            .with_point(kpar, s);
        let rates = modes.rates(dir);
        let tol = crate::mode_solver::MARGINAL_TOL * modes.theta_norm;
        let mut decays_right = rates.map(|l| l.re > 0.0);
        let bounds = stack.bounds(region);
        let half_space = region == 0 || region == n - 1;
        if half_space && rates.iter().any(|l| l.re.abs() <= tol) {
            let ds = opts.probe * s.norm().max(1.0);
            let probe = theta_at(s + ds)?;
            decays_right =
                decays_right_by_probe(&probe.theta, &rates, sigma).ok_or(StackError::Mode {
                    region,
                    source: ModeError::NoConvergence,
                })?;
        }
        if half_space {
            let plus = decays_right.iter().filter(|d| **d).count();
            if plus != 2 {
                return Err(StackError::Geometry {
                    region,
                    toward_plus: plus,
                    toward_minus: 4 - plus,
                });
            }
        }
        let anchors = std::array::from_fn(|j| {
            if region == 0 {
                bounds.1
            } else if region == n - 1 || decays_right[j] {
                bounds.0
            } else {
                bounds.1
            }
        });
        let r_inv = modes.inverse().ok_or(StackError::Mode {
            region,
            source: ModeError::Defective {
                condition: f64::INFINITY,
            },
        })?;
        out.push(RegionSystem {
            index: region,
            theta,
            modes,
            rates,
            decays_right,
            bounds,
            anchors,
            r_inv,
        });
    }
    Ok(out)
}

/// `x ↦ (eˣ − 1)/x`.
fn phi1(x: C64) -> C64 {
    if x.norm() < 1e-3 {
        // Taylor series to fifth order
        let mut term = C64::new(1.0, 0.0);
        let mut sum = term;
        for k in 2..=6 {
            term = term * x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() / x
    }
}

trait ExpM1 {
    fn exp_m1(self) -> Self;
}

impl ExpM1 for C64 {
    fn exp_m1(self) -> Self {
        // e^{a+ib} − 1 = (e^a − 1)cos b + (cos b − 1) + i e^a sin b
        let (a, b) = (self.re, self.im);
        let em1 = a.exp_m1();
        let cosm1 = -2.0 * (0.5 * b).sin().powi(2);
        C64::new(em1 * b.cos() + cosm1, a.exp() * b.sin())
    }
}

fn guarded_exp(x: C64) -> Result<C64, StackError> {
    if x.re > MAX_EXPONENT {
        return Err(StackError::Overflow { exponent: x.re });
    }
    Ok(x.exp())
}

/// Particular solution of `y' + λy = g e^{κz}` for one mode on `(a, b)`.
///
/// Modes decaying toward `+∞` integrate from the left end, the others from the
/// right end, so the kernel never grows.
fn exp_kernel(
    lambda: C64,
    kappa: C64,
    decays_right: bool,
    (a, b): (f64, f64),
    z: f64,
    region: usize,
) -> Result<C64, StackError> {
    let mu = lambda + kappa;
    let ekz = guarded_exp(kappa * z)?;
    if decays_right {
        if a == f64::NEG_INFINITY {
            if mu.re <= 0.0 {
                return Err(StackError::SourceDivergence {
                    region,
                    rate: mu.re,
                });
            }
            return Ok(ekz / mu);
        }
        let h = z - a;
        let x = -mu * h;
        if x.re > MAX_EXPONENT {
            return Err(StackError::Overflow { exponent: x.re });
        }
        Ok(ekz * h * phi1(x))
    } else {
        if b == f64::INFINITY {
            if mu.re >= 0.0 {
                return Err(StackError::SourceDivergence {
                    region,
                    rate: mu.re,
                });
            }
            return Ok(ekz / mu);
        }
        let h = b - z;
        let x = mu * h;
        if x.re > MAX_EXPONENT {
            return Err(StackError::Overflow { exponent: x.re });
        }
        Ok(-ekz * h * phi1(x))
    }
}

/// Particular solution `Λ_p(z)` of `Λ' + σΘΛ = G` on the domain `(a, b)`.
///
/// Works mode by mode in the eigenbasis: exponential source terms use the
/// closed-form kernel, function terms are integrated by quadrature.
pub fn particular_solution(
    region: &RegionSystem,
    g: &Profile<4>,
    z: f64,
    cfg: &QuadConfig,
) -> Result<Vector4<C64>, StackError> {
    let (a, b) = region.bounds;
    if z < a || z > b {
        return Err(StackError::OutOfDomain { z });
    }
    let mut y = Vector4::<C64>::zeros();
    for term in &g.exponentials {
        let gm = region.r_inv * term.amplitude;
        for j in 0..4 {
            if gm[j] == C64::new(0.0, 0.0) {
                continue;
            }
            y[j] += gm[j]
                * exp_kernel(
                    region.rates[j],
                    term.rate,
                    region.decays_right[j],
                    (a, b),
                    z,
                    region.index,
                )?;
        }
    }
    for term in &g.functions {
        let (s0, s1) = term.support;
        for j in 0..4 {
            let lambda = region.rates[j];
            let (lo, hi, sign) = if region.decays_right[j] {
                (a.max(s0), z.min(s1), 1.0)
            } else {
                (z.max(s0), b.min(s1), -1.0)
            };
            if hi <= lo {
                continue;
            }
            let r_inv = region.r_inv;
            let f = &term.f;
            let val = integrate(
                |zp| {
                    let gj = (r_inv * f(zp))[j];
                    [gj * (-lambda * (z - zp)).exp()]
                },
                lo,
                hi,
                cfg,
            )
            .map_err(StackError::Quadrature)?;
            y[j] += val.value[0] * sign;
        }
    }
    Ok(region.modes.r * y)
}

/// Incident data as tangential states carried by the incoming modes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IncidentData {
    /// `Λ` at `z = 0⁻` from waves entering through the left half-space.
    pub left: Vector4<C64>,
    /// `Λ` at `z = z_N⁺` from waves entering through the right half-space.
    pub right: Vector4<C64>,
}

/// Solution in one region.
#[derive(Debug, Clone)]
pub struct RegionSolution {
    pub system: RegionSystem,
    /// Anchored mode coefficients. Forbidden half-space modes are exactly zero.
    pub coeffs: Vector4<C64>,
    /// Anchored coefficients of the incident modes (zero in finite layers).
    pub incident: Vector4<C64>,
    pub source: SourceJ,
    pub g: Profile<4>,
}

impl RegionSolution {
    pub fn lambda(&self, z: f64, cfg: &QuadConfig) -> Result<Vector4<C64>, StackError> {
        let h = self.system.homogeneous(&(self.coeffs + self.incident), z)?;
        if self.g.is_zero() {
            return Ok(h);
        }
        Ok(h + particular_solution(&self.system, &self.g, z, cfg)?)
    }

    /// Coefficients `C_j` of the unanchored form `Σ C_j R_j e^{−λ_j z}`.
    pub fn unanchored_coeffs(&self) -> Result<Vector4<C64>, StackError> {
        let mut out = Vector4::zeros();
        let total = self.coeffs + self.incident;
        for j in 0..4 {
            if total[j] == C64::new(0.0, 0.0) {
                continue;
            }
            out[j] = total[j] * guarded_exp(self.system.rates[j] * self.system.anchors[j])?;
        }
        Ok(out)
    }
}

/// Matched solution of the whole stack at one `(k∥, s)` and direction.
#[derive(Debug, Clone)]
pub struct StackSolution {
    pub dir: Direction,
    pub kpar: Kpar,
    pub s: C64,
    pub interfaces: Vec<f64>,
    pub regions: Vec<RegionSolution>,
    pub condition: f64,
}

impl StackSolution {
    pub fn region_of(&self, z: f64) -> Result<usize, StackError> {
        if !z.is_finite() {
            return Err(StackError::OutOfDomain { z });
        }
        Ok(self.interfaces.iter().filter(|zi| **zi <= z).count())
    }

    pub fn lambda(&self, z: f64) -> Result<Vector4<C64>, StackError> {
        let r = self.region_of(z)?;
        self.regions[r].lambda(z, &QuadConfig::default())
    }

    /// `Λ` evaluated with the solution of a specific region.
    pub fn lambda_in(&self, region: usize, z: f64) -> Result<Vector4<C64>, StackError> {
        self.regions[region].lambda(z, &QuadConfig::default())
    }

    /// All six field components at `z`.
    pub fn fields(&self, z: f64) -> Result<Vector6<C64>, StackError> {
        let r = self.region_of(z)?;
        self.fields_in(r, z)
    }

    pub fn fields_in(&self, region: usize, z: f64) -> Result<Vector6<C64>, StackError> {
        let sol = &self.regions[region];
        let l = sol.lambda(z, &QuadConfig::default())?;
        let (ez, hz) = recover_longitudinal(&sol.system.theta, &l, &sol.source.eval(z));
        Ok(full_fields(&l, ez, hz))
    }

    /// `‖Λ(z_i⁻) − Λ(z_i⁺)‖` at every interface.
    pub fn interface_jumps(&self) -> Result<Vec<f64>, StackError> {
        self.interfaces
            .iter()
            .enumerate()
            .map(|(i, &z)| Ok((self.lambda_in(i, z)? - self.lambda_in(i + 1, z)?).norm()))
            .collect()
    }
}

/// Builds the source vector of one region from raw noise and initial fields.
#[allow(clippy::too_many_arguments)]
pub fn build_source(
    stack: &LayerStack,
    region: usize,
    noise: &NoiseSourceSpec,
    b0: &Profile<3>,
    d0: &Profile<3>,
    s: C64,
    dir: Direction,
    units: &Units,
) -> Result<SourceJ, StackError> {
    let medium = stack.medium(region);
    let primed = if noise.is_zero() {
        NoiseSourceSpec {
            primed: true,
            ..NoiseSourceSpec::zero()
        }
    } else {
        if medium.is_vacuum() {
            return Err(StackError::NoiseInVacuum { region });
        }
        let chi = medium
            .laplace(s)
            .map_err(|source| StackError::Medium { region, source })?;
        transform_noise_sources(&chi, noise, units.mu0)
            .map_err(|source| StackError::Medium { region, source })?
    };
    Ok(SourceJ::build(&primed, b0, d0, s, dir, units))
}

fn decompose_incident(
    region: &RegionSystem,
    lambda: &Vector4<C64>,
    side: &'static str,
) -> Result<Vector4<C64>, StackError> {
    let c = region.r_inv * lambda;
    let incoming = region.incoming();
    let mut out = Vector4::zeros();
    let mut stray = 0.0_f64;
    for j in 0..4 {
        if incoming.contains(&j) {
            out[j] = c[j];
        } else {
            stray = stray.max(c[j].norm());
        }
    }
    if stray > 1e-10 * (1.0 + c.norm()) {
        return Err(StackError::NotIncoming {
            side,
            residual: stray,
        });
    }
    Ok(out)
}

/// Solves the interface conditions for all region coefficients.
///
/// `sources` holds one entry per region (or is empty for a source-free
/// problem). Incident data enters through the incoming modes of the
/// half-spaces.
pub fn match_slab(
    regions: Vec<RegionSystem>,
    interfaces: &[f64],
    sources: &[SourceJ],
    incident: &IncidentData,
    kpar: Kpar,
    s: C64,
    dir: Direction,
) -> Result<StackSolution, StackError> {
    let n_regions = regions.len();
    if n_regions < 2 || interfaces.len() != n_regions - 1 {
        return Err(StackError::InvalidStack(format!(
            "{} regions need {} interfaces, got {}",
            n_regions,
            n_regions.saturating_sub(1),
            interfaces.len()
        )));
    }
    if !sources.is_empty() && sources.len() != n_regions {
        return Err(StackError::SourceCount {
            got: sources.len(),
            want: n_regions,
        });
    }
    let cfg = QuadConfig::default();
    let sources: Vec<SourceJ> = if sources.is_empty() {
        vec![SourceJ::zero(); n_regions]
    } else {
        sources.to_vec()
    };
    let gs: Vec<Profile<4>> = regions
        .iter()
        .zip(&sources)
        .map(|(r, j)| reduce_source(&r.theta, j))
        .collect();

    // unknown layout: allowed modes of each region in order
    let mut offsets = Vec::with_capacity(n_regions);
    let mut unknowns: Vec<(usize, usize)> = Vec::new();
    for (ri, r) in regions.iter().enumerate() {
        offsets.push(unknowns.len());
        for j in r.allowed() {
            unknowns.push((ri, j));
        }
    }
    let size = unknowns.len();
    if size != 4 * interfaces.len() {
        return Err(StackError::InvalidStack(format!(
            "{size} unknowns for {} interface conditions",
            4 * interfaces.len()
        )));
    }

    let left_inc = decompose_incident(&regions[0], &incident.left, "left")?;
    let right_inc = decompose_incident(&regions[n_regions - 1], &incident.right, "right")?;
    let mut incident_coeffs = vec![Vector4::<C64>::zeros(); n_regions];
    incident_coeffs[0] = left_inc;
    incident_coeffs[n_regions - 1] = right_inc;

    let mut a = DMatrix::<C64>::zeros(size, size);
    let mut rhs = DVector::<C64>::zeros(size);
    for (i, &z) in interfaces.iter().enumerate() {
        let row = 4 * i;
        for (col, &(ri, j)) in unknowns.iter().enumerate() {
            let sign = if ri == i {
                1.0
            } else if ri == i + 1 {
                -1.0
            } else {
                continue;
            };
            let v = regions[ri].mode_at(j, z)? * C64::new(sign, 0.0);
            for k in 0..4 {
                a[(row + k, col)] = v[k];
            }
        }
        // Λ_i(z) − Λ_{i+1}(z) = 0 with particular and incident parts moved right
        let mut known = Vector4::<C64>::zeros();
        for (ri, sign) in [(i, 1.0), (i + 1, -1.0)] {
            let mut part = regions[ri].homogeneous(&incident_coeffs[ri], z)?;
            if !gs[ri].is_zero() {
                part += particular_solution(&regions[ri], &gs[ri], z, &cfg)?;
            }
            known += part * C64::new(sign, 0.0);
        }
        for k in 0..4 {
            rhs[row + k] = -known[k];
        }
    }

    let condition = condition_number_dyn(&a);
    if condition.is_nan() || condition > MATCH_CONDITION_LIMIT {
        return Err(StackError::IllConditioned { condition });
    }
    let x = a.lu().solve(&rhs).ok_or(StackError::IllConditioned {
        condition: f64::INFINITY,
    })?;

    let mut solutions = Vec::with_capacity(n_regions);
    for (ri, ((system, source), g)) in regions.into_iter().zip(sources).zip(gs).enumerate() {
        let mut coeffs = Vector4::zeros();
        let count = system.allowed().len();
        for (k, j) in system.allowed().into_iter().enumerate() {
            debug_assert!(k < count);
            coeffs[j] = x[offsets[ri] + k];
        }
        solutions.push(RegionSolution {
            system,
            coeffs,
            incident: incident_coeffs[ri],
            source,
            g,
        });
    }
    Ok(StackSolution {
        dir,
        kpar,
        s,
        interfaces: interfaces.to_vec(),
        regions: solutions,
        condition,
    })
}

/// Builds every region and matches them in one call.
#[allow(clippy::too_many_arguments)]
pub fn solve_stack(
    stack: &LayerStack,
    kpar: Kpar,
    s: C64,
    dir: Direction,
    units: &Units,
    sources: &[SourceJ],
    incident: &IncidentData,
    opts: &LimitOptions,
) -> Result<StackSolution, StackError> {
    let regions = build_regions(stack, kpar, s, dir, units, opts)?;
    match_slab(
        regions,
        &stack.interfaces(),
        sources,
        incident,
        kpar,
        s,
        dir,
    )
}

/// `(Γ, Γe^{−Ωd}, Γe^{Ωd})` for a slab.
pub type SlabArrays = (Matrix4<C64>, Matrix4<C64>, Matrix4<C64>);

/// The arrays used by the sequential single-slab elimination: the eigenvector
/// matrix `Γ = [R_j]`, and `[R_j e^{−Ω_j d}]`, `[R_j e^{Ω_j d}]`.
pub fn slab_interface_arrays(modes: &ModeBasis, d: f64) -> Result<SlabArrays, StackError> {
    let mut minus = modes.r;
    let mut plus = modes.r;
    for j in 0..4 {
        let x = modes.omega[j] * d;
        if x.re.abs() > MAX_EXPONENT {
            return Err(StackError::Overflow { exponent: x.re });
        }
        let em = (-x).exp();
        let ep = x.exp();
        for k in 0..4 {
            minus[(k, j)] *= em;
            plus[(k, j)] *= ep;
        }
    }
    Ok((modes.r, minus, plus))
}

/// Reflection and transmission of a stack between vacuum half-spaces.
///
/// Index order is `(s, p)`; `r[(μ, ν)]` is the `μ`-polarized reflected
/// amplitude for unit `ν`-polarized incidence. Reflection is referenced at
/// `z = 0`, transmission at the last interface.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterResult {
    pub omega: f64,
    pub kpar: Kpar,
    pub r: Matrix2<C64>,
    pub t: Matrix2<C64>,
    /// Reflected power fraction per incident polarization.
    pub reflectance: [f64; 2],
    /// Transmitted power fraction per incident polarization.
    pub transmittance: [f64; 2],
}

/// In-plane polarization directions `p̂ = k̂∥` (or `x̂` at normal incidence) and `ŝ = ẑ × p̂`.
pub fn polarization_basis(kpar: Kpar) -> (Vector3<f64>, Vector3<f64>) {
    let k = kpar.norm();
    let p = if k == 0.0 {
        Vector3::new(1.0, 0.0, 0.0)
    } else {
        Vector3::new(kpar.kx / k, kpar.ky / k, 0.0)
    };
    let s = Vector3::new(-p[1], p[0], 0.0);
    (p, s)
}

/// Tangential states of unit `s`- and `p`-polarized vacuum waves entering from the left.
///
/// The incoming root of `q² = k∥² + s²ε₀μ₀` is the one continuing to positive
/// real part at `s + δ`, so the templates also hold on the imaginary axis.
pub fn incident_templates(
    kpar: Kpar,
    s: C64,
    units: &Units,
    opts: &LimitOptions,
) -> Result<[Vector4<C64>; 2], StackError> {
    let q = crate::mode_solver::vacuum_q(kpar, s, units)
        .map_err(|source| StackError::Mode { region: 0, source })?;
    let ds = opts.probe * s.norm().max(1.0);
    let q_probe = crate::mode_solver::vacuum_q(kpar, s + ds, units)
        .map_err(|source| StackError::Mode { region: 0, source })?;
    let q_in = if (q - q_probe).norm() <= (q + q_probe).norm() {
        q
    } else {
        -q
    };

    let (p_hat, s_hat) = polarization_basis(kpar);
    let eta0 = units.impedance();
    let lift = |v: Vector3<f64>| v.map(|x| C64::new(x, 0.0));
    let (p_c, s_c) = (lift(p_hat), lift(s_hat));
    let tangential = |e: Vector3<C64>, h: Vector3<C64>| Vector4::new(e[0], e[1], h[0], h[1]);
    Ok([
        tangential(s_c, -p_c * (q_in / (s * units.mu0))),
        tangential(
            p_c * (q_in / (s * units.eps0 * eta0)),
            s_c / C64::new(eta0, 0.0),
        ),
    ])
}

/// Harmonic-limit solve for unit incident waves from the left.
pub fn scattering_matrices(
    stack: &LayerStack,
    kpar: Kpar,
    omega: f64,
    units: &Units,
    opts: &LimitOptions,
) -> Result<ScatterResult, StackError> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(StackError::InvalidFrequency(omega));
    }
    for (region, m) in [(0, &stack.left), (stack.region_count() - 1, &stack.right)] {
        if !m.is_vacuum() {
            return Err(StackError::NonVacuumHalfSpace {
                region,
                name: m.name.clone(),
            });
        }
    }
    let k0 = omega / units.c();
    if kpar.norm() >= k0 {
        return Err(StackError::Evanescent {
            kpar: kpar.norm(),
            k0,
        });
    }
    let s = C64::new(opts.limit_shift, -omega);
    let dir = Direction::Forward;
    let regions = build_regions(stack, kpar, s, dir, units, opts)?;

    let [s_incident, p_incident] = incident_templates(kpar, s, units, opts)?;
    let (_, s_hat) = polarization_basis(kpar);
    let s_c = s_hat.map(|x| C64::new(x, 0.0));
    let eta0 = units.impedance();

    let interfaces = stack.interfaces();
    let z_end = *interfaces.last().expect("at least one interface");
    let mut r = Matrix2::zeros();
    let mut t = Matrix2::zeros();
    for (col, inc) in [s_incident, p_incident].into_iter().enumerate() {
        let sol = match_slab(
            regions.clone(),
            &interfaces,
            &[],
            &IncidentData {
                left: inc,
                right: Vector4::zeros(),
            },
            kpar,
            s,
            dir,
        )?;
        let left = &sol.regions[0];
        let refl = left.system.homogeneous(&left.coeffs, 0.0)?;
        let right = &sol.regions[sol.regions.len() - 1];
        let trans = right.system.homogeneous(&right.coeffs, z_end)?;
        for (m, v) in [(&mut r, refl), (&mut t, trans)] {
            let e = Vector3::new(v[0], v[1], C64::new(0.0, 0.0));
            let h = Vector3::new(v[2], v[3], C64::new(0.0, 0.0));
            m[(0, col)] = e.dot(&s_c);
            m[(1, col)] = h.dot(&s_c) * eta0;
        }
    }
    let reflectance = [
        r[(0, 0)].norm_sqr() + r[(1, 0)].norm_sqr(),
        r[(0, 1)].norm_sqr() + r[(1, 1)].norm_sqr(),
    ];
    let transmittance = [
        t[(0, 0)].norm_sqr() + t[(1, 0)].norm_sqr(),
        t[(0, 1)].norm_sqr() + t[(1, 1)].norm_sqr(),
    ];
    Ok(ScatterResult {
        omega,
        kpar,
        r,
        t,
        reflectance,
        transmittance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;
    use crate::mode_solver::{vacuum_modes, vacuum_theta};
    use crate::profile::Profile;
    use nalgebra::Vector4;

    const U: Units = Units::NORMALIZED;

    fn glass(n: f64, d: f64) -> Layer {
        Layer {
            thickness: d,
            medium: Medium::isotropic("glass", c64(n, 0.0), &U),
        }
    }

    #[test]
    fn general_solution_examples() {
        let m = vacuum_modes(Kpar::new(1.0, 0.0), c64(1.0, 0.0), &U).unwrap();
        let zero = general_solution(&m, &Vector4::zeros(), 0.7, Direction::Forward).unwrap();
        assert_eq!(zero, Vector4::zeros());
        let c = Vector4::new(c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0));
        let v = general_solution(&m, &c, 0.5, Direction::Forward).unwrap();
        let f = (2f64.sqrt() / 2.0).exp();
        assert!((f - 2.028_12).abs() < 1e-5);
        assert!((v - m.vector(0) * c64(f, 0.0)).norm() < 1e-14);
        let c2 = Vector4::new(c64(0.3, 0.0), c64(0.0, 1.0), c64(2.0, 0.0), c64(-1.0, 0.5));
        assert_eq!(
            general_solution(&m, &c2, 0.0, Direction::Backward).unwrap(),
            m.r * c2
        );
        assert!(matches!(
            general_solution(&m, &c, 800.0, Direction::Forward),
            Err(StackError::Overflow { .. })
        ));
    }

    #[test]
    fn empty_problem_has_zero_coefficients() {
        let stack = LayerStack::slab(vec![Layer {
            thickness: 1.0,
            medium: Medium::vacuum(),
        }])
        .unwrap();
        let sol = solve_stack(
            &stack,
            Kpar::new(0.5, 0.2),
            c64(0.8, 0.3),
            Direction::Forward,
            &U,
            &[],
            &IncidentData::default(),
            &LimitOptions::default(),
        )
        .unwrap();
        for r in &sol.regions {
            assert_eq!(r.coeffs, Vector4::zeros());
        }
    }

    #[test]
    fn vacuum_slab_is_transparent() {
        let stack = LayerStack::slab(vec![Layer {
            thickness: 1.3,
            medium: Medium::vacuum(),
        }])
        .unwrap();
        let (kp, s) = (Kpar::new(0.4, 0.0), c64(0.6, -0.9));
        let regions = build_regions(
            &stack,
            kp,
            s,
            Direction::Forward,
            &U,
            &LimitOptions::default(),
        )
        .unwrap();
        let inc_modes = regions[0].incoming();
        let incident = regions[0].modes.vector(inc_modes[0]) * c64(1.0, 0.5);
        let sol = match_slab(
            regions,
            &stack.interfaces(),
            &[],
            &IncidentData {
                left: incident,
                right: Vector4::zeros(),
            },
            kp,
            s,
            Direction::Forward,
        )
        .unwrap();
        // no reflection
        assert!(sol.regions[0].coeffs.norm() < 1e-12);
        // transmitted state at z = d equals the incident mode propagated across
        let lam = sol.regions[0].system.rates[inc_modes[0]];
        let want = incident * (-lam * 1.3).exp();
        assert!((sol.lambda_in(2, 1.3).unwrap() - want).norm() < 1e-12);
        assert!(sol.interface_jumps().unwrap().iter().all(|j| *j < 1e-12));
    }

    #[test]
    fn forbidden_coefficients_are_exactly_zero() {
        let stack = LayerStack::slab(vec![glass(1.7, 0.6), glass(1.2, 0.4)]).unwrap();
        let (kp, s) = (Kpar::new(0.3, -0.2), c64(0.5, 1.1));
        for dir in [Direction::Forward, Direction::Backward] {
            let j = SourceJ::build(
                &NoiseSourceSpec::zero(),
                &Profile::constant(nalgebra::Vector3::new(
                    c64(0.1, 0.0),
                    c64(0.2, 0.0),
                    c64(0.0, 0.3),
                )),
                &Profile::zero(),
                s,
                dir,
                &U,
            );
            let sources = vec![SourceJ::zero(), j.clone(), j, SourceJ::zero()];
            let sol = solve_stack(
                &stack,
                kp,
                s,
                dir,
                &U,
                &sources,
                &IncidentData::default(),
                &LimitOptions::default(),
            )
            .unwrap();
            let left = &sol.regions[0];
            let right = &sol.regions[3];
            for jm in left.system.incoming() {
                assert_eq!(left.coeffs[jm], c64(0.0, 0.0));
            }
            for jm in right.system.incoming() {
                assert_eq!(right.coeffs[jm], c64(0.0, 0.0));
            }
            let jumps = sol.interface_jumps().unwrap();
            assert!(jumps.iter().all(|x| *x < 1e-10), "{jumps:?}");
        }
    }

    #[test]
    fn particular_solution_constant_source_infinite_domain() {
        let stack = LayerStack::slab(vec![]).unwrap();
        let (kp, s) = (Kpar::new(0.7, 0.1), c64(0.9, 0.4));
        let regions = build_regions(
            &stack,
            kp,
            s,
            Direction::Forward,
            &U,
            &LimitOptions::default(),
        )
        .unwrap();
        let mut r = regions[0].clone();
        r.bounds = (f64::NEG_INFINITY, f64::INFINITY);
        let g = Vector4::new(c64(1.0, 0.0), c64(0.0, -0.5), c64(0.25, 0.0), c64(0.0, 0.0));
        let lp =
            particular_solution(&r, &Profile::constant(g), 0.3, &QuadConfig::default()).unwrap();
        let want = r.theta.signed_theta().try_inverse().unwrap() * g;
        assert!((lp - want).norm() < 1e-12);
        let zero = particular_solution(&r, &Profile::zero(), 0.3, &QuadConfig::default()).unwrap();
        assert_eq!(zero, Vector4::zeros());
    }

    #[test]
    fn particular_solution_satisfies_ode() {
        let stack = LayerStack::slab(vec![glass(1.5, 1.0)]).unwrap();
        let (kp, s) = (Kpar::new(0.5, 0.0), c64(0.7, -0.6));
        let regions = build_regions(
            &stack,
            kp,
            s,
            Direction::Backward,
            &U,
            &LimitOptions::default(),
        )
        .unwrap();
        let layer = &regions[1];
        let g = Profile::exponential(
            Vector4::new(c64(1.0, 0.0), c64(0.0, 1.0), c64(0.5, 0.0), c64(0.0, 0.0)),
            c64(0.2, 1.5),
        )
        .add(&Profile::function((0.2, 0.7), |z| {
            let b = (-(z - 0.45f64).powi(2) / 0.005).exp();
            Vector4::new(c64(b, 0.0), c64(0.0, 0.0), c64(0.0, -b), c64(0.5 * b, 0.0))
        }));
        let cfg = QuadConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            ..Default::default()
        };
        let st = layer.theta.signed_theta();
        for z in [0.1, 0.4, 0.55, 0.9] {
            let h = 1e-4;
            let lp = |z| particular_solution(layer, &g, z, &cfg).unwrap();
            let d = (lp(z - 2.0 * h) - lp(z - h) * c64(8.0, 0.0) + lp(z + h) * c64(8.0, 0.0)
                - lp(z + 2.0 * h))
                / c64(12.0 * h, 0.0);
            let res = d + st * lp(z) - g.eval(z);
            assert!(res.norm() < 1e-7, "z = {z}: {}", res.norm());
        }
    }

    #[test]
    fn sequential_elimination_agrees_with_global_solve() {
        // single slab, forward direction: the 8×8 relation between the half-space coefficients
        let d = 0.8;
        let stack = LayerStack::slab(vec![glass(1.6, d)]).unwrap();
        let (kp, s) = (Kpar::new(0.4, 0.3), c64(0.9, 0.5));
        let regions = build_regions(
            &stack,
            kp,
            s,
            Direction::Forward,
            &U,
            &LimitOptions::default(),
        )
        .unwrap();
        let slab_modes = regions[1].modes.clone();
        let vac = vacuum_modes(kp, s, &U).unwrap();
        let inc = vac.vector(2) * c64(1.0, 0.0) + vac.vector(3) * c64(0.0, 0.7);
        let sol = match_slab(
            regions,
            &stack.interfaces(),
            &[],
            &IncidentData {
                left: inc,
                right: Vector4::zeros(),
            },
            kp,
            s,
            Direction::Forward,
        )
        .unwrap();
        let (gamma, delta_inv, _pi_inv) = slab_interface_arrays(&slab_modes, d).unwrap();
        let c_slab = sol.regions[1].unanchored_coeffs().unwrap();
        let left_total = sol.lambda_in(0, 0.0).unwrap();
        let right_total = sol.lambda_in(2, d).unwrap();
        // Γ C = Λ(0⁻) and Δ⁻¹-array C = Λ(d⁺)
        assert!((gamma * c_slab - left_total).norm() < 1e-11);
        assert!((delta_inv * c_slab - right_total).norm() < 1e-11);
        let _ = vacuum_theta(kp, s, Direction::Forward, &U).unwrap();
    }

    #[test]
    fn quarter_and_half_wave() {
        let n = 2.0;
        let omega = 2.0 * std::f64::consts::PI;
        let lambda0 = 1.0;
        for (d, want) in [(lambda0 / (4.0 * n), 0.36), (lambda0 / (2.0 * n), 0.0)] {
            let stack = LayerStack::slab(vec![glass(n, d)]).unwrap();
            let res = scattering_matrices(&stack, Kpar::ZERO, omega, &U, &LimitOptions::default())
                .unwrap();
            for pol in 0..2 {
                assert!(
                    (res.reflectance[pol] - want).abs() < 1e-10,
                    "{d}: {:?}",
                    res.reflectance
                );
                assert!((res.reflectance[pol] + res.transmittance[pol] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn vacuum_stack_scattering() {
        let stack = LayerStack::slab(vec![Layer {
            thickness: 0.75,
            medium: Medium::vacuum(),
        }])
        .unwrap();
        let omega = 3.0;
        let kp = Kpar::new(1.2, 0.9);
        let res = scattering_matrices(&stack, kp, omega, &U, &LimitOptions::default()).unwrap();
        assert!(res.r.norm() < 1e-12);
        let kz = (omega * omega - kp.norm_sqr()).sqrt();
        let phase = c64(0.0, kz * 0.75).exp();
        assert!(
            (res.t - Matrix2::identity() * phase).norm() < 1e-12,
            "{}",
            res.t
        );
    }

    #[test]
    fn evanescent_incidence_rejected() {
        let stack = LayerStack::slab(vec![glass(1.5, 1.0)]).unwrap();
        assert!(matches!(
            scattering_matrices(
                &stack,
                Kpar::new(2.0, 0.0),
                1.0,
                &U,
                &LimitOptions::default()
            ),
            Err(StackError::Evanescent { .. })
        ));
    }

    #[test]
    fn invalid_thickness_rejected() {
        assert!(LayerStack::slab(vec![glass(1.5, -1.0)]).is_err());
        assert!(LayerStack::slab(vec![glass(1.5, 0.0)]).is_err());
    }
}
