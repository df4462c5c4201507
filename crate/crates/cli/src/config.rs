//! Run configuration: TOML parsing and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use bianiso::medium::{CouplingModel, Medium, MediumModel, PoleModel, Reservoir, ResponseTerm};
use bianiso::stack_solver::{Layer, LayerStack, LimitOptions};
use bianiso::units::Units;
use bianiso::{Direction, Kpar, C64};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.line {
            Some(l) => write!(f, "{sev}: line {l}: {}: {}", self.field, self.message),
            None => write!(f, "{sev}: {}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Scattering,
    InitialValue,
    TimeReconstruction,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "scattering" => Some(Mode::Scattering),
            "initial-value" => Some(Mode::InitialValue),
            "time-reconstruction" => Some(Mode::TimeReconstruction),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Scattering => "scattering",
            Mode::InitialValue => "initial-value",
            Mode::TimeReconstruction => "time-reconstruction",
        }
    }
}

type Real3x3 = [[f64; 3]; 3];
type Complex3 = [[f64; 2]; 3];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    units: Option<Spanned<String>>,
    mode: Option<Spanned<String>>,
    output: Option<RawOutput>,
    tolerances: Option<Spanned<RawTolerances>>,
    sweep: Option<Spanned<RawSweep>>,
    stack: Option<Spanned<RawStack>>,
    #[serde(default)]
    media: BTreeMap<String, Spanned<RawMedium>>,
    initial_value: Option<Spanned<RawInitialValue>>,
    time: Option<Spanned<RawTime>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<String>,
    metadata: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    limit_shift: Option<f64>,
    probe: Option<f64>,
    edge_tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    omega_min: f64,
    omega_max: Option<f64>,
    omega_count: Option<i64>,
    angles_deg: Option<Vec<f64>>,
    azimuth_deg: Option<f64>,
    kpar: Option<Vec<[f64; 2]>>,
    random_angles: Option<i64>,
    max_angle_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStack {
    left: Option<String>,
    right: Option<String>,
    #[serde(default)]
    layers: Vec<Spanned<RawLayer>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    medium: String,
    thickness: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMedium {
    model: String,
    index: Option<[f64; 2]>,
    chi1: Option<Vec<Spanned<RawPole>>>,
    chi3: Option<Vec<Spanned<RawPole>>>,
    chi4: Option<Vec<Spanned<RawPole>>>,
    reservoirs: Option<Vec<Spanned<RawReservoir>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPole {
    kind: String,
    strength: Option<f64>,
    tensor: Option<Real3x3>,
    resonance: Option<f64>,
    damping: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReservoir {
    width: f64,
    f: Option<Real3x3>,
    g: Option<Real3x3>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitialValue {
    direction: Option<String>,
    s_re: f64,
    region: i64,
    b0: Option<Complex3>,
    d0: Option<Complex3>,
    noise_p: Option<Complex3>,
    noise_m: Option<Complex3>,
    z_min: f64,
    z_max: f64,
    z_count: i64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    omega_max: f64,
    omega_count: i64,
    t_min: f64,
    t_max: f64,
    t_count: i64,
    z: Vec<f64>,
    t0: f64,
    tau: f64,
    polarization: Option<String>,
    window: Option<bool>,
    kpar: Option<[f64; 2]>,
}

/// One sweep sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub omega: f64,
    pub kpar: Kpar,
    pub angle_deg: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InitialValueSpec {
    pub directions: Vec<Direction>,
    pub s_re: f64,
    pub region: usize,
    pub b0: Vector3<C64>,
    pub d0: Vector3<C64>,
    pub noise_p: Vector3<C64>,
    pub noise_m: Vector3<C64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TimeSpec {
    pub omega: Vec<f64>,
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub t0: f64,
    pub tau: f64,
    /// 0 for `s`, 1 for `p`.
    pub polarization: usize,
    pub window: bool,
    pub kpar: Kpar,
}

/// A validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub units: Units,
    pub unit_name: &'static str,
    pub mode: Mode,
    pub stack: LayerStack,
    pub points: Vec<SweepPoint>,
    pub limit: LimitOptions,
    pub edge_tolerance: f64,
    pub initial: Option<InitialValueSpec>,
    pub time: Option<TimeSpec>,
    pub csv_name: String,
    pub metadata: bool,
    pub seed: u64,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<String>,
    pub seed: u64,
}

struct Ctx<'a> {
    text: &'a str,
    diags: Vec<Diagnostic>,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())]
            .matches('\n')
            .count()
            + 1
    }

    fn push(
        &mut self,
        severity: Severity,
        field: impl Into<String>,
        span: Option<Range<usize>>,
        msg: impl Into<String>,
    ) {
        let line = span.map(|s| self.line(s));
        self.diags.push(Diagnostic {
            severity,
            field: field.into(),
            line,
            message: msg.into(),
        });
    }

    fn error(
        &mut self,
        field: impl Into<String>,
        span: Option<Range<usize>>,
        msg: impl Into<String>,
    ) {
        self.push(Severity::Error, field, span, msg);
    }

    fn warn(
        &mut self,
        field: impl Into<String>,
        span: Option<Range<usize>>,
        msg: impl Into<String>,
    ) {
        self.push(Severity::Warning, field, span, msg);
    }
}

fn complex3(v: &Option<Complex3>) -> Vector3<C64> {
    match v {
        Some(a) => Vector3::new(
            C64::new(a[0][0], a[0][1]),
            C64::new(a[1][0], a[1][1]),
            C64::new(a[2][0], a[2][1]),
        ),
        None => Vector3::zeros(),
    }
}

fn real3x3(m: &Real3x3) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| m[r][c])
}

fn count(ctx: &mut Ctx, field: &str, span: Range<usize>, n: i64) -> Option<usize> {
    if n < 1 {
        ctx.error(
            field,
            Some(span),
            format!("count must be at least 1, got {n}"),
        );
        None
    } else {
        Some(n as usize)
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn build_medium(
    ctx: &mut Ctx,
    name: &str,
    raw: &Spanned<RawMedium>,
    units: &Units,
) -> Option<Medium> {
    let span = raw.span();
    let raw = raw.get_ref();
    let field = format!("media.{name}");
    match raw.model.as_str() {
        "vacuum" => Some(Medium::new(name, MediumModel::Vacuum)),
        "constant" => {
            let Some([re, im]) = raw.index else {
                ctx.error(
                    format!("{field}.index"),
                    Some(span),
                    "constant model needs index = [re, im]",
                );
                return None;
            };
            if !(re.is_finite() && im.is_finite()) || (re == 0.0 && im == 0.0) {
                ctx.error(
                    format!("{field}.index"),
                    Some(span),
                    "refractive index must be finite and nonzero",
                );
                return None;
            }
            if im < 0.0 {
                ctx.warn(
                    format!("{field}.index"),
                    Some(span),
                    "negative imaginary index describes an active medium",
                );
            }
            Some(Medium::isotropic(name, C64::new(re, im), units))
        }
        "poles" => {
            let mut model = PoleModel::default();
            let mut ok = true;
            for (tensor_name, list, target) in [
                ("chi1", &raw.chi1, &mut model.chi1),
                ("chi3", &raw.chi3, &mut model.chi3),
                ("chi4", &raw.chi4, &mut model.chi4),
            ] {
                for (i, pole) in list.iter().flatten().enumerate() {
                    let pspan = pole.span();
                    let p = pole.get_ref();
                    let pfield = format!("{field}.{tensor_name}[{i}]");
                    let tensor = match (p.strength, &p.tensor) {
                        (Some(a), None) => Matrix3::identity() * a,
                        (None, Some(t)) => real3x3(t),
                        _ => {
                            ctx.error(
                                &pfield,
                                Some(pspan),
                                "give exactly one of strength or tensor",
                            );
                            ok = false;
                            continue;
                        }
                    };
                    let tensor = tensor.map(|x| C64::new(x, 0.0));
                    match p.kind.as_str() {
                        "lorentz" => {
                            let (Some(w0), Some(g)) = (p.resonance, p.damping) else {
                                ctx.error(
                                    &pfield,
                                    Some(pspan),
                                    "lorentz terms need resonance and damping",
                                );
                                ok = false;
                                continue;
                            };
                            if g < 0.0 {
                                ctx.warn(
                                    &pfield,
                                    Some(pspan.clone()),
                                    format!("negative damping {g} describes an active medium"),
                                );
                            }
                            target.push(ResponseTerm::lorentz(tensor, w0, g));
                        }
                        "instantaneous" => target.push(ResponseTerm::instantaneous(tensor)),
                        other => {
                            ctx.error(
                                &pfield,
                                Some(pspan),
                                format!("unknown response kind '{other}'; expected lorentz or instantaneous"),
                            );
                            ok = false;
                        }
                    }
                }
            }
            if !ok {
                return None;
            }
            if let Err(e) = model.validate() {
                ctx.error(&field, Some(span), e.to_string());
                return None;
            }
            Some(Medium::new(name, MediumModel::Poles(model)))
        }
        "coupling" => {
            let reservoirs: Vec<Reservoir> = raw
                .reservoirs
                .iter()
                .flatten()
                .map(|r| {
                    let r = r.get_ref();
                    Reservoir::Envelope {
                        width: r.width,
                        f: r.f.as_ref().map(real3x3).unwrap_or_else(Matrix3::identity),
                        g: r.g.as_ref().map(real3x3).unwrap_or_else(Matrix3::zeros),
                    }
                })
                .collect();
            if reservoirs.is_empty() {
                ctx.error(
                    &field,
                    Some(span),
                    "coupling model needs at least one [[reservoirs]] entry",
                );
                return None;
            }
            match CouplingModel::new(reservoirs) {
                Ok(m) => Some(Medium::new(name, MediumModel::Coupling(m))),
                Err(e) => {
                    ctx.error(&field, Some(span), e.to_string());
                    None
                }
            }
        }
        other => {
            ctx.error(
                &field,
                Some(span),
                format!("unknown susceptibility model '{other}' in region medium '{name}'; expected vacuum, constant, poles or coupling"),
            );
            None
        }
    }
}

fn resolve_medium(
    ctx: &mut Ctx,
    media: &BTreeMap<String, Medium>,
    name: &str,
    field: &str,
    span: Option<Range<usize>>,
) -> Option<Medium> {
    if name == "vacuum" {
        return Some(Medium::vacuum());
    }
    match media.get(name) {
        Some(m) => Some(m.clone()),
        None => {
            if !ctx.diags.iter().any(|d| d.field == format!("media.{name}")) {
                ctx.error(
                    field,
                    span,
                    format!("medium '{name}' is not defined under [media]"),
                );
            }
            None
        }
    }
}

/// Parses and validates a configuration. Returns the run only when no
/// error-level diagnostics were produced.
pub fn load(text: &str, overrides: &Overrides) -> (Option<RunConfig>, Vec<Diagnostic>) {
    let mut ctx = Ctx {
        text,
        diags: Vec::new(),
    };
    let raw: RawConfig = match toml::from_str(text) {
        Ok(r) => r,
        Err(e) => {
            let span = e.span();
            let msg = e.message().to_string();
            ctx.error("config", span, msg);
            return (None, ctx.diags);
        }
    };

    let (units, unit_name) = match raw.units.as_ref().map(|u| (u.get_ref().as_str(), u.span())) {
        None | Some(("normalized", _)) => (Units::NORMALIZED, "normalized"),
        Some(("si", _)) => (Units::SI, "si"),
        Some((other, span)) => {
            ctx.error(
                "units",
                Some(span),
                format!("unknown unit system '{other}'; expected normalized or si"),
            );
            (Units::NORMALIZED, "normalized")
        }
    };

    let mode = match (&overrides.mode, &raw.mode) {
        (Some(m), _) => match Mode::parse(m) {
            Some(m) => Some(m),
            None => {
                ctx.error("--mode", None, format!("unknown mode '{m}'; expected scattering, initial-value or time-reconstruction"));
                None
            }
        },
        (None, Some(m)) => match Mode::parse(m.get_ref()) {
            Some(mm) => Some(mm),
            None => {
                ctx.error(
                    "mode",
                    Some(m.span()),
                    format!("unknown mode '{}'; expected scattering, initial-value or time-reconstruction", m.get_ref()),
                );
                None
            }
        },
        (None, None) => {
            ctx.error("mode", None, "exactly one mode must be selected");
            None
        }
    };

    let mut limit = LimitOptions::default();
    let mut edge_tolerance = 1e-6;
    if let Some(t) = &raw.tolerances {
        let span = t.span();
        let t = t.get_ref();
        if let Some(v) = t.limit_shift {
            if !(v.is_finite() && v >= 0.0) {
                ctx.error(
                    "tolerances.limit_shift",
                    Some(span.clone()),
                    "must be finite and non-negative",
                );
            }
            limit.limit_shift = v;
        }
        if let Some(v) = t.probe {
            if !(v.is_finite() && v > 0.0) {
                ctx.error(
                    "tolerances.probe",
                    Some(span.clone()),
                    "must be finite and positive",
                );
            }
            limit.probe = v;
        }
        if let Some(v) = t.edge_tolerance {
            if !(v.is_finite() && v > 0.0) {
                ctx.error(
                    "tolerances.edge_tolerance",
                    Some(span),
                    "must be finite and positive",
                );
            }
            edge_tolerance = v;
        }
    }

    let mut media = BTreeMap::new();
    for (name, m) in &raw.media {
        if name == "vacuum" {
            ctx.error(
                format!("media.{name}"),
                Some(m.span()),
                "'vacuum' is reserved",
            );
            continue;
        }
        if let Some(built) = build_medium(&mut ctx, name, m, &units) {
            media.insert(name.clone(), built);
        }
    }

    let stack = match &raw.stack {
        None => {
            ctx.error("stack", None, "missing [stack] section");
            None
        }
        Some(s) => {
            let sspan = s.span();
            let s = s.get_ref();
            let left = resolve_medium(
                &mut ctx,
                &media,
                s.left.as_deref().unwrap_or("vacuum"),
                "stack.left",
                Some(sspan.clone()),
            );
            let right = resolve_medium(
                &mut ctx,
                &media,
                s.right.as_deref().unwrap_or("vacuum"),
                "stack.right",
                Some(sspan.clone()),
            );
            let mut layers = Vec::new();
            let mut ok = left.is_some() && right.is_some();
            for (i, l) in s.layers.iter().enumerate() {
                let span = l.span();
                let l = l.get_ref();
                let field = format!("stack.layers[{i}]");
                if !(l.thickness.is_finite() && l.thickness > 0.0) {
                    ctx.error(
                        format!("{field}.thickness"),
                        Some(span.clone()),
                        format!("thickness must be positive, got {}", l.thickness),
                    );
                    ok = false;
                }
                match resolve_medium(
                    &mut ctx,
                    &media,
                    &l.medium,
                    &format!("{field}.medium"),
                    Some(span),
                ) {
                    Some(m) => layers.push(Layer {
                        thickness: l.thickness,
                        medium: m,
                    }),
                    None => ok = false,
                }
            }
            if ok {
                LayerStack::new(left.unwrap(), layers, right.unwrap()).ok()
            } else {
                None
            }
        }
    };

    if matches!(
        mode,
        Some(Mode::Scattering) | Some(Mode::TimeReconstruction)
    ) {
        if let (Some(st), Some(s)) = (&stack, &raw.stack) {
            for (side, m) in [("stack.left", &st.left), ("stack.right", &st.right)] {
                if !m.is_vacuum() {
                    ctx.error(
                        side,
                        Some(s.span()),
                        format!("{} mode needs vacuum half-spaces", mode.unwrap().name()),
                    );
                }
            }
        }
    }

    let points = match mode {
        Some(Mode::Scattering) | Some(Mode::InitialValue) => {
            sweep_points(&mut ctx, &raw, mode.unwrap(), &units, overrides.seed)
        }
        _ => Vec::new(),
    };

    let initial = if mode == Some(Mode::InitialValue) {
        initial_value(&mut ctx, &raw, stack.as_ref())
    } else {
        None
    };
    let time = if mode == Some(Mode::TimeReconstruction) {
        time_spec(&mut ctx, &raw)
    } else {
        None
    };

    let csv_name = raw
        .output
        .as_ref()
        .and_then(|o| o.csv.clone())
        .unwrap_or_else(|| format!("{}.csv", mode.map(Mode::name).unwrap_or("run")));
    if csv_name.is_empty()
        || csv_name.contains('/')
        || csv_name.contains('\\')
        || !csv_name.ends_with(".csv")
    {
        ctx.error(
            "output.csv",
            None,
            format!("'{csv_name}' must be a plain file name ending in .csv"),
        );
    }
    let metadata = raw.output.as_ref().and_then(|o| o.metadata).unwrap_or(true);

    ctx.diags
        .sort_by(|a, b| b.severity.cmp(&a.severity).then(a.line.cmp(&b.line)));
    if ctx.diags.iter().any(|d| d.severity == Severity::Error) {
        return (None, ctx.diags);
    }
    let cfg = RunConfig {
        units,
        unit_name,
        mode: mode.expect("mode checked"),
        stack: stack.expect("stack checked"),
        points,
        limit,
        edge_tolerance,
        initial,
        time,
        csv_name,
        metadata,
        seed: overrides.seed,
    };
    (Some(cfg), ctx.diags)
}

fn sweep_points(
    ctx: &mut Ctx,
    raw: &RawConfig,
    mode: Mode,
    units: &Units,
    seed: u64,
) -> Vec<SweepPoint> {
    let Some(sw) = &raw.sweep else {
        ctx.error(
            "sweep",
            None,
            format!("{} mode needs a [sweep] section", mode.name()),
        );
        return Vec::new();
    };
    let span = sw.span();
    let sw = sw.get_ref();
    let n = match sw.omega_count {
        None => Some(1),
        Some(n) => count(ctx, "sweep.omega_count", span.clone(), n),
    };
    let Some(n) = n else { return Vec::new() };
    let wmax = sw.omega_max.unwrap_or(sw.omega_min);
    if !(sw.omega_min.is_finite() && wmax.is_finite()) || wmax < sw.omega_min {
        ctx.error(
            "sweep.omega_max",
            Some(span.clone()),
            "need finite omega_min ≤ omega_max",
        );
        return Vec::new();
    }
    if n > 1 && wmax == sw.omega_min {
        ctx.error(
            "sweep.omega_count",
            Some(span.clone()),
            "several frequencies need omega_max > omega_min",
        );
        return Vec::new();
    }
    if mode == Mode::Scattering && sw.omega_min <= 0.0 {
        ctx.error(
            "sweep.omega_min",
            Some(span.clone()),
            "scattering frequencies must be positive",
        );
        return Vec::new();
    }
    let omegas = linspace(sw.omega_min, wmax, n);

    let azimuth = sw.azimuth_deg.unwrap_or(0.0).to_radians();
    let mut angles: Vec<f64> = sw.angles_deg.clone().unwrap_or_default();
    if let Some(k) = sw.random_angles {
        let Some(k) = count(ctx, "sweep.random_angles", span.clone(), k) else {
            return Vec::new();
        };
        let max = sw.max_angle_deg.unwrap_or(80.0);
        if !(max > 0.0 && max < 90.0) {
            ctx.error(
                "sweep.max_angle_deg",
                Some(span.clone()),
                "must lie in (0, 90)",
            );
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        angles.extend((0..k).map(|_| rng.random_range(0.0..max)));
    }
    let explicit = sw.kpar.clone().unwrap_or_default();
    if !angles.is_empty() && !explicit.is_empty() {
        ctx.error("sweep", Some(span), "give either angles or kpar, not both");
        return Vec::new();
    }
    for a in &angles {
        if !(a.is_finite() && *a >= 0.0 && *a < 90.0) {
            ctx.error(
                "sweep.angles_deg",
                Some(span.clone()),
                format!("angle {a} outside [0, 90)"),
            );
            return Vec::new();
        }
    }
    if angles.is_empty() && explicit.is_empty() {
        angles.push(0.0);
    }
    let mut out = Vec::new();
    for &w in &omegas {
        if explicit.is_empty() {
            for &a in &angles {
                let k = w.abs() / units.c() * a.to_radians().sin();
                out.push(SweepPoint {
                    omega: w,
                    kpar: Kpar::new(k * azimuth.cos(), k * azimuth.sin()),
                    angle_deg: Some(a),
                });
            }
        } else {
            for k in &explicit {
                out.push(SweepPoint {
                    omega: w,
                    kpar: Kpar::new(k[0], k[1]),
                    angle_deg: None,
                });
            }
        }
    }
    out
}

fn initial_value(
    ctx: &mut Ctx,
    raw: &RawConfig,
    stack: Option<&LayerStack>,
) -> Option<InitialValueSpec> {
    let Some(iv) = &raw.initial_value else {
        ctx.error(
            "initial_value",
            None,
            "initial-value mode needs an [initial_value] section",
        );
        return None;
    };
    let span = iv.span();
    let iv = iv.get_ref();
    let directions = match iv.direction.as_deref().unwrap_or("both") {
        "forward" => vec![Direction::Forward],
        "backward" => vec![Direction::Backward],
        "both" => vec![Direction::Forward, Direction::Backward],
        other => {
            ctx.error(
                "initial_value.direction",
                Some(span),
                format!("unknown direction '{other}'; expected forward, backward or both"),
            );
            return None;
        }
    };
    if !(iv.s_re.is_finite() && iv.s_re > 0.0) {
        ctx.error("initial_value.s_re", Some(span), "Re s must be positive");
        return None;
    }
    let nz = count(ctx, "initial_value.z_count", span.clone(), iv.z_count)?;
    if !(iv.z_min.is_finite() && iv.z_max.is_finite() && iv.z_min <= iv.z_max) {
        ctx.error(
            "initial_value.z_min",
            Some(span),
            "need finite z_min ≤ z_max",
        );
        return None;
    }
    let regions = stack.map(|s| s.region_count()).unwrap_or(usize::MAX);
    if iv.region < 0 || iv.region as usize >= regions {
        ctx.error(
            "initial_value.region",
            Some(span),
            format!("region {} does not exist", iv.region),
        );
        return None;
    }
    let region = iv.region as usize;
    let noise_p = complex3(&iv.noise_p);
    let noise_m = complex3(&iv.noise_m);
    if let Some(st) = stack {
        if (noise_p.norm() > 0.0 || noise_m.norm() > 0.0) && st.medium(region).is_vacuum() {
            ctx.error(
                "initial_value.noise_p",
                Some(span),
                format!("noise sources given for vacuum region {region}"),
            );
            return None;
        }
    }
    Some(InitialValueSpec {
        directions,
        s_re: iv.s_re,
        region,
        b0: complex3(&iv.b0),
        d0: complex3(&iv.d0),
        noise_p,
        noise_m,
        z: linspace(iv.z_min, iv.z_max, nz),
    })
}

fn time_spec(ctx: &mut Ctx, raw: &RawConfig) -> Option<TimeSpec> {
    let Some(t) = &raw.time else {
        ctx.error(
            "time",
            None,
            "time-reconstruction mode needs a [time] section",
        );
        return None;
    };
    let span = t.span();
    let t = t.get_ref();
    let nw = count(ctx, "time.omega_count", span.clone(), t.omega_count)?;
    if nw < 2 || nw % 2 != 0 {
        ctx.error(
            "time.omega_count",
            Some(span),
            "need an even count ≥ 2 so that ω = 0 is not sampled",
        );
        return None;
    }
    if !(t.omega_max.is_finite() && t.omega_max > 0.0) {
        ctx.error("time.omega_max", Some(span), "must be positive");
        return None;
    }
    let nt = count(ctx, "time.t_count", span.clone(), t.t_count)?;
    if !(t.t_min.is_finite() && t.t_max.is_finite() && t.t_min <= t.t_max) {
        ctx.error("time.t_min", Some(span), "need finite t_min ≤ t_max");
        return None;
    }
    if t.z.is_empty() || t.z.iter().any(|z| !z.is_finite()) || t.z.windows(2).any(|w| w[1] < w[0]) {
        ctx.error(
            "time.z",
            Some(span),
            "need a nonempty nondecreasing list of finite positions",
        );
        return None;
    }
    if !(t.tau.is_finite() && t.tau > 0.0 && t.t0.is_finite()) {
        ctx.error("time.tau", Some(span), "pulse width must be positive");
        return None;
    }
    let polarization = match t.polarization.as_deref().unwrap_or("s") {
        "s" => 0,
        "p" => 1,
        other => {
            ctx.error(
                "time.polarization",
                Some(span),
                format!("unknown polarization '{other}'; expected s or p"),
            );
            return None;
        }
    };
    let k = t.kpar.unwrap_or([0.0, 0.0]);
    Some(TimeSpec {
        omega: bianiso::synthesis::symmetric_omega_grid(t.omega_max, nw),
        t: linspace(t.t_min, t.t_max, nt),
        z: t.z.clone(),
        t0: t.t0,
        tau: t.tau,
        polarization,
        window: t.window.unwrap_or(false),
        kpar: Kpar::new(k[0], k[1]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
mode = "scattering"

[sweep]
omega_min = 1.0
omega_max = 2.0
omega_count = 3
angles_deg = [0.0, 45.0]

[stack]
layers = [{ medium = "glass", thickness = 0.5 }]

[media.glass]
model = "constant"
index = [1.5, 0.0]
"#;

    #[test]
    fn valid_config_has_no_diagnostics() {
        let (cfg, diags) = load(BASE, &Overrides::default());
        assert!(diags.is_empty(), "{diags:?}");
        let cfg = cfg.unwrap();
        assert_eq!(cfg.points.len(), 6);
        assert_eq!(cfg.stack.layers.len(), 1);
    }

    #[test]
    fn negative_thickness_is_an_error_with_line() {
        let text = BASE.replace("thickness = 0.5", "thickness = -0.5");
        let (cfg, diags) = load(&text, &Overrides::default());
        assert!(cfg.is_none());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "stack.layers[0].thickness");
        assert_eq!(diags[0].line, Some(11));
    }

    #[test]
    fn unknown_model_names_the_region() {
        let text = BASE.replace("model = \"constant\"", "model = \"drude\"");
        let (cfg, diags) = load(&text, &Overrides::default());
        assert!(cfg.is_none());
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert!(diags[0].message.contains("glass"));
        assert!(diags[0].message.contains("drude"));
    }

    #[test]
    fn negative_damping_only_warns() {
        let text = BASE.replace(
            "model = \"constant\"\nindex = [1.5, 0.0]",
            "model = \"poles\"\nchi1 = [{ kind = \"lorentz\", strength = 2.0, resonance = 3.0, damping = -0.1 }]",
        );
        let (cfg, diags) = load(&text, &Overrides::default());
        assert!(cfg.is_some());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let text = BASE.replace("omega_count = 3", "omega_count = = 3");
        let (cfg, diags) = load(&text, &Overrides::default());
        assert!(cfg.is_none());
        assert_eq!(diags[0].line, Some(7));
    }

    #[test]
    fn mode_override_and_seeded_angles() {
        let text = BASE.replace("angles_deg = [0.0, 45.0]", "random_angles = 4");
        let a = load(
            &text,
            &Overrides {
                mode: None,
                seed: 7,
            },
        )
        .0
        .unwrap();
        let b = load(
            &text,
            &Overrides {
                mode: None,
                seed: 7,
            },
        )
        .0
        .unwrap();
        let c = load(
            &text,
            &Overrides {
                mode: None,
                seed: 8,
            },
        )
        .0
        .unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
        let (cfg, diags) = load(
            BASE,
            &Overrides {
                mode: Some("bogus".into()),
                seed: 0,
            },
        );
        assert!(cfg.is_none());
        assert_eq!(diags[0].field, "--mode");
    }
}
