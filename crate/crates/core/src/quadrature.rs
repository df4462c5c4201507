//! Globally adaptive Gauss–Kronrod (7/15) quadrature for vector-valued
//! complex integrands.

use std::collections::BinaryHeap;

use thiserror::Error;

use crate::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and work limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not converge: component {component} error {error:.3e} (worst interval [{a}, {b}])")]
    NoConvergence {
        component: usize,
        error: f64,
        a: f64,
        b: f64,
    },
    #[error("integrand not finite at x = {x}, component {component}")]
    NonFinite { x: f64, component: usize },
}

/// Converged integral with its error estimate.
#[derive(Debug, Clone)]
pub struct QuadResult<const N: usize> {
    pub value: [C64; N],
    pub error: f64,
    pub intervals: usize,
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [C64; N],
    err: [f64; N],
    err_max: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.err_max == other.err_max
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err_max.total_cmp(&other.err_max)
    }
}

fn gk15<F, const N: usize>(f: &mut F, a: f64, b: f64) -> Result<Segment<N>, QuadError>
where
    F: FnMut(f64) -> [C64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let zero = C64::new(0.0, 0.0);
    let mut kron = [zero; N];
    let mut gauss = [zero; N];

    let mut eval = |x: f64| -> Result<[C64; N], QuadError> {
        let v = f(x);
        if let Some(component) = v
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(QuadError::NonFinite { x, component });
        }
        Ok(v)
    };

    let fc = eval(center)?;
    for i in 0..N {
        kron[i] = fc[i] * WGK[7];
        gauss[i] = fc[i] * WG[3];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        for i in 0..N {
            let sum = f1[i] + f2[i];
            kron[i] += sum * WGK[j];
            if j % 2 == 1 {
                gauss[i] += sum * WG[j / 2];
            }
        }
    }
    let mut err = [0.0; N];
    let mut err_max = 0.0_f64;
    for i in 0..N {
        kron[i] *= half;
        gauss[i] *= half;
        err[i] = (kron[i] - gauss[i]).norm();
        err_max = err_max.max(err[i]);
    }
    Ok(Segment {
        a,
        b,
        value: kron,
        err,
        err_max,
    })
}

/// Integrates `f` over the finite interval `[a, b]`.
///
/// Convergence is declared when the summed error estimate of every component
/// is below `max(abs_tol, rel_tol · |value|)` for that component.
pub fn integrate<F, const N: usize>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [C64; N],
{
    let zero = C64::new(0.0, 0.0);
    if a == b {
        return Ok(QuadResult {
            value: [zero; N],
            error: 0.0,
            intervals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    heap.push(gk15(&mut f, a, b)?);
    loop {
        let mut total = [zero; N];
        let mut total_err = [0.0; N];
        for seg in heap.iter() {
            for i in 0..N {
                total[i] += seg.value[i];
                total_err[i] += seg.err[i];
            }
        }
        let mut worst_component = None;
        let mut worst_excess = 0.0;
        for i in 0..N {
            let allowed = cfg.abs_tol.max(cfg.rel_tol * total[i].norm());
            if total_err[i] > allowed && total_err[i] - allowed >= worst_excess {
                worst_excess = total_err[i] - allowed;
                worst_component = Some(i);
            }
        }
        let Some(component) = worst_component else {
            let error = total_err.iter().cloned().fold(0.0, f64::max);
            return Ok(QuadResult {
                value: total,
                error,
                intervals: heap.len(),
            });
        };
        if heap.len() >= cfg.max_intervals {
            let worst = heap.peek().expect("non-empty");
            return Err(QuadError::NoConvergence {
                component,
                error: total_err[component],
                a: worst.a,
                b: worst.b,
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(QuadError::NoConvergence {
                component,
                error: total_err[component],
                a: worst.a,
                b: worst.b,
            });
        }
        heap.push(gk15(&mut f, worst.a, mid)?);
        heap.push(gk15(&mut f, mid, worst.b)?);
    }
}

/// Integrates `f` over `[0, ∞)` through the map `x = scale · u / (1 − u)`.
pub fn integrate_semi_infinite<F, const N: usize>(
    mut f: F,
    scale: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [C64; N],
{
    let mapped = |u: f64| {
        let one_minus = 1.0 - u;
        let x = scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        let mut v = f(x);
        for z in v.iter_mut() {
            *z *= jac;
        }
        v
    };
    integrate(mapped, 0.0, 1.0, cfg).map_err(|e| match e {
        QuadError::NoConvergence {
            component,
            error,
            a,
            b,
        } => QuadError::NoConvergence {
            component,
            error,
            a: scale * a / (1.0 - a),
            b: if b < 1.0 {
                scale * b / (1.0 - b)
            } else {
                f64::INFINITY
            },
        },
        QuadError::NonFinite { x, component } => QuadError::NonFinite {
            x: scale * x / (1.0 - x),
            component,
        },
    })
}

/// Most half periods summed by [`integrate_oscillatory`].
pub const MAX_HALF_PERIODS: usize = 4000;

/// Last entry of the highest even column of Wynn's ε table.
fn wynn_epsilon(s: &[C64]) -> C64 {
    let mut prev = vec![C64::new(0.0, 0.0); s.len() + 1];
    let mut cur = s.to_vec();
    let mut best = s[s.len() - 1];
    let mut column = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let d = cur[i + 1] - cur[i];
            if d.norm() <= 1e-15 * cur[i + 1].norm().max(1e-300) {
                return if column % 2 == 0 { cur[i + 1] } else { best };
            }
            next.push(prev[i + 1] + C64::new(1.0, 0.0) / d);
        }
        prev = cur;
        cur = next;
        column += 1;
        if column % 2 == 0 {
            best = cur[cur.len() - 1];
        }
    }
    best
}

/// Integrates over `[0, ∞)` an integrand whose sign alternates on intervals
/// of length `half_period`, such as `g(x)·sin(tx)` with `half_period = π/t`.
///
/// Each interval is integrated with [`integrate`]; the partial sums are
/// extrapolated with Wynn's ε algorithm until two successive estimates agree
/// to the tolerances of `cfg`.
pub fn integrate_oscillatory<F, const N: usize>(
    mut f: F,
    half_period: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult<N>, QuadError>
where
    F: FnMut(f64) -> [C64; N],
{
    const WINDOW: usize = 24;
    let zero = C64::new(0.0, 0.0);
    let mut sum = [zero; N];
    let mut partial: Vec<[C64; N]> = Vec::new();
    let mut last: Option<[C64; N]> = None;
    let mut agreed = 0;
    let mut error = f64::INFINITY;
    let mut intervals = 0;
    for k in 0..MAX_HALF_PERIODS {
        let a = k as f64 * half_period;
        let piece = integrate(&mut f, a, a + half_period, cfg)?;
        intervals += piece.intervals;
        for (s, v) in sum.iter_mut().zip(piece.value) {
            *s += v;
        }
        partial.push(sum);
        if partial.len() < 6 {
            continue;
        }
        let from = partial.len().saturating_sub(WINDOW);
        let mut est = [zero; N];
        for (i, e) in est.iter_mut().enumerate() {
            let seq: Vec<C64> = partial[from..].iter().map(|p| p[i]).collect();
            *e = wynn_epsilon(&seq);
        }
        if let Some(prev) = last {
            let mut ok = true;
            error = 0.0;
            for i in 0..N {
                let d = (est[i] - prev[i]).norm();
                error = error.max(d);
                ok &= d <= cfg.abs_tol.max(cfg.rel_tol * est[i].norm());
            }
            agreed = if ok { agreed + 1 } else { 0 };
            if agreed >= 2 {
                return Ok(QuadResult {
                    value: est,
                    error,
                    intervals,
                });
            }
        }
        last = Some(est);
    }
    Err(QuadError::NoConvergence {
        component: 0,
        error,
        a: 0.0,
        b: f64::INFINITY,
    })
}
