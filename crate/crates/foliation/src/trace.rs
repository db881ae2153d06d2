//! Numerical tracing of the oriented intersection foliation on the unit
//! sphere and extraction of its topological invariants: leaf closure with
//! winding numbers, torus radius profiles, leaf slope, holonomy multipliers,
//! and the apex locus of resonant leaves.

use crate::germ::{total_degree, GermPoly};
use crate::scalar::C64;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Transversality: |<theta(z), z>| must exceed this on accepted points.
pub const TANGENCY_TOL: f64 = 1e-9;
/// Default local error per unit step.
pub const DEFAULT_STEP_TOL: f64 = 1e-9;
/// Position tolerance for leaf closure.
pub const DELTA_CLOSE: f64 = 1e-6;
/// Direction alignment (radians) required on top of position closeness.
pub const DIRECTION_TOL: f64 = 1e-4;
/// Coordinate radius below which an argument track is suspended.
pub const ARG_SUSPEND_RADIUS: f64 = 1e-6;
/// Maximum argument advance per step for any coordinate off the axes.
pub const MAX_ARG_STEP: f64 = PI / 4.0;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("tangency at t = {t}: |<theta(z), z>| = {abs_c:.3e} below tolerance")]
    Tangency { t: f64, abs_c: f64 },
    #[error("step size collapsed below 1e-12 at t = {0}")]
    StepCollapse(f64),
    #[error("start point is not on the unit sphere (|z| = {0})")]
    NotOnSphere(f64),
    #[error("radius profile is ambiguous: {0}")]
    AmbiguousProfile(String),
    #[error("start on the axis leaf (b = 0): no apex exists")]
    AxisLeaf,
    #[error("quadratic sphere constraint degenerates at b = 0")]
    DegenerateConstraint,
    #[error("too few marker crossings for a slope estimate ({0} < 100)")]
    InsufficientCrossings(usize),
    #[error("no first return within T_max; transverse drift rate {drift:.3e}")]
    NoReturn { drift: f64 },
    #[error("field is not linear diagonal; torus action does not preserve it")]
    NotDiagonalLinear,
}

// ---- small complex-vector helpers --------------------------------------------

fn vnorm(z: &[C64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn vsub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Hermitian inner product <a, b> = sum a_i conj(b_i).
fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn normalize(z: &mut [C64]) {
    let n = vnorm(z);
    for c in z.iter_mut() {
        *c /= n;
    }
}

// ---- domain types ------------------------------------------------------------

/// Point on the unit sphere S^{2n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(pub Vec<C64>);

impl SpherePoint {
    pub fn new(z: Vec<C64>) -> Result<Self, TraceError> {
        let n = vnorm(&z);
        if (n - 1.0).abs() > 1e-12 {
            return Err(TraceError::NotOnSphere(n));
        }
        Ok(SpherePoint(z))
    }

    /// Rescale an off-sphere point onto the sphere.
    pub fn project(mut z: Vec<C64>) -> Self {
        normalize(&mut z);
        SpherePoint(z)
    }
}

/// Sampled integral curve of the intersection foliation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// (t, z) with strictly increasing t and |z| = 1.
    pub samples: Vec<(f64, Vec<C64>)>,
    /// Unit direction of the traced field at each sample.
    pub directions: Vec<Vec<C64>>,
    /// Unwrapped argument of each coordinate, per sample (frozen while the
    /// coordinate radius is below ARG_SUSPEND_RADIUS).
    pub arg_tracks: Vec<Vec<f64>>,
    /// |z_i| per coordinate, per sample.
    pub radius_tracks: Vec<Vec<f64>>,
    /// false once a coordinate radius dipped below ARG_SUSPEND_RADIUS.
    pub arg_reliable: Vec<bool>,
    /// min over samples of |<theta(z), z>|.
    pub transversality_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Closure {
    Closed {
        period: f64,
        /// Winding number of each coordinate argument over one period.
        windings: Vec<i64>,
        /// Max distance of Delta arg / 2 pi from the rounded winding.
        residual: f64,
        reliable: Vec<bool>,
    },
    NotClosed { min_return_distance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant { radius: f64 },
    Monotone { increasing: bool },
    UniqueMax { apex_t: f64, apex: Vec<C64> },
    Ambiguous { reason: String },
}

#[derive(Debug, Clone)]
pub struct TraceReport {
    pub closure: Closure,
    pub torus_profile: Profile,
    pub slope_estimate: Option<f64>,
    pub holonomy: Option<C64>,
    pub transversality_margin: f64,
}

// ---- direction field -----------------------------------------------------------

/// Unit tangent w to the intersection foliation at z, oriented so that the
/// radial-within-leaf vector (conj(c)/|c|) theta(z) followed by w is positive.
pub fn intersection_direction(
    germ: &GermPoly<C64>,
    z: &[C64],
) -> Result<Vec<C64>, TraceError> {
    direction_at(germ, z, 0.0)
}

fn direction_at(germ: &GermPoly<C64>, z: &[C64], t: f64) -> Result<Vec<C64>, TraceError> {
    let theta = germ.evaluate(z);
    let c = vdot(&theta, z);
    let abs_c = c.norm();
    if abs_c <= TANGENCY_TOL {
        return Err(TraceError::Tangency { t, abs_c });
    }
    let phase = C64::new(0.0, 1.0) * c.conj() / abs_c;
    let mut w: Vec<C64> = theta.iter().map(|v| phase * v).collect();
    normalize(&mut w);
    Ok(w)
}

fn transversality(germ: &GermPoly<C64>, z: &[C64]) -> f64 {
    vdot(&germ.evaluate(z), z).norm()
}

// ---- integrator ------------------------------------------------------------------

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct RkStep {
    z5: Vec<C64>,
    err: f64,
}

fn rk45_step(
    germ: &GermPoly<C64>,
    z: &[C64],
    k1: &[C64],
    h: f64,
    sign: f64,
    t: f64,
) -> Result<RkStep, TraceError> {
    let n = z.len();
    let mut ks: Vec<Vec<C64>> = Vec::with_capacity(7);
    ks.push(k1.to_vec());
    for stage in 0..6 {
        let mut y = z.to_vec();
        for (j, k) in ks.iter().enumerate() {
            let a = DP_A[stage][j];
            if a != 0.0 {
                for i in 0..n {
                    y[i] += k[i] * (sign * h * a);
                }
            }
        }
        let k = direction_at(germ, &y, t)?;
        ks.push(k);
    }
    let mut z5 = z.to_vec();
    let mut z4 = z.to_vec();
    for (j, k) in ks.iter().enumerate() {
        for i in 0..n {
            z5[i] += k[i] * (sign * h * DP_B5[j]);
            z4[i] += k[i] * (sign * h * DP_B4[j]);
        }
    }
    let err = vnorm(&vsub(&z5, &z4));
    Ok(RkStep { z5, err })
}

/// Trace the leaf through `start` forward in the oriented direction field up
/// to parameter length `t_max`, with local error at most `step_tol * h` per
/// step of size h.
pub fn trace_leaf(
    germ: &GermPoly<C64>,
    start: &SpherePoint,
    t_max: f64,
    step_tol: f64,
) -> Result<Trajectory, TraceError> {
    trace_leaf_directed(germ, start, t_max, step_tol, false)
}

/// As trace_leaf; `backward` negates the direction field.
pub fn trace_leaf_directed(
    germ: &GermPoly<C64>,
    start: &SpherePoint,
    t_max: f64,
    step_tol: f64,
    backward: bool,
) -> Result<Trajectory, TraceError> {
    let sign = if backward { -1.0 } else { 1.0 };
    let n = start.0.len();
    let mut z = start.0.clone();
    normalize(&mut z);
    let mut t = 0.0f64;
    let mut h = 1e-3f64;
    let mut w = direction_at(germ, &z, t)?;

    let mut traj = Trajectory {
        samples: vec![(0.0, z.clone())],
        directions: vec![w.clone()],
        arg_tracks: (0..n).map(|i| vec![z[i].arg()]).collect(),
        radius_tracks: (0..n).map(|i| vec![z[i].norm()]).collect(),
        arg_reliable: (0..n).map(|i| z[i].norm() >= ARG_SUSPEND_RADIUS).collect(),
        transversality_margin: transversality(germ, &z),
    };

    while t < t_max {
        if h < 1e-12 {
            return Err(TraceError::StepCollapse(t));
        }
        let h_eff = h.min(t_max - t).max(1e-12);
        let step = rk45_step(germ, &z, &w, h_eff, sign, t)?;
        if step.err > step_tol * h_eff {
            h = 0.5 * h_eff;
            continue;
        }
        let mut z_new = step.z5;
        normalize(&mut z_new);
        // cap the argument advance of every off-axis coordinate
        let mut arg_jump_ok = true;
        for i in 0..n {
            if z[i].norm() >= ARG_SUSPEND_RADIUS && z_new[i].norm() >= ARG_SUSPEND_RADIUS {
                let d = principal_angle(z_new[i].arg() - z[i].arg());
                if d.abs() > MAX_ARG_STEP {
                    arg_jump_ok = false;
                    break;
                }
            }
        }
        if !arg_jump_ok {
            h = 0.5 * h_eff;
            continue;
        }
        let w_new = direction_at(germ, &z_new, t + h_eff)?;
        t += h_eff;
        for i in 0..n {
            let r_old = z[i].norm();
            let r_new = z_new[i].norm();
            let prev_arg = *traj.arg_tracks[i].last().unwrap();
            let next_arg = if r_old >= ARG_SUSPEND_RADIUS && r_new >= ARG_SUSPEND_RADIUS {
                prev_arg + principal_angle(z_new[i].arg() - z[i].arg())
            } else {
                traj.arg_reliable[i] = false;
                prev_arg
            };
            traj.arg_tracks[i].push(next_arg);
            traj.radius_tracks[i].push(r_new);
        }
        z = z_new;
        w = w_new;
        traj.samples.push((t, z.clone()));
        traj.directions.push(w.clone());
        let margin = transversality(germ, &z);
        if margin < traj.transversality_margin {
            traj.transversality_margin = margin;
        }
        // grow the step within the error budget
        let grow = if step.err > 0.0 {
            (step_tol * h_eff / step.err).powf(0.2) * 0.9
        } else {
            5.0
        };
        h = (h_eff * grow.clamp(0.2, 5.0)).min(0.05);
    }
    Ok(traj)
}

fn principal_angle(a: f64) -> f64 {
    let mut x = a % TAU;
    if x > PI {
        x -= TAU;
    } else if x < -PI {
        x += TAU;
    }
    x
}

/// Classical RK4 flow of the traced field from z over signed time dt, in
/// substeps no longer than 1e-3, with renormalization.
fn flow_from(germ: &GermPoly<C64>, z: &[C64], dt: f64) -> Result<Vec<C64>, TraceError> {
    let steps = ((dt.abs() / 1e-3).ceil() as usize).max(1);
    let h = dt / steps as f64;
    let n = z.len();
    let mut y = z.to_vec();
    for _ in 0..steps {
        let k1 = direction_at(germ, &y, 0.0)?;
        let y2: Vec<C64> = (0..n).map(|i| y[i] + k1[i] * (h / 2.0)).collect();
        let k2 = direction_at(germ, &y2, 0.0)?;
        let y3: Vec<C64> = (0..n).map(|i| y[i] + k2[i] * (h / 2.0)).collect();
        let k3 = direction_at(germ, &y3, 0.0)?;
        let y4: Vec<C64> = (0..n).map(|i| y[i] + k3[i] * h).collect();
        let k4 = direction_at(germ, &y4, 0.0)?;
        for i in 0..n {
            y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        normalize(&mut y);
    }
    Ok(y)
}

// ---- closure detection --------------------------------------------------------------

/// Decide whether the traced leaf closes up: a candidate return must match
/// the start in position (delta_close) and direction (DIRECTION_TOL).
pub fn detect_closure(
    germ: &GermPoly<C64>,
    traj: &Trajectory,
    delta_close: f64,
) -> Result<Closure, TraceError> {
    let (_, z0) = &traj.samples[0];
    let w0 = &traj.directions[0];
    // skip the initial neighborhood: wait until the trace has left the start
    let escape = traj
        .samples
        .iter()
        .position(|(_, z)| vnorm(&vsub(z, z0)) > 100.0 * delta_close)
        .unwrap_or(traj.samples.len());
    let mut min_return = f64::INFINITY;
    for k in escape..traj.samples.len() {
        let (t_k, z_k) = &traj.samples[k];
        let d = vnorm(&vsub(z_k, z0));
        // only refine local minima of the coarse sample distance
        let coarse_near = d < 0.1;
        if !coarse_near {
            continue;
        }
        let prev = vnorm(&vsub(&traj.samples[k - 1].1, z0));
        let next = traj
            .samples
            .get(k + 1)
            .map(|(_, z)| vnorm(&vsub(z, z0)))
            .unwrap_or(f64::INFINITY);
        if d > prev || d > next {
            continue;
        }
        // Newton refinement of the closest flow time around t_k
        let mut tau = 0.0f64;
        let mut point = z_k.clone();
        let mut dir = traj.directions[k].clone();
        for _ in 0..8 {
            let corr: f64 = vdot(&vsub(z0, &point), &dir).re;
            if corr.abs() < 1e-15 {
                break;
            }
            tau += corr;
            point = flow_from(germ, z_k, tau)?;
            dir = direction_at(germ, &point, *t_k)?;
        }
        let refined = vnorm(&vsub(&point, z0));
        if refined < min_return {
            min_return = refined;
        }
        let align = vdot(&dir, w0).re.clamp(-1.0, 1.0).acos();
        if refined < delta_close && align < DIRECTION_TOL {
            let period = t_k + tau;
            let n = z0.len();
            let mut windings = Vec::with_capacity(n);
            let mut residual = 0.0f64;
            for i in 0..n {
                let d_arg = traj.arg_tracks[i][k]
                    + principal_angle(point[i].arg() - z_k[i].arg())
                    - traj.arg_tracks[i][0];
                let turns = d_arg / TAU;
                let rounded = turns.round();
                residual = residual.max((turns - rounded).abs());
                windings.push(rounded as i64);
            }
            return Ok(Closure::Closed {
                period,
                windings,
                residual,
                reliable: traj.arg_reliable.clone(),
            });
        }
    }
    Ok(Closure::NotClosed { min_return_distance: min_return })
}

// ---- radius profiles --------------------------------------------------------------

/// Shape of the coordinate radii along the trace: constant (real-ratio torus
/// leaf), monotone in |z_1| (non-real ratio), or a unique interior maximum of
/// the last coordinate radius (resonant leaf).
pub fn torus_radius_profile(traj: &Trajectory) -> Profile {
    let r_first = &traj.radius_tracks[0];
    let len = r_first.len();
    if len < 3 {
        return Profile::Ambiguous { reason: "trace too short".to_string() };
    }
    let max = r_first.iter().cloned().fold(f64::MIN, f64::max);
    let min = r_first.iter().cloned().fold(f64::MAX, f64::min);
    if max - min < 1e-6 {
        return Profile::Constant { radius: 0.5 * (max + min) };
    }
    let noise = 1e-10;
    let increasing = r_first.windows(2).all(|w| w[1] - w[0] > -noise);
    let decreasing = r_first.windows(2).all(|w| w[0] - w[1] > -noise);
    if (increasing || decreasing) && max - min > 1e-6 {
        return Profile::Monotone { increasing };
    }
    // unique interior maximum of the last coordinate radius
    let r_last = traj.radius_tracks.last().unwrap();
    let (apex_idx, _) = r_last
        .iter()
        .enumerate()
        .fold((0usize, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if apex_idx == 0 || apex_idx == len - 1 {
        return Profile::Ambiguous {
            reason: "maximum of the last coordinate radius sits on the trace boundary"
                .to_string(),
        };
    }
    let rising = r_last[..=apex_idx].windows(2).all(|w| w[1] - w[0] > -1e-9);
    let falling = r_last[apex_idx..].windows(2).all(|w| w[0] - w[1] > -1e-9);
    if rising && falling {
        Profile::UniqueMax {
            apex_t: traj.samples[apex_idx].0,
            apex: traj.samples[apex_idx].1.clone(),
        }
    } else {
        Profile::Ambiguous {
            reason: "last coordinate radius is not unimodal".to_string(),
        }
    }
}

/// Apex of a resonant leaf: the point maximizing the last coordinate radius,
/// refined by a root of d|y|^2/dt, with the residual |Im(x conj(y)^m)|.
pub fn resonant_apex(
    germ: &GermPoly<C64>,
    traj: &Trajectory,
    m: u32,
) -> Result<(SpherePoint, f64), TraceError> {
    let profile = torus_radius_profile(traj);
    let apex_idx = match profile {
        Profile::UniqueMax { apex_t, .. } => traj
            .samples
            .iter()
            .position(|(t, _)| *t == apex_t)
            .expect("apex sample present"),
        Profile::Constant { .. } | Profile::Monotone { .. } => {
            return Err(TraceError::AmbiguousProfile(
                "no interior radius maximum on this trace".to_string(),
            ))
        }
        Profile::Ambiguous { reason } => return Err(TraceError::AmbiguousProfile(reason)),
    };
    let last = traj.samples[0].1.len() - 1;
    // g(point) = d|y|^2/dt up to a factor 2; bisect its sign change
    let g_at = |z: &[C64]| -> Result<f64, TraceError> {
        let w = direction_at(germ, z, 0.0)?;
        Ok((z[last].conj() * w[last]).re)
    };
    // bracket the sign change of g in forward flow time around the apex
    // sample (sample order may run against the field on backward traces)
    let base = traj.samples[apex_idx].1.clone();
    let gap = (traj.samples[apex_idx].0 - traj.samples[apex_idx - 1].0)
        .abs()
        .max(traj.samples[apex_idx + 1].0 - traj.samples[apex_idx].0);
    let g0 = g_at(&base)?;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    if g0 > 0.0 {
        let mut step = gap;
        for _ in 0..20 {
            if g_at(&flow_from(germ, &base, step)?)? < 0.0 {
                hi = step;
                break;
            }
            step *= 2.0;
        }
    } else if g0 < 0.0 {
        let mut step = -gap;
        for _ in 0..20 {
            if g_at(&flow_from(germ, &base, step)?)? > 0.0 {
                lo = step;
                break;
            }
            step *= 2.0;
        }
    }
    if g0 != 0.0 && lo == 0.0 && hi == 0.0 {
        return Err(TraceError::AmbiguousProfile(
            "radius derivative does not bracket the apex".to_string(),
        ));
    }
    let mut apex = base.clone();
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        apex = flow_from(germ, &base, mid)?;
        let g_mid = g_at(&apex)?;
        if g_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 || g_mid.abs() < 1e-16 {
            break;
        }
    }
    let residual = (apex[0] * apex[last].conj().powu(m)).im.abs();
    Ok((SpherePoint::project(apex), residual))
}

// ---- resonant leaf parametrization ----------------------------------------------------

/// Integral curve of the degree-m resonant model through (a, b):
/// t -> ((a + b^m t) e^{mt}, b e^t) for complex time t.
pub fn resonant_leaf_param(a: C64, b: C64, m: u32, t: C64) -> (C64, C64) {
    let x = (a + b.powu(m) * t) * (t * m as f64).exp();
    let y = b * t.exp();
    (x, y)
}

/// Imaginary time parts t_I for which the resonant leaf point at
/// t = t_R + i t_I lies on the unit sphere: real roots of a quadratic whose
/// leading coefficients do not depend on t_R.
pub fn sphere_constraint_solve(
    a: C64,
    b: C64,
    m: u32,
    t_r: f64,
) -> Result<Vec<f64>, TraceError> {
    if b.norm() == 0.0 {
        return Err(TraceError::DegenerateConstraint);
    }
    let bbm = b.norm_sqr().powi(m as i32);
    let abm = a * b.conj().powu(m);
    let lin = 2.0 * abm.im;
    let konst = a.norm_sqr()
        + 2.0 * abm.re * t_r
        + bbm * t_r * t_r
        + b.norm_sqr() * (2.0 * (1.0 - m as f64) * t_r).exp()
        - (-2.0 * m as f64 * t_r).exp();
    let disc = lin * lin - 4.0 * bbm * konst;
    if disc < 0.0 {
        return Ok(vec![]);
    }
    if disc == 0.0 {
        return Ok(vec![-lin / (2.0 * bbm)]);
    }
    let s = disc.sqrt();
    let mut roots = vec![(-lin - s) / (2.0 * bbm), (-lin + s) / (2.0 * bbm)];
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(roots)
}

// ---- slope ------------------------------------------------------------------------------

/// Leaf slope on an invariant torus: ratio of the argument advances of the
/// two coordinates measured between the first and last full period of the
/// second coordinate (an exact integer number of marker crossings).
pub fn slope_estimate(traj: &Trajectory) -> Result<f64, TraceError> {
    assert!(traj.arg_tracks.len() == 2, "slope is a planar invariant");
    let arg_x = &traj.arg_tracks[0];
    let arg_y = &traj.arg_tracks[1];
    let ts: Vec<f64> = traj.samples.iter().map(|(t, _)| *t).collect();
    // interpolated times at which arg_y crosses arg_y(0) + 2 pi k upward
    let mut crossings: Vec<f64> = Vec::new();
    let y0 = arg_y[0];
    for k in 1..arg_y.len() {
        let (lo, hi) = (arg_y[k - 1] - y0, arg_y[k] - y0);
        let (k_lo, k_hi) = ((lo / TAU).ceil() as i64, (hi / TAU).floor() as i64);
        for j in k_lo..=k_hi {
            let level = TAU * j as f64;
            if lo < level && level <= hi {
                let s = (level - lo) / (hi - lo);
                crossings.push(ts[k - 1] + s * (ts[k] - ts[k - 1]));
            }
        }
    }
    if crossings.len() < 100 {
        return Err(TraceError::InsufficientCrossings(crossings.len()));
    }
    let interp = |track: &[f64], t: f64| -> f64 {
        let k = ts.partition_point(|&x| x < t).max(1).min(ts.len() - 1);
        let s = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
        track[k - 1] + s * (track[k] - track[k - 1])
    };
    let (t_first, t_last) = (crossings[0], *crossings.last().unwrap());
    let num = interp(arg_x, t_last) - interp(arg_x, t_first);
    let den = TAU * (crossings.len() - 1) as f64;
    Ok(num / den)
}

// ---- holonomy ----------------------------------------------------------------------------

/// Holonomy multiplier of the closed axis leaf {z_transverse = 0}: the
/// first-return map of the angular coordinate's argument section, fitted by
/// least squares over several transverse radii.
pub fn holonomy_estimate(
    germ: &GermPoly<C64>,
    transverse: usize,
    disk_radius: f64,
    t_max: f64,
    step_tol: f64,
) -> Result<C64, TraceError> {
    let n = 2usize;
    let angular = 1 - transverse;
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0f64;
    for j in 1..=5 {
        let r = disk_radius * j as f64 / 5.0;
        let mut z = vec![C64::new(0.0, 0.0); n];
        z[transverse] = C64::new(r, 0.0);
        z[angular] = C64::new((1.0 - r * r).sqrt(), 0.0);
        let start = SpherePoint::new(z.clone()).expect("constructed on the sphere");
        let traj = trace_leaf(germ, &start, t_max, step_tol)?;
        let track = &traj.arg_tracks[angular];
        let target = track[0] + TAU;
        let k = match track.iter().position(|&a| a >= target) {
            Some(k) => k,
            None => {
                let (t_end, z_end) = traj.samples.last().unwrap();
                let drift = (z_end[transverse].norm() - r) / t_end;
                return Err(TraceError::NoReturn { drift });
            }
        };
        // refine the section crossing time within [t_{k-1}, t_k]
        let ts: Vec<f64> = traj.samples.iter().map(|(t, _)| *t).collect();
        let base = traj.samples[k - 1].1.clone();
        let mut tau =
            (target - track[k - 1]) / (track[k] - track[k - 1]) * (ts[k] - ts[k - 1]);
        let mut point = flow_from(germ, &base, tau)?;
        for _ in 0..6 {
            let w = direction_at(germ, &point, ts[k - 1] + tau)?;
            let d_arg = (point[angular].conj() * w[angular]).im / point[angular].norm_sqr();
            let missing = principal_angle(target - track[k - 1]
                - (point[angular].arg() - base[angular].arg()));
            if d_arg.abs() < 1e-12 || missing.abs() < 1e-13 {
                break;
            }
            tau += missing / d_arg;
            point = flow_from(germ, &base, tau)?;
        }
        num += point[transverse] * z[transverse].conj();
        den += z[transverse].norm_sqr();
    }
    Ok(num / den)
}

// ---- torus-action invariance ----------------------------------------------------------------

/// For a diagonal linear planar field, trace from `start` and from the
/// rotated start (x e^{i t1}, y e^{i t2}); returns the largest distance from
/// the rotated first trace to the second trace's sampled polyline.
pub fn s1s1_invariance_check(
    germ: &GermPoly<C64>,
    start: &SpherePoint,
    t1: f64,
    t2: f64,
    t_max: f64,
    step_tol: f64,
) -> Result<f64, TraceError> {
    let diagonal = germ
        .terms
        .keys()
        .all(|(i, m)| total_degree(m) == 1 && m[*i] == 1);
    if !diagonal || germ.dimension != 2 {
        return Err(TraceError::NotDiagonalLinear);
    }
    let rot = [C64::new(0.0, t1).exp(), C64::new(0.0, t2).exp()];
    let rotated_start = SpherePoint::project(vec![start.0[0] * rot[0], start.0[1] * rot[1]]);
    let traj_a = trace_leaf(germ, start, t_max, step_tol)?;
    let traj_b = trace_leaf(germ, &rotated_start, t_max, step_tol)?;
    let stride = (traj_a.samples.len() / 200).max(1);
    let mut worst = 0.0f64;
    for (_, z) in traj_a.samples.iter().step_by(stride) {
        let p = [z[0] * rot[0], z[1] * rot[1]];
        // Nearest stored sample of the second trace, then Newton-project onto
        // the actual leaf curve by flowing from that sample: chords between
        // samples would otherwise dominate the measured deviation.
        let mut best_idx = 0;
        let mut best = f64::INFINITY;
        for (k, (_, q)) in traj_b.samples.iter().enumerate() {
            let d = vnorm(&vsub(&p, q));
            if d < best {
                best = d;
                best_idx = k;
            }
        }
        let anchor = traj_b.samples[best_idx].1.clone();
        let mut tau = 0.0f64;
        let mut point = anchor.clone();
        for _ in 0..8 {
            let dir = intersection_direction(germ, &point)?;
            let step = vdot(&vsub(&p, &point), &dir).re;
            if step.abs() < 1e-14 {
                break;
            }
            tau += step;
            point = flow_from(germ, &anchor, tau)?;
            normalize(&mut point);
        }
        let d = vnorm(&vsub(&p, &point));
        if d > worst {
            worst = d;
        }
    }
    Ok(worst)
}

/// Sanity check of the orientation convention: the radial field's Hopf
/// circles must rotate counterclockwise in both coordinates.
pub fn orientation_self_test() -> bool {
    let mut germ = GermPoly::new(2);
    germ.add_term(0, vec![1, 0], C64::new(1.0, 0.0));
    germ.add_term(1, vec![0, 1], C64::new(1.0, 0.0));
    let start = SpherePoint::new(vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]).unwrap();
    match trace_leaf(&germ, &start, 0.5, DEFAULT_STEP_TOL) {
        Ok(traj) => {
            (0..2).all(|i| {
                traj.arg_tracks[i].last().unwrap() > &(traj.arg_tracks[i][0] + 0.1)
            })
        }
        Err(_) => false,
    }
}

// ---- CSV emission ----------------------------------------------------------------------------

/// Serialize a trajectory: header t,re_z1,im_z1,...,arg1,...,abs1,..., one
/// row per accepted step.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let n = traj.arg_tracks.len();
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",re_z{i},im_z{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",arg{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",abs{i}"));
    }
    out.push('\n');
    for (k, (t, z)) in traj.samples.iter().enumerate() {
        out.push_str(&format!("{t:.12e}"));
        for c in z {
            out.push_str(&format!(",{:.12e},{:.12e}", c.re, c.im));
        }
        for i in 0..n {
            out.push_str(&format!(",{:.12e}", traj.arg_tracks[i][k]));
        }
        for i in 0..n {
            out.push_str(&format!(",{:.12e}", traj.radius_tracks[i][k]));
        }
        out.push('\n');
    }
    out
}
