use nalgebra::DVector;
use serde::Serialize;

use super::SensTrajectory;
use crate::models::ConstraintSet;

/// Event times are refined below 1e-8 s.
pub const EVENT_TIME_TOL: f64 = 1e-10;
/// A local minimum of `H` at or below this value counts as touching the boundary.
pub const GRAZE_THRESHOLD: f64 = 1e-5;
/// A local minimum of `‖f‖₂` at or below this value signals an equilibrium nearby.
pub const FNORM_MIN_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    HZeroCrossing,
    HGraze,
    FNormLocalMin,
    HorizonReached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    pub time: f64,
    #[serde(serialize_with = "crate::serde_vec")]
    pub state: DVector<f64>,
}

/// Bisection for the first sign change of `g` in `[a, b]`, given `g(a) > 0`
/// and `g(b) <= 0`. Returns the infeasible end of the final bracket.
pub fn bisect_root(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    while b - a > EVENT_TIME_TOL {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    b
}

/// Golden-section search for a minimum of `phi` on `[a, b]`; returns
/// `(argmin, min)`.
pub fn golden_section_min(mut a: f64, mut b: f64, phi: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (phi(c), phi(d));
    while b - a > EVENT_TIME_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = phi(d);
        }
    }
    let t = 0.5 * (a + b);
    (t, phi(t))
}

fn event(traj: &SensTrajectory, kind: EventKind, time: f64) -> Event {
    Event {
        kind,
        time,
        state: traj.state_at(time),
    }
}

fn min_h(traj: &SensTrajectory, h: &ConstraintSet, t: f64) -> f64 {
    h.min_value(&traj.state_at(t), traj.params())
}

fn product_h(traj: &SensTrajectory, h: &ConstraintSet, t: f64) -> f64 {
    h.product(&traj.state_at(t), traj.params())
}

/// Boundary events in time order: every entry into `{min_k h_k <= 0}` and every
/// local minimum of `H` with `0 < H <= GRAZE_THRESHOLD`.
pub(super) fn boundary_events(traj: &SensTrajectory, h: &ConstraintSet, first_only: bool) -> Vec<Event> {
    let p = traj.params();
    let mut out = Vec::new();
    if traj.is_empty() || h.is_empty() {
        return out;
    }
    let g: Vec<f64> = traj.states.iter().map(|x| h.min_value(x, p)).collect();
    let hv: Vec<f64> = if traj.h_values.len() == traj.len() {
        traj.h_values.clone()
    } else {
        traj.states.iter().map(|x| h.product(x, p)).collect()
    };
    if g[0] < 0.0 {
        out.push(event(traj, EventKind::HZeroCrossing, 0.0));
        if first_only {
            return out;
        }
    }
    let t = &traj.times;
    for i in 1..traj.len() {
        if g[i - 1] > 0.0 && g[i] <= 0.0 {
            let tc = bisect_root(t[i - 1], t[i], |s| min_h(traj, h, s));
            out.push(event(traj, EventKind::HZeroCrossing, tc));
            if first_only {
                return out;
            }
        }
        // three-point test on the nodes i-1, i, i+1, all feasible
        if i + 1 < traj.len()
            && g[i - 1] > 0.0
            && g[i] > 0.0
            && g[i + 1] > 0.0
            && hv[i] <= hv[i - 1]
            && hv[i] < hv[i + 1]
            && hv[i] <= 10.0 * GRAZE_THRESHOLD
        {
            let (tm, vm) = golden_section_min(t[i - 1], t[i + 1], |s| product_h(traj, h, s));
            if vm <= 0.0 || min_h(traj, h, tm) <= 0.0 {
                // a brief excursion between nodes
                let tc = bisect_root(t[i - 1], tm, |s| min_h(traj, h, s));
                out.push(event(traj, EventKind::HZeroCrossing, tc));
            } else if vm <= GRAZE_THRESHOLD {
                out.push(event(traj, EventKind::HGraze, tm));
            } else {
                continue;
            }
            if first_only {
                return out;
            }
        }
    }
    out
}

/// Local minima of `‖f‖₂` with value at most [`FNORM_MIN_THRESHOLD`].
pub(super) fn fnorm_events(traj: &SensTrajectory, first_only: bool) -> Vec<Event> {
    let model = traj.model();
    let p = traj.params();
    let norm_at = |s: f64| model.f(&traj.state_at(s), p).norm();
    let fv: Vec<f64> = traj.states.iter().map(|x| model.f(x, p).norm()).collect();
    let t = &traj.times;
    let mut out = Vec::new();
    for i in 1..traj.len().saturating_sub(1) {
        if fv[i] <= fv[i - 1] && fv[i] < fv[i + 1] && fv[i] <= 10.0 * FNORM_MIN_THRESHOLD {
            let (tm, vm) = golden_section_min(t[i - 1], t[i + 1], norm_at);
            if vm <= FNORM_MIN_THRESHOLD {
                out.push(event(traj, EventKind::FNormLocalMin, tm));
                if first_only {
                    break;
                }
            }
        }
    }
    out
}

pub(super) fn scan(traj: &SensTrajectory, h: &ConstraintSet) -> Vec<Event> {
    let mut ev = boundary_events(traj, h, false);
    ev.extend(fnorm_events(traj, false));
    ev.sort_by(|a, b| a.time.total_cmp(&b.time));
    ev
}

/// Earliest boundary crossing or graze of `h` along the trajectory.
pub fn detect_feasibility_exit(traj: &SensTrajectory, h: &ConstraintSet) -> Option<Event> {
    boundary_events(traj, h, true).into_iter().next()
}

/// Earliest interior local minimum of `‖f‖₂` not above [`FNORM_MIN_THRESHOLD`].
pub fn detect_fnorm_min(traj: &SensTrajectory) -> Option<Event> {
    fnorm_events(traj, true).into_iter().next()
}

/// First interior local minimum of `H` after time `after`, refined by
/// golden-section search. Returns `(time, H)`.
pub fn detect_h_local_min(traj: &SensTrajectory, h: &ConstraintSet, after: f64) -> Option<(f64, f64)> {
    let p = traj.params();
    let hv: Vec<f64> = traj.states.iter().map(|x| h.product(x, p)).collect();
    let t = &traj.times;
    for i in 1..traj.len().saturating_sub(1) {
        if t[i + 1] <= after {
            continue;
        }
        if hv[i] <= hv[i - 1] && hv[i] < hv[i + 1] {
            let a = t[i - 1].max(after);
            let (tm, vm) = golden_section_min(a, t[i + 1], |s| product_h(traj, h, s));
            return Some((tm, vm));
        }
    }
    None
}
