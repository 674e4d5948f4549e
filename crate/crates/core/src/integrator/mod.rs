//! Fixed-step RK4 integration of a model together with its variational
//! equations
//!
//! ```text
//! Φ̇x = (∂f/∂x) Φx,            Φx(0) = I
//! Φ̇p = (∂f/∂x) Φp + ∂f/∂p,    Φp(0) = 0
//! ```
//!
//! States between grid nodes are evaluated by one RK4 sub-step from the
//! preceding node, which keeps event times and anchors consistent with the
//! scheme's own accuracy.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{ConstraintSet, ParametricModel};

mod events;

pub use events::{
    bisect_root, detect_feasibility_exit, detect_fnorm_min, detect_h_local_min, golden_section_min,
    Event, EventKind, EVENT_TIME_TOL, FNORM_MIN_THRESHOLD, GRAZE_THRESHOLD,
};

pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub step: f64,
    /// Propagate Φx and Φp alongside the state.
    pub sensitivities: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        IntegrationOptions {
            step: DEFAULT_STEP,
            sensitivities: true,
        }
    }
}

impl IntegrationOptions {
    pub fn states_only(step: f64) -> Self {
        IntegrationOptions {
            step,
            sensitivities: false,
        }
    }
}

/// State with optional sensitivity matrices.
#[derive(Debug, Clone)]
pub(crate) struct Augmented {
    pub x: DVector<f64>,
    pub phi_x: Option<DMatrix<f64>>,
    pub phi_p: Option<DMatrix<f64>>,
}

type Derivative = (DVector<f64>, Option<DMatrix<f64>>, Option<DMatrix<f64>>);

fn derivative(model: &ParametricModel, p: &DVector<f64>, s: &Augmented) -> Derivative {
    let f = model.f(&s.x, p);
    match (&s.phi_x, &s.phi_p) {
        (Some(px), Some(pp)) => {
            let j = model.jac_x(&s.x, p);
            let dpx = &j * px;
            let dpp = &j * pp + model.jac_p(&s.x, p);
            (f, Some(dpx), Some(dpp))
        }
        _ => (f, None, None),
    }
}

fn axpy(s: &Augmented, k: &Derivative, h: f64) -> Augmented {
    Augmented {
        x: &s.x + &k.0 * h,
        phi_x: s.phi_x.as_ref().zip(k.1.as_ref()).map(|(a, b)| a + b * h),
        phi_p: s.phi_p.as_ref().zip(k.2.as_ref()).map(|(a, b)| a + b * h),
    }
}

pub(crate) fn rk4_step(model: &ParametricModel, p: &DVector<f64>, s: &Augmented, h: f64) -> Augmented {
    let k1 = derivative(model, p, s);
    let k2 = derivative(model, p, &axpy(s, &k1, 0.5 * h));
    let k3 = derivative(model, p, &axpy(s, &k2, 0.5 * h));
    let k4 = derivative(model, p, &axpy(s, &k3, h));
    let w = h / 6.0;
    let comb_v = |a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>, d: &DVector<f64>| {
        (a + b * 2.0 + c * 2.0 + d) * w
    };
    let comb_m = |a: &Option<DMatrix<f64>>,
                  b: &Option<DMatrix<f64>>,
                  c: &Option<DMatrix<f64>>,
                  d: &Option<DMatrix<f64>>| {
        match (a, b, c, d) {
            (Some(a), Some(b), Some(c), Some(d)) => Some((a + b * 2.0 + c * 2.0 + d) * w),
            _ => None,
        }
    };
    Augmented {
        x: &s.x + comb_v(&k1.0, &k2.0, &k3.0, &k4.0),
        phi_x: s
            .phi_x
            .as_ref()
            .zip(comb_m(&k1.1, &k2.1, &k3.1, &k4.1))
            .map(|(a, d)| a + d),
        phi_p: s
            .phi_p
            .as_ref()
            .zip(comb_m(&k1.2, &k2.2, &k3.2, &k4.2))
            .map(|(a, d)| a + d),
    }
}

/// Trajectory on the integration grid, with sensitivities when requested.
#[derive(Debug, Clone)]
pub struct SensTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Empty when integrated without sensitivities.
    pub phi_x: Vec<DMatrix<f64>>,
    pub phi_p: Vec<DMatrix<f64>>,
    /// `H` at every node; empty without a constraint set.
    pub h_values: Vec<f64>,
    pub events: Vec<Event>,
    model: ParametricModel,
    p: DVector<f64>,
}

impl SensTrajectory {
    pub fn model(&self) -> &ParametricModel {
        &self.model
    }

    pub fn params(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    pub fn has_sensitivities(&self) -> bool {
        !self.phi_x.is_empty()
    }

    fn node_before(&self, t: f64) -> usize {
        match self.times.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) => i - 1,
        }
    }

    fn augmented_at(&self, t: f64, with_sens: bool) -> Augmented {
        let t = t.clamp(self.times[0], self.t_end());
        let i = self.node_before(t);
        let s = Augmented {
            x: self.states[i].clone(),
            phi_x: with_sens.then(|| self.phi_x[i].clone()),
            phi_p: with_sens.then(|| self.phi_p[i].clone()),
        };
        let dt = t - self.times[i];
        if dt == 0.0 {
            s
        } else {
            rk4_step(&self.model, &self.p, &s, dt)
        }
    }

    /// State at any `t` within the trajectory span.
    pub fn state_at(&self, t: f64) -> DVector<f64> {
        self.augmented_at(t, false).x
    }

    /// State, Φx and Φp at `t`. Requires a trajectory with sensitivities.
    pub fn sens_at(&self, t: f64) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        if !self.has_sensitivities() {
            return Err(Error::InvalidParameter(
                "trajectory was integrated without sensitivities".into(),
            ));
        }
        let a = self.augmented_at(t, true);
        Ok((a.x, a.phi_x.unwrap(), a.phi_p.unwrap()))
    }

    /// CSV dump: `t, <states>, H, phi_x (row-major), phi_p (row-major)`.
    /// The `H` column is empty when no constraint set was given.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.model.dim();
        let np = self.p.len();
        let mut header = vec!["t".to_string()];
        header.extend(self.model.state_names().iter().cloned());
        header.push("H".into());
        if self.has_sensitivities() {
            for i in 0..n {
                for j in 0..n {
                    header.push(format!("phi_x_{}_{}", i + 1, j + 1));
                }
            }
            for i in 0..n {
                for j in 0..np {
                    header.push(format!("phi_p_{}_{}", i + 1, j + 1));
                }
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![fmt_num(self.times[k])];
            row.extend(self.states[k].iter().map(|v| fmt_num(*v)));
            row.push(self.h_values.get(k).map(|v| fmt_num(*v)).unwrap_or_default());
            if self.has_sensitivities() {
                for m in [&self.phi_x[k], &self.phi_p[k]] {
                    for i in 0..m.nrows() {
                        for j in 0..m.ncols() {
                            row.push(fmt_num(m[(i, j)]));
                        }
                    }
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Formats with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{:.11e}", v);
    // the round trip drops trailing zeros
    let r: f64 = s.parse().unwrap();
    if r.abs() < 1e-6 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Integrates `model` from `x0` over `[0, t_end]` and records events of `h`.
pub fn integrate(
    model: &ParametricModel,
    h: Option<&ConstraintSet>,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    t_end: f64,
    opts: &IntegrationOptions,
) -> Result<SensTrajectory> {
    integrate_until(model, h, x0, p, t_end, opts, |_, _| false)
}

/// As [`integrate`], stopping after the first node (the initial one
/// included) for which `stop(t, x)` returns true.
pub fn integrate_until<F>(
    model: &ParametricModel,
    h: Option<&ConstraintSet>,
    x0: &DVector<f64>,
    p: &DVector<f64>,
    t_end: f64,
    opts: &IntegrationOptions,
    mut stop: F,
) -> Result<SensTrajectory>
where
    F: FnMut(f64, &DVector<f64>) -> bool,
{
    let n = model.dim();
    if x0.len() != n || p.len() != model.n_params() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has {} entries and p {}, model {} expects {} and {}",
            x0.len(),
            p.len(),
            model.name(),
            n,
            model.n_params()
        )));
    }
    if !(opts.step > 0.0) || !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need step > 0 and finite t_end >= 0, got {} and {}",
            opts.step, t_end
        )));
    }
    let steps = ((t_end / opts.step) - 1e-9).ceil().max(0.0) as usize;
    let mut traj = SensTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        phi_x: Vec::new(),
        phi_p: Vec::new(),
        h_values: Vec::new(),
        events: Vec::new(),
        model: model.clone(),
        p: p.clone(),
    };
    let mut s = Augmented {
        x: x0.clone(),
        phi_x: opts.sensitivities.then(|| DMatrix::identity(n, n)),
        phi_p: opts.sensitivities.then(|| DMatrix::zeros(n, p.len())),
    };
    let mut t = 0.0;
    let mut k = 0;
    loop {
        traj.times.push(t);
        traj.states.push(s.x.clone());
        if let (Some(px), Some(pp)) = (&s.phi_x, &s.phi_p) {
            traj.phi_x.push(px.clone());
            traj.phi_p.push(pp.clone());
        }
        if let Some(h) = h {
            traj.h_values.push(h.product(&s.x, p));
        }
        if k == steps || stop(t, &s.x) {
            break;
        }
        k += 1;
        let t_next = if k == steps { t_end } else { k as f64 * opts.step };
        s = rk4_step(model, p, &s, t_next - t);
        t = t_next;
        let finite = s.x.iter().all(|v| v.is_finite())
            && s.phi_x.as_ref().is_none_or(|m| m.iter().all(|v| v.is_finite()))
            && s.phi_p.as_ref().is_none_or(|m| m.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::StepFailure { time: t });
        }
    }
    if let Some(h) = h {
        traj.events = events::scan(&traj, h);
    }
    if traj.t_end() >= t_end {
        traj.events.push(Event {
            kind: EventKind::HorizonReached,
            time: traj.t_end(),
            state: traj.last_state().clone(),
        });
    }
    Ok(traj)
}
