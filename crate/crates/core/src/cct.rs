//! Critical clearing time by bisection on the clearing time.
//!
//! Clearing at `t` is *stable* when the post-fault trajectory from the
//! fault-on state `x(t)` enters the `1e-3` ball around the post-fault SEP
//! within `t_max` without crossing or grazing the post-fault feasibility
//! boundary first. The bracket starts at `[0, t_exit]`, `t_exit` being the
//! time the sustained fault leaves the combined feasibility region, and is
//! halved until it is narrower than `bracket_tol` and the near-critical
//! unstable trajectory yields an acceptable boundary anchor.

use std::fmt;

use nalgebra::DVector;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::integrator::{
    bisect_root, detect_feasibility_exit, detect_fnorm_min, detect_h_local_min, golden_section_min,
    integrate_until, EventKind, IntegrationOptions, SensTrajectory, DEFAULT_STEP,
};
use crate::models::{find_equilibrium, ConstraintSet, Equilibrium, Scenario};

/// Radius of the ball around the post-fault SEP that certifies stability.
pub const SEP_BALL: f64 = 1e-3;
/// `|H_comb(x_cr)|` at or below this marks a category-1 loss.
pub const CATEGORY1_TOL: f64 = 1e-5;
/// Largest `|H|` and `|Ḣ|` accepted at a category-2 anchor.
pub const GRAZE_ANCHOR_TOL: f64 = 1e-4;
/// Largest distance from the CUEP accepted at a category-3 anchor.
pub const CUEP_ANCHOR_TOL: f64 = 0.05;
pub const DEFAULT_BRACKET_TOL: f64 = 0.01;
/// Clearing this long before the sustained-fault exit tests whether the
/// bracket has collapsed onto the exit time.
const EXIT_PROBE: f64 = 1e-7;
/// Post-fault runs stop once this far outside the feasible region.
const FAR_INFEASIBLE: f64 = -1.0;
const BRACKET_FLOOR: f64 = 1e-11;

/// Mode of loss of stability or feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    /// The fault-on trajectory reaches the feasibility boundary.
    FaultOnBoundary = 1,
    /// The post-fault trajectory touches the feasibility boundary.
    PostFaultBoundary = 2,
    /// The post-fault trajectory does not return to the SEP.
    LossOfSynchronism = 3,
}

impl Category {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl Serialize for Category {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CctOptions {
    pub step: f64,
    /// Post-fault horizon; the scenario's value when `None`.
    pub t_max: Option<f64>,
    pub bracket_tol: f64,
    /// Check that no post-fault equilibrium sits on the feasibility boundary.
    pub validate: bool,
}

impl Default for CctOptions {
    fn default() -> Self {
        CctOptions {
            step: DEFAULT_STEP,
            t_max: None,
            bracket_tol: DEFAULT_BRACKET_TOL,
            validate: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalResult {
    pub t_cr: f64,
    pub t_stable: f64,
    pub t_unstable: f64,
    pub category: Category,
    /// Post-fault time of the boundary anchor (categories 2 and 3).
    #[serde(rename = "T")]
    pub t_end: Option<f64>,
    #[serde(rename = "x_T", serialize_with = "crate::serde_opt_vec")]
    pub x_t: Option<DVector<f64>>,
    pub cuep: Option<Equilibrium>,
    pub iterations: usize,
    #[serde(serialize_with = "crate::serde_vec")]
    pub x_cr: DVector<f64>,
    /// Time at which the sustained fault leaves the feasible region.
    pub t_exit: f64,
    /// Boundary and equilibrium events coincided on the critical trajectory;
    /// category 2 was taken.
    pub tie: bool,
    #[serde(skip)]
    pub pre_sep: DVector<f64>,
    #[serde(skip)]
    pub post_sep: DVector<f64>,
}

/// Category and boundary anchor of a converged bracket.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub category: Category,
    pub t_end: Option<f64>,
    pub x_t: Option<DVector<f64>>,
    pub cuep: Option<Equilibrium>,
    pub tie: bool,
}

/// Outcome of [`classify_category`].
#[derive(Debug, Clone)]
pub enum Classification {
    Accepted(Anchor),
    /// Events exist but the anchor residuals are too large; tighten the bracket.
    Unresolved(Category),
    /// No boundary or equilibrium event on the unstable trajectory.
    NoEvent,
}

/// Bracket handed to [`classify_category`].
pub struct Bracket<'a> {
    /// Fault-on state at the unstable end of the bracket.
    pub x_cr: &'a DVector<f64>,
    /// Post-fault trajectory cleared at the unstable end, if simulated.
    pub unstable: Option<&'a SensTrajectory>,
}

/// Fixed data of one fault at one parameter point.
pub(crate) struct Setup<'a> {
    pub sc: &'a Scenario,
    pub p: DVector<f64>,
    pub step: f64,
    pub t_max: f64,
    pub pre_sep: DVector<f64>,
    pub post_sep: DVector<f64>,
    pub h_comb: ConstraintSet,
    pub fault: SensTrajectory,
    pub t_exit: f64,
}

impl<'a> Setup<'a> {
    pub fn new(sc: &'a Scenario, p: &DVector<f64>, opts: &CctOptions) -> Result<Self> {
        sc.check_params(p)?;
        if !(opts.step > 0.0) {
            return Err(Error::InvalidParameter(format!("step must be positive, got {}", opts.step)));
        }
        let t_max = opts.t_max.unwrap_or(sc.t_max);
        if !(t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
        }
        if opts.validate {
            sc.validate_boundary_equilibria(p)?;
        }
        let pre = sc.pre_sep(p)?;
        let post = sc.post_sep(p, &pre.x)?;
        let h_comb = sc.h_comb();
        if !(h_comb.min_value(&pre.x, p) > 0.0) {
            return Err(Error::ScenarioRejected("pre-fault SEP is not strictly feasible".into()));
        }
        let fault = integrate_until(
            &sc.fault,
            None,
            &pre.x,
            p,
            t_max,
            &IntegrationOptions::states_only(opts.step),
            |_, x| h_comb.min_value(x, p) <= 0.0,
        )?;
        let last = fault.len() - 1;
        if h_comb.min_value(&fault.states[last], p) > 0.0 {
            return Err(Error::NoFeasibleExit { horizon: t_max });
        }
        let t_exit = bisect_root(fault.times[last - 1], fault.times[last], |t| {
            h_comb.min_value(&fault.state_at(t), p)
        });
        Ok(Setup {
            sc,
            p: p.clone(),
            step: opts.step,
            t_max,
            pre_sep: pre.x,
            post_sep: post.x,
            h_comb,
            fault,
            t_exit,
        })
    }

    pub fn clearing_state(&self, t_cl: f64) -> DVector<f64> {
        self.fault.state_at(t_cl)
    }

    /// Simulates clearing at `t_cl`; returns the verdict and the post-fault
    /// trajectory (`None` when the clearing state is already infeasible).
    pub fn clear_at(&self, t_cl: f64) -> Result<(bool, Option<SensTrajectory>)> {
        let x_cl = self.clearing_state(t_cl);
        if t_cl >= self.t_exit || self.h_comb.min_value(&x_cl, &self.p) <= 0.0 {
            return Ok((false, None));
        }
        let p = &self.p;
        let h = &self.sc.h_post;
        let sep = &self.post_sep;
        let mut crossed = false;
        let mut prev = f64::INFINITY;
        let traj = integrate_until(
            &self.sc.post,
            Some(h),
            &x_cl,
            p,
            self.t_max,
            &IntegrationOptions::states_only(self.step),
            |_, x| {
                if (x - sep).norm() <= SEP_BALL {
                    return true;
                }
                let g = h.min_value(x, p);
                if g < FAR_INFEASIBLE {
                    return true;
                }
                let hv = h.product(x, p);
                crossed |= g <= 0.0;
                let past_min = crossed && hv > prev;
                prev = hv;
                past_min
            },
        )?;
        let entered = (traj.last_state() - sep).norm() <= SEP_BALL;
        let stable = entered && detect_feasibility_exit(&traj, h).is_none();
        Ok((stable, Some(traj)))
    }
}

/// Verdict of clearing at `t_cl`: `true` when the post-fault trajectory is
/// feasible and returns to the SEP.
pub fn clearing_is_stable(sc: &Scenario, p: &DVector<f64>, t_cl: f64, opts: &CctOptions) -> Result<bool> {
    let setup = Setup::new(sc, p, &CctOptions { validate: false, ..*opts })?;
    Ok(setup.clear_at(t_cl)?.0)
}

fn closest_point(traj: &SensTrajectory, target: &DVector<f64>) -> (f64, DVector<f64>) {
    let (i, _) = traj
        .states
        .iter()
        .map(|x| (x - target).norm())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let a = traj.times[i.saturating_sub(1)];
    let b = traj.times[(i + 1).min(traj.len() - 1)];
    let (t, _) = golden_section_min(a, b, |s| (traj.state_at(s) - target).norm());
    (t, traj.state_at(t))
}

/// Category and anchor for the bracket's unstable end.
///
/// Category 1 when `|H_comb(x_cr)| <= 1e-5`. Otherwise the earlier of the
/// first boundary event `t1` (crossing or graze of `H_post`) and the first
/// `‖f‖` minimum `t2` decides: category 3 when `t2 < t1`, else category 2.
pub fn classify_category(sc: &Scenario, p: &DVector<f64>, bracket: &Bracket<'_>) -> Result<Classification> {
    let h_comb = sc.h_comb();
    if h_comb.product(bracket.x_cr, p).abs() <= CATEGORY1_TOL {
        return Ok(Classification::Accepted(Anchor {
            category: Category::FaultOnBoundary,
            t_end: None,
            x_t: None,
            cuep: None,
            tie: false,
        }));
    }
    let Some(traj) = bracket.unstable else {
        return Ok(Classification::NoEvent);
    };
    let h = &sc.h_post;
    let t1 = detect_feasibility_exit(traj, h);
    let t2 = detect_fnorm_min(traj);
    let third = match (&t1, &t2) {
        (None, None) => return Ok(Classification::NoEvent),
        (None, Some(_)) => true,
        (Some(_), None) => false,
        (Some(a), Some(b)) => b.time < a.time,
    };
    if third {
        let seed = &t2.as_ref().unwrap().state;
        let Ok(cuep) = find_equilibrium(&sc.post, p, seed) else {
            return Ok(Classification::Unresolved(Category::LossOfSynchronism));
        };
        if !cuep.is_type1() {
            return Err(Error::CuepNotType1 {
                unstable: cuep.unstable_count(),
            });
        }
        let (t, x_t) = closest_point(traj, &cuep.x);
        if (&x_t - &cuep.x).norm() > CUEP_ANCHOR_TOL {
            return Ok(Classification::Unresolved(Category::LossOfSynchronism));
        }
        return Ok(Classification::Accepted(Anchor {
            category: Category::LossOfSynchronism,
            t_end: Some(t),
            x_t: Some(x_t),
            cuep: Some(cuep),
            tie: false,
        }));
    }
    let exit = t1.unwrap();
    let tie = t2.as_ref().is_some_and(|e| e.time == exit.time);
    let (t, x_t) = if exit.kind == EventKind::HGraze {
        (exit.time, exit.state)
    } else {
        match detect_h_local_min(traj, h, exit.time) {
            Some((t, _)) => (t, traj.state_at(t)),
            None => return Ok(Classification::Unresolved(Category::PostFaultBoundary)),
        }
    };
    let hv = h.product(&x_t, p);
    let hd = h.h_dot(&sc.post, &x_t, p);
    if hv.abs() > GRAZE_ANCHOR_TOL || hd.abs() > GRAZE_ANCHOR_TOL {
        return Ok(Classification::Unresolved(Category::PostFaultBoundary));
    }
    Ok(Classification::Accepted(Anchor {
        category: Category::PostFaultBoundary,
        t_end: Some(t),
        x_t: Some(x_t),
        cuep: None,
        tie,
    }))
}

/// Critical clearing time, failure category and boundary anchor.
pub fn find_cct(sc: &Scenario, p: &DVector<f64>, opts: &CctOptions) -> Result<CriticalResult> {
    if !(opts.bracket_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bracket tolerance must be positive, got {}",
            opts.bracket_tol
        )));
    }
    let setup = Setup::new(sc, p, opts)?;
    let t_exit = setup.t_exit;
    if !setup.clear_at(0.0)?.0 {
        return Err(Error::BracketFailure { time: 0.0 });
    }
    let (mut ts, mut tu) = (0.0, t_exit);
    let mut unstable: Option<SensTrajectory> = None;
    let mut iterations = 0;
    let mut last_seen = None;
    loop {
        if tu - ts < opts.bracket_tol {
            if unstable.is_none() && tu == t_exit {
                let probe = t_exit - EXIT_PROBE;
                if probe > ts {
                    iterations += 1;
                    let (stable, traj) = setup.clear_at(probe)?;
                    if stable {
                        ts = probe;
                    } else {
                        tu = probe;
                        unstable = traj;
                        continue;
                    }
                }
            }
            let x_cr = setup.clearing_state(tu);
            let bracket = Bracket {
                x_cr: &x_cr,
                unstable: unstable.as_ref(),
            };
            match classify_category(sc, &setup.p, &bracket)? {
                Classification::Accepted(anchor) => {
                    return Ok(CriticalResult {
                        t_cr: tu,
                        t_stable: ts,
                        t_unstable: tu,
                        category: anchor.category,
                        t_end: anchor.t_end,
                        x_t: anchor.x_t,
                        cuep: anchor.cuep,
                        iterations,
                        x_cr,
                        t_exit,
                        tie: anchor.tie,
                        pre_sep: setup.pre_sep.clone(),
                        post_sep: setup.post_sep.clone(),
                    })
                }
                Classification::Unresolved(c) => last_seen = Some(c),
                Classification::NoEvent => {}
            }
            if tu - ts <= BRACKET_FLOOR * tu.max(1.0) {
                return Err(Error::Ambiguous(match last_seen {
                    Some(c) => format!(
                        "category {c} anchor did not converge; bracket [{ts}, {tu}]"
                    ),
                    None => format!("no event on the near-critical unstable trajectory; bracket [{ts}, {tu}]"),
                }));
            }
        }
        let mid = 0.5 * (ts + tu);
        iterations += 1;
        let (stable, traj) = setup.clear_at(mid)?;
        if stable {
            ts = mid;
        } else {
            tu = mid;
            unstable = traj;
        }
    }
}
