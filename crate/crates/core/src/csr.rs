//! Sampled constrained stability region (CSR) of a two-state post-fault
//! system: a labelled grid, classified feasibility-boundary samples,
//! semi-saddles and the UEPs lying inside the feasible region.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::cct::SEP_BALL;
use crate::error::{Error, Result};
use crate::integrator::{detect_feasibility_exit, fmt_num, integrate_until, IntegrationOptions, DEFAULT_STEP};
use crate::models::{
    classify_boundary_point, find_equilibrium, BoundaryClass, ConstraintSet, Equilibrium, EquilibriumKind,
    PseudoEpClass, Scenario,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellLabel {
    InsideCsr,
    InfeasibleExit,
    Unstable,
}

impl CellLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CellLabel::InsideCsr => "inside-csr",
            CellLabel::InfeasibleExit => "infeasible-exit",
            CellLabel::Unstable => "unstable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub step: f64,
    /// Horizon per cell; the scenario's value when `None`.
    pub t_max: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_range: (-1.0, 3.0),
            y_range: (-2.0, 2.0),
            nx: 201,
            ny: 201,
            step: DEFAULT_STEP,
            t_max: None,
        }
    }
}

impl GridSpec {
    pub fn x(&self, i: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * i as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * j as f64 / (self.ny - 1) as f64
    }

    fn contains(&self, x: &DVector<f64>) -> bool {
        x[0] >= self.x_range.0 && x[0] <= self.x_range.1 && x[1] >= self.y_range.0 && x[1] <= self.y_range.1
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CsrGrid {
    #[serde(skip)]
    pub spec: GridSpec,
    /// Row-major labels, `labels[j * nx + i]` at `(x_i, y_j)`.
    #[serde(skip)]
    pub labels: Vec<CellLabel>,
    pub boundary: Vec<PseudoEpClass>,
    #[serde(serialize_with = "serialize_points")]
    pub semi_saddles: Vec<DVector<f64>>,
    pub ueps: Vec<Equilibrium>,
}

fn serialize_points<S: serde::Serializer>(v: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|p| p.as_slice().to_vec()))
}

impl CsrGrid {
    pub fn label(&self, i: usize, j: usize) -> CellLabel {
        self.labels[j * self.spec.nx + i]
    }

    /// `x,y,label` per grid cell.
    pub fn write_cells_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,label")?;
        for j in 0..self.spec.ny {
            for i in 0..self.spec.nx {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_num(self.spec.x(i)),
                    fmt_num(self.spec.y(j)),
                    self.label(i, j).as_str()
                )?;
            }
        }
        Ok(())
    }
}

fn label_cell(
    sc: &Scenario,
    p: &DVector<f64>,
    sep: &DVector<f64>,
    x0: DVector<f64>,
    opts: &IntegrationOptions,
    t_max: f64,
) -> Result<CellLabel> {
    let h = &sc.h_post;
    if !h.is_feasible(&x0, p) {
        return Ok(CellLabel::InfeasibleExit);
    }
    let traj = integrate_until(&sc.post, Some(h), &x0, p, t_max, opts, |_, x| {
        (x - sep).norm() <= SEP_BALL || h.min_value(x, p) <= 0.0
    })?;
    Ok(if detect_feasibility_exit(&traj, h).is_some() {
        CellLabel::InfeasibleExit
    } else if (traj.last_state() - sep).norm() <= SEP_BALL {
        CellLabel::InsideCsr
    } else {
        CellLabel::Unstable
    })
}

fn bisect_sign(mut a: f64, mut b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (g(m) > 0.0) == (ga > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Points of `{h_k = 0}` on the grid lines where the other members are
/// nonnegative, tagged with `k`.
fn boundary_points(h: &ConstraintSet, p: &DVector<f64>, spec: &GridSpec) -> Vec<(usize, DVector<f64>)> {
    let mut out = Vec::new();
    let cs = h.constraints();
    let point = |a: f64, b: f64| DVector::from_vec(vec![a, b]);
    for (k, c) in cs.iter().enumerate() {
        let mut scan = |line: &dyn Fn(f64) -> DVector<f64>, ts: &[f64]| {
            for w in ts.windows(2) {
                let (ga, gb) = (c.value(&line(w[0]), p), c.value(&line(w[1]), p));
                if ga == 0.0 || (ga > 0.0) != (gb > 0.0) {
                    let t = if ga == 0.0 { w[0] } else { bisect_sign(w[0], w[1], |s| c.value(&line(s), p)) };
                    let x = line(t);
                    let others_ok = cs.iter().enumerate().all(|(l, o)| l == k || o.value(&x, p) >= -1e-12);
                    if others_ok {
                        out.push((k, x));
                    }
                }
            }
        };
        let xs: Vec<f64> = (0..spec.nx).map(|i| spec.x(i)).collect();
        let ys: Vec<f64> = (0..spec.ny).map(|j| spec.y(j)).collect();
        for &xi in &xs {
            scan(&|s| point(xi, s), &ys);
        }
        for &yj in &ys {
            scan(&|s| point(s, yj), &xs);
        }
    }
    out
}

/// Semi-saddles on member `k`: sign changes of `Ḣ` between neighbouring
/// samples, refined by bisection along the segment projected onto `h_k = 0`.
fn semi_saddles(
    sc: &Scenario,
    p: &DVector<f64>,
    samples: &[(usize, DVector<f64>)],
) -> Vec<DVector<f64>> {
    let h = &sc.h_post;
    let mut found: Vec<DVector<f64>> = Vec::new();
    for (k, c) in h.constraints().iter().enumerate() {
        let a = c.grad_x();
        let a2 = a.norm_squared();
        if a2 == 0.0 {
            continue;
        }
        let tangent = DVector::from_vec(vec![-a[1], a[0]]);
        let mut pts: Vec<&DVector<f64>> = samples.iter().filter(|(l, _)| *l == k).map(|(_, x)| x).collect();
        pts.sort_by(|u, v| tangent.dot(u).total_cmp(&tangent.dot(v)));
        let project = |x: DVector<f64>| {
            let v = c.value(&x, p);
            x - a * (v / a2)
        };
        let hdot = |x: &DVector<f64>| h.h_dot(&sc.post, x, p);
        for w in pts.windows(2) {
            let (u, v) = (w[0], w[1]);
            let (du, dv) = (hdot(u), hdot(v));
            if du == 0.0 || (du > 0.0) == (dv > 0.0) {
                continue;
            }
            let at = |s: f64| project(u + (v - u) * s);
            let s = bisect_sign(0.0, 1.0, |s| hdot(&at(s)));
            let x = at(s);
            let Ok(cls) = classify_boundary_point(h, &sc.post, &x, p) else {
                continue;
            };
            if cls.class == BoundaryClass::SemiSaddle && !found.iter().any(|f| (f - &x).norm() < 1e-9) {
                found.push(x);
            }
        }
    }
    found
}

/// UEPs inside the feasible part of the window, seeded from grid-local
/// minima of `‖f‖`.
fn feasible_ueps(sc: &Scenario, p: &DVector<f64>, spec: &GridSpec) -> Vec<Equilibrium> {
    let norm = |i: usize, j: usize| sc.post.f(&DVector::from_vec(vec![spec.x(i), spec.y(j)]), p).norm();
    let fv: Vec<f64> = (0..spec.ny)
        .flat_map(|j| (0..spec.nx).map(move |i| (i, j)))
        .map(|(i, j)| norm(i, j))
        .collect();
    let at = |i: usize, j: usize| fv[j * spec.nx + i];
    let mut out: Vec<Equilibrium> = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            let v = at(i, j);
            let mut is_min = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= spec.nx as i64 || jj >= spec.ny as i64 {
                        continue;
                    }
                    if at(ii as usize, jj as usize) < v {
                        is_min = false;
                    }
                }
            }
            if !is_min {
                continue;
            }
            let seed = DVector::from_vec(vec![spec.x(i), spec.y(j)]);
            let Ok(eq) = find_equilibrium(&sc.post, p, &seed) else {
                continue;
            };
            let keep = eq.kind != EquilibriumKind::Sep
                && spec.contains(&eq.x)
                && sc.h_post.is_feasible(&eq.x, p)
                && !out.iter().any(|o| (&o.x - &eq.x).norm() < 1e-8);
            if keep {
                out.push(eq);
            }
        }
    }
    out.sort_by(|a, b| a.x[0].total_cmp(&b.x[0]));
    out
}

/// Maps the post-fault CSR of a two-state scenario over `spec`'s window.
pub fn map_csr(sc: &Scenario, p: &DVector<f64>, spec: &GridSpec) -> Result<CsrGrid> {
    if sc.dim() != 2 {
        return Err(Error::DimensionUnsupported(sc.dim()));
    }
    if spec.nx < 2 || spec.ny < 2 || !(spec.x_range.1 > spec.x_range.0) || !(spec.y_range.1 > spec.y_range.0) {
        return Err(Error::InvalidParameter("grid needs two or more points per axis and a nonempty window".into()));
    }
    sc.check_params(p)?;
    let pre = sc.pre_sep(p)?;
    let sep = sc.post_sep(p, &pre.x)?.x;
    let t_max = spec.t_max.unwrap_or(sc.t_max);
    let opts = IntegrationOptions::states_only(spec.step);
    let labels = (0..spec.nx * spec.ny)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c % spec.nx, c / spec.nx);
            let x0 = DVector::from_vec(vec![spec.x(i), spec.y(j)]);
            label_cell(sc, p, &sep, x0, &opts, t_max)
        })
        .collect::<Result<Vec<_>>>()?;
    let samples = boundary_points(&sc.h_post, p, spec);
    let boundary = samples
        .iter()
        .filter_map(|(_, x)| classify_boundary_point(&sc.h_post, &sc.post, x, p).ok())
        .collect();
    Ok(CsrGrid {
        spec: *spec,
        labels,
        boundary,
        semi_saddles: semi_saddles(sc, p, &samples),
        ueps: feasible_ueps(sc, p, spec),
    })
}
