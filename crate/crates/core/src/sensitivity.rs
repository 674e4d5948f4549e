//! First-order CCT sensitivities `dt_cr/dp`, one scalar parameter at a time.
//!
//! With `x_cr(p) = φ_fault(x_s(p), t_cl(p), p)`, a perturbation of `p` moves
//! the clearing state by
//!
//! ```text
//! dx_cr = M1·M4 + M2·dt_cl + M3
//! ```
//!
//! and each category pins `dt_cl` by a condition that must keep holding:
//!
//! - category 1: `H_comb(x_cr) = 0`;
//! - category 2: `H_post(x_T) = 0` and `Ḣ_post(x_T) = 0` at the graze point;
//! - category 3: `x_T` stays on the CUEP's stable manifold, `w·(x_T − x_cu) = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cct::{Category, CriticalResult};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationOptions, DEFAULT_STEP};
use crate::linalg;
use crate::models::{Equilibrium, ParametricModel, Scenario};

/// Denominators (or 2×2 determinants) below this make a formula undefined.
pub const DENOMINATOR_TOL: f64 = 1e-10;

/// Matrices entering the sensitivity formulas for one scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SensIngredients {
    /// `∂φ_fault/∂x0` at `t_cr`.
    pub m1: DMatrix<f64>,
    /// `f_fault(x_cr)`.
    pub m2: DVector<f64>,
    /// `∂φ_fault/∂p` at `t_cr`.
    pub m3: DVector<f64>,
    /// Pre-fault SEP sensitivity.
    pub m4: DVector<f64>,
    /// `∂H_comb/∂x` at `x_cr`.
    pub m5: DVector<f64>,
    /// `−∂H_comb/∂p` at `x_cr`.
    pub m6: f64,
    /// `∂φ_post/∂x0` at `T`.
    pub o1: Option<DMatrix<f64>>,
    /// `f_post(x_T)`.
    pub o2: Option<DVector<f64>>,
    /// `∂φ_post/∂p` at `T`.
    pub o3: Option<DVector<f64>>,
    /// Rows `∂H_post/∂x` and `∂Ḣ_post/∂x` at `x_T`.
    pub o4: Option<DMatrix<f64>>,
    /// `−(∂H_post/∂p, ∂Ḣ_post/∂p)` at `x_T`.
    pub o5: Option<DVector<f64>>,
    /// CUEP sensitivity.
    pub o6: Option<DVector<f64>>,
    /// Unit left eigenvector of the CUEP's unstable eigenvalue.
    pub w: Option<DVector<f64>>,
}

/// A formula value and the magnitude of its denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormulaValue {
    pub dtcr_dp: f64,
    /// Post-fault anchor-time sensitivity (category 2 only).
    pub dtend_dp: Option<f64>,
    pub denominator: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSensitivity {
    pub param: String,
    pub category: Category,
    pub dtcr_dp: f64,
    pub dtend_dp: Option<f64>,
    pub denominator: f64,
}

fn missing(what: &str) -> Error {
    Error::DimensionMismatch(format!("ingredient {what} is required for this category"))
}

/// `−(∂f/∂x)⁻¹ ∂f/∂p` at an equilibrium, all parameters (n × p).
fn equilibrium_sensitivity(model: &ParametricModel, x: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(-linalg::solve(&model.jac_x(x, p), &model.jac_p(x, p))?)
}

/// Pre-fault SEP sensitivity `M4 = −(∂f_pre/∂x)⁻¹ ∂f_pre/∂p`; column `j` is
/// the sensitivity to parameter `j`.
pub fn sep_sensitivity(model: &ParametricModel, sep: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
    equilibrium_sensitivity(model, sep, p)
}

/// CUEP sensitivity `O6 = −(∂f_post/∂x)⁻¹ ∂f_post/∂p` (n × p).
pub fn cuep_sensitivity(model: &ParametricModel, cuep: &DVector<f64>, p: &DVector<f64>) -> Result<DMatrix<f64>> {
    equilibrium_sensitivity(model, cuep, p)
}

fn clearing_shift(ing: &SensIngredients) -> DVector<f64> {
    &ing.m1 * &ing.m4 + &ing.m3
}

/// `dt_cl/dp = (M6 − M5·(M1·M4 + M3)) / (M5·M2)`.
pub fn category1_sensitivity(ing: &SensIngredients) -> Result<FormulaValue> {
    let denominator = ing.m5.dot(&ing.m2);
    if !(denominator.abs() > DENOMINATOR_TOL) {
        return Err(Error::NonTransversal { denominator });
    }
    let num = ing.m6 - ing.m5.dot(&clearing_shift(ing));
    Ok(FormulaValue {
        dtcr_dp: num / denominator,
        dtend_dp: None,
        denominator,
    })
}

/// Solves `O4·[O1·M2 | O2]·(dt_cl, dt_end) = O5 − O4·(O1·(M1·M4 + M3) + O3)`.
pub fn category2_sensitivity(ing: &SensIngredients) -> Result<FormulaValue> {
    let o1 = ing.o1.as_ref().ok_or_else(|| missing("O1"))?;
    let o2 = ing.o2.as_ref().ok_or_else(|| missing("O2"))?;
    let o3 = ing.o3.as_ref().ok_or_else(|| missing("O3"))?;
    let o4 = ing.o4.as_ref().ok_or_else(|| missing("O4"))?;
    let o5 = ing.o5.as_ref().ok_or_else(|| missing("O5"))?;
    let c1 = o4 * (o1 * &ing.m2);
    let c2 = o4 * o2;
    let a = DMatrix::from_columns(&[c1, c2]);
    let rhs = o5 - o4 * (o1 * clearing_shift(ing) + o3);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    if !(det.abs() > DENOMINATOR_TOL) {
        return Err(Error::NonTransversal { denominator: det });
    }
    // Cramer's rule on the 2×2 system
    let dt_cl = (rhs[0] * a[(1, 1)] - a[(0, 1)] * rhs[1]) / det;
    let dt_end = (a[(0, 0)] * rhs[1] - rhs[0] * a[(1, 0)]) / det;
    Ok(FormulaValue {
        dtcr_dp: dt_cl,
        dtend_dp: Some(dt_end),
        denominator: det,
    })
}

/// `dt_cl/dp = w·(O6 − O3 − O1·(M1·M4 + M3)) / (w·O1·M2)`.
pub fn category3_sensitivity(ing: &SensIngredients) -> Result<FormulaValue> {
    let o1 = ing.o1.as_ref().ok_or_else(|| missing("O1"))?;
    let o3 = ing.o3.as_ref().ok_or_else(|| missing("O3"))?;
    let o6 = ing.o6.as_ref().ok_or_else(|| missing("O6"))?;
    let w = ing.w.as_ref().ok_or_else(|| missing("w"))?;
    let denominator = w.dot(&(o1 * &ing.m2));
    if !(denominator.abs() > DENOMINATOR_TOL) {
        return Err(Error::NonTransversal { denominator });
    }
    let num = w.dot(&(o6 - o3 - o1 * clearing_shift(ing)));
    Ok(FormulaValue {
        dtcr_dp: num / denominator,
        dtend_dp: None,
        denominator,
    })
}

pub fn evaluate(category: Category, ing: &SensIngredients) -> Result<FormulaValue> {
    match category {
        Category::FaultOnBoundary => category1_sensitivity(ing),
        Category::PostFaultBoundary => category2_sensitivity(ing),
        Category::LossOfSynchronism => category3_sensitivity(ing),
    }
}

/// Left eigenvector of the unique eigenvalue with positive real part.
fn unstable_left_eigenvector(model: &ParametricModel, cuep: &Equilibrium, p: &DVector<f64>) -> Result<DVector<f64>> {
    let j = model.jac_x(&cuep.x, p);
    let unstable: Vec<_> = linalg::eigenvalues(&j).into_iter().filter(|e| e.re > 0.0).collect();
    if unstable.len() != 1 || unstable[0].im.abs() > 1e-12 {
        return Err(Error::EigenFailure(format!(
            "expected one real unstable eigenvalue, found {}",
            unstable.len()
        )));
    }
    linalg::left_eigenvector(&j, unstable[0].re)
}

/// Full-parameter ingredients shared by every scalar parameter.
struct Shared {
    m1: DMatrix<f64>,
    m2: DVector<f64>,
    m3: DMatrix<f64>,
    m4: DMatrix<f64>,
    m5: DVector<f64>,
    m6: DVector<f64>,
    o1: Option<DMatrix<f64>>,
    o2: Option<DVector<f64>>,
    o3: Option<DMatrix<f64>>,
    o4: Option<DMatrix<f64>>,
    o5: Option<DMatrix<f64>>,
    o6: Option<DMatrix<f64>>,
    w: Option<DVector<f64>>,
}

impl Shared {
    fn new(sc: &Scenario, p: &DVector<f64>, res: &CriticalResult, step: f64) -> Result<Self> {
        let opts = IntegrationOptions {
            step,
            sensitivities: true,
        };
        let fault = integrate(&sc.fault, None, &res.pre_sep, p, res.t_cr, &opts)?;
        let (x_cr, m1, m3) = fault.sens_at(res.t_cr)?;
        let m2 = sc.fault.f(&x_cr, p);
        let m4 = sep_sensitivity(&sc.pre, &res.pre_sep, p)?;
        let h_comb = sc.h_comb();
        let m5 = h_comb.grad_x(&x_cr, p);
        let m6 = -h_comb.grad_p(&x_cr, p);
        let mut s = Shared {
            m1,
            m2,
            m3,
            m4,
            m5,
            m6,
            o1: None,
            o2: None,
            o3: None,
            o4: None,
            o5: None,
            o6: None,
            w: None,
        };
        if res.category == Category::FaultOnBoundary {
            return Ok(s);
        }
        let t_end = res
            .t_end
            .ok_or_else(|| Error::DimensionMismatch("critical result has no anchor time".into()))?;
        let post = integrate(&sc.post, None, &x_cr, p, t_end, &opts)?;
        let (x_t, o1, o3) = post.sens_at(t_end)?;
        s.o2 = Some(sc.post.f(&x_t, p));
        s.o1 = Some(o1);
        s.o3 = Some(o3);
        match res.category {
            Category::PostFaultBoundary => {
                let h = &sc.h_post;
                let gx = h.grad_x(&x_t, p);
                let gdx = h.h_dot_grad_x(&sc.post, &x_t, p);
                s.o4 = Some(DMatrix::from_rows(&[gx.transpose(), gdx.transpose()]));
                let gp = h.grad_p(&x_t, p);
                let gdp = h.h_dot_grad_p(&sc.post, &x_t, p);
                s.o5 = Some(-DMatrix::from_rows(&[gp.transpose(), gdp.transpose()]));
            }
            Category::LossOfSynchronism => {
                let cuep = res
                    .cuep
                    .as_ref()
                    .ok_or_else(|| Error::DimensionMismatch("category 3 result has no CUEP".into()))?;
                if !cuep.is_type1() {
                    return Err(Error::CuepNotType1 {
                        unstable: cuep.unstable_count(),
                    });
                }
                s.o6 = Some(cuep_sensitivity(&sc.post, &cuep.x, p)?);
                s.w = Some(unstable_left_eigenvector(&sc.post, cuep, p)?);
            }
            Category::FaultOnBoundary => unreachable!(),
        }
        Ok(s)
    }

    fn column(&self, j: usize) -> SensIngredients {
        SensIngredients {
            m1: self.m1.clone(),
            m2: self.m2.clone(),
            m3: self.m3.column(j).into_owned(),
            m4: self.m4.column(j).into_owned(),
            m5: self.m5.clone(),
            m6: self.m6[j],
            o1: self.o1.clone(),
            o2: self.o2.clone(),
            o3: self.o3.as_ref().map(|m| m.column(j).into_owned()),
            o4: self.o4.clone(),
            o5: self.o5.as_ref().map(|m| m.column(j).into_owned()),
            o6: self.o6.as_ref().map(|m| m.column(j).into_owned()),
            w: self.w.clone(),
        }
    }
}

/// Ingredients for parameter `param_index` around the critical trajectory of
/// `res`, which must come from `find_cct` at the same scenario and `p`.
pub fn compute_ingredients(
    sc: &Scenario,
    p: &DVector<f64>,
    res: &CriticalResult,
    param_index: usize,
) -> Result<SensIngredients> {
    if param_index >= p.len() {
        return Err(Error::InvalidParameter(format!("parameter index {param_index} out of range")));
    }
    Ok(Shared::new(sc, p, res, DEFAULT_STEP)?.column(param_index))
}

/// Formula value for parameter `param_index` with sensitivity trajectories
/// integrated at `step`.
pub fn parameter_sensitivity(
    sc: &Scenario,
    p: &DVector<f64>,
    res: &CriticalResult,
    param_index: usize,
    step: f64,
) -> Result<FormulaValue> {
    if param_index >= p.len() {
        return Err(Error::InvalidParameter(format!("parameter index {param_index} out of range")));
    }
    evaluate(res.category, &Shared::new(sc, p, res, step)?.column(param_index))
}

/// CCT sensitivity to every parameter of the scenario, sharing the fault-on
/// and post-fault sensitivity trajectories. Undefined formulas are returned
/// as errors per parameter.
pub fn sensitivity_report(
    sc: &Scenario,
    p: &DVector<f64>,
    res: &CriticalResult,
    step: f64,
) -> Result<Vec<(String, Result<ParamSensitivity>)>> {
    let shared = Shared::new(sc, p, res, step)?;
    Ok(sc
        .param_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let r = evaluate(res.category, &shared.column(j)).map(|v| ParamSensitivity {
                param: name.clone(),
                category: res.category,
                dtcr_dp: v.dtcr_dp,
                dtend_dp: v.dtend_dp,
                denominator: v.denominator,
            });
            (name.clone(), r)
        })
        .collect())
}
