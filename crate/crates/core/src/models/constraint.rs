use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ParametricModel;

/// Affine inequality `h(x, p) = offset + a·x + b·p > 0`.
///
/// Every limit in the shipped scenarios (angle, speed, angle difference) has
/// this form, so each member's own Hessian is zero. The product `H` still has
/// nonzero second derivatives, which [`ConstraintSet`] assembles by the
/// product rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub offset: f64,
    pub state_coeffs: DVector<f64>,
    pub param_coeffs: DVector<f64>,
}

impl Constraint {
    pub fn new(
        name: impl Into<String>,
        offset: f64,
        state_coeffs: Vec<f64>,
        param_coeffs: Vec<f64>,
    ) -> Self {
        Constraint {
            name: name.into(),
            offset,
            state_coeffs: DVector::from_vec(state_coeffs),
            param_coeffs: DVector::from_vec(param_coeffs),
        }
    }

    pub fn value(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.offset + self.state_coeffs.dot(x) + self.param_coeffs.dot(p)
    }

    pub fn grad_x(&self) -> &DVector<f64> {
        &self.state_coeffs
    }

    pub fn grad_p(&self) -> &DVector<f64> {
        &self.param_coeffs
    }
}

/// A list of inequality constraints and their product `H = ∏ h_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        ConstraintSet { constraints }
    }

    pub fn empty() -> Self {
        ConstraintSet::default()
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Union of two sets with members present in both kept once.
    pub fn combined(a: &ConstraintSet, b: &ConstraintSet) -> ConstraintSet {
        let mut out = a.constraints.clone();
        for c in &b.constraints {
            if !out.iter().any(|o| o == c) {
                out.push(c.clone());
            }
        }
        ConstraintSet { constraints: out }
    }

    pub fn values(&self, x: &DVector<f64>, p: &DVector<f64>) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x, p)).collect()
    }

    /// `H(x, p)`; 1 for an empty set.
    pub fn product(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.values(x, p).iter().product()
    }

    /// Smallest member value; the feasibility indicator used for crossings.
    pub fn min_value(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.values(x, p)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self, x: &DVector<f64>, p: &DVector<f64>) -> bool {
        self.min_value(x, p) > 0.0
    }

    fn product_except(values: &[f64], skip: &[usize]) -> f64 {
        values
            .iter()
            .enumerate()
            .filter(|(i, _)| !skip.contains(i))
            .map(|(_, v)| *v)
            .product()
    }

    /// `∂H/∂x`.
    pub fn grad_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let v = self.values(x, p);
        let mut g = DVector::zeros(x.len());
        for (k, c) in self.constraints.iter().enumerate() {
            g += c.grad_x() * Self::product_except(&v, &[k]);
        }
        g
    }

    /// `∂H/∂p`.
    pub fn grad_p(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let v = self.values(x, p);
        let mut g = DVector::zeros(p.len());
        for (k, c) in self.constraints.iter().enumerate() {
            g += c.grad_p() * Self::product_except(&v, &[k]);
        }
        g
    }

    /// `∂²H/∂x²`.
    pub fn hess_xx(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.mixed(x, p, |c| c.grad_x(), |c| c.grad_x(), x.len(), x.len())
    }

    /// `∂²H/∂x∂p`, n × p.
    pub fn hess_xp(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.mixed(x, p, |c| c.grad_x(), |c| c.grad_p(), x.len(), p.len())
    }

    fn mixed(
        &self,
        x: &DVector<f64>,
        p: &DVector<f64>,
        left: impl Fn(&Constraint) -> &DVector<f64>,
        right: impl Fn(&Constraint) -> &DVector<f64>,
        rows: usize,
        cols: usize,
    ) -> DMatrix<f64> {
        let v = self.values(x, p);
        let mut h = DMatrix::zeros(rows, cols);
        for (k, ck) in self.constraints.iter().enumerate() {
            for (l, cl) in self.constraints.iter().enumerate() {
                if k == l {
                    continue;
                }
                let w = Self::product_except(&v, &[k, l]);
                h += left(ck) * right(cl).transpose() * w;
            }
        }
        h
    }

    /// `Ḣ = (∂H/∂x)·f` along the model's flow.
    pub fn h_dot(&self, model: &ParametricModel, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.grad_x(x, p).dot(&model.f(x, p))
    }

    /// `∂Ḣ/∂x = fᵀ ∂²H/∂x² + (∂H/∂x) ∂f/∂x`, returned as a column.
    pub fn h_dot_grad_x(
        &self,
        model: &ParametricModel,
        x: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DVector<f64> {
        let f = model.f(x, p);
        let j = model.jac_x(x, p);
        self.hess_xx(x, p).transpose() * &f + j.transpose() * self.grad_x(x, p)
    }

    /// `∂Ḣ/∂p = fᵀ ∂²H/∂x∂p + (∂H/∂x) ∂f/∂p`, returned as a column.
    pub fn h_dot_grad_p(
        &self,
        model: &ParametricModel,
        x: &DVector<f64>,
        p: &DVector<f64>,
    ) -> DVector<f64> {
        let f = model.f(x, p);
        let jp = model.jac_p(x, p);
        self.hess_xp(x, p).transpose() * &f + jp.transpose() * self.grad_x(x, p)
    }

    /// `Ḧ = (∂Ḣ/∂x)·f`.
    pub fn h_ddot(&self, model: &ParametricModel, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        self.h_dot_grad_x(model, x, p).dot(&model.f(x, p))
    }
}
