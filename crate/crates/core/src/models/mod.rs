//! Parametric dynamical models, inequality constraints, scenarios and
//! equilibrium computations.
//!
//! A model is a vector field `f(x, p)` with analytic Jacobians with respect to
//! the state and the parameter vector. Constraints `h_k(x, p) > 0` define the
//! feasibility region; their product `H` is zero on its boundary.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

mod boundary;
mod constraint;
mod equilibrium;
pub mod file;
mod multimachine;
mod scenario;
mod smib;

pub use boundary::{classify_boundary_point, BoundaryClass, PseudoEpClass, BOUNDARY_TOL};
pub use constraint::{Constraint, ConstraintSet};
pub use file::{load_scenario, parse_scenario};
pub use equilibrium::{
    classify_eigenvalues, find_equilibrium, Equilibrium, EquilibriumKind, EQUILIBRIUM_TOL,
    NEWTON_MAX_ITER,
};
pub use multimachine::{
    multimachine_model, param_names as machine_param_names, MachineDataset, MachineField, Network,
};
pub use scenario::Scenario;
pub use smib::{smib_model, SmibField, SmibParams, SMIB_PARAM_NAMES};

/// A smooth vector field `f(x, p)` with analytic Jacobians.
pub trait VectorField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn eval(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64>;
    /// `∂f/∂x`, n × n.
    fn jac_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
    /// `∂f/∂p`, n × p.
    fn jac_p(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64>;
}

/// A named vector field. Cloning is cheap; the field itself is shared.
#[derive(Clone)]
pub struct ParametricModel {
    name: String,
    state_names: Vec<String>,
    field: Arc<dyn VectorField>,
}

impl ParametricModel {
    pub fn new(
        name: impl Into<String>,
        state_names: Vec<String>,
        field: Arc<dyn VectorField>,
    ) -> Self {
        assert_eq!(state_names.len(), field.dim(), "one name per state");
        ParametricModel {
            name: name.into(),
            state_names,
            field,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn n_params(&self) -> usize {
        self.field.n_params()
    }

    pub fn f(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        self.field.eval(x, p)
    }

    pub fn jac_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.field.jac_x(x, p)
    }

    pub fn jac_p(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        self.field.jac_p(x, p)
    }

    pub fn field(&self) -> &Arc<dyn VectorField> {
        &self.field
    }
}

impl fmt::Debug for ParametricModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricModel")
            .field("name", &self.name)
            .field("states", &self.state_names)
            .field("field", &self.field)
            .finish()
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;

    /// Central-difference Jacobians of `f`, used to check the analytic ones.
    pub fn fd_jacobians(
        model: &ParametricModel,
        x: &DVector<f64>,
        p: &DVector<f64>,
        step: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = model.dim();
        let np = model.n_params();
        let mut jx = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let d = (model.f(&xp, p) - model.f(&xm, p)) / (2.0 * step);
            jx.set_column(j, &d);
        }
        let mut jp = DMatrix::zeros(n, np);
        for j in 0..np {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += step;
            pm[j] -= step;
            let d = (model.f(x, &pp) - model.f(x, &pm)) / (2.0 * step);
            jp.set_column(j, &d);
        }
        (jx, jp)
    }

    pub fn assert_close_rel(a: &DMatrix<f64>, b: &DMatrix<f64>, rel: f64) {
        let scale = b.amax().max(1.0);
        let diff = (a - b).amax();
        assert!(diff <= rel * scale, "difference {diff:e} exceeds {rel:e}·{scale}\n{a}\n{b}");
    }
}
