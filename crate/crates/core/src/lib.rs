//! Critical clearing time (CCT) of faults in inequality-constrained dynamical
//! systems, the mode in which stability or feasibility is lost, and
//! first-order CCT sensitivities from trajectory sensitivities.
//!
//! ```no_run
//! use clearsens_core::{find_cct, smib_model, CctOptions, SmibParams};
//!
//! let sc = smib_model(&SmibParams::default()).unwrap();
//! let res = find_cct(&sc, &sc.p0, &CctOptions::default()).unwrap();
//! println!("{} s, category {}", res.t_cr, res.category);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(a > b)` also rejects NaN

use nalgebra::DVector;
use serde::Serializer;

pub mod cct;
pub mod csr;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod sensitivity;
pub mod sweep;

pub use cct::{classify_category, find_cct, Category, CctOptions, CriticalResult};
pub use csr::{map_csr, CellLabel, CsrGrid, GridSpec};
pub use error::{Error, Result};
pub use integrator::{
    detect_feasibility_exit, detect_fnorm_min, integrate, integrate_until, Event, EventKind,
    IntegrationOptions, SensTrajectory,
};
pub use models::{
    classify_boundary_point, find_equilibrium, load_scenario, multimachine_model, parse_scenario,
    smib_model, BoundaryClass, Constraint, ConstraintSet, Equilibrium, EquilibriumKind,
    MachineDataset, Network, ParametricModel, PseudoEpClass, Scenario, SmibParams, VectorField,
};
pub use oracle::{closed_form_faulton, fd_cct_sensitivity, FaultOnClosedForm, FdSpec};
pub use sensitivity::{
    category1_sensitivity, category2_sensitivity, category3_sensitivity, compute_ingredients,
    cuep_sensitivity, parameter_sensitivity, sensitivity_report, sep_sensitivity, FormulaValue,
    ParamSensitivity, SensIngredients,
};
pub use sweep::{run_sweep, write_sweep_csv, SweepRow, SweepSpec};

pub(crate) fn serde_vec<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub(crate) fn serde_opt_vec<S: Serializer>(
    v: &Option<DVector<f64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_seq(v.iter()),
        None => s.serialize_none(),
    }
}
