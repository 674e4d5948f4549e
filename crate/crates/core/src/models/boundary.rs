use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{ConstraintSet, ParametricModel};
use crate::error::{Error, Result};

/// Absolute tolerance for `H = 0`, `Ḣ = 0` and `Ḧ = 0` tests.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryClass {
    /// `Ḣ < 0`: the flow points into the boundary.
    Stable,
    /// `Ḣ > 0`: the flow points away from the boundary.
    Unstable,
    /// `Ḣ = 0`, `∂H/∂x ≠ 0`, `Ḧ ≠ 0`: tangency separating the two.
    SemiSaddle,
    BadSet,
}

/// A point of the feasibility boundary and its pseudo-equilibrium class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoEpClass {
    #[serde(serialize_with = "crate::serde_vec")]
    pub point: DVector<f64>,
    pub class: BoundaryClass,
    pub h_dot: f64,
    /// Second derivative of `H` along the flow; only computed when `Ḣ = 0`.
    pub h_ddot: Option<f64>,
}

/// Classifies a feasibility-boundary point of the transformed system
/// `ẋ = H f`. The only nonzero eigenvalue of its linearization there is `Ḣ`.
pub fn classify_boundary_point(
    h: &ConstraintSet,
    model: &ParametricModel,
    x: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<PseudoEpClass> {
    let value = h.product(x, p);
    if !(value.abs() <= BOUNDARY_TOL) {
        return Err(Error::NotOnBoundary { value });
    }
    let h_dot = h.h_dot(model, x, p);
    let (class, h_ddot) = if h_dot < -BOUNDARY_TOL {
        (BoundaryClass::Stable, None)
    } else if h_dot > BOUNDARY_TOL {
        (BoundaryClass::Unstable, None)
    } else {
        let grad_zero = h.grad_x(x, p).amax() <= BOUNDARY_TOL;
        let h_ddot = h.h_ddot(model, x, p);
        let class = if !grad_zero && h_ddot.abs() > BOUNDARY_TOL {
            BoundaryClass::SemiSaddle
        } else {
            BoundaryClass::BadSet
        };
        (class, Some(h_ddot))
    };
    Ok(PseudoEpClass {
        point: x.clone(),
        class,
        h_dot,
        h_ddot,
    })
}
