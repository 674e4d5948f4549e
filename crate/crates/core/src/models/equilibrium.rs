use nalgebra::{Complex, DVector};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use super::ParametricModel;
use crate::error::{Error, Result};
use crate::linalg;

/// Residual `‖f‖∞` accepted as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;

/// Real parts closer to zero than this make an equilibrium nonhyperbolic.
const HYPERBOLIC_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Sep,
    /// Type-k unstable equilibrium: exactly k eigenvalues with positive real part.
    Uep(usize),
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub x: DVector<f64>,
    pub kind: EquilibriumKind,
    pub eigenvalues: Vec<Complex<f64>>,
}

impl Equilibrium {
    pub fn unstable_count(&self) -> usize {
        self.eigenvalues.iter().filter(|e| e.re > HYPERBOLIC_TOL).count()
    }

    pub fn is_type1(&self) -> bool {
        self.kind == EquilibriumKind::Uep(1)
    }
}

impl Serialize for Equilibrium {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Equilibrium", 3)?;
        st.serialize_field("x", &self.x.as_slice())?;
        st.serialize_field("kind", &self.kind)?;
        let ev: Vec<[f64; 2]> = self.eigenvalues.iter().map(|e| [e.re, e.im]).collect();
        st.serialize_field("eigenvalues", &ev)?;
        st.end()
    }
}

pub fn classify_eigenvalues(eigenvalues: &[Complex<f64>]) -> EquilibriumKind {
    if eigenvalues.iter().any(|e| e.re.abs() <= HYPERBOLIC_TOL) {
        return EquilibriumKind::Degenerate;
    }
    match eigenvalues.iter().filter(|e| e.re > 0.0).count() {
        0 => EquilibriumKind::Sep,
        k => EquilibriumKind::Uep(k),
    }
}

/// Newton solve of `f(x, p) = 0` from `guess`, followed by eigen-classification.
///
/// Steps that increase the residual are halved up to ten times.
pub fn find_equilibrium(
    model: &ParametricModel,
    p: &DVector<f64>,
    guess: &DVector<f64>,
) -> Result<Equilibrium> {
    if guess.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "guess has {} entries, model {} has dimension {}",
            guess.len(),
            model.name(),
            model.dim()
        )));
    }
    let mut x = guess.clone();
    let mut fx = model.f(&x, p);
    let mut residual = linalg::inf_norm(&fx);
    let mut iterations = 0;
    while residual > EQUILIBRIUM_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
        iterations += 1;
        let step = linalg::solve_vec(&model.jac_x(&x, p), &fx)?;
        let full = &x - &step;
        let f_full = model.f(&full, p);
        let (mut next, mut f_next) = (full.clone(), f_full.clone());
        let mut scale = 1.0;
        for _ in 0..10 {
            let finite = f_next.iter().all(|v| v.is_finite());
            if finite && linalg::inf_norm(&f_next) < residual {
                break;
            }
            scale *= 0.5;
            next = &x - &step * scale;
            f_next = model.f(&next, p);
        }
        if !(linalg::inf_norm(&f_next) < residual) {
            // no decrease along the Newton direction: take the full step anyway
            next = full;
            f_next = f_full;
        }
        x = next;
        fx = f_next;
        residual = linalg::inf_norm(&fx);
        if !residual.is_finite() {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        }
    }
    let jac = model.jac_x(&x, p);
    let condition = linalg::condition_number(&jac);
    if !(condition <= linalg::MAX_CONDITION) {
        return Err(Error::SingularJacobian { condition });
    }
    let eigenvalues = linalg::eigenvalues(&jac);
    let kind = classify_eigenvalues(&eigenvalues);
    Ok(Equilibrium {
        x,
        kind,
        eigenvalues,
    })
}
