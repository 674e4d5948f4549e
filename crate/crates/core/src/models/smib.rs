//! Single machine connected to an infinite bus, classical model:
//!
//! ```text
//! δ̇ = ω
//! M ω̇ = Pm − (EV/X) sin δ − D ω
//! ```
//!
//! with the limits `δ < δmax` (out-of-step relay) and `ω < ωmax`
//! (over-frequency ride-through). Parameters are `p = [Pm, M, δmax, ωmax]`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Constraint, ConstraintSet, ParametricModel, Scenario, VectorField};
use crate::error::{Error, Result};

pub const SMIB_PARAM_NAMES: [&str; 4] = ["Pm", "M", "dmax", "wmax"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmibField {
    /// EV/X of the topology.
    pub coupling: f64,
    pub damping: f64,
    pub pm_index: usize,
    pub inertia_index: usize,
    pub n_params: usize,
}

impl SmibField {
    fn accel_numerator(&self, x: &DVector<f64>, p: &DVector<f64>) -> f64 {
        p[self.pm_index] - self.coupling * x[0].sin() - self.damping * x[1]
    }
}

impl VectorField for SmibField {
    fn dim(&self) -> usize {
        2
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn eval(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let m = p[self.inertia_index];
        DVector::from_vec(vec![x[1], self.accel_numerator(x, p) / m])
    }

    fn jac_x(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let m = p[self.inertia_index];
        DMatrix::from_row_slice(
            2,
            2,
            &[
                0.0,
                1.0,
                -self.coupling * x[0].cos() / m,
                -self.damping / m,
            ],
        )
    }

    fn jac_p(&self, x: &DVector<f64>, p: &DVector<f64>) -> DMatrix<f64> {
        let m = p[self.inertia_index];
        let mut j = DMatrix::zeros(2, self.n_params);
        j[(1, self.pm_index)] = 1.0 / m;
        j[(1, self.inertia_index)] = -self.accel_numerator(x, p) / (m * m);
        j
    }
}

/// Inputs of [`smib_model`]. Defaults are the base study point
/// `p = [0.6, 0.25, 2.4434, 1]` with `D = 0.5` and `EV/X = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmibParams {
    pub pm: f64,
    pub inertia: f64,
    pub delta_max: f64,
    pub omega_max: f64,
    pub damping: f64,
    /// EV/X before the fault and after clearing.
    pub coupling: f64,
    pub t_max: f64,
}

impl Default for SmibParams {
    fn default() -> Self {
        SmibParams {
            pm: 0.6,
            inertia: 0.25,
            delta_max: 2.4434,
            omega_max: 1.0,
            damping: 0.5,
            coupling: 1.0,
            t_max: 30.0,
        }
    }
}

/// Builds the SMIB scenario. The fault is a bolted fault on the infinite bus
/// (`EV/X = 0` while it lasts) and clearing restores the pre-fault topology.
pub fn smib_model(params: &SmibParams) -> Result<Scenario> {
    if !(params.inertia > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "inertia M must be positive, got {}",
            params.inertia
        )));
    }
    if !(params.delta_max > 0.0) || !(params.omega_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "limits must be positive, got dmax = {}, wmax = {}",
            params.delta_max, params.omega_max
        )));
    }
    let field = |coupling| SmibField {
        coupling,
        damping: params.damping,
        pm_index: 0,
        inertia_index: 1,
        n_params: 4,
    };
    let states = vec!["delta".to_string(), "omega".to_string()];
    let model = |name: &str, coupling| {
        ParametricModel::new(name, states.clone(), Arc::new(field(coupling)))
    };
    let limits = ConstraintSet::new(vec![
        Constraint::new("dmax - delta", 0.0, vec![-1.0, 0.0], vec![0.0, 0.0, 1.0, 0.0]),
        Constraint::new("wmax - omega", 0.0, vec![0.0, -1.0], vec![0.0, 0.0, 0.0, 1.0]),
    ]);
    let p0 = DVector::from_vec(vec![
        params.pm,
        params.inertia,
        params.delta_max,
        params.omega_max,
    ]);
    let sep_guess = DVector::from_vec(vec![params.pm.clamp(-1.0, 1.0).asin(), 0.0]);
    Scenario::builder("smib")
        .models(
            model("pre", params.coupling),
            model("fault", 0.0),
            model("post", params.coupling),
        )
        .constraints(limits.clone(), limits)
        .parameters(
            SMIB_PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
            p0,
        )
        .positive_params(vec![1, 2, 3])
        .sep_guess(sep_guess)
        .t_max(params.t_max)
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testing::{assert_close_rel, fd_jacobians};

    #[test]
    fn base_point_matches_study_point() {
        let sc = smib_model(&SmibParams::default()).unwrap();
        assert_eq!(sc.p0.as_slice(), &[0.6, 0.25, 2.4434, 1.0]);
        assert_eq!(sc.param_names, vec!["Pm", "M", "dmax", "wmax"]);
        assert_eq!(sc.h_post.len(), 2);
    }

    #[test]
    fn fault_field_at_sep_is_pure_acceleration() {
        let sc = smib_model(&SmibParams::default()).unwrap();
        let x = DVector::from_vec(vec![0.6435, 0.0]);
        let f = sc.fault.f(&x, &sc.p0);
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn post_field_vanishes_at_sep() {
        let sc = smib_model(&SmibParams::default()).unwrap();
        let x = DVector::from_vec(vec![0.6_f64.asin(), 0.0]);
        assert!(sc.post.f(&x, &sc.p0).amax() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_inputs() {
        for bad in [
            SmibParams {
                inertia: 0.0,
                ..SmibParams::default()
            },
            SmibParams {
                delta_max: -1.0,
                ..SmibParams::default()
            },
            SmibParams {
                omega_max: 0.0,
                ..SmibParams::default()
            },
        ] {
            assert!(matches!(smib_model(&bad), Err(Error::InvalidParameter(_))));
        }
    }

    #[test]
    fn jacobians_match_central_differences() {
        let sc = smib_model(&SmibParams::default()).unwrap();
        // deterministic pseudo-random sample points
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let x = DVector::from_vec(vec![next() * 6.0 - 3.0, next() * 4.0 - 2.0]);
            let p = DVector::from_vec(vec![
                next(),
                0.05 + next() * 0.5,
                1.0 + next() * 2.0,
                0.5 + next(),
            ]);
            for m in [&sc.pre, &sc.fault, &sc.post] {
                let (jx, jp) = fd_jacobians(m, &x, &p, 1e-6);
                assert_close_rel(&m.jac_x(&x, &p), &jx, 1e-5);
                assert_close_rel(&m.jac_p(&x, &p), &jp, 1e-5);
            }
        }
    }
}
