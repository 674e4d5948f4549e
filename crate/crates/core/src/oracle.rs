//! Independent checks: central finite differences of the CCT itself and the
//! closed-form SMIB fault-on trajectory. Nothing here uses the sensitivity
//! formulas.

use nalgebra::DVector;

use crate::cct::{find_cct, CctOptions};
use crate::error::{Error, Result};
use crate::integrator::DEFAULT_STEP;
use crate::models::{Scenario, SmibParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSpec {
    /// Perturbation relative to `max(1, |p_j|)`.
    pub delta: f64,
    /// Bracket tolerance of the CCT runs, seconds.
    pub cct_tol: f64,
    pub step: f64,
    pub t_max: Option<f64>,
}

impl Default for FdSpec {
    fn default() -> Self {
        FdSpec {
            delta: 1e-3,
            cct_tol: 1e-7,
            step: DEFAULT_STEP,
            t_max: None,
        }
    }
}

impl FdSpec {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.cct_tol > 0.0 && self.cct_tol < 0.01) {
            return Err(Error::InvalidParameter(format!(
                "cct_tol must lie in (0, 0.01), got {}",
                self.cct_tol
            )));
        }
        Ok(())
    }
}

/// `(t_cr(p + Δ) − t_cr(p − Δ)) / 2Δ` for parameter `j`, with
/// `Δ = delta·max(1, |p_j|)`.
pub fn fd_cct_sensitivity(sc: &Scenario, p0: &DVector<f64>, j: usize, spec: &FdSpec) -> Result<f64> {
    spec.validate()?;
    if j >= p0.len() {
        return Err(Error::InvalidParameter(format!("parameter index {j} out of range")));
    }
    let dp = spec.delta * p0[j].abs().max(1.0);
    let opts = CctOptions {
        step: spec.step,
        t_max: spec.t_max,
        bracket_tol: spec.cct_tol,
        validate: true,
    };
    let run = |sign: f64| {
        let mut p = p0.clone();
        p[j] += sign * dp;
        find_cct(sc, &p, &opts)
    };
    let (plus, minus) = rayon::join(|| run(1.0), || run(-1.0));
    let (plus, minus) = (plus?, minus?);
    if plus.category != minus.category {
        return Err(Error::CategoryChanged {
            minus: minus.category.number(),
            plus: plus.category.number(),
        });
    }
    Ok((plus.t_cr - minus.t_cr) / (2.0 * dp))
}

/// Fault-on SMIB state with the infinite bus shorted, and its partials with
/// respect to `Pm` and `M` at fixed initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultOnClosedForm {
    pub delta: f64,
    pub omega: f64,
    pub d_delta_d_pm: f64,
    pub d_delta_d_m: f64,
    pub d_omega_d_pm: f64,
    pub d_omega_d_m: f64,
}

/// `ω(t) = (Pm/D)(1 − e^(−Dt/M))`, `δ(t) = δ0 + (Pm/D)t − (Pm·M/D²)(1 − e^(−Dt/M))`.
pub fn closed_form_faulton(params: &SmibParams, delta0: f64, t: f64) -> Result<FaultOnClosedForm> {
    let (pm, m, d) = (params.pm, params.inertia, params.damping);
    if !(d > 0.0) || !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("need D > 0 and M > 0, got {d} and {m}")));
    }
    let e = (-d * t / m).exp();
    let one_e = 1.0 - e;
    Ok(FaultOnClosedForm {
        delta: delta0 + pm / d * t - pm * m / (d * d) * one_e,
        omega: pm / d * one_e,
        d_delta_d_pm: t / d - m / (d * d) * one_e,
        d_delta_d_m: -pm / (d * d) * one_e + pm * t / (d * m) * e,
        d_omega_d_pm: one_e / d,
        d_omega_d_m: -pm * t / (m * m) * e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::smib_model;

    #[test]
    fn closed_form_values() {
        let p = SmibParams::default();
        let z = closed_form_faulton(&p, 0.64350, 0.0).unwrap();
        assert_eq!((z.delta, z.omega), (0.64350, 0.0));
        let c = closed_form_faulton(&p, 0.64350, 0.5).unwrap();
        assert!((c.omega - 0.758545).abs() < 1e-6);
        assert!((c.d_omega_d_m + 1.765821).abs() < 1e-6);
    }

    #[test]
    fn closed_form_partials_match_differences() {
        let base = SmibParams::default();
        let h = 1e-6;
        let at = |pm: f64, m: f64| {
            closed_form_faulton(&SmibParams { pm, inertia: m, ..base.clone() }, 0.6435, 0.7).unwrap()
        };
        let c = at(0.6, 0.25);
        let (pp, pmn) = (at(0.6 + h, 0.25), at(0.6 - h, 0.25));
        let (mp, mm) = (at(0.6, 0.25 + h), at(0.6, 0.25 - h));
        assert!((c.d_delta_d_pm - (pp.delta - pmn.delta) / (2.0 * h)).abs() < 1e-8);
        assert!((c.d_omega_d_pm - (pp.omega - pmn.omega) / (2.0 * h)).abs() < 1e-8);
        assert!((c.d_delta_d_m - (mp.delta - mm.delta) / (2.0 * h)).abs() < 1e-7);
        assert!((c.d_omega_d_m - (mp.omega - mm.omega) / (2.0 * h)).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SmibParams {
            damping: 0.0,
            ..SmibParams::default()
        };
        assert!(closed_form_faulton(&p, 0.0, 1.0).is_err());
        let sc = smib_model(&SmibParams::default()).unwrap();
        let bad = FdSpec {
            cct_tol: 0.02,
            ..FdSpec::default()
        };
        assert!(fd_cct_sensitivity(&sc, &sc.p0, 0, &bad).is_err());
    }

    #[test]
    fn base_point_inertia_sensitivity_is_positive() {
        let sc = smib_model(&SmibParams::default()).unwrap();
        let v = fd_cct_sensitivity(&sc, &sc.p0, 1, &FdSpec::default()).unwrap();
        // category 1 on ω = ωmax: t_exit = −(M/D) ln(1 − D ωmax / Pm), linear in M
        let exact = -(1.0 - 0.5 / 0.6f64).ln() / 0.5;
        assert!(v > 0.0);
        assert!((v - exact).abs() < 1e-6, "{v} vs {exact}");
    }
}
