//! One-parameter sweeps: CCT, category and formula (and optionally oracle)
//! sensitivity per value.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::cct::{find_cct, Category, CctOptions};
use crate::error::{Error, Result};
use crate::integrator::fmt_num;
use crate::models::Scenario;
use crate::oracle::{fd_cct_sensitivity, FdSpec};
use crate::sensitivity::parameter_sensitivity;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param_index: usize,
    /// Strictly monotone.
    pub values: Vec<f64>,
    /// Also compute the finite-difference oracle.
    pub verify: bool,
    pub cct: CctOptions,
    pub fd: FdSpec,
}

impl SweepSpec {
    pub fn new(param_index: usize, values: Vec<f64>) -> Self {
        SweepSpec {
            param_index,
            values,
            verify: false,
            cct: CctOptions::default(),
            fd: FdSpec::default(),
        }
    }

    /// `start, start + step, …` up to `stop` inclusive (rounded to the step grid).
    pub fn range(param_index: usize, start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step != 0.0) || !step.is_finite() || (stop - start) * step < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "range {start}:{step}:{stop} is empty or infinite"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        let values = (0..=n).map(|k| start + k as f64 * step).collect();
        Ok(SweepSpec::new(param_index, values))
    }

    fn validate(&self, n_params: usize) -> Result<()> {
        if self.param_index >= n_params {
            return Err(Error::InvalidParameter(format!(
                "parameter index {} out of range",
                self.param_index
            )));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::InvalidParameter("sweep values must be strictly monotone".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub t_cr: Option<f64>,
    pub category: Option<Category>,
    pub dtcr_dp_formula: Option<f64>,
    pub dtcr_dp_oracle: Option<f64>,
    /// `ok`, or the name of the first error met for this value.
    pub status: String,
}

fn row(sc: &Scenario, p0: &DVector<f64>, spec: &SweepSpec, value: f64) -> SweepRow {
    let mut row = SweepRow {
        param_value: value,
        t_cr: None,
        category: None,
        dtcr_dp_formula: None,
        dtcr_dp_oracle: None,
        status: "ok".into(),
    };
    let fail = |row: &mut SweepRow, e: Error| {
        if row.status == "ok" {
            row.status = e.name().to_string();
        }
    };
    let mut p = p0.clone();
    p[spec.param_index] = value;
    if let Err(e) = sc.check_params(&p) {
        fail(&mut row, e);
        return row;
    }
    match find_cct(sc, &p, &spec.cct) {
        Ok(res) => {
            row.t_cr = Some(res.t_cr);
            row.category = Some(res.category);
            match parameter_sensitivity(sc, &p, &res, spec.param_index, spec.cct.step) {
                Ok(v) => row.dtcr_dp_formula = Some(v.dtcr_dp),
                Err(e) => fail(&mut row, e),
            }
        }
        Err(e) => {
            fail(&mut row, e);
            return row;
        }
    }
    if spec.verify {
        match fd_cct_sensitivity(sc, &p, spec.param_index, &spec.fd) {
            Ok(v) => row.dtcr_dp_oracle = Some(v),
            Err(e) => fail(&mut row, e),
        }
    }
    row
}

/// Runs every sweep value independently; rows come back in input order.
pub fn run_sweep(sc: &Scenario, p0: &DVector<f64>, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate(p0.len())?;
    Ok(spec.values.par_iter().map(|&v| row(sc, p0, spec, v)).collect())
}

/// CSV with columns `param_value, t_cr, category, dtcr_dp_formula,
/// dtcr_dp_oracle, status`; missing values are empty.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "param_value,t_cr,category,dtcr_dp_formula,dtcr_dp_oracle,status")?;
    let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_num(r.param_value),
            opt(r.t_cr),
            r.category.map(|c| c.to_string()).unwrap_or_default(),
            opt(r.dtcr_dp_formula),
            opt(r.dtcr_dp_oracle),
            r.status
        )?;
    }
    Ok(())
}
