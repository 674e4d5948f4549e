//! Classical multi-machine model on a network reduced to the internal
//! generator buses:
//!
//! ```text
//! δ̇_i = ω_i
//! M_i ω̇_i = Pm_i − Σ_j E_i E_j (G_ij cos δ_ij + B_ij sin δ_ij) − D_i ω_i
//! ```
//!
//! With uniform damping `D_i / M_i = λ` the dynamics of angles and speeds
//! relative to the last machine close on themselves, so the state is
//! `[δ_1 − δ_m, …, δ_{m−1} − δ_m, ω_1 − ω_m, …, ω_{m−1} − ω_m]` and the
//! equilibria are isolated. Parameters are `[Pm_1, …, Pm_m, limit]`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{Constraint, ConstraintSet, ParametricModel, Scenario, VectorField};
use crate::error::{Error, Result};

/// Reduced admittance matrix `Y = G + jB` of one topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub conductance: DMatrix<f64>,
    pub susceptance: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MachineField {
    inertia: Vec<f64>,
    emf: Vec<f64>,
    damping_ratio: f64,
    network: Network,
    n_params: usize,
}

impl MachineField {
    fn machines(&self) -> usize {
        self.inertia.len()
    }

    fn absolute_angles(&self, x: &DVector<f64>) -> Vec<f64> {
        let m = self.machines();
        let mut d: Vec<f64> = x.iter().take(m - 1).cloned().collect();
        d.push(0.0);
        d
    }

    fn electrical_power(&self, delta: &[f64]) -> Vec<f64> {
        let m = self.machines();
        let (g, b) = (&self.network.conductance, &self.network.susceptance);
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let dij = delta[i] - delta[j];
                        self.emf[i] * self.emf[j] * (g[(i, j)] * dij.cos() + b[(i, j)] * dij.sin())
                    })
                    .sum()
            })
            .collect()
    }

    /// `∂Pe_i/∂δ_k` in absolute angles.
    fn power_jacobian(&self, delta: &[f64]) -> DMatrix<f64> {
        let m = self.machines();
        let (g, b) = (&self.network.conductance, &self.network.susceptance);
        let mut j = DMatrix::zeros(m, m);
        for i in 0..m {
            for k in 0..m {
                if i == k {
                    continue;
                }
                let dik = delta[i] - delta[k];
                let v = self.emf[i] * self.emf[k] * (g[(i, k)] * dik.sin() - b[(i, k)] * dik.cos());
                j[(i, k)] = v;
                j[(i, i)] -= v;
            }
        }
        j
    }
}

impl VectorField for MachineField {
    fn dim(&self) -> usize {
        2 * (self.machines() - 1)
    }

    fn n_params(&self) -> usize {
        self.n_params
    }

    fn eval(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let m = self.machines();
        let r = m - 1;
        let pe = self.electrical_power(&self.absolute_angles(x));
        let accel: Vec<f64> = (0..m).map(|i| (p[i] - pe[i]) / self.inertia[i]).collect();
        let mut f = DVector::zeros(2 * r);
        for i in 0..r {
            f[i] = x[r + i];
            f[r + i] = accel[i] - accel[r] - self.damping_ratio * x[r + i];
        }
        f
    }

    fn jac_x(&self, x: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        let m = self.machines();
        let r = m - 1;
        let dpe = self.power_jacobian(&self.absolute_angles(x));
        let mut j = DMatrix::zeros(2 * r, 2 * r);
        for i in 0..r {
            j[(i, r + i)] = 1.0;
            for k in 0..r {
                j[(r + i, k)] = -dpe[(i, k)] / self.inertia[i] + dpe[(r, k)] / self.inertia[r];
            }
            j[(r + i, r + i)] = -self.damping_ratio;
        }
        j
    }

    fn jac_p(&self, _x: &DVector<f64>, _p: &DVector<f64>) -> DMatrix<f64> {
        let m = self.machines();
        let r = m - 1;
        let mut j = DMatrix::zeros(2 * r, self.n_params);
        for i in 0..r {
            j[(r + i, i)] = 1.0 / self.inertia[i];
            j[(r + i, r)] = -1.0 / self.inertia[r];
        }
        j
    }
}

/// Machine and network data of a classical multi-machine system.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDataset {
    pub name: String,
    pub inertia: Vec<f64>,
    pub emf: Vec<f64>,
    /// Base mechanical powers, one per machine.
    pub mechanical_power: Vec<f64>,
    /// Uniform `D_i / M_i`.
    pub damping_ratio: f64,
    pub pre: Network,
    pub fault: Network,
    pub post: Network,
    /// Zero-based machines `(i, j)` of the limit `δ_i − δ_j < limit`.
    pub limited_pair: (usize, usize),
    pub angle_limit: f64,
    pub t_max: f64,
}

impl MachineDataset {
    fn validate(&self) -> Result<()> {
        let m = self.inertia.len();
        if m < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least two machines, got {m}"
            )));
        }
        if self.emf.len() != m || self.mechanical_power.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} inertias, {} emfs and {} mechanical powers",
                m,
                self.emf.len(),
                self.mechanical_power.len()
            )));
        }
        for (name, net) in [("pre", &self.pre), ("fault", &self.fault), ("post", &self.post)] {
            for mat in [&net.conductance, &net.susceptance] {
                if mat.nrows() != m || mat.ncols() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} admittance is {}x{}, expected {m}x{m}",
                        mat.nrows(),
                        mat.ncols()
                    )));
                }
            }
        }
        if self.limited_pair.0 >= m || self.limited_pair.1 >= m || self.limited_pair.0 == self.limited_pair.1 {
            return Err(Error::DimensionMismatch(format!(
                "invalid limited pair {:?}",
                self.limited_pair
            )));
        }
        if self.inertia.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter("inertias must be positive".into()));
        }
        if !(self.damping_ratio >= 0.0) {
            return Err(Error::InvalidParameter("damping ratio must be nonnegative".into()));
        }
        if !(self.angle_limit > 0.0) {
            return Err(Error::InvalidParameter("angle limit must be positive".into()));
        }
        Ok(())
    }
}

pub fn param_names(m: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=m).map(|i| format!("Pm{i}")).collect();
    names.push("dlim".into());
    names
}

pub fn state_names(m: usize) -> Vec<String> {
    let r = m - 1;
    (1..=r)
        .map(|i| format!("d{i}"))
        .chain((1..=r).map(|i| format!("w{i}")))
        .collect()
}

pub(crate) fn machine_model(
    name: &str,
    inertia: &[f64],
    emf: &[f64],
    damping_ratio: f64,
    network: Network,
    n_params: usize,
) -> ParametricModel {
    let field = MachineField {
        inertia: inertia.to_vec(),
        emf: emf.to_vec(),
        damping_ratio,
        network,
        n_params,
    };
    ParametricModel::new(name, state_names(inertia.len()), Arc::new(field))
}

/// Builds the multi-machine scenario with the single limit
/// `limit − (δ_i − δ_j) > 0` (default limit π/2), shared by the fault-on and
/// post-fault topologies.
pub fn multimachine_model(data: &MachineDataset) -> Result<Scenario> {
    data.validate()?;
    let m = data.inertia.len();
    let r = m - 1;
    let np = m + 1;
    let model = |name: &str, net: &Network| {
        machine_model(name, &data.inertia, &data.emf, data.damping_ratio, net.clone(), np)
    };
    let mut state = vec![0.0; 2 * r];
    let (i, j) = data.limited_pair;
    if i < r {
        state[i] -= 1.0;
    }
    if j < r {
        state[j] += 1.0;
    }
    let mut param = vec![0.0; np];
    param[m] = 1.0;
    let limit = ConstraintSet::new(vec![Constraint::new(
        format!("dlim - (d{} - d{})", i + 1, j + 1),
        0.0,
        state,
        param,
    )]);
    let mut p0: Vec<f64> = data.mechanical_power.clone();
    p0.push(data.angle_limit);
    Scenario::builder(data.name.clone())
        .models(model("pre", &data.pre), model("fault", &data.fault), model("post", &data.post))
        .constraints(limit.clone(), limit)
        .parameters(param_names(m), DVector::from_vec(p0))
        .positive_params(vec![m])
        .t_max(data.t_max)
        .build()
}

impl Default for MachineDataset {
    /// A two-machine symmetric toy: equal machines on a lossless tie.
    fn default() -> Self {
        let tie = |b: f64| Network {
            conductance: DMatrix::zeros(2, 2),
            susceptance: DMatrix::from_row_slice(2, 2, &[-b, b, b, -b]),
        };
        MachineDataset {
            name: "two-machine".into(),
            inertia: vec![0.1, 0.1],
            emf: vec![1.0, 1.0],
            mechanical_power: vec![0.0, 0.0],
            damping_ratio: 4.0,
            pre: tie(2.0),
            fault: tie(0.5),
            post: tie(1.5),
            limited_pair: (0, 1),
            angle_limit: FRAC_PI_2,
            t_max: 30.0,
        }
    }
}
