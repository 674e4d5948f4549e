//! TOML scenario files.
//!
//! ```toml
//! name = "smib"
//! t_max = 30.0
//!
//! [parameters]
//! names = ["Pm", "M", "dmax", "wmax"]
//! values = [0.6, 0.25, 2.4434, 1.0]
//! positive = ["M", "dmax", "wmax"]
//!
//! [pre]
//! type = "smib"
//! coupling = 1.0
//! damping = 0.5
//! mechanical_power = "Pm"
//! inertia = "M"
//!
//! [[constraints.post]]
//! name = "dmax - delta"
//! state = { delta = -1.0 }
//! param = { dmax = 1.0 }
//! ```
//!
//! Multi-machine files use `type = "classical"` topologies with
//! `conductance`/`susceptance` matrices and a `[machines]` table.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::multimachine::{machine_model, state_names as machine_states};
use super::{Constraint, ConstraintSet, Network, ParametricModel, Scenario, SmibField};
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    t_max: Option<f64>,
    sep_guess: Option<Vec<f64>>,
    parameters: ParameterTable,
    machines: Option<MachineTable>,
    pre: Topology,
    fault: Topology,
    post: Topology,
    #[serde(default)]
    constraints: ConstraintTables,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterTable {
    names: Vec<String>,
    values: Vec<f64>,
    #[serde(default)]
    positive: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineTable {
    inertia: Vec<f64>,
    emf: Vec<f64>,
    damping_ratio: f64,
    /// Parameter names, one per machine, in order.
    mechanical_power: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum Topology {
    Smib {
        coupling: f64,
        damping: f64,
        mechanical_power: String,
        inertia: String,
    },
    Classical {
        conductance: Vec<Vec<f64>>,
        susceptance: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintTables {
    #[serde(default)]
    fault: Vec<ConstraintEntry>,
    #[serde(default)]
    post: Vec<ConstraintEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintEntry {
    name: String,
    #[serde(default)]
    offset: f64,
    #[serde(default)]
    state: BTreeMap<String, f64>,
    #[serde(default)]
    param: BTreeMap<String, f64>,
}

/// Reads and builds a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::ScenarioNotFound(path.display().to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    build(file)
}

fn index_of(names: &[String], name: &str, what: &str) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::Parse(format!("unknown {what} '{name}'")))
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn build(file: ScenarioFile) -> Result<Scenario> {
    let params = &file.parameters;
    if params.names.len() != params.values.len() {
        return Err(Error::Parse(format!(
            "{} parameter names but {} values",
            params.names.len(),
            params.values.len()
        )));
    }
    let np = params.names.len();
    let mut states: Option<Vec<String>> = None;
    let mut models = Vec::with_capacity(3);
    for (label, topo) in [("pre", &file.pre), ("fault", &file.fault), ("post", &file.post)] {
        let (model_states, model) = match topo {
            Topology::Smib {
                coupling,
                damping,
                mechanical_power,
                inertia,
            } => {
                let field = SmibField {
                    coupling: *coupling,
                    damping: *damping,
                    pm_index: index_of(&params.names, mechanical_power, "parameter")?,
                    inertia_index: index_of(&params.names, inertia, "parameter")?,
                    n_params: np,
                };
                let names = vec!["delta".to_string(), "omega".to_string()];
                let model = ParametricModel::new(label, names.clone(), Arc::new(field));
                (names, model)
            }
            Topology::Classical {
                conductance,
                susceptance,
            } => {
                let mt = file.machines.as_ref().ok_or_else(|| {
                    Error::Parse("classical topology needs a [machines] table".into())
                })?;
                let m = mt.inertia.len();
                let indices: Vec<usize> = mt
                    .mechanical_power
                    .iter()
                    .map(|n| index_of(&params.names, n, "parameter"))
                    .collect::<Result<_>>()?;
                // the field expects Pm_1..Pm_m as the leading parameters
                if indices != (0..m).collect::<Vec<_>>() || np < m {
                    return Err(Error::Parse(
                        "machine mechanical powers must be the leading parameters, in order".into(),
                    ));
                }
                if mt.emf.len() != m || mt.mechanical_power.len() != m {
                    return Err(Error::Parse("machine table lengths differ".into()));
                }
                let net = Network {
                    conductance: matrix(conductance, "conductance")?,
                    susceptance: matrix(susceptance, "susceptance")?,
                };
                if net.conductance.nrows() != m || net.susceptance.nrows() != m {
                    return Err(Error::Parse(format!("{label} admittance must be {m}x{m}")));
                }
                if m < 2 || mt.inertia.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Parse("need two or more machines with positive inertia".into()));
                }
                let model = machine_model(label, &mt.inertia, &mt.emf, mt.damping_ratio, net, np);
                (machine_states(m), model)
            }
        };
        match &states {
            None => states = Some(model_states),
            Some(s) if *s != model_states => {
                return Err(Error::Parse("topologies have different state vectors".into()))
            }
            _ => {}
        }
        models.push(model);
    }
    let states = states.unwrap_or_default();
    let to_set = |entries: &[ConstraintEntry]| -> Result<ConstraintSet> {
        entries
            .iter()
            .map(|e| {
                let mut a = vec![0.0; states.len()];
                for (k, v) in &e.state {
                    a[index_of(&states, k, "state")?] = *v;
                }
                let mut b = vec![0.0; np];
                for (k, v) in &e.param {
                    b[index_of(&params.names, k, "parameter")?] = *v;
                }
                Ok(Constraint::new(e.name.clone(), e.offset, a, b))
            })
            .collect::<Result<Vec<_>>>()
            .map(ConstraintSet::new)
    };
    let h_fault = to_set(&file.constraints.fault)?;
    let h_post = to_set(&file.constraints.post)?;
    let positive = params
        .positive
        .iter()
        .map(|n| index_of(&params.names, n, "parameter"))
        .collect::<Result<Vec<_>>>()?;
    let post = models.pop().unwrap();
    let fault = models.pop().unwrap();
    let pre = models.pop().unwrap();
    let mut builder = Scenario::builder(file.name)
        .models(pre, fault, post)
        .constraints(h_fault, h_post)
        .parameters(params.names.clone(), DVector::from_vec(params.values.clone()))
        .positive_params(positive);
    if let Some(t) = file.t_max {
        builder = builder.t_max(t);
    }
    if let Some(g) = file.sep_guess {
        builder = builder.sep_guess(DVector::from_vec(g));
    }
    builder.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{smib_model, SmibParams};

    const SMIB: &str = r#"
name = "smib"
t_max = 30.0
sep_guess = [0.6435011087932844, 0.0]

[parameters]
names = ["Pm", "M", "dmax", "wmax"]
values = [0.6, 0.25, 2.4434, 1.0]
positive = ["M", "dmax", "wmax"]

[pre]
type = "smib"
coupling = 1.0
damping = 0.5
mechanical_power = "Pm"
inertia = "M"

[fault]
type = "smib"
coupling = 0.0
damping = 0.5
mechanical_power = "Pm"
inertia = "M"

[post]
type = "smib"
coupling = 1.0
damping = 0.5
mechanical_power = "Pm"
inertia = "M"

[[constraints.fault]]
name = "dmax - delta"
state = { delta = -1.0 }
param = { dmax = 1.0 }

[[constraints.fault]]
name = "wmax - omega"
state = { omega = -1.0 }
param = { wmax = 1.0 }

[[constraints.post]]
name = "dmax - delta"
state = { delta = -1.0 }
param = { dmax = 1.0 }

[[constraints.post]]
name = "wmax - omega"
state = { omega = -1.0 }
param = { wmax = 1.0 }
"#;

    #[test]
    fn smib_file_matches_builder() {
        let a = parse_scenario(SMIB).unwrap();
        let b = smib_model(&SmibParams::default()).unwrap();
        assert_eq!(a.p0, b.p0);
        assert_eq!(a.h_post, b.h_post);
        assert_eq!(a.h_fault, b.h_fault);
        assert_eq!(a.positive_params, b.positive_params);
        let x = DVector::from_vec(vec![1.1, -0.3]);
        for (ma, mb) in [(&a.pre, &b.pre), (&a.fault, &b.fault), (&a.post, &b.post)] {
            assert_eq!(ma.f(&x, &a.p0), mb.f(&x, &b.p0));
            assert_eq!(ma.jac_p(&x, &a.p0), mb.jac_p(&x, &b.p0));
        }
    }

    #[test]
    fn unknown_names_are_parse_errors() {
        let bad = SMIB.replace("param = { wmax = 1.0 }", "param = { wmx = 1.0 }");
        assert!(matches!(parse_scenario(&bad), Err(Error::Parse(_))));
        let bad = SMIB.replace("t_max = 30.0", "t_max = 30.0\nfoo = 1");
        assert!(matches!(parse_scenario(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn missing_file_is_not_found() {
        let r = load_scenario("/nonexistent/scenario.toml");
        assert!(matches!(r, Err(Error::ScenarioNotFound(_))));
    }
}
