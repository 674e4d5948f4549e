use nalgebra::DVector;

use super::{find_equilibrium, ConstraintSet, Equilibrium, EquilibriumKind, ParametricModel};
use crate::error::{Error, Result};
use crate::models::BOUNDARY_TOL;

/// Pre-fault, fault-on and post-fault models of one fault, their limits and
/// the base parameter vector.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub pre: ParametricModel,
    pub fault: ParametricModel,
    pub post: ParametricModel,
    pub h_fault: ConstraintSet,
    pub h_post: ConstraintSet,
    pub p0: DVector<f64>,
    pub param_names: Vec<String>,
    /// Post-fault simulation horizon, seconds.
    pub t_max: f64,
    /// Newton starting point for the pre-fault SEP.
    pub sep_guess: DVector<f64>,
    /// Indices of parameters that must stay strictly positive.
    pub positive_params: Vec<usize>,
}

pub struct ScenarioBuilder {
    name: String,
    models: Option<(ParametricModel, ParametricModel, ParametricModel)>,
    constraints: (ConstraintSet, ConstraintSet),
    params: Option<(Vec<String>, DVector<f64>)>,
    positive: Vec<usize>,
    sep_guess: Option<DVector<f64>>,
    t_max: f64,
}

impl ScenarioBuilder {
    pub fn models(
        mut self,
        pre: ParametricModel,
        fault: ParametricModel,
        post: ParametricModel,
    ) -> Self {
        self.models = Some((pre, fault, post));
        self
    }

    pub fn constraints(mut self, fault: ConstraintSet, post: ConstraintSet) -> Self {
        self.constraints = (fault, post);
        self
    }

    pub fn parameters(mut self, names: Vec<String>, values: DVector<f64>) -> Self {
        self.params = Some((names, values));
        self
    }

    pub fn positive_params(mut self, idx: Vec<usize>) -> Self {
        self.positive = idx;
        self
    }

    pub fn sep_guess(mut self, guess: DVector<f64>) -> Self {
        self.sep_guess = Some(guess);
        self
    }

    pub fn t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn build(self) -> Result<Scenario> {
        let (pre, fault, post) = self
            .models
            .ok_or_else(|| Error::DimensionMismatch("scenario has no models".into()))?;
        let (names, p0) = self
            .params
            .ok_or_else(|| Error::DimensionMismatch("scenario has no parameters".into()))?;
        let n = pre.dim();
        let np = pre.n_params();
        for m in [&fault, &post] {
            if m.dim() != n || m.n_params() != np {
                return Err(Error::DimensionMismatch(format!(
                    "model {} is {}x{}, expected {}x{}",
                    m.name(),
                    m.dim(),
                    m.n_params(),
                    n,
                    np
                )));
            }
        }
        if names.len() != np || p0.len() != np {
            return Err(Error::DimensionMismatch(format!(
                "{} parameter names and {} values for {} model parameters",
                names.len(),
                p0.len(),
                np
            )));
        }
        for c in self
            .constraints
            .0
            .constraints()
            .iter()
            .chain(self.constraints.1.constraints())
        {
            if c.state_coeffs.len() != n || c.param_coeffs.len() != np {
                return Err(Error::DimensionMismatch(format!(
                    "constraint '{}' has {} state and {} parameter coefficients",
                    c.name,
                    c.state_coeffs.len(),
                    c.param_coeffs.len()
                )));
            }
        }
        let sep_guess = self.sep_guess.unwrap_or_else(|| DVector::zeros(n));
        if sep_guess.len() != n {
            return Err(Error::DimensionMismatch("sep guess length".into()));
        }
        if self.positive.iter().any(|&i| i >= np) {
            return Err(Error::DimensionMismatch("positive parameter index".into()));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        let sc = Scenario {
            name: self.name,
            pre,
            fault,
            post,
            h_fault: self.constraints.0,
            h_post: self.constraints.1,
            p0,
            param_names: names,
            t_max: self.t_max,
            sep_guess,
            positive_params: self.positive,
        };
        sc.check_params(&sc.p0)?;
        Ok(sc)
    }
}

impl Scenario {
    pub fn builder(name: impl Into<String>) -> ScenarioBuilder {
        ScenarioBuilder {
            name: name.into(),
            models: None,
            constraints: (ConstraintSet::empty(), ConstraintSet::empty()),
            params: None,
            positive: Vec::new(),
            sep_guess: None,
            t_max: 30.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.post.dim()
    }

    pub fn n_params(&self) -> usize {
        self.p0.len()
    }

    /// Fault-on and post-fault limits with shared members counted once.
    pub fn h_comb(&self) -> ConstraintSet {
        ConstraintSet::combined(&self.h_fault, &self.h_post)
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.param_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown parameter '{name}'")))
    }

    /// Replaces the base value of a named parameter.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let i = self.param_index(name)?;
        let mut p = self.p0.clone();
        p[i] = value;
        self.check_params(&p)?;
        self.p0 = p;
        Ok(())
    }

    /// `p0` with entry `index` replaced.
    pub fn params_with(&self, index: usize, value: f64) -> DVector<f64> {
        let mut p = self.p0.clone();
        p[index] = value;
        p
    }

    pub fn check_params(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.param_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector has {} entries, expected {}",
                p.len(),
                self.param_names.len()
            )));
        }
        if let Some(i) = p.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{} is not finite",
                self.param_names[i]
            )));
        }
        for &i in &self.positive_params {
            if !(p[i] > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{} must be positive, got {}",
                    self.param_names[i], p[i]
                )));
            }
        }
        Ok(())
    }

    /// Pre-fault stable equilibrium at `p`.
    pub fn pre_sep(&self, p: &DVector<f64>) -> Result<Equilibrium> {
        let eq = find_equilibrium(&self.pre, p, &self.sep_guess)?;
        if eq.kind != EquilibriumKind::Sep {
            return Err(Error::ScenarioRejected(format!(
                "pre-fault equilibrium near the guess is {:?}, not a SEP",
                eq.kind
            )));
        }
        Ok(eq)
    }

    /// Post-fault stable equilibrium, Newton-seeded from `guess`.
    pub fn post_sep(&self, p: &DVector<f64>, guess: &DVector<f64>) -> Result<Equilibrium> {
        let eq = find_equilibrium(&self.post, p, guess)?;
        if eq.kind != EquilibriumKind::Sep {
            return Err(Error::ScenarioRejected(format!(
                "post-fault equilibrium near the pre-fault SEP is {:?}, not a SEP",
                eq.kind
            )));
        }
        Ok(eq)
    }

    /// Rejects the scenario if an equilibrium of the post-fault model lies on
    /// the post-fault feasibility boundary.
    ///
    /// Newton is seeded from points on each constraint's zero set: the
    /// projection of the SEP guess plus offsets along every tangent direction.
    pub fn validate_boundary_equilibria(&self, p: &DVector<f64>) -> Result<()> {
        self.check_params(p)?;
        for c in self.h_post.constraints() {
            let a = &c.state_coeffs;
            let a2 = a.norm_squared();
            if a2 == 0.0 {
                continue;
            }
            let base = &self.sep_guess - a * (c.value(&self.sep_guess, p) / a2);
            let tangents = tangent_basis(a);
            let mut seeds = vec![base.clone()];
            for t in &tangents {
                for s in [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0] {
                    seeds.push(&base + t * s);
                }
            }
            for seed in seeds {
                let Ok(eq) = find_equilibrium(&self.post, p, &seed) else {
                    continue;
                };
                let on_boundary = self
                    .h_post
                    .constraints()
                    .iter()
                    .any(|k| k.value(&eq.x, p).abs() <= BOUNDARY_TOL * k.state_coeffs.norm().max(1.0));
                if on_boundary {
                    return Err(Error::ScenarioRejected(format!(
                        "post-fault equilibrium {:?} lies on the feasibility boundary",
                        eq.x.as_slice()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Orthonormal basis of the hyperplane orthogonal to `a`.
fn tangent_basis(a: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = a.len();
    let unit = a / a.norm();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v -= &unit * unit.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
        if basis.len() + 1 == n {
            break;
        }
    }
    basis
}
