//! Problem definitions, evaluated solutions and constraint violation.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::problems::BuiltinProblem;

/// Default tolerance used to relax equality constraints `h(x) = 0` into
/// `|h(x)| - sigma <= 0`.
pub const DEFAULT_SIGMA: f64 = 1e-4;

/// Raw output of a problem's evaluator for one decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEvaluation {
    pub objectives: Vec<f64>,
    /// Inequality constraint values `g_1..g_p`, satisfied when `<= 0`.
    pub inequality: Vec<f64>,
    /// Equality constraint values `h_{p+1}..h_q`, satisfied when `== 0`.
    pub equality: Vec<f64>,
}

pub type Evaluator = Arc<dyn Fn(&[f64]) -> RawEvaluation + Send + Sync>;

/// A constrained multi-objective minimization problem.
#[derive(Clone)]
pub struct ProblemSpec {
    name: String,
    n_var: usize,
    n_obj: usize,
    n_ineq: usize,
    n_constraints: usize,
    bounds: Vec<(f64, f64)>,
    sigma: f64,
    evaluator: Evaluator,
    pub(crate) builtin: Option<BuiltinProblem>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("n", &self.n_var)
            .field("m", &self.n_obj)
            .field("p", &self.n_ineq)
            .field("q", &self.n_constraints)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    /// Builds a problem with `p` inequality and `q - p` equality constraints.
    pub fn new(
        name: impl Into<String>,
        n_obj: usize,
        n_ineq: usize,
        n_constraints: usize,
        bounds: Vec<(f64, f64)>,
        evaluator: Evaluator,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            n_var: bounds.len(),
            n_obj,
            n_ineq,
            n_constraints,
            bounds,
            sigma: DEFAULT_SIGMA,
            evaluator,
            builtin: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n_var < 1 {
            return Err(Error::InvalidProblem("n must be at least 1".into()));
        }
        if self.n_obj < 2 {
            return Err(Error::InvalidProblem("m must be at least 2".into()));
        }
        if self.n_ineq > self.n_constraints {
            return Err(Error::InvalidProblem("q must be >= p".into()));
        }
        if let Some(i) = self.bounds.iter().position(|&(lo, hi)| lo.is_nan() || hi.is_nan() || lo >= hi) {
            return Err(Error::InvalidProblem(format!(
                "lower bound must be below upper bound for variable {i}"
            )));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::InvalidProblem("sigma must be positive".into()));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Decision dimension `n`.
    pub fn n_var(&self) -> usize {
        self.n_var
    }

    /// Objective dimension `m`.
    pub fn n_obj(&self) -> usize {
        self.n_obj
    }

    /// Number of inequality constraints `p`.
    pub fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    /// Total number of constraints `q`.
    pub fn n_constraints(&self) -> usize {
        self.n_constraints
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub(crate) fn raw(&self, x: &[f64]) -> RawEvaluation {
        (self.evaluator)(x)
    }
}

/// An evaluated decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    /// Per-constraint violations, inequalities first.
    pub cv_per: Vec<f64>,
    /// Total violation, the sum of `cv_per`.
    pub cv: f64,
}

impl Solution {
    pub fn is_feasible(&self) -> bool {
        is_feasible(self)
    }
}

/// Ordered set of solutions with a steady-state capacity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub members: Vec<Solution>,
    pub capacity: usize,
}

impl Population {
    pub fn new(members: Vec<Solution>, capacity: usize) -> Self {
        Self { members, capacity }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Solution> {
        self.members.iter()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.members.iter().map(|s| s.f.clone()).collect()
    }

    /// Objective vectors of the feasible members only.
    pub fn feasible_objectives(&self) -> Vec<Vec<f64>> {
        self.members
            .iter()
            .filter(|s| s.is_feasible())
            .map(|s| s.f.clone())
            .collect()
    }
}

/// Per-constraint violations and their total.
///
/// Inequalities contribute `max(0, g)`, equalities `max(0, |h| - sigma)`.
pub fn constraint_violation(spec: &ProblemSpec, g: &[f64], h: &[f64]) -> Result<(Vec<f64>, f64)> {
    let expected_h = spec.n_constraints - spec.n_ineq;
    if g.len() != spec.n_ineq || h.len() != expected_h {
        return Err(Error::InvalidProblem(format!(
            "evaluator returned {} inequality / {} equality values, expected {} / {}",
            g.len(),
            h.len(),
            spec.n_ineq,
            expected_h
        )));
    }
    let mut per = Vec::with_capacity(g.len() + h.len());
    for &gj in g {
        if !gj.is_finite() {
            return Err(non_finite("inequality constraint", gj));
        }
        per.push(gj.max(0.0));
    }
    for &hj in h {
        if !hj.is_finite() {
            return Err(non_finite("equality constraint", hj));
        }
        per.push((hj.abs() - spec.sigma).max(0.0));
    }
    let total = per.iter().sum();
    Ok((per, total))
}

fn non_finite(what: &str, value: f64) -> Error {
    Error::Evaluation {
        x: Vec::new(),
        reason: format!("non-finite {what} value {value}"),
    }
}

/// Evaluates `x`, which must already lie within the problem bounds.
pub fn evaluate(spec: &ProblemSpec, x: &[f64]) -> Result<Solution> {
    if x.len() != spec.n_var {
        return Err(Error::Evaluation {
            x: x.to_vec(),
            reason: format!("expected {} variables, got {}", spec.n_var, x.len()),
        });
    }
    for (index, (&value, &(lower, upper))) in x.iter().zip(&spec.bounds).enumerate() {
        if !(value >= lower && value <= upper) {
            return Err(Error::OutOfBounds {
                index,
                value,
                lower,
                upper,
            });
        }
    }
    let raw = spec.raw(x);
    if raw.objectives.len() != spec.n_obj {
        return Err(Error::Evaluation {
            x: x.to_vec(),
            reason: format!(
                "expected {} objectives, got {}",
                spec.n_obj,
                raw.objectives.len()
            ),
        });
    }
    if let Some(v) = raw.objectives.iter().find(|v| !v.is_finite()) {
        return Err(Error::Evaluation {
            x: x.to_vec(),
            reason: format!("non-finite objective value {v}"),
        });
    }
    let (cv_per, cv) = constraint_violation(spec, &raw.inequality, &raw.equality).map_err(
        |e| match e {
            Error::Evaluation { reason, .. } => Error::Evaluation {
                x: x.to_vec(),
                reason,
            },
            other => other,
        },
    )?;
    Ok(Solution {
        x: x.to_vec(),
        f: raw.objectives,
        cv_per,
        cv,
    })
}

/// A solution is feasible only when its total violation is exactly zero.
pub fn is_feasible(s: &Solution) -> bool {
    s.cv == 0.0
}
