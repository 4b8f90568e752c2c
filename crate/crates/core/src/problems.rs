//! Built-in synthetic suite with analytically known constrained Pareto fronts.
//!
//! Every problem uses `x in [0, 1]^n`, two objectives
//! `f1 = x1 (1 + g)`, `f2 = (1 - x1)(1 + g)` and the distance term
//! `g = x2 + ... + xn`. Only `x1` and `g` influence objectives and
//! constraints, which lets the grid oracle enumerate a two-dimensional
//! reduced space when the full grid is too large.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{evaluate, ProblemSpec, RawEvaluation};

/// Upper limit on the number of grid points evaluated by [`grid_oracle_front`].
pub const GRID_BUDGET: u128 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinProblem {
    /// Edge-cut: `f1 >= 0.2`.
    Cp1,
    /// Disconnected: `(f1 - 0.5)^2 >= 0.01`.
    Cp2,
    /// CP1 plus the equality `x2 = x3`.
    Cp3,
    /// Boundary front: `f1 + f2 >= 1.5`.
    Cp4,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 4] = [Self::Cp1, Self::Cp2, Self::Cp3, Self::Cp4];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cp1 => "CP1",
            Self::Cp2 => "CP2",
            Self::Cp3 => "CP3",
            Self::Cp4 => "CP4",
        }
    }

    fn min_dim(self) -> usize {
        match self {
            Self::Cp3 => 3,
            _ => 2,
        }
    }

    /// Constrained front as a map from `t in [0, 1]` to objective space.
    fn front_point(self, t: f64) -> [f64; 2] {
        match self {
            Self::Cp1 | Self::Cp3 => {
                let f1 = 0.2 + 0.8 * t;
                [f1, 1.0 - f1]
            }
            Self::Cp2 => {
                // [0, 0.4] and [0.6, 1] have equal length; t sweeps both.
                let f1 = if t <= 0.5 { 0.8 * t } else { 0.6 + 0.8 * (t - 0.5) };
                [f1, 1.0 - f1]
            }
            Self::Cp4 => [1.5 * t, 1.5 * (1.0 - t)],
        }
    }
}

impl fmt::Display for BuiltinProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// Where a reference front came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontSource {
    Analytic,
    GridOracle,
}

/// A set of mutually nondominated, feasible objective vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceFront {
    pub points: Vec<Vec<f64>>,
    pub source: FrontSource,
}

impl ReferenceFront {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Component-wise minimum and maximum over the front.
    pub fn ideal_and_nadir(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let first = self.points.first()?;
        let mut ideal = first.clone();
        let mut nadir = first.clone();
        for p in &self.points[1..] {
            for (j, &v) in p.iter().enumerate() {
                ideal[j] = ideal[j].min(v);
                nadir[j] = nadir[j].max(v);
            }
        }
        Some((ideal, nadir))
    }
}

fn shape(x: &[f64]) -> (f64, f64, f64) {
    let g: f64 = x[1..].iter().sum();
    let f1 = x[0] * (1.0 + g);
    let f2 = (1.0 - x[0]) * (1.0 + g);
    (f1, f2, g)
}

/// Builds one of the built-in problems `CP1`..`CP4` with `n` variables.
pub fn make_problem(name: &str, n: usize) -> Result<ProblemSpec> {
    let kind: BuiltinProblem = name.parse()?;
    if n < kind.min_dim() {
        return Err(Error::InvalidProblem(format!(
            "{kind} needs at least {} variables, got {n}",
            kind.min_dim()
        )));
    }
    let bounds = vec![(0.0, 1.0); n];
    let (p, q) = match kind {
        BuiltinProblem::Cp3 => (1, 2),
        _ => (1, 1),
    };
    let evaluator = Arc::new(move |x: &[f64]| {
        let (f1, f2, g) = shape(x);
        let (inequality, equality) = match kind {
            BuiltinProblem::Cp1 => (vec![0.2 - f1], vec![]),
            // 0.01 - (f1 - 0.5)^2 in factored form, exact at the boundary points
            BuiltinProblem::Cp2 => (vec![(0.6 - f1) * (f1 - 0.4)], vec![]),
            BuiltinProblem::Cp3 => (vec![0.2 - f1], vec![x[1] - x[2]]),
            // 1.5 - (f1 + f2) with f1 + f2 = 1 + g; the sum form misses the boundary by an ulp
            BuiltinProblem::Cp4 => (vec![0.5 - g], vec![]),
        };
        RawEvaluation {
            objectives: vec![f1, f2],
            inequality,
            equality,
        }
    });
    let mut spec = ProblemSpec::new(kind.name(), 2, p, q, bounds, evaluator)?;
    spec.builtin = Some(kind);
    Ok(spec)
}

/// Samples `resolution` points uniformly in the front parameter.
pub fn analytic_front(spec: &ProblemSpec, resolution: usize) -> Result<ReferenceFront> {
    let kind = spec
        .builtin
        .ok_or_else(|| Error::NoAnalyticFront(spec.name().to_string()))?;
    if resolution < 2 {
        return Err(Error::InvalidConfig(
            "front resolution must be at least 2".into(),
        ));
    }
    let steps = (resolution - 1) as f64;
    let points = (0..resolution)
        .map(|i| kind.front_point(i as f64 / steps).to_vec())
        .collect();
    Ok(ReferenceFront {
        points,
        source: FrontSource::Analytic,
    })
}

/// Brute-force reference front: enumerate a grid, keep feasible points and
/// filter to the nondominated set.
///
/// The full `points_per_dim^n` grid is used when it fits [`GRID_BUDGET`].
/// Otherwise built-in problems fall back to a grid over `(x1, g)` with the
/// distance term spread evenly over `x2..xn`.
pub fn grid_oracle_front(spec: &ProblemSpec, points_per_dim: usize) -> Result<ReferenceFront> {
    if points_per_dim < 2 {
        return Err(Error::InvalidConfig(
            "points per dimension must be at least 2".into(),
        ));
    }
    let n = spec.n_var();
    let full = (points_per_dim as u128).checked_pow(n as u32);
    let candidates = match full {
        Some(count) if count <= GRID_BUDGET => full_grid(spec, points_per_dim)?,
        _ if spec.builtin.is_some() => {
            let count = (points_per_dim as u128).pow(2);
            if count > GRID_BUDGET {
                return Err(Error::BudgetExceeded {
                    requested: count,
                    budget: GRID_BUDGET,
                });
            }
            reduced_grid(spec, points_per_dim)?
        }
        _ => {
            return Err(Error::BudgetExceeded {
                requested: full.unwrap_or(u128::MAX),
                budget: GRID_BUDGET,
            })
        }
    };
    Ok(ReferenceFront {
        points: nondominated_filter(candidates),
        source: FrontSource::GridOracle,
    })
}

fn grid_value(lo: f64, hi: f64, i: usize, points: usize) -> f64 {
    if i + 1 == points {
        hi
    } else {
        lo + (hi - lo) * i as f64 / (points - 1) as f64
    }
}

fn full_grid(spec: &ProblemSpec, points: usize) -> Result<Vec<Vec<f64>>> {
    let bounds = spec.bounds();
    let mut index = vec![0usize; bounds.len()];
    let mut x = vec![0.0; bounds.len()];
    let mut feasible = Vec::new();
    loop {
        for (d, &i) in index.iter().enumerate() {
            x[d] = grid_value(bounds[d].0, bounds[d].1, i, points);
        }
        let s = evaluate(spec, &x)?;
        if s.is_feasible() {
            feasible.push(s.f);
        }
        // odometer increment
        let mut d = 0;
        loop {
            if d == index.len() {
                return Ok(feasible);
            }
            index[d] += 1;
            if index[d] < points {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
}

fn reduced_grid(spec: &ProblemSpec, points: usize) -> Result<Vec<Vec<f64>>> {
    let n = spec.n_var();
    let tail = (n - 1) as f64;
    let mut feasible = Vec::new();
    let mut x = vec![0.0; n];
    for i in 0..points {
        x[0] = grid_value(0.0, 1.0, i, points);
        for k in 0..points {
            let g = grid_value(0.0, tail, k, points);
            let each = (g / tail).min(1.0);
            for v in &mut x[1..n - 1] {
                *v = each;
            }
            // last coordinate takes the remainder so the sum hits g exactly
            let partial: f64 = x[1..n - 1].iter().sum();
            x[n - 1] = (g - partial).clamp(0.0, 1.0);
            let s = evaluate(spec, &x)?;
            if s.is_feasible() {
                feasible.push(s.f);
            }
        }
    }
    Ok(feasible)
}

/// Weak Pareto dominance for minimization: `a` is no worse everywhere and
/// strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Nondominated, duplicate-free subset of `points`, sorted lexicographically.
pub fn nondominated_filter(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    points.dedup();
    if points.first().is_some_and(|p| p.len() == 2) {
        // lexicographic sweep: keep points whose f2 improves on every earlier one
        let mut best_f2 = f64::INFINITY;
        points.retain(|p| {
            if p[1] < best_f2 {
                best_f2 = p[1];
                true
            } else {
                false
            }
        });
        return points;
    }
    let keep: Vec<bool> = points
        .iter()
        .map(|p| !points.iter().any(|q| dominates(q, p)))
        .collect();
    points
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}
