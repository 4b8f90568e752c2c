//! Candidate variation operators: GA (SBX followed by polynomial mutation)
//! and DE (binomial differential variation followed by polynomial mutation).

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{ProblemSpec, Solution};

/// One action of the operator-selection agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorId {
    Ga,
    De,
}

impl OperatorId {
    /// The action set, ordered by index.
    pub const ALL: [OperatorId; 2] = [OperatorId::Ga, OperatorId::De];

    /// One-based index in the action set.
    pub fn index(self) -> usize {
        match self {
            OperatorId::Ga => 1,
            OperatorId::De => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.index() == index)
    }

    pub fn label(self) -> &'static str {
        match self {
            OperatorId::Ga => "GA",
            OperatorId::De => "DE",
        }
    }

    /// Scalar network encoding `(index - 1) / (k - 1)`.
    pub fn encoding(self) -> f64 {
        (self.index() - 1) as f64 / (Self::ALL.len() - 1) as f64
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ga" => Ok(OperatorId::Ga),
            "de" => Ok(OperatorId::De),
            other => Err(Error::InvalidConfig(format!("unknown operator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorParams {
    /// Crossover probability per parent pair.
    pub pc: f64,
    /// SBX distribution index.
    pub eta_c: f64,
    /// Per-gene mutation probability.
    pub pm: f64,
    /// Polynomial mutation distribution index.
    pub eta_m: f64,
    /// DE scale factor.
    pub f: f64,
    /// DE crossover rate.
    pub cr: f64,
}

impl OperatorParams {
    /// Standard settings for an `n`-variable problem: `pc = 1`, `eta_c = 20`,
    /// `pm = 1/n`, `eta_m = 20`, `F = 0.5`, `CR = 1`.
    pub fn for_dimension(n: usize) -> Self {
        Self {
            pc: 1.0,
            eta_c: 20.0,
            pm: 1.0 / n.max(1) as f64,
            eta_m: 20.0,
            f: 0.5,
            cr: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("pc", self.pc), ("pm", self.pm), ("CR", self.cr)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.eta_c > 0.0 && self.eta_m > 0.0) {
            return Err(Error::InvalidConfig(
                "distribution indices must be positive".into(),
            ));
        }
        if !self.f.is_finite() {
            return Err(Error::InvalidConfig("F must be finite".into()));
        }
        Ok(())
    }
}

/// Projects every gene onto its `[lower, upper]` interval.
pub fn clamp_to_bounds(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Simulated binary crossover with the spread-factor formulation.
///
/// With probability `1 - pc` the pair is copied unchanged; otherwise each
/// gene is recombined with probability 1/2. Children are clamped to bounds.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    params: &OperatorParams,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(p1.len(), p2.len(), "parents must have the same length");
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if !rng.gen_bool(params.pc) {
        return (c1, c2);
    }
    let exponent = 1.0 / (params.eta_c + 1.0);
    for j in 0..p1.len() {
        let u: f64 = rng.gen();
        let beta = if u <= 0.5 {
            (2.0 * u).powf(exponent)
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(exponent)
        };
        if !rng.gen_bool(0.5) {
            continue;
        }
        let mean = 0.5 * (p1[j] + p2[j]);
        let half_spread = 0.5 * beta * (p1[j] - p2[j]);
        c1[j] = mean + half_spread;
        c2[j] = mean - half_spread;
    }
    clamp_to_bounds(&mut c1, bounds);
    clamp_to_bounds(&mut c2, bounds);
    (c1, c2)
}

/// Bounded polynomial mutation; each gene mutates with probability `pm`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &[f64],
    params: &OperatorParams,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Vec<f64> {
    let mut y = x.to_vec();
    let power = params.eta_m + 1.0;
    for (v, &(lo, hi)) in y.iter_mut().zip(bounds) {
        if !rng.gen_bool(params.pm) {
            continue;
        }
        let width = hi - lo;
        let delta1 = (*v - lo) / width;
        let delta2 = (hi - *v) / width;
        let u: f64 = rng.gen();
        let delta_q = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - delta1).powf(power);
            val.powf(1.0 / power) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - delta2).powf(power);
            1.0 - val.powf(1.0 / power)
        };
        *v = (*v + delta_q * width).clamp(lo, hi);
    }
    y
}

/// Binomial DE variation around `parent` with difference vector `a - b`,
/// followed by polynomial mutation and clamping.
pub fn de_variation<R: Rng + ?Sized>(
    parent: &[f64],
    a: &[f64],
    b: &[f64],
    params: &OperatorParams,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Vec<f64> {
    let trial = de_trial(parent, a, b, params, rng);
    let mut child = polynomial_mutation(&trial, params, bounds, rng);
    clamp_to_bounds(&mut child, bounds);
    child
}

/// The pre-mutation DE vector. At least one gene always takes the perturbed value.
fn de_trial<R: Rng + ?Sized>(
    parent: &[f64],
    a: &[f64],
    b: &[f64],
    params: &OperatorParams,
    rng: &mut R,
) -> Vec<f64> {
    assert!(
        parent.len() == a.len() && a.len() == b.len(),
        "DE vectors must have the same length"
    );
    let forced = rng.gen_range(0..parent.len());
    parent
        .iter()
        .zip(a.iter().zip(b))
        .enumerate()
        .map(|(j, (&p, (&aj, &bj)))| {
            if j == forced || rng.gen_bool(params.cr) {
                p + params.f * (aj - bj)
            } else {
                p
            }
        })
        .collect()
}

/// Produces `pool.len()` children from the mating pool with operator `op`.
///
/// GA recombines consecutive pairs (an odd tail pairs with the first member)
/// and mutates each child. DE uses every pool member as a parent with two
/// distinct other members as the difference pair.
pub fn generate_offspring<R: Rng + ?Sized>(
    op: OperatorId,
    pool: &[Solution],
    spec: &ProblemSpec,
    params: &OperatorParams,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let bounds = spec.bounds();
    let size = pool.len();
    match op {
        OperatorId::Ga => {
            if size < 2 {
                return Err(Error::PoolTooSmall {
                    operator: "GA",
                    required: 2,
                    actual: size,
                });
            }
            let mut children = Vec::with_capacity(size + 1);
            for i in (0..size).step_by(2) {
                let mate = if i + 1 < size { i + 1 } else { 0 };
                let (c1, c2) = sbx_crossover(&pool[i].x, &pool[mate].x, params, bounds, rng);
                children.push(polynomial_mutation(&c1, params, bounds, rng));
                children.push(polynomial_mutation(&c2, params, bounds, rng));
            }
            children.truncate(size);
            Ok(children)
        }
        OperatorId::De => {
            if size < 3 {
                return Err(Error::PoolTooSmall {
                    operator: "DE",
                    required: 3,
                    actual: size,
                });
            }
            let mut children = Vec::with_capacity(size);
            for (i, parent) in pool.iter().enumerate() {
                // two distinct indices among the other size - 1 members
                let picks = index::sample(rng, size - 1, 2);
                let skip = |k: usize| if k >= i { k + 1 } else { k };
                let a = &pool[skip(picks.index(0))].x;
                let b = &pool[skip(picks.index(1))].x;
                children.push(de_variation(&parent.x, a, b, params, bounds, rng));
            }
            Ok(children)
        }
    }
}
