//! Population state, reward, transition records and the experience replay.

use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::indicators::{hypervolume_2d, hypervolume_mc, spacing};
use crate::model::Population;
use crate::operators::OperatorId;

/// Floor applied to the objective-spread denominator of `div`.
pub const SPREAD_FLOOR: f64 = 1e-12;
/// Cap on `div`; equals `1 / SPREAD_FLOOR`.
pub const DIV_CAP: f64 = 1e12;

/// Default maximum replay size.
pub const DEFAULT_MAX_REPLAY: usize = 1000;
/// Default replay size required before the first training session.
pub const DEFAULT_REQUIRED_REPLAY: usize = 50;

/// Convergence, feasibility and diversity of a population. Smaller is better
/// in every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    /// Average sum of raw objective values.
    pub con: f64,
    /// Average constraint violation.
    pub fea: f64,
    /// Inverse of the summed objective ranges.
    pub div: f64,
}

impl PopulationState {
    pub fn new(con: f64, fea: f64, div: f64) -> Self {
        Self { con, fea, div }
    }

    /// `con + fea + div`, summed left to right.
    pub fn total(&self) -> f64 {
        self.con + self.fea + self.div
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.con, self.fea, self.div]
    }
}

/// Computes the `(con, fea, div)` state from raw objectives and violations.
pub fn assess_state(pop: &Population) -> Result<PopulationState> {
    let first = pop.members.first().ok_or(Error::EmptyPopulation)?;
    let m = first.f.len();
    let n = pop.len() as f64;
    let mut lo = first.f.clone();
    let mut hi = first.f.clone();
    let mut objective_sum = 0.0;
    let mut violation_sum = 0.0;
    for s in &pop.members {
        objective_sum += s.f.iter().sum::<f64>();
        violation_sum += s.cv;
        for j in 0..m {
            lo[j] = lo[j].min(s.f[j]);
            hi[j] = hi[j].max(s.f[j]);
        }
    }
    let spread: f64 = hi.iter().zip(&lo).map(|(h, l)| h - l).sum();
    let div = (1.0 / spread.max(SPREAD_FLOOR)).min(DIV_CAP);
    Ok(PopulationState {
        con: objective_sum / n,
        fea: violation_sum / n,
        div,
    })
}

/// Indicator-based state: `con = 1 - HV / prod(ref_point)`, `fea` as in
/// [`assess_state`], `div = Spacing`.
///
/// Objectives are assumed nonnegative so that the box from the origin to
/// `ref_point` bounds the hypervolume.
pub fn indicator_state(pop: &Population, ref_point: &[f64]) -> Result<PopulationState> {
    if pop.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let objectives = pop.objectives();
    let hv = if ref_point.len() == 2 {
        hypervolume_2d(&objectives, ref_point)
    } else {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        hypervolume_mc(&objectives, ref_point, 10_000, &mut rng)
    };
    let box_volume: f64 = ref_point.iter().product();
    let fea = pop.iter().map(|s| s.cv).sum::<f64>() / pop.len() as f64;
    Ok(PopulationState {
        con: 1.0 - hv / box_volume,
        fea,
        div: spacing(&objectives),
    })
}

/// Reward: how much the state sum decreased from `s` to `s_next`.
pub fn compute_reward(s: &PopulationState, s_next: &PopulationState) -> f64 {
    (s.con + s.fea + s.div) - (s_next.con + s_next.fea + s_next.div)
}

/// One transition `(s, op, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub s: PopulationState,
    pub op: OperatorId,
    pub reward: f64,
    pub s_next: PopulationState,
}

impl Record {
    /// Builds the record, computing the reward from the two states.
    pub fn new(s: PopulationState, op: OperatorId, s_next: PopulationState) -> Self {
        Self {
            s,
            op,
            reward: compute_reward(&s, &s_next),
            s_next,
        }
    }

    /// The eight columns `(con, fea, div, op, r, con', fea', div')`.
    pub fn columns(&self) -> [f64; 8] {
        [
            self.s.con,
            self.s.fea,
            self.s.div,
            self.op.index() as f64,
            self.reward,
            self.s_next.con,
            self.s_next.fea,
            self.s_next.div,
        ]
    }
}

/// Bounded FIFO queue of records.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperienceReplay {
    queue: VecDeque<Record>,
    max_size: usize,
    required_size: usize,
}

impl ExperienceReplay {
    pub fn new(max_size: usize, required_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::InvalidConfig(
                "replay maximum size must be positive".into(),
            ));
        }
        Ok(Self {
            queue: VecDeque::with_capacity(max_size.min(1 << 16)),
            max_size,
            required_size,
        })
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn max_size(&self) -> usize {
        self.max_size
    }

    pub fn required_size(&self) -> usize {
        self.required_size
    }

    /// Whether enough records exist to build the network.
    pub fn is_ready(&self) -> bool {
        self.queue.len() >= self.required_size
    }

    /// Appends `record`, evicting the oldest one when full.
    pub fn push(&mut self, record: Record) {
        self.queue.push_back(record);
        while self.queue.len() > self.max_size {
            self.queue.pop_front();
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Record> {
        self.queue.iter()
    }

    /// Draws `count` records uniformly without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Record>> {
        if count > self.queue.len() {
            return Err(Error::InsufficientRecords {
                requested: count,
                available: self.queue.len(),
            });
        }
        Ok(index::sample(rng, self.queue.len(), count)
            .into_iter()
            .map(|i| self.queue[i])
            .collect())
    }
}

/// Appends a record to the replay.
pub fn push_record(ep: &mut ExperienceReplay, record: Record) {
    ep.push(record);
}

/// Samples the training set for one network session.
pub fn sample_training<R: Rng + ?Sized>(
    ep: &ExperienceReplay,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Record>> {
    ep.sample(count, rng)
}
