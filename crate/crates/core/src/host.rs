//! Host algorithm interface and the built-in constrained-dominance NSGA-II.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{evaluate, Population, ProblemSpec, Solution};
use crate::problems::dominates;

/// The hooks the operator-selection loop drives on a host algorithm.
///
/// The host owns its population(s); the framework only generates offspring.
pub trait HostCmoea: Send {
    fn name(&self) -> &str;

    /// Creates and evaluates the initial population of size `n`.
    fn initialize(&mut self, spec: &ProblemSpec, n: usize, rng: &mut dyn RngCore) -> Result<()>;

    /// Picks `count` parents for variation.
    fn mating_selection(&self, count: usize, rng: &mut dyn RngCore) -> Vec<Solution>;

    /// Merges `offspring` into the population and keeps `n` survivors.
    fn environmental_selection(&mut self, offspring: Vec<Solution>, n: usize);

    /// The population whose state drives operator selection.
    fn reporting_population(&self) -> &Population;
}

/// Outcome of a constrained-dominance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdpOrdering {
    Better,
    Worse,
    Incomparable,
}

/// Constrained-dominance principle: feasible beats infeasible, smaller
/// violation wins among infeasible solutions, Pareto dominance decides
/// among feasible ones.
pub fn cdp_compare(a: &Solution, b: &Solution) -> CdpOrdering {
    match (a.is_feasible(), b.is_feasible()) {
        (true, false) => CdpOrdering::Better,
        (false, true) => CdpOrdering::Worse,
        (false, false) => {
            if a.cv < b.cv {
                CdpOrdering::Better
            } else if a.cv > b.cv {
                CdpOrdering::Worse
            } else {
                CdpOrdering::Incomparable
            }
        }
        (true, true) => {
            if dominates(&a.f, &b.f) {
                CdpOrdering::Better
            } else if dominates(&b.f, &a.f) {
                CdpOrdering::Worse
            } else {
                CdpOrdering::Incomparable
            }
        }
    }
}

/// Fast nondominated sorting under [`cdp_compare`]; returns fronts of indices.
pub fn nondominated_sort(members: &[Solution]) -> Vec<Vec<usize>> {
    let n = members.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            match cdp_compare(&members[i], &members[j]) {
                CdpOrdering::Better => {
                    dominated_by_me[i].push(j);
                    domination_count[j] += 1;
                }
                CdpOrdering::Worse => {
                    dominated_by_me[j].push(i);
                    domination_count[i] += 1;
                }
                CdpOrdering::Incomparable => {}
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each objective vector within one front.
#[allow(clippy::needless_range_loop)]
pub fn crowding_distance(front: &[&[f64]]) -> Vec<f64> {
    let n = front.len();
    if n == 0 {
        return Vec::new();
    }
    let mut distance = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..m {
        order.sort_by(|&a, &b| front[a][j].total_cmp(&front[b][j]).then(a.cmp(&b)));
        let lo = front[order[0]][j];
        let hi = front[order[n - 1]][j];
        distance[order[0]] = f64::INFINITY;
        distance[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for k in 1..n - 1 {
            let i = order[k];
            if distance[i].is_finite() {
                distance[i] += (front[order[k + 1]][j] - front[order[k - 1]][j]) / span;
            }
        }
    }
    distance
}

/// Front rank (0 = best) and crowding distance of every member.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ranking {
    pub rank: Vec<usize>,
    pub crowding: Vec<f64>,
}

pub fn rank_population(members: &[Solution]) -> Ranking {
    let mut ranking = Ranking {
        rank: vec![0; members.len()],
        crowding: vec![0.0; members.len()],
    };
    for (r, front) in nondominated_sort(members).into_iter().enumerate() {
        let objs: Vec<&[f64]> = front.iter().map(|&i| members[i].f.as_slice()).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&objs)) {
            ranking.rank[i] = r;
            ranking.crowding[i] = d;
        }
    }
    ranking
}

/// Keeps `n` members of `pop ∪ offspring`, filling whole fronts first and
/// truncating the last one by descending crowding distance.
pub fn environmental_selection(pop: &[Solution], offspring: &[Solution], n: usize) -> Vec<Solution> {
    let owned: Vec<Solution> = pop.iter().chain(offspring).cloned().collect();
    let mut chosen = Vec::with_capacity(n);
    for front in nondominated_sort(&owned) {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
            if chosen.len() == n {
                break;
            }
            continue;
        }
        let objs: Vec<&[f64]> = front.iter().map(|&i| owned[i].f.as_slice()).collect();
        let crowd = crowding_distance(&objs);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(front[a].cmp(&front[b])));
        let room = n - chosen.len();
        chosen.extend(order.into_iter().take(room).map(|k| front[k]));
        break;
    }
    let mut owned: Vec<Option<Solution>> = owned.into_iter().map(Some).collect();
    chosen
        .into_iter()
        .map(|i| owned[i].take().expect("each index selected once"))
        .collect()
}

/// Binary tournaments on (rank, crowding distance); ties go to the first draw.
pub fn mating_selection<R: Rng + ?Sized>(
    members: &[Solution],
    ranking: &Ranking,
    count: usize,
    rng: &mut R,
) -> Vec<Solution> {
    if members.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0..members.len());
            let b = rng.gen_range(0..members.len());
            members[tournament_winner(ranking, a, b)].clone()
        })
        .collect()
}

fn tournament_winner(ranking: &Ranking, a: usize, b: usize) -> usize {
    use std::cmp::Ordering::*;
    match ranking.rank[a].cmp(&ranking.rank[b]) {
        Less => a,
        Greater => b,
        Equal => {
            if ranking.crowding[b] > ranking.crowding[a] {
                b
            } else {
                a
            }
        }
    }
}

/// NSGA-II with the constrained-dominance principle as its constraint handler.
#[derive(Debug, Clone, Default)]
pub struct Nsga2Host {
    population: Population,
    ranking: Ranking,
}

impl Nsga2Host {
    pub const NAME: &'static str = "cnsga2";

    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the population directly, e.g. for tests.
    pub fn with_population(population: Population) -> Self {
        let ranking = rank_population(&population.members);
        Self {
            population,
            ranking,
        }
    }
}

impl HostCmoea for Nsga2Host {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn initialize(&mut self, spec: &ProblemSpec, n: usize, rng: &mut dyn RngCore) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidConfig("population size must be positive".into()));
        }
        let members = (0..n)
            .map(|_| {
                let x: Vec<f64> = spec
                    .bounds()
                    .iter()
                    .map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>())
                    .collect();
                evaluate(spec, &x)
            })
            .collect::<Result<Vec<_>>>()?;
        *self = Self::with_population(Population::new(members, n));
        Ok(())
    }

    fn mating_selection(&self, count: usize, rng: &mut dyn RngCore) -> Vec<Solution> {
        mating_selection(&self.population.members, &self.ranking, count, rng)
    }

    fn environmental_selection(&mut self, offspring: Vec<Solution>, n: usize) {
        let survivors = environmental_selection(&self.population.members, &offspring, n);
        *self = Self::with_population(Population::new(survivors, n));
    }

    fn reporting_population(&self) -> &Population {
        &self.population
    }
}

/// Looks up a host by its command-line name.
pub fn make_host(name: &str) -> Result<Box<dyn HostCmoea>> {
    match name.trim().to_ascii_lowercase().as_str() {
        Nsga2Host::NAME => Ok(Box::new(Nsga2Host::new())),
        other => Err(Error::InvalidConfig(format!("unknown host `{other}`"))),
    }
}
