//! The operator-selection loop wrapped around a host algorithm, and the
//! epsilon-greedy selection rule.
//!
//! Each generation the loop picks an operator from the current population
//! state, lets the host breed and select with it, measures the new state and
//! stores the transition in the replay. Once the replay holds `rs_ep` records
//! the value network is built, and it is retrained every `update_period`
//! generations from a fresh sample of the replay.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::host::HostCmoea;
use crate::indicators::{igd_plus, normalized_hypervolume};
use crate::model::{evaluate, Population, ProblemSpec};
use crate::operators::{generate_offspring, OperatorId, OperatorParams};
use crate::problems::{analytic_front, ReferenceFront};
use crate::qnet::{init_network, train_session, NormStats, QNetwork, TrainHyper};
use crate::state::{
    assess_state, indicator_state, ExperienceReplay, PopulationState, Record,
    DEFAULT_MAX_REPLAY, DEFAULT_REQUIRED_REPLAY,
};
use crate::RunRng;

/// Default probability of taking the greedy action.
pub const DEFAULT_EPSILON: f64 = 0.9;
/// Default number of generations between network updates.
pub const DEFAULT_UPDATE_PERIOD: usize = 50;
/// Default number of records sampled per training session.
pub const DEFAULT_TRAIN_SIZE: usize = 100;
/// Default number of points sampled on analytic fronts for indicators.
pub const DEFAULT_FRONT_RESOLUTION: usize = 500;

/// How the operator is chosen each generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    /// Learned epsilon-greedy selection.
    Drl,
    /// Uniform random selection every generation.
    Random,
    /// Always the same operator.
    Fixed(OperatorId),
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyMode::Drl => f.write_str("drl"),
            PolicyMode::Random => f.write_str("random"),
            PolicyMode::Fixed(op) => write!(f, "fixed:{}", op.label().to_ascii_lowercase()),
        }
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "drl" => Ok(PolicyMode::Drl),
            "random" => Ok(PolicyMode::Random),
            _ => match s.strip_prefix("fixed:") {
                Some(op) => Ok(PolicyMode::Fixed(op.parse()?)),
                None => Err(Error::InvalidConfig(format!("unknown policy `{s}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionPolicy {
    pub mode: PolicyMode,
    /// Probability of the greedy branch; ignored unless `mode` is `Drl`.
    pub epsilon: f64,
}

impl SelectionPolicy {
    pub fn new(mode: PolicyMode) -> Self {
        Self {
            mode,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// A trained network together with the statistics of its last session.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: QNetwork,
    pub norm: NormStats,
}

impl TrainedModel {
    /// Q-value of every action for the raw state `s`, in action-set order.
    pub fn q_values(&self, s: &PopulationState) -> Vec<f64> {
        let s_norm = self.norm.prediction_state(s);
        OperatorId::ALL
            .iter()
            .map(|op| self.network.forward(&s_norm, op.encoding()))
            .collect()
    }
}

/// Which branch produced a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoiceSource {
    Fixed,
    /// Random policy.
    Uniform,
    /// Learned policy before any network exists.
    Warmup,
    Greedy,
    Explore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Choice {
    pub op: OperatorId,
    pub source: ChoiceSource,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax_action(q_values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &q) in q_values.iter().enumerate().skip(1) {
        if q > q_values[best] {
            best = i;
        }
    }
    best
}

fn uniform_operator<R: Rng + ?Sized>(rng: &mut R) -> OperatorId {
    OperatorId::ALL[rng.gen_range(0..OperatorId::ALL.len())]
}

/// Epsilon-greedy operator selection.
///
/// With a model, a uniform draw `u <= epsilon` takes the argmax over all
/// actions of the network output; otherwise a uniformly random operator is
/// returned. Without a model the learned policy also falls back to uniform.
pub fn select_operator<R: Rng + ?Sized>(
    model: Option<&TrainedModel>,
    s: &PopulationState,
    policy: &SelectionPolicy,
    rng: &mut R,
) -> Choice {
    match policy.mode {
        PolicyMode::Fixed(op) => Choice {
            op,
            source: ChoiceSource::Fixed,
        },
        PolicyMode::Random => Choice {
            op: uniform_operator(rng),
            source: ChoiceSource::Uniform,
        },
        PolicyMode::Drl => match model {
            None => Choice {
                op: uniform_operator(rng),
                source: ChoiceSource::Warmup,
            },
            Some(model) => {
                let u: f64 = rng.gen();
                if u <= policy.epsilon {
                    Choice {
                        op: OperatorId::ALL[argmax_action(&model.q_values(s))],
                        source: ChoiceSource::Greedy,
                    }
                } else {
                    Choice {
                        op: uniform_operator(rng),
                        source: ChoiceSource::Explore,
                    }
                }
            }
        },
    }
}

/// Whether the network is retrained after generation `gen` (one-based).
pub fn should_update_network(gen: usize, update_period: usize) -> bool {
    update_period > 0 && gen.is_multiple_of(update_period)
}

/// How the population state is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateAssessor {
    /// Average objective sum, average violation, inverse spread.
    #[default]
    Objectives,
    /// One minus normalized hypervolume, average violation, Spacing.
    Indicators,
}

impl FromStr for StateAssessor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "objectives" => Ok(StateAssessor::Objectives),
            "indicators" => Ok(StateAssessor::Indicators),
            other => Err(Error::InvalidConfig(format!("unknown state assessor `{other}`"))),
        }
    }
}

impl fmt::Display for StateAssessor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StateAssessor::Objectives => "objectives",
            StateAssessor::Indicators => "indicators",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Population size `N`.
    pub pop_size: usize,
    /// Generation budget.
    pub generations: usize,
    pub seed: u64,
    pub policy: SelectionPolicy,
    pub hyper: TrainHyper,
    /// Maximum replay size.
    pub max_replay: usize,
    /// Replay size needed before the network is built.
    pub required_replay: usize,
    /// Records sampled per training session.
    pub train_size: usize,
    pub update_period: usize,
    pub assessor: StateAssessor,
    /// Overrides the default operator parameters for the problem dimension.
    pub operator_params: Option<OperatorParams>,
    /// Analytic-front sample size for per-generation indicators.
    pub front_resolution: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pop_size: 40,
            generations: 200,
            seed: 1,
            policy: SelectionPolicy::new(PolicyMode::Drl),
            hyper: TrainHyper::default(),
            max_replay: DEFAULT_MAX_REPLAY,
            required_replay: DEFAULT_REQUIRED_REPLAY,
            train_size: DEFAULT_TRAIN_SIZE,
            update_period: DEFAULT_UPDATE_PERIOD,
            assessor: StateAssessor::Objectives,
            operator_params: None,
            front_resolution: DEFAULT_FRONT_RESOLUTION,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.pop_size < 4 {
            return fail("population size must be at least 4");
        }
        if self.generations < 1 {
            return fail("generation budget must be at least 1");
        }
        if self.update_period < 1 {
            return fail("update period must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.policy.epsilon) {
            return fail("epsilon must lie in [0, 1]");
        }
        if self.max_replay < 1 || self.required_replay < 1 || self.train_size < 1 {
            return fail("replay and training sizes must be positive");
        }
        if self.front_resolution < 2 {
            return fail("front resolution must be at least 2");
        }
        if let Some(p) = &self.operator_params {
            p.validate()?;
        }
        self.hyper.validate()
    }
}

/// One generation of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// One-based generation number.
    pub gen: usize,
    pub s: PopulationState,
    pub op: OperatorId,
    pub source: ChoiceSource,
    pub reward: f64,
    pub s_next: PopulationState,
    /// IGD+ of the feasible members; NaN when none is feasible or no front is known.
    pub igd_plus: f64,
    /// Normalized hypervolume of the feasible members; NaN as above.
    pub hv: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub final_population: Population,
    pub trace: Vec<TraceRow>,
    /// Selections per operator, in action-set order.
    pub usage: [usize; 2],
    pub training_sessions: usize,
    pub final_replay_len: usize,
    /// The network after the last session, if one was trained.
    pub model: Option<TrainedModel>,
}

impl RunResult {
    pub fn usage_of(&self, op: OperatorId) -> usize {
        self.usage[op.index() - 1]
    }
}

/// IGD+ and normalized HV of the feasible members against `front`.
pub fn feasible_indicators(pop: &Population, front: Option<&ReferenceFront>) -> (f64, f64) {
    let Some(front) = front else {
        return (f64::NAN, f64::NAN);
    };
    let feasible = pop.feasible_objectives();
    if feasible.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let igd = igd_plus(&feasible, front).unwrap_or(f64::NAN);
    let hv = match front.ideal_and_nadir() {
        Some((ideal, nadir)) => normalized_hypervolume(&feasible, &ideal, &nadir),
        None => f64::NAN,
    };
    (igd, hv)
}

struct Assessor {
    kind: StateAssessor,
    ref_point: Vec<f64>,
}

impl Assessor {
    fn new(kind: StateAssessor, initial: &Population) -> Self {
        // fixed for the run: 1.1 times the initial nadir
        let m = initial.members.first().map_or(0, |s| s.f.len());
        let ref_point = (0..m)
            .map(|j| {
                let worst = initial
                    .iter()
                    .map(|s| s.f[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                (1.1 * worst).max(1e-9)
            })
            .collect();
        Self { kind, ref_point }
    }

    fn assess(&self, pop: &Population) -> Result<PopulationState> {
        match self.kind {
            StateAssessor::Objectives => assess_state(pop),
            StateAssessor::Indicators => indicator_state(pop, &self.ref_point),
        }
    }
}

fn train<R: Rng + ?Sized>(
    current: Option<&TrainedModel>,
    replay: &ExperienceReplay,
    cfg: &RunConfig,
    rng: &mut R,
) -> Result<TrainedModel> {
    let count = cfg.train_size.min(replay.len());
    let records: Vec<Record> = replay.sample(count, rng)?;
    let start = match current {
        Some(model) => model.network.clone(),
        None => init_network(rng),
    };
    let outcome = train_session(&start, &records, &cfg.hyper)?;
    Ok(TrainedModel {
        network: outcome.network,
        norm: outcome.norm,
    })
}

/// Runs the operator-selection loop on `host` for `cfg.generations` generations.
pub fn run(host: &mut dyn HostCmoea, spec: &ProblemSpec, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let mut rng = RunRng::seed_from_u64(cfg.seed);
    let params = cfg
        .operator_params
        .unwrap_or_else(|| OperatorParams::for_dimension(spec.n_var()));
    let front = analytic_front(spec, cfg.front_resolution).ok();

    host.initialize(spec, cfg.pop_size, &mut rng)?;
    let assessor = Assessor::new(cfg.assessor, host.reporting_population());
    let mut state = assessor.assess(host.reporting_population())?;
    let mut replay = ExperienceReplay::new(cfg.max_replay, cfg.required_replay)?;
    let learning = cfg.policy.mode == PolicyMode::Drl;
    let mut model: Option<TrainedModel> = None;
    let mut sessions = 0;
    let mut usage = [0usize; 2];
    let mut trace = Vec::with_capacity(cfg.generations);

    for gen in 1..=cfg.generations {
        if learning && model.is_none() && replay.is_ready() {
            model = Some(train(None, &replay, cfg, &mut rng)?);
            sessions += 1;
        }
        let choice = select_operator(model.as_ref(), &state, &cfg.policy, &mut rng);
        let pool = host.mating_selection(cfg.pop_size, &mut rng);
        let offspring = generate_offspring(choice.op, &pool, spec, &params, &mut rng)?
            .into_iter()
            .map(|x| evaluate(spec, &x))
            .collect::<Result<Vec<_>>>()?;
        host.environmental_selection(offspring, cfg.pop_size);

        let next = assessor.assess(host.reporting_population())?;
        let record = Record::new(state, choice.op, next);
        replay.push(record);
        usage[choice.op.index() - 1] += 1;
        let (igd, hv) = feasible_indicators(host.reporting_population(), front.as_ref());
        trace.push(TraceRow {
            gen,
            s: state,
            op: choice.op,
            source: choice.source,
            reward: record.reward,
            s_next: next,
            igd_plus: igd,
            hv,
        });
        state = next;

        // a session after the final generation could never be used
        if learning
            && gen < cfg.generations
            && should_update_network(gen, cfg.update_period)
            && replay.is_ready()
        {
            model = Some(train(model.as_ref(), &replay, cfg, &mut rng)?);
            sessions += 1;
        }
    }

    Ok(RunResult {
        final_population: host.reporting_population().clone(),
        trace,
        usage,
        training_sessions: sessions,
        final_replay_len: replay.len(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::host::Nsga2Host;
    use crate::model::Solution;
    use crate::problems::make_problem;
    use crate::qnet::Dense;
    use rand::RngCore;
    use rand_chacha::ChaCha8Rng;

    fn favoring(action_weight: f64) -> TrainedModel {
        // Q = action_weight * a_norm
        let net = QNetwork::from_layers(vec![Dense::new(4, 1, vec![0.0, 0.0, 0.0, action_weight], vec![0.0])]);
        let mut min = [0.0; 8];
        let mut max = [1.0; 8];
        min[3] = 1.0;
        max[3] = 2.0;
        TrainedModel {
            network: net,
            norm: NormStats { min, max },
        }
    }

    fn quick(policy: PolicyMode, generations: usize) -> RunConfig {
        RunConfig {
            pop_size: 12,
            generations,
            seed: 5,
            policy: SelectionPolicy::new(policy),
            hyper: TrainHyper {
                max_iters: 50,
                ..TrainHyper::default()
            },
            required_replay: 5,
            train_size: 8,
            update_period: 5,
            front_resolution: 50,
            ..RunConfig::default()
        }
    }

    #[test]
    fn greedy_selection_follows_the_network() {
        let s = PopulationState::new(1.0, 0.0, 0.5);
        let policy = SelectionPolicy::new(PolicyMode::Drl).with_epsilon(1.0);
        let model = favoring(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let c = select_operator(Some(&model), &s, &policy, &mut rng);
            assert_eq!(c, Choice { op: OperatorId::De, source: ChoiceSource::Greedy });
        }
        let against = favoring(-1.0);
        assert_eq!(select_operator(Some(&against), &s, &policy, &mut rng).op, OperatorId::Ga);
    }

    #[test]
    fn epsilon_zero_is_uniform() {
        let s = PopulationState::new(1.0, 0.0, 0.5);
        let policy = SelectionPolicy::new(PolicyMode::Drl).with_epsilon(0.0);
        let model = favoring(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = 10_000;
        let de = (0..draws)
            .filter(|_| select_operator(Some(&model), &s, &policy, &mut rng).op == OperatorId::De)
            .count();
        let se = (0.25 / draws as f64).sqrt();
        assert!((de as f64 / draws as f64 - 0.5).abs() <= 3.0 * se);
    }

    #[test]
    fn fixed_and_warmup_selection() {
        let s = PopulationState::new(1.0, 0.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fixed = SelectionPolicy::new(PolicyMode::Fixed(OperatorId::Ga));
        assert_eq!(select_operator(Some(&favoring(1.0)), &s, &fixed, &mut rng).op, OperatorId::Ga);
        let drl = SelectionPolicy::new(PolicyMode::Drl);
        assert_eq!(select_operator(None, &s, &drl, &mut rng).source, ChoiceSource::Warmup);
    }

    #[test]
    fn argmax_ties_and_monotone_transforms() {
        assert_eq!(argmax_action(&[0.3, 0.3]), 0);
        assert_eq!(argmax_action(&[0.1, 0.3]), 1);
        let q = [0.2, -1.0, 0.2];
        let transformed: Vec<f64> = q.iter().map(|v: &f64| (3.0 * v).exp()).collect();
        assert_eq!(argmax_action(&q), argmax_action(&transformed));
    }

    #[test]
    fn update_cadence() {
        assert!(should_update_network(50, 50));
        assert!(!should_update_network(49, 50));
        assert!((1..20).all(|g| should_update_network(g, 1)));
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("drl".parse::<PolicyMode>().unwrap(), PolicyMode::Drl);
        assert_eq!("fixed:de".parse::<PolicyMode>().unwrap(), PolicyMode::Fixed(OperatorId::De));
        assert_eq!(PolicyMode::Fixed(OperatorId::Ga).to_string(), "fixed:ga");
        assert!("fixed:pso".parse::<PolicyMode>().is_err());
        assert!("greedy".parse::<PolicyMode>().is_err());
    }

    #[test]
    fn short_run_never_builds_a_network() {
        let spec = make_problem("CP1", 6).unwrap();
        let cfg = RunConfig {
            required_replay: 50,
            ..quick(PolicyMode::Drl, 10)
        };
        let result = run(&mut Nsga2Host::new(), &spec, &cfg).unwrap();
        assert_eq!(result.training_sessions, 0);
        assert!(result.trace.iter().all(|r| r.source == ChoiceSource::Warmup));
        assert_eq!(result.trace.len(), 10);
    }

    #[test]
    fn fixed_policy_usage() {
        let spec = make_problem("CP2", 6).unwrap();
        let result = run(&mut Nsga2Host::new(), &spec, &quick(PolicyMode::Fixed(OperatorId::De), 12)).unwrap();
        assert_eq!(result.usage, [0, 12]);
        assert_eq!(result.training_sessions, 0);
    }

    #[test]
    fn runs_are_reproducible_and_chained() {
        let spec = make_problem("CP3", 6).unwrap();
        let cfg = quick(PolicyMode::Drl, 23);
        let a = run(&mut Nsga2Host::new(), &spec, &cfg).unwrap();
        let b = run(&mut Nsga2Host::new(), &spec, &cfg).unwrap();
        // NaN indicators make PartialEq useless here
        assert_eq!(format!("{:?}", a.trace), format!("{:?}", b.trace));
        assert_eq!(a.final_population, b.final_population);
        // built after gen 5, retrained after gens 10, 15 and 20
        assert_eq!(a.training_sessions, 4);
        assert_eq!(a.usage.iter().sum::<usize>(), 23);
        for pair in a.trace.windows(2) {
            assert_eq!(pair[0].s_next, pair[1].s);
        }
        for row in &a.trace {
            assert_eq!(row.reward.to_bits(), crate::state::compute_reward(&row.s, &row.s_next).to_bits());
        }
        assert!(a.trace.iter().any(|r| r.source == ChoiceSource::Greedy));
    }

    #[test]
    fn replay_size_follows_the_generation_count() {
        let spec = make_problem("CP1", 4).unwrap();
        let cfg = RunConfig {
            max_replay: 7,
            ..quick(PolicyMode::Random, 15)
        };
        assert_eq!(run(&mut Nsga2Host::new(), &spec, &cfg).unwrap().final_replay_len, 7);
        let cfg = RunConfig {
            max_replay: 70,
            ..quick(PolicyMode::Random, 15)
        };
        assert_eq!(run(&mut Nsga2Host::new(), &spec, &cfg).unwrap().final_replay_len, 15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let spec = make_problem("CP1", 4).unwrap();
        for cfg in [
            RunConfig { pop_size: 3, ..RunConfig::default() },
            RunConfig { generations: 0, ..RunConfig::default() },
            RunConfig { update_period: 0, ..RunConfig::default() },
            RunConfig {
                policy: SelectionPolicy::new(PolicyMode::Drl).with_epsilon(1.5),
                ..RunConfig::default()
            },
        ] {
            assert!(run(&mut Nsga2Host::new(), &spec, &cfg).is_err());
        }
    }

    /// Counts environmental-selection calls on top of the built-in host.
    struct Counting {
        inner: Nsga2Host,
        selections: usize,
    }

    impl HostCmoea for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn initialize(&mut self, spec: &ProblemSpec, n: usize, rng: &mut dyn RngCore) -> Result<()> {
            self.inner.initialize(spec, n, rng)
        }
        fn mating_selection(&self, count: usize, rng: &mut dyn RngCore) -> Vec<Solution> {
            self.inner.mating_selection(count, rng)
        }
        fn environmental_selection(&mut self, offspring: Vec<Solution>, n: usize) {
            self.selections += 1;
            self.inner.environmental_selection(offspring, n)
        }
        fn reporting_population(&self) -> &Population {
            self.inner.reporting_population()
        }
    }

    #[test]
    fn one_environmental_selection_per_generation() {
        let spec = make_problem("CP4", 5).unwrap();
        for mode in [PolicyMode::Drl, PolicyMode::Random, PolicyMode::Fixed(OperatorId::Ga)] {
            let mut host = Counting { inner: Nsga2Host::new(), selections: 0 };
            run(&mut host, &spec, &quick(mode, 17)).unwrap();
            assert_eq!(host.selections, 17, "{mode}");
        }
    }

    #[test]
    fn indicator_assessor_runs() {
        let spec = make_problem("CP2", 6).unwrap();
        let cfg = RunConfig {
            assessor: StateAssessor::Indicators,
            ..quick(PolicyMode::Drl, 12)
        };
        let result = run(&mut Nsga2Host::new(), &spec, &cfg).unwrap();
        assert!(result.trace.iter().all(|r| r.s.con <= 1.0 && r.s.div >= 0.0));
    }
}
