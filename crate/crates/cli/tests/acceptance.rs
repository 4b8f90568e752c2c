//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! test log. Exits non-zero if any criterion fails.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dqlos_cli::output::{trace_rows, write_rows, TRACE_HEADER};
use dqlos_cli::suite::run_stem;
use dqlos_cli::{run_single, run_suite, SuiteConfig};
use dqlos_core::framework::{select_operator, ChoiceSource, TrainedModel};
use dqlos_core::host::{environmental_selection, nondominated_sort};
use dqlos_core::indicators::{hypervolume_2d, hypervolume_mc, igd_plus};
use dqlos_core::model::RawEvaluation;
use dqlos_core::problems::BuiltinProblem;
use dqlos_core::qnet::{gradient_check_with_step, init_network, train_session, GRADIENT_CHECK_STEP};
use dqlos_core::state::compute_reward;
use dqlos_core::{
    analytic_front, constraint_violation, evaluate, is_feasible, make_problem, ExperienceReplay, OperatorId,
    PolicyMode, PopulationState, ProblemSpec, Record, RunRng, SelectionPolicy, Solution, StateAssessor,
    TrainHyper,
};
use rand::{Rng, SeedableRng};

// Pinned budgets and tolerances.
const SESSION_ITERS: usize = 2000;
const RANK_SLACK: f64 = 0.25;
const SUITE_CORE_BUDGET: Duration = Duration::from_secs(600);
const GRADCHECK_CONFIGS: usize = 10;
const GRADCHECK_TOL: f64 = 1e-4;
const REGRESSION_RATIO: f64 = 0.10;
const FIFO_MAX_PUSHES: usize = 10_000;
const FIFO_CAPACITIES: [usize; 3] = [1, 10, 1000];
const EPSILON_DRAWS: usize = 100_000;
const EPSILON_TOL: f64 = 0.01;
const UNIFORM_SE: f64 = 3.0;
const MC_SAMPLES: usize = 1_000_000;
const MC_SETS: usize = 20;
const MC_REL_TOL: f64 = 0.003;
const HOST_POPULATIONS: usize = 100;
const HOST_MAX_N: usize = 50;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite_config(assessor: StateAssessor, out: &Path) -> SuiteConfig {
    let mut cfg = SuiteConfig {
        assessor,
        out: out.to_path_buf(),
        ..SuiteConfig::default()
    };
    cfg.hyper.max_iters = SESSION_ITERS;
    cfg
}

fn trace_csv(cfg: &SuiteConfig, problem: BuiltinProblem, policy: PolicyMode, seed: u64) -> Result<Vec<u8>, String> {
    let (result, _) = run_single(cfg, problem, policy, seed).map_err(|e| e.to_string())?;
    let mut buf = Vec::new();
    write_rows(&mut buf, &TRACE_HEADER, &trace_rows(&result.trace)).map_err(|e| e.to_string())?;
    Ok(buf)
}

// criterion 1

fn ordering(cfg: &SuiteConfig) -> Check {
    let report = run_suite(cfg).map_err(|e| format!("{e:#}"))?;
    let failures = report.failures().count();
    ensure(failures == 0, || format!("{failures} runs failed"))?;
    let rank = |p| report.average_rank(p).unwrap_or(f64::NAN);
    let drl = rank(PolicyMode::Drl);
    let random = rank(PolicyMode::Random);
    let ga = rank(PolicyMode::Fixed(OperatorId::Ga));
    let de = rank(PolicyMode::Fixed(OperatorId::De));
    let detail = format!(
        "avg ranks drl {drl:.3} random {random:.3} fixed:ga {ga:.3} fixed:de {de:.3}; single-core run time {:.1} s",
        report.total_run_time.as_secs_f64()
    );
    ensure(drl <= random + RANK_SLACK, || format!("drl worse than random + {RANK_SLACK}: {detail}"))?;
    ensure(drl < ga.max(de), || format!("drl not better than the worse fixed policy: {detail}"))?;
    ensure(report.total_run_time <= SUITE_CORE_BUDGET, || format!("over budget: {detail}"))?;
    Ok(detail)
}

// criterion 2

fn reward_identity(cfg: &SuiteConfig, seeds: &[u64]) -> Check {
    let mut rows = 0;
    for &problem in &cfg.problems {
        for &policy in &cfg.policies {
            for &seed in seeds {
                let (result, _) = run_single(cfg, problem, policy, seed).map_err(|e| e.to_string())?;
                for row in &result.trace {
                    let again = compute_reward(&row.s, &row.s_next);
                    ensure(again.to_bits() == row.reward.to_bits(), || {
                        format!("{problem} {policy} seed {seed} gen {}: {again} != {}", row.gen, row.reward)
                    })?;
                    rows += 1;
                }
                for pair in result.trace.windows(2) {
                    ensure(pair[0].s_next == pair[1].s, || format!("state chain broken at gen {}", pair[1].gen))?;
                }
            }
        }
    }
    Ok(format!("{rows} trace rows recomputed bitwise"))
}

// criterion 3

fn gradient_check() -> Check {
    let mut rng = RunRng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for _ in 0..GRADCHECK_CONFIGS {
        let net = init_network(&mut rng);
        let input: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
        let target = rng.gen_range(-1.0..1.0);
        let report = gradient_check_with_step(&net, &input, target, GRADIENT_CHECK_STEP);
        worst = worst.max(report.max_relative_error);
        skipped += report.skipped;
    }
    let detail = format!("max relative error {worst:.2e} over {GRADCHECK_CONFIGS} configs ({skipped} kink parameters skipped)");
    ensure(worst < GRADCHECK_TOL, || detail.clone())?;
    Ok(detail)
}

// criterion 4

fn training_descent() -> Check {
    let cfg = SuiteConfig {
        generations: 100,
        ..SuiteConfig::default()
    };
    let (result, _) =
        run_single(&cfg, BuiltinProblem::Cp2, PolicyMode::Random, 4).map_err(|e| e.to_string())?;
    let replay: Vec<Record> = result
        .trace
        .iter()
        .map(|r| Record {
            s: r.s,
            op: r.op,
            reward: r.reward,
            s_next: r.s_next,
        })
        .collect();
    let hyper = TrainHyper {
        max_iters: SESSION_ITERS,
        ..TrainHyper::default()
    };
    let mut rng = RunRng::seed_from_u64(4);
    let frozen = train_session(&init_network(&mut rng), &replay, &hyper).map_err(|e| e.to_string())?;
    ensure(frozen.final_loss < frozen.initial_loss, || {
        format!("loss rose on the frozen replay: {} -> {}", frozen.initial_loss, frozen.final_loss)
    })?;

    // reward linear in (s, a), gamma = 0
    let synthetic: Vec<Record> = (0..100)
        .map(|_| {
            let s = PopulationState::new(rng.gen_range(0.0..4.0), rng.gen_range(0.0..0.5), rng.gen_range(0.1..1.0));
            let op = OperatorId::ALL[rng.gen_range(0..2)];
            let s_next = PopulationState::new(rng.gen(), rng.gen(), rng.gen());
            let reward = 0.5 * s.con - 1.0 * s.fea + 0.8 * s.div + 0.6 * op.encoding();
            Record { s, op, reward, s_next }
        })
        .collect();
    let regression = TrainHyper {
        gamma: 0.0,
        ..TrainHyper::default()
    };
    let fit = train_session(&init_network(&mut rng), &synthetic, &regression).map_err(|e| e.to_string())?;
    let ratio = fit.final_loss / fit.initial_loss;
    let detail = format!(
        "frozen replay {:.3e} -> {:.3e}; gamma=0 regression {:.3e} -> {:.3e} (ratio {ratio:.4}, {} iterations)",
        frozen.initial_loss, frozen.final_loss, fit.initial_loss, fit.final_loss, fit.iterations
    );
    ensure(ratio < REGRESSION_RATIO, || detail.clone())?;
    Ok(detail)
}

// criterion 5

fn replay_fifo(source: &[Record], seed: u64) -> Check {
    let mut rng = RunRng::seed_from_u64(seed);
    let mut sequences = 0;
    for &cap in &FIFO_CAPACITIES {
        for pushes in [0, 1, cap.saturating_sub(1), cap, cap + 1, 2 * cap + 3, rng.gen_range(1..=FIFO_MAX_PUSHES), FIFO_MAX_PUSHES] {
            let mut replay = ExperienceReplay::new(cap, 1).map_err(|e| e.to_string())?;
            let mut model: VecDeque<Record> = VecDeque::new();
            for i in 0..pushes {
                let mut r = source[rng.gen_range(0..source.len())];
                // tag each push so order is observable
                r.reward = i as f64;
                replay.push(r);
                model.push_back(r);
                if model.len() > cap {
                    model.pop_front();
                }
            }
            let kept: Vec<Record> = replay.iter().copied().collect();
            ensure(kept.len() == pushes.min(cap), || format!("cap {cap}, {pushes} pushes: kept {}", kept.len()))?;
            ensure(kept == model.into_iter().collect::<Vec<_>>(), || format!("cap {cap}, {pushes} pushes: wrong records or order"))?;
            sequences += 1;
        }
    }
    Ok(format!("{sequences} push sequences over capacities {FIFO_CAPACITIES:?}"))
}

// criterion 6

fn epsilon_law(model: &TrainedModel, states: &[PopulationState], epsilon: f64, seed: u64) -> Check {
    let policy = SelectionPolicy::new(PolicyMode::Drl).with_epsilon(epsilon);
    let mut rng = RunRng::seed_from_u64(seed);
    let mut greedy = 0usize;
    let mut explore = [0usize; 2];
    for i in 0..EPSILON_DRAWS {
        let s = states[i % states.len()];
        let choice = select_operator(Some(model), &s, &policy, &mut rng);
        match choice.source {
            ChoiceSource::Greedy => {
                let q = model.q_values(&s);
                let best = if q[1] > q[0] { OperatorId::De } else { OperatorId::Ga };
                ensure(choice.op == best, || format!("greedy pick {} is not the argmax", choice.op))?;
                greedy += 1;
            }
            ChoiceSource::Explore => explore[choice.op.index() - 1] += 1,
            other => return Err(format!("unexpected source {other:?}")),
        }
    }
    let freq = greedy as f64 / EPSILON_DRAWS as f64;
    let n_explore = (explore[0] + explore[1]) as f64;
    let de_share = explore[1] as f64 / n_explore;
    let se = (0.25 / n_explore).sqrt();
    let detail = format!(
        "eps {epsilon}: greedy frequency {freq:.4}; explore DE share {de_share:.4} (3 SE = {:.4})",
        UNIFORM_SE * se
    );
    ensure((freq - epsilon).abs() <= EPSILON_TOL, || detail.clone())?;
    ensure((de_share - 0.5).abs() <= UNIFORM_SE * se, || detail.clone())?;
    Ok(detail)
}

fn trained_model(assessor: StateAssessor) -> Result<(TrainedModel, Vec<PopulationState>, Vec<Record>, usize), String> {
    let cfg = SuiteConfig {
        assessor,
        generations: 120,
        ..suite_config(assessor, Path::new("unused"))
    };
    let (result, _) = run_single(&cfg, BuiltinProblem::Cp1, PolicyMode::Drl, 6).map_err(|e| e.to_string())?;
    let model = result.model.ok_or("no network was trained")?;
    let states = result.trace.iter().map(|r| r.s).collect();
    let records = result
        .trace
        .iter()
        .map(|r| Record {
            s: r.s,
            op: r.op,
            reward: r.reward,
            s_next: r.s_next,
        })
        .collect();
    Ok((model, states, records, result.final_replay_len))
}

// criterion 7

fn indicator_oracles() -> Check {
    for kind in BuiltinProblem::ALL {
        let spec = make_problem(kind.name(), 10).map_err(|e| e.to_string())?;
        let front = analytic_front(&spec, 500).map_err(|e| e.to_string())?;
        let d = igd_plus(&front.points, &front).map_err(|e| e.to_string())?;
        ensure(d == 0.0, || format!("igd_plus({kind} front, itself) = {d}"))?;
    }
    let single = hypervolume_2d(&[vec![0.5, 0.5]], &[1.0, 1.0]);
    ensure(single == 0.25, || format!("single-point HV {single}"))?;

    let mut rng = RunRng::seed_from_u64(7);
    let reference = [1.1, 1.1];
    let mut worst: f64 = 0.0;
    for _ in 0..MC_SETS {
        let k = rng.gen_range(3..=15);
        let set: Vec<Vec<f64>> = (0..k).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let exact = hypervolume_2d(&set, &reference);
        let mc = hypervolume_mc(&set, &reference, MC_SAMPLES, &mut rng);
        worst = worst.max((exact - mc).abs() / exact);
    }
    let detail = format!("igd+ self-distance 0 on 4 fronts; HV exact 0.25; worst MC relative gap {:.3}%", 100.0 * worst);
    ensure(worst <= MC_REL_TOL, || detail.clone())?;
    Ok(detail)
}

// criterion 8

/// Constrained dominance written out independently of the host module.
fn cdp_better(a: &Solution, b: &Solution) -> bool {
    match (a.cv == 0.0, b.cv == 0.0) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.cv < b.cv,
        (true, true) => a.f.iter().zip(&b.f).all(|(x, y)| x <= y) && a.f.iter().zip(&b.f).any(|(x, y)| x < y),
    }
}

fn brute_force_fronts(members: &[Solution]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; members.len()];
    let mut level = 0;
    while rank.contains(&usize::MAX) {
        let current: Vec<usize> = (0..members.len())
            .filter(|&i| rank[i] == usize::MAX)
            .filter(|&i| {
                !(0..members.len()).any(|j| rank[j] == usize::MAX && j != i && cdp_better(&members[j], &members[i]))
            })
            .collect();
        for i in current {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

fn random_solution<R: Rng>(rng: &mut R) -> Solution {
    // coarse grid values so ties and duplicates occur
    let f = vec![rng.gen_range(0..8) as f64 / 4.0, rng.gen_range(0..8) as f64 / 4.0];
    let cv = if rng.gen_bool(0.6) { 0.0 } else { rng.gen_range(1..5) as f64 / 2.0 };
    Solution {
        x: vec![rng.gen()],
        f,
        cv_per: vec![cv],
        cv,
    }
}

fn host_correctness() -> Check {
    let mut rng = RunRng::seed_from_u64(8);
    for trial in 0..HOST_POPULATIONS {
        let n = rng.gen_range(2..=HOST_MAX_N);
        let members: Vec<Solution> = (0..n).map(|_| random_solution(&mut rng)).collect();
        let fronts = nondominated_sort(&members);
        let mut rank = vec![usize::MAX; n];
        for (level, front) in fronts.iter().enumerate() {
            for &i in front {
                rank[i] = level;
            }
        }
        ensure(rank == brute_force_fronts(&members), || format!("population {trial} (N={n}): fronts differ"))?;

        let pop: Vec<Solution> = (0..n).map(|_| random_solution(&mut rng)).collect();
        let offspring: Vec<Solution> = (0..n).map(|_| random_solution(&mut rng)).collect();
        let kept = environmental_selection(&pop, &offspring, n);
        ensure(kept.len() == n, || format!("population {trial}: kept {} of {n}", kept.len()))?;
        // multiset difference: union minus kept
        let mut discarded: Vec<Solution> = pop.iter().chain(&offspring).cloned().collect();
        for k in &kept {
            let at = discarded.iter().position(|d| d == k).ok_or("selection invented a member")?;
            discarded.swap_remove(at);
        }
        for d in discarded.iter().filter(|d| d.cv == 0.0) {
            ensure(!kept.iter().any(|k| cdp_better(d, k)), || {
                format!("population {trial}: discarded feasible {:?} dominates a survivor", d.f)
            })?;
        }
    }
    Ok(format!("{HOST_POPULATIONS} random populations, N up to {HOST_MAX_N}"))
}

// criterion 9

fn constraint_suite() -> Check {
    let spec = |p: usize, q: usize| {
        let eval: dqlos_core::model::Evaluator = Arc::new(|x: &[f64]| RawEvaluation {
            objectives: vec![x[0], 1.0 - x[0]],
            inequality: vec![],
            equality: vec![],
        });
        ProblemSpec::new("cv", 2, p, q, vec![(0.0, 1.0)], eval).expect("valid spec")
    };
    let run = |p, q, g: &[f64], h: &[f64]| constraint_violation(&spec(p, q), g, h).map_err(|e| e.to_string());

    let (per, total) = run(1, 1, &[-1.0], &[])?;
    ensure(per == vec![0.0] && total == 0.0, || format!("g=[-1]: {per:?} {total}"))?;
    let (per, total) = run(2, 2, &[0.5, -0.2], &[])?;
    ensure(per == vec![0.5, 0.0] && total == 0.5, || format!("g=[0.5,-0.2]: {per:?} {total}"))?;
    let (per, total) = run(0, 1, &[], &[0.3])?;
    ensure(per == vec![0.3 - 1e-4] && total == 0.3 - 1e-4 && (total - 0.2999).abs() < 1e-15, || {
        format!("h=[0.3]: {per:?} {total}")
    })?;
    let (_, total) = run(0, 1, &[], &[-0.3])?;
    ensure(total == 0.3 - 1e-4, || format!("h=[-0.3]: {total}"))?;
    let (_, total) = run(0, 1, &[], &[5e-5])?;
    ensure(total == 0.0, || format!("h within sigma: {total}"))?;

    let cp1 = make_problem("CP1", 10).map_err(|e| e.to_string())?;
    let mut x = vec![0.0; 10];
    x[0] = 0.5;
    let s = evaluate(&cp1, &x).map_err(|e| e.to_string())?;
    ensure(s.f == vec![0.5, 0.5] && s.cv == 0.0, || format!("CP1 x1=0.5: {s:?}"))?;
    let s = evaluate(&cp1, &[0.0; 10]).map_err(|e| e.to_string())?;
    ensure(s.f == vec![0.0, 1.0] && s.cv == 0.2, || format!("CP1 x=0: {s:?}"))?;
    x[3] = 1.5;
    ensure(evaluate(&cp1, &x).is_err(), || "out-of-bounds input accepted".into())?;

    for (cv, expected) in [(0.0, true), (1e-12, false), (3.5, false)] {
        let s = Solution {
            x: vec![0.0],
            f: vec![0.0, 0.0],
            cv_per: vec![cv],
            cv,
        };
        ensure(is_feasible(&s) == expected, || format!("is_feasible(cv={cv})"))?;
    }
    Ok("all constraint-violation, evaluation and feasibility examples exact".into())
}

// criterion 10

fn determinism(cfg: &SuiteConfig, written: Option<&Path>) -> Check {
    let mut compared = 0;
    for &problem in &cfg.problems {
        for &policy in &cfg.policies {
            let seed = cfg.seeds[0];
            let a = trace_csv(cfg, problem, policy, seed)?;
            let b = trace_csv(cfg, problem, policy, seed)?;
            ensure(a == b, || format!("{problem} {policy}: reruns differ"))?;
            compared += 1;
            if let Some(dir) = written {
                let path = dir.join("traces").join(format!("{}.csv", run_stem(problem, policy, seed)));
                let on_disk = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                ensure(on_disk == a, || format!("{}: suite output differs from a rerun", path.display()))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} trace CSV pairs byte-identical"))
}

// criterion 11

fn ablation(cfg: &SuiteConfig) -> Check {
    let report = run_suite(cfg).map_err(|e| format!("{e:#}"))?;
    let failures = report.failures().count();
    ensure(failures == 0, || format!("{failures} runs failed"))?;
    let identity = reward_identity(cfg, &[1, 2])?;
    let (model, states, records, replay_len) = trained_model(StateAssessor::Indicators)?;
    ensure(replay_len == 120.min(cfg.max_replay), || format!("replay holds {replay_len}"))?;
    let fifo = replay_fifo(&records, 11)?;
    let eps = epsilon_law(&model, &states, 0.9, 11)?;
    let det = determinism(cfg, Some(&cfg.out))?;
    Ok(format!(
        "{} runs completed; {identity}; {fifo}; {eps}; {det}",
        report.outcomes.len()
    ))
}

struct Line {
    id: usize,
    name: &'static str,
    result: Check,
    elapsed: Duration,
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let objectives_out = tmp.path().join("objectives");
    let indicators_out = tmp.path().join("indicators");
    let base = suite_config(StateAssessor::Objectives, &objectives_out);
    let ablated = suite_config(StateAssessor::Indicators, &indicators_out);

    let mut lines = Vec::new();
    let mut check = |id, name, f: &mut dyn FnMut() -> Check| {
        let start = Instant::now();
        let result = f();
        let line = Line {
            id,
            name,
            result,
            elapsed: start.elapsed(),
        };
        let (tag, detail) = match &line.result {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        println!("{tag} {:>2} {:<28} {detail} [{:.1} s]", line.id, line.name, line.elapsed.as_secs_f64());
        lines.push(line);
    };

    check(1, "ordering replication", &mut || ordering(&base));
    check(2, "reward identity", &mut || reward_identity(&base, &[1, 2, 3]));
    check(3, "gradient check", &mut gradient_check);
    check(4, "training descent", &mut training_descent);
    check(5, "replay fifo", &mut || {
        let (_, _, records, _) = trained_model(StateAssessor::Objectives)?;
        replay_fifo(&records, 5)
    });
    check(6, "epsilon-greedy law", &mut || {
        let (model, states, _, _) = trained_model(StateAssessor::Objectives)?;
        let high = epsilon_law(&model, &states, 0.9, 6)?;
        let half = epsilon_law(&model, &states, 0.5, 66)?;
        Ok(format!("{high}; {half}"))
    });
    check(7, "indicator oracles", &mut indicator_oracles);
    check(8, "host correctness", &mut host_correctness);
    check(9, "constraint violation", &mut constraint_suite);
    check(10, "determinism", &mut || determinism(&base, Some(&objectives_out)));
    check(11, "ablation hook", &mut || ablation(&ablated));

    let failed: Vec<usize> = lines.iter().filter(|l| l.result.is_err()).map(|l| l.id).collect();
    println!("{}/{} criteria passed", lines.len() - failed.len(), lines.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
