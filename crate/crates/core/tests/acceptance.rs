//! Acceptance suite. Runs without the libtest harness so every check prints
//! exactly one PASS/FAIL line, whatever the capture settings.
//!
//! cargo test -p mcr-core --test acceptance

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use mcr_core::baselines::{
    max_trial_reward, run_cot, run_self_consistency, run_tot_bfs, TotConfig,
};
use mcr_core::dump::{Method, TreeDump};
use mcr_core::engine::{argmax_policy, policy_score, Arm};
use mcr_core::env::{
    Backend, CallCounter, CompletionRequest, EnvError, Environment, Landscape, MockBackend,
    MockProfile, QuerySettings, ScriptedBackend,
};
use mcr_core::prompt::{
    Action, ActionSpace, CatalystBase, LegalityRules, PromptState, Relation, RootQuery, Vocabulary,
};
use mcr_core::reward::{compute_reward, RewardError};
use mcr_core::tree::{NodeId, Tree};
use mcr_core::{run_search, Mcts, SearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;
type Check = fn(&mut Ledger) -> Outcome;

/// Every dump written by the earlier checks, for the round-trip check.
#[derive(Default)]
struct Ledger {
    dumps: Vec<(String, TreeDump)>,
}

impl Ledger {
    fn record(&mut self, label: impl Into<String>, dump: TreeDump) {
        self.dumps.push((label.into(), dump));
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn oc_query() -> RootQuery {
    RootQuery::OpenCatalysis {
        adsorbate: "*OH".into(),
        k: 5,
    }
}

fn mock_env(seed: u64) -> Environment {
    let backend =
        MockBackend::new(MockProfile::new(seed, Landscape::PropertyKeyed)).expect("mock profile");
    Environment::new(Arc::new(backend), QuerySettings::default())
}

fn config_json<T: serde::Serialize>(config: &T) -> serde_json::Value {
    serde_json::to_value(config).expect("config serializes")
}

fn root_visit_sum(tree: &Tree) -> u64 {
    tree.out_edges(NodeId(0)).map(|e| e.stats.visits).sum()
}

fn node_budget(ledger: &mut Ledger) -> Outcome {
    let env = mock_env(0);
    let space = ActionSpace::default();
    let config = SearchConfig::default();
    let start = Instant::now();
    let out =
        run_search(&oc_query(), &env, &space, config, &mut |_| {}).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let visits = root_visit_sum(&out.tree);
    ensure!(
        out.tree.len() == 301,
        "tree has {} nodes, expected 301",
        out.tree.len()
    );
    ensure!(
        visits == 300,
        "root edges carry {visits} visits, expected 300"
    );
    ensure!(
        out.metrics.n_prompts == 301,
        "N_P = {}",
        out.metrics.n_prompts
    );
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    ledger.record(
        "budget run",
        TreeDump::from_outcome(
            Method::Mcr,
            "oc-oh",
            config_json(&config),
            env.fingerprint(),
            &out,
        ),
    );
    Ok(format!("301 nodes, root visits 300, {elapsed:.1?}"))
}

/// Brute-force discounted subtree sum for every edge.
fn brute_force_values(tree: &Tree, gamma: f64) -> HashMap<usize, f64> {
    let mut out = HashMap::new();
    for (i, edge) in tree.edges().iter().enumerate() {
        let Some(child) = edge.child else {
            out.insert(i, 0.0);
            continue;
        };
        let parent_depth = tree.node(edge.key.parent).unwrap().depth;
        let mut sum = 0.0;
        let mut stack = vec![child];
        while let Some(id) = stack.pop() {
            let node = tree.node(id).unwrap();
            sum += gamma.powi((node.depth - parent_depth) as i32) * node.reward.unwrap();
            stack.extend(tree.out_edges(id).filter_map(|e| e.child));
        }
        out.insert(i, sum);
    }
    out
}

fn value_consistency(ledger: &mut Ledger) -> Outcome {
    let env = mock_env(1);
    let space = ActionSpace::default();
    let config = SearchConfig {
        budget: 100,
        rng_seed: 1,
        ..SearchConfig::default()
    };
    let mut mcts = Mcts::new(&env, &space, config).map_err(|e| e.to_string())?;
    mcts.evaluate_root(&oc_query()).map_err(|e| e.to_string())?;
    let mut checked = 0usize;
    let mut worst = 0.0f64;
    for sim in 1..=config.budget {
        mcts.simulate_once().map_err(|e| e.to_string())?;
        let tree = mcts.tree();
        for (i, expected) in brute_force_values(tree, config.gamma) {
            let got = tree.edges()[i].stats.value;
            let rel = (got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
            ensure!(
                rel <= 1e-9,
                "after simulation {sim}, edge {i}: V = {got}, oracle {expected}"
            );
            checked += 1;
        }
    }
    let tree = mcts.into_tree();
    let dump = TreeDump::new(
        Method::Mcr,
        "oc-oh",
        config_json(&config),
        env.fingerprint(),
        &tree,
    );
    ledger.record("value-consistency run", dump);
    Ok(format!(
        "{checked} edge checks over 100 simulations, worst relative error {worst:.1e}"
    ))
}

fn oracle_score(v: f64, n: u64, p: f64, total: u64, c: f64) -> f64 {
    let mean = if n == 0 { 0.0 } else { v / n as f64 };
    mean + c * p * (total as f64).sqrt() / (1.0 + n as f64)
}

fn oracle_argmax(arms: &[(f64, u64, f64)], total: u64, c: f64) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &(v, n, p)) in arms.iter().enumerate() {
        let s = oracle_score(v, n, p, total, c);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn to_arms(table: &[(f64, u64, f64)]) -> Vec<Arm> {
    table
        .iter()
        .map(|&(value, visits, prior)| Arm {
            value,
            visits,
            prior,
        })
        .collect()
}

fn selection_oracle(ledger: &mut Ledger) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1ec7);
    let tables = 3000;
    let (mut unvisited, mut ties) = (0, 0);
    for t in 0..tables {
        let size = rng.random_range(1..=30usize);
        let regime = t % 3;
        let p = 1.0 / size as f64;
        let mut table: Vec<(f64, u64, f64)> = (0..size)
            .map(|_| {
                let n = if regime == 1 {
                    0
                } else {
                    rng.random_range(0..25u64)
                };
                let v = if n == 0 {
                    0.0
                } else {
                    rng.random_range(0.0..40.0) * n as f64
                };
                (v, n, p)
            })
            .collect();
        let c = if t % 2 == 0 {
            15.0
        } else {
            rng.random_range(0.0..30.0)
        };
        if regime == 2 && size > 1 {
            // Copy the winner into another slot; the lower index must win.
            let total: u64 = table.iter().map(|a| a.1).sum();
            let w = oracle_argmax(&table, total, c);
            let slot = rng.random_range(0..size);
            if slot != w {
                table[slot] = table[w];
                ties += 1;
            }
        }
        unvisited += table.iter().filter(|a| a.1 == 0).count();
        let total: u64 = table.iter().map(|a| a.1).sum();
        for &(v, n, p) in &table {
            let got = policy_score(v, n, p, total, c);
            let want = oracle_score(v, n, p, total, c);
            ensure!(
                (got - want).abs() <= 1e-12 * want.abs().max(1.0),
                "table {t}: score {got} vs oracle {want} for V={v} N={n} p={p}"
            );
        }
        let got = argmax_policy(&to_arms(&table), total, c);
        let want = oracle_argmax(&table, total, c);
        ensure!(
            got == Some(want),
            "table {t}: argmax {got:?} vs oracle {want}"
        );
    }

    // Exact tie: identical arms resolve to the lowest index.
    let tied = vec![(3.0, 2, 0.25); 4];
    ensure!(
        argmax_policy(&to_arms(&tied), 8, 15.0) == Some(0),
        "tie did not go to index 0"
    );

    // Inside a real search, every non-leaf choice agrees with the oracle evaluated
    // over table-ordered legal actions (repeat occurrences pooled).
    let env = mock_env(2);
    let space = ActionSpace::default();
    let config = SearchConfig {
        budget: 100,
        rng_seed: 2,
        ..SearchConfig::default()
    };
    let mut mcts = Mcts::new(&env, &space, config).map_err(|e| e.to_string())?;
    mcts.evaluate_root(&oc_query()).map_err(|e| e.to_string())?;
    for _ in 0..config.budget {
        mcts.simulate_once().map_err(|e| e.to_string())?;
    }
    let mut internal = 0;
    for id in (0..mcts.tree().len()).map(NodeId) {
        let tree = mcts.tree();
        if tree.is_leaf(id) {
            continue;
        }
        let state = tree.node(id).unwrap().state.clone();
        let legal = space.legal_actions(&state);
        let p = 1.0 / legal.len() as f64;
        let table: Vec<(f64, u64, f64)> = legal
            .iter()
            .map(|a| {
                let edges: Vec<_> = tree.out_edges(id).filter(|e| &e.key.action == a).collect();
                (
                    edges.iter().map(|e| e.stats.value).sum(),
                    edges.iter().map(|e| e.stats.visits).sum(),
                    p,
                )
            })
            .collect();
        let total: u64 = tree.out_edges(id).map(|e| e.stats.visits).sum();
        let want = legal[oracle_argmax(&table, total, config.c)].clone();
        let got = mcts.select_action(id).map_err(|e| e.to_string())?;
        ensure!(got == want, "node {id}: engine picked {got}, oracle {want}");
        internal += 1;
    }
    let tree = mcts.tree().clone();
    ledger.record(
        "selection run",
        TreeDump::new(
            Method::Mcr,
            "oc-oh",
            config_json(&config),
            env.fingerprint(),
            &tree,
        ),
    );

    // Leaf regime: draws follow the uniform prior over legal actions.
    let mut leaf = Mcts::new(
        &env,
        &space,
        SearchConfig {
            rng_seed: 3,
            ..config
        },
    )
    .map_err(|e| e.to_string())?;
    let root = leaf.evaluate_root(&oc_query()).map_err(|e| e.to_string())?;
    let legal = space.legal_actions(&leaf.tree().node(root).unwrap().state);
    let draws = 400 * legal.len();
    let mut counts: HashMap<Action, usize> = HashMap::new();
    for _ in 0..draws {
        let a = leaf.select_action(root).map_err(|e| e.to_string())?;
        ensure!(legal.contains(&a), "leaf draw {a} is not legal");
        *counts.entry(a).or_default() += 1;
    }
    let expected = draws as f64 / legal.len() as f64;
    let chi2: f64 = legal
        .iter()
        .map(|a| {
            let o = *counts.get(a).unwrap_or(&0) as f64;
            (o - expected).powi(2) / expected
        })
        .sum();
    // 0.1% critical value of chi-square with 23 degrees of freedom.
    ensure!(
        legal.len() == 24 && chi2 < 49.73,
        "leaf draws not uniform: chi2 = {chi2:.2} over {} actions",
        legal.len()
    );

    Ok(format!(
        "{tables} tables ({unvisited} unvisited arms, {ties} planted ties), {internal} in-search nodes, leaf chi2 {chi2:.1}"
    ))
}

fn tot_counts(ledger: &mut Ledger) -> Outcome {
    let env = mock_env(3);
    let config = TotConfig::default();
    let open = ActionSpace::new(Vocabulary::default(), LegalityRules::unconstrained());
    let all_legal = run_tot_bfs(&oc_query(), &env, &open, config).map_err(|e| e.to_string())?;
    let generated = all_legal.tree.len() - 1;
    ensure!(
        generated == 12 + 4 * 72,
        "all-legal space generated {generated} nodes"
    );

    let real = run_tot_bfs(&oc_query(), &env, &ActionSpace::default(), config)
        .map_err(|e| e.to_string())?;
    let real_generated = real.tree.len() - 1;
    ensure!(
        real_generated < 300,
        "real rules generated {real_generated} nodes"
    );
    ensure!(
        real.tree.nodes().iter().all(|n| n.depth <= 5),
        "a node is deeper than 5"
    );
    ensure!(real.metrics.d_max == 5, "d_max = {}", real.metrics.d_max);

    for (label, out) in [("tot all-legal", &all_legal), ("tot real rules", &real)] {
        ledger.record(
            label,
            TreeDump::from_outcome(
                Method::Tot,
                "oc-oh",
                config_json(&config),
                env.fingerprint(),
                out,
            ),
        );
    }
    Ok(format!(
        "all-legal {generated}, real rules {real_generated}, d_max 5"
    ))
}

/// Independent restatement of the three impossibility rules.
fn rule_allows(state: &PromptState, action: &Action) -> bool {
    let has_candidates = state
        .prev_candidates
        .as_ref()
        .is_some_and(|c| !c.is_empty());
    if has_candidates
        && state.relation_to_prev.is_none()
        && !matches!(action, Action::ChangeRelation(_))
    {
        return false;
    }
    match action {
        Action::AddInclude(p) => !state.include_props.contains(p),
        Action::AddExclude(p) => !state.exclude_props.contains(p),
        Action::ChangeRelation(_) => has_candidates,
        _ => true,
    }
}

fn no_duplicates(list: &[String]) -> bool {
    let mut seen = std::collections::HashSet::new();
    list.iter().all(|p| seen.insert(p))
}

fn random_root(rng: &mut ChaCha8Rng) -> PromptState {
    let query = if rng.random_bool(0.7) {
        let ads = ["*OH", "*H", "*CO", "*O", "*N2", "*CH3"];
        RootQuery::OpenCatalysis {
            adsorbate: ads[rng.random_range(0..ads.len())].into(),
            k: rng.random_range(1..=6),
        }
    } else {
        RootQuery::BiofuelQr {
            question_id: format!("q{}", rng.random_range(0..100)),
            k: rng.random_range(1..=4),
        }
    };
    let mut state = PromptState::root(query);
    state.catalyst_label.base = CatalystBase::ALL[rng.random_range(0..CatalystBase::ALL.len())];
    state.catalyst_label.oxide = rng.random_bool(0.5);
    if rng.random_bool(0.3) {
        state = state.with_candidates(&["Pt".to_string(), "Ni".to_string()]);
        if rng.random_bool(0.5) {
            state.relation_to_prev = Some(Relation::ALL[rng.random_range(0..Relation::ALL.len())]);
        }
    }
    state
}

fn legality_suite(_: &mut Ledger) -> Outcome {
    let space = ActionSpace::default();
    let pool: Vec<String> = ["Cu", "Zn", "Fe", "Co"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e9a1);
    let (mut steps, mut injected) = (0usize, 0usize);
    for seq in 0..10_000 {
        let mut state = random_root(&mut rng);
        let len = rng.random_range(1..=20);
        for _ in 0..len {
            let legal = space.legal_actions(&state);
            let oracle: Vec<Action> = space
                .table()
                .iter()
                .filter(|a| rule_allows(&state, a))
                .cloned()
                .collect();
            ensure!(
                legal == oracle,
                "sequence {seq}: legal set differs from rule oracle in state {state:?}"
            );

            if let Some(bad) = space.table().iter().find(|a| !rule_allows(&state, a)) {
                ensure!(
                    space.apply_action(&state, bad).is_err(),
                    "illegal {bad} was accepted"
                );
                ensure!(
                    space.prior_of(&state, bad) == 0.0,
                    "illegal {bad} has nonzero prior"
                );
                injected += 1;
            }

            let action = legal[rng.random_range(0..legal.len())].clone();
            let next = space
                .apply_action(&state, &action)
                .map_err(|e| e.to_string())?;
            ensure!(
                no_duplicates(&next.include_props) && no_duplicates(&next.exclude_props),
                "sequence {seq}: duplicate property after {action}"
            );
            next.validate(space.vocabulary())
                .map_err(|e| e.to_string())?;
            // Children inherit the parent's answer, which may be empty.
            let n = rng.random_range(0..=pool.len());
            state = next.with_candidates(&pool[..n]);
            steps += 1;
        }
    }
    Ok(format!(
        "10000 sequences, {steps} steps, {injected} illegal actions rejected"
    ))
}

#[derive(Deserialize)]
struct RewardFixtures {
    version: u32,
    cases: Vec<RewardCase>,
}

#[derive(Deserialize)]
struct RewardCase {
    name: String,
    candidates: Vec<String>,
    replies: BTreeMap<String, Vec<String>>,
    energies: BTreeMap<String, Vec<f64>>,
    attempts: BTreeMap<String, u32>,
}

/// Answers reward prompts by adsorbate and attempt; safe under concurrent adsorbate queries.
struct FixtureBackend {
    replies: BTreeMap<String, Vec<String>>,
    seen: Mutex<Vec<(String, u32)>>,
}

impl Backend for FixtureBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, EnvError> {
        let ads = self
            .replies
            .keys()
            .find(|a| request.prompt.contains(&format!("adsorbate {a} to")))
            .ok_or_else(|| EnvError::Transport("unknown adsorbate".into()))?;
        self.seen
            .lock()
            .unwrap()
            .push((ads.clone(), request.sample));
        self.replies[ads]
            .get(request.sample as usize)
            .cloned()
            .ok_or_else(|| EnvError::Transport("fixture exhausted".into()))
    }

    fn fingerprint(&self) -> String {
        "fixture".into()
    }
}

fn reward_pipeline(_: &mut Ledger) -> Outcome {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/reward_replies.json");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let fixtures: RewardFixtures = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    ensure!(
        fixtures.version == 1,
        "fixture version {}",
        fixtures.version
    );

    for case in &fixtures.cases {
        let backend = Arc::new(FixtureBackend {
            replies: case.replies.clone(),
            seen: Mutex::new(Vec::new()),
        });
        let env = Environment::new(backend.clone(), QuerySettings::default());
        let adsorbates: Vec<String> = case.replies.keys().cloned().collect();
        let eval = compute_reward(&env, &adsorbates, &case.candidates)
            .map_err(|e| format!("{}: {e}", case.name))?;
        let mut expected_total = 0.0;
        for (ads, part) in adsorbates.iter().zip(&eval.per_adsorbate) {
            let energies = &case.energies[ads];
            let mut abs_sum = 0.0;
            for e in energies {
                abs_sum += if *e < 0.0 { -*e } else { *e };
            }
            let mean = abs_sum / energies.len() as f64;
            expected_total += mean;
            ensure!(
                &part.energies == energies,
                "{}: parsed {:?}, labeled {energies:?}",
                case.name,
                part.energies
            );
            ensure!(
                (part.mean_abs - mean).abs() <= 1e-12,
                "{}: mean {} vs {mean}",
                case.name,
                part.mean_abs
            );
            ensure!(
                part.attempts == case.attempts[ads],
                "{}: {} attempts",
                case.name,
                part.attempts
            );
        }
        ensure!(
            (eval.total - expected_total).abs() <= 1e-12,
            "{}: total {} vs {expected_total}",
            case.name,
            eval.total
        );
        let mut samples: Vec<u32> = backend
            .seen
            .lock()
            .unwrap()
            .iter()
            .map(|(_, s)| *s)
            .collect();
        samples.sort();
        let max_attempts = case.attempts.values().max().copied().unwrap_or(1);
        ensure!(
            samples.iter().all(|s| *s < max_attempts),
            "{}: unexpected retry samples {samples:?}",
            case.name
        );
    }

    // The worked example: [-0.5, -1.2, -0.8] -> 2.5 / 3.
    let env = Environment::new(
        Arc::new(ScriptedBackend::repeating("[-0.5, -1.2, -0.8]")),
        QuerySettings::default(),
    );
    let three: Vec<String> = ["Pt", "Pd", "Ni"].iter().map(|s| s.to_string()).collect();
    let eval = compute_reward(&env, &["*OH".to_string()], &three).map_err(|e| e.to_string())?;
    ensure!(
        (eval.total - 2.5 / 3.0).abs() <= 1e-12,
        "worked example gave {}",
        eval.total
    );

    // Fail, fail, succeed.
    let scripted = Arc::new(ScriptedBackend::from_texts([
        "no numbers here",
        "[-1.0]",
        "[-1.0, -2.0, -3.0]",
    ]));
    let env = Environment::new(scripted.clone(), QuerySettings::default());
    let eval = compute_reward(&env, &["*H".to_string()], &three).map_err(|e| e.to_string())?;
    let samples: Vec<u32> = scripted.requests().iter().map(|r| r.sample).collect();
    ensure!(
        eval.per_adsorbate[0].attempts == 3 && samples == [0, 1, 2],
        "retry samples {samples:?}"
    );
    ensure!(
        (eval.total - 2.0).abs() <= 1e-12,
        "retry total {}",
        eval.total
    );

    // Three failures.
    let scripted = Arc::new(ScriptedBackend::repeating("I am unable to answer."));
    let env = Environment::new(scripted.clone(), QuerySettings::default());
    match compute_reward(&env, &["*H".to_string()], &three) {
        Err(RewardError::RewardUnavailable { attempts: 3, .. }) => {}
        other => return Err(format!("three failures gave {other:?}")),
    }
    ensure!(
        scripted.requests().len() == 3,
        "{} requests after three failures",
        scripted.requests().len()
    );

    Ok(format!(
        "{} fixture cases, retry and give-up protocol",
        fixtures.cases.len()
    ))
}

fn all_methods_json(seed: u64) -> Result<Vec<(Method, TreeDump)>, String> {
    let env = mock_env(seed);
    let space = ActionSpace::default();
    let query = oc_query();
    let fp = env.fingerprint();
    let cot = run_cot(&query, &env).map_err(|e| e.to_string())?;
    let sc = run_self_consistency(&query, &env, 10).map_err(|e| e.to_string())?;
    let tot_config = TotConfig::default();
    let tot = run_tot_bfs(&query, &env, &space, tot_config).map_err(|e| e.to_string())?;
    let config = SearchConfig {
        rng_seed: seed,
        ..SearchConfig::default()
    };
    let mcr = run_search(&query, &env, &space, config, &mut |_| {}).map_err(|e| e.to_string())?;
    Ok(vec![
        (
            Method::Cot,
            TreeDump::from_outcome(
                Method::Cot,
                "oc-oh",
                serde_json::Value::Null,
                fp.clone(),
                &cot,
            ),
        ),
        (
            Method::Sc,
            TreeDump::from_self_consistency(
                "oc-oh",
                serde_json::json!({"trials": 10}),
                fp.clone(),
                &sc,
            ),
        ),
        (
            Method::Tot,
            TreeDump::from_outcome(
                Method::Tot,
                "oc-oh",
                config_json(&tot_config),
                fp.clone(),
                &tot,
            ),
        ),
        (
            Method::Mcr,
            TreeDump::from_outcome(Method::Mcr, "oc-oh", config_json(&config), fp, &mcr),
        ),
    ])
}

fn determinism(ledger: &mut Ledger) -> Outcome {
    let first = all_methods_json(7)?;
    let second = all_methods_json(7)?;
    for ((method, a), (_, b)) in first.iter().zip(&second) {
        let (ja, jb) = (a.to_json(), b.to_json());
        ensure!(
            ja.as_bytes() == jb.as_bytes(),
            "{} dumps differ between runs",
            method.as_str()
        );
    }
    let sizes: Vec<String> = first
        .iter()
        .map(|(m, d)| format!("{} {}B", m.as_str(), d.to_json().len()))
        .collect();
    for (method, dump) in first {
        ledger.record(format!("determinism {}", method.as_str()), dump);
    }
    Ok(format!("byte-identical: {}", sizes.join(", ")))
}

fn directional_trend(ledger: &mut Ledger) -> Outcome {
    let seeds = 20u64;
    let start = Instant::now();
    let mut sums: BTreeMap<Method, f64> = BTreeMap::new();
    let mut mcr_depth = 0.0;
    let mut mcr_wins = 0;
    for seed in 0..seeds {
        let dumps = all_methods_json(seed)?;
        let reward = |m: Method| {
            dumps
                .iter()
                .find(|(x, _)| *x == m)
                .unwrap()
                .1
                .metrics
                .unwrap()
        };
        let (tot, mcr) = (reward(Method::Tot), reward(Method::Mcr));
        ensure!(
            mcr.n_prompts == 301 && tot.n_prompts <= 301,
            "seed {seed}: budgets {} vs {}",
            mcr.n_prompts,
            tot.n_prompts
        );
        if mcr.best_reward >= tot.best_reward {
            mcr_wins += 1;
        }
        mcr_depth += mcr.d_max as f64;
        for m in Method::ALL {
            *sums.entry(m).or_default() += reward(m).best_reward;
        }
        if seed == 0 {
            for (m, d) in dumps {
                ledger.record(format!("trend seed 0 {}", m.as_str()), d);
            }
        }
    }
    let n = seeds as f64;
    let mean = |m: Method| sums[&m] / n;
    let (cot, sc, tot, mcr) = (
        mean(Method::Cot),
        mean(Method::Sc),
        mean(Method::Tot),
        mean(Method::Mcr),
    );
    let depth = mcr_depth / n;
    let elapsed = start.elapsed();
    let summary = format!(
        "means cot {cot:.2} sc {sc:.2} tot {tot:.2} mcr {mcr:.2}; mcr >= tot in {mcr_wins}/{seeds}; mcr d_max {depth:.2}; {elapsed:.1?}"
    );
    ensure!(
        mcr >= tot && tot > sc && sc > cot,
        "ordering violated: {summary}"
    );
    ensure!(
        mcr_wins as f64 >= 0.6 * n,
        "mcr >= tot in too few seeds: {summary}"
    );
    ensure!(depth > 5.0, "mcr depth too shallow: {summary}");
    ensure!(elapsed < Duration::from_secs(120), "too slow: {summary}");
    Ok(summary)
}

fn baseline_contracts(ledger: &mut Ledger) -> Outcome {
    let counter = Arc::new(CallCounter::new(
        MockBackend::new(MockProfile::new(11, Landscape::PropertyKeyed)).expect("mock"),
    ));
    let env = Environment::new(counter.clone(), QuerySettings::default());
    let cot = run_cot(&oc_query(), &env).map_err(|e| e.to_string())?;
    ensure!(
        counter.answer_calls() == 1,
        "cot made {} answer calls",
        counter.answer_calls()
    );
    ensure!(
        cot.metrics.n_prompts == 1,
        "cot N_P = {}",
        cot.metrics.n_prompts
    );

    let sc = run_self_consistency(&oc_query(), &env, 10).map_err(|e| e.to_string())?;
    let dump = TreeDump::from_self_consistency(
        "oc-oh",
        serde_json::json!({"trials": 10}),
        env.fingerprint(),
        &sc,
    );
    let stored = TreeDump::from_json(&dump.to_json()).map_err(|e| e.to_string())?;
    let metrics = stored.metrics.ok_or("sc dump has no metrics")?;
    ensure!(metrics.n_prompts == 10, "sc N_P = {}", metrics.n_prompts);
    ensure!(
        stored.trials.len() == 10,
        "{} stored trials",
        stored.trials.len()
    );
    let max = stored
        .trials
        .iter()
        .map(|t| t.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    ensure!(
        metrics.best_reward == max,
        "sc reward {} but max trial {max}",
        metrics.best_reward
    );
    ensure!(
        max_trial_reward(&stored.trials).map(|(_, r)| r) == Some(max),
        "max_trial_reward disagrees"
    );
    let distinct: std::collections::HashSet<u64> =
        stored.trials.iter().map(|t| t.reward.to_bits()).collect();

    ledger.record(
        "contract cot",
        TreeDump::from_outcome(
            Method::Cot,
            "oc-oh",
            serde_json::Value::Null,
            env.fingerprint(),
            &cot,
        ),
    );
    ledger.record("contract sc", dump);
    Ok(format!(
        "cot 1 answer call, N_P 1; sc N_P 10, reward {max:.3} = max of {} distinct trial rewards",
        distinct.len()
    ))
}

fn round_trip(ledger: &mut Ledger) -> Outcome {
    ensure!(!ledger.dumps.is_empty(), "no dumps were recorded");
    for (label, dump) in &ledger.dumps {
        let original = dump.tree().map_err(|e| format!("{label}: {e}"))?;
        let back = TreeDump::from_json(&dump.to_json()).map_err(|e| format!("{label}: {e}"))?;
        ensure!(&back == dump, "{label}: document differs after round trip");
        let tree = back.tree().map_err(|e| format!("{label}: {e}"))?;
        ensure!(tree == original, "{label}: tree differs after round trip");
        ensure!(
            back.metrics == dump.metrics,
            "{label}: stored metrics differ"
        );
        if !tree.is_empty() {
            ensure!(
                tree.metrics().ok() == original.metrics().ok(),
                "{label}: recomputed metrics differ"
            );
        }
    }
    Ok(format!("{} dumps round-tripped", ledger.dumps.len()))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("node budget", node_budget),
        ("value consistency", value_consistency),
        ("selection oracle", selection_oracle),
        ("tot node counts", tot_counts),
        ("legality rules", legality_suite),
        ("reward pipeline", reward_pipeline),
        ("determinism", determinism),
        ("directional trend", directional_trend),
        ("baseline contracts", baseline_contracts),
        ("serialization round trip", round_trip),
    ];
    let mut ledger = Ledger::default();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut ledger)))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        match result {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({reason})", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
