//! Experiment orchestration: AI-fuzzing runs versus budget-matched
//! traditional (deterministic, feedback-free) runs across scenarios,
//! policies, and trials, plus cross-method aggregation.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::genome::{scenario_spec, Genome, GenomeFile, Scenario, ScenarioKind};
use crate::kpi::VulnKind;
use crate::nsga2::{self, EvalLog, GenerationStats};
use crate::objectives::{evaluate, EvaluationResult};
use crate::policies::PolicyKind;
use crate::rng::{self, tags};
use crate::stats::{self, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ai,
    Traditional,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Ai => "ai",
            Method::Traditional => "traditional",
        }
    }

    pub fn tag(&self) -> u64 {
        match self {
            Method::Ai => 0,
            Method::Traditional => 1,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ai" => Ok(Method::Ai),
            "traditional" => Ok(Method::Traditional),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

/// One row of runs.csv.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRow {
    pub scenario: ScenarioKind,
    pub policy: PolicyKind,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub total_vulns: u64,
    pub critical_count: u64,
    pub mean_severity: f64,
    pub evals_used: usize,
}

impl RunRow {
    pub fn run_id(&self) -> String {
        format!(
            "{}-{}-{}-t{}",
            self.scenario, self.policy, self.method, self.trial
        )
    }
}

/// One row of records.csv: a vulnerability record with full provenance,
/// including the genome that produced it (replayable via the replay
/// command).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordRow {
    pub scenario: ScenarioKind,
    pub policy: PolicyKind,
    pub method: Method,
    pub trial: usize,
    pub run_id: String,
    pub eval_index: usize,
    pub eval_seed: u64,
    pub window_index: usize,
    pub kind: VulnKind,
    pub severity: u8,
    pub critical: bool,
    pub measured_value: f64,
    pub threshold: f64,
    pub genome: Arc<String>,
}

/// One row of history.csv: per-generation convergence of a fuzzing run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryRow {
    pub scenario: ScenarioKind,
    pub policy: PolicyKind,
    pub method: Method,
    pub trial: usize,
    pub generation: usize,
    pub best_cumulative_vulns: u64,
    pub max_f1: f64,
    pub max_f2: f64,
    pub max_f3: f64,
    pub evals_used: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: RunRow,
    pub records: Vec<RecordRow>,
    pub history: Vec<HistoryRow>,
}

/// Seed of one run, derived so that every (scenario, policy, method, trial)
/// cell gets an independent stream no matter the execution order.
pub fn run_seed(
    master: u64,
    scenario: ScenarioKind,
    policy: PolicyKind,
    method: Method,
    trial: usize,
) -> u64 {
    rng::derive_seed(
        master,
        &[
            tags::RUN,
            scenario.tag(),
            policy.tag(),
            method.tag(),
            trial as u64,
        ],
    )
}

fn assemble_output(
    scenario_kind: ScenarioKind,
    policy: PolicyKind,
    method: Method,
    trial: usize,
    seed: u64,
    evals: Vec<EvalLog>,
    history: Vec<GenerationStats>,
) -> RunOutput {
    let mut total_vulns = 0u64;
    let mut critical_count = 0u64;
    let mut severity_sum = 0u64;
    let mut records = Vec::new();
    let run_id = format!("{scenario_kind}-{policy}-{method}-t{trial}");
    for log in &evals {
        if log.records.is_empty() {
            continue;
        }
        let genome_json = Arc::new(GenomeFile::from_genome(&log.genome).to_json());
        for r in &log.records {
            total_vulns += 1;
            critical_count += u64::from(r.critical);
            severity_sum += u64::from(r.severity);
            records.push(RecordRow {
                scenario: scenario_kind,
                policy,
                method,
                trial,
                run_id: run_id.clone(),
                eval_index: log.eval_index,
                eval_seed: log.seed,
                window_index: r.window_index,
                kind: r.kind,
                severity: r.severity,
                critical: r.critical,
                measured_value: r.measured_value,
                threshold: r.threshold,
                genome: Arc::clone(&genome_json),
            });
        }
    }
    let mean_severity = if total_vulns > 0 {
        severity_sum as f64 / total_vulns as f64
    } else {
        0.0
    };
    let history = history
        .into_iter()
        .map(|g| HistoryRow {
            scenario: scenario_kind,
            policy,
            method,
            trial,
            generation: g.generation,
            best_cumulative_vulns: g.best_cumulative_vulns,
            max_f1: g.max_f1,
            max_f2: g.max_f2,
            max_f3: g.max_f3,
            evals_used: g.evals_used,
        })
        .collect();
    RunOutput {
        row: RunRow {
            scenario: scenario_kind,
            policy,
            method,
            trial,
            seed,
            total_vulns,
            critical_count,
            mean_severity,
            evals_used: evals.len(),
        },
        records,
        history,
    }
}

/// One AI-fuzzing run: a full NSGA-II evolution whose vulnerability count
/// covers every evaluation performed, not only the final front.
pub fn run_ai_fuzzing(
    cfg: &RunConfig,
    scenario_kind: ScenarioKind,
    policy: PolicyKind,
    trial: usize,
) -> Result<RunOutput> {
    let seed = run_seed(cfg.seed, scenario_kind, policy, Method::Ai, trial);
    let scenario = Arc::new(scenario_spec(scenario_kind, &cfg.network));
    let evaluator = |genome: &Genome, eval_seed: u64| -> Result<EvaluationResult> {
        evaluate(
            genome,
            policy,
            &cfg.policy,
            &cfg.network,
            &cfg.eval,
            eval_seed,
        )
    };
    let outcome = nsga2::evolve(&scenario, &cfg.ga, seed, evaluator)?;
    Ok(assemble_output(
        scenario_kind,
        policy,
        Method::Ai,
        trial,
        seed,
        outcome.evals,
        outcome.history,
    ))
}

/// The deterministic test-case sequence of a traditional run: a stratified
/// sweep over the scenario bounds, one stratification level per named gene
/// slice (UE positions, cell load bias, interference scale, ISD scale) per
/// test case. Levels sit at the centers of `budget` equal strata and the
/// slices are paired by seeded permutations, so the level set is fixed and
/// only the pairing depends on the seed. Every gene maps its slice's level
/// through its own bounds; a budget of 1 degenerates to the bounds-midpoint
/// genome. No evaluation feedback enters the sequence.
pub fn traditional_genomes(scenario: &Arc<Scenario>, budget: usize, seed: u64) -> Vec<Genome> {
    let layout = scenario.layout;
    let slice_of = |g: usize| -> u64 {
        if layout.is_position_gene(g) {
            0
        } else if g < layout.interference() {
            1
        } else if g == layout.interference() {
            2
        } else {
            3
        }
    };
    let mut slice_levels: Vec<Vec<f64>> = Vec::with_capacity(4);
    for slice in 0..4u64 {
        let mut strata: Vec<usize> = (0..budget).collect();
        strata.shuffle(&mut rng::stream(seed, &[tags::TRADITIONAL, slice]));
        slice_levels.push(
            strata
                .into_iter()
                .map(|s| (s as f64 + 0.5) / budget as f64)
                .collect(),
        );
    }
    (0..budget)
        .map(|k| {
            let values = (0..scenario.n_genes())
                .map(|g| match scenario.frozen[g] {
                    Some(v) => v,
                    None => {
                        let (lo, hi) = scenario.bounds[g];
                        lo + slice_levels[slice_of(g) as usize][k] * (hi - lo)
                    }
                })
                .collect();
            Genome::new(values, Arc::clone(scenario)).expect("layout consistent")
        })
        .collect()
}

/// One traditional-testing run: a feedback-free deterministic genome grid,
/// budget-matched to the paired fuzzing run, counted by the same rules.
pub fn run_traditional(
    cfg: &RunConfig,
    scenario_kind: ScenarioKind,
    policy: PolicyKind,
    trial: usize,
    budget: usize,
) -> Result<RunOutput> {
    let seed = run_seed(cfg.seed, scenario_kind, policy, Method::Traditional, trial);
    let scenario = Arc::new(scenario_spec(scenario_kind, &cfg.network));
    let genomes = traditional_genomes(&scenario, budget, seed);
    // same convention as the fuzzing runs: one realization per run
    let eval_seed = rng::derive_seed(seed, &[tags::EVAL]);
    let results: Vec<(usize, Genome, Result<EvaluationResult>)> = genomes
        .into_par_iter()
        .enumerate()
        .map(|(idx, genome)| {
            let result = evaluate(
                &genome,
                policy,
                &cfg.policy,
                &cfg.network,
                &cfg.eval,
                eval_seed,
            );
            (idx, genome, result)
        })
        .collect();
    let mut evals = Vec::with_capacity(results.len());
    for (idx, genome, result) in results {
        let result = result?;
        evals.push(EvalLog {
            eval_index: idx,
            seed: result.seed,
            genome,
            objectives: result.objectives,
            records: result.records,
        });
    }
    Ok(assemble_output(
        scenario_kind,
        policy,
        Method::Traditional,
        trial,
        seed,
        evals,
        Vec::new(),
    ))
}

/// Full campaign artifacts, rows in plan order.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub runs: Vec<RunRow>,
    pub records: Vec<RecordRow>,
    pub history: Vec<HistoryRow>,
    pub report: CampaignReport,
}

/// Execute a campaign over methods x scenarios x policies x trials on a
/// work pool of `jobs` threads (0 = one per core). Output is identical for
/// any `jobs` value: every run derives its own seed and rows are assembled
/// in plan order.
pub fn execute(cfg: &RunConfig, methods: &[Method], jobs: usize) -> Result<CampaignOutput> {
    let budget = cfg.ga.budget();
    let mut plan = Vec::new();
    for &method in methods {
        for &scenario in &cfg.scenarios {
            for &policy in &cfg.policies {
                for trial in 0..cfg.trials {
                    plan.push((method, scenario, policy, trial));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig {
            field: "jobs".into(),
            reason: e.to_string(),
        })?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| {
        plan.par_iter()
            .map(|&(method, scenario, policy, trial)| match method {
                Method::Ai => run_ai_fuzzing(cfg, scenario, policy, trial),
                Method::Traditional => run_traditional(cfg, scenario, policy, trial, budget),
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(plan.len());
    let mut records = Vec::new();
    let mut history = Vec::new();
    for output in outputs {
        let output = output?;
        runs.push(output.row);
        records.extend(output.records);
        history.extend(output.history);
    }

    let ai: Vec<RunRow> = runs.iter().filter(|r| r.method == Method::Ai).cloned().collect();
    let trad: Vec<RunRow> = runs
        .iter()
        .filter(|r| r.method == Method::Traditional)
        .cloned()
        .collect();
    let severity = |method: Method| severity_counts(records.iter().filter(|r| r.method == method));
    let report = build_report(&ai, &trad, severity(Method::Ai), severity(Method::Traditional))?;

    Ok(CampaignOutput {
        runs,
        records,
        history,
        report,
    })
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Per-method aggregates of a campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub total_vulns: u64,
    pub vulns_per_run_mean: f64,
    pub vulns_per_run_sd: f64,
    pub vulns_per_run_ci95: (f64, f64),
    pub critical_total: u64,
    pub critical_per_run_mean: f64,
    pub critical_per_run_sd: f64,
    pub critical_per_run_ci95: (f64, f64),
    pub mean_severity: f64,
    /// Shannon entropy (nats) of the severity-class distribution.
    pub shannon_diversity: f64,
    /// Record count per severity class 1..=5.
    pub severity_counts: [u64; 5],
}

/// Cross-method statistics of a paired campaign.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    /// (ai_total - traditional_total) / traditional_total; None when the
    /// traditional total is zero.
    pub improvement_rate: Option<f64>,
    /// Welch's t on per-run vulnerability counts.
    pub welch_vulns: TestResult,
    /// Mann-Whitney U on per-run critical-failure counts.
    pub mann_whitney_critical: TestResult,
    /// Cohen's d on per-run vulnerability counts.
    pub cohens_d_vulns: f64,
}

pub const REPORT_SCHEMA: &str = "tsfuzz-report-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSummary {
    pub scenarios: Vec<ScenarioKind>,
    pub policies: Vec<PolicyKind>,
    pub trials: usize,
    pub runs_per_method: usize,
    pub evals_per_run: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema: String,
    pub plan: PlanSummary,
    pub ai: Option<MethodSummary>,
    pub traditional: Option<MethodSummary>,
    pub comparison: Option<Comparison>,
}

pub fn severity_counts<'a>(records: impl Iterator<Item = &'a RecordRow>) -> [u64; 5] {
    let mut counts = [0u64; 5];
    for r in records {
        counts[usize::from(r.severity).clamp(1, 5) - 1] += 1;
    }
    counts
}

fn summarize(method: Method, rows: &[RunRow], severity_counts: [u64; 5]) -> MethodSummary {
    let vulns: Vec<f64> = rows.iter().map(|r| r.total_vulns as f64).collect();
    let criticals: Vec<f64> = rows.iter().map(|r| r.critical_count as f64).collect();
    let total_vulns: u64 = rows.iter().map(|r| r.total_vulns).sum();
    let critical_total: u64 = rows.iter().map(|r| r.critical_count).sum();
    let severity_total: u64 = severity_counts.iter().sum();
    let severity_weighted: u64 = severity_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (i as u64 + 1) * c)
        .sum();
    let (mean, sd, ci) = moments(&vulns);
    let (cmean, csd, cci) = moments(&criticals);
    MethodSummary {
        method,
        runs: rows.len(),
        total_vulns,
        vulns_per_run_mean: mean,
        vulns_per_run_sd: sd,
        vulns_per_run_ci95: ci,
        critical_total,
        critical_per_run_mean: cmean,
        critical_per_run_sd: csd,
        critical_per_run_ci95: cci,
        mean_severity: if severity_total > 0 {
            severity_weighted as f64 / severity_total as f64
        } else {
            0.0
        },
        shannon_diversity: stats::shannon_diversity(&severity_counts),
        severity_counts,
    }
}

fn moments(x: &[f64]) -> (f64, f64, (f64, f64)) {
    if x.is_empty() {
        return (0.0, 0.0, (0.0, 0.0));
    }
    let mean = stats::mean(x);
    if x.len() < 2 {
        return (mean, 0.0, (mean, mean));
    }
    let sd = stats::sample_sd(x);
    (mean, sd, stats::ci95_from_moments(mean, sd, x.len()))
}

/// Welch's t with honest fallbacks for degenerate variance: equal-mean
/// constant samples compare as (0, 1), different-mean constant samples as
/// maximally significant.
fn welch_or_degenerate(x: &[f64], y: &[f64]) -> TestResult {
    match stats::welch_t(x, y) {
        Ok(r) => r,
        Err(_) => {
            let equal = !x.is_empty() && !y.is_empty() && stats::mean(x) == stats::mean(y);
            // f64::MAX keeps the value JSON-representable
            TestResult {
                statistic: if equal { 0.0 } else { f64::MAX },
                p_value: if equal { 1.0 } else { 0.0 },
                method: stats::TestMethod::WelchT,
                n1: x.len(),
                n2: y.len(),
            }
        }
    }
}

fn check_paired_plan(ai: &[RunRow], trad: &[RunRow]) -> Result<()> {
    if ai.len() != trad.len() {
        return Err(Error::PlanMismatch(format!(
            "{} ai runs vs {} traditional runs",
            ai.len(),
            trad.len()
        )));
    }
    let key = |r: &RunRow| (r.scenario, r.policy, r.trial);
    let mut a: Vec<_> = ai.iter().map(|r| (key(r), r.evals_used)).collect();
    let mut b: Vec<_> = trad.iter().map(|r| (key(r), r.evals_used)).collect();
    a.sort_by(|x, y| format!("{:?}", x.0).cmp(&format!("{:?}", y.0)));
    b.sort_by(|x, y| format!("{:?}", x.0).cmp(&format!("{:?}", y.0)));
    for ((ka, ea), (kb, eb)) in a.iter().zip(&b) {
        if ka != kb {
            return Err(Error::PlanMismatch(format!(
                "run cells differ: {ka:?} vs {kb:?}"
            )));
        }
        if ea != eb {
            return Err(Error::PlanMismatch(format!(
                "budget parity violated at {ka:?}: {ea} vs {eb} evaluations"
            )));
        }
    }
    Ok(())
}

/// Aggregate per-run rows (plus per-method severity-class counts) into the
/// campaign report. Either side may be absent; the comparison requires both
/// sides to come from the same plan with matched budgets.
pub fn aggregate(
    ai: &[RunRow],
    trad: &[RunRow],
    ai_severity: [u64; 5],
    trad_severity: [u64; 5],
) -> Result<CampaignReport> {
    build_report(ai, trad, ai_severity, trad_severity)
}

fn build_report(
    ai: &[RunRow],
    trad: &[RunRow],
    ai_severity: [u64; 5],
    trad_severity: [u64; 5],
) -> Result<CampaignReport> {
    let nonempty = if ai.is_empty() { trad } else { ai };
    if nonempty.is_empty() {
        return Err(Error::PlanMismatch("no runs to aggregate".into()));
    }
    let mut scenarios: Vec<ScenarioKind> = nonempty.iter().map(|r| r.scenario).collect();
    scenarios.dedup();
    let mut policies: Vec<PolicyKind> = nonempty.iter().map(|r| r.policy).collect();
    policies.sort_by_key(|p| p.tag());
    policies.dedup();
    let mut scen_sorted = scenarios.clone();
    scen_sorted.sort_by_key(|s| s.tag());
    scen_sorted.dedup();
    let trials = nonempty.iter().map(|r| r.trial).max().unwrap_or(0) + 1;
    let plan = PlanSummary {
        scenarios: scen_sorted,
        policies,
        trials,
        runs_per_method: nonempty.len(),
        evals_per_run: nonempty.iter().map(|r| r.evals_used).max().unwrap_or(0),
    };

    let ai_summary = (!ai.is_empty()).then(|| summarize(Method::Ai, ai, ai_severity));
    let trad_summary =
        (!trad.is_empty()).then(|| summarize(Method::Traditional, trad, trad_severity));

    let comparison = if !ai.is_empty() && !trad.is_empty() {
        check_paired_plan(ai, trad)?;
        let ai_vulns: Vec<f64> = ai.iter().map(|r| r.total_vulns as f64).collect();
        let trad_vulns: Vec<f64> = trad.iter().map(|r| r.total_vulns as f64).collect();
        let ai_crit: Vec<f64> = ai.iter().map(|r| r.critical_count as f64).collect();
        let trad_crit: Vec<f64> = trad.iter().map(|r| r.critical_count as f64).collect();
        let ai_total: u64 = ai.iter().map(|r| r.total_vulns).sum();
        let trad_total: u64 = trad.iter().map(|r| r.total_vulns).sum();
        let cohens = stats::cohens_d(&ai_vulns, &trad_vulns).unwrap_or(0.0);
        Some(Comparison {
            improvement_rate: (trad_total > 0)
                .then(|| (ai_total as f64 - trad_total as f64) / trad_total as f64),
            welch_vulns: welch_or_degenerate(&ai_vulns, &trad_vulns),
            mann_whitney_critical: stats::mann_whitney_u(&ai_crit, &trad_crit)?,
            cohens_d_vulns: cohens,
        })
    } else {
        None
    };

    Ok(CampaignReport {
        schema: REPORT_SCHEMA.to_string(),
        plan,
        ai: ai_summary,
        traditional: trad_summary,
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.network.n_ues = 8;
        cfg.ga.mu = 4;
        cfg.ga.generations = 1;
        cfg.eval.windows = 2;
        cfg.eval.epochs_per_window = 10;
        cfg.scenarios = vec![ScenarioKind::HighInterference];
        cfg.policies = vec![PolicyKind::A3];
        cfg.trials = 2;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn ai_run_budget_accounting() {
        let mut cfg = desk_config();
        cfg.ga.mu = 2;
        cfg.ga.generations = 0;
        let out = run_ai_fuzzing(&cfg, ScenarioKind::HighInterference, PolicyKind::A3, 0)
            .unwrap();
        assert_eq!(out.row.evals_used, 2);
        assert_eq!(out.history.len(), 1);
        // every record row carries a parseable genome for replay
        for r in &out.records {
            GenomeFile::from_json(&r.genome).unwrap();
        }
    }

    #[test]
    fn ai_run_is_reproducible() {
        let cfg = desk_config();
        let a = run_ai_fuzzing(&cfg, ScenarioKind::HighInterference, PolicyKind::A3, 1)
            .unwrap();
        let b = run_ai_fuzzing(&cfg, ScenarioKind::HighInterference, PolicyKind::A3, 1)
            .unwrap();
        assert_eq!(a.row.total_vulns, b.row.total_vulns);
        assert_eq!(a.row.seed, b.row.seed);
        assert_eq!(a.records.len(), b.records.len());
    }

    #[test]
    fn traditional_grid_midpoint_for_budget_one() {
        let cfg = desk_config();
        let scenario = Arc::new(scenario_spec(ScenarioKind::HighInterference, &cfg.network));
        let genomes = traditional_genomes(&scenario, 1, 99);
        assert_eq!(genomes.len(), 1);
        for (idx, (&g, &(lo, hi))) in genomes[0]
            .values()
            .iter()
            .zip(&scenario.bounds)
            .enumerate()
        {
            let expected = scenario.frozen[idx].unwrap_or((lo + hi) / 2.0);
            assert!((g - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn traditional_grid_is_seed_fixed_and_stratified() {
        let cfg = desk_config();
        let scenario = Arc::new(scenario_spec(ScenarioKind::HighInterference, &cfg.network));
        let a = traditional_genomes(&scenario, 8, 4);
        let b = traditional_genomes(&scenario, 8, 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
        }
        // per slice, the 8 levels hit the 8 stratum centers exactly once
        let gene = scenario.layout.interference();
        let (lo, hi) = scenario.bounds[gene];
        let mut values: Vec<f64> = a.iter().map(|g| g.values()[gene]).collect();
        values.sort_by(f64::total_cmp);
        for (i, v) in values.iter().enumerate() {
            let center = lo + (i as f64 + 0.5) / 8.0 * (hi - lo);
            assert!((v - center).abs() < 1e-12);
        }
        // a different seed reorders but keeps the same level set
        let c = traditional_genomes(&scenario, 8, 5);
        let mut other: Vec<f64> = c.iter().map(|g| g.values()[gene]).collect();
        other.sort_by(f64::total_cmp);
        assert_eq!(values, other);
        // genes of the same slice share their case's level; different
        // slices are paired by different permutations
        let layout = scenario.layout;
        for case in &a {
            let b0 = case.values()[layout.load_bias(0)];
            for cell in 1..layout.n_cells {
                assert_eq!(case.values()[layout.load_bias(cell)], b0);
            }
        }
        let bias_levels: Vec<f64> = a.iter().map(|g| g.values()[layout.load_bias(0)]).collect();
        let pos_levels: Vec<f64> = a.iter().map(|g| g.values()[layout.pos_x(0)] / 250.0).collect();
        assert_ne!(
            bias_levels
                .iter()
                .map(|v| (v * 1e9) as i64)
                .collect::<Vec<_>>(),
            pos_levels
                .iter()
                .map(|v| (v * 1e9) as i64)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn traditional_run_respects_budget_parity() {
        let cfg = desk_config();
        let budget = cfg.ga.budget();
        let out = run_traditional(
            &cfg,
            ScenarioKind::HighInterference,
            PolicyKind::A3,
            0,
            budget,
        )
        .unwrap();
        assert_eq!(out.row.evals_used, budget);
        assert!(out.history.is_empty());
    }

    #[test]
    fn fuzzing_runs_find_vulnerabilities_across_seeds() {
        let mut cfg = desk_config();
        cfg.policies = vec![PolicyKind::A3];
        let mut nonzero = 0;
        for trial in 0..10 {
            let out =
                run_ai_fuzzing(&cfg, ScenarioKind::HighInterference, PolicyKind::A3, trial)
                    .unwrap();
            nonzero += u32::from(out.row.total_vulns > 0);
        }
        assert!(nonzero >= 9, "only {nonzero}/10 runs found anything");
    }

    #[test]
    fn execute_emits_rows_in_plan_order_and_reports() {
        let cfg = desk_config();
        let out = execute(&cfg, &[Method::Ai, Method::Traditional], 2).unwrap();
        assert_eq!(out.runs.len(), 4); // 1 scenario x 1 policy x 2 trials x 2 methods
        assert_eq!(out.runs[0].method, Method::Ai);
        assert_eq!(out.runs[3].method, Method::Traditional);
        let report = &out.report;
        assert!(report.ai.is_some());
        assert!(report.traditional.is_some());
        assert!(report.comparison.is_some());
        // aggregates equal the sum of per-run rows
        let ai_total: u64 = out
            .runs
            .iter()
            .filter(|r| r.method == Method::Ai)
            .map(|r| r.total_vulns)
            .sum();
        assert_eq!(report.ai.as_ref().unwrap().total_vulns, ai_total);
    }

    #[test]
    fn aggregate_of_identical_campaigns_is_null_effect() {
        let rows: Vec<RunRow> = (0..6)
            .map(|t| RunRow {
                scenario: ScenarioKind::StableMobility,
                policy: PolicyKind::A3,
                method: Method::Ai,
                trial: t,
                seed: t as u64,
                total_vulns: 10 + t as u64,
                critical_count: t as u64 % 2,
                mean_severity: 2.0,
                evals_used: 8,
            })
            .collect();
        let mut trad = rows.clone();
        for r in trad.iter_mut() {
            r.method = Method::Traditional;
        }
        let sev = [3, 2, 1, 0, 0];
        let report = aggregate(&rows, &trad, sev, sev).unwrap();
        let cmp = report.comparison.unwrap();
        assert_eq!(cmp.improvement_rate, Some(0.0));
        assert_eq!(cmp.cohens_d_vulns, 0.0);
        assert_eq!(cmp.welch_vulns.statistic, 0.0);
        assert!((cmp.welch_vulns.p_value - 1.0).abs() < 1e-9);
        assert!((cmp.mann_whitney_critical.p_value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn aggregate_rejects_mismatched_plans() {
        let row = |trial, method, evals| RunRow {
            scenario: ScenarioKind::StableMobility,
            policy: PolicyKind::A3,
            method,
            trial,
            seed: 0,
            total_vulns: 5,
            critical_count: 0,
            mean_severity: 1.0,
            evals_used: evals,
        };
        let ai = vec![row(0, Method::Ai, 8), row(1, Method::Ai, 8)];
        let trad = vec![row(0, Method::Traditional, 8)];
        assert!(matches!(
            aggregate(&ai, &trad, [0; 5], [0; 5]),
            Err(Error::PlanMismatch(_))
        ));
        // budget parity
        let trad = vec![row(0, Method::Traditional, 8), row(1, Method::Traditional, 9)];
        assert!(matches!(
            aggregate(&ai, &trad, [0; 5], [0; 5]),
            Err(Error::PlanMismatch(_))
        ));
    }

    #[test]
    fn improvement_rate_matches_totals() {
        let mk = |method, vulns| RunRow {
            scenario: ScenarioKind::CoverageHole,
            policy: PolicyKind::Utility,
            method,
            trial: 0,
            seed: 0,
            total_vulns: vulns,
            critical_count: 1,
            mean_severity: 2.0,
            evals_used: 4,
        };
        let ai = vec![mk(Method::Ai, 80), {
            let mut r = mk(Method::Ai, 54);
            r.trial = 1;
            r
        }];
        let trad = vec![mk(Method::Traditional, 60), {
            let mut r = mk(Method::Traditional, 40);
            r.trial = 1;
            r
        }];
        let report = aggregate(&ai, &trad, [1; 5], [1; 5]).unwrap();
        let rate = report.comparison.unwrap().improvement_rate.unwrap();
        assert!((rate - 0.34).abs() < 1e-12);
    }
}
