//! The multi-objective evolutionary engine: fast non-dominated sorting,
//! crowding distance, binary tournament selection, BLX-alpha crossover,
//! Gaussian mutation, and elitist survival.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{clamp_in_place, random_genome, Genome, Scenario};
use crate::kpi::VulnerabilityRecord;
use crate::objectives::{EvaluationResult, ObjectiveVector};
use crate::rng::{self, tags};

/// GA hyperparameters. Defaults: mu = 40, G = 25, BLX-alpha 0.5 at
/// p_c = 0.9, Gaussian mutation at p_m = 0.5 with sigma = 50.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub mu: usize,
    pub generations: usize,
    pub p_c: f64,
    pub alpha: f64,
    pub p_m: f64,
    pub sigma: f64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            mu: 40,
            generations: 25,
            p_c: 0.9,
            alpha: 0.5,
            p_m: 0.5,
            sigma: 50.0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mu < 2 || !self.mu.is_multiple_of(2) {
            return Err(Error::InvalidConfig {
                field: "ga.mu".into(),
                reason: "population size must be even and at least 2".into(),
            });
        }
        for (name, p) in [("ga.p_c", self.p_c), ("ga.p_m", self.p_m)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig {
                    field: name.into(),
                    reason: "probability must lie in [0, 1]".into(),
                });
            }
        }
        if self.alpha < 0.0 || self.sigma < 0.0 {
            return Err(Error::InvalidConfig {
                field: "ga.alpha/sigma".into(),
                reason: "must be nonnegative".into(),
            });
        }
        Ok(())
    }

    /// Evaluator calls one run consumes: the initial population plus one
    /// offspring batch per generation. Traditional runs are budget-matched
    /// to this.
    pub fn budget(&self) -> usize {
        self.mu + self.generations * self.mu
    }
}

/// A genome with its fitness and the sorting metadata NSGA-II works on.
/// Rank and crowding are only meaningful relative to the population they
/// were assigned in.
#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

/// Pareto dominance under maximization: `a` is no worse everywhere and
/// strictly better somewhere.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let (a, b) = (a.as_array(), b.as_array());
    let mut strictly_better = false;
    for (x, y) in a.iter().zip(&b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly_better = true;
        }
    }
    strictly_better
}

/// Deb's fast non-dominated sort. Returns the fronts as index lists into
/// `objectives`; front 0 is the non-dominated set.
pub fn fast_nondominated_sort(objectives: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objectives.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objectives[i], &objectives[j]) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&objectives[j], &objectives[i]) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance within one front. Boundary individuals of each
/// discriminating objective get +inf; interior ones accumulate the
/// normalized neighbor gap. Objectives with zero range contribute nothing.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let k = front.len();
    if k <= 2 {
        return vec![f64::INFINITY; k];
    }
    let mut dist = vec![0.0; k];
    for obj in 0..3 {
        let value = |i: usize| front[i].as_array()[obj];
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let range = value(order[k - 1]) - value(order[0]);
        if range <= 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[k - 1]] = f64::INFINITY;
        for w in 1..k - 1 {
            if dist[order[w]].is_finite() {
                dist[order[w]] += (value(order[w + 1]) - value(order[w - 1])) / range;
            }
        }
    }
    dist
}

/// Assign rank and crowding across a whole population; returns the fronts.
pub fn assign_fronts(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let objectives: Vec<ObjectiveVector> = pop.iter().map(|i| i.objectives).collect();
    let fronts = fast_nondominated_sort(&objectives);
    for (rank, front) in fronts.iter().enumerate() {
        let front_objs: Vec<ObjectiveVector> = front.iter().map(|&i| objectives[i]).collect();
        let crowding = crowding_distance(&front_objs);
        for (&i, &d) in front.iter().zip(&crowding) {
            pop[i].rank = rank;
            pop[i].crowding = d;
        }
    }
    fronts
}

/// Binary tournament on (rank, crowding): lower rank wins, then larger
/// crowding, then a fair coin.
pub fn tournament_select(pop: &[Individual], rng: &mut impl Rng) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    let (a, b) = (&pop[i], &pop[j]);
    if a.rank != b.rank {
        return if a.rank < b.rank { i } else { j };
    }
    if a.crowding != b.crowding {
        return if a.crowding > b.crowding { i } else { j };
    }
    if rng.random::<f64>() < 0.5 {
        i
    } else {
        j
    }
}

/// BLX-alpha blend crossover. With probability 1 - p_c the parents pass
/// through unchanged; otherwise each free gene of each child is drawn
/// uniformly from the parents' interval extended by alpha on both sides,
/// then clamped. Frozen genes are untouched.
pub fn blx_crossover(
    p1: &Genome,
    p2: &Genome,
    alpha: f64,
    p_c: f64,
    rng: &mut impl Rng,
) -> Result<(Genome, Genome)> {
    if !p1.same_layout(p2) {
        return Err(Error::LayoutMismatch);
    }
    let mut c1 = p1.clone();
    let mut c2 = p2.clone();
    if rng.random::<f64>() >= p_c {
        return Ok((c1, c2));
    }
    let scenario = Arc::clone(p1.scenario());
    for g in 0..scenario.n_genes() {
        if scenario.is_frozen(g) {
            continue;
        }
        let (a, b) = (p1.values()[g], p2.values()[g]);
        let range = (a - b).abs();
        let lo = a.min(b) - alpha * range;
        let hi = a.max(b) + alpha * range;
        let mut draw = || if hi > lo { rng.random_range(lo..hi) } else { lo };
        c1.values_mut()[g] = draw();
        c2.values_mut()[g] = draw();
    }
    clamp_in_place(&mut c1);
    clamp_in_place(&mut c2);
    Ok((c1, c2))
}

/// Gaussian mutation: with probability p_m (per individual) every free gene
/// is perturbed by Normal(0, sigma_g), then clamped. Position genes use
/// `sigma` directly (meters); other genes scale it to 10% of their range.
pub fn gaussian_mutation(
    mut genome: Genome,
    p_m: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Genome {
    if rng.random::<f64>() >= p_m {
        return genome;
    }
    let scenario = Arc::clone(genome.scenario());
    for g in 0..scenario.n_genes() {
        if scenario.is_frozen(g) {
            continue;
        }
        let sigma_g = scenario.mutation_sigma(g, sigma);
        let normal = Normal::new(0.0, sigma_g).expect("finite sigma");
        genome.values_mut()[g] += normal.sample(rng);
    }
    clamp_in_place(&mut genome);
    genome
}

/// One evaluated genome within a run, with everything the campaign layer
/// needs to account for it.
#[derive(Debug, Clone)]
pub struct EvalLog {
    pub eval_index: usize,
    pub seed: u64,
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub records: Vec<VulnerabilityRecord>,
}

/// Per-generation convergence statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Running total of vulnerability records across every evaluation so
    /// far in the run.
    pub best_cumulative_vulns: u64,
    pub max_f1: f64,
    pub max_f2: f64,
    pub max_f3: f64,
    pub evals_used: usize,
}

/// Everything `evolve` returns: the final non-dominated set, per-generation
/// history, and the log of every evaluation performed.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub front: Vec<Individual>,
    pub history: Vec<GenerationStats>,
    pub evals: Vec<EvalLog>,
}

fn objective_maxima(pop: &[Individual]) -> [f64; 3] {
    let mut maxima = [f64::NEG_INFINITY; 3];
    for ind in pop {
        for (m, v) in maxima.iter_mut().zip(ind.objectives.as_array()) {
            *m = m.max(v);
        }
    }
    maxima
}

/// Run the full evolutionary loop: initialize mu random configurations,
/// then per generation select, cross, mutate, evaluate the offspring, and
/// keep the best mu of the combined population by (rank, crowding).
/// Deterministic for a fixed seed regardless of evaluation parallelism.
pub fn evolve<F>(
    scenario: &Arc<Scenario>,
    cfg: &GaConfig,
    seed: u64,
    evaluator: F,
) -> Result<EvolveOutcome>
where
    F: Fn(&Genome, u64) -> Result<EvaluationResult> + Sync,
{
    cfg.validate()?;
    let mut ga_rng = rng::stream(seed, &[tags::GA]);
    let mut evals: Vec<EvalLog> = Vec::with_capacity(cfg.budget());
    let mut history = Vec::with_capacity(cfg.generations + 1);

    // One simulation realization per run: every genome in this run is
    // scored under the same mobility/shadowing/policy-noise draw, so
    // fitness is a deterministic function of the genome and selection
    // never chases seed luck. Seed diversity lives on the trial axis.
    let eval_seed = rng::derive_seed(seed, &[tags::EVAL]);

    let evaluate_batch = |genomes: Vec<Genome>,
                          first_index: usize,
                          evals: &mut Vec<EvalLog>|
     -> Result<Vec<Individual>> {
        let indexed: Vec<(usize, Genome)> = genomes
            .into_iter()
            .enumerate()
            .map(|(k, g)| (first_index + k, g))
            .collect();
        let results: Vec<(usize, Genome, Result<EvaluationResult>)> = indexed
            .into_par_iter()
            .map(|(idx, genome)| {
                let result = evaluator(&genome, eval_seed);
                (idx, genome, result)
            })
            .collect();
        let mut out = Vec::with_capacity(results.len());
        for (idx, genome, result) in results {
            let result = result?;
            evals.push(EvalLog {
                eval_index: idx,
                seed: result.seed,
                genome: genome.clone(),
                objectives: result.objectives,
                records: result.records,
            });
            out.push(Individual {
                genome,
                objectives: result.objectives,
                rank: 0,
                crowding: 0.0,
            });
        }
        Ok(out)
    };

    let init: Vec<Genome> = (0..cfg.mu)
        .map(|_| random_genome(scenario, &mut ga_rng))
        .collect();
    let mut pop = evaluate_batch(init, 0, &mut evals)?;
    assign_fronts(&mut pop);

    let push_stats = |history: &mut Vec<GenerationStats>,
                      pop: &[Individual],
                      evals: &[EvalLog],
                      generation: usize| {
        let [max_f1, max_f2, max_f3] = objective_maxima(pop);
        history.push(GenerationStats {
            generation,
            best_cumulative_vulns: evals.iter().map(|e| e.records.len() as u64).sum(),
            max_f1,
            max_f2,
            max_f3,
            evals_used: evals.len(),
        });
    };
    push_stats(&mut history, &pop, &evals, 0);

    for generation in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(cfg.mu);
        for _ in 0..cfg.mu / 2 {
            let p1 = tournament_select(&pop, &mut ga_rng);
            let p2 = tournament_select(&pop, &mut ga_rng);
            let (c1, c2) = blx_crossover(
                &pop[p1].genome,
                &pop[p2].genome,
                cfg.alpha,
                cfg.p_c,
                &mut ga_rng,
            )?;
            offspring.push(gaussian_mutation(c1, cfg.p_m, cfg.sigma, &mut ga_rng));
            offspring.push(gaussian_mutation(c2, cfg.p_m, cfg.sigma, &mut ga_rng));
        }
        let offspring = evaluate_batch(offspring, evals.len(), &mut evals)?;

        let mut union = pop;
        union.extend(offspring);
        assign_fronts(&mut union);

        // elitist truncation: whole fronts first, then crowding, with a
        // stable hash tie-break for determinism
        let mut order: Vec<usize> = (0..union.len()).collect();
        order.sort_by(|&a, &b| {
            union[a]
                .rank
                .cmp(&union[b].rank)
                .then(union[b].crowding.total_cmp(&union[a].crowding))
                .then(union[a].genome.hash().cmp(&union[b].genome.hash()))
        });
        let mut selected = vec![false; union.len()];
        for &i in order.iter().take(cfg.mu) {
            selected[i] = true;
        }
        pop = union
            .into_iter()
            .zip(selected)
            .filter_map(|(ind, keep)| keep.then_some(ind))
            .collect();
        push_stats(&mut history, &pop, &evals, generation);
    }

    let front = pop.iter().filter(|i| i.rank == 0).cloned().collect();
    Ok(EvolveOutcome {
        front,
        history,
        evals,
    })
}
