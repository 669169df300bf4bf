//! The closed simulate-and-score loop: runs a decoded configuration through
//! the network simulation under a chosen policy and maps the run onto the
//! three fitness objectives (instability, QoE degradation, unfairness).

use serde::{Deserialize, Serialize};

use crate::channel::{self, PairMatrix};
use crate::error::Result;
use crate::genome::{decode, Genome};
use crate::kpi::{self, KpiWindow, Thresholds, VulnerabilityRecord};
use crate::netstate::{
    self, HandoverEvent, MobilityModel, NetworkConfig, NetworkState,
};
use crate::policies::{
    self, PolicyConfig, PolicyKind, PolicyState, PolicyView, QStateKey,
};
use crate::rng::{self, tags};

/// f2's epsilon, in Mb/s.
pub const F2_EPSILON_MBPS: f64 = 1e-6;

/// The three objectives, all maximized by the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Variance of per-window handover counts.
    pub f1: f64,
    /// Reciprocal tail throughput, 1/(Thr5% + eps).
    pub f2: f64,
    /// 1 - Jain fairness.
    pub f3: f64,
}

impl ObjectiveVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.f1, self.f2, self.f3]
    }
}

/// Evaluation-harness settings. Defaults: 15 windows of 60 one-second
/// epochs (one window = one minute), 1-5 m/s mobility, 3 s ping-pong
/// horizon, critical when more than 3 UEs ping-pong.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub windows: usize,
    pub epochs_per_window: usize,
    pub epoch_seconds: f64,
    pub speed_range: (f64, f64),
    pub ping_pong_horizon_s: f64,
    pub critical_ue_count: usize,
    pub thresholds: Thresholds,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            windows: 15,
            epochs_per_window: 60,
            epoch_seconds: 1.0,
            speed_range: (1.0, 5.0),
            ping_pong_horizon_s: 3.0,
            critical_ue_count: 3,
            thresholds: Thresholds::default(),
        }
    }
}

impl EvalSettings {
    pub fn total_epochs(&self) -> usize {
        self.windows * self.epochs_per_window
    }

    pub fn window_minutes(&self) -> f64 {
        self.epochs_per_window as f64 * self.epoch_seconds / 60.0
    }
}

/// Everything one evaluation produces. Objectives are recomputable from the
/// stored windows bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub objectives: ObjectiveVector,
    pub windows: Vec<KpiWindow>,
    pub records: Vec<VulnerabilityRecord>,
    pub genome_hash: u64,
    pub seed: u64,
}

/// One per-epoch, per-UE trace row for debugging and replay inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub ue: usize,
    pub cell: usize,
    pub sinr_db: f64,
    pub throughput_bps: f64,
}

/// Population variance of per-window handover counts.
pub fn f1_instability(handover_counts: &[f64]) -> f64 {
    let n = handover_counts.len() as f64;
    let mean = handover_counts.iter().sum::<f64>() / n;
    handover_counts.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n
}

/// 1 / (Thr5% + eps) with the tail throughput in Mb/s.
pub fn f2_qoe(thr_5pct_bps: f64, epsilon_mbps: f64) -> f64 {
    1.0 / (thr_5pct_bps / 1e6 + epsilon_mbps)
}

/// 1 - Jain fairness over the per-UE throughputs.
pub fn f3_unfairness(throughputs: &[f64]) -> f64 {
    1.0 - kpi::jain_index(throughputs)
}

/// Aggregate the stored windows into F(z). f1 runs over per-window total
/// handovers, f2 over the mean of per-window tail throughputs, f3 over the
/// per-window unfairness averaged across windows. Averaging per-UE
/// throughputs across the whole run first would let mobility wash per-UE
/// fortunes toward a common mean and flatten the unfairness signal the
/// search needs, so unfairness is scored where it is observed: per window.
pub fn objectives_from_windows(windows: &[KpiWindow]) -> ObjectiveVector {
    let totals: Vec<f64> = windows
        .iter()
        .map(|w| w.handovers_per_ue.iter().map(|&h| f64::from(h)).sum())
        .collect();
    let f1 = f1_instability(&totals);

    let mean_thr5 =
        windows.iter().map(|w| w.thr_5pct_bps).sum::<f64>() / windows.len() as f64;
    let f2 = f2_qoe(mean_thr5, F2_EPSILON_MBPS);

    let f3 = windows
        .iter()
        .map(|w| f3_unfairness(&w.per_ue_throughput_bps))
        .sum::<f64>()
        / windows.len() as f64;

    ObjectiveVector { f1, f2, f3 }
}

fn shadow_seed(eval_seed: u64, window: usize) -> u64 {
    rng::derive_seed(eval_seed, &[tags::SHADOW, window as u64])
}

/// Q-state observation of each UE's serving link.
fn q_keys(
    state: &NetworkState,
    rsrp: &PairMatrix,
    sinr: &PairMatrix,
) -> Vec<QStateKey> {
    state
        .serving
        .iter()
        .enumerate()
        .map(|(ue, &cell)| {
            policies::q_state_key(
                rsrp.get(ue, cell),
                channel::linear_to_db(sinr.get(ue, cell).max(f64::MIN_POSITIVE)),
                state.loads[cell],
            )
        })
        .collect()
}

/// Run one full evaluation: decode, simulate `windows x epochs` under the
/// policy, compute per-window KPIs and vulnerability records, and score the
/// objective vector. Deterministic per (genome, seed).
pub fn evaluate(
    genome: &Genome,
    policy: PolicyKind,
    policy_cfg: &PolicyConfig,
    net: &NetworkConfig,
    settings: &EvalSettings,
    seed: u64,
) -> Result<EvaluationResult> {
    evaluate_traced(genome, policy, policy_cfg, net, settings, seed, None)
}

/// [`evaluate`] with an optional per-epoch trace sink.
pub fn evaluate_traced(
    genome: &Genome,
    policy: PolicyKind,
    policy_cfg: &PolicyConfig,
    net: &NetworkConfig,
    settings: &EvalSettings,
    seed: u64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EvaluationResult> {
    let setup = decode(genome, net)?;
    let params = net.radio_params(setup.interference_scale);
    let n_ues = net.n_ues;
    let n_max = net.n_max();
    let dt = settings.epoch_seconds;
    let epoch_ms = dt * 1000.0;
    let total_epochs = settings.total_epochs();

    let mut state = netstate::init_state(&setup, net, &params, shadow_seed(seed, 0))?;
    let mut mob_rng = rng::stream(seed, &[tags::MOBILITY]);
    let mut pol_rng = rng::stream(seed, &[tags::POLICY]);
    let mut mobility =
        MobilityModel::new(n_ues, settings.speed_range, net.bbox_side(), &mut mob_rng)?;
    let mut policy_state = PolicyState::new(policy, n_ues, net.n_cells);

    let mut windows = Vec::with_capacity(settings.windows);
    let mut records = Vec::new();

    for w in 0..settings.windows {
        let shadow = channel::draw_shadow_field(
            n_ues,
            net.n_cells,
            params.shadowing_sigma_db,
            shadow_seed(seed, w),
        );
        let window_start = state.time;
        // index into each UE's handover log where this window begins
        let ho_start: Vec<usize> = state.ho_history.iter().map(Vec::len).collect();
        let mut tput_sum = vec![0.0; n_ues];
        let mut ho_count = vec![0u32; n_ues];

        for e in 0..settings.epochs_per_window {
            let epoch = w * settings.epochs_per_window + e;
            netstate::step_mobility(&mut state, &mut mobility, dt, &mut mob_rng);
            channel::fill_gain_matrix(
                &mut state.gains,
                &state.positions,
                &setup.sites,
                params.carrier_frequency_hz,
                &shadow,
            );
            let sinr = channel::sinr_matrix(&state.gains, &params, &state.active);
            let rsrp = channel::rsrp_matrix(&state.gains, &params);
            let pre_keys = q_keys(&state, &rsrp, &sinr);

            let targets = {
                let view = PolicyView {
                    serving: &state.serving,
                    rsrp_dbm: &rsrp,
                    sinr: &sinr,
                    loads: &state.loads,
                    active: &state.active,
                    join_load_increment: 1.0 / n_max as f64,
                };
                policy_state.decide(
                    &view,
                    policy_cfg,
                    &pre_keys,
                    epoch,
                    total_epochs,
                    epoch_ms,
                    &mut pol_rng,
                )
            };
            let changed = netstate::apply_decisions(&mut state, &targets)?;
            netstate::update_loads(&mut state, &setup.background_load, n_max);
            let occupancy = netstate::effective_occupancy(
                &state.cell_counts(),
                &setup.background_load,
                n_max,
            );
            let tput = netstate::shared_throughput_from_sinr(
                &state.serving,
                &sinr,
                &occupancy,
                params.bandwidth_hz,
            );

            for ue in 0..n_ues {
                tput_sum[ue] += tput[ue];
                ho_count[ue] += u32::from(changed[ue]);
            }

            if let PolicyState::QLearning(_) = policy_state {
                let jain = kpi::jain_index(&tput);
                let post_keys = q_keys(&state, &rsrp, &sinr);
                let q = policy_state.q_table_mut().expect("q-learning state");
                for ue in 0..n_ues {
                    let r = policies::q_reward(
                        policies::normalize_throughput(tput[ue], params.bandwidth_hz),
                        jain,
                        changed[ue],
                        policy_cfg.reward_weights,
                    );
                    policies::q_update(
                        q,
                        pre_keys[ue],
                        targets[ue],
                        r,
                        &post_keys[ue],
                        policy_cfg.q_eta,
                        policy_cfg.q_gamma,
                        &state.active,
                    );
                }
            }

            if let Some(sink) = trace.as_deref_mut() {
                for (ue, (&cell, &throughput_bps)) in
                    state.serving.iter().zip(&tput).enumerate()
                {
                    sink.push(TraceRow {
                        time: state.time,
                        ue,
                        cell,
                        sinr_db: channel::linear_to_db(
                            sinr.get(ue, cell).max(f64::MIN_POSITIVE),
                        ),
                        throughput_bps,
                    });
                }
            }
        }

        let per_ue_throughput: Vec<f64> = tput_sum
            .iter()
            .map(|s| s / settings.epochs_per_window as f64)
            .collect();
        let window_events: Vec<&[HandoverEvent]> = state
            .ho_history
            .iter()
            .zip(&ho_start)
            .map(|(h, &start)| &h[start..])
            .collect();
        debug_assert!(window_events
            .iter()
            .flat_map(|evs| evs.iter())
            .all(|ev| ev.time > window_start));
        let total_events: usize = window_events.iter().map(|e| e.len()).sum();
        debug_assert_eq!(
            total_events,
            ho_count.iter().map(|&c| c as usize).sum::<usize>()
        );

        let window = KpiWindow {
            window_index: w,
            thr_5pct_bps: kpi::percentile5(&per_ue_throughput)?,
            jain: kpi::jain_index(&per_ue_throughput),
            ho_rate_per_ue_min: kpi::handover_rate(
                total_events,
                n_ues,
                settings.window_minutes(),
            ),
            ping_pong_ues: kpi::ping_pong_ues(&window_events, settings.ping_pong_horizon_s),
            handovers_per_ue: ho_count,
            per_ue_throughput_bps: per_ue_throughput,
        };
        records.extend(kpi::classify(
            &window,
            &settings.thresholds,
            settings.critical_ue_count,
        ));
        windows.push(window);
    }

    Ok(EvaluationResult {
        objectives: objectives_from_windows(&windows),
        windows,
        records,
        genome_hash: genome.hash(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{random_genome, scenario_spec, ScenarioKind};
    use std::sync::Arc;

    fn desk_net() -> NetworkConfig {
        NetworkConfig {
            n_ues: 10,
            ..NetworkConfig::default()
        }
    }

    fn fast_settings() -> EvalSettings {
        EvalSettings {
            windows: 3,
            epochs_per_window: 20,
            ..EvalSettings::default()
        }
    }

    #[test]
    fn f1_reference_cases() {
        assert_eq!(f1_instability(&[4.0, 4.0, 4.0]), 0.0);
        assert_eq!(f1_instability(&[0.0, 2.0]), 1.0);
        let base = f1_instability(&[1.0, 5.0, 2.0]);
        let shifted = f1_instability(&[11.0, 15.0, 12.0]);
        assert!((base - shifted).abs() < 1e-9);
    }

    #[test]
    fn f2_reference_cases() {
        assert!(f2_qoe(1e15, F2_EPSILON_MBPS) < 1e-8);
        assert_eq!(f2_qoe(0.0, F2_EPSILON_MBPS), 1e6);
        assert!((f2_qoe(10e6, F2_EPSILON_MBPS) - 0.1).abs() < 1e-6);
    }

    #[test]
    fn f3_reference_cases() {
        assert_eq!(f3_unfairness(&[5.0, 5.0, 5.0]), 0.0);
        assert!((f3_unfairness(&[9.0, 0.0, 0.0, 0.0]) - 0.75).abs() < 1e-12);
        let expected = 1.0 - 100.0 / 120.0;
        assert!((f3_unfairness(&[1.0, 2.0, 3.0, 4.0]) - expected).abs() < 1e-12);
    }

    #[test]
    fn f3_round_trips_with_jain() {
        let x = [3.0, 1.0, 7.0, 2.0];
        assert_eq!(f3_unfairness(&x), 1.0 - kpi::jain_index(&x));
    }

    #[test]
    fn evaluate_is_deterministic() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::HighInterference, &net));
        let genome = random_genome(&scenario, &mut rng::stream(1, &[1]));
        let cfg = PolicyConfig::default();
        let s = fast_settings();
        let a = evaluate(&genome, PolicyKind::A3, &cfg, &net, &s, 99).unwrap();
        let b = evaluate(&genome, PolicyKind::A3, &cfg, &net, &s, 99).unwrap();
        assert_eq!(a.objectives, b.objectives);
        assert_eq!(a.records.len(), b.records.len());
        assert_eq!(a.genome_hash, b.genome_hash);
        // a different seed generally moves the objectives
        let c = evaluate(&genome, PolicyKind::A3, &cfg, &net, &s, 100).unwrap();
        assert_ne!(a.objectives, c.objectives);
    }

    #[test]
    fn evaluate_objectives_recomputable_from_windows() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::LoadImbalance, &net));
        let genome = random_genome(&scenario, &mut rng::stream(2, &[2]));
        let cfg = PolicyConfig::default();
        let r = evaluate(
            &genome,
            PolicyKind::Utility,
            &cfg,
            &net,
            &fast_settings(),
            5,
        )
        .unwrap();
        let recomputed = objectives_from_windows(&r.windows);
        assert_eq!(r.objectives, recomputed);
    }

    #[test]
    fn single_cell_run_has_zero_instability() {
        let net = NetworkConfig {
            n_cells: 1,
            n_ues: 4,
            ..NetworkConfig::default()
        };
        let scenario = Arc::new(scenario_spec(ScenarioKind::StableMobility, &net));
        let genome = random_genome(&scenario, &mut rng::stream(3, &[3]));
        let cfg = PolicyConfig::default();
        for kind in [PolicyKind::A3, PolicyKind::Random, PolicyKind::QLearning] {
            let r = evaluate(&genome, kind, &cfg, &net, &fast_settings(), 7).unwrap();
            assert_eq!(r.objectives.f1, 0.0, "{kind}");
            assert!(r.windows.iter().all(|w| w.ho_rate_per_ue_min == 0.0));
        }
    }

    #[test]
    fn every_policy_runs_and_produces_valid_kpis() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::CoverageHole, &net));
        let genome = random_genome(&scenario, &mut rng::stream(4, &[4]));
        let cfg = PolicyConfig::default();
        let s = fast_settings();
        for kind in PolicyKind::ALL {
            let r = evaluate(&genome, kind, &cfg, &net, &s, 11).unwrap();
            assert!(r.objectives.f1 >= 0.0);
            assert!(r.objectives.f2 >= 0.0 && r.objectives.f2.is_finite());
            assert!(r.objectives.f3 >= 0.0 && r.objectives.f3 <= 1.0);
            for w in &r.windows {
                assert!(w.jain >= 1.0 / net.n_ues as f64 && w.jain <= 1.0 + 1e-12);
                assert!(w.thr_5pct_bps >= 0.0);
                // no UE ever lands on the dead center cell
                assert_eq!(w.per_ue_throughput_bps.len(), net.n_ues);
            }
        }
    }

    #[test]
    fn interference_raises_qoe_degradation_in_majority_of_seeds() {
        // paired runs differing only in the interference gene, A3 policy
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::CoverageHole, &net));
        let cfg = PolicyConfig::default();
        let s = fast_settings();
        let gene = scenario.layout.interference();
        let mut wins = 0;
        let trials = 20;
        for seed in 0..trials {
            let mut genome = random_genome(&scenario, &mut rng::stream(seed, &[5]));
            genome.values_mut()[gene] = 3.0;
            let high = evaluate(&genome, PolicyKind::A3, &cfg, &net, &s, seed).unwrap();
            genome.values_mut()[gene] = 0.5;
            let low = evaluate(&genome, PolicyKind::A3, &cfg, &net, &s, seed).unwrap();
            if high.objectives.f2 >= low.objectives.f2 {
                wins += 1;
            }
        }
        assert!(wins > trials / 2, "only {wins}/{trials} seeds");
    }

    #[test]
    fn trace_has_one_row_per_epoch_and_ue() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::StableMobility, &net));
        let genome = random_genome(&scenario, &mut rng::stream(6, &[6]));
        let cfg = PolicyConfig::default();
        let s = fast_settings();
        let mut trace = Vec::new();
        evaluate_traced(
            &genome,
            PolicyKind::Utility,
            &cfg,
            &net,
            &s,
            13,
            Some(&mut trace),
        )
        .unwrap();
        assert_eq!(trace.len(), net.n_ues * s.total_epochs());
    }

    #[test]
    fn infinite_hysteresis_a3_never_hands_over() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::HighInterference, &net));
        let genome = random_genome(&scenario, &mut rng::stream(9, &[9]));
        let cfg = PolicyConfig {
            a3_hysteresis_db: f64::INFINITY,
            ..PolicyConfig::default()
        };
        let r = evaluate(&genome, PolicyKind::A3, &cfg, &net, &fast_settings(), 3).unwrap();
        assert_eq!(r.objectives.f1, 0.0);
        assert!(r.windows.iter().all(|w| w.ho_rate_per_ue_min == 0.0));
    }

    #[test]
    fn q_learning_visits_the_table() {
        let net = desk_net();
        let scenario = Arc::new(scenario_spec(ScenarioKind::LoadImbalance, &net));
        let genome = random_genome(&scenario, &mut rng::stream(8, &[8]));
        let cfg = PolicyConfig::default();
        // run long enough that learning definitely kicks in
        let r = evaluate(
            &genome,
            PolicyKind::QLearning,
            &cfg,
            &net,
            &fast_settings(),
            21,
        )
        .unwrap();
        // Q-learning reassociates early on, so some handovers must exist
        let total: u32 = r
            .windows
            .iter()
            .flat_map(|w| w.handovers_per_ue.iter())
            .sum();
        assert!(total > 0);
    }
}
