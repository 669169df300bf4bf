//! The five traffic-steering policies under test. Each maps the current
//! network state to one target-cell decision per UE per epoch.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{CellSet, PairMatrix};
use crate::error::{Error, Result};

/// SINR cap used by every normalization: rates and SINRs above 30 dB all
/// count as "excellent".
pub const SINR_NORM_CAP_DB: f64 = 30.0;

/// Affine SINR normalization range in dB.
pub const SINR_NORM_MIN_DB: f64 = -10.0;
pub const SINR_NORM_MAX_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    A3,
    Utility,
    LoadAware,
    Random,
    QLearning,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::A3,
        PolicyKind::Utility,
        PolicyKind::LoadAware,
        PolicyKind::Random,
        PolicyKind::QLearning,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::A3 => "a3",
            PolicyKind::Utility => "utility",
            PolicyKind::LoadAware => "load_aware",
            PolicyKind::Random => "random",
            PolicyKind::QLearning => "q_learning",
        }
    }

    pub fn tag(&self) -> u64 {
        PolicyKind::ALL.iter().position(|k| k == self).unwrap() as u64
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        PolicyKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown policy `{s}`"))
    }
}

/// Hyperparameters for all five policies; defaults follow the standard
/// baseline settings (3 dB / 160 ms A3, utility weights (0.5, 0.3, 0.2),
/// load-aware gates 0 dB / 0.8, Q-learning eta 0.3, gamma 0.9,
/// epsilon 0.1 -> 0.01).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub a3_hysteresis_db: f64,
    pub a3_ttt_ms: f64,
    pub utility_weights: (f64, f64, f64),
    pub la_min_sinr_db: f64,
    pub la_max_load: f64,
    pub q_eta: f64,
    pub q_gamma: f64,
    pub q_epsilon: (f64, f64),
    pub reward_weights: (f64, f64, f64),
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            a3_hysteresis_db: 3.0,
            a3_ttt_ms: 160.0,
            utility_weights: (0.5, 0.3, 0.2),
            la_min_sinr_db: 0.0,
            la_max_load: 0.8,
            q_eta: 0.3,
            q_gamma: 0.9,
            q_epsilon: (0.1, 0.01),
            reward_weights: (0.5, 0.3, 0.2),
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let (ws, wl, wr) = self.utility_weights;
        if ws < 0.0 || wl < 0.0 || wr < 0.0 || ws + wl + wr <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "policy.utility_weights".into(),
                reason: "weights must be nonnegative with positive sum".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.q_eta) {
            return Err(Error::InvalidConfig {
                field: "policy.q_eta".into(),
                reason: "must lie in [0, 1]".into(),
            });
        }
        if !(0.0..1.0).contains(&self.q_gamma) {
            return Err(Error::InvalidConfig {
                field: "policy.q_gamma".into(),
                reason: "must lie in [0, 1)".into(),
            });
        }
        let (e0, e1) = self.q_epsilon;
        if !(e0 >= e1 && e1 >= 0.0 && e0 <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "policy.q_epsilon".into(),
                reason: "need start >= end >= 0 and start <= 1".into(),
            });
        }
        let (w1, w2, w3) = self.reward_weights;
        if w1 < 0.0 || w2 < 0.0 || w3 < 0.0 {
            return Err(Error::InvalidConfig {
                field: "policy.reward_weights".into(),
                reason: "weights must be nonnegative".into(),
            });
        }
        if self.a3_hysteresis_db < 0.0 || self.a3_ttt_ms < 0.0 {
            return Err(Error::InvalidConfig {
                field: "policy.a3".into(),
                reason: "hysteresis and TTT must be nonnegative".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.la_max_load) {
            return Err(Error::InvalidConfig {
                field: "policy.la_max_load".into(),
                reason: "must lie in [0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Read-only view of the per-epoch quantities policies act on.
pub struct PolicyView<'a> {
    pub serving: &'a [usize],
    pub rsrp_dbm: &'a PairMatrix,
    /// Linear SINR; inactive cells read 0.
    pub sinr: &'a PairMatrix,
    pub loads: &'a [f64],
    pub active: &'a CellSet,
    /// Load a UE adds to a cell it joins (1 / N_max). Load-sensitive
    /// policies score non-serving cells with this increment so they compare
    /// the load they would actually experience there.
    pub join_load_increment: f64,
}

impl PolicyView<'_> {
    fn n_ues(&self) -> usize {
        self.serving.len()
    }
}

/// Association loads tracked live while the per-UE decisions of one epoch
/// are made in index order. Handing every UE the same stale load snapshot
/// makes whole crowds slosh between cells in lockstep; letting each
/// decision see the moves already taken this epoch models the sequential
/// reality of association procedures.
struct LiveLoads {
    loads: Vec<f64>,
    increment: f64,
}

impl LiveLoads {
    fn new(view: &PolicyView<'_>) -> Self {
        Self {
            loads: view.loads.to_vec(),
            increment: view.join_load_increment,
        }
    }

    /// Load of `cell` as experienced by `ue` after associating with it.
    fn prospective(&self, serving: usize, cell: usize) -> f64 {
        if serving == cell {
            self.loads[cell]
        } else {
            (self.loads[cell] + self.increment).min(1.0)
        }
    }

    fn apply_move(&mut self, from: usize, to: usize) {
        if from != to {
            self.loads[from] = (self.loads[from] - self.increment).max(0.0);
            self.loads[to] = (self.loads[to] + self.increment).min(1.0);
        }
    }
}

// ---------------------------------------------------------------------------
// A3
// ---------------------------------------------------------------------------

/// Per-UE time-to-trigger accounting: consecutive epochs the A3 entry
/// condition has held.
#[derive(Debug, Clone, Default)]
pub struct A3Timers {
    consecutive_epochs: Vec<u32>,
}

impl A3Timers {
    pub fn new(n_ues: usize) -> Self {
        Self {
            consecutive_epochs: vec![0; n_ues],
        }
    }
}

/// Event-A3 handover: hand over once the best neighbor's RSRP exceeds the
/// serving cell's by the hysteresis margin for at least the TTT. With 1 s
/// epochs, any TTT up to the epoch length is satisfied by one full epoch of
/// persistence.
pub fn decide_a3(
    view: &PolicyView<'_>,
    cfg: &PolicyConfig,
    timers: &mut A3Timers,
    epoch_ms: f64,
) -> Vec<usize> {
    let required_epochs = (cfg.a3_ttt_ms / epoch_ms).ceil().max(0.0) as u32;
    let mut targets = Vec::with_capacity(view.n_ues());
    for ue in 0..view.n_ues() {
        let serving = view.serving[ue];
        let serving_rsrp = view.rsrp_dbm.get(ue, serving);
        let best = view
            .active
            .iter()
            .filter(|&c| c != serving)
            .fold(None::<(usize, f64)>, |best, c| {
                let v = view.rsrp_dbm.get(ue, c);
                match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((c, v)),
                }
            });
        let mut target = serving;
        match best {
            Some((neighbor, rsrp)) if rsrp > serving_rsrp + cfg.a3_hysteresis_db => {
                timers.consecutive_epochs[ue] += 1;
                if timers.consecutive_epochs[ue] >= required_epochs {
                    target = neighbor;
                    timers.consecutive_epochs[ue] = 0;
                }
            }
            _ => timers.consecutive_epochs[ue] = 0,
        }
        targets.push(target);
    }
    targets
}

// ---------------------------------------------------------------------------
// Utility
// ---------------------------------------------------------------------------

/// Affine map of SINR onto [0, 1] over the [-10, +30] dB range, clamped.
pub fn norm_sinr(sinr_linear: f64) -> f64 {
    let db = 10.0 * sinr_linear.max(f64::MIN_POSITIVE).log10();
    ((db - SINR_NORM_MIN_DB) / (SINR_NORM_MAX_DB - SINR_NORM_MIN_DB)).clamp(0.0, 1.0)
}

/// Single-user Shannon rate normalized by the capped maximum.
pub fn norm_rate(sinr_linear: f64) -> f64 {
    let cap = (1.0 + 10f64.powf(SINR_NORM_CAP_DB / 10.0)).log2();
    ((1.0 + sinr_linear.max(0.0)).log2() / cap).clamp(0.0, 1.0)
}

/// Composite-utility association:
/// argmax_c [w_sinr norm_sinr + w_load (1 - L_c) + w_rate norm_rate],
/// ties to the lowest cell index.
pub fn decide_utility(view: &PolicyView<'_>, cfg: &PolicyConfig) -> Vec<usize> {
    let (w_sinr, w_load, w_rate) = cfg.utility_weights;
    let mut live = LiveLoads::new(view);
    let mut targets = Vec::with_capacity(view.n_ues());
    for ue in 0..view.n_ues() {
        let serving = view.serving[ue];
        let target = view
            .active
            .iter()
            .fold(None::<(usize, f64)>, |best, c| {
                let sinr = view.sinr.get(ue, c);
                let score = w_sinr * norm_sinr(sinr)
                    + w_load * (1.0 - live.prospective(serving, c))
                    + w_rate * norm_rate(sinr);
                match best {
                    Some((_, bs)) if bs >= score => best,
                    _ => Some((c, score)),
                }
            })
            .map(|(c, _)| c)
            .expect("at least one active cell");
        live.apply_move(serving, target);
        targets.push(target);
    }
    targets
}

// ---------------------------------------------------------------------------
// Load-aware
// ---------------------------------------------------------------------------

/// Least-loaded cell among those with acceptable SINR and load; ties prefer
/// higher SINR, then the lowest index. Falls back to the max-SINR cell when
/// no candidate qualifies.
pub fn decide_load_aware(view: &PolicyView<'_>, cfg: &PolicyConfig) -> Vec<usize> {
    let min_sinr_linear = 10f64.powf(cfg.la_min_sinr_db / 10.0);
    let mut live = LiveLoads::new(view);
    let mut targets = Vec::with_capacity(view.n_ues());
    for ue in 0..view.n_ues() {
        let serving = view.serving[ue];
        let candidate = view
            .active
            .iter()
            .filter(|&c| {
                view.sinr.get(ue, c) >= min_sinr_linear
                    && live.prospective(serving, c) <= cfg.la_max_load
            })
            .fold(None::<(usize, f64, f64)>, |best, c| {
                let load = live.prospective(serving, c);
                let sinr = view.sinr.get(ue, c);
                match best {
                    Some((_, bl, bs)) if bl < load || (bl == load && bs >= sinr) => best,
                    _ => Some((c, load, sinr)),
                }
            });
        let target = match candidate {
            Some((c, _, _)) => c,
            None => view
                .active
                .iter()
                .fold(None::<(usize, f64)>, |best, c| {
                    let sinr = view.sinr.get(ue, c);
                    match best {
                        Some((_, bs)) if bs >= sinr => best,
                        _ => Some((c, sinr)),
                    }
                })
                .map(|(c, _)| c)
                .expect("at least one active cell"),
        };
        live.apply_move(serving, target);
        targets.push(target);
    }
    targets
}

// ---------------------------------------------------------------------------
// Random
// ---------------------------------------------------------------------------

/// Uniform association over the active cells.
pub fn decide_random(view: &PolicyView<'_>, rng: &mut impl Rng) -> Vec<usize> {
    let active: Vec<usize> = view.active.iter().collect();
    (0..view.n_ues())
        .map(|_| active[rng.random_range(0..active.len())])
        .collect()
}

// ---------------------------------------------------------------------------
// Q-learning
// ---------------------------------------------------------------------------

/// Discretized observation of a UE's serving link. The QoS term of the
/// state vector is not simulated and collapses to a single bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QStateKey {
    pub rsrp_bin: u8,
    pub sinr_bin: u8,
    pub load_bin: u8,
}

/// RSRP bins: < -100, [-100, -90), [-90, -80), >= -80 dBm.
/// SINR bins: < 0, [0, 10), [10, 20), >= 20 dB.
/// Load bins: < 0.4, [0.4, 0.8), >= 0.8.
pub fn q_state_key(rsrp_dbm: f64, sinr_db: f64, load: f64) -> QStateKey {
    let rsrp_bin = match rsrp_dbm {
        v if v < -100.0 => 0,
        v if v < -90.0 => 1,
        v if v < -80.0 => 2,
        _ => 3,
    };
    let sinr_bin = match sinr_db {
        v if v < 0.0 => 0,
        v if v < 10.0 => 1,
        v if v < 20.0 => 2,
        _ => 3,
    };
    let load_bin = match load {
        v if v < 0.4 => 0,
        v if v < 0.8 => 1,
        _ => 2,
    };
    QStateKey {
        rsrp_bin,
        sinr_bin,
        load_bin,
    }
}

/// Tabular action values over (state, cell). Unseen entries read 0.
#[derive(Debug, Clone, Default)]
pub struct QTable {
    values: HashMap<QStateKey, Vec<f64>>,
    visits: HashMap<QStateKey, Vec<u32>>,
    n_actions: usize,
}

impl QTable {
    pub fn new(n_actions: usize) -> Self {
        Self {
            values: HashMap::new(),
            visits: HashMap::new(),
            n_actions,
        }
    }

    pub fn get(&self, s: &QStateKey, a: usize) -> f64 {
        self.values.get(s).map_or(0.0, |row| row[a])
    }

    pub fn visit_count(&self, s: &QStateKey, a: usize) -> u32 {
        self.visits.get(s).map_or(0, |row| row[a])
    }

    pub fn max_over(&self, s: &QStateKey, actions: impl Iterator<Item = usize>) -> f64 {
        actions.map(|a| self.get(s, a)).fold(0.0_f64, f64::max)
    }

    fn set(&mut self, s: QStateKey, a: usize, value: f64) {
        let n = self.n_actions;
        self.values.entry(s).or_insert_with(|| vec![0.0; n])[a] = value;
        self.visits.entry(s).or_insert_with(|| vec![0; n])[a] += 1;
    }
}

/// epsilon-greedy association: explore uniformly with probability epsilon,
/// otherwise the argmax action, ties preferring the serving cell and then
/// the lowest index.
pub fn q_decide(
    view: &PolicyView<'_>,
    q: &QTable,
    keys: &[QStateKey],
    epsilon: f64,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let active: Vec<usize> = view.active.iter().collect();
    (0..view.n_ues())
        .map(|ue| {
            if rng.random::<f64>() < epsilon {
                return active[rng.random_range(0..active.len())];
            }
            let serving = view.serving[ue];
            let mut best = serving;
            let mut best_v = q.get(&keys[ue], serving);
            for &c in &active {
                let v = q.get(&keys[ue], c);
                if v > best_v || (v == best_v && c < best && best != serving) {
                    best = c;
                    best_v = v;
                }
            }
            best
        })
        .collect()
}

/// r = w1 * T_norm + w2 * J - w3 * 1{handover}.
pub fn q_reward(
    norm_throughput: f64,
    jain: f64,
    did_handover: bool,
    weights: (f64, f64, f64),
) -> f64 {
    let (w1, w2, w3) = weights;
    w1 * norm_throughput + w2 * jain - w3 * f64::from(did_handover)
}

/// Throughput normalized to [0, 1] by the capped single-user Shannon rate.
pub fn normalize_throughput(throughput_bps: f64, bandwidth_hz: f64) -> f64 {
    let cap = bandwidth_hz * (1.0 + 10f64.powf(SINR_NORM_CAP_DB / 10.0)).log2();
    (throughput_bps / cap).clamp(0.0, 1.0)
}

/// Q(s,a) <- (1 - eta) Q(s,a) + eta [r + gamma max_a' Q(s',a')].
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    q: &mut QTable,
    s: QStateKey,
    a: usize,
    r: f64,
    s_next: &QStateKey,
    eta: f64,
    gamma: f64,
    active: &CellSet,
) {
    let target = r + gamma * q.max_over(s_next, active.iter());
    let updated = (1.0 - eta) * q.get(&s, a) + eta * target;
    q.set(s, a, updated);
}

/// Linear interpolation from `start` at epoch 0 to `end` at the last epoch.
pub fn epsilon_schedule(epoch: usize, total: usize, (start, end): (f64, f64)) -> f64 {
    debug_assert!(total >= 1);
    if total <= 1 {
        return start;
    }
    let frac = epoch as f64 / (total - 1) as f64;
    start + (end - start) * frac.clamp(0.0, 1.0)
}

// ---------------------------------------------------------------------------
// Stateful dispatch
// ---------------------------------------------------------------------------

/// Per-evaluation policy state. A fresh one is built for every evaluation
/// run; the Q table learns online within the run only.
#[derive(Debug, Clone)]
pub enum PolicyState {
    A3(A3Timers),
    Utility,
    LoadAware,
    Random,
    QLearning(QTable),
}

impl PolicyState {
    pub fn new(kind: PolicyKind, n_ues: usize, n_cells: usize) -> Self {
        match kind {
            PolicyKind::A3 => PolicyState::A3(A3Timers::new(n_ues)),
            PolicyKind::Utility => PolicyState::Utility,
            PolicyKind::LoadAware => PolicyState::LoadAware,
            PolicyKind::Random => PolicyState::Random,
            PolicyKind::QLearning => PolicyState::QLearning(QTable::new(n_cells)),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn decide(
        &mut self,
        view: &PolicyView<'_>,
        cfg: &PolicyConfig,
        keys: &[QStateKey],
        epoch: usize,
        total_epochs: usize,
        epoch_ms: f64,
        rng: &mut impl Rng,
    ) -> Vec<usize> {
        match self {
            PolicyState::A3(timers) => decide_a3(view, cfg, timers, epoch_ms),
            PolicyState::Utility => decide_utility(view, cfg),
            PolicyState::LoadAware => decide_load_aware(view, cfg),
            PolicyState::Random => decide_random(view, rng),
            PolicyState::QLearning(q) => {
                let eps = epsilon_schedule(epoch, total_epochs, cfg.q_epsilon);
                q_decide(view, q, keys, eps, rng)
            }
        }
    }

    pub fn q_table_mut(&mut self) -> Option<&mut QTable> {
        match self {
            PolicyState::QLearning(q) => Some(q),
            _ => None,
        }
    }
}
