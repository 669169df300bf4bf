//! Time-stepped network state: UE positions, cell loads, associations,
//! channel gains, and the handover log, plus random-waypoint mobility.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    self, CellSet, GainMatrix, PairMatrix, RadioParams, THERMAL_NOISE_PSD_DBM_HZ,
};
use crate::error::{Error, Result};

/// Deployment-level parameters. Defaults give a 7-site / 40-UE layout at
/// 100 m inter-site distance on 3.5 GHz with 13.68 MHz of bandwidth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub n_cells: usize,
    pub n_ues: usize,
    pub isd_m: f64,
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    /// Per-cell UE capacity used for load normalization; defaults to `n_ues`
    /// so the association share of the load always stays in [0, 1].
    pub n_max_per_cell: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_cells: 7,
            n_ues: 40,
            isd_m: 100.0,
            carrier_frequency_hz: 3.5e9,
            bandwidth_hz: 13.68e6,
            tx_power_dbm: 30.0,
            noise_psd_dbm_hz: THERMAL_NOISE_PSD_DBM_HZ,
            shadowing_sigma_db: 4.0,
            n_max_per_cell: None,
        }
    }
}

impl NetworkConfig {
    /// Side of the square deployment area.
    pub fn bbox_side(&self) -> f64 {
        2.5 * self.isd_m
    }

    pub fn bbox_center(&self) -> [f64; 2] {
        let c = self.bbox_side() / 2.0;
        [c, c]
    }

    pub fn n_max(&self) -> usize {
        self.n_max_per_cell.unwrap_or(self.n_ues)
    }

    /// Hexagonal site layout: one center site plus a ring of six at the
    /// (scaled) inter-site distance. Extra sites beyond 7 continue on a
    /// second ring at twice the ISD.
    pub fn site_positions(&self, isd_scale: f64) -> Vec<[f64; 2]> {
        let center = self.bbox_center();
        let isd = self.isd_m * isd_scale;
        let mut sites = Vec::with_capacity(self.n_cells);
        sites.push(center);
        for k in 0..self.n_cells.saturating_sub(1) {
            let ring = k / 6;
            let angle = (k % 6) as f64 * std::f64::consts::FRAC_PI_3;
            let r = isd * (ring + 1) as f64;
            sites.push([center[0] + r * angle.cos(), center[1] + r * angle.sin()]);
        }
        sites
    }

    pub fn radio_params(&self, interference_scale: f64) -> RadioParams {
        RadioParams {
            carrier_frequency_hz: self.carrier_frequency_hz,
            bandwidth_hz: self.bandwidth_hz,
            tx_power_dbm: vec![self.tx_power_dbm; self.n_cells],
            noise_psd_dbm_hz: self.noise_psd_dbm_hz,
            shadowing_sigma_db: self.shadowing_sigma_db,
            interference_scale,
        }
    }
}

/// Decoded simulation setup: everything a genome pins down about the initial
/// network environment.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub positions: Vec<[f64; 2]>,
    pub background_load: Vec<f64>,
    pub sites: Vec<[f64; 2]>,
    pub active: CellSet,
    pub interference_scale: f64,
    pub isd_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// The full time-stepped network state.
#[derive(Debug, Clone)]
pub struct NetworkState {
    pub time: f64,
    pub positions: Vec<[f64; 2]>,
    pub loads: Vec<f64>,
    /// Serving cell per UE (the association matrix has exactly one 1 per
    /// row; this is that column index).
    pub serving: Vec<usize>,
    pub gains: GainMatrix,
    pub active: CellSet,
    pub ho_history: Vec<Vec<HandoverEvent>>,
}

impl NetworkState {
    pub fn n_ues(&self) -> usize {
        self.serving.len()
    }

    /// Number of associated UEs per cell.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.active.n_cells()];
        for &c in &self.serving {
            counts[c] += 1;
        }
        counts
    }
}

/// Initial state for a decoded setup: every UE attaches to its
/// strongest-RSRP active cell, loads are computed, the handover log is
/// empty.
pub fn init_state(
    setup: &SimSetup,
    net: &NetworkConfig,
    params: &RadioParams,
    shadow_seed: u64,
) -> Result<NetworkState> {
    if setup.active.is_empty() {
        return Err(Error::UnservableUe { ue: 0 });
    }
    let gains = channel::compute_gain_matrix(&setup.positions, &setup.sites, params, shadow_seed);
    let rsrp = channel::rsrp_matrix(&gains, params);
    let serving = (0..setup.positions.len())
        .map(|ue| strongest_cell(&rsrp, ue, &setup.active))
        .collect::<Result<Vec<_>>>()?;
    let mut state = NetworkState {
        time: 0.0,
        positions: setup.positions.clone(),
        loads: vec![0.0; setup.sites.len()],
        serving,
        gains,
        active: setup.active.clone(),
        ho_history: vec![Vec::new(); setup.positions.len()],
    };
    update_loads(&mut state, &setup.background_load, net.n_max());
    Ok(state)
}

/// Strongest-RSRP active cell for a UE; ties break toward the lowest index.
pub fn strongest_cell(rsrp: &PairMatrix, ue: usize, active: &CellSet) -> Result<usize> {
    active
        .iter()
        .fold(None::<(usize, f64)>, |best, c| {
            let v = rsrp.get(ue, c);
            match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((c, v)),
            }
        })
        .map(|(c, _)| c)
        .ok_or(Error::UnservableUe { ue })
}

/// Random-waypoint mobility: each UE heads to its waypoint at a fixed speed,
/// then redraws a fresh waypoint and speed on arrival.
#[derive(Debug, Clone)]
pub struct MobilityModel {
    pub waypoints: Vec<[f64; 2]>,
    pub speeds: Vec<f64>,
    speed_range: (f64, f64),
    bbox_side: f64,
}

impl MobilityModel {
    pub fn new(
        n_ues: usize,
        speed_range: (f64, f64),
        bbox_side: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let (lo, hi) = speed_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidSpeedRange { min: lo, max: hi });
        }
        let waypoints = (0..n_ues)
            .map(|_| [rng.random_range(0.0..bbox_side), rng.random_range(0.0..bbox_side)])
            .collect();
        let speeds = (0..n_ues).map(|_| draw_speed(speed_range, rng)).collect();
        Ok(Self {
            waypoints,
            speeds,
            speed_range,
            bbox_side,
        })
    }
}

fn draw_speed((lo, hi): (f64, f64), rng: &mut impl Rng) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Advance every UE by `dt` seconds. A UE within `speed * dt` of its
/// waypoint lands on it exactly and redraws waypoint and speed.
pub fn step_mobility(
    state: &mut NetworkState,
    model: &mut MobilityModel,
    dt: f64,
    rng: &mut impl Rng,
) {
    debug_assert!(dt > 0.0);
    for (i, pos) in state.positions.iter_mut().enumerate() {
        let wp = model.waypoints[i];
        let step = model.speeds[i] * dt;
        let dx = wp[0] - pos[0];
        let dy = wp[1] - pos[1];
        let dist = (dx * dx + dy * dy).sqrt();
        if dist <= step {
            *pos = wp;
            model.waypoints[i] = [
                rng.random_range(0.0..model.bbox_side),
                rng.random_range(0.0..model.bbox_side),
            ];
            model.speeds[i] = draw_speed(model.speed_range, rng);
        } else {
            pos[0] += dx / dist * step;
            pos[1] += dy / dist * step;
        }
    }
    state.time += dt;
}

/// loads_j = min(1, n_j / n_max + background_j).
pub fn update_loads(state: &mut NetworkState, background: &[f64], n_max: usize) {
    let counts = state.cell_counts();
    for (j, load) in state.loads.iter_mut().enumerate() {
        *load = (counts[j] as f64 / n_max as f64 + background[j]).min(1.0);
    }
}

/// Rewrite associations to `targets`, appending one handover event per UE
/// whose cell changed. Loads are NOT recomputed here; callers follow up with
/// [`update_loads`]. Returns the per-UE handover indicator.
pub fn apply_decisions(state: &mut NetworkState, targets: &[usize]) -> Result<Vec<bool>> {
    // validate first so a failed call leaves the state untouched
    for (ue, &t) in targets.iter().enumerate() {
        if !state.active.contains(t) {
            return Err(Error::InactiveTarget { ue, cell: t });
        }
    }
    let mut changed = vec![false; targets.len()];
    for (ue, &t) in targets.iter().enumerate() {
        let from = state.serving[ue];
        if from != t {
            state.ho_history[ue].push(HandoverEvent {
                time: state.time,
                from,
                to: t,
            });
            state.serving[ue] = t;
            changed[ue] = true;
        }
    }
    Ok(changed)
}

/// Effective occupancy per cell: associated UEs plus the background-load
/// equivalent (background_j of the per-cell capacity), floored at 1 so a
/// lone UE in an idle cell keeps the whole link.
pub fn effective_occupancy(
    counts: &[usize],
    background: &[f64],
    n_max: usize,
) -> Vec<f64> {
    counts
        .iter()
        .zip(background)
        .map(|(&n, &bg)| (n as f64 + bg * n_max as f64).max(1.0))
        .collect()
}

/// Per-UE throughput under an equal time-share scheduler: the Shannon rate
/// of the serving link divided by the cell's effective occupancy
/// (associated UEs plus background-load equivalents).
pub fn shared_throughput(
    state: &NetworkState,
    params: &RadioParams,
    background: &[f64],
    n_max: usize,
) -> Result<Vec<f64>> {
    let occupancy = effective_occupancy(&state.cell_counts(), background, n_max);
    let mut out = Vec::with_capacity(state.n_ues());
    for (ue, &cell) in state.serving.iter().enumerate() {
        let sinr = channel::compute_sinr(ue, cell, &state.gains, params, &state.active)?;
        let t = channel::compute_throughput(sinr, params.bandwidth_hz);
        out.push(t / occupancy[cell]);
    }
    Ok(out)
}

/// Same sharing rule, but from a precomputed SINR matrix (hot path).
pub fn shared_throughput_from_sinr(
    serving: &[usize],
    sinr: &PairMatrix,
    occupancy: &[f64],
    bandwidth_hz: f64,
) -> Vec<f64> {
    serving
        .iter()
        .enumerate()
        .map(|(ue, &cell)| {
            channel::compute_throughput(sinr.get(ue, cell), bandwidth_hz) / occupancy[cell]
        })
        .collect()
}
