//! Analytic radio model: urban-micro path loss, log-normal shadowing,
//! SINR, and Shannon-capacity throughput for every UE-gNodeB pair.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Distance clamp floor; avoids the log singularity at zero range.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Thermal noise power spectral density.
pub const THERMAL_NOISE_PSD_DBM_HZ: f64 = -174.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Radio-layer parameters shared by every link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadioParams {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    /// Transmit power per gNodeB.
    pub tx_power_dbm: Vec<f64>,
    pub noise_psd_dbm_hz: f64,
    pub shadowing_sigma_db: f64,
    /// Scales aggregate inter-cell interference; 0 disables it.
    pub interference_scale: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "bandwidth_hz".into(),
                reason: "must be > 0".into(),
            });
        }
        if self.carrier_frequency_hz <= 0.0 {
            return Err(Error::InvalidConfig {
                field: "carrier_frequency_hz".into(),
                reason: "must be > 0".into(),
            });
        }
        if self.interference_scale < 0.0 {
            return Err(Error::InvalidConfig {
                field: "interference_scale".into(),
                reason: "must be >= 0".into(),
            });
        }
        Ok(())
    }

    pub fn tx_power_w(&self, cell: usize) -> f64 {
        dbm_to_watts(self.tx_power_dbm[cell])
    }

    /// Thermal noise power over the system bandwidth, in watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }
}

/// Set of powered-on cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSet {
    mask: Vec<bool>,
}

impl CellSet {
    pub fn all(n_cells: usize) -> Self {
        Self {
            mask: vec![true; n_cells],
        }
    }

    pub fn from_indices(n_cells: usize, active: &[usize]) -> Self {
        let mut mask = vec![false; n_cells];
        for &c in active {
            mask[c] = true;
        }
        Self { mask }
    }

    pub fn deactivated(mut self, cell: usize) -> Self {
        self.mask[cell] = false;
        self
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.mask.get(cell).copied().unwrap_or(false)
    }

    pub fn n_cells(&self) -> usize {
        self.mask.len()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }
}

/// Dense UE-by-cell matrix of f64 values (gains, RSRP, SINR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMatrix {
    n_ues: usize,
    n_cells: usize,
    values: Vec<f64>,
}

impl PairMatrix {
    pub fn zeros(n_ues: usize, n_cells: usize) -> Self {
        Self {
            n_ues,
            n_cells,
            values: vec![0.0; n_ues * n_cells],
        }
    }

    #[inline]
    pub fn get(&self, ue: usize, cell: usize) -> f64 {
        self.values[ue * self.n_cells + cell]
    }

    #[inline]
    pub fn set(&mut self, ue: usize, cell: usize, value: f64) {
        self.values[ue * self.n_cells + cell] = value;
    }

    #[inline]
    pub fn row(&self, ue: usize) -> &[f64] {
        &self.values[ue * self.n_cells..(ue + 1) * self.n_cells]
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }
}

/// Linear power gains per UE-gNodeB pair, each in (0, 1].
pub type GainMatrix = PairMatrix;

/// 3GPP-style urban-micro street-canyon LOS path loss:
/// 32.4 + 21 log10(d) + 20 log10(f_GHz). Distance is clamped to
/// [`MIN_DISTANCE_M`].
pub fn path_loss_db(distance_3d_m: f64, carrier_frequency_hz: f64) -> f64 {
    let d = distance_3d_m.max(MIN_DISTANCE_M);
    32.4 + 21.0 * d.log10() + 20.0 * (carrier_frequency_hz / 1e9).log10()
}

/// Log-normal shadowing offsets in dB, one per UE-cell pair, frozen for the
/// lifetime of the field. Row-major, reproducible per seed.
pub fn draw_shadow_field(n_ues: usize, n_cells: usize, sigma_db: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, &[rng::tags::SHADOW]);
    let normal = Normal::new(0.0, sigma_db.max(0.0)).expect("sigma must be finite");
    (0..n_ues * n_cells).map(|_| normal.sample(&mut rng)).collect()
}

/// Fills `out` with linear gains from current positions and a frozen shadow
/// field. Gains are clamped into (0, 1].
pub fn fill_gain_matrix(
    out: &mut GainMatrix,
    positions: &[[f64; 2]],
    sites: &[[f64; 2]],
    carrier_frequency_hz: f64,
    shadow_db: &[f64],
) {
    let n_cells = sites.len();
    for (i, p) in positions.iter().enumerate() {
        for (j, s) in sites.iter().enumerate() {
            let d = ((p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2)).sqrt();
            let pl = path_loss_db(d, carrier_frequency_hz);
            let gain = db_to_linear(-(pl + shadow_db[i * n_cells + j]));
            out.set(i, j, gain.clamp(f64::MIN_POSITIVE, 1.0));
        }
    }
}

/// Gain matrix for the given geometry: path loss plus log-normal shadowing
/// drawn from `shadow_seed`. Deterministic per (positions, params, seed).
pub fn compute_gain_matrix(
    positions: &[[f64; 2]],
    sites: &[[f64; 2]],
    params: &RadioParams,
    shadow_seed: u64,
) -> GainMatrix {
    let shadow = draw_shadow_field(
        positions.len(),
        sites.len(),
        params.shadowing_sigma_db,
        shadow_seed,
    );
    let mut m = GainMatrix::zeros(positions.len(), sites.len());
    fill_gain_matrix(&mut m, positions, sites, params.carrier_frequency_hz, &shadow);
    m
}

/// Linear SINR of `ue` served by `cell`:
/// P_c G(u,c) / (interference_scale * sum_{k != c} P_k G(u,k) + N0 B).
pub fn compute_sinr(
    ue: usize,
    cell: usize,
    gains: &GainMatrix,
    params: &RadioParams,
    active: &CellSet,
) -> Result<f64> {
    if !active.contains(cell) {
        return Err(Error::ServingCellOff { cell });
    }
    let signal = params.tx_power_w(cell) * gains.get(ue, cell);
    let mut interference = 0.0;
    for k in active.iter() {
        if k != cell {
            interference += params.tx_power_w(k) * gains.get(ue, k);
        }
    }
    Ok(signal / (params.interference_scale * interference + params.noise_power_w()))
}

/// Shannon-capacity throughput in bits/s.
pub fn compute_throughput(sinr: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Linear SINR for every (UE, active cell) pair; inactive cells read 0.
pub fn sinr_matrix(gains: &GainMatrix, params: &RadioParams, active: &CellSet) -> PairMatrix {
    let (n, m) = (gains.n_ues(), gains.n_cells());
    let noise = params.noise_power_w();
    let tx_w: Vec<f64> = (0..m).map(|c| params.tx_power_w(c)).collect();
    let mut out = PairMatrix::zeros(n, m);
    for ue in 0..n {
        let row = gains.row(ue);
        let mut total_rx = 0.0;
        for c in active.iter() {
            total_rx += tx_w[c] * row[c];
        }
        for c in active.iter() {
            let signal = tx_w[c] * row[c];
            let interference = total_rx - signal;
            out.set(
                ue,
                c,
                signal / (params.interference_scale * interference + noise),
            );
        }
    }
    out
}

/// RSRP in dBm for every (UE, cell) pair.
pub fn rsrp_matrix(gains: &GainMatrix, params: &RadioParams) -> PairMatrix {
    let (n, m) = (gains.n_ues(), gains.n_cells());
    let mut out = PairMatrix::zeros(n, m);
    for ue in 0..n {
        for cell in 0..m {
            out.set(
                ue,
                cell,
                params.tx_power_dbm[cell] + linear_to_db(gains.get(ue, cell)),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n_cells: usize, interference_scale: f64) -> RadioParams {
        RadioParams {
            carrier_frequency_hz: 3.5e9,
            bandwidth_hz: 13.68e6,
            tx_power_dbm: vec![30.0; n_cells],
            noise_psd_dbm_hz: THERMAL_NOISE_PSD_DBM_HZ,
            shadowing_sigma_db: 4.0,
            interference_scale,
        }
    }

    #[test]
    fn path_loss_reference_points() {
        assert!((path_loss_db(1.0, 1e9) - 32.4).abs() < 1e-12);
        assert!((path_loss_db(10.0, 1e9) - 53.4).abs() < 1e-12);
        let expected = 32.4 + 42.0 + 20.0 * 3.5f64.log10();
        assert!((path_loss_db(100.0, 3.5e9) - expected).abs() < 1e-12);
        assert!((expected - 85.28).abs() < 0.01);
    }

    #[test]
    fn path_loss_clamps_below_one_meter() {
        assert_eq!(path_loss_db(0.0, 1e9), path_loss_db(1.0, 1e9));
        assert_eq!(path_loss_db(0.5, 3.5e9), path_loss_db(1.0, 3.5e9));
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        let mut last = path_loss_db(1.0, 3.5e9);
        for d in [2.0, 5.0, 17.0, 120.0, 900.0] {
            let pl = path_loss_db(d, 3.5e9);
            assert!(pl > last);
            last = pl;
        }
    }

    #[test]
    fn gain_without_shadowing_is_pure_path_loss() {
        let mut p = params(1, 1.0);
        p.shadowing_sigma_db = 0.0;
        let g = compute_gain_matrix(&[[0.0, 0.0]], &[[0.0, 0.0]], &p, 99);
        let expected = db_to_linear(-path_loss_db(MIN_DISTANCE_M, 3.5e9));
        assert!((g.get(0, 0) - expected).abs() < 1e-18);
    }

    #[test]
    fn gain_matrix_deterministic_per_seed() {
        let p = params(3, 1.0);
        let pos = [[10.0, 20.0], [200.0, 50.0]];
        let sites = [[0.0, 0.0], [100.0, 0.0], [50.0, 86.0]];
        let a = compute_gain_matrix(&pos, &sites, &p, 1234);
        let b = compute_gain_matrix(&pos, &sites, &p, 1234);
        assert_eq!(a, b);
        let c = compute_gain_matrix(&pos, &sites, &p, 1235);
        assert_ne!(a, c);
    }

    #[test]
    fn gains_stay_in_unit_interval() {
        let p = params(2, 1.0);
        let pos: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 7.0, i as f64 * 3.0]).collect();
        let sites = [[0.0, 0.0], [140.0, 90.0]];
        let g = compute_gain_matrix(&pos, &sites, &p, 7);
        for ue in 0..50 {
            for c in 0..2 {
                let v = g.get(ue, c);
                assert!(v > 0.0 && v <= 1.0, "gain {v}");
            }
        }
    }

    #[test]
    fn shadow_field_empirical_std() {
        // sigma = 4 dB: empirical std over 1e5 draws within 4 +- 0.1.
        let field = draw_shadow_field(1000, 100, 4.0, 42);
        let n = field.len() as f64;
        let mean: f64 = field.iter().sum::<f64>() / n;
        let var: f64 = field.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((var.sqrt() - 4.0).abs() < 0.1, "std {}", var.sqrt());
    }

    #[test]
    fn sinr_single_cell_signal_equals_noise() {
        let mut p = params(1, 1.0);
        // pick a gain such that received power equals noise power
        let noise = p.noise_power_w();
        let gain = noise / p.tx_power_w(0);
        let mut g = GainMatrix::zeros(1, 1);
        g.set(0, 0, gain);
        let active = CellSet::all(1);
        let sinr = compute_sinr(0, 0, &g, &p, &active).unwrap();
        assert!((sinr - 1.0).abs() < 1e-12);
        // and zero-gain limit
        g.set(0, 0, 1e-300);
        p.interference_scale = 0.0;
        let sinr = compute_sinr(0, 0, &g, &p, &active).unwrap();
        assert!(sinr < 1e-250);
    }

    #[test]
    fn sinr_hand_computed_no_interference() {
        // 30 dBm tx, gain 1e-10, N0 = -174 dBm/Hz, B = 13.68 MHz
        // -> signal 1e-10 W, noise 5.446e-14 W, SINR ~ 1836
        let p = params(1, 1.0);
        let mut g = GainMatrix::zeros(1, 1);
        g.set(0, 0, 1e-10);
        let sinr = compute_sinr(0, 0, &g, &p, &CellSet::all(1)).unwrap();
        let noise = dbm_to_watts(-174.0) * 13.68e6;
        let expected = 1e-10 / noise;
        assert!((sinr / expected - 1.0).abs() < 1e-12);
        assert!((expected - 1836.0).abs() / 1836.0 < 1e-3, "expected {expected}");
    }

    #[test]
    fn sinr_rejects_inactive_serving_cell() {
        let p = params(2, 1.0);
        let g = GainMatrix::zeros(1, 2);
        let active = CellSet::from_indices(2, &[1]);
        assert!(matches!(
            compute_sinr(0, 0, &g, &p, &active),
            Err(Error::ServingCellOff { cell: 0 })
        ));
    }

    #[test]
    fn deactivating_non_serving_cell_never_hurts() {
        let p = params(3, 1.0);
        let pos = [[30.0, 40.0]];
        let sites = [[0.0, 0.0], [80.0, 0.0], [0.0, 90.0]];
        let g = compute_gain_matrix(&pos, &sites, &p, 5);
        let all = CellSet::all(3);
        let without_2 = CellSet::from_indices(3, &[0, 1]);
        let before = compute_sinr(0, 0, &g, &p, &all).unwrap();
        let after = compute_sinr(0, 0, &g, &p, &without_2).unwrap();
        assert!(after >= before);
    }

    #[test]
    fn throughput_reference_points() {
        assert_eq!(compute_throughput(0.0, 13.68e6), 0.0);
        assert!((compute_throughput(1.0, 13.68e6) - 13.68e6).abs() < 1e-6);
        assert_eq!(compute_throughput(3.0, 13.68e6), 2.0 * 13.68e6);
    }

    #[test]
    fn throughput_monotone_in_sinr() {
        let mut last = -1.0;
        for s in [0.0, 0.3, 1.0, 2.0, 10.0, 500.0] {
            let t = compute_throughput(s, 1e6);
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn sinr_matrix_agrees_with_scalar_op() {
        let p = params(3, 1.3);
        let pos = [[30.0, 40.0], [120.0, 10.0]];
        let sites = [[0.0, 0.0], [80.0, 0.0], [0.0, 90.0]];
        let g = compute_gain_matrix(&pos, &sites, &p, 11);
        let active = CellSet::from_indices(3, &[0, 2]);
        let m = sinr_matrix(&g, &p, &active);
        for ue in 0..2 {
            for c in active.iter() {
                let expected = compute_sinr(ue, c, &g, &p, &active).unwrap();
                assert!((m.get(ue, c) - expected).abs() / expected < 1e-12);
            }
            assert_eq!(m.get(ue, 1), 0.0);
        }
    }

    #[test]
    fn sinr_invariant_under_common_scaling_of_gains_and_noise() {
        let p = params(3, 1.7);
        let pos = [[30.0, 40.0], [120.0, 10.0]];
        let sites = [[0.0, 0.0], [80.0, 0.0], [0.0, 90.0]];
        let g = compute_gain_matrix(&pos, &sites, &p, 21);
        let active = CellSet::all(3);
        let scale = 0.125;
        let mut scaled_gains = g.clone();
        for ue in 0..2 {
            for c in 0..3 {
                scaled_gains.set(ue, c, g.get(ue, c) * scale);
            }
        }
        // scaling noise identically: N0*B scales when B does
        let mut scaled_params = p.clone();
        scaled_params.bandwidth_hz *= scale;
        for ue in 0..2 {
            for c in active.iter() {
                let before = compute_sinr(ue, c, &g, &p, &active).unwrap();
                let after =
                    compute_sinr(ue, c, &scaled_gains, &scaled_params, &active).unwrap();
                assert!((after / before - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn argmax_sinr_invariant_under_per_ue_gain_scaling() {
        // with zero noise everything scales out of the ratio
        let mut p = params(3, 1.0);
        p.noise_psd_dbm_hz = -1000.0; // effectively zero noise
        let pos = [[30.0, 40.0]];
        let sites = [[0.0, 0.0], [80.0, 0.0], [0.0, 90.0]];
        let g = compute_gain_matrix(&pos, &sites, &p, 5);
        let active = CellSet::all(3);
        let m1 = sinr_matrix(&g, &p, &active);
        let mut scaled = g.clone();
        for c in 0..3 {
            scaled.set(0, c, g.get(0, c) * 0.25);
        }
        let m2 = sinr_matrix(&scaled, &p, &active);
        let argmax = |m: &PairMatrix| {
            (0..3)
                .max_by(|&a, &b| m.get(0, a).total_cmp(&m.get(0, b)))
                .unwrap()
        };
        assert_eq!(argmax(&m1), argmax(&m2));
    }
}
