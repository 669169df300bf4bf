//! Window KPIs (handover rate, tail throughput, Jain fairness), threshold
//! classification into vulnerability records, and severity scoring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netstate::HandoverEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VulnKind {
    Stability,
    QoE,
    Fairness,
}

impl std::fmt::Display for VulnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VulnKind::Stability => f.write_str("stability"),
            VulnKind::QoE => f.write_str("qoe"),
            VulnKind::Fairness => f.write_str("fairness"),
        }
    }
}

/// Operator failure thresholds. Defaults: Thr5% < 10 Mb/s, J < 0.7,
/// HO > 3 per UE per minute.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub qoe_thr_bps: f64,
    pub fairness_jain: f64,
    pub stability_ho_per_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            qoe_thr_bps: 10e6,
            fairness_jain: 0.7,
            stability_ho_per_min: 3.0,
        }
    }
}

/// KPIs of one evaluation window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpiWindow {
    pub window_index: usize,
    pub handovers_per_ue: Vec<u32>,
    pub per_ue_throughput_bps: Vec<f64>,
    pub thr_5pct_bps: f64,
    pub jain: f64,
    /// Mean handovers per UE per minute.
    pub ho_rate_per_ue_min: f64,
    pub ping_pong_ues: usize,
}

/// One detected threshold violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VulnerabilityRecord {
    pub kind: VulnKind,
    pub severity: u8,
    pub window_index: usize,
    pub measured_value: f64,
    pub threshold: f64,
    pub critical: bool,
}

/// Nearest-rank 5th percentile: sorted ascending, 1-based index
/// ceil(0.05 * N).
pub fn percentile5(throughputs: &[f64]) -> Result<f64> {
    if throughputs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = throughputs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (0.05 * sorted.len() as f64).ceil().max(1.0) as usize;
    Ok(sorted[rank - 1])
}

/// Jain's fairness index (sum x)^2 / (N sum x^2). The all-zero vector maps
/// to 1.0: nothing differentiates the users, and a QoE violation fires on
/// its own.
pub fn jain_index(throughputs: &[f64]) -> f64 {
    let n = throughputs.len() as f64;
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return 1.0;
    }
    sum * sum / (n * sum_sq)
}

/// Average handovers per UE per minute.
pub fn handover_rate(n_events: usize, n_ues: usize, window_minutes: f64) -> f64 {
    debug_assert!(window_minutes > 0.0);
    n_events as f64 / (n_ues as f64 * window_minutes)
}

/// Count of UEs with at least one A->B->A pattern whose return handover
/// happens within `horizon_s` of the first.
pub fn ping_pong_ues(history: &[&[HandoverEvent]], horizon_s: f64) -> usize {
    debug_assert!(horizon_s > 0.0);
    history
        .iter()
        .filter(|events| {
            events.windows(2).any(|pair| {
                pair[1].to == pair[0].from && pair[1].time - pair[0].time <= horizon_s
            })
        })
        .count()
}

/// Severity 1-5: 1 + floor(4 * min(1, |measured - threshold| / threshold)),
/// plus 1 when two or more kinds are violated in the same window.
pub fn severity_score(measured: f64, threshold: f64, n_kinds_violated: usize) -> u8 {
    debug_assert!(threshold > 0.0);
    let exceedance = ((measured - threshold).abs() / threshold).min(1.0);
    let mut score = 1 + (4.0 * exceedance).floor() as i32;
    if n_kinds_violated >= 2 {
        score += 1;
    }
    score.clamp(1, 5) as u8
}

/// Classify a window against the thresholds: at most one record per kind.
/// Only stability records can be critical, which they are when more than
/// `critical_ue_count` UEs ping-pong.
pub fn classify(
    window: &KpiWindow,
    thresholds: &Thresholds,
    critical_ue_count: usize,
) -> Vec<VulnerabilityRecord> {
    let qoe = window.thr_5pct_bps < thresholds.qoe_thr_bps;
    let fairness = window.jain < thresholds.fairness_jain;
    let stability = window.ho_rate_per_ue_min > thresholds.stability_ho_per_min;
    let n_kinds = usize::from(qoe) + usize::from(fairness) + usize::from(stability);

    let mut records = Vec::with_capacity(n_kinds);
    if stability {
        records.push(VulnerabilityRecord {
            kind: VulnKind::Stability,
            severity: severity_score(
                window.ho_rate_per_ue_min,
                thresholds.stability_ho_per_min,
                n_kinds,
            ),
            window_index: window.window_index,
            measured_value: window.ho_rate_per_ue_min,
            threshold: thresholds.stability_ho_per_min,
            critical: window.ping_pong_ues > critical_ue_count,
        });
    }
    if qoe {
        records.push(VulnerabilityRecord {
            kind: VulnKind::QoE,
            severity: severity_score(window.thr_5pct_bps, thresholds.qoe_thr_bps, n_kinds),
            window_index: window.window_index,
            measured_value: window.thr_5pct_bps,
            threshold: thresholds.qoe_thr_bps,
            critical: false,
        });
    }
    if fairness {
        records.push(VulnerabilityRecord {
            kind: VulnKind::Fairness,
            severity: severity_score(window.jain, thresholds.fairness_jain, n_kinds),
            window_index: window.window_index,
            measured_value: window.jain,
            threshold: thresholds.fairness_jain,
            critical: false,
        });
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(thr_5pct_bps: f64, jain: f64, ho_rate: f64, ping_pong: usize) -> KpiWindow {
        KpiWindow {
            window_index: 0,
            handovers_per_ue: vec![],
            per_ue_throughput_bps: vec![],
            thr_5pct_bps,
            jain,
            ho_rate_per_ue_min: ho_rate,
            ping_pong_ues: ping_pong,
        }
    }

    #[test]
    fn percentile5_nearest_rank() {
        // N = 40 -> 2nd smallest
        let mut v: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        v.reverse();
        assert_eq!(percentile5(&v).unwrap(), 2.0);
        // all equal
        assert_eq!(percentile5(&[7.0; 9]).unwrap(), 7.0);
        // single value
        assert_eq!(percentile5(&[3.5]).unwrap(), 3.5);
        assert!(percentile5(&[]).is_err());
    }

    #[test]
    fn percentile5_below_median() {
        let v = [9.0, 1.0, 4.0, 6.0, 2.0, 8.0, 3.0];
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        assert!(percentile5(&v).unwrap() <= median);
    }

    #[test]
    fn jain_reference_values() {
        assert_eq!(jain_index(&[1.0, 1.0, 1.0, 1.0]), 1.0);
        assert!((jain_index(&[5.0, 0.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 2.0, 3.0, 4.0]) - 100.0 / 120.0).abs() < 1e-12);
        assert_eq!(jain_index(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn jain_scale_invariant() {
        let x = [0.4, 1.7, 2.2, 9.0];
        let scaled: Vec<f64> = x.iter().map(|v| v * 37.5).collect();
        assert!((jain_index(&x) - jain_index(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn handover_rate_arithmetic() {
        assert_eq!(handover_rate(0, 40, 1.0), 0.0);
        assert_eq!(handover_rate(120, 40, 1.0), 3.0);
        assert_eq!(handover_rate(200, 40, 1.0), 5.0);
    }

    #[test]
    fn ping_pong_detection() {
        let ev = |time, from, to| HandoverEvent { time, from, to };
        // no returns
        let h1 = [ev(1.0, 0, 1), ev(5.0, 1, 2)];
        assert_eq!(ping_pong_ues(&[&h1], 3.0), 0);
        // 0->1 at t=5, 1->0 at t=7, horizon 3 -> ping-pong
        let h2 = [ev(5.0, 0, 1), ev(7.0, 1, 0)];
        assert_eq!(ping_pong_ues(&[&h2], 3.0), 1);
        // return outside horizon
        let h3 = [ev(5.0, 0, 1), ev(9.5, 1, 0)];
        assert_eq!(ping_pong_ues(&[&h3], 3.0), 0);
        // each UE counted once even with several patterns
        let h4 = [ev(1.0, 0, 1), ev(2.0, 1, 0), ev(3.0, 0, 1), ev(4.0, 1, 0)];
        assert_eq!(ping_pong_ues(&[&h4, &h2], 3.0), 2);
    }

    #[test]
    fn severity_rules() {
        // at the boundary -> 1
        assert_eq!(severity_score(10.0, 10.0, 1), 1);
        // 50% exceedance, single kind -> 3
        assert_eq!(severity_score(5.0, 10.0, 1), 3);
        // 120% exceedance with 3 kinds -> clamp at 5
        assert_eq!(severity_score(22.0, 10.0, 3), 5);
        // multi-kind bonus
        assert_eq!(severity_score(10.0, 10.0, 2), 2);
    }

    #[test]
    fn classify_single_qoe_violation() {
        let t = Thresholds::default();
        let w = window(8e6, 0.9, 1.0, 0);
        let records = classify(&w, &t, 3);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].kind, VulnKind::QoE);
        assert!(!records[0].critical);
    }

    #[test]
    fn classify_healthy_window_is_empty() {
        let t = Thresholds::default();
        assert!(classify(&window(20e6, 0.95, 0.5, 0), &t, 3).is_empty());
    }

    #[test]
    fn classify_critical_stability() {
        let t = Thresholds::default();
        let w = window(20e6, 0.95, 5.0, 5);
        let records = classify(&w, &t, 3);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].kind, VulnKind::Stability);
        assert!(records[0].critical);
        // ping-pong at the count boundary is not critical
        let w = window(20e6, 0.95, 5.0, 3);
        assert!(!classify(&w, &t, 3)[0].critical);
    }

    #[test]
    fn classify_caps_at_three_records_and_criticals_are_stability() {
        let t = Thresholds::default();
        let w = window(1e6, 0.2, 9.0, 9);
        let records = classify(&w, &t, 3);
        assert_eq!(records.len(), 3);
        for r in &records {
            if r.critical {
                assert_eq!(r.kind, VulnKind::Stability);
            }
            // all three kinds violated -> severity bonus applies
            assert!(r.severity >= 2);
        }
    }

    #[test]
    fn classify_monotone_in_each_kpi() {
        let t = Thresholds::default();
        let base = window(8e6, 0.6, 4.0, 0);
        let worse = window(5e6, 0.4, 6.0, 0);
        let rb = classify(&base, &t, 3);
        let rw = classify(&worse, &t, 3);
        assert_eq!(rb.len(), rw.len());
        for (b, w) in rb.iter().zip(&rw) {
            assert_eq!(b.kind, w.kind);
            assert!(w.severity >= b.severity);
        }
    }
}
