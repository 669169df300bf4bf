//! The search-space encoding: a fixed-length real configuration vector with
//! per-scenario bounds and frozen genes, plus encode/decode between genomes
//! and simulation setups.
//!
//! Gene layout: `[x0, y0, .., x(N-1), y(N-1), bias_0 .. bias_(M-1),
//! interference_scale, isd_scale]`, length 2N + M + 2.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::CellSet;
use crate::error::{Error, Result};
use crate::netstate::{NetworkConfig, SimSetup};
use crate::rng;

/// Fraction of UEs confined to the designated cluster cells in the
/// load-imbalance style scenarios.
pub const CLUSTER_FRACTION: f64 = 0.7;

/// Half-width of a cluster bounding box. Chosen so every point of the box
/// lies within 0.6 ISD of its cell (corner distance 0.4 * sqrt(2) ~ 0.566).
pub const CLUSTER_HALF_WIDTH_ISD: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    StableMobility,
    StableHighLoad,
    LoadImbalance,
    CoverageHole,
    HighInterference,
    CongestionCrisis,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::StableMobility,
        ScenarioKind::StableHighLoad,
        ScenarioKind::LoadImbalance,
        ScenarioKind::CoverageHole,
        ScenarioKind::HighInterference,
        ScenarioKind::CongestionCrisis,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::StableMobility => "stable_mobility",
            ScenarioKind::StableHighLoad => "stable_high_load",
            ScenarioKind::LoadImbalance => "load_imbalance",
            ScenarioKind::CoverageHole => "coverage_hole",
            ScenarioKind::HighInterference => "high_interference",
            ScenarioKind::CongestionCrisis => "congestion_crisis",
        }
    }

    /// Stable numeric tag for seed derivation.
    pub fn tag(&self) -> u64 {
        ScenarioKind::ALL.iter().position(|k| k == self).unwrap() as u64
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ScenarioKind::ALL
            .iter()
            .find(|k| k.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

/// Index helpers over the flat gene vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneLayout {
    pub n_ues: usize,
    pub n_cells: usize,
}

impl GeneLayout {
    pub fn n_genes(&self) -> usize {
        2 * self.n_ues + self.n_cells + 2
    }

    pub fn pos_x(&self, ue: usize) -> usize {
        2 * ue
    }

    pub fn pos_y(&self, ue: usize) -> usize {
        2 * ue + 1
    }

    pub fn load_bias(&self, cell: usize) -> usize {
        2 * self.n_ues + cell
    }

    pub fn interference(&self) -> usize {
        2 * self.n_ues + self.n_cells
    }

    pub fn isd(&self) -> usize {
        2 * self.n_ues + self.n_cells + 1
    }

    pub fn is_position_gene(&self, gene: usize) -> bool {
        gene < 2 * self.n_ues
    }
}

/// A fully-resolved scenario: active cells, per-gene bounds, frozen genes,
/// and the cluster geometry for the imbalance scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub layout: GeneLayout,
    pub active_cells: CellSet,
    /// Inclusive (lo, hi) per gene.
    pub bounds: Vec<(f64, f64)>,
    /// Frozen genes hold this fixed value and are excluded from variation.
    pub frozen: Vec<Option<f64>>,
    /// The cells UEs cluster around, when the scenario clusters at all.
    pub cluster_cells: Vec<usize>,
}

impl Scenario {
    pub fn n_genes(&self) -> usize {
        self.layout.n_genes()
    }

    pub fn is_frozen(&self, gene: usize) -> bool {
        self.frozen[gene].is_some()
    }

    /// Per-gene Gaussian mutation scale: `sigma_m` (meters) for position
    /// genes, 10% of the bound range for everything else.
    pub fn mutation_sigma(&self, gene: usize, sigma_m: f64) -> f64 {
        if self.layout.is_position_gene(gene) {
            sigma_m
        } else {
            let (lo, hi) = self.bounds[gene];
            0.1 * (hi - lo)
        }
    }
}

/// The two ring cells nearest the bounding-box origin, used as cluster
/// targets; deterministic for a given deployment.
fn designated_cluster_cells(net: &NetworkConfig) -> Vec<usize> {
    let sites = net.site_positions(1.0);
    let mut by_distance: Vec<(usize, f64)> = sites
        .iter()
        .enumerate()
        .map(|(i, s)| (i, (s[0].powi(2) + s[1].powi(2)).sqrt()))
        .collect();
    by_distance.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    by_distance.iter().take(2).map(|(i, _)| *i).collect()
}

/// Build the scenario definition for a kind over a given deployment.
pub fn scenario_spec(kind: ScenarioKind, net: &NetworkConfig) -> Scenario {
    let layout = GeneLayout {
        n_ues: net.n_ues,
        n_cells: net.n_cells,
    };
    let side = net.bbox_side();
    let n_genes = layout.n_genes();
    let mut bounds = Vec::with_capacity(n_genes);
    for _ in 0..2 * net.n_ues {
        bounds.push((0.0, side));
    }
    for _ in 0..net.n_cells {
        bounds.push((0.0, 1.0));
    }
    bounds.push((0.5, 3.0)); // interference_scale
    bounds.push((0.75, 2.0)); // isd_scale
    let mut frozen: Vec<Option<f64>> = vec![None; n_genes];

    let mut active = CellSet::all(net.n_cells);
    let mut cluster_cells = Vec::new();

    let freeze_geometry = |frozen: &mut Vec<Option<f64>>, layout: &GeneLayout| {
        frozen[layout.interference()] = Some(1.0);
        frozen[layout.isd()] = Some(1.0);
    };
    let cluster_positions =
        |bounds: &mut Vec<(f64, f64)>, cells: &[usize], net: &NetworkConfig, layout: &GeneLayout| {
            let sites = net.site_positions(1.0);
            let w = CLUSTER_HALF_WIDTH_ISD * net.isd_m;
            let n_clustered = (CLUSTER_FRACTION * net.n_ues as f64).ceil() as usize;
            for ue in 0..n_clustered {
                let site = sites[cells[ue % cells.len()]];
                bounds[layout.pos_x(ue)] =
                    ((site[0] - w).max(0.0), (site[0] + w).min(side));
                bounds[layout.pos_y(ue)] =
                    ((site[1] - w).max(0.0), (site[1] + w).min(side));
            }
        };

    match kind {
        ScenarioKind::StableMobility => {
            freeze_geometry(&mut frozen, &layout);
        }
        ScenarioKind::StableHighLoad => {
            freeze_geometry(&mut frozen, &layout);
            for c in 0..net.n_cells {
                bounds[layout.load_bias(c)] = (0.6, 1.0);
            }
        }
        ScenarioKind::LoadImbalance => {
            cluster_cells = designated_cluster_cells(net);
            cluster_positions(&mut bounds, &cluster_cells, net, &layout);
            // clustering scenario keeps the deployment geometry nominal
            frozen[layout.isd()] = Some(1.0);
        }
        ScenarioKind::CoverageHole => {
            active = active.deactivated(0);
        }
        ScenarioKind::HighInterference => {
            bounds[layout.interference()] = (1.5, 3.0);
            bounds[layout.isd()] = (0.75, 1.0);
        }
        ScenarioKind::CongestionCrisis => {
            active = active.deactivated(0);
            cluster_cells = designated_cluster_cells(net);
            cluster_positions(&mut bounds, &cluster_cells, net, &layout);
            frozen[layout.isd()] = Some(1.0);
            for c in 0..net.n_cells {
                bounds[layout.load_bias(c)] = (0.5, 1.0);
            }
        }
    }

    Scenario {
        kind,
        layout,
        active_cells: active,
        bounds,
        frozen,
        cluster_cells,
    }
}

/// A candidate configuration vector tied to its scenario.
#[derive(Debug, Clone)]
pub struct Genome {
    values: Vec<f64>,
    scenario: Arc<Scenario>,
}

impl Genome {
    pub fn new(values: Vec<f64>, scenario: Arc<Scenario>) -> Result<Self> {
        if values.len() != scenario.n_genes() {
            return Err(Error::LayoutMismatch);
        }
        Ok(Self { values, scenario })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn kind(&self) -> ScenarioKind {
        self.scenario.kind
    }

    pub fn hash(&self) -> u64 {
        rng::hash_values(&self.values, self.scenario.kind.tag())
    }

    pub fn same_layout(&self, other: &Genome) -> bool {
        self.scenario.kind == other.scenario.kind
            && self.scenario.layout == other.scenario.layout
    }

    /// Validate every gene against its bound.
    pub fn check_bounds(&self) -> Result<()> {
        for (gene, (&value, &(lo, hi))) in
            self.values.iter().zip(&self.scenario.bounds).enumerate()
        {
            if !(lo..=hi).contains(&value) {
                return Err(Error::GenomeBounds {
                    gene,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Uniform random genome within the scenario bounds; frozen genes take
/// their fixed values.
pub fn random_genome(scenario: &Arc<Scenario>, rng: &mut impl Rng) -> Genome {
    let values = scenario
        .bounds
        .iter()
        .enumerate()
        .map(|(g, &(lo, hi))| match scenario.frozen[g] {
            Some(v) => v,
            None if hi > lo => rng.random_range(lo..hi),
            None => lo,
        })
        .collect();
    Genome {
        values,
        scenario: Arc::clone(scenario),
    }
}

/// Project every gene into its bound and restore frozen genes. Idempotent.
pub fn clamp(mut genome: Genome) -> Genome {
    clamp_in_place(&mut genome);
    genome
}

pub fn clamp_in_place(genome: &mut Genome) {
    let scenario = Arc::clone(&genome.scenario);
    for (g, v) in genome.values.iter_mut().enumerate() {
        let (lo, hi) = scenario.bounds[g];
        *v = match scenario.frozen[g] {
            Some(fixed) => fixed,
            None => v.clamp(lo, hi),
        };
    }
}

/// Decode a genome into a simulation setup. Out-of-bounds genes are an
/// error here, never silently repaired; repair is the variation operators'
/// job.
pub fn decode(genome: &Genome, net: &NetworkConfig) -> Result<SimSetup> {
    genome.check_bounds()?;
    let layout = genome.scenario.layout;
    let v = &genome.values;
    let positions = (0..layout.n_ues)
        .map(|u| [v[layout.pos_x(u)], v[layout.pos_y(u)]])
        .collect();
    let background_load = (0..layout.n_cells)
        .map(|c| v[layout.load_bias(c)])
        .collect();
    let isd_scale = v[layout.isd()];
    Ok(SimSetup {
        positions,
        background_load,
        sites: net.site_positions(isd_scale),
        active: genome.scenario.active_cells.clone(),
        interference_scale: v[layout.interference()],
        isd_scale,
    })
}

/// Serialized genome file format: layout header plus the flat value array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenomeFile {
    pub schema: String,
    pub scenario: ScenarioKind,
    pub n_ues: usize,
    pub n_cells: usize,
    pub values: Vec<f64>,
}

pub const GENOME_SCHEMA: &str = "tsfuzz-genome-v1";

impl GenomeFile {
    pub fn from_genome(genome: &Genome) -> Self {
        Self {
            schema: GENOME_SCHEMA.to_string(),
            scenario: genome.kind(),
            n_ues: genome.scenario.layout.n_ues,
            n_cells: genome.scenario.layout.n_cells,
            values: genome.values.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome file serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: GenomeFile = serde_json::from_str(json)?;
        if !file.schema.starts_with("tsfuzz-genome-v1") {
            return Err(Error::SchemaVersion {
                path: "<genome>".into(),
                found: file.schema.clone(),
                expected: GENOME_SCHEMA.into(),
            });
        }
        Ok(file)
    }

    /// Rebuild the genome against a deployment; the layout must agree.
    pub fn into_genome(self, net: &NetworkConfig) -> Result<Genome> {
        if self.n_ues != net.n_ues || self.n_cells != net.n_cells {
            return Err(Error::LayoutMismatch);
        }
        let scenario = Arc::new(scenario_spec(self.scenario, net));
        Genome::new(self.values, scenario)
    }
}
