//! Experiment sweeps: a spec enumerates (generator, size, source count,
//! seed, algorithm) cells; each cell builds a graph, runs the algorithm in
//! the simulator, optionally verifies the output against the brute-force
//! oracle, and emits one metrics record. Cells run in parallel but the
//! output stream is ordered by spec enumeration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

use congest_ftp_core::centralized::{dual_ftmbfs_centralized, ftmbfs_centralized, CentralConfig};
use congest_ftp_core::dual::{build_dual_ftmbfs, DualConfig};
use congest_ftp_core::ftmbfs::{build_ftmbfs, FtmbfsConfig};
use congest_ftp_core::gen;
use congest_ftp_core::graph::{EdgeId, Graph, VertexId};
use congest_ftp_core::oracle::verify_preserver;
use congest_ftp_core::sim::{NetworkConfig, SimTrace};
use congest_ftp_core::spanner::{
    ft_additive_spanner_dual, ft_additive_spanner_single, SpannerConfig,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("generator failed for n={n}: {source}")]
    Generator { n: usize, source: gen::GenError },
    #[error("cell n={n} |S|={s_count} seed={seed} algorithm={algorithm}: {message}")]
    Cell { n: usize, s_count: usize, seed: u64, algorithm: String, message: String },
    #[error("verification failed at n={n} |S|={s_count} seed={seed} algorithm={algorithm}")]
    VerificationFailed { n: usize, s_count: usize, seed: u64, algorithm: String },
    #[error("simulator timeout at n={n} |S|={s_count} seed={seed} algorithm={algorithm}")]
    Timeout { n: usize, s_count: usize, seed: u64, algorithm: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Path,
    Cycle,
    Grid { cols: usize },
    ErdosRenyi { p: f64 },
    Lollipop { detour_len: usize, drop: usize },
    RandomGeometric { r: f64 },
}

impl GeneratorSpec {
    /// Deterministic per (spec, n, seed); resamples until connected.
    pub fn build(&self, n: usize, seed: u64) -> Result<Graph, gen::GenError> {
        match self {
            GeneratorSpec::Path => Ok(gen::path(n)),
            GeneratorSpec::Cycle => Ok(gen::cycle(n)),
            GeneratorSpec::Grid { cols } => Ok(gen::grid(n.div_ceil(*cols), *cols)),
            GeneratorSpec::ErdosRenyi { p } => {
                let p = *p;
                gen::connected(|salt| gen::erdos_renyi(n, p, seed.wrapping_mul(1009) + salt), 200)
            }
            GeneratorSpec::Lollipop { detour_len, drop } => {
                Ok(gen::lollipop(*detour_len, *drop, seed).graph)
            }
            GeneratorSpec::RandomGeometric { r } => {
                let r = *r;
                gen::connected(
                    |salt| gen::random_geometric(n, r, seed.wrapping_mul(2003) + salt),
                    200,
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ftmbfs,
    DualFtmbfs,
    Spanner1,
    Spanner2,
    CentralizedSingle,
    CentralizedDual,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ftmbfs => "ftmbfs",
            Algorithm::DualFtmbfs => "dual-ftmbfs",
            Algorithm::Spanner1 => "spanner1",
            Algorithm::Spanner2 => "spanner2",
            Algorithm::CentralizedSingle => "centralized-single",
            Algorithm::CentralizedDual => "centralized-dual",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub generator: GeneratorSpec,
    pub sizes: Vec<usize>,
    pub source_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub verify: bool,
    #[serde(default)]
    pub fail_fast: bool,
    #[serde(default = "default_ln_const")]
    pub ln_const: f64,
    #[serde(default = "default_phase_constant")]
    pub phase_constant: u32,
    /// Cap for f=2 verification; larger graphs refuse to verify unless
    /// raised explicitly.
    #[serde(default = "default_verify_cap")]
    pub dual_verify_cap: usize,
}

fn default_ln_const() -> f64 {
    10.0
}

fn default_phase_constant() -> u32 {
    4
}

fn default_verify_cap() -> usize {
    40
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds.is_empty() {
            return Err("at least one seed required".into());
        }
        if self.sizes.iter().any(|&n| n == 0) {
            return Err("sizes must be positive".into());
        }
        Ok(())
    }
}

/// One row of the metrics stream. `wall_time_ms` is measured but excluded
/// from every determinism comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub n: usize,
    pub m: usize,
    pub diameter: usize,
    pub s_count: usize,
    pub algorithm: String,
    pub seed: u64,
    pub edges_out: usize,
    pub rounds_used: u64,
    pub max_edge_phase_load: u64,
    pub slipped_messages: u64,
    pub verify_pass: Option<bool>,
    pub violation: Option<String>,
    pub wall_time_ms: f64,
}

/// CSV columns, fixed order, version 1.
pub const CSV_HEADER: &str = "n,m,diameter,s_count,algorithm,seed,edges_out,rounds_used,max_edge_phase_load,slipped_messages,verify_pass,wall_time_ms";

impl MetricsRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.n,
            self.m,
            self.diameter,
            self.s_count,
            self.algorithm,
            self.seed,
            self.edges_out,
            self.rounds_used,
            self.max_edge_phase_load,
            self.slipped_messages,
            self.verify_pass.map_or(String::new(), |b| b.to_string()),
            self.wall_time_ms,
        )
    }
}

/// Evenly spread source IDs, the same rule the CLI uses for --num-sources.
pub fn spread_sources(n: usize, count: usize) -> Vec<VertexId> {
    let count = count.clamp(1, n);
    let mut out: Vec<VertexId> = (0..count).map(|j| j * n / count).collect();
    out.dedup();
    out
}

fn network(spec: &ExperimentSpec) -> NetworkConfig {
    NetworkConfig { phase_constant: spec.phase_constant, ..NetworkConfig::default() }
}

struct CellOutcome {
    edges: std::collections::BTreeSet<EdgeId>,
    rounds_used: u64,
    trace: SimTrace,
}

fn run_cell(
    spec: &ExperimentSpec,
    g: &Graph,
    sources: &[VertexId],
    algorithm: Algorithm,
    seed: u64,
) -> Result<CellOutcome, String> {
    let net = network(spec);
    match algorithm {
        Algorithm::Ftmbfs => {
            let cfg = FtmbfsConfig { ln_const: spec.ln_const, network: net };
            let out = build_ftmbfs(g, sources, &cfg, seed).map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                edges: out.preserver.edges().collect(),
                rounds_used: out.rounds_total,
                trace: out.combined_trace(),
            })
        }
        Algorithm::DualFtmbfs => {
            let cfg = DualConfig {
                ln_const: spec.ln_const,
                network: net,
                sigma1_override: None,
                sigma2_override: None,
            };
            let out = build_dual_ftmbfs(g, sources, &cfg, seed).map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                edges: out.preserver.edges().collect(),
                rounds_used: out.rounds_total,
                trace: out.combined_trace(),
            })
        }
        Algorithm::Spanner1 | Algorithm::Spanner2 => {
            let cfg = SpannerConfig {
                ln_const: spec.ln_const,
                network: net,
                threshold_override: None,
            };
            let out = if algorithm == Algorithm::Spanner1 {
                ft_additive_spanner_single(g, &cfg, seed)
            } else {
                ft_additive_spanner_dual(g, &cfg, seed)
            }
            .map_err(|e| e.to_string())?;
            let mut trace = SimTrace::default();
            for t in &out.traces {
                trace.absorb(t);
            }
            Ok(CellOutcome {
                edges: out.preserver.edges().collect(),
                rounds_used: out.rounds_total,
                trace,
            })
        }
        Algorithm::CentralizedSingle | Algorithm::CentralizedDual => {
            let cfg = CentralConfig { ln_const: spec.ln_const };
            let h = if algorithm == Algorithm::CentralizedSingle {
                ftmbfs_centralized(g, sources, seed, &cfg)
            } else {
                dual_ftmbfs_centralized(g, sources, seed, &cfg)
            }
            .map_err(|e| e.to_string())?;
            Ok(CellOutcome {
                edges: h.edges().collect(),
                rounds_used: 0,
                trace: SimTrace::default(),
            })
        }
    }
}

/// Runs the full sweep. Records come back in spec enumeration order
/// (size, source count, algorithm, seed) regardless of completion order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<MetricsRecord>, ExperimentError> {
    spec.validate().map_err(|message| ExperimentError::Cell {
        n: 0,
        s_count: 0,
        seed: 0,
        algorithm: "spec".into(),
        message,
    })?;
    let mut cells = Vec::new();
    for &n in &spec.sizes {
        for &s_count in &spec.source_counts {
            for &algorithm in &spec.algorithms {
                for &seed in &spec.seeds {
                    cells.push((n, s_count, algorithm, seed));
                }
            }
        }
    }
    let results: Vec<Result<MetricsRecord, ExperimentError>> = cells
        .par_iter()
        .map(|&(n, s_count, algorithm, seed)| {
            let start = std::time::Instant::now();
            let g = spec
                .generator
                .build(n, seed)
                .map_err(|source| ExperimentError::Generator { n, source })?;
            let sources = spread_sources(g.n(), s_count);
            let outcome = run_cell(spec, &g, &sources, algorithm, seed).map_err(|message| {
                if message.contains("exceeded") {
                    ExperimentError::Timeout {
                        n,
                        s_count,
                        seed,
                        algorithm: algorithm.name().into(),
                    }
                } else {
                    ExperimentError::Cell {
                        n,
                        s_count,
                        seed,
                        algorithm: algorithm.name().into(),
                        message,
                    }
                }
            })?;
            let (verify_pass, violation) = if spec.verify {
                let f = match algorithm {
                    Algorithm::Ftmbfs | Algorithm::CentralizedSingle | Algorithm::Spanner1 => 1,
                    _ => 2,
                };
                if f == 2 && g.n() > spec.dual_verify_cap {
                    (None, Some("skipped: n exceeds dual verify cap".into()))
                } else {
                    match algorithm {
                        Algorithm::Spanner1 | Algorithm::Spanner2 => {
                            let rep = congest_ftp_core::oracle::verify_additive(
                                &g,
                                &outcome.edges,
                                f,
                                2,
                            )
                            .map_err(|e| ExperimentError::Cell {
                                n,
                                s_count,
                                seed,
                                algorithm: algorithm.name().into(),
                                message: e.to_string(),
                            })?;
                            let violation = rep.violations.first().map(|v| format!("{v:?}"));
                            (Some(rep.pass), violation)
                        }
                        _ => {
                            let rep = verify_preserver(&g, &outcome.edges, &sources, f).map_err(
                                |e| ExperimentError::Cell {
                                    n,
                                    s_count,
                                    seed,
                                    algorithm: algorithm.name().into(),
                                    message: e.to_string(),
                                },
                            )?;
                            let violation = rep.violations.first().map(|v| format!("{v:?}"));
                            (Some(rep.pass), violation)
                        }
                    }
                }
            } else {
                (None, None)
            };
            Ok(MetricsRecord {
                n: g.n(),
                m: g.m(),
                diameter: g.diameter(),
                s_count: sources.len(),
                algorithm: algorithm.name().into(),
                seed,
                edges_out: outcome.edges.len(),
                rounds_used: outcome.rounds_used,
                max_edge_phase_load: outcome.trace.max_edge_phase_msgs,
                slipped_messages: outcome.trace.slipped_messages,
                verify_pass,
                violation,
                wall_time_ms: start.elapsed().as_secs_f64() * 1000.0,
            })
        })
        .collect();

    let mut records = Vec::with_capacity(results.len());
    for r in results {
        let rec = r?;
        let failed = rec.verify_pass == Some(false);
        records.push(rec);
        if failed && spec.fail_fast {
            let rec = records.last().unwrap();
            return Err(ExperimentError::VerificationFailed {
                n: rec.n,
                s_count: rec.s_count,
                seed: rec.seed,
                algorithm: rec.algorithm.clone(),
            });
        }
    }
    Ok(records)
}

pub fn write_csv(records: &[MetricsRecord], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn write_json_lines(records: &[MetricsRecord], w: &mut impl Write) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            generator: GeneratorSpec::Cycle,
            sizes: vec![4],
            source_counts: vec![1],
            seeds: vec![1],
            algorithms: vec![Algorithm::Ftmbfs],
            verify: true,
            fail_fast: false,
            ln_const: 10.0,
            phase_constant: 4,
            dual_verify_cap: 40,
        }
    }

    #[test]
    fn single_cell_with_verification() {
        let records = run_experiment(&tiny_spec()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].verify_pass, Some(true));
        assert_eq!(records[0].n, 4);
    }

    #[test]
    fn empty_sweep_is_empty_output() {
        let mut spec = tiny_spec();
        spec.sizes = vec![];
        let records = run_experiment(&spec).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn record_streams_are_deterministic_modulo_wall_time() {
        let mut spec = tiny_spec();
        spec.sizes = vec![12, 16];
        spec.seeds = vec![3, 4];
        spec.generator = GeneratorSpec::ErdosRenyi { p: 0.4 };
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        let strip = |rs: &[MetricsRecord]| -> Vec<serde_json::Value> {
            rs.iter()
                .map(|r| {
                    let mut v = serde_json::to_value(r).unwrap();
                    crate::strip_wall_time(&mut v);
                    v
                })
                .collect()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn ordering_follows_spec_enumeration() {
        let mut spec = tiny_spec();
        spec.sizes = vec![8, 6];
        spec.seeds = vec![9, 2];
        spec.verify = false;
        let records = run_experiment(&spec).unwrap();
        let key: Vec<(usize, u64)> = records.iter().map(|r| (r.n, r.seed)).collect();
        assert_eq!(key, vec![(8, 9), (8, 2), (6, 9), (6, 2)]);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = tiny_spec();
        let text = serde_json::to_string(&spec).unwrap();
        let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back.generator, spec.generator);
        assert_eq!(back.algorithms, spec.algorithms);
    }
}
