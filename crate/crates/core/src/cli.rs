//! Command-line front end: a structured JSON config describes a scenario
//! grid, and the subcommands drive the harness to emit CSV tables, Q-Q
//! data, the analytic excess-variability table, and optional SVG figures.
//!
//! One JSON document configures everything; flags override individual
//! fields. Value lists are sorted and deduplicated at load, scenario
//! substreams are derived from the master seed by enumeration index, and
//! every file is written by a single writer after computation, so reruns
//! with the same effective config are byte-identical regardless of the
//! parallelism degree.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::approx::CorrectionMode;
use crate::composition::{pivotal_sbp, Composition, SbpMatrix, ZeroPolicy};
use crate::figures;
use crate::harness::{
    excess_variability_table, qq_series, run_grid, run_scenario, scenario_approximations,
    ApproxVariant, GridOutcome, HarnessError, Scenario,
};
use crate::sampling::{scenario_seed, Dgd, DirichletSpec, ModelSpec};

/// Errors from the command layer, each mapped to a documented exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Filesystem failure reading the config or writing an output.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// The config does not parse or a field is out of range.
    #[error("invalid config: {0}")]
    Config(String),
    /// `--scenario` names a label the grid does not produce.
    #[error("unknown scenario label `{0}`")]
    UnknownScenario(String),
    /// `--coord` lies outside the one-based coordinate range.
    #[error("coordinate {coord} outside 1..={coords}")]
    BadCoordinate { coord: usize, coords: usize },
    /// Some scenarios failed; outputs for the others were still written.
    #[error("{failed} of {total} scenarios failed")]
    PartialFailure { failed: usize, total: usize },
    /// A harness failure outside any single scenario.
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    /// Documented process exit codes: 2 for I/O and config problems,
    /// 3 for partial scenario failure, 4 for a bad reference.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Config(_) | CliError::Harness(_) => 2,
            CliError::PartialFailure { .. } => 3,
            CliError::UnknownScenario(_) | CliError::BadCoordinate { .. } => 4,
        }
    }
}

fn default_n_draws() -> usize {
    10_000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_parallelism() -> usize {
    1
}

fn default_zero_replacement() -> f64 {
    0.5
}

/// How the sequential binary partition is chosen for every scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbpChoice {
    /// Balance `k` splits part `k` from the parts after it.
    #[default]
    Pivotal,
    /// An explicit sign matrix: one row of `{-1, 0, +1}` per part, one
    /// column per balance.
    Explicit(Vec<Vec<i8>>),
}

/// The scenario grid. Every combination of the listed values that a
/// selected model family consumes becomes one scenario; a family whose
/// value list is empty simply contributes no scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Expected class-probability vectors; each gets its own scenarios.
    pub alpha_tilde_vectors: Vec<Vec<f64>>,
    /// Model families to include.
    pub dgds: Vec<Dgd>,
    /// Concentrations for the Dirichlet families.
    #[serde(default)]
    pub alpha_s_values: Vec<f64>,
    /// Totals: the fixed count, or the median `exp(mu)` when the total is
    /// lognormal.
    pub total_values: Vec<u64>,
    /// Log-scale variances for the lognormal-total families.
    #[serde(default)]
    pub sigma_sq_values: Vec<f64>,
    /// Basis shared by every scenario.
    #[serde(default)]
    pub sbp: SbpChoice,
    /// Replacement value for zero counts before taking logs.
    #[serde(default = "default_zero_replacement")]
    pub zero_replacement: f64,
}

/// A full run description. Unknown keys are rejected so typos fail loudly
/// instead of silently falling back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed from which every scenario derives its own stream.
    #[serde(default)]
    pub master_seed: u64,
    /// Draws per scenario.
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    /// How zero-replaced compositions are renormalized.
    #[serde(default)]
    pub zero_policy: ZeroPolicy,
    /// Which mean-correction scale the corrected approximation uses.
    #[serde(default)]
    pub correction_mode: CorrectionMode,
    /// Directory that receives every output file.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also render SVG figures after `simulate`.
    #[serde(default)]
    pub emit_svg: bool,
    /// Worker threads for the grid; zero means one per CPU. The outputs
    /// never depend on this.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// The scenario grid.
    pub grid: GridConfig,
}

impl RunConfig {
    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks beyond what parsing enforces. Called by [`Self::load`]
    /// and again after flag overrides.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.n_draws < 2 {
            return bad(format!("n_draws must be at least 2, got {}", self.n_draws));
        }
        let g = &self.grid;
        if !g.zero_replacement.is_finite() || g.zero_replacement < 0.0 {
            return bad(format!(
                "zero_replacement must be finite and non-negative, got {}",
                g.zero_replacement
            ));
        }
        for (i, v) in g.alpha_tilde_vectors.iter().enumerate() {
            if let Err(e) = Composition::new(v.clone()) {
                return bad(format!("alpha_tilde vector {}: {e}", i + 1));
            }
        }
        for &a in &g.alpha_s_values {
            if !a.is_finite() || a <= 0.0 {
                return bad(format!("alpha_s values must be positive and finite, got {a}"));
            }
        }
        for &k in &g.total_values {
            if k == 0 {
                return bad("total values must be at least 1".to_string());
            }
        }
        for &s in &g.sigma_sq_values {
            if !s.is_finite() || s <= 0.0 {
                return bad(format!("sigma_sq values must be positive and finite, got {s}"));
            }
        }
        if let SbpChoice::Explicit(rows) = &g.sbp {
            if let Err(e) = SbpMatrix::from_rows(rows.clone()) {
                return bad(format!("explicit sbp: {e}"));
            }
        }
        Ok(())
    }
}

/// One planned scenario: the harness scenario plus the grid coordinates
/// it came from, kept for labeling output rows.
#[derive(Debug, Clone)]
pub struct PlannedScenario {
    pub scenario: Scenario,
    pub dgd: Dgd,
    /// Concentration, for the Dirichlet families.
    pub alpha_s: Option<f64>,
    /// Log-scale variance, for the lognormal-total families.
    pub sigma_sq: Option<f64>,
    /// The grid total: the fixed count, or `exp(mu)` for lognormal totals.
    pub total: u64,
}

/// Enumeration order of model families, fixed so a permuted config
/// produces the same plan.
const DGD_ORDER: [Dgd; 4] = [
    Dgd::Multinomial,
    Dgd::DirichletMultinomial,
    Dgd::LognormalMultinomial,
    Dgd::LognormalDirichletMultinomial,
];

/// Formats a grid value for labels and CSV: integers print bare, others
/// in the shortest round-trip form.
fn fmt_value(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_value).unwrap_or_default()
}

/// Expands the grid into labeled, seeded scenarios. Enumeration order is
/// probability vector, family (in [`DGD_ORDER`]), concentration,
/// log-scale variance, total, with each value list ascending; the
/// position in this order picks the scenario's seed substream.
pub fn build_scenarios(cfg: &RunConfig) -> Result<Vec<PlannedScenario>, CliError> {
    let grid = &cfg.grid;
    let config_err = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());

    let mut alpha_s_values = grid.alpha_s_values.clone();
    alpha_s_values.sort_unstable_by(f64::total_cmp);
    alpha_s_values.dedup();
    let mut sigma_sq_values = grid.sigma_sq_values.clone();
    sigma_sq_values.sort_unstable_by(f64::total_cmp);
    sigma_sq_values.dedup();
    let mut total_values = grid.total_values.clone();
    total_values.sort_unstable();
    total_values.dedup();

    let mut planned = Vec::new();
    let mut index: u64 = 0;
    let multi = grid.alpha_tilde_vectors.len() > 1;
    for (pi, alpha_tilde) in grid.alpha_tilde_vectors.iter().enumerate() {
        let p = Composition::new(alpha_tilde.clone())
            .map_err(|e| CliError::Config(format!("alpha_tilde vector {}: {e}", pi + 1)))?;
        let sbp = match &grid.sbp {
            SbpChoice::Pivotal => pivotal_sbp(p.len()).map_err(|e| config_err(&e))?,
            SbpChoice::Explicit(rows) => {
                SbpMatrix::from_rows(rows.clone()).map_err(|e| config_err(&e))?
            }
        };
        let prefix = if multi { format!("p{}_", pi + 1) } else { String::new() };
        for dgd in DGD_ORDER {
            if !grid.dgds.contains(&dgd) {
                continue;
            }
            let alphas: Vec<Option<f64>> = if dgd.has_dirichlet_layer() {
                alpha_s_values.iter().map(|&a| Some(a)).collect()
            } else {
                vec![None]
            };
            let sigmas: Vec<Option<f64>> = if dgd.has_lognormal_total() {
                sigma_sq_values.iter().map(|&s| Some(s)).collect()
            } else {
                vec![None]
            };
            for &alpha_s in &alphas {
                for &sigma_sq in &sigmas {
                    for &total in &total_values {
                        let dir = alpha_s
                            .map(|a| DirichletSpec::new(p.clone(), a))
                            .transpose()
                            .map_err(|e| config_err(&e))?;
                        let model = match (dir, sigma_sq) {
                            (None, None) => ModelSpec::multinomial(p.clone(), total),
                            (Some(d), None) => ModelSpec::dirichlet_multinomial(d, total),
                            (None, Some(s)) => ModelSpec::lognormal_multinomial(
                                p.clone(),
                                (total as f64).ln(),
                                s,
                            ),
                            (Some(d), Some(s)) => ModelSpec::lognormal_dirichlet_multinomial(
                                d,
                                (total as f64).ln(),
                                s,
                            ),
                        }
                        .map_err(|e| config_err(&e))?;
                        let mut label = format!("{prefix}{}", dgd.code());
                        if let Some(a) = alpha_s {
                            let _ = write!(label, "_aS{}", fmt_value(a));
                        }
                        let _ = write!(label, "_K{total}");
                        if let Some(s) = sigma_sq {
                            let _ = write!(label, "_sig{}", fmt_value(s));
                        }
                        let scenario = Scenario::new(
                            label,
                            model,
                            sbp.clone(),
                            cfg.n_draws,
                            grid.zero_replacement,
                            cfg.zero_policy,
                            scenario_seed(cfg.master_seed, index),
                        )?;
                        planned.push(PlannedScenario { scenario, dgd, alpha_s, sigma_sq, total });
                        index += 1;
                    }
                }
            }
        }
    }
    Ok(planned)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.to_path_buf(), source: e })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

/// Writes the analytic excess-variability table as CSV, one row per
/// (family row, total) cell, excess rounded to two decimals. Returns the
/// file path.
pub fn cmd_table3(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let grid = excess_variability_table(
        &cfg.grid.dgds,
        &cfg.grid.alpha_s_values,
        &cfg.grid.sigma_sq_values,
        &cfg.grid.total_values,
    );
    let mut out = String::from("dgd,alpha_s,sigma_sq,K,excess\n");
    for row in &grid.rows {
        for (k, cell) in grid.k_values.iter().zip(&row.cells) {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.2}",
                row.dgd.code(),
                fmt_opt(row.alpha_s),
                fmt_opt(row.sigma_sq),
                k,
                cell
            );
        }
    }
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("table3.csv");
    write_text(&path, &out)?;
    Ok(path)
}

/// Run manifest: what produced the outputs and from which inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Binary name.
    pub tool: String,
    /// Crate version.
    pub version: String,
    /// Master seed actually used.
    pub master_seed: u64,
    /// SHA-256 of the compact serialization of `config`.
    pub config_sha256: String,
    /// The effective config after flag overrides; reparses to an
    /// equivalent [`RunConfig`].
    pub config: RunConfig,
    /// Per-scenario completion status, label-sorted.
    pub scenarios: Vec<ScenarioStatus>,
}

/// Completion record for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStatus {
    pub label: String,
    /// `"ok"` or `"failed"`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Hex SHA-256 of the compact JSON serialization of the config.
pub fn config_sha256(cfg: &RunConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn build_manifest(cfg: &RunConfig, outcome: &GridOutcome) -> Manifest {
    let mut scenarios: Vec<ScenarioStatus> = outcome
        .reports
        .iter()
        .map(|r| ScenarioStatus { label: r.label.clone(), status: "ok".to_string(), error: None })
        .chain(outcome.failures.iter().map(|f| ScenarioStatus {
            label: f.label.clone(),
            status: "failed".to_string(),
            error: Some(f.error.clone()),
        }))
        .collect();
    scenarios.sort_by(|a, b| a.label.cmp(&b.label));
    Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: cfg.master_seed,
        config_sha256: config_sha256(cfg),
        config: cfg.clone(),
        scenarios,
    }
}

fn summary_csv(report: &crate::harness::ScenarioReport) -> String {
    let s = &report.summary;
    let mut out = String::from("field,i,j,value\n");
    for (i, &m) in s.mean_ilr().iter().enumerate() {
        let _ = writeln!(out, "mean_ilr,{},,{}", i + 1, m);
    }
    for i in 0..s.coords() {
        for j in 0..s.coords() {
            let _ = writeln!(out, "cov_ilr,{},{},{}", i + 1, j + 1, s.cov_ilr().get(i, j));
        }
    }
    for (i, &e) in s.eigenvalues().iter().enumerate() {
        let _ = writeln!(out, "eigenvalue,{},,{}", i + 1, e);
    }
    for (i, &m) in s.mean_props().iter().enumerate() {
        let _ = writeln!(out, "mean_props,{},,{}", i + 1, m);
    }
    for i in 0..s.classes() {
        for j in 0..s.classes() {
            let _ = writeln!(out, "cov_props,{},{},{}", i + 1, j + 1, s.cov_props().get(i, j));
        }
    }
    let _ = writeln!(out, "zero_fraction,,,{}", s.zero_fraction());
    out
}

fn comparisons_csv(planned: &[PlannedScenario], outcome: &GridOutcome) -> String {
    let meta = |label: &str| planned.iter().find(|p| p.scenario.label() == label);
    let mut out = String::from(
        "scenario,dgd,alpha_s,sigma_sq,total,variant,coord,log_ratio_mean,sign_mismatch,log_ratio_eig\n",
    );
    for report in &outcome.reports {
        let p = meta(&report.label).expect("report label comes from the plan");
        for vc in &report.variants {
            let r = &vc.report;
            for c in 0..r.log_ratio_means().len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    report.label,
                    p.dgd.code(),
                    fmt_opt(p.alpha_s),
                    fmt_opt(p.sigma_sq),
                    p.total,
                    vc.variant.code(),
                    c + 1,
                    r.log_ratio_means()[c],
                    r.sign_mismatch()[c],
                    r.log_ratio_eigs()[c],
                );
            }
        }
    }
    out
}

/// Runs the scenario grid and writes one summary CSV per completed
/// scenario, a grid-wide comparisons CSV, and `manifest.json`; renders
/// figures too when `emit_svg` is set. Failed scenarios are recorded in
/// the manifest while the rest are still written; the caller decides the
/// exit code from the returned outcome.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<GridOutcome, CliError> {
    let planned = build_scenarios(cfg)?;
    let scenarios: Vec<Scenario> = planned.iter().map(|p| p.scenario.clone()).collect();
    let outcome = run_grid(&scenarios, cfg.parallelism, cfg.correction_mode)?;

    ensure_dir(&cfg.output_dir)?;
    for report in &outcome.reports {
        let path = cfg.output_dir.join(format!("summary_{}.csv", report.label));
        write_text(&path, &summary_csv(report))?;
    }
    write_text(&cfg.output_dir.join("comparisons.csv"), &comparisons_csv(&planned, &outcome))?;
    let manifest = build_manifest(cfg, &outcome);
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&cfg.output_dir.join("manifest.json"), &(manifest_json + "\n"))?;
    if cfg.emit_svg {
        figures::render_figures(&cfg.output_dir, &planned, &outcome)?;
    }
    Ok(outcome)
}

/// Writes theoretical-vs-sample quantile pairs for one scenario
/// coordinate against the corrected approximation. `coord` is one-based.
/// Returns the file path.
pub fn cmd_qq(cfg: &RunConfig, scenario_label: &str, coord: usize) -> Result<PathBuf, CliError> {
    let planned = build_scenarios(cfg)?;
    let p = planned
        .iter()
        .find(|p| p.scenario.label() == scenario_label)
        .ok_or_else(|| CliError::UnknownScenario(scenario_label.to_string()))?;
    let summary = run_scenario(&p.scenario)?;
    if coord == 0 || coord > summary.coords() {
        return Err(CliError::BadCoordinate { coord, coords: summary.coords() });
    }
    let corrected = scenario_approximations(p.scenario.model(), p.scenario.sbp(), cfg.correction_mode)?
        .into_iter()
        .find(|(v, _)| *v == ApproxVariant::Corrected)
        .expect("corrected variant is always produced")
        .1;
    let series = qq_series(summary.sorted_coords(coord - 1)?, &corrected, coord - 1)?;
    let mut out = String::from("theoretical,sample\n");
    for (t, s) in series.theoretical().iter().zip(series.sample()) {
        let _ = writeln!(out, "{t},{s}");
    }
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join(format!("qq_{scenario_label}_coord{coord}.csv"));
    write_text(&path, &out)?;
    Ok(path)
}

/// Runs the grid and renders the SVG figures from the same results the
/// CSVs are built from. An empty grid produces no files. Returns the
/// paths written.
pub fn cmd_figures(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let planned = build_scenarios(cfg)?;
    if planned.is_empty() {
        return Ok(Vec::new());
    }
    let scenarios: Vec<Scenario> = planned.iter().map(|p| p.scenario.clone()).collect();
    let outcome = run_grid(&scenarios, cfg.parallelism, cfg.correction_mode)?;
    ensure_dir(&cfg.output_dir)?;
    figures::render_figures(&cfg.output_dir, &planned, &outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table2_grid() -> GridConfig {
        GridConfig {
            alpha_tilde_vectors: vec![vec![0.01, 0.04, 0.15, 0.30, 0.50]],
            dgds: vec![Dgd::Multinomial, Dgd::DirichletMultinomial],
            alpha_s_values: vec![101.0, 1000.0, 10_000.0, 100_000.0, 1_000_000.0],
            total_values: vec![101, 1000, 10_000, 100_000, 1_000_000],
            sigma_sq_values: vec![],
            sbp: SbpChoice::Pivotal,
            zero_replacement: 0.5,
        }
    }

    fn config(grid: GridConfig) -> RunConfig {
        RunConfig {
            master_seed: 7,
            n_draws: 100,
            zero_policy: ZeroPolicy::Renormalize,
            correction_mode: CorrectionMode::Consistent,
            output_dir: PathBuf::from("out"),
            emit_svg: false,
            parallelism: 1,
            grid,
        }
    }

    #[test]
    fn value_formatting_matches_labels() {
        assert_eq!(fmt_value(101.0), "101");
        assert_eq!(fmt_value(1_000_000.0), "1000000");
        assert_eq!(fmt_value(0.1), "0.1");
        assert_eq!(fmt_value(1.0), "1");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn plan_covers_families_in_fixed_order_with_expected_labels() {
        let cfg = config(table2_grid());
        let planned = build_scenarios(&cfg).unwrap();
        // 5 multinomial totals plus 5 concentrations x 5 totals.
        assert_eq!(planned.len(), 30);
        assert_eq!(planned[0].scenario.label(), "mn_K101");
        assert_eq!(planned[5].scenario.label(), "dir_mn_aS101_K101");
        assert_eq!(planned[29].scenario.label(), "dir_mn_aS1000000_K1000000");
        assert!(planned.iter().all(|p| p.sigma_sq.is_none()));
        // Seeds follow the enumeration index, not the label.
        assert_eq!(planned[3].scenario.seed(), scenario_seed(7, 3));
    }

    #[test]
    fn plan_is_invariant_under_list_permutation() {
        let cfg = config(table2_grid());
        let mut shuffled = cfg.clone();
        shuffled.grid.alpha_s_values.reverse();
        shuffled.grid.total_values.reverse();
        shuffled.grid.dgds.reverse();
        let a: Vec<String> =
            build_scenarios(&cfg).unwrap().iter().map(|p| p.scenario.label().to_string()).collect();
        let b: Vec<String> = build_scenarios(&shuffled)
            .unwrap()
            .iter()
            .map(|p| p.scenario.label().to_string())
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn plan_prefixes_labels_when_several_probability_vectors() {
        let mut grid = table2_grid();
        grid.alpha_tilde_vectors =
            vec![vec![0.01, 0.04, 0.15, 0.30, 0.50], vec![0.50, 0.30, 0.15, 0.04, 0.01]];
        grid.dgds = vec![Dgd::Multinomial];
        grid.total_values = vec![101];
        let planned = build_scenarios(&config(grid)).unwrap();
        let labels: Vec<&str> = planned.iter().map(|p| p.scenario.label()).collect();
        assert_eq!(labels, ["p1_mn_K101", "p2_mn_K101"]);
    }

    #[test]
    fn lognormal_labels_carry_sigma_and_median_total() {
        let mut grid = table2_grid();
        grid.dgds = vec![Dgd::LognormalMultinomial, Dgd::LognormalDirichletMultinomial];
        grid.alpha_s_values = vec![101.0];
        grid.total_values = vec![1000];
        grid.sigma_sq_values = vec![0.1, 1.0];
        let planned = build_scenarios(&config(grid)).unwrap();
        let labels: Vec<&str> = planned.iter().map(|p| p.scenario.label()).collect();
        assert_eq!(
            labels,
            [
                "ln_mn_K1000_sig0.1",
                "ln_mn_K1000_sig1",
                "ln_dir_mn_aS101_K1000_sig0.1",
                "ln_dir_mn_aS101_K1000_sig1",
            ]
        );
        // Median total 1000 enters as mu = ln 1000.
        match *planned[0].scenario.model().total() {
            crate::sampling::TotalCountSpec::Lognormal { mu, .. } => {
                assert!((mu - 1000f64.ln()).abs() < 1e-15);
            }
            _ => panic!("expected lognormal total"),
        }
    }

    #[test]
    fn empty_family_lists_yield_no_scenarios() {
        let mut grid = table2_grid();
        grid.dgds = vec![];
        assert!(build_scenarios(&config(grid)).unwrap().is_empty());
    }

    #[test]
    fn validation_rejects_out_of_range_fields() {
        let mut cfg = config(table2_grid());
        cfg.n_draws = 1;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = config(table2_grid());
        cfg.grid.zero_replacement = f64::NAN;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = config(table2_grid());
        cfg.grid.alpha_s_values.push(-1.0);
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = config(table2_grid());
        cfg.grid.total_values.push(0);
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = config(table2_grid());
        cfg.grid.alpha_tilde_vectors = vec![vec![0.5, -0.5, 1.0]];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn config_parses_with_defaults_and_rejects_unknown_keys() {
        let json = r#"{
            "grid": {
                "alpha_tilde_vectors": [[0.2, 0.8]],
                "dgds": ["mn"],
                "total_values": [10]
            }
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.n_draws, 10_000);
        assert_eq!(cfg.master_seed, 0);
        assert_eq!(cfg.grid.zero_replacement, 0.5);
        assert_eq!(cfg.grid.sbp, SbpChoice::Pivotal);
        assert!(!cfg.emit_svg);

        let bad = r#"{"grid": {"alpha_tilde_vectors": [[0.2, 0.8]], "dgds": ["mn"], "total_values": [10]}, "draws": 5}"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
    }

    #[test]
    fn exit_codes_match_error_categories() {
        let io = CliError::Io {
            path: PathBuf::from("x"),
            source: std::io::Error::new(std::io::ErrorKind::Other, "boom"),
        };
        assert_eq!(io.exit_code(), 2);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 2);
        assert_eq!(CliError::PartialFailure { failed: 1, total: 2 }.exit_code(), 3);
        assert_eq!(CliError::UnknownScenario("x".into()).exit_code(), 4);
        assert_eq!(CliError::BadCoordinate { coord: 9, coords: 4 }.exit_code(), 4);
    }

    #[test]
    fn table3_csv_long_format_counts_and_cells() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(table2_grid());
        cfg.output_dir = dir.path().to_path_buf();
        let path = cmd_table3(&cfg).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "dgd,alpha_s,sigma_sq,K,excess");
        // Families (a)+(b): 5 multinomial cells plus 25 Dirichlet cells.
        assert_eq!(lines.len(), 1 + 30);
        assert_eq!(lines[1], "mn,,,101,1.00");
        assert!(lines.contains(&"dir_mn,101,,1000000,9804.91"));
        assert!(lines.contains(&"dir_mn,101,,100000,981.38"));
    }

    #[test]
    fn manifest_round_trips_and_hash_is_stable() {
        let cfg = config(table2_grid());
        let manifest = build_manifest(&cfg, &GridOutcome::default());
        let json = serde_json::to_string_pretty(&manifest).unwrap();
        let back: Manifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.config, cfg);
        assert_eq!(back.config_sha256, config_sha256(&cfg));
        assert_eq!(config_sha256(&cfg), config_sha256(&back.config));
    }
}
