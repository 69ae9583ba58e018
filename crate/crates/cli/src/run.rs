//! Experiment orchestration.
//!
//! [`execute`] turns a validated configuration into in-memory artifacts and
//! [`write_artifacts`] puts them on disk. Each run produces
//!
//! - `config.toml`, the configuration echo (re-parses to an equal config),
//! - `report.json`, the structured report,
//! - zero or more tables (`trajectory`, `statistics`, `intervals`, `limits`,
//!   `tests`) in the configured delimiter format.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hrru_core::estimators::ClippedInterval;
use hrru_core::montecarlo::{
    combination_coverage, mean_reinforcement_frequency, mn_diagnostics, rep_intervals, replicate,
    replicate_system, with_workers, zn_diagnostics, CltDiagnostics, CoverageReport,
    HittingReport, LimitLawDiagnostics, RepSummary,
};
use hrru_core::multi_urn::{
    cross_moment_check, mean_reinforcement_test, run_system, CrossMomentCheck, TestOutcome,
};
use hrru_core::{
    confidence_interval, run_trajectory, variance_estimates, ConfidenceInterval, IntervalBasis,
    Snapshot, StreamSeed, VarianceEstimates,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::output::{to_report_json, Cell, Table, REPORT_SCHEMA, TOOL, VERSION};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("experiment failed: {0}")]
    Model(#[from] hrru_core::Error),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_VALIDATION,
            RunError::Model(hrru_core::Error::InvalidConfig(_))
            | RunError::Model(hrru_core::Error::InvalidParameter(_)) => EXIT_VALIDATION,
            RunError::Model(_) => EXIT_RUNTIME,
            RunError::Io { .. } => EXIT_IO,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for replications; `None` uses the default pool.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Serialize)]
struct Report<'a, T> {
    schema: &'static str,
    tool: &'static str,
    version: &'static str,
    kind: &'static str,
    seed: u64,
    plugin_assumptions_met: bool,
    config: &'a ExperimentConfig,
    results: T,
}

/// Run the experiment described by `config`.
pub fn execute(config: &ExperimentConfig, options: &RunOptions) -> Result<Vec<Artifact>, RunError> {
    let errs = config.validation_errors();
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs).into());
    }
    let body = || match config.kind() {
        ExperimentKind::Simulate => simulate(config),
        ExperimentKind::Clt => clt(config),
        ExperimentKind::Coverage => coverage(config),
        ExperimentKind::LimitLaw => limit_law(config),
        ExperimentKind::Mtest => mtest(config),
        ExperimentKind::Hitting => hitting(config),
    };
    let (report, tables) = match options.workers {
        Some(w) => with_workers(w, body)??,
        None => body()?,
    };
    let mut artifacts = vec![
        Artifact {
            name: "config.toml".to_string(),
            contents: format!("# {TOOL} {VERSION} configuration echo\n{}", config.to_toml())
                .into_bytes(),
        },
        Artifact {
            name: "report.json".to_string(),
            contents: report,
        },
    ];
    let ext = config.output.tables.extension();
    artifacts.extend(tables.into_iter().map(|(stem, table)| Artifact {
        name: format!("{stem}.{ext}"),
        contents: table.into_bytes(),
    }));
    Ok(artifacts)
}

/// Write artifacts into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents).map_err(|e| RunError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

type Output = (Vec<u8>, Vec<(&'static str, Table)>);

fn report<T: Serialize>(config: &ExperimentConfig, results: T) -> Vec<u8> {
    let plugin_assumptions_met = match config.kind() {
        ExperimentKind::Hitting => true,
        _ => config.system().plugin_assumptions_met(),
    };
    to_report_json(&Report {
        schema: REPORT_SCHEMA,
        tool: TOOL,
        version: VERSION,
        kind: config.kind().name(),
        seed: config.plan.seed,
        plugin_assumptions_met,
        config,
        results,
    })
}

fn table(config: &ExperimentConfig, header: &[&str]) -> Table {
    Table::new(
        config.output.tables,
        config.kind().name(),
        config.plan.seed,
        header,
    )
}

#[derive(Serialize)]
struct IntervalSummary {
    #[serde(flatten)]
    raw: ConfidenceInterval,
    lower: f64,
    upper: f64,
    clipped: ClippedInterval,
}

impl From<ConfidenceInterval> for IntervalSummary {
    fn from(raw: ConfidenceInterval) -> Self {
        IntervalSummary {
            lower: raw.lower(),
            upper: raw.upper(),
            clipped: raw.clipped(),
            raw,
        }
    }
}

#[derive(Serialize)]
struct UrnSummary {
    snapshot: Snapshot,
    variances: VarianceEstimates,
    intervals: Vec<IntervalSummary>,
}

fn urn_summary(snapshot: Snapshot, confidence: f64) -> Result<UrnSummary, RunError> {
    let variances = variance_estimates(snapshot.z, snapshot.m, &snapshot.estimates);
    let alpha = 1.0 - confidence;
    let intervals = vec![
        confidence_interval(IntervalBasis::FromZn, snapshot.z, variances.v, snapshot.n, alpha)?
            .into(),
        confidence_interval(IntervalBasis::FromMn, snapshot.m, variances.w, snapshot.n, alpha)?
            .into(),
    ];
    Ok(UrnSummary {
        snapshot,
        variances,
        intervals,
    })
}

#[derive(Serialize)]
struct SimulateResults {
    steps: u64,
    urns: BTreeMap<String, UrnSummary>,
}

const TRAJECTORY_COLUMNS: [&str; 8] = ["n", "N", "X", "R", "H", "S", "Z", "M"];

fn simulate(config: &ExperimentConfig) -> Result<Output, RunError> {
    let n = config.plan.n.unwrap_or(0);
    let seed = config.plan(()).rep_seed(0);
    let mut urns = BTreeMap::new();
    let trajectory_table = if let Some((label, urn)) = config.single_urn() {
        let t = run_trajectory(urn, n, seed)?;
        let mut table = table(config, &TRAJECTORY_COLUMNS);
        for (r, m) in t.records.iter().zip(&t.m) {
            table.row(trajectory_row(r, *m));
        }
        urns.insert(label.to_string(), urn_summary(t.snapshot(t.len())?, config.confidence())?);
        table
    } else {
        let system = run_system(&config.system(), n, seed)?;
        let mut header = vec!["urn"];
        header.extend(TRAJECTORY_COLUMNS);
        let mut table = table(config, &header);
        for i in 0..system.len() {
            for (label, t) in &system.urns {
                let mut row = vec![Cell::from(label.as_str())];
                row.extend(trajectory_row(&t.records[i], t.m[i]));
                table.row(row);
            }
        }
        let snapshot = system.snapshot(system.len())?;
        for (label, s) in snapshot.urns {
            urns.insert(label, urn_summary(s, config.confidence())?);
        }
        table
    };
    let results = SimulateResults { steps: n, urns };
    Ok((report(config, results), vec![("trajectory", trajectory_table)]))
}

fn trajectory_row(r: &hrru_core::StepRecord, m: f64) -> Vec<Cell> {
    vec![
        r.n.into(),
        r.draws.into(),
        r.drawn_a.into(),
        r.reinforcement.into(),
        r.h_after.into(),
        r.s_after.into(),
        r.z_after.into(),
        m.into(),
    ]
}

/// [`CltDiagnostics`] without the sample vector, which goes to a table.
#[derive(Serialize)]
struct CltSummary {
    samples: usize,
    excluded: u64,
    exclusion_rate: f64,
    ks_distance: Option<f64>,
}

impl From<&CltDiagnostics> for CltSummary {
    fn from(d: &CltDiagnostics) -> Self {
        CltSummary {
            samples: d.samples.len(),
            excluded: d.excluded,
            exclusion_rate: d.exclusion_rate,
            ks_distance: d.ks_distance,
        }
    }
}

#[derive(Serialize)]
struct CltResults {
    reps: u64,
    n: u64,
    n_proxy: u64,
    /// `sqrt(n)(Z_n - Z) / sqrt(V_n)`.
    zn: CltSummary,
    /// `sqrt(n)(M_n - Z_n) / sqrt(U_n)`.
    mn_zn: CltSummary,
    /// `sqrt(n)(M_n - Z) / sqrt(W_n)`.
    mn: CltSummary,
    correlation: Option<f64>,
    median_abs_gap_n: f64,
    median_abs_gap_proxy: f64,
}

fn clt(config: &ExperimentConfig) -> Result<Output, RunError> {
    let (label, urn) = config.single_urn().expect("validated single urn");
    let plan = config.plan(urn.clone());
    let reps = replicate(&plan)?;
    let zn = zn_diagnostics(&reps);
    let mn = mn_diagnostics(&reps);
    let results = CltResults {
        reps: plan.reps,
        n: plan.n,
        n_proxy: plan.n_proxy,
        zn: (&zn).into(),
        mn_zn: (&mn.t1).into(),
        mn: (&mn.t3).into(),
        correlation: mn.correlation,
        median_abs_gap_n: mn.median_abs_gap_n,
        median_abs_gap_proxy: mn.median_abs_gap_proxy,
    };
    let mut stats = table(
        config,
        &["rep", "urn", "Z_n", "M_n", "Z_proxy", "V_n", "U_n", "W_n", "T_Z", "T_MZ", "T_M"],
    );
    for r in &reps {
        let s = &r.at_n;
        let v = variance_estimates(s.z, s.m, &s.estimates);
        let t = r.statistics();
        stats.row(vec![
            r.rep.into(),
            label.into(),
            s.z.into(),
            s.m.into(),
            r.at_proxy.z.into(),
            v.v.into(),
            v.u.into(),
            v.w.into(),
            t.t_z.into(),
            t.t_m_z.into(),
            t.t_m.into(),
        ]);
    }
    Ok((report(config, results), vec![("statistics", stats)]))
}

fn coverage(config: &ExperimentConfig) -> Result<Output, RunError> {
    let (_, urn) = config.single_urn().expect("validated single urn");
    let reps = replicate(&config.plan(urn.clone()))?;
    let level = config.confidence();
    let results = CoverageReport::from_reps(&reps, level)?;
    let mut intervals = table(
        config,
        &["rep", "Z_proxy", "zn_lower", "zn_upper", "zn_hit", "mn_lower", "mn_upper", "mn_hit"],
    );
    for r in &reps {
        let (ci_z, ci_m) = rep_intervals(r, 1.0 - level)?;
        let truth = r.at_proxy.z;
        intervals.row(vec![
            r.rep.into(),
            truth.into(),
            ci_z.lower().into(),
            ci_z.upper().into(),
            ci_z.contains(truth).into(),
            ci_m.lower().into(),
            ci_m.upper().into(),
            ci_m.contains(truth).into(),
        ]);
    }
    Ok((report(config, results), vec![("intervals", intervals)]))
}

#[derive(Serialize)]
struct LimitLawResults {
    reps: u64,
    horizon: u64,
    max_growth_error: f64,
    max_relative_growth_error: f64,
    max_ecdf_jump: f64,
    boundary_fraction: f64,
    beta_ks_distance: Option<f64>,
}

fn limit_law(config: &ExperimentConfig) -> Result<Output, RunError> {
    let (_, urn) = config.single_urn().expect("validated single urn");
    let reps: Vec<RepSummary> = replicate(&config.plan(urn.clone()))?;
    let d = LimitLawDiagnostics::from_reps(&reps, urn)?;
    let results = LimitLawResults {
        reps: reps.len() as u64,
        horizon: d.horizon,
        max_growth_error: d.max_growth_error,
        max_relative_growth_error: d.max_relative_growth_error,
        max_ecdf_jump: d.max_ecdf_jump,
        boundary_fraction: d.boundary_fraction,
        beta_ks_distance: d.beta_ks_distance,
    };
    let mut limits = table(config, &["rep", "Z_proxy", "S_over_n", "mu_m"]);
    for r in &reps {
        let s = &r.at_proxy;
        limits.row(vec![
            r.rep.into(),
            s.z.into(),
            (s.s as f64 / s.n as f64).into(),
            (s.estimates.mu * s.estimates.m).into(),
        ]);
    }
    Ok((report(config, results), vec![("limits", limits)]))
}

#[derive(Serialize)]
struct MtestResults {
    reps: u64,
    n: u64,
    n_proxy: u64,
    target: String,
    reference: Vec<String>,
    alpha: f64,
    inapplicable: u64,
    rejections: u64,
    frequency: f64,
    /// Conditional-independence check between the target and each reference
    /// urn along one run of `n_proxy` steps.
    cross_moments: BTreeMap<String, CrossMomentCheck>,
    combination_coverage: Option<CoverageReport>,
}

fn mtest(config: &ExperimentConfig) -> Result<Output, RunError> {
    let system = config.system();
    let plan = config.plan(system.clone());
    let reps = replicate_system(&plan)?;
    let target = config.experiment.target.clone().expect("validated target");
    let reference = config.experiment.reference.clone().expect("validated reference");
    let summary = mean_reinforcement_frequency(&reps, &target, &reference, config.significance())?;

    let mut cross_moments = BTreeMap::new();
    for v in &summary.reference {
        let check = cross_moment_check(
            &system,
            &target,
            v,
            plan.n_proxy,
            StreamSeed::new(plan.master_seed),
        )?;
        cross_moments.insert(v.clone(), check);
    }
    let combination_coverage = config
        .combination()
        .map(|c| combination_coverage(&reps, &c, config.confidence()))
        .transpose()?;

    let mut tests = table(config, &["rep", "statistic", "reject"]);
    for r in &reps {
        let test = mean_reinforcement_test(&r.at_n, &target, &reference, summary.alpha)?;
        let row = match test.outcome {
            TestOutcome::Applicable { statistic, reject, .. } => {
                vec![r.rep.into(), statistic.into(), reject.into()]
            }
            TestOutcome::Inapplicable => vec![r.rep.into(), Cell::Missing, Cell::Missing],
        };
        tests.row(row);
    }
    let results = MtestResults {
        reps: plan.reps,
        n: plan.n,
        n_proxy: plan.n_proxy,
        target,
        reference: summary.reference,
        alpha: summary.alpha,
        inapplicable: summary.inapplicable,
        rejections: summary.rejections,
        frequency: summary.frequency,
        cross_moments,
        combination_coverage,
    };
    Ok((report(config, results), vec![("tests", tests)]))
}

fn hitting(config: &ExperimentConfig) -> Result<Output, RunError> {
    let e = &config.experiment;
    let results: HittingReport = hrru_core::montecarlo::hitting_probability_check(
        e.start.expect("validated start"),
        e.h.expect("validated h"),
        config.plan.reps,
        config.plan.seed,
    )?;
    Ok((report(config, results), Vec::new()))
}
