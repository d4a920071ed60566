//! Experiment orchestration: trace resolution, seeded repetitions, metric
//! aggregation, and reproducibility artifacts.
//!
//! A run writes `report.csv`, `report.jsonl`, `manifest.txt` and
//! `logs/rep_<i>.log` into the output directory. The manifest doubles as a
//! config file: re-running it reproduces the report byte for byte.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use thiserror::Error;

use crate::metrics::{extract_digest, report_from_digests, MetricsError, MetricsReport, RepDigest};
use crate::simkit::{
    run, EmergencySpec, EngineError, EventLog, MobilityTrace, SyntheticParams, TraceError,
};
use crate::taxonomy::build_default_taxonomy;
use crate::types::SimTime;

use super::scenario::{
    assign_social_aspects, Overrides, ScenarioConfig, ScenarioError, SkillAssignment,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file error: {0}")]
    Config(String),
}

/// Where the mobility trace comes from.
#[derive(Debug, Clone)]
pub enum TraceSource {
    /// Seeded random-waypoint mobility over the scenario area. The same
    /// trace is shared by all repetitions; only social aspects are redrawn.
    Synthetic,
    /// External trace in the CSV format.
    File(PathBuf),
    /// Caller-provided trace.
    Provided(MobilityTrace),
}

impl TraceSource {
    fn describe(&self) -> String {
        match self {
            TraceSource::Synthetic => "synthetic".into(),
            TraceSource::File(path) => path.display().to_string(),
            TraceSource::Provided(_) => "provided".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub manifest: String,
    pub csv: String,
    pub jsonl: String,
    pub text: String,
    /// Repetition indices that failed and were excluded from aggregation.
    pub invalid_reps: Vec<u32>,
}

/// Resolves the mobility trace for a configuration.
///
/// Synthetic meack runs pin the focal nodes and the designated receiver near
/// the area center at the emergency instant, otherwise the scenario's premise
/// (participants close enough to exchange data) would not hold under random
/// waypoints.
pub fn resolve_trace(
    config: &ScenarioConfig,
    source: &TraceSource,
) -> Result<MobilityTrace, HarnessError> {
    let trace = match source {
        TraceSource::Provided(t) => t.clone(),
        TraceSource::File(path) => MobilityTrace::load(path)?,
        TraceSource::Synthetic => {
            let mut trace = MobilityTrace::generate_synthetic(
                &SyntheticParams {
                    n_nodes: config.n_nodes,
                    area: config.area,
                    speed_range: config.speed_range,
                    duration_s: config.duration_s,
                    snapshot_interval_s: config.snapshot_interval_s,
                },
                config.seed,
            )?;
            if let Some(receiver) = config.receiver {
                let center = (config.area.0 / 2.0, config.area.1 / 2.0);
                let meet = SimTime::from_secs_f64(config.emergency_time_s);
                trace.pin_node_at(receiver, meet, center)?;
                let spread = (config.radio.radius_m / 3.0).max(1.0);
                let offsets = [(spread, 0.0), (0.0, spread), (-spread, 0.0), (0.0, -spread)];
                for (i, &node) in config.focal.iter().enumerate() {
                    let (dx, dy) = offsets[i % offsets.len()];
                    trace.pin_node_at(node, meet, (center.0 + dx, center.1 + dy))?;
                }
            }
            trace
        }
    };
    Ok(trace)
}

fn run_spec_for_rep(
    config: &ScenarioConfig,
    rep_seed: u64,
) -> Result<crate::simkit::RunSpec, HarnessError> {
    let profiles = assign_social_aspects(
        config.n_nodes,
        &config.distribution,
        &config.fixed_profiles(),
        config.skill_assignment,
        rep_seed,
    )?;
    let emergencies: Vec<EmergencySpec> = config
        .focal
        .iter()
        .map(|&node| EmergencySpec {
            node,
            at: SimTime::from_secs_f64(config.emergency_time_s),
            priority: config.priorities.get(&node).copied().unwrap_or(1),
        })
        .collect();
    Ok(crate::simkit::RunSpec {
        duration: SimTime::from_secs_f64(config.duration_s),
        warmup: SimTime::from_secs_f64(config.warmup_s),
        protocol: config.protocol_config(),
        radio: config.radio,
        profiles,
        emergencies,
        taxonomy: build_default_taxonomy(),
        interest_universe_len: config.distribution.interest_universe().len(),
    })
}

/// Runs one repetition and returns its full event log.
pub fn run_repetition(
    config: &ScenarioConfig,
    trace: &MobilityTrace,
    rep: u32,
) -> Result<EventLog, HarnessError> {
    let rep_seed = config.seed + rep as u64;
    let spec = run_spec_for_rep(config, rep_seed)?;
    Ok(run(&spec, trace, rep_seed)?)
}

/// Executes all repetitions (concurrently up to the configured worker
/// count), aggregates metrics, and writes artifacts when `out_dir` is given.
/// Aggregation is keyed by repetition index, so results do not depend on
/// completion order.
pub fn run_experiment(
    config: &ScenarioConfig,
    source: &TraceSource,
    out_dir: Option<&Path>,
) -> Result<ExperimentOutput, HarnessError> {
    let trace = resolve_trace(config, source)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("logs"))?;
    }

    let reps = config.repetitions;
    let workers = config.workers.clamp(1, reps.max(1)) as usize;
    let results: Mutex<Vec<Option<Result<RepDigest, String>>>> =
        Mutex::new((0..reps).map(|_| None).collect());
    let ack_required = config.kind.ack_required();

    std::thread::scope(|scope| {
        for w in 0..workers {
            let results = &results;
            let trace = &trace;
            scope.spawn(move || {
                for rep in (w as u32..reps).step_by(workers) {
                    let outcome = run_repetition(config, trace, rep)
                        .and_then(|log| {
                            if let Some(dir) = out_dir {
                                std::fs::write(
                                    dir.join("logs").join(format!("rep_{rep}.log")),
                                    log.to_structured(),
                                )?;
                            }
                            Ok(extract_digest(&log, &config.focal, ack_required))
                        })
                        .map_err(|e| e.to_string());
                    results.lock().expect("no poisoned worker")[rep as usize] = Some(outcome);
                }
            });
        }
    });

    let results = results.into_inner().expect("workers joined");
    let mut digests = Vec::new();
    let mut invalid_reps = Vec::new();
    let mut failures = Vec::new();
    for (rep, outcome) in results.into_iter().enumerate() {
        match outcome.expect("every repetition visited") {
            Ok(d) => digests.push(d),
            Err(e) => {
                invalid_reps.push(rep as u32);
                failures.push(format!("rep_{rep}={e}"));
            }
        }
    }
    let report = report_from_digests(&digests, &config.focal)?;

    let manifest = render_manifest(config, source, &invalid_reps);
    let csv = report.to_csv(config.kind.as_str(), &config.distribution.skill_classes());
    let jsonl = report.to_jsonl(config.kind.as_str());
    let text = report.to_text();

    if let Some(dir) = out_dir {
        std::fs::write(dir.join("report.csv"), &csv)?;
        std::fs::write(dir.join("report.jsonl"), &jsonl)?;
        let mut mf = std::fs::File::create(dir.join("manifest.txt"))?;
        mf.write_all(manifest.as_bytes())?;
    }

    Ok(ExperimentOutput {
        report,
        manifest,
        csv,
        jsonl,
        text,
        invalid_reps,
    })
}

/// Flat key=value manifest; keys mirror the CLI flags so the file can be fed
/// back through `--config`.
pub fn render_manifest(
    config: &ScenarioConfig,
    source: &TraceSource,
    invalid_reps: &[u32],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
    out.push_str(&format!("scenario={}\n", config.kind.as_str()));
    out.push_str(&format!("nodes={}\n", config.n_nodes));
    out.push_str(&format!("duration={}\n", config.duration_s));
    out.push_str(&format!("emergency_time={}\n", config.emergency_time_s));
    out.push_str(&format!(
        "focal={}\n",
        config
            .focal
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",")
    ));
    if let Some(r) = config.receiver {
        out.push_str(&format!("receiver={r}\n"));
    }
    if !config.priorities.is_empty() {
        out.push_str(&format!(
            "priorities={}\n",
            config
                .priorities
                .iter()
                .map(|(n, p)| format!("{n}:{p}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
    }
    out.push_str(&format!("announce_interval={}\n", config.announce_interval_s));
    out.push_str(&format!("ack_timeout={}\n", config.ack_timeout_ms));
    out.push_str(&format!("ack_drain_ms={}\n", config.ack_drain_ms));
    out.push_str(&format!("radius={}\n", config.radio.radius_m));
    out.push_str(&format!("base_latency_ms={}\n", config.radio.base_latency_ms));
    out.push_str(&format!("bitrate_bps={}\n", config.radio.bitrate_bps));
    out.push_str(&format!("jitter_ms={}\n", config.radio.jitter_bound_ms));
    out.push_str(&format!("snapshot_interval={}\n", config.snapshot_interval_s));
    out.push_str(&format!("warmup={}\n", config.warmup_s));
    out.push_str(&format!("area={}x{}\n", config.area.0, config.area.1));
    out.push_str(&format!(
        "speed={}:{}\n",
        config.speed_range.0, config.speed_range.1
    ));
    out.push_str(&format!("reps={}\n", config.repetitions));
    out.push_str(&format!("seed={}\n", config.seed));
    out.push_str("rep_seed_rule=seed+rep_index\n");
    out.push_str(&format!(
        "skill_assignment={}\n",
        config.skill_assignment.as_str()
    ));
    out.push_str(&format!(
        "skill_classes={}\n",
        config.distribution.skill_classes().join(",")
    ));
    out.push_str(&format!(
        "interests={}\n",
        config.distribution.interest_universe().join(",")
    ));
    out.push_str("interest_note=fixed focal profiles count toward the interest targets\n");
    out.push_str(&format!("trace={}\n", source.describe()));
    out.push_str(&format!("workers={}\n", config.workers));
    for f in invalid_reps {
        out.push_str(&format!("invalid_rep={f}\n"));
    }
    out
}

/// Parsed form of a config (or manifest) file: scenario name, overrides, and
/// an optional trace source.
#[derive(Debug, Default)]
pub struct FileConfig {
    pub scenario: Option<String>,
    pub overrides: Overrides,
    pub trace: Option<TraceSource>,
}

/// Parses the flat key=value config format. Unknown informational keys are
/// ignored; malformed values are errors.
pub fn parse_config_file(text: &str) -> Result<FileConfig, HarnessError> {
    let mut out = FileConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value", i + 1)))?;
        let bad = |what: &str| HarnessError::Config(format!("line {}: bad {what}", i + 1));
        match key.trim() {
            "scenario" => out.scenario = Some(value.trim().to_string()),
            "nodes" => out.overrides.n_nodes = Some(value.trim().parse().map_err(|_| bad("nodes"))?),
            "duration" => {
                out.overrides.duration_s = Some(value.trim().parse().map_err(|_| bad("duration"))?)
            }
            "emergency_time" => {
                out.overrides.emergency_time_s =
                    Some(value.trim().parse().map_err(|_| bad("emergency_time"))?)
            }
            "announce_interval" => {
                out.overrides.announce_interval_s =
                    Some(value.trim().parse().map_err(|_| bad("announce_interval"))?)
            }
            "ack_timeout" => {
                out.overrides.ack_timeout_ms =
                    Some(value.trim().parse().map_err(|_| bad("ack_timeout"))?)
            }
            "radius" => {
                out.overrides.radius_m = Some(value.trim().parse().map_err(|_| bad("radius"))?)
            }
            "reps" => {
                out.overrides.repetitions = Some(value.trim().parse().map_err(|_| bad("reps"))?)
            }
            "seed" => out.overrides.seed = Some(value.trim().parse().map_err(|_| bad("seed"))?),
            "workers" => {
                out.overrides.workers = Some(value.trim().parse().map_err(|_| bad("workers"))?)
            }
            "skill_assignment" => {
                out.overrides.skill_assignment = Some(SkillAssignment::parse(value.trim())?)
            }
            "trace" => {
                out.trace = Some(match value.trim() {
                    "synthetic" | "provided" => TraceSource::Synthetic,
                    path => TraceSource::File(PathBuf::from(path)),
                })
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Recomputes the report of a stored experiment from its manifest and logs.
pub fn recompute_from_dir(dir: &Path) -> Result<ExperimentOutput, HarnessError> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let parsed = parse_config_file(&manifest_text)?;
    let scenario = parsed
        .scenario
        .ok_or_else(|| HarnessError::Config("manifest lacks a scenario".into()))?;
    let config = super::scenario::build_scenario(&scenario, &parsed.overrides)?;

    let mut manifest_fields: BTreeMap<&str, &str> = BTreeMap::new();
    for line in manifest_text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            manifest_fields.insert(k.trim(), v.trim());
        }
    }

    let mut digests = Vec::new();
    for rep in 0..config.repetitions {
        let path = dir.join("logs").join(format!("rep_{rep}.log"));
        if !path.exists() {
            continue;
        }
        let log = EventLog::parse_structured(&std::fs::read_to_string(&path)?)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        digests.push(extract_digest(&log, &config.focal, config.kind.ack_required()));
    }
    let report = report_from_digests(&digests, &config.focal)?;
    let csv = report.to_csv(config.kind.as_str(), &config.distribution.skill_classes());
    let jsonl = report.to_jsonl(config.kind.as_str());
    let text = report.to_text();
    Ok(ExperimentOutput {
        report,
        manifest: manifest_text,
        csv,
        jsonl,
        text,
        invalid_reps: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::build_scenario;
    use crate::types::NodeId;

    fn small_config(name: &str) -> ScenarioConfig {
        let mut config = build_scenario(
            name,
            &Overrides {
                repetitions: Some(3),
                duration_s: Some(120.0),
                emergency_time_s: Some(90.0),
                seed: Some(11),
                workers: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        // desk-size population for tests
        config.n_nodes = 80;
        config.area = (150.0, 150.0);
        config
    }

    #[test]
    fn single_repetition_report_equals_single_log_metrics() {
        let mut config = small_config("senack");
        config.repetitions = 1;
        let trace = resolve_trace(&config, &TraceSource::Synthetic).unwrap();
        let log = run_repetition(&config, &trace, 0).unwrap();
        let direct =
            crate::metrics::build_report(&[log], &config.focal, config.kind.ack_required())
                .unwrap();
        let output = run_experiment(&config, &TraceSource::Synthetic, None).unwrap();
        assert_eq!(direct, output.report);
    }

    #[test]
    fn experiment_is_reproducible_byte_for_byte() {
        let config = small_config("seack");
        let a = run_experiment(&config, &TraceSource::Synthetic, None).unwrap();
        let b = run_experiment(&config, &TraceSource::Synthetic, None).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.jsonl, b.jsonl);
        assert_eq!(a.manifest, b.manifest);
    }

    #[test]
    fn manifest_round_trips_through_the_config_parser() {
        let config = small_config("meack");
        let manifest = render_manifest(&config, &TraceSource::Synthetic, &[]);
        let parsed = parse_config_file(&manifest).unwrap();
        assert_eq!(parsed.scenario.as_deref(), Some("meack"));
        assert_eq!(parsed.overrides.repetitions, Some(3));
        assert_eq!(parsed.overrides.seed, Some(11));
        assert!(matches!(parsed.trace, Some(TraceSource::Synthetic)));

        // but note n_nodes stays an override outside build_scenario defaults
        let rebuilt = build_scenario("meack", &parsed.overrides).unwrap();
        assert_eq!(rebuilt.repetitions, config.repetitions);
        assert_eq!(rebuilt.seed, config.seed);
    }

    #[test]
    fn meack_synthetic_trace_pins_participants_together() {
        let config = build_scenario(
            "meack",
            &Overrides {
                repetitions: Some(1),
                seed: Some(5),
                ..Default::default()
            },
        )
        .unwrap();
        let trace = resolve_trace(&config, &TraceSource::Synthetic).unwrap();
        let meet = SimTime::from_secs_f64(config.emergency_time_s);
        let receiver = trace
            .position_at(NodeId(63), meet)
            .unwrap()
            .expect("receiver deployed");
        for node in [52u32, 69, 70] {
            let pos = trace.position_at(NodeId(node), meet).unwrap().unwrap();
            let d = ((pos.0 - receiver.0).powi(2) + (pos.1 - receiver.1).powi(2)).sqrt();
            assert!(
                d <= config.radio.radius_m,
                "node {node} is {d:.1} m from the receiver at the emergency"
            );
        }
    }
}
