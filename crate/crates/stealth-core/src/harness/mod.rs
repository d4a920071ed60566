//! Scenario harness: configuration, social-aspect assignment, repetition
//! orchestration and reproducibility artifacts.

mod runner;
mod scenario;

pub use runner::{
    parse_config_file, recompute_from_dir, render_manifest, resolve_trace, run_experiment,
    run_repetition, ExperimentOutput, FileConfig, HarnessError, TraceSource,
};
pub use scenario::{
    assign_social_aspects, build_scenario, Overrides, ScenarioConfig, ScenarioError, ScenarioKind,
    SkillAssignment, SocialDistribution,
};
