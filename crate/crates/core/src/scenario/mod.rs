//! Scenario files, the analysis pipeline and its reports.

mod analysis;
mod report;
mod spec;

pub use analysis::{run_analysis, AnalysisOptions, Command, DistinguishedRequest, GeodesicRequest, MonodromySystem, Tolerances};
pub use report::{check_expectations, AnalysisReport, CheckOutcome, Failure, Section, Trace, Verdict, SCHEMA_VERSION};
pub use spec::{emit_spec, parse_spec, ConnectionSpec, Expectation, FrameSpec, Scenario};

/// Scenario files shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("flat", include_str!("../../scenarios/flat.conn")),
    ("hopf", include_str!("../../scenarios/hopf.conn")),
    ("hopf3", include_str!("../../scenarios/hopf3.conn")),
    ("scalar_lambda", include_str!("../../scenarios/scalar_lambda.conn")),
    ("heisenberg", include_str!("../../scenarios/heisenberg.conn")),
    ("nonspiral_c2", include_str!("../../scenarios/nonspiral_c2.conn")),
];

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parses and builds a bundled scenario.
pub fn load_bundled(name: &str) -> crate::Result<Scenario> {
    let text = bundled(name).ok_or_else(|| crate::Error::Validation(format!("no bundled scenario `{name}`")))?;
    parse_spec(text)?.build()
}
