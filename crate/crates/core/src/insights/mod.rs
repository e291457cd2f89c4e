//! Narrative report assembly and declarative charts rendered to SVG/PNG.

mod chart;
mod render;
mod report;

pub use chart::{
    spec_from_result, strip_hint, ChartHint, ChartKind, ChartSpec, Series, MAX_BAR_CATEGORIES, PLACEHOLDER_MESSAGE,
};
pub use render::{render_chart, to_png, to_svg, ChartFormat};
pub use report::{
    build_report, describe, fallback_report, parse_report, queries_results_text, results_table, AnalysisInput,
    AnalysisSection, ReportDocument, RECOMMENDATION_COUNT,
};
