//! Report file rendering: rates become percentages with two decimals, the
//! stones MSE keeps its scale (also two decimals), matching the usual result
//! table formatting.

use std::collections::BTreeMap;

use serde::Serialize;

use htk_core::metrics::{EvalReport, LabelMetrics, TopKMetrics};

#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub samples: usize,
    pub stripes: usize,
    pub iou: f64,
    pub stones_mse: f64,
    pub horizon: TargetReport,
    pub aggregated_main_accuracy: f64,
    pub features: Vec<FeatureReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetReport {
    pub accuracy: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub at_k: BTreeMap<usize, AtKReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AtKReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureReport {
    pub name: String,
    pub classes: usize,
    #[serde(flatten)]
    pub target: TargetReport,
}

/// Percentage with two decimals.
fn pct(rate: f64) -> f64 {
    (rate * 10000.0).round() / 100.0
}

/// Plain value with two decimals.
fn two_decimals(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

fn target_report(metrics: &LabelMetrics) -> TargetReport {
    TargetReport {
        accuracy: pct(metrics.metrics.accuracy),
        f1: pct(metrics.metrics.macro_f1),
        precision: pct(metrics.metrics.macro_precision),
        recall: pct(metrics.metrics.macro_recall),
        at_k: metrics
            .at_k
            .iter()
            .map(|(k, m): (&usize, &TopKMetrics)| {
                (
                    *k,
                    AtKReport {
                        accuracy: pct(m.accuracy),
                        precision: pct(m.macro_precision),
                        recall: pct(m.macro_recall),
                    },
                )
            })
            .collect(),
    }
}

impl From<&EvalReport> for ReportFile {
    fn from(report: &EvalReport) -> Self {
        ReportFile {
            samples: report.samples,
            stripes: report.stripes,
            iou: pct(report.iou),
            stones_mse: two_decimals(report.stones_mse),
            horizon: target_report(&report.horizon),
            aggregated_main_accuracy: pct(report.aggregated_main_accuracy),
            features: report
                .features
                .iter()
                .map(|f| FeatureReport {
                    name: f.name.clone(),
                    classes: f.classes,
                    target: target_report(&f.label_metrics),
                })
                .collect(),
        }
    }
}

/// Pretty JSON with every float printed with exactly two decimals (all report
/// floats are pre-rounded, so the digits are faithful).
struct TwoDecimalFormatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for TwoDecimalFormatter<'_> {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.2}")
    }

    fn begin_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_array(writer)
    }

    fn end_array<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_object(writer)
    }

    fn end_object<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W>(&mut self, writer: &mut W, first: bool) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W>(&mut self, writer: &mut W) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        self.inner.end_object_value(writer)
    }
}

pub fn render_report(report: &EvalReport) -> Result<Vec<u8>, crate::error::CliError> {
    use serde::Serialize;
    let file = ReportFile::from(report);
    let mut bytes = Vec::new();
    let formatter = TwoDecimalFormatter {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut serializer = serde_json::Serializer::with_formatter(&mut bytes, formatter);
    file.serialize(&mut serializer)?;
    bytes.push(b'\n');
    Ok(bytes)
}
