//! Machine-readable analysis artifacts.
//!
//! A report is self-describing: it embeds the tool version and the sign and
//! normalization conventions under which every number was computed, since
//! those conventions are the main reproducibility hazard for this kind of
//! result. Two output formats exist: a JSON report for verdicts (canonical
//! key order, floats with 17 significant digits, so values round-trip
//! exactly) and a CSV series for correlation-function sweeps (one row per
//! delay; plots are made by external tools).
//!
//! Reports from repeated runs of one config differ only in the `timing`
//! block; [`strip_timing`] normalizes that away for byte comparisons.

use std::io::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::witness::{CriterionResult, MinorReport, Verdict};
use crate::Result;

/// Complete result of one analysis run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Tool version that produced the report.
    pub version: String,
    pub conventions: Conventions,
    pub tasks: Vec<TaskReport>,
    pub timing: Timing,
}

/// The pinned sign and normalization conventions, spelled out so numbers in
/// the report can be compared against other implementations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    pub squeezing_sign: String,
    pub atom_hamiltonian: String,
    pub field_normalization: String,
}

impl Conventions {
    pub fn pinned() -> Self {
        Self {
            squeezing_sign: "squeezed vacuum amplitudes follow c_{n+1} = -exp(i phi) tanh(r) \
                             sqrt(n/(n+1)) c_{n-1} from c_0 = 1; phi = 0 squeezes the quadrature \
                             (a + a^dag), giving a negative normally ordered field variance"
                .into(),
            atom_hamiltonian: "H = -(Omega/2)(sigma_+ + sigma_-) + Delta sigma_+ sigma_- in the \
                               frame rotating at the drive frequency; ground state is basis \
                               index 0; decay at rate Gamma through sigma_-; times in units of \
                               1/Gamma"
                .into(),
            field_normalization: "E^+ has unit prefactor: a for a prepared mode, \
                                  sigma_-(t - r) for the atom far field; intensities are \
                                  normally and time-ordered moments of E^- E^+"
                .into(),
        }
    }
}

/// Wall-clock timings; the only part of a report that varies between
/// identical runs.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Timing {
    pub total_seconds: f64,
    /// One entry per task, in task order.
    pub task_seconds: Vec<f64>,
}

/// Result of one configured task.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskReport {
    /// Moment-matrix positivity scan.
    WitnessMatrix(WitnessReport),
    /// One named inequality criterion.
    Criterion(CriterionResult),
    /// Intensity-correlation sweep.
    G2Sweep(SeriesReport),
    /// The task failed; siblings were still attempted.
    Failed(FailedTask),
}

/// Witness-matrix task result: eigenvalue scan plus optional principal
/// minors, with the witnessing operator coefficients when negative.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Basis degree when the basis was enumerated; absent for an explicit
    /// basis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_degree: Option<u32>,
    /// Display form of each basis monomial, row/column order of the matrix.
    pub basis: Vec<String>,
    /// Relative deviation of the raw evaluations from Hermitian symmetry.
    pub hermiticity_deviation: f64,
    /// Largest matrix entry magnitude; the threshold normalization scale.
    pub scale: f64,
    pub min_eigenvalue: f64,
    /// Coefficients (re, im) of the test operator achieving
    /// `min_eigenvalue`, in basis order.
    pub eigenvector: Vec<[f64; 2]>,
    /// Principal-minor scan; absent when only eigenvalues were requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minors: Option<MinorReport>,
    /// Effective relative threshold used for the verdict.
    pub threshold_rel: f64,
    /// Most negative normalized witness value; negative beyond the
    /// threshold means nonclassical.
    pub margin: f64,
    pub verdict: Verdict,
    /// Honest wording of what the verdict establishes: negativity proves
    /// nonclassicality, while positivity at finite degree proves nothing.
    pub statement: String,
}

/// One sampled correlation sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    /// What the series samples (currently always `"g2"`).
    pub quantity: String,
    pub rows: Vec<SeriesRow>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SeriesRow {
    pub tau: f64,
    pub value_re: f64,
    pub value_im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FailedTask {
    /// Index of the task in the config's task list.
    pub index: usize,
    /// Task kind tag from the config.
    pub kind: String,
    pub error: String,
}

impl TaskReport {
    /// The verdict carried by this task, when it has one.
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            TaskReport::WitnessMatrix(w) => Some(w.verdict),
            TaskReport::Criterion(c) => Some(if c.violated {
                Verdict::Nonclassical
            } else {
                Verdict::ClassicalConsistent
            }),
            TaskReport::G2Sweep(_) | TaskReport::Failed(_) => None,
        }
    }
}

/// Output format selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmitFormat {
    JsonReport,
    CsvSeries,
}

impl EmitFormat {
    /// Parse a format tag as written on a command line.
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "json-report" => Ok(Self::JsonReport),
            "csv-series" => Ok(Self::CsvSeries),
            other => Err(Error::InvalidArgument(format!(
                "unsupported format tag `{other}` (expected json-report or csv-series)"
            ))),
        }
    }
}

/// Serialize a report in the requested format.
///
/// The JSON form round-trips: parsing the bytes back into an
/// [`AnalysisReport`] and emitting again is byte-identical, because floats
/// carry 17 significant digits. The CSV form requires the report to contain
/// a series task.
pub fn emit(report: &AnalysisReport, format: EmitFormat) -> Result<Vec<u8>> {
    match format {
        EmitFormat::JsonReport => emit_json(report),
        EmitFormat::CsvSeries => {
            let series = report
                .tasks
                .iter()
                .find_map(|t| match t {
                    TaskReport::G2Sweep(series) => Some(series),
                    _ => None,
                })
                .ok_or_else(|| {
                    Error::InvalidArgument(
                        "the report contains no correlation-sweep task to serialize as CSV"
                            .into(),
                    )
                })?;
            emit_csv(series)
        }
    }
}

/// JSON formatter printing every float with 17 significant digits
/// (`{:.16e}`), the shortest form that reproduces any `f64` exactly.
struct SciFloatFormatter;

impl serde_json::ser::Formatter for SciFloatFormatter {
    fn write_f64<W: std::io::Write + ?Sized>(
        &mut self,
        writer: &mut W,
        value: f64,
    ) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

fn emit_json(report: &AnalysisReport) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let mut serializer = serde_json::Serializer::with_formatter(&mut bytes, SciFloatFormatter);
    report
        .serialize(&mut serializer)
        .map_err(|e| Error::Numerical(format!("report serialization failed: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn emit_csv(series: &SeriesReport) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    writeln!(bytes, "tau,value_re,value_im").expect("writing to a Vec cannot fail");
    for row in &series.rows {
        writeln!(
            bytes,
            "{:.16e},{:.16e},{:.16e}",
            row.tau, row.value_re, row.value_im
        )
        .expect("writing to a Vec cannot fail");
    }
    Ok(bytes)
}

/// Parse emitted JSON-report bytes back into a report.
pub fn parse_report(bytes: &[u8]) -> Result<AnalysisReport> {
    serde_json::from_slice(bytes)
        .map_err(|e| Error::InvalidArgument(format!("not a valid report document: {e}")))
}

/// Null out the timing block of a JSON report value, leaving everything a
/// deterministic function of the config.
pub fn strip_timing(report_json: &mut serde_json::Value) {
    if let Some(object) = report_json.as_object_mut() {
        object.insert("timing".to_string(), serde_json::Value::Null);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::Sense;

    fn sample_report() -> AnalysisReport {
        AnalysisReport {
            version: env!("CARGO_PKG_VERSION").to_string(),
            conventions: Conventions::pinned(),
            tasks: vec![
                TaskReport::Criterion(CriterionResult {
                    id: "antibunching".into(),
                    lhs: 0.1234567890123456789,
                    rhs: 0.0,
                    violated: true,
                    threshold: 1e-9,
                    sense: Sense::Greater,
                    domain_flag: false,
                    trivial: false,
                    points: vec![0, 1],
                    exponents: vec![],
                }),
                TaskReport::G2Sweep(SeriesReport {
                    quantity: "g2".into(),
                    rows: vec![
                        SeriesRow {
                            tau: 0.0,
                            value_re: 0.0,
                            value_im: 0.0,
                        },
                        SeriesRow {
                            tau: 0.5,
                            value_re: 0.987654321,
                            value_im: 0.0,
                        },
                    ],
                }),
                TaskReport::Failed(FailedTask {
                    index: 2,
                    kind: "witness-matrix".into(),
                    error: "basis dimension needs a Fock cutoff of at least 12".into(),
                }),
            ],
            timing: Timing {
                total_seconds: 0.25,
                task_seconds: vec![0.1, 0.15, 0.0],
            },
        }
    }

    #[test]
    fn json_report_round_trips_byte_identically() {
        let report = sample_report();
        let bytes = emit(&report, EmitFormat::JsonReport).unwrap();
        let parsed = parse_report(&bytes).unwrap();
        let re_emitted = emit(&parsed, EmitFormat::JsonReport).unwrap();
        assert_eq!(bytes, re_emitted);
    }

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        let report = sample_report();
        let bytes = emit(&report, EmitFormat::JsonReport).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.2345678901234568e-1"), "{text}");
        // Exact round-trip of an awkward value.
        let parsed = parse_report(text.as_bytes()).unwrap();
        let TaskReport::Criterion(c) = &parsed.tasks[0] else {
            panic!("expected a criterion task");
        };
        assert_eq!(c.lhs.to_bits(), 0.1234567890123456789f64.to_bits());
    }

    #[test]
    fn csv_series_has_header_and_monotone_tau() {
        let report = sample_report();
        let bytes = emit(&report, EmitFormat::CsvSeries).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("tau,value_re,value_im"));
        let taus: Vec<f64> = lines
            .map(|line| line.split(',').next().unwrap().parse().unwrap())
            .collect();
        assert_eq!(taus.len(), 2);
        assert!(taus.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_requires_a_series_task() {
        let mut report = sample_report();
        report.tasks.retain(|t| !matches!(t, TaskReport::G2Sweep(_)));
        assert!(emit(&report, EmitFormat::CsvSeries).is_err());
    }

    #[test]
    fn format_tags_parse() {
        assert_eq!(EmitFormat::from_tag("json-report").unwrap(), EmitFormat::JsonReport);
        assert_eq!(EmitFormat::from_tag("csv-series").unwrap(), EmitFormat::CsvSeries);
        assert!(EmitFormat::from_tag("xml").is_err());
    }

    #[test]
    fn strip_timing_hides_the_only_varying_block() {
        let mut a = sample_report();
        let mut b = sample_report();
        a.timing.total_seconds = 1.0;
        b.timing.total_seconds = 2.0;
        let mut ja: serde_json::Value =
            serde_json::from_slice(&emit(&a, EmitFormat::JsonReport).unwrap()).unwrap();
        let mut jb: serde_json::Value =
            serde_json::from_slice(&emit(&b, EmitFormat::JsonReport).unwrap()).unwrap();
        assert_ne!(ja, jb);
        strip_timing(&mut ja);
        strip_timing(&mut jb);
        assert_eq!(ja, jb);
    }
}
