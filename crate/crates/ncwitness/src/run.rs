//! Analysis orchestration: build the configured provider, execute every
//! task, and assemble the report.
//!
//! A provider construction failure aborts the run (nothing else is
//! meaningful without it), but a failing task does not: its error is
//! captured in the report and the remaining tasks still execute. Tasks run
//! sequentially in config order, which makes reports a deterministic
//! function of the config apart from the timing block.

use std::time::Instant;

use crate::atom::{self, AtomProvider};
use crate::config::{
    basis_from_pairs, AnalysisConfig, FieldVariant, ProviderSpec, TaskSpec, Tolerances,
};
use crate::error::Error;
use crate::linalg::max_abs;
use crate::moments::{MultiIndex, StateProvider};
use crate::report::{
    AnalysisReport, Conventions, FailedTask, SeriesReport, SeriesRow, TaskReport, Timing,
    WitnessReport,
};
use crate::state::ModeCutoff;
use crate::witness::{
    self, CorrelationProvider, CriterionResult, FieldIntensityCheck, MinorReport, Sense, Verdict,
    WitnessMatrix, EPSILON_REL,
};
use crate::Result;

/// The two provider backends behind one dynamic interface; the atom keeps
/// its concrete handle for the g2 sweep.
enum ProviderHandle {
    State(StateProvider),
    Atom(AtomProvider),
}

impl ProviderHandle {
    fn as_dyn(&self) -> &dyn CorrelationProvider {
        match self {
            ProviderHandle::State(p) => p,
            ProviderHandle::Atom(p) => p,
        }
    }

    fn atom(&self) -> Option<&AtomProvider> {
        match self {
            ProviderHandle::Atom(p) => Some(p),
            ProviderHandle::State(_) => None,
        }
    }
}

fn build_provider(config: &AnalysisConfig) -> Result<ProviderHandle> {
    match &config.provider {
        ProviderSpec::State(spec) => {
            let cutoffs: Vec<ModeCutoff> = spec
                .cutoffs
                .iter()
                .map(|&dim| ModeCutoff::new(dim))
                .collect::<Result<_>>()?;
            let state = spec.state_spec().build(&cutoffs)?;
            Ok(ProviderHandle::State(StateProvider::new(
                state,
                spec.points.clone(),
            )?))
        }
        ProviderSpec::Atom(spec) => Ok(ProviderHandle::Atom(atom::as_provider(
            &spec.params(),
            spec.points.clone(),
        )?)),
    }
}

/// Execute all tasks of a validated config and assemble the report.
pub fn run(config: &AnalysisConfig) -> Result<AnalysisReport> {
    let start = Instant::now();
    let provider = build_provider(config)?;
    let mut tasks = Vec::with_capacity(config.tasks.len());
    let mut task_seconds = Vec::with_capacity(config.tasks.len());
    for (index, task) in config.tasks.iter().enumerate() {
        let task_start = Instant::now();
        let report = run_task(&provider, task, &config.tolerances).unwrap_or_else(|e| {
            TaskReport::Failed(FailedTask {
                index,
                kind: task.kind().to_string(),
                error: e.to_string(),
            })
        });
        task_seconds.push(task_start.elapsed().as_secs_f64());
        tasks.push(report);
    }
    Ok(AnalysisReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        conventions: Conventions::pinned(),
        tasks,
        timing: Timing {
            total_seconds: start.elapsed().as_secs_f64(),
            task_seconds,
        },
    })
}

fn index_from_pairs(pairs: &[[u32; 2]]) -> Result<MultiIndex> {
    MultiIndex::new(pairs.iter().map(|&[n, m]| (n, m)).collect())
}

fn run_task(
    provider: &ProviderHandle,
    task: &TaskSpec,
    tolerances: &Tolerances,
) -> Result<TaskReport> {
    let p = provider.as_dyn();
    match task {
        TaskSpec::WitnessMatrix {
            max_degree,
            basis,
            minor_max_order,
        } => witness_task(p, *max_degree, basis.as_deref(), *minor_max_order, tolerances),
        TaskSpec::SecondOrder { left, right } => {
            let idx_a = index_from_pairs(left)?;
            let idx_b = index_from_pairs(right)?;
            criterion_task(
                witness::check_second_order(p, &idx_a, &idx_b)?,
                tolerances,
            )
        }
        TaskSpec::ThirdOrderMinor { m, n, p: pw, points } => {
            let labels: [usize; 3] = points[..]
                .try_into()
                .map_err(|_| Error::InvalidArgument("three point labels required".into()))?;
            criterion_task(
                witness::check_third_order_minor(p, *m, *n, *pw, &labels)?,
                tolerances,
            )
        }
        TaskSpec::Antibunching { points } => criterion_task(
            witness::check_antibunching(p, points[0], points[1])?,
            tolerances,
        ),
        TaskSpec::HigherOrderIntensity {
            n_full,
            m_full,
            n,
            m,
            points,
        } => criterion_task(
            witness::check_higher_order_intensity(
                p, *n_full, *m_full, *n, *m, points[0], points[1],
            )?,
            tolerances,
        ),
        TaskSpec::FieldIntensity {
            variant,
            powers,
            l,
            points,
        } => {
            let check = match variant {
                FieldVariant::General => FieldIntensityCheck::General {
                    powers: powers
                        .as_ref()
                        .ok_or_else(|| {
                            Error::InvalidArgument("the general variant requires `powers`".into())
                        })?
                        .iter()
                        .map(|&[m, p]| (m, p))
                        .collect(),
                },
                FieldVariant::Lowest => FieldIntensityCheck::Lowest,
                FieldVariant::Alt => FieldIntensityCheck::Alt,
                FieldVariant::FullField => FieldIntensityCheck::FullField,
                FieldVariant::Multipoint => FieldIntensityCheck::Multipoint {
                    l: l.ok_or_else(|| {
                        Error::InvalidArgument("the multipoint variant requires `l`".into())
                    })?,
                },
            };
            criterion_task(
                witness::check_field_intensity(p, &check, points)?,
                tolerances,
            )
        }
        TaskSpec::G2Sweep { tau_max, samples } => {
            let atom = provider.atom().ok_or_else(|| {
                Error::InvalidArgument("the g2 sweep requires the atom provider".into())
            })?;
            let dynamics = atom.dynamics();
            let mut rows = Vec::with_capacity(*samples);
            for i in 0..*samples {
                let tau = tau_max * i as f64 / (*samples - 1) as f64;
                rows.push(SeriesRow {
                    tau,
                    value_re: dynamics.g2(tau)?,
                    value_im: 0.0,
                });
            }
            Ok(TaskReport::G2Sweep(SeriesReport {
                quantity: "g2".to_string(),
                rows,
            }))
        }
    }
}

fn criterion_task(result: CriterionResult, tolerances: &Tolerances) -> Result<TaskReport> {
    Ok(TaskReport::Criterion(apply_tolerances(result, tolerances)))
}

/// Re-derive a criterion verdict under overridden thresholds. Every
/// criterion's stock threshold is linear in the relative slack, so the
/// override rescales it and re-applies the serialized comparison rule;
/// domain-flagged results stay violated (the flag records a sign condition,
/// not a marginal comparison).
fn apply_tolerances(mut result: CriterionResult, tolerances: &Tolerances) -> CriterionResult {
    if let Some(eps) = tolerances.epsilon_rel {
        result.threshold *= eps / EPSILON_REL;
        if !result.domain_flag {
            result.violated = match result.sense {
                Sense::Greater => result.lhs > result.rhs + result.threshold,
                Sense::Less => result.lhs < result.rhs - result.threshold,
            };
        }
    }
    if let Some(trivial_abs) = tolerances.trivial_abs {
        if !result.domain_flag {
            result.trivial =
                result.lhs.abs() <= trivial_abs && result.rhs.abs() <= trivial_abs;
        }
    }
    result
}

/// Re-derive the minor-scan verdict under an overridden relative threshold,
/// from the serialized determinants, eigenvalue, and scale.
fn reverdict_minors(mut report: MinorReport, eps: f64) -> MinorReport {
    report.threshold_rel = eps;
    let mut margin = report.min_eigenvalue / report.scale;
    let mut any_negative = report.min_eigenvalue < -eps * report.scale;
    for entry in &report.minors {
        let det_scale = report.scale.powi(entry.order as i32);
        margin = margin.min(entry.determinant / det_scale);
        if entry.determinant < -eps * det_scale {
            any_negative = true;
        }
    }
    report.margin = margin;
    report.verdict = if any_negative {
        Verdict::Nonclassical
    } else {
        Verdict::ClassicalConsistent
    };
    report
}

fn witness_task(
    provider: &dyn CorrelationProvider,
    max_degree: Option<u32>,
    basis_pairs: Option<&[Vec<[u32; 2]>]>,
    minor_max_order: usize,
    tolerances: &Tolerances,
) -> Result<TaskReport> {
    let basis = match (max_degree, basis_pairs) {
        (Some(degree), None) => witness::enumerate_basis(provider.point_count(), degree),
        (None, Some(pairs)) => basis_from_pairs(pairs)?,
        _ => {
            return Err(Error::InvalidArgument(
                "exactly one of `max_degree` and `basis` required".into(),
            ))
        }
    };
    let matrix = witness::build_witness_matrix(provider, &basis)?;
    let eps = tolerances.epsilon_rel.unwrap_or(EPSILON_REL);

    let minors = if minor_max_order >= 1 {
        let report = witness::principal_minors(&matrix, minor_max_order.min(matrix.side()))?;
        Some(if tolerances.epsilon_rel.is_some() {
            reverdict_minors(report, eps)
        } else {
            report
        })
    } else {
        None
    };

    let (min_eigenvalue, eigenvector) = witness::min_eigenpair(&matrix);
    let scale = scale_of(&matrix);
    let (margin, verdict) = match &minors {
        Some(m) => (m.margin, m.verdict),
        None => {
            let margin = min_eigenvalue / scale;
            let verdict = if min_eigenvalue < -eps * scale {
                Verdict::Nonclassical
            } else {
                Verdict::ClassicalConsistent
            };
            (margin, verdict)
        }
    };

    let statement = match (verdict, max_degree) {
        (Verdict::Nonclassical, _) => format!(
            "nonclassical: the moment matrix has a negative direction \
             (normalized margin {margin:.3e}); the eigenvector lists the \
             witnessing test-operator coefficients"
        ),
        (Verdict::ClassicalConsistent, Some(degree)) => format!(
            "no violation found up to degree {degree}; a higher-degree basis \
             could still reveal one"
        ),
        (Verdict::ClassicalConsistent, None) => format!(
            "no violation found for the supplied {}-element basis; other \
             bases could still reveal one",
            basis.len()
        ),
    };

    Ok(TaskReport::WitnessMatrix(WitnessReport {
        max_degree,
        basis: basis.entries().iter().map(|idx| idx.to_string()).collect(),
        hermiticity_deviation: matrix.hermiticity_deviation(),
        scale,
        min_eigenvalue,
        eigenvector: eigenvector.iter().map(|z| [z.re, z.im]).collect(),
        minors,
        threshold_rel: eps,
        margin,
        verdict,
        statement,
    }))
}

fn scale_of(matrix: &WitnessMatrix) -> f64 {
    max_abs(matrix.matrix()).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::report::{emit, strip_timing, EmitFormat};

    fn run_text(text: &str) -> AnalysisReport {
        let config = parse_config(text).unwrap_or_else(|issues| panic!("{issues:?}"));
        run(&config).unwrap()
    }

    #[test]
    fn fock_one_explicit_basis_reports_the_negative_minor() {
        let report = run_text(
            r#"
            [provider.state]
            cutoffs = [8]
            modes = [{ kind = "fock", n = 1 }]

            [[task]]
            kind = "witness-matrix"
            basis = [[[0, 0]], [[1, 1]]]
            "#,
        );
        let TaskReport::WitnessMatrix(w) = &report.tasks[0] else {
            panic!("expected a witness-matrix task");
        };
        assert_eq!(w.verdict, Verdict::Nonclassical);
        let full = w
            .minors
            .as_ref()
            .unwrap()
            .minors
            .iter()
            .find(|m| m.subset == [0, 1])
            .unwrap();
        assert!((full.determinant - (-1.0)).abs() < 1e-10);
        assert!(w.statement.contains("nonclassical"));
    }

    #[test]
    fn coherent_state_passes_a_small_battery() {
        let report = run_text(
            r#"
            [provider.state]
            cutoffs = [32]
            modes = [{ kind = "coherent", alpha = [1.0, 0.0] }]

            [[task]]
            kind = "witness-matrix"
            max_degree = 2

            [[task]]
            kind = "antibunching"

            [[task]]
            kind = "third-order-minor"
            m = 1
            n = 1
            p = 1

            [[task]]
            kind = "field-intensity"
            variant = "full-field"
            "#,
        );
        for task in &report.tasks {
            match task {
                TaskReport::WitnessMatrix(w) => {
                    assert_eq!(w.verdict, Verdict::ClassicalConsistent);
                    assert!(w.statement.contains("no violation found up to degree 2"));
                }
                TaskReport::Criterion(c) => assert!(!c.violated, "{}", c.id),
                other => panic!("unexpected task report {other:?}"),
            }
        }
    }

    #[test]
    fn failing_tasks_do_not_abort_siblings() {
        // Degree 4 on an 8-dimensional cutoff folds moments past the
        // truncation guard; the antibunching task still runs.
        let report = run_text(
            r#"
            [provider.state]
            cutoffs = [8]
            modes = [{ kind = "fock", n = 1 }]

            [[task]]
            kind = "witness-matrix"
            max_degree = 4

            [[task]]
            kind = "antibunching"
            "#,
        );
        assert_eq!(report.tasks.len(), 2);
        let TaskReport::Failed(failed) = &report.tasks[0] else {
            panic!("expected the first task to fail, got {:?}", report.tasks[0]);
        };
        assert_eq!(failed.index, 0);
        assert_eq!(failed.kind, "witness-matrix");
        assert!(failed.error.contains("cutoff"), "{}", failed.error);
        let TaskReport::Criterion(c) = &report.tasks[1] else {
            panic!("expected the second task to succeed");
        };
        // Coincident points make both sides exact zeros: flagged trivial.
        assert!(c.trivial && !c.violated);
    }

    #[test]
    fn atom_multipoint_task_is_nonclassical_with_zero_rhs() {
        let report = run_text(
            r#"
            [provider.atom]
            rabi = 6.0
            points = [{ t = 0.0 }, { t = 0.4 }, { t = 0.9 }]

            [[task]]
            kind = "field-intensity"
            variant = "multipoint"
            l = 2
            "#,
        );
        let TaskReport::Criterion(c) = &report.tasks[0] else {
            panic!("expected a criterion task");
        };
        assert!(c.violated);
        assert!(c.rhs.abs() < 1e-12);
        assert!(c.lhs > 1e-6);
    }

    #[test]
    fn g2_sweep_rows_are_monotone_and_start_at_zero() {
        let report = run_text(
            r#"
            [provider.atom]
            rabi = 6.0
            points = [{ t = 0.0 }, { t = 0.5 }]

            [[task]]
            kind = "g2-sweep"
            tau_max = 4.0
            samples = 9
            "#,
        );
        let TaskReport::G2Sweep(series) = &report.tasks[0] else {
            panic!("expected a sweep task");
        };
        assert_eq!(series.rows.len(), 9);
        assert_eq!(series.rows[0].tau, 0.0);
        assert_eq!(series.rows[0].value_re, 0.0);
        assert_eq!(series.rows[8].tau, 4.0);
        assert!(series
            .rows
            .windows(2)
            .all(|w| w[0].tau < w[1].tau));
    }

    #[test]
    fn repeated_runs_differ_only_in_timing() {
        let text = r#"
            [provider.atom]
            rabi = 6.0
            points = [{ t = 0.0 }, { t = 0.5 }]

            [[task]]
            kind = "antibunching"

            [[task]]
            kind = "g2-sweep"
            tau_max = 2.0
            samples = 5
        "#;
        let config = parse_config(text).unwrap();
        let mut a: serde_json::Value =
            serde_json::from_slice(&emit(&run(&config).unwrap(), EmitFormat::JsonReport).unwrap())
                .unwrap();
        let mut b: serde_json::Value =
            serde_json::from_slice(&emit(&run(&config).unwrap(), EmitFormat::JsonReport).unwrap())
                .unwrap();
        strip_timing(&mut a);
        strip_timing(&mut b);
        assert_eq!(a, b);
    }

    #[test]
    fn tolerance_overrides_rescale_verdict_thresholds() {
        let base = r#"
            [provider.state]
            cutoffs = [32]
            modes = [{ kind = "coherent", alpha = [1.0, 0.0] }]

            [[task]]
            kind = "antibunching"

            [[task]]
            kind = "witness-matrix"
            max_degree = 2
        "#;
        let stock = run_text(base);
        let loose = run_text(&format!("{base}\n[tolerances]\nepsilon_rel = 1e-3\ntrivial_abs = 1e-6\n"));

        let TaskReport::Criterion(c0) = &stock.tasks[0] else { panic!() };
        let TaskReport::Criterion(c1) = &loose.tasks[0] else { panic!() };
        assert!((c1.threshold / c0.threshold - 1e6).abs() < 1.0, "{}", c1.threshold);
        assert!(!c1.violated);

        let TaskReport::WitnessMatrix(w1) = &loose.tasks[1] else { panic!() };
        assert_eq!(w1.threshold_rel, 1e-3);
        assert_eq!(w1.minors.as_ref().unwrap().threshold_rel, 1e-3);
        assert_eq!(w1.verdict, Verdict::ClassicalConsistent);
    }

    #[test]
    fn provider_construction_failure_aborts_with_a_diagnostic() {
        let config = parse_config(
            r#"
            [provider.state]
            cutoffs = [4]
            modes = [{ kind = "fock", n = 7 }]

            [[task]]
            kind = "antibunching"
            "#,
        )
        .unwrap();
        let err = run(&config).expect_err("n = 7 exceeds the cutoff");
        assert!(err.to_string().contains("7"), "{err}");
    }
}
