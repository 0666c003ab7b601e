//! Moment-matrix nonclassicality tests.
//!
//! A field is nonclassical when the quadratic form built from its normally
//! and time-ordered correlation functions fails to be positive semidefinite
//! over test operators `f = sum c_(n,m) prod_i [E^-(i)]^(n_i) [E^+(i)]^(m_i)`.
//! This module assembles that matrix over a truncated monomial basis, tests
//! positivity through principal minors and eigenvalues, and evaluates the
//! named low-order inequality criteria. Everything is generic over a
//! [`CorrelationProvider`], so prepared states and dynamical sources are
//! interchangeable.
//!
//! A finite basis degree yields a sufficient test only: a passing matrix
//! means "no violation found up to degree d", never "classical".

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{attach_index, Error};
use crate::linalg::{determinant, hermitian_deviation, hermitian_eigen, max_abs, CMatrix, C64};
use crate::moments::{all_indices, MultiIndex};
use crate::Result;

/// Relative negativity threshold for minors and eigenvalues.
pub const EPSILON_REL: f64 = 1e-9;

/// Maximum number of principal-minor subsets enumerated by default.
pub const DEFAULT_MINOR_SUBSET_LIMIT: u128 = 200_000;

/// Absolute threshold for a strict inequality `lhs > rhs`.
pub fn epsilon_abs(lhs: f64, rhs: f64) -> f64 {
    EPSILON_REL * 1.0_f64.max(lhs.abs()).max(rhs.abs())
}

/// Source of normally and time-ordered correlation functions at `k`
/// measurement points.
///
/// Implementations must satisfy conjugation symmetry
/// (`evaluate(idx.conjugate()) == conj(evaluate(idx))`) and normalization
/// (`evaluate(all-zero) == 1`). Evaluations of distinct indices are
/// independent, so providers are required to be shareable across threads.
pub trait CorrelationProvider: Send + Sync {
    /// Number of measurement points `k`.
    fn point_count(&self) -> usize;

    /// The correlation value for the given exponent pairs, one per point.
    fn evaluate(&self, idx: &MultiIndex) -> Result<C64>;
}

impl<P: CorrelationProvider + ?Sized> CorrelationProvider for &P {
    fn point_count(&self) -> usize {
        (**self).point_count()
    }

    fn evaluate(&self, idx: &MultiIndex) -> Result<C64> {
        (**self).evaluate(idx)
    }
}

/// Ordered monomial basis for the test operator `f`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorBasis {
    k: usize,
    entries: Vec<MultiIndex>,
}

impl OperatorBasis {
    /// Build a basis from explicit entries. All entries must address the
    /// same number of points, be distinct, and start with the all-zero
    /// index (the constant term of `f`).
    pub fn from_entries(entries: Vec<MultiIndex>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidArgument("basis needs at least one entry".into()))?;
        let k = first.len();
        if first.degree() != 0 {
            return Err(Error::InvalidArgument(
                "the first basis entry must be the all-zero index".into(),
            ));
        }
        for (i, entry) in entries.iter().enumerate() {
            if entry.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "basis entry {i} has {} points, expected {k}",
                    entry.len()
                )));
            }
            if entries[..i].contains(entry) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate basis entry {entry}"
                )));
            }
        }
        Ok(Self { k, entries })
    }

    pub fn point_count(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[MultiIndex] {
        &self.entries
    }
}

/// All monomials over `k` points with total degree at most `max_degree`, in
/// graded-lexicographic order with the all-zero index first.
///
/// # Panics
/// When `k` or `max_degree` is zero.
pub fn enumerate_basis(k: usize, max_degree: u32) -> OperatorBasis {
    assert!(k >= 1, "basis needs at least one point");
    assert!(max_degree >= 1, "basis needs degree at least 1");
    OperatorBasis {
        k,
        entries: all_indices(k, max_degree),
    }
}

/// The quadratic form of the nonclassicality test over an operator basis.
#[derive(Clone, Debug)]
pub struct WitnessMatrix {
    basis: OperatorBasis,
    matrix: CMatrix,
    hermiticity_deviation: f64,
}

impl WitnessMatrix {
    /// Wrap a raw matrix: records its Hermiticity deviation (relative to the
    /// largest entry) and stores the Hermitian average.
    pub fn from_matrix(basis: OperatorBasis, raw: CMatrix) -> Result<Self> {
        if raw.nrows() != basis.len() || raw.ncols() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix side {} does not match basis length {}",
                raw.nrows(),
                basis.len()
            )));
        }
        let scale = max_abs(&raw).max(f64::MIN_POSITIVE);
        let hermiticity_deviation = hermitian_deviation(&raw) / scale;
        let matrix = (raw.adjoint() + raw) * Complex::new(0.5, 0.0);
        Ok(Self {
            basis,
            matrix,
            hermiticity_deviation,
        })
    }

    pub fn basis(&self) -> &OperatorBasis {
        &self.basis
    }

    /// The Hermitian-symmetrized matrix.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    /// Relative deviation of the raw evaluations from Hermitian symmetry;
    /// bounded by the provider's conjugation-symmetry error.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.hermiticity_deviation
    }
}

/// The provider index of one quadratic-form entry: the column monomial
/// contributes its exponents directly, the row monomial contributes them
/// swapped (its operator enters conjugated).
fn gram_index(
    k: usize,
    col: &[(usize, (u32, u32))],
    row: &[(usize, (u32, u32))],
) -> Result<MultiIndex> {
    let mut pairs = vec![(0u32, 0u32); k];
    for &(point, (n, m)) in col {
        if point >= k {
            return Err(Error::InvalidArgument(format!(
                "point label {point} out of range for {k} points"
            )));
        }
        pairs[point].0 += n;
        pairs[point].1 += m;
    }
    for &(point, (p, q)) in row {
        if point >= k {
            return Err(Error::InvalidArgument(format!(
                "point label {point} out of range for {k} points"
            )));
        }
        pairs[point].0 += q;
        pairs[point].1 += p;
    }
    MultiIndex::new(pairs)
}

fn spread(idx: &MultiIndex) -> Vec<(usize, (u32, u32))> {
    idx.pairs().iter().copied().enumerate().collect()
}

fn eval_gram<P: CorrelationProvider + ?Sized>(
    provider: &P,
    col: &[(usize, (u32, u32))],
    row: &[(usize, (u32, u32))],
) -> Result<C64> {
    let idx = gram_index(provider.point_count(), col, row)?;
    provider
        .evaluate(&idx)
        .map_err(|e| attach_index(e, &idx.to_string()))
}

/// Extract the real part of a moment that symmetry forces to be real,
/// guarding against silent numerical corruption.
fn checked_real(value: C64, context: &str) -> Result<f64> {
    if value.im.abs() > 1e-9 * 1.0_f64.max(value.re.abs()) {
        return Err(Error::Numerical(format!(
            "moment {context} should be real, got {value}"
        )));
    }
    Ok(value.re)
}

/// Assemble the quadratic form over the basis: entry (row B, col A) is the
/// provider value at the combined index with exponents `n_i + q_i` and
/// `m_i + p_i`, where A = (n, m) and B = (p, q).
pub fn build_witness_matrix<P: CorrelationProvider + ?Sized>(
    provider: &P,
    basis: &OperatorBasis,
) -> Result<WitnessMatrix> {
    if basis.point_count() != provider.point_count() {
        return Err(Error::DimensionMismatch(format!(
            "basis addresses {} points but the provider has {}",
            basis.point_count(),
            provider.point_count()
        )));
    }
    let side = basis.len();
    let mut raw = CMatrix::zeros(side, side);
    for (r, row_idx) in basis.entries().iter().enumerate() {
        for (c, col_idx) in basis.entries().iter().enumerate() {
            raw[(r, c)] = eval_gram(provider, &spread(col_idx), &spread(row_idx))?;
        }
    }
    WitnessMatrix::from_matrix(basis.clone(), raw)
}

/// Positivity verdict of a moment-matrix test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No negativity found at the tested basis degree; a larger basis could
    /// still reveal one.
    ClassicalConsistent,
    Nonclassical,
}

/// One principal minor of the witness matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorEntry {
    /// Row/column subset (basis positions).
    pub subset: Vec<usize>,
    pub order: usize,
    pub determinant: f64,
}

/// Result of the principal-minor positivity scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorReport {
    pub minors: Vec<MinorEntry>,
    pub min_eigenvalue: f64,
    /// Largest entry magnitude; normalization scale for the thresholds.
    pub scale: f64,
    pub threshold_rel: f64,
    pub verdict: Verdict,
    /// Most negative normalized value over `det / scale^order` and
    /// `eigenvalue / scale`.
    pub margin: f64,
}

fn count_subsets(n: usize, max_order: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 1..=max_order.min(n) {
        binom = binom.saturating_mul((n - s + 1) as u128) / s as u128;
        total = total.saturating_add(binom);
    }
    total
}

fn for_each_subset(n: usize, order: usize, f: &mut impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    fn recurse(
        start: usize,
        n: usize,
        remaining: usize,
        current: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]) -> Result<()>,
    ) -> Result<()> {
        if remaining == 0 {
            return f(current);
        }
        for i in start..=(n - remaining) {
            current.push(i);
            recurse(i + 1, n, remaining - 1, current, f)?;
            current.pop();
        }
        Ok(())
    }
    recurse(0, n, order, &mut Vec::with_capacity(order), f)
}

/// Determinants of ALL principal minors (every row/column subset, not only
/// leading ones) up to `max_order`, with the PSD verdict.
pub fn principal_minors(w: &WitnessMatrix, max_order: usize) -> Result<MinorReport> {
    principal_minors_with_limit(w, max_order, DEFAULT_MINOR_SUBSET_LIMIT)
}

/// As [`principal_minors`] with an explicit guard on the subset count.
pub fn principal_minors_with_limit(
    w: &WitnessMatrix,
    max_order: usize,
    limit: u128,
) -> Result<MinorReport> {
    let side = w.side();
    if max_order == 0 || max_order > side {
        return Err(Error::InvalidArgument(format!(
            "minor order must lie in 1..={side}, got {max_order}"
        )));
    }
    let subsets = count_subsets(side, max_order);
    if subsets > limit {
        return Err(Error::SubsetLimitExceeded { subsets, limit });
    }

    let matrix = w.matrix();
    let scale = max_abs(matrix).max(f64::MIN_POSITIVE);
    let mut minors = Vec::with_capacity(subsets as usize);
    let mut margin = f64::INFINITY;
    let mut any_negative = false;
    for order in 1..=max_order {
        for_each_subset(side, order, &mut |subset| {
            let sub = CMatrix::from_fn(order, order, |i, j| matrix[(subset[i], subset[j])]);
            let det = determinant(&sub);
            let det_scale = scale.powi(order as i32);
            if det.im.abs() > 1e-10 * 1.0_f64.max(det_scale) {
                return Err(Error::Numerical(format!(
                    "principal minor {subset:?} of a Hermitian matrix has imaginary part {}",
                    det.im
                )));
            }
            let normalized = det.re / det_scale;
            margin = margin.min(normalized);
            if det.re < -EPSILON_REL * det_scale {
                any_negative = true;
            }
            minors.push(MinorEntry {
                subset: subset.to_vec(),
                order,
                determinant: det.re,
            });
            Ok(())
        })?;
    }

    let min_eigenvalue = min_eigenvalue(w);
    margin = margin.min(min_eigenvalue / scale);
    if min_eigenvalue < -EPSILON_REL * scale {
        any_negative = true;
    }
    Ok(MinorReport {
        minors,
        min_eigenvalue,
        scale,
        threshold_rel: EPSILON_REL,
        verdict: if any_negative {
            Verdict::Nonclassical
        } else {
            Verdict::ClassicalConsistent
        },
        margin,
    })
}

/// Smallest eigenvalue of the Hermitian-symmetrized witness matrix.
pub fn min_eigenvalue(w: &WitnessMatrix) -> f64 {
    crate::linalg::hermitian_min_eigenvalue(w.matrix())
}

/// Smallest eigenvalue together with its eigenvector: the coefficient vector
/// of the most-negative test operator `f` in the basis.
pub fn min_eigenpair(w: &WitnessMatrix) -> (f64, Vec<C64>) {
    let (values, vectors) = hermitian_eigen(w.matrix());
    let column = vectors.column(0);
    (values[0], column.iter().copied().collect())
}

/// Which side of a strict inequality signals nonclassicality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    /// Violated when `lhs > rhs + threshold`.
    Greater,
    /// Violated when `lhs < rhs - threshold` (signed quantities such as
    /// determinants).
    Less,
}

/// Outcome of one named inequality criterion.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
    pub threshold: f64,
    pub sense: Sense,
    /// Set when a square-root argument on the classical side was negative —
    /// itself a conclusive nonclassicality signature; `rhs` then carries the
    /// negative radicand instead of a root.
    pub domain_flag: bool,
    /// Set when both sides vanish, e.g. for coincident retarded times where
    /// the comparison carries no information.
    pub trivial: bool,
    /// Point labels used by the criterion (empty when the criterion spans
    /// all provider points implicitly).
    pub points: Vec<usize>,
    /// Flattened echo of the exponent inputs.
    pub exponents: Vec<u32>,
}

const TRIVIAL_TOL: f64 = 1e-12;

fn greater_result(
    id: &str,
    lhs: f64,
    rhs: f64,
    points: Vec<usize>,
    exponents: Vec<u32>,
) -> CriterionResult {
    let threshold = epsilon_abs(lhs, rhs);
    CriterionResult {
        id: id.to_string(),
        lhs,
        rhs,
        violated: lhs > rhs + threshold,
        threshold,
        sense: Sense::Greater,
        domain_flag: false,
        trivial: lhs.abs() <= TRIVIAL_TOL && rhs.abs() <= TRIVIAL_TOL,
        points,
        exponents,
    }
}

/// `sqrt` with the negative-radicand escape hatch: a negative argument means
/// the classical bound itself fails to exist, which is already conclusive.
/// Returns `(rhs, domain_flag)`.
fn classical_root(radicand: f64) -> (f64, bool) {
    let guard = EPSILON_REL * 1.0_f64.max(radicand.abs());
    if radicand < -guard {
        (radicand, true)
    } else {
        (radicand.max(0.0).sqrt(), false)
    }
}

fn sqrt_comparison_result(
    id: &str,
    lhs: f64,
    radicand: f64,
    points: Vec<usize>,
    exponents: Vec<u32>,
) -> CriterionResult {
    let (rhs, domain_flag) = classical_root(radicand);
    let threshold = epsilon_abs(lhs, rhs);
    CriterionResult {
        id: id.to_string(),
        lhs,
        rhs,
        violated: domain_flag || lhs > rhs + threshold,
        threshold,
        sense: Sense::Greater,
        domain_flag,
        trivial: !domain_flag && lhs.abs() <= TRIVIAL_TOL && rhs.abs() <= TRIVIAL_TOL,
        points,
        exponents,
    }
}

/// Second-order minor test over the test-operator pair `(A, B)`: violated
/// when the squared cross correlation exceeds the product of the two
/// intensity-moment diagonals,
/// `|<oo prod [E^-]^(n_i+q_i) [E^+]^(m_i+p_i) oo>|^2 >
///  <oo prod I^(n_i+m_i) oo> <oo prod I^(p_i+q_i) oo>`.
pub fn check_second_order<P: CorrelationProvider + ?Sized>(
    provider: &P,
    idx_a: &MultiIndex,
    idx_b: &MultiIndex,
) -> Result<CriterionResult> {
    let k = provider.point_count();
    if idx_a.len() != k || idx_b.len() != k {
        return Err(Error::InvalidArgument(format!(
            "criterion indices must address all {k} provider points"
        )));
    }
    let cross = eval_gram(provider, &spread(idx_a), &spread(idx_b))?;
    let diag_a = checked_real(
        eval_gram(provider, &spread(idx_a), &spread(idx_a))?,
        "first intensity diagonal",
    )?;
    let diag_b = checked_real(
        eval_gram(provider, &spread(idx_b), &spread(idx_b))?,
        "second intensity diagonal",
    )?;
    let mut exponents = Vec::new();
    for &(n, m) in idx_a.pairs() {
        exponents.extend([n, m]);
    }
    for &(p, q) in idx_b.pairs() {
        exponents.extend([p, q]);
    }
    Ok(greater_result(
        "second-order-minor",
        cross.norm_sqr(),
        diag_a * diag_b,
        Vec::new(),
        exponents,
    ))
}

/// Third-order minor test: determinant of the printed 3x3 matrix over the
/// monomials `[E^+(1)]^m`, `[E^-(2)]^n`, `[I(3)]^p`; violated when the
/// determinant is negative beyond threshold.
pub fn check_third_order_minor<P: CorrelationProvider + ?Sized>(
    provider: &P,
    m: u32,
    n: u32,
    p: u32,
    points: &[usize; 3],
) -> Result<CriterionResult> {
    if m < 1 || n < 1 || p < 1 {
        return Err(Error::InvalidArgument(format!(
            "third-order minor exponents must be positive, got ({m}, {n}, {p})"
        )));
    }
    let [pt1, pt2, pt3] = *points;
    // Column monomials of the minor; the row side enters conjugated through
    // the combined-exponent rule.
    let monomials: [Vec<(usize, (u32, u32))>; 3] = [
        vec![(pt1, (0, m))],
        vec![(pt2, (n, 0))],
        vec![(pt3, (p, p))],
    ];
    let mut raw = CMatrix::zeros(3, 3);
    for r in 0..3 {
        for c in 0..3 {
            raw[(r, c)] = eval_gram(provider, &monomials[c], &monomials[r])?;
        }
    }
    let scale = max_abs(&raw);
    let det = determinant(&raw);
    if det.im.abs() > 1e-10 * 1.0_f64.max(scale.powi(3)) {
        return Err(Error::Numerical(format!(
            "third-order minor determinant should be real, got {det}"
        )));
    }
    let threshold = EPSILON_REL * 1.0_f64.max(scale).powi(3);
    Ok(CriterionResult {
        id: "third-order-minor".to_string(),
        lhs: det.re,
        rhs: 0.0,
        violated: det.re < -threshold,
        threshold,
        sense: Sense::Less,
        domain_flag: false,
        trivial: scale <= TRIVIAL_TOL,
        points: points.to_vec(),
        exponents: vec![m, n, p],
    })
}

/// General photon-antibunching test between two points: violated when the
/// cross intensity correlation exceeds the geometric mean of the local
/// second-order intensity moments,
/// `<oo I(1) I(2) oo> > sqrt(<: I(1)^2 :> <: I(2)^2 :>)`.
///
/// This is the higher-order intensity test at `(N, M, n, m) = (1, 1, 0, 1)`,
/// where the joint radicand factors collapse to one point each.
pub fn check_antibunching<P: CorrelationProvider + ?Sized>(
    provider: &P,
    point1: usize,
    point2: usize,
) -> Result<CriterionResult> {
    check_higher_order_intensity(provider, 1, 1, 0, 1, point1, point2).map(|mut result| {
        result.id = "antibunching".to_string();
        result.exponents.clear();
        result
    })
}

/// Higher-order generalization of the antibunching test: violated when
/// `<oo I(1)^N I(2)^M oo> >
///  sqrt(<oo I(1)^(2(N-n)) I(2)^(2(M-m)) oo> <oo I(1)^(2n) I(2)^(2m) oo>)`.
pub fn check_higher_order_intensity<P: CorrelationProvider + ?Sized>(
    provider: &P,
    n_big: u32,
    m_big: u32,
    n: u32,
    m: u32,
    point1: usize,
    point2: usize,
) -> Result<CriterionResult> {
    if n > n_big || m > m_big {
        return Err(Error::InvalidArgument(format!(
            "exponent split requires N >= n and M >= m, got N={n_big}, n={n}, M={m_big}, m={m}"
        )));
    }
    if n_big + m_big == 0 {
        return Err(Error::InvalidArgument(
            "intensity exponents must satisfy N + M >= 1".into(),
        ));
    }
    let intensity = |e1: u32, e2: u32| -> Vec<(usize, (u32, u32))> {
        vec![(point1, (e1, e1)), (point2, (e2, e2))]
    };
    let lhs = checked_real(
        eval_gram(provider, &intensity(n_big, m_big), &[])?,
        "cross intensity moment",
    )?;
    let left = checked_real(
        eval_gram(provider, &intensity(2 * (n_big - n), 2 * (m_big - m)), &[])?,
        "first radicand factor",
    )?;
    let right = checked_real(
        eval_gram(provider, &intensity(2 * n, 2 * m), &[])?,
        "second radicand factor",
    )?;
    Ok(sqrt_comparison_result(
        "higher-order-intensity",
        lhs,
        left * right,
        vec![point1, point2],
        vec![n_big, m_big, n, m],
    ))
}

/// Field-strength/intensity criterion family. Each variant fixes the shape
/// of the compared correlation functions; exponent data rides with the
/// variant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FieldIntensityCheck {
    /// `|<oo prod [E^-(i)]^(p_i) [I(i)]^(m_i) oo>| >
    ///  sqrt(<oo prod [I(i)]^(2 m_i + p_i) oo>)` with one `(m_i, p_i)` pair
    /// per point label.
    General { powers: Vec<(u32, u32)> },
    /// Lowest-order case `p_1 = m_2 = 1`:
    /// `|<oo E^-(1) I(2) oo>| > sqrt(<oo I(1) [I(2)]^2 oo>)`.
    Lowest,
    /// Same left side against factorized local moments:
    /// `|<oo E^-(1) I(2) oo>| > sqrt(<I(1)> <: [I(2)]^2 :>)`.
    Alt,
    /// Full field strength `E = E^- + E^+` at the first point:
    /// `|<oo E(1) I(2) oo>| > sqrt(<: E(1)^2 :> <: [I(2)]^2 :>)`; a negative
    /// normally ordered field variance short-circuits to nonclassical.
    FullField,
    /// Multipoint single-quantum form, field strength at the first `l`
    /// points: `|<oo E^-(1)..E^-(l) I(l+1)..I(k) oo>| >
    ///  sqrt(<oo I(1)..I(l) [I(l+1)]^2..[I(k)]^2 oo>)` with `1 < l < k`.
    Multipoint { l: usize },
}

impl FieldIntensityCheck {
    fn id(&self) -> &'static str {
        match self {
            FieldIntensityCheck::General { .. } => "field-intensity:general",
            FieldIntensityCheck::Lowest => "field-intensity:lowest",
            FieldIntensityCheck::Alt => "field-intensity:alt",
            FieldIntensityCheck::FullField => "field-intensity:full-field",
            FieldIntensityCheck::Multipoint { .. } => "field-intensity:multipoint",
        }
    }
}

/// Evaluate one member of the field-strength/intensity criterion family at
/// the given point labels.
pub fn check_field_intensity<P: CorrelationProvider + ?Sized>(
    provider: &P,
    check: &FieldIntensityCheck,
    points: &[usize],
) -> Result<CriterionResult> {
    match check {
        FieldIntensityCheck::General { powers } => {
            if powers.len() != points.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} exponent pairs for {} points",
                    powers.len(),
                    points.len()
                )));
            }
            if powers.iter().all(|&(m, p)| m + p == 0) {
                return Err(Error::InvalidArgument(
                    "at least one exponent pair must be nonzero".into(),
                ));
            }
            let lhs_ops: Vec<(usize, (u32, u32))> = points
                .iter()
                .zip(powers)
                .map(|(&pt, &(m, p))| (pt, (m + p, m)))
                .collect();
            let rhs_ops: Vec<(usize, (u32, u32))> = points
                .iter()
                .zip(powers)
                .map(|(&pt, &(m, p))| (pt, (2 * m + p, 2 * m + p)))
                .collect();
            let lhs = eval_gram(provider, &lhs_ops, &[])?.norm();
            let radicand = checked_real(eval_gram(provider, &rhs_ops, &[])?, "intensity radicand")?;
            let exponents = powers.iter().flat_map(|&(m, p)| [m, p]).collect();
            Ok(sqrt_comparison_result(
                check.id(),
                lhs,
                radicand,
                points.to_vec(),
                exponents,
            ))
        }
        FieldIntensityCheck::Lowest => {
            let [pt1, pt2] = two_points(points)?;
            let lhs = eval_gram(provider, &[(pt1, (1, 0)), (pt2, (1, 1))], &[])?.norm();
            let radicand = checked_real(
                eval_gram(provider, &[(pt1, (1, 1)), (pt2, (2, 2))], &[])?,
                "intensity radicand",
            )?;
            Ok(sqrt_comparison_result(
                check.id(),
                lhs,
                radicand,
                points.to_vec(),
                Vec::new(),
            ))
        }
        FieldIntensityCheck::Alt => {
            let [pt1, pt2] = two_points(points)?;
            let lhs = eval_gram(provider, &[(pt1, (1, 0)), (pt2, (1, 1))], &[])?.norm();
            let mean_intensity =
                checked_real(eval_gram(provider, &[(pt1, (1, 1))], &[])?, "mean intensity")?;
            let second = checked_real(
                eval_gram(provider, &[(pt2, (2, 2))], &[])?,
                "second-order intensity moment",
            )?;
            Ok(sqrt_comparison_result(
                check.id(),
                lhs,
                mean_intensity * second,
                points.to_vec(),
                Vec::new(),
            ))
        }
        FieldIntensityCheck::FullField => {
            let [pt1, pt2] = two_points(points)?;
            // E(1) = E^-(1) + E^+(1), expanded under the ordering symbol.
            let minus = eval_gram(provider, &[(pt1, (1, 0)), (pt2, (1, 1))], &[])?;
            let plus = eval_gram(provider, &[(pt1, (0, 1)), (pt2, (1, 1))], &[])?;
            let lhs = (minus + plus).norm();
            // <: E(1)^2 :> = <E^-^2> + 2 <E^- E^+> + <E^+^2>; may be negative.
            let field_sq = eval_gram(provider, &[(pt1, (2, 0))], &[])?
                + eval_gram(provider, &[(pt1, (1, 1))], &[])? * 2.0
                + eval_gram(provider, &[(pt1, (0, 2))], &[])?;
            let field_sq = checked_real(field_sq, "normally ordered field variance")?;
            let second = checked_real(
                eval_gram(provider, &[(pt2, (2, 2))], &[])?,
                "second-order intensity moment",
            )?;
            // A negative factor is conclusive on its own; keep the sign in
            // the radicand rather than letting two negatives cancel.
            let radicand = if field_sq < 0.0 {
                field_sq * second.abs()
            } else {
                field_sq * second
            };
            Ok(sqrt_comparison_result(
                check.id(),
                lhs,
                radicand,
                points.to_vec(),
                Vec::new(),
            ))
        }
        FieldIntensityCheck::Multipoint { l } => {
            let k = points.len();
            if !(1 < *l && *l < k) {
                return Err(Error::InvalidArgument(format!(
                    "multipoint split requires 1 < l < k, got l={l}, k={k}"
                )));
            }
            let lhs_ops: Vec<(usize, (u32, u32))> = points
                .iter()
                .enumerate()
                .map(|(i, &pt)| (pt, if i < *l { (1, 0) } else { (1, 1) }))
                .collect();
            let rhs_ops: Vec<(usize, (u32, u32))> = points
                .iter()
                .enumerate()
                .map(|(i, &pt)| (pt, if i < *l { (1, 1) } else { (2, 2) }))
                .collect();
            let lhs = eval_gram(provider, &lhs_ops, &[])?.norm();
            let radicand = checked_real(eval_gram(provider, &rhs_ops, &[])?, "intensity radicand")?;
            Ok(sqrt_comparison_result(
                check.id(),
                lhs,
                radicand,
                points.to_vec(),
                vec![*l as u32],
            ))
        }
    }
}

fn two_points(points: &[usize]) -> Result<[usize; 2]> {
    match points {
        &[a, b] => Ok([a, b]),
        _ => Err(Error::InvalidArgument(format!(
            "this variant takes exactly two point labels, got {}",
            points.len()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::StateProvider;
    use crate::state::{make_coherent, make_fock, make_squeezed, make_thermal, make_vacuum, ModeCutoff};
    use proptest::prelude::*;

    fn dim(n: usize) -> ModeCutoff {
        ModeCutoff::new(n).unwrap()
    }

    fn mi(pairs: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::new(pairs.to_vec()).unwrap()
    }

    fn single_mode_provider(state: crate::state::TruncatedState, points: usize) -> StateProvider {
        StateProvider::new(state, vec![0; points]).unwrap()
    }

    /// Provider with all moments scaled by `lambda^degree`, mimicking a
    /// uniform rescaling of the field prefactor.
    struct Scaled<P> {
        inner: P,
        lambda: f64,
    }

    impl<P: CorrelationProvider> CorrelationProvider for Scaled<P> {
        fn point_count(&self) -> usize {
            self.inner.point_count()
        }

        fn evaluate(&self, idx: &MultiIndex) -> Result<C64> {
            Ok(self.inner.evaluate(idx)? * self.lambda.powi(idx.degree() as i32))
        }
    }

    #[test]
    fn basis_enumeration_matches_counts() {
        let basis = enumerate_basis(1, 1);
        assert_eq!(
            basis.entries(),
            &[mi(&[(0, 0)]), mi(&[(1, 0)]), mi(&[(0, 1)])]
        );
        assert_eq!(enumerate_basis(1, 2).len(), 6);
        assert_eq!(enumerate_basis(2, 1).len(), 5);
    }

    #[test]
    fn basis_from_entries_validates() {
        assert!(OperatorBasis::from_entries(vec![mi(&[(0, 0)]), mi(&[(1, 1)])]).is_ok());
        // Missing the all-zero head.
        assert!(OperatorBasis::from_entries(vec![mi(&[(1, 0)])]).is_err());
        // Duplicate entry.
        assert!(
            OperatorBasis::from_entries(vec![mi(&[(0, 0)]), mi(&[(1, 0)]), mi(&[(1, 0)])]).is_err()
        );
        // Mixed point counts.
        assert!(OperatorBasis::from_entries(vec![mi(&[(0, 0)]), mi(&[(1, 0), (0, 1)])]).is_err());
        assert!(OperatorBasis::from_entries(vec![]).is_err());
    }

    #[test]
    fn fock_one_witness_matrix() {
        let provider = single_mode_provider(make_fock(1, dim(8)).unwrap(), 1);
        let basis = OperatorBasis::from_entries(vec![mi(&[(0, 0)]), mi(&[(1, 1)])]).unwrap();
        let w = build_witness_matrix(&provider, &basis).unwrap();
        assert!(w.hermiticity_deviation() < 1e-14);
        let m = w.matrix();
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!((m[(0, 1)].re - 1.0).abs() < 1e-12);
        assert!((m[(1, 0)].re - 1.0).abs() < 1e-12);
        assert!(m[(1, 1)].norm() < 1e-12);

        let report = principal_minors(&w, 2).unwrap();
        assert_eq!(report.verdict, Verdict::Nonclassical);
        let pair = report
            .minors
            .iter()
            .find(|entry| entry.subset == vec![0, 1])
            .unwrap();
        assert!((pair.determinant + 1.0).abs() < 1e-12);

        let golden = (1.0 - 5.0_f64.sqrt()) / 2.0;
        assert!((min_eigenvalue(&w) - golden).abs() < 1e-10);
    }

    #[test]
    fn vacuum_witness_matrix_is_rank_one() {
        let provider = single_mode_provider(make_vacuum(dim(8)), 1);
        let w = build_witness_matrix(&provider, &enumerate_basis(1, 1)).unwrap();
        let m = w.matrix();
        for r in 0..3 {
            for c in 0..3 {
                let expected = if r == 0 && c == 0 { 1.0 } else { 0.0 };
                assert!(
                    (m[(r, c)] - C64::new(expected, 0.0)).norm() < 1e-12,
                    "entry ({r},{c}) = {}",
                    m[(r, c)]
                );
            }
        }
        let report = principal_minors(&w, 3).unwrap();
        assert_eq!(report.verdict, Verdict::ClassicalConsistent);
    }

    #[test]
    fn coherent_witness_matrix_is_rank_one_gram() {
        let provider =
            single_mode_provider(make_coherent(C64::new(0.8, -0.4), dim(32)).unwrap(), 1);
        let w = build_witness_matrix(&provider, &enumerate_basis(1, 2)).unwrap();
        let report = principal_minors(&w, 2).unwrap();
        assert_eq!(report.verdict, Verdict::ClassicalConsistent);
        for entry in report.minors.iter().filter(|e| e.order == 2) {
            assert!(
                entry.determinant.abs() < 1e-9 * report.scale.powi(2),
                "subset {:?}: det = {}",
                entry.subset,
                entry.determinant
            );
        }
        assert!(min_eigenvalue(&w) > -1e-9 * report.scale);
    }

    #[test]
    fn thermal_witness_passes_up_to_degree_three() {
        let provider = single_mode_provider(make_thermal(2.0, dim(128)).unwrap(), 1);
        let w = build_witness_matrix(&provider, &enumerate_basis(1, 3)).unwrap();
        let report = principal_minors(&w, 3).unwrap();
        assert_eq!(report.verdict, Verdict::ClassicalConsistent);
        // Frozen oracle value for the smallest eigenvalue of this 10x10
        // moment matrix of a mean-occupation-2 geometric distribution.
        assert!((min_eigenvalue(&w) - 0.468_871_125_850_725_2).abs() < 1e-6);
    }

    #[test]
    fn squeezed_witness_is_negative_at_second_degree() {
        let provider = single_mode_provider(make_squeezed(0.5, 0.0, dim(64)).unwrap(), 1);
        let w = build_witness_matrix(&provider, &enumerate_basis(1, 2)).unwrap();
        let report = principal_minors(&w, 2).unwrap();
        assert_eq!(report.verdict, Verdict::Nonclassical);
        assert!(report.margin < -1e-3);
    }

    #[test]
    fn minor_guards() {
        let provider = single_mode_provider(make_vacuum(dim(8)), 1);
        let w = build_witness_matrix(&provider, &enumerate_basis(1, 1)).unwrap();
        assert!(principal_minors(&w, 0).is_err());
        assert!(principal_minors(&w, 4).is_err());
        assert!(matches!(
            principal_minors_with_limit(&w, 3, 2),
            Err(Error::SubsetLimitExceeded { .. })
        ));
    }

    #[test]
    fn second_order_fock_violation_and_coherent_equality() {
        let provider = single_mode_provider(make_fock(1, dim(8)).unwrap(), 1);
        let result =
            check_second_order(&provider, &mi(&[(0, 0)]), &mi(&[(1, 1)])).unwrap();
        assert!(result.violated);
        assert!((result.lhs - 1.0).abs() < 1e-12);
        assert!(result.rhs.abs() < 1e-12);

        let coherent = single_mode_provider(make_coherent(C64::new(0.7, 0.3), dim(32)).unwrap(), 1);
        let result = check_second_order(&coherent, &mi(&[(1, 0)]), &mi(&[(1, 1)])).unwrap();
        assert!(!result.violated);
        assert!((result.lhs - result.rhs).abs() < 1e-9 * result.rhs.max(1.0));

        // Degenerate all-zero pair: lhs = rhs = 1.
        let result = check_second_order(&provider, &mi(&[(0, 0)]), &mi(&[(0, 0)])).unwrap();
        assert!((result.lhs - 1.0).abs() < 1e-12);
        assert!((result.rhs - 1.0).abs() < 1e-12);
        assert!(!result.violated);
    }

    #[test]
    fn third_order_minor_examples() {
        let coherent = single_mode_provider(make_coherent(C64::new(0.6, 0.2), dim(32)).unwrap(), 3);
        let result = check_third_order_minor(&coherent, 1, 1, 1, &[0, 1, 2]).unwrap();
        assert!(result.lhs.abs() < 1e-9);
        assert!(!result.violated);

        let vacuum = single_mode_provider(make_vacuum(dim(8)), 3);
        let result = check_third_order_minor(&vacuum, 1, 1, 1, &[0, 1, 2]).unwrap();
        assert!(result.lhs.abs() < 1e-12);
        assert!(!result.violated);

        let thermal = single_mode_provider(make_thermal(1.0, dim(64)).unwrap(), 3);
        let result = check_third_order_minor(&thermal, 1, 1, 1, &[0, 1, 2]).unwrap();
        // Diagonal [[nbar, 0, 0], [0, nbar, 0], [0, 0, 2 nbar^2]].
        assert!((result.lhs - 2.0).abs() < 1e-5);
        assert!(!result.violated);

        assert!(check_third_order_minor(&vacuum, 0, 1, 1, &[0, 1, 2]).is_err());
    }

    #[test]
    fn antibunching_examples() {
        // fock(2), both points on the same mode: lhs = <adag^2 a^2> = 2,
        // rhs = sqrt(2 * 2) = 2, equality.
        let fock2 = single_mode_provider(make_fock(2, dim(16)).unwrap(), 2);
        let result = check_antibunching(&fock2, 0, 1).unwrap();
        assert!((result.lhs - 2.0).abs() < 1e-12);
        assert!((result.rhs - 2.0).abs() < 1e-12);
        assert!(!result.violated);

        let coherent = single_mode_provider(make_coherent(C64::new(0.9, 0.0), dim(32)).unwrap(), 2);
        let result = check_antibunching(&coherent, 0, 1).unwrap();
        assert!((result.lhs - result.rhs).abs() < 1e-9);
        assert!(!result.violated);

        let thermal = single_mode_provider(make_thermal(1.0, dim(64)).unwrap(), 2);
        let result = check_antibunching(&thermal, 0, 1).unwrap();
        assert!((result.lhs - 2.0).abs() < 1e-5);
        assert!((result.rhs - 2.0).abs() < 1e-5);
        assert!(!result.violated);
    }

    #[test]
    fn higher_order_intensity_examples() {
        // The (1, 1, 0, 1) split factorizes the radicand into the two local
        // second moments: equality for a number state.
        let fock2 = single_mode_provider(make_fock(2, dim(16)).unwrap(), 2);
        let result = check_higher_order_intensity(&fock2, 1, 1, 0, 1, 0, 1).unwrap();
        assert!((result.lhs - 2.0).abs() < 1e-12);
        assert!((result.rhs - 2.0).abs() < 1e-12);
        assert!(!result.violated);

        // The (1, 1, 0, 0) split keeps the joint fourth-order factor
        // <oo I(1)^2 I(2)^2 oo>, which vanishes on |2>, so this split
        // genuinely detects the number state's nonclassicality.
        let result = check_higher_order_intensity(&fock2, 1, 1, 0, 0, 0, 1).unwrap();
        assert!((result.lhs - 2.0).abs() < 1e-12);
        assert!(result.rhs.abs() < 1e-12);
        assert!(result.violated);

        let coherent =
            single_mode_provider(make_coherent(C64::new(0.5, 0.5), dim(32)).unwrap(), 2);
        for (n_big, m_big, n, m) in [(2, 1, 1, 0), (2, 2, 1, 1), (3, 1, 0, 1)] {
            let result =
                check_higher_order_intensity(&coherent, n_big, m_big, n, m, 0, 1).unwrap();
            assert!(
                (result.lhs - result.rhs).abs() < 1e-8 * result.rhs.max(1.0),
                "N={n_big} M={m_big} n={n} m={m}: {} vs {}",
                result.lhs,
                result.rhs
            );
            assert!(!result.violated);
        }

        assert!(check_higher_order_intensity(&coherent, 1, 1, 2, 0, 0, 1).is_err());
        assert!(check_higher_order_intensity(&coherent, 0, 0, 0, 0, 0, 1).is_err());
    }

    #[test]
    fn field_intensity_classical_equalities() {
        let coherent =
            single_mode_provider(make_coherent(C64::new(0.8, -0.3), dim(32)).unwrap(), 2);
        for check in [
            FieldIntensityCheck::Lowest,
            FieldIntensityCheck::Alt,
            FieldIntensityCheck::General {
                powers: vec![(0, 1), (1, 0)],
            },
        ] {
            let result = check_field_intensity(&coherent, &check, &[0, 1]).unwrap();
            assert!(
                (result.lhs - result.rhs).abs() < 1e-8 * result.rhs.max(1.0),
                "{}: {} vs {}",
                result.id,
                result.lhs,
                result.rhs
            );
            assert!(!result.violated, "{}", result.id);
        }

        // The general variant with (m, p) = ((0,1), (1,0)) reproduces the
        // lowest-order one exactly.
        let general = check_field_intensity(
            &coherent,
            &FieldIntensityCheck::General {
                powers: vec![(0, 1), (1, 0)],
            },
            &[0, 1],
        )
        .unwrap();
        let lowest = check_field_intensity(&coherent, &FieldIntensityCheck::Lowest, &[0, 1]).unwrap();
        assert_eq!(general.lhs.to_bits(), lowest.lhs.to_bits());
        assert_eq!(general.rhs.to_bits(), lowest.rhs.to_bits());
    }

    #[test]
    fn squeezed_full_field_sets_domain_flag() {
        let squeezed = single_mode_provider(make_squeezed(0.5, 0.0, dim(64)).unwrap(), 2);
        let result =
            check_field_intensity(&squeezed, &FieldIntensityCheck::FullField, &[0, 1]).unwrap();
        assert!(result.domain_flag);
        assert!(result.violated);
        assert!(result.rhs < 0.0);

        // Against the frozen normally ordered field variance (the second
        // intensity factor stays positive, so the radicand sign is its
        // sign): <: E^2 :> = -0.6321205588285573 at this cutoff.
        let field_sq = result.rhs / {
            // <: I(2)^2 :> of the squeezed mode.
            let provider = single_mode_provider(make_squeezed(0.5, 0.0, dim(64)).unwrap(), 1);
            provider.evaluate(&mi(&[(2, 2)])).unwrap().re
        };
        assert!((field_sq - (-0.632_120_558_828_557_3)).abs() < 1e-9);

        let coherent =
            single_mode_provider(make_coherent(C64::new(0.4, 0.4), dim(32)).unwrap(), 2);
        let result =
            check_field_intensity(&coherent, &FieldIntensityCheck::FullField, &[0, 1]).unwrap();
        assert!(!result.domain_flag);
        assert!(!result.violated);
    }

    #[test]
    fn multipoint_constraint_and_classical_case() {
        let coherent =
            single_mode_provider(make_coherent(C64::new(0.6, 0.1), dim(32)).unwrap(), 4);
        let result = check_field_intensity(
            &coherent,
            &FieldIntensityCheck::Multipoint { l: 2 },
            &[0, 1, 2, 3],
        )
        .unwrap();
        assert!((result.lhs - result.rhs).abs() < 1e-8 * result.rhs.max(1.0));
        assert!(!result.violated);

        for bad_l in [0, 1, 4, 5] {
            let err = check_field_intensity(
                &coherent,
                &FieldIntensityCheck::Multipoint { l: bad_l },
                &[0, 1, 2, 3],
            )
            .unwrap_err();
            assert!(err.to_string().contains("1 < l < k"), "{err}");
        }
    }

    #[test]
    fn point_labels_are_validated() {
        let provider = single_mode_provider(make_vacuum(dim(8)), 2);
        assert!(check_antibunching(&provider, 0, 2).is_err());
        assert!(check_third_order_minor(&provider, 1, 1, 1, &[0, 1, 2]).is_err());
    }

    proptest! {
        /// Minor scan and eigenvalue test agree on the PSD verdict for
        /// random Hermitian matrices that are not borderline.
        #[test]
        fn minors_and_eigenvalues_agree(
            seed in proptest::collection::vec(-1.0f64..1.0, 32),
        ) {
            let raw = CMatrix::from_fn(4, 4, |r, c| {
                C64::new(seed[2 * (4 * r + c)], seed[2 * (4 * r + c) + 1])
            });
            let basis = OperatorBasis::from_entries(vec![
                mi(&[(0, 0)]),
                mi(&[(1, 0)]),
                mi(&[(0, 1)]),
                mi(&[(1, 1)]),
            ]).unwrap();
            let w = WitnessMatrix::from_matrix(basis, raw).unwrap();
            let report = principal_minors(&w, 4).unwrap();
            prop_assume!(report.min_eigenvalue.abs() > 1e-6 * report.scale);
            let eig_negative = report.min_eigenvalue < -EPSILON_REL * report.scale;
            prop_assert_eq!(report.verdict == Verdict::Nonclassical, eig_negative);
        }

        /// Uniform moment rescaling preserves criterion verdicts.
        #[test]
        fn verdicts_are_scale_invariant(lambda in 0.5f64..2.0) {
            let base = single_mode_provider(make_fock(1, dim(8)).unwrap(), 2);
            let scaled = Scaled { inner: base, lambda };
            let plain = single_mode_provider(make_fock(1, dim(8)).unwrap(), 2);

            let a = check_antibunching(&scaled, 0, 1).unwrap();
            let b = check_antibunching(&plain, 0, 1).unwrap();
            prop_assert_eq!(a.violated, b.violated);
            prop_assert_eq!(a.trivial, b.trivial);

            let idx_a = mi(&[(0, 0), (0, 0)]);
            let idx_b = mi(&[(1, 1), (0, 0)]);
            let a = check_second_order(&scaled, &idx_a, &idx_b).unwrap();
            let b = check_second_order(&plain, &idx_a, &idx_b).unwrap();
            prop_assert_eq!(a.violated, b.violated);

            let w_scaled = build_witness_matrix(&scaled, &enumerate_basis(2, 1)).unwrap();
            let w_plain = build_witness_matrix(&plain, &enumerate_basis(2, 1)).unwrap();
            let r_scaled = principal_minors(&w_scaled, 3).unwrap();
            let r_plain = principal_minors(&w_plain, 3).unwrap();
            prop_assert_eq!(r_scaled.verdict, r_plain.verdict);
        }
    }
}
