//! Normally ordered moments of truncated Fock states.
//!
//! For prepared (static) states each correlation point is a mode and time
//! ordering is vacuous, so the correlation functions consumed by the witness
//! module reduce to `<prod_i (a_i^dag)^{n_i} prod_i a_i^{m_i}>`. The positive
//! field-frequency part at point `i` is identified with the annihilator of
//! mode `i` with unit prefactor; all implemented inequalities are homogeneous
//! in that prefactor, so verdicts do not depend on it.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;

use crate::error::Error;
use crate::linalg::C64;
use crate::state::TruncatedState;
use crate::witness::CorrelationProvider;
use crate::Result;

/// Exponent pairs `(n_i, m_i)` of one normally ordered correlation:
/// `n_i` powers of the conjugated (creation-like) factor and `m_i` powers of
/// the plain (annihilation-like) factor at point `i`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex {
    pairs: Vec<(u32, u32)>,
}

impl MultiIndex {
    pub fn new(pairs: Vec<(u32, u32)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument(
                "a multi-index needs at least one point".into(),
            ));
        }
        Ok(Self { pairs })
    }

    /// Number of points `k`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    /// Total degree `sum(n_i + m_i)`.
    pub fn degree(&self) -> u32 {
        self.pairs.iter().map(|&(n, m)| n + m).sum()
    }

    /// The index with every pair swapped, whose moment is the complex
    /// conjugate of this one's.
    pub fn conjugate(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(n, m)| (m, n)).collect(),
        }
    }

    /// Graded-lexicographic order: total degree ascending, then the
    /// flattened exponent tuple `(n_1, m_1, n_2, m_2, ...)` descending, so
    /// that within one degree class `(1,0)` precedes `(0,1)`.
    pub fn graded_lex_cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.pairs.cmp(&self.pairs))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (n, m)) in self.pairs.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "({n},{m})")?;
        }
        Ok(())
    }
}

/// All multi-indices over `k` points with total degree at most `max_total`,
/// in graded-lexicographic order.
pub(crate) fn all_indices(k: usize, max_total: u32) -> Vec<MultiIndex> {
    fn extend(slots: usize, budget: u32, prefix: &mut Vec<(u32, u32)>, out: &mut Vec<MultiIndex>) {
        if slots == 0 {
            out.push(MultiIndex {
                pairs: prefix.clone(),
            });
            return;
        }
        for n in 0..=budget {
            for m in 0..=(budget - n) {
                prefix.push((n, m));
                extend(slots - 1, budget - n - m, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(k, max_total, &mut Vec::with_capacity(k), &mut out);
    out.sort_by(|a, b| a.graded_lex_cmp(b));
    out
}

/// Row index and matrix element of the single nonzero entry in column `col`
/// of the truncated one-mode operator `(a^dag)^n a^m`, or `None` when the
/// column is annihilated or the result leaves the truncated space.
fn ladder_column(dim: usize, n: u32, m: u32, col: usize) -> Option<(usize, f64)> {
    let n = n as usize;
    let m = m as usize;
    if col < m {
        return None;
    }
    let base = col - m;
    let row = base + n;
    if row >= dim {
        return None;
    }
    let mut factor = 1.0;
    for j in (base + 1)..=col {
        factor *= (j as f64).sqrt();
    }
    for j in (base + 1)..=row {
        factor *= (j as f64).sqrt();
    }
    Some((row, factor))
}

/// Trace of `rho` against the Kronecker product of per-mode shifted-diagonal
/// ladder operators, without forming any product-space matrix.
fn raw_moment(state: &TruncatedState, idx: &MultiIndex) -> C64 {
    let dims: Vec<usize> = state.cutoffs().iter().map(|c| c.dim()).collect();
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let rho = state.rho();
    let side = state.dimension();
    let mut acc = Complex::new(0.0, 0.0);
    'columns: for col in 0..side {
        let mut row = 0usize;
        let mut factor = 1.0;
        for (i, (&dim, &stride)) in dims.iter().zip(&strides).enumerate() {
            let digit = (col / stride) % dim;
            let (n, m) = idx.pairs[i];
            match ladder_column(dim, n, m, digit) {
                Some((r, f)) => {
                    row += r * stride;
                    factor *= f;
                }
                None => continue 'columns,
            }
        }
        acc += rho[(col, row)] * factor;
    }
    acc
}

fn check_preconditions(state: &TruncatedState, idx: &MultiIndex) -> Result<()> {
    if idx.len() != state.mode_count() {
        return Err(Error::InvalidArgument(format!(
            "multi-index has {} points but the state has {} modes",
            idx.len(),
            state.mode_count()
        )));
    }
    for (i, (&(n, m), cutoff)) in idx.pairs.iter().zip(state.cutoffs()).enumerate() {
        let order = (n + m) as usize;
        if 2 * order > cutoff.dim() {
            return Err(Error::TruncationRisk {
                what: format!(
                    "moment exponent n+m = {order} at mode {i} (cutoff {})",
                    cutoff.dim()
                ),
                required_dim: 2 * order,
            });
        }
    }
    Ok(())
}

/// `<prod_i (a_i^dag)^{n_i} prod_i a_i^{m_i}>` for the given state.
///
/// Conjugation symmetry is exact by construction: each conjugate pair of
/// indices is routed through one canonical representative, so the swapped
/// index returns the bitwise complex conjugate.
pub fn normally_ordered_moment(state: &TruncatedState, idx: &MultiIndex) -> Result<C64> {
    check_preconditions(state, idx)?;
    let swapped = idx.conjugate();
    if swapped < *idx {
        Ok(raw_moment(state, &swapped).conj())
    } else {
        Ok(raw_moment(state, idx))
    }
}

/// Batch of moments, keyed by multi-index.
#[derive(Clone, Debug, Default)]
pub struct MomentTable {
    entries: BTreeMap<MultiIndex, C64>,
}

impl MomentTable {
    pub fn get(&self, idx: &MultiIndex) -> Option<C64> {
        self.entries.get(idx).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &C64)> {
        self.entries.iter()
    }
}

/// Every moment a witness matrix of basis degree `max_degree` can request:
/// all multi-indices of total degree at most `2 * max_degree`. Conjugate
/// pairs are computed once and mirrored, so the table is exactly symmetric.
pub fn moment_table(state: &TruncatedState, max_degree: u32) -> Result<MomentTable> {
    if max_degree == 0 {
        return Err(Error::InvalidArgument(
            "moment table degree must be positive".into(),
        ));
    }
    let mut table = MomentTable::default();
    for idx in all_indices(state.mode_count(), 2 * max_degree) {
        if table.entries.contains_key(&idx) {
            continue;
        }
        let value = normally_ordered_moment(state, &idx)?;
        let swapped = idx.conjugate();
        if swapped != idx {
            table.entries.insert(swapped, value.conj());
        }
        table.entries.insert(idx, value);
    }
    Ok(table)
}

/// Correlation provider backed by a prepared state, with an explicit map
/// from correlation points to modes (several points may share a mode).
#[derive(Clone, Debug)]
pub struct StateProvider {
    state: TruncatedState,
    point_modes: Vec<usize>,
}

impl StateProvider {
    pub fn new(state: TruncatedState, point_modes: Vec<usize>) -> Result<Self> {
        if point_modes.is_empty() {
            return Err(Error::InvalidArgument(
                "a provider needs at least one point".into(),
            ));
        }
        for (i, &mode) in point_modes.iter().enumerate() {
            if mode >= state.mode_count() {
                return Err(Error::InvalidArgument(format!(
                    "point {i} maps to mode {mode} but the state has {} modes",
                    state.mode_count()
                )));
            }
        }
        Ok(Self { state, point_modes })
    }

    /// One point per mode, in mode order.
    pub fn over_modes(state: TruncatedState) -> Self {
        let point_modes = (0..state.mode_count()).collect();
        Self { state, point_modes }
    }

    pub fn state(&self) -> &TruncatedState {
        &self.state
    }

    pub fn point_modes(&self) -> &[usize] {
        &self.point_modes
    }
}

impl CorrelationProvider for StateProvider {
    fn point_count(&self) -> usize {
        self.point_modes.len()
    }

    fn evaluate(&self, idx: &MultiIndex) -> Result<C64> {
        if idx.len() != self.point_modes.len() {
            return Err(Error::InvalidArgument(format!(
                "multi-index has {} points but the provider has {}",
                idx.len(),
                self.point_modes.len()
            )));
        }
        let mut folded = vec![(0u32, 0u32); self.state.mode_count()];
        for (&(n, m), &mode) in idx.pairs().iter().zip(&self.point_modes) {
            folded[mode].0 += n;
            folded[mode].1 += m;
        }
        normally_ordered_moment(&self.state, &MultiIndex::new(folded)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{
        make_coherent, make_fock, make_squeezed, make_thermal, make_vacuum, mix, tensor,
        ModeCutoff,
    };
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dim(n: usize) -> ModeCutoff {
        ModeCutoff::new(n).unwrap()
    }

    fn mi(pairs: &[(u32, u32)]) -> MultiIndex {
        MultiIndex::new(pairs.to_vec()).unwrap()
    }

    /// Dense-operator oracle: explicit ladder matrix powers and a Kronecker
    /// product, traced against rho. Independent of the shifted-diagonal path.
    fn dense_moment_oracle(state: &TruncatedState, idx: &MultiIndex) -> C64 {
        let mut op: Option<DMatrix<C64>> = None;
        for (&(n, m), cutoff) in idx.pairs().iter().zip(state.cutoffs()) {
            let d = cutoff.dim();
            let mut a = DMatrix::<C64>::zeros(d, d);
            for k in 1..d {
                a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
            }
            let mut factor = DMatrix::<C64>::identity(d, d);
            for _ in 0..n {
                factor = &factor * a.adjoint();
            }
            for _ in 0..m {
                factor = &factor * &a;
            }
            op = Some(match op {
                None => factor,
                Some(prev) => prev.kronecker(&factor),
            });
        }
        (state.rho() * op.unwrap()).trace()
    }

    #[test]
    fn index_ordering_is_graded_lexicographic() {
        let got = all_indices(1, 3);
        let expected: Vec<MultiIndex> = [
            (0, 0),
            (1, 0),
            (0, 1),
            (2, 0),
            (1, 1),
            (0, 2),
            (3, 0),
            (2, 1),
            (1, 2),
            (0, 3),
        ]
        .iter()
        .map(|&(n, m)| mi(&[(n, m)]))
        .collect();
        assert_eq!(got, expected);

        let two_point = all_indices(2, 1);
        assert_eq!(two_point.len(), 5);
        assert_eq!(two_point[0], mi(&[(0, 0), (0, 0)]));
        assert_eq!(two_point[1], mi(&[(1, 0), (0, 0)]));
        assert_eq!(two_point[4], mi(&[(0, 0), (0, 1)]));
    }

    #[test]
    fn coherent_number_moment() {
        let state = make_coherent(C64::new(0.5, 0.0), dim(16)).unwrap();
        let value = normally_ordered_moment(&state, &mi(&[(1, 1)])).unwrap();
        assert!((value.re - 0.25).abs() < 1e-10, "got {value}");
        assert!(value.im.abs() < 1e-12);
    }

    #[test]
    fn fock_one_is_annihilated_twice() {
        let state = make_fock(1, dim(8)).unwrap();
        let value = normally_ordered_moment(&state, &mi(&[(2, 2)])).unwrap();
        assert_eq!(value, C64::new(0.0, 0.0));
    }

    #[test]
    fn thermal_factorial_moments() {
        let state = make_thermal(1.0, dim(64)).unwrap();
        let value = normally_ordered_moment(&state, &mi(&[(2, 2)])).unwrap();
        assert!((value.re - 2.0).abs() < 1e-5, "got {value}");

        // Direct photon-number sums at a generous cutoff: <(adag)^j a^j> =
        // sum_n p_n n!/(n-j)! = j! nbar^j for a geometric distribution.
        let state = make_thermal(2.0, dim(128)).unwrap();
        for j in 1..=3u32 {
            let value = normally_ordered_moment(&state, &mi(&[(j, j)])).unwrap();
            let mut expected = 0.0;
            for n in 0..128usize {
                let p = state.rho()[(n, n)].re;
                if n >= j as usize {
                    let falling: f64 = ((n - j as usize + 1)..=n).map(|k| k as f64).product();
                    expected += p * falling;
                }
            }
            assert!(
                (value.re - expected).abs() < 1e-8,
                "j={j}: {} vs {expected}",
                value.re
            );
        }
    }

    #[test]
    fn squeezed_anomalous_moment() {
        let r = 0.5_f64;
        let state = make_squeezed(r, 0.0, dim(32)).unwrap();
        let value = normally_ordered_moment(&state, &mi(&[(0, 2)])).unwrap();
        assert!(
            (value.re + r.sinh() * r.cosh()).abs() < 1e-9,
            "got {value}, expected {}",
            -r.sinh() * r.cosh()
        );
        assert!(value.im.abs() < 1e-12);
    }

    #[test]
    fn multimode_coherent_factorization() {
        let alpha = [C64::new(0.7, 0.2), C64::new(-0.3, 0.4)];
        let state = tensor(&[
            make_coherent(alpha[0], dim(16)).unwrap(),
            make_coherent(alpha[1], dim(16)).unwrap(),
        ])
        .unwrap();
        for idx in all_indices(2, 4) {
            let value = normally_ordered_moment(&state, &idx).unwrap();
            let mut expected = C64::new(1.0, 0.0);
            for (&(n, m), &a) in idx.pairs().iter().zip(&alpha) {
                expected *= a.conj().powu(n) * a.powu(m);
            }
            assert!(
                (value - expected).norm() < 1e-9,
                "idx {idx}: {value} vs {expected}"
            );
        }
    }

    #[test]
    fn agrees_with_dense_operator_oracle() {
        let state = tensor(&[
            make_squeezed(0.4, 0.7, dim(24)).unwrap(),
            make_coherent(C64::new(0.8, -0.5), dim(12)).unwrap(),
        ])
        .unwrap();
        for idx in all_indices(2, 4) {
            let fast = normally_ordered_moment(&state, &idx).unwrap();
            let dense = dense_moment_oracle(&state, &idx);
            assert!(
                (fast - dense).norm() < 1e-12,
                "idx {idx}: {fast} vs {dense}"
            );
        }
    }

    #[test]
    fn conjugation_symmetry_is_bitwise() {
        let state = tensor(&[
            make_squeezed(0.5, 1.1, dim(24)).unwrap(),
            make_coherent(C64::new(0.6, 0.3), dim(12)).unwrap(),
        ])
        .unwrap();
        for idx in all_indices(2, 4) {
            let value = normally_ordered_moment(&state, &idx).unwrap();
            let swapped = normally_ordered_moment(&state, &idx.conjugate()).unwrap();
            assert_eq!(value.re, swapped.re, "idx {idx}");
            assert_eq!(value.im, -swapped.im, "idx {idx}");
        }
    }

    #[test]
    fn preconditions_are_enforced() {
        let state = make_vacuum(dim(8));
        assert!(matches!(
            normally_ordered_moment(&state, &mi(&[(0, 0), (0, 0)])),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            normally_ordered_moment(&state, &mi(&[(3, 2)])),
            Err(Error::TruncationRisk { .. })
        ));
        assert!(MultiIndex::new(vec![]).is_err());
    }

    #[test]
    fn vacuum_table_is_a_point_mass() {
        let table = moment_table(&make_vacuum(dim(16)), 2).unwrap();
        assert_eq!(table.len(), all_indices(1, 4).len());
        for (idx, value) in table.iter() {
            let expected = if idx.degree() == 0 { 1.0 } else { 0.0 };
            assert_eq!(*value, C64::new(expected, 0.0), "idx {idx}");
        }
    }

    #[test]
    fn fock_one_table_entries() {
        let table = moment_table(&make_fock(1, dim(8)).unwrap(), 1).unwrap();
        assert_eq!(table.get(&mi(&[(0, 0)])), Some(C64::new(1.0, 0.0)));
        assert_eq!(table.get(&mi(&[(1, 0)])), Some(C64::new(0.0, 0.0)));
        assert_eq!(table.get(&mi(&[(0, 1)])), Some(C64::new(0.0, 0.0)));
        assert_eq!(table.get(&mi(&[(1, 1)])), Some(C64::new(1.0, 0.0)));
        // Complete through degree 2: the pump/drain pairs are present too.
        assert_eq!(table.get(&mi(&[(2, 0)])), Some(C64::new(0.0, 0.0)));
        assert_eq!(table.len(), 6);
    }

    #[test]
    fn coherent_table_factorizes() {
        let alpha = C64::new(0.4, -0.6);
        let state = make_coherent(alpha, dim(24)).unwrap();
        let table = moment_table(&state, 2).unwrap();
        for (idx, value) in table.iter() {
            let (n, m) = idx.pairs()[0];
            let expected = alpha.conj().powu(n) * alpha.powu(m);
            assert!(
                (value - expected).norm() < 1e-9,
                "idx {idx}: {value} vs {expected}"
            );
        }
    }

    #[test]
    fn table_conjugation_symmetry_is_bitwise() {
        let state = make_squeezed(0.3, 0.9, dim(32)).unwrap();
        let table = moment_table(&state, 3).unwrap();
        for (idx, value) in table.iter() {
            let swapped = table.get(&idx.conjugate()).unwrap();
            assert_eq!(value.re, swapped.re);
            assert_eq!(value.im, -swapped.im);
        }
        assert!(moment_table(&state, 0).is_err());
    }

    #[test]
    fn provider_folds_points_onto_modes() {
        let state = make_fock(2, dim(12)).unwrap();
        let provider = StateProvider::new(state.clone(), vec![0, 0]).unwrap();
        // Two points on one mode: (1,0)&(1,1) folds to (2,1) on the mode.
        let folded = provider.evaluate(&mi(&[(1, 0), (1, 1)])).unwrap();
        let direct = normally_ordered_moment(&state, &mi(&[(2, 1)])).unwrap();
        assert_eq!(folded, direct);
        // <(adag)^2 a^2> on |2> = 2.
        let intensity = provider.evaluate(&mi(&[(1, 1), (1, 1)])).unwrap();
        assert!((intensity.re - 2.0).abs() < 1e-12);

        assert!(StateProvider::new(state.clone(), vec![0, 1]).is_err());
        assert!(StateProvider::new(state, vec![]).is_err());
    }

    #[test]
    fn provider_all_zero_index_is_unity() {
        let state = tensor(&[
            make_thermal(0.7, dim(16)).unwrap(),
            make_coherent(C64::new(0.2, 0.1), dim(8)).unwrap(),
        ])
        .unwrap();
        let provider = StateProvider::over_modes(state);
        assert_eq!(provider.point_count(), 2);
        let unit = provider.evaluate(&mi(&[(0, 0), (0, 0)])).unwrap();
        assert!((unit - C64::new(1.0, 0.0)).norm() < 1e-12);
    }

    proptest! {
        /// Diagonal states: the production path must match the direct
        /// photon-number sum oracle for intensity-like moments.
        #[test]
        fn diagonal_states_match_number_sums(
            raw in proptest::collection::vec(0.01f64..1.0, 16),
            j in 1u32..=4,
        ) {
            let total: f64 = raw.iter().sum();
            let mut rho = crate::linalg::CMatrix::zeros(16, 16);
            for (n, w) in raw.iter().enumerate() {
                rho[(n, n)] = C64::new(w / total, 0.0);
            }
            let state = TruncatedState::from_parts(vec![dim(16)], rho).unwrap();
            let value = normally_ordered_moment(&state, &mi(&[(j, j)])).unwrap();
            let mut expected = 0.0;
            for (n, w) in raw.iter().enumerate() {
                if n >= j as usize {
                    let falling: f64 = ((n - j as usize + 1)..=n).map(|k| k as f64).product();
                    expected += (w / total) * falling;
                }
            }
            prop_assert!((value.re - expected).abs() < 1e-8 * expected.max(1.0));
            prop_assert!(value.im.abs() < 1e-12);
        }

        /// Classical mixtures of coherent states keep exact conjugation
        /// symmetry through the canonical-representative routing.
        #[test]
        fn mixture_conjugation_symmetry(
            re1 in -0.8f64..0.8, im1 in -0.8f64..0.8,
            re2 in -0.8f64..0.8, im2 in -0.8f64..0.8,
            w in 0.05f64..0.95,
            n in 0u32..=3, m in 0u32..=3,
        ) {
            let a = make_coherent(C64::new(re1, im1), dim(16)).unwrap();
            let b = make_coherent(C64::new(re2, im2), dim(16)).unwrap();
            let state = mix(&[(w, a), (1.0 - w, b)]).unwrap();
            let idx = mi(&[(n, m)]);
            let value = normally_ordered_moment(&state, &idx).unwrap();
            let swapped = normally_ordered_moment(&state, &idx.conjugate()).unwrap();
            prop_assert_eq!(value.re, swapped.re);
            prop_assert_eq!(value.im, -swapped.im);
        }
    }
}
