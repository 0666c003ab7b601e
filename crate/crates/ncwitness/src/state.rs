//! Truncated Fock-space representations of single- and multimode radiation
//! states: the static correlation providers.
//!
//! Every state is a density matrix over the product basis
//! `|n_1> ⊗ ... ⊗ |n_k>` with per-mode photon-number cutoffs. Constructors
//! renormalize after truncation so the [`TruncatedState`] invariants
//! (Hermitian, unit trace, positive semidefinite) hold exactly, and refuse
//! parameter regimes whose truncation error would silently dominate the
//! moments computed downstream.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{hermitian_deviation, hermitian_min_eigenvalue, CMatrix, C64};
use crate::Result;

/// Number of Fock states retained for one mode (`|0> .. |dim-1>`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModeCutoff {
    dim: usize,
}

impl ModeCutoff {
    /// A cutoff must keep at least `|0>` and `|1>`.
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "mode cutoff must be at least 2, got {dim}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Density matrix of a multimode field in a truncated Fock basis.
///
/// The matrix side is the product of the per-mode dimensions; basis index
/// arithmetic follows the Kronecker product in mode-list order (the first
/// mode owns the largest stride).
#[derive(Clone, Debug)]
pub struct TruncatedState {
    cutoffs: Vec<ModeCutoff>,
    rho: CMatrix,
}

/// Validation report for the [`TruncatedState`] invariants.
#[derive(Clone, Copy, Debug)]
pub struct StateDiagnostics {
    pub hermiticity_deviation: f64,
    pub trace_deviation: f64,
    pub min_eigenvalue: f64,
}

impl StateDiagnostics {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const EIGENVALUE_TOL: f64 = 1e-9;

    pub fn pass(&self) -> bool {
        self.hermiticity_deviation <= Self::HERMITICITY_TOL
            && self.trace_deviation <= Self::TRACE_TOL
            && self.min_eigenvalue >= -Self::EIGENVALUE_TOL
    }
}

impl TruncatedState {
    /// Wrap a raw density matrix (callers are responsible for invariants;
    /// [`validate`] reports on them).
    pub fn from_parts(cutoffs: Vec<ModeCutoff>, rho: CMatrix) -> Result<Self> {
        let side: usize = cutoffs.iter().map(|c| c.dim()).product();
        if cutoffs.is_empty() {
            return Err(Error::InvalidArgument("state needs at least one mode".into()));
        }
        if rho.nrows() != side || rho.ncols() != side {
            return Err(Error::DimensionMismatch(format!(
                "density matrix side {} does not match mode dimensions (product {})",
                rho.nrows(),
                side
            )));
        }
        Ok(Self { cutoffs, rho })
    }

    pub fn mode_count(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[ModeCutoff] {
        &self.cutoffs
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    /// Matrix side, `∏ dims`.
    pub fn dimension(&self) -> usize {
        self.rho.nrows()
    }
}

fn pure_state(cutoff: ModeCutoff, amplitudes: &[C64]) -> TruncatedState {
    let dim = cutoff.dim();
    debug_assert_eq!(amplitudes.len(), dim);
    let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let rho = CMatrix::from_fn(dim, dim, |i, j| {
        amplitudes[i] * amplitudes[j].conj() / Complex::new(norm * norm, 0.0)
    });
    TruncatedState {
        cutoffs: vec![cutoff],
        rho,
    }
}

/// Photon-number state `|n>`.
pub fn make_fock(n: usize, cutoff: ModeCutoff) -> Result<TruncatedState> {
    if n >= cutoff.dim() {
        return Err(Error::CutoffExceeded {
            what: format!("Fock state |{n}>"),
            required: n,
            dim: cutoff.dim(),
        });
    }
    let mut rho = CMatrix::zeros(cutoff.dim(), cutoff.dim());
    rho[(n, n)] = Complex::new(1.0, 0.0);
    Ok(TruncatedState {
        cutoffs: vec![cutoff],
        rho,
    })
}

/// Vacuum state `|0>`.
pub fn make_vacuum(cutoff: ModeCutoff) -> TruncatedState {
    make_fock(0, cutoff).expect("cutoff >= 2 always holds |0>")
}

/// Coherent state `|alpha>`, truncated and renormalized.
///
/// Refused when `|alpha|^2 > dim/4`: beyond that the discarded Poisson tail
/// is no longer negligible for the moment orders used downstream.
pub fn make_coherent(alpha: C64, cutoff: ModeCutoff) -> Result<TruncatedState> {
    let dim = cutoff.dim();
    let mean = alpha.norm_sqr();
    if mean > dim as f64 / 4.0 {
        return Err(Error::TruncationRisk {
            what: format!("coherent state with |alpha|^2 = {mean:.3}"),
            required_dim: (4.0 * mean).ceil() as usize,
        });
    }
    // c_n = alpha^n / sqrt(n!), built by recursion to avoid overflow.
    let mut amplitudes = vec![Complex::new(0.0, 0.0); dim];
    amplitudes[0] = Complex::new(1.0, 0.0);
    for n in 1..dim {
        amplitudes[n] = amplitudes[n - 1] * alpha / Complex::new((n as f64).sqrt(), 0.0);
    }
    Ok(pure_state(cutoff, &amplitudes))
}

/// Thermal state with mean occupation `nbar`: diagonal geometric
/// distribution `p_n ∝ (nbar/(1+nbar))^n`, renormalized after truncation.
pub fn make_thermal(nbar: f64, cutoff: ModeCutoff) -> Result<TruncatedState> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "thermal occupation must be nonnegative, got {nbar}"
        )));
    }
    let dim = cutoff.dim();
    let ratio = nbar / (1.0 + nbar);
    let mut weights = Vec::with_capacity(dim);
    let mut w = 1.0;
    for _ in 0..dim {
        weights.push(w);
        w *= ratio;
    }
    let total: f64 = weights.iter().sum();
    let mut rho = CMatrix::zeros(dim, dim);
    for (n, w) in weights.iter().enumerate() {
        rho[(n, n)] = Complex::new(w / total, 0.0);
    }
    Ok(TruncatedState {
        cutoffs: vec![cutoff],
        rho,
    })
}

/// Squeezed vacuum `S(xi)|0>` with `xi = r e^{i phi}` in the convention
/// `S(xi) = exp[(conj(xi) a^2 - xi adag^2)/2]`, so that at `phi = 0` the
/// anomalous moment is `<a^2> = -sinh(r) cosh(r)`.
///
/// Amplitudes follow the even-Fock recursion
/// `c_{n+1} = -e^{i phi} tanh(r) sqrt(n/(n+1)) c_{n-1}`, renormalized after
/// truncation. Refused when `sinh^2(r) > dim/8`.
pub fn make_squeezed(r: f64, phi: f64, cutoff: ModeCutoff) -> Result<TruncatedState> {
    if !(r >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "squeeze magnitude must be nonnegative, got {r}"
        )));
    }
    let dim = cutoff.dim();
    let mean = r.sinh().powi(2);
    if mean > dim as f64 / 8.0 {
        return Err(Error::TruncationRisk {
            what: format!("squeezed state with sinh^2(r) = {mean:.3}"),
            required_dim: (8.0 * mean).ceil() as usize,
        });
    }
    let factor = -Complex::from_polar(r.tanh(), phi);
    let mut amplitudes = vec![Complex::new(0.0, 0.0); dim];
    amplitudes[0] = Complex::new(1.0, 0.0);
    for n in 1..dim - 1 {
        amplitudes[n + 1] =
            factor * amplitudes[n - 1] * Complex::new((n as f64 / (n as f64 + 1.0)).sqrt(), 0.0);
    }
    Ok(pure_state(cutoff, &amplitudes))
}

/// Kronecker product of states in list order (first factor owns the most
/// significant index digit).
pub fn tensor(states: &[TruncatedState]) -> Result<TruncatedState> {
    let first = states
        .first()
        .ok_or_else(|| Error::InvalidArgument("tensor of an empty state list".into()))?;
    let mut cutoffs = first.cutoffs.clone();
    let mut rho = first.rho.clone();
    for state in &states[1..] {
        cutoffs.extend_from_slice(&state.cutoffs);
        rho = rho.kronecker(&state.rho);
    }
    Ok(TruncatedState { cutoffs, rho })
}

/// Convex mixture `sum_i w_i rho_i` of states over identical mode layouts.
/// Weights must be nonnegative and sum to 1 within 1e-12.
pub fn mix(components: &[(f64, TruncatedState)]) -> Result<TruncatedState> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidArgument("mixture of an empty component list".into()))?;
    let cutoffs = first.1.cutoffs.clone();
    let mut total = 0.0;
    for (w, state) in components {
        if *w < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "mixture weight must be nonnegative, got {w}"
            )));
        }
        if state.cutoffs != cutoffs {
            return Err(Error::DimensionMismatch(
                "mixture components must share the same mode cutoffs".into(),
            ));
        }
        total += w;
    }
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "mixture weights must sum to 1 within 1e-12, got {total}"
        )));
    }
    let side = first.1.dimension();
    let mut rho = CMatrix::zeros(side, side);
    for (w, state) in components {
        rho += &state.rho * Complex::new(*w, 0.0);
    }
    Ok(TruncatedState { cutoffs, rho })
}

/// Report the [`TruncatedState`] invariants; never fails.
pub fn validate(state: &TruncatedState) -> StateDiagnostics {
    let trace = state.rho.trace();
    StateDiagnostics {
        hermiticity_deviation: hermitian_deviation(&state.rho),
        trace_deviation: (trace - Complex::new(1.0, 0.0)).norm(),
        min_eigenvalue: hermitian_min_eigenvalue(&state.rho),
    }
}

/// Input language for prepared states: one primitive per mode, optionally
/// mixed classically with weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeStateSpec {
    Vacuum,
    Fock { n: usize },
    /// `alpha = [re, im]`.
    Coherent { alpha: [f64; 2] },
    Thermal { nbar: f64 },
    Squeezed { r: f64, phi: f64 },
}

impl ModeStateSpec {
    fn build(&self, cutoff: ModeCutoff) -> Result<TruncatedState> {
        match self {
            ModeStateSpec::Vacuum => Ok(make_vacuum(cutoff)),
            ModeStateSpec::Fock { n } => make_fock(*n, cutoff),
            ModeStateSpec::Coherent { alpha } => {
                make_coherent(Complex::new(alpha[0], alpha[1]), cutoff)
            }
            ModeStateSpec::Thermal { nbar } => make_thermal(*nbar, cutoff),
            ModeStateSpec::Squeezed { r, phi } => make_squeezed(*r, *phi, cutoff),
        }
    }
}

/// One product term of a [`StateSpec`] mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub modes: Vec<ModeStateSpec>,
}

/// Prepared-state specification: a classical mixture of per-mode products.
/// A pure product is a one-component mixture with weight 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub components: Vec<MixtureComponent>,
}

impl StateSpec {
    /// A single product state (weight-1 mixture).
    pub fn product(modes: Vec<ModeStateSpec>) -> Self {
        Self {
            components: vec![MixtureComponent { weight: 1.0, modes }],
        }
    }

    /// Realize the specification at the given per-mode cutoffs.
    pub fn build(&self, cutoffs: &[ModeCutoff]) -> Result<TruncatedState> {
        if self.components.is_empty() {
            return Err(Error::InvalidArgument(
                "state spec needs at least one component".into(),
            ));
        }
        let mut built = Vec::with_capacity(self.components.len());
        for component in &self.components {
            if component.modes.len() != cutoffs.len() {
                return Err(Error::DimensionMismatch(format!(
                    "component has {} modes but {} cutoffs were given",
                    component.modes.len(),
                    cutoffs.len()
                )));
            }
            let factors: Vec<TruncatedState> = component
                .modes
                .iter()
                .zip(cutoffs)
                .map(|(mode, &cutoff)| mode.build(cutoff))
                .collect::<Result<_>>()?;
            built.push((component.weight, tensor(&factors)?));
        }
        mix(&built)
    }
}
