//! Analysis configuration: a TOML document selecting one correlation
//! provider and a nonempty list of analysis tasks.
//!
//! # Schema
//!
//! ```toml
//! # Exactly one provider: a prepared field state ...
//! [provider.state]
//! cutoffs = [32]            # per-mode Fock dimensions, each >= 2
//! points = [0]              # optional: mode index per point label
//! modes = [{ kind = "coherent", alpha = [1.0, 0.0] }]
//! # ... or, instead of `modes`, a classical mixture:
//! # [[provider.state.mixture]]
//! # weight = 0.5
//! # modes = [{ kind = "thermal", nbar = 2.0 }]
//!
//! # ... or a driven two-level atom observed at space-time points:
//! # [provider.atom]
//! # rabi = 6.0
//! # detuning = 0.0          # optional, default 0
//! # gamma = 1.0             # optional, default 1
//! # points = [{ t = 0.0 }, { t = 0.5, r = 0.0 }]
//!
//! [[task]]
//! kind = "witness-matrix"   # moment-matrix positivity scan
//! max_degree = 3            # xor: basis = [[[0, 0]], [[1, 1]]]
//! minor_max_order = 2       # optional; 0 = eigenvalue scan only
//!
//! [[task]]
//! kind = "antibunching"     # named inequality criteria; see the enum
//! points = [0, 1]           # optional point labels
//!
//! [output]                  # optional; stdout when omitted
//! report = "report.json"
//! series = "sweep.csv"
//!
//! [tolerances]              # optional verdict-threshold overrides
//! epsilon_rel = 1e-9
//! trivial_abs = 1e-12
//! ```
//!
//! Parsing validates the whole document and reports *all* problems, each
//! located by its TOML path, rather than stopping at the first one.
//! Optional fields are materialized to their defaults, so re-serializing a
//! parsed config and parsing it again is idempotent.

use serde::{Deserialize, Serialize};
use std::fmt;
use toml::value::Table;
use toml::Value;

use crate::atom::{AtomParams, SpaceTimePoint};
use crate::state::{MixtureComponent, ModeStateSpec, StateSpec};

/// One validation problem, located by the TOML path of the offending key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigIssue {
    pub path: String,
    pub message: String,
}

impl ConfigIssue {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// A validated analysis request: one provider, at least one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub provider: ProviderSpec,
    #[serde(rename = "task")]
    pub tasks: Vec<TaskSpec>,
    #[serde(default, skip_serializing_if = "OutputSpec::is_empty")]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Tolerances::is_default")]
    pub tolerances: Tolerances,
}

/// The correlation provider backing all tasks of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderSpec {
    State(StateProviderSpec),
    Atom(AtomProviderSpec),
}

impl ProviderSpec {
    /// Number of point labels the tasks may address.
    pub fn point_count(&self) -> usize {
        match self {
            ProviderSpec::State(s) => s.points.len(),
            ProviderSpec::Atom(a) => a.points.len(),
        }
    }
}

/// Prepared multimode state plus the point-label-to-mode map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateProviderSpec {
    /// Per-mode Fock dimensions.
    pub cutoffs: Vec<usize>,
    /// Mode index observed by each point label.
    pub points: Vec<usize>,
    /// Single product state; exclusive with `mixture`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<ModeStateSpec>>,
    /// Classical mixture of product states; exclusive with `modes`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixture: Option<Vec<MixtureComponent>>,
}

impl StateProviderSpec {
    /// The normalized state specification (a pure product is a
    /// single-component mixture).
    pub fn state_spec(&self) -> StateSpec {
        match (&self.modes, &self.mixture) {
            (Some(modes), _) => StateSpec::product(modes.clone()),
            (None, Some(components)) => StateSpec {
                components: components.clone(),
            },
            (None, None) => unreachable!("validated: one of modes/mixture present"),
        }
    }
}

/// Driven-atom parameters plus the observation points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomProviderSpec {
    pub rabi: f64,
    pub detuning: f64,
    pub gamma: f64,
    pub points: Vec<SpaceTimePoint>,
}

impl AtomProviderSpec {
    pub fn params(&self) -> AtomParams {
        AtomParams {
            rabi: self.rabi,
            detuning: self.detuning,
            gamma: self.gamma,
        }
    }
}

/// Variant selector for the field-strength/intensity criterion family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldVariant {
    General,
    Lowest,
    Alt,
    FullField,
    Multipoint,
}

/// One analysis task. Point labels index the provider's points; exponent
/// pairs are `[n, m]` for normally ordered powers of conjugated and plain
/// field factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    /// Moment-matrix build, eigenvalue scan, and principal-minor scan.
    WitnessMatrix {
        /// Enumerated monomial basis up to this total degree.
        #[serde(skip_serializing_if = "Option::is_none")]
        max_degree: Option<u32>,
        /// Explicit basis: one exponent-pair list per entry; exclusive
        /// with `max_degree`.
        #[serde(skip_serializing_if = "Option::is_none")]
        basis: Option<Vec<Vec<[u32; 2]>>>,
        /// Largest principal-minor order to scan; 0 = eigenvalues only.
        minor_max_order: usize,
    },
    /// Cross-moment vs intensity-diagonal comparison for two multi-indices.
    SecondOrder {
        left: Vec<[u32; 2]>,
        right: Vec<[u32; 2]>,
    },
    /// 3x3 minor over the monomials `(0,m)`, `(n,0)`, `(p,p)`.
    ThirdOrderMinor {
        m: u32,
        n: u32,
        p: u32,
        points: Vec<usize>,
    },
    /// Two-point intensity cross-correlation vs local second moments.
    Antibunching { points: Vec<usize> },
    /// Joint intensity powers `N, M` against the split `(n, m)`.
    HigherOrderIntensity {
        #[serde(rename = "N")]
        n_full: u32,
        #[serde(rename = "M")]
        m_full: u32,
        n: u32,
        m: u32,
        points: Vec<usize>,
    },
    /// Field-strength/intensity criteria; see [`FieldVariant`].
    FieldIntensity {
        variant: FieldVariant,
        /// `[m_i, p_i]` per point; required by the `general` variant.
        #[serde(skip_serializing_if = "Option::is_none")]
        powers: Option<Vec<[u32; 2]>>,
        /// Field-strength point count for the `multipoint` variant.
        #[serde(skip_serializing_if = "Option::is_none")]
        l: Option<usize>,
        points: Vec<usize>,
    },
    /// Intensity autocorrelation sweep over `samples` delays in
    /// `[0, tau_max]`; atom provider only.
    G2Sweep { tau_max: f64, samples: usize },
}

impl TaskSpec {
    /// Stable kind tag, as written in config documents.
    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::WitnessMatrix { .. } => "witness-matrix",
            TaskSpec::SecondOrder { .. } => "second-order",
            TaskSpec::ThirdOrderMinor { .. } => "third-order-minor",
            TaskSpec::Antibunching { .. } => "antibunching",
            TaskSpec::HigherOrderIntensity { .. } => "higher-order-intensity",
            TaskSpec::FieldIntensity { .. } => "field-intensity",
            TaskSpec::G2Sweep { .. } => "g2-sweep",
        }
    }
}

/// Output file paths; omitted paths mean stdout.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<String>,
}

impl OutputSpec {
    pub fn is_empty(&self) -> bool {
        self.report.is_none() && self.series.is_none()
    }
}

/// Verdict-threshold overrides. These rescale how lhs/rhs comparisons are
/// classified; they do not change any computed moment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative inequality slack (default [`crate::witness::EPSILON_REL`]).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_rel: Option<f64>,
    /// Absolute both-sides-zero threshold for the `trivial` flag.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trivial_abs: Option<f64>,
}

impl Tolerances {
    pub fn is_default(&self) -> bool {
        self.epsilon_rel.is_none() && self.trivial_abs.is_none()
    }
}

/// Parse and validate a TOML config document, collecting every validation
/// problem instead of stopping at the first.
pub fn parse_config(text: &str) -> Result<AnalysisConfig, Vec<ConfigIssue>> {
    let value: Value = toml::from_str(text)
        .map_err(|e| vec![ConfigIssue::new("(document)", e.to_string().trim().to_string())])?;
    let root = value
        .as_table()
        .expect("a parsed TOML document is a table");

    let mut w = Walk::default();
    w.check_keys(root, "", &["provider", "task", "output", "tolerances"]);
    let scan = parse_provider(&mut w, root);
    // The point count is often known even when the provider spec has other
    // problems; keep validating task point labels against it.
    let atom_provider = scan.is_atom.unwrap_or(true);
    let tasks = parse_tasks(&mut w, root, scan.point_count, atom_provider);
    let output = parse_output(&mut w, root);
    let tolerances = parse_tolerances(&mut w, root);

    match (scan.spec, tasks) {
        (Some(provider), Some(tasks)) if w.issues.is_empty() => Ok(AnalysisConfig {
            provider,
            tasks,
            output,
            tolerances,
        }),
        _ => Err(w.issues)
    }
}

/// Partial result of provider parsing: enough shape information to keep
/// validating tasks even when the provider itself is invalid.
struct ProviderScan {
    spec: Option<ProviderSpec>,
    point_count: Option<usize>,
    is_atom: Option<bool>,
}

/// Issue accumulator with typed field readers; every reader records a
/// located issue and returns `None` on mismatch.
#[derive(Default)]
struct Walk {
    issues: Vec<ConfigIssue>,
}

fn sub(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl Walk {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        let path = path.into();
        let path = if path.is_empty() {
            "(document)".to_string()
        } else {
            path
        };
        self.issues.push(ConfigIssue::new(path, message));
    }

    fn check_keys(&mut self, table: &Table, path: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.push(sub(path, key), "unknown key");
            }
        }
    }

    fn table<'v>(&mut self, value: &'v Value, path: &str) -> Option<&'v Table> {
        match value.as_table() {
            Some(t) => Some(t),
            None => {
                self.push(path, "expected a table");
                None
            }
        }
    }

    fn array<'v>(&mut self, value: &'v Value, path: &str) -> Option<&'v [Value]> {
        match value.as_array() {
            Some(a) => Some(a.as_slice()),
            None => {
                self.push(path, "expected an array");
                None
            }
        }
    }

    fn f64(&mut self, value: &Value, path: &str) -> Option<f64> {
        match value {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.push(path, "expected a number");
                None
            }
        }
    }

    fn integer(&mut self, value: &Value, path: &str) -> Option<i64> {
        match value {
            Value::Integer(i) => Some(*i),
            _ => {
                self.push(path, "expected an integer");
                None
            }
        }
    }

    fn usize(&mut self, value: &Value, path: &str) -> Option<usize> {
        let i = self.integer(value, path)?;
        match usize::try_from(i) {
            Ok(u) => Some(u),
            Err(_) => {
                self.push(path, format!("expected a nonnegative integer, got {i}"));
                None
            }
        }
    }

    fn u32(&mut self, value: &Value, path: &str) -> Option<u32> {
        let i = self.integer(value, path)?;
        match u32::try_from(i) {
            Ok(u) => Some(u),
            Err(_) => {
                self.push(path, format!("expected a small nonnegative integer, got {i}"));
                None
            }
        }
    }

    fn string<'v>(&mut self, value: &'v Value, path: &str) -> Option<&'v str> {
        match value.as_str() {
            Some(s) => Some(s),
            None => {
                self.push(path, "expected a string");
                None
            }
        }
    }

    fn required<'v>(&mut self, table: &'v Table, path: &str, key: &str) -> Option<&'v Value> {
        match table.get(key) {
            Some(v) => Some(v),
            None => {
                self.push(path, format!("missing required key `{key}`"));
                None
            }
        }
    }

    /// `[a, b]` exponent pair.
    fn pair(&mut self, value: &Value, path: &str) -> Option<[u32; 2]> {
        let items = self.array(value, path)?;
        if items.len() != 2 {
            self.push(path, format!("expected a pair [n, m], got {} items", items.len()));
            return None;
        }
        Some([self.u32(&items[0], path)?, self.u32(&items[1], path)?])
    }

    fn pair_list(&mut self, value: &Value, path: &str) -> Option<Vec<[u32; 2]>> {
        let items = self.array(value, path)?;
        let mut pairs = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            pairs.push(self.pair(item, &format!("{path}[{i}]"))?);
        }
        Some(pairs)
    }

    fn point_labels(
        &mut self,
        value: &Value,
        path: &str,
        point_count: Option<usize>,
    ) -> Option<Vec<usize>> {
        let items = self.array(value, path)?;
        let mut labels = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            let item_path = format!("{path}[{i}]");
            let label = self.usize(item, &item_path)?;
            if let Some(k) = point_count {
                if label >= k {
                    self.push(
                        &item_path,
                        format!("point label {label} out of range (provider has {k} points)"),
                    );
                    return None;
                }
            }
            labels.push(label);
        }
        Some(labels)
    }
}

fn parse_provider(w: &mut Walk, root: &Table) -> ProviderScan {
    let unknown = ProviderScan {
        spec: None,
        point_count: None,
        is_atom: None,
    };
    let Some(value) = w.required(root, "", "provider") else {
        return unknown;
    };
    let Some(table) = w.table(value, "provider") else {
        return unknown;
    };
    w.check_keys(table, "provider", &["state", "atom"]);
    match (table.get("state"), table.get("atom")) {
        (Some(_), Some(_)) => {
            w.push(
                "provider",
                "exactly one provider required, but both `provider.state` and \
                 `provider.atom` are present",
            );
            unknown
        }
        (Some(state), None) => {
            let (spec, point_count) = parse_state_provider(w, state);
            ProviderScan {
                spec: spec.map(ProviderSpec::State),
                point_count,
                is_atom: Some(false),
            }
        }
        (None, Some(atom)) => {
            let (spec, point_count) = parse_atom_provider(w, atom);
            ProviderScan {
                spec: spec.map(ProviderSpec::Atom),
                point_count,
                is_atom: Some(true),
            }
        }
        (None, None) => {
            w.push(
                "provider",
                "missing provider: one of `provider.state` or `provider.atom` required",
            );
            unknown
        }
    }
}

fn parse_state_provider(w: &mut Walk, value: &Value) -> (Option<StateProviderSpec>, Option<usize>) {
    let path = "provider.state";
    let Some(table) = w.table(value, path) else {
        return (None, None);
    };
    w.check_keys(table, path, &["cutoffs", "points", "modes", "mixture"]);

    let cutoffs_path = sub(path, "cutoffs");
    let cutoffs = w
        .required(table, path, "cutoffs")
        .and_then(|v| w.array(v, &cutoffs_path))
        .map(|items| {
            let mut dims = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let item_path = format!("{cutoffs_path}[{i}]");
                match w.integer(item, &item_path) {
                    Some(dim) if dim >= 2 => dims.push(dim as usize),
                    Some(dim) => w.push(&item_path, format!("cutoff must be >= 2, got {dim}")),
                    None => {}
                }
            }
            (dims, items.len())
        });
    if let Some((_, 0)) = cutoffs {
        w.push(&cutoffs_path, "at least one mode cutoff required");
    }

    let mode_count = cutoffs.as_ref().map(|(_, n)| *n);
    let modes = table
        .get("modes")
        .map(|v| parse_mode_list(w, v, &sub(path, "modes"), mode_count));
    let mixture = table
        .get("mixture")
        .map(|v| parse_mixture(w, v, &sub(path, "mixture"), mode_count));
    match (&modes, &mixture) {
        (Some(_), Some(_)) => w.push(
            path,
            "exactly one state form required, but both `modes` and `mixture` are present",
        ),
        (None, None) => w.push(path, "missing state: one of `modes` or `mixture` required"),
        _ => {}
    }

    let points: Option<Vec<usize>> = match table.get("points") {
        Some(v) => {
            let points_path = sub(path, "points");
            match parse_mode_indices(w, v, &points_path, mode_count) {
                Some(labels) if labels.is_empty() => {
                    w.push(&points_path, "at least one point required");
                    None
                }
                other => other,
            }
        }
        // Default: one point per mode, in mode order.
        None => mode_count.map(|n| (0..n).collect()),
    };
    let point_count = points.as_ref().map(Vec::len);

    let spec = (|| {
        let (cutoffs, n) = cutoffs?;
        if cutoffs.len() != n {
            return None; // some cutoff entries were invalid
        }
        Some(StateProviderSpec {
            cutoffs,
            points: points?,
            modes: modes.flatten(),
            mixture: mixture.flatten(),
        })
    })();
    (spec, point_count)
}

fn parse_mode_indices(
    w: &mut Walk,
    value: &Value,
    path: &str,
    mode_count: Option<usize>,
) -> Option<Vec<usize>> {
    let items = w.array(value, path)?;
    let mut indices = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let index = w.usize(item, &item_path)?;
        if let Some(n) = mode_count {
            if index >= n {
                w.push(
                    &item_path,
                    format!("mode index {index} out of range (state has {n} modes)"),
                );
                return None;
            }
        }
        indices.push(index);
    }
    Some(indices)
}

fn parse_mode_list(
    w: &mut Walk,
    value: &Value,
    path: &str,
    mode_count: Option<usize>,
) -> Option<Vec<ModeStateSpec>> {
    let items = w.array(value, path)?;
    if let Some(n) = mode_count {
        if items.len() != n {
            w.push(
                path,
                format!("expected one mode state per cutoff ({n}), got {}", items.len()),
            );
        }
    }
    let mut modes = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        modes.push(parse_mode_state(w, item, &format!("{path}[{i}]"))?);
    }
    Some(modes)
}

fn parse_mode_state(w: &mut Walk, value: &Value, path: &str) -> Option<ModeStateSpec> {
    let table = w.table(value, path)?;
    let kind_value = w.required(table, path, "kind")?;
    let kind = w.string(kind_value, &sub(path, "kind"))?;
    match kind {
        "vacuum" => {
            w.check_keys(table, path, &["kind"]);
            Some(ModeStateSpec::Vacuum)
        }
        "fock" => {
            w.check_keys(table, path, &["kind", "n"]);
            let n = w.required(table, path, "n")?;
            let n = w.usize(n, &sub(path, "n"))?;
            Some(ModeStateSpec::Fock { n })
        }
        "coherent" => {
            w.check_keys(table, path, &["kind", "alpha"]);
            let alpha_path = sub(path, "alpha");
            let alpha = w.required(table, path, "alpha")?;
            let parts = w.array(alpha, &alpha_path)?;
            if parts.len() != 2 {
                w.push(&alpha_path, "expected alpha = [re, im]");
                return None;
            }
            let re = w.f64(&parts[0], &alpha_path)?;
            let im = w.f64(&parts[1], &alpha_path)?;
            if !re.is_finite() || !im.is_finite() {
                w.push(&alpha_path, "alpha must be finite");
                return None;
            }
            Some(ModeStateSpec::Coherent { alpha: [re, im] })
        }
        "thermal" => {
            w.check_keys(table, path, &["kind", "nbar"]);
            let nbar = w.required(table, path, "nbar")?;
            let nbar = w.f64(nbar, &sub(path, "nbar"))?;
            if !(nbar >= 0.0) {
                w.push(sub(path, "nbar"), format!("mean occupation must be >= 0, got {nbar}"));
                return None;
            }
            Some(ModeStateSpec::Thermal { nbar })
        }
        "squeezed" => {
            w.check_keys(table, path, &["kind", "r", "phi"]);
            let r = w.required(table, path, "r")?;
            let r = w.f64(r, &sub(path, "r"))?;
            if !r.is_finite() {
                w.push(sub(path, "r"), "squeezing parameter must be finite");
                return None;
            }
            let phi = match table.get("phi") {
                Some(v) => w.f64(v, &sub(path, "phi"))?,
                None => 0.0,
            };
            Some(ModeStateSpec::Squeezed { r, phi })
        }
        other => {
            w.push(
                sub(path, "kind"),
                format!(
                    "unknown state kind `{other}` (expected vacuum, fock, coherent, \
                     thermal, or squeezed)"
                ),
            );
            None
        }
    }
}

fn parse_mixture(
    w: &mut Walk,
    value: &Value,
    path: &str,
    mode_count: Option<usize>,
) -> Option<Vec<MixtureComponent>> {
    let items = w.array(value, path)?;
    if items.is_empty() {
        w.push(path, "a mixture needs at least one component");
        return None;
    }
    let mut components = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let item_path = format!("{path}[{i}]");
        let table = w.table(item, &item_path)?;
        w.check_keys(table, &item_path, &["weight", "modes"]);
        let weight = w.required(table, &item_path, "weight")?;
        let weight = w.f64(weight, &sub(&item_path, "weight"))?;
        if !(weight >= 0.0) {
            w.push(
                sub(&item_path, "weight"),
                format!("weight must be >= 0, got {weight}"),
            );
            return None;
        }
        let modes = w.required(table, &item_path, "modes")?;
        let modes = parse_mode_list(w, modes, &sub(&item_path, "modes"), mode_count)?;
        components.push(MixtureComponent { weight, modes });
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        w.push(path, format!("mixture weights must sum to 1, got {total}"));
        return None;
    }
    Some(components)
}

fn parse_atom_provider(w: &mut Walk, value: &Value) -> (Option<AtomProviderSpec>, Option<usize>) {
    let path = "provider.atom";
    let Some(table) = w.table(value, path) else {
        return (None, None);
    };
    w.check_keys(table, path, &["rabi", "detuning", "gamma", "points"]);

    let rabi = w
        .required(table, path, "rabi")
        .and_then(|v| w.f64(v, &sub(path, "rabi")));
    let detuning = match table.get("detuning") {
        Some(v) => w.f64(v, &sub(path, "detuning")),
        None => Some(0.0),
    };
    let gamma = match table.get("gamma") {
        Some(v) => w.f64(v, &sub(path, "gamma")),
        None => Some(1.0),
    };

    let points_path = sub(path, "points");
    let points = w
        .required(table, path, "points")
        .and_then(|v| w.array(v, &points_path))
        .and_then(|items| {
            if items.is_empty() {
                w.push(&points_path, "at least one space-time point required");
                return None;
            }
            let mut points = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let item_path = format!("{points_path}[{i}]");
                let Some(point_table) = w.table(item, &item_path) else {
                    continue;
                };
                w.check_keys(point_table, &item_path, &["t", "r"]);
                let t = w
                    .required(point_table, &item_path, "t")
                    .and_then(|v| w.f64(v, &sub(&item_path, "t")));
                let r = match point_table.get("r") {
                    Some(v) => w.f64(v, &sub(&item_path, "r")),
                    None => Some(0.0),
                };
                if let (Some(t), Some(r)) = (t, r) {
                    match SpaceTimePoint::new(t, r) {
                        Ok(point) => points.push(point),
                        Err(e) => w.push(&item_path, e.to_string()),
                    }
                }
            }
            // Count only fully parsed point lists.
            (points.len() == items.len()).then_some(points)
        });
    let point_count = points.as_ref().map(Vec::len);

    let params_ok = match (rabi, detuning, gamma) {
        (Some(rabi), Some(detuning), Some(gamma)) => {
            match AtomParams::new(rabi, detuning, gamma) {
                Ok(_) => Some((rabi, detuning, gamma)),
                Err(e) => {
                    w.push(path, e.to_string());
                    None
                }
            }
        }
        _ => None,
    };
    let spec = match (params_ok, points) {
        (Some((rabi, detuning, gamma)), Some(points)) => Some(AtomProviderSpec {
            rabi,
            detuning,
            gamma,
            points,
        }),
        _ => None,
    };
    (spec, point_count)
}

fn default_points(n: usize, point_count: Option<usize>) -> Vec<usize> {
    match point_count {
        // Providers with enough points: the first n labels; single-point
        // providers: the same point n times (single-mode criteria).
        Some(k) if k >= n => (0..n).collect(),
        _ => vec![0; n],
    }
}

fn parse_tasks(
    w: &mut Walk,
    root: &Table,
    point_count: Option<usize>,
    atom_provider: bool,
) -> Option<Vec<TaskSpec>> {
    let value = w.required(root, "", "task")?;
    let items = w.array(value, "task")?;
    if items.is_empty() {
        w.push("task", "at least one task required");
        return None;
    }
    let mut tasks = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("task[{i}]");
        if let Some(task) = parse_task(w, item, &path, point_count, atom_provider) {
            tasks.push(task);
        }
    }
    let sweeps = tasks
        .iter()
        .filter(|t| matches!(t, TaskSpec::G2Sweep { .. }))
        .count();
    if sweeps > 1 {
        w.push("task", format!("at most one g2-sweep task allowed, got {sweeps}"));
    }
    if tasks.len() != items.len() {
        return None;
    }
    Some(tasks)
}

fn parse_task(
    w: &mut Walk,
    value: &Value,
    path: &str,
    point_count: Option<usize>,
    atom_provider: bool,
) -> Option<TaskSpec> {
    let table = w.table(value, path)?;
    let kind_value = w.required(table, path, "kind")?;
    let kind = w.string(kind_value, &sub(path, "kind"))?;

    // Exponent lists that must name every provider point.
    let full_index = |w: &mut Walk, key: &str| -> Option<Vec<[u32; 2]>> {
        let item_path = sub(path, key);
        let pairs = w.required(table, path, key).and_then(|v| w.pair_list(v, &item_path))?;
        if let Some(k) = point_count {
            if pairs.len() != k {
                w.push(
                    &item_path,
                    format!("expected one [n, m] pair per provider point ({k}), got {}", pairs.len()),
                );
                return None;
            }
        }
        Some(pairs)
    };

    let labels = |w: &mut Walk, table: &Table, n: usize| -> Option<Vec<usize>> {
        match table.get("points") {
            Some(v) => {
                let item_path = sub(path, "points");
                let labels = w.point_labels(v, &item_path, point_count)?;
                if labels.len() != n {
                    w.push(&item_path, format!("expected {n} point labels, got {}", labels.len()));
                    return None;
                }
                Some(labels)
            }
            None => {
                if let Some(k) = point_count {
                    if k > n && k > 1 {
                        w.push(
                            path,
                            format!(
                                "`points` required: the provider has {k} points and the task uses {n}"
                            ),
                        );
                        return None;
                    }
                }
                Some(default_points(n, point_count))
            }
        }
    };

    match kind {
        "witness-matrix" => {
            w.check_keys(table, path, &["kind", "max_degree", "basis", "minor_max_order"]);
            let max_degree = match table.get("max_degree") {
                Some(v) => {
                    let d = w.u32(v, &sub(path, "max_degree"))?;
                    if d == 0 {
                        w.push(sub(path, "max_degree"), "basis degree must be >= 1");
                        return None;
                    }
                    Some(d)
                }
                None => None,
            };
            let basis = match table.get("basis") {
                Some(v) => {
                    let basis_path = sub(path, "basis");
                    let entries = w.array(v, &basis_path)?;
                    let mut parsed = Vec::with_capacity(entries.len());
                    for (i, entry) in entries.iter().enumerate() {
                        let entry_path = format!("{basis_path}[{i}]");
                        let pairs = w.pair_list(entry, &entry_path)?;
                        if let Some(k) = point_count {
                            if pairs.len() != k {
                                w.push(
                                    &entry_path,
                                    format!(
                                        "expected one [n, m] pair per provider point ({k}), got {}",
                                        pairs.len()
                                    ),
                                );
                                return None;
                            }
                        }
                        parsed.push(pairs);
                    }
                    Some(parsed)
                }
                None => None,
            };
            match (&max_degree, &basis) {
                (Some(_), Some(_)) => {
                    w.push(path, "exactly one of `max_degree` and `basis` allowed, got both");
                    return None;
                }
                (None, None) => {
                    w.push(path, "one of `max_degree` or `basis` required");
                    return None;
                }
                _ => {}
            }
            if let Some(entries) = &basis {
                if let Err(e) = basis_from_pairs(entries) {
                    w.push(sub(path, "basis"), e.to_string());
                    return None;
                }
            }
            let minor_max_order = match table.get("minor_max_order") {
                Some(v) => w.usize(v, &sub(path, "minor_max_order"))?,
                None => 2,
            };
            Some(TaskSpec::WitnessMatrix {
                max_degree,
                basis,
                minor_max_order,
            })
        }
        "second-order" => {
            w.check_keys(table, path, &["kind", "left", "right"]);
            let left = full_index(w, "left");
            let right = full_index(w, "right");
            Some(TaskSpec::SecondOrder {
                left: left?,
                right: right?,
            })
        }
        "third-order-minor" => {
            w.check_keys(table, path, &["kind", "m", "n", "p", "points"]);
            let mut exponent = |key: &str| -> Option<u32> {
                let v = w.required(table, path, key)?;
                let e = w.u32(v, &sub(path, key))?;
                if e == 0 {
                    w.push(sub(path, key), "exponent must be >= 1");
                    return None;
                }
                Some(e)
            };
            let (m, n, p) = (exponent("m"), exponent("n"), exponent("p"));
            let points = labels(w, table, 3)?;
            Some(TaskSpec::ThirdOrderMinor {
                m: m?,
                n: n?,
                p: p?,
                points,
            })
        }
        "antibunching" => {
            w.check_keys(table, path, &["kind", "points"]);
            let points = labels(w, table, 2)?;
            Some(TaskSpec::Antibunching { points })
        }
        "higher-order-intensity" => {
            w.check_keys(table, path, &["kind", "N", "M", "n", "m", "points"]);
            let mut exponent = |key: &str| -> Option<u32> {
                let v = w.required(table, path, key)?;
                w.u32(v, &sub(path, key))
            };
            let n_full = exponent("N");
            let m_full = exponent("M");
            let n = exponent("n");
            let m = exponent("m");
            let points = labels(w, table, 2)?;
            let (n_full, m_full, n, m) = (n_full?, m_full?, n?, m?);
            if n > n_full || m > m_full {
                w.push(path, format!("split exponents need n <= N and m <= M, got N={n_full}, n={n}, M={m_full}, m={m}"));
                return None;
            }
            if n_full + m_full == 0 {
                w.push(path, "intensity exponents must satisfy N + M >= 1");
                return None;
            }
            Some(TaskSpec::HigherOrderIntensity {
                n_full,
                m_full,
                n,
                m,
                points,
            })
        }
        "field-intensity" => {
            w.check_keys(table, path, &["kind", "variant", "powers", "l", "points"]);
            let variant_value = w.required(table, path, "variant")?;
            let variant_path = sub(path, "variant");
            let variant = match w.string(variant_value, &variant_path)? {
                "general" => FieldVariant::General,
                "lowest" => FieldVariant::Lowest,
                "alt" => FieldVariant::Alt,
                "full-field" => FieldVariant::FullField,
                "multipoint" => FieldVariant::Multipoint,
                other => {
                    w.push(
                        &variant_path,
                        format!(
                            "unknown variant `{other}` (expected general, lowest, alt, \
                             full-field, or multipoint)"
                        ),
                    );
                    return None;
                }
            };
            let powers = match table.get("powers") {
                Some(v) => Some(w.pair_list(v, &sub(path, "powers"))?),
                None => None,
            };
            let l = match table.get("l") {
                Some(v) => Some(w.usize(v, &sub(path, "l"))?),
                None => None,
            };
            if powers.is_some() && variant != FieldVariant::General {
                w.push(sub(path, "powers"), "`powers` applies only to the general variant");
                return None;
            }
            if l.is_some() && variant != FieldVariant::Multipoint {
                w.push(sub(path, "l"), "`l` applies only to the multipoint variant");
                return None;
            }
            let points = match variant {
                FieldVariant::General => {
                    let Some(powers) = &powers else {
                        w.push(path, "the general variant requires `powers`");
                        return None;
                    };
                    if powers.iter().all(|&[m, p]| m + p == 0) {
                        w.push(sub(path, "powers"), "at least one exponent pair must be nonzero");
                        return None;
                    }
                    labels(w, table, powers.len())?
                }
                FieldVariant::Lowest | FieldVariant::Alt | FieldVariant::FullField => {
                    labels(w, table, 2)?
                }
                FieldVariant::Multipoint => {
                    let Some(l) = l else {
                        w.push(path, "the multipoint variant requires `l`");
                        return None;
                    };
                    let points = match table.get("points") {
                        Some(v) => w.point_labels(v, &sub(path, "points"), point_count)?,
                        None => default_points(point_count.unwrap_or(0), point_count),
                    };
                    if !(1 < l && l < points.len()) {
                        w.push(
                            path,
                            format!(
                                "the multipoint variant needs 1 < l < k, got l={l} with k={}",
                                points.len()
                            ),
                        );
                        return None;
                    }
                    points
                }
            };
            Some(TaskSpec::FieldIntensity {
                variant,
                powers,
                l,
                points,
            })
        }
        "g2-sweep" => {
            w.check_keys(table, path, &["kind", "tau_max", "samples"]);
            if !atom_provider && point_count.is_some() {
                w.push(path, "g2-sweep requires the atom provider");
                return None;
            }
            let tau_max = w
                .required(table, path, "tau_max")
                .and_then(|v| w.f64(v, &sub(path, "tau_max")));
            let samples = w
                .required(table, path, "samples")
                .and_then(|v| w.usize(v, &sub(path, "samples")));
            let (tau_max, samples) = (tau_max?, samples?);
            if !(tau_max > 0.0 && tau_max.is_finite()) {
                w.push(sub(path, "tau_max"), format!("must be a positive delay, got {tau_max}"));
                return None;
            }
            if samples < 2 {
                w.push(sub(path, "samples"), format!("at least 2 samples required, got {samples}"));
                return None;
            }
            Some(TaskSpec::G2Sweep { tau_max, samples })
        }
        other => {
            w.push(
                sub(path, "kind"),
                format!(
                    "unknown task kind `{other}` (expected witness-matrix, second-order, \
                     third-order-minor, antibunching, higher-order-intensity, \
                     field-intensity, or g2-sweep)"
                ),
            );
            None
        }
    }
}

/// Convert an explicit basis from config pairs into the witness type,
/// validating distinctness and the leading all-zero entry.
pub fn basis_from_pairs(entries: &[Vec<[u32; 2]>]) -> crate::Result<crate::witness::OperatorBasis> {
    let mut indices = Vec::with_capacity(entries.len());
    for pairs in entries {
        indices.push(crate::moments::MultiIndex::new(
            pairs.iter().map(|&[n, m]| (n, m)).collect(),
        )?);
    }
    crate::witness::OperatorBasis::from_entries(indices)
}

fn parse_output(w: &mut Walk, root: &Table) -> OutputSpec {
    let Some(value) = root.get("output") else {
        return OutputSpec::default();
    };
    let Some(table) = w.table(value, "output") else {
        return OutputSpec::default();
    };
    w.check_keys(table, "output", &["report", "series"]);
    let mut field = |key: &str| -> Option<String> {
        table
            .get(key)
            .and_then(|v| w.string(v, &sub("output", key)).map(str::to_string))
    };
    OutputSpec {
        report: field("report"),
        series: field("series"),
    }
}

fn parse_tolerances(w: &mut Walk, root: &Table) -> Tolerances {
    let Some(value) = root.get("tolerances") else {
        return Tolerances::default();
    };
    let Some(table) = w.table(value, "tolerances") else {
        return Tolerances::default();
    };
    w.check_keys(table, "tolerances", &["epsilon_rel", "trivial_abs"]);
    let mut field = |key: &str| -> Option<f64> {
        let v = table.get(key)?;
        let path = sub("tolerances", key);
        let x = w.f64(v, &path)?;
        if !(x > 0.0 && x.is_finite()) {
            w.push(&path, format!("tolerance must be a positive number, got {x}"));
            return None;
        }
        Some(x)
    };
    Tolerances {
        epsilon_rel: field("epsilon_rel"),
        trivial_abs: field("trivial_abs"),
    }
}
