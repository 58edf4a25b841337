//! Core domain types shared across the crate, plus their TSV file formats.
//!
//! The conventions are fixed here once so every module agrees on them:
//!
//! * A test statistic `T_j` is N(xi_j, 1); hypothesis j is null when
//!   `xi_j = 0`. One-sided p-values are `upper_tail(T_j)`, two-sided ones
//!   are the tail of `T_j^2` under a central chi-square with 1 df.
//! * A weight vector is nonnegative with mean exactly one, so the total
//!   threshold budget `sum_j alpha w_j / m = alpha` is conserved.
//! * Files are TSV with a header line; numbers are written with 17
//!   significant digits so values survive a save/load round trip.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::distfn;
use crate::error::{Error, Result};

/// Tolerance for the mean-one weight budget check.
pub const WEIGHT_BUDGET_TOL: f64 = 1e-9;

/// Tolerance for `|p - tail(T)|` in [`consistency_check`].
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Format a float with 17 significant digits (lossless for f64).
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

// --- Probability ----------------------------------------------------------

/// A probability, kept honest at construction: finite and in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!(
                "probability must lie in [0, 1], got {value}"
            )))
        }
    }

    /// For internal call sites that have already established the range.
    pub(crate) fn new_unchecked(value: f64) -> Self {
        debug_assert!(value.is_finite() && (0.0..=1.0).contains(&value));
        Probability(value)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// --- Effect configurations and mixtures ------------------------------------

/// Whether p-values are taken from the upper tail of T or from |T|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

/// The true means of all m test statistics.
#[derive(Debug, Clone)]
pub struct EffectConfiguration {
    means: Vec<f64>,
    sidedness: Sidedness,
}

impl EffectConfiguration {
    pub fn new(means: Vec<f64>, sidedness: Sidedness) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::contract("effect configuration needs m >= 1 means"));
        }
        if let Some(bad) = means.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("effect mean must be finite, got {bad}")));
        }
        Ok(EffectConfiguration { means, sidedness })
    }

    pub fn one_sided(means: Vec<f64>) -> Result<Self> {
        Self::new(means, Sidedness::OneSided)
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sidedness(&self) -> Sidedness {
        self.sidedness
    }

    pub fn m(&self) -> usize {
        self.means.len()
    }

    /// Is hypothesis j a true alternative? One-sided configurations treat
    /// only positive means as alternatives; two-sided ones any nonzero mean.
    pub fn is_alternative(&self, j: usize) -> bool {
        match self.sidedness {
            Sidedness::OneSided => self.means[j] > 0.0,
            Sidedness::TwoSided => self.means[j] != 0.0,
        }
    }

    pub fn m1(&self) -> usize {
        (0..self.m()).filter(|&j| self.is_alternative(j)).count()
    }

    pub fn m0(&self) -> usize {
        self.m() - self.m1()
    }
}

/// One atom of a discrete effect-size distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureAtom {
    pub mass: f64,
    pub location: f64,
}

/// A discrete mixing distribution over effect sizes: masses are
/// nonnegative and sum to one.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    atoms: Vec<MixtureAtom>,
}

impl MixtureSpec {
    pub fn new(atoms: Vec<MixtureAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::contract("mixture needs at least one atom"));
        }
        for a in &atoms {
            if !a.mass.is_finite() || a.mass < 0.0 {
                return Err(Error::domain(format!(
                    "mixture mass must be finite and >= 0, got {}",
                    a.mass
                )));
            }
            if !a.location.is_finite() {
                return Err(Error::domain(format!(
                    "mixture location must be finite, got {}",
                    a.location
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!(
                "mixture masses must sum to 1 (got {total})"
            )));
        }
        Ok(MixtureSpec { atoms })
    }

    /// Convenience for the ubiquitous null/alternative two-point mixture
    /// `(1 - a) delta_0 + a delta_xi`.
    pub fn two_point(a: f64, xi: f64) -> Result<Self> {
        MixtureSpec::new(vec![
            MixtureAtom { mass: 1.0 - a, location: 0.0 },
            MixtureAtom { mass: a, location: xi },
        ])
    }

    pub fn atoms(&self) -> &[MixtureAtom] {
        &self.atoms
    }

    /// Kolmogorov-Smirnov distance between two mixing distributions
    /// (sup-norm of the CDF difference, evaluated at all atom locations).
    pub fn ks_distance(&self, other: &MixtureSpec) -> f64 {
        let mut points: Vec<f64> = self
            .atoms
            .iter()
            .chain(other.atoms.iter())
            .map(|a| a.location)
            .collect();
        points.sort_by(f64::total_cmp);
        let cdf = |spec: &MixtureSpec, t: f64| -> f64 {
            spec.atoms.iter().filter(|a| a.location <= t).map(|a| a.mass).sum()
        };
        points
            .iter()
            .map(|&t| (cdf(self, t) - cdf(other, t)).abs())
            .fold(0.0, f64::max)
    }
}

// --- Weight vectors ---------------------------------------------------------

/// Nonnegative weights over m hypotheses with mean one.
///
/// Construction either demands the budget already holds (`new`) or
/// renormalizes any nonnegative vector to mean one and reports the scale
/// factor that was applied (`normalized`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::validate_entries(&weights)?;
        let mean = weights.iter().sum::<f64>() / weights.len() as f64;
        if (mean - 1.0).abs() > WEIGHT_BUDGET_TOL {
            return Err(Error::contract(format!(
                "weights must average to 1 (got mean {mean})"
            )));
        }
        Ok(WeightVector { weights })
    }

    /// Rescale a raw nonnegative vector to mean one. Returns the vector and
    /// the scale factor that was applied (output = scale * input).
    pub fn normalized(raw: Vec<f64>) -> Result<(Self, f64)> {
        Self::validate_entries(&raw)?;
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        if mean <= 0.0 {
            return Err(Error::contract(
                "cannot normalize an all-zero weight vector",
            ));
        }
        let scale = 1.0 / mean;
        let weights = raw.into_iter().map(|w| w * scale).collect();
        Ok((WeightVector { weights }, scale))
    }

    pub fn unit(m: usize) -> Self {
        WeightVector { weights: vec![1.0; m] }
    }

    fn validate_entries(weights: &[f64]) -> Result<()> {
        if weights.is_empty() {
            return Err(Error::contract("weight vector must be nonempty"));
        }
        if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::domain(format!(
                "weights must be finite and >= 0, got {bad}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }
}

// --- Batteries ----------------------------------------------------------------

/// A battery of m tests: ids, p-values, and optionally the underlying
/// statistics and group labels.
#[derive(Debug, Clone)]
pub struct TestBattery {
    ids: Vec<String>,
    p_values: Vec<Probability>,
    statistics: Option<Vec<f64>>,
    group_labels: Option<Vec<usize>>,
}

impl TestBattery {
    pub fn new(
        ids: Vec<String>,
        p_values: Vec<f64>,
        statistics: Option<Vec<f64>>,
        group_labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        let m = ids.len();
        if m == 0 {
            return Err(Error::contract("battery must contain at least one test"));
        }
        if p_values.len() != m {
            return Err(Error::contract(format!(
                "battery has {m} ids but {} p-values",
                p_values.len()
            )));
        }
        if let Some(s) = &statistics {
            if s.len() != m {
                return Err(Error::contract(format!(
                    "battery has {m} ids but {} statistics",
                    s.len()
                )));
            }
            if let Some(bad) = s.iter().find(|x| !x.is_finite()) {
                return Err(Error::domain(format!("statistic must be finite, got {bad}")));
            }
        }
        if let Some(g) = &group_labels {
            if g.len() != m {
                return Err(Error::contract(format!(
                    "battery has {m} ids but {} group labels",
                    g.len()
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if id.is_empty() || id.contains('\t') || id.contains('\n') {
                return Err(Error::contract(format!("invalid test id {id:?}")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::contract(format!("duplicate test id {id:?}")));
            }
        }
        let p_values = p_values
            .into_iter()
            .map(Probability::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(TestBattery { ids, p_values, statistics, group_labels })
    }

    pub fn m(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_values[j].get()
    }

    pub fn p_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.p_values.iter().map(|p| p.get())
    }

    pub fn statistics(&self) -> Option<&[f64]> {
        self.statistics.as_deref()
    }

    pub fn group_labels(&self) -> Option<&[usize]> {
        self.group_labels.as_deref()
    }
}

/// One disagreement between a stored p-value and the tail of its statistic.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyViolation {
    pub index: usize,
    pub observed_p: f64,
    pub expected_p: f64,
}

/// Check that stored p-values match the tails of the stored statistics:
/// `upper_tail(T)` for one-sided batteries, the central chi-square tail of
/// `T^2` for two-sided ones. Batteries without statistics vacuously pass.
pub fn consistency_check(
    battery: &TestBattery,
    sidedness: Sidedness,
) -> Vec<ConsistencyViolation> {
    let Some(stats) = battery.statistics() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (j, &t) in stats.iter().enumerate() {
        let expected = match sidedness {
            Sidedness::OneSided => distfn::upper_tail(t),
            // t is on the normal scale; its square is central chi-square
            // under the null.
            Sidedness::TwoSided => {
                distfn::noncentral_chisq1_upper_tail(t * t, 0.0).unwrap_or(f64::NAN)
            }
        };
        let observed = battery.p(j);
        if !((observed - expected).abs() <= CONSISTENCY_TOL) {
            out.push(ConsistencyViolation { index: j, observed_p: observed, expected_p: expected });
        }
    }
    out
}

// --- Rejection sets -------------------------------------------------------

/// The outcome of running a procedure on a battery of m tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectionSet {
    m: usize,
    indices: BTreeSet<usize>,
}

impl RejectionSet {
    pub fn new(m: usize, indices: BTreeSet<usize>) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&j| j >= m) {
            return Err(Error::contract(format!(
                "rejection index {bad} out of range for m = {m}"
            )));
        }
        Ok(RejectionSet { m, indices })
    }

    pub fn empty(m: usize) -> Self {
        RejectionSet { m, indices: BTreeSet::new() }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    /// Rejected indices in increasing order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn is_superset_of(&self, other: &RejectionSet) -> bool {
        self.indices.is_superset(&other.indices)
    }
}

// --- Monte Carlo outcome tallies -------------------------------------------

/// Error tallies from one simulated replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MCOutcome {
    pub rejections: usize,
    pub false_positives: usize,
    pub true_positives: usize,
    pub m0: usize,
    pub m1: usize,
}

impl MCOutcome {
    pub fn new(false_positives: usize, true_positives: usize, m0: usize, m1: usize) -> Result<Self> {
        if false_positives > m0 || true_positives > m1 {
            return Err(Error::contract(format!(
                "tallies exceed class sizes: F = {false_positives} of m0 = {m0}, \
                 T = {true_positives} of m1 = {m1}"
            )));
        }
        Ok(MCOutcome {
            rejections: false_positives + true_positives,
            false_positives,
            true_positives,
            m0,
            m1,
        })
    }

    pub fn any_false_positive(&self) -> bool {
        self.false_positives > 0
    }
}

// --- TSV formats -----------------------------------------------------------
//
// All formats share the shape: a header naming the columns, one record per
// line, tab-separated. Parsers report 1-based line numbers (the header is
// line 1).

fn split_line(line: &str) -> Vec<&str> {
    line.split('\t').collect()
}

fn parse_f64(field: &str, line: usize, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("cannot parse {what} from {field:?}")))
}

/// Parse a battery from TSV text. Recognized headers: `id p`,
/// `id p stat`, `id p group`, `id p stat group`.
/// First non-blank, non-comment line: the header. Files may carry `#`
/// summary lines above it.
fn header_line<'a>(
    lines: &mut std::iter::Enumerate<std::str::Lines<'a>>,
    what: &str,
) -> Result<(usize, &'a str)> {
    for (i, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        return Ok((i + 1, line));
    }
    Err(Error::parse(1, format!("empty {what} file")))
}

pub fn parse_battery(text: &str) -> Result<TestBattery> {
    let mut lines = text.lines().enumerate();
    let (header_no, header) = header_line(&mut lines, "battery")?;
    let cols = split_line(header);
    let (has_stat, has_group) = match cols.as_slice() {
        ["id", "p"] => (false, false),
        ["id", "p", "stat"] => (true, false),
        ["id", "p", "group"] => (false, true),
        ["id", "p", "stat", "group"] => (true, true),
        _ => {
            return Err(Error::parse(
                header_no,
                format!("unrecognized battery header {header:?}"),
            ))
        }
    };
    let mut ids = Vec::new();
    let mut ps = Vec::new();
    let mut stats = Vec::new();
    let mut groups = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_line(line);
        let expected = 2 + has_stat as usize + has_group as usize;
        if fields.len() != expected {
            return Err(Error::parse(
                lineno,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        let p = parse_f64(fields[1], lineno, "p-value")?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::parse(
                lineno,
                format!("p-value {p} outside [0, 1]"),
            ));
        }
        ps.push(p);
        let mut k = 2;
        if has_stat {
            stats.push(parse_f64(fields[k], lineno, "statistic")?);
            k += 1;
        }
        if has_group {
            let g = fields[k].trim().parse::<usize>().map_err(|_| {
                Error::parse(lineno, format!("cannot parse group label from {:?}", fields[k]))
            })?;
            groups.push(g);
        }
    }
    TestBattery::new(
        ids,
        ps,
        has_stat.then_some(stats),
        has_group.then_some(groups),
    )
}

pub fn write_battery(battery: &TestBattery) -> String {
    let has_stat = battery.statistics().is_some();
    let has_group = battery.group_labels().is_some();
    let mut out = String::from("id\tp");
    if has_stat {
        out.push_str("\tstat");
    }
    if has_group {
        out.push_str("\tgroup");
    }
    out.push('\n');
    for j in 0..battery.m() {
        out.push_str(&battery.ids()[j]);
        out.push('\t');
        out.push_str(&fmt17(battery.p(j)));
        if let Some(s) = battery.statistics() {
            out.push('\t');
            out.push_str(&fmt17(s[j]));
        }
        if let Some(g) = battery.group_labels() {
            out.push('\t');
            out.push_str(&g[j].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn load_battery(path: impl AsRef<Path>) -> Result<TestBattery> {
    parse_battery(&std::fs::read_to_string(path)?)
}

pub fn save_battery(battery: &TestBattery, path: impl AsRef<Path>) -> Result<()> {
    Ok(std::fs::write(path, write_battery(battery))?)
}

/// Parse an `id<TAB>weight` file. Comment lines starting with '#' after the
/// header are skipped so summary annotations can ride along.
pub fn parse_weights(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (header_no, header) = header_line(&mut lines, "weights")?;
    if split_line(header) != ["id", "weight"] {
        return Err(Error::parse(
            header_no,
            format!("unrecognized weights header {header:?}"),
        ));
    }
    let mut ids = Vec::new();
    let mut ws = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        ws.push(parse_f64(fields[1], lineno, "weight")?);
    }
    if ids.is_empty() {
        return Err(Error::parse(1, "weights file has no data rows"));
    }
    Ok((ids, ws))
}

pub fn write_weights(ids: &[String], weights: &[f64]) -> String {
    let mut out = String::from("id\tweight\n");
    for (id, w) in ids.iter().zip(weights) {
        out.push_str(id);
        out.push('\t');
        out.push_str(&fmt17(*w));
        out.push('\n');
    }
    out
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<f64>)> {
    parse_weights(&std::fs::read_to_string(path)?)
}

/// Parse an `id<TAB>mean` file into ids and effect means.
pub fn parse_means(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    let (header_no, header) = header_line(&mut lines, "means")?;
    if split_line(header) != ["id", "mean"] {
        return Err(Error::parse(
            header_no,
            format!("unrecognized means header {header:?}"),
        ));
    }
    let mut ids = Vec::new();
    let mut means = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        ids.push(fields[0].to_string());
        means.push(parse_f64(fields[1], lineno, "mean")?);
    }
    if ids.is_empty() {
        return Err(Error::parse(1, "means file has no data rows"));
    }
    Ok((ids, means))
}

pub fn load_means(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<f64>)> {
    parse_means(&std::fs::read_to_string(path)?)
}

/// Parse a `mass<TAB>location` mixture file.
pub fn parse_mixture(text: &str) -> Result<MixtureSpec> {
    let mut lines = text.lines().enumerate();
    let (header_no, header) = header_line(&mut lines, "mixture")?;
    if split_line(header) != ["mass", "location"] {
        return Err(Error::parse(
            header_no,
            format!("unrecognized mixture header {header:?}"),
        ));
    }
    let mut atoms = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_line(line);
        if fields.len() != 2 {
            return Err(Error::parse(
                lineno,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        atoms.push(MixtureAtom {
            mass: parse_f64(fields[0], lineno, "mass")?,
            location: parse_f64(fields[1], lineno, "location")?,
        });
    }
    MixtureSpec::new(atoms)
}

pub fn write_mixture(spec: &MixtureSpec) -> String {
    let mut out = String::from("mass\tlocation\n");
    for a in spec.atoms() {
        out.push_str(&fmt17(a.mass));
        out.push('\t');
        out.push_str(&fmt17(a.location));
        out.push('\n');
    }
    out
}

pub fn load_mixture(path: impl AsRef<Path>) -> Result<MixtureSpec> {
    parse_mixture(&std::fs::read_to_string(path)?)
}

/// Serialize a rejection outcome: `id<TAB>rejected<TAB>q_value`, where
/// `q_value = p / w` is the weight-adjusted p-value the procedure ranked
/// (infinite when the weight is zero and p > 0).
pub fn write_rejections(
    battery: &TestBattery,
    weights: &WeightVector,
    set: &RejectionSet,
) -> String {
    let mut out = String::from("id\trejected\tq_value\n");
    for j in 0..battery.m() {
        let q = weighted_p(battery.p(j), weights.get(j));
        out.push_str(&battery.ids()[j]);
        out.push('\t');
        out.push(if set.contains(j) { '1' } else { '0' });
        out.push('\t');
        out.push_str(&fmt17(q));
        out.push('\n');
    }
    out
}

/// The ratio `p / w` with the zero-weight convention: a zero weight means
/// the hypothesis cannot be rejected (q = +inf), except that p = 0 stays 0
/// so a literally impossible null is still rejected at any threshold.
pub fn weighted_p(p: f64, w: f64) -> f64 {
    if w > 0.0 {
        p / w
    } else if p == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
