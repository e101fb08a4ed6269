//! Sufficient conditions for the Gibbs reference posterior to exist.
//!
//! The checklist rules are sufficient, never necessary. Every rule holds only
//! for almost every design drawn from a continuous distribution, so a match is
//! reported as [`Verdict::GuaranteedAlmostSurely`]. Designs with repeated
//! coordinate values (grids, Latin squares with ties) fall outside that set and
//! are flagged.

use crate::error::{Error, Result};
use crate::gibbs::RELIABLE_CONDITIONING;
use crate::kernels::LengthVector;
use crate::linear_model::{log_l1_from_parts, BasisKind, KrigingModel};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Guaranteed,
    GuaranteedAlmostSurely,
    NotGuaranteed,
}

impl Verdict {
    pub fn is_guaranteed(self) -> bool {
        !matches!(self, Verdict::NotGuaranteed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotNeeded,
}

/// The rules of the checklist, in the order they are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChecklistRule {
    /// Constant trend, `1 < ν < 2`, `n > r + 3`.
    OrdinaryNuOneTwo,
    /// Constant trend, `2 < ν < 3`, `n > (r + 1)(r/2 + 2)`.
    OrdinaryNuTwoThree,
    /// Trend of degree at most one, `2 < ν < 3`, `n > r(r + 1)/2 + 2r + 3`.
    AffineNuTwoThree,
    /// `0 < ν < 1`, `n > p + 1`, no nonzero constant in the trend space,
    /// Assumption 1.
    RoughNoConstant,
    /// `ν > 1`, `n > r + p + 2`, Assumptions 1 and 2.
    General,
}

impl ChecklistRule {
    pub const ALL: [ChecklistRule; 5] = [
        ChecklistRule::OrdinaryNuOneTwo,
        ChecklistRule::OrdinaryNuTwoThree,
        ChecklistRule::AffineNuTwoThree,
        ChecklistRule::RoughNoConstant,
        ChecklistRule::General,
    ];

    /// Smallest admissible `n` is one more than this bound.
    pub fn n_bound(self, r: usize, p: usize) -> f64 {
        let r = r as f64;
        match self {
            ChecklistRule::OrdinaryNuOneTwo => r + 3.0,
            ChecklistRule::OrdinaryNuTwoThree => (r + 1.0) * (r / 2.0 + 2.0),
            ChecklistRule::AffineNuTwoThree => r * (r + 1.0) / 2.0 + 2.0 * r + 3.0,
            ChecklistRule::RoughNoConstant => p as f64 + 1.0,
            ChecklistRule::General => r + p as f64 + 2.0,
        }
    }

    /// Open interval of smoothness values the rule covers.
    pub fn nu_range(self) -> (f64, f64) {
        match self {
            ChecklistRule::OrdinaryNuOneTwo => (1.0, 2.0),
            ChecklistRule::OrdinaryNuTwoThree | ChecklistRule::AffineNuTwoThree => (2.0, 3.0),
            ChecklistRule::RoughNoConstant => (0.0, 1.0),
            ChecklistRule::General => (1.0, f64::INFINITY),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ChecklistRule::OrdinaryNuOneTwo => "constant trend, 1 < nu < 2, n > r + 3",
            ChecklistRule::OrdinaryNuTwoThree => "constant trend, 2 < nu < 3, n > (r + 1)(r/2 + 2)",
            ChecklistRule::AffineNuTwoThree => "trend of degree <= 1, 2 < nu < 3, n > r(r + 1)/2 + 2r + 3",
            ChecklistRule::RoughNoConstant => {
                "0 < nu < 1, n > p + 1, no constant in the trend space, Assumption 1"
            }
            ChecklistRule::General => "nu > 1, n > r + p + 2, Assumptions 1 and 2",
        }
    }
}

impl fmt::Display for ChecklistRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.description())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub verdict: Verdict,
    pub matched_rule: Option<ChecklistRule>,
    pub assumption1: CheckStatus,
    pub assumption2_proxy: CheckStatus,
    pub notes: Vec<String>,
}

impl fmt::Display for ExistenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match self.verdict {
            Verdict::Guaranteed => "guaranteed",
            Verdict::GuaranteedAlmostSurely => "guaranteed for almost every design",
            Verdict::NotGuaranteed => "NOT guaranteed",
        };
        writeln!(f, "posterior existence: {verdict}")?;
        match self.matched_rule {
            Some(rule) => writeln!(f, "  rule: {rule}")?,
            None => writeln!(f, "  rule: none matched")?,
        }
        writeln!(f, "  assumption 1: {:?}", self.assumption1)?;
        writeln!(f, "  assumption 2 (numerical probe): {:?}", self.assumption2_proxy)?;
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Check {
    pub status: CheckStatus,
    /// Smallest support found for a nonzero vector of `span(H)`, when searched.
    pub min_support: Option<usize>,
    pub note: String,
}

/// Largest number of row subsets enumerated exactly.
const MAX_ENUMERATION: u64 = 2_000_000;

/// Random row subsets tried when exact enumeration is too expensive.
const RANDOM_PROBES: usize = 20_000;

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for j in 0..k {
        acc = match acc.checked_mul((n - j) as u64) {
            Some(v) => v / (j as u64 + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// Advances `idx` to the next sorted subset of `0..n`; false after the last.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for pos in (0..k).rev() {
        if idx[pos] < n - k + pos {
            idx[pos] += 1;
            for q in pos + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn support(v: &[f64]) -> usize {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0;
    }
    v.iter().filter(|x| x.abs() > 1e-9 * scale).count()
}

/// Support of the vector of `span(H)` vanishing on `rows`, if that vector is
/// unique up to scale.
fn circuit_support(h: &DMatrix<f64>, rows: &[usize]) -> Option<usize> {
    let p = h.ncols();
    let mut a = DMatrix::zeros(p, p);
    for (k, &row) in rows.iter().enumerate() {
        a.row_mut(k).copy_from(&h.row(row));
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t?;
    let sv = &svd.singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(core::cmp::Ordering::Equal));
    // The null space of the selected rows must be one-dimensional.
    if p > 1 && sv[order[1]] <= 1e-10 * smax {
        return None;
    }
    let c = vt.row(order[0]).transpose();
    let v = h * c;
    Some(support(v.as_slice()))
}

/// Checks that every nonzero vector of `span(H)` has more than `2r` nonzero
/// entries.
///
/// A minimal-support vector of a `p`-dimensional column space vanishes on a
/// set of rows of rank `p - 1`, so enumerating `(p - 1)`-row subsets finds it.
/// Above [`MAX_ENUMERATION`] subsets a random sample is searched instead, and
/// a search that finds no violation is reported as a failure.
pub fn check_assumption1(h: &DMatrix<f64>, r: usize, kind: BasisKind) -> Assumption1Check {
    let n = h.nrows();
    let p = h.ncols();
    let limit = 2 * r;
    if p == 0 {
        return Assumption1Check {
            status: CheckStatus::Pass,
            min_support: None,
            note: String::from("empty trend: span(H) = {0}"),
        };
    }
    if kind == BasisKind::Constant {
        let ok = n > limit;
        return Assumption1Check {
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            min_support: Some(n),
            note: format!("constant trend: n = {n} against 2r = {limit}"),
        };
    }
    for j in 0..p {
        let col: Vec<f64> = h.column(j).iter().cloned().collect();
        let s = support(&col);
        if s <= limit {
            return Assumption1Check {
                status: CheckStatus::Fail,
                min_support: Some(s),
                note: format!("trend column {j} has only {s} nonzero entries (2r = {limit})"),
            };
        }
    }
    let k = p - 1;
    let total = binomial(n, k);
    let mut best = usize::MAX;
    let visit = |rows: &[usize], best: &mut usize| {
        if let Some(s) = circuit_support(h, rows) {
            if s > 0 && s < *best {
                *best = s;
            }
        }
    };
    if total <= MAX_ENUMERATION {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            visit(&idx, &mut best);
            if best <= limit {
                break;
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
        let ok = best > limit;
        return Assumption1Check {
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            min_support: Some(best),
            note: format!(
                "exhaustive search over {total} row subsets: smallest support {best}, 2r = {limit}"
            ),
        };
    }
    // Deterministic xorshift so the report is reproducible.
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15 ^ (n as u64) << 17 ^ p as u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut rows = vec![0usize; k];
    for _ in 0..RANDOM_PROBES {
        let mut perm: Vec<usize> = (0..n).collect();
        for q in 0..k {
            let j = q + (next() % (n - q) as u64) as usize;
            perm.swap(q, j);
        }
        rows.copy_from_slice(&perm[..k]);
        visit(&rows, &mut best);
        if best <= limit {
            return Assumption1Check {
                status: CheckStatus::Fail,
                min_support: Some(best),
                note: format!("found a trend vector with {best} nonzero entries (2r = {limit})"),
            };
        }
    }
    Assumption1Check {
        status: CheckStatus::Fail,
        min_support: Some(best),
        note: format!(
            "inconclusive: {total} row subsets is too many to enumerate and {RANDOM_PROBES} random ones found no violation"
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    /// `‖μ‖ = 10^-k` for `k` from `first_decade` to `last_decade`.
    pub first_decade: f64,
    pub last_decade: f64,
    pub points_per_decade: usize,
    /// Least decay of `ln L¹` per unit of `ln ‖μ‖`.
    pub min_slope: f64,
    /// Width, in decades, of the fitting window at the small-`‖μ‖` end.
    pub window_decades: f64,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        ProbeGrid {
            first_decade: 0.0,
            last_decade: 8.0,
            points_per_decade: 4,
            min_slope: 0.1,
            window_decades: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Check {
    pub status: CheckStatus,
    /// Fitted slope of `ln L¹` against `ln ‖μ‖` per ray; `None` when the ray
    /// had too few trusted evaluations.
    pub slopes: Vec<Option<f64>>,
    pub note: String,
}

fn rays(r: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(r + 1);
    let diag = 1.0 / (r as f64).sqrt();
    out.push(vec![diag; r]);
    if r > 1 {
        for j in 0..r {
            let mut d = vec![1.0; r];
            d[j] = 3.0;
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            out.push(d.into_iter().map(|v| v / norm).collect());
        }
    }
    out
}

/// Numerical probe of the decay of `L¹(y|μ)` as `‖μ‖ → 0`.
///
/// Only evaluations whose Cholesky rounding gain stays below
/// [`RELIABLE_CONDITIONING`] are used, so the reachable part of the ray is
/// usually the first few decades. A pass is evidence, not proof.
pub fn check_assumption2_proxy(model: &KrigingModel, y: &[f64], grid: &ProbeGrid) -> Result<Assumption2Check> {
    if !(grid.min_slope > 0.0) || grid.points_per_decade == 0 || !(grid.last_decade > grid.first_decade) {
        return Err(Error::InvalidConfig(String::from("bad assumption 2 probe grid")));
    }
    let data = model.project(y)?;
    let steps = ((grid.last_decade - grid.first_decade) * grid.points_per_decade as f64).round() as usize;
    let mut slopes = Vec::new();
    let mut failed = 0usize;
    for dir in rays(model.r()) {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for s in 0..=steps {
            let k = grid.first_decade + s as f64 / grid.points_per_decade as f64;
            let norm = 10f64.powf(-k);
            let mu: Vec<f64> = dir.iter().map(|d| d * norm).collect();
            let theta = LengthVector::from_mu(&mu)?;
            let chol = match model.chol_ww(model.sigma(&theta)?) {
                Ok(c) => c,
                Err(Error::Factorization(_)) => break,
                Err(e) => return Err(e),
            };
            if !(chol.rounding_gain() <= RELIABLE_CONDITIONING) {
                break;
            }
            let l1 = log_l1_from_parts(data.wy(), &chol, model.matrices().ln_det_hth())?;
            pts.push((norm.ln(), l1));
        }
        let window = grid.window_decades * core::f64::consts::LN_10;
        let fit = pts.last().map(|&(x_end, _)| {
            let sel: Vec<(f64, f64)> = pts.iter().cloned().filter(|&(x, _)| x <= x_end + window).collect();
            let span = sel.first().map(|a| a.0 - x_end).unwrap_or(0.0);
            (sel, span)
        });
        let slope = match fit {
            Some((sel, span)) if sel.len() >= 3 && span >= core::f64::consts::LN_10 - 1e-9 => {
                Some(least_squares_slope(&sel))
            }
            _ => None,
        };
        if !matches!(slope, Some(s) if s >= grid.min_slope) {
            failed += 1;
        }
        slopes.push(slope);
    }
    let status = if failed == 0 { CheckStatus::Pass } else { CheckStatus::Fail };
    let shown: Vec<String> = slopes
        .iter()
        .map(|s| match s {
            Some(v) => format!("{v:.3}"),
            None => String::from("n/a"),
        })
        .collect();
    let note = format!(
        "numerical probe only: d ln L / d ln |mu| on {} rays = [{}], required >= {}",
        slopes.len(),
        shown.join(", "),
        grid.min_slope
    );
    Ok(Assumption2Check { status, slopes, note })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Whether the constant function lies in `span(H)`, by least squares.
pub fn constant_in_span(h: &DMatrix<f64>) -> bool {
    let n = h.nrows();
    if h.ncols() == 0 {
        return false;
    }
    let ones = nalgebra::DVector::from_element(n, 1.0);
    let svd = h.clone().svd(true, true);
    match svd.solve(&ones, 1e-12) {
        Ok(c) => (h * c - &ones).norm() <= 1e-8 * (n as f64).sqrt(),
        Err(_) => false,
    }
}

fn nu_in(rule: ChecklistRule, nu: f64) -> bool {
    let (lo, hi) = rule.nu_range();
    nu > lo && nu < hi
}

/// Runs the checklist for a built model.
///
/// `y` is only needed when the general rule has to fall back on the numerical
/// probe of Assumption 2; without it that rule cannot match.
pub fn check_existence(model: &KrigingModel, y: Option<&[f64]>) -> Result<ExistenceReport> {
    check_existence_with(model, y, &ProbeGrid::default())
}

pub fn check_existence_with(model: &KrigingModel, y: Option<&[f64]>, grid: &ProbeGrid) -> Result<ExistenceReport> {
    let nu = model.spec().nu;
    let n = model.n();
    let p = model.p();
    let r = model.r();
    let kind = model.basis().kind();
    let h = model.matrices().h();
    let mut notes = Vec::new();
    let mut a1: Option<Assumption1Check> = None;
    let mut a2_status = CheckStatus::NotNeeded;

    if !model.design().coordinate_distinct() {
        notes.push(String::from(
            "design has repeated coordinate values; the almost-sure design conditions are not met",
        ));
        return Ok(ExistenceReport {
            verdict: Verdict::NotGuaranteed,
            matched_rule: None,
            assumption1: CheckStatus::NotNeeded,
            assumption2_proxy: CheckStatus::NotNeeded,
            notes,
        });
    }

    let mut matched = None;
    for rule in ChecklistRule::ALL {
        if !nu_in(rule, nu) || !(n as f64 > rule.n_bound(r, p)) {
            continue;
        }
        let ok = match rule {
            ChecklistRule::OrdinaryNuOneTwo | ChecklistRule::OrdinaryNuTwoThree => kind == BasisKind::Constant,
            ChecklistRule::AffineNuTwoThree => matches!(kind, BasisKind::Constant | BasisKind::Affine),
            ChecklistRule::RoughNoConstant => {
                if constant_in_span(h) {
                    notes.push(String::from("0 < nu < 1 rule skipped: constants lie in the trend space"));
                    false
                } else {
                    let c = a1.get_or_insert_with(|| check_assumption1(h, r, kind));
                    c.status == CheckStatus::Pass
                }
            }
            ChecklistRule::General => {
                let c = a1.get_or_insert_with(|| check_assumption1(h, r, kind));
                if c.status != CheckStatus::Pass {
                    false
                } else if let Some(y) = y {
                    let a2 = check_assumption2_proxy(model, y, grid)?;
                    notes.push(a2.note.clone());
                    a2_status = a2.status;
                    a2.status == CheckStatus::Pass
                } else {
                    notes.push(String::from("general rule needs observations for the assumption 2 probe"));
                    a2_status = CheckStatus::Fail;
                    false
                }
            }
        };
        if ok {
            matched = Some(rule);
            break;
        }
    }

    if let Some(c) = &a1 {
        notes.push(c.note.clone());
    }
    let verdict = match matched {
        Some(rule) => {
            notes.push(format!(
                "n = {n} > {} holds for the rule '{rule}', which needs an almost surely generic design",
                rule.n_bound(r, p)
            ));
            Verdict::GuaranteedAlmostSurely
        }
        None => {
            notes.push(format!("no rule matched for nu = {nu}, n = {n}, p = {p}, r = {r}, trend {kind:?}"));
            Verdict::NotGuaranteed
        }
    };
    Ok(ExistenceReport {
        verdict,
        matched_rule: matched,
        assumption1: a1.map(|c| c.status).unwrap_or(CheckStatus::NotNeeded),
        assumption2_proxy: a2_status,
        notes,
    })
}
