//! Row-stochastic channels `C → C′` and the rigidity machinery around the
//! Birkhoff polytope.
//!
//! A matrix `M` acts on row vectors: `(pM)_{c′} = Σ_c p_c M_{c,c′}`. A
//! permutation is stored as `perm[c] = c′`, i.e. the position of the single
//! `1` in row `c`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{compensated_sum, staircase_eta, Distribution, ExactDistribution, NORMALIZATION_TOL};
use crate::error::{Error, Result};
use crate::info::l1_distance;

/// Entries at or below this magnitude are treated as zero by the Birkhoff
/// peeling loop.
pub const BIRKHOFF_ZERO_TOL: f64 = 1e-12;
/// How far from doubly stochastic an input to [`birkhoff_decompose`] may be.
pub const DOUBLY_STOCHASTIC_TOL: f64 = 1e-10;
/// Absolute slack on `‖·‖₁ ≤ 4ε` style preconditions for rounding noise.
pub const PRECONDITION_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidDimension("empty matrix".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        for (c, row) in rows.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "row {c} has a negative or non-finite entry"
                )));
            }
            let s = compensated_sum(row.iter().copied());
            if (s - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::NotNormalized(format!("row {c} sums to {s}")));
            }
        }
        Ok(Self {
            d,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// Builds from row-major entries produced internally, clamping tiny
    /// negatives and renormalizing rows.
    pub(crate) fn from_entries_unchecked(d: usize, mut entries: Vec<f64>) -> Self {
        for c in 0..d {
            let row = &mut entries[c * d..(c + 1) * d];
            row.iter_mut().for_each(|v| *v = v.max(0.0));
            let s = compensated_sum(row.iter().copied());
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            }
        }
        Self { d, entries }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_permutation(&(0..d).collect::<Vec<_>>())
    }

    pub fn from_permutation(perm: &[usize]) -> Self {
        let d = perm.len();
        let mut entries = vec![0.0; d * d];
        for (c, &cp) in perm.iter().enumerate() {
            entries[c * d + cp] = 1.0;
        }
        Self { d, entries }
    }

    /// Every row equal to `row`.
    pub fn constant_rows(row: &Distribution) -> Self {
        let d = row.d();
        Self {
            d,
            entries: (0..d).flat_map(|_| row.probs().iter().copied()).collect(),
        }
    }

    /// `(1 - t) A + t B`.
    pub fn mix(a: &StochasticMatrix, b: &StochasticMatrix, t: f64) -> Result<Self> {
        if a.d != b.d {
            return Err(Error::DimensionMismatch {
                expected: a.d,
                found: b.d,
            });
        }
        let entries = a
            .entries
            .iter()
            .zip(&b.entries)
            .map(|(x, y)| (1.0 - t) * x + t * y)
            .collect();
        Ok(Self::from_entries_unchecked(a.d, entries))
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, c: usize, cp: usize) -> f64 {
        self.entries[c * self.d + cp]
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.entries[c * self.d..(c + 1) * self.d]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|c| self.row(c).to_vec()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.d).map(|c| self.get(c, c)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.d)
            .map(|cp| compensated_sum((0..self.d).map(|c| self.get(c, cp))))
            .collect()
    }

    /// Largest deviation of a row or column sum from 1.
    pub fn doubly_stochastic_defect(&self) -> f64 {
        let rows = (0..self.d).map(|c| (compensated_sum(self.row(c).iter().copied()) - 1.0).abs());
        let cols = self.column_sums().into_iter().map(|s| (s - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `pM` on a raw row vector.
    pub fn apply_slice(&self, p: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|cp| compensated_sum((0..self.d).map(|c| p[c] * self.get(c, cp))))
            .collect()
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        StochasticMatrix::from_rows(rows).map_err(D::Error::custom)
    }
}

/// Row vector product `pM`.
pub fn apply(p: &Distribution, m: &StochasticMatrix) -> Result<Distribution> {
    if p.d() != m.d() {
        return Err(Error::DimensionMismatch {
            expected: m.d(),
            found: p.d(),
        });
    }
    Ok(Distribution::from_vec_unchecked(m.apply_slice(p.probs())))
}

/// `α_{c′} = Σ_c M_{c,c′} - 1`.
pub fn column_deviation(m: &StochasticMatrix) -> Vec<f64> {
    m.column_sums().into_iter().map(|s| s - 1.0).collect()
}

/// `(‖u - uM‖₁, ‖v - vM‖₁)` for `u = uniform(d)`, `v = staircase(d)`.
pub fn fixed_point_residuals(m: &StochasticMatrix) -> (f64, f64) {
    let d = m.d();
    let u = Distribution::uniform(d).expect("d ≥ 1");
    let v = Distribution::staircase(d).expect("d ≥ 1");
    let ru = l1_distance(u.probs(), &m.apply_slice(u.probs()));
    let rv = l1_distance(v.probs(), &m.apply_slice(v.probs()));
    (ru, rv)
}

/// Smallest `ε` for which both fixed-point residuals are at most `4ε`.
pub fn admissible_epsilon(m: &StochasticMatrix) -> f64 {
    let (ru, rv) = fixed_point_residuals(m);
    ru.max(rv) / 4.0
}

/// Doubly stochastic approximation of an almost-fixing channel:
/// `N_{c,c′} = (M_{c,c′} + (4dε - α_{c′})/d) / (1 + 4dε)`.
///
/// Requires `‖u - uM‖₁ ≤ 4ε` with `u` uniform. The result then has every
/// column sum equal to one and sits within `12dε` of `M` entrywise, with
/// `‖vN - vM‖₁ ≤ 12dε` for any distribution `v`.
pub fn approx_doubly_stochastic(m: &StochasticMatrix, eps: f64) -> Result<StochasticMatrix> {
    let d = m.d();
    if d < 2 {
        return Err(Error::InvalidDimension("need d ≥ 2".into()));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps}")));
    }
    let (ru, _) = fixed_point_residuals(m);
    if ru > 4.0 * eps + PRECONDITION_SLACK {
        return Err(Error::violated("‖u - uM‖₁ ≤ 4ε", ru));
    }
    let alpha = column_deviation(m);
    let shift = 4.0 * d as f64 * eps;
    let scale = 1.0 / (1.0 + shift);
    let df = d as f64;
    let entries = (0..d)
        .flat_map(|c| {
            let alpha = &alpha;
            (0..d).map(move |cp| scale * (m.get(c, cp) + (shift - alpha[cp]) / df))
        })
        .collect();
    Ok(StochasticMatrix { d, entries })
}

/// Convex weights over distinct permutation matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffDecomposition {
    pub weights: Vec<f64>,
    pub permutations: Vec<Vec<usize>>,
}

impl BirkhoffDecomposition {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Row-major `Σ_i q_i Π_i`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.permutations.first().map_or(0, Vec::len);
        let mut out = vec![0.0; d * d];
        for (q, perm) in self.weights.iter().zip(&self.permutations) {
            for (c, &cp) in perm.iter().enumerate() {
                out[c * d + cp] += q;
            }
        }
        out
    }

    /// Weight on the identity permutation (0 if absent).
    pub fn identity_weight(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.permutations)
            .filter(|(_, p)| p.iter().enumerate().all(|(c, &cp)| c == cp))
            .map(|(q, _)| *q)
            .sum()
    }
}

/// Greedy Birkhoff–von Neumann peeling.
///
/// Each round takes the lexicographically smallest perfect matching on the
/// current support and subtracts its bottleneck entry. Every round leaves
/// the remainder on a strictly smaller face of the Birkhoff polytope, so at
/// most `(d-1)² + 1` permutations are produced.
pub fn birkhoff_decompose(m: &StochasticMatrix) -> Result<BirkhoffDecomposition> {
    let defect = m.doubly_stochastic_defect();
    if defect > DOUBLY_STOCHASTIC_TOL {
        return Err(Error::InvalidInput(format!(
            "matrix is not doubly stochastic (max row/column sum deviation {defect:e})"
        )));
    }
    let d = m.d();
    let mut rest: Vec<f64> = m
        .entries
        .iter()
        .map(|&v| if v > BIRKHOFF_ZERO_TOL { v } else { 0.0 })
        .collect();
    let mut weights = Vec::new();
    let mut permutations = Vec::new();
    let max_rounds = (d - 1) * (d - 1) + 1;
    while weights.len() < max_rounds {
        let support: Vec<Vec<bool>> = (0..d)
            .map(|c| (0..d).map(|cp| rest[c * d + cp] > 0.0).collect())
            .collect();
        if support.iter().all(|r| r.iter().all(|s| !s)) {
            break;
        }
        let Some(perm) = lex_min_perfect_matching(&support) else {
            break;
        };
        let q = perm
            .iter()
            .enumerate()
            .map(|(c, &cp)| rest[c * d + cp])
            .fold(f64::INFINITY, f64::min);
        for (c, &cp) in perm.iter().enumerate() {
            let v = &mut rest[c * d + cp];
            *v -= q;
            if *v <= BIRKHOFF_ZERO_TOL {
                *v = 0.0;
            }
        }
        weights.push(q);
        permutations.push(perm);
    }
    Ok(BirkhoffDecomposition { weights, permutations })
}

/// Perfect matching on a square bipartite support graph whose column
/// sequence `(perm[0], perm[1], …)` is lexicographically smallest.
pub fn lex_min_perfect_matching(support: &[Vec<bool>]) -> Option<Vec<usize>> {
    let d = support.len();
    let mut row_to_col: Vec<Option<usize>> = vec![None; d];
    let mut col_to_row: Vec<Option<usize>> = vec![None; d];
    let locked = vec![false; d];
    for r in 0..d {
        let mut seen = vec![false; d];
        if !augment(r, support, &mut row_to_col, &mut col_to_row, &locked, &mut seen) {
            return None;
        }
    }
    let mut locked = vec![false; d];
    for r in 0..d {
        let current = row_to_col[r].expect("perfect matching");
        for j in 0..current {
            if !support[r][j] || col_to_row[j].is_some_and(|owner| locked[owner]) {
                continue;
            }
            let (saved_rc, saved_cr) = (row_to_col.clone(), col_to_row.clone());
            let displaced = col_to_row[j].expect("perfect matching covers every column");
            col_to_row[current] = None;
            row_to_col[r] = Some(j);
            col_to_row[j] = Some(r);
            row_to_col[displaced] = None;
            locked[r] = true;
            let mut seen = vec![false; d];
            seen[j] = true;
            if augment(displaced, support, &mut row_to_col, &mut col_to_row, &locked, &mut seen) {
                break;
            }
            locked[r] = false;
            row_to_col = saved_rc;
            col_to_row = saved_cr;
        }
        locked[r] = true;
    }
    row_to_col.into_iter().collect()
}

fn augment(
    r: usize,
    support: &[Vec<bool>],
    row_to_col: &mut [Option<usize>],
    col_to_row: &mut [Option<usize>],
    locked: &[bool],
    seen: &mut [bool],
) -> bool {
    for j in 0..support.len() {
        if !support[r][j] || seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match col_to_row[j] {
            None => true,
            Some(owner) => !locked[owner] && augment(owner, support, row_to_col, col_to_row, locked, seen),
        };
        if free {
            row_to_col[r] = Some(j);
            col_to_row[j] = Some(r);
            return true;
        }
    }
    false
}

/// Square matrix with exact rational entries, used where a condition must
/// hold with equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMatrix {
    d: usize,
    entries: Vec<BigRational>,
}

impl ExactMatrix {
    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidDimension("empty matrix".into()));
        }
        if let Some(row) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: row.len(),
            });
        }
        let m = Self {
            d,
            entries: rows.into_iter().flatten().collect(),
        };
        if m.entries.iter().any(|v| v.is_negative()) {
            return Err(Error::InvalidInput("negative entry".into()));
        }
        for c in 0..d {
            let s: BigRational = m.row(c).iter().sum();
            if !s.is_one() {
                return Err(Error::NotNormalized(format!("row {c} sums to {s}")));
            }
        }
        Ok(m)
    }

    pub fn identity(d: usize) -> Self {
        Self::from_permutation(&(0..d).collect::<Vec<_>>())
    }

    pub fn from_permutation(perm: &[usize]) -> Self {
        let d = perm.len();
        let mut entries = vec![BigRational::zero(); d * d];
        for (c, &cp) in perm.iter().enumerate() {
            entries[c * d + cp] = BigRational::one();
        }
        Self { d, entries }
    }

    /// `Σ_i w_i Π_i` for rational weights summing to one.
    pub fn convex_combination(weights: &[BigRational], perms: &[Vec<usize>]) -> Result<Self> {
        let d = perms.first().map_or(0, Vec::len);
        let mut rows = vec![vec![BigRational::zero(); d]; d];
        for (w, perm) in weights.iter().zip(perms) {
            for (c, &cp) in perm.iter().enumerate() {
                rows[c][cp] += w;
            }
        }
        Self::from_rows(rows)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, c: usize) -> &[BigRational] {
        &self.entries[c * self.d..(c + 1) * self.d]
    }

    pub fn get(&self, c: usize, cp: usize) -> &BigRational {
        &self.entries[c * self.d + cp]
    }

    pub fn apply(&self, p: &[BigRational]) -> Vec<BigRational> {
        (0..self.d)
            .map(|cp| (0..self.d).map(|c| &p[c] * self.get(c, cp)).sum())
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        (0..self.d).all(|c| {
            (0..self.d).all(|cp| {
                let v = self.get(c, cp);
                if c == cp {
                    v.is_one()
                } else {
                    v.is_zero()
                }
            })
        })
    }

    pub fn to_f64(&self) -> StochasticMatrix {
        StochasticMatrix::from_entries_unchecked(
            self.d,
            self.entries
                .iter()
                .map(|v| crate::dist::rational_to_f64(v).unwrap_or(0.0))
                .collect(),
        )
    }
}

fn exact_l1(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn approx(q: &BigRational) -> f64 {
    crate::dist::rational_to_f64(q).unwrap_or(f64::NAN)
}

/// Zero-error rigidity: if `uM = u` and `vM = v` hold exactly for the
/// uniform `u` and a strictly decreasing `v`, then `M` is the identity.
///
/// Returns whether `M` is the identity; under the preconditions this is
/// always `true`.
pub fn zero_error_rigidity_check(m: &ExactMatrix, v: &ExactDistribution) -> Result<bool> {
    let d = m.d();
    if v.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.d(),
        });
    }
    if !v.probs().windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::violated("v strictly decreasing", 0.0));
    }
    let u = ExactDistribution::uniform(d)?;
    let ru = exact_l1(u.probs(), &m.apply(u.probs()));
    if !ru.is_zero() {
        return Err(Error::violated("uM = u", approx(&ru)));
    }
    let rv = exact_l1(v.probs(), &m.apply(v.probs()));
    if !rv.is_zero() {
        return Err(Error::violated("vM = v", approx(&rv)));
    }
    Ok(m.is_identity())
}

/// `Σ_j v_j (vΠ)_j` for the permutation `perm`.
pub fn permutation_overlap(v: &[BigRational], perm: &[usize]) -> BigRational {
    // (vΠ)_{perm[c]} = v_c
    perm.iter().enumerate().map(|(c, &cp)| &v[cp] * &v[c]).sum()
}

/// `max_{Π ≠ id} Σ_j v_j (vΠ)_j = Σ_j v_j² - 1/η²` for the staircase `v`.
pub fn perm_overlap_max(v: &ExactDistribution) -> Result<BigRational> {
    let d = v.d();
    if d < 2 {
        return Err(Error::InvalidDimension("need d ≥ 2".into()));
    }
    if *v != ExactDistribution::staircase(d)? {
        return Err(Error::Unsupported(
            "overlap formula holds for the staircase distribution only".into(),
        ));
    }
    let eta = BigRational::from_integer(BigInt::from(staircase_eta(d)));
    let sum_sq: BigRational = v.probs().iter().map(|x| x * x).sum();
    Ok(sum_sq - (eta.clone() * eta).recip())
}

/// Lower bound on `min_r ‖v - Σ r_i w_i‖₁` over the simplex:
/// `(Σ_j v_j² - max_i Σ_j v_j (w_i)_j) / v_max`.
pub fn l1_dist_to_hull_lower_bound(v: &ExactDistribution, ws: &[ExactDistribution]) -> Result<BigRational> {
    if ws.is_empty() {
        return Err(Error::InvalidInput("empty vertex list".into()));
    }
    if let Some(w) = ws.iter().find(|w| w.d() != v.d()) {
        return Err(Error::DimensionMismatch {
            expected: v.d(),
            found: w.d(),
        });
    }
    let vmax = v.probs().iter().max().cloned().expect("d ≥ 1");
    if !vmax.is_positive() {
        return Err(Error::InvalidInput("v must have a positive entry".into()));
    }
    let dot = |w: &ExactDistribution| -> BigRational { v.probs().iter().zip(w.probs()).map(|(a, b)| a * b).sum() };
    let sum_sq = dot(v);
    let best = ws.iter().map(dot).max().expect("non-empty");
    Ok((sum_sq - best) / vmax)
}

/// Diagonal of a channel that nearly fixes both `uniform(d)` and
/// `staircase(d)`, checked against `M_{c,c} ≥ 1 - 24 d⁴ ε`.
pub fn diagonal_rigidity_bound(m: &StochasticMatrix, eps: f64) -> Result<Vec<f64>> {
    let d = m.d();
    if d < 2 {
        return Err(Error::InvalidDimension("need d ≥ 2".into()));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps}")));
    }
    let (ru, rv) = fixed_point_residuals(m);
    if ru > 4.0 * eps + PRECONDITION_SLACK {
        return Err(Error::violated("‖u - uM‖₁ ≤ 4ε", ru));
    }
    if rv > 4.0 * eps + PRECONDITION_SLACK {
        return Err(Error::violated("‖v - vM‖₁ ≤ 4ε", rv));
    }
    let floor = diagonal_floor(d, eps);
    let diagonal = m.diagonal();
    if let Some(&low) = diagonal.iter().find(|&&x| x < floor - PRECONDITION_SLACK) {
        return Err(Error::InvariantViolated(format!(
            "diagonal entry {low} below 1 - 24d⁴ε = {floor}"
        )));
    }
    Ok(diagonal)
}

/// `1 - 24 d⁴ ε`.
pub fn diagonal_floor(d: usize, eps: f64) -> f64 {
    1.0 - 24.0 * (d as f64).powi(4) * eps
}
