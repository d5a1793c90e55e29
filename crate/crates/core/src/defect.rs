//! Numerical minimisation of the information defect `I(C:C′|X)` over
//! classical copying channels `M: C → C′` subject to
//! `Σ_x p_x Δ(ρ^x M, ρ^x) ≤ ε`.
//!
//! The joint produced by `M` is `τ(x, c, c′) = p_x ρ^x_c M_{c,c′}`, so the
//! `XC` marginal is kept exactly and only the `C′` marginals are
//! constrained.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{compensated_sum, ClassicalEnsemble, JointDistribution};
use crate::error::{Error, Result};
use crate::info::{cond_mutual_info_cc_given_x, half_l1, Bits};
use crate::random::{random_channel, stream_rng};
use crate::stochastic::StochasticMatrix;
use rand::Rng;

/// Allowed excess of the marginal error over `ε` in a returned solution.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Marginal error the final repair step aims for above `ε`.
pub const REPAIR_SLACK: f64 = 1e-10;
const LOG_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectBackend {
    PenaltyGradient,
    GridOracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectProblem {
    pub ensemble: ClassicalEnsemble,
    pub eps: f64,
    pub backend: DefectBackend,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

fn default_restarts() -> usize {
    50
}

impl DefectProblem {
    pub fn new(ensemble: ClassicalEnsemble, eps: f64, backend: DefectBackend) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::ParameterOutOfRange(format!("eps = {eps} not in [0, 1)")));
        }
        Ok(Self {
            ensemble,
            eps,
            backend,
            seed: 0,
            restarts: default_restarts(),
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts.max(1);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectSolution {
    pub matrix: StochasticMatrix,
    pub value: Bits,
    /// `Σ_x p_x Δ(ρ^x M, ρ^x)`.
    pub marginal_error: f64,
    /// `ε - marginal_error`; never below `-FEASIBILITY_TOL`.
    pub constraint_slack: f64,
    pub backend: DefectBackend,
}

/// `τ(x, c, c′) = p_x ρ^x_c M_{c,c′}`.
pub fn channel_joint(e: &ClassicalEnsemble, m: &StochasticMatrix) -> Result<JointDistribution> {
    let d = e.d();
    if m.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.d(),
        });
    }
    let mut table = Vec::with_capacity(e.labels() * d * d);
    for (px, rho) in e.priors().probs().iter().zip(e.conditionals()) {
        for c in 0..d {
            let w = px * rho.get(c);
            table.extend(m.row(c).iter().map(|v| w * v));
        }
    }
    Ok(JointDistribution::from_vec_unchecked(e.labels(), d, d, table))
}

/// `I(C:C′|X)` of [`channel_joint`].
pub fn defect_value(e: &ClassicalEnsemble, m: &StochasticMatrix) -> Result<Bits> {
    Ok(cond_mutual_info_cc_given_x(&channel_joint(e, m)?))
}

/// `Σ_x p_x Δ(ρ^x M, ρ^x)`.
pub fn marginal_error(e: &ClassicalEnsemble, m: &StochasticMatrix) -> Result<f64> {
    if m.d() != e.d() {
        return Err(Error::DimensionMismatch {
            expected: e.d(),
            found: m.d(),
        });
    }
    Ok(compensated_sum(e.priors().probs().iter().zip(e.conditionals()).map(
        |(px, rho)| px * half_l1(&m.apply_slice(rho.probs()), rho.probs()),
    )))
}

/// Working copy of the problem data as flat slices.
struct Objective<'a> {
    d: usize,
    priors: &'a [f64],
    states: Vec<&'a [f64]>,
    eps: f64,
}

impl<'a> Objective<'a> {
    fn new(e: &'a ClassicalEnsemble, eps: f64) -> Self {
        Self {
            d: e.d(),
            priors: e.priors().probs(),
            states: e.conditionals().iter().map(|r| r.probs()).collect(),
            eps,
        }
    }

    fn push(&self, rho: &[f64], m: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d).map(|cp| (0..d).map(|c| rho[c] * m[c * d + cp]).sum()).collect()
    }

    /// `I(C:C′|X)` in bits, evaluated directly from `M`.
    fn value(&self, m: &[f64]) -> f64 {
        let d = self.d;
        let mut total = 0.0;
        for (px, rho) in self.priors.iter().zip(&self.states) {
            if *px == 0.0 {
                continue;
            }
            let q = self.push(rho, m);
            let mut s = 0.0;
            for c in 0..d {
                if rho[c] == 0.0 {
                    continue;
                }
                for cp in 0..d {
                    let v = m[c * d + cp];
                    if v > 0.0 {
                        s += rho[c] * v * (v / q[cp]).log2();
                    }
                }
            }
            total += px * s;
        }
        total
    }

    /// `∂/∂M_{a,b} = Σ_x p_x ρ^x_a log(M_{a,b} / (ρ^x M)_b)`.
    fn gradient(&self, m: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut g = vec![0.0; d * d];
        for (px, rho) in self.priors.iter().zip(&self.states) {
            if *px == 0.0 {
                continue;
            }
            let q = self.push(rho, m);
            for a in 0..d {
                if rho[a] == 0.0 {
                    continue;
                }
                for b in 0..d {
                    let ratio = m[a * d + b].max(LOG_FLOOR) / q[b].max(LOG_FLOOR);
                    g[a * d + b] += px * rho[a] * ratio.log2();
                }
            }
        }
        g
    }

    fn constraint(&self, m: &[f64]) -> f64 {
        self.priors
            .iter()
            .zip(&self.states)
            .map(|(px, rho)| px * half_l1(&self.push(rho, m), rho))
            .sum()
    }

    /// Penalised objective over `(M, t)` where `t_{x,c′}` bounds
    /// `|(ρ^x M - ρ^x)_{c′}|`, and its gradient.
    fn penalised(&self, m: &[f64], t: &[f64], mu: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.d;
        let mut gm = self.gradient(m);
        let mut gt = vec![0.0; t.len()];
        let mut pen = 0.0;
        let mut budget = -self.eps;
        for (x, (px, rho)) in self.priors.iter().zip(&self.states).enumerate() {
            let q = self.push(rho, m);
            for cp in 0..d {
                let z = q[cp] - rho[cp];
                let tv = t[x * d + cp];
                let up = (z - tv).max(0.0);
                let down = (-z - tv).max(0.0);
                pen += up * up + down * down;
                let dz = 2.0 * (up - down);
                if dz != 0.0 {
                    for a in 0..d {
                        gm[a * d + cp] += mu * dz * rho[a];
                    }
                }
                gt[x * d + cp] -= mu * 2.0 * (up + down);
                budget += 0.5 * px * tv;
            }
        }
        let over = budget.max(0.0);
        pen += over * over;
        if over > 0.0 {
            for (x, px) in self.priors.iter().enumerate() {
                for cp in 0..d {
                    gt[x * d + cp] += mu * 2.0 * over * 0.5 * px;
                }
            }
        }
        (self.value(m) + mu * pen, gm, gt)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let candidate = (cumulative - 1.0) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

fn project_rows(m: &mut [f64], d: usize) {
    for row in m.chunks_mut(d) {
        project_simplex(row);
    }
}

const PENALTIES: [f64; 10] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9, 1e10];
const STALL_WINDOW: usize = 100;
const STALL_TOL: f64 = 1e-9;
const MAX_STAGE_ITERS: usize = 20_000;

fn descend(obj: &Objective, start: Vec<f64>) -> Vec<f64> {
    let d = obj.d;
    let labels = obj.priors.len();
    let mut m = start;
    let mut t: Vec<f64> = (0..labels)
        .flat_map(|x| {
            let q = obj.push(obj.states[x], &m);
            let rho = obj.states[x];
            (0..d).map(move |cp| (q[cp] - rho[cp]).abs()).collect::<Vec<_>>()
        })
        .collect();
    let mut step = 1.0f64;
    for &mu in &PENALTIES {
        let mut history: Vec<f64> = Vec::new();
        for _ in 0..MAX_STAGE_ITERS {
            let (f0, gm, gt) = obj.penalised(&m, &t, mu);
            history.push(f0);
            if history.len() > STALL_WINDOW && history[history.len() - 1 - STALL_WINDOW] - f0 < STALL_TOL {
                break;
            }
            step = (step * 2.0).min(1.0);
            loop {
                let mut m1: Vec<f64> = m.iter().zip(&gm).map(|(a, g)| a - step * g).collect();
                project_rows(&mut m1, d);
                let t1: Vec<f64> = t.iter().zip(&gt).map(|(a, g)| (a - step * g).max(0.0)).collect();
                let decrease: f64 = m
                    .iter()
                    .zip(&m1)
                    .zip(&gm)
                    .map(|((a, b), g)| g * (a - b))
                    .chain(t.iter().zip(&t1).zip(&gt).map(|((a, b), g)| g * (a - b)))
                    .sum();
                let (f1, _, _) = obj.penalised(&m1, &t1, mu);
                if f1 <= f0 - 1e-4 * decrease || step < 1e-20 {
                    if f1 <= f0 {
                        m = m1;
                        t = t1;
                    }
                    break;
                }
                step *= 0.5;
            }
        }
    }
    m
}

/// Pulls `M` toward the identity until the marginal error is at most
/// `ε + REPAIR_SLACK`; the error scales linearly along that segment.
fn repair(obj: &Objective, m: Vec<f64>) -> Vec<f64> {
    let d = obj.d;
    let target = obj.eps + REPAIR_SLACK;
    let g = obj.constraint(&m);
    if g <= target {
        return m;
    }
    let mut keep = target / g;
    loop {
        let blended: Vec<f64> = m
            .iter()
            .enumerate()
            .map(|(i, v)| keep * v + if i / d == i % d { 1.0 - keep } else { 0.0 })
            .collect();
        if obj.constraint(&blended) <= target || keep == 0.0 {
            return blended;
        }
        keep = (keep * (1.0 - 1e-9)).max(0.0);
    }
}

fn identity_entries(d: usize) -> Vec<f64> {
    StochasticMatrix::identity(d).entries().to_vec()
}

fn solution(e: &ClassicalEnsemble, eps: f64, m: StochasticMatrix, backend: DefectBackend) -> Result<DefectSolution> {
    let value = defect_value(e, &m)?;
    let err = marginal_error(e, &m)?;
    Ok(DefectSolution {
        matrix: m,
        value,
        marginal_error: err,
        constraint_slack: eps - err,
        backend,
    })
}

fn minimize_penalty(p: &DefectProblem) -> Result<DefectSolution> {
    let e = &p.ensemble;
    let d = e.d();
    let obj = Objective::new(e, p.eps);
    let runs: Vec<(f64, Vec<f64>)> = (0..p.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let start = if r == 0 {
                identity_entries(d)
            } else {
                let mut rng = stream_rng(p.seed, r as u64);
                let s: f64 = rng.random();
                let noise = random_channel(&mut rng, d);
                identity_entries(d)
                    .iter()
                    .zip(noise.entries())
                    .map(|(a, b)| (1.0 - s) * a + s * b)
                    .collect()
            };
            let m = repair(&obj, descend(&obj, start));
            (obj.value(&m), m)
        })
        .collect();
    let (_, best) = runs
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one restart");
    let m = StochasticMatrix::from_entries_unchecked(d, best);
    solution(e, p.eps, m, DefectBackend::PenaltyGradient)
}

/// Exhaustive search over `M = [[1-a, a], [b, 1-b]]` on a `10⁻²` grid, then
/// repeated local refinement (window `±2h`, step `h/10`) down to `h = 10⁻⁸`.
/// Only defined for `d = 2`.
pub fn grid_oracle(e: &ClassicalEnsemble, eps: f64) -> Result<DefectSolution> {
    if e.d() != 2 {
        return Err(Error::Unsupported("grid oracle is limited to d = 2".into()));
    }
    let obj = Objective::new(e, eps);
    let entries = |a: f64, b: f64| vec![1.0 - a, a, b, 1.0 - b];
    let score = |a: f64, b: f64| -> Option<f64> {
        let m = entries(a, b);
        (obj.constraint(&m) <= eps + 1e-15).then(|| obj.value(&m))
    };
    let mut best = (score(0.0, 0.0).expect("identity is feasible"), 0.0, 0.0);
    let consider = |best: &mut (f64, f64, f64), a: f64, b: f64| {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return;
        }
        if let Some(v) = score(a, b) {
            if v < best.0 {
                *best = (v, a, b);
            }
        }
    };
    for i in 0..=100 {
        for j in 0..=100 {
            consider(&mut best, i as f64 / 100.0, j as f64 / 100.0);
        }
    }
    let mut h = 1e-2;
    while h >= 1e-8 {
        loop {
            let before = best.0;
            let (a0, b0) = (best.1, best.2);
            for i in -20..=20 {
                for j in -20..=20 {
                    consider(&mut best, a0 + i as f64 * h / 10.0, b0 + j as f64 * h / 10.0);
                }
            }
            if best.0 >= before {
                break;
            }
        }
        h /= 10.0;
    }
    let m = StochasticMatrix::from_entries_unchecked(2, entries(best.1, best.2));
    solution(e, eps, m, DefectBackend::GridOracle)
}

/// Minimum of `I(C:C′|X)` over channels within marginal error `ε`.
pub fn minimize_defect(p: &DefectProblem) -> Result<DefectSolution> {
    if !(0.0..1.0).contains(&p.eps) {
        return Err(Error::ParameterOutOfRange(format!("eps = {} not in [0, 1)", p.eps)));
    }
    match p.backend {
        DefectBackend::PenaltyGradient => minimize_penalty(p),
        DefectBackend::GridOracle => grid_oracle(&p.ensemble, p.eps),
    }
}

/// Analytic gradient of [`defect_value`] with respect to the entries of `M`,
/// row-major.
pub fn defect_gradient(e: &ClassicalEnsemble, m: &StochasticMatrix) -> Result<Vec<f64>> {
    if m.d() != e.d() {
        return Err(Error::DimensionMismatch {
            expected: e.d(),
            found: m.d(),
        });
    }
    Ok(Objective::new(e, 0.0).gradient(m.entries()))
}

/// [`defect_value`] extended to arbitrary nonnegative matrices, for
/// finite-difference checks off the stochastic manifold.
pub fn defect_value_raw(e: &ClassicalEnsemble, entries: &[f64]) -> f64 {
    Objective::new(e, 0.0).value(entries)
}
