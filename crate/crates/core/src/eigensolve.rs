//! Eigenvalues from the kernel function.
//!
//! The shift `dE = E~ - E_g` solves `R_g(-dE) = dE`. Substituting `E = E_g + dE`
//! gives `E - E_g = v^T (E I - H_c)^{-1} v` with `H_c` the Hamiltonian on the
//! complement of `g`: between consecutive eigenvalues of `H_c` the left side
//! minus the right side is strictly increasing, so each gap holds exactly one
//! eigenvalue of `H` and a bracketed Newton iteration cannot miss it.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::kernel::KernelContext;
use crate::model::SpectrumSplit;

pub const DEFAULT_TOLERANCE: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Converged once `|R(-dE) - dE| <= tol * (1 + |dE|)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Root,
    Series { order: usize },
    Diagonalization,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Root => write!(f, "root"),
            Method::Series { order } => write!(f, "series({order})"),
            Method::Diagonalization => write!(f, "diagonalization"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One level's eigenvalue. `e_total == e0 + delta_e` always holds.
#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub gamma: usize,
    pub lambda: Option<f64>,
    pub basis: usize,
    pub method: Method,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "deltaE")]
    pub delta_e: f64,
    #[serde(rename = "E_total")]
    pub e_total: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl EigenResult {
    fn new(
        split: &SpectrumSplit,
        gamma: usize,
        method: Method,
        delta_e: f64,
        iterations: usize,
        residual: f64,
    ) -> Self {
        let e0 = split.energies()[gamma];
        Self {
            gamma,
            lambda: split.meta().lambda(),
            basis: split.dim(),
            method,
            e0,
            delta_e,
            e_total: e0 + delta_e,
            iterations,
            residual,
        }
    }
}

/// The interval of `dE` on which the root for `gamma` is sought.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub lower: f64,
    pub upper: f64,
    /// Number of coupled states with a lower diagonal energy than `gamma`.
    pub rank: usize,
}

/// Selects the pole-free interval holding the eigenvalue that continues
/// `E_gamma` as the couplings are switched on.
///
/// Scaling the couplings from zero never lets two eigenvalues of the connected
/// block cross, so the level that starts as the `r`-th smallest diagonal entry
/// stays the `r`-th smallest eigenvalue; by interlacing it sits between the
/// `(r-1)`-th and `r`-th eigenvalues of the complement block. Open ends are
/// closed with Gershgorin bounds.
pub fn branch(ctx: &KernelContext, split: &SpectrumSplit) -> Branch {
    let e_gamma = ctx.e_gamma();
    let energies = split.energies();
    let rank = ctx
        .indices()
        .iter()
        .filter(|&&i| energies[i] < e_gamma)
        .count();

    let mut complement: Vec<f64> = ctx.poles().iter().map(|mu| e_gamma - mu).collect();
    complement.sort_by(f64::total_cmp);

    let coupling = split.coupling();
    let mut members = ctx.indices().to_vec();
    members.push(ctx.gamma());
    let (mut g_lo, mut g_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &i in &members {
        let radius: f64 = members.iter().map(|&j| coupling[(i, j)].abs()).sum();
        g_lo = g_lo.min(energies[i] - radius);
        g_hi = g_hi.max(energies[i] + radius);
    }
    let margin = 1.0 + 1e-8 * (g_hi - g_lo).abs();

    let lower_e = if rank > 0 { complement[rank - 1] } else { g_lo - margin };
    let upper_e = complement.get(rank).copied().unwrap_or(g_hi + margin);
    Branch {
        lower: lower_e - e_gamma,
        upper: upper_e - e_gamma,
        rank,
    }
}

/// `f(dE) = R(-dE) - dE` and its derivative `-R'(-dE) - 1`, from a first-order
/// jet recentred at `z = -dE`.
fn root_function(ctx: &KernelContext, delta: f64) -> Result<(f64, f64)> {
    let jet: Jet = ctx.jet_at(-delta, 1)?;
    Ok((jet.coeff(0) - delta, -jet.coeff(1) - 1.0))
}

/// Solves `R_g(-dE) = dE` by Newton's method, safeguarded by bisection on the
/// branch interval, starting from `dE_0 = R_g(0)` when that lies inside it.
pub fn solve_root(split: &SpectrumSplit, gamma: usize, opts: &SolveOptions) -> Result<EigenResult> {
    let ctx = KernelContext::new(split, gamma)?;
    if ctx.is_decoupled() {
        return Ok(EigenResult::new(split, gamma, Method::Root, 0.0, 0, 0.0));
    }
    let branch = branch(&ctx, split);
    let (mut lo, mut hi) = (branch.lower, branch.upper);
    if !(lo < hi) {
        return Err(Error::NoSignChange {
            lower: lo,
            upper: hi,
        });
    }

    let mut delta = match ctx.resolvent(0.0) {
        Ok(r0) if r0 > lo && r0 < hi => r0,
        _ => 0.5 * (lo + hi),
    };
    let mut best = (f64::INFINITY, delta);
    let mut step_before_last = hi - lo;
    let mut last_step = step_before_last;

    for iteration in 0..=opts.max_iter {
        let (f, fp) = match root_function(&ctx, delta) {
            Ok(v) if v.0.is_finite() && v.1.is_finite() => v,
            // an exact removable pole; nudge toward the middle
            _ => {
                delta = 0.5 * (delta + 0.5 * (lo + hi));
                continue;
            }
        };
        let scale = 1.0 + delta.abs();
        if f.abs() < best.0 {
            best = (f.abs(), delta);
        }
        if f.abs() <= opts.tol * scale {
            return Ok(EigenResult::new(split, gamma, Method::Root, delta, iteration, f.abs()));
        }
        if f > 0.0 {
            lo = delta;
        } else {
            hi = delta;
        }
        if hi - lo <= 4.0 * f64::EPSILON * scale {
            break;
        }

        let newton = delta - f / fp;
        let take_newton =
            newton > lo && newton < hi && (newton - delta).abs() < 0.5 * step_before_last;
        step_before_last = last_step;
        let next = if take_newton { newton } else { 0.5 * (lo + hi) };
        last_step = (next - delta).abs();
        delta = next;
    }

    // bracket collapsed or iterations exhausted; accept only a converged best point
    let (residual, delta) = best;
    if residual <= opts.tol * (1.0 + delta.abs()) {
        return Ok(EigenResult::new(split, gamma, Method::Root, delta, opts.max_iter, residual));
    }
    Err(Error::NoConvergence {
        lower: lo,
        upper: hi,
        iterations: opts.max_iter,
        residual,
    })
}

/// Truncated eigenvalue-shift series with its per-order diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub result: EigenResult,
    /// `term_m = (-1)^m / (m+1) * [z^m] R^{m+1}`, `m = 0..=M`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub last_term: f64,
}

impl SeriesReport {
    /// True when `|term_m|` decreases for every `m` past `from`.
    pub fn decreasing_after(&self, from: usize) -> bool {
        self.terms
            .windows(2)
            .skip(from)
            .all(|w| w[1].abs() < w[0].abs() || w[1] == 0.0)
    }
}

/// Series coefficients `(-1)^m / (m+1) * [z^m] R^{m+1}` for `m = 0..=order`.
///
/// The `1/(m+1)` normalisation against the Taylor coefficient replaces the
/// `1/(m+1)!` against the `m`-th derivative, so no factorial is formed.
pub fn series_terms(jet: &Jet) -> Vec<f64> {
    let order = jet.order();
    jet.powers(order + 1)
        .iter()
        .enumerate()
        .map(|(m, power)| {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            sign * power.coeff(m) / (m + 1) as f64
        })
        .collect()
}

/// `dE = sum_{m=0}^{M} (-1)^m/(m+1)! d^m/dz^m [R^{m+1}](0)`.
pub fn eval_series(split: &SpectrumSplit, gamma: usize, order: usize) -> Result<SeriesReport> {
    let ctx = KernelContext::new(split, gamma)?;
    let jet = ctx.jet(order)?;
    let terms = series_terms(&jet);
    let partial_sums: Vec<f64> = terms
        .iter()
        .scan(0.0, |acc, t| {
            *acc += t;
            Some(*acc)
        })
        .collect();
    let delta = *partial_sums.last().expect("order >= 0 gives one term");
    let last_term = terms.last().copied().unwrap_or(0.0).abs();
    Ok(SeriesReport {
        result: EigenResult::new(split, gamma, Method::Series { order }, delta, order, last_term),
        terms,
        partial_sums,
        last_term,
    })
}

/// All eigenvalues of the reassembled matrix, ascending, from a dense
/// symmetric eigenvalue decomposition.
pub fn diagonalize_oracle(split: &SpectrumSplit) -> Vec<f64> {
    let mut ev: Vec<f64> = split
        .reassemble()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// The oracle eigenvalue closest to `value`.
pub fn nearest(eigenvalues: &[f64], value: f64) -> Option<f64> {
    eigenvalues
        .iter()
        .copied()
        .min_by(|a, b| (a - value).abs().total_cmp(&(b - value).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn two_by_two() -> SpectrumSplit {
        SpectrumSplit::from_matrix(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0])).unwrap()
    }

    fn catalan(m: usize) -> f64 {
        // C(2m, m) / (m + 1), built incrementally
        let mut c = 1.0;
        for k in 0..m {
            c *= 2.0 * (2 * k + 1) as f64 / (k + 2) as f64;
        }
        c
    }

    #[test]
    fn unperturbed_levels() {
        let split = SpectrumSplit::anharmonic(0.0, 2, 16).unwrap();
        for gamma in 0..=10 {
            let r = solve_root(&split, gamma, &SolveOptions::default()).unwrap();
            assert_eq!(r.delta_e, 0.0);
            assert_eq!(r.e_total, (2 * gamma + 1) as f64);
            assert_eq!(r.iterations, 0);
        }
    }

    #[test]
    fn two_state_root() {
        let r = solve_root(&two_by_two(), 0, &SolveOptions::default()).unwrap();
        assert!((r.e_total - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!((r.delta_e - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        let upper = solve_root(&two_by_two(), 1, &SolveOptions::default()).unwrap();
        assert!((upper.e_total - (1.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn two_state_series_terms_are_catalan() {
        let report = eval_series(&two_by_two(), 0, 10).unwrap();
        for (m, term) in report.terms.iter().enumerate() {
            let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
            let expected = sign * catalan(m) / 2f64.powi(2 * m as i32 + 1);
            assert!((term - expected).abs() < 1e-15, "m={m}: {term} vs {expected}");
        }
    }

    #[test]
    fn two_state_series_is_alternating_and_bounded() {
        // on the boundary of convergence the error stays below the next term
        let report = eval_series(&two_by_two(), 0, 41).unwrap();
        let exact = 1.0 - 2f64.sqrt();
        let m40 = report.partial_sums[40];
        assert!((m40 - exact).abs() <= report.terms[41].abs());
        assert!((m40 - exact).abs() > 1e-4);
    }

    #[test]
    fn zeroth_order_series_is_kernel_at_zero() {
        let split = SpectrumSplit::anharmonic(0.3, 2, 30).unwrap();
        let report = eval_series(&split, 0, 0).unwrap();
        let r0 = crate::kernel::eval_r(&split, 0, 0.0, crate::kernel::EvalMode::Resolvent).unwrap();
        assert_eq!(report.result.delta_e, r0);
    }

    #[test]
    fn oracle_simple_cases() {
        let ev = diagonalize_oracle(&two_by_two());
        assert!((ev[0] - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!((ev[1] - (1.0 + 2f64.sqrt())).abs() < 1e-15);
        let ev = diagonalize_oracle(&SpectrumSplit::anharmonic(0.0, 2, 10).unwrap());
        for (n, e) in ev.iter().enumerate() {
            assert_eq!(*e, (2 * n + 1) as f64);
        }
    }

    #[test]
    fn result_serializes_with_field_names() {
        let r = solve_root(&two_by_two(), 0, &SolveOptions::default()).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in ["gamma", "lambda", "basis", "method", "E0", "deltaE", "E_total", "iterations", "residual"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["method"], "root");
    }

    #[test]
    fn excited_quartic_levels_follow_oracle() {
        let split = SpectrumSplit::anharmonic(1.0, 2, 60).unwrap();
        let oracle = diagonalize_oracle(&split);
        for gamma in 0..8 {
            let r = solve_root(&split, gamma, &SolveOptions::default()).unwrap();
            assert!((r.e_total - oracle[gamma]).abs() < 1e-10, "gamma={gamma}");
        }
    }
}
