//! The kernel function
//!
//! ```text
//! R_g(z) = sum_{l>=1} sum_{i_1..i_l != g} g[g,i_1] g[i_1,i_2] ... g[i_l,g]
//!                     / ((E_g - E_{i_1} - z) ... (E_g - E_{i_l} - z))
//! ```
//!
//! Writing `v = g[g, .]`, `D(z) = diag(E_g - E_i - z)` and `G` for the coupling
//! block on the complement of `g`, the `l`-th term is `v^T D^{-1} (G D^{-1})^{l-1} v`
//! and the whole series is `v^T (D(z) - G)^{-1} v = v^T (S - z I)^{-1} v` with
//! `S = D(0) - G`. The closed form is used for evaluation; the literal series is
//! kept as a diagnostic.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg::{bandwidth, bordered_quadratic_form, ShiftedFactor};
use crate::model::SpectrumSplit;

/// Default Taylor order for kernel jets.
pub const DEFAULT_JET_ORDER: usize = 30;

/// `z` closer than this to some `E_g - E_i` is rejected.
pub const POLE_GUARD: f64 = 1e-12;

/// Path-sum terms are grouped in blocks of this many orders.
const DIVERGENCE_BLOCK: usize = 4;

/// Consecutive non-decreasing block maxima that mark a divergent path sum.
const DIVERGENCE_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// `v^T (D(z) - G)^{-1} v` by a linear solve.
    Resolvent,
    /// Literal partial sum over path lengths `1..=max_order`.
    PathSum { max_order: usize },
}

/// Ingredients of `R_g(z)` for one state `g`, restricted to the states that
/// are connected to `g` through nonzero couplings (the rest never appear on a
/// path and contribute nothing).
#[derive(Debug)]
pub struct KernelContext {
    gamma: usize,
    e_gamma: f64,
    indices: Vec<usize>,
    v: DVector<f64>,
    gaps: Vec<f64>,
    g: DMatrix<f64>,
    s: DMatrix<f64>,
    bandwidth: usize,
    base: OnceLock<Option<ShiftedFactor>>,
    poles: OnceLock<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSumReport {
    pub value: f64,
    /// Term `l` of the series at position `l - 1`.
    pub terms: Vec<f64>,
}

impl KernelContext {
    pub fn new(split: &SpectrumSplit, gamma: usize) -> Result<Self> {
        if gamma >= split.dim() {
            return Err(Error::StateOutOfRange {
                index: gamma,
                dim: split.dim(),
            });
        }
        let e_gamma = split.energies()[gamma];
        let indices: Vec<usize> = split
            .connected_component(gamma)
            .into_iter()
            .filter(|&i| i != gamma)
            .collect();
        let coupling = split.coupling();
        let v = DVector::from_iterator(indices.len(), indices.iter().map(|&i| coupling[(gamma, i)]));
        let gaps: Vec<f64> = indices.iter().map(|&i| e_gamma - split.energies()[i]).collect();
        let g = coupling.select_rows(&indices).select_columns(&indices);
        let mut s = -&g;
        for (k, gap) in gaps.iter().enumerate() {
            s[(k, k)] = *gap;
        }
        let bandwidth = bandwidth(&s);
        Ok(Self {
            gamma,
            e_gamma,
            indices,
            v,
            gaps,
            g,
            s,
            bandwidth,
            base: OnceLock::new(),
            poles: OnceLock::new(),
        })
    }

    pub fn gamma(&self) -> usize {
        self.gamma
    }

    pub fn e_gamma(&self) -> f64 {
        self.e_gamma
    }

    /// Complement states that carry paths back to `gamma`, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn couplings(&self) -> &DVector<f64> {
        &self.v
    }

    /// `E_g - E_i` over [`Self::indices`].
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// True when no path leaves `gamma`, so `R_g` vanishes identically.
    pub fn is_decoupled(&self) -> bool {
        self.indices.is_empty() || self.v.iter().all(|&x| x == 0.0)
    }

    /// Factorization of `S - z I`.
    pub fn factor(&self, z: f64) -> Result<ShiftedFactor> {
        ShiftedFactor::new(&self.s, self.bandwidth, z).ok_or(Error::Pole { z, distance: 0.0 })
    }

    fn base_factor(&self) -> Result<&ShiftedFactor> {
        self.base
            .get_or_init(|| ShiftedFactor::new(&self.s, self.bandwidth, 0.0))
            .as_ref()
            .ok_or(Error::Pole {
                z: 0.0,
                distance: 0.0,
            })
    }

    fn check_denominators(&self, z: f64) -> Result<()> {
        if let Some(distance) = self
            .gaps
            .iter()
            .map(|gap| (gap - z).abs())
            .find(|d| *d < POLE_GUARD)
        {
            return Err(Error::Pole { z, distance });
        }
        Ok(())
    }

    /// `R_g(z)` in the requested mode.
    pub fn eval(&self, z: f64, mode: EvalMode) -> Result<f64> {
        match mode {
            EvalMode::Resolvent => self.resolvent(z),
            EvalMode::PathSum { max_order } => self.path_sum(z, max_order).map(|r| r.value),
        }
    }

    /// `v^T (S - z I)^{-1} v`.
    pub fn resolvent(&self, z: f64) -> Result<f64> {
        if self.is_decoupled() {
            return Ok(0.0);
        }
        self.check_denominators(z)?;
        let x = if z == 0.0 {
            self.base_factor()?.solve(&self.v)
        } else {
            self.factor(z)?.solve(&self.v)
        };
        let value = self.v.dot(&x);
        if !value.is_finite() {
            return Err(Error::Pole { z, distance: 0.0 });
        }
        Ok(value)
    }

    /// Partial sums of the literal path series up to length `max_order`.
    pub fn path_sum(&self, z: f64, max_order: usize) -> Result<PathSumReport> {
        if self.is_decoupled() {
            return Ok(PathSumReport {
                value: 0.0,
                terms: vec![0.0; max_order],
            });
        }
        self.check_denominators(z)?;
        let inv_d: DVector<f64> =
            DVector::from_iterator(self.gaps.len(), self.gaps.iter().map(|gap| 1.0 / (gap - z)));

        let mut y = self.v.component_mul(&inv_d);
        let mut terms = Vec::with_capacity(max_order);
        // Term magnitudes can oscillate while growing, so growth is judged on
        // the maxima of consecutive blocks.
        let mut block_max = 0.0f64;
        let mut previous_block = f64::INFINITY;
        let mut run = 0;
        for order in 1..=max_order {
            if order > 1 {
                y = (&self.g * &y).component_mul(&inv_d);
            }
            let term = self.v.dot(&y);
            terms.push(term);
            if !term.is_finite() {
                return Err(Error::PathSumDivergence { order });
            }
            block_max = block_max.max(term.abs());
            if order % DIVERGENCE_BLOCK == 0 {
                if block_max > 0.0 && block_max >= previous_block {
                    run += 1;
                    if run >= DIVERGENCE_RUN {
                        return Err(Error::PathSumDivergence { order });
                    }
                } else {
                    run = 0;
                }
                previous_block = block_max;
                block_max = 0.0;
            }
            if y.iter().all(|&x| x == 0.0) {
                terms.resize(max_order, 0.0);
                break;
            }
        }
        Ok(PathSumReport {
            value: terms.iter().sum(),
            terms,
        })
    }

    /// Taylor coefficients of `R_g` about `z = 0`: `r_k = v^T S^{-(k+1)} v`.
    pub fn jet(&self, order: usize) -> Result<Jet> {
        if self.is_decoupled() {
            return Ok(Jet::zero(order));
        }
        let factor = self.base_factor()?;
        Ok(Self::jet_with(factor, &self.v, order))
    }

    /// Taylor coefficients of `R_g` about `z = center`, in powers of `z - center`.
    pub fn jet_at(&self, center: f64, order: usize) -> Result<Jet> {
        if center == 0.0 {
            return self.jet(order);
        }
        if self.is_decoupled() {
            return Ok(Jet::zero(order));
        }
        let factor = self.factor(center)?;
        Ok(Self::jet_with(&factor, &self.v, order))
    }

    fn jet_with(factor: &ShiftedFactor, v: &DVector<f64>, order: usize) -> Jet {
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut x = factor.solve(v);
        coeffs.push(v.dot(&x));
        for _ in 0..order {
            x = factor.solve(&x);
            coeffs.push(v.dot(&x));
        }
        Jet::from_coeffs(coeffs)
    }

    /// Eigenvalues of `S`, ascending: the values of `z` where `R_g` has poles.
    /// Eigen-directions orthogonal to `v` give removable points that are
    /// still listed.
    pub fn poles(&self) -> &[f64] {
        self.poles.get_or_init(|| {
            if self.indices.is_empty() {
                return Vec::new();
            }
            let mut ev: Vec<f64> = self.s.clone().symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        })
    }

    /// `(S, v)` restricted to the given positions in [`Self::indices`].
    fn sub_problem(&self, positions: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let s = self.s.select_rows(positions).select_columns(positions);
        let v = DVector::from_iterator(positions.len(), positions.iter().map(|&p| self.v[p]));
        (s, v)
    }
}

/// `R_g(z)` for a split.
pub fn eval_r(split: &SpectrumSplit, gamma: usize, z: f64, mode: EvalMode) -> Result<f64> {
    KernelContext::new(split, gamma)?.eval(z, mode)
}

/// Taylor jet of `R_g` at `z = 0`.
pub fn jet_r(split: &SpectrumSplit, gamma: usize, order: usize) -> Result<Jet> {
    KernelContext::new(split, gamma)?.jet(order)
}

/// How intermediate states are numbered for the max-index cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// `n` is the basis label `0..K-1`.
    RawIndex,
    /// `n` is the 1-based position in the basis, `label + 1`; with this
    /// numbering `n` is also the size of the truncated basis.
    #[default]
    Ordinal,
    /// States with no path to `gamma` are dropped and the rest (excluding
    /// `gamma`) are numbered `1, 2, 3, ...`.
    CoupledSubspace,
}

impl Convention {
    pub fn label(self) -> &'static str {
        match self {
            Convention::RawIndex => "raw-index",
            Convention::Ordinal => "ordinal",
            Convention::CoupledSubspace => "coupled-subspace",
        }
    }
}

/// `R^c(z, n)`: the part of `R_g(z)` from paths whose largest intermediate
/// state is number `n`, with running totals.
#[derive(Debug, Clone, Serialize)]
pub struct CutSeriesReport {
    pub gamma: usize,
    pub z: f64,
    pub convention: Convention,
    pub values: BTreeMap<usize, f64>,
    pub cumulative: BTreeMap<usize, f64>,
}

impl CutSeriesReport {
    /// `n,R_c,cumulative` with 15 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,R_c,cumulative\n");
        for (n, value) in &self.values {
            let _ = writeln!(out, "{n},{value:.14e},{:.14e}", self.cumulative[n]);
        }
        out
    }
}

/// Cut series `R^c(z, n)` for `n` up to `max_n` in the given numbering.
///
/// Each value is the increment of `v^T (S - zI)^{-1} v` when state `n` is
/// bordered onto the states numbered below it, i.e. `y_n^2 / d_n` from an
/// `L D L^T` factorization taken in numbering order. That equals
/// `R_trunc(n) - R_trunc(n-1)` without forming the difference.
pub fn cut_series(
    split: &SpectrumSplit,
    gamma: usize,
    z: f64,
    max_n: usize,
    convention: Convention,
) -> Result<CutSeriesReport> {
    let ctx = KernelContext::new(split, gamma)?;
    ctx.check_denominators(z)?;

    let dim = split.dim();
    let (first_n, limit) = match convention {
        Convention::RawIndex => (0, dim - 1),
        Convention::Ordinal => (1, dim),
        Convention::CoupledSubspace => (1, ctx.indices.len()),
    };
    if max_n > limit {
        return Err(Error::InvalidArgument(format!(
            "cut level {max_n} exceeds the {limit} levels available under the {} convention",
            convention.label()
        )));
    }

    // number of each connected state under the convention, ascending
    let numbered: Vec<(usize, usize)> = ctx
        .indices
        .iter()
        .enumerate()
        .map(|(pos, &state)| {
            let n = match convention {
                Convention::RawIndex => state,
                Convention::Ordinal => state + 1,
                Convention::CoupledSubspace => pos + 1,
            };
            (n, pos)
        })
        .filter(|&(n, _)| n <= max_n)
        .collect();

    let mut values: BTreeMap<usize, f64> = (first_n..=max_n).map(|n| (n, 0.0)).collect();
    if !numbered.is_empty() && !ctx.is_decoupled() {
        let positions: Vec<usize> = numbered.iter().map(|&(_, p)| p).collect();
        let (mut s, v) = ctx.sub_problem(&positions);
        for i in 0..s.nrows() {
            s[(i, i)] -= z;
        }
        let bw = bandwidth(&s);
        let (d, y) = bordered_quadratic_form(&s, &v, bw).map_err(|_| Error::Pole { z, distance: 0.0 })?;
        for (k, &(n, _)) in numbered.iter().enumerate() {
            values.insert(n, y[k] * y[k] / d[k]);
        }
    }

    let mut cumulative = BTreeMap::new();
    let mut running = 0.0;
    for (&n, &value) in &values {
        running += value;
        cumulative.insert(n, running);
    }
    Ok(CutSeriesReport {
        gamma,
        z,
        convention,
        values,
        cumulative,
    })
}
