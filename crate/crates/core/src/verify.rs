//! Numerical checks of the identities linking the kernel series and the root
//! equation.
//!
//! * The `z^0` Laurent coefficient of `F(z) = z ln(1 + R(z)/z)` equals the level
//!   shift `dE`.
//! * With `C_n = sum_{m>=n-1} n (-1)^{m-n+1} / ((m+1)(m-n+1)!) d^{m-n+1} R^{m+1}(0)`,
//!   the power relation `C_n = C_1^n` holds.
//! * The convolution identity behind it,
//!   `d^k R^{k+n+1} = sum_{m=0}^{k} n/(n+1) (k+n+1)/(k+n-m) k!/((m+1)!(k-m)!)
//!                    d^{k-m} R^{k+n-m} d^m R^{m+1}` at `z = 0`.
//!
//! Everything is evaluated on jets in floating point.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::eigensolve::{solve_root, SolveOptions};
use crate::error::{Error, Result};
use crate::jet::{factorial, Jet};
use crate::kernel::KernelContext;
use crate::model::{position_power_matrix, SpectrumSplit};

pub const POWER_RELATION_TOL: f64 = 1e-9;
pub const DERIVATIVE_IDENTITY_TOL: f64 = 1e-10;
pub const LAURENT_TOL: f64 = 1e-10;
pub const RS_LINEAR_TOL: f64 = 1e-4;
pub const RS_QUADRATIC_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdentityKind {
    LaurentF,
    PowerRelation { n: usize },
    DerivativeIdentity { k: usize, n: usize },
    RsConsistency,
}

/// Outcome of one identity check. `passed` is `residual <= tolerance`;
/// `last_term` is the size of the last retained series term where the check
/// involves a truncated series (zero otherwise).
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub identity: IdentityKind,
    pub inputs: String,
    pub residual: f64,
    pub tolerance: f64,
    pub last_term: f64,
    pub passed: bool,
}

impl IdentityReport {
    fn new(identity: IdentityKind, inputs: String, residual: f64, tolerance: f64, last_term: f64) -> Self {
        Self {
            identity,
            inputs,
            residual,
            tolerance,
            last_term,
            passed: residual <= tolerance,
        }
    }
}

fn describe(split: &SpectrumSplit, gamma: usize, order: usize) -> String {
    let model = match split.meta().lambda() {
        Some(lambda) => format!("lambda={lambda}"),
        None => "custom".to_string(),
    };
    format!("{model} basis={} gamma={gamma} order={order}", split.dim())
}

fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `R, R^2, ..., R^count` at `z = 0`, truncated at `order`.
fn kernel_powers(split: &SpectrumSplit, gamma: usize, order: usize, count: usize) -> Result<Vec<Jet>> {
    let jet = KernelContext::new(split, gamma)?.jet(order)?;
    Ok(jet.powers(count))
}

/// `z^0` coefficient of the Laurent expansion `F = sum_k (-1)^k/(k+1) R^{k+1} z^{-k}`,
/// truncated after `k = order`. Term `k` contributes its `[z^k] R^{k+1}`.
pub fn laurent_zero_coeff_f(split: &SpectrumSplit, gamma: usize, order: usize) -> Result<f64> {
    let powers = kernel_powers(split, gamma, order, order + 1)?;
    let mut total = 0.0;
    for (k, power) in powers.iter().enumerate() {
        // R^{k+1} z^{-k}: the coefficient that lands on z^0
        let weight = if k % 2 == 0 { 1.0 } else { -1.0 } / (k + 1) as f64;
        total += weight * power.coeff(k);
    }
    Ok(total)
}

/// Contour estimate of the same coefficient.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ContourEstimate {
    pub value: f64,
    pub radius: f64,
    pub nodes: usize,
}

/// The `z^0` Laurent coefficient of `F` on a circle `|z| = rho`, by the
/// trapezoidal rule on `nodes` points with `R` evaluated by complex solves.
///
/// A radius is accepted when `(z + R(z))/z` has winding number zero on the
/// circle, i.e. the disc holds exactly one zero of `z + R(z)` and no pole of
/// `R`. The logarithm is followed continuously around the circle.
pub fn laurent_zero_coeff_f_contour(
    split: &SpectrumSplit,
    gamma: usize,
    nodes: usize,
) -> Result<ContourEstimate> {
    if nodes < 8 {
        return Err(Error::InvalidArgument(format!("need at least 8 quadrature nodes, got {nodes}")));
    }
    let ctx = KernelContext::new(split, gamma)?;
    if ctx.is_decoupled() {
        return Ok(ContourEstimate {
            value: 0.0,
            radius: 0.0,
            nodes,
        });
    }
    let nearest_pole = ctx
        .poles()
        .iter()
        .map(|p| p.abs())
        .fold(f64::INFINITY, f64::min);
    if !nearest_pole.is_finite() || nearest_pole == 0.0 {
        return Err(Error::Pole {
            z: 0.0,
            distance: nearest_pole,
        });
    }

    let n = ctx.indices().len();
    let coupling = split.coupling();
    let mut s = DMatrix::<Complex<f64>>::zeros(n, n);
    for (a, &i) in ctx.indices().iter().enumerate() {
        for (b, &j) in ctx.indices().iter().enumerate() {
            s[(a, b)] = Complex::new(-coupling[(i, j)], 0.0);
        }
        s[(a, a)] = Complex::new(ctx.gaps()[a], 0.0);
    }
    let v: DVector<Complex<f64>> = ctx.couplings().map(|x| Complex::new(x, 0.0));

    for fraction in [0.5, 0.7, 0.3, 0.85, 0.15] {
        let radius = fraction * nearest_pole;
        let mut samples = Vec::with_capacity(nodes);
        let mut singular = false;
        for j in 0..nodes {
            let z = Complex::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
            let mut shifted = s.clone();
            for d in 0..n {
                shifted[(d, d)] -= z;
            }
            match shifted.lu().solve(&v) {
                Some(x) => samples.push((z, v.dot(&x))),
                None => {
                    singular = true;
                    break;
                }
            }
        }
        if singular {
            continue;
        }

        let wrap = |step: f64| step - 2.0 * PI * (step / (2.0 * PI)).round();
        let args: Vec<f64> = samples.iter().map(|&(z, r)| ((z + r) / z).arg()).collect();
        let mut phase = args[0];
        let mut total = Complex::new(0.0, 0.0);
        for (j, &(z, r)) in samples.iter().enumerate() {
            if j > 0 {
                phase += wrap(args[j] - args[j - 1]);
            }
            let w = (z + r) / z;
            total += z * Complex::new(w.norm().ln(), phase);
        }
        let closing = phase + wrap(args[0] - args[nodes - 1]);
        let winding = ((closing - args[0]) / (2.0 * PI)).round();
        if winding == 0.0 {
            return Ok(ContourEstimate {
                value: total.re / nodes as f64,
                radius,
                nodes,
            });
        }
    }
    Err(Error::InvalidArgument(
        "no circle around the origin separates the root from the poles of R".into(),
    ))
}

/// `C_n` from `powers[p - 1] = R^p`, summed up to `m = order`, together with
/// the size of its last term.
fn power_coefficient(powers: &[Jet], n: usize, order: usize) -> (f64, f64) {
    let mut total = 0.0;
    let mut last = 0.0;
    for m in (n - 1)..=order {
        let j = m + 1 - n;
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        // d^j/dz^j R^{m+1} / j! is the Taylor coefficient
        let term = sign * n as f64 / (m + 1) as f64 * powers[m].coeff(j);
        total += term;
        last = term.abs();
    }
    (total, last)
}

/// `C_n` for the given split, summed up to `m = order`.
pub fn power_coefficient_c(split: &SpectrumSplit, gamma: usize, n: usize, order: usize) -> Result<f64> {
    if n == 0 || n > order + 1 {
        return Err(Error::InvalidArgument(format!("need 1 <= n <= order + 1, got n={n}")));
    }
    let powers = kernel_powers(split, gamma, order, order + 1)?;
    Ok(power_coefficient(&powers, n, order).0)
}

/// Residual `|C_n - C_1^n| / (1 + |C_1|^n)`.
pub fn check_power_relation(split: &SpectrumSplit, gamma: usize, n: usize, order: usize) -> Result<IdentityReport> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("power relation needs n >= 2, got {n}")));
    }
    if order < n + 5 {
        return Err(Error::InvalidArgument(format!(
            "jet order {order} too low for n={n}: need at least {}",
            n + 5
        )));
    }
    let powers = kernel_powers(split, gamma, order, order + 1)?;
    let (c1, last1) = power_coefficient(&powers, 1, order);
    let (cn, last_n) = power_coefficient(&powers, n, order);
    let c1n = c1.powi(n as i32);
    let residual = (cn - c1n).abs() / (1.0 + c1n.abs());
    Ok(IdentityReport::new(
        IdentityKind::PowerRelation { n },
        describe(split, gamma, order),
        residual,
        POWER_RELATION_TOL,
        last1.max(last_n),
    ))
}

/// Both sides of the convolution identity at `z = 0`, `(lhs, rhs)`.
pub fn derivative_identity_sides(powers: &[Jet], k: usize, n: usize) -> (f64, f64) {
    let d = |order: usize, power: usize| powers[power - 1].derivative_at_zero(order);
    let lhs = d(k, k + n + 1);
    let nf = n as f64;
    let rhs = (0..=k)
        .map(|m| {
            let weight = nf / (nf + 1.0) * (k + n + 1) as f64 / (k + n - m) as f64 * factorial(k)
                / (factorial(m + 1) * factorial(k - m));
            weight * d(k - m, k + n - m) * d(m, m + 1)
        })
        .sum();
    (lhs, rhs)
}

/// Relative difference of the two sides of the convolution identity.
pub fn check_derivative_identity(
    split: &SpectrumSplit,
    gamma: usize,
    k: usize,
    n: usize,
    order: usize,
) -> Result<IdentityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("derivative identity needs n >= 1".into()));
    }
    if k + n + 1 > order {
        return Err(Error::InvalidArgument(format!(
            "order overflow: k + n + 1 = {} exceeds jet order {order}",
            k + n + 1
        )));
    }
    let powers = kernel_powers(split, gamma, order, k + n + 1)?;
    let (lhs, rhs) = derivative_identity_sides(&powers, k, n);
    Ok(IdentityReport::new(
        IdentityKind::DerivativeIdentity { k, n },
        describe(split, gamma, order),
        relative_difference(lhs, rhs),
        DERIVATIVE_IDENTITY_TOL,
        0.0,
    ))
}

/// Series, Laurent and root values of the shift for one level.
#[derive(Debug, Clone, Serialize)]
pub struct Equivalence {
    pub root: f64,
    pub series: f64,
    pub laurent: f64,
    pub contour: Option<f64>,
    pub last_term: f64,
}

impl Equivalence {
    /// Largest pairwise gap among root, series and Laurent values.
    pub fn spread(&self) -> f64 {
        let vals = [self.root, self.series, self.laurent];
        let mut worst: f64 = 0.0;
        for a in vals {
            for b in vals {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

pub fn equivalence(split: &SpectrumSplit, gamma: usize, order: usize) -> Result<Equivalence> {
    let root = solve_root(split, gamma, &SolveOptions::default())?.delta_e;
    let series = crate::eigensolve::eval_series(split, gamma, order)?;
    let laurent = laurent_zero_coeff_f(split, gamma, order)?;
    let contour = laurent_zero_coeff_f_contour(split, gamma, 256).ok().map(|c| c.value);
    Ok(Equivalence {
        root,
        series: series.result.delta_e,
        laurent,
        contour,
        last_term: series.last_term,
    })
}

/// Laurent coefficient against the root-equation shift.
pub fn check_laurent(split: &SpectrumSplit, gamma: usize, order: usize) -> Result<IdentityReport> {
    let eq = equivalence(split, gamma, order)?;
    Ok(IdentityReport::new(
        IdentityKind::LaurentF,
        describe(split, gamma, order),
        (eq.laurent - eq.root).abs(),
        LAURENT_TOL,
        eq.last_term,
    ))
}

/// Low-order fit of the quartic ground state against perturbation theory.
#[derive(Debug, Clone, Serialize)]
pub struct RsFit {
    pub lambdas: Vec<f64>,
    pub degree: usize,
    /// Fitted `c_1, ..., c_degree` of `E~_0(lambda) - 1`.
    pub coefficients: Vec<f64>,
    /// `<0|x^4|0>`.
    pub first_order: f64,
    /// `-sum_{k != 0} |<0|x^4|k>|^2 / (2k)`.
    pub second_order: f64,
    pub report: IdentityReport,
    pub quadratic_residual: f64,
    pub quadratic_passed: bool,
}

/// Default coupling grid for [`rs_consistency`]: `0.002, 0.004, ..., 0.02`.
pub fn default_rs_grid() -> Vec<f64> {
    (1..=10).map(|j| 0.002 * j as f64).collect()
}

pub const DEFAULT_RS_DEGREE: usize = 6;

/// Fits `E~_0(lambda) - 1 = sum_{j=1}^{degree} c_j lambda^j` by least squares
/// over `lambdas` (ground state of the quartic oscillator on `basis` states)
/// and compares `c_1`, `c_2` with first- and second-order perturbation theory.
pub fn rs_consistency(lambdas: &[f64], basis: usize, degree: usize) -> Result<RsFit> {
    if degree < 2 {
        return Err(Error::IllConditioned(format!("degree {degree} cannot resolve the quadratic term")));
    }
    if lambdas.len() < degree {
        return Err(Error::IllConditioned(format!(
            "{} grid points for a degree-{degree} fit",
            lambdas.len()
        )));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::IllConditioned("grid points must be positive".into()));
    }
    let top = lambdas.iter().copied().fold(0.0, f64::max);
    let energies: Vec<f64> = lambdas
        .iter()
        .map(|&l| {
            let split = SpectrumSplit::anharmonic(l, 2, basis)?;
            Ok(solve_root(&split, 0, &SolveOptions::default())?.e_total)
        })
        .collect::<Result<_>>()?;

    // columns scaled by top^j so the design matrix is O(1)
    let a = DMatrix::from_fn(lambdas.len(), degree, |i, j| (lambdas[i] / top).powi(j as i32 + 1));
    let b = DVector::from_iterator(lambdas.len(), energies.iter().map(|e| e - 1.0));
    let svd = a.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    if !(smin > 0.0) || smax / smin > 1e12 {
        return Err(Error::IllConditioned(format!(
            "design matrix condition number {:e}",
            smax / smin
        )));
    }
    let scaled = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let coefficients: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(j, c)| c / top.powi(j as i32 + 1))
        .collect();

    let x4 = position_power_matrix(basis, 4, 4);
    let first_order = x4[(0, 0)];
    let second_order = -(1..basis)
        .map(|k| x4[(0, k)] * x4[(0, k)] / (2 * k) as f64)
        .sum::<f64>();

    let linear_residual = (coefficients[0] - first_order).abs();
    let quadratic_residual = (coefficients[1] - second_order).abs();
    Ok(RsFit {
        lambdas: lambdas.to_vec(),
        degree,
        report: IdentityReport::new(
            IdentityKind::RsConsistency,
            format!("grid={}..{} points={} degree={degree} basis={basis}", lambdas[0], top, lambdas.len()),
            linear_residual,
            RS_LINEAR_TOL,
            0.0,
        ),
        coefficients,
        first_order,
        second_order,
        quadratic_residual,
        quadratic_passed: quadratic_residual <= RS_QUADRATIC_TOL,
    })
}
