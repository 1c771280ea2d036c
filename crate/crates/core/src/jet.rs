//! Truncated Taylor polynomials about `z = 0`.
//!
//! A [`Jet`] of order `M` stores `c_0..=c_M` for `f(z) = sum c_k z^k + O(z^{M+1})`.
//! All arithmetic drops terms above order `M`, so products and powers are
//! exact on the retained coefficients.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![0.0; order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        Self::constant(1.0, order)
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut jet = Self::zero(order);
        jet.coeffs[0] = value;
        jet
    }

    /// The identity function `z`, truncated at `order`.
    pub fn variable(order: usize) -> Self {
        let mut jet = Self::zero(order);
        if order >= 1 {
            jet.coeffs[1] = 1.0;
        }
        jet
    }

    /// Builds a jet from coefficients `c_0..=c_M`. An empty slice gives the
    /// order-0 zero jet.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self::zero(0);
        }
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `[z^k] f`; zero above the truncation order.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `d^k f / dz^k` at `z = 0`, i.e. `k! c_k`.
    pub fn derivative_at_zero(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    /// Horner evaluation of the retained polynomial.
    pub fn eval(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, 0.0);
        Self { coeffs }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Truncated Cauchy product; the result has the smaller of the two orders.
    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let order = self.order().min(other.order());
        let mut coeffs = vec![0.0; order + 1];
        for (k, out) in coeffs.iter_mut().enumerate() {
            *out = (0..=k).map(|j| self.coeffs[j] * other.coeffs[k - j]).sum();
        }
        Jet { coeffs }
    }

    /// `f^p` by repeated multiplication. `p = 0` gives the constant 1.
    pub fn powi(&self, p: usize) -> Jet {
        let mut acc = Jet::one(self.order());
        for _ in 0..p {
            acc = acc.mul_jet(self);
        }
        acc
    }

    /// `[f, f^2, ..., f^count]`, each truncated at this jet's order.
    pub fn powers(&self, count: usize) -> Vec<Jet> {
        let mut out: Vec<Jet> = Vec::with_capacity(count);
        while out.len() < count {
            let next = match out.last() {
                Some(prev) => prev.mul_jet(self),
                None => self.clone(),
            };
            out.push(next);
        }
        out
    }

    fn zip_with(&self, other: &Jet, op: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order().min(other.order());
        Jet {
            coeffs: (0..=order)
                .map(|k| op(self.coeffs[k], other.coeffs[k]))
                .collect(),
        }
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn geometric_series_square() {
        // 1/(1-z) squared is 1/(1-z)^2 with coefficients k+1
        let geo = Jet::from_coeffs(vec![1.0; 8]);
        let sq = geo.powi(2);
        for k in 0..8 {
            assert_eq!(sq.coeff(k), (k + 1) as f64);
        }
    }

    #[test]
    fn derivative_at_zero_uses_factorial() {
        let jet = Jet::from_coeffs(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(jet.derivative_at_zero(3), 24.0);
        assert_eq!(jet.derivative_at_zero(9), 0.0);
    }

    #[test]
    fn mixed_orders_truncate_to_smaller() {
        let a = Jet::from_coeffs(vec![1.0, 1.0, 1.0]);
        let b = Jet::variable(5);
        let p = &a * &b;
        assert_eq!(p.order(), 2);
        assert_eq!(p.coeffs(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn powers_matches_powi() {
        let a = Jet::from_coeffs(vec![0.5, -0.25, 0.125, 2.0]);
        let pw = a.powers(4);
        for (i, p) in pw.iter().enumerate() {
            assert_eq!(p, &a.powi(i + 1));
        }
    }

    fn jet_strategy(order: usize) -> impl Strategy<Value = Jet> {
        prop::collection::vec(-2.0f64..2.0, order + 1).prop_map(Jet::from_coeffs)
    }

    proptest! {
        #[test]
        fn product_is_commutative_and_matches_convolution(a in jet_strategy(6), b in jet_strategy(6)) {
            let ab = &a * &b;
            let ba = &b * &a;
            for k in 0..=6 {
                let direct: f64 = (0..=k).map(|j| a.coeff(j) * b.coeff(k - j)).sum();
                prop_assert!((ab.coeff(k) - direct).abs() <= 1e-12);
                prop_assert!((ab.coeff(k) - ba.coeff(k)).abs() <= 1e-12);
            }
        }

        #[test]
        fn power_rule_for_first_coefficient(a in jet_strategy(5), p in 1usize..6) {
            // [z^1] f^p = p f_0^{p-1} f_1
            let fp = a.powi(p);
            let expected = p as f64 * a.coeff(0).powi(p as i32 - 1) * a.coeff(1);
            prop_assert!((fp.coeff(1) - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }

        #[test]
        fn eval_is_ring_homomorphism_on_low_degree(a in jet_strategy(2), b in jet_strategy(2), z in -0.5f64..0.5) {
            // degree-2 inputs padded to order 4 multiply without truncation
            let a4 = a.truncate(4);
            let b4 = b.truncate(4);
            let prod = &a4 * &b4;
            let lhs = prod.eval(z);
            let rhs = a.eval(z) * b.eval(z);
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }
    }
}
