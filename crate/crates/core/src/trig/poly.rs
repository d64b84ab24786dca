use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// Exact rational coefficient.
pub type Rational = BigRational;

/// Coefficient field of a [`TrigPoly`].
pub trait Scalar:
    Clone
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Exact binary-to-rational conversion of a finite float.
pub fn rational_from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

/// Which half of a frequency pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cos,
    Sin,
}

/// Column index of a basis function in the ordering
/// `1, cos x, sin x, cos 2x, sin 2x, …` (frequency first, cosine before sine).
pub fn mode_index(freq: usize, parity: Parity) -> usize {
    match (freq, parity) {
        (0, _) => 0,
        (m, Parity::Cos) => 2 * m - 1,
        (m, Parity::Sin) => 2 * m,
    }
}

/// Inverse of [`mode_index`].
pub fn index_mode(index: usize) -> (usize, Parity) {
    if index == 0 {
        (0, Parity::Cos)
    } else if index % 2 == 1 {
        (index.div_ceil(2), Parity::Cos)
    } else {
        (index / 2, Parity::Sin)
    }
}

/// Real trigonometric polynomial `a0 + Σ a_m cos(mx) + b_m sin(mx)`, kept in
/// canonical form (no trailing zero frequency pairs).
#[derive(Clone, PartialEq)]
pub struct TrigPoly<T> {
    a0: T,
    cos: Vec<T>,
    sin: Vec<T>,
}

pub type ExactPoly = TrigPoly<Rational>;
pub type FloatPoly = TrigPoly<f64>;

impl<T: Scalar> TrigPoly<T> {
    pub fn new(a0: T, mut cos: Vec<T>, mut sin: Vec<T>) -> Self {
        let n = cos.len().max(sin.len());
        cos.resize(n, T::zero());
        sin.resize(n, T::zero());
        let mut p = TrigPoly { a0, cos, sin };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        TrigPoly { a0: T::zero(), cos: Vec::new(), sin: Vec::new() }
    }

    pub fn constant(c: T) -> Self {
        TrigPoly { a0: c, cos: Vec::new(), sin: Vec::new() }
    }

    /// `c·cos(mx)` or `c·sin(mx)`; frequency 0 gives a constant (zero for sine).
    pub fn monomial(freq: usize, parity: Parity, c: T) -> Self {
        let mut p = Self::zero();
        p.add_term(freq as i64, parity, c);
        p.trim();
        p
    }

    pub fn cos_mode(freq: usize) -> Self {
        Self::monomial(freq, Parity::Cos, T::one())
    }

    pub fn sin_mode(freq: usize) -> Self {
        Self::monomial(freq, Parity::Sin, T::one())
    }

    pub fn a0(&self) -> &T {
        &self.a0
    }

    pub fn cos_coeffs(&self) -> &[T] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[T] {
        &self.sin
    }

    /// Maximal frequency N.
    pub fn degree(&self) -> usize {
        self.cos.len()
    }

    pub fn is_zero(&self) -> bool {
        self.cos.is_empty() && self.a0.is_zero()
    }

    /// Coefficient of `cos(mx)` / `sin(mx)`; frequency 0 cosine is `a0`.
    pub fn coeff(&self, freq: usize, parity: Parity) -> T {
        match (freq, parity) {
            (0, Parity::Cos) => self.a0.clone(),
            (0, Parity::Sin) => T::zero(),
            (m, Parity::Cos) => self.cos.get(m - 1).cloned().unwrap_or_else(T::zero),
            (m, Parity::Sin) => self.sin.get(m - 1).cloned().unwrap_or_else(T::zero),
        }
    }

    /// Coefficient vector in [`mode_index`] ordering, length `2N+1`.
    pub fn to_vector(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(2 * self.degree() + 1);
        v.push(self.a0.clone());
        for (c, s) in self.cos.iter().zip(&self.sin) {
            v.push(c.clone());
            v.push(s.clone());
        }
        v
    }

    pub fn from_vector(v: &[T]) -> Self {
        let mut p = Self::zero();
        for (i, c) in v.iter().enumerate() {
            if !c.is_zero() {
                let (m, par) = index_mode(i);
                p.add_term(m as i64, par, c.clone());
            }
        }
        p.trim();
        p
    }

    /// Highest nonzero column in [`mode_index`] ordering.
    pub fn leading_index(&self) -> Option<usize> {
        let n = self.degree();
        if n == 0 {
            return if self.a0.is_zero() { None } else { Some(0) };
        }
        if !self.sin[n - 1].is_zero() {
            Some(2 * n)
        } else {
            Some(2 * n - 1)
        }
    }

    pub fn derivative(&self) -> Self {
        let mut cos = Vec::with_capacity(self.degree());
        let mut sin = Vec::with_capacity(self.degree());
        for m in 1..=self.degree() {
            let k = T::from_i64(m as i64);
            // (a cos mx + b sin mx)' = m b cos mx − m a sin mx
            cos.push(k.clone() * self.sin[m - 1].clone());
            sin.push(-(k * self.cos[m - 1].clone()));
        }
        Self::new(T::zero(), cos, sin)
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, c: &T) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self::new(
            self.a0.clone() * c.clone(),
            self.cos.iter().map(|a| a.clone() * c.clone()).collect(),
            self.sin.iter().map(|b| b.clone() * c.clone()).collect(),
        )
    }

    /// Exact product via product-to-sum identities.
    pub fn multiply(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let half = T::from_ratio(1, 2);
        let mut out = Self::zero();
        out.reserve(self.degree() + other.degree());
        let lhs = self.terms();
        let rhs = other.terms();
        for (m, pm, a) in &lhs {
            for (k, pk, b) in &rhs {
                let c = a.clone() * b.clone();
                let (m, k) = (*m as i64, *k as i64);
                match (pm, pk) {
                    (Parity::Cos, Parity::Cos) => {
                        // cos a cos b = ½[cos(a−b) + cos(a+b)]
                        let h = c * half.clone();
                        out.add_term(m - k, Parity::Cos, h.clone());
                        out.add_term(m + k, Parity::Cos, h);
                    }
                    (Parity::Sin, Parity::Sin) => {
                        // sin a sin b = ½[cos(a−b) − cos(a+b)]
                        let h = c * half.clone();
                        out.add_term(m - k, Parity::Cos, h.clone());
                        out.add_term(m + k, Parity::Cos, -h);
                    }
                    (Parity::Sin, Parity::Cos) => {
                        // sin a cos b = ½[sin(a+b) + sin(a−b)]
                        let h = c * half.clone();
                        out.add_term(m + k, Parity::Sin, h.clone());
                        out.add_term(m - k, Parity::Sin, h);
                    }
                    (Parity::Cos, Parity::Sin) => {
                        let h = c * half.clone();
                        out.add_term(k + m, Parity::Sin, h.clone());
                        out.add_term(k - m, Parity::Sin, h);
                    }
                }
            }
        }
        out.trim();
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::constant(T::one());
        for _ in 0..n {
            acc = acc.multiply(self);
        }
        acc
    }

    /// Nonzero terms as `(frequency, parity, coefficient)`.
    pub fn terms(&self) -> Vec<(usize, Parity, T)> {
        let mut t = Vec::new();
        if !self.a0.is_zero() {
            t.push((0, Parity::Cos, self.a0.clone()));
        }
        for m in 1..=self.degree() {
            if !self.cos[m - 1].is_zero() {
                t.push((m, Parity::Cos, self.cos[m - 1].clone()));
            }
            if !self.sin[m - 1].is_zero() {
                t.push((m, Parity::Sin, self.sin[m - 1].clone()));
            }
        }
        t
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> TrigPoly<U> {
        TrigPoly::new(
            f(&self.a0),
            self.cos.iter().map(&f).collect(),
            self.sin.iter().map(&f).collect(),
        )
    }

    pub fn to_float(&self) -> FloatPoly {
        self.map(|c| c.to_f64())
    }

    /// Point evaluation in double precision.
    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.a0.to_f64();
        if self.degree() == 0 {
            return acc;
        }
        // rotate (cos mx, sin mx) by x each step; re-seed periodically to
        // keep the recurrence drift below rounding
        let (s1, c1) = (libm::sin(x), libm::cos(x));
        let (mut c, mut s) = (c1, s1);
        for m in 1..=self.degree() {
            if m % 32 == 0 {
                c = libm::cos(m as f64 * x);
                s = libm::sin(m as f64 * x);
            }
            acc += self.cos[m - 1].to_f64() * c + self.sin[m - 1].to_f64() * s;
            let nc = c * c1 - s * s1;
            s = s * c1 + c * s1;
            c = nc;
        }
        acc
    }

    /// Upper bound for `sup |p|`: sum of coefficient magnitudes.
    pub fn abs_sum(&self) -> f64 {
        let mut s = libm::fabs(self.a0.to_f64());
        for (a, b) in self.cos.iter().zip(&self.sin) {
            s += libm::hypot(a.to_f64(), b.to_f64());
        }
        s
    }

    fn reserve(&mut self, n: usize) {
        if self.cos.len() < n {
            self.cos.resize(n, T::zero());
            self.sin.resize(n, T::zero());
        }
    }

    /// Adds `c·cos(mx)` / `c·sin(mx)` for signed `m`.
    fn add_term(&mut self, m: i64, parity: Parity, c: T) {
        let (f, c) = match parity {
            Parity::Cos => (m.unsigned_abs() as usize, c),
            Parity::Sin if m < 0 => (m.unsigned_abs() as usize, -c),
            Parity::Sin => (m as usize, c),
        };
        if f == 0 {
            if parity == Parity::Cos {
                self.a0 = self.a0.clone() + c;
            }
            return;
        }
        self.reserve(f);
        match parity {
            Parity::Cos => self.cos[f - 1] = self.cos[f - 1].clone() + c,
            Parity::Sin => self.sin[f - 1] = self.sin[f - 1].clone() + c,
        }
    }

    fn trim(&mut self) {
        while let (Some(c), Some(s)) = (self.cos.last(), self.sin.last()) {
            if c.is_zero() && s.is_zero() {
                self.cos.pop();
                self.sin.pop();
            } else {
                break;
            }
        }
    }
}

impl FloatPoly {
    /// Drops coefficients with magnitude ≤ `tol`.
    pub fn chop(&self, tol: f64) -> Self {
        let f = |c: &f64| if libm::fabs(*c) <= tol { 0.0 } else { *c };
        self.map(f)
    }

    /// Max coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.to_vector();
        let b = other.to_vector();
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                libm::fabs(a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0))
            })
            .fold(0.0, f64::max)
    }

    /// Bound on `sup |p'|`.
    pub fn derivative_bound(&self) -> f64 {
        self.derivative().abs_sum()
    }

    /// Translate the argument: `p(x − θ)`.
    pub fn shift(&self, theta: f64) -> Self {
        let mut cos = vec![0.0; self.degree()];
        let mut sin = vec![0.0; self.degree()];
        for m in 1..=self.degree() {
            let (s, c) = (libm::sin(m as f64 * theta), libm::cos(m as f64 * theta));
            let (a, b) = (self.cos[m - 1], self.sin[m - 1]);
            // a cos(m(x−θ)) + b sin(m(x−θ))
            cos[m - 1] = a * c - b * s;
            sin[m - 1] = a * s + b * c;
        }
        Self::new(self.a0, cos, sin)
    }
}

impl ExactPoly {
    pub fn from_float(p: &FloatPoly) -> Self {
        p.map(|c| rational_from_f64(*c))
    }
}

impl<T: Scalar> Default for TrigPoly<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> Add for &TrigPoly<T> {
    type Output = TrigPoly<T>;
    fn add(self, rhs: Self) -> TrigPoly<T> {
        let n = self.degree().max(rhs.degree());
        let mut out = self.clone();
        out.reserve(n);
        for m in 1..=rhs.degree() {
            out.cos[m - 1] = out.cos[m - 1].clone() + rhs.cos[m - 1].clone();
            out.sin[m - 1] = out.sin[m - 1].clone() + rhs.sin[m - 1].clone();
        }
        out.a0 = out.a0.clone() + rhs.a0.clone();
        out.trim();
        out
    }
}

impl<T: Scalar> Sub for &TrigPoly<T> {
    type Output = TrigPoly<T>;
    fn sub(self, rhs: Self) -> TrigPoly<T> {
        self + &(-rhs)
    }
}

impl<T: Scalar> Neg for &TrigPoly<T> {
    type Output = TrigPoly<T>;
    fn neg(self) -> TrigPoly<T> {
        self.map(|c| -c.clone())
    }
}

impl<T: Scalar> Mul for &TrigPoly<T> {
    type Output = TrigPoly<T>;
    fn mul(self, rhs: Self) -> TrigPoly<T> {
        self.multiply(rhs)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl<T: Scalar> $tr for TrigPoly<T> {
            type Output = TrigPoly<T>;
            fn $f(self, rhs: Self) -> TrigPoly<T> {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<T: Scalar> Neg for TrigPoly<T> {
    type Output = TrigPoly<T>;
    fn neg(self) -> TrigPoly<T> {
        -&self
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for TrigPoly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        if terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, p, c)) in terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            match (m, p) {
                (0, _) => write!(f, "{c}")?,
                (1, Parity::Cos) => write!(f, "({c})cos(x)")?,
                (1, Parity::Sin) => write!(f, "({c})sin(x)")?,
                (m, Parity::Cos) => write!(f, "({c})cos({m}x)")?,
                (m, Parity::Sin) => write!(f, "({c})sin({m}x)")?,
            }
        }
        Ok(())
    }
}

impl<T: Scalar> fmt::Debug for TrigPoly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrigPoly")
            .field("a0", &self.a0)
            .field("cos", &self.cos)
            .field("sin", &self.sin)
            .finish()
    }
}

/// Vector field `f ∂x` on the torus, identified with its coefficient.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct VectorField<T: Scalar> {
    pub coeff: TrigPoly<T>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(coeff: TrigPoly<T>) -> Self {
        VectorField { coeff }
    }
}

/// `[f∂x, g∂x] = (f g' − g f')∂x`.
pub fn lie_bracket<T: Scalar>(x: &VectorField<T>, y: &VectorField<T>) -> VectorField<T> {
    let (f, g) = (&x.coeff, &y.coeff);
    VectorField::new(&(f * &g.derivative()) - &(g * &f.derivative()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn derivative_examples() {
        let p = ExactPoly::sin_mode(1);
        assert_eq!(p.derivative(), ExactPoly::cos_mode(1));
        assert!(ExactPoly::constant(q(1, 1)).derivative().is_zero());
        let g = &ExactPoly::cos_mode(1) + &ExactPoly::cos_mode(3);
        let expect = -&(&ExactPoly::sin_mode(1) + &ExactPoly::monomial(3, Parity::Sin, q(3, 1)));
        assert_eq!(g.derivative(), expect);
    }

    #[test]
    fn product_examples() {
        let c = ExactPoly::cos_mode(1);
        let sq = &c * &c;
        assert_eq!(sq, ExactPoly::new(q(1, 2), vec![q(0, 1), q(1, 2)], vec![]));
        let two_c = c.scale(&q(2, 1));
        let r = &two_c * &ExactPoly::cos_mode(2);
        assert_eq!(r, &ExactPoly::cos_mode(1) + &ExactPoly::cos_mode(3));
        assert!((&c * &ExactPoly::zero()).is_zero());
    }

    #[test]
    fn trimming_is_canonical() {
        let p = FloatPoly::new(1.0, vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(p.degree(), 0);
        assert_eq!(p, FloatPoly::constant(1.0));
    }

    #[test]
    fn bracket_examples() {
        let s = ExactPoly::sin_mode(1);
        let c = ExactPoly::cos_mode(1);
        let f1 = VectorField::new(&s * &s);
        let f2 = VectorField::new(&c * &c);
        assert_eq!(lie_bracket(&f1, &f2).coeff, -ExactPoly::sin_mode(2));
        assert!(lie_bracket(&f1, &f1).coeff.is_zero());
        let a = lie_bracket(&VectorField::new(ExactPoly::sin_mode(2)), &VectorField::new(s));
        let expect = &ExactPoly::monomial(3, Parity::Sin, q(-1, 2))
            + &ExactPoly::monomial(1, Parity::Sin, q(3, 2));
        assert_eq!(a.coeff, expect);
    }

    #[test]
    fn float_eval_matches_definition() {
        let p = FloatPoly::new(0.5, vec![1.0, 0.0, -2.0], vec![0.25, 3.0, 0.0]);
        for &x in &[0.0, 0.3, 1.7, 4.0] {
            let direct = 0.5 + libm::cos(x) + 0.25 * libm::sin(x) + 3.0 * libm::sin(2.0 * x)
                - 2.0 * libm::cos(3.0 * x);
            assert!((p.eval(x) - direct).abs() < 1e-14);
        }
        let sh = p.shift(0.4);
        assert!((sh.eval(1.1) - p.eval(0.7)).abs() < 1e-13);
    }

    #[test]
    fn mode_index_roundtrip() {
        for i in 0..20 {
            let (m, p) = index_mode(i);
            assert_eq!(mode_index(m, p), i);
        }
    }
}
