use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use super::closure::{check_odd, initial_space};
use super::poly::{mode_index, ExactPoly, Parity, Rational, Scalar};
use crate::Result;

/// Proof object that a polynomial lies in the saturation of a generating set.
///
/// `Basis(i)` refers to the i-th element of the generating set (for the
/// standard set `H_0`, the order is `1, cos x, sin x, cos 2x, …`).
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Basis(usize),
    LinComb(Vec<(Rational, Certificate)>),
    /// `(inner')^power`; power 3 is the cubed-derivative node.
    DerivativePower { power: u32, inner: Box<Certificate> },
}

impl Certificate {
    pub fn cubed(inner: Certificate) -> Self {
        Certificate::DerivativePower { power: 3, inner: Box::new(inner) }
    }

    pub fn zero() -> Self {
        Certificate::LinComb(Vec::new())
    }

    pub fn scaled(self, c: Rational) -> Self {
        if c.is_one() {
            self
        } else {
            Certificate::LinComb(alloc::vec![(c, self)])
        }
    }

    pub fn evaluate(&self, gens: &[ExactPoly]) -> ExactPoly {
        match self {
            Certificate::Basis(i) => gens[*i].clone(),
            Certificate::LinComb(terms) => terms.iter().fold(ExactPoly::zero(), |acc, (c, t)| {
                &acc + &t.evaluate(gens).scale(c)
            }),
            Certificate::DerivativePower { power, inner } => {
                inner.evaluate(gens).derivative().pow(*power)
            }
        }
    }

    /// Maximal nesting of derivative-power nodes.
    pub fn depth(&self) -> usize {
        match self {
            Certificate::Basis(_) => 0,
            Certificate::LinComb(t) => t.iter().map(|(_, c)| c.depth()).max().unwrap_or(0),
            Certificate::DerivativePower { inner, .. } => 1 + inner.depth(),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Certificate::Basis(_) => 1,
            Certificate::LinComb(t) => 1 + t.iter().map(|(_, c)| c.size()).sum::<usize>(),
            Certificate::DerivativePower { inner, .. } => 1 + inner.size(),
        }
    }

    /// Largest |numerator| or |denominator| bit length among coefficients.
    pub fn coefficient_bits(&self) -> u64 {
        match self {
            Certificate::Basis(_) => 0,
            Certificate::LinComb(t) => t
                .iter()
                .map(|(r, c)| r.numer().bits().max(r.denom().bits()).max(c.coefficient_bits()))
                .max()
                .unwrap_or(0),
            Certificate::DerivativePower { inner, .. } => inner.coefficient_bits(),
        }
    }

    /// Canonical flat form `Σ r_i Basis(i) + Σ c_j (p_j')^power`, with nested
    /// combinations distributed and proportional power terms merged. Each
    /// inner `p_j` is normalized (no constant part, leading coefficient 1).
    pub fn simplify(&self, gens: &[ExactPoly]) -> Certificate {
        let flat = self.flatten(gens);
        flat.into_certificate()
    }

    /// The flat form without re-wrapping.
    pub fn flatten(&self, gens: &[ExactPoly]) -> FlatCertificate {
        let mut acc = FlatCertificate::default();
        self.flatten_into(&Rational::one(), gens, &mut acc);
        acc.basis.retain(|_, c| !c.is_zero());
        acc.powers.retain(|t| !t.coeff.is_zero());
        acc
    }

    fn flatten_into(&self, scale: &Rational, gens: &[ExactPoly], acc: &mut FlatCertificate) {
        match self {
            Certificate::Basis(i) => {
                let e = acc.basis.entry(*i).or_insert_with(Rational::zero);
                *e += scale;
            }
            Certificate::LinComb(terms) => {
                for (c, t) in terms {
                    t.flatten_into(&(scale * c), gens, acc);
                }
            }
            Certificate::DerivativePower { power, inner } => {
                acc.push_power(scale, *power, inner.flatten(gens), gens);
            }
        }
    }
}

fn pow_rational(r: &Rational, n: u32) -> Rational {
    (0..n).fold(Rational::one(), |acc, _| acc * r)
}

/// One merged term `coeff · (key')^power` of a [`FlatCertificate`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTerm {
    pub coeff: Rational,
    pub power: u32,
    /// Evaluated inner polynomial, normalized.
    pub key: ExactPoly,
    /// Certificate for `key`.
    pub inner: Box<Certificate>,
}

/// Flattened certificate: basis part plus merged power terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatCertificate {
    pub basis: BTreeMap<usize, Rational>,
    pub powers: Vec<PowerTerm>,
}

impl FlatCertificate {
    /// Adds `scale · (inner')^power`, normalizing and merging with an
    /// existing proportional term.
    pub fn push_power(
        &mut self,
        scale: &Rational,
        power: u32,
        mut inner: FlatCertificate,
        gens: &[ExactPoly],
    ) {
        // constants do not survive the derivative
        inner.basis.retain(|i, c| gens[*i].degree() > 0 && !c.is_zero());
        inner.powers.retain(|t| !t.coeff.is_zero());
        let value = inner.evaluate(gens);
        let Some(lead_idx) = value.leading_index() else {
            return;
        };
        let lead = value.to_vector()[lead_idx].clone();
        let inv = lead.recip();
        inner.scale(&inv);
        let key = value.scale(&inv);
        let coeff = scale * pow_rational(&lead, power);
        match self.powers.iter_mut().find(|t| t.power == power && t.key == key) {
            Some(t) => t.coeff += coeff,
            None => self.powers.push(PowerTerm {
                coeff,
                power,
                key,
                inner: Box::new(inner.into_certificate()),
            }),
        }
    }

    /// `self += c · other`, merging power terms with equal keys.
    pub fn add_scaled(&mut self, other: &FlatCertificate, c: &Rational) {
        for (i, v) in &other.basis {
            *self.basis.entry(*i).or_insert_with(Rational::zero) += v * c;
        }
        for t in &other.powers {
            match self.powers.iter_mut().find(|s| s.power == t.power && s.key == t.key) {
                Some(s) => s.coeff += &t.coeff * c,
                None => {
                    let mut t = t.clone();
                    t.coeff *= c;
                    self.powers.push(t);
                }
            }
        }
    }

    fn cleaned(mut self) -> Self {
        self.basis.retain(|_, c| !c.is_zero());
        self.powers.retain(|t| !t.coeff.is_zero());
        self
    }

    pub fn depth(&self) -> usize {
        self.powers.iter().map(|t| 1 + t.inner.depth()).max().unwrap_or(0)
    }

    pub fn scale(&mut self, c: &Rational) {
        for v in self.basis.values_mut() {
            *v *= c;
        }
        for t in &mut self.powers {
            t.coeff *= c;
        }
    }

    pub fn evaluate(&self, gens: &[ExactPoly]) -> ExactPoly {
        let mut p = ExactPoly::zero();
        for (i, c) in &self.basis {
            p = &p + &gens[*i].scale(c);
        }
        for t in &self.powers {
            p = &p + &t.key.derivative().pow(t.power).scale(&t.coeff);
        }
        p
    }

    /// The basis part as a polynomial.
    pub fn basis_poly(&self, gens: &[ExactPoly]) -> ExactPoly {
        self.basis
            .iter()
            .fold(ExactPoly::zero(), |p, (i, c)| &p + &gens[*i].scale(c))
    }

    pub fn into_certificate(self) -> Certificate {
        let mut terms: Vec<(Rational, Certificate)> = self
            .basis
            .into_iter()
            .map(|(i, c)| (c, Certificate::Basis(i)))
            .collect();
        for t in self.powers {
            terms.push((t.coeff, Certificate::DerivativePower { power: t.power, inner: t.inner }));
        }
        if terms.len() == 1 && terms[0].0.is_one() {
            return terms.pop().map(|(_, c)| c).unwrap_or_else(Certificate::zero);
        }
        Certificate::LinComb(terms)
    }
}

/// How to pick the two factors in the mode-generating product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CertificateStrategy {
    /// `f'(g')^{n−1}` with `g = sin x`, `f' = cos((N−n+1)x)`.
    SineOnly,
    /// Search `g = sin(dx)/d` over all admissible `d`, keeping the smallest depth.
    #[default]
    MinDepth,
}

/// Memoized builder of mode certificates over the standard generating set
/// `H_0 = span{1, cos mx, sin mx : m ≤ n−1}`.
#[derive(Debug, Clone)]
pub struct ModeCertifier {
    n: usize,
    strategy: CertificateStrategy,
    gens: Vec<ExactPoly>,
    memo: BTreeMap<(usize, Parity), FlatCertificate>,
}

impl ModeCertifier {
    pub fn new(n: usize, strategy: CertificateStrategy) -> Result<Self> {
        check_odd(n)?;
        Ok(ModeCertifier { n, strategy, gens: initial_space(n), memo: BTreeMap::new() })
    }

    pub fn power(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[ExactPoly] {
        &self.gens
    }

    /// Certificate evaluating exactly to `cos(Nx)` or `sin(Nx)`.
    pub fn mode(&mut self, freq: usize, parity: Parity) -> Certificate {
        self.mode_flat(freq, parity).into_certificate()
    }

    /// Flat form of [`ModeCertifier::mode`].
    pub fn mode_flat(&mut self, freq: usize, parity: Parity) -> FlatCertificate {
        let mut leaf = FlatCertificate::default();
        if freq == 0 {
            if parity == Parity::Cos {
                leaf.basis.insert(0, Rational::one());
            }
            return leaf;
        }
        if freq < self.n {
            leaf.basis.insert(mode_index(freq, parity), Rational::one());
            return leaf;
        }
        if let Some(c) = self.memo.get(&(freq, parity)) {
            return c.clone();
        }
        let max_d = (freq - 1) / (self.n - 1);
        let ds: Vec<usize> = match self.strategy {
            CertificateStrategy::SineOnly => alloc::vec![1],
            CertificateStrategy::MinDepth => (1..=max_d).collect(),
        };
        let mut best: Option<(usize, usize, FlatCertificate)> = None;
        for d in ds {
            let m0 = freq - (self.n - 1) * d;
            let cand = self.build(freq, parity, d, m0);
            let rank = (cand.depth(), cand.powers.len());
            if best.as_ref().is_none_or(|b| rank < (b.0, b.1)) {
                best = Some((rank.0, rank.1, cand));
            }
        }
        let cert = best.map(|b| b.2).unwrap_or_default();
        self.memo.insert((freq, parity), cert.clone());
        cert
    }

    fn build(&mut self, freq: usize, parity: Parity, d: usize, m0: usize) -> FlatCertificate {
        let n = self.n;
        // f' = cos(m0 x) (resp. sin(m0 x)), g' = cos(dx)
        let (f_flat, f_scale, f_prime) = match parity {
            Parity::Cos => (
                self.mode_flat(m0, Parity::Sin),
                Rational::from_ratio(1, m0 as i64),
                ExactPoly::cos_mode(m0),
            ),
            Parity::Sin => (
                self.mode_flat(m0, Parity::Cos),
                Rational::from_ratio(-1, m0 as i64),
                ExactPoly::sin_mode(m0),
            ),
        };
        let g_flat = self.mode_flat(d, Parity::Sin);
        let g_scale = Rational::from_ratio(1, d as i64);
        let product = &f_prime * &ExactPoly::cos_mode(d).pow((n - 1) as u32);
        let inv_lead = product.coeff(freq, parity).recip();

        let n_fact: i64 = (1..=n as i64).product();
        let mut acc = FlatCertificate::default();
        // f'(g')^{n−1} = (1/n!) Σ_{ε1,m} (−1)^{n−ε1−m} C(n−1,m) ((ε1 f + m g)')^n
        for eps in 0..=1usize {
            for m in 0..n {
                if eps == 0 && m == 0 {
                    continue;
                }
                let sign = if (n - eps - m) % 2 == 0 { 1 } else { -1 };
                let c = Rational::from_ratio(sign * binomial(n - 1, m), n_fact) * &inv_lead;
                let mut inner = FlatCertificate::default();
                if eps == 1 {
                    inner.add_scaled(&f_flat, &f_scale);
                }
                if m > 0 {
                    inner.add_scaled(&g_flat, &(&g_scale * Rational::from_i64(m as i64)));
                }
                acc.push_power(&c, n as u32, inner.cleaned(), &self.gens);
            }
        }
        for (k, p, c) in product.terms() {
            if (k, p) == (freq, parity) {
                continue;
            }
            let sub = self.mode_flat(k, p);
            acc.add_scaled(&sub, &-(c * &inv_lead));
        }
        acc.cleaned()
    }

    /// Certificate of an arbitrary exact polynomial, mode by mode.
    pub fn certify(&mut self, p: &ExactPoly) -> Certificate {
        self.certify_flat(p).into_certificate()
    }

    pub fn certify_flat(&mut self, p: &ExactPoly) -> FlatCertificate {
        let mut acc = FlatCertificate::default();
        for (m, par, c) in p.terms() {
            let sub = self.mode_flat(m, par);
            acc.add_scaled(&sub, &c);
        }
        acc.cleaned()
    }
}

fn binomial(n: usize, k: usize) -> i64 {
    let mut r: i64 = 1;
    for i in 0..k {
        r = r * (n - i) as i64 / (i + 1) as i64;
    }
    r
}

/// Top-mode coefficient of `cos(m0 x) cos^{n−1}(dx)`; always `2^{−(n−1)}`.
pub fn leading_product_coefficient(m0: usize, d: usize, n: usize) -> Rational {
    let p = &ExactPoly::cos_mode(m0) * &ExactPoly::cos_mode(d).pow((n - 1) as u32);
    p.coeff(m0 + (n - 1) * d, Parity::Cos)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_modes_are_leaves() {
        let mut mc = ModeCertifier::new(3, CertificateStrategy::MinDepth).unwrap();
        assert_eq!(mc.mode(1, Parity::Cos), Certificate::Basis(1));
        assert_eq!(mc.mode(2, Parity::Sin), Certificate::Basis(4));
    }

    #[test]
    fn cos3x_certificate_is_four_cubes_minus_cos() {
        let mut mc = ModeCertifier::new(3, CertificateStrategy::SineOnly).unwrap();
        let c = mc.mode(3, Parity::Cos);
        let gens = mc.generators().to_vec();
        assert_eq!(c.evaluate(&gens), ExactPoly::cos_mode(3));
        assert_eq!(c.depth(), 1);
        let flat = c.flatten(&gens);
        assert_eq!(flat.basis.get(&1), Some(&Rational::from_i64(-3)));
        assert_eq!(flat.powers.len(), 1);
        assert_eq!(flat.powers[0].coeff, Rational::from_i64(4));
        assert_eq!(flat.powers[0].key, ExactPoly::sin_mode(1));
    }

    #[test]
    fn sin5x_sine_only_depth_at_least_two() {
        let mut mc = ModeCertifier::new(3, CertificateStrategy::SineOnly).unwrap();
        let c = mc.mode(5, Parity::Sin);
        assert_eq!(c.evaluate(mc.generators()), ExactPoly::sin_mode(5));
        assert!(c.depth() >= 2);
        let mut md = ModeCertifier::new(3, CertificateStrategy::MinDepth).unwrap();
        let c = md.mode(5, Parity::Sin);
        assert_eq!(c.evaluate(md.generators()), ExactPoly::sin_mode(5));
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn top_coefficient_is_two_to_one_minus_n() {
        assert_eq!(leading_product_coefficient(1, 1, 3), Rational::from_ratio(1, 4));
        assert_eq!(leading_product_coefficient(2, 3, 5), Rational::from_ratio(1, 16));
    }

    #[test]
    fn all_modes_to_sixteen_exact() {
        for strategy in [CertificateStrategy::SineOnly, CertificateStrategy::MinDepth] {
            let mut mc = ModeCertifier::new(3, strategy).unwrap();
            for m in 0..=16 {
                for p in [Parity::Cos, Parity::Sin] {
                    let c = mc.mode(m, p);
                    let target = ExactPoly::monomial(m, p, Rational::one());
                    assert_eq!(c.evaluate(mc.generators()), target, "{m} {p:?} {strategy:?}");
                }
            }
        }
    }

    #[test]
    fn general_odd_power() {
        let mut mc = ModeCertifier::new(5, CertificateStrategy::MinDepth).unwrap();
        for m in 0..=8 {
            let c = mc.mode(m, Parity::Sin);
            assert_eq!(c.evaluate(mc.generators()), ExactPoly::sin_mode(m).map(|x| x.clone()));
        }
    }
}
