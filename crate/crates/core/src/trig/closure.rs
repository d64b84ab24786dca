use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use num_traits::Zero;

use super::poly::{ExactPoly, Rational, Scalar, TrigPoly};
use crate::{Error, Result};

/// One term `sign · (Σ_{i∈subset} f_i')^n` of the polarization expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarTerm<T: Scalar> {
    pub sign: i8,
    pub subset: Vec<usize>,
    pub power: TrigPoly<T>,
}

/// Returns `f1'⋯fn'` together with the expansion
/// `Σ_{ε∈{0,1}^n} (−1)^{n−|ε|} (ε1 f1' + ⋯ + εn fn')^n`, whose sum is `n!·f1'⋯fn'`.
pub fn polarized_product<T: Scalar>(
    f_list: &[TrigPoly<T>],
    n: usize,
) -> Result<(TrigPoly<T>, Vec<PolarTerm<T>>)> {
    check_odd(n)?;
    if f_list.len() != n {
        return Err(Error::InvalidArgument(format!(
            "polarized product needs {n} factors, got {}",
            f_list.len()
        )));
    }
    let derivs: Vec<_> = f_list.iter().map(|f| f.derivative()).collect();
    let product = derivs
        .iter()
        .fold(TrigPoly::constant(T::one()), |acc, d| &acc * d);
    let mut expansion = Vec::with_capacity(1 << n);
    for mask in 0u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sum = subset
            .iter()
            .fold(TrigPoly::zero(), |acc, &i| &acc + &derivs[i]);
        let sign = if (n - subset.len()) % 2 == 0 { 1 } else { -1 };
        expansion.push(PolarTerm { sign, subset, power: sum.pow(n as u32) });
    }
    Ok((product, expansion))
}

/// Sum of a polarization expansion, `Σ sign·power`.
pub fn expansion_sum<T: Scalar>(terms: &[PolarTerm<T>]) -> TrigPoly<T> {
    terms.iter().fold(TrigPoly::zero(), |acc, t| {
        if t.sign > 0 {
            &acc + &t.power
        } else {
            &acc - &t.power
        }
    })
}

pub(crate) fn check_odd(n: usize) -> Result<()> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "saturation power must be odd and ≥ 3, got {n}"
        )));
    }
    Ok(())
}

/// Row-echelon basis of a subspace of trigonometric polynomials, pivoting on
/// the highest column (frequency first, cosine before sine).
#[derive(Debug, Clone, Default)]
pub struct Echelon {
    rows: BTreeMap<usize, Vec<Rational>>,
}

impl Echelon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Inserts `p`; returns whether the span grew.
    pub fn insert(&mut self, p: &ExactPoly) -> bool {
        let mut v = p.to_vector();
        loop {
            let Some(h) = v.iter().rposition(|c| !c.is_zero()) else {
                return false;
            };
            match self.rows.get(&h) {
                Some(row) => {
                    let f = v[h].clone();
                    for (vi, ri) in v.iter_mut().zip(row) {
                        if !ri.is_zero() {
                            *vi -= &f * ri;
                        }
                    }
                }
                None => {
                    let inv = v[h].recip();
                    v.truncate(h + 1);
                    for c in v.iter_mut() {
                        *c *= &inv;
                    }
                    self.rows.insert(h, v);
                    return true;
                }
            }
        }
    }

    pub fn contains(&self, p: &ExactPoly) -> bool {
        let mut e = self.clone();
        !e.insert(p)
    }

    /// Canonical reduced basis ordered by pivot.
    pub fn basis(&self) -> Vec<ExactPoly> {
        let pivots: Vec<usize> = self.rows.keys().copied().collect();
        let mut reduced: BTreeMap<usize, Vec<Rational>> = BTreeMap::new();
        for &p in &pivots {
            let mut v = self.rows[&p].clone();
            for &q in pivots.iter().filter(|&&q| q < p) {
                let f = v[q].clone();
                if !f.is_zero() {
                    let row = &reduced[&q];
                    for (vi, ri) in v.iter_mut().zip(row) {
                        *vi -= &f * ri;
                    }
                }
            }
            reduced.insert(p, v);
        }
        reduced.values().map(|v| ExactPoly::from_vector(v)).collect()
    }

    /// Basis of the intersection with polynomials of degree ≤ `window`.
    pub fn window_basis(&self, window: usize) -> Vec<ExactPoly> {
        self.basis().into_iter().filter(|p| p.degree() <= window).collect()
    }
}

/// Basis of `F_n(span(generators))`: the span plus all n-fold products of
/// derivatives of basis elements (equivalently all `(φ')^n`, by polarization).
pub fn fn_step(generators: &[ExactPoly], n: usize) -> Result<Vec<ExactPoly>> {
    fn_step_windowed(generators, n, usize::MAX)
}

/// As [`fn_step`], intersected with the frequency window `≤ window`.
pub fn fn_step_windowed(generators: &[ExactPoly], n: usize, window: usize) -> Result<Vec<ExactPoly>> {
    check_odd(n)?;
    let mut ech = Echelon::new();
    for g in generators {
        ech.insert(g);
    }
    let basis = ech.basis();
    let derivs: Vec<ExactPoly> = basis
        .iter()
        .map(|b| b.derivative())
        .filter(|d| !d.is_zero())
        .collect();
    let one = ExactPoly::constant(Rational::from_i64(1));
    products_with_repetition(&derivs, n, 0, &one, &mut |p| {
        ech.insert(p);
    });
    Ok(ech.window_basis(window))
}

fn products_with_repetition(
    factors: &[ExactPoly],
    remaining: usize,
    start: usize,
    prefix: &ExactPoly,
    sink: &mut impl FnMut(&ExactPoly),
) {
    if remaining == 0 {
        sink(prefix);
        return;
    }
    for i in start..factors.len() {
        let next = prefix * &factors[i];
        products_with_repetition(factors, remaining - 1, i, &next, sink);
    }
}

/// `H_0 = span{1, cos mx, sin mx : m ≤ n−1}` in canonical order.
pub fn initial_space(n: usize) -> Vec<ExactPoly> {
    let mut h = Vec::with_capacity(2 * n - 1);
    h.push(ExactPoly::constant(Rational::from_i64(1)));
    for m in 1..n {
        h.push(ExactPoly::cos_mode(m));
        h.push(ExactPoly::sin_mode(m));
    }
    h
}

/// Dimensions of `H_0 ⊂ H_1 ⊂ …` inside a frequency window, iterating until
/// the window is full or the space stops growing.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosureRun {
    pub window: usize,
    pub dims: Vec<usize>,
    pub basis: Vec<ExactPoly>,
}

impl ClosureRun {
    pub fn is_full(&self) -> bool {
        self.dims.last().copied() == Some(2 * self.window + 1)
    }

    pub fn contains(&self, p: &ExactPoly) -> bool {
        let mut e = Echelon::new();
        for b in &self.basis {
            e.insert(b);
        }
        e.contains(p)
    }
}

pub fn closure_run(n: usize, window: usize, max_steps: usize) -> Result<ClosureRun> {
    check_odd(n)?;
    let mut h: Vec<ExactPoly> = initial_space(n)
        .into_iter()
        .filter(|p| p.degree() <= window)
        .collect();
    let mut dims = alloc::vec![h.len()];
    for _ in 0..max_steps {
        if h.len() == 2 * window + 1 {
            break;
        }
        let next = fn_step_windowed(&h, n, window)?;
        let grew = next.len() > h.len();
        h = next;
        dims.push(h.len());
        if !grew {
            break;
        }
    }
    Ok(ClosureRun { window, dims, basis: h })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn polarization_of_three_sines() {
        let s = ExactPoly::sin_mode(1);
        let (prod, exp) = polarized_product(&[s.clone(), s.clone(), s], 3).unwrap();
        let expect = ExactPoly::new(q(0, 1), vec![q(3, 4), q(0, 1), q(1, 4)], vec![]);
        assert_eq!(prod, expect);
        assert_eq!(expansion_sum(&exp), prod.scale(&q(6, 1)));
        assert_eq!(exp.len(), 8);
    }

    #[test]
    fn polarization_rejects_even_or_mismatched() {
        let s = ExactPoly::sin_mode(1);
        assert!(polarized_product(&[s.clone(), s.clone()], 2).is_err());
        assert!(polarized_product(&[s.clone(), s], 3).is_err());
    }

    #[test]
    fn constants_have_zero_polarized_product() {
        let c: Vec<ExactPoly> = (1..=3).map(|i| ExactPoly::constant(q(i, 1))).collect();
        let (prod, exp) = polarized_product(&c, 3).unwrap();
        assert!(prod.is_zero());
        assert!(expansion_sum(&exp).is_zero());
    }

    #[test]
    fn fn_step_examples() {
        let b = fn_step(&[ExactPoly::sin_mode(1)], 3).unwrap();
        let mut e = Echelon::new();
        for p in &b {
            e.insert(p);
        }
        assert!(e.contains(&ExactPoly::sin_mode(1)));
        let cube = ExactPoly::cos_mode(1).pow(3);
        assert!(e.contains(&cube));
        assert_eq!(b.len(), 2);

        let one = ExactPoly::constant(q(1, 1));
        assert_eq!(fn_step(&[one.clone()], 5).unwrap(), vec![one]);

        let h1 = fn_step(&initial_space(3), 3).unwrap();
        let mut e = Echelon::new();
        for p in &h1 {
            e.insert(p);
        }
        assert!(e.contains(&ExactPoly::cos_mode(3)));
        assert!(e.contains(&ExactPoly::sin_mode(3)));
    }

    #[test]
    fn closure_fills_window_with_increasing_dims() {
        let run = closure_run(3, 16, 10).unwrap();
        assert!(run.is_full());
        assert!(run.dims.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(run.dims[0], 5);
    }
}
