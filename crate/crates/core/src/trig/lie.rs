use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Signed, Zero};

use super::poly::{lie_bracket, ExactPoly, Parity, Rational, Scalar, VectorField};

/// Expression in the Lie algebra generated by `{λ(φ')²∂x : λ ≥ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum BracketExpression {
    /// `scale·(φ')² ∂x`, `scale ≥ 0`.
    Gen { phi: ExactPoly, scale: Rational },
    Lin(Vec<(Rational, BracketExpression)>),
    Bracket(Box<BracketExpression>, Box<BracketExpression>),
}

impl BracketExpression {
    pub fn gen(phi: ExactPoly) -> Self {
        BracketExpression::Gen { phi, scale: Rational::one() }
    }

    pub fn bracket(a: BracketExpression, b: BracketExpression) -> Self {
        BracketExpression::Bracket(Box::new(a), Box::new(b))
    }

    pub fn evaluate(&self) -> VectorField<Rational> {
        match self {
            BracketExpression::Gen { phi, scale } => {
                let d = phi.derivative();
                VectorField::new((&d * &d).scale(scale))
            }
            BracketExpression::Lin(terms) => VectorField::new(
                terms
                    .iter()
                    .fold(ExactPoly::zero(), |acc, (c, e)| &acc + &e.evaluate().coeff.scale(c)),
            ),
            BracketExpression::Bracket(a, b) => lie_bracket(&a.evaluate(), &b.evaluate()),
        }
    }

    /// Every `Gen` leaf has a non-negative scale.
    pub fn leaves_valid(&self) -> bool {
        match self {
            BracketExpression::Gen { scale, .. } => !scale.is_negative(),
            BracketExpression::Lin(t) => t.iter().all(|(_, e)| e.leaves_valid()),
            BracketExpression::Bracket(a, b) => a.leaves_valid() && b.leaves_valid(),
        }
    }

    /// Maximal bracket nesting.
    pub fn bracket_depth(&self) -> usize {
        match self {
            BracketExpression::Gen { .. } => 0,
            BracketExpression::Lin(t) => t.iter().map(|(_, e)| e.bracket_depth()).max().unwrap_or(0),
            BracketExpression::Bracket(a, b) => 1 + a.bracket_depth().max(b.bracket_depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            BracketExpression::Gen { .. } => 1,
            BracketExpression::Lin(t) => t.iter().map(|(_, e)| e.leaf_count()).sum(),
            BracketExpression::Bracket(a, b) => a.leaf_count() + b.leaf_count(),
        }
    }
}

fn lin(terms: Vec<(Rational, BracketExpression)>) -> BracketExpression {
    BracketExpression::Lin(terms)
}

fn r(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

/// Memoized builder of bracket expressions for single modes.
#[derive(Debug, Default, Clone)]
pub struct FieldCertifier {
    memo: BTreeMap<(usize, Parity), BracketExpression>,
}

impl FieldCertifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// `sin²x ∂x`, generated by `φ = cos x`.
    fn f1() -> BracketExpression {
        BracketExpression::gen(ExactPoly::cos_mode(1))
    }

    /// `cos²x ∂x`, generated by `φ = sin x`.
    fn f2() -> BracketExpression {
        BracketExpression::gen(ExactPoly::sin_mode(1))
    }

    fn dx() -> BracketExpression {
        lin(vec![(r(1, 1), Self::f1()), (r(1, 1), Self::f2())])
    }

    /// `(cos x + cos 3x)∂x = ½(f₊ − f₋)` with `φ± = sin x ± ½ sin 2x`.
    fn g() -> BracketExpression {
        let half_sin2 = ExactPoly::monomial(2, Parity::Sin, r(1, 2));
        let plus = &ExactPoly::sin_mode(1) + &half_sin2;
        let minus = &ExactPoly::sin_mode(1) - &half_sin2;
        lin(vec![
            (r(1, 2), BracketExpression::gen(plus)),
            (r(-1, 2), BracketExpression::gen(minus)),
        ])
    }

    /// `h'∂x = [∂x, h∂x]`.
    fn d(e: BracketExpression) -> BracketExpression {
        BracketExpression::bracket(Self::dx(), e)
    }

    pub fn mode(&mut self, freq: usize, parity: Parity) -> BracketExpression {
        if let Some(e) = self.memo.get(&(freq, parity)) {
            return e.clone();
        }
        let e = match (freq, parity) {
            (0, Parity::Cos) => Self::dx(),
            (0, Parity::Sin) => lin(Vec::new()),
            (2, Parity::Cos) => lin(vec![(r(1, 1), Self::f2()), (r(-1, 1), Self::f1())]),
            // [f1, f2] = −sin 2x
            (2, Parity::Sin) => lin(vec![(r(-1, 1), BracketExpression::bracket(Self::f1(), Self::f2()))]),
            (1, Parity::Cos) => {
                // cos x = ⅛(9g + g'')
                let g = Self::g();
                let g2 = Self::d(Self::d(g.clone()));
                lin(vec![(r(9, 8), g), (r(1, 8), g2)])
            }
            (1, Parity::Sin) => {
                // sin x = −⅛(9g' + g''')
                let g1 = Self::d(Self::g());
                let g3 = Self::d(Self::d(g1.clone()));
                lin(vec![(r(-9, 8), g1), (r(-1, 8), g3)])
            }
            (m, par) => {
                // m = k+1 with k ≥ 2:
                // [sin(kx)∂x, sin x∂x] = ½((1−k) sin(mx) + (1+k) sin((k−1)x))
                // [cos(kx)∂x, sin x∂x] = ½((1−k) cos(mx) + (1+k) cos((k−1)x))
                let k = (m - 1) as i64;
                let top = BracketExpression::bracket(self.mode(m - 1, par), self.mode(1, Parity::Sin));
                let low = self.mode(m - 2, par);
                lin(vec![(r(2, 1 - k), top), (r(-(1 + k), 1 - k), low)])
            }
        };
        self.memo.insert((freq, parity), e.clone());
        e
    }
}

/// Bracket expression evaluating exactly to `p∂x`.
pub fn vectorfield_certificate(p: &ExactPoly) -> BracketExpression {
    let mut fc = FieldCertifier::new();
    vectorfield_certificate_with(p, &mut fc)
}

pub fn vectorfield_certificate_with(p: &ExactPoly, fc: &mut FieldCertifier) -> BracketExpression {
    let terms = p
        .terms()
        .into_iter()
        .map(|(m, par, c)| (c, fc.mode(m, par)))
        .collect::<Vec<_>>();
    if terms.len() == 1 && terms[0].0.is_one() {
        return terms.into_iter().next().map(|(_, e)| e).unwrap_or_else(|| lin(Vec::new()));
    }
    if terms.is_empty() {
        return lin(Vec::new());
    }
    lin(terms)
}

/// Scaled generator leaf `|λ|(φ')²`; as a float field it equals `((√|λ| φ)')²`.
pub fn scaled_gen(phi: &ExactPoly, lambda: &Rational) -> BracketExpression {
    BracketExpression::Gen { phi: phi.clone(), scale: lambda.abs() }
}

impl Zero for BracketExpression {
    fn zero() -> Self {
        lin(Vec::new())
    }
    fn is_zero(&self) -> bool {
        self.evaluate().coeff.is_zero()
    }
}

impl core::ops::Add for BracketExpression {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        lin(vec![(Rational::one(), self), (Rational::one(), o)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_one_examples() {
        let one = vectorfield_certificate(&ExactPoly::constant(r(1, 1)));
        assert_eq!(one.evaluate().coeff, ExactPoly::constant(r(1, 1)));
        let c2 = vectorfield_certificate(&ExactPoly::cos_mode(2));
        assert_eq!(c2.evaluate().coeff, ExactPoly::cos_mode(2));
        assert_eq!(c2.bracket_depth(), 0);
    }

    #[test]
    fn all_modes_to_twelve() {
        let mut fc = FieldCertifier::new();
        for m in 0..=12 {
            for p in [Parity::Cos, Parity::Sin] {
                let e = fc.mode(m, p);
                assert_eq!(e.evaluate().coeff, ExactPoly::monomial(m, p, r(1, 1)), "{m} {p:?}");
                assert!(e.leaves_valid());
            }
        }
    }

    #[test]
    fn sin4x_uses_recursion() {
        let e = vectorfield_certificate(&ExactPoly::sin_mode(4));
        assert_eq!(e.evaluate().coeff, ExactPoly::sin_mode(4));
        assert!(e.bracket_depth() >= 2);
    }

    #[test]
    fn scaled_leaf_is_square_of_scaled_phase() {
        let phi = &ExactPoly::sin_mode(1) + &ExactPoly::cos_mode(2);
        let leaf = scaled_gen(&phi, &r(-9, 4));
        let field = leaf.evaluate().coeff.to_float();
        let d = phi.to_float().derivative().scale(&1.5);
        let sq = &d * &d;
        assert!(field.max_abs_diff(&sq) < 1e-14);
    }
}
