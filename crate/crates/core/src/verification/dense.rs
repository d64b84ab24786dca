//! Dense matrix-exponential reference solutions on the truncated mode space.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::spectral::{ControlProfileSet, SpectralState};
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// Largest truncation accepted by the dense oracle.
pub const DENSE_MAX_K: usize = 128;

/// Generator `A = i·diag(k³ − αk²) + i·Toeplitz(p̂)` of one constant-control
/// segment, over modes `−K..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub k_max: usize,
    pub alpha: f64,
    pub profile: FloatPoly,
    pub generator: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(k_max: usize, alpha: f64, profile: FloatPoly) -> Result<Self> {
        if k_max > DENSE_MAX_K {
            return Err(Error::CostGuard { k: k_max, limit: DENSE_MAX_K });
        }
        let n = 2 * k_max + 1;
        let ph = profile_coefficients(&profile);
        let i = Complex64::new(0.0, 1.0);
        let gen = DMatrix::from_fn(n, n, |r, c| {
            let kr = r as i64 - k_max as i64;
            let kc = c as i64 - k_max as i64;
            let mut v = ph(kr - kc);
            if r == c {
                let k = kr as f64;
                v += k * k * k - alpha * k * k;
            }
            i * v
        });
        drop(ph);
        Ok(DenseOperator { k_max, alpha, profile, generator: gen })
    }

    pub fn from_control(k_max: usize, alpha: f64, u: &[f64], q: &ControlProfileSet) -> Result<Self> {
        Self::new(k_max, alpha, q.combine(u))
    }

    /// `exp(T·A)`.
    pub fn propagator(&self, t: f64) -> DMatrix<Complex64> {
        expm(&(&self.generator * Complex64::new(t, 0.0)))
    }

    pub fn apply(&self, state: &SpectralState, t: f64) -> Result<SpectralState> {
        let (s, _) = state.resized(self.k_max);
        let v = nalgebra::DVector::from_column_slice(s.coeffs());
        let out = self.propagator(t) * v;
        Ok(s.with_coeffs(out.iter().copied().collect()))
    }
}

/// `m ↦ p̂(m)` with `p = Σ p̂(m) e^{imx}`.
fn profile_coefficients(p: &FloatPoly) -> impl Fn(i64) -> Complex64 + '_ {
    move |m: i64| {
        let a = m.unsigned_abs() as usize;
        if a == 0 {
            return Complex64::new(*p.a0(), 0.0);
        }
        if a > p.degree() {
            return Complex64::new(0.0, 0.0);
        }
        let (c, s) = (p.cos_coeffs()[a - 1], p.sin_coeffs()[a - 1]);
        if m > 0 {
            Complex64::new(c / 2.0, -s / 2.0)
        } else {
            Complex64::new(c / 2.0, s / 2.0)
        }
    }
}

/// Reference evolution of one constant-control segment on the state's band.
pub fn dense_evolve(
    state: &SpectralState,
    u: &[f64],
    q: &ControlProfileSet,
    t: f64,
) -> Result<SpectralState> {
    DenseOperator::from_control(state.k_max(), state.alpha(), u, q)?.apply(state, t)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 { libm::ceil(libm::log2(nrm / THETA13)) as i32 } else { 0 };
    let a = a * Complex64::new(libm::pow(2.0, -s as f64), 0.0);
    let id = DMatrix::<Complex64>::identity(n, n);
    let c = |k: usize| Complex64::new(PADE13[k], 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9));
    let u = &a * (u_inner + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &id * c(1));
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8)) + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &id * c(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| DMatrix::identity(n, n));
    for _ in 0..s.max(0) {
        r = &r * &r;
    }
    r
}

/// Largest `|‖Mψ‖ − ‖ψ‖|` over the unit vectors.
pub fn unitarity_defect(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expm_of_diagonal_and_rotation() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(-2.0, 0.0),
        ]));
        let e = expm(&d);
        assert_abs_diff_eq!(e[(0, 0)].re, libm::cos(1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(0, 0)].im, libm::sin(1.0), epsilon = 1e-14);
        assert_abs_diff_eq!(e[(1, 1)].re, libm::exp(-2.0), epsilon = 1e-14);
        // large norm exercises squaring
        let r = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.0, 0.0),
            Complex64::new(-30.0, 0.0),
            Complex64::new(30.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let e = expm(&r);
        assert_abs_diff_eq!(e[(0, 0)].re, libm::cos(30.0), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(1, 0)].re, libm::sin(30.0), epsilon = 1e-12);
    }

    #[test]
    fn zero_control_is_free_flow() {
        let q = ControlProfileSet::standard();
        let s = SpectralState::unit_mode_one(24, 1.0).phase_multiply(&FloatPoly::cos_mode(1)).unwrap().0;
        let d = dense_evolve(&s, &[0.0; 5], &q, 0.7).unwrap();
        assert!(d.distance(&s.free_flow(0.7)) < 1e-12);
        let c = dense_evolve(&s, &[2.0, 0.0, 0.0, 0.0, 0.0], &q, 0.7).unwrap();
        let expect = s.free_flow(0.7).scaled(Complex64::from_polar(1.0, 1.4));
        assert!(c.distance(&expect) < 1e-12);
    }

    #[test]
    fn cost_guard() {
        assert!(matches!(
            DenseOperator::new(129, 0.0, FloatPoly::zero()),
            Err(Error::CostGuard { k: 129, limit: 128 })
        ));
    }

    #[test]
    fn propagator_is_unitary() {
        let op = DenseOperator::new(8, -2.5, FloatPoly::new(1.0, alloc::vec![3.0, -2.0], alloc::vec![5.0, 1.0])).unwrap();
        assert!(unitarity_defect(&op.propagator(1.0)) < 1e-12);
    }
}
