//! Orientation-preserving circle diffeomorphisms and the unitary actions
//! `(U_P ψ)(x) = √(P'(x)) ψ(P(x))`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::spectral::SpectralState;
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// Samples of a lifted diffeomorphism `P` and its derivative at the nodes
/// `x_j = 2πj/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    p: Vec<f64>,
    dp: Vec<f64>,
    generator: Option<(FloatPoly, f64)>,
}

impl FlowMap {
    pub fn identity(m: usize) -> Self {
        let p = nodes(m);
        FlowMap { p, dp: alloc::vec![1.0; m], generator: None }
    }

    /// Validated map from samples.
    pub fn from_samples(p: Vec<f64>, dp: Vec<f64>) -> Result<Self> {
        if p.len() != dp.len() || p.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "flow map needs matching P and P' arrays of length ≥ 2 (got {} and {})",
                p.len(),
                dp.len()
            )));
        }
        let map = FlowMap { p, dp, generator: None };
        map.validate()?;
        Ok(map)
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.dp
    }

    /// Field and time when produced by [`integrate_flow`].
    pub fn generator(&self) -> Option<&(FloatPoly, f64)> {
        self.generator.as_ref()
    }

    /// Checks `P' > 0`, strict monotonicity and degree one.
    pub fn validate(&self) -> Result<()> {
        let min_d = self.dp.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min_d > 0.0) {
            return Err(Error::NonDiffeo { min_derivative: min_d });
        }
        let monotone = self.p.windows(2).all(|w| w[1] > w[0]);
        let m = self.m();
        let wraps = self.p[m - 1] < self.p[0] + 2.0 * PI;
        if !monotone || !wraps || self.p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonDiffeo { min_derivative: min_d });
        }
        Ok(())
    }

    /// `max_j |P(x_j) − x_j − 2πn_j|` for the best integer shift.
    pub fn distance_to_identity(&self) -> f64 {
        let x = nodes(self.m());
        self.p
            .iter()
            .zip(&x)
            .map(|(p, x)| {
                let d = p - x;
                libm::fabs(d - 2.0 * PI * libm::round(d / (2.0 * PI)))
            })
            .fold(0.0, f64::max)
    }
}

fn nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
}

/// Step size meeting the monotone-lift guarantee: `1e−3/(1+‖f'‖_∞)`.
pub fn default_ode_step(f: &FloatPoly) -> f64 {
    1e-3 / (1.0 + f.derivative_bound())
}

/// RK4 integration of `∂t P = f(P)`, `∂t P' = f'(P)·P'` from `P = x`, `P' = 1`.
pub fn integrate_flow(f: &FloatPoly, t: f64, m: usize, dt_ode: f64) -> Result<FlowMap> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!("flow grid needs M ≥ 8, got {m}")));
    }
    if !(dt_ode > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid ODE step {dt_ode} or time {t}")));
    }
    let mut p = nodes(m);
    let mut dp = alloc::vec![1.0; m];
    if !f.is_zero() && t != 0.0 {
        let fd = f.derivative();
        let steps = libm::ceil(libm::fabs(t) / dt_ode).max(1.0) as usize;
        let h = t / steps as f64;
        for (pj, dj) in p.iter_mut().zip(dp.iter_mut()) {
            let (mut y, mut d) = (*pj, *dj);
            for _ in 0..steps {
                let k1 = f.eval(y);
                let l1 = fd.eval(y) * d;
                let y2 = y + 0.5 * h * k1;
                let k2 = f.eval(y2);
                let l2 = fd.eval(y2) * (d + 0.5 * h * l1);
                let y3 = y + 0.5 * h * k2;
                let k3 = f.eval(y3);
                let l3 = fd.eval(y3) * (d + 0.5 * h * l2);
                let y4 = y + h * k3;
                let k4 = f.eval(y4);
                let l4 = fd.eval(y4) * (d + h * l3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                d += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            }
            *pj = y;
            *dj = d;
        }
    }
    let map = FlowMap { p, dp, generator: Some((f.clone(), t)) };
    map.validate()?;
    Ok(map)
}

/// `(U_P ψ)(x_j) = √(P'(x_j)) ψ(P(x_j))`, projected back onto the state's
/// truncation by the discrete Fourier sum over the map's nodes. Returns the
/// new state and the discarded tail mass.
pub fn diffeo_apply(state: &SpectralState, map: &FlowMap) -> Result<(SpectralState, f64)> {
    map.validate()?;
    let m = map.m();
    let vals = state.evaluate_at(&map.p);
    let w: Vec<Complex64> = vals
        .iter()
        .zip(&map.dp)
        .map(|(v, d)| v * libm::sqrt(*d))
        .collect();
    let k0 = state.k_max() as i64;
    let scale = libm::sqrt(2.0 * PI) / m as f64;
    let xs = nodes(m);
    let mut coeffs = alloc::vec![Complex64::new(0.0, 0.0); (2 * k0 + 1) as usize];
    // c_k = (√(2π)/M) Σ_j w_j e^{−ikx_j}
    for (wj, x) in w.iter().zip(&xs) {
        let step = Complex64::new(libm::cos(*x), -libm::sin(*x));
        let mut e = Complex64::new(libm::cos(k0 as f64 * x), libm::sin(k0 as f64 * x));
        for (i, c) in coeffs.iter_mut().enumerate() {
            if i % 64 == 0 && i > 0 {
                let a = -((i as i64 - k0) as f64) * x;
                e = Complex64::new(libm::cos(a), libm::sin(a));
            }
            *c += wj * e;
            e *= step;
        }
    }
    for c in coeffs.iter_mut() {
        *c *= scale;
    }
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>() * 2.0 * PI / m as f64;
    let kept: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let tail = (total - kept).max(0.0);
    let out = state.with_coeffs(coeffs);
    if tail > out.grid().tail_tolerance() {
        return Err(Error::TruncationLoss { tail, tolerance: out.grid().tail_tolerance() });
    }
    Ok((out, tail))
}

/// `e^{tT_f}ψ`, `T_f = f∂x + ½f'`, on the state's grid with the default ODE step.
pub fn transport_apply(state: &SpectralState, f: &FloatPoly, t: f64) -> Result<(SpectralState, f64)> {
    if f.is_zero() || t == 0.0 {
        return Ok((state.clone(), 0.0));
    }
    let map = integrate_flow(f, t, state.grid().m(), default_ode_step(f))?;
    diffeo_apply(state, &map)
}

/// `ψ(x) ↦ ψ(x + δ)`.
pub fn translate(state: &SpectralState, delta: f64) -> SpectralState {
    state.translate(delta)
}

/// Nodes used by the positivity check in [`flow_period`].
pub const POSITIVITY_NODES: usize = 8192;

/// Certified lower bound of `g`: dense minimum minus `‖g'‖_∞·h/2`.
pub fn positivity_bound(g: &FloatPoly) -> f64 {
    let h = 2.0 * PI / POSITIVITY_NODES as f64;
    let min = (0..POSITIVITY_NODES)
        .map(|j| g.eval(j as f64 * h))
        .fold(f64::INFINITY, f64::min);
    min - g.derivative_bound() * h / 2.0
}

/// `Π(g) = ∫₀^{2π} dx/g(x)` by the trapezoidal rule on `nodes` points.
pub fn flow_period(g: &FloatPoly, nodes: usize) -> Result<f64> {
    let lb = positivity_bound(g);
    if !(lb > 0.0) {
        return Err(Error::NotPositive { lower_bound: lb });
    }
    let n = nodes.max(16);
    let h = 2.0 * PI / n as f64;
    let s: f64 = (0..n).map(|j| 1.0 / g.eval(j as f64 * h)).sum();
    Ok(s * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_plus_sin_sq() -> FloatPoly {
        // 1 + sin²x = 3/2 − ½ cos 2x
        FloatPoly::new(1.5, alloc::vec![0.0, -0.5], alloc::vec![])
    }

    #[test]
    fn zero_and_constant_fields() {
        let id = integrate_flow(&FloatPoly::zero(), 1.0, 16, 1e-3).unwrap();
        assert_eq!(id, FlowMap { generator: id.generator.clone(), ..FlowMap::identity(16) });
        let c = integrate_flow(&FloatPoly::constant(0.7), 2.0, 16, 1e-3).unwrap();
        for (p, x) in c.values().iter().zip(nodes(16)) {
            assert_abs_diff_eq!(*p, x + 1.4, epsilon = 1e-12);
        }
        assert!(c.derivatives().iter().all(|d| (d - 1.0).abs() < 1e-14));
    }

    #[test]
    fn period_examples() {
        assert_abs_diff_eq!(flow_period(&FloatPoly::constant(1.0), 64).unwrap(), 2.0 * PI, epsilon = 1e-13);
        assert_abs_diff_eq!(flow_period(&FloatPoly::constant(4.0), 64).unwrap(), PI / 2.0, epsilon = 1e-13);
        let p = flow_period(&one_plus_sin_sq(), 4096).unwrap();
        assert_abs_diff_eq!(p, 2.0 * PI / libm::sqrt(2.0), epsilon = 1e-12);
        assert!(matches!(flow_period(&FloatPoly::cos_mode(1), 64), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn flow_over_one_period_is_identity() {
        let g = one_plus_sin_sq();
        let p = flow_period(&g, 4096).unwrap();
        let map = integrate_flow(&g, p, 64, default_ode_step(&g)).unwrap();
        assert!(map.distance_to_identity() < 1e-6);
    }

    #[test]
    fn rotation_by_pi_flips_mode_one() {
        let s = SpectralState::unit_mode_one(8, 0.0);
        let m = 64;
        let p: Vec<f64> = nodes(m).iter().map(|x| x + PI).collect();
        let map = FlowMap::from_samples(p, alloc::vec![1.0; m]).unwrap();
        let (out, _) = diffeo_apply(&s, &map).unwrap();
        assert_abs_diff_eq!(out.coeff(1).re, -1.0, epsilon = 1e-13);
        let (id, _) = diffeo_apply(&s, &FlowMap::identity(m)).unwrap();
        assert!(id.distance(&s) < 1e-14);
    }

    #[test]
    fn constant_field_matches_translation() {
        let s = SpectralState::unit_mode_one(16, 0.0)
            .phase_multiply(&FloatPoly::cos_mode(1))
            .unwrap()
            .0;
        let (a, _) = transport_apply(&s, &FloatPoly::constant(0.5), 1.3).unwrap();
        assert!(a.distance(&translate(&s, 0.65)) < 1e-8);
    }

    #[test]
    fn invalid_maps_rejected() {
        let m = 16;
        let mut p = nodes(m);
        p.swap(3, 4);
        assert!(FlowMap::from_samples(p, alloc::vec![1.0; m]).is_err());
        assert!(FlowMap::from_samples(nodes(m), alloc::vec![0.0; m]).is_err());
    }
}
