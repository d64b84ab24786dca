//! Truncated Fourier states and split-step evolution under
//! `∂t ψ = Lψ + i(u·Q)ψ`, `L = −∂x³ + iα∂x²`.
//!
//! Coefficients follow `û(k) = (2π)^{−1/2} ∫ ψ e^{−ikx} dx`, so `‖ψ‖²_{L²} = Σ|û(k)|²`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fft::FftPlan;
use crate::trig::{FloatPoly, Parity};
use crate::{Error, Result};

/// Default bound on the mass discarded by one truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

/// Physical grid and FFT plan shared by all states with the same `K`.
#[derive(Debug)]
pub struct FourierGrid {
    k_max: usize,
    plan: FftPlan,
    tail_tolerance: f64,
}

impl FourierGrid {
    /// Grid with `M` = smallest power of two ≥ `4(K+1)`.
    pub fn new(k_max: usize) -> Arc<Self> {
        Self::with_tolerance(k_max, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn with_tolerance(k_max: usize, tail_tolerance: f64) -> Arc<Self> {
        Self::with_oversampling(k_max, 4, tail_tolerance)
    }

    pub fn with_oversampling(k_max: usize, oversampling: usize, tail_tolerance: f64) -> Arc<Self> {
        let m = (oversampling.max(4) * (k_max + 1)).next_power_of_two();
        Arc::new(FourierGrid { k_max, plan: FftPlan::new(m), tail_tolerance })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn m(&self) -> usize {
        self.plan.len()
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    pub fn nodes(&self) -> Vec<f64> {
        let m = self.m();
        (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
    }

    /// Values of a real polynomial at the grid nodes.
    pub fn sample(&self, p: &FloatPoly) -> Vec<f64> {
        let m = self.m();
        if 2 * p.degree() >= m {
            return self.nodes().iter().map(|&x| p.eval(x)).collect();
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        buf[0] = Complex64::new(*p.a0(), 0.0);
        for k in 1..=p.degree() {
            let a = p.coeff(k, Parity::Cos);
            let b = p.coeff(k, Parity::Sin);
            // a cos kx + b sin kx = Re[(a − ib) e^{ikx}]
            buf[k] = Complex64::new(a / 2.0, -b / 2.0);
            buf[m - k] = Complex64::new(a / 2.0, b / 2.0);
        }
        self.plan.inverse(&mut buf);
        buf.iter().map(|z| z.re).collect()
    }

    /// Grid values `√(2π)·ψ(x_j)` from coefficients.
    fn to_grid(&self, coeffs: &[Complex64], buf: &mut [Complex64]) {
        let m = self.m();
        let k = self.k_max as isize;
        buf.fill(Complex64::new(0.0, 0.0));
        for (i, c) in coeffs.iter().enumerate() {
            let kk = i as isize - k;
            buf[kk.rem_euclid(m as isize) as usize] = *c;
        }
        self.plan.inverse(buf);
    }

    /// Inverse of [`FourierGrid::to_grid`]; returns the discarded tail mass.
    fn from_grid(&self, buf: &mut [Complex64], coeffs: &mut [Complex64]) -> f64 {
        let m = self.m();
        let k = self.k_max as isize;
        self.plan.forward(buf);
        let inv = 1.0 / m as f64;
        let mut total = 0.0;
        for z in buf.iter_mut() {
            *z *= inv;
            total += z.norm_sqr();
        }
        let mut kept = 0.0;
        for (i, c) in coeffs.iter_mut().enumerate() {
            let kk = i as isize - k;
            *c = buf[kk.rem_euclid(m as isize) as usize];
            kept += c.norm_sqr();
        }
        (total - kept).max(0.0)
    }
}

/// Truncated Fourier representation of ψ ∈ L²(𝕋), modes `−K..=K`.
#[derive(Debug, Clone)]
pub struct SpectralState {
    grid: Arc<FourierGrid>,
    alpha: f64,
    coeffs: Vec<Complex64>,
}

impl PartialEq for SpectralState {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.coeffs == other.coeffs
    }
}

impl SpectralState {
    /// `coeffs` ordered `k = −K..=K` (length `2K+1`).
    pub fn new(k_max: usize, alpha: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        Self::on_grid(FourierGrid::new(k_max), alpha, coeffs)
    }

    pub fn on_grid(grid: Arc<FourierGrid>, alpha: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        let expect = 2 * grid.k_max() + 1;
        if coeffs.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "expected {expect} coefficients, got {}",
                coeffs.len()
            )));
        }
        if !alpha.is_finite() || coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidArgument("non-finite state data".into()));
        }
        Ok(SpectralState { grid, alpha, coeffs })
    }

    pub fn zeros(k_max: usize, alpha: f64) -> Self {
        SpectralState {
            grid: FourierGrid::new(k_max),
            alpha,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * k_max + 1],
        }
    }

    /// Single Fourier mode `amp·e^{ikx}/√(2π)`.
    pub fn mode(k_max: usize, alpha: f64, k: i64, amp: Complex64) -> Self {
        let mut s = Self::zeros(k_max, alpha);
        s.set_coeff(k, amp);
        s
    }

    /// Normalized constant `1/√(2π)`.
    pub fn unit_constant(k_max: usize, alpha: f64) -> Self {
        Self::mode(k_max, alpha, 0, Complex64::new(1.0, 0.0))
    }

    /// Normalized `e^{ix}/√(2π)`.
    pub fn unit_mode_one(k_max: usize, alpha: f64) -> Self {
        Self::mode(k_max, alpha, 1, Complex64::new(1.0, 0.0))
    }

    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    pub fn k_max(&self) -> usize {
        self.grid.k_max()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Same grid and α, new coefficients.
    pub fn with_coeffs(&self, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), self.coeffs.len());
        SpectralState { grid: self.grid.clone(), alpha: self.alpha, coeffs }
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let kk = k + self.k_max() as i64;
        if kk < 0 || kk as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[kk as usize]
        }
    }

    pub fn set_coeff(&mut self, k: i64, value: Complex64) {
        let kk = k + self.k_max() as i64;
        assert!(kk >= 0 && (kk as usize) < self.coeffs.len(), "mode {k} outside truncation");
        self.coeffs[kk as usize] = value;
    }

    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> + '_ {
        let k = self.k_max() as i64;
        -k..=k
    }

    /// Zero-padded or truncated copy with a new `K`; the second value is the
    /// discarded mass.
    pub fn resized(&self, k_max: usize) -> (Self, f64) {
        if k_max == self.k_max() {
            return (self.clone(), 0.0);
        }
        let grid = FourierGrid::with_tolerance(k_max, self.grid.tail_tolerance);
        self.regrid(grid)
    }

    /// Copy onto an existing grid (any `K`).
    pub fn regrid(&self, grid: Arc<FourierGrid>) -> (Self, f64) {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * grid.k_max() + 1];
        let kn = grid.k_max() as i64;
        let mut lost = 0.0;
        for (k, c) in self.wavenumbers().zip(&self.coeffs) {
            if k.abs() <= kn {
                coeffs[(k + kn) as usize] = *c;
            } else {
                lost += c.norm_sqr();
            }
        }
        (SpectralState { grid, alpha: self.alpha, coeffs }, lost)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    /// `(Σ (1+k²)^s |û(k)|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let sum: f64 = self
            .wavenumbers()
            .zip(&self.coeffs)
            .map(|(k, c)| libm::pow(1.0 + (k * k) as f64, s) * c.norm_sqr())
            .sum();
        libm::sqrt(sum)
    }

    /// Mass in modes `|k| > band`.
    pub fn mass_above(&self, band: usize) -> f64 {
        self.wavenumbers()
            .zip(&self.coeffs)
            .filter(|(k, _)| k.unsigned_abs() as usize > band)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Smallest band containing all but `eps` of the mass.
    pub fn effective_band(&self, eps: f64) -> usize {
        let k = self.k_max();
        let mut tail = 0.0;
        for band in (0..=k).rev() {
            let b = band as i64;
            tail += self.coeff(b).norm_sqr();
            if b != 0 {
                tail += self.coeff(-b).norm_sqr();
            }
            if tail > eps {
                return band;
            }
        }
        0
    }

    /// `⟨self, other⟩ = Σ conj(a_k) b_k` over common modes.
    pub fn inner(&self, other: &Self) -> Complex64 {
        let k = self.k_max().min(other.k_max()) as i64;
        (-k..=k).map(|j| self.coeff(j).conj() * other.coeff(j)).sum()
    }

    /// `‖self − other‖_{L²}`, comparing modes on the union of both truncations.
    pub fn distance(&self, other: &Self) -> f64 {
        let k = self.k_max().max(other.k_max()) as i64;
        let s: f64 = (-k..=k).map(|j| (self.coeff(j) - other.coeff(j)).norm_sqr()).sum();
        libm::sqrt(s)
    }

    /// Distance after removing the best global phase; returns `(distance, β)`
    /// with `e^{iβ}·self ≈ other`.
    pub fn distance_mod_phase(&self, other: &Self) -> (f64, f64) {
        let ip = self.inner(other);
        let beta = if ip.norm() > 0.0 { ip.arg() } else { 0.0 };
        (self.scaled(Complex64::from_polar(1.0, beta)).distance(other), beta)
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|z| z * c).collect())
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scaled(Complex64::new(1.0 / n, 0.0))
        }
    }

    /// `û(k) ↦ e^{it(k³ − αk²)} û(k)`.
    pub fn free_flow(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.apply_free(t);
        out
    }

    fn apply_free(&mut self, t: f64) {
        if t == 0.0 {
            return;
        }
        let alpha = self.alpha;
        let k0 = self.k_max() as i64;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            let k = (i as i64 - k0) as f64;
            let phase = t * (k * k * k - alpha * k * k);
            *c *= Complex64::new(libm::cos(phase), libm::sin(phase));
        }
    }

    /// `ψ(x) ↦ ψ(x + δ)`.
    pub fn translate(&self, delta: f64) -> Self {
        let k0 = self.k_max() as i64;
        self.with_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let a = (i as i64 - k0) as f64 * delta;
                    c * Complex64::new(libm::cos(a), libm::sin(a))
                })
                .collect(),
        )
    }

    /// `û(k) ↦ e^{−τ^{1/4} k²} û(k)`.
    pub fn heat_regularize(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("heat regularization needs τ > 0, got {tau}")));
        }
        let nu = libm::pow(tau, 0.25);
        let k0 = self.k_max() as i64;
        Ok(self.with_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let k = (i as i64 - k0) as f64;
                    c * libm::exp(-nu * k * k)
                })
                .collect(),
        ))
    }

    /// `ψ ↦ e^{iθ}ψ` on the oversampled grid; returns the state and the
    /// discarded tail mass.
    pub fn phase_multiply(&self, theta: &FloatPoly) -> Result<(Self, f64)> {
        if theta.degree() == 0 {
            let c = *theta.a0();
            return Ok((self.scaled(Complex64::new(libm::cos(c), libm::sin(c))), 0.0));
        }
        let values = self.grid.sample(theta);
        let factors: Vec<Complex64> =
            values.iter().map(|&v| Complex64::new(libm::cos(v), libm::sin(v))).collect();
        self.multiply_pointwise(&factors)
    }

    /// Multiplication by a function given on the grid nodes.
    pub fn multiply_pointwise(&self, factors: &[Complex64]) -> Result<(Self, f64)> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.m()];
        let mut out = self.clone();
        let tail = out.multiply_in_place(factors, &mut buf);
        self.check_tail(tail)?;
        Ok((out, tail))
    }

    fn multiply_in_place(&mut self, factors: &[Complex64], buf: &mut [Complex64]) -> f64 {
        self.grid.to_grid(&self.coeffs, buf);
        for (b, f) in buf.iter_mut().zip(factors) {
            *b *= f;
        }
        self.grid.from_grid(buf, &mut self.coeffs)
    }

    fn check_tail(&self, tail: f64) -> Result<()> {
        if tail > self.grid.tail_tolerance {
            return Err(Error::TruncationLoss { tail, tolerance: self.grid.tail_tolerance });
        }
        Ok(())
    }

    /// Values `ψ(x_j)` at the grid nodes.
    pub fn grid_values(&self) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.m()];
        self.grid.to_grid(&self.coeffs, &mut buf);
        let s = 1.0 / libm::sqrt(2.0 * PI);
        buf.iter().map(|z| z * s).collect()
    }

    /// Projects grid values `ψ(x_j)` back onto the truncation; returns the
    /// state and the discarded tail mass.
    pub fn from_grid_values(&self, values: &[Complex64]) -> Result<(Self, f64)> {
        let s = libm::sqrt(2.0 * PI);
        let mut buf: Vec<Complex64> = values.iter().map(|z| z * s).collect();
        let mut out = self.clone();
        let tail = self.grid.from_grid(&mut buf, &mut out.coeffs);
        self.check_tail(tail)?;
        Ok((out, tail))
    }

    /// `ψ(x)` at arbitrary points by direct summation over all modes.
    pub fn evaluate_at(&self, xs: &[f64]) -> Vec<Complex64> {
        let k0 = self.k_max() as i64;
        let s = 1.0 / libm::sqrt(2.0 * PI);
        xs.iter()
            .map(|&x| {
                let step = Complex64::new(libm::cos(x), libm::sin(x));
                let mut w = Complex64::new(libm::cos(-(k0 as f64) * x), libm::sin(-(k0 as f64) * x));
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, c) in self.coeffs.iter().enumerate() {
                    if i % 64 == 0 {
                        let a = (i as i64 - k0) as f64 * x;
                        w = Complex64::new(libm::cos(a), libm::sin(a));
                    }
                    acc += c * w;
                    w *= step;
                }
                acc * s
            })
            .collect()
    }
}

/// Real control profiles `Q_0..Q_{q−1}`, spanning `{1, cos x, sin x, cos 2x, sin 2x}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProfileSet {
    profiles: Vec<FloatPoly>,
}

/// Relative residual accepted by the least-squares span test.
pub const SPAN_TOLERANCE: f64 = 1e-12;

impl ControlProfileSet {
    pub fn new(profiles: Vec<FloatPoly>) -> Result<Self> {
        let set = ControlProfileSet { profiles };
        for (m, p) in [(0, Parity::Cos), (1, Parity::Cos), (1, Parity::Sin), (2, Parity::Cos), (2, Parity::Sin)] {
            if set.solve(&FloatPoly::monomial(m, p, 1.0)).is_err() {
                return Err(Error::SpanningCondition);
            }
        }
        Ok(set)
    }

    /// `{1, sin x, cos x, sin 2x, cos 2x}`.
    pub fn standard() -> Self {
        ControlProfileSet {
            profiles: vec![
                FloatPoly::constant(1.0),
                FloatPoly::sin_mode(1),
                FloatPoly::cos_mode(1),
                FloatPoly::sin_mode(2),
                FloatPoly::cos_mode(2),
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[FloatPoly] {
        &self.profiles
    }

    pub fn max_degree(&self) -> usize {
        self.profiles.iter().map(|p| p.degree()).max().unwrap_or(0)
    }

    /// `u·Q`.
    pub fn combine(&self, u: &[f64]) -> FloatPoly {
        self.profiles
            .iter()
            .zip(u)
            .fold(FloatPoly::zero(), |acc, (q, &c)| &acc + &q.scale(&c))
    }

    /// Least-squares `w` with `w·Q = θ`; `NotInSpan` when the relative
    /// residual exceeds [`SPAN_TOLERANCE`].
    pub fn solve(&self, theta: &FloatPoly) -> Result<Vec<f64>> {
        let rows = 2 * self.max_degree().max(theta.degree()) + 1;
        let q = self.profiles.len();
        let mut a = DMatrix::<f64>::zeros(rows, q);
        for (j, p) in self.profiles.iter().enumerate() {
            for (i, c) in p.to_vector().into_iter().enumerate() {
                a[(i, j)] = c;
            }
        }
        let mut b = DVector::<f64>::zeros(rows);
        for (i, c) in theta.to_vector().into_iter().enumerate() {
            b[i] = c;
        }
        let w = a
            .clone()
            .svd(true, true)
            .solve(&b, 1e-13)
            .map_err(|e| Error::InvalidArgument(String::from(e)))?;
        let residual = (&a * &w - &b).norm();
        let scale = b.norm().max(1.0);
        if !(residual <= SPAN_TOLERANCE * scale) {
            return Err(Error::NotInSpan { residual });
        }
        Ok(w.iter().copied().collect())
    }

    pub fn contains(&self, theta: &FloatPoly) -> bool {
        self.solve(theta).is_ok()
    }
}

/// One constant-control segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub tau: f64,
    pub u: Vec<f64>,
    pub label: String,
}

/// Piecewise-constant control: segments applied in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ControlProgram {
    pub q: usize,
    pub segments: Vec<Segment>,
}

impl ControlProgram {
    pub fn new(q: usize) -> Self {
        ControlProgram { q, segments: Vec::new() }
    }

    pub fn push(&mut self, tau: f64, u: Vec<f64>, label: impl Into<String>) {
        debug_assert_eq!(u.len(), self.q);
        self.segments.push(Segment { tau, u, label: label.into() });
    }

    /// `self ◇ other`.
    pub fn concat(&mut self, other: ControlProgram) {
        self.segments.extend(other.segments);
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.tau).sum()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Largest `|u|_∞` over segments.
    pub fn max_amplitude(&self) -> f64 {
        self.segments
            .iter()
            .flat_map(|s| s.u.iter())
            .fold(0.0, |m, &v| f64::max(m, libm::fabs(v)))
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.tau.is_finite() && s.tau > 0.0) {
                return Err(Error::InvalidArgument(format!("segment {i}: duration {} not positive", s.tau)));
            }
            if s.u.len() != self.q {
                return Err(Error::InvalidArgument(format!(
                    "segment {i}: control has {} entries, expected {}",
                    s.u.len(),
                    self.q
                )));
            }
            if s.u.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("segment {i}: non-finite control")));
            }
        }
        Ok(())
    }
}

/// Steps per segment: `max(1, ceil(step_rate·τ))`; shorter segments than
/// `min_duration` are skipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub step_rate: f64,
    pub min_duration: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { step_rate: 1e4, min_duration: 1e-18 }
    }
}

impl StepControl {
    pub fn steps(&self, tau: f64) -> usize {
        let s = libm::ceil(self.step_rate * tau);
        if s.is_finite() && s >= 1.0 {
            s as usize
        } else {
            1
        }
    }
}

/// Per-segment record of an evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub segment: usize,
    pub t_end: f64,
    pub l2_norm: f64,
    pub h1_norm: f64,
    pub tail_mass: f64,
}

/// Strang splitting `[e^{dt L/2} e^{i dt u·Q} e^{dt L/2}]^steps`; returns the
/// state and accumulated tail mass.
pub fn evolve_constant(
    state: &SpectralState,
    u: &[f64],
    q: &ControlProfileSet,
    duration: f64,
    steps: usize,
) -> Result<(SpectralState, f64)> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be ≥ 1".into()));
    }
    if u.len() != q.len() {
        return Err(Error::InvalidArgument(format!("control has {} entries, Q has {}", u.len(), q.len())));
    }
    let dt = duration / steps as f64;
    let potential = q.combine(u);
    if potential.is_zero() {
        return Ok((state.free_flow(duration), 0.0));
    }
    if potential.degree() == 0 {
        // a constant potential commutes with L
        let c = *potential.a0() * duration;
        let s = state.free_flow(duration).scaled(Complex64::new(libm::cos(c), libm::sin(c)));
        return Ok((s, 0.0));
    }
    let grid = state.grid().clone();
    let factors: Vec<Complex64> = grid
        .sample(&potential)
        .iter()
        .map(|&v| Complex64::new(libm::cos(dt * v), libm::sin(dt * v)))
        .collect();
    let mut s = state.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); grid.m()];
    let mut tail_total = 0.0;
    s.apply_free(dt / 2.0);
    for step in 0..steps {
        let tail = s.multiply_in_place(&factors, &mut buf);
        s.check_tail(tail)?;
        tail_total += tail;
        s.apply_free(if step + 1 == steps { dt / 2.0 } else { dt });
    }
    Ok((s, tail_total))
}

/// Applies a program segment by segment.
pub fn evolve_program(
    state: &SpectralState,
    program: &ControlProgram,
    q: &ControlProfileSet,
    control: &StepControl,
) -> Result<(SpectralState, Vec<TraceRow>)> {
    program.validate()?;
    if program.q != q.len() {
        return Err(Error::InvalidArgument(format!(
            "program has q = {}, profile set has {}",
            program.q,
            q.len()
        )));
    }
    let mut s = state.clone();
    let mut t = 0.0;
    let mut trace = Vec::with_capacity(program.len());
    for (i, seg) in program.segments.iter().enumerate() {
        if seg.tau < control.min_duration {
            log::warn!("segment {i} ({}) dropped: duration {:e} below resolution", seg.label, seg.tau);
            continue;
        }
        let (next, tail) = evolve_constant(&s, &seg.u, q, seg.tau, control.steps(seg.tau))?;
        s = next;
        t += seg.tau;
        trace.push(TraceRow {
            segment: i,
            t_end: t,
            l2_norm: s.norm(),
            h1_norm: s.sobolev_norm(1.0),
            tail_mass: tail,
        });
    }
    Ok((s, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_flow_examples() {
        let s = SpectralState::mode(8, 0.0, 2, Complex64::new(1.0, 0.0));
        let out = s.free_flow(PI / 4.0);
        assert_abs_diff_eq!(out.distance(&s), 0.0, epsilon = 1e-14);
        let s = SpectralState::mode(8, 1.0, 1, Complex64::new(0.3, 0.4));
        assert_eq!(s.free_flow(1.234), s);
        assert_eq!(s.free_flow(0.0), s);
    }

    #[test]
    fn phase_multiply_constant_and_zero() {
        let s = SpectralState::unit_mode_one(8, 0.0);
        let (z, tail) = s.phase_multiply(&FloatPoly::zero()).unwrap();
        assert_eq!(z, s);
        assert_eq!(tail, 0.0);
        let (c, _) = s.phase_multiply(&FloatPoly::constant(0.7)).unwrap();
        assert_abs_diff_eq!(c.coeff(1).arg(), 0.7, epsilon = 1e-15);
    }

    #[test]
    fn phase_multiply_cos_gives_bessel_coefficients() {
        // e^{i cos x} = Σ i^k J_k(1) e^{ikx}
        let s = SpectralState::unit_constant(16, 0.0);
        let (out, tail) = s.phase_multiply(&FloatPoly::cos_mode(1)).unwrap();
        assert!(tail < 1e-20);
        let j0 = libm::j0(1.0);
        let j1 = libm::j1(1.0);
        assert_abs_diff_eq!(out.coeff(0).re, j0, epsilon = 1e-14);
        assert_abs_diff_eq!(out.coeff(1).im, j1, epsilon = 1e-14);
        assert_abs_diff_eq!(out.coeff(-1).im, j1, epsilon = 1e-14);
    }

    #[test]
    fn truncation_loss_is_reported() {
        let s = SpectralState::unit_constant(4, 0.0);
        let err = s.phase_multiply(&FloatPoly::cos_mode(1).scale(&30.0)).unwrap_err();
        assert!(matches!(err, Error::TruncationLoss { .. }));
    }

    #[test]
    fn heat_regularize_examples() {
        let s = SpectralState::mode(4, 0.0, 2, Complex64::new(1.0, 0.0));
        let r = s.heat_regularize(1.0).unwrap();
        assert_abs_diff_eq!(r.coeff(2).re, libm::exp(-4.0), epsilon = 1e-15);
        let c = SpectralState::unit_constant(4, 0.0);
        assert_eq!(c.heat_regularize(0.5).unwrap(), c);
        assert!(s.heat_regularize(0.0).is_err());
    }

    #[test]
    fn sobolev_examples() {
        assert_abs_diff_eq!(SpectralState::unit_constant(4, 0.0).sobolev_norm(3.0), 1.0);
        assert_abs_diff_eq!(
            SpectralState::unit_mode_one(4, 0.0).sobolev_norm(1.0),
            libm::sqrt(2.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn constant_potential_is_exact() {
        let q = ControlProfileSet::standard();
        let s = SpectralState::unit_mode_one(8, 0.5).phase_multiply(&FloatPoly::sin_mode(1)).unwrap().0;
        let (a, _) = evolve_constant(&s, &[0.7, 0.0, 0.0, 0.0, 0.0], &q, 0.3, 5).unwrap();
        let b = s.free_flow(0.3).scaled(Complex64::from_polar(1.0, 0.21));
        assert_abs_diff_eq!(a.distance(&b), 0.0, epsilon = 1e-14);
        let (z, _) = evolve_constant(&s, &[0.0; 5], &q, 0.3, 5).unwrap();
        assert_abs_diff_eq!(z.distance(&s.free_flow(0.3)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn profile_set_validation() {
        let q = ControlProfileSet::standard();
        let w = q.solve(&FloatPoly::sin_mode(2)).unwrap();
        for (a, b) in w.iter().zip([0.0, 0.0, 0.0, 1.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert!(matches!(q.solve(&FloatPoly::cos_mode(3)), Err(Error::NotInSpan { .. })));
        let bad = ControlProfileSet::new(vec![FloatPoly::constant(1.0), FloatPoly::cos_mode(1)]);
        assert_eq!(bad.unwrap_err(), Error::SpanningCondition);
    }

    #[test]
    fn grid_roundtrip_and_direct_evaluation() {
        let s = SpectralState::unit_mode_one(16, 0.0)
            .phase_multiply(&FloatPoly::cos_mode(2).scale(&0.5))
            .unwrap()
            .0;
        let vals = s.grid_values();
        let direct = s.evaluate_at(&s.grid().nodes());
        for (a, b) in vals.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-13);
        }
        let (back, tail) = s.from_grid_values(&vals).unwrap();
        assert!(tail < 1e-28);
        assert!(back.distance(&s) < 1e-14);
    }

    #[test]
    fn empty_and_split_programs() {
        let q = ControlProfileSet::standard();
        let s = SpectralState::unit_mode_one(16, 1.0);
        let ctl = StepControl::default();
        let (out, trace) = evolve_program(&s, &ControlProgram::new(5), &q, &ctl).unwrap();
        assert_eq!(out, s);
        assert!(trace.is_empty());
        let mut p = ControlProgram::new(5);
        p.push(0.2, vec![0.0; 5], "free");
        let (out, _) = evolve_program(&s, &p, &q, &ctl).unwrap();
        assert!(out.distance(&s.free_flow(0.2)) < 1e-15);
    }
}
