//! Named convergence studies. Each returns its error curves with fits and a
//! few scalar diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use super::dense::dense_evolve;
use super::rate::{fit_rate, upper_bound_constant, RateReport};
use crate::flows::{default_ode_step, flow_period, integrate_flow, transport_apply};
use crate::spectral::{evolve_constant, ControlProfileSet, SpectralState, StepControl};
use crate::synthesis::{
    exact_transport, literal_blocks, rotation_blocks, simulate, w_circuit, ConeAtom, PhaseCompiler,
    SignedAtom, SignedConeElement, Sign, TransportParams, WScheme,
};
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// One error curve of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub params: Vec<f64>,
    pub errors: Vec<f64>,
    pub fit: Option<RateReport>,
}

impl Curve {
    fn new(label: impl Into<String>, params: Vec<f64>, errors: Vec<f64>) -> Self {
        let fit = fit_rate(&params, &errors).ok();
        Curve { label: label.into(), params, errors, fit }
    }

    pub fn finest_error(&self) -> f64 {
        self.errors.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub name: &'static str,
    /// Meaning of `Curve::params`.
    pub param_name: &'static str,
    pub curves: Vec<Curve>,
    pub scalars: Vec<(String, f64)>,
}

impl Study {
    pub fn scalar(&self, key: &str) -> Option<f64> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn curve(&self, label: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

/// `(ψ_0 + ψ_1)/√2` with `ψ_m` the normalized mode `m`.
pub fn two_mode_state(k_max: usize, alpha: f64) -> SpectralState {
    let a = Complex64::new(1.0 / libm::sqrt(4.0 * PI), 0.0);
    let mut s = SpectralState::zeros(k_max, alpha);
    s.set_coeff(0, a);
    s.set_coeff(1, a);
    s
}

/// Strang splitting against the dense oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct StrangStudy {
    pub k_max: usize,
    pub alpha: f64,
    pub duration: f64,
    pub u: Vec<f64>,
    pub dts: Vec<f64>,
}

impl Default for StrangStudy {
    fn default() -> Self {
        StrangStudy {
            k_max: 16,
            alpha: 1.0,
            duration: 0.5,
            u: alloc::vec![0.4, -0.7, 1.1, 0.5, -0.3],
            dts: alloc::vec![1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4],
        }
    }
}

pub fn strang_study(cfg: &StrangStudy, q: &ControlProfileSet) -> Result<Study> {
    let s0 = two_mode_state(cfg.k_max, cfg.alpha);
    let exact = dense_evolve(&s0, &cfg.u, q, cfg.duration)?;
    let mut errors = Vec::with_capacity(cfg.dts.len());
    let mut params = Vec::with_capacity(cfg.dts.len());
    for &dt in &cfg.dts {
        let steps = libm::round(cfg.duration / dt).max(1.0) as usize;
        params.push(cfg.duration / steps as f64);
        let (s, _) = evolve_constant(&s0, &cfg.u, q, cfg.duration, steps)?;
        errors.push(s.distance(&exact));
    }
    let drift = (s0.norm() - exact.norm()).abs();
    Ok(Study {
        name: "strang",
        param_name: "dt",
        curves: alloc::vec![Curve::new("strang", params, errors)],
        scalars: alloc::vec![("oracle_norm_drift".into(), drift)],
    })
}

/// `e^{−iφs} e^{τL} e^{iφs}ψ0` with `s = τ^{−1/3}` (time order: the
/// rightmost factor acts first) against `e^{i(φ')³}ψ0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SatLimitStudy {
    pub phi: FloatPoly,
    pub alphas: Vec<f64>,
    /// `τ = 2^{−j}` for each `j`.
    pub log2_taus: Vec<u32>,
    /// Exponent of the asserted upper bound `C·τ^p`.
    pub bound_exponent: f64,
}

impl Default for SatLimitStudy {
    fn default() -> Self {
        SatLimitStudy {
            phi: FloatPoly::sin_mode(1),
            alphas: alloc::vec![0.0, 1.0, -2.5],
            log2_taus: (4..=14).collect(),
            bound_exponent: 5.0 / 24.0,
        }
    }
}

/// One conjugated free flow; `sign = +1` gives the convergent orientation,
/// `−1` the mirrored one (limit `e^{−i(φ')³}`).
pub fn saturation_step(psi0: &SpectralState, phi: &FloatPoly, tau: f64, sign: f64) -> Result<SpectralState> {
    let s = sign / libm::cbrt(tau);
    let spread = phi.derivative_bound() * s.abs();
    let k = psi0.k_max().max(libm::ceil(2.0 * spread) as usize + 48);
    let (start, _) = psi0.resized(k);
    let (a, _) = start.phase_multiply(&phi.scale(&s))?;
    let (b, _) = a.free_flow(tau).phase_multiply(&phi.scale(&-s))?;
    Ok(b)
}

pub fn satlimit_study(cfg: &SatLimitStudy) -> Result<Study> {
    let d = cfg.phi.derivative();
    let cube = &(&d * &d) * &d;
    let mut curves = Vec::new();
    let mut scalars = Vec::new();
    for &alpha in &cfg.alphas {
        let psi0 = SpectralState::unit_constant(8, alpha);
        let mut params = Vec::new();
        let mut errors = Vec::new();
        for &j in &cfg.log2_taus {
            let tau = libm::pow(2.0, -(j as f64));
            let out = saturation_step(&psi0, &cfg.phi, tau, 1.0)?;
            let (target, _) = out.grid_target(&psi0, &cube)?;
            params.push(tau);
            errors.push(out.distance(&target));
        }
        let c = upper_bound_constant(&params, &errors, cfg.bound_exponent);
        scalars.push((format!("bound_constant[alpha={alpha}]"), c));
        curves.push(Curve::new(format!("alpha={alpha}"), params, errors));
    }
    // orientation check at the finest τ
    if let Some(&j) = cfg.log2_taus.last() {
        let tau = libm::pow(2.0, -(j as f64));
        let psi0 = SpectralState::unit_constant(8, 0.0);
        let mirrored = saturation_step(&psi0, &cfg.phi, tau, -1.0)?;
        let (plus, _) = mirrored.grid_target(&psi0, &cube)?;
        let (minus, _) = mirrored.grid_target(&psi0, &-&cube)?;
        scalars.push(("mirrored_vs_plus_cube".into(), mirrored.distance(&plus)));
        scalars.push(("mirrored_vs_minus_cube".into(), mirrored.distance(&minus)));
    }
    Ok(Study { name: "satlimit", param_name: "tau", curves, scalars })
}

trait GridTarget {
    fn grid_target(&self, psi0: &SpectralState, theta: &FloatPoly) -> Result<(SpectralState, f64)>;
}

impl GridTarget for SpectralState {
    /// `e^{iθ}ψ0` on this state's band.
    fn grid_target(&self, psi0: &SpectralState, theta: &FloatPoly) -> Result<(SpectralState, f64)> {
        psi0.resized(self.k_max()).0.phase_multiply(theta)
    }
}

/// `(e^{T_{f1}/n} e^{T_{f2}/n})^n` with exact sub-flows against `e^{T_{f1+f2}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrotterStudy {
    pub f1: FloatPoly,
    pub f2: FloatPoly,
    pub k_max: usize,
    pub ns: Vec<usize>,
}

impl Default for TrotterStudy {
    fn default() -> Self {
        // sin²x = ½ − ½cos 2x, cos²x = ½ + ½cos 2x
        TrotterStudy {
            f1: FloatPoly::new(0.5, alloc::vec![0.0, -0.5], alloc::vec![]),
            f2: FloatPoly::new(0.5, alloc::vec![0.0, 0.5], alloc::vec![]),
            k_max: 32,
            ns: alloc::vec![4, 8, 16, 32, 64, 128, 256],
        }
    }
}

pub fn trotter_study(cfg: &TrotterStudy) -> Result<Study> {
    let psi0 = two_mode_state(cfg.k_max, 0.0);
    let sum = &cfg.f1 + &cfg.f2;
    let exact = transport_apply(&psi0, &sum, 1.0)?.0;
    let m = psi0.grid().m();
    let mut params = Vec::new();
    let mut errors = Vec::new();
    for &n in &cfg.ns {
        let h = 1.0 / n as f64;
        let m1 = integrate_flow(&cfg.f1, h, m, default_ode_step(&cfg.f1))?;
        let m2 = integrate_flow(&cfg.f2, h, m, default_ode_step(&cfg.f2))?;
        let mut s = psi0.clone();
        for _ in 0..n {
            s = crate::flows::diffeo_apply(&s, &m2)?.0;
            s = crate::flows::diffeo_apply(&s, &m1)?.0;
        }
        params.push(h);
        errors.push(s.distance(&exact));
    }
    let translate_gap = exact.distance(&psi0.translate(1.0));
    Ok(Study {
        name: "trotter",
        param_name: "1/n",
        curves: alloc::vec![Curve::new("trotter", params, errors)],
        scalars: alloc::vec![("sum_flow_vs_translation".into(), translate_gap)],
    })
}

/// Abstract `W_{τ,n}` circuits against `e^{T_{3(φ')²}}` on the constant and
/// mode-1 states.
#[derive(Debug, Clone, PartialEq)]
pub struct WtnStudy {
    pub phi: FloatPoly,
    pub alpha: f64,
    /// Sweep of `n` at `taus[fixed_tau]`.
    pub ns: Vec<usize>,
    /// Sweep of `τ` at `n = fixed_n`.
    pub taus: Vec<f64>,
    pub fixed_tau: f64,
    pub fixed_n: usize,
    /// Use the rotation walk (`n/3` cycles of three blocks) instead of `n`
    /// literal copies of `φ`.
    pub rotation: bool,
}

impl Default for WtnStudy {
    fn default() -> Self {
        WtnStudy {
            phi: FloatPoly::sin_mode(1),
            alpha: 0.0,
            ns: alloc::vec![3, 6, 12, 24, 48],
            taus: (8..=16).step_by(2).map(|j| libm::pow(2.0, -(j as f64))).collect(),
            fixed_tau: libm::pow(2.0, -16.0),
            fixed_n: 48,
            rotation: true,
        }
    }
}

fn w_error(cfg: &WtnStudy, tau: f64, n: usize) -> Result<f64> {
    let d = cfg.phi.derivative();
    let field = (&d * &d).scale(&3.0);
    let blocks = if cfg.rotation {
        rotation_blocks(&field, (n / 3).max(1))?
    } else {
        literal_blocks(&cfg.phi, n)
    };
    let c = w_circuit(&blocks, tau, cfg.alpha, WScheme::Alternating, "w", None)?;
    let mut worst: f64 = 0.0;
    for s in [SpectralState::unit_constant(8, cfg.alpha), SpectralState::unit_mode_one(8, cfg.alpha)] {
        let out = apply_growing(&c, &s)?;
        let exact = crate::synthesis::exact_target(&s, 64, &|x| exact_transport(x, &field, 1.0))?;
        worst = worst.max(out.distance(&exact));
    }
    Ok(worst)
}

/// Exact application of a circuit, enlarging the band until nothing is lost.
fn apply_growing(c: &crate::synthesis::Circuit, s: &SpectralState) -> Result<SpectralState> {
    let mut k = crate::synthesis::band_estimate(c, s.effective_band(1e-24)).max(s.k_max());
    loop {
        match c.apply(&s.resized(k).0) {
            Err(Error::TruncationLoss { .. }) if k < crate::synthesis::MAX_SIMULATION_BAND => k = k * 3 / 2,
            other => return other.map(|r| r.0),
        }
    }
}

pub fn wtn_study(cfg: &WtnStudy) -> Result<Study> {
    let mut en = Vec::new();
    for &n in &cfg.ns {
        en.push(w_error(cfg, cfg.fixed_tau, n)?);
    }
    let mut et = Vec::new();
    for &tau in &cfg.taus {
        et.push(w_error(cfg, tau, cfg.fixed_n)?);
    }
    Ok(Study {
        name: "wtn",
        param_name: "1/n | tau",
        curves: alloc::vec![
            Curve::new("n_sweep", cfg.ns.iter().map(|n| 1.0 / *n as f64).collect(), en),
            Curve::new("tau_sweep", cfg.taus.clone(), et),
        ],
        scalars: alloc::vec![("alpha".into(), cfg.alpha)],
    })
}

/// Flow period of `g`, return to the identity, and the synthesized backward
/// transport `e^{−κT_g}` against characteristics.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodStudy {
    /// `g = λ(φ')²`-decomposable positive field, as signed atoms.
    pub g: SignedConeElement,
    pub kappa: f64,
    pub alpha: f64,
    pub params: TransportParams,
}

impl Default for PeriodStudy {
    fn default() -> Self {
        let mut g = SignedConeElement::new(Vec::new());
        for a in one_plus_sin_sq_atoms() {
            g.atoms.push(SignedAtom { sign: Sign::Minus, atom: a });
        }
        PeriodStudy {
            g,
            kappa: 0.3,
            alpha: 0.0,
            params: TransportParams { tau: 1.0 / 1024.0, cycles: 128, ..TransportParams::default() },
        }
    }
}

/// `1 + sin²x = ((cos x)')² + 1` as cone atoms.
pub fn one_plus_sin_sq_atoms() -> Vec<ConeAtom> {
    let mut v = alloc::vec![ConeAtom { lambda: 1.0, phi: FloatPoly::cos_mode(1) }];
    v.extend(crate::synthesis::constant_atoms(1.0));
    v
}

pub fn period_study(cfg: &PeriodStudy, q: &ControlProfileSet, control: &StepControl) -> Result<Study> {
    let g = cfg.g.part(Sign::Minus);
    let field = crate::synthesis::cone_field(&g);
    let period = flow_period(&field, crate::synthesis::PERIOD_NODES)?;
    let map = integrate_flow(&field, period, 256, default_ode_step(&field))?;
    let mut scalars = alloc::vec![
        ("period".into(), period),
        ("period_error_vs_2pi_over_sqrt2".into(), (period - 2.0 * PI / SQRT_2).abs()),
        ("return_map_distance".into(), map.distance_to_identity()),
    ];
    let mut pc = PhaseCompiler::new(q.clone(), cfg.alpha, cfg.params.phase);
    let c = crate::synthesis::signed_transport_circuit(&cfg.g, cfg.kappa, cfg.alpha, &cfg.params, Some(&mut pc))?;
    let mut worst: f64 = 0.0;
    let mut gap: f64 = 0.0;
    for s in [SpectralState::unit_constant(8, cfg.alpha), SpectralState::unit_mode_one(8, cfg.alpha)] {
        let (sim, program) = simulate(&c, &s, q, control)?;
        let target = crate::synthesis::exact_target(&s, 64, &|x| exact_transport(x, &-&field, cfg.kappa))?;
        worst = worst.max(sim.state.distance(&target));
        gap = gap.max(sim.state.distance(&sim.intended));
        scalars.push(("program_time".into(), program.total_time()));
    }
    scalars.push(("backward_transport_error".into(), worst));
    scalars.push(("factorization_gap".into(), gap));
    if !worst.is_finite() {
        return Err(Error::InvalidArgument("non-finite backward transport error".into()));
    }
    Ok(Study { name: "period", param_name: "-", curves: Vec::new(), scalars })
}
