use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::circuit::{simulate, Circuit};
use super::calibrate::{calibrate, Calibration, CalibrationPoint};
use crate::spectral::{ControlProfileSet, ControlProgram, SpectralState, StepControl};
use crate::trig::{
    Certificate, CertificateStrategy, ExactPoly, FlatCertificate, FloatPoly, ModeCertifier, Parity,
    Scalar,
};
use crate::{Error, Result};

/// Free time of each cubed-derivative level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `τ_level = τ_top · ratio^level`.
    Ladder { tau_top: f64, ratio: f64 },
    /// Top-level τ picked per term so that the estimated error of
    /// `c·(p')³` is about `accuracy`: `τ = (accuracy / (6 |c|^{2/3} ‖p'‖²_∞))³`;
    /// deeper levels follow the ladder with `ratio`.
    Accuracy { accuracy: f64, ratio: f64, cap: f64 },
}

impl TauRule {
    pub fn ladder(tau_top: f64) -> Self {
        TauRule::Ladder { tau_top, ratio: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub rule: TauRule,
    /// Maximal nesting of cubed-derivative nodes.
    pub max_depth: usize,
    /// Compensate the `α τ^{1/3} (ψ')²` drift of each conjugation when that
    /// correction lies in span(Q).
    pub alpha_correction: bool,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions { rule: TauRule::ladder(1e-6), max_depth: 4, alpha_correction: true }
    }
}

/// Lowers arbitrary phases into circuits whose phases lie in span(Q),
/// following saturation certificates.
#[derive(Debug, Clone)]
pub struct PhaseCompiler {
    certifier: ModeCertifier,
    q: ControlProfileSet,
    alpha: f64,
    pub options: PhaseOptions,
}

/// Coefficients below `COEFF_FLOOR·max|coeff|` are dropped before certification.
const COEFF_FLOOR: f64 = 1e-14;

impl PhaseCompiler {
    pub fn new(q: ControlProfileSet, alpha: f64, options: PhaseOptions) -> Self {
        let certifier = ModeCertifier::new(3, CertificateStrategy::MinDepth)
            .unwrap_or_else(|_| unreachable!("3 is an admissible power"));
        PhaseCompiler { certifier, q, alpha, options }
    }

    pub fn profiles(&self) -> &ControlProfileSet {
        &self.q
    }

    pub fn certifier(&mut self) -> &mut ModeCertifier {
        &mut self.certifier
    }

    /// Certificate of a float phase (coefficients converted exactly).
    pub fn certificate(&mut self, theta: &FloatPoly) -> Certificate {
        self.certifier.certify(&exact(theta))
    }

    /// Appends `e^{iθ}` to `out`, lowered to span(Q) phases and free flows.
    pub fn lower_phase(&mut self, theta: &FloatPoly, out: &mut Circuit, label: &str) -> Result<()> {
        self.lower_phase_at(theta, 0, out, label)
    }

    fn lower_phase_at(&mut self, theta: &FloatPoly, level: usize, out: &mut Circuit, label: &str) -> Result<()> {
        let scale = theta.to_vector().iter().fold(0.0f64, |m, c| m.max(libm::fabs(*c)));
        let theta = theta.chop(scale * COEFF_FLOOR);
        if theta.is_zero() {
            return Ok(());
        }
        if self.q.contains(&theta) {
            out.phase(theta, label);
            return Ok(());
        }
        let flat = self.certifier.certify_flat(&exact(&theta));
        self.lower_flat(&flat, 1.0, level, None, out, label)
    }

    /// Lowers `scale · flat`; `parent_tau` is the free time of the enclosing
    /// cubed node.
    pub fn lower_flat(
        &mut self,
        flat: &FlatCertificate,
        scale: f64,
        level: usize,
        parent_tau: Option<f64>,
        out: &mut Circuit,
        label: &str,
    ) -> Result<()> {
        let gens: Vec<ExactPoly> = self.certifier.generators().to_vec();
        let base = flat.basis_poly(&gens).to_float().scale(&scale);
        out.phase(base, label);
        for (i, term) in flat.powers.iter().enumerate() {
            if term.power != 3 {
                return Err(Error::InvalidArgument(format!(
                    "only cubed-derivative certificates can be realized, got power {}",
                    term.power
                )));
            }
            if level >= self.options.max_depth {
                return Err(Error::DepthBudget { depth: level + 1, budget: self.options.max_depth });
            }
            let c = term.coeff.to_f64() * scale;
            if c == 0.0 {
                continue;
            }
            let key = term.key.to_float();
            let a = libm::cbrt(c);
            let tau = self.level_tau(c, &key, level, parent_tau);
            let s = libm::cbrt(1.0 / tau);
            let sub = format!("{label}/cube{i}@{level}");
            let inner = term.inner.flatten(&gens);
            // e^{−iψs} e^{τL} e^{iψs} → e^{i(ψ')³},  ψ = c^{1/3}·key
            self.lower_flat(&inner, a * s, level + 1, Some(tau), out, &format!("{sub}/pre"))?;
            out.free(tau, &format!("{sub}/free"));
            self.lower_flat(&inner, -a * s, level + 1, Some(tau), out, &format!("{sub}/post"))?;
            if self.options.alpha_correction && self.alpha != 0.0 {
                let d = key.derivative().scale(&a);
                let corr = (&d * &d).scale(&(self.alpha * libm::cbrt(tau)));
                if self.q.contains(&corr) {
                    out.phase(corr, &format!("{sub}/alpha"));
                }
            }
        }
        Ok(())
    }

    fn level_tau(&self, c: f64, key: &FloatPoly, level: usize, parent_tau: Option<f64>) -> f64 {
        match self.options.rule {
            TauRule::Ladder { tau_top, ratio } => tau_top * libm::pow(ratio, level as f64),
            TauRule::Accuracy { accuracy, ratio, cap } => match parent_tau {
                Some(t) => t * ratio,
                None => {
                    let d = key.derivative_bound();
                    let t = accuracy / (6.0 * libm::pow(libm::fabs(c), 2.0 / 3.0) * d * d);
                    (t * t * t).min(cap)
                }
            },
        }
    }
}

fn exact(theta: &FloatPoly) -> ExactPoly {
    ExactPoly::from_float(theta)
}

/// `[(τ, w/τ)]` with `w·Q = θ`.
pub fn base_phase_program(theta: &FloatPoly, tau: f64, q: &ControlProfileSet) -> Result<ControlProgram> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("base duration must be positive, got {tau}")));
    }
    let mut c = Circuit::new();
    if !q.contains(theta) {
        return Err(q.solve(theta).err().unwrap_or(Error::NotInSpan { residual: f64::NAN }));
    }
    c.phase(theta.clone(), "base");
    c.to_program(q, tau)
}

/// Circuit realizing `e^{i·evaluate(cert)}` through the certificate tree.
pub fn cubed_phase_circuit(
    cert: &Certificate,
    q: &ControlProfileSet,
    alpha: f64,
    options: PhaseOptions,
) -> Result<Circuit> {
    let mut pc = PhaseCompiler::new(q.clone(), alpha, options);
    let gens = pc.certifier.generators().to_vec();
    let flat = cert.flatten(&gens);
    let mut out = Circuit::new();
    pc.lower_flat(&flat, 1.0, 0, None, &mut out, "phase")?;
    Ok(out)
}

/// Program for [`cubed_phase_circuit`] at a given base duration.
pub fn cubed_phase_program(
    cert: &Certificate,
    q: &ControlProfileSet,
    alpha: f64,
    options: PhaseOptions,
    base_tau: f64,
) -> Result<ControlProgram> {
    cubed_phase_circuit(cert, q, alpha, options)?.to_program(q, base_tau)
}

/// `‖e^{iθ}ψ0‖`-accuracy phase target.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTarget {
    pub theta: FloatPoly,
    pub epsilon: f64,
    pub time_budget: f64,
}

impl PhaseTarget {
    pub fn new(theta: FloatPoly, epsilon: f64, time_budget: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(time_budget > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "phase target needs ε > 0 and time budget > 0 (got {epsilon}, {time_budget})"
            )));
        }
        Ok(PhaseTarget { theta, epsilon, time_budget })
    }
}

/// Result of [`phase_program`].
#[derive(Debug, Clone)]
pub struct PhaseSynthesis {
    pub program: ControlProgram,
    pub circuit: Circuit,
    pub tau_top: f64,
    /// Max error over the caller's state and the witnesses.
    pub achieved_error: f64,
    /// `‖e^{iθ}ψ0 − e^{iθ_trunc}ψ0‖` from dropping unreachable modes.
    pub truncation_error: f64,
    /// Largest `‖simulated − exact circuit‖` over validation states.
    pub factorization_gap: f64,
    pub curve: Vec<CalibrationPoint>,
}

/// Validation states: the caller's state plus the normalized constant and
/// normalized mode 1.
pub fn validation_states(psi0: &SpectralState) -> Vec<SpectralState> {
    let k = psi0.k_max().max(4);
    let a = psi0.alpha();
    alloc::vec![
        psi0.clone(),
        SpectralState::unit_constant(k, a),
        SpectralState::unit_mode_one(k, a),
    ]
}

/// Largest band tried when evaluating exact targets.
const MAX_TARGET_BAND: usize = 4096;

/// `target_fn(ψ)` on the smallest band `≥ k0` (doubling) without truncation loss.
pub fn exact_target(
    s: &SpectralState,
    k0: usize,
    target_fn: &dyn Fn(&SpectralState) -> Result<SpectralState>,
) -> Result<SpectralState> {
    let mut k = k0.max(s.k_max());
    loop {
        match target_fn(&s.resized(k).0) {
            Err(Error::TruncationLoss { .. }) if k < MAX_TARGET_BAND => k = (2 * k).min(MAX_TARGET_BAND),
            other => return other,
        }
    }
}

/// Error of `circuit` against `target_fn` on each validation state; targets
/// are evaluated from band `target_band` upwards.
pub(crate) fn validate_circuit(
    circuit: &Circuit,
    states: &[SpectralState],
    q: &ControlProfileSet,
    control: &StepControl,
    target_band: usize,
    target_fn: &dyn Fn(&SpectralState) -> Result<SpectralState>,
) -> Result<(f64, f64, ControlProgram)> {
    let mut err: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let mut program = ControlProgram::new(q.len());
    for (i, s) in states.iter().enumerate() {
        let (sim, prog) = simulate(circuit, s, q, control)?;
        let target = exact_target(s, target_band, target_fn)?;
        err = err.max(sim.state.distance(&target));
        gap = gap.max(sim.state.distance(&sim.intended));
        if i == 0 {
            program = prog;
        }
    }
    Ok((err, gap, program))
}

/// θ restricted to modes whose certificate depth is within budget.
pub fn reachable_part(theta: &FloatPoly, certifier: &mut ModeCertifier, max_depth: usize) -> FloatPoly {
    let mut out = FloatPoly::zero();
    for (m, p, c) in theta.terms() {
        if certifier.mode(m, p).depth() <= max_depth {
            out = &out + &FloatPoly::monomial(m, p, c);
        }
    }
    out
}

/// Compiles `e^{iθ}` and calibrates the top τ by halving until the simulated
/// error is below ε on ψ0 and the witnesses, within the time budget.
pub fn phase_program(
    target: &PhaseTarget,
    psi0: &SpectralState,
    q: &ControlProfileSet,
    control: &StepControl,
    options: PhaseOptions,
    max_iter: usize,
) -> Result<PhaseSynthesis> {
    let mut pc = PhaseCompiler::new(q.clone(), psi0.alpha(), options);
    let theta = reachable_part(&target.theta, pc.certifier(), options.max_depth);
    let truncation_error = {
        let band = 32 + libm::ceil(4.0 * target.theta.derivative_bound()) as usize;
        let a = exact_target(psi0, band, &|s| Ok(s.phase_multiply(&target.theta)?.0))?;
        let b = exact_target(psi0, band, &|s| Ok(s.phase_multiply(&theta)?.0))?;
        a.distance(&b)
    };
    let states = validation_states(psi0);
    let target_band = 32 + libm::ceil(4.0 * theta.derivative_bound()) as usize;
    let theta_t = theta.clone();
    let target_fn = move |s: &SpectralState| -> Result<SpectralState> { Ok(s.phase_multiply(&theta_t)?.0) };

    let compile = |pc: &mut PhaseCompiler, tau: f64| -> Result<Circuit> {
        pc.options.rule = TauRule::Ladder { tau_top: tau, ratio: ratio_of(options.rule) };
        let mut c = Circuit::new();
        pc.lower_phase(&theta, &mut c, "phase")?;
        Ok(c)
    };
    let probe = compile(&mut pc, 1.0)?;
    let unit_time = probe.free_time();
    let cap = start_tau(options.rule);
    let tau_start = if unit_time > 0.0 { (0.9 * target.time_budget / unit_time).min(cap) } else { cap };
    let schedule: Vec<f64> = (0..max_iter.max(1)).map(|j| tau_start * libm::pow(0.5, j as f64)).collect();
    let mut last: Option<(f64, Circuit, ControlProgram, f64)> = None;
    let cal: Calibration<f64> = calibrate(&schedule, target.epsilon, |tau| {
        let c = compile(&mut pc, *tau)?;
        let (err, gap, program) = validate_circuit(&c, &states, q, control, target_band, &target_fn)?;
        let point = CalibrationPoint {
            param: *tau,
            error: err,
            total_time: program.total_time(),
            segment_count: program.len(),
        };
        let within_budget = program.total_time() <= target.time_budget;
        if within_budget {
            last = Some((err, c, program, gap));
        }
        Ok((point, within_budget))
    })?;
    let cal = cal.require()?;
    let Some((err, circuit, program, gap)) = last else {
        return Err(Error::BudgetExceeded { best_error: f64::INFINITY });
    };
    Ok(PhaseSynthesis {
        program,
        circuit,
        tau_top: cal.best_param().copied().unwrap_or(f64::NAN),
        achieved_error: err,
        truncation_error,
        factorization_gap: gap,
        curve: cal.curve,
    })
}

fn ratio_of(rule: TauRule) -> f64 {
    match rule {
        TauRule::Ladder { ratio, .. } | TauRule::Accuracy { ratio, .. } => ratio,
    }
}

fn start_tau(rule: TauRule) -> f64 {
    match rule {
        TauRule::Ladder { tau_top, .. } => tau_top,
        TauRule::Accuracy { cap, .. } => cap,
    }
}

/// Label helper for certificate-driven phases.
pub fn mode_label(m: usize, p: Parity) -> String {
    match p {
        Parity::Cos => format!("cos{m}x"),
        Parity::Sin => format!("sin{m}x"),
    }
}
