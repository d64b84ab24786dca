use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::calibrate::{calibrate, CalibrationPoint};
use super::circuit::{global_phase, simulate, Circuit};
use super::phase::{exact_target, PhaseCompiler, PhaseOptions, TauRule};
use super::transport::{
    constant_atoms, exact_transport, signed_transport_circuit, SignedConeElement, TransportParams,
};
use crate::spectral::{ControlProfileSet, ControlProgram, SpectralState, StepControl};
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// One factor of a steering word.
#[derive(Debug, Clone, PartialEq)]
pub enum WordAtom {
    /// `e^{iθ}`.
    Phase(FloatPoly),
    /// `e^{t T_f}`.
    Transport { field: SignedConeElement, time: f64 },
    /// `ψ(x) ↦ ψ(x + δ)`.
    Translate(f64),
    /// `e^{ic}`.
    GlobalPhase(f64),
}

/// Atoms applied in order (first atom acts first).
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringWord {
    atoms: Vec<WordAtom>,
}

impl SteeringWord {
    pub fn new(atoms: Vec<WordAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("steering word must not be empty".into()));
        }
        for a in &atoms {
            if let WordAtom::Transport { time, .. } = a {
                if !(*time >= 0.0) {
                    return Err(Error::InvalidArgument(format!("transport time must be ≥ 0, got {time}")));
                }
            }
        }
        Ok(SteeringWord { atoms })
    }

    pub fn atoms(&self) -> &[WordAtom] {
        &self.atoms
    }

    /// The exact composed operator applied to `psi`.
    pub fn apply_exact(&self, psi: &SpectralState) -> Result<SpectralState> {
        let mut s = psi.clone();
        for a in &self.atoms {
            s = match a {
                WordAtom::Phase(theta) => s.phase_multiply(theta)?.0,
                WordAtom::Transport { field, time } => exact_transport(&s, &field.field(), *time)?,
                WordAtom::Translate(d) => s.translate(*d),
                WordAtom::GlobalPhase(c) => global_phase(&s, *c),
            };
        }
        Ok(s)
    }
}

/// Synthesis accuracy knobs for a word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordParams {
    pub phase: PhaseOptions,
    pub transport: TransportParams,
}

impl Default for WordParams {
    fn default() -> Self {
        let transport = TransportParams::default();
        WordParams { phase: transport.phase, transport }
    }
}

/// `δ mod 2π ∈ [0, 2π)`.
pub fn reduce_translation(delta: f64) -> f64 {
    let r = delta % (2.0 * PI);
    if r < 0.0 {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Lowered circuit for the whole word.
pub fn word_circuit(word: &SteeringWord, alpha: f64, q: &ControlProfileSet, params: &WordParams) -> Result<Circuit> {
    let mut pc = PhaseCompiler::new(q.clone(), alpha, params.phase);
    let mut out = Circuit::new();
    for (i, a) in word.atoms.iter().enumerate() {
        match a {
            WordAtom::Phase(theta) => pc.lower_phase(theta, &mut out, &format!("atom{i}/phase"))?,
            WordAtom::GlobalPhase(c) => out.phase(FloatPoly::constant(*c), &format!("atom{i}/global")),
            WordAtom::Transport { field, time } => {
                let mut tp = params.transport;
                tp.phase = params.phase;
                pc.options = params.phase;
                out.append(signed_transport_circuit(field, *time, alpha, &tp, Some(&mut pc))?);
            }
            WordAtom::Translate(d) => {
                let d = reduce_translation(*d);
                if d > 0.0 {
                    let field = SignedConeElement::positive(constant_atoms(d).to_vec());
                    out.append(signed_transport_circuit(&field, 1.0, alpha, &params.transport, Some(&mut pc))?);
                }
            }
        }
    }
    Ok(out)
}

/// Outcome of [`steer_word`].
#[derive(Debug, Clone)]
pub struct WordSynthesis {
    pub program: ControlProgram,
    pub circuit: Circuit,
    pub params: WordParams,
    pub psi_final: SpectralState,
    pub target: SpectralState,
    pub achieved_error: f64,
    /// Best global phase `β` aligning the result with the target, and the
    /// distance after alignment.
    pub beta: f64,
    pub error_mod_phase: f64,
    pub factorization_gap: f64,
    pub curve: Vec<CalibrationPoint>,
}

/// Absolute norm gap tolerated between initial and target state.
pub const NORM_GUARD: f64 = 1e-10;

/// Refinement schedule for words: each step tightens the phase accuracy
/// and doubles the cycles.
pub fn word_schedule(base: &WordParams, points: usize) -> Vec<WordParams> {
    let mut out = Vec::with_capacity(points);
    let mut p = *base;
    for _ in 0..points {
        out.push(p);
        p.transport.cycles *= 2;
        if let TauRule::Accuracy { accuracy, ratio, cap } = p.phase.rule {
            p.phase.rule = TauRule::Accuracy { accuracy: accuracy / 2.0, ratio, cap };
        }
        p.transport.phase = p.phase;
    }
    out
}

/// Compiles the word, simulates it on `psi0` and calibrates along
/// `schedule` until the error against the exact composed target is below ε.
pub fn steer_word(
    word: &SteeringWord,
    psi0: &SpectralState,
    epsilon: f64,
    q: &ControlProfileSet,
    control: &StepControl,
    schedule: &[WordParams],
) -> Result<WordSynthesis> {
    let target = exact_target(psi0, 64, &|s| word.apply_exact(s))?;
    steer_word_to(word, psi0, &target, epsilon, q, control, schedule)
}

/// As [`steer_word`] against an explicit target; rejects targets whose norm
/// differs from ψ0's by more than [`NORM_GUARD`].
pub fn steer_word_to(
    word: &SteeringWord,
    psi0: &SpectralState,
    target: &SpectralState,
    epsilon: f64,
    q: &ControlProfileSet,
    control: &StepControl,
    schedule: &[WordParams],
) -> Result<WordSynthesis> {
    let gap = libm::fabs(psi0.norm() - target.norm());
    if gap > NORM_GUARD {
        return Err(Error::NormMismatch { gap });
    }
    let mut last: Option<(Circuit, ControlProgram, WordParams, SpectralState, f64)> = None;
    let cal = calibrate(schedule, epsilon, |p| {
        let c = word_circuit(word, psi0.alpha(), q, p)?;
        let (sim, program) = simulate(&c, psi0, q, control)?;
        let err = sim.state.distance(target);
        let point = CalibrationPoint {
            param: p.transport.cycles as f64,
            error: err,
            total_time: program.total_time(),
            segment_count: program.len(),
        };
        let fgap = sim.state.distance(&sim.intended);
        last = Some((c, program, *p, sim.state, fgap));
        Ok((point, true))
    })?
    .require()?;
    let (circuit, program, params, psi_final, fgap) =
        last.ok_or(Error::BudgetExceeded { best_error: f64::INFINITY })?;
    let achieved_error = psi_final.distance(target);
    let (error_mod_phase, beta) = psi_final.distance_mod_phase(target);
    Ok(WordSynthesis {
        program,
        circuit,
        params,
        psi_final,
        target: target.clone(),
        achieved_error,
        beta,
        error_mod_phase,
        factorization_gap: fgap,
        curve: cal.curve,
    })
}
