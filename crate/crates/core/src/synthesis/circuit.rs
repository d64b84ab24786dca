use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::spectral::{
    evolve_program, ControlProfileSet, ControlProgram, FourierGrid, SpectralState, StepControl,
};
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// Exactly exponentiable factor, listed in time order inside a [`Circuit`].
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// `ψ ↦ e^{iθ}ψ`.
    Phase(FloatPoly),
    /// `ψ ↦ e^{tL}ψ`.
    Free(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFactor {
    pub factor: Factor,
    pub label: String,
}

/// Product of exact factors; the first entry acts first. Adjacent phases
/// and adjacent free flows are merged on insertion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    factors: Vec<LabeledFactor>,
}

/// Coefficients below this are treated as zero when merging phases.
const PHASE_CHOP: f64 = 1e-15;

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factors(&self) -> &[LabeledFactor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn phase(&mut self, theta: FloatPoly, label: &str) {
        let theta = theta.chop(PHASE_CHOP);
        if theta.is_zero() {
            return;
        }
        if let Some(LabeledFactor { factor: Factor::Phase(prev), .. }) = self.factors.last_mut() {
            *prev = (&*prev + &theta).chop(PHASE_CHOP);
            if prev.is_zero() {
                self.factors.pop();
            }
            return;
        }
        self.factors.push(LabeledFactor { factor: Factor::Phase(theta), label: label.into() });
    }

    pub fn free(&mut self, t: f64, label: &str) {
        if t == 0.0 {
            return;
        }
        if let Some(LabeledFactor { factor: Factor::Free(prev), .. }) = self.factors.last_mut() {
            *prev += t;
            return;
        }
        self.factors.push(LabeledFactor { factor: Factor::Free(t), label: label.into() });
    }

    pub fn push(&mut self, f: LabeledFactor) {
        match f.factor {
            Factor::Phase(p) => self.phase(p, &f.label),
            Factor::Free(t) => self.free(t, &f.label),
        }
    }

    /// `self ◇ other`.
    pub fn append(&mut self, other: Circuit) {
        for f in other.factors {
            self.push(f);
        }
    }

    /// Total free-flow time.
    pub fn free_time(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| match f.factor {
                Factor::Free(t) => t,
                Factor::Phase(_) => 0.0,
            })
            .sum()
    }

    /// Largest `‖(θ_1 + ⋯ + θ_j)'‖_∞` over prefixes: the frequency spread
    /// the phases can put on a state.
    pub fn max_phase_gradient(&self) -> f64 {
        let mut acc = FloatPoly::zero();
        let mut best: f64 = 0.0;
        for f in &self.factors {
            if let Factor::Phase(p) = &f.factor {
                acc = &acc + p;
                best = best.max(acc.derivative_bound());
                best = best.max(p.derivative_bound());
            }
        }
        best
    }

    /// Applies the exact factors; returns the state and total tail mass.
    pub fn apply(&self, state: &SpectralState) -> Result<(SpectralState, f64)> {
        let mut s = state.clone();
        let mut tail = 0.0;
        for f in &self.factors {
            match &f.factor {
                Factor::Phase(p) => {
                    let (next, t) = s.phase_multiply(p)?;
                    s = next;
                    tail += t;
                }
                Factor::Free(t) => s = s.free_flow(*t),
            }
        }
        Ok((s, tail))
    }

    /// Emits one segment per factor. Every phase must lie in span(Q) and is
    /// realized as `(τ_b, w/τ_b)` with `w·Q = θ`; free flows become `(t, 0)`.
    pub fn to_program(&self, q: &ControlProfileSet, base_tau: f64) -> Result<ControlProgram> {
        let mut prog = ControlProgram::new(q.len());
        for f in &self.factors {
            match &f.factor {
                Factor::Phase(p) => {
                    let w = q.solve(p)?;
                    prog.push(base_tau, w.iter().map(|v| v / base_tau).collect(), f.label.clone());
                }
                Factor::Free(t) => {
                    if *t < 0.0 {
                        return Err(Error::InvalidArgument(alloc::format!(
                            "negative free time {t} in {}",
                            f.label
                        )));
                    }
                    prog.push(*t, alloc::vec![0.0; q.len()], f.label.clone());
                }
            }
        }
        Ok(prog)
    }
}

/// Base-phase duration for a simulation band `K`: short enough that the
/// drift during one base segment stays below `1e−7` on `|k| ≤ K`, and above
/// the solver's degenerate-duration floor.
pub fn base_tau_for(k_max: usize) -> f64 {
    let k = (k_max + 1) as f64;
    (1e-7 / (k * k * k)).max(1e-16)
}

/// Truncation band adequate for running `circuit` on states of band `band0`.
pub fn band_estimate(circuit: &Circuit, band0: usize) -> usize {
    let g = circuit.max_phase_gradient();
    let k = 1.15 * (band0 as f64 + g) + 24.0;
    libm::ceil(k) as usize
}

/// Outcome of running a program on one state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub state: SpectralState,
    /// The same initial state after exact application of the circuit.
    pub intended: SpectralState,
    pub tail_mass: f64,
}

/// Largest band [`simulate`] will try.
pub const MAX_SIMULATION_BAND: usize = 16_000;

/// Compiles `circuit` for the band it needs, runs it on `psi0`, and repeats
/// with a 1.5× larger band whenever truncation loss is reported.
pub fn simulate(
    circuit: &Circuit,
    psi0: &SpectralState,
    q: &ControlProfileSet,
    control: &StepControl,
) -> Result<(Simulation, ControlProgram)> {
    let band0 = psi0.effective_band(1e-24);
    let mut k = band_estimate(circuit, band0).max(psi0.k_max());
    loop {
        let grid = FourierGrid::with_tolerance(k, psi0.grid().tail_tolerance());
        let (start, _) = psi0.regrid(grid);
        let program = circuit.to_program(q, base_tau_for(k))?;
        let attempt = evolve_program(&start, &program, q, control).and_then(|(s, trace)| {
            let (intended, tail_i) = circuit.apply(&start)?;
            let tail = trace.iter().map(|r| r.tail_mass).sum::<f64>() + tail_i;
            Ok(Simulation { state: s, intended, tail_mass: tail })
        });
        match attempt {
            Err(Error::TruncationLoss { .. }) if k < MAX_SIMULATION_BAND => {
                k = (k * 3 / 2).min(MAX_SIMULATION_BAND);
            }
            other => return other.map(|s| (s, program)),
        }
    }
}

/// `e^{ic}ψ`.
pub fn global_phase(state: &SpectralState, c: f64) -> SpectralState {
    state.scaled(Complex64::new(libm::cos(c), libm::sin(c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_factors_merge() {
        let mut c = Circuit::new();
        c.phase(FloatPoly::sin_mode(1), "a");
        c.phase(FloatPoly::cos_mode(1), "b");
        c.free(0.1, "f");
        c.free(0.2, "g");
        c.phase(FloatPoly::sin_mode(1), "c");
        c.phase(-FloatPoly::sin_mode(1), "d");
        assert_eq!(c.len(), 2);
        assert!((c.free_time() - 0.3).abs() < 1e-16);
    }

    #[test]
    fn base_phase_program_shape() {
        let q = ControlProfileSet::standard();
        let mut c = Circuit::new();
        c.phase(FloatPoly::constant(1.0), "base");
        let p = c.to_program(&q, 1e-3).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.segments[0].tau, 1e-3);
        assert!((p.segments[0].u[0] - 1e3).abs() < 1e-9);
        assert!(p.segments[0].u[1..].iter().all(|v| v.abs() < 1e-9));
        assert!(Circuit::new().to_program(&q, 1e-3).unwrap().is_empty());
    }
}
