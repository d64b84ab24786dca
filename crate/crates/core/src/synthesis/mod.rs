//! Compilation of target operators into piecewise-constant control programs.

mod calibrate;
mod circuit;
mod phase;
mod transport;
mod word;

pub use calibrate::{calibrate, Calibration, CalibrationPoint};
pub use circuit::{
    band_estimate, base_tau_for, global_phase, simulate, Circuit, Factor, LabeledFactor, Simulation,
    MAX_SIMULATION_BAND,
};
pub use phase::{
    exact_target,
    base_phase_program, cubed_phase_circuit, cubed_phase_program, mode_label, phase_program,
    reachable_part, validation_states, PhaseCompiler, PhaseOptions, PhaseSynthesis, PhaseTarget,
    TauRule,
};
pub use transport::{
    cone_circuit, cone_field, constant_atoms, default_schedule, describe, exact_transport,
    interleaved_blocks, literal_blocks, lower_circuit, period_plan, rotation_blocks,
    rotation_weights, signed_transport_circuit, signed_transport_lowered, signed_transport_program,
    transport_program, w_circuit, ConeAtom, PeriodPlan, Sign, SignedAtom, SignedConeElement,
    TransportParams, TransportSynthesis, WBlock, WScheme, PERIOD_NODES,
};
pub use word::{
    reduce_translation, steer_word, steer_word_to, word_circuit, word_schedule, SteeringWord,
    WordAtom, WordParams, WordSynthesis, NORM_GUARD,
};
