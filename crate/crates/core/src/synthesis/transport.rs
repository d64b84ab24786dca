//! Transport synthesis: phase-conjugated free flows whose products converge
//! to `e^{T_f}`, cone and Trotter composition, and backward transport through
//! the flow period.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::calibrate::{calibrate, CalibrationPoint};
use super::circuit::{Circuit, Factor};
use super::phase::{validate_circuit, validation_states, PhaseCompiler, PhaseOptions, TauRule};
use crate::flows::{flow_period, positivity_bound, transport_apply};
use crate::spectral::{ControlProfileSet, ControlProgram, SpectralState, StepControl};
use crate::trig::FloatPoly;
use crate::{Error, Result};

/// `λ (φ')²` with `λ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeAtom {
    pub lambda: f64,
    pub phi: FloatPoly,
}

impl ConeAtom {
    pub fn new(lambda: f64, phi: FloatPoly) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("cone weight must be ≥ 0, got {lambda}")));
        }
        Ok(ConeAtom { lambda, phi })
    }

    pub fn field(&self) -> FloatPoly {
        let d = self.phi.derivative();
        (&d * &d).scale(&self.lambda)
    }
}

/// `Σ λ_j (φ_j')²`.
pub fn cone_field(atoms: &[ConeAtom]) -> FloatPoly {
    atoms.iter().fold(FloatPoly::zero(), |acc, a| &acc + &a.field())
}

/// `sin²x = ((cos x)')²` and `cos²x = ((sin x)')²`, scaled by `c`: the cone
/// form of the constant field `c`.
pub fn constant_atoms(c: f64) -> [ConeAtom; 2] {
    [
        ConeAtom { lambda: c, phi: FloatPoly::cos_mode(1) },
        ConeAtom { lambda: c, phi: FloatPoly::sin_mode(1) },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedAtom {
    pub sign: Sign,
    pub atom: ConeAtom,
}

/// `Σ ±λ_j (φ_j')²`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignedConeElement {
    pub atoms: Vec<SignedAtom>,
}

impl SignedConeElement {
    pub fn new(atoms: Vec<SignedAtom>) -> Self {
        SignedConeElement { atoms }
    }

    pub fn positive(atoms: Vec<ConeAtom>) -> Self {
        SignedConeElement {
            atoms: atoms.into_iter().map(|atom| SignedAtom { sign: Sign::Plus, atom }).collect(),
        }
    }

    pub fn push(&mut self, sign: Sign, lambda: f64, phi: FloatPoly) -> Result<()> {
        self.atoms.push(SignedAtom { sign, atom: ConeAtom::new(lambda, phi)? });
        Ok(())
    }

    pub fn part(&self, sign: Sign) -> Vec<ConeAtom> {
        self.atoms.iter().filter(|a| a.sign == sign && a.atom.lambda > 0.0).map(|a| a.atom.clone()).collect()
    }

    pub fn field(&self) -> FloatPoly {
        &cone_field(&self.part(Sign::Plus)) - &cone_field(&self.part(Sign::Minus))
    }

    /// Signed decomposition of a field in `span{1, cos 2x, sin 2x}`:
    /// `a + r cos(2x − β) = 2r cos²(x − β/2) + (a − r)`.
    pub fn from_field(f: &FloatPoly) -> Result<Self> {
        let mut el = SignedConeElement::default();
        if f.is_zero() {
            return Ok(el);
        }
        if in_second_harmonic_span(f) {
            // a + b cos 2x + c sin 2x = (a+r) (first-harmonic rotation) − r·1
            let (a, b, c) = second_harmonic_coeffs(f);
            let r = libm::hypot(b, c);
            let beta = libm::atan2(c, b);
            // r(1 + cos(2x − β)) = 2r cos²(x − β/2) = 2r ((sin(x − β/2))')²
            if r > 0.0 {
                el.push(Sign::Plus, 2.0 * r, FloatPoly::sin_mode(1).shift(beta / 2.0))?;
            }
            let k = a - r;
            for at in constant_atoms(libm::fabs(k)) {
                let sign = if k >= 0.0 { Sign::Plus } else { Sign::Minus };
                if k != 0.0 {
                    el.push(sign, at.lambda, at.phi)?;
                }
            }
            return Ok(el);
        }
        Err(Error::InvalidArgument(format!(
            "no cone decomposition known for field {f}; supply atoms explicitly"
        )))
    }
}

fn in_second_harmonic_span(f: &FloatPoly) -> bool {
    f.degree() <= 2 && f.coeff(1, crate::trig::Parity::Cos) == 0.0 && f.coeff(1, crate::trig::Parity::Sin) == 0.0
}

fn second_harmonic_coeffs(f: &FloatPoly) -> (f64, f64, f64) {
    use crate::trig::Parity::{Cos, Sin};
    (*f.a0(), f.coeff(2, Cos), f.coeff(2, Sin))
}

/// How consecutive conjugation blocks are arranged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WScheme {
    /// Blocks alternate the sign of the conjugating phase and every
    /// compensating phase is split half/half around its block, so that the
    /// large cubic compensations cancel at interior junctions.
    #[default]
    Alternating,
    /// Every block is followed by its own full compensating phase.
    Literal,
}

/// One block `e^{iψ/√τ} e^{τwL} e^{−iψ/√τ}` (rightmost first) with
/// compensation `g = w((ψ')³/√τ + α(ψ')²)`; its limit is `e^{3w T_{(ψ')²}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WBlock {
    pub psi: FloatPoly,
    pub w: f64,
}

impl WBlock {
    fn compensation(&self, tau: f64, alpha: f64) -> FloatPoly {
        let d = self.psi.derivative();
        let d2 = &d * &d;
        let d3 = &d2 * &d;
        &d3.scale(&(self.w / libm::sqrt(tau))) + &d2.scale(&(self.w * alpha))
    }
}

/// Circuit for a sequence of blocks. With a compiler, every phase is lowered
/// in place, so each compensation's cubic synthesis acts on the
/// unconjugated state; without one, phases stay abstract.
pub fn w_circuit(
    blocks: &[WBlock],
    tau: f64,
    alpha: f64,
    scheme: WScheme,
    label: &str,
    mut pc: Option<&mut PhaseCompiler>,
) -> Result<Circuit> {
    let mut c = Circuit::new();
    let s = 1.0 / libm::sqrt(tau);
    let g: Vec<FloatPoly> = blocks.iter().map(|b| b.compensation(tau, alpha)).collect();
    let mut emit = |c: &mut Circuit, p: FloatPoly, l: String| -> Result<()> {
        match pc.as_deref_mut() {
            Some(pc) => pc.lower_phase(&p, c, &l),
            None => {
                c.phase(p, &l);
                Ok(())
            }
        }
    };
    match scheme {
        WScheme::Literal => {
            for (i, b) in blocks.iter().enumerate() {
                emit(&mut c, b.psi.scale(&-s), format!("{label}/w{i}/conj"))?;
                c.free(tau * b.w, &format!("{label}/w{i}/free"));
                emit(&mut c, b.psi.scale(&s), format!("{label}/w{i}/unconj"))?;
                emit(&mut c, g[i].clone(), format!("{label}/w{i}/comp"))?;
            }
        }
        WScheme::Alternating => {
            if let Some(g0) = g.first() {
                emit(&mut c, g0.scale(&0.5), format!("{label}/w0/half"))?;
            }
            for (i, b) in blocks.iter().enumerate() {
                emit(&mut c, b.psi.scale(&-s), format!("{label}/w{i}/conj"))?;
                c.free(tau * b.w, &format!("{label}/w{i}/free"));
                emit(&mut c, b.psi.scale(&s), format!("{label}/w{i}/unconj"))?;
                let next = g.get(i + 1).map(|n| &g[i] + n).unwrap_or_else(|| g[i].clone());
                emit(&mut c, next.scale(&0.5), format!("{label}/w{i}/comp"))?;
            }
        }
    }
    Ok(c)
}

/// The blocks of the literal product `W_{τ,n}` for `f = 3(φ')²`:
/// `n` copies of `φ` with weight `1/n`.
pub fn literal_blocks(phi: &FloatPoly, n: usize) -> Vec<WBlock> {
    let w = 1.0 / n.max(1) as f64;
    (0..n).map(|_| WBlock { psi: phi.clone(), w }).collect()
}

/// Orientation decomposition of `F = a0 + b cos 2x + c sin 2x ≥ 0` as
/// `Σ_j λ_j cos²(x − θ_j)`, `θ_j = β/2 + jπ/3`.
pub fn rotation_weights(f: &FloatPoly) -> Result<[(f64, f64); 3]> {
    if !in_second_harmonic_span(f) {
        return Err(Error::InvalidArgument(format!("field {f} is not in span{{1, cos 2x, sin 2x}}")));
    }
    let (a0, b, c) = second_harmonic_coeffs(f);
    let r = libm::hypot(b, c);
    if a0 <= 0.0 || r > a0 * (1.0 + 1e-12) {
        return Err(Error::NotPositive { lower_bound: a0 - r });
    }
    let rho = (r / a0).min(1.0);
    let theta0 = libm::atan2(c, b) / 2.0;
    let l0 = 2.0 * a0 * (1.0 + 2.0 * rho) / 3.0;
    let l1 = 2.0 * a0 * (1.0 - rho) / 3.0;
    Ok([(l0, theta0), (l1, theta0 + PI / 3.0), (l1, theta0 + 2.0 * PI / 3.0)])
}

/// Cycle over `(orientation, ±)` blocks in which the parity `σ(−1)^j`
/// alternates, wrap-around included.
fn parity_cycle(orients: &[usize]) -> Vec<(usize, f64)> {
    let items: Vec<(usize, f64)> = orients.iter().flat_map(|&j| [(j, 1.0), (j, -1.0)]).collect();
    let parity = |&(j, s): &(usize, f64)| if j % 2 == 0 { s > 0.0 } else { s < 0.0 };
    let n = items.len();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        let ok = (0..n).all(|i| parity(&items[perm[i]]) != parity(&items[perm[(i + 1) % n]]));
        if ok {
            return perm.iter().map(|&i| items[i]).collect();
        }
        if !next_permutation(&mut perm) {
            return items;
        }
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Blocks realizing `e^{T_F}` for `F ∈ span{1, cos 2x, sin 2x}`, `F ≥ 0`,
/// over `cycles` parity-alternating cycles. Each block conjugates with
/// `±c_j sin(x − θ_j)`; the weights make `w_j c_j³` equal, so the cubic
/// compensations of neighbouring blocks cancel up to first harmonics.
pub fn rotation_blocks(f: &FloatPoly, cycles: usize) -> Result<Vec<WBlock>> {
    let weights = rotation_weights(f)?;
    let n = cycles.max(1) as f64;
    let orients: Vec<usize> = (0..3).filter(|&j| weights[j].0 > 1e-14 * weights[0].0).collect();
    let sum_cubes: f64 = orients.iter().map(|&j| libm::pow(weights[j].0, 3.0)).sum();
    // Σ over all blocks of w equals Σλ³/(108 N² K²)
    let k = libm::sqrt(sum_cubes / 108.0) / n;
    let cycle = parity_cycle(&orients);
    let mut blocks = Vec::with_capacity(cycles * cycle.len());
    for _ in 0..cycles.max(1) {
        for &(j, sigma) in &cycle {
            let (lambda, theta) = weights[j];
            let c = 6.0 * n * k / lambda;
            let w = lambda / (6.0 * n * c * c);
            blocks.push(WBlock { psi: FloatPoly::sin_mode(1).shift(theta).scale(&(sigma * c)), w });
        }
    }
    Ok(blocks)
}

/// Blocks for a general cone element: each round visits every atom with
/// `+ψ_j` then `−ψ_j`, all weights `1/(2NJ)`.
pub fn interleaved_blocks(atoms: &[ConeAtom], rounds: usize) -> Vec<WBlock> {
    let atoms: Vec<&ConeAtom> = atoms.iter().filter(|a| a.lambda > 0.0 && !a.phi.derivative().is_zero()).collect();
    if atoms.is_empty() {
        return Vec::new();
    }
    let n = rounds.max(1) as f64;
    let w = 1.0 / (2.0 * n * atoms.len() as f64);
    let mut blocks = Vec::new();
    for _ in 0..rounds.max(1) {
        for a in &atoms {
            let psi = a.phi.scale(&libm::sqrt(a.lambda / (6.0 * n * w)));
            blocks.push(WBlock { psi: psi.clone(), w });
            blocks.push(WBlock { psi: -psi, w });
        }
    }
    blocks
}

/// Discretization of a transport synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// Total free time of one cone realization.
    pub tau: f64,
    /// Cycles (rotation walk) or rounds (interleaving) per cone realization.
    pub cycles: usize,
    pub scheme: WScheme,
    /// Trotter steps for mixed-sign fields.
    pub trotter_steps: usize,
    /// Synthesis of the phases that leave span(Q).
    pub phase: PhaseOptions,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            tau: 1.0 / 1024.0,
            cycles: 32,
            scheme: WScheme::Alternating,
            trotter_steps: 8,
            phase: PhaseOptions {
                rule: TauRule::Accuracy { accuracy: 3e-3, ratio: 0.25, cap: 1e-3 },
                ..PhaseOptions::default()
            },
        }
    }
}

/// Circuit for `e^{T_F}`, `F = Σ λ_j (φ_j')²`; lowered when `pc` is given.
pub fn cone_circuit(
    atoms: &[ConeAtom],
    alpha: f64,
    params: &TransportParams,
    label: &str,
    pc: Option<&mut PhaseCompiler>,
) -> Result<Circuit> {
    let f = cone_field(atoms);
    let f = f.chop(1e-13 * f.abs_sum());
    if f.is_zero() {
        return Ok(Circuit::new());
    }
    let blocks = if in_second_harmonic_span(&f) {
        rotation_blocks(&f, params.cycles)?
    } else {
        interleaved_blocks(atoms, params.cycles)
    };
    w_circuit(&blocks, params.tau, alpha, params.scheme, label, pc)
}

/// How a backward transport is realized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodPlan {
    pub period: f64,
    /// Forward time `s = (k+1)Π − κ`.
    pub forward: f64,
    pub k: u64,
}

/// Quadrature nodes for the period integral.
pub const PERIOD_NODES: usize = 4096;

/// `e^{−κT_g} = e^{sT_g}` for `g > 0`.
pub fn period_plan(g: &FloatPoly, kappa: f64) -> Result<PeriodPlan> {
    let period = flow_period(g, PERIOD_NODES)?;
    let k = (libm::ceil(kappa / period) - 1.0).max(0.0);
    Ok(PeriodPlan { period, forward: (k + 1.0) * period - kappa, k: k as u64 })
}

/// Circuit for `e^{t T_f}` with `f` a signed cone element, `t ≥ 0`;
/// lowered when `pc` is given.
///
/// * no negative part: cone realization of `t·f`;
/// * no positive part and `f_neg > 0`: `e^{sT_{f_neg}}` through the period;
/// * otherwise: `δ = max(1, 2‖f_neg‖_∞)`, `g = f_neg + δ`, and Trotter steps
///   `e^{(t/2m)T_{f_pos+δ}} ◇ e^{−(t/m)T_g} ◇ e^{(t/2m)T_{f_pos+δ}}`.
pub fn signed_transport_circuit(
    f: &SignedConeElement,
    t: f64,
    alpha: f64,
    params: &TransportParams,
    mut pc: Option<&mut PhaseCompiler>,
) -> Result<Circuit> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("transport time must be ≥ 0, got {t}")));
    }
    let pos = f.part(Sign::Plus);
    let neg = f.part(Sign::Minus);
    let scaled = |atoms: &[ConeAtom], c: f64| -> Vec<ConeAtom> {
        atoms.iter().map(|a| ConeAtom { lambda: a.lambda * c, phi: a.phi.clone() }).collect()
    };
    let neg_field = cone_field(&neg);
    if neg.is_empty() || neg_field.chop(1e-15).is_zero() {
        return cone_circuit(&scaled(&pos, t), alpha, params, "cone", pc);
    }
    if pos.is_empty() && positivity_bound(&neg_field) > 0.0 {
        let plan = period_plan(&neg_field, t)?;
        return cone_circuit(&scaled(&neg, plan.forward), alpha, params, "period", pc);
    }
    let delta = (2.0 * neg_field.abs_sum()).max(1.0);
    let mut g_atoms = neg.clone();
    g_atoms.extend(constant_atoms(delta));
    let mut p_atoms = pos.clone();
    p_atoms.extend(constant_atoms(delta));
    let g = cone_field(&g_atoms);
    let m = params.trotter_steps.max(1);
    let plan = period_plan(&g, t / m as f64)?;
    let half = cone_circuit(&scaled(&p_atoms, t / (2 * m) as f64), alpha, params, "trotter+", pc.as_deref_mut())?;
    let bwd = cone_circuit(&scaled(&g_atoms, plan.forward), alpha, params, "trotter-", pc)?;
    // symmetric steps e^{(t/2m)T_A} e^{−(t/m)T_g} e^{(t/2m)T_A}
    let mut c = Circuit::new();
    for _ in 0..m {
        c.append(half.clone());
        c.append(bwd.clone());
        c.append(half.clone());
    }
    Ok(c)
}

/// Replaces every phase outside span(Q) by its certificate lowering.
pub fn lower_circuit(abstract_circuit: &Circuit, pc: &mut PhaseCompiler) -> Result<Circuit> {
    let mut out = Circuit::new();
    for f in abstract_circuit.factors() {
        match &f.factor {
            Factor::Phase(p) => pc.lower_phase(p, &mut out, &f.label)?,
            Factor::Free(t) => out.free(*t, &f.label),
        }
    }
    Ok(out)
}

/// Literal program `W_{τ,n}` for `f = 3(φ')²`.
pub fn transport_program(
    phi: &FloatPoly,
    tau: f64,
    n: usize,
    alpha: f64,
    q: &ControlProfileSet,
    scheme: WScheme,
    phase: PhaseOptions,
) -> Result<(ControlProgram, Circuit)> {
    if !(tau > 0.0) || n == 0 {
        return Err(Error::InvalidArgument(format!("need τ > 0 and n ≥ 1 (got {tau}, {n})")));
    }
    let mut pc = PhaseCompiler::new(q.clone(), alpha, phase);
    let c = w_circuit(&literal_blocks(phi, n), tau, alpha, scheme, "w", Some(&mut pc))?;
    let base = super::circuit::base_tau_for(64);
    Ok((c.to_program(q, base)?, c))
}

/// Lowered circuit for `e^{tT_f}`.
pub fn signed_transport_lowered(
    f: &SignedConeElement,
    t: f64,
    alpha: f64,
    q: &ControlProfileSet,
    params: &TransportParams,
) -> Result<Circuit> {
    let mut pc = PhaseCompiler::new(q.clone(), alpha, params.phase);
    signed_transport_circuit(f, t, alpha, params, Some(&mut pc))
}

/// Exact `e^{tT_f}ψ` by characteristics.
pub fn exact_transport(state: &SpectralState, f: &FloatPoly, t: f64) -> Result<SpectralState> {
    Ok(transport_apply(state, f, t)?.0)
}

/// Result of [`signed_transport_program`].
#[derive(Debug, Clone)]
pub struct TransportSynthesis {
    pub program: ControlProgram,
    pub circuit: Circuit,
    pub params: TransportParams,
    pub achieved_error: f64,
    pub factorization_gap: f64,
    pub curve: Vec<CalibrationPoint>,
}

/// Default refinement schedule: `(τ, N)` from `(2^{-6}, 8)` with `τ` halved
/// and `N` doubled alternately.
pub fn default_schedule(base: &TransportParams, points: usize) -> Vec<TransportParams> {
    let mut out = Vec::with_capacity(points);
    let mut p = *base;
    for i in 0..points {
        out.push(p);
        if i % 2 == 0 {
            p.cycles *= 2;
        } else {
            p.tau /= 2.0;
            p.trotter_steps = (p.trotter_steps * 3).div_ceil(2);
        }
    }
    out
}

/// Synthesizes `e^{tT_f}` and calibrates along `schedule` until the error
/// on ψ0 and the witnesses is below ε.
pub fn signed_transport_program(
    f: &SignedConeElement,
    t: f64,
    psi0: &SpectralState,
    q: &ControlProfileSet,
    control: &StepControl,
    schedule: &[TransportParams],
    epsilon: f64,
    time_budget: f64,
) -> Result<TransportSynthesis> {
    let field = f.field();
    let states = validation_states(psi0);
    let target_fn = |s: &SpectralState| exact_transport(s, &field, t);
    let mut last: Option<(Circuit, ControlProgram, TransportParams, f64, f64)> = None;
    let cal = calibrate(schedule, epsilon, |p| {
        let c = signed_transport_lowered(f, t, psi0.alpha(), q, p)?;
        let (err, gap, program) = validate_circuit(&c, &states, q, control, 64, &target_fn)?;
        let within = program.total_time() <= time_budget;
        let point = CalibrationPoint {
            param: p.tau,
            error: err,
            total_time: program.total_time(),
            segment_count: program.len(),
        };
        if within {
            last = Some((c, program, *p, err, gap));
        }
        Ok((point, within))
    })?
    .require()?;
    let (circuit, program, params, err, gap) = last.ok_or(Error::BudgetExceeded { best_error: f64::INFINITY })?;
    Ok(TransportSynthesis { program, circuit, params, achieved_error: err, factorization_gap: gap, curve: cal.curve })
}

/// Label of a signed decomposition for diagnostics.
pub fn describe(f: &SignedConeElement) -> String {
    let mut s = String::new();
    for a in &f.atoms {
        let sign = if a.sign == Sign::Plus { '+' } else { '-' };
        s.push_str(&format!("{sign}{}·(({})')² ", a.atom.lambda, a.atom.phi));
    }
    s
}
