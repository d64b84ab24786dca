//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use kdvctl_core::flows::{default_ode_step, flow_period, integrate_flow, positivity_bound};
use kdvctl_core::spectral::{evolve_program, ControlProgram, SpectralState};
use kdvctl_core::synthesis::{
    default_schedule, phase_program, signed_transport_program, steer_word, steer_word_to,
    word_schedule, CalibrationPoint, PhaseOptions, PhaseTarget, SteeringWord, TauRule,
    TransportParams, WordParams,
};
use kdvctl_core::trig::{ExactPoly, FloatPoly, Parity};
use kdvctl_core::verification::{
    eventually_decreasing, period_study, satlimit_study, saturation_report, strang_study,
    trotter_study, wtn_study, PeriodStudy, SatLimitStudy, StrangStudy, Study, TrotterStudy,
    WtnStudy,
};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::formats::{
    signed_element, ExprJson, FlowMapFile, PhaseTargetFile, PolyJson, ProgramFile, StateFile,
    TransportTargetFile, WordFile,
};
use crate::output::{Csv, OutDir};
use crate::{row, CliError, ConvergenceArgs, FlowArgs, PeriodArgs, Resolved, SaturateArgs, SimulateArgs, SteerArgs, StudyName, SynthPhaseArgs, SynthTransportArgs};

/// Largest L² drift accepted by `simulate`.
pub const CONSERVATION_TOLERANCE: f64 = 1e-10;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

fn parse_poly(s: &str) -> Result<FloatPoly, CliError> {
    let p: PolyJson = serde_json::from_str(s).map_err(|e| CliError::Format(format!("field: {e}")))?;
    Ok((&p).into())
}

fn load_state(cfg: &Resolved, path: Option<&Path>) -> Result<SpectralState, CliError> {
    match path {
        Some(p) => {
            let f: StateFile = read_json(p)?;
            if let Some(a) = cfg.config.alpha {
                if a != f.alpha {
                    log::warn!("state file α = {} differs from configured α = {a}; using the file's", f.alpha);
                }
            }
            f.to_state(cfg.config.oversampling, cfg.config.tail_tolerance)
        }
        None => {
            let grid = kdvctl_core::spectral::FourierGrid::with_oversampling(
                cfg.config.k,
                cfg.config.oversampling,
                cfg.config.tail_tolerance,
            );
            let s = SpectralState::unit_mode_one(cfg.config.k, cfg.alpha());
            Ok(SpectralState::on_grid(grid, s.alpha(), s.coeffs().to_vec())?)
        }
    }
}

fn calibration_csv(curve: &[CalibrationPoint]) -> Csv {
    let mut t = Csv::new(&["param", "error", "total_time", "segment_count"]);
    for p in curve {
        t.push(row![p.param, p.error, p.total_time, p.segment_count]);
    }
    t
}

fn random_program(q: usize, segments: usize, max_amplitude: f64, seed: u64) -> ControlProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ControlProgram::new(q);
    for j in 0..segments {
        let raw: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let amp = rng.gen_range(0.0..max_amplitude.max(0.0) + f64::MIN_POSITIVE) / n;
        p.push(rng.gen_range(1e-4..2e-2), raw.iter().map(|v| v * amp).collect(), format!("random{j}"));
    }
    p
}

#[derive(Serialize)]
struct SimulateSummary {
    segments: usize,
    total_time: f64,
    norm_in: f64,
    norm_out: f64,
    l2_drift: f64,
    tail_mass: f64,
    seed: Option<u64>,
}

pub fn simulate(cfg: &Resolved, out: &OutDir, a: &SimulateArgs) -> Result<(), CliError> {
    let s0 = load_state(cfg, a.state.as_deref())?;
    let program = match (&a.program, a.random) {
        (Some(p), _) => ControlProgram::from(&read_json::<ProgramFile>(p)?),
        (None, Some(n)) => {
            let p = random_program(cfg.q.len(), n, a.max_amplitude, cfg.config.seed);
            out.write_json("program.json", &ProgramFile::from(&p))?;
            p
        }
        (None, None) => ControlProgram::new(cfg.q.len()),
    };
    let (s, trace) = evolve_program(&s0, &program, &cfg.q, &cfg.control)?;
    let mut t = Csv::new(&["segment", "t_end", "l2_norm", "h1_norm", "tail_mass"]);
    for r in &trace {
        t.push(row![r.segment, r.t_end, r.l2_norm, r.h1_norm, r.tail_mass]);
    }
    out.write_csv("trace.csv", &t)?;
    out.write_json("state.json", &StateFile::from(&s))?;
    let drift = (s.norm() - s0.norm()).abs();
    out.write_json(
        "summary.json",
        &SimulateSummary {
            segments: program.len(),
            total_time: program.total_time(),
            norm_in: s0.norm(),
            norm_out: s.norm(),
            l2_drift: drift,
            tail_mass: trace.iter().map(|r| r.tail_mass).sum(),
            seed: a.random.map(|_| cfg.config.seed),
        },
    )?;
    if drift > CONSERVATION_TOLERANCE {
        return Err(CliError::CheckFailed(format!("L² drift {drift:.3e} exceeds {CONSERVATION_TOLERANCE:e}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct SynthesisSummary {
    achieved_error: f64,
    factorization_gap: f64,
    total_time: f64,
    segments: usize,
    max_amplitude: f64,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    extra: BTreeMap<&'static str, f64>,
}

fn summary(err: f64, gap: f64, p: &ControlProgram, extra: BTreeMap<&'static str, f64>) -> SynthesisSummary {
    SynthesisSummary {
        achieved_error: err,
        factorization_gap: gap,
        total_time: p.total_time(),
        segments: p.len(),
        max_amplitude: p.max_amplitude(),
        extra,
    }
}

pub fn synth_phase(cfg: &Resolved, out: &OutDir, a: &SynthPhaseArgs) -> Result<(), CliError> {
    let t: PhaseTargetFile = read_json(&a.target)?;
    let target = PhaseTarget::new((&t.theta).into(), t.epsilon, t.time_budget)?;
    let psi0 = load_state(cfg, a.state.as_deref())?;
    let opts = PhaseOptions {
        rule: TauRule::Ladder { tau_top: a.tau_top, ratio: a.ratio },
        max_depth: a.max_depth,
        ..PhaseOptions::default()
    };
    let r = phase_program(&target, &psi0, &cfg.q, &cfg.control, opts, a.max_iter)?;
    out.write_json("program.json", &ProgramFile::from(&r.program))?;
    out.write_csv("calibration.csv", &calibration_csv(&r.curve))?;
    let extra = BTreeMap::from([("tau_top", r.tau_top), ("truncation_error", r.truncation_error)]);
    out.write_json("summary.json", &summary(r.achieved_error, r.factorization_gap, &r.program, extra))?;
    Ok(())
}

pub fn synth_transport(cfg: &Resolved, out: &OutDir, a: &SynthTransportArgs) -> Result<(), CliError> {
    let t: TransportTargetFile = read_json(&a.target)?;
    let f = signed_element(&t.field)?;
    let psi0 = load_state(cfg, a.state.as_deref())?;
    let base = TransportParams { tau: a.tau, cycles: a.cycles, trotter_steps: a.trotter_steps, ..TransportParams::default() };
    let schedule = default_schedule(&base, a.points.max(1));
    let r = signed_transport_program(&f, t.time, &psi0, &cfg.q, &cfg.control, &schedule, t.epsilon, t.time_budget)?;
    out.write_json("program.json", &ProgramFile::from(&r.program))?;
    out.write_csv("calibration.csv", &calibration_csv(&r.curve))?;
    let extra = BTreeMap::from([("tau", r.params.tau), ("cycles", r.params.cycles as f64)]);
    out.write_json("summary.json", &summary(r.achieved_error, r.factorization_gap, &r.program, extra))?;
    Ok(())
}

pub fn steer(cfg: &Resolved, out: &OutDir, a: &SteerArgs) -> Result<(), CliError> {
    let word = SteeringWord::try_from(&read_json::<WordFile>(&a.word)?)?;
    let psi0 = load_state(cfg, a.state.as_deref())?;
    let schedule = word_schedule(&WordParams::default(), a.points.max(1));
    let r = match &a.target {
        Some(p) => {
            let target = read_json::<StateFile>(p)?.to_state(cfg.config.oversampling, cfg.config.tail_tolerance)?;
            steer_word_to(&word, &psi0, &target, a.epsilon, &cfg.q, &cfg.control, &schedule)?
        }
        None => steer_word(&word, &psi0, a.epsilon, &cfg.q, &cfg.control, &schedule)?,
    };
    out.write_json("program.json", &ProgramFile::from(&r.program))?;
    out.write_json("state.json", &StateFile::from(&r.psi_final))?;
    out.write_json("target.json", &StateFile::from(&r.target))?;
    out.write_csv("calibration.csv", &calibration_csv(&r.curve))?;
    let extra = BTreeMap::from([("beta", r.beta), ("error_mod_phase", r.error_mod_phase)]);
    out.write_json("summary.json", &summary(r.achieved_error, r.factorization_gap, &r.program, extra))?;
    Ok(())
}

#[derive(Serialize)]
struct CertificateEntry {
    mode: String,
    certificate: ExprJson,
    field: ExprJson,
}

#[derive(Serialize)]
struct SaturationSummary {
    n: usize,
    n_max: usize,
    window: usize,
    closure_dims: Vec<usize>,
    closure_full: bool,
    spanning: bool,
    max_depth: usize,
    all_verified: bool,
    certificates: Vec<CertificateEntry>,
}

fn mode_name(m: usize, p: Parity) -> String {
    match (m, p) {
        (0, _) => "1".into(),
        (_, Parity::Cos) => format!("cos{m}x"),
        (_, Parity::Sin) => format!("sin{m}x"),
    }
}

pub fn saturate(cfg: &Resolved, out: &OutDir, a: &SaturateArgs) -> Result<(), CliError> {
    let rep = saturation_report(a.n, a.nmax, &cfg.q)?;
    let mut t = Csv::new(&[
        "mode",
        "depth",
        "size",
        "coefficient_bits",
        "verified",
        "field_bracket_depth",
        "field_leaves",
        "field_verified",
    ]);
    let mut mc = kdvctl_core::trig::ModeCertifier::new(a.n, kdvctl_core::trig::CertificateStrategy::MinDepth)?;
    let mut fc = kdvctl_core::trig::FieldCertifier::new();
    let mut certificates = Vec::new();
    for (m, f) in rep.modes.iter().zip(&rep.fields) {
        let name = mode_name(m.freq, m.parity);
        t.push(row![
            name.clone(),
            m.depth,
            m.size,
            m.coefficient_bits,
            m.verified,
            f.bracket_depth,
            f.leaves,
            f.verified
        ]);
        let target = ExactPoly::monomial(m.freq, m.parity, BigInt::from(1).into());
        certificates.push(CertificateEntry {
            mode: name,
            certificate: (&mc.mode(m.freq, m.parity)).into(),
            field: (&kdvctl_core::trig::vectorfield_certificate_with(&target, &mut fc)).into(),
        });
    }
    out.write_csv("saturation.csv", &t)?;
    let all = rep.all_verified();
    out.write_json(
        "saturation.json",
        &SaturationSummary {
            n: rep.n,
            n_max: rep.n_max,
            window: rep.window,
            closure_dims: rep.closure_dims.clone(),
            closure_full: rep.closure_full,
            spanning: rep.spanning,
            max_depth: rep.max_depth(),
            all_verified: all,
            certificates,
        },
    )?;
    if !all {
        return Err(CliError::CheckFailed("saturation report contains unverified entries".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveSummary {
    label: String,
    points: usize,
    finest_error: f64,
    slope: Option<f64>,
    intercept: Option<f64>,
    residual: Option<f64>,
    monotone: Option<bool>,
    converging: Option<bool>,
    dropped_coarse: Option<bool>,
    excluded: Vec<usize>,
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
}

#[derive(Serialize)]
struct StudySummary {
    study: StudyName,
    param_name: &'static str,
    curves: Vec<CurveSummary>,
    scalars: BTreeMap<String, f64>,
    checks: Vec<Check>,
}

fn slope_check(st: &Study, label: &str, expect: f64, tol: f64) -> Check {
    let slope = st.curve(label).and_then(|c| c.fit.as_ref()).map(|f| f.slope);
    Check {
        name: format!("{label} slope within {expect} ± {tol}"),
        passed: slope.is_some_and(|s| (s - expect).abs() <= tol),
    }
}

fn decreasing_checks(st: &Study, tail: usize) -> Vec<Check> {
    st.curves
        .iter()
        .map(|c| Check { name: format!("{} eventually decreasing", c.label), passed: eventually_decreasing(&c.errors, tail) })
        .collect()
}

pub fn convergence(cfg: &Resolved, out: &OutDir, a: &ConvergenceArgs) -> Result<(), CliError> {
    let (st, checks) = match a.study {
        StudyName::Strang => {
            let mut c = StrangStudy::default();
            if let Some(al) = cfg.config.alpha {
                c.alpha = al;
            }
            let st = strang_study(&c, &cfg.q)?;
            let finest = st.curves[0].finest_error();
            let checks = vec![
                slope_check(&st, "strang", 2.0, 0.1),
                Check { name: "finest error below 1e-6".into(), passed: finest < 1e-6 },
            ];
            (st, checks)
        }
        StudyName::Satlimit => {
            let mut c = SatLimitStudy::default();
            if let Some(al) = cfg.config.alpha {
                c.alphas = vec![al];
            }
            let st = satlimit_study(&c)?;
            let checks = decreasing_checks(&st, 4);
            (st, checks)
        }
        StudyName::Trotter => {
            let st = trotter_study(&TrotterStudy::default())?;
            let checks = vec![slope_check(&st, "trotter", 1.0, 0.2)];
            (st, checks)
        }
        StudyName::Wtn => {
            let mut c = WtnStudy::default();
            if let Some(al) = cfg.config.alpha {
                c.alpha = al;
            }
            let st = wtn_study(&c)?;
            let checks = decreasing_checks(&st, 3);
            (st, checks)
        }
        StudyName::Period => {
            let mut c = PeriodStudy::default();
            if let Some(al) = cfg.config.alpha {
                c.alpha = al;
            }
            let st = period_study(&c, &cfg.q, &cfg.control)?;
            let v = |k: &str| st.scalar(k).unwrap_or(f64::NAN);
            let checks = vec![
                Check { name: "period matches 2π/√2 to 1e-8".into(), passed: v("period_error_vs_2pi_over_sqrt2") <= 1e-8 },
                Check { name: "return map within 1e-6 of identity".into(), passed: v("return_map_distance") <= 1e-6 },
                Check { name: "backward transport error below 5e-2".into(), passed: v("backward_transport_error") < 5e-2 },
            ];
            (st, checks)
        }
    };
    let mut t = Csv::new(&["curve", "param", "error", "slope"]);
    for c in &st.curves {
        let slope = c.fit.as_ref().map(|f| f.slope).unwrap_or(f64::NAN);
        for (p, e) in c.params.iter().zip(&c.errors) {
            t.push(row![c.label.clone(), *p, *e, slope]);
        }
    }
    let name = st.name;
    out.write_csv(&format!("{name}.csv"), &t)?;
    let curves = st
        .curves
        .iter()
        .map(|c| CurveSummary {
            label: c.label.clone(),
            points: c.errors.len(),
            finest_error: c.finest_error(),
            slope: c.fit.as_ref().map(|f| f.slope),
            intercept: c.fit.as_ref().map(|f| f.intercept),
            residual: c.fit.as_ref().map(|f| f.residual),
            monotone: c.fit.as_ref().map(|f| f.monotone),
            converging: c.fit.as_ref().map(|f| f.converging),
            dropped_coarse: c.fit.as_ref().map(|f| f.dropped_coarse),
            excluded: c.fit.as_ref().map(|f| f.excluded.clone()).unwrap_or_default(),
        })
        .collect();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    out.write_json(
        &format!("{name}.json"),
        &StudySummary {
            study: a.study,
            param_name: st.param_name,
            curves,
            scalars: st.scalars.iter().cloned().collect(),
            checks,
        },
    )?;
    if !failed.is_empty() {
        return Err(CliError::CheckFailed(format!("{name}: {}", failed.join("; "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct FlowSummary {
    time: f64,
    m: usize,
    dt_ode: f64,
    distance_to_identity: f64,
    min_derivative: f64,
}

pub fn flow(_cfg: &Resolved, out: &OutDir, a: &FlowArgs) -> Result<(), CliError> {
    let f = parse_poly(&a.field)?;
    let dt = a.dt_ode.unwrap_or_else(|| default_ode_step(&f));
    let map = integrate_flow(&f, a.time, a.m, dt)?;
    out.write_json("flowmap.json", &FlowMapFile::from(&map))?;
    out.write_json(
        "flow.json",
        &FlowSummary {
            time: a.time,
            m: a.m,
            dt_ode: dt,
            distance_to_identity: map.distance_to_identity(),
            min_derivative: map.derivatives().iter().copied().fold(f64::INFINITY, f64::min),
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct PeriodSummary {
    period: f64,
    positivity_bound: f64,
    return_map_distance: f64,
}

pub fn period(_cfg: &Resolved, out: &OutDir, a: &PeriodArgs) -> Result<(), CliError> {
    let g = parse_poly(&a.field)?;
    let p = flow_period(&g, a.nodes)?;
    let map = integrate_flow(&g, p, 256, default_ode_step(&g))?;
    let ret = map.distance_to_identity();
    out.write_json(
        "period.json",
        &PeriodSummary { period: p, positivity_bound: positivity_bound(&g), return_map_distance: ret },
    )?;
    if ret > 1e-6 {
        return Err(CliError::CheckFailed(format!("flow over one period misses the identity by {ret:.3e}")));
    }
    Ok(())
}
