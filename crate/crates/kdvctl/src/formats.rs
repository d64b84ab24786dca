//! JSON file schemas and their conversions to core types.

use std::str::FromStr;

use kdvctl_core::flows::FlowMap;
use kdvctl_core::spectral::{ControlProgram, Segment, SpectralState};
use kdvctl_core::synthesis::{ConeAtom, SignedAtom, SignedConeElement, Sign, SteeringWord, WordAtom};
use kdvctl_core::trig::{BracketExpression, Certificate, ExactPoly, FloatPoly, Rational, TrigPoly};
use kdvctl_core::Complex64;
use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `{"a0": r, "cos": [...], "sin": [...]}`; `cos[m−1]` multiplies `cos(mx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub a0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl From<&FloatPoly> for PolyJson {
    fn from(p: &FloatPoly) -> Self {
        PolyJson { a0: *p.a0(), cos: p.cos_coeffs().to_vec(), sin: p.sin_coeffs().to_vec() }
    }
}

impl From<&PolyJson> for FloatPoly {
    fn from(p: &PolyJson) -> Self {
        FloatPoly::new(p.a0, p.cos.clone(), p.sin.clone())
    }
}

/// Integer written as a JSON number when it fits in 64 bits and as a decimal
/// string otherwise; both forms are accepted on input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonInt(pub BigInt);

impl Serialize for JsonInt {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(&self.0) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for JsonInt {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            U(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::I(v) => Ok(JsonInt(v.into())),
            Raw::U(v) => Ok(JsonInt(v.into())),
            Raw::S(s) => BigInt::from_str(s.trim())
                .map(JsonInt)
                .map_err(|_| serde::de::Error::custom(format!("expected an integer, got {s:?}"))),
        }
    }
}

/// Exact rational `{"num": int, "den": int}` with unbounded integers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: JsonInt,
    pub den: JsonInt,
}

impl From<&Rational> for RationalJson {
    fn from(r: &Rational) -> Self {
        RationalJson { num: JsonInt(r.numer().clone()), den: JsonInt(r.denom().clone()) }
    }
}

impl TryFrom<&RationalJson> for Rational {
    type Error = CliError;
    fn try_from(r: &RationalJson) -> Result<Self, CliError> {
        let den = r.den.0.clone();
        if den == BigInt::from(0) {
            return Err(CliError::Format("zero denominator".into()));
        }
        Ok(Rational::new(r.num.0.clone(), den))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPolyJson {
    pub a0: RationalJson,
    #[serde(default)]
    pub cos: Vec<RationalJson>,
    #[serde(default)]
    pub sin: Vec<RationalJson>,
}

impl From<&ExactPoly> for ExactPolyJson {
    fn from(p: &ExactPoly) -> Self {
        ExactPolyJson {
            a0: p.a0().into(),
            cos: p.cos_coeffs().iter().map(Into::into).collect(),
            sin: p.sin_coeffs().iter().map(Into::into).collect(),
        }
    }
}

impl TryFrom<&ExactPolyJson> for ExactPoly {
    type Error = CliError;
    fn try_from(p: &ExactPolyJson) -> Result<Self, CliError> {
        let conv = |v: &[RationalJson]| v.iter().map(Rational::try_from).collect::<Result<Vec<_>, _>>();
        Ok(TrigPoly::new(Rational::try_from(&p.a0)?, conv(&p.cos)?, conv(&p.sin)?))
    }
}

/// `{"K": int, "alpha": real, "re": [...], "im": [...]}`, modes `−K..K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&SpectralState> for StateFile {
    fn from(s: &SpectralState) -> Self {
        StateFile {
            k: s.k_max(),
            alpha: s.alpha(),
            re: s.coeffs().iter().map(|c| c.re).collect(),
            im: s.coeffs().iter().map(|c| c.im).collect(),
        }
    }
}

impl StateFile {
    pub fn to_state(&self, oversampling: usize, tail_tolerance: f64) -> Result<SpectralState, CliError> {
        if self.re.len() != self.im.len() {
            return Err(CliError::Format(format!(
                "state has {} real and {} imaginary parts",
                self.re.len(),
                self.im.len()
            )));
        }
        let coeffs = self.re.iter().zip(&self.im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let grid = kdvctl_core::spectral::FourierGrid::with_oversampling(self.k, oversampling, tail_tolerance);
        Ok(SpectralState::on_grid(grid, self.alpha, coeffs)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub tau: f64,
    pub u: Vec<f64>,
    #[serde(default)]
    pub label: String,
}

/// `{"q": int, "segments": [{"tau", "u", "label"}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramFile {
    pub q: usize,
    pub segments: Vec<SegmentJson>,
}

impl From<&ControlProgram> for ProgramFile {
    fn from(p: &ControlProgram) -> Self {
        ProgramFile {
            q: p.q,
            segments: p
                .segments
                .iter()
                .map(|s| SegmentJson { tau: s.tau, u: s.u.clone(), label: s.label.clone() })
                .collect(),
        }
    }
}

impl From<&ProgramFile> for ControlProgram {
    fn from(p: &ProgramFile) -> Self {
        ControlProgram {
            q: p.q,
            segments: p
                .segments
                .iter()
                .map(|s| Segment { tau: s.tau, u: s.u.clone(), label: s.label.clone() })
                .collect(),
        }
    }
}

/// `{"M": int, "P": [...], "dP": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMapFile {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "dP")]
    pub dp: Vec<f64>,
}

impl From<&FlowMap> for FlowMapFile {
    fn from(f: &FlowMap) -> Self {
        FlowMapFile { m: f.m(), p: f.values().to_vec(), dp: f.derivatives().to_vec() }
    }
}

impl TryFrom<&FlowMapFile> for FlowMap {
    type Error = CliError;
    fn try_from(f: &FlowMapFile) -> Result<Self, CliError> {
        if f.p.len() != f.m {
            return Err(CliError::Format(format!("flow map declares M = {} but has {} nodes", f.m, f.p.len())));
        }
        Ok(FlowMap::from_samples(f.p.clone(), f.dp.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub coeff: RationalJson,
    pub expr: ExprJson,
}

/// Certificate and bracket-expression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExprJson {
    Basis { index: usize },
    Lincomb { terms: Vec<TermJson> },
    Cubed { power: u32, inner: Box<ExprJson> },
    Gen { phi: ExactPolyJson, scale: RationalJson },
    Bracket { left: Box<ExprJson>, right: Box<ExprJson> },
}

impl From<&Certificate> for ExprJson {
    fn from(c: &Certificate) -> Self {
        match c {
            Certificate::Basis(i) => ExprJson::Basis { index: *i },
            Certificate::LinComb(t) => ExprJson::Lincomb {
                terms: t.iter().map(|(r, c)| TermJson { coeff: r.into(), expr: c.into() }).collect(),
            },
            Certificate::DerivativePower { power, inner } => {
                ExprJson::Cubed { power: *power, inner: Box::new(inner.as_ref().into()) }
            }
        }
    }
}

impl From<&BracketExpression> for ExprJson {
    fn from(e: &BracketExpression) -> Self {
        match e {
            BracketExpression::Gen { phi, scale } => ExprJson::Gen { phi: phi.into(), scale: scale.into() },
            BracketExpression::Lin(t) => ExprJson::Lincomb {
                terms: t.iter().map(|(r, e)| TermJson { coeff: r.into(), expr: e.into() }).collect(),
            },
            BracketExpression::Bracket(a, b) => ExprJson::Bracket {
                left: Box::new(a.as_ref().into()),
                right: Box::new(b.as_ref().into()),
            },
        }
    }
}

fn terms<T>(
    t: &[TermJson],
    f: impl Fn(&ExprJson) -> Result<T, CliError>,
) -> Result<Vec<(Rational, T)>, CliError> {
    t.iter().map(|t| Ok((Rational::try_from(&t.coeff)?, f(&t.expr)?))).collect()
}

impl TryFrom<&ExprJson> for Certificate {
    type Error = CliError;
    fn try_from(e: &ExprJson) -> Result<Self, CliError> {
        match e {
            ExprJson::Basis { index } => Ok(Certificate::Basis(*index)),
            ExprJson::Lincomb { terms: t } => Ok(Certificate::LinComb(terms(t, |e| e.try_into())?)),
            ExprJson::Cubed { power, inner } => Ok(Certificate::DerivativePower {
                power: *power,
                inner: Box::new(inner.as_ref().try_into()?),
            }),
            _ => Err(CliError::Format("bracket nodes are not allowed in a certificate".into())),
        }
    }
}

impl TryFrom<&ExprJson> for BracketExpression {
    type Error = CliError;
    fn try_from(e: &ExprJson) -> Result<Self, CliError> {
        match e {
            ExprJson::Gen { phi, scale } => {
                Ok(BracketExpression::Gen { phi: phi.try_into()?, scale: scale.try_into()? })
            }
            ExprJson::Lincomb { terms: t } => Ok(BracketExpression::Lin(terms(t, |e| e.try_into())?)),
            ExprJson::Bracket { left, right } => Ok(BracketExpression::bracket(
                left.as_ref().try_into()?,
                right.as_ref().try_into()?,
            )),
            _ => Err(CliError::Format("basis and power nodes are not allowed in a bracket expression".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignJson {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

/// `±λ(φ')²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedAtomJson {
    pub sign: SignJson,
    pub lambda: f64,
    pub phi: PolyJson,
}

pub fn signed_element(atoms: &[SignedAtomJson]) -> Result<SignedConeElement, CliError> {
    let mut el = SignedConeElement::default();
    for a in atoms {
        let sign = match a.sign {
            SignJson::Plus => Sign::Plus,
            SignJson::Minus => Sign::Minus,
        };
        el.atoms.push(SignedAtom { sign, atom: ConeAtom::new(a.lambda, (&a.phi).into())? });
    }
    Ok(el)
}

pub fn signed_atoms_json(el: &SignedConeElement) -> Vec<SignedAtomJson> {
    el.atoms
        .iter()
        .map(|a| SignedAtomJson {
            sign: if a.sign == Sign::Plus { SignJson::Plus } else { SignJson::Minus },
            lambda: a.atom.lambda,
            phi: (&a.atom.phi).into(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WordAtomJson {
    Phase { theta: PolyJson },
    Transport { field: Vec<SignedAtomJson>, time: f64 },
    Translate { delta: f64 },
    GlobalPhase { c: f64 },
}

/// `{"atoms": [...]}`, first atom acting first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordFile {
    pub atoms: Vec<WordAtomJson>,
}

impl TryFrom<&WordFile> for SteeringWord {
    type Error = CliError;
    fn try_from(w: &WordFile) -> Result<Self, CliError> {
        let atoms = w
            .atoms
            .iter()
            .map(|a| {
                Ok(match a {
                    WordAtomJson::Phase { theta } => WordAtom::Phase(theta.into()),
                    WordAtomJson::Transport { field, time } => {
                        WordAtom::Transport { field: signed_element(field)?, time: *time }
                    }
                    WordAtomJson::Translate { delta } => WordAtom::Translate(*delta),
                    WordAtomJson::GlobalPhase { c } => WordAtom::GlobalPhase(*c),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(SteeringWord::new(atoms)?)
    }
}

impl From<&SteeringWord> for WordFile {
    fn from(w: &SteeringWord) -> Self {
        WordFile {
            atoms: w
                .atoms()
                .iter()
                .map(|a| match a {
                    WordAtom::Phase(t) => WordAtomJson::Phase { theta: t.into() },
                    WordAtom::Transport { field, time } => {
                        WordAtomJson::Transport { field: signed_atoms_json(field), time: *time }
                    }
                    WordAtom::Translate(d) => WordAtomJson::Translate { delta: *d },
                    WordAtom::GlobalPhase(c) => WordAtomJson::GlobalPhase { c: *c },
                })
                .collect(),
        }
    }
}

/// Target of `synth-phase`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTargetFile {
    pub theta: PolyJson,
    pub epsilon: f64,
    pub time_budget: f64,
}

/// Target of `synth-transport`: `e^{t T_f}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportTargetFile {
    pub field: Vec<SignedAtomJson>,
    pub time: f64,
    pub epsilon: f64,
    pub time_budget: f64,
}
