//! Saturation and Lie-closure certificate report.

use alloc::vec::Vec;

use crate::spectral::ControlProfileSet;
use crate::trig::{
    closure_run, vectorfield_certificate_with, CertificateStrategy, ExactPoly, FieldCertifier,
    ModeCertifier, Parity, Rational,
};
use crate::Result;
use num_traits::One;

/// Closure steps attempted before giving up on filling the window.
pub const CLOSURE_MAX_STEPS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRow {
    pub freq: usize,
    pub parity: Parity,
    pub depth: usize,
    pub size: usize,
    pub coefficient_bits: u64,
    /// Exact evaluation reproduces the mode.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRow {
    pub freq: usize,
    pub parity: Parity,
    pub bracket_depth: usize,
    pub leaves: usize,
    /// Exact evaluation reproduces the field and all leaf scales are ≥ 0.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub n: usize,
    pub n_max: usize,
    pub window: usize,
    /// `dim H_j` along the closure run.
    pub closure_dims: Vec<usize>,
    pub closure_full: bool,
    /// Q spans `{1, cos x, sin x, cos 2x, sin 2x}`.
    pub spanning: bool,
    pub modes: Vec<ModeRow>,
    pub fields: Vec<FieldRow>,
}

impl SaturationReport {
    pub fn all_verified(&self) -> bool {
        self.closure_full
            && self.spanning
            && self.modes.iter().all(|m| m.verified)
            && self.fields.iter().all(|f| f.verified)
    }

    pub fn max_depth(&self) -> usize {
        self.modes.iter().map(|m| m.depth).max().unwrap_or(0)
    }
}

/// `(0, cos), (1, cos), (1, sin), …, (N, sin)`.
pub fn mode_list(n_max: usize) -> Vec<(usize, Parity)> {
    let mut v = alloc::vec![(0, Parity::Cos)];
    for m in 1..=n_max {
        v.push((m, Parity::Cos));
        v.push((m, Parity::Sin));
    }
    v
}

/// Closure run from `H_0`, mode certificates and vector-field certificates
/// for every mode up to `n_max`, each checked by exact evaluation.
pub fn saturation_report(n: usize, n_max: usize, q: &ControlProfileSet) -> Result<SaturationReport> {
    let window = n_max.max(n.saturating_sub(1));
    let run = closure_run(n, window, CLOSURE_MAX_STEPS)?;
    let spanning = ControlProfileSet::new(q.profiles().to_vec()).is_ok();
    let mut mc = ModeCertifier::new(n, CertificateStrategy::MinDepth)?;
    let mut fc = FieldCertifier::new();
    let mut modes = Vec::new();
    let mut fields = Vec::new();
    for (freq, parity) in mode_list(n_max) {
        let target = ExactPoly::monomial(freq, parity, Rational::one());
        let cert = mc.mode(freq, parity);
        let verified = cert.evaluate(mc.generators()) == target;
        modes.push(ModeRow {
            freq,
            parity,
            depth: cert.depth(),
            size: cert.size(),
            coefficient_bits: cert.coefficient_bits(),
            verified,
        });
        let e = vectorfield_certificate_with(&target, &mut fc);
        fields.push(FieldRow {
            freq,
            parity,
            bracket_depth: e.bracket_depth(),
            leaves: e.leaf_count(),
            verified: e.leaves_valid() && e.evaluate().coeff == target,
        });
    }
    Ok(SaturationReport {
        n,
        n_max,
        window,
        closure_full: run.is_full(),
        closure_dims: run.dims,
        spanning,
        modes,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_modes_need_no_products() {
        let r = saturation_report(3, 2, &ControlProfileSet::standard()).unwrap();
        assert!(r.all_verified());
        assert_eq!(r.max_depth(), 0);
        assert_eq!(r.modes.len(), 5);
    }

    #[test]
    fn fifth_power_path() {
        let r = saturation_report(5, 8, &ControlProfileSet::standard()).unwrap();
        assert!(r.all_verified());
        assert!(r.max_depth() >= 1);
    }
}
