use alloc::vec::Vec;

use crate::{Error, Result};

/// One evaluated point of a calibration sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPoint {
    pub param: f64,
    pub error: f64,
    pub total_time: f64,
    pub segment_count: usize,
}

/// Outcome of [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<P> {
    pub curve: Vec<CalibrationPoint>,
    pub params: Vec<P>,
    /// Index of the first point meeting the tolerance.
    pub accepted: Option<usize>,
    pub converged: bool,
}

impl<P> Calibration<P> {
    pub fn best_param(&self) -> Option<&P> {
        self.accepted.map(|i| &self.params[i])
    }

    pub fn best_error(&self) -> f64 {
        self.curve.iter().map(|p| p.error).fold(f64::INFINITY, f64::min)
    }

    /// `Err(BudgetExceeded)` unless converged.
    pub fn require(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::BudgetExceeded { best_error: self.best_error() })
        }
    }
}

/// Walks a refinement schedule (coarsest first) until `eval` reports an error
/// below `epsilon`. `eval` returns the point and whether it fits the time
/// budget; the sweep stops at the first point that does not.
pub fn calibrate<P: Clone>(
    schedule: &[P],
    epsilon: f64,
    mut eval: impl FnMut(&P) -> Result<(CalibrationPoint, bool)>,
) -> Result<Calibration<P>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "calibration tolerance must be positive, got {epsilon}"
        )));
    }
    let mut cal = Calibration { curve: Vec::new(), params: Vec::new(), accepted: None, converged: false };
    for p in schedule {
        let (point, within_budget) = eval(p)?;
        cal.curve.push(point);
        cal.params.push(p.clone());
        if !within_budget {
            break;
        }
        if point.error < epsilon {
            cal.accepted = Some(cal.curve.len() - 1);
            cal.converged = true;
            break;
        }
    }
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(param: f64, error: f64) -> CalibrationPoint {
        CalibrationPoint { param, error, total_time: 1.0 / param, segment_count: 1 }
    }

    #[test]
    fn stops_at_first_accepted_point() {
        let sched = [1.0, 0.5, 0.25, 0.125];
        let cal = calibrate(&sched, 0.3, |p| Ok((pt(*p, *p), true))).unwrap();
        assert!(cal.converged);
        assert_eq!(cal.best_param(), Some(&0.25));
        assert_eq!(cal.curve.len(), 3);
    }

    #[test]
    fn zero_tolerance_and_budget_fail() {
        assert!(calibrate(&[1.0], 0.0, |p| Ok((pt(*p, 0.0), true))).is_err());
        let cal = calibrate(&[1.0, 0.5], 1e-3, |p| Ok((pt(*p, 1.0), *p > 0.7))).unwrap();
        assert!(!cal.converged);
        assert_eq!(cal.curve.len(), 2);
        assert!(matches!(cal.require(), Err(Error::BudgetExceeded { .. })));
    }
}
