//! Scalar entropy functions h, g, f and brute-force checks of the elementary
//! inequalities relating them.

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute slack tolerance for the scalar inequality scans.
pub const SCALAR_TOLERANCE: f64 = 1e-12;

/// Occupation probability in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct UnitValue(f64);

impl UnitValue {
    pub fn new(x: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&x) {
            Ok(Self(x))
        } else {
            Err(Error::Domain(format!("{x} is outside [0, 1]")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Logarithm base used when reporting entropies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    /// log₂, the convention of the entropy function h.
    Bits,
    /// Natural logarithm.
    Nats,
}

impl LogBase {
    /// Factor c with entropy_in_self = c · entropy_in_bits.
    pub fn from_bits_factor(self) -> f64 {
        match self {
            LogBase::Bits => 1.0,
            LogBase::Nats => std::f64::consts::LN_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogBase::Bits => "bits",
            LogBase::Nats => "nats",
        }
    }
}

/// −x log₂ x with 0 log₂ 0 = 0.
#[inline]
pub(crate) fn neg_xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

#[inline]
pub(crate) fn h_raw(x: f64) -> f64 {
    neg_xlog2x(x) + neg_xlog2x(1.0 - x)
}

#[inline]
pub(crate) fn g_raw(x: f64) -> f64 {
    x * (1.0 - x)
}

#[inline]
pub(crate) fn f_raw(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        neg_xlog2x(x * x)
    }
}

/// −3 g log₂ g, the upper envelope of h.
#[inline]
pub(crate) fn sandwich_upper(x: f64) -> f64 {
    3.0 * neg_xlog2x(g_raw(x))
}

/// Binary entropy h(x) = −x log₂ x − (1−x) log₂(1−x).
pub fn h(x: f64) -> Result<f64> {
    Ok(h_raw(UnitValue::new(x)?.get()))
}

/// g(x) = x(1 − x).
pub fn g(x: f64) -> Result<f64> {
    Ok(g_raw(UnitValue::new(x)?.get()))
}

/// f(x) = −x² log₂(x²) on [0, 1], zero beyond.
pub fn f(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("f needs x >= 0, got {x}")));
    }
    Ok(f_raw(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub samples: usize,
    /// Minimal signed slack over all samples and inequalities; negative means violated.
    pub max_violation: f64,
    pub worst_input: Vec<f64>,
    pub tolerance: f64,
}

impl InequalityReport {
    pub fn new(tolerance: f64) -> Self {
        Self { samples: 0, max_violation: f64::INFINITY, worst_input: Vec::new(), tolerance }
    }

    pub fn record(&mut self, slack: f64, input: &[f64]) {
        if slack < self.max_violation || self.worst_input.is_empty() {
            self.max_violation = slack;
            self.worst_input = input.to_vec();
        }
    }

    pub fn merge(mut self, other: InequalityReport) -> Self {
        self.samples += other.samples;
        if other.max_violation < self.max_violation {
            self.max_violation = other.max_violation;
            self.worst_input = other.worst_input;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.max_violation >= -self.tolerance
    }
}

/// n equispaced points covering [0, 1] including both endpoints.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    for &x in grid {
        UnitValue::new(x)?;
    }
    Ok(())
}

/// −g log₂ g ≤ h ≤ −3 g log₂ g on every grid point.
pub fn check_sandwich(grid: &[f64]) -> Result<InequalityReport> {
    validate_grid(grid)?;
    let mut rep = InequalityReport::new(SCALAR_TOLERANCE);
    for &x in grid {
        let hx = h_raw(x);
        let lower = neg_xlog2x(g_raw(x));
        rep.record((hx - lower).min(sandwich_upper(x) - hx), &[x]);
    }
    rep.samples = grid.len();
    Ok(rep)
}

/// −x log₂ x ≤ x^s/(1−s) and g ≤ h ≤ (6/(1−s)) g^s on every grid point.
pub fn check_power_bounds(grid: &[f64], s: f64) -> Result<InequalityReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("power-bound exponent s={s} outside ]0,1[")));
    }
    validate_grid(grid)?;
    let mut rep = InequalityReport::new(SCALAR_TOLERANCE);
    for &x in grid {
        let hx = h_raw(x);
        let gx = g_raw(x);
        let slack = [x.powf(s) / (1.0 - s) - neg_xlog2x(x), hx - gx, 6.0 / (1.0 - s) * gx.powf(s) - hx]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        rep.record(slack, &[x, s]);
    }
    rep.samples = grid.len();
    Ok(rep)
}

/// f(x + y) ≤ 2 f(x) + 2 f(y) for x, y ≥ 0, x + y < 1. Pairs outside the region are rejected.
pub fn check_log_sum(pairs: &[(f64, f64)]) -> Result<InequalityReport> {
    let mut rep = InequalityReport::new(SCALAR_TOLERANCE);
    for &(x, y) in pairs {
        if !(x >= 0.0 && y >= 0.0 && x + y < 1.0) {
            return Err(Error::Domain(format!("log-sum pair ({x}, {y}) needs x, y >= 0 and x + y < 1")));
        }
        rep.record(2.0 * f_raw(x) + 2.0 * f_raw(y) - f_raw(x + y), &[x, y]);
    }
    rep.samples = pairs.len();
    Ok(rep)
}

/// Monotonicity of f on [0, e^{−1/2}]: successive grid values must not decrease.
/// Grid points beyond e^{−1/2} are rejected.
pub fn check_f_monotone(grid: &[f64]) -> Result<InequalityReport> {
    let top = (-0.5f64).exp();
    let mut sorted = grid.to_vec();
    if sorted.iter().any(|&x| !(0.0..=top).contains(&x)) {
        return Err(Error::Domain(format!("monotonicity grid must lie in [0, {top}]")));
    }
    sorted.sort_by(f64::total_cmp);
    let mut rep = InequalityReport::new(SCALAR_TOLERANCE);
    for w in sorted.windows(2) {
        rep.record(f_raw(w[1]) - f_raw(w[0]), w);
    }
    rep.samples = sorted.len();
    if sorted.len() < 2 {
        rep.max_violation = 0.0;
    }
    Ok(rep)
}

/// Grid of (x, y) pairs covering the open triangle x + y < 1 with n points per axis.
pub fn log_sum_pairs(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = i as f64 / n as f64;
            let y = j as f64 / n as f64;
            if x + y < 1.0 {
                out.push((x, y));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frozen_values() {
        assert_eq!(h(0.0).unwrap(), 0.0);
        assert_eq!(h(1.0).unwrap(), 0.0);
        assert_eq!(h(0.5).unwrap(), 1.0);
        assert!((h(0.25).unwrap() - 0.811278124459132864).abs() < 1e-15);
        assert_eq!(g(0.5).unwrap(), 0.25);
        assert!((g(0.1).unwrap() - 0.09).abs() < 1e-16);
        assert_eq!(f(0.0).unwrap(), 0.0);
        assert_eq!(f(1.0).unwrap(), 0.0);
        assert_eq!(f(3.0).unwrap(), 0.0);
        assert!((f((-0.5f64).exp()).unwrap() - 0.530737845423042989).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(h(-1e-9).is_err());
        assert!(h(1.0 + 1e-9).is_err());
        assert!(g(2.0).is_err());
        assert!(f(-0.1).is_err());
        assert!(f(f64::NAN).is_err());
        assert!(check_power_bounds(&[0.5], 1.0).is_err());
        assert!(check_power_bounds(&[0.5], 0.0).is_err());
        assert!(check_sandwich(&[1.5]).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let r = check_sandwich(&[0.0, 0.5, 1.0]).unwrap();
        assert!(r.max_violation >= 0.0);
        let r = check_sandwich(&[1.0 / 3.0]).unwrap();
        assert!(r.max_violation > 0.0);
        let r = check_sandwich(&uniform_grid(100_000)).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn power_bound_examples() {
        let r = check_power_bounds(&[0.0, 1.0], 0.3).unwrap();
        assert!(r.max_violation >= 0.0);
        let r = check_power_bounds(&uniform_grid(100_000), 0.9).unwrap();
        assert!(r.passed(), "{r:?}");
        let rhs = 6.0 / 0.49 * 0.25f64.powf(0.51);
        assert!(h(0.5).unwrap() <= rhs);
        let r = check_power_bounds(&[0.5], 0.51).unwrap();
        assert!(r.max_violation > 0.0);
    }

    #[test]
    fn log_sum_and_monotone_scans() {
        assert!(check_log_sum(&log_sum_pairs(300)).unwrap().passed());
        let top = (-0.5f64).exp();
        let grid: Vec<f64> = (0..=10_000).map(|i| top * i as f64 / 10_000.0).collect();
        assert!(check_f_monotone(&grid).unwrap().passed());
        assert!(check_f_monotone(&[0.9]).is_err());
        assert!(check_log_sum(&[(0.6, 0.5)]).is_err());
    }

    proptest! {
        #[test]
        fn ranges_and_symmetry(x in 0.0f64..=1.0) {
            let hx = h(x).unwrap();
            let gx = g(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&hx));
            prop_assert!((0.0..=0.25).contains(&gx));
            prop_assert!((hx - h(1.0 - x).unwrap()).abs() < 1e-14);
            prop_assert!((gx - g(1.0 - x).unwrap()).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&f(x).unwrap()));
        }

        #[test]
        fn sandwich_holds(x in 0.0f64..=1.0) {
            let gx = g_raw(x);
            let hx = h_raw(x);
            prop_assert!(gx <= hx + SCALAR_TOLERANCE);
            prop_assert!(neg_xlog2x(gx) <= hx + SCALAR_TOLERANCE);
            prop_assert!(hx <= sandwich_upper(x) + SCALAR_TOLERANCE);
        }

        #[test]
        fn power_bound_holds(x in 0.0f64..=1.0, s in 0.001f64..0.999) {
            prop_assert!(neg_xlog2x(x) <= x.powf(s) / (1.0 - s) + SCALAR_TOLERANCE);
            prop_assert!(h_raw(x) <= 6.0 / (1.0 - s) * g_raw(x).powf(s) + SCALAR_TOLERANCE);
        }

        #[test]
        fn f_monotone_below_peak(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let top = (-0.5f64).exp();
            let (lo, hi) = if a <= b { (a * top, b * top) } else { (b * top, a * top) };
            prop_assert!(f_raw(lo) <= f_raw(hi) + SCALAR_TOLERANCE);
        }

        #[test]
        fn log_sum_holds(x in 0.0f64..1.0, t in 0.0f64..1.0) {
            let y = (1.0 - x) * t * 0.999_999;
            prop_assert!(f_raw(x + y) <= 2.0 * f_raw(x) + 2.0 * f_raw(y) + SCALAR_TOLERANCE);
        }
    }
}
