//! Leading coefficients of the enhanced area law and regression of entropy sweeps
//! against S(L) ≈ Σ L^{d−1} ln L + c L^{d−1} + c₀.

use ndarray::{Array1, Array2};
use ndarray_linalg::LeastSquaresSvd;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::f64::consts::PI;

use crate::entropy_functions::LogBase;
use crate::error::{Error, Result};
use crate::free_kernel::EnergyParams;
use crate::restricted_projection::DomainSpec;
use crate::special::gamma;

pub const MIN_FIT_POINTS: usize = 4;
/// Relative tolerance for recognizing L and 2L as a dyadic pair.
const DYADIC_MATCH: f64 = 1e-9;

/// Σ₀ = E^{(d−1)/2} |∂Λ| / (3 · 2^d π^{(d−1)/2} Γ((d+1)/2)).
pub fn sigma0(shape: &DomainSpec, e: EnergyParams) -> Result<f64> {
    let d = shape.dimension as f64;
    let denom = 3.0 * 2f64.powf(d) * PI.powf((d - 1.0) / 2.0) * gamma((d + 1.0) / 2.0);
    Ok(e.fermi_energy.powf((d - 1.0) / 2.0) * shape.base_surface() / denom)
}

/// (Σ_l, Σ_u) = (3Σ₀/(2π²), 2508 Σ₀).
pub fn sigma_bounds(sigma0_value: f64) -> Result<(f64, f64)> {
    if !(sigma0_value > 0.0 && sigma0_value.is_finite()) {
        return Err(Error::Domain(format!("Σ₀ must be positive, got {sigma0_value}")));
    }
    Ok((3.0 * sigma0_value / (2.0 * PI * PI), 2508.0 * sigma0_value))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEntry {
    pub scale: f64,
    pub entropy: f64,
    pub descriptor: String,
}

/// Entropies sampled over strictly increasing L.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSeries {
    pub dimension: usize,
    pub entries: Vec<SeriesEntry>,
}

impl ScalingSeries {
    pub fn new(dimension: usize, entries: Vec<SeriesEntry>) -> Result<Self> {
        crate::free_kernel::check_dim(dimension)?;
        for e in &entries {
            if !(e.scale > 0.0 && e.scale.is_finite()) || !(e.entropy >= 0.0 && e.entropy.is_finite()) {
                return Err(Error::Domain(format!("invalid series entry L={}, S={}", e.scale, e.entropy)));
            }
        }
        if entries.windows(2).any(|w| w[1].scale <= w[0].scale) {
            return Err(Error::Domain("series scales must be strictly increasing".into()));
        }
        Ok(Self { dimension, entries })
    }

    /// Series from bare (L, S) points with an empty descriptor.
    pub fn from_points(dimension: usize, points: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            dimension,
            points.iter().map(|&(scale, entropy)| SeriesEntry { scale, entropy, descriptor: String::new() }).collect(),
        )
    }

    pub fn scales(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.scale).collect()
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.entropy).collect()
    }

    /// Every entropy multiplied by `factor`, e.g. to change log base.
    pub fn rescaled(&self, factor: f64) -> Self {
        let entries = self.entries.iter().map(|e| SeriesEntry { entropy: e.entropy * factor, ..e.clone() }).collect();
        Self { dimension: self.dimension, entries }
    }

    fn area(&self, l: f64) -> f64 {
        l.powi(self.dimension as i32 - 1)
    }

    fn enhanced(&self, l: f64) -> f64 {
        self.area(l) * l.ln()
    }

    fn mean_entropy(&self) -> f64 {
        self.entries.iter().map(|e| e.entropy).sum::<f64>() / self.entries.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    JointRegression,
    DyadicDifference,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub method: FitMethod,
    /// Coefficient of L^{d−1} ln L.
    pub sigma_hat: f64,
    /// Coefficient of L^{d−1}; in d=1 this is the constant term.
    pub area_coeff: f64,
    /// Separate constant term, absent in d=1 where it merges with `area_coeff`.
    pub constant: Option<f64>,
    /// RMS residual divided by the mean entropy.
    pub residual_rms: f64,
    pub points: usize,
    /// (L, Σ̂ from the pair (L, 2L)); empty for the joint regression.
    pub pair_estimates: Vec<(f64, f64)>,
}

fn relative_rms(series: &ScalingSeries, model: impl Fn(f64) -> f64) -> f64 {
    let n = series.entries.len() as f64;
    let ss: f64 = series.entries.iter().map(|e| (e.entropy - model(e.scale)).powi(2)).sum();
    (ss / n).sqrt() / series.mean_entropy().max(f64::MIN_POSITIVE)
}

/// Least squares against {L^{d−1} ln L, L^{d−1}, 1}; the last two coincide in d=1.
pub fn fit_enhanced(series: &ScalingSeries) -> Result<FitResult> {
    let n = series.entries.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::TooFewSamples { got: n, need: MIN_FIT_POINTS, what: "series points for fit_enhanced" });
    }
    let with_constant = series.dimension > 1;
    let cols = if with_constant { 3 } else { 2 };
    let a = Array2::from_shape_fn((n, cols), |(i, j)| {
        let l = series.entries[i].scale;
        match j {
            0 => series.enhanced(l),
            1 => series.area(l),
            _ => 1.0,
        }
    });
    let b = Array1::from_iter(series.entries.iter().map(|e| e.entropy));
    let sol = a.least_squares(&b)?.solution;
    let (sigma_hat, area_coeff) = (sol[0], sol[1]);
    let constant = with_constant.then(|| sol[2]);
    let c0 = constant.unwrap_or(0.0);
    let residual_rms = relative_rms(series, |l| sigma_hat * series.enhanced(l) + area_coeff * series.area(l) + c0);
    Ok(FitResult {
        method: FitMethod::JointRegression,
        sigma_hat,
        area_coeff,
        constant,
        residual_rms,
        points: n,
        pair_estimates: vec![],
    })
}

/// Σ̂ from differences S(2L) − S(L), which cancel the constant term (and in d=1 the area term).
/// The reported value is the largest-L pair, the one closest to the asymptotic regime.
pub fn dyadic_sigma(series: &ScalingSeries) -> Result<FitResult> {
    let mut pairs = Vec::new();
    for (i, lo) in series.entries.iter().enumerate() {
        if let Some(hi) = series.entries[i + 1..].iter().find(|e| (e.scale / lo.scale - 2.0).abs() < DYADIC_MATCH) {
            let denom = series.enhanced(hi.scale) - series.enhanced(lo.scale);
            pairs.push((lo.scale, (hi.entropy - lo.entropy) / denom));
        }
    }
    let Some(&(l_last, sigma_hat)) = pairs.last() else {
        return Err(Error::TooFewSamples { got: 0, need: 1, what: "dyadic pairs (L, 2L)" });
    };
    // Area coefficient from the pair that fixed Σ̂, averaged over its two points.
    let area_coeff = [l_last, 2.0 * l_last]
        .iter()
        .map(|&l| {
            let s = series.entries.iter().find(|e| (e.scale / l - 1.0).abs() < DYADIC_MATCH).expect("pair member").entropy;
            (s - sigma_hat * series.enhanced(l)) / series.area(l)
        })
        .sum::<f64>()
        / 2.0;
    let residual_rms = relative_rms(series, |l| sigma_hat * series.enhanced(l) + area_coeff * series.area(l));
    Ok(FitResult {
        method: FitMethod::DyadicDifference,
        sigma_hat,
        area_coeff,
        constant: None,
        residual_rms,
        points: series.entries.len(),
        pair_estimates: pairs,
    })
}

/// |a − b| / |b|.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub const VERDICT_NOTE: &str =
    "finite-L surrogate: a fitted coefficient compared with bounds on liminf and limsup";

#[derive(Debug, Clone, Serialize)]
pub struct BoundVerdict {
    pub sigma_hat: f64,
    pub sigma_l: f64,
    pub sigma_u: f64,
    /// Σ̂ − Σ_l; negative means below the lower bound.
    pub lower_margin: f64,
    /// Σ_u − Σ̂; negative means above the upper bound.
    pub upper_margin: f64,
    pub passed: bool,
    pub note: &'static str,
}

pub fn bound_verdict(fit: &FitResult, sigma_l: f64, sigma_u: f64) -> BoundVerdict {
    let lower_margin = fit.sigma_hat - sigma_l;
    let upper_margin = sigma_u - fit.sigma_hat;
    BoundVerdict {
        sigma_hat: fit.sigma_hat,
        sigma_l,
        sigma_u,
        lower_margin,
        upper_margin,
        passed: lower_margin >= 0.0 && upper_margin >= 0.0,
        note: VERDICT_NOTE,
    }
}

/// Ordinary least-squares line y = intercept + slope·x with the slope's standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub points: usize,
}

impl TrendFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::Shape(format!("{} abscissae for {} values", n, y.len())));
        }
        if n < 2 {
            return Err(Error::TooFewSamples { got: n, need: 2, what: "points for a trend line" });
        }
        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        if !(sxx > 0.0) {
            return Err(Error::Domain("trend abscissae are all equal".into()));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let slope_stderr = if n > 2 {
            let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
            (sse / (nf - 2.0) / sxx).sqrt()
        } else {
            f64::NAN
        };
        Ok(Self { slope, intercept, slope_stderr, points: n })
    }

    /// Two-sided Student-t interval for the slope at the given confidence level.
    pub fn slope_interval(&self, level: f64) -> Option<(f64, f64)> {
        if self.points <= 2 || !(level > 0.0 && level < 1.0) {
            return None;
        }
        let t = StudentsT::new(0.0, 1.0, (self.points - 2) as f64).ok()?;
        let q = t.inverse_cdf(0.5 + level / 2.0);
        Some((self.slope - q * self.slope_stderr, self.slope + q * self.slope_stderr))
    }
}

/// Trend of y against ln L.
pub fn slope_vs_log(scales: &[f64], values: &[f64]) -> Result<TrendFit> {
    let x: Vec<f64> = scales.iter().map(|l| l.ln()).collect();
    TrendFit::fit(&x, values)
}

/// Trend of ln y against ln L; requires y > 0.
pub fn loglog_slope(scales: &[f64], values: &[f64]) -> Result<TrendFit> {
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("log-log slope needs positive values".into()));
    }
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    slope_vs_log(scales, &y)
}

#[derive(Debug, Clone, Serialize)]
pub struct LogBaseResolution {
    pub sigma0: f64,
    pub tolerance: f64,
    pub sigma_bits: f64,
    pub sigma_nats: f64,
    pub relative_error_bits: f64,
    pub relative_error_nats: f64,
    /// The base whose fitted coefficient lies within tolerance of Σ₀, the closer one if both do.
    pub selected: Option<LogBase>,
}

/// Fits the same oracle sweep in both entropy bases and keeps the one consistent with Σ₀.
pub fn resolve_log_base(oracle_bits: &ScalingSeries, sigma0_value: f64, tolerance: f64) -> Result<LogBaseResolution> {
    let sigma_bits = fit_enhanced(oracle_bits)?.sigma_hat;
    let sigma_nats = fit_enhanced(&oracle_bits.rescaled(LogBase::Nats.from_bits_factor()))?.sigma_hat;
    let relative_error_bits = relative_difference(sigma_bits, sigma0_value);
    let relative_error_nats = relative_difference(sigma_nats, sigma0_value);
    let selected = [(LogBase::Bits, relative_error_bits), (LogBase::Nats, relative_error_nats)]
        .into_iter()
        .filter(|&(_, err)| err <= tolerance)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(base, _)| base);
    Ok(LogBaseResolution {
        sigma0: sigma0_value,
        tolerance,
        sigma_bits,
        sigma_nats,
        relative_error_bits,
        relative_error_nats,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restricted_projection::BaseShape;
    use proptest::prelude::*;

    const GRID: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];

    fn series(d: usize, f: impl Fn(f64) -> f64) -> ScalingSeries {
        let pts: Vec<(f64, f64)> = GRID.iter().map(|&l| (l, f(l))).collect();
        ScalingSeries::from_points(d, &pts).unwrap()
    }

    fn e(v: f64) -> EnergyParams {
        EnergyParams::new(v).unwrap()
    }

    #[test]
    fn sigma0_examples() {
        let interval = DomainSpec::new(1, BaseShape::Interval, 1.0).unwrap();
        assert!((sigma0(&interval, e(1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((sigma0(&interval, e(4.0)).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let disc = DomainSpec::new(2, BaseShape::Disc, 1.0).unwrap();
        assert!((sigma0(&disc, e(1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        // Square [−1,1]²: perimeter 8 over 3·4·√π·Γ(3/2) = 6π.
        let square = DomainSpec::new(2, BaseShape::Box, 1.0).unwrap();
        assert!((sigma0(&square, e(1.0)).unwrap() - 8.0 / (6.0 * PI)).abs() < 1e-14);
        // Cube: surface 24 over 3·8·π·Γ(2) = 24π.
        let cube = DomainSpec::new(3, BaseShape::Box, 1.0).unwrap();
        assert!((sigma0(&cube, e(1.0)).unwrap() - 1.0 / PI).abs() < 1e-14);
    }

    #[test]
    fn bounds_examples() {
        let (l, u) = sigma_bounds(1.0 / 3.0).unwrap();
        assert!((l - 1.0 / (2.0 * PI * PI)).abs() < 1e-15);
        assert!((l - 0.050660).abs() < 1e-6);
        assert!((u - 836.0).abs() < 1e-12);
        assert!(sigma_bounds(0.0).is_err());
        assert!(sigma_bounds(-1.0).is_err());
    }

    #[test]
    fn fit_recovers_basis_members() {
        let f1 = fit_enhanced(&series(1, |l| 0.4 * l.ln() + 1.0)).unwrap();
        assert!((f1.sigma_hat - 0.4).abs() < 1e-8);
        assert!((f1.area_coeff - 1.0).abs() < 1e-8);
        assert!(f1.residual_rms < 1e-10);
        let f2 = fit_enhanced(&series(2, |l| 2.0 * l * l.ln() + 5.0 * l + 3.0)).unwrap();
        assert!((f2.sigma_hat - 2.0).abs() < 1e-8);
        assert!((f2.area_coeff - 5.0).abs() < 1e-7);
        assert!((f2.constant.unwrap() - 3.0).abs() < 1e-5);
    }

    #[test]
    fn series_validation() {
        assert!(fit_enhanced(&ScalingSeries::from_points(1, &[(1.0, 1.0), (2.0, 1.1), (4.0, 1.2)]).unwrap()).is_err());
        assert!(ScalingSeries::from_points(1, &[(2.0, 1.0), (1.0, 1.1)]).is_err());
        assert!(ScalingSeries::from_points(1, &[(1.0, 1.0), (1.0, 1.1)]).is_err());
        assert!(ScalingSeries::from_points(1, &[(1.0, -1.0)]).is_err());
        assert!(ScalingSeries::from_points(4, &[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn dyadic_examples() {
        let d = dyadic_sigma(&series(1, |l| 0.4 * l.ln())).unwrap();
        assert_eq!(d.pair_estimates.len(), 4);
        assert!(d.pair_estimates.iter().all(|p| (p.1 - 0.4).abs() < 1e-12));
        let decaying = dyadic_sigma(&series(1, |l| 0.4 * l.ln() + 2.0 + 3.0 / l)).unwrap();
        let errs: Vec<f64> = decaying.pair_estimates.iter().map(|p| (p.1 - 0.4).abs()).collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!((decaying.sigma_hat - decaying.pair_estimates[3].1).abs() < 1e-15);
        let no_pairs = ScalingSeries::from_points(1, &[(10.0, 1.0), (15.0, 1.1), (25.0, 1.2), (35.0, 1.3)]).unwrap();
        assert!(dyadic_sigma(&no_pairs).is_err());
        let d2 = dyadic_sigma(&series(2, |l| 2.0 * l * l.ln())).unwrap();
        assert!((d2.sigma_hat - 2.0).abs() < 1e-10);
    }

    #[test]
    fn verdict_examples() {
        let fit = |s: f64| FitResult {
            method: FitMethod::JointRegression,
            sigma_hat: s,
            area_coeff: 0.0,
            constant: None,
            residual_rms: 0.0,
            points: 5,
            pair_estimates: vec![],
        };
        assert!(bound_verdict(&fit(0.3), 0.05, 836.0).passed);
        let low = bound_verdict(&fit(0.01), 0.05, 836.0);
        assert!(!low.passed && low.lower_margin < 0.0);
        let high = bound_verdict(&fit(1e4), 0.05, 836.0);
        assert!(!high.passed && high.upper_margin < 0.0);
    }

    #[test]
    fn trend_helpers() {
        let l = GRID.to_vec();
        let y: Vec<f64> = l.iter().map(|v| 0.25 * v.ln() + 1.0).collect();
        let t = slope_vs_log(&l, &y).unwrap();
        assert!((t.slope - 0.25).abs() < 1e-12 && t.slope_stderr < 1e-12);
        let p: Vec<f64> = l.iter().map(|v| 3.0 * v.powf(0.6)).collect();
        assert!((loglog_slope(&l, &p).unwrap().slope - 0.6).abs() < 1e-12);
        assert!(loglog_slope(&l, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
        // Noisy line: the 95% interval brackets the slope it was built from.
        let noisy: Vec<f64> = l.iter().enumerate().map(|(i, v)| 0.1 * v.ln() + if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        let (lo, hi) = slope_vs_log(&l, &noisy).unwrap().slope_interval(0.95).unwrap();
        assert!(lo < 0.1 && 0.1 < hi);
    }

    #[test]
    fn resolution_picks_matching_base() {
        // A nats-convention sweep with Σ = 1/3, expressed in bits.
        let bits = series(1, |l| (l.ln() / 3.0 + 0.5) / std::f64::consts::LN_2);
        let r = resolve_log_base(&bits, 1.0 / 3.0, 0.15).unwrap();
        assert_eq!(r.selected, Some(LogBase::Nats));
        assert!((r.sigma_nats - 1.0 / 3.0).abs() < 1e-10);
        let r = resolve_log_base(&bits, 10.0, 0.15).unwrap();
        assert_eq!(r.selected, None);
    }

    proptest! {
        #[test]
        fn fit_is_linear_in_entropy(c in 0.01f64..100.0, sigma in 0.0f64..2.0, a in 0.0f64..5.0) {
            let s = series(1, |l| sigma * l.ln() + a + 0.3 / l);
            let base = fit_enhanced(&s).unwrap();
            let scaled = fit_enhanced(&s.rescaled(c)).unwrap();
            prop_assert!((scaled.sigma_hat - c * base.sigma_hat).abs() <= 1e-9 * (1.0 + c * base.sigma_hat.abs()));
        }

        #[test]
        fn fit_recovers_any_span_member(sigma in -3.0f64..3.0, a in -3.0f64..3.0, c0 in 0.0f64..50.0) {
            let model = |l: f64| sigma * l * l.ln() + a * l + c0;
            prop_assume!(GRID.iter().all(|&l| model(l) >= 0.0));
            let f = fit_enhanced(&series(2, model)).unwrap();
            prop_assert!((f.sigma_hat - sigma).abs() < 1e-8);
        }

        #[test]
        fn sigma0_energy_power(ev in 0.01f64..100.0, d in 1usize..4) {
            let shape = DomainSpec::new(d, BaseShape::Box, 1.0).unwrap();
            let ratio = sigma0(&shape, e(ev)).unwrap() / sigma0(&shape, e(1.0)).unwrap();
            prop_assert!((ratio - ev.powf((d as f64 - 1.0) / 2.0)).abs() < 1e-12 * ratio.max(1.0));
        }
    }
}
