//! Singular values, Schatten norms and brute-force checks of the matrix
//! inequalities behind the cross-term estimates.

use ndarray::Array2;
use ndarray_linalg::SVD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy_functions::{f_raw, InequalityReport};
use crate::error::{Error, Result};

/// Singular values below this fraction of a₁ are treated as exact zeros.
pub const RELATIVE_CUTOFF: f64 = 1e-14;
pub const MATRIX_TOLERANCE: f64 = 1e-10;

/// a₁ ≥ a₂ ≥ … ≥ 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    pub values: Vec<f64>,
}

impl SingularSpectrum {
    /// a_n (1-based); zero beyond the stored length.
    pub fn get(&self, n: usize) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        self.values.get(n - 1).copied().unwrap_or(0.0)
    }

    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn power_sum(&self, p: f64) -> f64 {
        self.values.iter().filter(|&&a| a > 0.0).map(|a| a.powf(p)).sum()
    }
}

pub fn singular_values(a: &Array2<f64>) -> Result<SingularSpectrum> {
    if a.is_empty() {
        return Ok(SingularSpectrum { values: Vec::new() });
    }
    let (_, s, _) = a.svd(false, false)?;
    let mut values = s.to_vec();
    values.sort_by(|x, y| y.total_cmp(x));
    let cutoff = RELATIVE_CUTOFF * values.first().copied().unwrap_or(0.0);
    for v in values.iter_mut() {
        if *v < cutoff {
            *v = 0.0;
        }
    }
    Ok(SingularSpectrum { values })
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Schatten exponent p={p} must be positive")))
    }
}

/// Σ a_n^p.
pub fn power_sum(a: &Array2<f64>, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(singular_values(a)?.power_sum(p))
}

/// (Σ a_n^p)^{1/p}; a quasi-norm for p < 1.
pub fn schatten_norm(a: &Array2<f64>, p: f64) -> Result<f64> {
    Ok(power_sum(a, p)?.powf(1.0 / p))
}

fn same_shape(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// a_{n+m−1}(A) ≤ a_n(B) + a_m(A − B) over the given 1-based (n, m) pairs,
/// or over all admissible pairs when `pairs` is `None`.
pub fn check_singular_additivity(
    a: &Array2<f64>,
    b: &Array2<f64>,
    pairs: Option<&[(usize, usize)]>,
) -> Result<InequalityReport> {
    same_shape(a, b)?;
    let sa = singular_values(a)?;
    let sb = singular_values(b)?;
    let sd = singular_values(&(a - b))?;
    let k = a.nrows().min(a.ncols());
    let all: Vec<(usize, usize)>;
    let pairs = match pairs {
        Some(p) => p,
        None => {
            all = (1..=k).flat_map(|n| (1..=k + 1 - n).map(move |m| (n, m))).collect();
            &all
        }
    };
    let mut rep = InequalityReport::new(MATRIX_TOLERANCE);
    for &(n, m) in pairs {
        if n == 0 || m == 0 {
            return Err(Error::Domain("singular-value indices are 1-based".into()));
        }
        let slack = sb.get(n) + sd.get(m) - sa.get(n + m - 1);
        rep.record(slack, &[n as f64, m as f64]);
    }
    rep.samples = pairs.len();
    Ok(rep)
}

fn check_s(s: f64) -> Result<()> {
    if s > 0.5 && s < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("interpolation exponent s={s} outside ]1/2, 1[")))
    }
}

/// ‖A‖_{2s}^{2s} ≤ ‖A‖₁^{2(1−s)} ‖A‖₂^{2(2s−1)}; slack is relative to the right side.
pub fn check_interpolation(a: &Array2<f64>, s: f64) -> Result<InequalityReport> {
    check_s(s)?;
    let sv = singular_values(a)?;
    let lhs = sv.power_sum(2.0 * s);
    let rhs = sv.power_sum(1.0).powf(2.0 * (1.0 - s)) * sv.power_sum(2.0).powf(2.0 * s - 1.0);
    let mut rep = InequalityReport::new(MATRIX_TOLERANCE);
    rep.record(if rhs > 0.0 { (rhs - lhs) / rhs } else { -lhs }, &[s]);
    rep.samples = 1;
    Ok(rep)
}

/// Operator-norm bound e^{−1/2}/3 required by the log-triangle inequality.
pub fn log_triangle_radius() -> f64 {
    (-0.5f64).exp() / 3.0
}

fn trace_f(sv: &SingularSpectrum) -> f64 {
    sv.values.iter().map(|&a| f_raw(a)).sum()
}

/// tr f(|A|) ≤ 4 tr f(|B|) + 4 tr f(|A − B|) for ‖A‖, ‖B‖ ≤ e^{−1/2}/3.
pub fn check_log_triangle(a: &Array2<f64>, b: &Array2<f64>) -> Result<InequalityReport> {
    same_shape(a, b)?;
    let sa = singular_values(a)?;
    let sb = singular_values(b)?;
    let radius = log_triangle_radius();
    for (name, norm) in [("A", sa.largest()), ("B", sb.largest())] {
        if norm > radius * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("||{name}|| = {norm} exceeds e^(-1/2)/3 = {radius}")));
        }
    }
    let sd = singular_values(&(a - b))?;
    let mut rep = InequalityReport::new(MATRIX_TOLERANCE);
    rep.record(4.0 * trace_f(&sb) + 4.0 * trace_f(&sd) - trace_f(&sa), &[sa.largest(), sb.largest()]);
    rep.samples = 1;
    Ok(rep)
}

/// Σ a^{2s} ≥ (Σ a²)^s for ‖A‖ ≤ 1; slack relative to the left side.
pub fn check_power_sum_subadditivity(a: &Array2<f64>, s: f64) -> Result<InequalityReport> {
    check_s(s)?;
    let sv = singular_values(a)?;
    if sv.largest() > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!("||A|| = {} exceeds 1", sv.largest())));
    }
    let lhs = sv.power_sum(2.0 * s);
    let rhs = sv.power_sum(2.0).powf(s);
    let mut rep = InequalityReport::new(MATRIX_TOLERANCE);
    rep.record(if lhs > 0.0 { (lhs - rhs) / lhs } else { -rhs }, &[s]);
    rep.samples = 1;
    Ok(rep)
}

/// Deterministic generator for corpus sample `index`.
pub fn corpus_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Entries i.i.d. uniform on [−1, 1].
pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..=1.0))
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub pairs: usize,
    pub size: usize,
    pub additivity: InequalityReport,
    pub interpolation: InequalityReport,
    pub log_triangle: InequalityReport,
    pub subadditivity: InequalityReport,
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.additivity.passed() && self.interpolation.passed() && self.log_triangle.passed() && self.subadditivity.passed()
    }
}

struct SampleReports([InequalityReport; 4]);

fn run_sample(seed: u64, index: u64, size: usize, s_values: &[f64]) -> Result<SampleReports> {
    let mut rng = corpus_rng(seed, index);
    let a = uniform_matrix(&mut rng, size, size);
    let b = if index % 2 == 0 {
        uniform_matrix(&mut rng, size, size)
    } else {
        // Nearby pairs probe the regime where A − B is small.
        &a + &uniform_matrix(&mut rng, size, size).mapv(|x| 0.05 * x)
    };
    let additivity = check_singular_additivity(&a, &b, None)?;

    let mut interpolation = InequalityReport::new(MATRIX_TOLERANCE);
    let mut subadditivity = InequalityReport::new(MATRIX_TOLERANCE);
    let a_unit = {
        let n = singular_values(&a)?.largest();
        if n > 0.0 { a.mapv(|x| x / n) } else { a.clone() }
    };
    for &s in s_values {
        interpolation = interpolation.merge(check_interpolation(&a, s)?);
        subadditivity = subadditivity.merge(check_power_sum_subadditivity(&a_unit, s)?);
    }

    let na = singular_values(&a)?.largest();
    let nb = singular_values(&b)?.largest();
    let shrink = rng.random_range(0.05..=1.0) * log_triangle_radius() / na.max(nb);
    let log_triangle = check_log_triangle(&a.mapv(|x| x * shrink), &b.mapv(|x| x * shrink))?;
    Ok(SampleReports([additivity, interpolation, log_triangle, subadditivity]))
}

/// Runs every matrix inequality on `pairs` seeded random pairs of `size × size` matrices.
pub fn run_matrix_corpus(seed: u64, pairs: usize, size: usize, s_values: &[f64]) -> Result<CorpusReport> {
    for &s in s_values {
        check_s(s)?;
    }
    let samples: Vec<SampleReports> = (0..pairs as u64)
        .into_par_iter()
        .map(|i| run_sample(seed, i, size, s_values))
        .collect::<Result<_>>()?;
    let mut acc: [InequalityReport; 4] = std::array::from_fn(|_| InequalityReport::new(MATRIX_TOLERANCE));
    for sample in samples {
        for (slot, rep) in acc.iter_mut().zip(sample.0) {
            *slot = std::mem::replace(slot, InequalityReport::new(MATRIX_TOLERANCE)).merge(rep);
        }
    }
    let [additivity, interpolation, log_triangle, subadditivity] = acc;
    Ok(CorpusReport { pairs, size, additivity, interpolation, log_triangle, subadditivity })
}
