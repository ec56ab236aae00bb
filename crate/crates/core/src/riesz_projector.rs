//! Contour-integral evaluation of A₁ 1_{<E}(K) A₂ on a rectangle whose right edge
//! crosses the real axis at E, validated against spectral decompositions.
//!
//! Only the upper half of the contour is sampled. The lower half is its mirror
//! image traversed backwards, so a node w with weight ω pairs with w̄ and weight
//! −ω̄. Both resolvents share one tridiagonal factorization because
//! (T − w̄)⁻¹Y = conj((T − w)⁻¹ conj Y) for real symmetric T.

use gauss_quad::legendre::GaussLegendre;
use ndarray::{Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, SVD, UPLO};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{dense_solve, sturm_count, tridiag_kth_eigenvalue, tridiag_shifted_solve, HermitianTridiagonal};

pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// E is rejected when an eigenvalue lies within this fraction of ‖K‖.
pub const TIE_FRACTION: f64 = 1e-8;
pub const MAX_SOLVES: usize = 100_000;
const ADAPTIVE_ORDER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContourQuadrature {
    /// One Gauss–Legendre rule of the given order per edge.
    Fixed { nodes_per_edge: usize },
    /// Panel bisection until each panel meets `tolerance` relative to the integral scale.
    Adaptive { tolerance: f64, max_solves: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolventSolver {
    /// One Householder tridiagonalization, then a tridiagonal solve per node.
    Tridiagonal,
    /// A dense LU factorization per node.
    Dense,
}

/// Rectangle {Re z ∈ [left, E], |Im z| ≤ half_height}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    pub energy: f64,
    pub left: f64,
    pub half_height: f64,
    pub quadrature: ContourQuadrature,
}

impl ContourSpec {
    pub fn new(energy: f64, left: f64, half_height: f64, quadrature: ContourQuadrature) -> Result<Self> {
        if !(left < energy) {
            return Err(Error::Domain(format!("contour needs left < E, got left={left}, E={energy}")));
        }
        if !(half_height > 0.0 && half_height.is_finite()) {
            return Err(Error::Domain(format!("half-height must be positive, got {half_height}")));
        }
        match quadrature {
            ContourQuadrature::Fixed { nodes_per_edge } if nodes_per_edge == 0 => {
                return Err(Error::Domain("nodes_per_edge must be positive".into()))
            }
            ContourQuadrature::Adaptive { tolerance, max_solves } if !(tolerance > 0.0) || max_solves == 0 => {
                return Err(Error::Domain("adaptive quadrature needs tolerance > 0 and a positive solve cap".into()))
            }
            _ => {}
        }
        Ok(Self { energy, left, half_height, quadrature })
    }

    /// The rectangle with left edge at −1 + min σ(K).
    pub fn for_matrix(k: &Array2<C64>, energy: f64, half_height: f64, quadrature: ContourQuadrature) -> Result<Self> {
        let red = HermitianTridiagonal::new(k)?;
        Self::new(energy, smallest_eigenvalue(&red) - 1.0, half_height, quadrature)
    }
}

fn smallest_eigenvalue(red: &HermitianTridiagonal) -> f64 {
    if red.dim() == 0 {
        0.0
    } else {
        tridiag_kth_eigenvalue(&red.diag, &red.off, 0)
    }
}

/// Positive diagonal weight B.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOperator {
    pub weights: Vec<f64>,
}

impl WeightOperator {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Domain("weights must be positive and finite".into()));
        }
        Ok(Self { weights })
    }

    pub fn identity(n: usize) -> Self {
        Self { weights: vec![1.0; n] }
    }

    /// ⟨x⟩⁻¹ = (1 + x²)^{−1/2} at the given coordinates.
    pub fn japanese_bracket(coords: &[f64]) -> Self {
        Self { weights: coords.iter().map(|x| 1.0 / (1.0 + x * x).sqrt()).collect() }
    }

    pub fn inverse(&self) -> Self {
        Self { weights: self.weights.iter().map(|w| 1.0 / w).collect() }
    }

    pub fn matrix(&self) -> Array2<C64> {
        Array2::from_diag(&ndarray::Array1::from_iter(self.weights.iter().map(|&w| C64::new(w, 0.0))))
    }
}

#[derive(Debug, Clone)]
pub struct RieszResult {
    pub matrix: Array2<C64>,
    /// Resolvent applications, counting w and w̄ separately.
    pub solves: usize,
    pub panels: usize,
}

fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// ‖a − b‖_F / ‖b‖_F.
pub fn relative_error(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(f64::MIN_POSITIVE)
}

fn check_hermitian(k: &Array2<C64>) -> Result<f64> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::Shape(format!("K must be square, got {:?}", k.dim())));
    }
    let scale = k.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    for i in 0..n {
        for j in 0..=i {
            if (k[[i, j]] - k[[j, i]].conj()).norm() > HERMITIAN_TOLERANCE * scale.max(1.0) {
                return Err(Error::Precondition(format!("K is not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(scale)
}

enum Workspace<'a> {
    Tri { red: HermitianTridiagonal, rhs: Vec<C64>, q: usize },
    Dense { k: &'a Array2<C64>, a2: &'a Array2<C64> },
}

impl Workspace<'_> {
    fn rows(&self) -> usize {
        match self {
            Workspace::Tri { red, .. } => red.dim(),
            Workspace::Dense { k, .. } => k.nrows(),
        }
    }

    fn cols(&self) -> usize {
        match self {
            Workspace::Tri { q, .. } => *q,
            Workspace::Dense { a2, .. } => a2.ncols(),
        }
    }

    /// ω X(w) − ω̄ X(w̄) with X(z) = (K − z)⁻¹ A₂ in the working basis.
    fn pair(&self, w: C64, omega: C64) -> Result<Array2<C64>> {
        match self {
            Workspace::Tri { red, rhs, q } => {
                let n = red.dim();
                let mut buf = rhs.clone();
                tridiag_shifted_solve(&red.diag, &red.off, w, &mut buf, 2 * q)?;
                let x = Array2::from_shape_vec((n, 2 * q).f(), buf).expect("solve buffer shape");
                let upper = x.slice(ndarray::s![.., ..*q]);
                let mirrored = x.slice(ndarray::s![.., *q..]);
                Ok(upper.mapv(|v| omega * v) - mirrored.mapv(|v| omega.conj() * v.conj()))
            }
            Workspace::Dense { k, a2 } => {
                let n = k.nrows();
                let shifted = |z: C64| {
                    let mut m = (*k).clone();
                    for i in 0..n {
                        m[[i, i]] -= z;
                    }
                    m
                };
                let xw = dense_solve(&shifted(w), a2)?;
                let xb = dense_solve(&shifted(w.conj()), a2)?;
                Ok(xw.mapv(|v| omega * v) - xb.mapv(|v| omega.conj() * v))
            }
        }
    }
}

/// Upper-half contour edges as maps t ∈ [0, 1] ↦ (z, dz/dt).
fn edges(c: &ContourSpec) -> [Box<dyn Fn(f64) -> (C64, C64) + Sync>; 3] {
    let (e, l, s) = (c.energy, c.left, c.half_height);
    [
        Box::new(move |t| (C64::new(e, s * t), C64::new(0.0, s))),
        Box::new(move |t| (C64::new(e + (l - e) * t, s), C64::new(l - e, 0.0))),
        Box::new(move |t| (C64::new(l, s * (1.0 - t)), C64::new(0.0, -s))),
    ]
}

fn gauss_rule(order: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order.try_into().expect("positive order"));
    gl.as_node_weight_pairs().iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

fn panel_integral(
    ws: &Workspace,
    edge: &(dyn Fn(f64) -> (C64, C64) + Sync),
    rule: &[(f64, f64)],
    a: f64,
    b: f64,
) -> Result<Array2<C64>> {
    let h = b - a;
    let parts: Vec<Array2<C64>> = rule
        .par_iter()
        .map(|&(x, wt)| {
            let (z, dz) = edge(a + h * x);
            ws.pair(z, dz * (wt * h))
        })
        .collect::<Result<_>>()?;
    let mut acc = Array2::<C64>::zeros((ws.rows(), ws.cols()));
    for p in parts {
        acc += &p;
    }
    Ok(acc)
}

fn integrate(ws: &Workspace, contour: &ContourSpec) -> Result<(Array2<C64>, usize, usize)> {
    let edges = edges(contour);
    let mut total = Array2::<C64>::zeros((ws.rows(), ws.cols()));
    match contour.quadrature {
        ContourQuadrature::Fixed { nodes_per_edge } => {
            let rule = gauss_rule(nodes_per_edge);
            for edge in &edges {
                total += &panel_integral(ws, edge.as_ref(), &rule, 0.0, 1.0)?;
            }
            Ok((total, 6 * nodes_per_edge, 3))
        }
        ContourQuadrature::Adaptive { tolerance, max_solves } => {
            let cap = max_solves.min(MAX_SOLVES);
            let rule = gauss_rule(ADAPTIVE_ORDER);
            let per_panel = 2 * ADAPTIVE_ORDER;
            let mut solves = 0;
            let mut panels = 0;
            let mut spend = |count: usize| -> Result<()> {
                solves += count;
                if solves > cap {
                    Err(Error::Budget(format!("adaptive contour quadrature exceeded {cap} resolvent solves")))
                } else {
                    Ok(())
                }
            };
            // Each stack entry carries its own Gauss estimate.
            let mut stack: Vec<(usize, f64, f64, Array2<C64>)> = Vec::new();
            let mut scale = 0.0;
            for (k, edge) in edges.iter().enumerate() {
                spend(per_panel)?;
                let est = panel_integral(ws, edge.as_ref(), &rule, 0.0, 1.0)?;
                scale += frobenius(&est);
                stack.push((k, 0.0, 1.0, est));
            }
            stack.reverse();
            let scale = scale.max(f64::MIN_POSITIVE);
            while let Some((k, a, b, coarse)) = stack.pop() {
                let mid = 0.5 * (a + b);
                spend(2 * per_panel)?;
                let left = panel_integral(ws, edges[k].as_ref(), &rule, a, mid)?;
                let right = panel_integral(ws, edges[k].as_ref(), &rule, mid, b)?;
                let fine = &left + &right;
                if frobenius(&(&fine - &coarse)) <= tolerance * scale * (b - a) || b - a < 1e-12 {
                    total += &fine;
                    panels += 2;
                } else {
                    stack.push((k, mid, b, right));
                    stack.push((k, a, mid, left));
                }
            }
            Ok((total, solves, panels))
        }
    }
}

/// −(2πi)⁻¹ ∮ A₁ (K − z)⁻¹ A₂ dz over the rectangle `contour`.
pub fn riesz_sandwich(
    k: &Array2<C64>,
    a1: &Array2<C64>,
    a2: &Array2<C64>,
    contour: &ContourSpec,
    solver: ResolventSolver,
) -> Result<RieszResult> {
    let scale = check_hermitian(k)?;
    let n = k.nrows();
    if a1.ncols() != n || a2.nrows() != n {
        return Err(Error::Shape(format!("A1 {:?}, K {:?}, A2 {:?}", a1.dim(), k.dim(), a2.dim())));
    }
    let red = HermitianTridiagonal::new(k)?;
    let tol = TIE_FRACTION * scale.max(f64::MIN_POSITIVE);
    let e = contour.energy;
    if sturm_count(&red.diag, &red.off, e - tol) != sturm_count(&red.diag, &red.off, e + tol) {
        return Err(Error::EnergyTie { energy: e, tolerance: tol });
    }
    if n > 0 && contour.left >= smallest_eigenvalue(&red) {
        return Err(Error::Precondition("contour left edge must lie below the spectrum of K".into()));
    }
    let ws = match solver {
        ResolventSolver::Tridiagonal => {
            let y = red.q.t().mapv(|v| v.conj()).dot(a2);
            let q = y.ncols();
            let mut rhs: Vec<C64> = y.t().iter().copied().collect();
            rhs.extend(y.t().iter().map(|v| v.conj()));
            Workspace::Tri { red, rhs, q }
        }
        ResolventSolver::Dense => Workspace::Dense { k, a2 },
    };
    let (sum, solves, panels) = integrate(&ws, contour)?;
    let factor = C64::new(0.0, 1.0 / (2.0 * PI));
    let body = match &ws {
        Workspace::Tri { red, .. } => red.q.dot(&sum),
        Workspace::Dense { .. } => sum,
    };
    Ok(RieszResult { matrix: a1.dot(&body).mapv(|v| v * factor), solves, panels })
}

// LAPACK reads a row-major buffer as the transpose, which for Hermitian input conjugates
// the eigenvectors; a column-major copy sidesteps that.
fn hermitian_eigh(k: &Array2<C64>) -> Result<(ndarray::Array1<f64>, Array2<C64>)> {
    let mut kf = Array2::<C64>::zeros(k.dim().f());
    kf.assign(k);
    Ok(kf.eigh(UPLO::Lower)?)
}

/// A₁ Σ_{λ<E} v vᴴ A₂ from a full eigendecomposition.
pub fn spectral_sandwich(k: &Array2<C64>, a1: &Array2<C64>, a2: &Array2<C64>, energy: f64) -> Result<Array2<C64>> {
    check_hermitian(k)?;
    let (vals, vecs) = hermitian_eigh(k)?;
    let occupied: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < energy).collect();
    let v = vecs.select(ndarray::Axis(1), &occupied);
    let p = v.dot(&v.t().mapv(|x| x.conj()));
    Ok(a1.dot(&p).dot(a2))
}

#[derive(Debug, Clone, Serialize)]
pub struct LapReport {
    pub sup: f64,
    pub argmax_eta: f64,
    pub values: Vec<(f64, f64)>,
}

/// sup over η of ‖B (K − E − iη)⁻¹ Π B‖₂, where Π drops eigenvalues within `window` of E.
pub fn lap_constant(k: &Array2<C64>, b: &WeightOperator, energy: f64, eta_grid: &[f64], window: f64) -> Result<LapReport> {
    check_hermitian(k)?;
    let n = k.nrows();
    if b.weights.len() != n {
        return Err(Error::Shape(format!("weights of length {} for K of size {n}", b.weights.len())));
    }
    if eta_grid.is_empty() || eta_grid.iter().any(|&e| e == 0.0 || !e.is_finite()) {
        return Err(Error::Domain("eta grid must be nonempty, finite and exclude 0".into()));
    }
    let (vals, vecs) = hermitian_eigh(k)?;
    let bv = Array2::from_shape_fn((n, n), |(i, j)| vecs[[i, j]] * b.weights[i]);
    let bvh = bv.t().mapv(|x| x.conj());
    let mut values = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let z = C64::new(energy, eta);
        let mut scaled = bv.clone();
        for (j, &l) in vals.iter().enumerate() {
            let f = if (l - energy).abs() <= window { C64::new(0.0, 0.0) } else { 1.0 / (C64::new(l, 0.0) - z) };
            scaled.column_mut(j).mapv_inplace(|x| x * f);
        }
        let m = scaled.dot(&bvh);
        let (_, s, _) = m.svd(false, false)?;
        values.push((eta, s.iter().copied().fold(0.0, f64::max)));
    }
    let (argmax_eta, sup) = values.iter().copied().fold((f64::NAN, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
    Ok(LapReport { sup, argmax_eta, values })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub nodes_per_edge: usize,
    pub solves: usize,
    pub relative_error: f64,
}

/// Fixed-rule error against the spectral oracle for each node count.
pub fn convergence_study(
    k: &Array2<C64>,
    a1: &Array2<C64>,
    a2: &Array2<C64>,
    energy: f64,
    half_height: f64,
    node_counts: &[usize],
) -> Result<Vec<ConvergenceRow>> {
    if node_counts.len() < 3 {
        return Err(Error::TooFewSamples { got: node_counts.len(), need: 3, what: "node counts" });
    }
    let oracle = spectral_sandwich(k, a1, a2, energy)?;
    node_counts
        .iter()
        .map(|&n| {
            let c = ContourSpec::for_matrix(k, energy, half_height, ContourQuadrature::Fixed { nodes_per_edge: n })?;
            let r = riesz_sandwich(k, a1, a2, &c, ResolventSolver::Tridiagonal)?;
            Ok(ConvergenceRow { nodes_per_edge: n, solves: r.solves, relative_error: relative_error(&r.matrix, &oracle) })
        })
        .collect()
}

/// Dirichlet Laplacian of an n-site chain with unit spacing: 2 on the diagonal, −1 off it.
pub fn chain_laplacian(n: usize) -> Array2<C64> {
    Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(2.0, 0.0)
        } else if i.abs_diff(j) == 1 {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Centered site coordinates j − (n−1)/2 of an n-site chain.
pub fn chain_coordinates(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 - (n as f64 - 1.0) / 2.0).collect()
}

/// Random Hermitian matrix with entries uniform in the unit square, and the midpoint of its
/// widest spectral gap as a Fermi energy.
pub fn random_gapped_hermitian(rng: &mut impl rand::Rng, n: usize) -> Result<(Array2<C64>, f64)> {
    let mut m = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = C64::new(rng.random_range(-1.0..=1.0), 0.0);
        for j in 0..i {
            let v = C64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
            m[[i, j]] = v;
            m[[j, i]] = v.conj();
        }
    }
    let (vals, _) = m.eigh(UPLO::Lower)?;
    let (mut best, mut gap) = (0, f64::NEG_INFINITY);
    for i in 0..n.saturating_sub(1) {
        if vals[i + 1] - vals[i] > gap {
            gap = vals[i + 1] - vals[i];
            best = i;
        }
    }
    Ok((m, 0.5 * (vals[best] + vals[best + 1])))
}
