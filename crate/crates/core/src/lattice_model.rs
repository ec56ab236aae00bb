//! Finite-difference model of H = −Δ + V on a Dirichlet box, Fermi projections,
//! restricted entropies and the cross-term norms of the perturbed projection.
//!
//! Projections are stored as an orthonormal occupied frame U (sites × occupied),
//! P = UUᵀ; every restricted quantity is computed in whichever of the site or
//! frame spaces is smaller.

use ndarray::{concatenate, s, Array2, Axis};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::entropy_functions::LogBase;
use crate::error::{Error, Result};
use crate::free_kernel::{check_dim, EnergyParams};
use crate::linalg::{sturm_count, sym_eig_range, sym_eigvalsh, tridiag_eig_range};
use crate::restricted_projection::{
    entanglement_entropy, purity_defect, BaseShape, DomainSpec, KernelOperator, Provenance, SpectrumReport,
};

/// Absolute gap below which E counts as an eigenvalue of the finite matrix.
pub const TIE_TOLERANCE: f64 = 1e-8;
/// Containment tolerance for spectra of principal submatrices of a projection.
pub const RESTRICTED_TOLERANCE: f64 = 1e-10;
pub const MIN_BUFFER_RATIO: f64 = 2.0;
/// Largest a√E for which the lattice dispersion tracks k² on occupied modes.
pub const MAX_DISPERSION_PARAMETER: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialProfile {
    /// Constant `amplitude` on [−R_V, R_V]^d.
    SquareWell { amplitude: f64 },
    /// Piecewise-linear samples (x, V(x)) in d = 1, zero outside the sampled range.
    Tabulated { points: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub support_radius: f64,
    pub profile: PotentialProfile,
}

impl PotentialSpec {
    pub fn square_well(support_radius: f64, amplitude: f64) -> Result<Self> {
        let spec = Self { support_radius, profile: PotentialProfile::SquareWell { amplitude } };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(mut points: Vec<(f64, f64)>) -> Result<Self> {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let support_radius = points.iter().fold(0.0f64, |r, p| r.max(p.0.abs()));
        let spec = Self { support_radius, profile: PotentialProfile::Tabulated { points } };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.support_radius > 0.0 && self.support_radius.is_finite()) {
            return Err(Error::Domain(format!("support radius must be positive, got {}", self.support_radius)));
        }
        match &self.profile {
            PotentialProfile::SquareWell { amplitude } if !amplitude.is_finite() => {
                Err(Error::Domain("square-well amplitude must be finite".into()))
            }
            PotentialProfile::Tabulated { points } => {
                if points.len() < 2 || points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    Err(Error::Domain("tabulated potential needs at least two finite samples".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.profile {
            PotentialProfile::SquareWell { amplitude } => amplitude.abs(),
            PotentialProfile::Tabulated { points } => points.iter().fold(0.0f64, |m, p| m.max(p.1.abs())),
        }
    }

    /// V(x); zero outside [−R_V, R_V]^d.
    pub fn value(&self, x: &[f64]) -> f64 {
        if x.iter().any(|c| c.abs() > self.support_radius) {
            return 0.0;
        }
        match &self.profile {
            PotentialProfile::SquareWell { amplitude } => *amplitude,
            PotentialProfile::Tabulated { points } => {
                let t = x[0];
                let first = points[0];
                let last = points[points.len() - 1];
                if t < first.0 || t > last.0 {
                    return 0.0;
                }
                let k = points.partition_point(|p| p.0 <= t).clamp(1, points.len() - 1);
                let (x0, v0) = points[k - 1];
                let (x1, v1) = points[k];
                if x1 == x0 {
                    v1
                } else {
                    v0 + (v1 - v0) * (t - x0) / (x1 - x0)
                }
            }
        }
    }

    pub fn descriptor(&self) -> String {
        match &self.profile {
            PotentialProfile::SquareWell { amplitude } => {
                format!("square-well(R_V={},amplitude={})", self.support_radius, amplitude)
            }
            PotentialProfile::Tabulated { points } => {
                format!("tabulated(R_V={},samples={})", self.support_radius, points.len())
            }
        }
    }
}

/// Cubic grid of N^d interior sites of the Dirichlet box [−W, W]^d, W = (N+1)a/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeBox {
    pub dimension: usize,
    pub sites_per_axis: usize,
    pub spacing: f64,
}

impl LatticeBox {
    /// Box of half-width ≈ `half_width`: N = round(2W/a) − 1 interior sites per axis.
    pub fn new(dimension: usize, half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(half_width > spacing) {
            return Err(Error::Domain(format!("need W > a > 0, got W={half_width}, a={spacing}")));
        }
        let n = (2.0 * half_width / spacing).round() as usize - 1;
        Self::with_sites(dimension, n, spacing)
    }

    pub fn with_sites(dimension: usize, sites_per_axis: usize, spacing: f64) -> Result<Self> {
        check_dim(dimension)?;
        if dimension == 3 {
            return Err(Error::UnsupportedDimension(3, "1, 2 on the lattice"));
        }
        if sites_per_axis == 0 || !(spacing > 0.0) {
            return Err(Error::Domain("lattice needs at least one site and positive spacing".into()));
        }
        Ok(Self { dimension, sites_per_axis, spacing })
    }

    pub fn half_width(&self) -> f64 {
        (self.sites_per_axis as f64 + 1.0) * self.spacing / 2.0
    }

    pub fn n_sites(&self) -> usize {
        self.sites_per_axis.pow(self.dimension as u32)
    }

    /// Axis coordinate of site index j, centered on the origin.
    pub fn axis_coordinate(&self, j: usize) -> f64 {
        (j as f64 - (self.sites_per_axis as f64 - 1.0) / 2.0) * self.spacing
    }

    /// Coordinates of the flat site index (axis 0 varies fastest).
    pub fn coordinates(&self, flat: usize) -> Vec<f64> {
        let n = self.sites_per_axis;
        let mut rem = flat;
        (0..self.dimension)
            .map(|_| {
                let j = rem % n;
                rem /= n;
                self.axis_coordinate(j)
            })
            .collect()
    }

    /// a√E ≤ 1/4.
    pub fn check_dispersion(&self, e: EnergyParams) -> Result<()> {
        let p = self.spacing * e.fermi_momentum();
        if p > MAX_DISPERSION_PARAMETER {
            return Err(Error::Precondition(format!(
                "lattice spacing under-resolves the Fermi wavelength: a*sqrt(E) = {p:.4} > {MAX_DISPERSION_PARAMETER}"
            )));
        }
        Ok(())
    }
}

/// (2d+1)-point finite-difference Hamiltonian −Δ_a + V with Dirichlet boundary.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub lattice: LatticeBox,
    /// 2d/a² + V(x_j).
    pub diagonal: Vec<f64>,
    /// −1/a² between nearest neighbours.
    pub hopping: f64,
    pub descriptor: String,
}

impl Hamiltonian {
    /// Off-diagonal of the tridiagonal matrix in d = 1.
    pub fn off_diagonal(&self) -> Vec<f64> {
        vec![self.hopping; self.diagonal.len().saturating_sub(1)]
    }

    pub fn dense(&self) -> Array2<f64> {
        let lat = &self.lattice;
        let n = lat.sites_per_axis;
        let total = lat.n_sites();
        let mut m = Array2::zeros((total, total));
        for i in 0..total {
            m[[i, i]] = self.diagonal[i];
            let mut stride = 1;
            let mut rem = i;
            for _ in 0..lat.dimension {
                if rem % n + 1 < n {
                    m[[i, i + stride]] = self.hopping;
                    m[[i + stride, i]] = self.hopping;
                }
                rem /= n;
                stride *= n;
            }
        }
        m
    }

    pub fn to_kernel_operator(&self) -> KernelOperator {
        KernelOperator { matrix: self.dense(), grid: None, provenance: Provenance::Lattice }
    }

    /// Eigenvalues of H in (lower, upper], ascending.
    pub fn eigenvalues_in(&self, lower: f64, upper: f64) -> Result<Vec<f64>> {
        if self.lattice.dimension == 1 {
            Ok(tridiag_eig_range(&self.diagonal, &self.off_diagonal(), lower, upper, false)?.0)
        } else {
            Ok(sym_eigvalsh(&self.dense())?.into_iter().filter(|&v| v > lower && v <= upper).collect())
        }
    }

    /// Spectral enclosure from Gershgorin discs.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let reach = 2.0 * self.lattice.dimension as f64 * self.hopping.abs();
        let lo = self.diagonal.iter().fold(f64::INFINITY, |a, &b| a.min(b)) - reach;
        let hi = self.diagonal.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) + reach;
        (lo, hi)
    }
}

pub fn build_hamiltonian(lattice: &LatticeBox, v: Option<&PotentialSpec>) -> Result<Hamiltonian> {
    let a = lattice.spacing;
    if let Some(v) = v {
        if v.support_radius >= lattice.half_width() {
            return Err(Error::Domain(format!(
                "potential support radius {} reaches the box half-width {}",
                v.support_radius,
                lattice.half_width()
            )));
        }
        if lattice.dimension > 1 && matches!(v.profile, PotentialProfile::Tabulated { .. }) {
            return Err(Error::UnsupportedDimension(lattice.dimension, "1 for tabulated potentials"));
        }
    }
    let base = 2.0 * lattice.dimension as f64 / (a * a);
    let diagonal = (0..lattice.n_sites())
        .map(|i| base + v.map_or(0.0, |v| v.value(&lattice.coordinates(i))))
        .collect();
    Ok(Hamiltonian {
        lattice: *lattice,
        diagonal,
        hopping: -1.0 / (a * a),
        descriptor: v.map_or_else(|| "free".to_string(), PotentialSpec::descriptor),
    })
}

/// 1_{<E}(H) as an orthonormal occupied frame.
#[derive(Debug, Clone)]
pub struct ProjectionMatrix {
    /// sites × occupied, orthonormal columns.
    pub frame: Array2<f64>,
    pub energy: f64,
    pub lattice: LatticeBox,
    pub descriptor: String,
}

impl ProjectionMatrix {
    pub fn rank(&self) -> usize {
        self.frame.ncols()
    }

    pub fn dense(&self) -> Array2<f64> {
        self.frame.dot(&self.frame.t())
    }

    /// ‖P² − P‖₂ = max |eig(UᵀU) − 1|·‖UᵀU‖ computed through the frame Gram matrix.
    pub fn idempotency_defect(&self) -> Result<f64> {
        let gram = self.frame.t().dot(&self.frame);
        let ev = sym_eigvalsh(&gram)?;
        Ok(ev.iter().fold(0.0f64, |m, &l| m.max((l * l - l).abs())))
    }

    fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.frame.select(Axis(0), idx)
    }
}

fn tie_error(energy: f64) -> Error {
    Error::EnergyTie { energy, tolerance: TIE_TOLERANCE }
}

pub fn fermi_projection(h: &Hamiltonian, e: EnergyParams) -> Result<ProjectionMatrix> {
    let energy = e.fermi_energy;
    let (lo, hi) = h.spectral_bounds();
    let lower = lo - 1.0;
    let frame = if h.lattice.dimension == 1 {
        let off = h.off_diagonal();
        if sturm_count(&h.diagonal, &off, energy - TIE_TOLERANCE) != sturm_count(&h.diagonal, &off, energy + TIE_TOLERANCE)
        {
            return Err(tie_error(energy));
        }
        if energy <= lo {
            Array2::zeros((h.diagonal.len(), 0))
        } else {
            tridiag_eig_range(&h.diagonal, &off, lower, energy.min(hi + 1.0), true)?.1.expect("vectors requested")
        }
    } else {
        let (vals, vecs) = sym_eig_range(&h.dense(), lower, energy + TIE_TOLERANCE)?;
        if vals.last().is_some_and(|&v| v >= energy - TIE_TOLERANCE) {
            return Err(tie_error(energy));
        }
        vecs
    };
    Ok(ProjectionMatrix { frame, energy, lattice: h.lattice, descriptor: h.descriptor.clone() })
}

/// Set of lattice sites Ω.
#[derive(Debug, Clone)]
pub struct Region {
    pub mask: Vec<bool>,
}

impl Region {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    /// Sites of Λ_L = L·Λ; requires the buffer W ≥ 2L.
    pub fn scaled(lattice: &LatticeBox, domain: &DomainSpec) -> Result<Self> {
        if domain.dimension != lattice.dimension {
            return Err(Error::Shape(format!("domain d={} on lattice d={}", domain.dimension, lattice.dimension)));
        }
        let ratio = lattice.half_width() / domain.scale;
        if ratio < MIN_BUFFER_RATIO {
            return Err(Error::Buffer(format!(
                "box half-width {} is only {ratio:.3} times L={}; need at least {MIN_BUFFER_RATIO}",
                lattice.half_width(),
                domain.scale
            )));
        }
        let eps = 1e-9 * lattice.spacing;
        let mask = (0..lattice.n_sites()).map(|i| domain.contains(&lattice.coordinates(i), eps)).collect();
        Ok(Self { mask })
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn check_region(p: &ProjectionMatrix, region: &Region) -> Result<()> {
    if region.mask.len() != p.frame.nrows() {
        return Err(Error::Shape(format!("region has {} sites, lattice has {}", region.mask.len(), p.frame.nrows())));
    }
    Ok(())
}

/// Nonzero spectrum of P[Ω, Ω], validated into [0, 1].
pub fn restricted_spectrum(p: &ProjectionMatrix, region: &Region) -> Result<SpectrumReport> {
    check_region(p, region)?;
    let ur = p.rows(&region.indices());
    let small = if ur.nrows() <= ur.ncols() { ur.dot(&ur.t()) } else { ur.t().dot(&ur) };
    SpectrumReport::from_eigenvalues(&sym_eigvalsh(&small)?, RESTRICTED_TOLERANCE)
}

pub fn restricted_entropy(p: &ProjectionMatrix, region: &Region, base: LogBase) -> Result<f64> {
    Ok(entanglement_entropy(&restricted_spectrum(p, region)?, base))
}

fn check_pair(p: &ProjectionMatrix, p0: &ProjectionMatrix) -> Result<()> {
    if p.lattice != p0.lattice {
        return Err(Error::Shape(format!("projections live on different lattices: {:?} vs {:?}", p.lattice, p0.lattice)));
    }
    if p.energy != p0.energy {
        return Err(Error::Shape(format!("projections at different energies {} and {}", p.energy, p0.energy)));
    }
    Ok(())
}

/// Eigenvalues of A_Lᵀ A_L (unclamped, so tiny negatives are rounding) for A_L = 1_{Ω^c}(P0 − P)1_Ω, i.e. the squared singular values.
///
/// With W = [U_Ω, U0_Ω], D = diag(−I, I) and O = U0ᵀU, the restricted blocks are
/// (P0 − P)_ΩΩ = W D Wᵀ and ((P0 − P)²)_ΩΩ = W M Wᵀ with M = [[I, −Oᵀ], [−O, I]], so
/// A_LᵀA_L = W (M − D WᵀW D) Wᵀ.
pub fn cross_term_gram_eigenvalues(p: &ProjectionMatrix, p0: &ProjectionMatrix, region: &Region) -> Result<Vec<f64>> {
    check_pair(p, p0)?;
    check_region(p, region)?;
    let idx = region.indices();
    let (m, m0) = (p.rank(), p0.rank());
    let w = concatenate(Axis(1), &[p.rows(&idx).view(), p0.rows(&idx).view()]).expect("same row count");
    let overlap = p0.frame.t().dot(&p.frame);
    let k = m + m0;
    let mut core = Array2::<f64>::eye(k);
    core.slice_mut(s![m.., ..m]).assign(&overlap.mapv(|x| -x));
    core.slice_mut(s![..m, m..]).assign(&overlap.t().mapv(|x| -x));
    let wtw = w.t().dot(&w);
    let sign = |i: usize| if i < m { -1.0 } else { 1.0 };
    let mut dsd = wtw.clone();
    for ((i, j), v) in dsd.indexed_iter_mut() {
        *v *= sign(i) * sign(j);
    }
    let mid = core - dsd;
    let ev = if idx.len() <= k {
        let g = w.dot(&mid).dot(&w.t());
        sym_eigvalsh(&g)?
    } else {
        // Nonzero spectrum of W M' Wᵀ equals that of S^{1/2} M' S^{1/2}, S = WᵀW.
        let (sv, q) = wtw.eigh(UPLO::Lower)?;
        let root = q.dot(&Array2::from_diag(&sv.mapv(|x| x.max(0.0).sqrt()))).dot(&q.t());
        sym_eigvalsh(&root.dot(&mid).dot(&root))?
    };
    Ok(ev)
}

/// √(tr A_LᵀA_L) from the signed eigenvalue sum, so rounding noise cancels.
fn hs_from_gram(ev: &[f64]) -> f64 {
    ev.iter().sum::<f64>().max(0.0).sqrt()
}

fn power_sum_from_gram(ev: &[f64], s: f64) -> f64 {
    ev.iter().map(|&x| x.max(0.0).powf(s)).sum()
}

/// ‖1_{Ω^c}(P0 − P)1_Ω‖₂.
pub fn cross_term_hs(p: &ProjectionMatrix, p0: &ProjectionMatrix, region: &Region) -> Result<f64> {
    Ok(hs_from_gram(&cross_term_gram_eigenvalues(p, p0, region)?))
}

/// Σ a_n^{2s} over the singular values of the off-region block of P − P0.
pub fn schatten_difference(p: &ProjectionMatrix, p0: &ProjectionMatrix, region: &Region, s: f64) -> Result<f64> {
    if !(s > 0.5 && s < 1.0) {
        return Err(Error::Domain(format!("Schatten exponent s={s} outside ]1/2, 1[")));
    }
    Ok(power_sum_from_gram(&cross_term_gram_eigenvalues(p, p0, region)?, s))
}

/// S ≥ ½‖off-block of P0‖₂² − ‖off-block of (P0 − P)‖₂², with S in bits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LowerBoundCheck {
    pub entropy_bits: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn lower_bound_mechanism(entropy_bits: f64, purity_defect0: f64, cross_hs: f64) -> LowerBoundCheck {
    let bound = 0.5 * purity_defect0 - cross_hs * cross_hs;
    LowerBoundCheck { entropy_bits, bound, holds: entropy_bits >= bound }
}

/// Free and perturbed projections on a common box, with the box size chosen so the
/// two Fermi seas are aligned (see [`align_box`]).
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub p: ProjectionMatrix,
    pub p0: ProjectionMatrix,
    /// ‖P − P0‖₂² over the whole box.
    pub mismatch: f64,
    /// Distance of E from the nearest level of H or H0, in units of the local level spacing.
    pub clearance: f64,
    pub candidates: usize,
}

fn whole_box_mismatch(p: &ProjectionMatrix, p0: &ProjectionMatrix) -> f64 {
    let o = p0.frame.t().dot(&p.frame);
    let fro2: f64 = o.iter().map(|x| x * x).sum();
    (p.rank() + p0.rank()) as f64 - 2.0 * fro2
}

fn level_clearance(h: &Hamiltonian, energy: f64, spacing: f64) -> Result<f64> {
    let window = 4.0 * spacing;
    let near = h.eigenvalues_in(energy - window, energy + window)?;
    Ok(near.iter().fold(window, |c, &l| c.min((l - energy).abs())) / spacing)
}

/// Finite boxes discretize the continuum near E, and which levels fall just below E
/// decides whether P and P0 fill matching Fermi seas. Among box sizes within one Fermi
/// wavelength above `base`, this picks the one minimizing ‖P − P0‖₂² on the whole box,
/// preferring the largest level clearance among near-minimal candidates. Candidates are
/// grouped by their Sturm occupation counts so that only one pair of frames per group is
/// computed. Only d = 1 is aligned; higher dimensions use `base` as is.
pub fn align_box(base: &LatticeBox, v: &PotentialSpec, e: EnergyParams) -> Result<ProjectionPair> {
    let energy = e.fermi_energy;
    let pair_for = |lat: &LatticeBox| -> Result<(ProjectionMatrix, ProjectionMatrix)> {
        let p = fermi_projection(&build_hamiltonian(lat, Some(v))?, e)?;
        let p0 = fermi_projection(&build_hamiltonian(lat, None)?, e)?;
        Ok((p, p0))
    };
    if base.dimension != 1 {
        let (p, p0) = pair_for(base)?;
        let mismatch = whole_box_mismatch(&p, &p0);
        return Ok(ProjectionPair { p, p0, mismatch, clearance: f64::NAN, candidates: 1 });
    }
    let a = base.spacing;
    let window = (e.fermi_wavelength() / a).ceil() as usize;
    let mut groups: BTreeMap<(usize, usize), (f64, LatticeBox)> = BTreeMap::new();
    for n in base.sites_per_axis..=base.sites_per_axis + window {
        let lat = LatticeBox::with_sites(1, n, a)?;
        let h = build_hamiltonian(&lat, Some(v))?;
        let h0 = build_hamiltonian(&lat, None)?;
        let off = h.off_diagonal();
        let key = (sturm_count(&h.diagonal, &off, energy), sturm_count(&h0.diagonal, &off, energy));
        let level_spacing = 2.0 * PI * e.fermi_momentum() / (n as f64 * a);
        let clearance = level_clearance(&h, energy, level_spacing)?.min(level_clearance(&h0, energy, level_spacing)?);
        if clearance * level_spacing <= 10.0 * TIE_TOLERANCE {
            continue;
        }
        let entry = groups.entry(key).or_insert((clearance, lat));
        if clearance > entry.0 {
            *entry = (clearance, lat);
        }
    }
    if groups.is_empty() {
        return Err(tie_error(energy));
    }
    let mut evaluated = Vec::with_capacity(groups.len());
    for (clearance, lat) in groups.into_values() {
        let (p, p0) = pair_for(&lat)?;
        let mismatch = whole_box_mismatch(&p, &p0);
        evaluated.push(ProjectionPair { p, p0, mismatch, clearance, candidates: 0 });
    }
    let best = evaluated.iter().map(|c| c.mismatch).fold(f64::INFINITY, f64::min);
    let count = evaluated.len();
    let mut chosen = evaluated
        .into_iter()
        .filter(|c| c.mismatch <= best + 0.05)
        .max_by(|x, y| {
            x.clearance
                .total_cmp(&y.clearance)
                .then(y.p.lattice.sites_per_axis.cmp(&x.p.lattice.sites_per_axis))
        })
        .expect("at least one candidate");
    chosen.candidates = count;
    Ok(chosen)
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbedRunRecord {
    pub scale: f64,
    pub spacing: f64,
    pub half_width: f64,
    pub n_sites: usize,
    pub region_sites: usize,
    pub occupied: usize,
    pub occupied_free: usize,
    pub entropy_bits: f64,
    pub entropy_nats: f64,
    pub entropy_free_bits: f64,
    pub entropy_free_nats: f64,
    pub purity_defect: f64,
    pub purity_defect_free: f64,
    pub cross_term_hs: f64,
    /// (s, Σ a_n^{2s}).
    pub schatten: Vec<(f64, f64)>,
    pub lower_bound: LowerBoundCheck,
    pub mismatch: f64,
    pub clearance: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbedRunParams {
    pub dimension: usize,
    pub shape: BaseShape,
    pub scale: f64,
    pub spacing: f64,
    pub buffer_ratio: f64,
    pub potential: PotentialSpec,
    pub schatten_s: Vec<f64>,
    pub align: bool,
}

/// One (L, V, E) point: entropies of P and P0 on Λ_L and the cross-term norms.
pub fn run_perturbed(params: &PerturbedRunParams, e: EnergyParams) -> Result<PerturbedRunRecord> {
    let domain = DomainSpec::new(params.dimension, params.shape, params.scale)?;
    let base = LatticeBox::new(params.dimension, params.buffer_ratio * params.scale, params.spacing)?;
    base.check_dispersion(e)?;
    let pair = if params.align {
        align_box(&base, &params.potential, e)?
    } else {
        let p = fermi_projection(&build_hamiltonian(&base, Some(&params.potential))?, e)?;
        let p0 = fermi_projection(&build_hamiltonian(&base, None)?, e)?;
        let mismatch = whole_box_mismatch(&p, &p0);
        ProjectionPair { p, p0, mismatch, clearance: f64::NAN, candidates: 1 }
    };
    let lattice = pair.p.lattice;
    let region = Region::scaled(&lattice, &domain)?;
    let spec = restricted_spectrum(&pair.p, &region)?;
    let spec0 = restricted_spectrum(&pair.p0, &region)?;
    let gram = cross_term_gram_eigenvalues(&pair.p, &pair.p0, &region)?;
    let hs = hs_from_gram(&gram);
    let mut schatten = Vec::with_capacity(params.schatten_s.len());
    for &s in &params.schatten_s {
        if !(s > 0.5 && s < 1.0) {
            return Err(Error::Domain(format!("Schatten exponent s={s} outside ]1/2, 1[")));
        }
        schatten.push((s, power_sum_from_gram(&gram, s)));
    }
    let entropy_bits = entanglement_entropy(&spec, LogBase::Bits);
    let purity0 = purity_defect(&spec0);
    Ok(PerturbedRunRecord {
        scale: params.scale,
        spacing: params.spacing,
        half_width: lattice.half_width(),
        n_sites: lattice.n_sites(),
        region_sites: region.len(),
        occupied: pair.p.rank(),
        occupied_free: pair.p0.rank(),
        entropy_bits,
        entropy_nats: entanglement_entropy(&spec, LogBase::Nats),
        entropy_free_bits: entanglement_entropy(&spec0, LogBase::Bits),
        entropy_free_nats: entanglement_entropy(&spec0, LogBase::Nats),
        purity_defect: purity_defect(&spec),
        purity_defect_free: purity0,
        cross_term_hs: hs,
        schatten,
        lower_bound: lower_bound_mechanism(entropy_bits, purity0, hs),
        mismatch: pair.mismatch,
        clearance: pair.clearance,
    })
}

/// Relative change of the free entropy on Λ_L when the box half-width is doubled.
pub fn boundary_effect(dimension: usize, scale: f64, spacing: f64, buffer_ratio: f64, e: EnergyParams) -> Result<f64> {
    let domain = DomainSpec::new(dimension, if dimension == 1 { BaseShape::Interval } else { BaseShape::Box }, scale)?;
    let s_at = |ratio: f64| -> Result<f64> {
        let lat = LatticeBox::new(dimension, ratio * scale, spacing)?;
        let p = fermi_projection(&build_hamiltonian(&lat, None)?, e)?;
        restricted_entropy(&p, &Region::scaled(&lat, &domain)?, LogBase::Nats)
    };
    let s1 = s_at(buffer_ratio)?;
    let s2 = s_at(2.0 * buffer_ratio)?;
    Ok((s2 - s1).abs() / s1)
}

/// Infinite-chain oracle: the lattice Fermi projection of the hopping-1/a² chain
/// restricted to n = round(2L/a) consecutive sites is the Toeplitz matrix
/// sin(θ(i−j))/(π(i−j)), θ = arccos(1 − E a²/2).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainOracleRecord {
    pub scale: f64,
    pub spacing: f64,
    pub n_sites: usize,
    pub entropy_bits: f64,
    pub entropy_nats: f64,
    pub purity_defect: f64,
}

pub fn chain_oracle(scale: f64, e: EnergyParams, spacing: f64) -> Result<ChainOracleRecord> {
    let arg = 1.0 - e.fermi_energy * spacing * spacing / 2.0;
    if !(spacing > 0.0) || arg <= -1.0 {
        return Err(Error::Domain(format!("E={} lies above the band of spacing {spacing}", e.fermi_energy)));
    }
    let theta = arg.acos();
    let n = (2.0 * scale / spacing).round() as usize;
    let c = Array2::from_shape_fn((n, n), |(i, j)| {
        let r = i as f64 - j as f64;
        if i == j {
            theta / PI
        } else {
            (theta * r).sin() / (PI * r)
        }
    });
    let spec = SpectrumReport::from_eigenvalues(&sym_eigvalsh(&c)?, RESTRICTED_TOLERANCE)?;
    Ok(ChainOracleRecord {
        scale,
        spacing,
        n_sites: n,
        entropy_bits: entanglement_entropy(&spec, LogBase::Bits),
        entropy_nats: entanglement_entropy(&spec, LogBase::Nats),
        purity_defect: purity_defect(&spec),
    })
}
