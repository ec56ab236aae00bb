//! Nyström discretization of the restricted free Fermi projection
//! 1_{Λ_L} 1_{<E}(−Δ) 1_{Λ_L} and its entropy.

use gauss_quad::legendre::GaussLegendre;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::entropy_functions::{g_raw, h_raw, sandwich_upper, LogBase};
use crate::error::{Error, Result};
use crate::free_kernel::{check_dim, fermi_kernel_radial, EnergyParams};
use crate::linalg::sym_eigvalsh;

/// Gauss–Legendre order of each quadrature panel.
pub const PANEL_ORDER: usize = 16;
/// Minimum quadrature nodes per Fermi wavelength 2π/√E.
pub const MIN_NODES_PER_WAVELENGTH: f64 = 4.0;
pub const MAX_NODES: usize = 20_000;
pub const DEFAULT_SPECTRUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseShape {
    /// [−1, 1], d = 1.
    Interval,
    /// [−1, 1]^d.
    Box,
    /// Unit disc, d = 2.
    Disc,
}

impl BaseShape {
    pub fn name(self) -> &'static str {
        match self {
            BaseShape::Interval => "interval",
            BaseShape::Box => "box",
            BaseShape::Disc => "disc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainSpec {
    pub dimension: usize,
    pub shape: BaseShape,
    pub scale: f64,
}

impl DomainSpec {
    pub fn new(dimension: usize, shape: BaseShape, scale: f64) -> Result<Self> {
        check_dim(dimension)?;
        match (shape, dimension) {
            (BaseShape::Interval, 1) | (BaseShape::Disc, 2) | (BaseShape::Box, _) => {}
            _ => return Err(Error::Domain(format!("shape {} is not defined in d={dimension}", shape.name()))),
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Domain(format!("scale L must be positive, got {scale}")));
        }
        Ok(Self { dimension, shape, scale })
    }

    /// Surface measure |∂Λ| of the unscaled base shape.
    pub fn base_surface(&self) -> f64 {
        let d = self.dimension as i32;
        match self.shape {
            BaseShape::Interval => 2.0,
            BaseShape::Box => 2.0 * d as f64 * 2f64.powi(d - 1),
            BaseShape::Disc => 2.0 * PI,
        }
    }

    /// Volume |Λ_L|.
    pub fn volume(&self) -> f64 {
        let l = self.scale;
        match self.shape {
            BaseShape::Interval => 2.0 * l,
            BaseShape::Box => (2.0 * l).powi(self.dimension as i32),
            BaseShape::Disc => PI * l * l,
        }
    }

    /// Whether x lies in the closed set Λ_L, with slack `eps` in length units.
    pub fn contains(&self, x: &[f64], eps: f64) -> bool {
        let l = self.scale + eps;
        match self.shape {
            BaseShape::Interval | BaseShape::Box => x.iter().all(|c| c.abs() <= l),
            BaseShape::Disc => x.iter().map(|c| c * c).sum::<f64>() <= l * l,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    /// n × d node coordinates.
    pub nodes: Array2<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn panel_rule(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(PANEL_ORDER.try_into().expect("nonzero order"));
    let rule = gl.as_node_weight_pairs();
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * PANEL_ORDER);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for &(x, w) in rule.iter() {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

/// Tensor Gauss–Legendre panels on intervals and boxes, polar Gauss rule on discs.
/// Panels are sized so that the node density is at least `resolution` per unit length.
pub fn build_grid(domain: &DomainSpec, resolution: f64) -> Result<QuadratureGrid> {
    let l = domain.scale;
    let d = domain.dimension;
    let count_panels = |len: f64| ((len * resolution / PANEL_ORDER as f64).ceil() as usize).max(1);
    let (coords, weights): (Vec<Vec<f64>>, Vec<f64>) = match domain.shape {
        BaseShape::Interval | BaseShape::Box => {
            let axis = panel_rule(-l, l, count_panels(2.0 * l));
            let total = axis.len().pow(d as u32);
            if total > MAX_NODES {
                return Err(Error::TooLarge(format!("{total} quadrature nodes exceed the limit {MAX_NODES}")));
            }
            let mut pts = Vec::with_capacity(total);
            let mut ws = Vec::with_capacity(total);
            for flat in 0..total {
                let mut rem = flat;
                let mut p = Vec::with_capacity(d);
                let mut w = 1.0;
                for _ in 0..d {
                    let (x, wx) = axis[rem % axis.len()];
                    rem /= axis.len();
                    p.push(x);
                    w *= wx;
                }
                pts.push(p);
                ws.push(w);
            }
            (pts, ws)
        }
        BaseShape::Disc => {
            let radial = panel_rule(0.0, l, count_panels(l));
            let n_theta = ((2.0 * PI * l * resolution).ceil() as usize).max(PANEL_ORDER);
            let total = radial.len() * n_theta;
            if total > MAX_NODES {
                return Err(Error::TooLarge(format!("{total} quadrature nodes exceed the limit {MAX_NODES}")));
            }
            let dtheta = 2.0 * PI / n_theta as f64;
            let mut pts = Vec::with_capacity(total);
            let mut ws = Vec::with_capacity(total);
            for &(r, wr) in &radial {
                for j in 0..n_theta {
                    let t = (j as f64 + 0.5) * dtheta;
                    pts.push(vec![r * t.cos(), r * t.sin()]);
                    ws.push(wr * r * dtheta);
                }
            }
            (pts, ws)
        }
    };
    let n = weights.len();
    let nodes = Array2::from_shape_fn((n, d), |(i, k)| coords[i][k]);
    Ok(QuadratureGrid { nodes, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    FreeContinuum,
    Lattice,
}

#[derive(Debug, Clone)]
pub struct KernelOperator {
    pub matrix: Array2<f64>,
    pub grid: Option<QuadratureGrid>,
    pub provenance: Provenance,
}

impl KernelOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// max |M − Mᵀ| / max |M|.
    pub fn asymmetry(&self) -> f64 {
        let m = &self.matrix;
        let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[[i, j]] - m[[j, i]]).abs());
            }
        }
        worst / scale
    }
}

/// M_ij = √(w_i w_j) K(x_i, x_j; E) on the quadrature grid of Λ_L.
pub fn assemble_free_restriction(domain: &DomainSpec, e: EnergyParams, resolution: f64) -> Result<KernelOperator> {
    let per_wavelength = resolution * e.fermi_wavelength();
    if !(per_wavelength >= MIN_NODES_PER_WAVELENGTH) {
        return Err(Error::Sampling { nodes_per_wavelength: per_wavelength, required: MIN_NODES_PER_WAVELENGTH });
    }
    let grid = build_grid(domain, resolution)?;
    let n = grid.len();
    let d = domain.dimension;
    let sw: Vec<f64> = grid.weights.iter().map(|w| w.sqrt()).collect();
    let nodes = &grid.nodes;
    let mut buf = vec![0.0; n * n];
    buf.par_chunks_mut(n.max(1)).enumerate().try_for_each(|(i, row)| -> Result<()> {
        for j in 0..n {
            let r2: f64 = (0..d).map(|k| (nodes[[i, k]] - nodes[[j, k]]).powi(2)).sum();
            row[j] = sw[i] * sw[j] * fermi_kernel_radial(r2.sqrt(), e, d)?;
        }
        Ok(())
    })?;
    let matrix = Array2::from_shape_vec((n, n), buf).expect("square buffer");
    Ok(KernelOperator { matrix, grid: Some(grid), provenance: Provenance::FreeContinuum })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Nonincreasing, clamped into [0, 1].
    pub eigenvalues: Vec<f64>,
    pub clipped_count: usize,
    /// Largest distance of a raw eigenvalue outside [0, 1].
    pub max_excursion: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(raw: &[f64], tolerance: f64) -> Result<Self> {
        let mut eigenvalues = Vec::with_capacity(raw.len());
        let mut clipped_count = 0;
        let mut max_excursion = 0.0f64;
        for &v in raw {
            if !v.is_finite() {
                return Err(Error::SpectrumExcursion { value: v, tolerance });
            }
            let excursion = (-v).max(v - 1.0).max(0.0);
            if excursion > tolerance {
                return Err(Error::SpectrumExcursion { value: v, tolerance });
            }
            if excursion > 0.0 {
                clipped_count += 1;
            }
            max_excursion = max_excursion.max(excursion);
            eigenvalues.push(v.clamp(0.0, 1.0));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { eigenvalues, clipped_count, max_excursion })
    }
}

/// Full eigendecomposition, validated into [−tolerance, 1 + tolerance] and clamped.
pub fn spectrum01(op: &KernelOperator, tolerance: f64) -> Result<SpectrumReport> {
    let asym = op.asymmetry();
    if asym > 1e-12 {
        return Err(Error::Precondition(format!("operator not symmetric (relative asymmetry {asym:e})")));
    }
    SpectrumReport::from_eigenvalues(&sym_eigvalsh(&op.matrix)?, tolerance)
}

/// S = Σ h(λ_n), reported in the requested logarithm base.
pub fn entanglement_entropy(spec: &SpectrumReport, base: LogBase) -> f64 {
    spec.eigenvalues.iter().map(|&l| h_raw(l)).sum::<f64>() * base.from_bits_factor()
}

/// Σ g(λ_n), the squared Hilbert–Schmidt norm of the off-region block.
pub fn purity_defect(spec: &SpectrumReport) -> f64 {
    spec.eigenvalues.iter().map(|&l| g_raw(l)).sum()
}

/// Σ −3 g(λ_n) log₂ g(λ_n), the upper envelope of the entropy in bits.
pub fn entropy_upper_envelope(spec: &SpectrumReport) -> f64 {
    spec.eigenvalues.iter().map(|&l| sandwich_upper(l)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct FreeRunRecord {
    pub dimension: usize,
    pub shape: BaseShape,
    pub scale: f64,
    pub fermi_energy: f64,
    pub resolution: f64,
    pub n_nodes: usize,
    pub entropy_bits: f64,
    pub entropy_nats: f64,
    pub purity_defect: f64,
    pub clipped_count: usize,
    pub max_excursion: f64,
}

/// Assemble, diagonalize and evaluate one (Λ_L, E) point.
pub fn run_free(domain: &DomainSpec, e: EnergyParams, resolution: f64, tolerance: f64) -> Result<FreeRunRecord> {
    let op = assemble_free_restriction(domain, e, resolution)?;
    let spec = spectrum01(&op, tolerance)?;
    Ok(FreeRunRecord {
        dimension: domain.dimension,
        shape: domain.shape,
        scale: domain.scale,
        fermi_energy: e.fermi_energy,
        resolution,
        n_nodes: op.dim(),
        entropy_bits: entanglement_entropy(&spec, LogBase::Bits),
        entropy_nats: entanglement_entropy(&spec, LogBase::Nats),
        purity_defect: purity_defect(&spec),
        clipped_count: spec.clipped_count,
        max_excursion: spec.max_excursion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn e1() -> EnergyParams {
        EnergyParams::new(1.0).unwrap()
    }

    #[test]
    fn grid_weights_sum_to_volume() {
        for (d, shape, l) in [
            (1, BaseShape::Interval, 7.3),
            (2, BaseShape::Box, 3.0),
            (3, BaseShape::Box, 1.5),
            (2, BaseShape::Disc, 4.0),
        ] {
            let dom = DomainSpec::new(d, shape, l).unwrap();
            let grid = build_grid(&dom, 2.0).unwrap();
            let total: f64 = grid.weights.iter().sum();
            assert!((total - dom.volume()).abs() <= 1e-8 * dom.volume(), "{shape:?}");
            assert!(grid.weights.iter().all(|&w| w > 0.0));
            for i in 0..grid.len() {
                let p: Vec<f64> = grid.nodes.row(i).to_vec();
                assert!(dom.contains(&p, 1e-12));
            }
        }
    }

    #[test]
    fn shape_dimension_pairs() {
        assert!(DomainSpec::new(2, BaseShape::Interval, 1.0).is_err());
        assert!(DomainSpec::new(3, BaseShape::Disc, 1.0).is_err());
        assert!(DomainSpec::new(1, BaseShape::Interval, 0.0).is_err());
        assert!(DomainSpec::new(4, BaseShape::Box, 1.0).is_err());
    }

    #[test]
    fn trace_matches_weyl_integral() {
        let dom = DomainSpec::new(1, BaseShape::Interval, 20.0).unwrap();
        let op = assemble_free_restriction(&dom, e1(), 2.0).unwrap();
        let tr: f64 = op.matrix.diag().sum();
        let weyl = 2.0 * 20.0 / PI;
        assert!((tr - weyl).abs() < 1e-3 * weyl);
        let tiny = DomainSpec::new(1, BaseShape::Interval, 1e-6).unwrap();
        let op = assemble_free_restriction(&tiny, e1(), 2.0).unwrap();
        assert!(op.matrix.diag().sum() < 1e-5);
    }

    #[test]
    fn undersampling_is_refused() {
        let dom = DomainSpec::new(1, BaseShape::Interval, 10.0).unwrap();
        let e = EnergyParams::new(100.0).unwrap();
        assert!(matches!(assemble_free_restriction(&dom, e, 1.5), Err(Error::Sampling { .. })));
    }

    #[test]
    fn node_limit() {
        let dom = DomainSpec::new(2, BaseShape::Box, 200.0).unwrap();
        assert!(matches!(build_grid(&dom, 1.0), Err(Error::TooLarge(_))));
    }

    #[test]
    fn spectrum_examples() {
        let op = KernelOperator { matrix: array![[0.3]], grid: None, provenance: Provenance::Lattice };
        assert_eq!(spectrum01(&op, 1e-6).unwrap().eigenvalues, vec![0.3]);
        let op = KernelOperator { matrix: array![[1.5, 0.0], [0.0, 0.2]], grid: None, provenance: Provenance::Lattice };
        assert!(matches!(spectrum01(&op, 1e-6), Err(Error::SpectrumExcursion { .. })));
        let rep = SpectrumReport::from_eigenvalues(&[1.0 + 1e-9, -1e-9, 0.4], 1e-6).unwrap();
        assert_eq!(rep.clipped_count, 2);
        assert_eq!(rep.eigenvalues, vec![1.0, 0.4, 0.0]);
        let half = SpectrumReport::from_eigenvalues(&[0.5], 1e-6).unwrap();
        assert_eq!(entanglement_entropy(&half, LogBase::Bits), 1.0);
        let two = SpectrumReport::from_eigenvalues(&[0.5, 0.5], 1e-6).unwrap();
        assert_eq!(purity_defect(&two), 0.5);
        let pure = SpectrumReport::from_eigenvalues(&[1.0, 0.0, 1.0], 1e-6).unwrap();
        assert_eq!(entanglement_entropy(&pure, LogBase::Nats), 0.0);
        assert_eq!(purity_defect(&pure), 0.0);
    }

    #[test]
    fn free_restriction_is_contained_and_converged() {
        let dom = DomainSpec::new(1, BaseShape::Interval, 50.0).unwrap();
        let op = assemble_free_restriction(&dom, e1(), 1.5).unwrap();
        assert!(op.asymmetry() <= 1e-12);
        let raw = sym_eigvalsh(&op.matrix).unwrap();
        assert!(raw.iter().all(|&v| v >= -1e-6 && v <= 1.0 + 1e-6));
        let spec = spectrum01(&op, 1e-6).unwrap();
        let s = entanglement_entropy(&spec, LogBase::Nats);
        let fine = run_free(&dom, e1(), 3.0, 1e-6).unwrap();
        assert!((fine.entropy_nats - s).abs() < 0.01 * s);
        let p = purity_defect(&spec);
        let bits = entanglement_entropy(&spec, LogBase::Bits);
        assert!(p <= bits && bits <= entropy_upper_envelope(&spec));
    }

    #[test]
    fn entropy_increases_with_scale() {
        let s: Vec<f64> = [10.0, 20.0, 40.0]
            .iter()
            .map(|&l| {
                let dom = DomainSpec::new(1, BaseShape::Interval, l).unwrap();
                run_free(&dom, e1(), 1.5, 1e-6).unwrap().entropy_nats
            })
            .collect();
        assert!(s[0] < s[1] && s[1] < s[2]);
    }

    #[test]
    fn disc_runs_at_small_scale() {
        let dom = DomainSpec::new(2, BaseShape::Disc, 3.0).unwrap();
        let rec = run_free(&dom, e1(), 1.5, 1e-6).unwrap();
        assert!(rec.entropy_bits > 0.0 && rec.max_excursion <= 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operator_level_sandwich(vals in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let spec = SpectrumReport::from_eigenvalues(&vals, 1e-6).unwrap();
            let p = purity_defect(&spec);
            let s = entanglement_entropy(&spec, LogBase::Bits);
            prop_assert!(p <= s + 1e-12);
            prop_assert!(s <= entropy_upper_envelope(&spec) + 1e-12);
            prop_assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
