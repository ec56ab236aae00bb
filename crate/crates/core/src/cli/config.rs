//! Run configuration: a TOML file with one section per concern. Every optional
//! field has an explicit default applied by [`RunConfig::resolved`].

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lattice_model::PotentialSpec;
use crate::restricted_projection::BaseShape;
use crate::riesz_projector::ResolventSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SweepFree,
    SweepPerturbed,
    Fit,
    VerifyInequalities,
    RieszCheck,
    GreenDecay,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SweepFree => "sweep-free",
            Mode::SweepPerturbed => "sweep-perturbed",
            Mode::Fit => "fit",
            Mode::VerifyInequalities => "verify-inequalities",
            Mode::RieszCheck => "riesz-check",
            Mode::GreenDecay => "green-decay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBaseChoice {
    /// Pick the base by fitting the lattice oracle in both bases against Σ₀.
    Auto,
    Bits,
    Nats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub dimension: Option<usize>,
    pub fermi_energy: Option<f64>,
    pub scales: Option<Vec<f64>>,
    pub shape: Option<BaseShape>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeSection {
    /// Quadrature nodes per unit length.
    pub resolution: Option<f64>,
    pub spectrum_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub spacing: Option<f64>,
    /// Box half-width W as a multiple of L.
    pub buffer_ratio: Option<f64>,
    pub align: Option<bool>,
    pub schatten_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    SquareWell { support_radius: f64, amplitude: f64 },
    /// Two whitespace-separated columns x, V(x); `#` starts a comment.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Lattice spacing of the infinite-chain oracle; unset disables it.
    pub spacing: Option<f64>,
    /// Maximal relative gap between continuum and oracle entropies.
    pub consistency_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub log_base: Option<LogBaseChoice>,
    /// results.csv of an earlier sweep; unset means the fit mode runs its own free sweep.
    pub input: Option<PathBuf>,
    pub sigma_tolerance: Option<f64>,
    pub residual_tolerance: Option<f64>,
    pub dyadic_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSection {
    pub cross_term_slope_max: Option<f64>,
    pub purity_slope_min: Option<f64>,
    /// Allowed excess of the Schatten log-log slope over 2d(1 − s).
    pub schatten_slope_margin: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitiesSection {
    pub scalar_points: Option<usize>,
    pub log_sum_axis: Option<usize>,
    pub power_s: Option<Vec<f64>>,
    pub matrix_pairs: Option<usize>,
    pub matrix_size: Option<usize>,
    pub matrix_s: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszSection {
    pub solver: Option<ResolventSolver>,
    pub gapped_cases: Option<usize>,
    pub gapped_size: Option<usize>,
    pub gapped_tolerance: Option<f64>,
    pub chain_sites: Option<usize>,
    pub chain_tolerance: Option<f64>,
    pub quadrature_tolerance: Option<f64>,
    pub max_solves: Option<usize>,
    pub half_heights: Option<Vec<f64>>,
    pub height_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    /// (Re z, Im z) pairs.
    pub energies: Option<Vec<[f64; 2]>>,
    pub dimensions: Option<Vec<usize>>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub separations: Option<usize>,
    pub rate_tolerance: Option<f64>,
    pub identity_energies: Option<Vec<f64>>,
    pub identity_etas: Option<Vec<f64>>,
    pub identity_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub physics: PhysicsSection,
    #[serde(default)]
    pub free: FreeSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    pub potential: Option<PotentialConfig>,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub checks: ChecksSection,
    #[serde(default)]
    pub inequalities: InequalitiesSection,
    #[serde(default)]
    pub riesz: RieszSection,
    #[serde(default)]
    pub green: GreenSection,
}

fn fill<T: Clone>(slot: &mut Option<T>, value: T) {
    if slot.is_none() {
        *slot = Some(value);
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative paths inside the file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(PotentialConfig::File { path: p }) = &mut cfg.potential {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut cfg.fit.input {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The mode from the command line, which must agree with the file's mode if both are present.
    pub fn effective_mode(&self, cli: Option<Mode>) -> Result<Mode> {
        match (cli, self.mode) {
            (Some(a), Some(b)) if a != b => {
                Err(Error::config("mode", format!("command line says {} but the file says {}", a.name(), b.name())))
            }
            (Some(m), _) | (None, Some(m)) => Ok(m),
            (None, None) => Err(Error::config("mode", "no mode given")),
        }
    }

    /// Copy with every defaulted field made explicit. Required fields stay unset.
    pub fn resolved(&self, mode: Mode) -> Self {
        let mut c = self.clone();
        c.mode = Some(mode);
        fill(&mut c.seed, 1);
        let p = &mut c.physics;
        fill(&mut p.dimension, 1);
        fill(&mut p.scales, vec![25.0, 50.0, 100.0, 200.0, 400.0]);
        let d = p.dimension.unwrap_or(1);
        fill(&mut p.shape, if d == 1 { BaseShape::Interval } else { BaseShape::Box });
        fill(&mut c.free.resolution, 2.0);
        fill(&mut c.free.spectrum_tolerance, crate::restricted_projection::DEFAULT_SPECTRUM_TOLERANCE);
        let l = &mut c.lattice;
        fill(&mut l.spacing, 0.25);
        fill(&mut l.buffer_ratio, crate::lattice_model::MIN_BUFFER_RATIO);
        fill(&mut l.align, true);
        fill(&mut l.schatten_s, vec![0.75]);
        if mode == Mode::Fit {
            fill(&mut c.oracle.spacing, 0.1);
        }
        let f = &mut c.fit;
        fill(&mut f.log_base, if mode == Mode::Fit { LogBaseChoice::Auto } else { LogBaseChoice::Nats });
        fill(&mut f.sigma_tolerance, 0.15);
        fill(&mut f.residual_tolerance, 0.02);
        fill(&mut f.dyadic_tolerance, 0.10);
        let k = &mut c.checks;
        fill(&mut k.cross_term_slope_max, 0.02);
        fill(&mut k.purity_slope_min, 0.05);
        fill(&mut k.schatten_slope_margin, 0.1);
        let q = &mut c.inequalities;
        fill(&mut q.scalar_points, 100_000);
        fill(&mut q.log_sum_axis, 400);
        fill(&mut q.power_s, vec![0.25, 0.5, 0.75, 0.9]);
        fill(&mut q.matrix_pairs, 500);
        fill(&mut q.matrix_size, 20);
        fill(&mut q.matrix_s, vec![0.6, 0.75, 0.9]);
        let r = &mut c.riesz;
        fill(&mut r.solver, ResolventSolver::Tridiagonal);
        fill(&mut r.gapped_cases, 10);
        fill(&mut r.gapped_size, 8);
        fill(&mut r.gapped_tolerance, 1e-8);
        fill(&mut r.chain_sites, 400);
        fill(&mut r.chain_tolerance, 1e-4);
        fill(&mut r.quadrature_tolerance, 1e-8);
        fill(&mut r.max_solves, 10_000);
        fill(&mut r.half_heights, vec![0.5, 1.0]);
        fill(&mut r.height_tolerance, 1e-8);
        let g = &mut c.green;
        fill(&mut g.energies, vec![[1.0, 1.0], [0.0, 1.0], [4.0, 0.5]]);
        fill(&mut g.dimensions, vec![1, 3]);
        fill(&mut g.r_min, 2.0);
        fill(&mut g.r_max, 40.0);
        fill(&mut g.separations, 24);
        fill(&mut g.rate_tolerance, 0.05);
        fill(&mut g.identity_energies, vec![0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0]);
        fill(&mut g.identity_etas, vec![-10.0, -1.0, -1e-3, 1e-6, 1e-3, 0.1, 1.0, 10.0]);
        fill(&mut g.identity_tolerance, 1e-10);
        c
    }
}

fn require<T: Clone>(value: &Option<T>, field: &str, mode: Mode) -> Result<T> {
    value.clone().ok_or_else(|| Error::config(field, format!("required in mode {}", mode.name())))
}

fn positive(value: f64, field: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must be positive and finite, got {value}")))
    }
}

/// Fields shared by the sweep and fit modes, validated.
#[derive(Debug, Clone)]
pub struct SweepSettings {
    pub dimension: usize,
    pub shape: BaseShape,
    pub fermi_energy: f64,
    pub scales: Vec<f64>,
}

impl RunConfig {
    /// Validates a resolved config for `mode`; errors name the offending field.
    pub fn sweep_settings(&self, mode: Mode) -> Result<SweepSettings> {
        let fermi_energy = positive(require(&self.physics.fermi_energy, "fermi_energy", mode)?, "fermi_energy")?;
        let dimension = require(&self.physics.dimension, "dimension", mode)?;
        if !(1..=3).contains(&dimension) {
            return Err(Error::config("dimension", format!("must be 1, 2 or 3, got {dimension}")));
        }
        let shape = require(&self.physics.shape, "shape", mode)?;
        let scales = require(&self.physics.scales, "scales", mode)?;
        if scales.is_empty() {
            return Err(Error::config("scales", "must not be empty"));
        }
        for &l in &scales {
            positive(l, "scales")?;
        }
        if scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("scales", "must be strictly increasing"));
        }
        crate::restricted_projection::DomainSpec::new(dimension, shape, 1.0)
            .map_err(|e| Error::config("shape", e.to_string()))?;
        Ok(SweepSettings { dimension, shape, fermi_energy, scales })
    }

    pub fn potential_spec(&self, mode: Mode) -> Result<PotentialSpec> {
        let cfg = require(&self.potential, "potential", mode)?;
        let spec = match cfg {
            PotentialConfig::SquareWell { support_radius, amplitude } => PotentialSpec::square_well(support_radius, amplitude),
            PotentialConfig::File { path } => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::config("potential.path", format!("{}: {e}", path.display())))?;
                PotentialSpec::tabulated(parse_potential_table(&text)?)
            }
        };
        spec.map_err(|e| Error::config("potential", e.to_string()))
    }

    pub fn require_positive(&self, value: Option<f64>, field: &str, mode: Mode) -> Result<f64> {
        positive(require(&value, field, mode)?, field)
    }
}

pub fn parse_potential_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split_whitespace().collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|_| Error::config("potential.path", format!("line {}: bad number {s:?}", i + 1)));
        if cols.len() != 2 {
            return Err(Error::config("potential.path", format!("line {}: expected two columns", i + 1)));
        }
        points.push((parse(cols[0])?, parse(cols[1])?));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_energy_is_named() {
        let cfg = RunConfig::from_toml("[physics]\nscales = [1.0, 2.0]\n").unwrap().resolved(Mode::SweepFree);
        let err = cfg.sweep_settings(Mode::SweepFree).unwrap_err().to_string();
        assert!(err.contains("fermi_energy"), "{err}");
    }

    #[test]
    fn validation_names_fields() {
        let bad = |text: &str, field: &str| {
            let cfg = RunConfig::from_toml(text).unwrap().resolved(Mode::SweepFree);
            let err = cfg.sweep_settings(Mode::SweepFree).unwrap_err().to_string();
            assert!(err.contains(field), "{err}");
        };
        bad("[physics]\nfermi_energy = 1.0\nscales = [2.0, 1.0]\n", "scales");
        bad("[physics]\nfermi_energy = -1.0\n", "fermi_energy");
        bad("[physics]\nfermi_energy = 1.0\ndimension = 4\n", "dimension");
        bad("[physics]\nfermi_energy = 1.0\ndimension = 1\nshape = \"disc\"\n", "shape");
        assert!(RunConfig::from_toml("[physics]\nfermi_energie = 1.0\n").is_err());
        let cfg = RunConfig::from_toml("").unwrap().resolved(Mode::SweepPerturbed);
        assert!(cfg.potential_spec(Mode::SweepPerturbed).unwrap_err().to_string().contains("potential"));
    }

    #[test]
    fn defaults_roundtrip() {
        let cfg = RunConfig::from_toml("[physics]\nfermi_energy = 1.0\n").unwrap().resolved(Mode::Fit);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(again.fit.log_base, Some(LogBaseChoice::Auto));
    }

    #[test]
    fn mode_agreement() {
        let cfg = RunConfig::from_toml("mode = \"fit\"\n").unwrap();
        assert_eq!(cfg.effective_mode(None).unwrap(), Mode::Fit);
        assert!(cfg.effective_mode(Some(Mode::GreenDecay)).is_err());
        assert!(RunConfig::default().effective_mode(None).is_err());
    }

    #[test]
    fn potential_table() {
        let pts = parse_potential_table("# x V\n-1 0.5\n0 1 # peak\n\n1 0.5\n").unwrap();
        assert_eq!(pts, vec![(-1.0, 0.5), (0.0, 1.0), (1.0, 0.5)]);
        assert!(parse_potential_table("1 2 3\n").is_err());
        assert!(parse_potential_table("1 x\n").is_err());
    }
}
