//! Free Fermi-projection kernel 1_{<E}(−Δ)(x, y) and free Green's function
//! (−Δ − z)⁻¹(x, y) in d ∈ {1, 2, 3}, plus the exponential-decay fit.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special::{bessel_j1, hankel1_0};

const DIMS: &str = "1, 2, 3";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyParams {
    pub fermi_energy: f64,
}

impl EnergyParams {
    pub fn new(fermi_energy: f64) -> Result<Self> {
        if fermi_energy > 0.0 && fermi_energy.is_finite() {
            Ok(Self { fermi_energy })
        } else {
            Err(Error::Domain(format!("Fermi energy must be positive and finite, got {fermi_energy}")))
        }
    }

    pub fn fermi_momentum(self) -> f64 {
        self.fermi_energy.sqrt()
    }

    pub fn fermi_wavelength(self) -> f64 {
        2.0 * PI / self.fermi_momentum()
    }
}

/// Nonreal spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEnergy {
    z: C64,
}

impl ComplexEnergy {
    pub fn new(z: C64) -> Result<Self> {
        if z.im == 0.0 || !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Domain(format!("resolvent parameter must be nonreal, got {z}")));
        }
        Ok(Self { z })
    }

    pub fn value(self) -> C64 {
        self.z
    }

    /// Square root with Im √z > 0.
    pub fn sqrt(self) -> C64 {
        let k = self.z.sqrt();
        if k.im < 0.0 {
            -k
        } else {
            k
        }
    }
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(d, DIMS))
    }
}

fn distance(x: &[f64], y: &[f64], d: usize) -> Result<f64> {
    if x.len() != d || y.len() != d {
        return Err(Error::Shape(format!("points must have {d} coordinates, got {} and {}", x.len(), y.len())));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Weyl density ω_d E^{d/2} / (2π)^d, the diagonal of the free Fermi kernel.
pub fn weyl_density(e: EnergyParams, d: usize) -> Result<f64> {
    check_dim(d)?;
    let k = e.fermi_momentum();
    Ok(match d {
        1 => k / PI,
        2 => k * k / (4.0 * PI),
        _ => k * k * k / (6.0 * PI * PI),
    })
}

/// Free Fermi kernel as a function of the separation r = |x − y| ≥ 0.
pub fn fermi_kernel_radial(r: f64, e: EnergyParams, d: usize) -> Result<f64> {
    check_dim(d)?;
    let k = e.fermi_momentum();
    let x = k * r;
    let x2 = x * x;
    Ok(match d {
        1 => {
            if x < 1e-3 {
                k / PI * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0))
            } else {
                x.sin() / (PI * r)
            }
        }
        2 => {
            if x < 1e-3 {
                k * k / (4.0 * PI) * (1.0 - x2 / 8.0 * (1.0 - x2 / 24.0))
            } else {
                k * bessel_j1(x) / (2.0 * PI * r)
            }
        }
        _ => {
            let shape = if x < 0.05 {
                1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0 - x2 * x2 * x2 / 45360.0
            } else {
                (x.sin() - x * x.cos()) / (x2 * x)
            };
            k * k * k / (2.0 * PI * PI) * shape
        }
    })
}

/// Integral kernel of 1_{<E}(−Δ) on R^d.
pub fn fermi_kernel_free(x: &[f64], y: &[f64], e: EnergyParams, d: usize) -> Result<f64> {
    check_dim(d)?;
    fermi_kernel_radial(distance(x, y, d)?, e, d)
}

/// Free Green's function as a function of the separation r.
pub fn green_radial(r: f64, z: ComplexEnergy, d: usize) -> Result<C64> {
    check_dim(d)?;
    if d >= 2 && r == 0.0 {
        return Err(Error::Singularity(d));
    }
    let k = z.sqrt();
    let i = C64::new(0.0, 1.0);
    Ok(match d {
        1 => i * (i * k * r).exp() / (2.0 * k),
        2 => i * 0.25 * hankel1_0(k * r)?,
        _ => (i * k * r).exp() / (4.0 * PI * r),
    })
}

/// Integral kernel of (−Δ − z)⁻¹ on R^d.
pub fn green_free(x: &[f64], y: &[f64], z: ComplexEnergy, d: usize) -> Result<C64> {
    check_dim(d)?;
    green_radial(distance(x, y, d)?, z, d)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFitReport {
    pub fitted_rate: f64,
    pub predicted_rate: f64,
    pub relative_rate_error: f64,
    pub sample_range: (f64, f64),
}

/// Fits log|G₀| + ((d−1)/2) log r ≈ c − rate·r and compares the rate to |Im √z|.
pub fn verify_green_decay(z: C64, d: usize, separations: &[f64]) -> Result<DecayFitReport> {
    let z = ComplexEnergy::new(z)?;
    check_dim(d)?;
    if separations.len() < 10 {
        return Err(Error::TooFewSamples { got: separations.len(), need: 10, what: "decay separations" });
    }
    let lo = separations.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = separations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi < 10.0 * lo {
        return Err(Error::Precondition(format!("separations must be positive and span a decade, got [{lo}, {hi}]")));
    }
    let half = (d as f64 - 1.0) / 2.0;
    let mut ys = Vec::with_capacity(separations.len());
    for &r in separations {
        ys.push(green_radial(r, z, d)?.norm().ln() + half * r.ln());
    }
    let n = separations.len() as f64;
    let mx = separations.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = separations.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = separations.iter().map(|x| (x - mx) * (x - mx)).sum();
    let fitted_rate = -sxy / sxx;
    let predicted_rate = z.sqrt().im.abs();
    Ok(DecayFitReport {
        fitted_rate,
        predicted_rate,
        relative_rate_error: (fitted_rate - predicted_rate).abs() / predicted_rate,
        sample_range: (lo, hi),
    })
}

/// (|Im √z| computed directly, (E²+η²)^{1/4} sin(½ arctan(|η|/E))) for z = E + iη, E > 0.
pub fn imag_sqrt_identity(e: f64, eta: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) || eta == 0.0 {
        return Err(Error::Domain(format!("identity needs E > 0 and eta != 0, got E={e}, eta={eta}")));
    }
    let direct = ComplexEnergy::new(C64::new(e, eta))?.sqrt().im.abs();
    let formula = (e * e + eta * eta).powf(0.25) * (0.5 * (eta.abs() / e).atan()).sin();
    Ok((direct, formula))
}

/// `count` separations geometrically spaced on [lo, hi].
pub fn geometric_separations(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (ratio * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gauss_quad::legendre::GaussLegendre;
    use proptest::prelude::*;

    fn gl(n: usize) -> Vec<(f64, f64)> {
        let gl = GaussLegendre::new(n.try_into().unwrap());
        gl.as_node_weight_pairs().iter().copied().collect()
    }

    /// Composite Gauss–Legendre on [a, b].
    fn integrate(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> C64) -> C64 {
        let rule = gl(20);
        let h = (b - a) / panels as f64;
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for &(x, w) in &rule {
                acc += f(mid + 0.5 * h * x) * (0.5 * h * w);
            }
        }
        acc
    }

    /// Kernel by direct Fourier quadrature over the Fermi ball.
    fn kernel_by_fourier(r: f64, e: f64, d: usize) -> f64 {
        let k = e.sqrt();
        let val = match d {
            1 => integrate(0.0, k, 40, |p| C64::new((p * r).cos(), 0.0)) / PI,
            2 => integrate(0.0, k, 40, |p| C64::new(puruspe::bessel::Jn(0, p * r) * p, 0.0)) / (2.0 * PI),
            _ => {
                if r == 0.0 {
                    integrate(0.0, k, 40, |p| C64::new(p * p, 0.0)) / (2.0 * PI * PI)
                } else {
                    integrate(0.0, k, 40, |p| C64::new(p * (p * r).sin(), 0.0)) / (2.0 * PI * PI * r)
                }
            }
        };
        val.re
    }

    #[test]
    fn kernel_matches_fourier_quadrature() {
        for d in 1..=3 {
            for &e in &[0.5, 1.0, 3.0] {
                for &r in &[0.0, 1e-4, 0.03, 0.7, 2.0, 9.5] {
                    let got = fermi_kernel_radial(r, EnergyParams::new(e).unwrap(), d).unwrap();
                    let want = kernel_by_fourier(r, e, d);
                    assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "d={d} e={e} r={r}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let e1 = EnergyParams::new(1.0).unwrap();
        let diag = fermi_kernel_free(&[0.3], &[0.3], e1, 1).unwrap();
        assert!((diag - 1.0 / PI).abs() < 1e-14);
        assert!(fermi_kernel_free(&[0.0], &[PI], e1, 1).unwrap().abs() < 1e-16);
        for d in 1..=3 {
            let w = weyl_density(e1, d).unwrap();
            assert!((fermi_kernel_radial(0.0, e1, d).unwrap() - w).abs() < 1e-15);
        }
        assert!(fermi_kernel_free(&[0.0; 4], &[0.0; 4], e1, 4).is_err());
        assert!(EnergyParams::new(0.0).is_err());
    }

    #[test]
    fn green_frozen_values() {
        let i = ComplexEnergy::new(C64::new(0.0, 1.0)).unwrap();
        let g3 = green_free(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], i, 3).unwrap();
        assert!((g3 - C64::new(0.0298298387119070391, 0.0254899083644884305)).norm() < 1e-15);
        let g1 = green_free(&[0.2], &[0.2], i, 1).unwrap();
        assert!((g1 - C64::new(0.353553390593273762, 0.353553390593273762)).norm() < 1e-15);
        assert!(green_free(&[0.0, 0.0], &[0.0, 0.0], i, 2).is_err());
        assert!(ComplexEnergy::new(C64::new(2.0, 0.0)).is_err());
    }

    /// ∫ G₀(x, 0; z) (−Δ − z)φ(x) dx for φ = exp(−|x|²/2), where −Δφ = (d − |x|²)φ.
    /// The resolvent identity makes this φ(0) = 1.
    fn resolvent_on_gaussian(z: C64, d: usize) -> C64 {
        let ze = ComplexEnergy::new(z).unwrap();
        let measure = |r: f64| match d {
            1 => 2.0,
            2 => 2.0 * PI * r,
            _ => 4.0 * PI * r * r,
        };
        // r = u² resolves the logarithmic behaviour of the d = 2 kernel at the origin.
        integrate(0.0, 4.0, 64, |u| {
            let r = u * u;
            if r == 0.0 {
                return C64::new(0.0, 0.0);
            }
            let g = green_radial(r, ze, d).unwrap();
            g * (d as f64 - r * r - z) * (-0.5 * r * r).exp() * measure(r) * 2.0 * u
        })
    }

    #[test]
    fn resolvent_identity_on_gaussian() {
        for d in 1..=3 {
            for z in [C64::new(0.0, 1.0), C64::new(1.0, 1.0), C64::new(4.0, 0.5), C64::new(-2.0, -0.3)] {
                let got = resolvent_on_gaussian(z, d);
                assert!((got - 1.0).norm() < 1e-9, "d={d} z={z}: {got}");
            }
        }
    }

    #[test]
    fn decay_examples() {
        let seps = geometric_separations(1.0, 20.0, 16);
        for (z, d) in [(C64::new(1.0, 1.0), 1), (C64::new(0.0, 1.0), 3), (C64::new(4.0, 0.5), 2)] {
            let rep = verify_green_decay(z, d, &seps).unwrap();
            assert!(rep.relative_rate_error < 0.05, "z={z} d={d}: {rep:?}");
        }
        assert!(verify_green_decay(C64::new(1.0, 0.0), 1, &seps).is_err());
        assert!(verify_green_decay(C64::new(1.0, 1.0), 1, &seps[..5]).is_err());
        let narrow = geometric_separations(1.0, 5.0, 12);
        assert!(verify_green_decay(C64::new(1.0, 1.0), 1, &narrow).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric(d in 1usize..=3, e in 0.1f64..10.0,
                            a in proptest::collection::vec(-5.0f64..5.0, 3),
                            b in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let ep = EnergyParams::new(e).unwrap();
            let xy = fermi_kernel_free(&a[..d], &b[..d], ep, d).unwrap();
            let yx = fermi_kernel_free(&b[..d], &a[..d], ep, d).unwrap();
            prop_assert_eq!(xy, yx);
        }

        #[test]
        fn green_conjugation(re in -5.0f64..5.0, im in 0.01f64..5.0, r in 0.05f64..10.0, d in 1usize..=3) {
            let z = ComplexEnergy::new(C64::new(re, im)).unwrap();
            let zb = ComplexEnergy::new(C64::new(re, -im)).unwrap();
            let g = green_radial(r, z, d).unwrap();
            let gb = green_radial(r, zb, d).unwrap();
            prop_assert!((g.conj() - gb).norm() <= 1e-12 * g.norm());
        }

        #[test]
        fn imag_sqrt_identity_ten_digits(e in 0.01f64..10.0, t in -1.0f64..1.0) {
            let eta = t * e.min(1.0);
            prop_assume!(eta != 0.0);
            let (direct, formula) = imag_sqrt_identity(e, eta).unwrap();
            prop_assert!((direct - formula).abs() <= 1e-10 * direct.max(1e-300));
        }
    }
}
