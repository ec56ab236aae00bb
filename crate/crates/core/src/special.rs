//! Special functions for the free kernels: J₁ and Γ come from `puruspe`;
//! complex-argument K₀ and H₀⁽¹⁾ are evaluated here.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub fn bessel_j1(x: f64) -> f64 {
    puruspe::bessel::Jn(1, x)
}

pub fn gamma(x: f64) -> f64 {
    puruspe::gamma(x)
}

/// Modified Bessel K₀(ζ) for Re ζ ≥ 0, ζ ≠ 0.
///
/// Rotating the Laplace-type representation K₀(ζ) = e^{−ζ}∫₀^∞ e^{−ζu}(u(u+2))^{−1/2} du
/// onto the ray where ζu is real and substituting u = s² e^{−iφ}, s = sinh t gives a
/// Gaussian-damped integrand analytic in a strip around the real t axis, so the
/// trapezoid rule converges geometrically.
pub fn bessel_k0(zeta: C64) -> Result<C64> {
    let r = zeta.norm();
    if !(r > 0.0) || zeta.re < -1e-14 * r || !r.is_finite() {
        return Err(Error::Domain(format!("K0 needs Re ζ >= 0 and ζ != 0, got {zeta}")));
    }
    let phi = zeta.arg();
    let rot = C64::from_polar(1.0, -phi);
    let h = (0.25 / r.sqrt()).min(0.05);
    let t_max = (45.0 / r).sqrt().asinh();
    let steps = (t_max / h).ceil() as usize;
    let integrand = |t: f64| {
        let s = t.sinh();
        let s2 = s * s;
        (-r * s2).exp() * t.cosh() / (rot * s2 + 2.0).sqrt()
    };
    let mut sum = integrand(0.0) * 0.5;
    for j in 1..=steps {
        sum += integrand(j as f64 * h);
    }
    Ok((-zeta).exp() * 2.0 * C64::from_polar(1.0, -0.5 * phi) * sum * h)
}

/// Outgoing Hankel function H₀⁽¹⁾(w) for Im w ≥ 0, w ≠ 0, via H₀⁽¹⁾(w) = (2/(πi)) K₀(−iw).
pub fn hankel1_0(w: C64) -> Result<C64> {
    if w.im < 0.0 {
        return Err(Error::Domain(format!("H0(1) evaluated only on the closed upper half-plane, got {w}")));
    }
    let zeta = C64::new(w.im, -w.re);
    Ok(bessel_k0(zeta)? * C64::new(0.0, -2.0 / PI))
}
