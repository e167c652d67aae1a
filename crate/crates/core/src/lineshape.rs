//! Peak profiles and the width model linking field noise to linewidth.
//!
//! Centres are detunings in GHz, widths are FWHM in MHz.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::starkmodel::{induced_dipole, StarkCoefficients};

/// `2√(2 ln 2)`, the Gaussian FWHM per standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineshapeError {
    #[error("profile width must be positive, got {0} MHz")]
    ZeroWidth(f64),
    #[error("invalid lineshape parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Lorentzian,
    Gaussian,
    PseudoVoigt,
}

impl std::str::FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lorentzian" => Ok(Shape::Lorentzian),
            "gaussian" => Ok(Shape::Gaussian),
            "pseudo_voigt" | "pseudo-voigt" => Ok(Shape::PseudoVoigt),
            other => Err(format!("unknown shape '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    /// GHz detuning.
    pub center: f64,
    /// Lorentzian FWHM, MHz.
    pub gamma_l: f64,
    /// Gaussian FWHM, MHz.
    pub gamma_g: f64,
    /// Lorentzian weight of the pseudo-Voigt mix.
    pub eta: f64,
    pub amplitude: f64,
    pub background: f64,
}

impl Default for LineshapeParams {
    fn default() -> Self {
        Self {
            center: 0.0,
            gamma_l: 49.0,
            gamma_g: 0.0,
            eta: 1.0,
            amplitude: 1.0,
            background: 0.0,
        }
    }
}

impl LineshapeParams {
    pub fn lorentzian(center: f64, gamma_l: f64, amplitude: f64, background: f64) -> Self {
        Self {
            center,
            gamma_l,
            gamma_g: 0.0,
            eta: 1.0,
            amplitude,
            background,
        }
    }

    pub fn gaussian(center: f64, gamma_g: f64, amplitude: f64, background: f64) -> Self {
        Self {
            center,
            gamma_l: 0.0,
            gamma_g,
            eta: 0.0,
            amplitude,
            background,
        }
    }

    pub fn validate(&self) -> Result<(), LineshapeError> {
        let ok = self.gamma_l >= 0.0
            && self.gamma_g >= 0.0
            && (0.0..=1.0).contains(&self.eta)
            && self.amplitude >= 0.0
            && self.background >= 0.0
            && self.center.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LineshapeError::Invalid(format!("{self:?}")))
        }
    }

    /// Shared FWHM of the pseudo-Voigt mix, MHz (Whiting combination).
    pub fn voigt_fwhm(&self) -> f64 {
        voigt_width_whiting(self.gamma_l, self.gamma_g)
    }

    /// FWHM of the given profile, MHz.
    pub fn fwhm(&self, shape: Shape) -> f64 {
        match shape {
            Shape::Lorentzian => self.gamma_l,
            Shape::Gaussian => self.gamma_g,
            Shape::PseudoVoigt => self.voigt_fwhm(),
        }
    }

    /// Gaussian standard deviation, MHz.
    pub fn sigma_g(&self) -> f64 {
        self.gamma_g / FWHM_PER_SIGMA
    }

    pub fn eval(&self, shape: Shape, x: f64) -> Result<f64, LineshapeError> {
        match shape {
            Shape::Lorentzian => lorentzian(x, self),
            Shape::Gaussian => gaussian(x, self),
            Shape::PseudoVoigt => pseudo_voigt(x, self),
        }
    }
}

/// Unit-height Lorentzian with FWHM `fwhm` (same units as `dx`).
#[inline]
pub fn unit_lorentzian(dx: f64, fwhm: f64) -> f64 {
    let u = 2.0 * dx / fwhm;
    1.0 / (1.0 + u * u)
}

/// Unit-height Gaussian with FWHM `fwhm`.
#[inline]
pub fn unit_gaussian(dx: f64, fwhm: f64) -> f64 {
    let u = dx / fwhm;
    (-4.0 * std::f64::consts::LN_2 * u * u).exp()
}

/// Unit-height pseudo-Voigt: `eta·L + (1 − eta)·G` at a shared FWHM.
#[inline]
pub fn unit_pseudo_voigt(dx: f64, fwhm: f64, eta: f64) -> f64 {
    eta * unit_lorentzian(dx, fwhm) + (1.0 - eta) * unit_gaussian(dx, fwhm)
}

fn width_ghz(mhz: f64) -> Result<f64, LineshapeError> {
    if mhz > 0.0 && mhz.is_finite() {
        Ok(mhz * 1e-3)
    } else {
        Err(LineshapeError::ZeroWidth(mhz))
    }
}

pub fn lorentzian(x: f64, p: &LineshapeParams) -> Result<f64, LineshapeError> {
    let w = width_ghz(p.gamma_l)?;
    Ok(p.background + p.amplitude * unit_lorentzian(x - p.center, w))
}

pub fn gaussian(x: f64, p: &LineshapeParams) -> Result<f64, LineshapeError> {
    let w = width_ghz(p.gamma_g)?;
    Ok(p.background + p.amplitude * unit_gaussian(x - p.center, w))
}

/// Pseudo-Voigt at the Whiting width of `(gamma_l, gamma_g)` with Lorentzian
/// weight `eta`. With `gamma_g = 0` and `eta = 1` this is [`lorentzian`];
/// with `gamma_l = 0` and `eta = 0` it is [`gaussian`].
pub fn pseudo_voigt(x: f64, p: &LineshapeParams) -> Result<f64, LineshapeError> {
    let w = width_ghz(p.voigt_fwhm())?;
    Ok(p.background + p.amplitude * unit_pseudo_voigt(x - p.center, w, p.eta))
}

/// Approximate FWHM of a Voigt profile from its Lorentzian and Gaussian
/// constituents (Whiting): `Γ_L/2 + √((Γ_L/2)² + Γ_G²)`.
pub fn voigt_width_whiting(gamma_l: f64, gamma_g: f64) -> f64 {
    let half = 0.5 * gamma_l;
    half + (half * half + gamma_g * gamma_g).sqrt()
}

/// Lorentzian weight of the Thompson–Cox–Hastings pseudo-Voigt for a
/// Lorentzian fraction `r = Γ_L / Γ` of the total width.
pub fn tch_eta(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    (1.366_03 * r - 0.477_19 * r * r + 0.111_16 * r * r * r).clamp(0.0, 1.0)
}

/// Splits a pseudo-Voigt `(fwhm, eta)` into Lorentzian and Gaussian FWHM
/// consistent with [`voigt_width_whiting`], inverting [`tch_eta`] for the
/// Lorentzian fraction.
pub fn decompose_pseudo_voigt(fwhm: f64, eta: f64) -> (f64, f64) {
    let eta = eta.clamp(0.0, 1.0);
    // tch_eta is monotone on [0, 1] with tch_eta(1) = 1
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if tch_eta(mid) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    let gamma_l = r * fwhm;
    let gamma_g = (fwhm * fwhm - fwhm * gamma_l).max(0.0).sqrt();
    (gamma_l, gamma_g)
}

/// Observed linewidth (MHz) of an emitter with homogeneous width `gamma_l`
/// (MHz) under r.m.s. field noise `f_rms` (MV/m) at static field `f_dc`
/// (MV/m):
///
/// ```text
/// Γ = Γ_L/2 + √((Γ_L/2)² + 8 ln2 (F_rms · dΔE/dF(F_dc))²)
/// ```
pub fn expected_linewidth(
    gamma_l: f64,
    f_rms: f64,
    coeffs: &StarkCoefficients,
    f_dc: f64,
) -> f64 {
    let sigma_mhz = induced_dipole(coeffs, f_dc) * f_rms * 1e3;
    voigt_width_whiting(gamma_l, FWHM_PER_SIGMA * sigma_mhz)
}

/// Gaussian FWHM (MHz) produced by r.m.s. field noise at `f_dc`.
pub fn noise_gaussian_width(f_rms: f64, coeffs: &StarkCoefficients, f_dc: f64) -> f64 {
    FWHM_PER_SIGMA * (induced_dipole(coeffs, f_dc) * f_rms * 1e3).abs()
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn whiting_monotone_and_limits(l in 0.0..500.0f64, g in 0.0..500.0f64, dl in 0.0..50.0f64, dg in 0.0..50.0f64) {
            let w = voigt_width_whiting(l, g);
            prop_assert!(voigt_width_whiting(l + dl, g) >= w);
            prop_assert!(voigt_width_whiting(l, g + dg) >= w);
            prop_assert_eq!(voigt_width_whiting(l, 0.0), l);
            prop_assert_eq!(voigt_width_whiting(0.0, g), g);
        }

        #[test]
        fn no_noise_no_broadening(gl in 1.0..200.0f64, f in -300.0..300.0f64, c in prop::array::uniform4(-1e-3..1e-3f64)) {
            let coeffs = StarkCoefficients::from_array(c);
            prop_assert_eq!(expected_linewidth(gl, 0.0, &coeffs, f), gl);
        }

        #[test]
        fn even_coefficients_even_width(gl in 1.0..200.0f64, rms in 0.0..5.0f64, f in 0.0..300.0f64, c2 in -1e-4..1e-4f64, c4 in -1e-9..1e-9f64) {
            let coeffs = StarkCoefficients::new(0.0, c2, 0.0, c4);
            prop_assert_eq!(expected_linewidth(gl, rms, &coeffs, f), expected_linewidth(gl, rms, &coeffs, -f));
        }
    }
}
