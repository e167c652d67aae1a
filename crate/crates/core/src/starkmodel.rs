//! DC Stark response of an optical transition.
//!
//! The transition-energy shift is carried as raw polynomial coefficients of
//! the local field,
//!
//! ```text
//! ΔE(F) = c1·F + c2·F² + c3·F³ + c4·F⁴        [GHz, F in MV/m]
//! ```
//!
//! which is the space every fit works in. The physical response parameters
//! follow the expansion `ΔE = −Δμ F − ½ Δα F² − (1/3!) Δβ F³ − (1/4!) Δγ F⁴`,
//! so `Δμ = −c1`, `Δα = −2 c2`, `Δβ = −6 c3`, `Δγ = −24 c4` once converted to
//! physical units. Only [`coeffs_to_physical`] and [`physical_to_coeffs`]
//! know about that bookkeeping.
//!
//! A small parity-symmetric level model ([`ToyHamiltonian`]) shows
//! numerically why an inversion-symmetric emitter has no linear shift.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// One Debye in C·m.
pub const DEBYE: f64 = 3.335_64e-30;
/// 4πε0 in F/m.
pub const FOUR_PI_EPS0: f64 = 1.112_650e-10;
/// Default relative permittivity of diamond.
pub const DIAMOND_EPSILON: f64 = 5.7;

/// Debye per GHz/(MV/m): a dipole `d` in Debye shifts a line by `d / K_MU`
/// GHz per MV/m. One GHz/(MV/m) is 1e3 Hz per V/m.
pub const K_MU: f64 = 1e3 * PLANCK / DEBYE;

/// Å³ of polarizability volume per GHz/(MV/m)^n response coefficient, for
/// every order n ≥ 2 (the MV/m powers are absorbed into the unit of the
/// hyperpolarizabilities, see [`PhysicalStarkParams`]).
pub const K_VOLUME: f64 = PLANCK * 1e27 / FOUR_PI_EPS0;

/// Energy-level degeneracy below which second-order terms are refused, GHz.
pub const DEGENERACY_TOL_GHZ: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarkError {
    #[error("relative permittivity must be >= 1, got {0}")]
    InvalidPermittivity(f64),
    #[error("level index {index} out of range for {dim} levels")]
    LevelOutOfRange { index: usize, dim: usize },
    #[error("levels {i} and {j} are coupled but degenerate (|ΔE| = {gap_ghz} GHz)")]
    Degenerate { i: usize, j: usize, gap_ghz: f64 },
    #[error("cannot track level {index}: best eigenvector overlap {overlap}")]
    AmbiguousTracking { index: usize, overlap: f64 },
    #[error("invalid toy Hamiltonian: {0}")]
    InvalidHamiltonian(String),
}

/// Polynomial coefficients of the Stark shift in GHz/(MV/m)^k.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StarkCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl StarkCoefficients {
    pub const fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Self {
        Self { c1, c2, c3, c4 }
    }

    /// The single-emitter values used as the reference throughout the crate:
    /// slope 6.1e-4, quadratic −5.1e-5, cubic −5.5e-8, quartic −2.2e-10.
    pub const fn reference() -> Self {
        Self::new(6.1e-4, -5.1e-5, -5.5e-8, -2.2e-10)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }

    pub fn from_array(c: [f64; 4]) -> Self {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|c| c.is_finite())
    }

    /// Shift in GHz at local field `f` (MV/m).
    pub fn shift(&self, f: f64) -> f64 {
        stark_shift(self, f)
    }

    /// Local slope dΔE/dF in GHz/(MV/m).
    pub fn slope(&self, f: f64) -> f64 {
        induced_dipole(self, f)
    }
}

/// Stark shift ΔE(F) in GHz. Exactly zero at zero field.
pub fn stark_shift(coeffs: &StarkCoefficients, f_local: f64) -> f64 {
    let StarkCoefficients { c1, c2, c3, c4 } = *coeffs;
    f_local * (c1 + f_local * (c2 + f_local * (c3 + f_local * c4)))
}

/// Induced dipole as the local slope of the Stark trajectory, GHz/(MV/m).
///
/// This is the exact derivative `c1 + 2c2F + 3c3F² + 4c4F³`, the quantity
/// that converts a small field fluctuation into a line displacement. The
/// secant form `−ΔE(F)/F` is available as [`secant_dipole`].
pub fn induced_dipole(coeffs: &StarkCoefficients, f_dc: f64) -> f64 {
    let StarkCoefficients { c1, c2, c3, c4 } = *coeffs;
    c1 + f_dc * (2.0 * c2 + f_dc * (3.0 * c3 + f_dc * 4.0 * c4))
}

/// Secant dipole `−ΔE(F)/F`, GHz/(MV/m); tends to `−c1` at zero field.
pub fn secant_dipole(coeffs: &StarkCoefficients, f: f64) -> f64 {
    if f == 0.0 {
        -coeffs.c1
    } else {
        -stark_shift(coeffs, f) / f
    }
}

/// Response parameters in physical units.
///
/// * `delta_mu`: Debye.
/// * `delta_alpha`: polarizability volume, Å³.
/// * `delta_beta`: Å³/(MV/m).
/// * `delta_gamma`: Å³/(MV/m)².
///
/// Signs follow `ΔE = −Δμ F − ½ Δα F² − …`. Note the polarizability here
/// carries the factor ½ of the expansion: a quadratic coefficient of
/// −5.1e-5 GHz/(MV/m)² gives `delta_alpha ≈ 0.607 Å³`. Reports that quote
/// `|c2|·h/(4πε0)` directly (0.30 Å³ for the same coefficient) use the
/// convention returned by [`PhysicalStarkParams::delta_alpha_half`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicalStarkParams {
    pub delta_mu: f64,
    pub delta_alpha: f64,
    pub delta_beta: f64,
    pub delta_gamma: f64,
}

impl PhysicalStarkParams {
    /// Polarizability volume without the ½ of the expansion, Å³.
    pub fn delta_alpha_half(&self) -> f64 {
        0.5 * self.delta_alpha
    }
}

pub fn coeffs_to_physical(coeffs: &StarkCoefficients) -> PhysicalStarkParams {
    PhysicalStarkParams {
        delta_mu: -coeffs.c1 * K_MU,
        delta_alpha: -2.0 * coeffs.c2 * K_VOLUME,
        delta_beta: -6.0 * coeffs.c3 * K_VOLUME,
        delta_gamma: -24.0 * coeffs.c4 * K_VOLUME,
    }
}

pub fn physical_to_coeffs(p: &PhysicalStarkParams) -> StarkCoefficients {
    StarkCoefficients {
        c1: -p.delta_mu / K_MU,
        c2: -p.delta_alpha / (2.0 * K_VOLUME),
        c3: -p.delta_beta / (6.0 * K_VOLUME),
        c4: -p.delta_gamma / (24.0 * K_VOLUME),
    }
}

/// Lorentz local field `F_ext (ε + 2) / 3`.
pub fn lorentz_local_field(f_ext: f64, epsilon: f64) -> Result<f64, StarkError> {
    if !(epsilon >= 1.0) {
        return Err(StarkError::InvalidPermittivity(epsilon));
    }
    Ok(f_ext * (epsilon + 2.0) / 3.0)
}

/// Few-level model of the emitter orbitals with a dipole operator in the
/// level basis. Energies in GHz, dipole elements in Debye. The field couples
/// as `H(F) = H0 − μ F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyHamiltonian {
    pub energies: Vec<f64>,
    /// Row-major `dim × dim` real symmetric matrix.
    pub dipole: Vec<f64>,
}

/// Parity of the levels of [`ToyHamiltonian::centrosymmetric`]: the first
/// two levels are even (ground manifold), the remaining ones odd.
pub fn default_parity(dim: usize) -> Vec<bool> {
    (0..dim).map(|i| i < 2).collect()
}

impl ToyHamiltonian {
    pub fn new(energies: Vec<f64>, dipole: Vec<f64>) -> Result<Self, StarkError> {
        let dim = energies.len();
        if dim == 0 || dipole.len() != dim * dim {
            return Err(StarkError::InvalidHamiltonian(format!(
                "{} energies but {} dipole elements",
                dim,
                dipole.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (dipole[i * dim + j], dipole[j * dim + i]);
                if a != b {
                    return Err(StarkError::InvalidHamiltonian(format!(
                        "dipole matrix not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        if energies.iter().chain(&dipole).any(|v| !v.is_finite()) {
            return Err(StarkError::InvalidHamiltonian("non-finite entry".into()));
        }
        Ok(Self { energies, dipole })
    }

    /// Two ground and two excited orbitals: ground splitting 850 GHz,
    /// excited splitting 3000 GHz, optical gap 4.84e5 GHz, unit (Debye)
    /// ground↔excited dipoles with no intra-manifold or diagonal elements.
    pub fn centrosymmetric_default() -> Self {
        let energies = vec![0.0, 850.0, 4.84e5, 4.84e5 + 3000.0];
        let couplings = [[1.0, 0.6], [0.8, 1.2]];
        Self::centrosymmetric(energies, 2, |g, e| couplings[g][e])
            .expect("default toy Hamiltonian is valid")
    }

    /// Builds a Hamiltonian whose only nonzero dipole elements connect the
    /// first `n_ground` levels with the rest. `coupling(g, e)` gives the
    /// element between ground level `g` and excited level `e` (0-based
    /// within each manifold).
    pub fn centrosymmetric(
        energies: Vec<f64>,
        n_ground: usize,
        coupling: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, StarkError> {
        let dim = energies.len();
        if n_ground == 0 || n_ground >= dim {
            return Err(StarkError::InvalidHamiltonian(format!(
                "need both manifolds populated, got {n_ground} ground of {dim}"
            )));
        }
        let mut dipole = vec![0.0; dim * dim];
        for g in 0..n_ground {
            for e in n_ground..dim {
                let d = coupling(g, e - n_ground);
                dipole[g * dim + e] = d;
                dipole[e * dim + g] = d;
            }
        }
        Self::new(energies, dipole)
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn dipole_element(&self, i: usize, j: usize) -> f64 {
        self.dipole[i * self.dim() + j]
    }

    /// Returns a copy with the diagonal dipole of `level` set to `d` Debye.
    pub fn with_diagonal_dipole(mut self, level: usize, d: f64) -> Self {
        let dim = self.dim();
        self.dipole[level * dim + level] = d;
        self
    }

    /// True when every diagonal and every intra-manifold element vanishes
    /// for the given parity assignment (`true` = even).
    pub fn is_centrosymmetric(&self, parity: &[bool]) -> bool {
        let dim = self.dim();
        parity.len() == dim
            && (0..dim).all(|i| {
                (0..dim).all(|j| parity[i] != parity[j] || self.dipole_element(i, j) == 0.0)
            })
    }

    fn check_index(&self, index: usize) -> Result<(), StarkError> {
        if index >= self.dim() {
            return Err(StarkError::LevelOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        Ok(())
    }

    /// `H0 − E_ref − μ F` in GHz, with `f` in MV/m.
    fn shifted_matrix(&self, e_ref: f64, f: f64) -> DMatrix<f64> {
        let dim = self.dim();
        DMatrix::from_fn(dim, dim, |i, j| {
            let coupling = -self.dipole_element(i, j) * f / K_MU;
            if i == j {
                (self.energies[i] - e_ref) + coupling
            } else {
                coupling
            }
        })
    }
}

/// First-order shift of `level_index`: the diagonal dipole element, Debye.
pub fn toy_first_order_shift(h: &ToyHamiltonian, level_index: usize) -> Result<f64, StarkError> {
    h.check_index(level_index)?;
    Ok(h.dipole_element(level_index, level_index))
}

/// Second-order perturbative shift `F² Σ_{j≠i} |μ_ij|² / (E_i − E_j)`, GHz.
pub fn toy_second_order_shift(
    h: &ToyHamiltonian,
    level_index: usize,
    f: f64,
) -> Result<f64, StarkError> {
    h.check_index(level_index)?;
    let i = level_index;
    let mut sum = 0.0;
    for j in 0..h.dim() {
        let mu = h.dipole_element(i, j);
        if j == i || mu == 0.0 {
            continue;
        }
        let gap = h.energies[i] - h.energies[j];
        if gap.abs() < DEGENERACY_TOL_GHZ {
            return Err(StarkError::Degenerate {
                i,
                j,
                gap_ghz: gap.abs(),
            });
        }
        let coupling = mu * f / K_MU;
        sum += coupling * coupling / gap;
    }
    Ok(sum)
}

/// Exact shift of `level_index` from diagonalising `H0 − μF`, relative to
/// the zero-field energy, GHz.
///
/// The level is followed by its overlap with the zero-field basis state and
/// the eigenvalue is refined with a Rayleigh quotient of the shifted matrix,
/// which keeps the result accurate when the shift is many orders of
/// magnitude below the optical gap.
pub fn toy_exact_shift(h: &ToyHamiltonian, level_index: usize, f: f64) -> Result<f64, StarkError> {
    h.check_index(level_index)?;
    let i = level_index;
    for j in 0..h.dim() {
        if j != i && (h.energies[i] - h.energies[j]).abs() < DEGENERACY_TOL_GHZ {
            return Err(StarkError::Degenerate {
                i,
                j,
                gap_ghz: (h.energies[i] - h.energies[j]).abs(),
            });
        }
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    let m = h.shifted_matrix(h.energies[i], f);
    let eig = SymmetricEigen::new(m.clone());
    let (best, overlap) = (0..h.dim())
        .map(|k| (k, eig.eigenvectors[(i, k)].powi(2)))
        .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    if overlap < 0.5 {
        return Err(StarkError::AmbiguousTracking {
            index: i,
            overlap,
        });
    }
    let mut v: DVector<f64> = eig.eigenvectors.column(best).into_owned();
    let mut lambda = eig.eigenvalues[best];
    // one step of inverse iteration, then the Rayleigh quotient
    let dim = h.dim();
    let shifted = &m - DMatrix::identity(dim, dim) * lambda;
    if let Some(w) = shifted.lu().solve(&v) {
        let norm = w.norm();
        if norm.is_finite() && norm > 0.0 {
            v = w / norm;
        }
    }
    let mv = &m * &v;
    lambda = v.dot(&mv) / v.dot(&v);
    Ok(lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REF: StarkCoefficients = StarkCoefficients::reference();

    #[test]
    fn zero_field_shift_is_exactly_zero() {
        assert_eq!(stark_shift(&REF, 0.0), 0.0);
    }

    #[test]
    fn shift_at_100_matches_power_sum() {
        // term-by-term power sum, independent of the Horner form
        let f: f64 = 100.0;
        let expected = 6.1e-4 * f - 5.1e-5 * f.powi(2) - 5.5e-8 * f.powi(3) - 2.2e-10 * f.powi(4);
        assert_relative_eq!(stark_shift(&REF, f), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, -0.526, max_relative = 1e-12);
    }

    #[test]
    fn even_coefficients_give_even_shift() {
        let c = StarkCoefficients::new(0.0, -3e-5, 0.0, 4e-10);
        for f in [1.0, 17.5, 250.0] {
            assert_eq!(stark_shift(&c, f), stark_shift(&c, -f));
        }
    }

    #[test]
    fn induced_dipole_reference_values() {
        assert_eq!(induced_dipole(&REF, 0.0), 6.1e-4);
        // 6.1e-4 − 2·5.1e-5·150 − 3·5.5e-8·150² − 4·2.2e-10·150³
        assert_relative_eq!(induced_dipole(&REF, 150.0), -0.0213725, max_relative = 1e-12);
        let fd = (stark_shift(&REF, 150.0 + 1e-4) - stark_shift(&REF, 150.0 - 1e-4)) / 2e-4;
        assert_relative_eq!(induced_dipole(&REF, 150.0), fd, max_relative = 1e-6);
        assert_eq!(induced_dipole(&StarkCoefficients::default(), 77.0), 0.0);
    }

    #[test]
    fn secant_dipole_limits() {
        assert_eq!(secant_dipole(&REF, 0.0), -REF.c1);
        assert_relative_eq!(secant_dipole(&REF, 1e-6), -REF.c1, max_relative = 1e-6);
    }

    #[test]
    fn dipole_conversion() {
        // 1e3 · h / D
        assert_relative_eq!(K_MU, 0.198_644_64, max_relative = 1e-6);
        let p = coeffs_to_physical(&StarkCoefficients::new(6.1e-4, 0.0, 0.0, 0.0));
        assert_relative_eq!(p.delta_mu.abs(), 1.2117e-4, max_relative = 1e-3);
    }

    #[test]
    fn polarizability_conversion() {
        // 2 · 5.1e-5 GHz/(MV/m)² = 1.02e-7 Hz/(V/m)² → ·h / 4πε0 → m³ → Å³
        let si = 2.0 * 5.1e-5 * 1e-3 * PLANCK / FOUR_PI_EPS0 * 1e30;
        let p = coeffs_to_physical(&StarkCoefficients::new(0.0, -5.1e-5, 0.0, 0.0));
        assert_relative_eq!(p.delta_alpha, si, max_relative = 1e-12);
        assert_relative_eq!(p.delta_alpha, 0.6074, max_relative = 1e-3);
        assert_relative_eq!(p.delta_alpha_half(), 0.3037, max_relative = 1e-3);
    }

    #[test]
    fn zero_coefficients_convert_to_zero() {
        let p = coeffs_to_physical(&StarkCoefficients::default());
        assert_eq!(p, PhysicalStarkParams::default());
    }

    #[test]
    fn lorentz_field() {
        assert_eq!(lorentz_local_field(1.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            lorentz_local_field(100.0, 5.7).unwrap(),
            256.666_666_666_666_7,
            max_relative = 1e-14
        );
        assert_eq!(lorentz_local_field(0.0, 5.7).unwrap(), 0.0);
        assert!(matches!(
            lorentz_local_field(1.0, 0.5),
            Err(StarkError::InvalidPermittivity(_))
        ));
        assert!(lorentz_local_field(1.0, f64::NAN).is_err());
    }

    #[test]
    fn toy_first_order() {
        let h = ToyHamiltonian::centrosymmetric_default();
        assert!(h.is_centrosymmetric(&default_parity(4)));
        let shifts: Vec<f64> = (0..4).map(|i| toy_first_order_shift(&h, i).unwrap()).collect();
        assert_eq!(shifts, vec![0.0; 4]);
        let broken = h.clone().with_diagonal_dipole(0, 0.5);
        assert_eq!(toy_first_order_shift(&broken, 0).unwrap(), 0.5);
        assert!(!broken.is_centrosymmetric(&default_parity(4)));
        assert!(matches!(
            toy_first_order_shift(&h, 4),
            Err(StarkError::LevelOutOfRange { .. })
        ));
    }

    #[test]
    fn toy_second_order_two_level() {
        let h = ToyHamiltonian::new(vec![0.0, 1000.0], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let k = 1.0 / K_MU;
        let expected = -(k * k) * 100.0 / 1000.0;
        assert_relative_eq!(
            toy_second_order_shift(&h, 0, 10.0).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_eq!(toy_second_order_shift(&h, 0, 0.0).unwrap(), 0.0);
        let zero = ToyHamiltonian::new(vec![0.0, 1000.0], vec![0.0; 4]).unwrap();
        assert_eq!(toy_second_order_shift(&zero, 1, 30.0).unwrap(), 0.0);
    }

    #[test]
    fn toy_second_order_degenerate() {
        let h = ToyHamiltonian::new(vec![0.0, 1e-4], vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            toy_second_order_shift(&h, 0, 1.0),
            Err(StarkError::Degenerate { .. })
        ));
        // degenerate but uncoupled is fine
        let h = ToyHamiltonian::new(vec![0.0, 1e-4], vec![0.0; 4]).unwrap();
        assert_eq!(toy_second_order_shift(&h, 0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn toy_exact_matches_perturbation_at_small_field() {
        let h = ToyHamiltonian::centrosymmetric_default();
        for level in 0..4 {
            let f = 20.0;
            let exact = toy_exact_shift(&h, level, f).unwrap();
            let pert = toy_second_order_shift(&h, level, f).unwrap();
            let exact_half = toy_exact_shift(&h, level, f / 2.0).unwrap();
            let pert_half = toy_second_order_shift(&h, level, f / 2.0).unwrap();
            // remainder is fourth order: halving F divides it by 16
            let ratio = (exact - pert) / (exact_half - pert_half);
            assert_relative_eq!(ratio, 16.0, max_relative = 1e-2);
            assert_relative_eq!(exact, pert, max_relative = 1e-3);
        }
    }

    #[test]
    fn toy_exact_even_in_field() {
        let h = ToyHamiltonian::centrosymmetric_default();
        for level in 0..4 {
            let a = toy_exact_shift(&h, level, 50.0).unwrap();
            let b = toy_exact_shift(&h, level, -50.0).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs(), "{a} vs {b}");
        }
        let zero = ToyHamiltonian::new(vec![0.0, 10.0, 100.0], vec![0.0; 9]).unwrap();
        assert_eq!(toy_exact_shift(&zero, 2, 80.0).unwrap(), 0.0);
    }

    #[test]
    fn toy_exact_slope_of_broken_symmetry() {
        let d = 0.5;
        let h = ToyHamiltonian::centrosymmetric_default().with_diagonal_dipole(1, d);
        let step = 1e-3;
        let slope = (toy_exact_shift(&h, 1, step).unwrap() - toy_exact_shift(&h, 1, -step).unwrap())
            / (2.0 * step);
        assert_relative_eq!(slope, -d / K_MU, max_relative = 1e-6);
    }

    #[test]
    fn rejects_asymmetric_dipole() {
        assert!(ToyHamiltonian::new(vec![0.0, 1.0], vec![0.0, 1.0, 2.0, 0.0]).is_err());
    }
}
