//! Seeded divergence-free random fields with a prescribed radial spectrum.
//!
//! Each retained mode `k ≠ 0` receives the vector
//! `a(|k|) (e^{iφ₁} cos θ e₁ + e^{iφ₂} sin θ e₂)` with `e₁, e₂` an orthonormal
//! basis of the plane orthogonal to `k` and `θ, φ₁, φ₂` uniform. The modal
//! energy is therefore exactly `a(|k|)²` and only the phases and the
//! polarization are random. The mirror mode gets the complex conjugate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{SpectralField, VectorField};
use super::grid::Grid;
use super::projection::leray_project_in_place;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    /// `a(k) = exp(-|k|² / (2 cutoff_k²))`: flat near `k = 0`, Gaussian
    /// roll-off at `cutoff_k`.
    FlatLowKGaussianCutoff,
    /// The single lattice mode on the first axis nearest to `cutoff_k`.
    SingleMode,
    /// Unit amplitude on the shell `||k| - cutoff_k| <= k_min / 2`.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumProfile {
    pub shape: ProfileShape,
    pub cutoff_k: f64,
    pub target_l2_norm: f64,
    pub seed: u64,
}

impl SpectrumProfile {
    fn validate(&self) -> Result<()> {
        if !(self.cutoff_k.is_finite() && self.cutoff_k > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cutoff_k".into(),
                reason: format!("must be positive, got {}", self.cutoff_k),
            });
        }
        if !(self.target_l2_norm.is_finite() && self.target_l2_norm >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "target_l2_norm".into(),
                reason: format!("must be nonnegative, got {}", self.target_l2_norm),
            });
        }
        Ok(())
    }

    fn amplitude(&self, grid: &Grid, idx: usize) -> f64 {
        let k = grid.wavevector(idx);
        let k_sq = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        match self.shape {
            ProfileShape::FlatLowKGaussianCutoff => {
                (-k_sq / (2.0 * self.cutoff_k * self.cutoff_k)).exp()
            }
            ProfileShape::SingleMode => {
                let z = (self.cutoff_k / grid.k_min()).round().max(1.0);
                let target = z * grid.k_min();
                if (k[0] - target).abs() < 1e-9 * target && k[1] == 0.0 && k[2] == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ProfileShape::Ring => {
                if (k_sq.sqrt() - self.cutoff_k).abs() <= 0.5 * grid.k_min() {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

fn transverse_basis(k: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let norm = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let khat = [k[0] / norm, k[1] / norm, k[2] / norm];
    let mut axis = 0;
    for a in 1..3 {
        if khat[a].abs() < khat[axis].abs() {
            axis = a;
        }
    }
    let mut helper = [0.0; 3];
    helper[axis] = 1.0;
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let e1 = cross(helper, khat);
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = [e1[0] / n1, e1[1] / n1, e1[2] / n1];
    let e2 = cross(khat, e1);
    (e1, e2)
}

fn raw_field(grid: &Grid, profile: &SpectrumProfile, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [
        SpectralField::zeros(*grid),
        SpectralField::zeros(*grid),
        SpectralField::zeros(*grid),
    ];
    let mask = grid.retained_mask();
    for idx in 0..grid.len() {
        let mirror = grid.mirror_flat(idx);
        if mirror <= idx || !mask[idx] {
            continue;
        }
        let theta: f64 = rng.gen_range(0.0..2.0 * PI);
        let phi1: f64 = rng.gen_range(0.0..2.0 * PI);
        let phi2: f64 = rng.gen_range(0.0..2.0 * PI);
        let a = profile.amplitude(grid, idx);
        if a == 0.0 {
            continue;
        }
        let (e1, e2) = transverse_basis(grid.wavevector(idx));
        let c1 = Complex64::from_polar(a * theta.cos(), phi1);
        let c2 = Complex64::from_polar(a * theta.sin(), phi2);
        for comp in 0..3 {
            let v = c1 * e1[comp] + c2 * e2[comp];
            out[comp].coeffs_mut()[idx] = v;
            out[comp].coeffs_mut()[mirror] = v.conj();
        }
    }
    out
}

fn rescale(fields: &mut [SpectralField], target: f64, what: &str) -> Result<()> {
    if target == 0.0 {
        fields.iter_mut().for_each(|f| f.scale(0.0));
        return Ok(());
    }
    let norm_sq: f64 = fields.iter().map(|f| f.l2_norm_sq()).sum();
    if norm_sq == 0.0 || !norm_sq.is_finite() {
        return Err(Error::DegenerateProfile(format!(
            "{what}: no lattice mode carries energy for this profile"
        )));
    }
    let factor = target / norm_sq.sqrt();
    fields.iter_mut().for_each(|f| f.scale(factor));
    Ok(())
}

/// Divergence-free, dealiased, Hermitian random vector field with the
/// profile's radial amplitude, rescaled to `‖v‖_{L²} = target_l2_norm`.
pub fn make_divfree_random_field(grid: &Grid, profile: &SpectrumProfile) -> Result<VectorField> {
    profile.validate()?;
    let mut v = raw_field(grid, profile, profile.seed);
    leray_project_in_place(&mut v)?;
    rescale(&mut v, profile.target_l2_norm, "velocity")?;
    Ok(v)
}

/// Random deformation tensor whose three columns are independent
/// divergence-free fields (so `div Fᵀ = 0`), stored row-major
/// (`F[3 i + j] = F_ij`), with Frobenius L² norm `target_l2_norm`.
pub fn make_divfree_random_tensor(
    grid: &Grid,
    profile: &SpectrumProfile,
) -> Result<[SpectralField; 9]> {
    profile.validate()?;
    let mut out: [SpectralField; 9] = std::array::from_fn(|_| SpectralField::zeros(*grid));
    for j in 0..3 {
        let column_seed = profile
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(j as u64 + 1);
        let mut col = raw_field(grid, profile, column_seed);
        leray_project_in_place(&mut col)?;
        for (i, f) in col.into_iter().enumerate() {
            out[3 * i + j] = f;
        }
    }
    rescale(&mut out, profile.target_l2_norm, "deformation tensor")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dealias, max_divergence};

    fn profile(target: f64, seed: u64) -> SpectrumProfile {
        SpectrumProfile {
            shape: ProfileShape::FlatLowKGaussianCutoff,
            cutoff_k: 1.0,
            target_l2_norm: target,
            seed,
        }
    }

    #[test]
    fn output_is_divergence_free_and_normalized() {
        let g = Grid::new(16, 12.0).unwrap();
        let v = make_divfree_random_field(&g, &profile(0.7, 11)).unwrap();
        let scale = v.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        assert!(max_divergence(&v) <= 1e-12 * scale);
        let norm: f64 = v.iter().map(|f| f.l2_norm_sq()).sum::<f64>().sqrt();
        assert!((norm - 0.7).abs() / 0.7 < 1e-10);
        for f in &v {
            assert_eq!(f.hermitian_deviation(), 0.0);
            assert_eq!(&dealias(f), f);
            assert_eq!(f.get([0, 0, 0]), Complex64::default());
        }
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let g = Grid::new(8, 6.0).unwrap();
        let a = make_divfree_random_field(&g, &profile(1.0, 5)).unwrap();
        let b = make_divfree_random_field(&g, &profile(1.0, 5)).unwrap();
        assert_eq!(a, b);
        let c = make_divfree_random_field(&g, &profile(1.0, 6)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn modal_energy_follows_profile_exactly() {
        let g = Grid::new(16, 20.0).unwrap();
        let p = profile(0.0, 2);
        let v = raw_field(&g, &p, 2);
        for idx in [
            g.flat_index(1, 0, 0),
            g.flat_index(2, 3, 15),
            g.flat_index(0, 4, 1),
        ] {
            let e: f64 = v.iter().map(|f| f.coeffs()[idx].norm_sqr()).sum();
            let a = p.amplitude(&g, idx);
            assert!((e - a * a).abs() < 1e-14);
        }
    }

    #[test]
    fn tensor_columns_are_divergence_free() {
        let g = Grid::new(8, 10.0).unwrap();
        let f = make_divfree_random_tensor(&g, &profile(0.3, 1)).unwrap();
        let total: f64 = f.iter().map(|c| c.l2_norm_sq()).sum();
        assert!((total.sqrt() - 0.3).abs() < 1e-12);
        for j in 0..3 {
            let col = [f[j].clone(), f[3 + j].clone(), f[6 + j].clone()];
            assert!(max_divergence(&col) < 1e-14);
        }
    }

    #[test]
    fn zero_target_gives_zero_field() {
        let g = Grid::new(8, 10.0).unwrap();
        let v = make_divfree_random_field(&g, &profile(0.0, 1)).unwrap();
        assert!(v.iter().all(|f| f.is_zero()));
    }

    #[test]
    fn degenerate_ring_is_an_error() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let p = SpectrumProfile {
            shape: ProfileShape::Ring,
            cutoff_k: 100.0,
            target_l2_norm: 1.0,
            seed: 0,
        };
        assert!(matches!(
            make_divfree_random_field(&g, &p),
            Err(Error::DegenerateProfile(_))
        ));
    }

    #[test]
    fn single_mode_excites_one_wavevector_pair() {
        let g = Grid::new(8, 2.0 * PI).unwrap();
        let p = SpectrumProfile {
            shape: ProfileShape::SingleMode,
            cutoff_k: 2.0,
            target_l2_norm: 1.0,
            seed: 3,
        };
        let v = make_divfree_random_field(&g, &p).unwrap();
        let nonzero = (0..g.len())
            .filter(|&i| v.iter().any(|f| f.coeffs()[i].norm() > 0.0))
            .count();
        assert_eq!(nonzero, 2);
        assert!(v[0].get([2, 0, 0]).norm() < 1e-15);
    }
}
