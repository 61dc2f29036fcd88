use num_complex::Complex64;

use super::field::VectorField;
use crate::error::Result;

/// Leray projection onto divergence-free fields: per mode `k ≠ 0`,
/// `û ← û - k (k·û)/|k|²`. The `k = 0` mode passes through unchanged.
pub fn leray_project(v: &VectorField) -> Result<VectorField> {
    let mut out = v.clone();
    leray_project_in_place(&mut out)?;
    Ok(out)
}

pub fn leray_project_in_place(v: &mut VectorField) -> Result<()> {
    v[0].ensure_same_grid(&v[1])?;
    v[0].ensure_same_grid(&v[2])?;
    let grid = *v[0].grid();
    let n = grid.n_points();
    let k = grid.axis_wavenumbers();
    let [a, b, c] = v;
    let (a, b, c) = (a.coeffs_mut(), b.coeffs_mut(), c.coeffs_mut());
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = (i0 * n + i1) * n + i2;
                let kv = [k[i0], k[i1], k[i2]];
                let k_sq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                if k_sq == 0.0 {
                    continue;
                }
                let dot: Complex64 = kv[0] * a[idx] + kv[1] * b[idx] + kv[2] * c[idx];
                let s = dot / k_sq;
                a[idx] -= kv[0] * s;
                b[idx] -= kv[1] * s;
                c[idx] -= kv[2] * s;
            }
        }
    }
    Ok(())
}

/// Largest `|k·v̂(k)|` over the lattice (true wavevectors, all modes).
pub fn max_divergence(v: &VectorField) -> f64 {
    let grid = *v[0].grid();
    let n = grid.n_points();
    let k = grid.axis_wavenumbers();
    let (a, b, c) = (v[0].coeffs(), v[1].coeffs(), v[2].coeffs());
    let mut worst = 0.0f64;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = (i0 * n + i1) * n + i2;
                let dot = k[i0] * a[idx] + k[i1] * b[idx] + k[i2] * c[idx];
                worst = worst.max(dot.norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::spectral::{Grid, SpectralField};
    use rand::{Rng, SeedableRng};

    fn random_vector(grid: Grid, seed: u64) -> VectorField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut make = || {
            let mut f = SpectralField::zeros(grid);
            for c in f.coeffs_mut() {
                *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            f.symmetrize();
            f
        };
        [make(), make(), make()]
    }

    #[test]
    fn annihilates_gradients() {
        let g = Grid::new(8, 3.0).unwrap();
        let mut v = [
            SpectralField::zeros(g),
            SpectralField::zeros(g),
            SpectralField::zeros(g),
        ];
        let phi = random_vector(g, 1)[0].clone();
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            for a in 0..3 {
                v[a].coeffs_mut()[idx] = Complex64::new(0.0, k[a]) * phi.coeffs()[idx];
            }
        }
        let p = leray_project(&v).unwrap();
        for f in &p {
            assert!(f.max_abs() < 1e-14);
        }
    }

    #[test]
    fn transverse_mode_is_unchanged() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut v = [
            SpectralField::zeros(g),
            SpectralField::zeros(g),
            SpectralField::zeros(g),
        ];
        v[0].set([0, 0, 1], Complex64::new(1.0, 0.0));
        let p = leray_project(&v).unwrap();
        assert_eq!(p, v);
    }

    #[test]
    fn oblique_mode_hand_value() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut v = [
            SpectralField::zeros(g),
            SpectralField::zeros(g),
            SpectralField::zeros(g),
        ];
        v[0].set([1, 1, 0], Complex64::new(1.0, 0.0));
        let p = leray_project(&v).unwrap();
        assert!((p[0].get([1, 1, 0]) - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        assert!((p[1].get([1, 1, 0]) - Complex64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!(p[2].get([1, 1, 0]).norm() < 1e-15);
    }

    #[test]
    fn mean_mode_passes_through_and_projection_is_idempotent() {
        let g = Grid::new(8, 5.0).unwrap();
        let v = random_vector(g, 4);
        let once = leray_project(&v).unwrap();
        for a in 0..3 {
            assert_eq!(once[a].get([0, 0, 0]), v[a].get([0, 0, 0]));
        }
        let twice = leray_project(&once).unwrap();
        for a in 0..3 {
            for (x, y) in once[a].coeffs().iter().zip(twice[a].coeffs()) {
                assert!((x - y).norm() <= 1e-15 * (1.0 + x.norm()));
            }
        }
        let scale = v.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        assert!(max_divergence(&once) <= 1e-14 * scale * g.k_min() * 8.0);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let v = [
            SpectralField::zeros(Grid::new(8, 1.0).unwrap()),
            SpectralField::zeros(Grid::new(8, 2.0).unwrap()),
            SpectralField::zeros(Grid::new(8, 1.0).unwrap()),
        ];
        assert!(matches!(leray_project(&v), Err(Error::GridMismatch)));
    }
}
