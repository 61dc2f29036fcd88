use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Cubic periodic lattice with `n_points` per axis on a box of edge `box_length`.
///
/// Lattice index `i` on an axis maps to the signed wavenumber index
/// `z = i` for `i < n/2` and `z = i - n` otherwise, so each axis covers
/// `[-n/2, n/2)`. The physical wavevector is `k_min * z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n_points: usize,
    box_length: f64,
}

impl Grid {
    pub fn new(n_points: usize, box_length: f64) -> Result<Self> {
        if n_points < 8 || n_points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_points must be even and >= 8, got {n_points}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box_length must be positive and finite, got {box_length}"
            )));
        }
        Ok(Self {
            n_points,
            box_length,
        })
    }

    /// Grid whose fundamental wavenumber is `k_min`.
    pub fn with_k_min(n_points: usize, k_min: f64) -> Result<Self> {
        Self::new(n_points, 2.0 * PI / k_min)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    /// Number of lattice sites, `n³`.
    pub fn len(&self) -> usize {
        self.n_points * self.n_points * self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n_points as f64
    }

    pub fn k_min(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    /// Largest retained integer index per axis under the two-thirds rule:
    /// the largest integer strictly below `n/3`.
    pub fn dealias_cutoff(&self) -> usize {
        (self.n_points + 2) / 3 - 1
    }

    /// Largest wavevector magnitude among the modes kept by dealiasing
    /// (the lattice corner of the retained cube).
    pub fn k_max_retained(&self) -> f64 {
        3f64.sqrt() * self.dealias_cutoff() as f64 * self.k_min()
    }

    /// Signed wavenumber index of storage index `i` along one axis.
    #[inline]
    pub fn signed_index(&self, i: usize) -> i64 {
        let n = self.n_points;
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Storage index of `-z` given the storage index of `z`.
    #[inline]
    pub fn mirror_index(&self, i: usize) -> usize {
        (self.n_points - i) % self.n_points
    }

    #[inline]
    pub fn flat_index(&self, i0: usize, i1: usize, i2: usize) -> usize {
        (i0 * self.n_points + i1) * self.n_points + i2
    }

    /// Flat index of the mode `-k` for the mode stored at `flat`.
    #[inline]
    pub fn mirror_flat(&self, flat: usize) -> usize {
        let n = self.n_points;
        let i2 = flat % n;
        let i1 = (flat / n) % n;
        let i0 = flat / (n * n);
        self.flat_index(
            self.mirror_index(i0),
            self.mirror_index(i1),
            self.mirror_index(i2),
        )
    }

    /// Whether storage index `i` survives dealiasing on its axis.
    #[inline]
    pub fn is_retained(&self, i: usize) -> bool {
        self.signed_index(i).unsigned_abs() as usize <= self.dealias_cutoff()
    }

    /// Wavenumbers along one axis in storage order.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        let k_min = self.k_min();
        (0..self.n_points)
            .map(|i| k_min * self.signed_index(i) as f64)
            .collect()
    }

    /// Axis wavenumbers used for odd derivatives: as [`Grid::axis_wavenumbers`]
    /// with the unpaired Nyquist index `-n/2` set to zero so that derivatives
    /// of real fields stay real.
    pub fn derivative_wavenumbers(&self) -> Vec<f64> {
        let mut k = self.axis_wavenumbers();
        k[self.n_points / 2] = 0.0;
        k
    }

    /// `|k|²` for every lattice mode, in storage order.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = self.axis_wavenumbers();
        let n = self.n_points;
        let mut out = Vec::with_capacity(self.len());
        for k0 in &k {
            for k1 in &k {
                let k01 = k0 * k0 + k1 * k1;
                for k2 in k.iter().take(n) {
                    out.push(k01 + k2 * k2);
                }
            }
        }
        out
    }

    /// Storage indices along one axis that survive dealiasing.
    pub fn retained_indices(&self) -> Vec<usize> {
        (0..self.n_points)
            .filter(|&i| self.is_retained(i))
            .collect()
    }

    /// Dealiasing mask in storage order.
    pub fn retained_mask(&self) -> Vec<bool> {
        let n = self.n_points;
        let keep: Vec<bool> = (0..n).map(|i| self.is_retained(i)).collect();
        let mut out = Vec::with_capacity(self.len());
        for &a in &keep {
            for &b in &keep {
                for &c in &keep {
                    out.push(a && b && c);
                }
            }
        }
        out
    }

    /// Wavevector of the mode stored at `flat`.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let n = self.n_points;
        let k_min = self.k_min();
        [
            k_min * self.signed_index(flat / (n * n)) as f64,
            k_min * self.signed_index((flat / n) % n) as f64,
            k_min * self.signed_index(flat % n) as f64,
        ]
    }
}
