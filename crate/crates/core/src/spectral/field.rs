//! Spectral representation of real periodic scalar fields.
//!
//! Fourier convention: for physical samples `f(x)` on the `n³` lattice,
//! `coeff(k) = n⁻³ Σ_x f(x) e^{-i k·x}` and `f(x) = Σ_k coeff(k) e^{i k·x}`.
//! A constant field `c` has `coeff(0) = c`, `cos(k_min x₁)` has coefficients
//! `½` at `k = (±k_min, 0, 0)`, and Parseval reads
//! `∫|f|² dx = box_length³ · Σ_k |coeff(k)|²`. Every norm in this crate uses
//! that convention.

use num_complex::Complex64;

use super::fft::{with_engine, Band};
use super::grid::Grid;
use crate::error::{Error, Result};

/// Tolerance on relative Hermitian-symmetry deviation accepted by
/// [`transform_inverse`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Fourier coefficients of one real scalar field, stored in lattice order
/// (axis 0 slowest).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

/// Three spectral components of a vector field.
pub type VectorField = [SpectralField; 3];

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::default(); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    fn flat(&self, z: [i64; 3]) -> usize {
        let n = self.grid.n_points() as i64;
        let wrap = |v: i64| v.rem_euclid(n) as usize;
        self.grid.flat_index(wrap(z[0]), wrap(z[1]), wrap(z[2]))
    }

    /// Coefficient at integer wavevector index `z` (wrapped onto the lattice).
    pub fn get(&self, z: [i64; 3]) -> Complex64 {
        self.coeffs[self.flat(z)]
    }

    pub fn set(&mut self, z: [i64; 3], value: Complex64) {
        let idx = self.flat(z);
        self.coeffs[idx] = value;
    }

    /// Sets `coeff(z) = value` and `coeff(-z) = conj(value)`.
    pub fn set_hermitian(&mut self, z: [i64; 3], value: Complex64) {
        self.set(z, value);
        self.set([-z[0], -z[1], -z[2]], value.conj());
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Largest `|coeff(k) - conj(coeff(-k))|` over the lattice.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (idx, c) in self.coeffs.iter().enumerate() {
            let mirror = self.coeffs[self.grid.mirror_flat(idx)];
            worst = worst.max((c - mirror.conj()).norm());
        }
        worst
    }

    /// Replaces each coefficient by the average of itself and the conjugate
    /// of its mirror, making the symmetry exact.
    pub fn symmetrize(&mut self) {
        let original = self.coeffs.clone();
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let mirror = original[self.grid.mirror_flat(idx)];
            *c = 0.5 * (original[idx] + mirror.conj());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
        Ok(())
    }

    /// Physical L² norm squared, `box_length³ Σ |coeff|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        sobolev_seminorm_sq(self, 0.0)
    }

    pub fn ensure_same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn check_len(values: &[f64], grid: &Grid) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: values.len(),
        });
    }
    Ok(())
}

/// Physical lattice values (axis 0 slowest) to spectral coefficients.
/// The output is exactly Hermitian.
pub fn transform_forward(values: &[f64], grid: &Grid) -> Result<SpectralField> {
    check_len(values, grid)?;
    let mut field = SpectralField::zeros(*grid);
    forward_pair_into(values, None, Band::Full, &mut Vec::new(), &mut field, None)?;
    Ok(field)
}

/// Spectral coefficients to physical lattice values.
pub fn transform_inverse(field: &SpectralField) -> Result<Vec<f64>> {
    let deviation = field.hermitian_deviation();
    let tolerance = HERMITIAN_TOLERANCE * field.max_abs().max(f64::MIN_POSITIVE);
    if deviation > tolerance {
        return Err(Error::HermitianViolation {
            deviation,
            tolerance,
        });
    }
    let mut buf = field.coeffs.clone();
    with_engine(field.grid.n_points(), |e| e.inverse(&mut buf, Band::Full));
    Ok(buf.into_iter().map(|c| c.re).collect())
}

/// Inverse transform of two Hermitian fields with one complex FFT.
/// Symmetry is assumed, not checked.
pub(crate) fn inverse_pair(
    a: &SpectralField,
    b: Option<&SpectralField>,
    band: Band,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = a.grid.len();
    let mut buf = Vec::new();
    let (mut re, mut im) = (vec![0.0; len], vec![0.0; len]);
    inverse_pair_into(a, b, band, &mut buf, &mut re, &mut im)?;
    Ok((re, im))
}

/// [`inverse_pair`] writing into caller-owned storage; `buf` is scratch.
pub(crate) fn inverse_pair_into(
    a: &SpectralField,
    b: Option<&SpectralField>,
    band: Band,
    buf: &mut Vec<Complex64>,
    re: &mut [f64],
    im: &mut [f64],
) -> Result<()> {
    let len = a.grid.len();
    if re.len() != len || im.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: re.len().min(im.len()),
        });
    }
    buf.clear();
    match b {
        Some(b) => {
            a.ensure_same_grid(b)?;
            buf.extend(
                a.coeffs
                    .iter()
                    .zip(&b.coeffs)
                    .map(|(x, y)| Complex64::new(x.re - y.im, x.im + y.re)),
            );
        }
        None => buf.extend_from_slice(&a.coeffs),
    }
    with_engine(a.grid.n_points(), |e| e.inverse(buf, band));
    for ((c, r), i) in buf.iter().zip(re.iter_mut()).zip(im.iter_mut()) {
        *r = c.re;
        *i = c.im;
    }
    Ok(())
}

/// Forward transform of two real arrays with one complex FFT; both outputs
/// are exactly Hermitian.
pub(crate) fn forward_pair(
    x: &[f64],
    y: &[f64],
    grid: &Grid,
    band: Band,
) -> Result<(SpectralField, SpectralField)> {
    let mut first = SpectralField::zeros(*grid);
    let mut second = SpectralField::zeros(*grid);
    let mut buf = Vec::new();
    forward_pair_into(x, Some(y), band, &mut buf, &mut first, Some(&mut second))?;
    Ok((first, second))
}

/// [`forward_pair`] writing into caller-owned fields on the target grid;
/// with no second input the imaginary part is zero and `second` is unused.
pub(crate) fn forward_pair_into(
    x: &[f64],
    y: Option<&[f64]>,
    band: Band,
    buf: &mut Vec<Complex64>,
    first: &mut SpectralField,
    mut second: Option<&mut SpectralField>,
) -> Result<()> {
    let grid = first.grid;
    check_len(x, &grid)?;
    buf.clear();
    match y {
        Some(y) => {
            check_len(y, &grid)?;
            buf.extend(x.iter().zip(y).map(|(&re, &im)| Complex64::new(re, im)));
        }
        None => buf.extend(x.iter().map(|&re| Complex64::new(re, 0.0))),
    }
    if let Some(s) = second.as_deref() {
        first.ensure_same_grid(s)?;
    }
    with_engine(grid.n_points(), |e| e.forward(buf, band));
    let n = grid.n_points();
    let mirror: Vec<usize> = (0..n).map(|i| grid.mirror_index(i)).collect();
    let kept = band.indices(n);
    if kept.len() < n {
        first.coeffs.fill(Complex64::default());
        if let Some(s) = second.as_deref_mut() {
            s.coeffs.fill(Complex64::default());
        }
    }
    for &i0 in &kept {
        for &i1 in &kept {
            let base = (i0 * n + i1) * n;
            let mbase = (mirror[i0] * n + mirror[i1]) * n;
            let row = &buf[base..base + n];
            let mrow = &buf[mbase..mbase + n];
            let out_a = &mut first.coeffs[base..base + n];
            match second.as_deref_mut() {
                Some(s) => {
                    let out_b = &mut s.coeffs[base..base + n];
                    for &i2 in &kept {
                        let c = row[i2];
                        let m = mrow[mirror[i2]].conj();
                        out_a[i2] = 0.5 * (c + m);
                        let d = 0.5 * (c - m);
                        // (c - m) / (2i)
                        out_b[i2] = Complex64::new(d.im, -d.re);
                    }
                }
                None => {
                    for &i2 in &kept {
                        out_a[i2] = 0.5 * (row[i2] + mrow[mirror[i2]].conj());
                    }
                }
            }
        }
    }
    Ok(())
}

/// Spectral derivative along `axis` (0, 1 or 2): multiplies each
/// coefficient by `i k_axis`. The unpaired Nyquist index gets zero
/// wavenumber so the result stays Hermitian.
pub fn gradient(field: &SpectralField, axis: usize) -> Result<SpectralField> {
    if axis > 2 {
        return Err(Error::InvalidParameter {
            name: "axis".into(),
            reason: format!("must be 0, 1 or 2, got {axis}"),
        });
    }
    let grid = field.grid;
    let n = grid.n_points();
    let k = grid.derivative_wavenumbers();
    let mut out = field.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        let i = match axis {
            0 => idx / (n * n),
            1 => (idx / n) % n,
            _ => idx % n,
        };
        *c *= Complex64::new(0.0, k[i]);
    }
    Ok(out)
}

/// Two-thirds rule: zero every mode with an axis index beyond the cutoff.
pub fn dealias(field: &SpectralField) -> SpectralField {
    let mut out = field.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(field: &mut SpectralField) {
    let grid = field.grid;
    let n = grid.n_points();
    let keep: Vec<bool> = (0..n).map(|i| grid.is_retained(i)).collect();
    for (idx, c) in field.coeffs.iter_mut().enumerate() {
        if !(keep[idx / (n * n)] && keep[(idx / n) % n] && keep[idx % n]) {
            *c = Complex64::default();
        }
    }
}

/// `box_length³ Σ_k |k|^{2·order} |coeff(k)|²`; order 0 is the L² norm squared.
pub fn sobolev_seminorm_sq(field: &SpectralField, order: f64) -> f64 {
    let grid = field.grid;
    let n = grid.n_points();
    let k = grid.axis_wavenumbers();
    let k_sq: Vec<f64> = k.iter().map(|v| v * v).collect();
    let integer = order.fract() == 0.0 && order.abs() < i32::MAX as f64;
    let weight = |ksq: f64| -> f64 {
        if order == 0.0 {
            1.0
        } else if integer {
            ksq.powi(order as i32)
        } else {
            ksq.powf(order)
        }
    };
    let mut total = 0.0;
    for i0 in 0..n {
        let mut plane = 0.0;
        for i1 in 0..n {
            let base = (i0 * n + i1) * n;
            let k01 = k_sq[i0] + k_sq[i1];
            let mut row = 0.0;
            for i2 in 0..n {
                let c = field.coeffs[base + i2];
                row += weight(k01 + k_sq[i2]) * c.norm_sqr();
            }
            plane += row;
        }
        total += plane;
    }
    total * grid.volume()
}
