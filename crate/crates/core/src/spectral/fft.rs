//! Three-dimensional complex FFT on the cubic lattice.
//!
//! Transforms run axis by axis with `rustfft`, batching contiguous lines and
//! transposing planes for the strided axes. When a field is known to be
//! dealiased the transforms skip lines that are identically zero on input
//! (inverse) or discarded on output (forward).

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Which spectral modes carry information.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    /// Every lattice mode.
    Full,
    /// Only modes with every axis index `|z| <= cutoff`.
    Dealiased(usize),
}

impl Band {
    fn runs(self, n: usize) -> Vec<Range<usize>> {
        match self {
            Band::Full => vec![0..n],
            Band::Dealiased(c) if 2 * c + 1 >= n => vec![0..n],
            Band::Dealiased(c) => vec![0..c + 1, n - c..n],
        }
    }

    /// Storage indices along one axis covered by the band.
    pub(crate) fn indices(self, n: usize) -> Vec<usize> {
        self.runs(n).into_iter().flatten().collect()
    }
}

pub struct Fft3d {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    plane: Vec<Complex64>,
    slab: Vec<Complex64>,
}

impl Fft3d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            plane: vec![Complex64::default(); n * n],
            slab: vec![Complex64::default(); n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Physical values to spectral coefficients, normalized by `1/n³` so the
    /// coefficient of a constant field equals that constant. With a
    /// dealiased band, modes outside the band are set to zero.
    pub fn forward(&mut self, data: &mut [Complex64], band: Band) {
        let n = self.n;
        let nn = n * n;
        assert_eq!(data.len(), nn * n);
        let runs = band.runs(n);
        let fft = Arc::clone(&self.forward);

        for i1 in 0..n {
            self.gather_axis0(data, i1);
            fft.process_with_scratch(&mut self.plane, &mut self.scratch);
            self.scatter_axis0(data, i1);
        }

        self.forward_planes(data, band);

        let scale = 1.0 / (nn * n) as f64;
        match band {
            Band::Full => data.iter_mut().for_each(|c| *c *= scale),
            Band::Dealiased(_) => {
                let mut keep = vec![false; n];
                for r in &runs {
                    keep[r.clone()].iter_mut().for_each(|k| *k = true);
                }
                for (i0, plane) in data.chunks_exact_mut(nn).enumerate() {
                    for (i1, row) in plane.chunks_exact_mut(n).enumerate() {
                        if keep[i0] && keep[i1] {
                            for (c, &k) in row.iter_mut().zip(&keep) {
                                if k {
                                    *c *= scale;
                                } else {
                                    *c = Complex64::default();
                                }
                            }
                        } else {
                            row.fill(Complex64::default());
                        }
                    }
                }
            }
        }
    }

    /// Spectral coefficients to physical values (no scaling). With a
    /// dealiased band, input modes outside the band are assumed zero.
    pub fn inverse(&mut self, data: &mut [Complex64], band: Band) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        self.inverse_planes(data, band);
        let fft = Arc::clone(&self.inverse);
        for i1 in 0..n {
            self.gather_axis0(data, i1);
            fft.process_with_scratch(&mut self.plane, &mut self.scratch);
            self.scatter_axis0(data, i1);
        }
    }

    /// Inverse transform along axes 2 and 1 of every plane `i0` in the band.
    pub(crate) fn inverse_planes(&mut self, data: &mut [Complex64], band: Band) {
        let n = self.n;
        let nn = n * n;
        let runs = band.runs(n);
        let fft = Arc::clone(&self.inverse);
        for r0 in &runs {
            for i0 in r0.clone() {
                let plane = &mut data[i0 * nn..(i0 + 1) * nn];
                for r1 in &runs {
                    fft.process_with_scratch(
                        &mut plane[r1.start * n..r1.end * n],
                        &mut self.scratch,
                    );
                }
                transpose(plane, &mut self.plane, n);
                fft.process_with_scratch(&mut self.plane, &mut self.scratch);
                transpose(&self.plane, plane, n);
            }
        }
    }

    /// Unnormalized forward transform along axes 2 and 1 of every plane
    /// `i0` in the band; only in-band axis-1 lines are transformed.
    pub(crate) fn forward_planes(&mut self, data: &mut [Complex64], band: Band) {
        let n = self.n;
        let nn = n * n;
        let runs = band.runs(n);
        let fft = Arc::clone(&self.forward);
        for r0 in &runs {
            for i0 in r0.clone() {
                let plane = &mut data[i0 * nn..(i0 + 1) * nn];
                fft.process_with_scratch(plane, &mut self.scratch);
                transpose(plane, &mut self.plane, n);
                for r in &runs {
                    fft.process_with_scratch(
                        &mut self.plane[r.start * n..r.end * n],
                        &mut self.scratch,
                    );
                }
                transpose(&self.plane, plane, n);
            }
        }
    }

    /// Axis-0 lines at fixed `i1`, as `slab[i2][i0]`.
    pub(crate) fn gather_slab(&mut self, data: &[Complex64], i1: usize, slab: &mut [Complex64]) {
        let n = self.n;
        for i0 in 0..n {
            let src = (i0 * n + i1) * n;
            self.slab[i0 * n..(i0 + 1) * n].copy_from_slice(&data[src..src + n]);
        }
        transpose(&self.slab, slab, n);
    }

    /// Writes rows `i0` of `slab[i2][i0]` back to `data` at fixed `i1`.
    pub(crate) fn scatter_slab(
        &mut self,
        slab: &[Complex64],
        i1: usize,
        data: &mut [Complex64],
        rows: &[usize],
    ) {
        let n = self.n;
        transpose(slab, &mut self.slab, n);
        for &i0 in rows {
            let dst = (i0 * n + i1) * n;
            data[dst..dst + n].copy_from_slice(&self.slab[i0 * n..(i0 + 1) * n]);
        }
    }

    /// In-place transforms of the contiguous length-`n` rows of `lines`.
    pub(crate) fn lines_inverse(&mut self, lines: &mut [Complex64]) {
        self.inverse.process_with_scratch(lines, &mut self.scratch);
    }

    pub(crate) fn lines_forward(&mut self, lines: &mut [Complex64]) {
        self.forward.process_with_scratch(lines, &mut self.scratch);
    }

    // plane[i2][i0] <- data[i0][i1][i2]
    fn gather_axis0(&mut self, data: &[Complex64], i1: usize) {
        let n = self.n;
        for i0 in 0..n {
            let src = (i0 * n + i1) * n;
            self.slab[i0 * n..(i0 + 1) * n].copy_from_slice(&data[src..src + n]);
        }
        transpose(&self.slab, &mut self.plane, n);
    }

    fn scatter_axis0(&mut self, data: &mut [Complex64], i1: usize) {
        let n = self.n;
        transpose(&self.plane, &mut self.slab, n);
        for i0 in 0..n {
            let dst = (i0 * n + i1) * n;
            data[dst..dst + n].copy_from_slice(&self.slab[i0 * n..(i0 + 1) * n]);
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 8;
    if n % BLOCK != 0 {
        for i in 0..n {
            for j in 0..n {
                dst[j * n + i] = src[i * n + j];
            }
        }
        return;
    }
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..ib + BLOCK {
                let row = &src[i * n + jb..i * n + jb + BLOCK];
                for (dj, v) in row.iter().enumerate() {
                    dst[(jb + dj) * n + i] = *v;
                }
            }
        }
    }
}

thread_local! {
    static ENGINES: RefCell<HashMap<usize, Fft3d>> = RefCell::new(HashMap::new());
}

/// Run `f` with this thread's cached transform engine for lattice size `n`.
pub fn with_engine<R>(n: usize, f: impl FnOnce(&mut Fft3d) -> R) -> R {
    ENGINES.with(|cell| {
        let mut map = cell.borrow_mut();
        let engine = map.entry(n).or_insert_with(|| Fft3d::new(n));
        f(engine)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(data: &[Complex64], n: usize, sign: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n * n];
        for k0 in 0..n {
            for k1 in 0..n {
                for k2 in 0..n {
                    let mut acc = Complex64::default();
                    for x0 in 0..n {
                        for x1 in 0..n {
                            for x2 in 0..n {
                                let phase =
                                    sign * 2.0 * PI * ((k0 * x0 + k1 * x1 + k2 * x2) % n) as f64
                                        / n as f64;
                                acc += data[(x0 * n + x1) * n + x2]
                                    * Complex64::from_polar(1.0, phase);
                            }
                        }
                    }
                    out[(k0 * n + k1) * n + k2] = acc;
                }
            }
        }
        out
    }

    fn pseudo_random(len: usize) -> Vec<Complex64> {
        let mut state = 0x2545_f491_4f6c_dd1du64;
        (0..len)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let a = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let b = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                Complex64::new(a, b)
            })
            .collect()
    }

    #[test]
    fn full_transforms_match_naive_dft() {
        let n = 8;
        let input = pseudo_random(n * n * n);
        let mut fwd = input.clone();
        let mut engine = Fft3d::new(n);
        engine.forward(&mut fwd, Band::Full);
        let expect = naive_dft(&input, n, -1.0);
        for (a, b) in fwd.iter().zip(&expect) {
            assert!((a - b / 512.0).norm() < 1e-13);
        }
        let mut inv = input.clone();
        engine.inverse(&mut inv, Band::Full);
        let expect = naive_dft(&input, n, 1.0);
        for (a, b) in inv.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn pruned_inverse_matches_full_on_banded_input() {
        let n = 12;
        let c = 3;
        let mut input = pseudo_random(n * n * n);
        let inband = |i: usize| i <= c || i >= n - c;
        for (idx, v) in input.iter_mut().enumerate() {
            if !(inband(idx / (n * n)) && inband((idx / n) % n) && inband(idx % n)) {
                *v = Complex64::default();
            }
        }
        let mut engine = Fft3d::new(n);
        let mut full = input.clone();
        engine.inverse(&mut full, Band::Full);
        let mut pruned = input;
        engine.inverse(&mut pruned, Band::Dealiased(c));
        for (a, b) in full.iter().zip(&pruned) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn pruned_forward_matches_full_inside_band() {
        let n = 12;
        let c = 3;
        let input = pseudo_random(n * n * n);
        let mut engine = Fft3d::new(n);
        let mut full = input.clone();
        engine.forward(&mut full, Band::Full);
        let mut pruned = input;
        engine.forward(&mut pruned, Band::Dealiased(c));
        let inband = |i: usize| i <= c || i >= n - c;
        for (idx, (a, b)) in full.iter().zip(&pruned).enumerate() {
            if inband(idx / (n * n)) && inband((idx / n) % n) && inband(idx % n) {
                assert!((a - b).norm() < 1e-15);
            } else {
                assert_eq!(*b, Complex64::default());
            }
        }
    }
}
