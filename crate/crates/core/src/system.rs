//! Right-hand side of the damped Oldroyd system in spectral space.
//!
//! The deformation tensor is stored row-major, `f[3 i + j] = F_ij`; column
//! `F·j` is the vector `(F_1j, F_2j, F_3j)`. The stretching term uses
//! `(F·j·∇u)_i = Σ_k F_kj ∂_k u_i`.
//!
//! [`compute_rhs`] evaluates the nonlinear terms in divergence form,
//!
//! ```text
//! du_i  = −P[∂_k (u_i u_k − Σ_j F_ij F_kj)]
//! dF_ij = ∂_k (F_kj u_i − u_k F_ij)
//! ```
//!
//! which equals the convective form `−u·∇u + Σ_j F·j·∇F·j`,
//! `−u·∇F·j + F·j·∇u` whenever `div u = 0` and `div Fᵀ = 0`. Both
//! constraints hold to roundoff along the discrete flow, and
//! [`convective_terms`] evaluates the convective form directly for
//! diagnostics and cross-checks. All products are formed pointwise on the
//! lattice from dealiased fields and dealiased again afterwards.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{
    forward_pair, gradient, inverse_pair, leray_project_in_place, with_engine, Band, Grid,
    SpectralField, SpectrumProfile, VectorField,
};

pub type TensorField = [SpectralField; 9];

/// Index of `F_ij` in the row-major tensor storage.
#[inline]
pub fn f_index(i: usize, j: usize) -> usize {
    3 * i + j
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysParams {
    /// Kinematic viscosity.
    pub mu: f64,
    /// Damping coefficient of the deformation tensor.
    pub nu: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self { mu: 1.0, nu: 1.0 }
    }
}

impl PhysParams {
    pub fn new(mu: f64, nu: f64) -> Result<Self> {
        let p = Self { mu, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::InvalidParameter {
                name: "params.mu".into(),
                reason: format!("must be > 0, got {}", self.mu),
            });
        }
        if !(self.nu.is_finite() && self.nu >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "params.nu".into(),
                reason: format!("must be >= 0, got {}", self.nu),
            });
        }
        Ok(())
    }
}

/// Simulation time plus spectral velocity and deformation tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub u: VectorField,
    pub f: TensorField,
}

impl State {
    pub fn new(time: f64, u: VectorField, f: TensorField) -> Result<Self> {
        let grid = *u[0].grid();
        if u.iter().chain(f.iter()).any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { time, u, f })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            time: 0.0,
            u: std::array::from_fn(|_| SpectralField::zeros(grid)),
            f: std::array::from_fn(|_| SpectralField::zeros(grid)),
        }
    }

    /// Initial data at `t = 0` from two random spectrum profiles.
    pub fn from_profiles(
        grid: Grid,
        u_profile: &SpectrumProfile,
        f_profile: &SpectrumProfile,
    ) -> Result<Self> {
        let u = crate::spectral::make_divfree_random_field(&grid, u_profile)?;
        let f = crate::spectral::make_divfree_random_tensor(&grid, f_profile)?;
        Self::new(0.0, u, f)
    }

    pub fn grid(&self) -> &Grid {
        self.u[0].grid()
    }

    /// The twelve components `u₁..u₃, F₁₁..F₃₃` in storage order.
    pub fn fields(&self) -> impl Iterator<Item = &SpectralField> {
        self.u.iter().chain(self.f.iter())
    }

    pub fn fields_mut(&mut self) -> impl Iterator<Item = &mut SpectralField> {
        self.u.iter_mut().chain(self.f.iter_mut())
    }

    /// Column `F·j` as a vector field.
    pub fn column(&self, j: usize) -> VectorField {
        std::array::from_fn(|i| self.f[f_index(i, j)].clone())
    }

    pub fn l2_u_sq(&self) -> f64 {
        self.u.iter().map(|c| c.l2_norm_sq()).sum()
    }

    pub fn l2_f_sq(&self) -> f64 {
        self.f.iter().map(|c| c.l2_norm_sq()).sum()
    }

    /// `‖u‖² + ‖F‖²`.
    pub fn energy(&self) -> f64 {
        self.l2_u_sq() + self.l2_f_sq()
    }

    pub fn ensure_same_grid(&self, other: &State) -> Result<()> {
        if self.grid() == other.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Nonlinear tendencies. The stiff linear parts `−μ|k|²û` and `−νF̂` are
/// left to the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub du: VectorField,
    pub df: TensorField,
}

impl Tendency {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            du: std::array::from_fn(|_| SpectralField::zeros(grid)),
            df: std::array::from_fn(|_| SpectralField::zeros(grid)),
        }
    }

    pub fn fields(&self) -> impl Iterator<Item = &SpectralField> {
        self.du.iter().chain(self.df.iter())
    }
}

fn band(grid: &Grid) -> Band {
    Band::Dealiased(grid.dealias_cutoff())
}

const COMPONENT_NAMES: [&str; 12] = [
    "u1", "u2", "u3", "F11", "F12", "F13", "F21", "F22", "F23", "F31", "F32", "F33",
];

fn ensure_finite(values: &[f64], field: &str, time: f64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            field: field.to_string(),
            step: 0,
            time,
        })
    }
}

// Symmetric pairs (i, k) with i <= k and antisymmetric pairs with i < k.
const SYM: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
const ANTI: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Reusable buffers for [`compute_rhs_into`], so repeated evaluations on one
/// grid do not allocate.
///
/// The twelve state components are packed in pairs into six complex
/// lattices and the fifteen independent flux components into eight. The
/// axis-0 transforms, the pointwise products and the return transforms run
/// one `i1` slab at a time, so the lattice values are never stored whole.
pub struct RhsWorkspace {
    grid: Grid,
    inputs: Vec<Vec<Complex64>>,
    outputs: Vec<Vec<Complex64>>,
    slab_in: Vec<Vec<Complex64>>,
    slab_out: Vec<Vec<Complex64>>,
}

impl RhsWorkspace {
    pub fn new(grid: Grid) -> Self {
        let len = grid.len();
        let plane = grid.n_points() * grid.n_points();
        let zeros = |count: usize, size: usize| vec![vec![Complex64::default(); size]; count];
        Self {
            grid,
            inputs: zeros(6, len),
            outputs: zeros(8, len),
            slab_in: zeros(6, plane),
            slab_out: zeros(8, plane),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Packs `(c[2p], c[2p+1])` as `c[2p] + i c[2p+1]`, keeping retained
    /// modes, and reports the first component with a non-finite coefficient.
    fn pack(&mut self, state: &State) -> Result<()> {
        let n = self.grid.n_points();
        let retained: Vec<bool> = (0..n).map(|i| self.grid.is_retained(i)).collect();
        let comps: Vec<&[Complex64]> = state.fields().map(|c| c.coeffs()).collect();
        let mut probe = [Complex64::default(); 12];
        for (p, buf) in self.inputs.iter_mut().enumerate() {
            let (a, b) = (comps[2 * p], comps[2 * p + 1]);
            let (mut probe_a, mut probe_b) = (Complex64::default(), Complex64::default());
            for i0 in (0..n).filter(|&i| retained[i]) {
                for i1 in 0..n {
                    let base = (i0 * n + i1) * n;
                    let row = &mut buf[base..base + n];
                    if !retained[i1] {
                        row.fill(Complex64::default());
                        continue;
                    }
                    for (i2, out) in row.iter_mut().enumerate() {
                        *out = if retained[i2] {
                            let (x, y) = (a[base + i2], b[base + i2]);
                            probe_a += x * 0.0;
                            probe_b += y * 0.0;
                            Complex64::new(x.re - y.im, x.im + y.re)
                        } else {
                            Complex64::default()
                        };
                    }
                }
            }
            probe[2 * p] = probe_a;
            probe[2 * p + 1] = probe_b;
        }
        if let Some(c) = probe
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                field: COMPONENT_NAMES[c].to_string(),
                step: 0,
                time: state.time,
            });
        }
        Ok(())
    }

    /// Lattice products for every slab, transformed back to Fourier space
    /// (unnormalized) in `outputs`.
    fn products(&mut self, time: f64) -> Result<()> {
        let grid = self.grid;
        let n = grid.n_points();
        let b = band(&grid);
        let kept = grid.retained_indices();
        let mut bad_state = 0u16;
        with_engine(n, |e| {
            for buf in self.inputs.iter_mut() {
                e.inverse_planes(buf, b);
            }
            for i1 in 0..n {
                for (buf, slab) in self.inputs.iter().zip(self.slab_in.iter_mut()) {
                    e.gather_slab(buf, i1, slab);
                    e.lines_inverse(slab);
                }
                bad_state |= pointwise_products(&self.slab_in, &mut self.slab_out);
                for (slab, buf) in self.slab_out.iter_mut().zip(self.outputs.iter_mut()) {
                    e.lines_forward(slab);
                    e.scatter_slab(slab, i1, buf, &kept);
                }
            }
            for buf in self.outputs.iter_mut() {
                e.forward_planes(buf, b);
            }
        });
        if bad_state != 0 {
            let first = bad_state.trailing_zeros() as usize;
            return Err(Error::NonFinite {
                field: COMPONENT_NAMES[first].to_string(),
                step: 0,
                time,
            });
        }
        Ok(())
    }
}

/// Fifteen flux products from the twelve packed lattice values of one slab:
/// `T_ik = u_i u_k − Σ_j F_ij F_kj` (symmetric, slots 0..6) and
/// `A^(j)_ik = F_kj u_i − u_k F_ij` (i < k, slots 6 + 3j..). Returns a bit
/// mask of components holding non-finite values.
fn pointwise_products(slab_in: &[Vec<Complex64>], slab_out: &mut [Vec<Complex64>]) -> u16 {
    let len = slab_in[0].len();
    // NaN and ±∞ survive multiplication by zero; finite values do not.
    let mut probe = [0.0f64; 12];
    for x in 0..len {
        let mut v = [0.0f64; 12];
        for p in 0..6 {
            let c = slab_in[p][x];
            v[2 * p] = c.re;
            v[2 * p + 1] = c.im;
        }
        for (acc, val) in probe.iter_mut().zip(&v) {
            *acc += val * 0.0;
        }
        let u = [v[0], v[1], v[2]];
        let f = |i: usize, j: usize| v[3 + f_index(i, j)];
        let mut out = [0.0f64; 16];
        for (slot, &(i, k)) in SYM.iter().enumerate() {
            out[slot] = u[i] * u[k] - (f(i, 0) * f(k, 0) + f(i, 1) * f(k, 1) + f(i, 2) * f(k, 2));
        }
        for j in 0..3 {
            for (slot, &(i, k)) in ANTI.iter().enumerate() {
                out[6 + 3 * j + slot] = f(k, j) * u[i] - u[k] * f(i, j);
            }
        }
        for (q, slab) in slab_out.iter_mut().enumerate() {
            slab[x] = Complex64::new(out[2 * q], out[2 * q + 1]);
        }
    }
    probe
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_finite())
        .fold(0u16, |mask, (c, _)| mask | (1 << c))
}

/// Physical-space values of `u` and `F` on the lattice.
pub(crate) struct PhysicalState {
    pub u: [Vec<f64>; 3],
    pub f: [Vec<f64>; 9],
}

pub(crate) fn to_physical(state: &State) -> Result<PhysicalState> {
    let b = band(state.grid());
    let comps: Vec<&SpectralField> = state.fields().collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(12);
    for pair in comps.chunks(2) {
        let (a, c) = inverse_pair(pair[0], Some(pair[1]), b)?;
        out.push(a);
        out.push(c);
    }
    for (v, name) in out.iter().zip(COMPONENT_NAMES) {
        ensure_finite(v, name, state.time)?;
    }
    let mut it = out.into_iter();
    let u = std::array::from_fn(|_| it.next().unwrap());
    let f = std::array::from_fn(|_| it.next().unwrap());
    Ok(PhysicalState { u, f })
}

fn forward_many(grid: &Grid, arrays: &[Vec<f64>], b: Band) -> Result<Vec<SpectralField>> {
    let mut out = Vec::with_capacity(arrays.len());
    for pair in arrays.chunks(2) {
        if pair.len() == 2 {
            let (x, y) = forward_pair(&pair[0], &pair[1], grid, b)?;
            out.push(x);
            out.push(y);
        } else {
            out.push(forward_pair(&pair[0], &pair[0], grid, b)?.0);
        }
    }
    Ok(out)
}

/// Spectral momentum flux `T = u⊗u − F Fᵀ` in the order of `SYM`.
fn momentum_flux(state: &State) -> Result<Vec<SpectralField>> {
    let grid = *state.grid();
    let phys = to_physical(state)?;
    let flux: Vec<Vec<f64>> = SYM
        .iter()
        .map(|&(i, k)| {
            (0..grid.len())
                .map(|x| {
                    let mut v = phys.u[i][x] * phys.u[k][x];
                    for j in 0..3 {
                        v -= phys.f[f_index(i, j)][x] * phys.f[f_index(k, j)][x];
                    }
                    v
                })
                .collect()
        })
        .collect();
    for v in &flux {
        ensure_finite(v, "nonlinear flux", state.time)?;
    }
    forward_many(&grid, &flux, band(&grid))
}

/// Nonlinear tendencies of the system; zero when `include_nonlinear` is off.
pub fn compute_rhs(
    state: &State,
    params: &PhysParams,
    include_nonlinear: bool,
) -> Result<Tendency> {
    let mut out = Tendency::zeros(*state.grid());
    let mut ws = RhsWorkspace::new(*state.grid());
    compute_rhs_into(state, params, include_nonlinear, &mut ws, &mut out)?;
    Ok(out)
}

/// [`compute_rhs`] with caller-owned workspace and output on the state's grid.
pub fn compute_rhs_into(
    state: &State,
    params: &PhysParams,
    include_nonlinear: bool,
    ws: &mut RhsWorkspace,
    out: &mut Tendency,
) -> Result<()> {
    params.validate()?;
    let grid = *state.grid();
    if *ws.grid() != grid
        || state
            .fields()
            .chain(out.fields())
            .any(|c| *c.grid() != grid)
    {
        return Err(Error::GridMismatch);
    }
    if !include_nonlinear {
        for c in out.du.iter_mut().chain(out.df.iter_mut()) {
            c.coeffs_mut().fill(Complex64::default());
        }
        return Ok(());
    }
    ws.pack(state)?;
    ws.products(state.time)?;

    let n = grid.n_points();
    let scale = 1.0 / grid.len() as f64;
    let k_axis = grid.axis_wavenumbers();
    let mirror: Vec<usize> = (0..n).map(|i| grid.mirror_index(i)).collect();
    let retained: Vec<bool> = (0..n).map(|i| grid.is_retained(i)).collect();
    let kept = grid.retained_indices();
    let c = grid.dealias_cutoff();
    let zero = Complex64::default();
    let packed = &ws.outputs;
    let [du0, du1, du2] = &mut out.du;
    let mut du: [&mut [Complex64]; 3] = [du0.coeffs_mut(), du1.coeffs_mut(), du2.coeffs_mut()];
    let mut df: Vec<&mut [Complex64]> = out.df.iter_mut().map(|c| c.coeffs_mut()).collect();
    let clear = |row: &mut [Complex64]| {
        if row.iter().any(|v| *v != zero) {
            row.fill(zero);
        }
    };
    // i z
    let times_i = |z: Complex64| Complex64::new(-z.im, z.re);
    let mut flux = [zero; 16];
    for i0 in 0..n {
        for i1 in 0..n {
            let base = (i0 * n + i1) * n;
            if !(retained[i0] && retained[i1]) {
                for comp in du.iter_mut().chain(df.iter_mut()) {
                    clear(&mut comp[base..base + n]);
                }
                continue;
            }
            for comp in du.iter_mut().chain(df.iter_mut()) {
                clear(&mut comp[base + c + 1..base + n - c]);
            }
            let mbase = (mirror[i0] * n + mirror[i1]) * n;
            for &i2 in &kept {
                let idx = base + i2;
                let midx = mbase + mirror[i2];
                for (q, buf) in packed.iter().enumerate() {
                    let a = buf[idx] * scale;
                    let m = buf[midx].conj() * scale;
                    flux[2 * q] = 0.5 * (a + m);
                    let d = 0.5 * (a - m);
                    // (a - m) / (2i)
                    flux[2 * q + 1] = Complex64::new(d.im, -d.re);
                }
                let [k0, k1, k2] = [k_axis[i0], k_axis[i1], k_axis[i2]];
                let [t00, t01, t02, t11, t12, t22] =
                    [flux[0], flux[1], flux[2], flux[3], flux[4], flux[5]];
                // −i k_k T̂_ik, projected onto k⊥
                let mut r = [
                    -times_i(k0 * t00 + k1 * t01 + k2 * t02),
                    -times_i(k0 * t01 + k1 * t11 + k2 * t12),
                    -times_i(k0 * t02 + k1 * t12 + k2 * t22),
                ];
                let k_sq = k0 * k0 + k1 * k1 + k2 * k2;
                if k_sq > 0.0 {
                    let s = (k0 * r[0] + k1 * r[1] + k2 * r[2]) / k_sq;
                    r[0] -= k0 * s;
                    r[1] -= k1 * s;
                    r[2] -= k2 * s;
                } else {
                    r = [zero; 3];
                }
                for (comp, value) in du.iter_mut().zip(r) {
                    comp[idx] = value;
                }
                // i k_k Â^(j)_ik with Â_ki = −Â_ik
                for j in 0..3 {
                    let [a01, a02, a12] = [flux[6 + 3 * j], flux[7 + 3 * j], flux[8 + 3 * j]];
                    let column = if k_sq > 0.0 {
                        [
                            times_i(k1 * a01 + k2 * a02),
                            times_i(k2 * a12 - k0 * a01),
                            times_i(-k0 * a02 - k1 * a12),
                        ]
                    } else {
                        [zero; 3]
                    };
                    for (i, value) in column.into_iter().enumerate() {
                        df[f_index(i, j)][idx] = value;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Convective-form nonlinear terms, each dealiased:
/// `FFT(u·∇u)`, `FFT(Σ_j F·j·∇F·j)`, `FFT(u·∇F·j)` and `FFT(F·j·∇u)`
/// (the last two stored row-major like `F`).
#[derive(Debug, Clone)]
pub struct ConvectiveTerms {
    pub advect_u: VectorField,
    pub stretch_ff: VectorField,
    pub advect_f: TensorField,
    pub stretch_fu: TensorField,
}

pub fn convective_terms(state: &State) -> Result<ConvectiveTerms> {
    let grid = *state.grid();
    let b = band(&grid);
    let len = grid.len();
    let phys = to_physical(state)?;

    let mut grads: Vec<&SpectralField> = Vec::new();
    let mut owned: Vec<SpectralField> = Vec::with_capacity(36);
    for comp in state.fields() {
        for axis in 0..3 {
            owned.push(gradient(comp, axis)?);
        }
    }
    grads.extend(owned.iter());
    let mut dphys: Vec<Vec<f64>> = Vec::with_capacity(36);
    for pair in grads.chunks(2) {
        let (a, c) = inverse_pair(pair[0], pair.get(1).copied(), b)?;
        dphys.push(a);
        if pair.len() > 1 {
            dphys.push(c);
        }
    }
    // ∂_a u_i at 3 i + a; ∂_a F_ij at 9 + 3 (3 i + j) + a
    let du = |i: usize, a: usize| &dphys[3 * i + a];
    let df = |i: usize, j: usize, a: usize| &dphys[9 + 3 * f_index(i, j) + a];

    let mut arrays: Vec<Vec<f64>> = vec![vec![0.0; len]; 24];
    for x in 0..len {
        for i in 0..3 {
            let mut adv = 0.0;
            let mut ff = 0.0;
            for k in 0..3 {
                adv += phys.u[k][x] * du(i, k)[x];
                for j in 0..3 {
                    ff += phys.f[f_index(k, j)][x] * df(i, j, k)[x];
                }
            }
            arrays[i][x] = adv;
            arrays[3 + i][x] = ff;
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut adv = 0.0;
                let mut st = 0.0;
                for k in 0..3 {
                    adv += phys.u[k][x] * df(i, j, k)[x];
                    st += phys.f[f_index(k, j)][x] * du(i, k)[x];
                }
                arrays[6 + f_index(i, j)][x] = adv;
                arrays[15 + f_index(i, j)][x] = st;
            }
        }
    }
    for v in &arrays {
        ensure_finite(v, "convective product", state.time)?;
    }
    let mut spec = forward_many(&grid, &arrays, b)?.into_iter();
    let mut take3 = || -> VectorField { std::array::from_fn(|_| spec.next().unwrap()) };
    let advect_u = take3();
    let stretch_ff = take3();
    let mut spec_rest: Vec<SpectralField> = Vec::new();
    for _ in 0..6 {
        spec_rest.extend(take3());
    }
    let mut rest = spec_rest.into_iter();
    let advect_f = std::array::from_fn(|_| rest.next().unwrap());
    let stretch_fu = std::array::from_fn(|_| rest.next().unwrap());
    Ok(ConvectiveTerms {
        advect_u,
        stretch_ff,
        advect_f,
        stretch_fu,
    })
}

/// Nonlinear tendency assembled from the convective form:
/// `du = P(−u·∇u + Σ_j F·j·∇F·j)`, `dF·j = −u·∇F·j + F·j·∇u`.
pub fn compute_rhs_convective(state: &State) -> Result<Tendency> {
    let terms = convective_terms(state)?;
    let grid = *state.grid();
    let mut tend = Tendency::zeros(grid);
    for i in 0..3 {
        tend.du[i] = terms.stretch_ff[i].clone();
        tend.du[i].add_scaled(-1.0, &terms.advect_u[i])?;
    }
    leray_project_in_place(&mut tend.du)?;
    for c in 0..9 {
        tend.df[c] = terms.stretch_fu[c].clone();
        tend.df[c].add_scaled(-1.0, &terms.advect_f[c])?;
    }
    for c in tend.du.iter_mut().chain(tend.df.iter_mut()) {
        c.coeffs_mut()[0] = Complex64::default();
    }
    Ok(tend)
}

/// `⟨a, b⟩ = V Σ_k a(k) conj(b(k))`, the spectral form of `∫ a b dx`.
pub fn inner_product(a: &SpectralField, b: &SpectralField) -> Complex64 {
    let mut acc = Complex64::default();
    for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
        acc += x * y.conj();
    }
    acc * a.grid().volume()
}

/// Real parts of the three nonlinear energy-exchange sums, each divided by
/// its Cauchy–Schwarz scale: `⟨u·∇u, u⟩`, `Σ_j ⟨u·∇F·j, F·j⟩` and
/// `Σ_j ⟨F·j·∇F·j, u⟩ + Σ_j ⟨F·j·∇u, F·j⟩`.
pub fn energy_exchange_residuals(state: &State) -> Result<[f64; 3]> {
    let t = convective_terms(state)?;
    let sum = |pairs: &[(&SpectralField, &SpectralField)]| -> (f64, f64) {
        let mut value = 0.0;
        let mut scale = 0.0;
        for (a, b) in pairs {
            value += inner_product(a, b).re;
            scale += (a.l2_norm_sq() * b.l2_norm_sq()).sqrt();
        }
        (value, scale)
    };
    let rel = |(v, s): (f64, f64)| if s == 0.0 { 0.0 } else { v.abs() / s };
    let adv_u: Vec<_> = (0..3).map(|i| (&t.advect_u[i], &state.u[i])).collect();
    let adv_f: Vec<_> = (0..9).map(|c| (&t.advect_f[c], &state.f[c])).collect();
    let mut coupling: Vec<_> = (0..3).map(|i| (&t.stretch_ff[i], &state.u[i])).collect();
    coupling.extend((0..9).map(|c| (&t.stretch_fu[c], &state.f[c])));
    Ok([rel(sum(&adv_u)), rel(sum(&adv_f)), rel(sum(&coupling))])
}

/// Pressure from the Poisson problem `Δp = −∂_i∂_k(u_i u_k) + ∂_i∂_k (F Fᵀ)_ik`,
/// with zero mean.
pub fn solve_pressure(state: &State) -> Result<SpectralField> {
    let grid = *state.grid();
    let flux = momentum_flux(state)?;
    let n = grid.n_points();
    let k = grid.axis_wavenumbers();
    let mut p = SpectralField::zeros(grid);
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = (i0 * n + i1) * n + i2;
                let kv = [k[i0], k[i1], k[i2]];
                let k_sq = kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2];
                if k_sq == 0.0 {
                    continue;
                }
                let mut acc = Complex64::default();
                for (slot, &(i, j)) in SYM.iter().enumerate() {
                    let w = if i == j { 1.0 } else { 2.0 };
                    acc += w * kv[i] * kv[j] * flux[slot].coeffs()[idx];
                }
                p.coeffs_mut()[idx] = -acc / k_sq;
            }
        }
    }
    Ok(p)
}

/// Normalized constraint residuals `(div u, div Fᵀ)`: the largest
/// `|k·û(k)|` over the largest `|û(k)|`, and the largest
/// `|Σ_j k_j F̂_ji(k)|` over the largest `|F̂(k)|` (Frobenius per mode).
/// A zero field has residual 0.
pub fn divergence_residuals(state: &State) -> (f64, f64) {
    let grid = *state.grid();
    let n = grid.n_points();
    let k = grid.axis_wavenumbers();
    let mut div_u = 0.0f64;
    let mut max_u = 0.0f64;
    let mut div_f = 0.0f64;
    let mut max_f = 0.0f64;
    for i0 in 0..n {
        for i1 in 0..n {
            for i2 in 0..n {
                let idx = (i0 * n + i1) * n + i2;
                let kv = [k[i0], k[i1], k[i2]];
                let u: [Complex64; 3] = std::array::from_fn(|i| state.u[i].coeffs()[idx]);
                let d = kv[0] * u[0] + kv[1] * u[1] + kv[2] * u[2];
                div_u = div_u.max(d.norm());
                max_u = max_u.max(u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
                let mut frob = 0.0;
                for i in 0..3 {
                    let mut d = Complex64::default();
                    for j in 0..3 {
                        let c = state.f[f_index(j, i)].coeffs()[idx];
                        d += kv[j] * c;
                        frob += c.norm_sqr();
                    }
                    div_f = div_f.max(d.norm());
                }
                max_f = max_f.max(frob.sqrt());
            }
        }
    }
    let norm = |d: f64, m: f64| if m == 0.0 { 0.0 } else { d / m };
    (norm(div_u, max_u), norm(div_f, max_f))
}

/// Largest pointwise `|u(x)|` and `|F(x)|` (Frobenius) on the lattice.
pub fn physical_max_magnitudes(state: &State) -> Result<(f64, f64)> {
    let phys = to_physical(state)?;
    let len = state.grid().len();
    let mut mu = 0.0f64;
    let mut mf = 0.0f64;
    for x in 0..len {
        let su: f64 = phys.u.iter().map(|c| c[x] * c[x]).sum();
        let sf: f64 = phys.f.iter().map(|c| c[x] * c[x]).sum();
        mu = mu.max(su);
        mf = mf.max(sf);
    }
    Ok((mu.sqrt(), mf.sqrt()))
}
