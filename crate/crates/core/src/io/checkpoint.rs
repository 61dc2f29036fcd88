//! Binary checkpoints.
//!
//! Little-endian layout: magic `OLD1`, format version `u32`, `n_points`
//! `u32`, then `box_length`, `mu`, `nu`, `time` as `f64`, then the twelve
//! components `u1..u3, F11..F33` each as `n³` interleaved `(re, im)` pairs
//! in lattice order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};
use crate::system::{PhysParams, State};

pub const MAGIC: &[u8; 4] = b"OLD1";
pub const FORMAT_VERSION: u32 = 1;
/// Largest accepted `|c(k) − conj c(−k)|` relative to the component's
/// largest coefficient.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

const HEADER_LEN: usize = 4 + 4 + 4 + 4 * 8;

pub fn checkpoint_write(path: &Path, state: &State, params: &PhysParams) -> Result<()> {
    let grid = state.grid();
    let n = u32::try_from(grid.n_points()).map_err(|_| Error::Checkpoint {
        path: path.into(),
        reason: "n_points does not fit in u32".into(),
    })?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    // write-then-rename keeps the previous checkpoint intact on failure
    let tmp = path.with_extension("partial");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&n.to_le_bytes())?;
        for v in [grid.box_length(), params.mu, params.nu, state.time] {
            out.write_all(&v.to_le_bytes())?;
        }
        for field in state.fields() {
            for c in field.coeffs() {
                out.write_all(&c.re.to_le_bytes())?;
                out.write_all(&c.im.to_le_bytes())?;
            }
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_read(path: &Path) -> Result<(State, PhysParams)> {
    let fail = |reason: String| Error::Checkpoint {
        path: path.into(),
        reason,
    };
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!(
            "truncated header: {} of {HEADER_LEN} bytes",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(fail(format!("bad magic {:?}", &bytes[..4])));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let real = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let n = word(8) as usize;
    let [box_length, mu, nu, time] = std::array::from_fn(|i| real(12 + 8 * i));
    let grid = Grid::new(n, box_length).map_err(|e| fail(e.to_string()))?;
    let params = PhysParams::new(mu, nu).map_err(|e| fail(e.to_string()))?;
    let block = grid.len() * 16;
    let expected = HEADER_LEN + 12 * block;
    if bytes.len() != expected {
        let what = if bytes.len() < expected {
            "truncated"
        } else {
            "trailing bytes"
        };
        return Err(fail(format!(
            "{what}: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut fields = Vec::with_capacity(12);
    for (slot, chunk) in bytes[HEADER_LEN..].chunks_exact(block).enumerate() {
        let coeffs: Vec<Complex64> = chunk
            .chunks_exact(16)
            .map(|p| {
                Complex64::new(
                    f64::from_le_bytes(p[..8].try_into().unwrap()),
                    f64::from_le_bytes(p[8..].try_into().unwrap()),
                )
            })
            .collect();
        let field = SpectralField::from_coeffs(grid, coeffs)?;
        let scale = field.max_abs();
        let deviation = field.hermitian_deviation();
        if !(deviation <= SYMMETRY_TOLERANCE * scale) && deviation > 0.0 {
            return Err(fail(format!(
                "component {slot} breaks hermitian symmetry: {}",
                Error::HermitianViolation {
                    deviation,
                    tolerance: SYMMETRY_TOLERANCE * scale,
                }
            )));
        }
        fields.push(field);
    }
    let mut it = fields.into_iter();
    let u = std::array::from_fn(|_| it.next().unwrap());
    let f = std::array::from_fn(|_| it.next().unwrap());
    Ok((State::new(time, u, f)?, params))
}
