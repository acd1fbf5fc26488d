//! Radix-2 decimation-in-time 2D FFT.
//!
//! A transform of an `[nx, ny, batch..]` array is split into kernel passes:
//! one permutation pass that bit-reverses both axes at once (out of place,
//! input to output), then `log2(nx)` butterfly passes along axis 0 and
//! `log2(ny)` along axis 1, all in place on the output. Reversing rows and
//! columns together is valid because the axis-0 transforms treat rows
//! independently, so relabelling rows first changes nothing.
//!
//! The forward transform is unnormalized; the inverse scales by `1/(nx*ny)`,
//! applied as `1/n` on the last butterfly stage of each axis.

use std::f64::consts::PI;

use num_complex::Complex32;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Direction::Forward),
            "inverse" => Ok(Direction::Inverse),
            other => Err(Error::InvalidParams(format!("direction must be forward or inverse, got `{other}`"))),
        }
    }
}

/// Twiddles `exp(-2*pi*i*k/n)` for `k < n/2` and the bit-reversal permutation
/// for one axis length.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisPlan {
    pub n: usize,
    pub twiddles: Vec<Complex32>,
    pub bit_reversal: Vec<u32>,
}

impl AxisPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() || n > u32::MAX as usize {
            return Err(Error::ShapeMismatch(format!("FFT length {n} is not a power of two")));
        }
        let bits = n.trailing_zeros();
        let bit_reversal = (0..n as u32)
            .map(|k| if bits == 0 { 0 } else { k.reverse_bits() >> (32 - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex32::new(angle.cos() as f32, angle.sin() as f32)
            })
            .collect();
        Ok(AxisPlan { n, twiddles, bit_reversal })
    }

    pub fn stages(&self) -> u32 {
        self.n.trailing_zeros()
    }
}

/// Baked tables for one `(nx, ny)` shape. Direction-independent.
#[derive(Clone, Debug, PartialEq)]
pub struct FftPlan {
    pub x: AxisPlan,
    pub y: AxisPlan,
}

impl FftPlan {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        Ok(FftPlan { x: AxisPlan::new(nx)?, y: AxisPlan::new(ny)? })
    }

    pub fn plane(&self) -> usize {
        self.x.n * self.y.n
    }

    /// Parameter blocks of every pass, in launch order.
    pub fn passes(&self, direction: Direction) -> Vec<PassParams> {
        let inverse = direction == Direction::Inverse;
        let (nx, ny) = (self.x.n as u32, self.y.n as u32);
        let mut passes = vec![PassParams {
            kind: PassKind::Permute,
            nx,
            ny,
            inverse,
            scale: 1.0,
            table: PassTable::Permutation {
                x: self.x.bit_reversal.clone(),
                y: self.y.bit_reversal.clone(),
            },
        }];
        for (axis, plan) in [(0u32, &self.x), (1u32, &self.y)] {
            let mut half = 1u32;
            while (half as usize) < plan.n {
                let last = 2 * half as usize == plan.n;
                passes.push(PassParams {
                    kind: PassKind::Butterfly { axis, half },
                    nx,
                    ny,
                    inverse,
                    scale: if inverse && last { 1.0 / plan.n as f32 } else { 1.0 },
                    table: PassTable::Twiddles(plan.twiddles.clone()),
                });
                half *= 2;
            }
        }
        passes
    }

    /// Host-side transform of every `nx*ny` plane in `data`, running the same
    /// passes the kernels run.
    pub fn transform(&self, data: &mut [Complex32], direction: Direction) -> Result<()> {
        let plane = self.plane();
        if !data.len().is_multiple_of(plane) {
            return Err(Error::ShapeMismatch(format!("{} elements is not a multiple of {plane}", data.len())));
        }
        let src = data.to_vec();
        for (i, pass) in self.passes(direction).iter().enumerate() {
            pass.run((i == 0).then_some(&src[..]), data).map_err(Error::ShapeMismatch)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PassKind {
    Permute,
    Butterfly { axis: u32, half: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PassTable {
    Permutation { x: Vec<u32>, y: Vec<u32> },
    Twiddles(Vec<Complex32>),
}

/// Decoded parameter block of one `fft_radix2_pass` launch.
///
/// Byte layout, little-endian: `kind u32` (0 permute, 1 butterfly), `nx u32`,
/// `ny u32`, `axis u32`, `half u32`, `inverse u32`, `scale f32`,
/// `table_len u32`, then the table: `nx + ny` u32 bit-reversal indices
/// (x first) for a permute pass, or `table_len` complex twiddles as `(re, im)`
/// f32 pairs for a butterfly pass.
#[derive(Clone, Debug, PartialEq)]
pub struct PassParams {
    pub kind: PassKind,
    pub nx: u32,
    pub ny: u32,
    pub inverse: bool,
    pub scale: f32,
    pub table: PassTable,
}

pub const PASS_HEADER_BYTES: usize = 32;

impl PassParams {
    pub fn encode(&self) -> Vec<u8> {
        let (kind, axis, half) = match self.kind {
            PassKind::Permute => (0u32, 0u32, 0u32),
            PassKind::Butterfly { axis, half } => (1, axis, half),
        };
        let table_len = match &self.table {
            PassTable::Permutation { x, y } => x.len() + y.len(),
            PassTable::Twiddles(t) => t.len(),
        } as u32;
        let mut out = Vec::new();
        for word in [kind, self.nx, self.ny, axis, half, u32::from(self.inverse)] {
            out.extend_from_slice(&word.to_le_bytes());
        }
        out.extend_from_slice(&self.scale.to_le_bytes());
        out.extend_from_slice(&table_len.to_le_bytes());
        match &self.table {
            PassTable::Permutation { x, y } => {
                for v in x.iter().chain(y) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            PassTable::Twiddles(t) => {
                for c in t {
                    out.extend_from_slice(&c.re.to_le_bytes());
                    out.extend_from_slice(&c.im.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        if bytes.len() < PASS_HEADER_BYTES {
            return Err(format!("parameter block of {} bytes is shorter than the pass header", bytes.len()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
        let (nx, ny) = (word(1), word(2));
        if !nx.is_power_of_two() || !ny.is_power_of_two() {
            return Err(format!("pass shape {nx}x{ny} is not a power of two"));
        }
        let kind = match word(0) {
            0 => PassKind::Permute,
            1 => {
                let (axis, half) = (word(3), word(4));
                let n = if axis == 0 { nx } else { ny };
                if axis > 1 || !half.is_power_of_two() || half >= n {
                    return Err(format!("bad butterfly pass axis {axis} half {half}"));
                }
                PassKind::Butterfly { axis, half }
            }
            k => return Err(format!("unknown pass kind {k}")),
        };
        let scale = f32::from_le_bytes(bytes[24..28].try_into().expect("4 bytes"));
        let table_len = word(7) as usize;
        let body = &bytes[PASS_HEADER_BYTES..];
        let table = match kind {
            PassKind::Permute => {
                if table_len != (nx + ny) as usize || body.len() != 4 * table_len {
                    return Err(format!("permutation table length {table_len} does not fit {nx}x{ny}"));
                }
                let all: Vec<u32> =
                    body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
                let (x, y) = all.split_at(nx as usize);
                if x.iter().any(|&v| v >= nx) || y.iter().any(|&v| v >= ny) {
                    return Err("permutation index out of range".into());
                }
                PassTable::Permutation { x: x.to_vec(), y: y.to_vec() }
            }
            PassKind::Butterfly { axis, .. } => {
                let n = if axis == 0 { nx } else { ny } as usize;
                if table_len != n / 2 || body.len() != 8 * table_len {
                    return Err(format!("twiddle table length {table_len} does not fit axis length {n}"));
                }
                PassTable::Twiddles(
                    body.chunks_exact(8)
                        .map(|c| {
                            Complex32::new(
                                f32::from_le_bytes(c[0..4].try_into().expect("4 bytes")),
                                f32::from_le_bytes(c[4..8].try_into().expect("4 bytes")),
                            )
                        })
                        .collect(),
                )
            }
        };
        Ok(PassParams { kind, nx, ny, inverse: word(5) != 0, scale, table })
    }

    pub fn plane(&self) -> usize {
        self.nx as usize * self.ny as usize
    }

    /// Work items the pass is launched over for `elements` complex values.
    pub fn global_size(&self, elements: usize) -> usize {
        match self.kind {
            PassKind::Permute => elements,
            PassKind::Butterfly { .. } => elements / 2,
        }
    }

    /// Applies the pass to whole planes. `src` is required for the permute
    /// pass; butterflies work in place on `dst`.
    pub fn run(&self, src: Option<&[Complex32]>, dst: &mut [Complex32]) -> std::result::Result<(), String> {
        use rayon::prelude::*;

        let plane = self.plane();
        if !dst.len().is_multiple_of(plane) {
            return Err(format!("{} elements is not a multiple of the {plane}-element plane", dst.len()));
        }
        match (&self.kind, &self.table) {
            (PassKind::Permute, PassTable::Permutation { x: px, y: py }) => {
                let src = src.ok_or("permute pass cannot run in place")?;
                if src.len() != dst.len() {
                    return Err("permute pass source and destination differ in length".into());
                }
                let nx = self.nx as usize;
                dst.par_chunks_mut(plane).zip(src.par_chunks(plane)).for_each(|(d, s)| {
                    for (y, &ry) in py.iter().enumerate() {
                        let row = &mut d[y * nx..(y + 1) * nx];
                        let src_row = &s[ry as usize * nx..(ry as usize + 1) * nx];
                        for (out, &rx) in row.iter_mut().zip(px) {
                            *out = src_row[rx as usize];
                        }
                    }
                });
            }
            (&PassKind::Butterfly { axis, half }, PassTable::Twiddles(tw)) => {
                if let Some(src) = src {
                    if src.len() != dst.len() {
                        return Err("butterfly source and destination differ in length".into());
                    }
                    dst.copy_from_slice(src);
                }
                let (nx, ny) = (self.nx as usize, self.ny as usize);
                let (n, stride, lines) = if axis == 0 { (nx, 1, ny) } else { (ny, nx, nx) };
                let half = half as usize;
                let step = n / (2 * half);
                let conj = self.inverse;
                let scale = self.scale;
                dst.par_chunks_mut(plane).for_each(|p| {
                    for line in 0..lines {
                        let base = if axis == 0 { line * nx } else { line };
                        for group in (0..n).step_by(2 * half) {
                            for pos in 0..half {
                                let w = tw[pos * step];
                                let w = if conj { w.conj() } else { w };
                                let i0 = base + (group + pos) * stride;
                                let i1 = i0 + half * stride;
                                let a = p[i0];
                                let b = p[i1] * w;
                                p[i0] = (a + b) * scale;
                                p[i1] = (a - b) * scale;
                            }
                        }
                    }
                });
            }
            _ => return Err("pass kind and table do not agree".into()),
        }
        Ok(())
    }
}
