//! Native routines the reference backend registers as intrinsic kernels.
//!
//! Every routine covers work items `0..global_size` with the same meaning a
//! source kernel gives its global id, and validates that size against the
//! layout headers it is handed. Work is split across threads over disjoint
//! output ranges.

use std::sync::Arc;

use bytemuck::Pod;
use num_complex::Complex32;
use rayon::prelude::*;

use super::fft::PassParams;
use super::{kernel_names as names, reduction_shape, ProdParams};
use crate::backend::{Kernel, KernelArgs};
use crate::ndarray::{parse_layout_records, ArrayRecord, ElementType};

type KernelFn = fn(KernelArgs<'_>) -> Result<(), String>;

pub struct NativeKernel {
    name: &'static str,
    body: KernelFn,
}

impl std::fmt::Debug for NativeKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "NativeKernel({})", self.name)
    }
}

impl Kernel for NativeKernel {
    fn name(&self) -> &str {
        self.name
    }

    fn execute(&self, args: KernelArgs<'_>) -> Result<(), String> {
        (self.body)(args)
    }
}

/// All intrinsic kernels, one instance per name.
pub fn intrinsics() -> Vec<Arc<NativeKernel>> {
    let table: [(&'static str, KernelFn); 6] = [
        (names::NEGATE, negate),
        (names::FFT_RADIX2_PASS, fft_radix2_pass),
        (names::COMPLEX_ELEMENT_PROD, complex_element_prod),
        (names::XIMAGE_SUM, ximage_sum),
        (names::RSS_COMBINE, rss_combine),
        (names::MATRIX_ADD, matrix_add),
    ];
    table.into_iter().map(|(name, body)| Arc::new(NativeKernel { name, body })).collect()
}

fn records(header: &[u8]) -> Result<Vec<ArrayRecord>, String> {
    parse_layout_records(header).map_err(|e| e.to_string())
}

fn view<'a, T: Pod>(bytes: &'a [u8], rec: &ArrayRecord) -> Result<&'a [T], String> {
    bytemuck::try_cast_slice(&bytes[rec.byte_range()]).map_err(|e| format!("misaligned array view: {e:?}"))
}

fn view_mut<'a, T: Pod>(bytes: &'a mut [u8], rec: &ArrayRecord) -> Result<&'a mut [T], String> {
    bytemuck::try_cast_slice_mut(&mut bytes[rec.byte_range()]).map_err(|e| format!("misaligned array view: {e:?}"))
}

fn expect_global(args: &KernelArgs<'_>, expected: usize) -> Result<(), String> {
    if args.global_size != expected {
        return Err(format!("global size {} does not cover {expected} work items", args.global_size));
    }
    Ok(())
}

/// For in-place capable kernels: make `output` hold the input payload, then
/// the kernel transforms `output` in place.
fn stage_input(args: &mut KernelArgs<'_>, in_recs: &[ArrayRecord], out_recs: &[ArrayRecord]) -> Result<(), String> {
    if let Some(input) = args.input {
        for (i, o) in in_recs.iter().zip(out_recs) {
            args.output[o.byte_range()].copy_from_slice(&input.data[i.byte_range()]);
        }
    }
    Ok(())
}

fn same_shapes(a: &[ArrayRecord], b: &[ArrayRecord]) -> Result<(), String> {
    let same = a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| x.element_type == y.element_type && x.dims() == y.dims());
    if same {
        Ok(())
    } else {
        Err("input and output layouts differ".into())
    }
}

fn negate(mut args: KernelArgs<'_>) -> Result<(), String> {
    let max = f64::from_le_bytes(args.params.get(..8).ok_or("negate expects an 8-byte parameter block")?.try_into().expect("8 bytes"));
    let in_recs = records(args.input_header())?;
    let out_recs = records(args.output_header)?;
    same_shapes(&in_recs, &out_recs)?;
    expect_global(&args, out_recs.iter().map(|r| r.element_count() as usize).sum())?;
    stage_input(&mut args, &in_recs, &out_recs)?;
    for rec in &out_recs {
        match rec.element_type {
            ElementType::UInt8 => view_mut::<u8>(args.output, rec)?
                .par_iter_mut()
                .for_each(|v| *v = (max - f64::from(*v)).round().clamp(0.0, 255.0) as u8),
            ElementType::Float32 => view_mut::<f32>(args.output, rec)?
                .par_iter_mut()
                .for_each(|v| *v = (max - f64::from(*v)) as f32),
            other => return Err(format!("negate does not support {other:?}")),
        }
    }
    Ok(())
}

fn fft_radix2_pass(args: KernelArgs<'_>) -> Result<(), String> {
    let pass = PassParams::decode(args.params)?;
    let out_recs = records(args.output_header)?;
    let rec = out_recs.first().ok_or("empty output layout")?;
    if rec.element_type != ElementType::Complex64 || rec.rank < 2 {
        return Err("fft_radix2_pass needs a COMPLEX64 array of rank >= 2".into());
    }
    if rec.dims[0] != u64::from(pass.nx) || rec.dims[1] != u64::from(pass.ny) {
        return Err(format!("array is {}x{}, pass planned for {}x{}", rec.dims[0], rec.dims[1], pass.nx, pass.ny));
    }
    let elements = rec.element_count() as usize;
    expect_global(&args, pass.global_size(elements))?;
    let src = match args.input {
        Some(input) => {
            let in_rec = records(input.header)?;
            let in_rec = in_rec.first().ok_or("empty input layout")?;
            if in_rec.element_type != rec.element_type || in_rec.dims() != rec.dims() {
                return Err("input and output layouts differ".into());
            }
            Some(view::<Complex32>(input.data, in_rec)?)
        }
        None => None,
    };
    let dst = view_mut::<Complex32>(args.output, rec)?;
    pass.run(src, dst)
}

fn complex_element_prod(mut args: KernelArgs<'_>) -> Result<(), String> {
    let params = ProdParams::decode(args.params)?;
    let aux = args.aux.ok_or("complex_element_prod needs an auxiliary input")?;
    let in_recs = records(args.input_header())?;
    let out_recs = records(args.output_header)?;
    let s_recs = records(aux.header)?;
    let (x, s) = (in_recs.first().ok_or("empty input layout")?, s_recs.first().ok_or("empty aux layout")?);
    same_shapes(&in_recs[..1], &out_recs[..1.min(out_recs.len())])?;
    let s_len = s.element_count() as usize;
    if x.element_type != ElementType::Complex64 || s.element_type != ElementType::Complex64 {
        return Err("complex_element_prod needs COMPLEX64 operands".into());
    }
    if !(x.element_count() as usize).is_multiple_of(s_len) || x.dims()[..s.rank] != *s.dims() {
        return Err("sensitivity maps do not match the leading image dims".into());
    }
    expect_global(&args, x.element_count() as usize)?;
    stage_input(&mut args, &in_recs[..1], &out_recs[..1])?;
    let maps = view::<Complex32>(aux.data, s)?;
    let out = view_mut::<Complex32>(args.output, &out_recs[0])?;
    out.par_chunks_mut(s_len).for_each(|frame| {
        for (v, &m) in frame.iter_mut().zip(maps) {
            *v *= if params.conjugate { m.conj() } else { m };
        }
    });
    Ok(())
}

/// `(input record, output record, plane, coils, frames)` of a coil reduction.
fn reduction(args: &KernelArgs<'_>, out_type: ElementType) -> Result<(ArrayRecord, ArrayRecord, [usize; 3]), String> {
    let input = args.input.ok_or("coil reductions cannot run in place")?;
    let inp = *records(input.header)?.first().ok_or("empty input layout")?;
    let out = *records(args.output_header)?.first().ok_or("empty output layout")?;
    if inp.element_type != ElementType::Complex64 || out.element_type != out_type {
        return Err("unexpected element types for coil reduction".into());
    }
    let shape = reduction_shape(&inp.dims_usize(), &out.dims_usize()).map_err(|e| e.to_string())?;
    expect_global(args, shape[0] * shape[2])?;
    Ok((inp, out, shape))
}

fn ximage_sum(args: KernelArgs<'_>) -> Result<(), String> {
    let (in_rec, out_rec, [plane, coils, _]) = reduction(&args, ElementType::Complex64)?;
    let src = view::<Complex32>(args.input.expect("checked").data, &in_rec)?;
    let dst = view_mut::<Complex32>(args.output, &out_rec)?;
    dst.par_chunks_mut(plane).zip(src.par_chunks(plane * coils)).for_each(|(out, frame)| {
        for (p, v) in out.iter_mut().enumerate() {
            *v = (0..coils).map(|c| frame[p + plane * c]).sum();
        }
    });
    Ok(())
}

fn rss_combine(args: KernelArgs<'_>) -> Result<(), String> {
    let (in_rec, out_rec, [plane, coils, _]) = reduction(&args, ElementType::Float32)?;
    let src = view::<Complex32>(args.input.expect("checked").data, &in_rec)?;
    let dst = view_mut::<f32>(args.output, &out_rec)?;
    dst.par_chunks_mut(plane).zip(src.par_chunks(plane * coils)).for_each(|(out, frame)| {
        for (p, v) in out.iter_mut().enumerate() {
            let sum: f64 = (0..coils).map(|c| f64::from(frame[p + plane * c].norm_sqr())).sum();
            *v = sum.sqrt() as f32;
        }
    });
    Ok(())
}

fn matrix_add(args: KernelArgs<'_>) -> Result<(), String> {
    let input = args.input.ok_or("matrix_add cannot run in place")?;
    let in_recs = records(input.header)?;
    let out_recs = records(args.output_header)?;
    let [a, b] = in_recs[..] else {
        return Err("matrix_add expects a two-array input".into());
    };
    let c = out_recs.first().ok_or("empty output layout")?;
    let all_f32 = [a, b, *c].iter().all(|r| r.element_type == ElementType::Float32);
    if !all_f32 || a.dims() != b.dims() || a.dims() != c.dims() {
        return Err("matrix_add needs three FLOAT32 arrays of equal shape".into());
    }
    expect_global(&args, c.element_count() as usize)?;
    let (lhs, rhs) = (view::<f32>(input.data, &a)?, view::<f32>(input.data, &b)?);
    view_mut::<f32>(args.output, c)?
        .par_iter_mut()
        .zip(lhs.par_iter().zip(rhs))
        .for_each(|(o, (x, y))| *o = x + y);
    Ok(())
}
