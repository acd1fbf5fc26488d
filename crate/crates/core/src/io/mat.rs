//! Level-5 MAT-file subset: uncompressed little-endian numeric matrices of
//! class single or double, real or complex.

use std::path::Path;

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};
use crate::ndarray::{NDArray, Storage, MAX_RANK};

pub const HEADER_TEXT: &str = "MATLAB 5.0 MAT-file, created by hetreco";
pub const MAX_NAME_BYTES: usize = 63;
const HEADER_BYTES: usize = 128;

const MI_INT8: u32 = 1;
const MI_UINT8: u32 = 2;
const MI_INT16: u32 = 3;
const MI_UINT16: u32 = 4;
const MI_INT32: u32 = 5;
const MI_UINT32: u32 = 6;
const MI_SINGLE: u32 = 7;
const MI_DOUBLE: u32 = 9;
const MI_INT64: u32 = 12;
const MI_UINT64: u32 = 13;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;

const MX_DOUBLE: u8 = 6;
const MX_SINGLE: u8 = 7;
const FLAG_COMPLEX: u32 = 0x0800;

#[derive(Clone, Debug, PartialEq)]
pub struct MatVariable {
    pub name: String,
    pub array: NDArray,
}

impl MatVariable {
    pub fn new(name: impl Into<String>, array: NDArray) -> Self {
        MatVariable { name: name.into(), array }
    }
}

pub fn read_mat(path: impl AsRef<Path>) -> Result<Vec<MatVariable>> {
    parse_mat(&std::fs::read(path)?)
}

pub fn write_mat(path: impl AsRef<Path>, variables: &[MatVariable]) -> Result<()> {
    std::fs::write(path, encode_mat(variables)?)?;
    Ok(())
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedFile(msg.into())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4 bytes"))
}

/// One data element: its type and payload (without padding).
struct Element<'a> {
    ty: u32,
    data: &'a [u8],
}

/// Reads the element at the start of `b`; returns it and the bytes consumed.
fn element(b: &[u8]) -> Result<(Element<'_>, usize)> {
    if b.len() < 8 {
        return Err(malformed("truncated data element tag"));
    }
    let first = u32_at(b, 0);
    if first >> 16 != 0 {
        // Small data element: size and type share the first word.
        let (n, ty) = ((first >> 16) as usize, first & 0xffff);
        if n > 4 {
            return Err(malformed(format!("small data element claims {n} bytes")));
        }
        return Ok((Element { ty, data: &b[4..4 + n] }, 8));
    }
    let n = u32_at(b, 4) as usize;
    let end = 8usize.checked_add(n).filter(|&e| e <= b.len()).ok_or_else(|| malformed("data element overruns the file"))?;
    // The last element of a file may omit its padding.
    let consumed = end.next_multiple_of(8).min(b.len());
    Ok((Element { ty: first, data: &b[8..end] }, consumed))
}

fn numbers(e: &Element<'_>, expected: usize) -> Result<Vec<f64>> {
    macro_rules! conv {
        ($t:ty) => {{
            const W: usize = std::mem::size_of::<$t>();
            if e.data.len() != expected * W {
                return Err(malformed(format!("numeric element holds {} bytes, expected {}", e.data.len(), expected * W)));
            }
            e.data.chunks_exact(W).map(|c| <$t>::from_le_bytes(c.try_into().expect("width")) as f64).collect()
        }};
    }
    Ok(match e.ty {
        MI_INT8 => conv!(i8),
        MI_UINT8 => conv!(u8),
        MI_INT16 => conv!(i16),
        MI_UINT16 => conv!(u16),
        MI_INT32 => conv!(i32),
        MI_UINT32 => conv!(u32),
        MI_SINGLE => conv!(f32),
        MI_DOUBLE => conv!(f64),
        MI_INT64 => conv!(i64),
        MI_UINT64 => conv!(u64),
        MI_COMPRESSED => return Err(Error::UnsupportedFeature("compression".into())),
        other => return Err(malformed(format!("data type {other} is not numeric"))),
    })
}

pub fn parse_mat(bytes: &[u8]) -> Result<Vec<MatVariable>> {
    if bytes.len() < HEADER_BYTES {
        return Err(malformed("shorter than the 128-byte header"));
    }
    match &bytes[126..128] {
        b"IM" => {}
        b"MI" => return Err(Error::UnsupportedFeature("big-endian byte order".into())),
        _ => return Err(malformed("missing endian indicator")),
    }
    if bytes[..4].contains(&0) {
        return Err(malformed("header text is not a level-5 MAT header"));
    }
    let mut rest = &bytes[HEADER_BYTES..];
    let mut vars = Vec::new();
    while !rest.is_empty() {
        let (el, used) = element(rest)?;
        rest = &rest[used..];
        match el.ty {
            MI_MATRIX => vars.push(matrix(el.data)?),
            MI_COMPRESSED => return Err(Error::UnsupportedFeature("compression".into())),
            other => return Err(malformed(format!("top-level data element of type {other}"))),
        }
    }
    Ok(vars)
}

fn matrix(body: &[u8]) -> Result<MatVariable> {
    let mut rest = body;
    let mut next = || -> Result<Element<'_>> {
        let (el, used) = element(rest)?;
        rest = &rest[used..];
        Ok(el)
    };
    let flags = next()?;
    if flags.ty != MI_UINT32 || flags.data.len() != 8 {
        return Err(malformed("bad array flags subelement"));
    }
    let flag_word = u32_at(flags.data, 0);
    let class = (flag_word & 0xff) as u8;
    let feature = match class {
        MX_DOUBLE | MX_SINGLE => None,
        1 => Some("cell arrays"),
        2 => Some("struct arrays"),
        3 => Some("object arrays"),
        4 => Some("char arrays"),
        5 => Some("sparse arrays"),
        8..=15 => Some("integer classes"),
        _ => return Err(malformed(format!("unknown array class {class}"))),
    };
    if let Some(feature) = feature {
        return Err(Error::UnsupportedFeature(feature.into()));
    }
    if flag_word & 0x0200 != 0 {
        return Err(Error::UnsupportedFeature("logical arrays".into()));
    }
    let complex = flag_word & FLAG_COMPLEX != 0;

    let dims_el = next()?;
    if dims_el.ty != MI_INT32 || dims_el.data.len() % 4 != 0 || dims_el.data.len() < 8 {
        return Err(malformed("bad dimensions subelement"));
    }
    let dims: Vec<usize> = dims_el
        .data
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")))
        .map(|d| usize::try_from(d).map_err(|_| malformed(format!("negative dimension {d}"))))
        .collect::<Result<_>>()?;
    if dims.len() > MAX_RANK {
        return Err(Error::UnsupportedFeature(format!("rank {} arrays", dims.len())));
    }
    if dims.contains(&0) {
        return Err(Error::UnsupportedFeature("empty arrays".into()));
    }
    let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| malformed("dimension overflow"))?;

    let name_el = next()?;
    if name_el.ty != MI_INT8 {
        return Err(malformed("bad array name subelement"));
    }
    let name = std::str::from_utf8(name_el.data).map_err(|_| malformed("array name is not UTF-8"))?.to_string();
    if name.is_empty() || name.len() > MAX_NAME_BYTES {
        return Err(malformed(format!("array name of {} bytes", name.len())));
    }

    let re = numbers(&next()?, count)?;
    let im = if complex { Some(numbers(&next()?, count)?) } else { None };
    let storage = match (class, im) {
        (MX_SINGLE, None) => Storage::Float32(re.into_iter().map(|v| v as f32).collect()),
        (MX_SINGLE, Some(im)) => {
            Storage::Complex64(re.into_iter().zip(im).map(|(r, i)| Complex32::new(r as f32, i as f32)).collect())
        }
        (_, None) => Storage::Float64(re),
        (_, Some(im)) => Storage::Complex128(re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()),
    };
    Ok(MatVariable { name, array: NDArray::new(dims, storage).map_err(|e| malformed(e.to_string()))? })
}

fn push_element(out: &mut Vec<u8>, ty: u32, data: &[u8]) {
    out.extend_from_slice(&ty.to_le_bytes());
    out.extend_from_slice(&(data.len() as u32).to_le_bytes());
    out.extend_from_slice(data);
    out.resize(out.len().next_multiple_of(8), 0);
}

fn split<T: Copy, U: bytemuck::Pod>(values: &[T], re: impl Fn(T) -> U, im: impl Fn(T) -> U) -> (Vec<u8>, Vec<u8>) {
    let r: Vec<U> = values.iter().map(|&v| re(v)).collect();
    let i: Vec<U> = values.iter().map(|&v| im(v)).collect();
    (bytemuck::cast_slice(&r).to_vec(), bytemuck::cast_slice(&i).to_vec())
}

pub fn encode_mat(variables: &[MatVariable]) -> Result<Vec<u8>> {
    let mut out = vec![b' '; 116];
    out[..HEADER_TEXT.len()].copy_from_slice(HEADER_TEXT.as_bytes());
    out.extend_from_slice(&[0; 8]);
    out.extend_from_slice(&0x0100u16.to_le_bytes());
    out.extend_from_slice(b"IM");

    for var in variables {
        if var.name.is_empty() || var.name.len() > MAX_NAME_BYTES {
            return Err(Error::InvalidParams(format!(
                "variable name must be 1..={MAX_NAME_BYTES} bytes, got {}",
                var.name.len()
            )));
        }
        let (class, mi, re, im) = match var.array.storage() {
            Storage::Float32(v) => (MX_SINGLE, MI_SINGLE, bytemuck::cast_slice(v).to_vec(), None),
            Storage::Float64(v) => (MX_DOUBLE, MI_DOUBLE, bytemuck::cast_slice(v).to_vec(), None),
            Storage::Complex64(v) => {
                let (r, i) = split(v, |c| c.re, |c| c.im);
                (MX_SINGLE, MI_SINGLE, r, Some(i))
            }
            Storage::Complex128(v) => {
                let (r, i) = split(v, |c| c.re, |c| c.im);
                (MX_DOUBLE, MI_DOUBLE, r, Some(i))
            }
            other => {
                return Err(Error::UnsupportedElementType(format!(
                    "MAT output supports single and double arrays, not {:?}",
                    other.element_type()
                )))
            }
        };
        let mut dims: Vec<i32> = Vec::with_capacity(var.array.rank().max(2));
        for &d in var.array.dims() {
            dims.push(i32::try_from(d).map_err(|_| Error::InvalidParams(format!("dimension {d} exceeds the MAT limit")))?);
        }
        if dims.len() < 2 {
            dims.push(1);
        }

        let mut body = Vec::new();
        let flags = u32::from(class) | if im.is_some() { FLAG_COMPLEX } else { 0 };
        push_element(&mut body, MI_UINT32, bytemuck::cast_slice(&[flags, 0u32]));
        push_element(&mut body, MI_INT32, bytemuck::cast_slice(&dims));
        push_element(&mut body, MI_INT8, var.name.as_bytes());
        push_element(&mut body, mi, &re);
        if let Some(im) = im {
            push_element(&mut body, mi, &im);
        }
        let len = u32::try_from(body.len()).map_err(|_| Error::InvalidParams(format!("variable {} exceeds 4 GiB", var.name)))?;
        out.extend_from_slice(&MI_MATRIX.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_single_round_trip() {
        let a = NDArray::from_f32(&[2, 3], vec![1.0, -2.5, 3.25, f32::MIN_POSITIVE, 0.0, 6e10]).unwrap();
        let bytes = encode_mat(&[MatVariable::new("a", a.clone())]).unwrap();
        assert!(bytes.starts_with(HEADER_TEXT.as_bytes()));
        let back = parse_mat(&bytes).unwrap();
        assert_eq!(back, [MatVariable::new("a", a)]);
    }

    #[test]
    fn complex_single_keeps_parts() {
        let a = NDArray::from_c32(&[2, 2], vec![Complex32::new(1.0, 2.0), Complex32::new(-3.0, 0.5), Complex32::new(0.0, -1.0), Complex32::new(7.0, 0.0)]).unwrap();
        let back = parse_mat(&encode_mat(&[MatVariable::new("kdata", a.clone())]).unwrap()).unwrap();
        assert_eq!(back[0].array, a);
    }

    #[test]
    fn empty_list_is_header_only() {
        let bytes = encode_mat(&[]).unwrap();
        assert_eq!(bytes.len(), 128);
        assert_eq!(&bytes[124..128], &[0, 1, b'I', b'M']);
        assert!(parse_mat(&bytes).unwrap().is_empty());
    }

    #[test]
    fn long_names_are_rejected() {
        let a = NDArray::from_f64(&[1], vec![1.0]).unwrap();
        let err = encode_mat(&[MatVariable::new("x".repeat(64), a)]).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(_)));
    }

    #[test]
    fn compressed_elements_are_named() {
        let mut bytes = encode_mat(&[]).unwrap();
        push_element(&mut bytes, MI_COMPRESSED, &[0x78, 0x9c, 1, 2]);
        assert!(matches!(parse_mat(&bytes), Err(Error::UnsupportedFeature(f)) if f == "compression"));
    }

    #[test]
    fn big_endian_is_unsupported() {
        let mut bytes = encode_mat(&[]).unwrap();
        bytes[126..128].copy_from_slice(b"MI");
        assert!(matches!(parse_mat(&bytes), Err(Error::UnsupportedFeature(_))));
    }

    #[test]
    fn converts_narrow_storage_and_small_elements() {
        // A double matrix named "v" stored as miUINT8, as other writers emit it.
        let mut body = Vec::new();
        push_element(&mut body, MI_UINT32, bytemuck::cast_slice(&[u32::from(MX_DOUBLE), 0]));
        push_element(&mut body, MI_INT32, bytemuck::cast_slice(&[3i32, 1]));
        body.extend_from_slice(&((1u32 << 16) | MI_INT8).to_le_bytes());
        body.extend_from_slice(b"v\0\0\0");
        push_element(&mut body, MI_UINT8, &[1, 2, 255]);
        let mut bytes = encode_mat(&[]).unwrap();
        push_element(&mut bytes, MI_MATRIX, &body);
        let vars = parse_mat(&bytes).unwrap();
        assert_eq!(vars[0].name, "v");
        assert_eq!(vars[0].array, NDArray::from_f64(&[3, 1], vec![1.0, 2.0, 255.0]).unwrap());
    }

    #[test]
    fn cell_class_is_unsupported() {
        let mut body = Vec::new();
        push_element(&mut body, MI_UINT32, bytemuck::cast_slice(&[1u32, 0]));
        let mut bytes = encode_mat(&[]).unwrap();
        push_element(&mut bytes, MI_MATRIX, &body);
        assert!(matches!(parse_mat(&bytes), Err(Error::UnsupportedFeature(f)) if f == "cell arrays"));
    }
}
