//! Heterogeneous n-dimensional data and the packing rules that place a whole
//! data set into one aligned, contiguous device buffer.
//!
//! Dimensions are column-major, fastest-varying first. Complex elements are
//! stored as interleaved `(re, im)` pairs.

use num_complex::{Complex32, Complex64};

use crate::error::{Error, Result};

pub const MAX_RANK: usize = 8;
/// Words per array record in the layout header: offset, type code, rank, 8 dims.
pub const RECORD_WORDS: usize = 3 + MAX_RANK;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ElementType {
    UInt8 = 1,
    Int32 = 2,
    Float32 = 3,
    Complex64 = 4,
    Float64 = 5,
    Complex128 = 6,
}

impl ElementType {
    pub const ALL: [ElementType; 6] = [
        ElementType::UInt8,
        ElementType::Int32,
        ElementType::Float32,
        ElementType::Complex64,
        ElementType::Float64,
        ElementType::Complex128,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Self::ALL.into_iter().find(|t| u64::from(t.code()) == code)
    }

    pub fn size_bytes(self) -> usize {
        match self {
            ElementType::UInt8 => 1,
            ElementType::Int32 | ElementType::Float32 => 4,
            ElementType::Complex64 | ElementType::Float64 => 8,
            ElementType::Complex128 => 16,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, ElementType::Complex64 | ElementType::Complex128)
    }
}

/// Typed element storage backing an [`NDArray`].
#[derive(Clone, Debug, PartialEq)]
pub enum Storage {
    UInt8(Vec<u8>),
    Int32(Vec<i32>),
    Float32(Vec<f32>),
    Complex64(Vec<Complex32>),
    Float64(Vec<f64>),
    Complex128(Vec<Complex64>),
}

impl Storage {
    pub fn zeros(ty: ElementType, len: usize) -> Self {
        match ty {
            ElementType::UInt8 => Storage::UInt8(vec![0; len]),
            ElementType::Int32 => Storage::Int32(vec![0; len]),
            ElementType::Float32 => Storage::Float32(vec![0.0; len]),
            ElementType::Complex64 => Storage::Complex64(vec![Complex32::default(); len]),
            ElementType::Float64 => Storage::Float64(vec![0.0; len]),
            ElementType::Complex128 => Storage::Complex128(vec![Complex64::default(); len]),
        }
    }

    pub fn element_type(&self) -> ElementType {
        match self {
            Storage::UInt8(_) => ElementType::UInt8,
            Storage::Int32(_) => ElementType::Int32,
            Storage::Float32(_) => ElementType::Float32,
            Storage::Complex64(_) => ElementType::Complex64,
            Storage::Float64(_) => ElementType::Float64,
            Storage::Complex128(_) => ElementType::Complex128,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Storage::UInt8(v) => v.len(),
            Storage::Int32(v) => v.len(),
            Storage::Float32(v) => v.len(),
            Storage::Complex64(v) => v.len(),
            Storage::Float64(v) => v.len(),
            Storage::Complex128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Native-endian byte view; every supported target is little-endian.
    pub fn as_bytes(&self) -> &[u8] {
        match self {
            Storage::UInt8(v) => v,
            Storage::Int32(v) => bytemuck::cast_slice(v),
            Storage::Float32(v) => bytemuck::cast_slice(v),
            Storage::Complex64(v) => bytemuck::cast_slice(v),
            Storage::Float64(v) => bytemuck::cast_slice(v),
            Storage::Complex128(v) => bytemuck::cast_slice(v),
        }
    }

    pub fn as_bytes_mut(&mut self) -> &mut [u8] {
        match self {
            Storage::UInt8(v) => v,
            Storage::Int32(v) => bytemuck::cast_slice_mut(v),
            Storage::Float32(v) => bytemuck::cast_slice_mut(v),
            Storage::Complex64(v) => bytemuck::cast_slice_mut(v),
            Storage::Float64(v) => bytemuck::cast_slice_mut(v),
            Storage::Complex128(v) => bytemuck::cast_slice_mut(v),
        }
    }

    /// Decodes little-endian bytes; `bytes.len()` must be a whole number of elements.
    pub fn from_le_bytes(ty: ElementType, bytes: &[u8]) -> Result<Self> {
        let size = ty.size_bytes();
        if !bytes.len().is_multiple_of(size) {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes is not a whole number of {size}-byte elements",
                bytes.len()
            )));
        }
        let mut storage = Storage::zeros(ty, bytes.len() / size);
        storage.as_bytes_mut().copy_from_slice(bytes);
        Ok(storage)
    }
}

#[cfg(target_endian = "big")]
compile_error!("hetreco stores device data little-endian and requires a little-endian host");

/// One typed n-dimensional contiguous array.
#[derive(Clone, Debug, PartialEq)]
pub struct NDArray {
    dims: Vec<usize>,
    storage: Storage,
}

impl NDArray {
    pub fn new(dims: Vec<usize>, storage: Storage) -> Result<Self> {
        validate_dims(&dims)?;
        let count = element_count(&dims)?;
        if count != storage.len() {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {count} elements, storage holds {}",
                storage.len()
            )));
        }
        Ok(NDArray { dims, storage })
    }

    pub fn zeros(ty: ElementType, dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let count = element_count(dims)?;
        Ok(NDArray { dims: dims.to_vec(), storage: Storage::zeros(ty, count) })
    }

    pub fn from_u8(dims: &[usize], values: Vec<u8>) -> Result<Self> {
        Self::new(dims.to_vec(), Storage::UInt8(values))
    }

    pub fn from_f32(dims: &[usize], values: Vec<f32>) -> Result<Self> {
        Self::new(dims.to_vec(), Storage::Float32(values))
    }

    pub fn from_f64(dims: &[usize], values: Vec<f64>) -> Result<Self> {
        Self::new(dims.to_vec(), Storage::Float64(values))
    }

    pub fn from_c32(dims: &[usize], values: Vec<Complex32>) -> Result<Self> {
        Self::new(dims.to_vec(), Storage::Complex64(values))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spec(&self) -> ArraySpec {
        ArraySpec { element_type: self.element_type(), dims: self.dims.clone() }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn element_type(&self) -> ElementType {
        self.storage.element_type()
    }

    pub fn byte_len(&self) -> usize {
        self.len() * self.element_type().size_bytes()
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn storage_mut(&mut self) -> &mut Storage {
        &mut self.storage
    }

    pub fn into_storage(self) -> Storage {
        self.storage
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.storage.as_bytes()
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.storage {
            Storage::UInt8(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.storage {
            Storage::Float32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Float64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_c32(&self) -> Option<&[Complex32]> {
        match &self.storage {
            Storage::Complex64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_c32_mut(&mut self) -> Option<&mut [Complex32]> {
        match &mut self.storage {
            Storage::Complex64(v) => Some(v),
            _ => None,
        }
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > MAX_RANK {
        return Err(Error::ShapeMismatch(format!(
            "rank {} outside 1..={MAX_RANK}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(Error::ShapeMismatch(format!("zero-length dimension in {dims:?}")));
    }
    Ok(())
}

fn element_count(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or(Error::Overflow)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DataKind {
    /// Data with a direct physical interpretation (images, volumes).
    XData,
    /// K-space data.
    KData,
    #[default]
    Generic,
}

/// Element type and shape of an array, without its payload.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ArraySpec {
    pub element_type: ElementType,
    pub dims: Vec<usize>,
}

impl ArraySpec {
    pub fn new(element_type: ElementType, dims: &[usize]) -> Self {
        ArraySpec { element_type, dims: dims.to_vec() }
    }

    pub fn element_count(&self) -> usize {
        self.dims.iter().product()
    }
}

/// An ordered heterogeneous collection of arrays transferred as one unit.
#[derive(Clone, Debug, PartialEq)]
pub struct Data {
    pub kind: DataKind,
    pub arrays: Vec<NDArray>,
}

impl Data {
    pub fn new(kind: DataKind, arrays: Vec<NDArray>) -> Self {
        Data { kind, arrays }
    }

    pub fn single(kind: DataKind, array: NDArray) -> Self {
        Data { kind, arrays: vec![array] }
    }

    pub fn xdata(array: NDArray) -> Self {
        Self::single(DataKind::XData, array)
    }

    pub fn kdata(array: NDArray) -> Self {
        Self::single(DataKind::KData, array)
    }

    pub fn specs(&self) -> Vec<ArraySpec> {
        self.arrays.iter().map(NDArray::spec).collect()
    }

    /// Same shapes and types, zero-filled.
    pub fn zeros_like(&self) -> Self {
        Data {
            kind: self.kind,
            arrays: self
                .arrays
                .iter()
                .map(|a| NDArray { dims: a.dims.clone(), storage: Storage::zeros(a.element_type(), a.len()) })
                .collect(),
        }
    }
}

/// Placement of one array inside a packed buffer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ArrayRecord {
    pub offset_bytes: u64,
    pub element_type: ElementType,
    pub rank: usize,
    /// Dims beyond `rank` are 1.
    pub dims: [u64; MAX_RANK],
}

impl ArrayRecord {
    pub fn dims(&self) -> &[u64] {
        &self.dims[..self.rank]
    }

    pub fn element_count(&self) -> u64 {
        self.dims().iter().product()
    }

    pub fn byte_len(&self) -> u64 {
        self.element_count() * self.element_type.size_bytes() as u64
    }

    pub fn end(&self) -> u64 {
        self.offset_bytes + self.byte_len()
    }

    pub fn byte_range(&self) -> std::ops::Range<usize> {
        self.offset_bytes as usize..self.end() as usize
    }

    pub fn dims_usize(&self) -> Vec<usize> {
        self.dims().iter().map(|&d| d as usize).collect()
    }
}

/// Offsets, types and dims of every array of a packed data set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LayoutDescriptor {
    pub records: Vec<ArrayRecord>,
    pub total_bytes: u64,
    pub alignment_bytes: u64,
}

fn round_up(value: u64, alignment: u64) -> Result<u64> {
    value
        .checked_add(alignment - 1)
        .map(|v| v & !(alignment - 1))
        .ok_or(Error::Overflow)
}

fn check_alignment(alignment_bytes: u64) -> Result<()> {
    if alignment_bytes == 0 || !alignment_bytes.is_power_of_two() {
        return Err(Error::InvalidParams(format!(
            "alignment {alignment_bytes} is not a power of two"
        )));
    }
    Ok(())
}

/// Places each array at the smallest aligned offset past the previous one.
pub fn pack(data: &Data, alignment_bytes: u64) -> Result<LayoutDescriptor> {
    pack_specs(&data.specs(), alignment_bytes)
}

/// [`pack`] over shapes alone, for device-side allocations without a payload.
pub fn pack_specs(specs: &[ArraySpec], alignment_bytes: u64) -> Result<LayoutDescriptor> {
    check_alignment(alignment_bytes)?;
    if specs.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut records = Vec::with_capacity(specs.len());
    let mut cursor = 0u64;
    for spec in specs {
        validate_dims(&spec.dims)?;
        let offset = round_up(cursor, alignment_bytes)?;
        let mut dims = [1u64; MAX_RANK];
        for (slot, &d) in dims.iter_mut().zip(&spec.dims) {
            *slot = d as u64;
        }
        let bytes = spec
            .dims
            .iter()
            .try_fold(spec.element_type.size_bytes() as u64, |acc, &d| acc.checked_mul(d as u64))
            .ok_or(Error::Overflow)?;
        records.push(ArrayRecord {
            offset_bytes: offset,
            element_type: spec.element_type,
            rank: spec.dims.len(),
            dims,
        });
        cursor = offset.checked_add(bytes).ok_or(Error::Overflow)?;
    }
    Ok(LayoutDescriptor {
        records,
        total_bytes: round_up(cursor, alignment_bytes)?,
        alignment_bytes,
    })
}

/// Header length in bytes for `arrays` records.
pub fn header_len(arrays: usize) -> usize {
    (1 + RECORD_WORDS * arrays) * 8
}

/// Little-endian u64 words: array count, then one 11-word record per array
/// `[offset, type code, rank, d0..d7]`.
pub fn serialize_layout_header(layout: &LayoutDescriptor) -> Vec<u8> {
    let mut out = Vec::with_capacity(header_len(layout.records.len()));
    out.extend_from_slice(&(layout.records.len() as u64).to_le_bytes());
    for rec in &layout.records {
        out.extend_from_slice(&rec.offset_bytes.to_le_bytes());
        out.extend_from_slice(&u64::from(rec.element_type.code()).to_le_bytes());
        out.extend_from_slice(&(rec.rank as u64).to_le_bytes());
        for d in rec.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
    }
    out
}

/// Decodes only the per-array records of a header. This is what kernels use.
pub fn parse_layout_records(bytes: &[u8]) -> Result<Vec<ArrayRecord>> {
    let word = |i: usize| -> u64 {
        u64::from_le_bytes(bytes[i * 8..i * 8 + 8].try_into().expect("8-byte word"))
    };
    if bytes.len() < 8 {
        return Err(Error::MalformedHeader(format!("{} bytes is shorter than the count word", bytes.len())));
    }
    let count = word(0);
    let expected = usize::try_from(count)
        .ok()
        .and_then(|a| a.checked_mul(RECORD_WORDS))
        .and_then(|w| w.checked_add(1))
        .and_then(|w| w.checked_mul(8))
        .ok_or_else(|| Error::MalformedHeader(format!("array count {count} too large")))?;
    if bytes.len() != expected {
        return Err(Error::MalformedHeader(format!(
            "length {} does not match {count} records ({expected} bytes)",
            bytes.len()
        )));
    }
    (0..count as usize)
        .map(|a| {
            let base = 1 + a * RECORD_WORDS;
            let code = word(base + 1);
            let element_type = ElementType::from_code(code)
                .ok_or_else(|| Error::MalformedHeader(format!("record {a}: unknown type code {code}")))?;
            let rank = word(base + 2);
            if rank == 0 || rank > MAX_RANK as u64 {
                return Err(Error::MalformedHeader(format!("record {a}: rank {rank} outside 1..=8")));
            }
            let mut dims = [1u64; MAX_RANK];
            for (d, slot) in dims.iter_mut().enumerate() {
                *slot = word(base + 3 + d);
                if *slot == 0 {
                    return Err(Error::MalformedHeader(format!("record {a}: zero dimension")));
                }
                if d >= rank as usize && *slot != 1 {
                    return Err(Error::MalformedHeader(format!("record {a}: padding dim {d} is not 1")));
                }
            }
            Ok(ArrayRecord { offset_bytes: word(base), element_type, rank: rank as usize, dims })
        })
        .collect()
}

/// Inverse of [`serialize_layout_header`]. The header does not carry the
/// alignment, so the caller supplies it; `total_bytes` is recomputed from the
/// last record and offsets are checked against the packing invariants.
pub fn parse_layout_header(bytes: &[u8], alignment_bytes: u64) -> Result<LayoutDescriptor> {
    check_alignment(alignment_bytes)?;
    let records = parse_layout_records(bytes)?;
    if records.is_empty() {
        return Err(Error::MalformedHeader("zero arrays".into()));
    }
    let mut prev_end = 0u64;
    for (i, rec) in records.iter().enumerate() {
        if rec.offset_bytes % alignment_bytes != 0 {
            return Err(Error::MalformedHeader(format!("record {i}: offset {} not aligned", rec.offset_bytes)));
        }
        if (i == 0 && rec.offset_bytes != 0) || rec.offset_bytes < prev_end {
            return Err(Error::MalformedHeader(format!("record {i}: offset {} overlaps", rec.offset_bytes)));
        }
        let len = rec
            .dims()
            .iter()
            .try_fold(rec.element_type.size_bytes() as u64, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::Overflow)?;
        prev_end = rec.offset_bytes.checked_add(len).ok_or(Error::Overflow)?;
    }
    Ok(LayoutDescriptor { records, total_bytes: round_up(prev_end, alignment_bytes)?, alignment_bytes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_codes_and_sizes() {
        let sizes: Vec<_> = ElementType::ALL.iter().map(|t| (t.code(), t.size_bytes())).collect();
        assert_eq!(sizes, vec![(1, 1), (2, 4), (3, 4), (4, 8), (5, 8), (6, 16)]);
        assert_eq!(ElementType::from_code(99), None);
    }

    #[test]
    fn array_validation() {
        assert!(NDArray::zeros(ElementType::Float32, &[]).is_err());
        assert!(NDArray::zeros(ElementType::Float32, &[1; 9]).is_err());
        assert!(NDArray::zeros(ElementType::Float32, &[2, 0]).is_err());
        assert!(NDArray::from_f32(&[2, 2], vec![0.0; 3]).is_err());
        let a = NDArray::zeros(ElementType::Complex64, &[3, 2]).unwrap();
        assert_eq!(a.byte_len(), 48);
    }

    #[test]
    fn pack_single_complex_image() {
        let data = Data::kdata(NDArray::zeros(ElementType::Complex64, &[160, 160]).unwrap());
        let layout = pack(&data, 256).unwrap();
        assert_eq!(layout.records[0].offset_bytes, 0);
        assert_eq!(layout.total_bytes, 204_800);
    }

    #[test]
    fn pack_two_small_arrays() {
        let data = Data::new(
            DataKind::Generic,
            vec![
                NDArray::from_f32(&[3], vec![1.0; 3]).unwrap(),
                NDArray::from_f32(&[2], vec![2.0; 2]).unwrap(),
            ],
        );
        let layout = pack(&data, 256).unwrap();
        let offsets: Vec<_> = layout.records.iter().map(|r| r.offset_bytes).collect();
        assert_eq!(offsets, vec![0, 256]);
        assert_eq!(layout.total_bytes, 512);
    }

    #[test]
    fn pack_rejects_empty_and_bad_alignment() {
        assert!(matches!(pack(&Data::new(DataKind::Generic, vec![]), 256), Err(Error::EmptyData)));
        let data = Data::xdata(NDArray::zeros(ElementType::UInt8, &[4]).unwrap());
        assert!(pack(&data, 100).is_err());
    }

    #[test]
    fn header_words_for_complex_image() {
        let data = Data::kdata(NDArray::zeros(ElementType::Complex64, &[160, 160]).unwrap());
        let bytes = serialize_layout_header(&pack(&data, 256).unwrap());
        assert_eq!(bytes.len(), 96);
        let words: Vec<u64> = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(words, vec![1, 0, 4, 2, 160, 160, 1, 1, 1, 1, 1, 1]);
    }

    #[test]
    fn header_two_records() {
        let data = Data::new(
            DataKind::Generic,
            vec![
                NDArray::from_f32(&[3], vec![1.0; 3]).unwrap(),
                NDArray::from_f32(&[2], vec![2.0; 2]).unwrap(),
            ],
        );
        let layout = pack(&data, 256).unwrap();
        let bytes = serialize_layout_header(&layout);
        assert_eq!(bytes.len(), header_len(2));
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 0);
        assert_eq!(u64::from_le_bytes(bytes[96..104].try_into().unwrap()), 256);
        assert_eq!(parse_layout_header(&bytes, 256).unwrap(), layout);
    }

    #[test]
    fn malformed_headers() {
        let data = Data::xdata(NDArray::zeros(ElementType::Float32, &[4, 4]).unwrap());
        let good = serialize_layout_header(&pack(&data, 256).unwrap());

        let truncated = &good[..good.len() - 8];
        assert!(matches!(parse_layout_header(truncated, 256), Err(Error::MalformedHeader(_))));
        assert!(matches!(parse_layout_header(&[], 256), Err(Error::MalformedHeader(_))));

        let mut bad_type = good.clone();
        bad_type[16..24].copy_from_slice(&99u64.to_le_bytes());
        assert!(matches!(parse_layout_header(&bad_type, 256), Err(Error::MalformedHeader(_))));

        let mut rank0 = good.clone();
        rank0[24..32].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(parse_layout_header(&rank0, 256), Err(Error::MalformedHeader(_))));

        let mut rank9 = good.clone();
        rank9[24..32].copy_from_slice(&9u64.to_le_bytes());
        assert!(matches!(parse_layout_header(&rank9, 256), Err(Error::MalformedHeader(_))));

        let mut huge = good;
        huge[0..8].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(parse_layout_header(&huge, 256), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn storage_byte_round_trip() {
        let s = Storage::Complex64(vec![Complex32::new(1.0, -2.0), Complex32::new(0.5, 4.0)]);
        let back = Storage::from_le_bytes(ElementType::Complex64, s.as_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(&s.as_bytes()[0..4], &1.0f32.to_le_bytes());
        assert_eq!(&s.as_bytes()[4..8], &(-2.0f32).to_le_bytes());
        assert!(Storage::from_le_bytes(ElementType::Float64, &[0; 7]).is_err());
    }
}
