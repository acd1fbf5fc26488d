use hetreco::ndarray::{
    header_len, pack, parse_layout_header, serialize_layout_header, ArraySpec, Data, DataKind, ElementType, NDArray,
};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = ArraySpec> {
    (0..ElementType::ALL.len(), prop::collection::vec(1usize..6, 1..=8))
        .prop_map(|(t, dims)| ArraySpec::new(ElementType::ALL[t], &dims))
}

fn data() -> impl Strategy<Value = Data> {
    prop::collection::vec(spec(), 1..6).prop_map(|specs| {
        Data::new(DataKind::Generic, specs.iter().map(|s| NDArray::zeros(s.element_type, &s.dims).unwrap()).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn layouts_are_aligned_ordered_and_round_trip(d in data(), align_pow in 0u32..10) {
        let alignment = 1u64 << align_pow;
        let layout = pack(&d, alignment).unwrap();
        prop_assert_eq!(layout.records.len(), d.arrays.len());
        let mut end = 0;
        for (rec, array) in layout.records.iter().zip(&d.arrays) {
            prop_assert_eq!(rec.offset_bytes % alignment, 0);
            prop_assert!(rec.offset_bytes >= end, "overlap");
            prop_assert_eq!(rec.element_type, array.element_type());
            prop_assert_eq!(rec.byte_len(), array.byte_len() as u64);
            end = rec.end();
        }
        prop_assert_eq!(layout.total_bytes % alignment, 0);
        prop_assert!(layout.total_bytes >= end);
        let header = serialize_layout_header(&layout);
        prop_assert_eq!(header.len(), header_len(d.arrays.len()));
        prop_assert_eq!(parse_layout_header(&header, alignment).unwrap(), layout);
    }
}

#[test]
fn complex_image_example() {
    let d = Data::xdata(NDArray::zeros(ElementType::Complex64, &[160, 160]).unwrap());
    assert_eq!(pack(&d, 256).unwrap().total_bytes, 204_800);
}
