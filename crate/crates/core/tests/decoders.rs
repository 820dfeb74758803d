//! Decoders must reject damaged input with an error, never a panic, and
//! whatever they accept must survive a write/read round trip.

use kl_core::desing::parse_phi_spec;
use kl_core::modulus::{HFunction, SampleCloud};
use kl_core::tables::{parse_table, TabulatedOracle};
use kl_core::DesingFn;
use proptest::prelude::*;

const SEEDS: &[&str] = &[
    include_str!("../../../fuzz/corpus/phi_spec/seed_1"),
    include_str!("../../../fuzz/corpus/desing_document/seed_1"),
    include_str!("../../../fuzz/corpus/desing_document/seed_3"),
    include_str!("../../../fuzz/corpus/desing_document/seed_4"),
    include_str!("../../../fuzz/corpus/tabulated_oracle/seed_2"),
    include_str!("../../../fuzz/corpus/sample_cloud/seed_1"),
    include_str!("../../../fuzz/corpus/h_table/seed_2"),
    include_str!("../../../fuzz/corpus/raw_table/seed_3"),
];

const ALPHABET: &[u8] = b"0123456789.,-+e#=:{}[]\"\n xfinah_";

#[derive(Debug, Clone)]
enum Edit {
    Delete(usize),
    Insert(usize, u8),
    Replace(usize, u8),
}

fn damage(seed: &str, edits: &[Edit]) -> String {
    let mut b = seed.as_bytes().to_vec();
    for e in edits {
        let n = b.len();
        match *e {
            Edit::Delete(i) if n > 0 => {
                b.remove(i % n);
            }
            Edit::Insert(i, c) => b.insert(i % (n + 1), ALPHABET[c as usize % ALPHABET.len()]),
            Edit::Replace(i, c) if n > 0 => b[i % n] = ALPHABET[c as usize % ALPHABET.len()],
            _ => {}
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

fn edit() -> impl Strategy<Value = Edit> {
    prop_oneof![
        any::<usize>().prop_map(Edit::Delete),
        (any::<usize>(), any::<u8>()).prop_map(|(i, c)| Edit::Insert(i, c)),
        (any::<usize>(), any::<u8>()).prop_map(|(i, c)| Edit::Replace(i, c)),
    ]
}

fn decode_all(text: &str) {
    if let Ok(phi) = parse_phi_spec(text) {
        let _ = phi.eval(0.5);
        parse_phi_spec(&phi.to_document()).unwrap();
    }
    if let Ok(phi) = DesingFn::from_document(text) {
        let _ = phi.left_deriv(1e-3);
        DesingFn::from_document(&phi.to_document()).unwrap();
    }
    if let Ok(t) = parse_table(text) {
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }
    if let Ok(t) = TabulatedOracle::parse(text) {
        assert_eq!(TabulatedOracle::parse(&t.to_table()).unwrap(), t);
    }
    if let Ok(c) = SampleCloud::from_table(text) {
        let again = SampleCloud::from_table(&c.to_table()).unwrap();
        assert_eq!(again.to_table(), c.to_table());
    }
    if let Ok(h) = HFunction::from_table(text) {
        assert_eq!(HFunction::from_table(&h.to_table()).unwrap(), h);
    }
}

#[test]
fn seeds_decode() {
    assert!(parse_phi_spec(SEEDS[0]).is_ok());
    assert!(DesingFn::from_document(SEEDS[1]).is_ok());
    assert!(TabulatedOracle::parse(SEEDS[4]).is_ok());
    assert!(SampleCloud::from_table(SEEDS[5]).is_ok());
    assert!(HFunction::from_table(SEEDS[6]).is_ok());
    for s in SEEDS {
        decode_all(s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn damaged_input_never_panics(
        seed in 0..SEEDS.len(),
        edits in prop::collection::vec(edit(), 1..6),
    ) {
        decode_all(&damage(SEEDS[seed], &edits));
    }
}
