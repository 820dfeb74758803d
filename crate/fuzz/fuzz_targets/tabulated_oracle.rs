#![no_main]

use kl_core::tables::TabulatedOracle;
use kl_core::FnOracle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(t) = TabulatedOracle::parse(text) else { return };
    let p = t.points()[0].clone();
    let _ = t.value(&p);
    let _ = t.subgrad_dist(&p);
    let again = TabulatedOracle::parse(&t.to_table()).expect("written table parses");
    assert_eq!(t, again);
});
