#![no_main]

use kl_core::modulus::HFunction;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(h) = HFunction::from_table(text) else { return };
    let again = HFunction::from_table(&h.to_table()).expect("written h parses");
    assert_eq!(h, again);
});
