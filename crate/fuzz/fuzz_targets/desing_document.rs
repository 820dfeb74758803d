#![no_main]

use kl_core::DesingFn;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(phi) = DesingFn::from_document(text) else { return };
    for t in [1e-300, 1e-6, 0.1, 1.0, 100.0] {
        if let (Ok(v), Ok(d)) = (phi.eval(t), phi.left_deriv(t)) {
            assert!(v >= 0.0 && d >= 0.0, "negative value or slope at {t}");
        }
    }
    DesingFn::from_document(&phi.to_document()).expect("document round trip");
});
