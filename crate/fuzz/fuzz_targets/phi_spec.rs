#![no_main]

use kl_core::desing::parse_phi_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(phi) = parse_phi_spec(text) else { return };
    for t in [1e-12, 1e-3, 0.5, 1.0, 7.0] {
        let _ = phi.eval(t);
        let _ = phi.left_deriv(t);
    }
    let doc = phi.to_document();
    parse_phi_spec(&doc).expect("serialized function parses again");
});
