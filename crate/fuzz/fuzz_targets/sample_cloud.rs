#![no_main]

use kl_core::modulus::SampleCloud;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cloud) = SampleCloud::from_table(text) else { return };
    let _ = cloud.distinct_gaps();
    let again = SampleCloud::from_table(&cloud.to_table()).expect("written cloud parses");
    assert_eq!(cloud.to_table(), again.to_table());
});
