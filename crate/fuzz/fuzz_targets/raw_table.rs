#![no_main]

use kl_core::tables::parse_table;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_table(text) {
        assert_eq!(t.rows.len(), t.row_lines.len());
        assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
    }
});
