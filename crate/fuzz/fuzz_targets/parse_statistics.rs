#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(x) = mtc_cli::parse_statistics(text) {
            assert!(x.len() >= 2);
            assert!(x.values().iter().all(|v| v.is_finite()));
        }
    }
});
