#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = gapsense::io::parse_matrix(text) {
            let again = gapsense::io::parse_matrix(&gapsense::io::format_matrix(&m)).expect("formatted matrix parses");
            assert_eq!(again, m);
        }
    }
});
