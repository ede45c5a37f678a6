#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((idx, val)) = gapsense::io::parse_measurements(text) {
            assert_eq!(idx.len(), val.len());
            let again = gapsense::io::parse_measurements(&gapsense::io::format_measurements(&idx, &val)).unwrap();
            assert_eq!(again, (idx, val));
        }
    }
});
