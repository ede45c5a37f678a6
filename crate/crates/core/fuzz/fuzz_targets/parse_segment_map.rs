#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(labels) = gapsense::io::parse_segment_map(text) {
            assert_eq!(gapsense::io::parse_segment_map(&gapsense::io::format_segment_map(&labels)).unwrap(), labels);
        }
    }
});
