#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = gapsense::io::parse_sensor_file(text) {
            let again = gapsense::io::parse_sensor_file(&gapsense::io::format_sensor_file(&set)).unwrap();
            assert_eq!(again.indices, set.indices);
        }
    }
});
