#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = toml::from_str::<gapsense::datagen::SynthSpec>(text) {
            // Only validation: generation cost scales with the declared size.
            let _ = spec.validate();
            let _ = spec.outlier_count();
        }
    }
});
