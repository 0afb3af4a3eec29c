#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::io::{load_layout, Strictness};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for strictness in [Strictness::Strict, Strictness::Lenient] {
        if let Ok(layout) = load_layout(text, strictness) {
            assert!(rgk_core::validate_layout(&layout).is_empty());
        }
    }
});
