#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::io::features::{decode_features, encode_features};

fuzz_target!(|data: &[u8]| {
    if let Ok(fm) = decode_features(data) {
        assert_eq!(encode_features(&fm).unwrap(), data);
    }
});
