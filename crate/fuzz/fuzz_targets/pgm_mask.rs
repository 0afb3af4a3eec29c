#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::io::netpbm::{parse_pgm_mask, write_pgm};

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = parse_pgm_mask(data) {
        assert_eq!(parse_pgm_mask(&write_pgm(&mask)).unwrap(), mask);
    }
});
