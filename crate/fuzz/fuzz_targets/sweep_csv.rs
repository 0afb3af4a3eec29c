#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::cost::{parse_sweep_csv, sweep_csv};
use rgk_core::io::report::merge_sweeps;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_sweep_csv(text) {
        let again = sweep_csv(&rows).unwrap();
        assert_eq!(parse_sweep_csv(&again).unwrap(), rows);
    }
    let _ = merge_sweeps(&[text]);
});
