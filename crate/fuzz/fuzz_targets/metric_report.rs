#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::io::report::{join_metric_reports, parse_metric_report};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = parse_metric_report(text) {
        let _ = join_metric_reports(&[report]);
    }
});
