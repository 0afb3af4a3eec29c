#![no_main]

use libfuzzer_sys::fuzz_target;
use rgk_core::io::embeddings::parse_embeddings;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = parse_embeddings(text) {
        let dim = table.values().next().map(Vec::len);
        assert!(table.values().all(|v| Some(v.len()) == dim && v.iter().all(|x| x.is_finite())));
    }
});
