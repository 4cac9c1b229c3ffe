#![no_main]

use crn_core::parser;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parser::parse(text) {
        Ok(file) => {
            // building may fail (rank, rates), but must not panic
            let _ = file.to_network(Some((1.0, 1.0)));
        }
        Err(e) => assert!(e.line >= 1 && e.column >= 1),
    }
});
