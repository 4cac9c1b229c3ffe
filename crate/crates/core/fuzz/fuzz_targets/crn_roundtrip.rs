#![no_main]

use crn_core::parser;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((network, c0)) = parser::load(text, Some((1.0, 1.0))) else { return };
    let Ok(once) = parser::serialize(&network, c0.as_deref()) else { return };
    let (back, back_c0) = parser::load(&once, None).expect("canonical text parses");
    assert_eq!(back, network);
    assert_eq!(back_c0, c0);
    assert_eq!(parser::serialize(&back, back_c0.as_deref()).unwrap(), once);
});
