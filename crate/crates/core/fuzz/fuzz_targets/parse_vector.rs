#![no_main]

use crn_core::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = io::parse_vector(text) {
        assert!(v.iter().all(|x| x.is_finite()));
        let joined: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        assert_eq!(io::parse_vector(&joined.join(",")).unwrap(), v);
    }
});
