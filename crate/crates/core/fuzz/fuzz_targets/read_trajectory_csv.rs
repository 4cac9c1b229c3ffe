#![no_main]

use crn_core::io;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = io::read_csv(text) else { return };
    // anything accepted must survive a write/read cycle bit for bit
    let back = io::read_csv(&io::write_csv(&table)).expect("written CSV reads back");
    assert_eq!(back.layout, table.layout);
    assert_eq!(back.truncated, table.truncated);
    assert_eq!(back.records.len(), table.records.len());
    for (a, b) in back.records.iter().zip(&table.records) {
        let bits = |r: &crn_core::scheme::Record| {
            let mut v = vec![r.t];
            v.extend(&r.c);
            v.extend(&r.extents);
            v.push(r.free_energy);
            v.extend(&r.conservation);
            v.into_iter().map(|x| if x.is_nan() { u64::MAX } else { x.to_bits() }).collect::<Vec<_>>()
        };
        assert_eq!(bits(a), bits(b));
    }
});
