#![no_main]

use libfuzzer_sys::fuzz_target;
use rac_core::sweep::{parse_csv, to_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_csv(text) {
        let out = to_csv(&rows, &[]).expect("rows render");
        let again = parse_csv(&out).expect("rendered table parses");
        assert_eq!(again.len(), rows.len());
    }
});
