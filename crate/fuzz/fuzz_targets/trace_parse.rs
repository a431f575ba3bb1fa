#![no_main]

use libfuzzer_sys::fuzz_target;
use rac_core::Trace;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trace) = Trace::parse(text) {
        // Whatever parses must survive a save/load cycle.
        let again = Trace::parse(&trace.to_text()).expect("serialized trace parses");
        assert_eq!(again.to_text(), trace.to_text());
    }
});
