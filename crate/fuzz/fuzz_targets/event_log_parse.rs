#![no_main]

use libfuzzer_sys::fuzz_target;
use rac_core::events::{format_log, parse_log};
use rac_core::tsi::replay_dep_oracle;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(events) = parse_log(text) {
        let again = parse_log(&format_log(&events)).expect("formatted log parses");
        assert_eq!(again.len(), events.len());
        let _ = replay_dep_oracle(&events);
    }
});
