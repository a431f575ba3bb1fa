#![no_main]

use libfuzzer_sys::fuzz_target;
use rac_core::sweep::SweepGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = SweepGrid::parse(text) {
        let _ = grid.describe();
    }
});
