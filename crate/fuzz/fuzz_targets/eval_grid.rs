#![no_main]

use libfuzzer_sys::fuzz_target;
use pal_core::eval::parse_grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = parse_grid(text) {
        assert!(!grid.is_empty());
        assert!(grid.iter().all(|v| v.is_finite()));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }
});
