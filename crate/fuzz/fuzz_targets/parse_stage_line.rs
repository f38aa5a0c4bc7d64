#![no_main]

use libfuzzer_sys::fuzz_target;
use sbr_core::config::parse_stage_line;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(stage) = parse_stage_line(text) {
            assert!(stage.t_end_h.is_finite() && stage.t_start_h.is_finite());
        }
    }
});
