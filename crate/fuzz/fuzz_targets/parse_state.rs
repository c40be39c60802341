#![no_main]

use libfuzzer_sys::fuzz_target;
use syntrophic::config::{parse_full_state, parse_planar_state};

fuzz_target!(|data: &str| {
    if let Ok(s) = parse_full_state(data) {
        assert!(s.as_array().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    if let Ok(p) = parse_planar_state(data) {
        assert!(p.as_array().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
});
