#![no_main]

use libfuzzer_sys::fuzz_target;
use syntrophic::config::parse_json;
use syntrophic::{BranchDiagram, RegimeReport};

fuzz_target!(|data: &str| {
    let _ = parse_json::<RegimeReport>(data);
    let _ = parse_json::<BranchDiagram>(data);
});
