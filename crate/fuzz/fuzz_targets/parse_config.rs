#![no_main]

use libfuzzer_sys::fuzz_target;
use syntrophic::growth::FamilyRegistry;
use syntrophic::ConfigDocument;

fuzz_target!(|data: &str| {
    let Ok(doc) = ConfigDocument::parse(data) else {
        return;
    };
    // Accepted documents must survive a round trip and model construction.
    let text = serde_json::to_string(&doc).unwrap();
    assert_eq!(ConfigDocument::parse(&text).unwrap(), doc);
    let _ = doc.model(&FamilyRegistry::default());
    let _ = doc.chemostat_config();
});
