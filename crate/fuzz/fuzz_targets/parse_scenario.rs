#![no_main]

use libfuzzer_sys::fuzz_target;
use sbr_core::config::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::parse(text) {
        // Anything accepted must survive a round trip unchanged.
        let again = ScenarioConfig::parse(&cfg.serialize()).expect("serialized config parses");
        assert_eq!(cfg, again);
        let _ = cfg.to_problem();
    }
});
