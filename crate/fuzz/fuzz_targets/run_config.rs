#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = hvp_cli::config::parse(text) {
            // accepted configs survive a round trip
            let again = serde_json::to_string(&cfg).unwrap();
            hvp_cli::config::parse(&again).unwrap();
        }
    }
});
