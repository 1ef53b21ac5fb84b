#![no_main]

use libfuzzer_sys::fuzz_target;
use marketabm::harness::load_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = load_config(text) {
        // A config that loads must expand into valid runs and hash.
        config.runs().expect("validated config expands");
        let _ = config.hash();
    }
});
