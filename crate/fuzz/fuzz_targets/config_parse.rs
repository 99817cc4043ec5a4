#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = sigen_cli::parse_config(text) {
        // Anything accepted must survive its own serialization.
        let again = sigen_cli::parse_config(&config.to_toml()).expect("re-parse");
        assert_eq!(again, config);
    }
});
