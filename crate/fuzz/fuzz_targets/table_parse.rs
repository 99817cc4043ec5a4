#![no_main]

use libfuzzer_sys::fuzz_target;
use sigen_cli::Table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = Table::parse(text) {
        let again = Table::parse(&table.to_string()).expect("re-parse");
        assert_eq!(again, table);
    }
});
