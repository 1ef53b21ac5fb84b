#![no_main]

use libfuzzer_sys::fuzz_target;
use marketabm::harness::{parse_prices, parse_table};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = parse_table(text) {
        assert_eq!(table.header.len(), table.columns.len());
        assert!(table.columns.iter().all(|c| c.len() == table.rows()));
    }
    if let Ok(prices) = parse_prices(text, None) {
        assert!(prices.values().iter().all(|p| p.is_finite()));
    }
});
