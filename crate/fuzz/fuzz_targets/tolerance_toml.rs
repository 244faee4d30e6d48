#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::format::{parse_tolerances, tolerances_to_toml};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(tol) = parse_tolerances(text) {
        assert_eq!(parse_tolerances(&tolerances_to_toml(&tol)).unwrap(), tol);
    }
});
