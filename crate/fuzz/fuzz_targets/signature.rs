#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::model::{format_signature, parse_signature};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(sig) = parse_signature(text) {
        assert!(!sig.is_empty());
        assert!(sig.iter().all(|&s| s == 1 || s == -1));
        assert_eq!(parse_signature(&format_signature(&sig)).unwrap(), sig);
    }
});
