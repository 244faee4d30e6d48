#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::format::{instance_to_json, parse_instance_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(inst) = parse_instance_json(text) {
        let again = parse_instance_json(&instance_to_json(&inst)).expect("serialized instance parses");
        assert_eq!(again, inst);
    }
});
