#![no_main]

use libfuzzer_sys::fuzz_target;
use resflow::format::{parse_complex, parse_window};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = parse_window(text) {
        assert!(w.a.is_finite() && w.b.is_finite() && w.a < w.b);
    }
    if let Ok(z) = parse_complex(text) {
        assert!(z.re.is_finite() && z.im.is_finite());
    }
});
