#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(b) = remlab_cli::args::parse_box(text) {
            assert!(b.intervals().iter().all(|&(lo, hi)| lo <= hi));
        }
    }
});
