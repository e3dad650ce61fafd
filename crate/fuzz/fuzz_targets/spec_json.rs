#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // accepted specs must survive a write/parse cycle unchanged
        if let Ok((spec, _)) = remlab_cli::parse_spec(text) {
            let written = remlab_cli::write_spec(&spec).expect("built-in families serialize");
            let (again, _) = remlab_cli::parse_spec(&written).expect("written spec parses");
            assert_eq!(spec, again);
        }
    }
});
