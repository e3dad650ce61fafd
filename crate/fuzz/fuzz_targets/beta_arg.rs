#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(betas) = remlab_cli::args::parse_betas(text) {
            assert!(!betas.is_empty() && betas.len() <= remlab_cli::args::MAX_BETAS);
            assert!(betas.iter().all(|b| b.is_finite()));
        }
    }
});
