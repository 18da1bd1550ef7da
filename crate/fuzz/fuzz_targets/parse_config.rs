#![no_main]

use libfuzzer_sys::fuzz_target;

// The config reader takes operator-written text, so any byte soup must come
// back as a parse error, not a panic. Accepted text must survive a render
// and re-parse with the same rendered form.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = bevglue::harness::config::parse_config(text) {
        let rendered = bevglue::harness::config::render_config(&cfg);
        let reparsed = bevglue::harness::config::parse_config(&rendered)
            .expect("rendered config re-parses");
        assert_eq!(rendered, bevglue::harness::config::render_config(&reparsed));
    }
});
