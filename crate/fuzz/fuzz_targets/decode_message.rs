#![no_main]

use libfuzzer_sys::fuzz_target;

// Decoding arbitrary bytes must never panic, and anything that decodes must
// re-encode to the exact input bytes.
fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = bevglue::wire::decode(data) {
        let bytes = bevglue::wire::encode(&msg).expect("decoded message re-encodes");
        assert_eq!(bytes, data);
    }
});
