#![no_main]

use libfuzzer_sys::fuzz_target;

// Replay logs carry length-prefixed records; corrupt prefixes must surface
// as errors, never as panics or oversized allocations.
fuzz_target!(|data: &[u8]| {
    if let Ok(messages) = bevglue::wire::decode_replay(data) {
        let bytes = bevglue::wire::encode_replay(&messages).expect("decoded log re-encodes");
        assert_eq!(bytes, data);
    }
});
