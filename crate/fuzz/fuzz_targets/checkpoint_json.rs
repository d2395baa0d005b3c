#![no_main]

use libfuzzer_sys::fuzz_target;
use pal_core::nn::Checkpoint;

// Only the container is decoded here. Rebuilding a trainer from an arbitrary
// meta object would allocate whatever network sizes the input asks for.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ck) = Checkpoint::from_json(text) {
        let again = Checkpoint::from_json(&ck.to_json()).expect("accepted checkpoint reparses");
        assert_eq!(again.to_json(), ck.to_json());
    }
});
