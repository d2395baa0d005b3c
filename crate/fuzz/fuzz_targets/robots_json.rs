#![no_main]

use libfuzzer_sys::fuzz_target;
use pal_core::morphology::{RobotSet, SamplingOptions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let latency = SamplingOptions::default().latency;
    if let Ok(set) = RobotSet::from_json(text, &latency) {
        let again = RobotSet::from_json(&set.to_json(), &latency).expect("accepted set reparses");
        assert_eq!(again, set);
    }
});
