#![no_main]

use libfuzzer_sys::fuzz_target;
use pal_core::dim::DimDataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = DimDataset::from_bytes(data) {
        let bytes = ds.to_bytes();
        let again = DimDataset::from_bytes(&bytes).expect("accepted dataset reparses");
        assert_eq!(again.to_bytes(), bytes);
    }
});
