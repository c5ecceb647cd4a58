#![no_main]

use cglisp_core::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = Dataset::from_json(data) {
        let again = Dataset::from_json(ds.to_json().as_bytes()).unwrap();
        assert_eq!(again.len(), ds.len());
    }
});
