#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(body) = cglisp_service::api::parse_response_body(data) {
        let _ = body.response();
    }
});
