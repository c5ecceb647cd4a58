#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(req) = cglisp_service::api::parse_create_request(data) else {
        return;
    };
    if let Ok((config, names, _units)) = req.into_config() {
        assert_eq!(names.len(), config.domain.dim());
    }
});
