#![no_main]

use std::path::Path;

use difftrace::io::parse_support;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_support(data, Path::new("<fuzz>"));
});
