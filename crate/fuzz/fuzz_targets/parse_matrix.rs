#![no_main]

use std::path::Path;

use difftrace::io::{parse_matrix, parse_sym_matrix, write_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let src = Path::new("<fuzz>");
    if let Ok(m) = parse_matrix(data, src) {
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert_eq!(parse_matrix(&buf, src).unwrap(), m);
    }
    let _ = parse_sym_matrix(data, src);
});
