#![no_main]

use std::path::Path;

use difftrace::covariance::{sample_covariance, Group};
use difftrace::io::parse_observations;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(obs) = parse_observations(data, Path::new("<fuzz>"), Group::X) {
        assert!(obs.n() >= 2);
        let s = sample_covariance(&obs);
        assert_eq!(s.dim(), obs.p());
    }
});
