#![no_main]

use libfuzzer_sys::fuzz_target;
use mvens::data_io::{read_report, write_report};

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = read_report(data) {
        assert_eq!(r.loss_trajectory.len(), r.iterations_run + 1);
        let mut buf = Vec::new();
        write_report(&r, &mut buf).unwrap();
        assert_eq!(read_report(buf.as_slice()).unwrap(), r);
    }
});
