#![no_main]

use libfuzzer_sys::fuzz_target;
use mvens::data_io::{read_tensor, write_tensor};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = read_tensor(data) {
        assert_eq!(g.values().len(), g.n() * g.c() * g.m());
        let mut buf = Vec::new();
        write_tensor(&g, &mut buf).unwrap();
        let again = read_tensor(buf.as_slice()).unwrap();
        for (a, b) in again.values().iter().zip(g.values()) {
            assert!(a == b || (a.is_nan() && b.is_nan()), "{a} vs {b}");
        }
    }
});
