#![no_main]

use libfuzzer_sys::fuzz_target;
use mvens::data_io::{read_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = read_csv(data) {
        assert!(ds.n() > 0);
        assert_eq!(ds.features().len(), ds.n() * ds.d());
        assert!(ds.labels().iter().all(|&l| l < ds.n_classes()));
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let again = read_csv(buf.as_slice()).unwrap();
        assert_eq!(again.n(), ds.n());
        assert_eq!(again.d(), ds.d());
    }
});
