#![no_main]

use caden::harness::{read_dataset, write_dataset, ColumnMapping};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mapping = ColumnMapping::default();
    if let Ok(dataset) = read_dataset(data, &mapping) {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &dataset, &mapping).expect("accepted data must re-export");
        let again = read_dataset(buf.as_slice(), &mapping).expect("exported data must re-ingest");
        assert_eq!(again, dataset);
    }
});
