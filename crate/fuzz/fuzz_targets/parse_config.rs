#![no_main]

use caden::harness::{parse_config, render_config};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        let _ = cfg.scenario();
        let _ = cfg.design.validate();
        if let Ok(rendered) = render_config(&cfg) {
            assert_eq!(parse_config(&rendered).expect("rendered config must parse"), cfg);
        }
    }
});
