#![no_main]

use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated. `--config` is dropped so runs stay off the filesystem.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut argv = vec!["mtc".to_string()];
    argv.extend(
        text.split('\0')
            .filter(|a| !a.starts_with("--config"))
            .map(str::to_string),
    );
    if let Ok(cfg) = mtc_cli::parse_config(argv, |_| None) {
        let alpha = cfg.alpha_or_default();
        assert!(alpha > 0.0 && alpha < 1.0);
        if let Some(rho) = cfg.rho {
            assert!((0.0..1.0).contains(&rho));
        }
    }
});
