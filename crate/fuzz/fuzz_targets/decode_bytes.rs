#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = hvp::field::io::decode_bytes(data) {
        assert_eq!(g.samples().len(), g.nx() * g.nz());
    }
});
