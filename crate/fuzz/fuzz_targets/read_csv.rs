#![no_main]

use hvp::field::Interp;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else { return };
    let interp = if flags & 2 == 0 { Interp::Bilinear } else { Interp::Bicubic };
    if let Ok(g) = hvp::field::io::read_csv(body, flags & 1 == 1, interp) {
        assert_eq!(g.samples().len(), g.nx() * g.nz());
    }
});
