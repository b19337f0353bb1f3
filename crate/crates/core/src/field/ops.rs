use rand::Rng;

use super::{integrate, rng_for, Quadrature, Region, Surface};
use crate::error::{Error, Result};
use crate::heis::{cc_upper_sharp, HeisPoint};

/// `d psi/dx - psi d psi/dz` at `(x, z)`, unchecked.
pub fn horiz_deriv_at<S: Surface + ?Sized>(f: &S, x: f64, z: f64) -> f64 {
    let (gx, gz) = f.gradient(x, z);
    gx - f.value(x, z) * gz
}

/// Horizontal derivative with a domain check on the stencil.
pub fn horiz_deriv<S: Surface + ?Sized>(f: &S, x: f64, z: f64) -> Result<f64> {
    if !f.contains(x, z) {
        return Err(Error::OutOfDomain { x, z });
    }
    Ok(horiz_deriv_at(f, x, z))
}

/// The graph point `(x, 0, z) Y^{psi(x, z)}`.
pub fn graph_point<S: Surface + ?Sized>(f: &S, x: f64, z: f64) -> Result<HeisPoint> {
    if !f.contains(x, z) {
        return Err(Error::OutOfDomain { x, z });
    }
    Ok(HeisPoint::new(x, 0.0, z) * HeisPoint::y_gen(f.value(x, z)))
}

/// Lower estimate of the intrinsic Lipschitz constant from `npairs` random
/// pairs of graph points over `region`.
///
/// Pairs are drawn sequentially from one stream, so a run with more pairs
/// sees a superset of the pairs of a shorter run.
pub fn lipschitz_estimate<S: Surface + ?Sized>(f: &S, region: &Region, npairs: usize, seed: u64) -> Result<f64> {
    region.validate()?;
    region.check_inside(f)?;
    let mut rng = rng_for(seed, 0);
    let (xa, xb) = region.x_range();
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let x = xa + (xb - xa) * rng.gen::<f64>();
        let (lo, hi) = region.z_bounds(x);
        let z = lo + (hi - lo) * rng.gen::<f64>();
        HeisPoint::new(x, 0.0, z) * HeisPoint::y_gen(f.value(x, z))
    };
    let mut best = 0.0f64;
    for _ in 0..npairs {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let d = cc_upper_sharp(p.inv() * q);
        if d > 0.0 {
            best = best.max((p.y - q.y).abs() / d);
        }
    }
    Ok(best)
}

/// `int sqrt(1 + (d_psi psi)^2)` over `region` (area constant set to 1).
pub fn area_energy<S: Surface + ?Sized>(f: &S, region: &Region, quad: &Quadrature) -> Result<f64> {
    region.validate()?;
    region.check_inside(f)?;
    Ok(integrate(region, quad, |x, z| {
        let d = horiz_deriv_at(f, x, z);
        (1.0 + d * d).sqrt()
    }))
}
