//! Float math that works with and without `std`.
//!
//! `f64`'s transcendental methods live in `std`; in `no_std` builds they are
//! routed through `libm` instead.

#![allow(dead_code)]

macro_rules! shim {
    ($name:ident, $libm:path $(, $arg:ident)+) => {
        #[inline]
        pub(crate) fn $name($($arg: f64),+) -> f64 {
            #[cfg(feature = "std")]
            {
                f64::$name($($arg),+)
            }
            #[cfg(not(feature = "std"))]
            {
                $libm($($arg),+)
            }
        }
    };
}

shim!(sin, libm::sin, x);
shim!(cos, libm::cos, x);
shim!(exp, libm::exp, x);
shim!(sqrt, libm::sqrt, x);
shim!(abs, libm::fabs, x);
shim!(floor, libm::floor, x);
shim!(ceil, libm::ceil, x);
shim!(round, libm::round, x);
shim!(acos, libm::acos, x);
shim!(atan2, libm::atan2, y, x);
shim!(hypot, libm::hypot, x, y);

#[inline]
pub(crate) fn sq(x: f64) -> f64 {
    x * x
}

/// Euclidean remainder: result in `[0, m)` for `m > 0`.
#[inline]
pub(crate) fn rem_euclid(x: f64, m: f64) -> f64 {
    let r = x % m;
    if r < 0.0 {
        r + abs(m)
    } else {
        r
    }
}
