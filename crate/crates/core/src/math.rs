use core::f64::consts::{PI, TAU};

use crate::geometry::Point;

// Float supplies f64 math when std is absent; with std in the graph the
// inherent methods win and the import goes unused.
pub(crate) use num_traits::Float;

/// Wraps an angle into (−π, π].
pub(crate) fn wrap_pi(a: f64) -> f64 {
    let mut x = a % TAU;
    if x <= -PI {
        x += TAU;
    } else if x > PI {
        x -= TAU;
    }
    x
}

/// Reduces `a` into [0, m).
pub(crate) fn modulo(a: f64, m: f64) -> f64 {
    let r = a % m;
    if r < 0.0 {
        let s = r + m;
        if s >= m {
            0.0
        } else {
            s
        }
    } else {
        r
    }
}

/// Nearest lattice index of `x` on `q·ℤ` and the distance to it.
pub(crate) fn lattice(x: f64, q: f64) -> (i64, f64) {
    let n = (x / q).round();
    (n as i64, (x - n * q).abs())
}

/// Signed angle subtended at `c` by the segment from `a` to `b`.
pub(crate) fn subtended(c: Point, a: Point, b: Point) -> f64 {
    let (u, v) = (a - c, b - c);
    u.cross(v).atan2(u.dot(v))
}
