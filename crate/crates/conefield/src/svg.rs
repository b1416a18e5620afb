//! Deterministic SVG drawing of a domain, geodesics and cone markers.
//!
//! Coordinates are domain units written with six decimals; there is no
//! transform, so the picture is mirrored vertically relative to the usual
//! mathematical orientation.

use std::fmt::Write as _;

use conefield_core::{DomainSpec, Point};

/// A cone marker: squares for positive k, circles for negative k, a cross for 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Marker {
    pub position: Point,
    pub k: i32,
    /// Filled for given cones, outlined for recovered ones.
    pub filled: bool,
}

fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn poly_points(pts: &[Point]) -> String {
    let mut s = String::with_capacity(pts.len() * 20);
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", num(p.x), num(p.y));
    }
    s
}

/// Renders the boundary (heavy), `paths` (thin) and `markers`.
pub fn emit_svg(domain: &DomainSpec, paths: &[Vec<Point>], markers: &[Marker]) -> String {
    let (lo, hi) = domain.bbox();
    let d = domain.diameter();
    let pad = 0.05 * d;
    let (x0, y0) = (lo.x - pad, lo.y - pad);
    let (w, h) = (hi.x - lo.x + 2.0 * pad, hi.y - lo.y + 2.0 * pad);
    let heavy = 0.008 * d;
    let thin = 0.002 * d;
    let glyph = 0.012 * d;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        num(x0),
        num(y0),
        num(w),
        num(h)
    );
    let _ = writeln!(s, r##"<g id="geodesics" fill="none" stroke="#1f5fa8" stroke-width="{}">"##, num(thin));
    for p in paths {
        if p.len() >= 2 {
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, poly_points(p));
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="boundary" fill="none" stroke="#000000" stroke-width="{}" stroke-linejoin="round">"##, num(heavy));
    for l in &domain.loops {
        let _ = writeln!(s, r#"<polygon points="{}"/>"#, poly_points(&l.polygonize()));
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="cones" stroke="#b00000" stroke-width="{}">"##, num(thin));
    for m in markers {
        let fill = if m.filled { "#b00000" } else { "none" };
        let (x, y) = (m.position.x, m.position.y);
        match m.k.signum() {
            1 => {
                let _ = writeln!(
                    s,
                    r#"<rect class="k{}" x="{}" y="{}" width="{}" height="{}" fill="{fill}"/>"#,
                    m.k,
                    num(x - glyph),
                    num(y - glyph),
                    num(2.0 * glyph),
                    num(2.0 * glyph)
                );
            }
            -1 => {
                let _ = writeln!(s, r#"<circle class="k{}" cx="{}" cy="{}" r="{}" fill="{fill}"/>"#, m.k, num(x), num(y), num(glyph));
            }
            _ => {
                let _ = writeln!(
                    s,
                    r#"<path class="k0" d="M{} {}L{} {}M{} {}L{} {}" fill="none"/>"#,
                    num(x - glyph),
                    num(y),
                    num(x + glyph),
                    num(y),
                    num(x),
                    num(y - glyph),
                    num(x),
                    num(y + glyph)
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use conefield_core::geometry::rectangle;
    use conefield_core::Quantum;

    #[test]
    fn boundary_only() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let s = emit_svg(&d, &[], &[]);
        assert_eq!(s.matches("<polyline").count(), 0);
        assert_eq!(s.matches("<polygon").count(), 1);
        assert!(s.contains(r#"points="0.000000,0.000000 1.000000,0.000000 1.000000,1.000000 0.000000,1.000000 0.000000,0.000000""#));
    }

    #[test]
    fn markers_by_sign() {
        let d = rectangle(0.0, 0.0, 1.0, 1.0, Quantum::Quad);
        let m = [
            Marker { position: Point::new(0.3, 0.5), k: 1, filled: true },
            Marker { position: Point::new(0.7, 0.5), k: -1, filled: false },
        ];
        let s = emit_svg(&d, &vec![vec![Point::ZERO, Point::new(0.5, 0.5)]; 3], &m);
        assert_eq!(s.matches("<polyline").count(), 3);
        assert_eq!(s.matches("<rect").count(), 1);
        assert_eq!(s.matches("<circle").count(), 1);
        assert_eq!(num(-1e-9), "0.000000");
    }
}
