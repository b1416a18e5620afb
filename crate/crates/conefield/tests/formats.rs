use std::f64::consts::TAU;

use conefield::formats::{read_cauchy, write_cauchy, DomainFile, FieldDump};
use conefield_core::geometry::disk;
use conefield_core::inverse_poisson::cauchy_from_field;
use conefield_core::{ConePoint, PhiField, Point, Quantum};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn field_dump_round_trips(r in 0.0f64..0.8, a in 0.0f64..TAU, k in -3i32..=3, c in -2.0f64..2.0) {
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::polar(r, a), k)).with_constant(c);
        let dump = FieldDump::from_field(&f);
        let text = serde_json::to_string(&dump).unwrap();
        let back: FieldDump = serde_json::from_str(&text).unwrap();
        let g = back.to_field().unwrap();
        let p = Point::new(0.9, 0.05);
        prop_assert_eq!(f.eval_phi(p).unwrap(), g.eval_phi(p).unwrap());
    }

    #[test]
    fn cauchy_csv_round_trips(r in 0.0f64..0.7, a in 0.0f64..TAU, k in -2i32..=2) {
        let d = disk(Point::ZERO, 1.0, Quantum::Quad);
        let f = PhiField::new(Quantum::Quad, 2.0).with_cone(ConePoint::interior(Point::polar(r, a), k));
        let data = cauchy_from_field(&d, &f).unwrap();
        let mut buf = Vec::new();
        write_cauchy(&data, &mut buf).unwrap();
        let back = read_cauchy(buf.as_slice()).unwrap();
        prop_assert_eq!(back.samples, data.samples);
    }
}

#[test]
fn domain_file_round_trips() {
    let d = disk(Point::new(0.5, -0.25), 2.0, Quantum::Tri);
    let doc = DomainFile::from_domain(&d, &[ConePoint::interior(Point::new(0.5, 0.0), -1)]);
    let back = DomainFile::from_json(&doc.to_json().unwrap()).unwrap();
    assert_eq!(back, doc);
    let d2 = back.to_domain(None).unwrap();
    assert_eq!(d2.quantum, Quantum::Tri);
    assert!((d2.diameter() - d.diameter()).abs() < 1e-12);
}
