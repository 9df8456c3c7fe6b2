use std::fs;

use fringe_core::io::{
    read_field, read_pgm, read_vector_field, report_csv, write_field, write_pgm,
    write_pgm_with_maxval, write_report, write_vector_field,
};
use fringe_core::{alm_demodulate, synthesize, ScalarField, SolverConfig, SyntheticSpec, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

#[test]
fn field_round_trip_is_bitwise() {
    let tmp = TempDir::new().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let values: Vec<f64> = (0..17 * 13).map(|_| rng.random_range(-1e3..1e3)).collect();
    let f = ScalarField::from_vec(17, 13, values).unwrap();
    let p = tmp.path().join("f.f64f");
    write_field(&f, &p).unwrap();
    let back = read_field(&p).unwrap();
    assert_eq!((back.width(), back.height()), (17, 13));
    for (a, b) in f.values().iter().zip(back.values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn field_header_and_payload_size() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("big.f64f");
    write_field(&ScalarField::zeros(640, 480), &p).unwrap();
    let bytes = fs::read(&p).unwrap();
    assert_eq!(&bytes[..13], b"F64F 640 480\n");
    assert_eq!(bytes.len() - 13, 2_457_600);
}

#[test]
fn vector_field_is_two_planes() {
    let tmp = TempDir::new().unwrap();
    let v = VectorField::from_planes(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![-1.0; 6]).unwrap();
    let p = tmp.path().join("v.f64f");
    write_vector_field(&v, &p).unwrap();
    assert_eq!(read_vector_field(&p).unwrap(), v);
    // A two-plane payload is not a scalar field.
    assert!(read_field(&p).is_err());
    let bytes = fs::read(&p).unwrap();
    assert_eq!(bytes.len(), b"F64F 3 2\n".len() + 2 * 6 * 8);
}

#[test]
fn truncated_or_foreign_files_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("bad");
    fs::write(&p, b"F64F 2 2\n\0\0\0\0\0\0\0\0").unwrap();
    assert!(read_field(&p).unwrap_err().to_string().contains("size mismatch"));
    fs::write(&p, b"P5\n2 2\n255\n\0").unwrap();
    assert!(read_field(&p).unwrap_err().to_string().contains("magic"));
    assert!(read_pgm(&p).unwrap_err().to_string().contains("truncated"));
    assert!(read_field(tmp.path().join("missing")).is_err());
}

#[test]
fn pgm_clamps_and_rounds_half_up() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("c.pgm");
    let f = ScalarField::from_vec(4, 1, vec![1.5, -0.2, 0.5, 1.5 / 255.0]).unwrap();
    write_pgm(&f, &p).unwrap();
    let bytes = fs::read(&p).unwrap();
    assert_eq!(&bytes[bytes.len() - 4..], &[255, 0, 128, 2]);
}

#[test]
fn sixteen_bit_pgm_round_trip() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("w.pgm");
    let f = ScalarField::from_fn(5, 4, |i, j| ((i * 4 + j) * 1000) as f64 / 65535.0);
    write_pgm_with_maxval(&f, &p, 65535).unwrap();
    assert_eq!(read_pgm(&p).unwrap(), f);
    assert!(write_pgm_with_maxval(&f, &p, 1000).is_err());
}

#[test]
fn converged_report_ends_below_tolerance() {
    let truth = synthesize(&SyntheticSpec::canonical(32, 24)).unwrap();
    let cfg = SolverConfig::default();
    let (_, report) = alm_demodulate(&truth.g, &truth.omega, &cfg, None).unwrap();
    assert!(report.converged);
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("report.csv");
    write_report(&report.without_timing(), &p).unwrap();
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text, report_csv(&report.without_timing()));
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "#final");
    for rel in &last[2..5] {
        assert!(rel.parse::<f64>().unwrap() <= cfg.eps);
    }
    // No truth: empty q_err; no timing: empty wall_ms.
    assert_eq!(last[9], "");
    assert_eq!(last[10], "");
    assert_eq!(text.lines().count(), report.records.len() + 2);
}

proptest! {
    #[test]
    fn eight_bit_pgm_round_trips(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let tmp = TempDir::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend((0..w * h).map(|_| rng.random::<u8>()));
        let (src, dst) = (tmp.path().join("a.pgm"), tmp.path().join("b.pgm"));
        fs::write(&src, &bytes).unwrap();
        write_pgm(&read_pgm(&src).unwrap(), &dst).unwrap();
        prop_assert_eq!(fs::read(&dst).unwrap(), bytes);
    }

    #[test]
    fn field_files_are_byte_deterministic(values in prop::collection::vec(-1e6f64..1e6, 1..64)) {
        let tmp = TempDir::new().unwrap();
        let f = ScalarField::from_vec(values.len(), 1, values).unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        write_field(&f, &a).unwrap();
        write_field(&f, &b).unwrap();
        prop_assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}
