//! Replays the checked-in fuzz seeds through the same checks the fuzz
//! targets make, so the corpus stays meaningful without a nightly toolchain.

use std::fs;
use std::path::PathBuf;

use sotpim::arith::{decode_float, FloatBits, FloatLayout};
use sotpim::calibration::Calibration;
use sotpim::subarray::{parse_trace_csv, trace_to_csv};
use sotpim::workload::NetworkSpec;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn accepted(target: &str, check: impl Fn(&[u8]) -> bool) -> Vec<String> {
    seeds(target).into_iter().filter(|(_, d)| check(d)).map(|(n, _)| n).collect()
}

fn text(d: &[u8]) -> &str {
    std::str::from_utf8(d).expect("seeds are utf-8")
}

#[test]
fn calibration_seeds() {
    let ok = accepted("calibration_json", |d| match Calibration::from_json(text(d)) {
        Ok(c) => {
            assert_eq!(Calibration::from_json(&c.to_json()).unwrap(), c);
            c.primitive_costs().unwrap();
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["shipped.json"]);
}

#[test]
fn netspec_seeds() {
    let ok = accepted("netspec_json", |d| match NetworkSpec::from_json(text(d)) {
        Ok(n) => {
            assert_eq!(n.stats().unwrap().len(), n.layers.len());
            assert_eq!(NetworkSpec::from_json(&n.to_json()).unwrap(), n);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["dense.json", "lenet5.json", "xor-mlp.json"]);
}

#[test]
fn layout_seeds() {
    let ok = accepted("layout_str", |d| match FloatLayout::parse(text(d)) {
        Ok(l) => {
            l.validate().unwrap();
            assert_eq!(FloatLayout::parse(&format!("{},{}", l.n_e, l.n_m)).unwrap(), l);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["l11_52_", "l3_2_", "l5_10_", "l8_23_", "l_8___23__"]);
}

#[test]
fn trace_seeds() {
    let ok = accepted("trace_csv", |d| match parse_trace_csv(text(d)) {
        Ok(ev) => {
            assert_eq!(parse_trace_csv(&trace_to_csv(&ev)).unwrap(), ev);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["header_only.csv", "mac_head.csv", "small.csv"]);
}

#[test]
fn float_raw_seeds() {
    let ok = accepted("float_raw", |d| {
        if d.len() < 18 {
            return false;
        }
        let Ok(l) = FloatLayout::new(2 + (d[0] % 15) as u32, 1 + (d[1] % 60) as u32) else {
            return false;
        };
        let raw = u128::from_le_bytes(d[2..18].try_into().unwrap());
        match FloatBits::from_raw(&l, raw) {
            Ok(f) => {
                assert_eq!(f.to_raw(&l), raw);
                f.validate(&l).unwrap();
                assert!(decode_float(&f, &l).is_finite());
                true
            }
            Err(_) => false,
        }
    });
    assert_eq!(ok, ["f64_pi", "max_f32", "neg_zero", "one_f32", "tiny"]);
}
