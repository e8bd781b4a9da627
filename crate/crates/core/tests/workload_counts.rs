use sotpim::arith::{FloatLayout, PimArith, ReferenceArith};
use sotpim::calibration::Calibration;
use sotpim::workload::{count_training_macs, functional_train_tiny, NetworkSpec, TinyConfig, TrainingPlan};

#[test]
fn lenet_matches_hand_count() {
    let net = NetworkSpec::preset("lenet5").unwrap();
    let stats = net.stats().unwrap();
    let text = include_str!("fixtures/lenet5_layers.csv");
    let rows: Vec<(u64, u64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), stats.len());
    for (s, (p, m)) in stats.iter().zip(&rows) {
        assert_eq!((s.params, s.macs), (*p, *m), "{:?}", s.layer);
    }
    assert_eq!(net.total_params().unwrap(), 21_690);
    assert_eq!(net.forward_macs().unwrap(), 183_360);
}

#[test]
fn macs_linear_in_batch() {
    let wp = Calibration::shipped().workload;
    let net = NetworkSpec::preset("lenet5").unwrap();
    let one = count_training_macs(&net, 1, &wp).unwrap();
    let eight = count_training_macs(&net, 8, &wp).unwrap();
    assert_eq!(one.backward, 2 * one.forward);
    assert_eq!(eight.total(), 8 * one.total());
    let plan = TrainingPlan::new(&net, 4, 3, &FloatLayout::FP32, &wp).unwrap();
    assert_eq!(plan.total_macs(), 12 * one.total());
    assert_eq!(plan.subarrays_used, 1);
}

#[test]
fn short_pim_run_matches_reference_on_half_precision() {
    let l = FloatLayout::new(5, 10).unwrap();
    let net = NetworkSpec::preset("xor-mlp").unwrap();
    let cfg = TinyConfig { epochs: 20, ..TinyConfig::default() };
    let a = functional_train_tiny(&mut PimArith::new(l).unwrap(), &net, &cfg).unwrap();
    let b = functional_train_tiny(&mut ReferenceArith { layout: l }, &net, &cfg).unwrap();
    assert_eq!(a, b);
}
