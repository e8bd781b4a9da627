use sotpim::arith::FloatLayout;
use sotpim::calibration::Calibration;
use sotpim::cost::{add_coeffs, analytic_mac_cost, analytic_mul_cost, mul_coeffs, PrimitiveCosts};

#[test]
fn spot_table_matches_closed_forms() {
    let text = include_str!("fixtures/analytic_spot.csv");
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let a = add_coeffs(v[0], v[1]).total();
        let m = mul_coeffs(v[0], v[1]).total();
        assert_eq!([a.t_read, a.t_write, a.t_search], [v[2], v[3], v[4]], "{line}");
        assert_eq!([a.e_read, a.e_write, a.e_search], [v[5], v[6], v[7]], "{line}");
        assert_eq!([m.t_read, m.t_write, m.e_read, m.e_write], [v[8], v[8], v[9], v[9]], "{line}");
        rows += 1;
    }
    assert_eq!(rows, 3);
}

fn bump(pc: PrimitiveCosts, i: usize) -> PrimitiveCosts {
    let mut f = [pc.t_read, pc.t_write, pc.t_search, pc.e_read, pc.e_write, pc.e_search];
    f[i] *= 1.5;
    PrimitiveCosts { t_read: f[0], t_write: f[1], t_search: f[2], e_read: f[3], e_write: f[4], e_search: f[5] }
}

#[test]
fn costs_monotone_in_every_primitive() {
    let pc = Calibration::shipped().primitive_costs().unwrap();
    for l in [FloatLayout::FP32, FloatLayout::new(5, 10).unwrap()] {
        let base = analytic_mac_cost(&l, &pc);
        assert!(base.latency_ns > 0.0 && base.energy_fj > 0.0);
        for i in 0..6 {
            let r = analytic_mac_cost(&l, &bump(pc, i));
            assert!(r.latency_ns >= base.latency_ns && r.energy_fj >= base.energy_fj, "primitive {i}");
        }
    }
}

#[test]
fn writes_dominate_mac_latency_with_shipped_config() {
    let pc = Calibration::shipped().primitive_costs().unwrap();
    let r = analytic_mac_cost(&FloatLayout::FP32, &pc);
    let w = r.by_primitive["write"].latency;
    for (k, s) in &r.by_primitive {
        if k != "write" {
            assert!(w > s.latency, "{k}");
        }
    }
    assert!(r.breakdown_error() < 1e-9);
}

#[test]
fn mul_report_has_no_search_cost() {
    let pc = Calibration::shipped().primitive_costs().unwrap();
    let r = analytic_mul_cost(&FloatLayout::FP32, &pc);
    assert_eq!(r.by_primitive["search"].latency, 0.0);
}
