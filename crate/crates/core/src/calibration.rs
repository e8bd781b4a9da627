//! Calibration file: device, peripheral, baseline and area parameters.
//!
//! The shipped file is back-fitted by [`fit`] so that the proposed design
//! reproduces a set of target ratios against the baseline. Its numbers are
//! calibrated, not measured.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arith::FloatLayout;
use crate::cost::{
    analytic_mac_cost, baseline_counts, derive_primitive_costs, mul_coeffs, add_coeffs, BaselineParams,
    CellParams, PeripheralParams, PrimitiveCosts,
};
use crate::error::{Error, Result};

pub const DEFAULT_JSON: &str = include_str!("../../../configs/calibration.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaParams {
    pub proposed_subarray_mm2: f64,
    pub baseline_subarray_mm2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastMram {
    /// Replacement switching time in seconds.
    pub t_switch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadParams {
    /// Backward-pass MACs per forward MAC.
    pub backward_factor: u32,
    /// Update MACs per parameter per sample.
    pub update_factor: u32,
    pub weight_traffic_ns_per_bit: f64,
    pub weight_traffic_fj_per_bit: f64,
    /// Cells available per subarray for weights.
    pub cells_per_subarray: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative simulated-vs-closed-form deviation allowed.
    pub reconcile: f64,
    /// Relative deviation allowed on calibrated ratios.
    pub ratio: f64,
    /// Allowed error on the fast-MRAM latency drop, in percentage points.
    pub fast_mram_pp: f64,
}

/// Ratios the file was fitted to; baseline over proposed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub mac_energy_ratio: f64,
    pub mac_latency_ratio: f64,
    pub area_ratio: f64,
    /// Fractional MAC latency reduction of the fast-MRAM variant.
    pub fast_mram_latency_drop: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub note: String,
    pub cell: CellParams,
    pub peripheral: PeripheralParams,
    pub baseline: BaselineParams,
    pub area: AreaParams,
    pub fast_mram: FastMram,
    pub workload: WorkloadParams,
    pub tolerances: Tolerances,
    pub targets: Targets,
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

fn finite_pos(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Calibration {
    pub fn shipped() -> Calibration {
        Self::from_json(DEFAULT_JSON).expect("bundled calibration parses")
    }

    pub fn from_json(text: &str) -> Result<Calibration> {
        let c: Calibration = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Calibration> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.cell.validate()?;
        self.peripheral.validate()?;
        self.baseline.validate()?;
        check(finite_pos(self.area.proposed_subarray_mm2), "proposed_subarray_mm2 must be positive")?;
        check(finite_pos(self.area.baseline_subarray_mm2), "baseline_subarray_mm2 must be positive")?;
        check(finite_pos(self.fast_mram.t_switch), "fast_mram.t_switch must be positive")?;
        let w = &self.workload;
        check(
            w.weight_traffic_ns_per_bit.is_finite() && w.weight_traffic_ns_per_bit >= 0.0,
            "weight_traffic_ns_per_bit must be nonnegative",
        )?;
        check(
            w.weight_traffic_fj_per_bit.is_finite() && w.weight_traffic_fj_per_bit >= 0.0,
            "weight_traffic_fj_per_bit must be nonnegative",
        )?;
        check(w.cells_per_subarray > 0, "cells_per_subarray must be positive")?;
        let t = &self.tolerances;
        check(finite_pos(t.reconcile) && finite_pos(t.ratio) && finite_pos(t.fast_mram_pp), "tolerances must be positive")?;
        let g = &self.targets;
        check(
            finite_pos(g.mac_energy_ratio) && finite_pos(g.mac_latency_ratio) && finite_pos(g.area_ratio),
            "target ratios must be positive",
        )?;
        check(
            g.fast_mram_latency_drop.is_finite() && (0.0..1.0).contains(&g.fast_mram_latency_drop),
            "fast_mram_latency_drop must be in [0, 1)",
        )
    }

    pub fn primitive_costs(&self) -> Result<PrimitiveCosts> {
        derive_primitive_costs(&self.cell, &self.peripheral)
    }

    /// Same file with the fast-MRAM switching time swapped in.
    pub fn with_fast_mram(&self) -> Calibration {
        let mut c = self.clone();
        c.cell.t_switch = self.fast_mram.t_switch;
        c
    }
}

/// Re-derives the fitted fields of `base` (baseline NOR latency and energy,
/// baseline area, fast-MRAM switching time) from `base.targets` at `layout`.
pub fn fit(base: &Calibration, layout: &FloatLayout) -> Result<Calibration> {
    let pc = base.primitive_costs()?;
    let prop = analytic_mac_cost(layout, &pc);
    let g = base.targets;
    let mut c = base.clone();

    let mut steps = 0.0;
    let mut cells = 0.0;
    let mut writes = 0.0;
    for (_, k) in baseline_counts(layout, &base.baseline) {
        steps += k.nor_steps;
        cells += k.nor_cells;
        writes += k.writes;
    }
    let t_nor = (g.mac_latency_ratio * prop.latency_ns - writes * base.baseline.t_write_ns) / steps;
    let e_nor = g.mac_energy_ratio * prop.energy_fj / (cells + writes * base.baseline.write_vs_nor_energy_ratio);
    check(t_nor > 0.0, "target latency ratio unreachable with this baseline write time")?;
    c.baseline.t_nor_ns = t_nor;
    c.baseline.e_nor_fj = e_nor;
    c.area.baseline_subarray_mm2 = g.area_ratio * base.area.proposed_subarray_mm2;

    // MAC latency is affine in t_write: T = fixed + w * t_write
    let (ne, nm) = (layout.n_e as f64, layout.n_m as f64);
    let tot = add_coeffs(ne, nm).total() + mul_coeffs(ne, nm).total();
    let fixed = tot.t_read * pc.t_read + tot.t_search * pc.t_search;
    let t_write = ((1.0 - g.fast_mram_latency_drop) * prop.latency_ns - fixed) / tot.t_write;
    let t_switch_ns = t_write - base.peripheral.write_overhead_ns;
    check(t_switch_ns > 0.0, "fast-MRAM latency drop unreachable")?;
    c.fast_mram.t_switch = t_switch_ns * 1e-9;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_parses_and_roundtrips() {
        let c = Calibration::shipped();
        assert_eq!(Calibration::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        let c = Calibration::shipped();
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["cell"]["extra"] = 1.into();
        assert!(Calibration::from_json(&v.to_string()).is_err());
        let mut bad = c.clone();
        bad.cell.r_off = 1.0;
        assert!(Calibration::from_json(&bad.to_json()).is_err());
        assert!(Calibration::from_json("{").is_err());
    }

    #[test]
    fn shipped_file_is_a_fixed_point_of_fit() {
        let c = Calibration::shipped();
        let f = fit(&c, &FloatLayout::FP32).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(c.baseline.t_nor_ns, f.baseline.t_nor_ns) < 1e-3);
        assert!(rel(c.baseline.e_nor_fj, f.baseline.e_nor_fj) < 1e-3);
        assert!(rel(c.area.baseline_subarray_mm2, f.area.baseline_subarray_mm2) < 1e-3);
        assert!(rel(c.fast_mram.t_switch, f.fast_mram.t_switch) < 1e-3);
    }
}
