//! Latency, energy and area pricing.
//!
//! Units: latency in ns, energy in fJ, area in mm². Device parameters in
//! [`CellParams`] are SI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::FloatLayout;
use crate::error::{Error, Result};
use crate::subarray::LogSummary;

/// SOT-MRAM cell parameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub r_on: f64,
    pub r_off: f64,
    pub v_b: f64,
    pub i_write: f64,
    pub t_switch: f64,
    pub e_switch: f64,
}

impl Default for CellParams {
    fn default() -> Self {
        CellParams {
            r_on: 50e3,
            r_off: 100e3,
            v_b: 0.6,
            i_write: 65e-6,
            t_switch: 2.0e-9,
            e_switch: 12.0e-15,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

impl CellParams {
    pub fn validate(&self) -> Result<()> {
        positive("r_on", self.r_on)?;
        positive("r_off", self.r_off)?;
        positive("v_b", self.v_b)?;
        positive("i_write", self.i_write)?;
        positive("t_switch", self.t_switch)?;
        positive("e_switch", self.e_switch)?;
        if self.r_off <= self.r_on {
            return Err(Error::Config("r_off must exceed r_on".into()));
        }
        Ok(())
    }

    /// Read-path resistance ratio.
    pub fn on_off_ratio(&self) -> f64 {
        self.r_off / self.r_on
    }
}

/// Costs of the sense path, the search path and write drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeripheralParams {
    pub t_read_ns: f64,
    pub e_read_fj: f64,
    pub t_search_ns: f64,
    pub e_search_fj: f64,
    pub write_overhead_ns: f64,
    pub write_overhead_fj: f64,
}

impl PeripheralParams {
    pub const ZERO_OVERHEAD: PeripheralParams = PeripheralParams {
        t_read_ns: 0.3,
        e_read_fj: 1.0,
        t_search_ns: 0.6,
        e_search_fj: 20.0,
        write_overhead_ns: 0.0,
        write_overhead_fj: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        positive("t_read_ns", self.t_read_ns)?;
        positive("e_read_fj", self.e_read_fj)?;
        positive("t_search_ns", self.t_search_ns)?;
        positive("e_search_fj", self.e_search_fj)?;
        nonneg("write_overhead_ns", self.write_overhead_ns)?;
        nonneg("write_overhead_fj", self.write_overhead_fj)
    }
}

/// Per-event latency (ns) and per-bit energy (fJ) of the three micro-ops.
/// Search energy is charged per search event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveCosts {
    pub t_read: f64,
    pub t_write: f64,
    pub t_search: f64,
    pub e_read: f64,
    pub e_write: f64,
    pub e_search: f64,
}

impl PrimitiveCosts {
    pub const UNIT: PrimitiveCosts = PrimitiveCosts {
        t_read: 1.0,
        t_write: 1.0,
        t_search: 1.0,
        e_read: 1.0,
        e_write: 1.0,
        e_search: 1.0,
    };
}

pub fn derive_primitive_costs(cp: &CellParams, per: &PeripheralParams) -> Result<PrimitiveCosts> {
    cp.validate()?;
    per.validate()?;
    Ok(PrimitiveCosts {
        t_read: per.t_read_ns,
        t_write: cp.t_switch * 1e9 + per.write_overhead_ns,
        t_search: per.t_search_ns,
        e_read: per.e_read_fj,
        e_write: cp.e_switch * 1e15 + per.write_overhead_fj,
        e_search: per.e_search_fj,
    })
}

pub const STAGES: [&str; 4] = ["exponent", "alignment", "mantissa", "normalization"];
pub const PRIMITIVES: [&str; 3] = ["read", "write", "search"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Share {
    pub latency: f64,
    pub energy: f64,
}

impl std::ops::AddAssign for Share {
    fn add_assign(&mut self, o: Share) {
        self.latency += o.latency;
        self.energy += o.energy;
    }
}

/// Totals plus two breakdowns: by pipeline stage and by micro-op kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub latency_ns: f64,
    pub energy_fj: f64,
    pub area_mm2: f64,
    pub breakdown: BTreeMap<String, Share>,
    pub by_primitive: BTreeMap<String, Share>,
}

impl CostReport {
    fn from_parts(stages: &[(&str, Share)], prims: &[(&str, Share)]) -> Self {
        let mut r = CostReport::default();
        for (k, s) in stages {
            r.latency_ns += s.latency;
            r.energy_fj += s.energy;
            *r.breakdown.entry(k.to_string()).or_default() += *s;
        }
        for (k, s) in prims {
            *r.by_primitive.entry(k.to_string()).or_default() += *s;
        }
        r
    }

    /// Element-wise sum, e.g. for a MAC = mul + add.
    pub fn plus(&self, o: &CostReport) -> CostReport {
        let mut r = self.clone();
        r.latency_ns += o.latency_ns;
        r.energy_fj += o.energy_fj;
        r.area_mm2 += o.area_mm2;
        for (k, s) in &o.breakdown {
            *r.breakdown.entry(k.clone()).or_default() += *s;
        }
        for (k, s) in &o.by_primitive {
            *r.by_primitive.entry(k.clone()).or_default() += *s;
        }
        r
    }

    /// Multiplies latency, energy and all breakdown entries by `k`.
    pub fn scaled(&self, k: f64) -> CostReport {
        let f = |m: &BTreeMap<String, Share>| {
            m.iter()
                .map(|(n, s)| (n.clone(), Share { latency: s.latency * k, energy: s.energy * k }))
                .collect()
        };
        CostReport {
            latency_ns: self.latency_ns * k,
            energy_fj: self.energy_fj * k,
            area_mm2: self.area_mm2,
            breakdown: f(&self.breakdown),
            by_primitive: f(&self.by_primitive),
        }
    }

    /// Largest relative gap between a breakdown's sum and the totals.
    pub fn breakdown_error(&self) -> f64 {
        let rel = |sum: f64, total: f64| {
            if total == 0.0 {
                sum.abs()
            } else {
                ((sum - total) / total).abs()
            }
        };
        [&self.breakdown, &self.by_primitive]
            .iter()
            .filter(|m| !m.is_empty())
            .map(|m| {
                let l: f64 = m.values().map(|s| s.latency).sum();
                let e: f64 = m.values().map(|s| s.energy).sum();
                rel(l, self.latency_ns).max(rel(e, self.energy_fj))
            })
            .fold(0.0, f64::max)
    }
}

/// Event-count coefficients of one stage: reads, writes, searches for latency
/// and read, write, search multipliers for energy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Coeffs {
    pub t_read: f64,
    pub t_write: f64,
    pub t_search: f64,
    pub e_read: f64,
    pub e_write: f64,
    pub e_search: f64,
}

impl Coeffs {
    fn price(&self, pc: &PrimitiveCosts) -> [Share; 3] {
        [
            Share { latency: self.t_read * pc.t_read, energy: self.e_read * pc.e_read },
            Share { latency: self.t_write * pc.t_write, energy: self.e_write * pc.e_write },
            Share { latency: self.t_search * pc.t_search, energy: self.e_search * pc.e_search },
        ]
    }
}

impl std::ops::Add for Coeffs {
    type Output = Coeffs;
    fn add(self, o: Coeffs) -> Coeffs {
        Coeffs {
            t_read: self.t_read + o.t_read,
            t_write: self.t_write + o.t_write,
            t_search: self.t_search + o.t_search,
            e_read: self.e_read + o.e_read,
            e_write: self.e_write + o.e_write,
            e_search: self.e_search + o.e_search,
        }
    }
}

/// Closed-form coefficients split over [`STAGES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCoeffs {
    pub exponent: Coeffs,
    pub alignment: Coeffs,
    pub mantissa: Coeffs,
    pub normalization: Coeffs,
}

impl AnalyticCoeffs {
    pub fn total(&self) -> Coeffs {
        self.exponent + self.alignment + self.mantissa + self.normalization
    }

    fn stages(&self) -> [(&'static str, Coeffs); 4] {
        [
            ("exponent", self.exponent),
            ("alignment", self.alignment),
            ("mantissa", self.mantissa),
            ("normalization", self.normalization),
        ]
    }

    pub fn report(&self, pc: &PrimitiveCosts) -> CostReport {
        let mut stages = Vec::new();
        let mut prims = Vec::new();
        for (name, c) in self.stages() {
            let p = c.price(pc);
            let mut s = Share::default();
            for (k, share) in PRIMITIVES.iter().zip(p) {
                s += share;
                prims.push((*k, share));
            }
            stages.push((name, s));
        }
        CostReport::from_parts(&stages, &prims)
    }
}

/// Addition: T = (1+7Ne+7Nm) t_read + (7Ne+7Nm) t_write + 2(Nm+2) t_search,
/// E = (1+14Ne+12Nm) e_read + (14Ne+12Nm) e_write + 2(Nm+2) e_search.
///
/// Exponent terms and the leading read go to the exponent stage, search terms
/// to alignment and mantissa terms to the mantissa stage. The closed form has
/// no separate normalization term.
pub fn add_coeffs(ne: f64, nm: f64) -> AnalyticCoeffs {
    AnalyticCoeffs {
        exponent: Coeffs {
            t_read: 1.0 + 7.0 * ne,
            t_write: 7.0 * ne,
            e_read: 1.0 + 14.0 * ne,
            e_write: 14.0 * ne,
            ..Coeffs::default()
        },
        alignment: Coeffs {
            t_search: 2.0 * (nm + 2.0),
            e_search: 2.0 * (nm + 2.0),
            ..Coeffs::default()
        },
        mantissa: Coeffs {
            t_read: 7.0 * nm,
            t_write: 7.0 * nm,
            e_read: 12.0 * nm,
            e_write: 12.0 * nm,
            ..Coeffs::default()
        },
        normalization: Coeffs::default(),
    }
}

/// Multiplication: T = (2Nm²+6.5Nm+6Ne+3)(t_read+t_write),
/// E = (4.5Nm²+11.5Nm+13.5Ne+6.5)(e_read+e_write).
pub fn mul_coeffs(ne: f64, nm: f64) -> AnalyticCoeffs {
    let sym = |t: f64, e: f64| Coeffs {
        t_read: t,
        t_write: t,
        e_read: e,
        e_write: e,
        ..Coeffs::default()
    };
    AnalyticCoeffs {
        exponent: sym(6.0 * ne + 3.0, 13.5 * ne + 6.5),
        alignment: Coeffs::default(),
        mantissa: sym(2.0 * nm * nm + 6.5 * nm, 4.5 * nm * nm + 11.5 * nm),
        normalization: Coeffs::default(),
    }
}

pub fn analytic_add_cost(layout: &FloatLayout, pc: &PrimitiveCosts) -> CostReport {
    add_coeffs(layout.n_e as f64, layout.n_m as f64).report(pc)
}

pub fn analytic_mul_cost(layout: &FloatLayout, pc: &PrimitiveCosts) -> CostReport {
    mul_coeffs(layout.n_e as f64, layout.n_m as f64).report(pc)
}

pub fn analytic_mac_cost(layout: &FloatLayout, pc: &PrimitiveCosts) -> CostReport {
    analytic_mul_cost(layout, pc).plus(&analytic_add_cost(layout, pc))
}

/// Parameters of the NOR-based digital PIM baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineParams {
    /// NOR steps per 1-bit full add.
    pub fa_steps: u32,
    /// Cells switched per 1-bit full add.
    pub fa_cells: u32,
    /// Intermediate cell writes of one multiply with a 24-bit significand.
    pub mul_write_cells: u32,
    pub write_vs_nor_energy_ratio: f64,
    pub t_nor_ns: f64,
    pub e_nor_fj: f64,
    pub t_write_ns: f64,
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if self.fa_steps == 0 || self.fa_cells == 0 || self.mul_write_cells == 0 {
            return Err(Error::Config("baseline step and cell counts must be positive".into()));
        }
        positive("write_vs_nor_energy_ratio", self.write_vs_nor_energy_ratio)?;
        positive("t_nor_ns", self.t_nor_ns)?;
        positive("e_nor_fj", self.e_nor_fj)?;
        positive("t_write_ns", self.t_write_ns)
    }
}

/// Operation counts behind [`baseline_mac_cost`], per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineCounts {
    pub nor_steps: f64,
    pub nor_cells: f64,
    pub writes: f64,
}

/// Baseline MAC counts with `N = Nm + 1`:
/// - exponent: one `Ne`-bit add for the product and one for the difference;
/// - alignment: bit-by-bit shifting, `Nm²` single-cell steps;
/// - mantissa: an `(N+1)`-bit add plus `N²` full adds for the product, and
///   `mul_write_cells * (N/24)²` intermediate writes;
/// - normalization: two `Ne`-bit exponent adjusts.
///
/// Each full add costs `fa_steps` NOR steps and switches `fa_cells` cells.
pub fn baseline_counts(layout: &FloatLayout, bp: &BaselineParams) -> [(&'static str, BaselineCounts); 4] {
    let ne = layout.n_e as f64;
    let nm = layout.n_m as f64;
    let n = nm + 1.0;
    let fa = |k: f64| BaselineCounts {
        nor_steps: k * bp.fa_steps as f64,
        nor_cells: k * bp.fa_cells as f64,
        writes: 0.0,
    };
    let mut mant = fa(n + 1.0 + n * n);
    mant.writes = bp.mul_write_cells as f64 * (n / 24.0).powi(2);
    [
        ("exponent", fa(2.0 * ne)),
        ("alignment", BaselineCounts { nor_steps: nm * nm, nor_cells: nm * nm, writes: 0.0 }),
        ("mantissa", mant),
        ("normalization", fa(2.0 * ne)),
    ]
}

pub fn baseline_mac_cost(layout: &FloatLayout, bp: &BaselineParams) -> CostReport {
    let e_write = bp.write_vs_nor_energy_ratio * bp.e_nor_fj;
    let mut stages = Vec::new();
    let mut nor = Share::default();
    let mut wr = Share::default();
    for (name, c) in baseline_counts(layout, bp) {
        let n = Share { latency: c.nor_steps * bp.t_nor_ns, energy: c.nor_cells * bp.e_nor_fj };
        let w = Share { latency: c.writes * bp.t_write_ns, energy: c.writes * e_write };
        nor += n;
        wr += w;
        let mut s = n;
        s += w;
        stages.push((name, s));
    }
    CostReport::from_parts(&stages, &[("nor", nor), ("write", wr)])
}

/// Prices a simulated event log: latency per event, read/write energy per
/// bit touched and search energy per search.
pub fn simulated_cost(s: &SimCounts, pc: &PrimitiveCosts) -> CostReport {
    let prims = [
        ("read", Share { latency: s.n_reads * pc.t_read, energy: s.read_bits * pc.e_read }),
        ("write", Share { latency: s.n_writes * pc.t_write, energy: s.write_bits * pc.e_write }),
        ("search", Share { latency: s.n_searches * pc.t_search, energy: s.n_searches * pc.e_search }),
    ];
    let mut r = CostReport::from_parts(&[], &prims);
    for (_, p) in prims {
        r.latency_ns += p.latency;
        r.energy_fj += p.energy;
    }
    r
}

/// Event counts averaged over a number of operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimCounts {
    pub n_reads: f64,
    pub n_writes: f64,
    pub n_searches: f64,
    pub read_bits: f64,
    pub write_bits: f64,
    pub ops: u64,
}

impl SimCounts {
    /// Mean per operation; zero operations gives all-zero counts.
    pub fn mean(total: &LogSummary, ops: u64) -> SimCounts {
        let k = if ops == 0 { 0.0 } else { 1.0 / ops as f64 };
        SimCounts {
            n_reads: total.n_reads as f64 * k,
            n_writes: total.n_writes as f64 * k,
            n_searches: total.n_searches as f64 * k,
            read_bits: total.read_bits as f64 * k,
            write_bits: total.write_bits as f64 * k,
            ops,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_reads + self.n_writes + self.n_searches == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Mul,
    Mac,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub op: OpKind,
    pub analytic_latency_ns: f64,
    pub analytic_energy_fj: f64,
    pub simulated_latency_ns: f64,
    pub simulated_energy_fj: f64,
    pub latency_deviation: f64,
    pub energy_deviation: f64,
    pub tolerance: f64,
    pub counts: SimCounts,
    /// Set when a deviation exceeds the tolerance or no events were seen.
    pub flagged: bool,
}

/// Compares simulated per-op cost against the closed form for `op`.
pub fn reconcile(op: OpKind, sim: &SimCounts, layout: &FloatLayout, pc: &PrimitiveCosts, tolerance: f64) -> Reconciliation {
    let a = match op {
        OpKind::Add => analytic_add_cost(layout, pc),
        OpKind::Mul => analytic_mul_cost(layout, pc),
        OpKind::Mac => analytic_mac_cost(layout, pc),
    };
    let s = simulated_cost(sim, pc);
    let dev = |sim: f64, ana: f64| (sim - ana) / ana;
    let ld = dev(s.latency_ns, a.latency_ns);
    let ed = dev(s.energy_fj, a.energy_fj);
    Reconciliation {
        op,
        analytic_latency_ns: a.latency_ns,
        analytic_energy_fj: a.energy_fj,
        simulated_latency_ns: s.latency_ns,
        simulated_energy_fj: s.energy_fj,
        latency_deviation: ld,
        energy_deviation: ed,
        tolerance,
        counts: *sim,
        flagged: sim.is_empty() || !(ld.abs() <= tolerance && ed.abs() <= tolerance),
    }
}

pub fn area_estimate(n_subarrays: u64, per_subarray_mm2: f64) -> Result<f64> {
    if n_subarrays == 0 {
        return Err(Error::Config("subarray count must be positive".into()));
    }
    positive("per-subarray area", per_subarray_mm2)?;
    Ok(n_subarrays as f64 * per_subarray_mm2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    #[test]
    fn table_params_with_zero_overhead() {
        let pc = derive_primitive_costs(&CellParams::default(), &PeripheralParams::ZERO_OVERHEAD).unwrap();
        assert!(close(pc.t_write, 2.0));
        assert!(close(pc.e_write, 12.0));
        let per = PeripheralParams { write_overhead_ns: 0.5, ..PeripheralParams::ZERO_OVERHEAD };
        let pc = derive_primitive_costs(&CellParams::default(), &per).unwrap();
        assert!(close(pc.t_write, 2.5));
        let fast = CellParams { t_switch: 1.0e-9, ..CellParams::default() };
        let pc2 = derive_primitive_costs(&fast, &per).unwrap();
        assert!(close(pc2.t_write, 1.5));
    }

    #[test]
    fn bad_params_rejected() {
        let per = PeripheralParams::ZERO_OVERHEAD;
        let swapped = CellParams { r_on: 100e3, r_off: 50e3, ..CellParams::default() };
        assert!(derive_primitive_costs(&swapped, &per).is_err());
        let neg = CellParams { t_switch: -1.0, ..CellParams::default() };
        assert!(derive_primitive_costs(&neg, &per).is_err());
        let p = PeripheralParams { t_read_ns: 0.0, ..per };
        assert!(derive_primitive_costs(&CellParams::default(), &p).is_err());
    }

    #[test]
    fn degenerate_add_formula() {
        let c = add_coeffs(0.0, 0.0).total();
        assert_eq!((c.t_read, c.t_write, c.t_search), (1.0, 0.0, 4.0));
    }

    #[test]
    fn small_mul_formula() {
        let c = mul_coeffs(2.0, 1.0).total();
        assert_eq!((c.t_read, c.t_write), (23.5, 23.5));
    }

    #[test]
    fn breakdowns_sum_to_totals() {
        let pc = PrimitiveCosts { t_read: 0.3, t_write: 2.2, t_search: 0.6, e_read: 1.0, e_write: 12.5, e_search: 20.0 };
        let l = FloatLayout::FP32;
        for r in [analytic_add_cost(&l, &pc), analytic_mul_cost(&l, &pc), analytic_mac_cost(&l, &pc)] {
            assert!(r.breakdown_error() < 1e-9);
            assert_eq!(r.breakdown.len(), 4);
        }
    }

    fn bp() -> BaselineParams {
        BaselineParams {
            fa_steps: 13,
            fa_cells: 12,
            mul_write_cells: 455,
            write_vs_nor_energy_ratio: 100.0,
            t_nor_ns: 1.0,
            e_nor_fj: 1.0,
            t_write_ns: 1.0,
        }
    }

    #[test]
    fn baseline_monotone_in_write_energy() {
        let l = FloatLayout::FP32;
        let a = baseline_mac_cost(&l, &bp());
        let b = baseline_mac_cost(&l, &BaselineParams { write_vs_nor_energy_ratio: 200.0, ..bp() });
        assert!(b.energy_fj > a.energy_fj);
        assert!(a.breakdown_error() < 1e-9);
    }

    #[test]
    fn baseline_alignment_quadratic() {
        let align = |nm| {
            let l = FloatLayout::new(8, nm).unwrap();
            baseline_mac_cost(&l, &bp()).breakdown["alignment"].latency
        };
        let r = align(46) / align(23);
        assert!((r - 4.0).abs() < 1e-9);
    }

    #[test]
    fn reconcile_zero_events_flagged() {
        let r = reconcile(OpKind::Add, &SimCounts::default(), &FloatLayout::FP32, &PrimitiveCosts::UNIT, 0.3);
        assert_eq!(r.simulated_latency_ns, 0.0);
        assert!(r.flagged);
    }

    #[test]
    fn area_products() {
        assert_eq!(area_estimate(1, 0.5).unwrap(), 0.5);
        assert_eq!(area_estimate(10, 0.5).unwrap(), 5.0);
        assert!(area_estimate(0, 0.5).is_err());
    }
}
