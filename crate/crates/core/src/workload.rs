//! Training workloads: network specs, MAC counting, cost estimates and a
//! small end-to-end training loop on bit-level arithmetic.

use serde::{Deserialize, Serialize};

use crate::arith::FloatLayout;
use crate::calibration::{Calibration, WorkloadParams};
use crate::cost::{analytic_mac_cost, area_estimate, baseline_mac_cost, CostReport, Share};
use crate::error::{Error, Result};

mod train;

pub use train::{functional_train_tiny, loss_csv, xor_dataset, EpochRecord, TinyConfig, TinyRun, LOSS_HEADER};

pub const LENET5_JSON: &str = include_str!("../../../configs/netspecs/lenet5.json");
pub const XOR_MLP_JSON: &str = include_str!("../../../configs/netspecs/xor-mlp.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Layer {
    /// Valid-padding, stride-1 convolution with a square kernel.
    Conv { out_channels: u32, kernel: u32 },
    Dense { out: u32 },
    /// Non-overlapping square max pooling.
    Pool { size: u32 },
    /// Element-wise ReLU.
    Activation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    /// `[features]` or `[channels, height, width]`.
    pub input: Vec<u32>,
    pub layers: Vec<Layer>,
    /// Optional declared count; checked against the layer shapes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_params: Option<u64>,
}

/// Shape, parameter and forward-MAC count after one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub layer: Layer,
    pub out_shape: [u64; 3],
    pub params: u64,
    pub macs: u64,
}

fn spec_err<T>(msg: String) -> Result<T> {
    Err(Error::Spec(msg))
}

impl NetworkSpec {
    pub fn from_json(text: &str) -> Result<NetworkSpec> {
        let n: NetworkSpec = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        n.stats()?;
        Ok(n)
    }

    pub fn preset(name: &str) -> Result<NetworkSpec> {
        match name {
            "lenet5" => Self::from_json(LENET5_JSON),
            "xor-mlp" => Self::from_json(XOR_MLP_JSON),
            _ => spec_err(format!("unknown preset {name:?}")),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Per-layer statistics; fails on shapes that do not fit.
    pub fn stats(&self) -> Result<Vec<LayerStats>> {
        let mut shape: [u64; 3] = match self.input.as_slice() {
            [f] => [1, 1, *f as u64],
            [c, h, w] => [*c as u64, *h as u64, *w as u64],
            _ => return spec_err("input must be [features] or [channels, height, width]".into()),
        };
        if shape.contains(&0) {
            return spec_err("input dimensions must be positive".into());
        }
        if self.layers.is_empty() {
            return spec_err("network has no layers".into());
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, &layer) in self.layers.iter().enumerate() {
            let [c, h, w] = shape;
            let (next, params, macs) = match layer {
                Layer::Conv { out_channels, kernel } => {
                    let (o, k) = (out_channels as u64, kernel as u64);
                    if o == 0 || k == 0 || k > h || k > w {
                        return spec_err(format!("layer {i}: kernel {k} does not fit {h}x{w}"));
                    }
                    let (ho, wo) = (h - k + 1, w - k + 1);
                    ([o, ho, wo], o * (c * k * k + 1), o * ho * wo * c * k * k)
                }
                Layer::Dense { out: o } => {
                    let o = o as u64;
                    if o == 0 {
                        return spec_err(format!("layer {i}: dense width must be positive"));
                    }
                    let fan_in = c * h * w;
                    ([1, 1, o], fan_in * o + o, fan_in * o)
                }
                Layer::Pool { size } => {
                    let s = size as u64;
                    if s == 0 || s > h || s > w {
                        return spec_err(format!("layer {i}: pool {s} does not fit {h}x{w}"));
                    }
                    ([c, h / s, w / s], 0, 0)
                }
                Layer::Activation => (shape, 0, 0),
            };
            shape = next;
            out.push(LayerStats { layer, out_shape: shape, params, macs });
        }
        let total: u64 = out.iter().map(|s| s.params).sum();
        if let Some(d) = self.total_params {
            if d != total {
                return spec_err(format!("declared {d} parameters, layers give {total}"));
            }
        }
        Ok(out)
    }

    pub fn total_params(&self) -> Result<u64> {
        Ok(self.stats()?.iter().map(|s| s.params).sum())
    }

    pub fn forward_macs(&self) -> Result<u64> {
        Ok(self.stats()?.iter().map(|s| s.macs).sum())
    }
}

/// MACs of one training step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacCounts {
    pub forward: u64,
    pub backward: u64,
    pub update: u64,
}

impl MacCounts {
    pub fn total(&self) -> u64 {
        self.forward + self.backward + self.update
    }
}

/// Forward MACs from the layer shapes; backward is `backward_factor` times
/// forward and the update costs `update_factor` MACs per parameter and sample.
pub fn count_training_macs(net: &NetworkSpec, batch: u64, wp: &WorkloadParams) -> Result<MacCounts> {
    let fwd = net.forward_macs()? * batch;
    Ok(MacCounts {
        forward: fwd,
        backward: fwd * wp.backward_factor as u64,
        update: net.total_params()? * batch * wp.update_factor as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub batch_size: u64,
    pub steps: u64,
    pub macs_per_step: MacCounts,
    pub subarrays_used: u64,
}

impl TrainingPlan {
    /// Weights of `layout` width packed into subarrays of `cells_per_subarray`.
    pub fn new(net: &NetworkSpec, batch_size: u64, steps: u64, layout: &FloatLayout, wp: &WorkloadParams) -> Result<Self> {
        if batch_size == 0 {
            return spec_err("batch size must be positive".into());
        }
        let bits = net.total_params()? * layout.width() as u64;
        Ok(TrainingPlan {
            batch_size,
            steps,
            macs_per_step: count_training_macs(net, batch_size, wp)?,
            subarrays_used: bits.div_ceil(wp.cells_per_subarray).max(1),
        })
    }

    pub fn total_macs(&self) -> u64 {
        self.macs_per_step.total() * self.steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub area: f64,
    pub latency: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingEstimate {
    pub network: String,
    pub total_params: u64,
    pub plan: TrainingPlan,
    pub proposed: CostReport,
    pub baseline: CostReport,
    /// Baseline over proposed.
    pub ratios: Ratios,
}

fn ratio(base: f64, prop: f64) -> f64 {
    if prop == 0.0 {
        if base == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        base / prop
    }
}

/// MAC count times per-MAC closed-form cost, plus weight traffic (each weight
/// read and written once per step) priced per bit.
pub fn estimate_training(net: &NetworkSpec, plan: &TrainingPlan, cal: &Calibration, layout: &FloatLayout) -> Result<TrainingEstimate> {
    let pc = cal.primitive_costs()?;
    let macs = plan.total_macs() as f64;
    let params = net.total_params()?;
    let wp = &cal.workload;
    let traffic_bits = 2.0 * (params * layout.width() as u64) as f64 * plan.steps as f64;
    let traffic = Share {
        latency: traffic_bits * wp.weight_traffic_ns_per_bit,
        energy: traffic_bits * wp.weight_traffic_fj_per_bit,
    };
    let build = |per_mac: CostReport, area: f64| -> CostReport {
        let mut r = per_mac.scaled(macs);
        r.latency_ns += traffic.latency;
        r.energy_fj += traffic.energy;
        *r.breakdown.entry("weight_traffic".into()).or_default() += traffic;
        *r.by_primitive.entry("weight_traffic".into()).or_default() += traffic;
        r.area_mm2 = area;
        r
    };
    let proposed = build(
        analytic_mac_cost(layout, &pc),
        area_estimate(plan.subarrays_used, cal.area.proposed_subarray_mm2)?,
    );
    let baseline = build(
        baseline_mac_cost(layout, &cal.baseline),
        area_estimate(plan.subarrays_used, cal.area.baseline_subarray_mm2)?,
    );
    let ratios = Ratios {
        area: ratio(baseline.area_mm2, proposed.area_mm2),
        latency: ratio(baseline.latency_ns, proposed.latency_ns),
        energy: ratio(baseline.energy_fj, proposed.energy_fj),
    };
    Ok(TrainingEstimate {
        network: net.name.clone(),
        total_params: params,
        plan: *plan,
        proposed,
        baseline,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::ReferenceArith;

    fn wp() -> WorkloadParams {
        Calibration::shipped().workload
    }

    fn dense(n_in: u32, out: u32) -> NetworkSpec {
        NetworkSpec {
            name: "d".into(),
            input: vec![n_in],
            layers: vec![Layer::Dense { out }],
            total_params: None,
        }
    }

    #[test]
    fn single_dense_counts() {
        let m = count_training_macs(&dense(4, 3), 1, &wp()).unwrap();
        assert_eq!(m.forward, 12);
        assert_eq!(m.backward, 24);
        assert_eq!(m.update, 15);
    }

    #[test]
    fn presets_parse() {
        let l = NetworkSpec::preset("lenet5").unwrap();
        assert_eq!(l.total_params().unwrap(), 21_690);
        assert_eq!(NetworkSpec::preset("xor-mlp").unwrap().total_params().unwrap(), 42);
        assert!(NetworkSpec::preset("vgg").is_err());
    }

    #[test]
    fn malformed_shapes() {
        let mut n = dense(4, 3);
        n.input = vec![1, 3, 3];
        n.layers = vec![Layer::Conv { out_channels: 2, kernel: 5 }];
        assert!(matches!(n.stats(), Err(Error::Spec(_))));
        n.layers = vec![Layer::Pool { size: 0 }];
        assert!(n.stats().is_err());
        let mut d = dense(4, 3);
        d.total_params = Some(14);
        assert!(d.stats().is_err());
        assert!(NetworkSpec::from_json(r#"{"name":"x","input":[2],"layers":[{"kind":"lstm"}]}"#).is_err());
    }

    #[test]
    fn estimate_scales_with_steps() {
        let cal = Calibration::shipped();
        let l = FloatLayout::FP32;
        let net = NetworkSpec::preset("lenet5").unwrap();
        let est = |steps| {
            let plan = TrainingPlan::new(&net, 1, steps, &l, &cal.workload).unwrap();
            estimate_training(&net, &plan, &cal, &l).unwrap()
        };
        let z = est(0);
        assert_eq!((z.proposed.latency_ns, z.proposed.energy_fj), (0.0, 0.0));
        let (a, b) = (est(5), est(10));
        assert!((b.proposed.latency_ns / a.proposed.latency_ns - 2.0).abs() < 1e-12);
        assert!((b.baseline.energy_fj / a.baseline.energy_fj - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let net = NetworkSpec::preset("xor-mlp").unwrap();
        let mut a = ReferenceArith { layout: FloatLayout::FP32 };
        let cfg = TinyConfig { epochs: 5, lr: 0.0, ..TinyConfig::default() };
        let run = functional_train_tiny(&mut a, &net, &cfg).unwrap();
        assert!(run.records.windows(2).all(|w| w[0].loss_raw == w[1].loss_raw));
    }

    #[test]
    fn zero_epochs_gives_header_only() {
        let net = NetworkSpec::preset("xor-mlp").unwrap();
        let mut a = ReferenceArith { layout: FloatLayout::FP32 };
        let cfg = TinyConfig { epochs: 0, ..TinyConfig::default() };
        let run = functional_train_tiny(&mut a, &net, &cfg).unwrap();
        assert_eq!(loss_csv(&run.records), format!("{LOSS_HEADER}\n"));
    }
}
