//! Full-batch gradient descent on a small ReLU MLP where every arithmetic
//! operation goes through a [`FloatArith`] backend.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Layer, NetworkSpec};
use crate::arith::{decode_float, encode_float, FloatArith, FloatBits, FloatLayout, FpFlags};
use crate::error::{Error, Result};

pub const LOSS_HEADER: &str = "epoch,loss,accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TinyConfig {
    pub epochs: u32,
    pub lr: f64,
    pub seed: u64,
    /// Initial weights and biases are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            epochs: 500,
            lr: 0.1,
            seed: 1,
            init_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub loss: f64,
    /// Loss as stored, for bit-exact comparisons.
    pub loss_raw: u128,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyRun {
    pub records: Vec<EpochRecord>,
    /// Accuracy of the weights after the last update.
    pub final_accuracy: f64,
    pub diverged: bool,
    pub flags: FpFlags,
}

/// The four XOR points; the label is the index of the hot output.
pub fn xor_dataset() -> Vec<([f64; 2], usize)> {
    vec![([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)]
}

pub fn loss_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from(LOSS_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&format!("{},{},{}\n", r.epoch, r.loss, r.accuracy));
    }
    s
}

struct Dense {
    n_in: usize,
    n_out: usize,
    relu: bool,
    w: Vec<FloatBits>,
    b: Vec<FloatBits>,
}

struct Ops<'a, A: FloatArith> {
    arith: &'a mut A,
    flags: FpFlags,
}

impl<A: FloatArith> Ops<'_, A> {
    fn add(&mut self, x: FloatBits, y: FloatBits) -> Result<FloatBits> {
        let (r, f) = self.arith.add(&x, &y)?;
        self.flags |= f;
        Ok(r)
    }

    fn mul(&mut self, x: FloatBits, y: FloatBits) -> Result<FloatBits> {
        let (r, f) = self.arith.mul(&x, &y)?;
        self.flags |= f;
        Ok(r)
    }

    fn mac(&mut self, acc: FloatBits, x: FloatBits, y: FloatBits) -> Result<FloatBits> {
        let p = self.mul(x, y)?;
        self.add(acc, p)
    }
}

fn positive(x: &FloatBits) -> bool {
    !x.sign && !x.is_zero()
}

fn build(net: &NetworkSpec, layout: &FloatLayout, cfg: &TinyConfig) -> Result<Vec<Dense>> {
    let n_in = match net.input.as_slice() {
        [f] => *f as usize,
        _ => return Err(Error::Spec("training needs a flat input".into())),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<FloatBits> {
        let v = if cfg.init_scale > 0.0 {
            rng.gen_range(-cfg.init_scale..cfg.init_scale)
        } else {
            0.0
        };
        Ok(encode_float(v, layout)?.0)
    };
    let mut layers: Vec<Dense> = Vec::new();
    let mut width = n_in;
    for l in &net.layers {
        match *l {
            Layer::Dense { out } => {
                let out = out as usize;
                let w = (0..out * width).map(|_| draw(&mut rng)).collect::<Result<_>>()?;
                let b = (0..out).map(|_| draw(&mut rng)).collect::<Result<_>>()?;
                layers.push(Dense { n_in: width, n_out: out, relu: false, w, b });
                width = out;
            }
            Layer::Activation => match layers.last_mut() {
                Some(d) if !d.relu => d.relu = true,
                _ => return Err(Error::Spec("activation must follow a dense layer".into())),
            },
            _ => return Err(Error::Spec("training supports dense and activation layers only".into())),
        }
    }
    Ok(layers)
}

/// Pre-activations and outputs of every layer for one sample.
fn forward<A: FloatArith>(ops: &mut Ops<A>, layers: &[Dense], x: &[FloatBits]) -> Result<Vec<(Vec<FloatBits>, Vec<FloatBits>)>> {
    let mut acts = Vec::with_capacity(layers.len());
    let mut input = x.to_vec();
    for d in layers {
        let mut pre = Vec::with_capacity(d.n_out);
        for o in 0..d.n_out {
            let mut acc = d.b[o];
            for (w, xi) in d.w[o * d.n_in..(o + 1) * d.n_in].iter().zip(&input) {
                acc = ops.mac(acc, *w, *xi)?;
            }
            pre.push(acc);
        }
        let post: Vec<FloatBits> = if d.relu {
            pre.iter().map(|p| if positive(p) { *p } else { FloatBits::ZERO }).collect()
        } else {
            pre.clone()
        };
        input = post.clone();
        acts.push((pre, post));
    }
    Ok(acts)
}

fn argmax(layout: &FloatLayout, v: &[FloatBits]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if decode_float(&v[i], layout) > decode_float(&v[best], layout) {
            best = i;
        }
    }
    best
}

/// Trains `net` on [`xor_dataset`] with mean squared error against one-hot
/// targets. Every multiply and add runs on `arith`; only sign tests, argmax
/// and initialization happen on the host.
pub fn functional_train_tiny<A: FloatArith>(arith: &mut A, net: &NetworkSpec, cfg: &TinyConfig) -> Result<TinyRun> {
    let layout = arith.layout();
    let mut layers = build(net, &layout, cfg)?;
    let data = xor_dataset();
    let n_classes = layers.last().map(|d| d.n_out).unwrap_or(0);
    if layers.first().map(|d| d.n_in) != Some(2) || n_classes != 2 {
        return Err(Error::Spec("the XOR task needs 2 inputs and 2 outputs".into()));
    }
    let enc = |v: f64| -> Result<FloatBits> { Ok(encode_float(v, &layout)?.0) };
    let xs: Vec<Vec<FloatBits>> = data
        .iter()
        .map(|(x, _)| x.iter().map(|&v| enc(v)).collect())
        .collect::<Result<_>>()?;
    let ts: Vec<Vec<FloatBits>> = data
        .iter()
        .map(|&(_, y)| (0..n_classes).map(|k| enc(if k == y { 1.0 } else { 0.0 })).collect())
        .collect::<Result<_>>()?;
    let scale = (data.len() * n_classes) as f64;
    let mean = enc(1.0 / scale)?;
    let grad_scale = enc(2.0 / scale)?;
    let neg_lr = enc(-cfg.lr)?;

    let mut ops = Ops { arith, flags: FpFlags::default() };
    let mut records = Vec::with_capacity(cfg.epochs as usize);
    let mut diverged = false;
    for epoch in 0..cfg.epochs {
        let mut gw: Vec<Vec<FloatBits>> = layers.iter().map(|d| vec![FloatBits::ZERO; d.w.len()]).collect();
        let mut gb: Vec<Vec<FloatBits>> = layers.iter().map(|d| vec![FloatBits::ZERO; d.n_out]).collect();
        let mut sq = FloatBits::ZERO;
        let mut correct = 0;
        for (s, x) in xs.iter().enumerate() {
            let acts = forward(&mut ops, &layers, x)?;
            let out = &acts.last().expect("nonempty").1;
            if argmax(&layout, out) == data[s].1 {
                correct += 1;
            }
            let mut g = Vec::with_capacity(n_classes);
            for k in 0..n_classes {
                let diff = ops.add(out[k], ts[s][k].negate())?;
                sq = ops.mac(sq, diff, diff)?;
                g.push(ops.mul(grad_scale, diff)?);
            }
            for l in (0..layers.len()).rev() {
                let d = &layers[l];
                let (pre, _) = &acts[l];
                if d.relu {
                    for (o, gv) in g.iter_mut().enumerate() {
                        if !positive(&pre[o]) {
                            *gv = FloatBits::ZERO;
                        }
                    }
                }
                let input: &[FloatBits] = if l == 0 { x } else { &acts[l - 1].1 };
                for (o, go) in g.iter().enumerate() {
                    gb[l][o] = ops.add(gb[l][o], *go)?;
                    for (gk, xi) in gw[l][o * d.n_in..(o + 1) * d.n_in].iter_mut().zip(input) {
                        *gk = ops.mac(*gk, *go, *xi)?;
                    }
                }
                if l > 0 {
                    let mut gi = vec![FloatBits::ZERO; d.n_in];
                    for (i, gv) in gi.iter_mut().enumerate() {
                        for (o, go) in g.iter().enumerate() {
                            *gv = ops.mac(*gv, d.w[o * d.n_in + i], *go)?;
                        }
                    }
                    g = gi;
                }
            }
        }
        let loss = ops.mul(mean, sq)?;
        records.push(EpochRecord {
            epoch,
            loss: decode_float(&loss, &layout),
            loss_raw: loss.to_raw(&layout),
            accuracy: correct as f64 / data.len() as f64,
        });
        for (l, d) in layers.iter_mut().enumerate() {
            for (w, g) in d.w.iter_mut().zip(&gw[l]) {
                *w = ops.mac(*w, neg_lr, *g)?;
            }
            for (b, g) in d.b.iter_mut().zip(&gb[l]) {
                *b = ops.mac(*b, neg_lr, *g)?;
            }
        }
        if ops.flags.overflow {
            diverged = true;
            break;
        }
    }
    let mut correct = 0;
    for (s, x) in xs.iter().enumerate() {
        let acts = forward(&mut ops, &layers, x)?;
        if argmax(&layout, &acts.last().expect("nonempty").1) == data[s].1 {
            correct += 1;
        }
    }
    Ok(TinyRun {
        records,
        final_accuracy: correct as f64 / data.len() as f64,
        diverged,
        flags: ops.flags,
    })
}
