use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use sotpim::arith::{
    random_float, ref_add, ref_mac, ref_mul, FloatArith, FloatBits, FloatLayout, Fpu, Phase, PimArith,
    ReferenceArith, StoredFloat,
};
use sotpim::calibration::Calibration;
use sotpim::cost::{
    analytic_add_cost, analytic_mac_cost, analytic_mul_cost, baseline_mac_cost, reconcile, CostReport, OpKind,
    PrimitiveCosts, Reconciliation, SimCounts,
};
use sotpim::subarray::{trace_to_csv, CostEvent, LogSummary, Subarray};
use sotpim::workload::{estimate_training, functional_train_tiny, loss_csv, NetworkSpec, TinyConfig, TrainingPlan};

use crate::output::Outputs;
use crate::{
    Backend, Cli, Cmd, EstimateTrainArgs, Failure, Global, ReconcileArgs, SimulateMacArgs, TrainTinyArgs,
    EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY,
};

type Res<T = ()> = std::result::Result<T, Failure>;

struct Ctx {
    cal: Calibration,
    layout: FloatLayout,
    pc: PrimitiveCosts,
}

fn context(g: &Global) -> Res<Ctx> {
    let cal = match &g.calibration {
        Some(p) => Calibration::load(p)?,
        None => Calibration::shipped(),
    };
    let cal = if g.fast_mram { cal.with_fast_mram() } else { cal };
    let layout = FloatLayout::parse(&g.layout)?;
    let pc = cal.primitive_costs()?;
    Ok(Ctx { cal, layout, pc })
}

pub fn run(cli: &Cli) -> Res {
    let ctx = context(&cli.global)?;
    let mut out = Outputs::new(&cli.global.out);
    let verdict = match &cli.cmd {
        Cmd::Cost => cost(&ctx, &cli.global, &mut out),
        Cmd::SimulateMac(a) => simulate_mac(&ctx, &cli.global, a, &mut out),
        Cmd::EstimateTrain(a) => estimate_train(&ctx, a, &mut out),
        Cmd::TrainTiny(a) => train_tiny(&ctx, &cli.global, a, &mut out),
        Cmd::Reconcile(a) => reconcile_cmd(&ctx, &cli.global, a, &mut out),
    };
    // reports are written even when the run fails verification
    match verdict {
        Err(f) if f.code == EXIT_CONFIG => Err(f),
        v => {
            out.commit()?;
            v
        }
    }
}

#[derive(Serialize)]
struct LayoutJson {
    n_e: u32,
    n_m: u32,
}

fn layout_json(l: &FloatLayout) -> LayoutJson {
    LayoutJson { n_e: l.n_e, n_m: l.n_m }
}

#[derive(Serialize)]
struct CostRow<'a> {
    op: &'a str,
    design: &'a str,
    component: &'a str,
    latency_ns: f64,
    energy_fj: f64,
}

fn cost_rows<'a>(rows: &mut Vec<CostRow<'a>>, op: &'a str, design: &'a str, r: &'a CostReport) {
    rows.push(CostRow { op, design, component: "total", latency_ns: r.latency_ns, energy_fj: r.energy_fj });
    for (k, s) in r.breakdown.iter().chain(&r.by_primitive) {
        rows.push(CostRow { op, design, component: k, latency_ns: s.latency, energy_fj: s.energy });
    }
}

#[derive(Serialize)]
struct Pair {
    latency: f64,
    energy: f64,
}

#[derive(Serialize)]
struct CostJson<'a> {
    layout: LayoutJson,
    fast_mram: bool,
    calibrated: bool,
    primitive_costs: PrimitiveCosts,
    add: &'a CostReport,
    mul: &'a CostReport,
    mac: &'a CostReport,
    baseline_mac: &'a CostReport,
    /// Baseline over proposed.
    mac_ratios: Pair,
    /// MAC latency reduction of the fast-MRAM variant against the file's
    /// regular switching time.
    fast_mram_latency_drop: f64,
}

fn cost(ctx: &Ctx, g: &Global, out: &mut Outputs) -> Res {
    let l = &ctx.layout;
    let add = analytic_add_cost(l, &ctx.pc);
    let mul = analytic_mul_cost(l, &ctx.pc);
    let mac = analytic_mac_cost(l, &ctx.pc);
    let base = baseline_mac_cost(l, &ctx.cal.baseline);

    let regular = match &g.calibration {
        Some(p) => Calibration::load(p)?,
        None => Calibration::shipped(),
    };
    let t_regular = analytic_mac_cost(l, &regular.primitive_costs()?).latency_ns;
    let t_fast = analytic_mac_cost(l, &regular.with_fast_mram().primitive_costs()?).latency_ns;

    let ratios = Pair {
        latency: base.latency_ns / mac.latency_ns,
        energy: base.energy_fj / mac.energy_fj,
    };
    println!("op   design    latency_ns   energy_fj");
    for (op, d, r) in [("add", "proposed", &add), ("mul", "proposed", &mul), ("mac", "proposed", &mac), ("mac", "baseline", &base)] {
        println!("{op:<4} {d:<9} {:>11.2} {:>11.1}", r.latency_ns, r.energy_fj);
    }
    println!("mac ratio (baseline/proposed): latency {:.3}x energy {:.3}x", ratios.latency, ratios.energy);
    println!("fast-MRAM MAC latency drop: {:.1}%", 100.0 * (1.0 - t_fast / t_regular));

    let mut rows = Vec::new();
    cost_rows(&mut rows, "add", "proposed", &add);
    cost_rows(&mut rows, "mul", "proposed", &mul);
    cost_rows(&mut rows, "mac", "proposed", &mac);
    cost_rows(&mut rows, "mac", "baseline", &base);
    out.csv("cost.csv", &rows)?;
    out.json(
        "cost.json",
        &CostJson {
            layout: layout_json(l),
            fast_mram: g.fast_mram,
            calibrated: true,
            primitive_costs: ctx.pc,
            add: &add,
            mul: &mul,
            mac: &mac,
            baseline_mac: &base,
            mac_ratios: ratios,
            fast_mram_latency_drop: 1.0 - t_fast / t_regular,
        },
    )?;
    Ok(())
}

#[derive(Serialize, Clone)]
struct Mismatch {
    index: usize,
    acc: FloatBits,
    x: FloatBits,
    w: FloatBits,
    simulated: FloatBits,
    expected: FloatBits,
}

#[derive(Default)]
struct Chunk {
    add: LogSummary,
    mul: LogSummary,
    mismatches: Vec<Mismatch>,
    trace: Option<Vec<CostEvent>>,
}

/// Splits the phases of one MAC into its multiply and add parts.
fn split_mac(fpu: &Fpu) -> (LogSummary, LogSummary) {
    let mut mul = LogSummary::default();
    let mut add = LogSummary::default();
    let mut senses = 0;
    for p in fpu.last_phases() {
        if p.phase == Phase::Sense {
            senses += 1;
        }
        if senses <= 1 {
            mul += p.counts;
        } else {
            add += p.counts;
        }
    }
    (mul, add)
}

fn run_macs(l: &FloatLayout, start: usize, ops: &[[FloatBits; 3]], fault: Option<usize>, trace: bool) -> sotpim::Result<Chunk> {
    let w = l.width();
    let mut sa = Subarray::new(1, 4 * w + Fpu::scratch_width(l))?;
    let mut fpu = Fpu::new(*l, 0, 4 * w);
    let slot = |i: usize| StoredFloat::at(0, i * w, *l);
    let (acc, x, wt, dst) = (slot(0), slot(1), slot(2), slot(3));
    let mut c = Chunk::default();
    for (k, op) in ops.iter().enumerate() {
        let index = start + k;
        acc.store(&mut sa, &op[0])?;
        x.store(&mut sa, &op[1])?;
        wt.store(&mut sa, &op[2])?;
        sa.reset_log();
        fpu.mac(&mut sa, &acc, &x, &wt, &dst)?;
        if trace && index == 0 {
            c.trace = Some(sa.log().to_vec());
        }
        let (m, a) = split_mac(&fpu);
        c.mul += m;
        c.add += a;
        if fault == Some(index) {
            let cell = dst.man_cell(0);
            sa.flip(cell.row, cell.col)?;
        }
        let got = dst.load(&sa)?;
        let (want, _) = ref_mac(l, &op[0], &op[1], &op[2]);
        if got != want {
            c.mismatches.push(Mismatch { index, acc: op[0], x: op[1], w: op[2], simulated: got, expected: want });
        }
    }
    Ok(c)
}

#[derive(Serialize)]
struct SimulateJson {
    layout: LayoutJson,
    n: usize,
    seed: u64,
    mismatches: usize,
    first_mismatches: Vec<Mismatch>,
    searches_per_add: f64,
    add_counts: SimCounts,
    mul_counts: SimCounts,
    reconciliation: Vec<Reconciliation>,
}

const CHUNK: usize = 64;

fn simulate_mac(ctx: &Ctx, g: &Global, a: &SimulateMacArgs, out: &mut Outputs) -> Res {
    if a.n == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--n must be at least 1"));
    }
    let l = ctx.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let ops: Vec<[FloatBits; 3]> = (0..a.n)
        .map(|_| [random_float(&mut rng, &l), random_float(&mut rng, &l), random_float(&mut rng, &l)])
        .collect();
    let chunks: Vec<Chunk> = ops
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(i, c)| run_macs(&l, i * CHUNK, c, a.inject_fault, a.trace))
        .collect::<sotpim::Result<_>>()?;
    let mut add = LogSummary::default();
    let mut mul = LogSummary::default();
    let mut mism = Vec::new();
    let mut trace = None;
    for c in chunks {
        add += c.add;
        mul += c.mul;
        mism.extend(c.mismatches);
        trace = trace.or(c.trace);
    }
    let n = a.n as u64;
    let add_c = SimCounts::mean(&add, n);
    let mul_c = SimCounts::mean(&mul, n);
    let mut both = add;
    both += mul;
    let mac_c = SimCounts::mean(&both, n);
    let tol = ctx.cal.tolerances.reconcile;
    let rec = vec![
        reconcile(OpKind::Add, &add_c, &l, &ctx.pc, tol),
        reconcile(OpKind::Mul, &mul_c, &l, &ctx.pc, tol),
        reconcile(OpKind::Mac, &mac_c, &l, &ctx.pc, tol),
    ];
    println!("macs {} mismatches {} searches/add {}", a.n, mism.len(), add_c.n_searches);
    for r in &rec {
        println!(
            "{:?}: latency {:+.1}% energy {:+.1}%{}",
            r.op,
            100.0 * r.latency_deviation,
            100.0 * r.energy_deviation,
            if r.flagged { " FLAGGED" } else { "" }
        );
    }
    if let Some(t) = trace {
        out.raw("trace.csv", trace_to_csv(&t));
    }
    out.csv("reconcile.csv", &rec.iter().map(RecRow::from).collect::<Vec<_>>())?;
    out.json(
        "simulate_mac.json",
        &SimulateJson {
            layout: layout_json(&l),
            n: a.n,
            seed: g.seed,
            mismatches: mism.len(),
            first_mismatches: mism.iter().take(10).cloned().collect(),
            searches_per_add: add_c.n_searches,
            add_counts: add_c,
            mul_counts: mul_c,
            reconciliation: rec,
        },
    )?;
    match mism.first() {
        None => Ok(()),
        Some(m) => Err(Failure::new(
            EXIT_VERIFY,
            format!(
                "{} of {} MACs differ from the reference; first at #{}: acc={:?} x={:?} w={:?}",
                mism.len(),
                a.n,
                m.index,
                m.acc,
                m.x,
                m.w
            ),
        )),
    }
}

#[derive(Serialize)]
struct RecRow {
    op: String,
    analytic_latency_ns: f64,
    simulated_latency_ns: f64,
    latency_deviation: f64,
    analytic_energy_fj: f64,
    simulated_energy_fj: f64,
    energy_deviation: f64,
    tolerance: f64,
    flagged: bool,
}

impl From<&Reconciliation> for RecRow {
    fn from(r: &Reconciliation) -> Self {
        RecRow {
            op: format!("{:?}", r.op).to_lowercase(),
            analytic_latency_ns: r.analytic_latency_ns,
            simulated_latency_ns: r.simulated_latency_ns,
            latency_deviation: r.latency_deviation,
            analytic_energy_fj: r.analytic_energy_fj,
            simulated_energy_fj: r.simulated_energy_fj,
            energy_deviation: r.energy_deviation,
            tolerance: r.tolerance,
            flagged: r.flagged,
        }
    }
}

#[derive(Serialize)]
struct ReconcileJson {
    layout: LayoutJson,
    n: usize,
    seed: u64,
    reconciliation: Vec<Reconciliation>,
}

fn reconcile_cmd(ctx: &Ctx, g: &Global, a: &ReconcileArgs, out: &mut Outputs) -> Res {
    if a.n == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--n must be at least 1"));
    }
    let l = ctx.layout;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let pairs: Vec<(FloatBits, FloatBits)> = (0..a.n).map(|_| (random_float(&mut rng, &l), random_float(&mut rng, &l))).collect();
    let mut p = PimArith::new(l)?;
    let mut bad = 0;
    for (x, y) in &pairs {
        bad += (p.add(x, y)? != ref_add(&l, x, y)) as usize;
    }
    let add_c = SimCounts::mean(&p.totals(), p.op_count());
    p.reset_totals();
    for (x, y) in &pairs {
        bad += (p.mul(x, y)? != ref_mul(&l, x, y)) as usize;
    }
    let mul_c = SimCounts::mean(&p.totals(), p.op_count());
    let mac_c = SimCounts {
        n_reads: add_c.n_reads + mul_c.n_reads,
        n_writes: add_c.n_writes + mul_c.n_writes,
        n_searches: add_c.n_searches + mul_c.n_searches,
        read_bits: add_c.read_bits + mul_c.read_bits,
        write_bits: add_c.write_bits + mul_c.write_bits,
        ops: a.n as u64,
    };
    let tol = ctx.cal.tolerances.reconcile;
    let rec = vec![
        reconcile(OpKind::Add, &add_c, &l, &ctx.pc, tol),
        reconcile(OpKind::Mul, &mul_c, &l, &ctx.pc, tol),
        reconcile(OpKind::Mac, &mac_c, &l, &ctx.pc, tol),
    ];
    for r in &rec {
        println!(
            "{:?}: analytic {:.1} ns / {:.1} fJ, simulated {:.1} ns / {:.1} fJ ({:+.1}%, {:+.1}%){}",
            r.op,
            r.analytic_latency_ns,
            r.analytic_energy_fj,
            r.simulated_latency_ns,
            r.simulated_energy_fj,
            100.0 * r.latency_deviation,
            100.0 * r.energy_deviation,
            if r.flagged { " FLAGGED" } else { "" }
        );
    }
    out.csv("reconcile.csv", &rec.iter().map(RecRow::from).collect::<Vec<_>>())?;
    let flagged = rec.iter().any(|r| r.flagged);
    out.json("reconcile.json", &ReconcileJson { layout: layout_json(&l), n: a.n, seed: g.seed, reconciliation: rec })?;
    if bad > 0 {
        return Err(Failure::new(EXIT_VERIFY, format!("{bad} results differ from the reference")));
    }
    if flagged {
        return Err(Failure::new(EXIT_VERIFY, format!("deviation beyond ±{:.0}%", 100.0 * tol)));
    }
    Ok(())
}

fn load_net(name: &str) -> Res<NetworkSpec> {
    let p = Path::new(name);
    if p.extension().is_some_and(|e| e == "json") || p.exists() {
        let text = std::fs::read_to_string(p).map_err(|e| Failure::new(EXIT_CONFIG, format!("{name}: {e}")))?;
        Ok(NetworkSpec::from_json(&text)?)
    } else {
        Ok(NetworkSpec::preset(name)?)
    }
}

#[derive(Serialize)]
struct TrainRow<'a> {
    design: &'a str,
    area_mm2: f64,
    latency_ns: f64,
    energy_fj: f64,
}

fn estimate_train(ctx: &Ctx, a: &EstimateTrainArgs, out: &mut Outputs) -> Res {
    let net = load_net(&a.net)?;
    let plan = TrainingPlan::new(&net, a.batch, a.steps, &ctx.layout, &ctx.cal.workload)?;
    let est = estimate_training(&net, &plan, &ctx.cal, &ctx.layout)?;
    let r = est.ratios;
    println!(
        "{}: {} params, {} MACs; baseline/proposed area {:.3}x latency {:.3}x energy {:.3}x",
        est.network,
        est.total_params,
        plan.total_macs(),
        r.area,
        r.latency,
        r.energy
    );
    let rows = [
        TrainRow { design: "proposed", area_mm2: est.proposed.area_mm2, latency_ns: est.proposed.latency_ns, energy_fj: est.proposed.energy_fj },
        TrainRow { design: "baseline", area_mm2: est.baseline.area_mm2, latency_ns: est.baseline.latency_ns, energy_fj: est.baseline.energy_fj },
        TrainRow { design: "ratio", area_mm2: r.area, latency_ns: r.latency, energy_fj: r.energy },
    ];
    out.csv("estimate_train.csv", &rows)?;
    out.json("estimate_train.json", &est)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainJson<'a> {
    network: &'a str,
    backend: &'a str,
    epochs: u32,
    lr: f64,
    seed: u64,
    final_accuracy: f64,
    final_loss: Option<f64>,
    diverged: bool,
    overflow: bool,
    underflow: bool,
}

fn train_tiny(ctx: &Ctx, g: &Global, a: &TrainTinyArgs, out: &mut Outputs) -> Res {
    let net = load_net(&a.preset)?;
    let cfg = TinyConfig { epochs: a.epochs, lr: a.lr, seed: g.seed, ..TinyConfig::default() };
    if !cfg.lr.is_finite() {
        return Err(Failure::new(EXIT_CONFIG, "--lr must be finite"));
    }
    let run = match a.backend {
        Backend::Pim => functional_train_tiny(&mut PimArith::new(ctx.layout)?, &net, &cfg)?,
        Backend::Reference => functional_train_tiny(&mut ReferenceArith { layout: ctx.layout }, &net, &cfg)?,
    };
    let final_loss = run.records.last().map(|r| r.loss);
    println!(
        "{}: {} epochs, final loss {}, final accuracy {:.0}%",
        net.name,
        run.records.len(),
        final_loss.map_or("n/a".to_string(), |l| format!("{l:.6}")),
        100.0 * run.final_accuracy
    );
    out.raw("loss.csv", loss_csv(&run.records));
    out.json(
        "train_tiny.json",
        &TrainJson {
            network: &net.name,
            backend: match a.backend {
                Backend::Pim => "pim",
                Backend::Reference => "reference",
            },
            epochs: a.epochs,
            lr: a.lr,
            seed: g.seed,
            final_accuracy: run.final_accuracy,
            final_loss,
            diverged: run.diverged,
            overflow: run.flags.overflow,
            underflow: run.flags.underflow,
        },
    )?;
    if run.diverged {
        return Err(Failure::new(EXIT_DIVERGED, "training diverged (overflow)"));
    }
    Ok(())
}
