//! Arithmetic executed as micro-op schedules on a [`Subarray`].
//!
//! Every step of a schedule is "read, then write": the peripheral senses a
//! set of cells, latches the bits, and drives them (possibly routed to other
//! columns) as the applied bits of one conditional write. A read touching
//! several rows logs one RowRead per row; a write touching several rows logs
//! one RowWrite per row.

pub mod adder;
pub mod float;
pub mod fpu;
pub mod reference;

use crate::cell::WriteConfig;
use crate::error::Result;
use crate::subarray::{CellLoc, ColumnOp, LogSummary, Subarray};

pub use adder::{add_nbit, full_add_1bit, FaLocs};
pub use float::{decode_float, encode_float, FloatBits, FloatLayout, FpFlags, Rounding, StoredFloat};
pub use fpu::{Fpu, Phase, PhaseSummary};
pub use reference::{ref_add, ref_mac, ref_mul};

/// Where an operand bit comes from: a cell, or a level the peripheral drives
/// directly (constant 0/1, hidden bits, guard bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Src {
    Cell(CellLoc),
    Const(bool),
}

/// Reusable peripheral buffers for issuing grouped reads and writes.
#[derive(Debug, Default, Clone)]
pub struct Bus {
    rows: Vec<usize>,
    cols: Vec<usize>,
    sensed: Vec<bool>,
    latch: Vec<bool>,
    ops: Vec<ColumnOp>,
}

impl Bus {
    /// Senses `cells`; returns latched bits in the same order.
    pub fn read(&mut self, sa: &mut Subarray, cells: &[CellLoc]) -> Result<&[bool]> {
        self.latch.clear();
        self.latch.resize(cells.len(), false);
        self.rows.clear();
        for c in cells {
            if !self.rows.contains(&c.row) {
                self.rows.push(c.row);
            }
        }
        for ri in 0..self.rows.len() {
            let row = self.rows[ri];
            self.cols.clear();
            self.cols
                .extend(cells.iter().filter(|c| c.row == row).map(|c| c.col));
            sa.read_row_into(row, &self.cols, &mut self.sensed)?;
            let mut k = 0;
            for (i, c) in cells.iter().enumerate() {
                if c.row == row {
                    self.latch[i] = self.sensed[k];
                    k += 1;
                }
            }
        }
        Ok(&self.latch)
    }

    /// One write step; ops on different rows become one RowWrite each.
    pub fn write(&mut self, sa: &mut Subarray, ops: &[(CellLoc, WriteConfig)]) -> Result<()> {
        self.rows.clear();
        for (c, _) in ops {
            if !self.rows.contains(&c.row) {
                self.rows.push(c.row);
            }
        }
        for ri in 0..self.rows.len() {
            let row = self.rows[ri];
            self.ops.clear();
            self.ops.extend(
                ops.iter()
                    .filter(|(c, _)| c.row == row)
                    .map(|(c, cfg)| ColumnOp::new(c.col, *cfg)),
            );
            sa.write_row(row, &self.ops)?;
        }
        Ok(())
    }
}

/// Float arithmetic backend used by the training loop.
pub trait FloatArith {
    fn layout(&self) -> FloatLayout;
    fn add(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)>;
    fn mul(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)>;
}

/// The integer reference model behind the [`FloatArith`] interface.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceArith {
    pub layout: FloatLayout,
}

impl FloatArith for ReferenceArith {
    fn layout(&self) -> FloatLayout {
        self.layout
    }

    fn add(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        Ok(ref_add(&self.layout, a, b))
    }

    fn mul(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        Ok(ref_mul(&self.layout, a, b))
    }
}

/// Runs every operation bit-level on a private subarray.
///
/// Operands are placed in fixed slots of row 0 (host placement, not costed).
/// The event log is folded into running totals after every operation.
#[derive(Debug, Clone)]
pub struct PimArith {
    pub sa: Subarray,
    fpu: Fpu,
    a: StoredFloat,
    b: StoredFloat,
    dst: StoredFloat,
    totals: LogSummary,
    ops: u64,
}

impl PimArith {
    pub fn new(layout: FloatLayout) -> Result<Self> {
        layout.validate()?;
        let w = layout.width();
        let cols = 3 * w + Fpu::scratch_width(&layout);
        let sa = Subarray::new(1, cols)?;
        Ok(PimArith {
            sa,
            fpu: Fpu::new(layout, 0, 3 * w),
            a: StoredFloat::at(0, 0, layout),
            b: StoredFloat::at(0, w, layout),
            dst: StoredFloat::at(0, 2 * w, layout),
            totals: LogSummary::default(),
            ops: 0,
        })
    }

    /// Counts accumulated since construction or the last reset.
    pub fn totals(&self) -> LogSummary {
        self.totals
    }

    /// Number of add and mul operations behind [`PimArith::totals`].
    pub fn op_count(&self) -> u64 {
        self.ops
    }

    pub fn reset_totals(&mut self) {
        self.totals = LogSummary::default();
        self.ops = 0;
        self.sa.reset_log();
    }

    pub fn fpu(&self) -> &Fpu {
        &self.fpu
    }

    fn fold(&mut self) {
        self.totals += self.sa.summarize_log();
        self.ops += 1;
        self.sa.reset_log();
    }
}

impl FloatArith for PimArith {
    fn layout(&self) -> FloatLayout {
        self.fpu.layout()
    }

    fn add(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        self.a.store(&mut self.sa, a)?;
        self.b.store(&mut self.sa, b)?;
        let flags = self.fpu.float_add(&mut self.sa, &self.a, &self.b, &self.dst)?;
        self.fold();
        Ok((self.dst.load(&self.sa)?, flags))
    }

    fn mul(&mut self, a: &FloatBits, b: &FloatBits) -> Result<(FloatBits, FpFlags)> {
        self.a.store(&mut self.sa, a)?;
        self.b.store(&mut self.sa, b)?;
        let flags = self.fpu.float_mul(&mut self.sa, &self.a, &self.b, &self.dst)?;
        self.fold();
        Ok((self.dst.load(&self.sa)?, flags))
    }
}

/// Random normal operand with an exponent within 10 of the bias (narrower
/// for small exponent fields).
pub fn random_float<R: rand::Rng + ?Sized>(rng: &mut R, layout: &FloatLayout) -> FloatBits {
    let bias = layout.bias;
    let k = 10.min(bias - 1).max(0);
    let lo = (bias - k).max(1) as u32;
    let hi = ((bias + k) as u32).min(layout.e_max());
    FloatBits {
        sign: rng.gen(),
        exp: rng.gen_range(lo..=hi),
        man: rng.gen::<u64>() & layout.man_mask(),
    }
}
