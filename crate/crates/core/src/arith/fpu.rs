//! Floating-point add, multiply and MAC as micro-op schedules.
//!
//! Addition:
//! 1. exponent difference `d = e_a - e_b` in two's complement, via the ripple
//!    adder on `e_a + !e_b + 1`;
//! 2. alignment by associative search: for every shift `s` in `0..=n_m+1` the
//!    keys `+s` and `-s` are searched against `d` (two searches per shift),
//!    and on a hit the smaller mantissa is moved right by `s` in one read plus
//!    one shifted write. One guard bit is kept below the LSB; larger
//!    differences flush the smaller operand;
//! 3. mantissa add, or two's-complement subtract for opposite signs;
//! 4. leading-one detection on a row read, a shifted write that strips the
//!    hidden bit into the destination, and an exponent adjust with the ripple
//!    adder. Results are truncated toward zero.
//!
//! Multiplication adds the exponents and re-biases them with the ripple adder.
//! Each multiplier bit is sensed and, when set, the multiplicand is added at
//! offset `j` into one of two accumulator words; the two words swap the roles
//! of source and destination after every add.

use serde::{Deserialize, Serialize};

use crate::cell::WriteConfig;
use crate::error::{Error, Result};
use crate::subarray::{CellLoc, LogSummary, Subarray, WordLoc};

use super::adder::ripple_add;
use super::float::{FloatBits, FloatLayout, FpFlags, StoredFloat};
use super::{Bus, Src};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Sense,
    Exponent,
    Alignment,
    Mantissa,
    Normalize,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Sense => "sense",
            Phase::Exponent => "exponent",
            Phase::Alignment => "alignment",
            Phase::Mantissa => "mantissa",
            Phase::Normalize => "normalize",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub counts: LogSummary,
}

/// Placement of the working cells inside the scratch row.
#[derive(Debug, Clone, Copy)]
struct ScratchMap {
    row: usize,
    col: usize,
    width: usize,
    cache: [CellLoc; 3],
    comp: WordLoc,
    diff: WordLoc,
    aligned: WordLoc,
    msum: WordLoc,
    ehi: WordLoc,
    esum: WordLoc,
    acc: [WordLoc; 2],
    prod: WordLoc,
}

fn bits_for(v: usize) -> usize {
    (usize::BITS - v.leading_zeros()) as usize
}

impl ScratchMap {
    fn new(layout: &FloatLayout, row: usize, col: usize) -> Self {
        let ne = layout.n_e as usize;
        let nm = layout.n_m as usize;
        let w = nm + 2;
        let n = nm + 1;
        // the difference word must hold +-(n_m+1) without aliasing
        let dw = (ne + 1).max(bits_for(nm + 1) + 1);
        let mut next = col;
        let mut take = |len: usize| {
            let wl = WordLoc::new(row, next, len);
            next += len;
            wl
        };
        let c = take(3);
        let cache = [c.bit(0), c.bit(1), c.bit(2)];
        let comp = take(ne);
        let diff = take(dw);
        let aligned = take(w);
        let msum = take(w + 1);
        let ehi = take(2);
        let esum = take(ne + 2);
        let acc = [take(2 * n), take(2 * n)];
        let prod = take(layout.width());
        ScratchMap {
            row,
            col,
            width: next - col,
            cache,
            comp,
            diff,
            aligned,
            msum,
            ehi,
            esum,
            acc,
            prod,
        }
    }

    fn region(&self) -> WordLoc {
        WordLoc::new(self.row, self.col, self.width)
    }
}

/// `v` as a `width`-bit two's-complement word, LSB first.
fn twos(v: i64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (v >> i.min(63)) & 1 == 1).collect()
}

fn from_twos(bits: &[bool]) -> i64 {
    let mut v: i64 = 0;
    for (i, &b) in bits.iter().enumerate() {
        if b {
            v |= 1 << i;
        }
    }
    if bits.last() == Some(&true) {
        v -= 1 << bits.len();
    }
    v
}

fn cells(w: &WordLoc) -> Vec<CellLoc> {
    (0..w.len).map(|i| w.bit(i)).collect()
}

fn cell_srcs(w: &WordLoc) -> Vec<Src> {
    (0..w.len).map(|i| Src::Cell(w.bit(i))).collect()
}

/// Floating-point unit bound to a layout and a scratch region of one row.
#[derive(Debug, Clone)]
pub struct Fpu {
    layout: FloatLayout,
    map: ScratchMap,
    bus: Bus,
    phases: Vec<PhaseSummary>,
    mark: usize,
    roles: Vec<usize>,
}

impl Fpu {
    /// Scratch cells start at (`scratch_row`, `scratch_col`) and span
    /// [`Fpu::scratch_width`] columns.
    pub fn new(layout: FloatLayout, scratch_row: usize, scratch_col: usize) -> Self {
        Fpu {
            map: ScratchMap::new(&layout, scratch_row, scratch_col),
            layout,
            bus: Bus::default(),
            phases: Vec::new(),
            mark: 0,
            roles: Vec::new(),
        }
    }

    pub fn scratch_width(layout: &FloatLayout) -> usize {
        ScratchMap::new(layout, 0, 0).width
    }

    pub fn layout(&self) -> FloatLayout {
        self.layout
    }

    pub fn scratch_region(&self) -> WordLoc {
        self.map.region()
    }

    /// Per-phase event counts of the most recent public operation.
    pub fn last_phases(&self) -> &[PhaseSummary] {
        &self.phases
    }

    /// Sum of the last operation's counts for one phase.
    pub fn phase_counts(&self, phase: Phase) -> LogSummary {
        let mut s = LogSummary::default();
        for p in self.phases.iter().filter(|p| p.phase == phase) {
            s += p.counts;
        }
        s
    }

    /// Accumulator index written by each partial add of the last multiply.
    pub fn last_mul_roles(&self) -> &[usize] {
        &self.roles
    }

    fn begin(&mut self, sa: &Subarray) {
        self.phases.clear();
        self.mark = sa.log_len();
    }

    fn end_phase(&mut self, sa: &Subarray, phase: Phase) {
        self.phases.push(PhaseSummary {
            phase,
            counts: sa.summarize_since(self.mark),
        });
        self.mark = sa.log_len();
    }

    fn check(&self, sa: &Subarray, inputs: &[&StoredFloat], dst: &StoredFloat) -> Result<()> {
        let scratch = self.map.region();
        sa.check_word(&scratch)?;
        for f in inputs.iter().copied().chain(std::iter::once(dst)) {
            if f.layout != self.layout {
                return Err(Error::Precondition("operand layout differs from the unit's".into()));
            }
            sa.check_word(&f.loc)?;
            if f.loc.overlaps(&scratch) {
                return Err(Error::Precondition("operand overlaps scratch cells".into()));
            }
        }
        for f in inputs {
            if f.loc.overlaps(&dst.loc) {
                return Err(Error::Precondition("destination overlaps an operand".into()));
            }
            f.load(sa)?.validate(&self.layout)?;
        }
        Ok(())
    }

    /// Reads both signs and exponents; returns `(sign_a, sign_b, nz_a, nz_b)`.
    fn sense(&mut self, sa: &mut Subarray, a: &StoredFloat, b: &StoredFloat) -> Result<(bool, bool, bool, bool)> {
        let ne = self.layout.n_e as usize;
        let mut cs = Vec::with_capacity(2 * ne + 2);
        cs.push(a.sign_cell());
        cs.push(b.sign_cell());
        cs.extend((0..ne).map(|i| a.exp_cell(i)));
        cs.extend((0..ne).map(|i| b.exp_cell(i)));
        let l = self.bus.read(sa, &cs)?;
        let nz_a = l[2..2 + ne].iter().any(|&x| x);
        let nz_b = l[2 + ne..].iter().any(|&x| x);
        Ok((l[0], l[1], nz_a, nz_b))
    }

    /// Writes `src >> shift` (guard bit included) into the aligned word.
    fn shift_into_aligned(&mut self, sa: &mut Subarray, src: &StoredFloat, hidden: bool, shift: usize) -> Result<()> {
        let nm = self.layout.n_m as usize;
        let man: Vec<CellLoc> = (0..nm).map(|i| src.man_cell(i)).collect();
        let l = self.bus.read(sa, &man)?.to_vec();
        let aligned = self.map.aligned;
        let ops: Vec<(CellLoc, WriteConfig)> = (0..aligned.len)
            .map(|k| {
                let g = k + shift;
                let bit = match g {
                    0 => false,
                    g if g <= nm => l[g - 1],
                    g if g == nm + 1 => hidden,
                    _ => false,
                };
                (aligned.bit(k), WriteConfig::copy(bit))
            })
            .collect();
        self.bus.write(sa, &ops)
    }

    fn complement_aligned(&mut self, sa: &mut Subarray) -> Result<()> {
        let ops: Vec<_> = cells(&self.map.aligned)
            .into_iter()
            .map(|c| (c, WriteConfig::xor(true)))
            .collect();
        self.bus.write(sa, &ops)
    }

    /// `x_exp + adj` into the destination exponent; then range checks and,
    /// if needed, rewrites the destination as zero or max finite.
    fn adjust_exponent(
        &mut self,
        sa: &mut Subarray,
        x: Vec<Src>,
        adj: i64,
        dst: &StoredFloat,
        sign: bool,
    ) -> Result<FpFlags> {
        let ne = self.layout.n_e as usize;
        let nm = self.layout.n_m as usize;
        let y: Vec<Src> = twos(adj, ne + 2).into_iter().map(Src::Const).collect();
        let mut dest: Vec<CellLoc> = (0..ne).map(|i| dst.exp_cell(i)).collect();
        dest.push(self.map.ehi.bit(0));
        dest.push(self.map.ehi.bit(1));
        ripple_add(sa, &mut self.bus, &x, &y, false, &dest, None, self.map.cache)?;
        let e_new = from_twos(self.bus.read(sa, &dest)?);
        let mut flags = FpFlags::default();
        let fill = if e_new <= 0 {
            flags.underflow = true;
            Some(FloatBits::zero(sign))
        } else if e_new > self.layout.e_max() as i64 {
            flags.overflow = true;
            Some(self.layout.max_finite(sign))
        } else {
            None
        };
        if let Some(f) = fill {
            let raw = f.to_raw(&self.layout);
            let ops: Vec<_> = (0..self.layout.width())
                .map(|i| (dst.loc.bit(i), WriteConfig::copy((raw >> i) & 1 == 1)))
                .collect();
            self.bus.write(sa, &ops)?;
        }
        debug_assert!(nm > 0);
        Ok(flags)
    }

    fn write_zero(&mut self, sa: &mut Subarray, dst: &StoredFloat, sign: bool) -> Result<()> {
        let sc = dst.sign_cell();
        let ops: Vec<_> = (0..self.layout.width())
            .map(|i| {
                let c = dst.loc.bit(i);
                (c, WriteConfig::copy(c == sc && sign))
            })
            .collect();
        self.bus.write(sa, &ops)
    }

    pub fn float_add(
        &mut self,
        sa: &mut Subarray,
        a: &StoredFloat,
        b: &StoredFloat,
        dst: &StoredFloat,
    ) -> Result<FpFlags> {
        self.check(sa, &[a, b], dst)?;
        self.begin(sa);
        self.add_inner(sa, a, b, dst)
    }

    fn add_inner(&mut self, sa: &mut Subarray, a: &StoredFloat, b: &StoredFloat, dst: &StoredFloat) -> Result<FpFlags> {
        let ne = self.layout.n_e as usize;
        let nm = self.layout.n_m as usize;
        let w = nm + 2;
        let map = self.map;
        let dw = map.diff.len;

        let (sign_a, sign_b, nz_a, nz_b) = self.sense(sa, a, b)?;
        self.end_phase(sa, Phase::Sense);

        // d = e_a + !e_b + 1
        let eb: Vec<CellLoc> = (0..ne).map(|i| b.exp_cell(i)).collect();
        let l = self.bus.read(sa, &eb)?.to_vec();
        let ops: Vec<_> = (0..ne).map(|i| (map.comp.bit(i), WriteConfig::copy(l[i]))).collect();
        self.bus.write(sa, &ops)?;
        self.complement_comp(sa)?;
        let x: Vec<Src> = (0..dw)
            .map(|i| if i < ne { Src::Cell(a.exp_cell(i)) } else { Src::Const(false) })
            .collect();
        let y: Vec<Src> = (0..dw)
            .map(|i| if i < ne { Src::Cell(map.comp.bit(i)) } else { Src::Const(true) })
            .collect();
        ripple_add(sa, &mut self.bus, &x, &y, true, &cells(&map.diff), None, map.cache)?;
        let d_neg = self.bus.read(sa, &[map.diff.bit(dw - 1)])?[0];
        self.end_phase(sa, Phase::Exponent);

        let (big, small, big_nz, small_nz, big_sign, small_sign) = if d_neg {
            (b, a, nz_b, nz_a, sign_b, sign_a)
        } else {
            (a, b, nz_a, nz_b, sign_a, sign_b)
        };
        let mut shift = None;
        for s in 0..=nm + 1 {
            for neg in [false, true] {
                let key = twos(if neg { -(s as i64) } else { s as i64 }, dw);
                let hit = !sa.search(&key, &[map.diff])?.is_empty();
                if hit && shift.is_none() {
                    shift = Some(s);
                    self.shift_into_aligned(sa, small, small_nz, s)?;
                }
            }
        }
        self.end_phase(sa, Phase::Alignment);

        let eff_sub = sign_a != sign_b;
        let y: Vec<Src> = if shift.is_some() {
            if eff_sub {
                self.complement_aligned(sa)?;
            }
            cell_srcs(&map.aligned)
        } else {
            vec![Src::Const(eff_sub); w]
        };
        let full = |f: &StoredFloat, nz: bool| -> Vec<Src> {
            let mut v = Vec::with_capacity(w);
            v.push(Src::Const(false));
            v.extend((0..nm).map(|i| Src::Cell(f.man_cell(i))));
            v.push(Src::Const(nz));
            v
        };
        let msum = cells(&map.msum);
        ripple_add(sa, &mut self.bus, &full(big, big_nz), &y, eff_sub, &msum[..w], Some(msum[w]), map.cache)?;
        let mut res_sign = big_sign;
        if eff_sub && shift == Some(0) {
            let carry = self.bus.read(sa, &[msum[w]])?[0];
            if !carry {
                // |small| > |big| with equal exponents: compute small - big
                self.shift_into_aligned(sa, big, big_nz, 0)?;
                self.complement_aligned(sa)?;
                let y = cell_srcs(&map.aligned);
                ripple_add(sa, &mut self.bus, &full(small, small_nz), &y, true, &msum[..w], Some(msum[w]), map.cache)?;
                res_sign = small_sign;
            }
        }
        self.end_phase(sa, Phase::Mantissa);

        let width = if eff_sub { w } else { w + 1 };
        let bits = self.bus.read(sa, &msum[..width])?.to_vec();
        let flags = match bits.iter().rposition(|&b| b) {
            None => {
                self.write_zero(sa, dst, false)?;
                FpFlags::default()
            }
            Some(p) => {
                let mut ops: Vec<_> = (0..nm)
                    .map(|i| {
                        let src = p as i64 - nm as i64 + i as i64;
                        let bit = src >= 0 && bits[src as usize];
                        (dst.man_cell(i), WriteConfig::copy(bit))
                    })
                    .collect();
                ops.push((dst.sign_cell(), WriteConfig::copy(res_sign)));
                self.bus.write(sa, &ops)?;
                let x: Vec<Src> = (0..ne + 2)
                    .map(|i| if i < ne { Src::Cell(big.exp_cell(i)) } else { Src::Const(false) })
                    .collect();
                let adj = p as i64 - nm as i64 - 1;
                self.adjust_exponent(sa, x, adj, dst, res_sign)?
            }
        };
        self.end_phase(sa, Phase::Normalize);
        Ok(flags)
    }

    fn complement_comp(&mut self, sa: &mut Subarray) -> Result<()> {
        let ops: Vec<_> = cells(&self.map.comp)
            .into_iter()
            .map(|c| (c, WriteConfig::xor(true)))
            .collect();
        self.bus.write(sa, &ops)
    }

    pub fn float_mul(
        &mut self,
        sa: &mut Subarray,
        a: &StoredFloat,
        b: &StoredFloat,
        dst: &StoredFloat,
    ) -> Result<FpFlags> {
        self.check(sa, &[a, b], dst)?;
        self.begin(sa);
        self.mul_inner(sa, a, b, dst)
    }

    fn mul_inner(&mut self, sa: &mut Subarray, a: &StoredFloat, b: &StoredFloat, dst: &StoredFloat) -> Result<FpFlags> {
        let ne = self.layout.n_e as usize;
        let nm = self.layout.n_m as usize;
        let n = nm + 1;
        let map = self.map;

        let (sign_a, _, nz_a, nz_b) = self.sense(sa, a, b)?;
        self.end_phase(sa, Phase::Sense);

        let ext = |f: &StoredFloat| -> Vec<Src> {
            (0..ne + 2)
                .map(|i| if i < ne { Src::Cell(f.exp_cell(i)) } else { Src::Const(false) })
                .collect()
        };
        ripple_add(sa, &mut self.bus, &ext(a), &ext(b), false, &cells(&map.esum), None, map.cache)?;
        self.end_phase(sa, Phase::Exponent);

        let mut m: Vec<Src> = (0..nm).map(|i| Src::Cell(a.man_cell(i))).collect();
        m.push(Src::Const(nz_a));
        self.roles.clear();
        let mut cur = 0;
        let mut valid = false;
        let mut top: Option<usize> = None;
        for j in 0..n {
            let bit = if j < nm {
                self.bus.read(sa, &[b.man_cell(j)])?[0]
            } else {
                nz_b
            };
            if !bit {
                continue;
            }
            let nxt = 1 - cur;
            let (src_acc, dst_acc) = (map.acc[cur], map.acc[nxt]);
            if valid {
                if j > 0 {
                    let from: Vec<CellLoc> = (0..j).map(|k| src_acc.bit(k)).collect();
                    let l = self.bus.read(sa, &from)?;
                    let ops: Vec<_> = (0..j)
                        .zip(l)
                        .map(|(k, &v)| (dst_acc.bit(k), WriteConfig::copy(v)))
                        .collect();
                    self.bus.write(sa, &ops)?;
                }
            } else if j > 0 {
                let ops: Vec<_> = (0..j).map(|k| (dst_acc.bit(k), WriteConfig::copy(false))).collect();
                self.bus.write(sa, &ops)?;
            }
            // cells above the previous add's carry were never written this op
            let y: Vec<Src> = (j..j + n)
                .map(|k| match top {
                    Some(t) if k <= t => Src::Cell(src_acc.bit(k)),
                    _ => Src::Const(false),
                })
                .collect();
            let dest: Vec<CellLoc> = (j..j + n).map(|k| dst_acc.bit(k)).collect();
            ripple_add(sa, &mut self.bus, &m, &y, false, &dest, Some(dst_acc.bit(j + n)), map.cache)?;
            valid = true;
            top = Some(j + n);
            self.roles.push(nxt);
            cur = nxt;
        }
        self.end_phase(sa, Phase::Mantissa);

        let bits = if valid {
            self.bus.read(sa, &cells(&map.acc[cur]))?.to_vec()
        } else {
            Vec::new()
        };
        let mut flags = FpFlags::default();
        if !bits.iter().any(|&x| x) {
            self.write_zero(sa, dst, sign_a)?;
        } else {
            let top = bits[2 * n - 1] as usize;
            let mut ops: Vec<_> = (0..nm)
                .map(|i| (dst.man_cell(i), WriteConfig::copy(bits[nm + top + i])))
                .collect();
            ops.push((dst.sign_cell(), WriteConfig::copy(sign_a)));
            self.bus.write(sa, &ops)?;
            let adj = top as i64 - self.layout.bias;
            flags = self.adjust_exponent(sa, cell_srcs(&map.esum), adj, dst, sign_a)?;
        }
        // sign = s_a xor s_b as a single XOR write over the copied s_a
        let sb = self.bus.read(sa, &[b.sign_cell()])?[0];
        self.bus.write(sa, &[(dst.sign_cell(), WriteConfig::xor(sb))])?;
        self.end_phase(sa, Phase::Normalize);
        Ok(flags)
    }

    /// `dst = acc + x*w`; the product is staged in scratch.
    pub fn mac(
        &mut self,
        sa: &mut Subarray,
        acc: &StoredFloat,
        x: &StoredFloat,
        w: &StoredFloat,
        dst: &StoredFloat,
    ) -> Result<FpFlags> {
        self.check(sa, &[acc, x, w], dst)?;
        let prod = StoredFloat {
            loc: self.map.prod,
            layout: self.layout,
        };
        self.begin(sa);
        let f1 = self.mul_inner(sa, x, w, &prod)?;
        let f2 = self.add_inner(sa, acc, &prod, dst)?;
        Ok(f1 | f2)
    }
}
