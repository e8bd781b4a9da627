//! Operand-preserving full adder and ripple addition.
//!
//! The 1-bit adder takes four read-then-write steps over four cache cells
//! `c0..c3`:
//!
//! 1. copy `X, Y, Z` into `c0, c1, c2`;
//! 2. in parallel `c1 ^= X` (giving `X⊕Y`) and `c0 &= Y` (giving `XY`);
//! 3. copy `X⊕Y` into `c3` next to `Z`, and `c1 &= Z` (giving `Z(X⊕Y)`);
//! 4. in parallel `c2 ^= X⊕Y` (the sum) and `c0 |= Z(X⊕Y)` (the carry).
//!
//! `X` and `Y` are only ever read. In a ripple the carry left in `c0` feeds
//! the next bit's step 1 directly, and `c2` is the destination bit itself, so
//! only three dedicated cache cells are reused for any width.

use crate::cell::WriteConfig;
use crate::error::{Error, Result};
use crate::subarray::{CellLoc, Subarray, WordLoc};

use super::{Bus, Src};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaLocs {
    pub x: CellLoc,
    pub y: CellLoc,
    pub z: CellLoc,
    pub cache: [CellLoc; 4],
}

impl FaLocs {
    /// Sum output.
    pub fn s(&self) -> CellLoc {
        self.cache[2]
    }

    /// Carry output.
    pub fn z_out(&self) -> CellLoc {
        self.cache[0]
    }

    fn cells(&self) -> [CellLoc; 7] {
        let [c0, c1, c2, c3] = self.cache;
        [self.x, self.y, self.z, c0, c1, c2, c3]
    }
}

fn resolve(s: Src, reads: &[CellLoc], latched: &[bool]) -> bool {
    match s {
        Src::Const(b) => b,
        Src::Cell(c) => latched[reads.iter().position(|r| *r == c).expect("source was read")],
    }
}

/// The four-step schedule. Sum lands in `c[2]`, carry in `c[0]`.
pub(crate) fn fa_schedule(
    sa: &mut Subarray,
    bus: &mut Bus,
    x: Src,
    y: Src,
    z: Src,
    c: [CellLoc; 4],
) -> Result<()> {
    // step 1
    let mut reads = [CellLoc::new(0, 0); 3];
    let mut n = 0;
    for s in [x, y, z] {
        if let Src::Cell(loc) = s {
            reads[n] = loc;
            n += 1;
        }
    }
    let (xv, yv, zv) = if n > 0 {
        let l = bus.read(sa, &reads[..n])?;
        (
            resolve(x, &reads[..n], l),
            resolve(y, &reads[..n], l),
            resolve(z, &reads[..n], l),
        )
    } else {
        (resolve(x, &[], &[]), resolve(y, &[], &[]), resolve(z, &[], &[]))
    };
    bus.write(
        sa,
        &[
            (c[0], WriteConfig::copy(xv)),
            (c[1], WriteConfig::copy(yv)),
            (c[2], WriteConfig::copy(zv)),
        ],
    )?;
    // step 2
    let (lx, ly) = {
        let l = bus.read(sa, &[c[0], c[1]])?;
        (l[0], l[1])
    };
    bus.write(sa, &[(c[1], WriteConfig::xor(lx)), (c[0], WriteConfig::and(ly))])?;
    // step 3
    let (p, lz) = {
        let l = bus.read(sa, &[c[1], c[2]])?;
        (l[0], l[1])
    };
    bus.write(sa, &[(c[3], WriteConfig::copy(p)), (c[1], WriteConfig::and(lz))])?;
    // step 4
    let (t, p) = {
        let l = bus.read(sa, &[c[1], c[3]])?;
        (l[0], l[1])
    };
    bus.write(sa, &[(c[2], WriteConfig::xor(p)), (c[0], WriteConfig::or(t))])
}

/// Ripple addition `x + y + cin` into `dest` (same width as the operands).
/// `cache` is `[carry, work, pcopy]`; the carry out stays in `cache[0]` and
/// is copied to `carry_dest` when given.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ripple_add(
    sa: &mut Subarray,
    bus: &mut Bus,
    x: &[Src],
    y: &[Src],
    cin: bool,
    dest: &[CellLoc],
    carry_dest: Option<CellLoc>,
    cache: [CellLoc; 3],
) -> Result<()> {
    debug_assert_eq!(x.len(), y.len());
    debug_assert_eq!(x.len(), dest.len());
    for i in 0..x.len() {
        let z = if i == 0 {
            Src::Const(cin)
        } else {
            Src::Cell(cache[0])
        };
        fa_schedule(sa, bus, x[i], y[i], z, [cache[0], cache[1], dest[i], cache[2]])?;
    }
    if let Some(cd) = carry_dest {
        let c = bus.read(sa, &[cache[0]])?[0];
        bus.write(sa, &[(cd, WriteConfig::copy(c))])?;
    }
    Ok(())
}

fn all_distinct(cells: &[CellLoc]) -> bool {
    cells
        .iter()
        .enumerate()
        .all(|(i, a)| cells[i + 1..].iter().all(|b| a != b))
}

/// One full addition on `locs`; returns `(sum, carry)`.
pub fn full_add_1bit(sa: &mut Subarray, locs: &FaLocs) -> Result<(bool, bool)> {
    let cells = locs.cells();
    if !all_distinct(&cells) {
        return Err(Error::Precondition("full adder locations overlap".into()));
    }
    for c in cells {
        sa.peek(c.row, c.col)?;
    }
    let mut bus = Bus::default();
    fa_schedule(
        sa,
        &mut bus,
        Src::Cell(locs.x),
        Src::Cell(locs.y),
        Src::Cell(locs.z),
        locs.cache,
    )?;
    Ok((sa.peek(locs.s().row, locs.s().col)?, sa.peek(locs.z_out().row, locs.z_out().col)?))
}

/// Unsigned `x + y` into the `n+1`-bit word `dest`, reusing three cache cells
/// for every bit. Operands are left unchanged.
pub fn add_nbit(
    sa: &mut Subarray,
    x: &WordLoc,
    y: &WordLoc,
    dest: &WordLoc,
    cache: [CellLoc; 3],
) -> Result<u128> {
    let n = x.len;
    if n == 0 || y.len != n || dest.len != n + 1 {
        return Err(Error::Precondition(format!(
            "add_nbit needs equal non-empty operands and an (n+1)-bit destination, got {}/{}/{}",
            x.len, y.len, dest.len
        )));
    }
    for w in [x, y, dest] {
        sa.check_word(w)?;
    }
    for c in cache {
        sa.peek(c.row, c.col)?;
    }
    if x.overlaps(y) || x.overlaps(dest) || y.overlaps(dest) {
        return Err(Error::Precondition("operand placements overlap".into()));
    }
    if !all_distinct(&cache) || cache.iter().any(|c| x.contains(*c) || y.contains(*c) || dest.contains(*c)) {
        return Err(Error::Precondition("cache cells overlap operands".into()));
    }
    let xs: Vec<Src> = (0..n).map(|i| Src::Cell(x.bit(i))).collect();
    let ys: Vec<Src> = (0..n).map(|i| Src::Cell(y.bit(i))).collect();
    let ds: Vec<CellLoc> = (0..n).map(|i| dest.bit(i)).collect();
    let mut bus = Bus::default();
    ripple_add(sa, &mut bus, &xs, &ys, false, &ds, Some(dest.bit(n)), cache)?;
    sa.peek_word(dest)
}
