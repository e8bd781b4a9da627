//! R×C array of SOT-MRAM cells with a micro-op event log.
//!
//! Every read, conditional write and associative search issued through
//! [`Subarray`] appends exactly one [`CostEvent`]. The cost model prices a run
//! from that log, so the log is the single source of truth for how much work a
//! schedule did. `peek`/`poke` give untracked host access for placing
//! operands and inspecting results in tests.

use std::fmt::Write as _;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::cell::{apply_write, CellState, WriteConfig};
use crate::error::{Error, Result};

pub const DEFAULT_ROWS: usize = 1024;
pub const DEFAULT_COLS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellLoc {
    pub row: usize,
    pub col: usize,
}

impl CellLoc {
    pub const fn new(row: usize, col: usize) -> Self {
        CellLoc { row, col }
    }
}

/// A word laid out along one row, least significant bit at `col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordLoc {
    pub row: usize,
    pub col: usize,
    pub len: usize,
}

impl WordLoc {
    pub const fn new(row: usize, col: usize, len: usize) -> Self {
        WordLoc { row, col, len }
    }

    #[inline]
    pub fn bit(&self, i: usize) -> CellLoc {
        debug_assert!(i < self.len);
        CellLoc::new(self.row, self.col + i)
    }

    /// Sub-word of `len` bits starting at bit `start`.
    pub fn slice(&self, start: usize, len: usize) -> WordLoc {
        debug_assert!(start + len <= self.len);
        WordLoc::new(self.row, self.col + start, len)
    }

    pub fn contains(&self, c: CellLoc) -> bool {
        c.row == self.row && c.col >= self.col && c.col < self.col + self.len
    }

    pub fn overlaps(&self, other: &WordLoc) -> bool {
        self.row == other.row
            && self.col < other.col + other.len
            && other.col < self.col + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnOp {
    pub col: usize,
    pub cfg: WriteConfig,
}

impl ColumnOp {
    pub fn new(col: usize, cfg: WriteConfig) -> Self {
        ColumnOp { col, cfg }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    RowRead,
    RowWrite,
    Search,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::RowRead => "read",
            EventKind::RowWrite => "write",
            EventKind::Search => "search",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "read" => Ok(EventKind::RowRead),
            "write" => Ok(EventKind::RowWrite),
            "search" => Ok(EventKind::Search),
            other => Err(Error::Parse(format!("unknown event kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEvent {
    pub kind: EventKind,
    pub row: usize,
    pub bits_touched: usize,
}

/// Event counts per kind plus the number of bits each kind touched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogSummary {
    pub n_reads: u64,
    pub n_writes: u64,
    pub n_searches: u64,
    pub read_bits: u64,
    pub write_bits: u64,
    pub search_bits: u64,
}

impl LogSummary {
    pub fn from_events(events: &[CostEvent]) -> Self {
        let mut s = LogSummary::default();
        for e in events {
            s.push(e);
        }
        s
    }

    #[inline]
    pub fn push(&mut self, e: &CostEvent) {
        let bits = e.bits_touched as u64;
        match e.kind {
            EventKind::RowRead => {
                self.n_reads += 1;
                self.read_bits += bits;
            }
            EventKind::RowWrite => {
                self.n_writes += 1;
                self.write_bits += bits;
            }
            EventKind::Search => {
                self.n_searches += 1;
                self.search_bits += bits;
            }
        }
    }

    pub fn total_events(&self) -> u64 {
        self.n_reads + self.n_writes + self.n_searches
    }
}

impl AddAssign for LogSummary {
    fn add_assign(&mut self, o: Self) {
        self.n_reads += o.n_reads;
        self.n_writes += o.n_writes;
        self.n_searches += o.n_searches;
        self.read_bits += o.read_bits;
        self.write_bits += o.write_bits;
        self.search_bits += o.search_bits;
    }
}

#[derive(Debug, Clone)]
pub struct Subarray {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    log: Vec<CostEvent>,
    // per-column generation stamps for O(k) duplicate detection in write_row
    stamp: Vec<u32>,
    generation: u32,
}

impl Default for Subarray {
    fn default() -> Self {
        Subarray::new(DEFAULT_ROWS, DEFAULT_COLS).expect("default geometry is valid")
    }
}

impl Subarray {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Precondition(format!(
                "subarray geometry {rows}x{cols} must be non-empty"
            )));
        }
        let words_per_row = cols.div_ceil(64);
        Ok(Subarray {
            rows,
            cols,
            words_per_row,
            bits: vec![0; rows * words_per_row],
            log: Vec::new(),
            stamp: vec![0; cols],
            generation: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn check(&self, row: usize, col: usize) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    pub fn check_word(&self, w: &WordLoc) -> Result<()> {
        if w.len == 0 {
            return Err(Error::Precondition("zero-length word".into()));
        }
        self.check(w.row, w.col)?;
        self.check(w.row, w.col + w.len - 1)
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> bool {
        let w = self.bits[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, bit: bool) {
        let w = &mut self.bits[row * self.words_per_row + col / 64];
        let mask = 1u64 << (col % 64);
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Untracked inspection; does not log.
    pub fn peek(&self, row: usize, col: usize) -> Result<bool> {
        self.check(row, col)?;
        Ok(self.get(row, col))
    }

    pub fn cell(&self, row: usize, col: usize) -> Result<CellState> {
        self.peek(row, col).map(CellState::encode)
    }

    /// Untracked host placement; does not log.
    pub fn poke(&mut self, row: usize, col: usize, bit: bool) -> Result<()> {
        self.check(row, col)?;
        self.set(row, col, bit);
        Ok(())
    }

    /// Fault-injection hook: inverts one cell without logging.
    pub fn flip(&mut self, row: usize, col: usize) -> Result<()> {
        let b = self.peek(row, col)?;
        self.set(row, col, !b);
        Ok(())
    }

    /// Untracked read of a word (LSB first) as an integer.
    pub fn peek_word(&self, w: &WordLoc) -> Result<u128> {
        self.check_word(w)?;
        if w.len > 128 {
            return Err(Error::Precondition(format!("word of {} bits exceeds 128", w.len)));
        }
        let mut v = 0u128;
        for i in 0..w.len {
            if self.get(w.row, w.col + i) {
                v |= 1 << i;
            }
        }
        Ok(v)
    }

    /// Untracked store of the low `w.len` bits of `value`.
    pub fn poke_word(&mut self, w: &WordLoc, value: u128) -> Result<()> {
        self.check_word(w)?;
        if w.len > 128 {
            return Err(Error::Precondition(format!("word of {} bits exceeds 128", w.len)));
        }
        for i in 0..w.len {
            self.set(w.row, w.col + i, (value >> i) & 1 == 1);
        }
        Ok(())
    }

    /// Copy of the whole cell grid, for snapshot comparisons.
    pub fn snapshot(&self) -> Vec<u64> {
        self.bits.clone()
    }

    pub fn read_row(&mut self, row: usize, cols: &[usize]) -> Result<Vec<bool>> {
        let mut out = Vec::with_capacity(cols.len());
        self.read_row_into(row, cols, &mut out)?;
        Ok(out)
    }

    /// Reads `cols` of `row` into `out` (cleared first) and logs one RowRead.
    pub fn read_row_into(&mut self, row: usize, cols: &[usize], out: &mut Vec<bool>) -> Result<()> {
        if cols.is_empty() {
            return Err(Error::Precondition("read_row needs at least one column".into()));
        }
        for &c in cols {
            self.check(row, c)?;
        }
        out.clear();
        out.extend(cols.iter().map(|&c| self.get(row, c)));
        self.log.push(CostEvent {
            kind: EventKind::RowRead,
            row,
            bits_touched: cols.len(),
        });
        Ok(())
    }

    /// Applies one conditional write per addressed column of `row` in a single
    /// step. Columns may carry different logic kinds and applied bits.
    pub fn write_row(&mut self, row: usize, ops: &[ColumnOp]) -> Result<()> {
        if ops.is_empty() {
            return Err(Error::Precondition("write_row needs at least one column op".into()));
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.fill(0);
            self.generation = 1;
        }
        for op in ops {
            self.check(row, op.col)?;
            if self.stamp[op.col] == self.generation {
                return Err(Error::DuplicateColumn(op.col));
            }
            self.stamp[op.col] = self.generation;
        }
        for op in ops {
            let prev = CellState::encode(self.get(row, op.col));
            self.set(row, op.col, apply_write(prev, op.cfg).decode());
        }
        self.log.push(CostEvent {
            kind: EventKind::RowWrite,
            row,
            bits_touched: ops.len(),
        });
        Ok(())
    }

    /// Parallel associative compare of `key` against every word in `region`.
    /// Returns the matching locations in region order and logs one Search.
    pub fn search(&mut self, key: &[bool], region: &[WordLoc]) -> Result<Vec<WordLoc>> {
        if key.is_empty() {
            return Err(Error::Precondition("search key must be non-empty".into()));
        }
        for w in region {
            if w.len != key.len() {
                return Err(Error::Precondition(format!(
                    "word at ({}, {}) spans {} cells, key has {}",
                    w.row,
                    w.col,
                    w.len,
                    key.len()
                )));
            }
            self.check_word(w)?;
        }
        let hits = region
            .iter()
            .copied()
            .filter(|w| key.iter().enumerate().all(|(i, &k)| self.get(w.row, w.col + i) == k))
            .collect();
        self.log.push(CostEvent {
            kind: EventKind::Search,
            row: region.first().map_or(0, |w| w.row),
            bits_touched: key.len(),
        });
        Ok(hits)
    }

    pub fn log(&self) -> &[CostEvent] {
        &self.log
    }

    pub fn log_len(&self) -> usize {
        self.log.len()
    }

    pub fn reset_log(&mut self) {
        self.log.clear();
    }

    pub fn summarize_log(&self) -> LogSummary {
        LogSummary::from_events(&self.log)
    }

    pub fn summarize_since(&self, start: usize) -> LogSummary {
        LogSummary::from_events(&self.log[start.min(self.log.len())..])
    }

    /// Micro-op trace, one `kind,row,bits_touched` line per event.
    pub fn trace_csv(&self) -> String {
        trace_to_csv(&self.log)
    }
}

pub const TRACE_HEADER: &str = "kind,row,bits_touched";

pub fn trace_to_csv(events: &[CostEvent]) -> String {
    let mut s = String::with_capacity(16 * (events.len() + 1));
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for e in events {
        let _ = writeln!(s, "{},{},{}", e.kind.as_str(), e.row, e.bits_touched);
    }
    s
}

/// Parses a trace produced by [`trace_to_csv`]. The header is required.
pub fn parse_trace_csv(text: &str) -> Result<Vec<CostEvent>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRACE_HEADER => {}
        _ => return Err(Error::Parse(format!("trace must start with `{TRACE_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split(',');
        let (Some(k), Some(r), Some(b), None) = (f.next(), f.next(), f.next(), f.next()) else {
            return Err(Error::Parse(format!("line {}: expected 3 fields", n + 2)));
        };
        let kind = EventKind::parse(k)?;
        let row = r
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: row: {e}", n + 2)))?;
        let bits_touched: usize = b
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: bits: {e}", n + 2)))?;
        if bits_touched == 0 {
            return Err(Error::Parse(format!("line {}: bits_touched must be >= 1", n + 2)));
        }
        out.push(CostEvent {
            kind,
            row,
            bits_touched,
        });
    }
    Ok(out)
}
