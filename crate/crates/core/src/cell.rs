//! Single 1T-1R SOT-MRAM cell.
//!
//! A cell stores one bit as the MTJ resistance. Reads are non-destructive.
//! A write drives the read bit-line with the applied bit `A` (either `V_b`
//! or 0 V) and pushes current in direction `C` through the SOT channel; the
//! combination decides whether the MTJ may switch, which turns the write
//! itself into a two-input logic gate between `A` and the stored bit.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CellState {
    /// Logic 1.
    High,
    /// Logic 0.
    #[default]
    Low,
}

impl CellState {
    #[inline]
    pub fn encode(bit: bool) -> Self {
        if bit {
            CellState::High
        } else {
            CellState::Low
        }
    }

    #[inline]
    pub fn decode(self) -> bool {
        self == CellState::High
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicKind {
    Copy,
    And,
    Or,
    Xor,
}

impl LogicKind {
    pub const ALL: [LogicKind; 4] = [LogicKind::Copy, LogicKind::And, LogicKind::Or, LogicKind::Xor];

    #[inline]
    pub fn eval(self, applied: bool, stored: bool) -> bool {
        match self {
            LogicKind::Copy => applied,
            LogicKind::And => applied & stored,
            LogicKind::Or => applied | stored,
            LogicKind::Xor => applied ^ stored,
        }
    }
}

/// Electrical configuration of one conditional write.
///
/// `direction` records the write-current direction the peripheral selects
/// for the requested function. Threshold physics is not simulated, so the
/// post-write state depends only on `kind`, `applied` and the stored bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WriteConfig {
    pub applied: bool,
    pub direction: bool,
    pub kind: LogicKind,
}

impl WriteConfig {
    pub fn new(kind: LogicKind, applied: bool) -> Self {
        // SL->WBL (C=1) pulls toward High, WBL->SL (C=0) toward Low.
        let direction = match kind {
            LogicKind::Copy => applied,
            LogicKind::And => false,
            LogicKind::Or | LogicKind::Xor => true,
        };
        WriteConfig {
            applied,
            direction,
            kind,
        }
    }

    pub fn copy(bit: bool) -> Self {
        Self::new(LogicKind::Copy, bit)
    }

    pub fn and(bit: bool) -> Self {
        Self::new(LogicKind::And, bit)
    }

    pub fn or(bit: bool) -> Self {
        Self::new(LogicKind::Or, bit)
    }

    pub fn xor(bit: bool) -> Self {
        Self::new(LogicKind::Xor, bit)
    }
}

#[inline]
pub fn read_cell(cell: CellState) -> bool {
    cell.decode()
}

#[inline]
pub fn apply_write(cell: CellState, cfg: WriteConfig) -> CellState {
    CellState::encode(cfg.kind.eval(cfg.applied, cell.decode()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn read_encoding() {
        assert!(read_cell(CellState::High));
        assert!(!read_cell(CellState::Low));
        let c = CellState::High;
        assert_eq!(read_cell(c), read_cell(c));
        assert_eq!(c, CellState::High);
    }

    #[test]
    fn encode_decode_roundtrip() {
        for b in [false, true] {
            assert_eq!(CellState::encode(b).decode(), b);
        }
    }

    #[test]
    fn documented_examples() {
        let lo = CellState::Low;
        let hi = CellState::High;
        assert_eq!(apply_write(lo, WriteConfig::or(true)), hi);
        assert_eq!(apply_write(hi, WriteConfig::and(false)), lo);
        assert_eq!(apply_write(hi, WriteConfig::xor(true)), lo);
        assert_eq!(apply_write(lo, WriteConfig::copy(true)), hi);
    }

    #[test]
    fn exhaustive_truth_table() {
        for kind in LogicKind::ALL {
            for a in [false, true] {
                for b in [false, true] {
                    let expect = match kind {
                        LogicKind::Copy => a,
                        LogicKind::And => a && b,
                        LogicKind::Or => a || b,
                        LogicKind::Xor => a != b,
                    };
                    let got = apply_write(CellState::encode(b), WriteConfig::new(kind, a));
                    assert_eq!(got.decode(), expect, "{kind:?} A={a} B={b}");
                }
            }
        }
    }

    #[test]
    fn copy_idempotent_and_identities() {
        for b in [false, true] {
            let s = CellState::encode(b);
            for a in [false, true] {
                let once = apply_write(s, WriteConfig::copy(a));
                assert_eq!(apply_write(once, WriteConfig::copy(a)), once);
            }
            assert_eq!(apply_write(s, WriteConfig::or(false)), s);
            assert_eq!(apply_write(s, WriteConfig::and(true)), s);
        }
    }
}
