//! Bit-accurate simulator and analytical cost model for a digital
//! processing-in-memory accelerator built from 1T-1R SOT-MRAM cells.
//!
//! The crate is layered bottom-up:
//!
//! * [`cell`]: a single MTJ cell with logic-in-write (copy/AND/OR/XOR).
//! * [`subarray`]: an R×C grid with row reads, column-parallel conditional
//!   writes, associative search and a micro-op event log.
//! * [`arith`]: full adder, ripple addition, floating-point add/multiply and
//!   MAC executed as micro-op schedules on a subarray, plus a plain integer
//!   reference model of the same number format.
//! * [`cost`]: primitive costs, closed-form add/multiply latency and energy,
//!   the baseline (NOR-only ReRAM) MAC model and log reconciliation.
//! * [`workload`]: training MAC counts, training cost estimates and a tiny
//!   end-to-end training loop that runs every multiply/add in the simulator.
//! * [`calibration`]: the JSON configuration that ties the cost model to
//!   concrete device numbers.

pub mod arith;
pub mod calibration;
pub mod cell;
pub mod cost;
pub mod error;
pub mod subarray;
pub mod workload;

pub use error::{Error, Result};
