//! Deterministic transaction-level simulator of an I2C-style master/slave
//! bus with a serial Failure Emulator Mechanism (FEM) between an on-board
//! computer (master) and a Langmuir-probe payload (slave).
//!
//! Faults are described by faultload scripts ([`faultload`]), injected by
//! the [`fem`], and judged by trace oracles in the [`harness`].

pub mod bus;
pub mod cli;
pub mod devices;
pub mod faultload;
pub mod fem;
pub mod harness;
