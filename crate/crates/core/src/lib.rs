//! Core analysis library for auditing upgrades of proxy-based smart contracts.
//!
//! The library compares two versions of a contract by differencing their
//! abstract syntax trees, runs pattern-based vulnerability detectors over each
//! version, attributes findings to specific code changes through a weighted
//! multi-dimensional confidence score, and classifies the security effect of
//! the upgrade.
//!
//! Everything in this crate is pure computation over in-memory values: no IO,
//! no clocks, no network. The crate is `no_std`-compatible (with `alloc`); the
//! companion `upgradescan` crate layers the CLI, source fetching, caching and
//! report files on top.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod ast;
pub mod attrib;
pub mod classify;
pub mod detect;
pub mod diff;
pub mod matching;
pub mod trace;
