use std::fmt::Write as _;

use crate::he::HeParams;
use crate::protocol::{DbConfig, RgswSource};
use crate::service::wire::{ECHO_LEN, HEADER_LEN};

/// PCIe 5.0 x16, bytes per second.
pub const PCIE5_BW: f64 = 64e9;
/// NVLink 4.0, bytes per second.
pub const NVLINK4_BW: f64 = 900e9;
/// Query and slot tags carried next to every inter-worker frame.
pub const ROUTING_LEN: usize = 8;
/// Per-frame overhead beyond the ciphertext limbs.
pub const FRAME_OVERHEAD: usize = HEADER_LEN + ECHO_LEN + ROUTING_LEN;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Whole queries per worker, full DB copy each.
    NaiveBatch,
    /// Every worker expands everything; partial results meet at the coordinator.
    ShardAggregate,
    /// Expansion split across workers then all-gathered.
    ShardAllGather,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::NaiveBatch, Strategy::ShardAggregate, Strategy::ShardAllGather];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::NaiveBatch => "NaiveBatch",
            Strategy::ShardAggregate => "ShardAggregate",
            Strategy::ShardAllGather => "ShardAllGather",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(s))
    }
}

/// Inter-worker bytes by phase. Ciphertext counters hold limb data only;
/// headers, parameter echoes and routing tags go to `framing_bytes`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommLedger {
    pub strategy: Strategy,
    pub n_workers: usize,
    /// Link bandwidth used for modeled times, bytes per second.
    pub link_bw: f64,
    /// Expanded row ciphertexts gathered after ExpandQuery.
    pub after_expand_bytes: u64,
    /// Expanded column-bit ciphertexts gathered alongside them.
    pub selector_bytes: u64,
    /// Partial tournament results sent to the coordinator.
    pub after_coltor_bytes: u64,
    pub framing_bytes: u64,
    pub messages: u64,
}

impl CommLedger {
    pub fn empty(strategy: Strategy, n_workers: usize, link_bw: f64) -> Self {
        CommLedger {
            strategy,
            n_workers,
            link_bw,
            after_expand_bytes: 0,
            selector_bytes: 0,
            after_coltor_bytes: 0,
            framing_bytes: 0,
            messages: 0,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.after_expand_bytes + self.selector_bytes + self.after_coltor_bytes + self.framing_bytes
    }

    pub fn modeled_seconds(&self, bytes: u64) -> f64 {
        bytes as f64 / self.link_bw
    }

    pub fn with_link_bw(mut self, link_bw: f64) -> Self {
        self.link_bw = link_bw;
        self
    }

    /// `strategy,n_workers,phase,bytes,modeled_seconds` rows.
    pub fn export(&self) -> String {
        let mut s = String::from("strategy,n_workers,phase,bytes,modeled_seconds\n");
        for (phase, bytes) in [
            ("after_expand", self.after_expand_bytes),
            ("selector", self.selector_bytes),
            ("after_coltor", self.after_coltor_bytes),
            ("framing", self.framing_bytes),
            ("total", self.total_bytes()),
        ] {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.9}",
                self.strategy.name(),
                self.n_workers,
                phase,
                bytes,
                self.modeled_seconds(bytes)
            );
        }
        s
    }
}

/// Closed-form ledger. A single worker never communicates. With more:
/// all-gather moves `batch·D0` row ciphertexts (plus `batch·log2(D1)·ell`
/// column ciphertexts in onion mode), and both sharded strategies send
/// `batch·n` partial ciphertexts to the coordinator.
pub fn comm_bytes(
    strategy: Strategy,
    config: &DbConfig,
    batch: usize,
    n_workers: usize,
    params: &HeParams,
    source: RgswSource,
) -> CommLedger {
    let mut l = CommLedger::empty(strategy, n_workers, PCIE5_BW);
    if n_workers <= 1 || batch == 0 || strategy == Strategy::NaiveBatch {
        return l;
    }
    let ct = params.ct_bytes() as u64;
    let b = batch as u64;
    let mut msgs = 0u64;
    if strategy == Strategy::ShardAllGather {
        let rows = b * config.d0 as u64;
        l.after_expand_bytes = rows * ct;
        msgs += rows;
        if source == RgswSource::Onion {
            let cols = b * (config.col_bits() * params.gadget().ell()) as u64;
            l.selector_bytes = cols * ct;
            msgs += cols;
        }
    }
    let partials = b * n_workers as u64;
    l.after_coltor_bytes = partials * ct;
    msgs += partials;
    l.messages = msgs;
    l.framing_bytes = msgs * FRAME_OVERHEAD as u64;
    l
}
