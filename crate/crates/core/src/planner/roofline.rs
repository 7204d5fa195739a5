use std::fmt::Write as _;

use super::model::{stage_count, stage_nodes, HardwareModel, Phase};
use crate::he::HeParams;
use crate::protocol::DbConfig;

/// Which phase a roofline row describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RooflinePhase {
    ExpandQuery,
    RowSel,
    ColTor,
}

impl RooflinePhase {
    pub fn name(self) -> &'static str {
        match self {
            RooflinePhase::ExpandQuery => "ExpandQuery",
            RooflinePhase::RowSel => "RowSel",
            RooflinePhase::ColTor => "ColTor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseCost {
    pub ops: f64,
    pub bytes: f64,
}

impl PhaseCost {
    pub fn intensity(&self) -> f64 {
        self.ops / self.bytes
    }
}

/// RowSel: `k·N · 2·batch · D0 · D1` multiply-adds against the encoded DB
/// plus the input row ciphertexts and output column ciphertexts.
pub fn rowsel_cost(config: &DbConfig, batch: usize, params: &HeParams) -> PhaseCost {
    let points = (params.limb_count() * params.degree()) as f64;
    let ops = points * 2.0 * batch as f64 * config.d0 as f64 * config.d1 as f64;
    let db = (config.records() * params.poly_bytes()) as f64;
    let ct = params.ct_bytes() as f64;
    let inputs = batch as f64 * config.d0 as f64 * ct;
    let outputs = batch as f64 * config.d1 as f64 * ct;
    PhaseCost {
        ops,
        bytes: db + inputs + outputs,
    }
}

/// Tree phases: per node, `ell` (or `2·ell`) digit polynomials each meet a
/// key row of two polynomials; bytes are the digit polynomials written and
/// read back plus the key rows and node inputs and outputs.
fn tree_cost(phase: Phase, config: &DbConfig, batch: usize, params: &HeParams) -> PhaseCost {
    let ell = params.gadget().ell() as f64;
    let pts = (params.limb_count() * params.degree()) as f64;
    let poly = params.poly_bytes() as f64;
    let dcp = match phase {
        Phase::ExpandQuery => 1.0,
        Phase::ColTor => 2.0,
    };
    let mut ops = 0.0;
    let mut bytes = 0.0;
    for stage in 0..stage_count(phase, config, params) {
        let nodes = stage_nodes(phase, stage, config, params.gadget().ell()) as f64 * batch as f64;
        ops += nodes * dcp * ell * 2.0 * pts;
        // digits written then read; key rows read once per stage; node in/out
        bytes += nodes * dcp * ell * poly * 2.0 + dcp * ell * 2.0 * poly + nodes * 4.0 * poly;
    }
    PhaseCost { ops, bytes }
}

pub fn phase_cost(phase: RooflinePhase, config: &DbConfig, batch: usize, params: &HeParams) -> PhaseCost {
    match phase {
        RooflinePhase::RowSel => rowsel_cost(config, batch, params),
        RooflinePhase::ExpandQuery => tree_cost(Phase::ExpandQuery, config, batch, params),
        RooflinePhase::ColTor => tree_cost(Phase::ColTor, config, batch, params),
    }
}

pub fn arithmetic_intensity(phase: RooflinePhase, config: &DbConfig, batch: usize, params: &HeParams) -> f64 {
    phase_cost(phase, config, batch, params).intensity()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Memory,
    Compute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RooflineRow {
    pub phase: RooflinePhase,
    pub ops: f64,
    pub bytes: f64,
    pub ai: f64,
    pub bound: Bound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RooflineReport {
    pub ridge_point: f64,
    pub rows: Vec<RooflineRow>,
}

impl RooflineReport {
    /// `phase,ops,bytes,ai,bound` rows.
    pub fn export(&self) -> String {
        let mut s = format!("# ridge_point={:.3}\nphase,ops,bytes,ai,bound\n", self.ridge_point);
        for r in &self.rows {
            let bound = match r.bound {
                Bound::Memory => "memory",
                Bound::Compute => "compute",
            };
            let _ = writeln!(s, "{},{:.0},{:.0},{:.4},{}", r.phase.name(), r.ops, r.bytes, r.ai, bound);
        }
        s
    }
}

pub fn roofline_report(hw: &HardwareModel, config: &DbConfig, batch: usize, params: &HeParams) -> RooflineReport {
    let ridge = hw.ridge_point();
    let rows = [RooflinePhase::ExpandQuery, RooflinePhase::RowSel, RooflinePhase::ColTor]
        .into_iter()
        .map(|phase| {
            let c = phase_cost(phase, config, batch, params);
            let ai = c.intensity();
            RooflineRow {
                phase,
                ops: c.ops,
                bytes: c.bytes,
                ai,
                bound: if ai < ridge { Bound::Memory } else { Bound::Compute },
            }
        })
        .collect();
    RooflineReport { ridge_point: ridge, rows }
}
