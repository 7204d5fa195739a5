use std::fmt::Write as _;

use crate::error::{invalid_config, Result};
use crate::he::HeParams;
use crate::protocol::DbConfig;

/// Analytical machine description.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HardwareModel {
    pub l2_bytes: u64,
    /// DRAM bandwidth, bytes per second.
    pub dram_bw: f64,
    /// Peak multiply-add throughput, ops per second.
    pub peak_ops: f64,
    pub processors: usize,
    pub scratch_bytes: usize,
}

impl Default for HardwareModel {
    /// A large discrete GPU: 96 MB L2, 1.66 TB/s, 31.5 TOPS.
    fn default() -> Self {
        HardwareModel {
            l2_bytes: 96 * 1024 * 1024,
            dram_bw: 1.66e12,
            peak_ops: 31.5e12,
            processors: 170,
            scratch_bytes: 96 * 1024,
        }
    }
}

impl HardwareModel {
    pub fn validate(&self) -> Result<()> {
        if self.l2_bytes == 0
            || !self.dram_bw.is_finite()
            || self.dram_bw <= 0.0
            || !self.peak_ops.is_finite()
            || self.peak_ops <= 0.0
            || self.processors == 0
            || self.scratch_bytes == 0
        {
            return invalid_config("hardware model parameters must all be positive");
        }
        Ok(())
    }

    /// Arithmetic intensity at which compute and bandwidth balance.
    pub fn ridge_point(&self) -> f64 {
        self.peak_ops / self.dram_bw
    }
}

/// The two tree-shaped phases that decompose digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    ExpandQuery,
    ColTor,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::ExpandQuery => "ExpandQuery",
            Phase::ColTor => "ColTor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExecMode {
    /// One pass per primitive, every intermediate materialized.
    OperationLevel,
    /// One fused pass per node, intermediates kept task-local.
    StageLevel,
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::OperationLevel => "OperationLevel",
            ExecMode::StageLevel => "StageLevel",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageProfile {
    pub phase: Phase,
    pub stage: usize,
    /// Active nodes per query.
    pub nodes: usize,
    /// Digit-decomposition bytes per node.
    pub footprint: u64,
    pub batch: usize,
    pub working_set: u64,
    pub mode: ExecMode,
}

/// Per-stage mode choices for both tree phases.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub stages: Vec<StageProfile>,
    /// First ExpandQuery stage run stage-level.
    pub expand_transition: Option<usize>,
    /// First ColTor stage that drops back to operation-level.
    pub coltor_transition: Option<usize>,
}

/// Active nodes of a stage, per query.
pub fn stage_nodes(phase: Phase, stage: usize, config: &DbConfig, ell: usize) -> usize {
    match phase {
        Phase::ExpandQuery => (1usize << stage).min(config.expanded_count(ell)),
        Phase::ColTor => config.d1 >> (stage + 1),
    }
}

/// Digit-decomposition bytes of one node: `ell` polynomials for `Subs`
/// (only `a` is decomposed), `2·ell` for an external product.
pub fn node_footprint(phase: Phase, params: &HeParams) -> u64 {
    let per_poly = params.poly_bytes() as u64 * params.gadget().ell() as u64;
    match phase {
        Phase::ExpandQuery => per_poly,
        Phase::ColTor => 2 * per_poly,
    }
}

/// `nodes × footprint × batch`.
pub fn working_set_for(phase: Phase, nodes: usize, batch: usize, params: &HeParams) -> u64 {
    nodes as u64 * node_footprint(phase, params) * batch as u64
}

pub fn working_set(phase: Phase, stage: usize, batch: usize, config: &DbConfig, params: &HeParams) -> u64 {
    let nodes = stage_nodes(phase, stage, config, params.gadget().ell());
    working_set_for(phase, nodes, batch, params)
}

/// Stage-level iff the working set reaches L2 capacity.
pub fn choose_mode(working_set: u64, hw: &HardwareModel) -> ExecMode {
    if working_set >= hw.l2_bytes {
        ExecMode::StageLevel
    } else {
        ExecMode::OperationLevel
    }
}

pub fn stage_count(phase: Phase, config: &DbConfig, params: &HeParams) -> usize {
    match phase {
        Phase::ExpandQuery => config.expansion_stages(params.gadget().ell()),
        Phase::ColTor => config.col_bits(),
    }
}

pub fn build_plan(config: &DbConfig, batch: usize, params: &HeParams, hw: &HardwareModel) -> ExecutionPlan {
    let mut stages = Vec::new();
    for phase in [Phase::ExpandQuery, Phase::ColTor] {
        for stage in 0..stage_count(phase, config, params) {
            let nodes = stage_nodes(phase, stage, config, params.gadget().ell());
            let ws = working_set_for(phase, nodes, batch, params);
            stages.push(StageProfile {
                phase,
                stage,
                nodes,
                footprint: node_footprint(phase, params),
                batch,
                working_set: ws,
                mode: choose_mode(ws, hw),
            });
        }
    }
    let expand_transition = stages
        .iter()
        .find(|s| s.phase == Phase::ExpandQuery && s.mode == ExecMode::StageLevel)
        .map(|s| s.stage);
    let coltor_transition = stages
        .iter()
        .find(|s| s.phase == Phase::ColTor && s.mode == ExecMode::OperationLevel)
        .map(|s| s.stage);
    ExecutionPlan {
        stages,
        expand_transition,
        coltor_transition,
    }
}

impl ExecutionPlan {
    pub fn mode(&self, phase: Phase, stage: usize) -> Option<ExecMode> {
        self.stages
            .iter()
            .find(|s| s.phase == phase && s.stage == stage)
            .map(|s| s.mode)
    }

    pub fn profiles(&self, phase: Phase) -> impl Iterator<Item = &StageProfile> {
        self.stages.iter().filter(move |s| s.phase == phase)
    }

    /// Operation-level before stage-level along ExpandQuery, the reverse along ColTor.
    pub fn is_monotone(&self) -> bool {
        let seq = |phase| self.profiles(phase).map(|s| s.mode == ExecMode::StageLevel).collect::<Vec<_>>();
        let ex = seq(Phase::ExpandQuery);
        let ct = seq(Phase::ColTor);
        ex.windows(2).all(|w| w[0] <= w[1]) && ct.windows(2).all(|w| w[0] >= w[1])
    }

    /// One row per stage: `phase,stage,nodes,working_set_bytes,mode`.
    pub fn export(&self) -> String {
        let mut s = String::from("phase,stage,nodes,working_set_bytes,mode\n");
        for p in &self.stages {
            let _ = writeln!(s, "{},{},{},{},{}", p.phase.name(), p.stage, p.nodes, p.working_set, p.mode.name());
        }
        s
    }
}
