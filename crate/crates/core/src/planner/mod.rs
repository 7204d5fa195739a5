//! Working-set model and stage-aware execution.
//!
//! Every ExpandQuery and ColTor stage is a set of independent tree nodes,
//! each carrying a digit decomposition. The model sizes a stage's transient
//! digit set; once it reaches L2 capacity the planner switches that stage
//! from the operation-level path to the fused path.

mod exec;
mod model;
mod roofline;

pub use exec::{
    execute_stage_fused, execute_stage_oplevel, expand_batch_with, tournament_batch_with, ExecPolicy, ExpandNode,
    StageInput, StageOutput, StageStats, TournamentNode, TransientMeter,
};
pub use model::{
    build_plan, choose_mode, node_footprint, stage_count, stage_nodes, working_set, working_set_for, ExecMode,
    ExecutionPlan, HardwareModel, Phase, StageProfile,
};
pub use roofline::{
    arithmetic_intensity, phase_cost, roofline_report, rowsel_cost, Bound, PhaseCost, RooflinePhase, RooflineReport,
    RooflineRow,
};
