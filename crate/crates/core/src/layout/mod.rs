//! RowSel tensor layouts and the GEMM engines that consume them.
//!
//! RowSel is `4N` independent modular GEMMs, one per polynomial point `p`.
//! Points are numbered limb-major (`p = limb·N + coeff`), so a point's
//! modulus is `q_{p / N}`.

mod gemm;
mod pipeline;
mod tensor;

pub use gemm::{
    gemm_naive, gemm_pmajor_tiled, gemm_pmajor_tiled_with_budget, gemm_transposed_tiled,
    gemm_transposed_tiled_with_budget, scratch_footprint, traffic_ratio, ResourceRatios, TileConfig,
    DEFAULT_SCRATCH_BUDGET,
};
pub use pipeline::{pipeline_rowsel, PipelineConfig, PipelineTrace, TaskKind, TaskRecord};
pub use tensor::{transpose_ct_tensor, Layout, Tensor3};
