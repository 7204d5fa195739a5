use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Instant;

use super::gemm::{check_shapes, gemm_point_transposed, point_modulus, TileConfig, DEFAULT_SCRATCH_BUDGET};
use super::tensor::{transpose_ct_tensor, Layout, Tensor3};
use crate::error::{invalid_arg, invalid_config, Result};
use crate::ring::RnsBasis;

/// Shape of the chunked RowSel pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PipelineConfig {
    /// Independent task lanes; limb `l` runs on lane `l % lanes`.
    pub lanes: usize,
    /// Chunks per limb along the coefficient axis.
    pub n_chunks: usize,
    pub workers: usize,
    pub tile: TileConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lanes: 4,
            n_chunks: 8,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            tile: TileConfig::transposed_default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    TransposeIn,
    Gemm,
    TransposeOut,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::TransposeIn => "transpose_in",
            TaskKind::Gemm => "gemm",
            TaskKind::TransposeOut => "transpose_out",
        }
    }

    fn next(self) -> Option<TaskKind> {
        match self {
            TaskKind::TransposeIn => Some(TaskKind::Gemm),
            TaskKind::Gemm => Some(TaskKind::TransposeOut),
            TaskKind::TransposeOut => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskRecord {
    pub kind: TaskKind,
    pub lane: usize,
    /// Chunk id, unique within its lane.
    pub chunk: usize,
    pub start_ns: u64,
    pub end_ns: u64,
}

/// Executed tasks with monotonic timestamps relative to pipeline start.
#[derive(Clone, Debug, Default)]
pub struct PipelineTrace {
    pub records: Vec<TaskRecord>,
}

impl PipelineTrace {
    /// One task per line: `kind=.. lane=.. chunk=.. start_ns=.. end_ns=..`.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let _ = writeln!(
                s,
                "kind={} lane={} chunk={} start_ns={} end_ns={}",
                r.kind.name(),
                r.lane,
                r.chunk,
                r.start_ns,
                r.end_ns
            );
        }
        s
    }

    /// Whether any transpose task's interval intersects any gemm task's.
    pub fn has_transpose_gemm_overlap(&self) -> bool {
        let gemms: Vec<_> = self.records.iter().filter(|r| r.kind == TaskKind::Gemm).collect();
        self.records.iter().filter(|r| r.kind != TaskKind::Gemm).any(|t| {
            gemms
                .iter()
                .any(|g| t.start_ns < g.end_ns && g.start_ns < t.end_ns)
        })
    }

    /// Checks `transpose_in -> gemm -> transpose_out` ordering within every
    /// (lane, chunk).
    pub fn dependencies_respected(&self) -> bool {
        let find = |lane, chunk, kind| {
            self.records
                .iter()
                .find(|r| r.lane == lane && r.chunk == chunk && r.kind == kind)
        };
        self.records.iter().filter(|r| r.kind == TaskKind::Gemm).all(|g| {
            match (
                find(g.lane, g.chunk, TaskKind::TransposeIn),
                find(g.lane, g.chunk, TaskKind::TransposeOut),
            ) {
                (Some(ti), Some(to)) => ti.end_ns <= g.start_ns && g.end_ns <= to.start_ns,
                _ => false,
            }
        })
    }

    /// True when no two task intervals intersect.
    pub fn is_serial(&self) -> bool {
        let mut rs = self.records.clone();
        rs.sort_by_key(|r| r.start_ns);
        rs.windows(2).all(|w| w[0].end_ns <= w[1].start_ns)
    }
}

struct Chain {
    limb: usize,
    chunk: usize,
    lane: usize,
    lane_chunk: usize,
    a_local: Mutex<Vec<u32>>,
    out_local: Mutex<Vec<u32>>,
}

// ready-queue key: earlier chunk first, then earlier stage, then limb
type Ready = Reverse<(usize, TaskKind, usize)>;

struct Queue {
    ready: BinaryHeap<Ready>,
    remaining: usize,
}

/// RowSel as `(limb, chunk)` task chains `transpose_in -> gemm -> transpose_out`
/// executed by a worker pool. `a` is the p-major query tensor `(P, M, K)`;
/// `db` is `(P, K, N)` in either layout (transposed once up front if needed).
/// Output is p-major and bit-identical to the serial engines.
pub fn pipeline_rowsel(
    a: &Tensor3,
    db: &Tensor3,
    basis: &RnsBasis,
    cfg: &PipelineConfig,
) -> Result<(Tensor3, PipelineTrace)> {
    let [np, m, n, k] = check_shapes(a, db, basis)?;
    if a.layout() != Layout::PMajor {
        return invalid_arg("pipeline_rowsel expects a p-major query tensor");
    }
    let degree = basis.degree();
    if cfg.n_chunks == 0 || !degree.is_multiple_of(cfg.n_chunks) {
        return invalid_config(format!("{} chunks do not divide N = {degree}", cfg.n_chunks));
    }
    if cfg.lanes == 0 || cfg.workers == 0 {
        return invalid_config("pipeline needs at least one lane and one worker");
    }
    let tile = TileConfig { bp: None, ..cfg.tile.clamp_to(np, m, n, k) };
    tile.validate(np, m, n, k, DEFAULT_SCRATCH_BUDGET)?;

    let db_t;
    let db = if db.layout() == Layout::Transposed {
        db
    } else {
        db_t = transpose_ct_tensor(db, Layout::Transposed);
        &db_t
    };

    let width = degree / cfg.n_chunks;
    let chains: Vec<Chain> = (0..basis.len())
        .flat_map(|limb| (0..cfg.n_chunks).map(move |chunk| (limb, chunk)))
        .map(|(limb, chunk)| Chain {
            limb,
            chunk,
            lane: limb % cfg.lanes,
            lane_chunk: (limb / cfg.lanes) * cfg.n_chunks + chunk,
            a_local: Mutex::new(Vec::new()),
            out_local: Mutex::new(Vec::new()),
        })
        .collect();

    let out: Vec<AtomicU32> = (0..np * m * n).map(|_| AtomicU32::new(0)).collect();
    let queue = Mutex::new(Queue {
        ready: chains
            .iter()
            .enumerate()
            .map(|(id, c)| Reverse((c.chunk, TaskKind::TransposeIn, id)))
            .collect(),
        remaining: chains.len() * 3,
    });
    let wake = Condvar::new();
    let records = Mutex::new(Vec::with_capacity(chains.len() * 3));
    let t0 = Instant::now();

    let run_task = |kind: TaskKind, c: &Chain| {
        let p0 = c.limb * degree + c.chunk * width;
        match kind {
            TaskKind::TransposeIn => {
                // [m][k][p] -> local [p][k][m]
                let src = a.data();
                let mut local = vec![0u32; width * k * m];
                for mi in 0..m {
                    for ki in 0..k {
                        let fiber = &src[(mi * k + ki) * np + p0..(mi * k + ki) * np + p0 + width];
                        for (pl, &v) in fiber.iter().enumerate() {
                            local[(pl * k + ki) * m + mi] = v;
                        }
                    }
                }
                *c.a_local.lock().unwrap() = local;
            }
            TaskKind::Gemm => {
                let local_a = std::mem::take(&mut *c.a_local.lock().unwrap());
                let dbd = db.data();
                let mut local_out = vec![0u32; width * n * m];
                let q = point_modulus(basis, p0);
                for pl in 0..width {
                    let p = p0 + pl;
                    gemm_point_transposed(
                        &local_a[pl * k * m..(pl + 1) * k * m],
                        &dbd[p * n * k..(p + 1) * n * k],
                        &mut local_out[pl * n * m..(pl + 1) * n * m],
                        m,
                        n,
                        k,
                        q,
                        &tile,
                    );
                }
                *c.out_local.lock().unwrap() = local_out;
            }
            TaskKind::TransposeOut => {
                // local [p][n][m] -> output [m][n][p]
                let local = std::mem::take(&mut *c.out_local.lock().unwrap());
                for pl in 0..width {
                    for ni in 0..n {
                        for mi in 0..m {
                            let v = local[(pl * n + ni) * m + mi];
                            out[(mi * n + ni) * np + p0 + pl].store(v, Ordering::Relaxed);
                        }
                    }
                }
            }
        }
    };

    std::thread::scope(|scope| {
        for _ in 0..cfg.workers {
            scope.spawn(|| loop {
                let task = {
                    let mut q = queue.lock().unwrap();
                    loop {
                        if let Some(Reverse(t)) = q.ready.pop() {
                            break Some(t);
                        }
                        if q.remaining == 0 {
                            break None;
                        }
                        q = wake.wait(q).unwrap();
                    }
                };
                let Some((_, kind, id)) = task else {
                    wake.notify_all();
                    return;
                };
                let chain = &chains[id];
                let start = t0.elapsed().as_nanos() as u64;
                run_task(kind, chain);
                let end = t0.elapsed().as_nanos() as u64;
                records.lock().unwrap().push(TaskRecord {
                    kind,
                    lane: chain.lane,
                    chunk: chain.lane_chunk,
                    start_ns: start,
                    end_ns: end,
                });
                let mut q = queue.lock().unwrap();
                q.remaining -= 1;
                if let Some(next) = kind.next() {
                    q.ready.push(Reverse((chain.chunk, next, id)));
                }
                drop(q);
                wake.notify_all();
            });
        }
    });

    let data = out.into_iter().map(AtomicU32::into_inner).collect();
    let mut records = records.into_inner().unwrap();
    records.sort_by_key(|r| (r.start_ns, r.lane, r.chunk));
    Ok((Tensor3::from_data([np, m, n], Layout::PMajor, data)?, PipelineTrace { records }))
}
