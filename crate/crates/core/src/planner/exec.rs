use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;

use super::model::{ExecMode, ExecutionPlan, Phase};
use crate::error::{invalid_arg, Result};
use crate::he::{apply_ntt_permutation, ntt_permutation, BfvCiphertext, DigitStream, HeParams, RgswCiphertext};
use crate::protocol::{emits_odd, scatter_stage, ClientQuery, DbConfig, ExpandedQuery, PublicKeys, StageKeys};
use crate::ring::{Domain, RnsPoly};

/// Counts bytes of live digit-decomposition intermediates.
#[derive(Debug, Default)]
pub struct TransientMeter {
    current: AtomicUsize,
    peak: AtomicUsize,
    cumulative: AtomicU64,
}

impl TransientMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&self, bytes: usize) {
        let now = self.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(now, Ordering::SeqCst);
        self.cumulative.fetch_add(bytes as u64, Ordering::SeqCst);
    }

    pub fn free(&self, bytes: usize) {
        self.current.fetch_sub(bytes, Ordering::SeqCst);
    }

    pub fn current(&self) -> usize {
        self.current.load(Ordering::SeqCst)
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    /// Total bytes ever allocated, a proxy for off-chip traffic.
    pub fn cumulative(&self) -> u64 {
        self.cumulative.load(Ordering::SeqCst)
    }
}

/// One Subs node: its ciphertext, stage constants, and whether the odd
/// child is needed.
pub struct ExpandNode<'a> {
    pub ct: &'a BfvCiphertext,
    pub keys: &'a StageKeys<'a>,
    pub odd: bool,
}

/// One tournament node.
pub struct TournamentNode<'a> {
    pub even: &'a BfvCiphertext,
    pub odd: &'a BfvCiphertext,
    pub rgsw: &'a RgswCiphertext,
}

pub enum StageInput<'a> {
    Expand(Vec<ExpandNode<'a>>),
    Tournament(Vec<TournamentNode<'a>>),
}

impl StageInput<'_> {
    pub fn phase(&self) -> Phase {
        match self {
            StageInput::Expand(_) => Phase::ExpandQuery,
            StageInput::Tournament(_) => Phase::ColTor,
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            StageInput::Expand(n) => n.len(),
            StageInput::Tournament(n) => n.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StageOutput {
    /// Per node: the even child and, when requested, the odd child.
    Expand(Vec<(BfvCiphertext, Option<BfvCiphertext>)>),
    Tournament(Vec<BfvCiphertext>),
}

/// A polynomial to decompose and the gadget rows it multiplies.
struct Job<'a> {
    x: RnsPoly,
    rows: &'a [BfvCiphertext],
}

fn coeff_bytes(params: &HeParams) -> usize {
    DigitStream::buffer_bytes(params.degree())
}

/// Digit-decomposes every job in separate passes, materializing each
/// intermediate for all jobs before the next primitive starts.
fn key_switch_oplevel(jobs: Vec<Job<'_>>, params: &HeParams, meter: &TransientMeter) -> Result<Vec<BfvCiphertext>> {
    let basis = params.basis();
    let g = *params.gadget();
    let pb = params.poly_bytes();
    let cb = coeff_bytes(params);

    let coeffs = jobs
        .par_iter()
        .map(|j| {
            meter.alloc(pb);
            j.x.ntt_inverse()
        })
        .collect::<Result<Vec<_>>>()?;
    let streams: Vec<DigitStream> = coeffs
        .par_iter()
        .map(|c| {
            meter.alloc(cb);
            DigitStream::new(c, g)
        })
        .collect();
    drop(coeffs);
    meter.free(pb * jobs.len());
    let mut digits: Vec<Vec<RnsPoly>> = streams
        .into_par_iter()
        .map(|mut s| {
            (0..g.ell())
                .map(|_| {
                    meter.alloc(pb);
                    let mut d = RnsPoly::zero(basis, Domain::Coefficient);
                    s.next_into(basis, d.data_mut());
                    d
                })
                .collect()
        })
        .collect();
    meter.free(cb * jobs.len());
    digits
        .par_iter_mut()
        .flat_map(|ds| ds.par_iter_mut())
        .try_for_each(|d| d.ntt_forward_inplace())?;
    let out = jobs
        .par_iter()
        .zip(digits.par_iter())
        .map(|(j, ds)| {
            let mut a = RnsPoly::zero(basis, Domain::Ntt);
            let mut b = RnsPoly::zero(basis, Domain::Ntt);
            for (d, row) in ds.iter().zip(j.rows) {
                a.mul_acc_unchecked(d, row.a());
                b.mul_acc_unchecked(d, row.b());
            }
            BfvCiphertext::from_parts_unchecked(a, b)
        })
        .collect();
    drop(digits);
    meter.free(pb * g.ell() * jobs.len());
    Ok(out)
}

/// Processes each job end to end, one digit at a time.
fn key_switch_fused(jobs: Vec<Job<'_>>, params: &HeParams, meter: &TransientMeter) -> Result<Vec<BfvCiphertext>> {
    let basis = params.basis();
    let g = *params.gadget();
    let pb = params.poly_bytes();
    let cb = coeff_bytes(params);
    jobs.into_par_iter()
        .map(|j| {
            meter.alloc(pb);
            let coeff = j.x.ntt_inverse()?;
            meter.alloc(cb);
            let mut stream = DigitStream::new(&coeff, g);
            drop(coeff);
            meter.free(pb);
            let mut a = RnsPoly::zero(basis, Domain::Ntt);
            let mut b = RnsPoly::zero(basis, Domain::Ntt);
            for row in j.rows.iter().take(g.ell()) {
                meter.alloc(pb);
                let mut d = RnsPoly::zero(basis, Domain::Coefficient);
                stream.next_into(basis, d.data_mut());
                d.ntt_forward_inplace()?;
                a.mul_acc_unchecked(&d, row.a());
                b.mul_acc_unchecked(&d, row.b());
                drop(d);
                meter.free(pb);
            }
            drop(stream);
            meter.free(cb);
            Ok(BfvCiphertext::from_parts_unchecked(a, b))
        })
        .collect()
}

fn execute_stage(input: StageInput<'_>, params: &HeParams, meter: &TransientMeter, mode: ExecMode) -> Result<StageOutput> {
    let ell = params.gadget().ell();
    let switch = |jobs: Vec<Job<'_>>| match mode {
        ExecMode::OperationLevel => key_switch_oplevel(jobs, params, meter),
        ExecMode::StageLevel => key_switch_fused(jobs, params, meter),
    };
    match input {
        StageInput::Expand(nodes) => {
            let n = params.degree();
            let mut sbs = Vec::with_capacity(nodes.len());
            let mut jobs = Vec::with_capacity(nodes.len());
            for node in &nodes {
                if node.keys.evk.rows().len() != ell {
                    return invalid_arg("evaluation key row count does not match the gadget");
                }
                let perm = ntt_permutation(n, node.keys.evk.index())?;
                jobs.push(Job {
                    x: apply_ntt_permutation(node.ct.a(), &perm),
                    rows: node.keys.evk.rows(),
                });
                sbs.push(apply_ntt_permutation(node.ct.b(), &perm));
            }
            let switched = switch(jobs)?;
            let pairs = nodes
                .par_iter()
                .zip(switched.into_par_iter().zip(sbs.into_par_iter()))
                .map(|(node, (mut s, sb))| {
                    s.b_mut().add_assign_unchecked(&sb);
                    node.keys.combine(node.ct, &s, node.odd)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StageOutput::Expand(pairs))
        }
        StageInput::Tournament(nodes) => {
            let mut diffs = Vec::with_capacity(nodes.len());
            let mut jobs = Vec::with_capacity(2 * nodes.len());
            for node in &nodes {
                if node.rgsw.ell() != ell {
                    return invalid_arg("RGSW row count does not match the gadget");
                }
                let d = node.odd.sub(node.even)?;
                diffs.push(d);
            }
            for (node, d) in nodes.iter().zip(&diffs) {
                jobs.push(Job {
                    x: d.a().clone(),
                    rows: node.rgsw.a_rows(),
                });
                jobs.push(Job {
                    x: d.b().clone(),
                    rows: node.rgsw.b_rows(),
                });
            }
            drop(diffs);
            let switched = switch(jobs)?;
            let out = nodes
                .par_iter()
                .zip(switched.par_chunks(2))
                .map(|(node, pair)| {
                    let mut ct = node.even.clone();
                    ct.add_assign_unchecked(&pair[0]);
                    ct.add_assign_unchecked(&pair[1]);
                    ct
                })
                .collect();
            Ok(StageOutput::Tournament(out))
        }
    }
}

/// Operation-level path: each primitive runs over every node before the next.
pub fn execute_stage_oplevel(input: StageInput<'_>, params: &HeParams, meter: &TransientMeter) -> Result<StageOutput> {
    execute_stage(input, params, meter, ExecMode::OperationLevel)
}

/// Stage-level path: each node runs end to end with task-local intermediates.
pub fn execute_stage_fused(input: StageInput<'_>, params: &HeParams, meter: &TransientMeter) -> Result<StageOutput> {
    execute_stage(input, params, meter, ExecMode::StageLevel)
}

/// How to pick a path for each stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecPolicy {
    AllOperationLevel,
    AllStageLevel,
    Hybrid(ExecutionPlan),
}

impl ExecPolicy {
    pub fn mode(&self, phase: Phase, stage: usize) -> ExecMode {
        match self {
            ExecPolicy::AllOperationLevel => ExecMode::OperationLevel,
            ExecPolicy::AllStageLevel => ExecMode::StageLevel,
            ExecPolicy::Hybrid(plan) => plan.mode(phase, stage).unwrap_or(ExecMode::StageLevel),
        }
    }
}

/// Measured behavior of one executed stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageStats {
    pub phase: Phase,
    pub stage: usize,
    /// Nodes across the whole batch.
    pub nodes: usize,
    pub mode: ExecMode,
    pub peak_transient_bytes: usize,
    pub cumulative_transient_bytes: u64,
    pub elapsed_ns: u64,
}

fn run_stage(
    input: StageInput<'_>,
    stage: usize,
    policy: &ExecPolicy,
    params: &HeParams,
    stats: &mut Vec<StageStats>,
) -> Result<StageOutput> {
    let phase = input.phase();
    let nodes = input.nodes();
    let mode = policy.mode(phase, stage);
    let meter = TransientMeter::new();
    let t0 = std::time::Instant::now();
    let out = execute_stage(input, params, &meter, mode)?;
    stats.push(StageStats {
        phase,
        stage,
        nodes,
        mode,
        peak_transient_bytes: meter.peak(),
        cumulative_transient_bytes: meter.cumulative(),
        elapsed_ns: t0.elapsed().as_nanos() as u64,
    });
    Ok(out)
}

/// Expands a batch of queries with every stage run over all queries' nodes
/// at once, using the path the policy picks for that stage.
pub fn expand_batch_with(
    queries: &[(&ClientQuery, &PublicKeys)],
    config: &DbConfig,
    params: &HeParams,
    policy: &ExecPolicy,
    stats: &mut Vec<StageStats>,
) -> Result<Vec<ExpandedQuery>> {
    config.validate_for(params)?;
    let ell = params.gadget().ell();
    let total = config.expanded_count(ell);
    let stages = config.expansion_stages(ell);
    let mut levels: Vec<Vec<BfvCiphertext>> = queries.iter().map(|(q, _)| vec![q.ct.clone()]).collect();
    for t in 0..stages {
        let keys = queries
            .iter()
            .map(|(_, k)| StageKeys::new(t, k, params))
            .collect::<Result<Vec<_>>>()?;
        let mut input = Vec::new();
        for (level, sk) in levels.iter().zip(&keys) {
            for (j, ct) in level.iter().enumerate() {
                input.push(ExpandNode {
                    ct,
                    keys: sk,
                    odd: emits_odd(j, t, total),
                });
            }
        }
        let StageOutput::Expand(mut pairs) = run_stage(StageInput::Expand(input), t, policy, params, stats)? else {
            unreachable!("expansion stage yields expansion output");
        };
        let mut next = Vec::with_capacity(levels.len());
        for level in &levels {
            let rest = pairs.split_off(level.len());
            next.push(scatter_stage(std::mem::replace(&mut pairs, rest), t));
        }
        levels = next;
    }
    levels
        .into_iter()
        .map(|cts| ExpandedQuery::from_flat(cts, config))
        .collect()
}

/// Runs the column tournaments of a batch stage by stage. `rgsws[q]` holds
/// the RGSW ciphertexts for query `q`, LSB first; `stage_offset` numbers the
/// stages for the policy when the tournament resumes mid-tree.
pub fn tournament_batch_with(
    cts: Vec<Vec<BfvCiphertext>>,
    rgsws: &[&[RgswCiphertext]],
    stage_offset: usize,
    params: &HeParams,
    policy: &ExecPolicy,
    stats: &mut Vec<StageStats>,
) -> Result<Vec<BfvCiphertext>> {
    if cts.len() != rgsws.len() {
        return invalid_arg("one RGSW list per query is required");
    }
    let width = cts.first().map(|c| c.len()).unwrap_or(1);
    if cts.iter().any(|c| c.len() != width) || !width.is_power_of_two() {
        return invalid_arg("every query needs the same power-of-two ciphertext count");
    }
    let depth = width.trailing_zeros() as usize;
    if rgsws.iter().any(|r| r.len() != depth) {
        return invalid_arg(format!("tournament of depth {depth} needs {depth} RGSW ciphertexts per query"));
    }
    let mut levels = cts;
    for j in 0..depth {
        let mut input = Vec::new();
        for (level, rs) in levels.iter().zip(rgsws) {
            for pair in level.chunks(2) {
                input.push(TournamentNode {
                    even: &pair[0],
                    odd: &pair[1],
                    rgsw: &rs[j],
                });
            }
        }
        let StageOutput::Tournament(mut flat) =
            run_stage(StageInput::Tournament(input), stage_offset + j, policy, params, stats)?
        else {
            unreachable!("tournament stage yields tournament output");
        };
        let per = levels[0].len() / 2;
        let mut next = Vec::with_capacity(levels.len());
        for _ in 0..levels.len() {
            let rest = flat.split_off(per);
            next.push(std::mem::replace(&mut flat, rest));
        }
        levels = next;
    }
    Ok(levels.into_iter().map(|mut l| l.pop().expect("one ciphertext per query")).collect())
}
