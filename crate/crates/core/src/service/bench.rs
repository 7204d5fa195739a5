use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, RngCore};

use super::config::ServerConfig;
use crate::cluster::{comm_bytes, CommLedger};
use crate::error::{invalid_arg, Result};
use crate::he::HeParams;
use crate::planner::{build_plan, ExecMode, ExecutionPlan, Phase};
use crate::protocol::{
    client_decode_response, client_gen_query, respond_batch, BatchItem, ClientKeys, EncodedDatabase,
};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchStageRow {
    pub phase: Phase,
    pub stage: usize,
    /// Active nodes per query.
    pub nodes: usize,
    pub working_set: u64,
    pub mode: ExecMode,
    pub amortized_ns: f64,
}

/// Throughput summary; per-phase times are amortized per query.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub batch: usize,
    pub batches: usize,
    pub expand_ns: f64,
    pub rgsw_ns: f64,
    pub rowsel_ns: f64,
    pub coltor_ns: f64,
    pub qps: f64,
    /// Digit-decomposition bytes allocated per query, a DRAM-traffic proxy.
    pub transient_bytes: f64,
    pub correct: usize,
    pub plan: ExecutionPlan,
    /// Closed-form communication of the configured strategy.
    pub ledger: CommLedger,
    pub stages: Vec<BenchStageRow>,
}

impl BenchReport {
    pub fn total_ns(&self) -> f64 {
        self.expand_ns + self.rgsw_ns + self.rowsel_ns + self.coltor_ns
    }

    /// `key = value` summary.
    pub fn export(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "batches = {}", self.batches);
        let _ = writeln!(s, "qps = {:.3}", self.qps);
        let _ = writeln!(s, "expand_ms_per_query = {:.3}", self.expand_ns / 1e6);
        let _ = writeln!(s, "rgsw_ms_per_query = {:.3}", self.rgsw_ns / 1e6);
        let _ = writeln!(s, "rowsel_ms_per_query = {:.3}", self.rowsel_ns / 1e6);
        let _ = writeln!(s, "coltor_ms_per_query = {:.3}", self.coltor_ns / 1e6);
        let _ = writeln!(s, "transient_bytes_per_query = {:.0}", self.transient_bytes);
        let _ = writeln!(s, "correct = {}/{}", self.correct, self.batch * self.batches);
        let _ = writeln!(
            s,
            "plan_expand_transition = {}",
            self.plan.expand_transition.map_or("none".into(), |t| t.to_string())
        );
        let _ = writeln!(
            s,
            "plan_coltor_transition = {}",
            self.plan.coltor_transition.map_or("none".into(), |t| t.to_string())
        );
        let _ = writeln!(s, "strategy = {}", self.ledger.strategy.name());
        let _ = writeln!(s, "workers = {}", self.ledger.n_workers);
        let _ = writeln!(s, "comm_bytes_per_batch = {}", self.ledger.total_bytes());
        let _ = writeln!(
            s,
            "comm_seconds_per_batch = {:.9}",
            self.ledger.modeled_seconds(self.ledger.total_bytes())
        );
        s
    }

    /// `phase,stage,nodes,working_set_bytes,mode,amortized_ns`.
    pub fn stage_csv(&self) -> String {
        let mut s = String::from("phase,stage,nodes,working_set_bytes,mode,amortized_ns\n");
        for r in &self.stages {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.0}",
                r.phase.name(),
                r.stage,
                r.nodes,
                r.working_set,
                r.mode.name(),
                r.amortized_ns
            );
        }
        s
    }
}

/// Runs `batches` full batches of random queries in process and checks
/// every decoded record against the database.
pub fn run_bench<R: RngCore + ?Sized>(
    cfg: &ServerConfig,
    db: &EncodedDatabase,
    params: &HeParams,
    batches: usize,
    rng: &mut R,
) -> Result<BenchReport> {
    if batches == 0 {
        return invalid_arg("bench needs at least one batch");
    }
    let config = *db.config();
    let batch = cfg.batch_size;
    let options = cfg.serve_options(&config, batch, params);
    let plan = build_plan(&config, batch, params, &cfg.hw);
    let keys = (0..batch)
        .map(|_| ClientKeys::generate(params, &config, rng))
        .collect::<Result<Vec<_>>>()?;

    let mut report = BenchReport {
        batch,
        batches,
        expand_ns: 0.0,
        rgsw_ns: 0.0,
        rowsel_ns: 0.0,
        coltor_ns: 0.0,
        qps: 0.0,
        transient_bytes: 0.0,
        correct: 0,
        ledger: comm_bytes(cfg.strategy, &config, batch, cfg.workers, params, options.rgsw).with_link_bw(cfg.link_bw),
        stages: plan
            .stages
            .iter()
            .map(|p| BenchStageRow {
                phase: p.phase,
                stage: p.stage,
                nodes: p.nodes,
                working_set: p.working_set,
                mode: p.mode,
                amortized_ns: 0.0,
            })
            .collect(),
        plan,
    };
    let mut wall = 0.0;
    for _ in 0..batches {
        let picks: Vec<(usize, usize)> = (0..batch)
            .map(|_| (rng.gen_range(0..config.d0), rng.gen_range(0..config.d1)))
            .collect();
        let queries = keys
            .iter()
            .zip(&picks)
            .enumerate()
            .map(|(i, (k, &(r, c)))| client_gen_query(&k.sk, i as u64, r, c, &config, params, rng))
            .collect::<Result<Vec<_>>>()?;
        let items: Vec<_> = queries
            .iter()
            .zip(&keys)
            .map(|(q, k)| BatchItem {
                query: q,
                keys: &k.public,
                rgsws: None,
            })
            .collect();
        let t = Instant::now();
        let (responses, stats) = respond_batch(&items, db, params, &options)?;
        wall += t.elapsed().as_secs_f64();
        report.expand_ns += stats.expand_ns as f64;
        report.rgsw_ns += stats.rgsw_ns as f64;
        report.rowsel_ns += stats.rowsel_ns as f64;
        report.coltor_ns += stats.coltor_ns as f64;
        for st in &stats.stages {
            report.transient_bytes += st.cumulative_transient_bytes as f64;
            if let Some(row) = report.stages.iter_mut().find(|r| r.phase == st.phase && r.stage == st.stage) {
                row.amortized_ns += st.elapsed_ns as f64;
            }
        }
        for ((r, k), &(row, col)) in responses.iter().zip(&keys).zip(&picks) {
            if client_decode_response(&k.sk, r, &config, params)? == db.decode_record(row, col, params)? {
                report.correct += 1;
            }
        }
    }
    let per = (batch * batches) as f64;
    report.expand_ns /= per;
    report.rgsw_ns /= per;
    report.rowsel_ns /= per;
    report.coltor_ns /= per;
    report.transient_bytes /= per;
    for row in &mut report.stages {
        row.amortized_ns /= per;
    }
    report.qps = per / wall;
    Ok(report)
}
