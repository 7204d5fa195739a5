use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::cluster::{ShardSpec, Strategy, PCIE5_BW};
use crate::error::{Error, Result};
use crate::he::{GadgetConfig, HeParams, DEFAULT_ERROR_BOUND, DEFAULT_N, DEFAULT_PLAIN_BITS};
use crate::layout::{PipelineConfig, TileConfig};
use crate::planner::{build_plan, ExecPolicy, HardwareModel};
use crate::protocol::{DbConfig, RowSelEngine, ServeOptions, DEFAULT_D0, DEFAULT_RECORD_BYTES};
use crate::ring::RnsBasis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Naive,
    PMajor,
    Transposed,
    Pipelined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Hybrid,
    OperationLevel,
    StageLevel,
}

/// Settings shared by `serve`, `plan` and `bench`, read from a
/// `key = value` file. Unset keys keep their defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerConfig {
    pub db: Option<PathBuf>,
    pub listen: String,
    pub degree: usize,
    pub limbs: usize,
    pub prime_bits: u32,
    pub plain_bits: u32,
    pub gadget_bits: u32,
    pub ell: usize,
    pub error_bound: u32,
    /// Grid used when no database file is given.
    pub db_config: DbConfig,
    pub batch_size: usize,
    pub wait_ms: u64,
    pub strategy: Strategy,
    pub workers: usize,
    pub link_bw: f64,
    pub engine: EngineKind,
    pub policy: PolicyKind,
    pub pipeline: PipelineConfig,
    pub hw: HardwareModel,
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            db: None,
            listen: "127.0.0.1:7878".into(),
            degree: DEFAULT_N,
            limbs: 4,
            prime_bits: 27,
            plain_bits: DEFAULT_PLAIN_BITS,
            gadget_bits: 22,
            ell: 5,
            error_bound: DEFAULT_ERROR_BOUND,
            db_config: DbConfig::new(DEFAULT_D0, 512, DEFAULT_RECORD_BYTES).expect("default grid"),
            batch_size: 32,
            wait_ms: 50,
            strategy: Strategy::ShardAggregate,
            workers: 1,
            link_bw: PCIE5_BW,
            engine: EngineKind::Transposed,
            policy: PolicyKind::Hybrid,
            pipeline: PipelineConfig::default(),
            hw: HardwareModel::default(),
            seed: 1,
        }
    }
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidConfig(format!("line {line}: {}", msg.into()))
}

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(line, format!("{key}: cannot parse {v:?}")))
}

impl FromStr for ServerConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut c = ServerConfig::default();
        let (mut d0, mut d1, mut rb) = (c.db_config.d0, c.db_config.d1, c.db_config.record_bytes);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, v) = body
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(line, "expected key = value"))?;
            match key {
                "db" => c.db = Some(PathBuf::from(v)),
                "listen" => c.listen = v.to_string(),
                "degree" => c.degree = num(line, key, v)?,
                "limbs" => c.limbs = num(line, key, v)?,
                "prime_bits" => c.prime_bits = num(line, key, v)?,
                "plain_bits" => c.plain_bits = num(line, key, v)?,
                "gadget_bits" => c.gadget_bits = num(line, key, v)?,
                "ell" => c.ell = num(line, key, v)?,
                "error_bound" => c.error_bound = num(line, key, v)?,
                "d0" => d0 = num(line, key, v)?,
                "d1" => d1 = num(line, key, v)?,
                "record_bytes" => rb = num(line, key, v)?,
                "batch_size" => c.batch_size = num(line, key, v)?,
                "wait_ms" => c.wait_ms = num(line, key, v)?,
                "strategy" => c.strategy = Strategy::parse(v).ok_or_else(|| bad(line, format!("unknown strategy {v:?}")))?,
                "workers" => c.workers = num(line, key, v)?,
                "link_bw" => c.link_bw = num(line, key, v)?,
                "engine" => {
                    c.engine = match v {
                        "naive" => EngineKind::Naive,
                        "pmajor" => EngineKind::PMajor,
                        "transposed" => EngineKind::Transposed,
                        "pipelined" => EngineKind::Pipelined,
                        _ => return Err(bad(line, format!("unknown engine {v:?}"))),
                    }
                }
                "policy" => {
                    c.policy = match v {
                        "hybrid" => PolicyKind::Hybrid,
                        "op" | "operation" => PolicyKind::OperationLevel,
                        "fused" | "stage" => PolicyKind::StageLevel,
                        _ => return Err(bad(line, format!("unknown policy {v:?}"))),
                    }
                }
                "lanes" => c.pipeline.lanes = num(line, key, v)?,
                "chunks" => c.pipeline.n_chunks = num(line, key, v)?,
                "pipeline_workers" => c.pipeline.workers = num(line, key, v)?,
                "l2_bytes" => c.hw.l2_bytes = num(line, key, v)?,
                "dram_bw" => c.hw.dram_bw = num(line, key, v)?,
                "peak_ops" => c.hw.peak_ops = num(line, key, v)?,
                "seed" => c.seed = num(line, key, v)?,
                _ => return Err(bad(line, format!("unknown key {key:?}"))),
            }
        }
        c.db_config = DbConfig::new(d0, d1, rb)?;
        c.validate()?;
        Ok(c)
    }
}

impl ServerConfig {
    pub fn load(path: &Path) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if self.workers == 0 || !self.workers.is_power_of_two() {
            return Err(Error::InvalidConfig("workers must be a power of two".into()));
        }
        if !self.link_bw.is_finite() || self.link_bw <= 0.0 {
            return Err(Error::InvalidConfig("link_bw must be positive".into()));
        }
        if self.pipeline.lanes == 0 || self.pipeline.n_chunks == 0 || self.pipeline.workers == 0 {
            return Err(Error::InvalidConfig("pipeline lanes, chunks and workers must be positive".into()));
        }
        self.hw.validate()
    }

    pub fn he_params(&self) -> Result<HeParams> {
        let basis = Arc::new(RnsBasis::generate(self.degree, self.limbs, self.prime_bits)?);
        HeParams::new(basis, self.plain_bits, GadgetConfig::new(self.gadget_bits, self.ell)?, self.error_bound)
    }

    pub fn batch_window(&self) -> Duration {
        Duration::from_millis(self.wait_ms)
    }

    pub fn shard_spec(&self, d1: usize) -> Result<ShardSpec> {
        ShardSpec::even(d1, self.workers)
    }

    pub fn engine(&self) -> RowSelEngine {
        match self.engine {
            EngineKind::Naive => RowSelEngine::Naive,
            EngineKind::PMajor => RowSelEngine::PMajorTiled(TileConfig::pmajor_baseline()),
            EngineKind::Transposed => RowSelEngine::TransposedTiled(TileConfig::transposed_default()),
            EngineKind::Pipelined => RowSelEngine::Pipelined(self.pipeline),
        }
    }

    /// Execution policy for a given grid and batch size.
    pub fn policy_for(&self, config: &DbConfig, batch: usize, params: &HeParams) -> ExecPolicy {
        match self.policy {
            PolicyKind::Hybrid => ExecPolicy::Hybrid(build_plan(config, batch, params, &self.hw)),
            PolicyKind::OperationLevel => ExecPolicy::AllOperationLevel,
            PolicyKind::StageLevel => ExecPolicy::AllStageLevel,
        }
    }

    pub fn serve_options(&self, config: &DbConfig, batch: usize, params: &HeParams) -> ServeOptions {
        ServeOptions {
            engine: self.engine(),
            policy: self.policy_for(config, batch, params),
            rgsw: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_rejects_unknown_keys() {
        let c: ServerConfig = "# tiny\nd0 = 16\nd1=16 \nworkers = 2\nstrategy = shardallgather\npolicy = fused\n"
            .parse()
            .unwrap();
        assert_eq!(c.db_config.d0, 16);
        assert_eq!(c.workers, 2);
        assert_eq!(c.strategy, Strategy::ShardAllGather);
        assert_eq!(c.policy, PolicyKind::StageLevel);
        assert!("bogus = 1".parse::<ServerConfig>().is_err());
        assert!("workers = 3".parse::<ServerConfig>().is_err());
        assert!("d0".parse::<ServerConfig>().is_err());
    }

    #[test]
    fn default_params_match_library_defaults() {
        let c = ServerConfig::default();
        assert_eq!(c.he_params().unwrap().basis().primes(), HeParams::default_params().basis().primes());
    }
}
