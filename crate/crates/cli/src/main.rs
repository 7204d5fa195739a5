use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gpir::layout::Layout;
use gpir::planner::{build_plan, roofline_report};
use gpir::protocol::{encode_database, ClientKeys, DbConfig};
use gpir::service::{load_db, load_keys, run_bench, save_db, save_keys, serve, PirClient, ServerConfig};
use log::info;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Parser)]
#[command(name = "gpir", version, about = "Batched single-server PIR engine")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Encode records into a database container.
    BuildDb {
        /// A directory (one file per record, sorted by name) or a raw file
        /// cut into record-sized pieces.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 256)]
        d0: usize,
        #[arg(long, default_value_t = 16384)]
        record_bytes: usize,
        #[arg(long)]
        out: PathBuf,
        /// Ring parameters; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the batching server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fetch one record by flat index.
    Query {
        #[arg(long)]
        server: String,
        #[arg(long)]
        index: usize,
        /// Key file; created on first use.
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        client_id: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the per-stage execution plan.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured batch size.
        #[arg(long)]
        batch: Option<usize>,
        /// Also print the roofline table.
        #[arg(long)]
        roofline: bool,
    },
    /// Run full batches in process and report throughput.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        batches: usize,
        /// Where to write the per-stage CSV; printed when omitted.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn read_records(path: &Path, record_bytes: usize) -> Result<Vec<Vec<u8>>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        files.retain(|p| p.is_file());
        files.sort();
        files
            .iter()
            .map(|f| {
                let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
                if bytes.len() > record_bytes {
                    bail!("{} has {} bytes, limit is {record_bytes}", f.display(), bytes.len());
                }
                Ok(bytes)
            })
            .collect()
    } else {
        let raw = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(raw.chunks(record_bytes).map(|c| c.to_vec()).collect())
    }
}

fn load_config(path: Option<&Path>) -> Result<ServerConfig> {
    match path {
        Some(p) => ServerConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(ServerConfig::default()),
    }
}

/// The grid of the configured database file, or the configured grid.
fn grid(cfg: &ServerConfig) -> Result<DbConfig> {
    match &cfg.db {
        Some(p) if p.exists() => Ok(*load_db(p, Layout::PMajor)?.0.config()),
        _ => Ok(cfg.db_config),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::BuildDb {
            records,
            d0,
            record_bytes,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let params = cfg.he_params()?;
            let mut recs = read_records(&records, record_bytes)?;
            if recs.is_empty() {
                bail!("no records found in {}", records.display());
            }
            if d0 == 0 {
                bail!("d0 must be positive");
            }
            // pad with empty records up to a power-of-two column count
            let grid = DbConfig::new(d0, recs.len().div_ceil(d0).next_power_of_two(), record_bytes)?;
            recs.resize(grid.records(), Vec::new());
            let db = encode_database(&recs, &grid, &params, Layout::PMajor)?;
            let written = save_db(&out, &db, &params)?;
            println!(
                "records = {}\nd0 = {}\nd1 = {}\nraw_bytes = {}\nencoded_bytes = {}\nfile_bytes = {written}",
                recs.len(),
                grid.d0,
                grid.d1,
                grid.raw_bytes(),
                db.encoded_bytes()
            );
        }
        Cmd::Serve { config } => {
            let cfg = load_config(Some(&config))?;
            info!("serving {:?} on {}", cfg.db, cfg.listen);
            serve(cfg)?;
        }
        Cmd::Query {
            server,
            index,
            keys,
            out,
            client_id,
            seed,
        } => {
            let mut rng = match seed {
                Some(s) => ChaCha20Rng::seed_from_u64(s),
                None => ChaCha20Rng::from_entropy(),
            };
            let mut key_rng = ChaCha20Rng::seed_from_u64(rng.next_u64());
            let mut client = PirClient::connect_with(server.as_str(), client_id, |params, grid| {
                if keys.exists() {
                    load_keys(&keys, params.basis())
                } else {
                    let k = ClientKeys::generate(params, grid, &mut key_rng)?;
                    save_keys(&keys, &k)?;
                    Ok(k)
                }
            })
            .with_context(|| format!("connecting to {server}"))?;
            let record = client.query_index(index, &mut rng)?;
            match out {
                Some(p) => fs::write(&p, &record).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{}", record.iter().map(|b| format!("{b:02x}")).collect::<String>()),
            }
        }
        Cmd::Plan {
            config,
            batch,
            roofline,
        } => {
            let cfg = load_config(Some(&config))?;
            let params = cfg.he_params()?;
            let grid = grid(&cfg)?;
            let batch = batch.unwrap_or(cfg.batch_size);
            print!("{}", build_plan(&grid, batch, &params, &cfg.hw).export());
            if roofline {
                print!("{}", roofline_report(&cfg.hw, &grid, batch, &params).export());
            }
        }
        Cmd::Bench { config, batches, csv } => {
            let cfg = load_config(Some(&config))?;
            let params = cfg.he_params()?;
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            let db = match &cfg.db {
                Some(p) => {
                    let (db, header) = load_db(p, Layout::Transposed)?;
                    header.check_params(&params)?;
                    db
                }
                None => {
                    let grid = cfg.db_config;
                    let recs: Vec<Vec<u8>> = (0..grid.records())
                        .map(|_| {
                            let mut r = vec![0u8; grid.record_bytes];
                            rng.fill_bytes(&mut r);
                            r
                        })
                        .collect();
                    encode_database(&recs, &grid, &params, Layout::Transposed)?
                }
            };
            let report = run_bench(&cfg, &db, &params, batches, &mut rng)?;
            print!("{}", report.export());
            match csv {
                Some(p) => fs::write(&p, report.stage_csv()).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", report.stage_csv()),
            }
        }
    }
    Ok(())
}

/// Exit code per failure class.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<gpir::Error>() {
        Some(gpir::Error::InvalidArgument(_)) | Some(gpir::Error::InvalidConfig(_)) => 2,
        Some(gpir::Error::Parse { .. }) => 3,
        Some(gpir::Error::Io(_)) => 4,
        Some(gpir::Error::InvalidState(_)) => 5,
        None if e.downcast_ref::<std::io::Error>().is_some() => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GPIR_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
