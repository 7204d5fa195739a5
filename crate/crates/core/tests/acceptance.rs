use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

use gpir::cluster::{comm_bytes, run_strategy, ShardSpec, Strategy, FRAME_OVERHEAD, PCIE5_BW};
use gpir::he::{
    digit_decompose, gen_rgsw, keygen, BfvCiphertext, ConversionKey, EvalKey, GadgetConfig, HeParams, RgswCiphertext,
    SecretKey,
};
use gpir::layout::{
    gemm_naive, gemm_pmajor_tiled, gemm_transposed_tiled, pipeline_rowsel, traffic_ratio, transpose_ct_tensor,
    Layout, PipelineConfig, Tensor3, TileConfig,
};
use gpir::planner::{
    arithmetic_intensity, build_plan, choose_mode, working_set, working_set_for, ExecMode, ExecPolicy, HardwareModel,
    Phase, RooflinePhase, StageStats,
};
use gpir::protocol::{
    client_decode_response, client_gen_query, client_gen_reference_rgsws, encode_database, expand_query,
    respond_batch, BatchItem, ClientKeys, ClientQuery, DbConfig, EncodedDatabase, PublicKeys, Response, RgswSource,
    ServeOptions,
};
use gpir::ring::{negacyclic_convolve_naive, sample_uniform, Domain, RnsBasis, RnsPoly};
use gpir::service::wire::{self, EvkSet, ParamsInfo};
use gpir::service::{start, PirClient, ServerConfig};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type ClientRun = Result<(Vec<u8>, Vec<u8>, ClientQuery), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_records(n: usize, bytes: usize, rng: &mut impl RngCore) -> Vec<Vec<u8>> {
    (0..n)
        .map(|_| {
            let mut r = vec![0u8; bytes];
            rng.fill_bytes(&mut r);
            r
        })
        .collect()
}

fn small_params(n: usize) -> HeParams {
    let basis = Arc::new(RnsBasis::default_for(n).unwrap());
    HeParams::new(basis, 32, GadgetConfig::default(), 16).unwrap()
}

fn end_to_end() -> Outcome {
    let params = HeParams::default_params();
    let config = DbConfig::new(16, 16, 16 * 1024).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let records = random_records(config.records(), config.record_bytes, &mut rng);
    let db = encode_database(&records, &config, &params, Layout::Transposed).unwrap();
    let keys: Vec<_> = (0..4)
        .map(|_| ClientKeys::generate(&params, &config, &mut rng).unwrap())
        .collect();
    let options = ServeOptions::default();
    let mut checked = 0;
    for chunk in 0..10 {
        let picks: Vec<(usize, usize)> = (0..10).map(|_| (rng.gen_range(0..16), rng.gen_range(0..16))).collect();
        let queries: Vec<_> = picks
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| client_gen_query(&keys[i % 4].sk, i as u64, r, c, &config, &params, &mut rng).unwrap())
            .collect();
        let items: Vec<_> = queries
            .iter()
            .enumerate()
            .map(|(i, q)| BatchItem {
                query: q,
                keys: &keys[i % 4].public,
                rgsws: None,
            })
            .collect();
        let (resp, _) = respond_batch(&items, &db, &params, &options).map_err(|e| e.to_string())?;
        for (i, r) in resp.iter().enumerate() {
            let got = client_decode_response(&keys[i % 4].sk, r, &config, &params).map_err(|e| e.to_string())?;
            let (row, col) = picks[i];
            ensure!(got == records[row * 16 + col], "batch {chunk} query {i} ({row},{col}) decoded wrong bytes");
            checked += 1;
        }
    }
    Ok(format!("{checked} random queries byte-identical"))
}

fn ntt_oracle() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(102);
    for n in [8, 16, 32] {
        let basis = Arc::new(RnsBasis::default_for(n).unwrap());
        for trial in 0..1000 {
            let a = sample_uniform(&basis, Domain::Coefficient, &mut rng);
            let b = sample_uniform(&basis, Domain::Coefficient, &mut rng);
            let prod = a
                .ntt_forward()
                .unwrap()
                .pointwise_mul(&b.ntt_forward().unwrap())
                .unwrap()
                .ntt_inverse()
                .unwrap();
            for (i, m) in basis.moduli().iter().enumerate() {
                let want = negacyclic_convolve_naive(a.limb(i), b.limb(i), m).unwrap();
                ensure!(prod.limb(i) == &want[..], "N = {n}, pair {trial}, limb {i} differs");
            }
        }
    }
    Ok("3000 products match naive convolution".into())
}

fn dcp_laws() -> Outcome {
    let params = HeParams::default_params();
    let g = params.gadget();
    let z = g.base() as i128;
    let mut rng = ChaCha20Rng::seed_from_u64(103);
    let moduli = params.basis().moduli();
    for trial in 0..1000 {
        let c = sample_uniform(params.basis(), Domain::Coefficient, &mut rng);
        let digits: Vec<Vec<i128>> = digit_decompose(&c.ntt_forward().unwrap(), g)
            .unwrap()
            .iter()
            .map(|d| d.ntt_inverse().unwrap().crt_centered().unwrap())
            .collect();
        ensure!(digits.len() == 5, "expected 5 digits, got {}", digits.len());
        for d in &digits {
            ensure!(d.iter().all(|&v| -z / 2 <= v && v <= z / 2 + 1), "poly {trial}: digit out of range");
        }
        for (li, m) in moduli.iter().enumerate() {
            let zq = m.reduce_i128(z);
            for (j, &cj) in c.limb(li).iter().enumerate() {
                let mut acc = 0u32;
                for d in digits.iter().rev() {
                    acc = m.add(m.mul(acc, zq), m.reduce_i128(d[j]));
                }
                ensure!(acc == cj, "poly {trial}: coefficient {j} does not recompose mod q{li}");
            }
        }
    }
    Ok("1000 polynomials recompose with digits in range".into())
}

fn one_hot_expansion() -> Outcome {
    let params = HeParams::default_params();
    let config = DbConfig::new(16, 16, 1024).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(104);
    let keys: Vec<_> = (0..5)
        .map(|_| ClientKeys::generate(&params, &config, &mut rng).unwrap())
        .collect();
    for trial in 0..50 {
        let k = &keys[trial % 5];
        let row = rng.gen_range(0..16);
        let q = client_gen_query(&k.sk, 0, row, rng.gen_range(0..16), &config, &params, &mut rng).unwrap();
        let ex = expand_query(&q, &k.public, &config, &params).map_err(|e| e.to_string())?;
        for (i, ct) in ex.row_cts.iter().enumerate() {
            let m = gpir::he::decrypt(&k.sk, ct, &params).unwrap();
            ensure!(m[0] == u64::from(i == row), "query {trial}: row {i} slot 0 is {}", m[0]);
            ensure!(m[1..].iter().all(|&v| v == 0), "query {trial}: row {i} has stray coefficients");
        }
    }
    let small = small_params(256);
    let ell = small.gadget().ell();
    for _ in 0..10 {
        let config = DbConfig::new(rng.gen_range(1..=64), 1 << rng.gen_range(0..=6), 64).unwrap();
        let k = ClientKeys::generate(&small, &config, &mut rng).unwrap();
        let q = client_gen_query(&k.sk, 0, 0, 0, &config, &small, &mut rng).unwrap();
        let ex = expand_query(&q, &k.public, &config, &small).map_err(|e| e.to_string())?;
        let want = config.d0 + config.col_bits() * ell;
        ensure!(ex.len() == want, "D0 = {}, D1 = {}: {} cts, want {want}", config.d0, config.d1, ex.len());
    }
    Ok("50 queries one-hot; 10 configs have D0 + log2(D1)*ell cts".into())
}

fn random_tensor(dims: [usize; 3], basis: &RnsBasis, rng: &mut impl Rng) -> Tensor3 {
    let n = basis.degree();
    Tensor3::from_fn(dims, Layout::PMajor, |p, _, _| rng.gen_range(0..basis.modulus(p / n).value()))
}

fn gemm_equivalence() -> Outcome {
    let basis = RnsBasis::default_for(16).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(105);
    let tiles = [
        TileConfig::pmajor_baseline(),
        TileConfig::transposed_default(),
        TileConfig::new(8, 8, 8, Some(4)),
        TileConfig::new(32, 16, 4, Some(2)),
        TileConfig::new(4, 64, 16, None),
    ];
    for trial in 0..20 {
        let a = random_tensor([64, 64, 32], &basis, &mut rng);
        let b = random_tensor([64, 32, 64], &basis, &mut rng);
        let want = gemm_naive(&a, &b, &basis).unwrap();
        let at = transpose_ct_tensor(&a, Layout::Transposed);
        let bt = transpose_ct_tensor(&b, Layout::Transposed);
        for tile in &tiles {
            if tile.scratch_footprint() <= 96 * 1024 && tile.bp.is_some() {
                let got = gemm_pmajor_tiled(&a, &b, &basis, tile).map_err(|e| e.to_string())?;
                ensure!(got == want, "instance {trial}: p-major {tile:?} differs");
            }
            let got = gemm_transposed_tiled(&at, &bt, &basis, tile).map_err(|e| e.to_string())?;
            ensure!(
                transpose_ct_tensor(&got, Layout::PMajor) == want,
                "instance {trial}: transposed {tile:?} differs"
            );
        }
    }
    let r = traffic_ratio(&TileConfig::pmajor_baseline(), &TileConfig::transposed_default());
    ensure!(
        (r.scratch, r.accumulator, r.traffic) == (2.0, 2.0, 4.0),
        "ratios {:?}",
        (r.scratch, r.accumulator, r.traffic)
    );
    Ok("20 instances bit-identical across engines; ratios (2, 2, 4)".into())
}

fn planner_numbers() -> Outcome {
    let params = HeParams::default_params();
    let hw = HardwareModel::default();
    let ws = working_set_for(Phase::ColTor, 256, 32, &params);
    ensure!(ws == 256 * 5 * 131_072 * 32, "working set {ws}");
    let big = DbConfig::new(256, 512, 16 * 1024).unwrap();
    ensure!(working_set(Phase::ColTor, 0, 32, &big, &params) == ws, "stage 0 of 256x512 disagrees");
    ensure!(choose_mode(ws, &hw) == ExecMode::StageLevel, "5 GB not flagged stage-level");
    let plan = build_plan(&DbConfig::new(16, 16, 16 * 1024).unwrap(), 1, &params, &hw);
    ensure!(
        plan.stages.iter().all(|s| s.mode == ExecMode::OperationLevel),
        "16x16 batch 1 has a stage-level stage"
    );
    Ok(format!("ColTor stage 0 = {ws} B, StageLevel; 16x16 batch 1 all OperationLevel"))
}

fn dominance(op: &[StageStats], fused: &[StageStats]) -> Result<usize, String> {
    ensure!(op.len() == fused.len(), "stage counts differ");
    for (o, f) in op.iter().zip(fused) {
        ensure!(o.nodes >= 1, "empty stage");
        ensure!(
            f.peak_transient_bytes < o.peak_transient_bytes,
            "{:?} stage {}: fused peak {} >= op-level peak {}",
            o.phase,
            o.stage,
            f.peak_transient_bytes,
            o.peak_transient_bytes
        );
    }
    Ok(op.len())
}

fn execution_paths() -> Outcome {
    let params = HeParams::default_params();
    let config = DbConfig::new(16, 16, params.plaintext_bytes()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(107);
    let records = random_records(config.records(), config.record_bytes, &mut rng);
    let db = encode_database(&records, &config, &params, Layout::Transposed).unwrap();
    let keys: Vec<_> = (0..2)
        .map(|_| ClientKeys::generate(&params, &config, &mut rng).unwrap())
        .collect();
    let picks: Vec<(usize, usize)> = (0..2).map(|_| (rng.gen_range(0..16), rng.gen_range(0..16))).collect();
    let queries: Vec<_> = (0..2)
        .map(|i| client_gen_query(&keys[i].sk, i as u64, picks[i].0, picks[i].1, &config, &params, &mut rng).unwrap())
        .collect();
    let items: Vec<_> = (0..2)
        .map(|i| BatchItem {
            query: &queries[i],
            keys: &keys[i].public,
            rgsws: None,
        })
        .collect();
    let small_l2 = HardwareModel {
        l2_bytes: 2 * 1024 * 1024,
        ..HardwareModel::default()
    };
    let hybrid = build_plan(&config, 2, &params, &small_l2);
    let mut runs = Vec::new();
    for policy in [ExecPolicy::AllOperationLevel, ExecPolicy::AllStageLevel, ExecPolicy::Hybrid(hybrid)] {
        let options = ServeOptions {
            policy,
            ..ServeOptions::default()
        };
        runs.push(respond_batch(&items, &db, &params, &options).map_err(|e| e.to_string())?);
    }
    ensure!(runs[0].0 == runs[1].0, "op-level and fused responses differ");
    ensure!(runs[0].0 == runs[2].0, "op-level and hybrid responses differ");
    let modes: Vec<_> = runs[2].1.stages.iter().map(|s| s.mode).collect();
    ensure!(
        modes.contains(&ExecMode::OperationLevel) && modes.contains(&ExecMode::StageLevel),
        "hybrid run did not mix modes"
    );
    for (i, r) in runs[0].0.iter().enumerate() {
        let got = client_decode_response(&keys[i].sk, r, &config, &params).unwrap();
        ensure!(got == records[picks[i].0 * 16 + picks[i].1], "query {i} decoded wrong bytes");
    }
    let stages = dominance(&runs[0].1.stages, &runs[1].1.stages)?;
    Ok(format!("three paths bit-identical; fused peak lower on all {stages} stages"))
}

fn pipeline() -> Outcome {
    let basis = RnsBasis::default_for(64).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(108);
    let a = random_tensor([256, 4, 8], &basis, &mut rng);
    let db = transpose_ct_tensor(&random_tensor([256, 8, 4], &basis, &mut rng), Layout::Transposed);
    let want = gemm_naive(&a, &db, &basis).unwrap();
    for lanes in [1, 2, 4] {
        for n_chunks in [1, 4, 8] {
            for workers in [1, 2, 4] {
                let cfg = PipelineConfig {
                    lanes,
                    n_chunks,
                    workers,
                    tile: TileConfig::transposed_default(),
                };
                let (out, trace) = pipeline_rowsel(&a, &db, &basis, &cfg).map_err(|e| e.to_string())?;
                ensure!(out == want, "lanes {lanes} chunks {n_chunks} workers {workers}: output differs");
                ensure!(trace.dependencies_respected(), "lanes {lanes} chunks {n_chunks}: dependency violated");
            }
        }
    }
    let big = RnsBasis::default_for(4096).unwrap();
    let a = random_tensor([4 * 4096, 32, 32], &big, &mut rng);
    let db = transpose_ct_tensor(&random_tensor([4 * 4096, 32, 8], &big, &mut rng), Layout::Transposed);
    let cfg = PipelineConfig {
        lanes: 4,
        n_chunks: 8,
        workers: 4,
        tile: TileConfig::transposed_default(),
    };
    for attempt in 1..=3 {
        let (_, trace) = pipeline_rowsel(&a, &db, &big, &cfg).map_err(|e| e.to_string())?;
        if trace.has_transpose_gemm_overlap() {
            return Ok(format!("27 configs bit-identical; overlap observed on attempt {attempt}"));
        }
    }
    Err("no transpose/gemm overlap in three pipelined runs".into())
}

fn cluster() -> Outcome {
    let params = small_params(256);
    let config = DbConfig::new(8, 16, 128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(109);
    let records = random_records(config.records(), config.record_bytes, &mut rng);
    let db = encode_database(&records, &config, &params, Layout::PMajor).unwrap();
    let batch = 4;
    let keys: Vec<_> = (0..batch)
        .map(|_| ClientKeys::generate(&params, &config, &mut rng).unwrap())
        .collect();
    let picks: Vec<(usize, usize)> = (0..batch).map(|_| (rng.gen_range(0..8), rng.gen_range(0..16))).collect();
    let queries: Vec<_> = (0..batch)
        .map(|i| client_gen_query(&keys[i].sk, i as u64, picks[i].0, picks[i].1, &config, &params, &mut rng).unwrap())
        .collect();
    let rgsws: Vec<_> = (0..batch)
        .map(|i| client_gen_reference_rgsws(&keys[i].sk, picks[i].1, &config, &params, &mut rng).unwrap())
        .collect();
    let items: Vec<_> = (0..batch)
        .map(|i| BatchItem {
            query: &queries[i],
            keys: &keys[i].public,
            rgsws: Some(&rgsws[i]),
        })
        .collect();
    let mut runs = 0;
    for source in [RgswSource::Onion, RgswSource::Reference] {
        let options = ServeOptions {
            rgsw: source,
            ..ServeOptions::default()
        };
        let (single, _) = respond_batch(&items, &db, &params, &options).map_err(|e| e.to_string())?;
        for n in [1, 2, 4] {
            let spec = ShardSpec::even(16, n).unwrap();
            for strategy in Strategy::ALL {
                let (resp, ledger) =
                    run_strategy(&items, &db, strategy, &spec, &params, &options, PCIE5_BW).map_err(|e| e.to_string())?;
                ensure!(resp == single, "{strategy:?} n = {n} {source:?}: responses differ");
                let closed = comm_bytes(strategy, &config, batch, n, &params, source);
                ensure!(ledger == closed, "{strategy:?} n = {n} {source:?}: ledger {ledger:?} != {closed:?}");
                runs += 1;
            }
        }
    }

    let full = HeParams::default_params();
    let grid = DbConfig::new(256, 512, 16 * 1024).unwrap();
    let l = comm_bytes(Strategy::ShardAllGather, &grid, 32, 4, &full, RgswSource::Onion);
    let want = 32u64 * 256 * 131_072;
    ensure!(l.after_expand_bytes == want, "all-gather payload {} != {want}", l.after_expand_bytes);
    let framed = l.after_expand_bytes + 32 * 256 * FRAME_OVERHEAD as u64;
    let rel = (framed - want) as f64 / want as f64;
    ensure!(rel < 1e-3, "framed all-gather {framed} is {rel:.5} above {want}");
    let doubled = DbConfig::new(256, 1024, 16 * 1024).unwrap();
    let l2 = comm_bytes(Strategy::ShardAllGather, &doubled, 32, 4, &full, RgswSource::Onion);
    ensure!(l2.after_expand_bytes == l.after_expand_bytes, "all-gather volume changed with D1");
    Ok(format!(
        "{runs} runs match single-worker and closed forms; all-gather {framed} B framed ({:.4}% over 1 GiB)",
        rel * 100.0
    ))
}

fn intensity() -> Outcome {
    let params = HeParams::default_params();
    let config = DbConfig::new(256, 512, 16 * 1024).unwrap();
    ensure!(config.raw_bytes() == 2 << 30, "grid is not 2 GiB");
    let ai = arithmetic_intensity(RooflinePhase::RowSel, &config, 32, &params);
    ensure!(ai > 13.8 / 2.0 && ai < 13.8 * 2.0, "AI {ai:.2} outside 2x of 13.8");
    let mut prev = arithmetic_intensity(RooflinePhase::RowSel, &config, 1, &params);
    for b in [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024] {
        let cur = arithmetic_intensity(RooflinePhase::RowSel, &config, b, &params);
        ensure!(cur > prev, "AI not increasing at batch {b}");
        prev = cur;
    }
    Ok(format!("AI(2 GB, 32) = {ai:.2} Ops/B; strictly increasing in batch"))
}

fn random_ct(params: &HeParams, rng: &mut impl RngCore) -> BfvCiphertext {
    BfvCiphertext::new(
        sample_uniform(params.basis(), Domain::Ntt, rng),
        sample_uniform(params.basis(), Domain::Ntt, rng),
    )
    .unwrap()
}

fn roundtrips(rng: &mut ChaCha20Rng) -> Result<(), String> {
    let params = small_params(64);
    let basis = params.basis().clone();
    let config = DbConfig::new(4, 8, 64).unwrap();
    let sk = SecretKey::generate(&params, rng);
    macro_rules! rt {
        ($t:ty, $v:expr) => {{
            let v: $t = $v;
            let back = wire::decode::<$t>(&wire::encode(&v), &basis).map_err(|e| e.to_string())?;
            ensure!(back == v, "{} roundtrip differs", stringify!($t));
        }};
    }
    for _ in 0..1000 {
        let domain = if rng.gen() { Domain::Ntt } else { Domain::Coefficient };
        rt!(RnsPoly, sample_uniform(&basis, domain, rng));
        rt!(BfvCiphertext, random_ct(&params, rng));
        rt!(
            ClientQuery,
            ClientQuery {
                client_id: rng.gen(),
                ct: random_ct(&params, rng),
            }
        );
        rt!(Response, Response { ct: random_ct(&params, rng) });
        rt!(RgswCiphertext, gen_rgsw(&sk, rng.gen(), &params, rng).unwrap());
        let k = 2 * rng.gen_range(0..64) + 1;
        rt!(EvalKey, EvalKey::generate(&sk, k, &params, rng).unwrap());
        let (_, evks) = keygen(&params, rng.gen_range(1..=4), rng).unwrap();
        rt!(
            EvkSet,
            EvkSet {
                client_id: rng.gen(),
                keys: PublicKeys {
                    evks,
                    conversion: ConversionKey::generate(&sk, &params, rng).unwrap(),
                },
            }
        );
        let info = ParamsInfo::from_params(&params, &config);
        ensure!(ParamsInfo::decode(&info.encode()).map_err(|e| e.to_string())? == info, "ParamsInfo differs");
    }
    Ok(())
}

fn service_db(cfg: &ServerConfig, rng: &mut ChaCha20Rng) -> (EncodedDatabase, Vec<Vec<u8>>, HeParams) {
    let params = cfg.he_params().unwrap();
    let records = random_records(cfg.db_config.records(), cfg.db_config.record_bytes, rng);
    let db = encode_database(&records, &cfg.db_config, &params, Layout::Transposed).unwrap();
    (db, records, params)
}

fn service() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(111);
    roundtrips(&mut rng)?;
    let base = "listen = 127.0.0.1:0\ndegree = 1024\nd0 = 16\nd1 = 16\nrecord_bytes = 4096\n";
    let solo_cfg: ServerConfig = format!("{base}wait_ms = 20\n").parse().unwrap();
    let batch_cfg: ServerConfig = format!("{base}wait_ms = 120000\nbatch_size = 32\n").parse().unwrap();
    let (db, records, params) = service_db(&batch_cfg, &mut rng);
    let solo = start(db.clone(), params.clone(), solo_cfg).map_err(|e| e.to_string())?;
    let batched = start(db, params.clone(), batch_cfg.clone()).map_err(|e| e.to_string())?;
    let keys: Vec<ClientKeys> = (0..32)
        .map(|_| ClientKeys::generate(&params, &batch_cfg.db_config, &mut rng).unwrap())
        .collect();
    let picks: Vec<usize> = (0..32).map(|_| rng.gen_range(0..256)).collect();
    let seeds: Vec<u64> = (0..32).map(|_| rng.gen()).collect();
    let addr = batched.addr();
    let results: Vec<ClientRun> = thread::scope(|s| {
        let handles: Vec<_> = (0..32)
            .map(|i| {
                let k = keys[i].clone();
                let (pick, seed) = (picks[i], seeds[i]);
                s.spawn(move || {
                    let mut rng = ChaCha20Rng::seed_from_u64(seed);
                    let mut c = PirClient::connect_with(addr, i as u64, |_, _| Ok(k)).map_err(|e| e.to_string())?;
                    let (row, col) = c.config().locate(pick).map_err(|e| e.to_string())?;
                    let q = c.build_query(row, col, &mut rng).map_err(|e| e.to_string())?;
                    let raw = c.send_raw(&q).map_err(|e| e.to_string())?;
                    let resp: Response = wire::decode(&raw, c.params().basis()).map_err(|e| e.to_string())?;
                    Ok((c.decode(&resp).map_err(|e| e.to_string())?, raw, q))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    ensure!(batched.batch_sizes() == vec![32], "batch sizes {:?}", batched.batch_sizes());
    for (i, (record, _, _)) in results.iter().enumerate() {
        ensure!(record == &records[picks[i]], "client {i} got wrong record");
    }
    for (i, (_, raw, q)) in results.iter().enumerate() {
        let k = keys[i].clone();
        let mut c = PirClient::connect_with(solo.addr(), i as u64, |_, _| Ok(k)).map_err(|e| e.to_string())?;
        ensure!(&c.send_raw(q).map_err(|e| e.to_string())? == raw, "client {i}: solo bytes differ from batched");
    }
    solo.shutdown();
    batched.shutdown();
    Ok("1000 roundtrips per type; 32 clients in one batch; solo bytes identical".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("end-to-end PIR", end_to_end),
        ("NTT oracle", ntt_oracle),
        ("digit decomposition", dcp_laws),
        ("one-hot expansion", one_hot_expansion),
        ("GEMM engines", gemm_equivalence),
        ("planner numbers", planner_numbers),
        ("execution paths", execution_paths),
        ("pipeline", pipeline),
        ("cluster ledgers", cluster),
        ("arithmetic intensity", intensity),
        ("serialization and service", service),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id} ({name}): {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} ({name}): {why} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
