use std::sync::Arc;

use gpir::cluster::{comm_bytes, reassemble, run_strategy, shard_database, ShardSpec, Strategy, PCIE5_BW};
use gpir::he::{GadgetConfig, HeParams};
use gpir::layout::Layout;
use gpir::protocol::{
    client_decode_response, client_gen_query, client_gen_reference_rgsws, encode_database, respond_batch, BatchItem,
    ClientKeys, DbConfig, RgswSource, ServeOptions,
};
use gpir::ring::RnsBasis;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn small_params() -> HeParams {
    let basis = Arc::new(RnsBasis::default_for(256).unwrap());
    HeParams::new(basis, 32, GadgetConfig::default(), 16).unwrap()
}

#[test]
fn shards_reassemble_losslessly() {
    let params = small_params();
    let config = DbConfig::new(4, 16, 64).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let records: Vec<Vec<u8>> = (0..64)
        .map(|_| {
            let mut r = vec![0u8; 64];
            rng.fill_bytes(&mut r);
            r
        })
        .collect();
    for layout in [Layout::PMajor, Layout::Transposed] {
        let db = encode_database(&records, &config, &params, layout).unwrap();
        for spec in [
            ShardSpec::even(16, 1).unwrap(),
            ShardSpec::even(16, 2).unwrap(),
            ShardSpec::new(16, vec![(0, 8), (8, 12), (12, 16)]).unwrap(),
        ] {
            let shards = shard_database(&db, &spec).unwrap();
            for (s, &(lo, hi)) in shards.iter().zip(spec.ranges()) {
                assert_eq!(s.config().d1, hi - lo);
                assert_eq!(s.poly(1, 0), db.poly(1, lo));
            }
            assert_eq!(reassemble(&shards).unwrap().tensor(), db.tensor());
        }
    }
}

#[test]
fn strategies_match_single_worker_and_closed_forms() {
    let params = small_params();
    let config = DbConfig::new(8, 16, 128).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let records: Vec<Vec<u8>> = (0..config.records())
        .map(|_| {
            let mut r = vec![0u8; 128];
            rng.fill_bytes(&mut r);
            r
        })
        .collect();
    let db = encode_database(&records, &config, &params, Layout::PMajor).unwrap();
    let batch = 5;
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
    for source in [RgswSource::Onion, RgswSource::Reference] {
        let options = ServeOptions {
            rgsw: source,
            ..ServeOptions::default()
        };
        let (single, _) = respond_batch(&items, &db, &params, &options).unwrap();
        for (i, r) in single.iter().enumerate() {
            let got = client_decode_response(&keys[i].sk, r, &config, &params).unwrap();
            assert_eq!(got, records[picks[i].0 * 16 + picks[i].1]);
        }
        for n in [1, 2, 4] {
            let spec = ShardSpec::even(16, n).unwrap();
            for strategy in Strategy::ALL {
                let (resp, ledger) = run_strategy(&items, &db, strategy, &spec, &params, &options, PCIE5_BW).unwrap();
                assert_eq!(resp, single, "{strategy:?} n={n} {source:?}");
                assert_eq!(ledger, comm_bytes(strategy, &config, batch, n, &params, source));
            }
        }
    }
}
