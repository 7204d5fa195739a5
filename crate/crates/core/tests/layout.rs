use gpir::layout::{
    gemm_naive, gemm_pmajor_tiled, gemm_transposed_tiled, pipeline_rowsel, traffic_ratio, transpose_ct_tensor,
    Layout, PipelineConfig, Tensor3, TileConfig,
};
use gpir::ring::RnsBasis;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn basis(n: usize) -> RnsBasis {
    RnsBasis::generate(n, 4, 27).unwrap()
}

fn random_tensor(dims: [usize; 3], basis: &RnsBasis, layout: Layout, rng: &mut impl Rng) -> Tensor3 {
    let n = basis.degree();
    Tensor3::from_fn(dims, layout, |p, _, _| rng.gen_range(0..basis.modulus(p / n).value()))
}

fn pmajor(t: &Tensor3) -> Tensor3 {
    transpose_ct_tensor(t, Layout::PMajor)
}

/// Exact per-point product in 128-bit arithmetic.
fn wide_oracle(a: &Tensor3, b: &Tensor3, basis: &RnsBasis) -> Tensor3 {
    let [np, m, k] = a.dims();
    let n = b.dims()[2];
    Tensor3::from_fn([np, m, n], Layout::PMajor, |p, i, j| {
        let q = basis.modulus(p / basis.degree()).value() as u128;
        let s: u128 = (0..k).map(|x| a.get(p, i, x) as u128 * b.get(p, x, j) as u128).sum();
        (s % q) as u32
    })
}

#[test]
fn transpose_is_an_invertible_index_preserving_permutation() {
    let hand = Tensor3::from_data([2, 2, 2], Layout::PMajor, (0..8).collect()).unwrap();
    let t = transpose_ct_tensor(&hand, Layout::Transposed);
    assert_eq!(t.data(), &[0, 4, 2, 6, 1, 5, 3, 7]);
    let b = basis(16);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let src = random_tensor([64, 5, 3], &b, Layout::PMajor, &mut rng);
    let t = transpose_ct_tensor(&src, Layout::Transposed);
    for p in 0..64 {
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(src.get(p, i, j), t.get(p, i, j));
            }
        }
    }
    let mut x = src.data().to_vec();
    let mut y = t.data().to_vec();
    x.sort_unstable();
    y.sort_unstable();
    assert_eq!(x, y);
    assert_eq!(transpose_ct_tensor(&t, Layout::PMajor), src);
}

#[test]
fn identity_and_one_hot_products() {
    let b = basis(16);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let a = random_tensor([64, 16, 16], &b, Layout::PMajor, &mut rng);
    let id = Tensor3::from_fn([64, 16, 16], Layout::PMajor, |_, i, j| (i == j) as u32);
    assert_eq!(gemm_naive(&a, &id, &b).unwrap(), a);
    assert_eq!(gemm_pmajor_tiled(&a, &id, &b, &TileConfig::pmajor_baseline()).unwrap(), a);
    let at = transpose_ct_tensor(&a, Layout::Transposed);
    let idt = transpose_ct_tensor(&id, Layout::Transposed);
    let tile = TileConfig::new(16, 16, 16, None);
    assert_eq!(pmajor(&gemm_transposed_tiled(&at, &idt, &b, &tile).unwrap()), a);

    let db = random_tensor([64, 16, 8], &b, Layout::PMajor, &mut rng);
    let sel = Tensor3::from_fn([64, 2, 16], Layout::PMajor, |_, i, k| (k == 5 + i) as u32);
    let out = gemm_naive(&sel, &db, &b).unwrap();
    for p in 0..64 {
        for i in 0..2 {
            for j in 0..8 {
                assert_eq!(out.get(p, i, j), db.get(p, 5 + i, j));
            }
        }
    }
    let tiny = basis(2);
    let a = Tensor3::from_data([8, 1, 1], Layout::PMajor, (1..=8).collect()).unwrap();
    let c = Tensor3::from_data([8, 1, 1], Layout::PMajor, vec![3; 8]).unwrap();
    let want: Vec<u32> = (1..=8).map(|x| 3 * x).collect();
    for tile in [TileConfig::new(1, 1, 1, Some(1)), TileConfig::new(1, 1, 1, Some(8))] {
        assert_eq!(gemm_pmajor_tiled(&a, &c, &tiny, &tile).unwrap().data(), &want[..]);
    }
}

#[test]
fn paper_tiles_match_naive() {
    let b = basis(16);
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let a = random_tensor([64, 16, 16], &b, Layout::PMajor, &mut rng);
    let c = random_tensor([64, 16, 16], &b, Layout::PMajor, &mut rng);
    let want = wide_oracle(&a, &c, &b);
    assert_eq!(gemm_naive(&a, &c, &b).unwrap(), want);
    assert_eq!(gemm_pmajor_tiled(&a, &c, &b, &TileConfig::pmajor_baseline()).unwrap(), want);

    let a = random_tensor([64, 64, 32], &b, Layout::PMajor, &mut rng);
    let c = random_tensor([64, 32, 64], &b, Layout::PMajor, &mut rng);
    let want = wide_oracle(&a, &c, &b);
    let at = transpose_ct_tensor(&a, Layout::Transposed);
    let ct = transpose_ct_tensor(&c, Layout::Transposed);
    let got = gemm_transposed_tiled(&at, &ct, &b, &TileConfig::transposed_default()).unwrap();
    assert_eq!(pmajor(&got), want);
}

#[test]
fn ten_legal_tiles_agree_with_naive() {
    let b = basis(16);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let a = random_tensor([64, 16, 16], &b, Layout::PMajor, &mut rng);
    let c = random_tensor([64, 16, 16], &b, Layout::PMajor, &mut rng);
    let want = gemm_naive(&a, &c, &b).unwrap();
    let at = transpose_ct_tensor(&a, Layout::Transposed);
    let ct = transpose_ct_tensor(&c, Layout::Transposed);
    let tiles = [
        TileConfig::new(1, 1, 1, Some(1)),
        TileConfig::new(2, 4, 2, Some(2)),
        TileConfig::new(4, 4, 4, Some(8)),
        TileConfig::new(8, 8, 8, Some(16)),
        TileConfig::new(16, 16, 8, Some(32)),
        TileConfig::new(16, 8, 4, Some(64)),
        TileConfig::new(4, 16, 2, Some(64)),
        TileConfig::new(8, 2, 16, Some(4)),
        TileConfig::new(16, 1, 16, None),
        TileConfig::new(1, 16, 1, Some(1)),
    ];
    for tile in tiles {
        assert_eq!(gemm_pmajor_tiled(&a, &c, &b, &tile).unwrap(), want, "{tile:?}");
        assert_eq!(pmajor(&gemm_transposed_tiled(&at, &ct, &b, &tile).unwrap()), want, "{tile:?}");
    }
    assert!(gemm_pmajor_tiled(&a, &c, &b, &TileConfig::new(16, 16, 16, Some(64))).is_err());
    assert!(gemm_transposed_tiled(&a, &c, &b, &TileConfig::new(16, 16, 16, None)).is_err());
}

#[test]
fn resource_ratios() {
    let r = traffic_ratio(&TileConfig::transposed_default(), &TileConfig::pmajor_baseline());
    assert_eq!((r.scratch, r.accumulator, r.traffic), (0.5, 0.5, 0.25));
    let r = traffic_ratio(&TileConfig::pmajor_baseline(), &TileConfig::transposed_default());
    assert_eq!((r.scratch, r.accumulator, r.traffic), (2.0, 2.0, 4.0));
    let t = TileConfig::new(32, 32, 16, None);
    let r = traffic_ratio(&t, &t);
    assert_eq!((r.scratch, r.accumulator, r.traffic), (1.0, 1.0, 1.0));
    let r = traffic_ratio(&TileConfig::new(64, 64, 16, None), &t);
    assert_eq!(r.traffic, 0.5);
}

#[test]
fn pipeline_sweep_matches_serial() {
    let b = basis(64);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let a = random_tensor([256, 4, 8], &b, Layout::PMajor, &mut rng);
    let db = random_tensor([256, 8, 4], &b, Layout::Transposed, &mut rng);
    let want = gemm_naive(&a, &db, &b).unwrap();
    for lanes in [1, 2, 4] {
        for n_chunks in [1, 4, 8] {
            for workers in [1, 2, 4] {
                let cfg = PipelineConfig {
                    lanes,
                    n_chunks,
                    workers,
                    tile: TileConfig::transposed_default(),
                };
                let (out, trace) = pipeline_rowsel(&a, &db, &b, &cfg).unwrap();
                assert_eq!(out, want, "lanes={lanes} chunks={n_chunks} workers={workers}");
                assert_eq!(trace.records.len(), 3 * 4 * n_chunks);
                assert!(trace.dependencies_respected());
                if workers == 1 {
                    assert!(trace.is_serial());
                }
            }
        }
    }
    let bad = PipelineConfig {
        n_chunks: 3,
        ..PipelineConfig::default()
    };
    assert!(pipeline_rowsel(&a, &db, &b, &bad).is_err());
}

#[test]
fn pipeline_overlaps_transpose_with_gemm() {
    let b = basis(4096);
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let a = random_tensor([4 * 4096, 32, 32], &b, Layout::PMajor, &mut rng);
    let db = random_tensor([4 * 4096, 32, 8], &b, Layout::Transposed, &mut rng);
    let serial = PipelineConfig {
        lanes: 1,
        n_chunks: 1,
        workers: 1,
        tile: TileConfig::transposed_default(),
    };
    let (want, trace) = pipeline_rowsel(&a, &db, &b, &serial).unwrap();
    assert!(trace.is_serial());
    let cfg = PipelineConfig {
        lanes: 4,
        n_chunks: 8,
        workers: 4,
        tile: TileConfig::transposed_default(),
    };
    let mut overlapped = false;
    for _ in 0..3 {
        let (out, trace) = pipeline_rowsel(&a, &db, &b, &cfg).unwrap();
        assert_eq!(out, want);
        assert!(trace.dependencies_respected());
        if trace.has_transpose_gemm_overlap() {
            overlapped = true;
            break;
        }
    }
    assert!(overlapped, "no transpose/gemm overlap in three runs");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn engines_are_bit_identical(seed in any::<u64>(), m in 1usize..5, k in 1usize..5, n in 1usize..5) {
        let b = basis(8);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let a = random_tensor([32, 2 * m, 2 * k], &b, Layout::PMajor, &mut rng);
        let c = random_tensor([32, 2 * k, 2 * n], &b, Layout::PMajor, &mut rng);
        let want = wide_oracle(&a, &c, &b);
        prop_assert_eq!(&gemm_naive(&a, &c, &b).unwrap(), &want);
        let tile = TileConfig::new(2, 2, 2, Some(8));
        prop_assert_eq!(&gemm_pmajor_tiled(&a, &c, &b, &tile).unwrap(), &want);
        let at = transpose_ct_tensor(&a, Layout::Transposed);
        let ct = transpose_ct_tensor(&c, Layout::Transposed);
        prop_assert_eq!(&pmajor(&gemm_transposed_tiled(&at, &ct, &b, &tile).unwrap()), &want);
    }
}
