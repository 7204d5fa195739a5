use gpir::he::{encrypt, gen_rgsw, HeParams, SecretKey};
use gpir::planner::{
    arithmetic_intensity, build_plan, choose_mode, execute_stage_fused, execute_stage_oplevel, expand_batch_with,
    roofline_report, tournament_batch_with, working_set, Bound, ExecMode, ExecPolicy, HardwareModel, Phase,
    RooflinePhase, StageInput, StageStats, TournamentNode, TransientMeter,
};
use gpir::protocol::{client_gen_query, ClientKeys, DbConfig, DEFAULT_RECORD_BYTES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const MIB: u64 = 1024 * 1024;

fn grid(d0: usize, d1: usize) -> DbConfig {
    DbConfig::new(d0, d1, DEFAULT_RECORD_BYTES).unwrap()
}

#[test]
fn working_set_examples() {
    let params = HeParams::default_params();
    let big = grid(256, 512);
    assert_eq!(working_set(Phase::ColTor, 0, 32, &big, &params), 5_368_709_120);
    assert_eq!(working_set(Phase::ExpandQuery, 0, 1, &big, &params), 5 * 64 * 1024);
    for b in [1, 2, 7, 32] {
        for phase in [Phase::ExpandQuery, Phase::ColTor] {
            assert_eq!(
                working_set(phase, 1, 2 * b, &big, &params),
                2 * working_set(phase, 1, b, &big, &params)
            );
        }
    }
}

#[test]
fn mode_threshold() {
    let hw = HardwareModel::default();
    assert_eq!(choose_mode(50 * 1_000_000, &hw), ExecMode::OperationLevel);
    assert_eq!(choose_mode(5_368_709_120, &hw), ExecMode::StageLevel);
    assert_eq!(choose_mode(96 * MIB, &hw), ExecMode::StageLevel);
    assert_eq!(choose_mode(96 * MIB - 1, &hw), ExecMode::OperationLevel);
}

#[test]
fn plans_follow_the_boundary_law() {
    let params = HeParams::default_params();
    let hw = HardwareModel::default();
    let tiny = build_plan(&grid(16, 16), 1, &params, &hw);
    assert!(tiny.stages.iter().all(|s| s.mode == ExecMode::OperationLevel));
    for batch in [32, 256, 512] {
        let plan = build_plan(&grid(256, 512), batch, &params, &hw);
        assert_eq!(plan.mode(Phase::ColTor, 0), Some(ExecMode::StageLevel), "batch {batch}");
        assert!(plan.is_monotone());
        for s in &plan.stages {
            assert_eq!(s.mode == ExecMode::StageLevel, s.working_set >= hw.l2_bytes);
        }
        assert_eq!(plan, build_plan(&grid(256, 512), batch, &params, &hw));
    }
}

#[test]
fn smaller_cache_moves_the_transition_earlier() {
    let params = HeParams::default_params();
    let config = grid(256, 512);
    let mut last = usize::MAX;
    for l2 in [1024 * MIB, 256 * MIB, 96 * MIB, 32 * MIB, 4 * MIB, MIB, 64 * 1024] {
        let hw = HardwareModel {
            l2_bytes: l2,
            ..HardwareModel::default()
        };
        let t = build_plan(&config, 32, &params, &hw).expand_transition.unwrap_or(usize::MAX);
        assert!(t <= last, "l2 {l2}: transition {t} after {last}");
        last = t;
    }
    assert_eq!(last, 0);
}

fn assert_fused_peak_lower(op: &[StageStats], fused: &[StageStats]) {
    assert_eq!(op.len(), fused.len());
    for (o, f) in op.iter().zip(fused) {
        assert_eq!((o.phase, o.stage, o.nodes), (f.phase, f.stage, f.nodes));
        assert!(
            f.peak_transient_bytes < o.peak_transient_bytes,
            "{:?} stage {}: fused {} vs op-level {}",
            o.phase,
            o.stage,
            f.peak_transient_bytes,
            o.peak_transient_bytes
        );
    }
}

#[test]
fn execution_paths_agree_and_fused_peaks_lower() {
    let params = HeParams::default_params();
    let config = grid(16, 16);
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let keys: Vec<_> = (0..2)
        .map(|_| ClientKeys::generate(&params, &config, &mut rng).unwrap())
        .collect();
    let queries: Vec<_> = keys
        .iter()
        .map(|k| client_gen_query(&k.sk, 0, rng.gen_range(0..16), rng.gen_range(0..16), &config, &params, &mut rng).unwrap())
        .collect();
    let pairs: Vec<_> = queries.iter().zip(&keys).map(|(q, k)| (q, &k.public)).collect();
    let hybrid = ExecPolicy::Hybrid(build_plan(&config, 2, &params, &HardwareModel {
        l2_bytes: 2 * MIB,
        ..HardwareModel::default()
    }));
    let mut runs = Vec::new();
    for policy in [ExecPolicy::AllOperationLevel, ExecPolicy::AllStageLevel, hybrid] {
        let mut stats = Vec::new();
        let out = expand_batch_with(&pairs, &config, &params, &policy, &mut stats).unwrap();
        runs.push((out, stats));
    }
    assert_eq!(runs[0].0, runs[1].0);
    assert_eq!(runs[0].0, runs[2].0);
    assert!(runs[2].1.iter().any(|s| s.mode == ExecMode::OperationLevel));
    assert!(runs[2].1.iter().any(|s| s.mode == ExecMode::StageLevel));
    assert_fused_peak_lower(&runs[0].1, &runs[1].1);

    let sk = SecretKey::generate(&params, &mut rng);
    let cts: Vec<Vec<_>> = (0..2)
        .map(|_| {
            (0..8)
                .map(|_| {
                    let m: Vec<u64> = (0..params.degree()).map(|_| rng.gen_range(0..params.plain_modulus())).collect();
                    encrypt(&sk, &m, &params, &mut rng).unwrap()
                })
                .collect()
        })
        .collect();
    let rgsws: Vec<Vec<_>> = (0..2)
        .map(|_| (0..3).map(|_| gen_rgsw(&sk, rng.gen(), &params, &mut rng).unwrap()).collect())
        .collect();
    let refs: Vec<&[_]> = rgsws.iter().map(|r| r.as_slice()).collect();
    let mut op_stats = Vec::new();
    let mut fused_stats = Vec::new();
    let op = tournament_batch_with(cts.clone(), &refs, 0, &params, &ExecPolicy::AllOperationLevel, &mut op_stats).unwrap();
    let fused = tournament_batch_with(cts.clone(), &refs, 0, &params, &ExecPolicy::AllStageLevel, &mut fused_stats).unwrap();
    assert_eq!(op, fused);
    assert_fused_peak_lower(&op_stats, &fused_stats);

    let node = || {
        StageInput::Tournament(vec![TournamentNode {
            even: &cts[0][0],
            odd: &cts[0][1],
            rgsw: &rgsws[0][0],
        }])
    };
    let (m_op, m_fused) = (TransientMeter::new(), TransientMeter::new());
    assert_eq!(
        execute_stage_oplevel(node(), &params, &m_op).unwrap(),
        execute_stage_fused(node(), &params, &m_fused).unwrap()
    );
    assert!(m_fused.peak() < m_op.peak());
}

#[test]
fn rowsel_intensity() {
    let params = HeParams::default_params();
    let hw = HardwareModel::default();
    let config = grid(256, 512);
    assert_eq!(config.raw_bytes(), 2 << 30);
    let mut b = 1;
    while b < 1024 {
        let lo = arithmetic_intensity(RooflinePhase::RowSel, &config, b, &params);
        let hi = arithmetic_intensity(RooflinePhase::RowSel, &config, 2 * b, &params);
        assert!(hi > lo, "batch {b}: {hi} <= {lo}");
        b *= 2;
    }
    let ai = arithmetic_intensity(RooflinePhase::RowSel, &config, 32, &params);
    assert!(ai > 13.8 / 2.0 && ai < 13.8 * 2.0, "AI {ai}");
    let one = arithmetic_intensity(RooflinePhase::RowSel, &config, 1, &params);
    assert!(one < hw.ridge_point());
    let report = roofline_report(&hw, &config, 1, &params);
    let row = report.rows.iter().find(|r| r.phase == RooflinePhase::RowSel).unwrap();
    assert_eq!(row.bound, Bound::Memory);
}
