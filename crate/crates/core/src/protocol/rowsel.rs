use std::sync::Arc;

use super::database::EncodedDatabase;
use crate::error::{invalid_arg, Result};
use crate::he::BfvCiphertext;
use crate::layout::{
    gemm_naive, gemm_pmajor_tiled, gemm_transposed_tiled, pipeline_rowsel, transpose_ct_tensor, Layout,
    PipelineConfig, PipelineTrace, Tensor3, TileConfig,
};
use crate::ring::{Domain, RnsBasis, RnsPoly};

/// GEMM backend for RowSel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowSelEngine {
    Naive,
    PMajorTiled(TileConfig),
    TransposedTiled(TileConfig),
    Pipelined(PipelineConfig),
}

impl Default for RowSelEngine {
    fn default() -> Self {
        RowSelEngine::TransposedTiled(TileConfig::transposed_default())
    }
}

/// Query tensor `(P, 2·batch, D0)`, p-major: axis `m = 2·query + part` with
/// part 0 = `a`, 1 = `b`.
pub fn query_tensor(rows: &[&[BfvCiphertext]], basis: &RnsBasis) -> Result<Tensor3> {
    let d0 = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != d0) || d0 == 0 {
        return invalid_arg("every query needs the same non-zero number of row ciphertexts");
    }
    let np = basis.len() * basis.degree();
    let mut data = Vec::with_capacity(np * 2 * rows.len() * d0);
    for cts in rows {
        for part in 0..2 {
            for ct in cts.iter() {
                let poly = if part == 0 { ct.a() } else { ct.b() };
                data.extend_from_slice(poly.data());
            }
        }
    }
    Tensor3::from_data([np, 2 * rows.len(), d0], Layout::PMajor, data)
}

/// Splits a p-major `(P, 2·batch, D1)` output back into ciphertexts.
pub fn split_output(out: &Tensor3, basis: &Arc<RnsBasis>) -> Result<Vec<Vec<BfvCiphertext>>> {
    let [_, m, n] = out.dims();
    let out = if out.layout() == Layout::PMajor {
        std::borrow::Cow::Borrowed(out)
    } else {
        std::borrow::Cow::Owned(transpose_ct_tensor(out, Layout::PMajor))
    };
    (0..m / 2)
        .map(|q| {
            (0..n)
                .map(|col| {
                    let fiber = |mm| {
                        RnsPoly::from_data_unchecked(basis, out.fiber(mm, col).expect("p-major").to_vec(), Domain::Ntt)
                    };
                    BfvCiphertext::new(fiber(2 * q), fiber(2 * q + 1))
                })
                .collect()
        })
        .collect()
}

/// Runs the RowSel GEMM on a prepared query tensor.
pub fn rowsel_tensor(a: &Tensor3, db: &EncodedDatabase, engine: &RowSelEngine) -> Result<(Tensor3, Option<PipelineTrace>)> {
    let basis = db.basis();
    let [np, m, k] = a.dims();
    let n = db.config().d1;
    if k != db.config().d0 {
        return invalid_arg(format!("query has {k} row ciphertexts, DB has {} rows", db.config().d0));
    }
    let in_layout = |want: Layout| {
        if db.layout() == want {
            std::borrow::Cow::Borrowed(db.tensor())
        } else {
            std::borrow::Cow::Owned(transpose_ct_tensor(db.tensor(), want))
        }
    };
    Ok(match engine {
        RowSelEngine::Naive => (gemm_naive(a, db.tensor(), basis)?, None),
        RowSelEngine::PMajorTiled(tile) => {
            let tile = tile.clamp_to(np, m, n, k);
            let b = in_layout(Layout::PMajor);
            (gemm_pmajor_tiled(a, &b, basis, &tile)?, None)
        }
        RowSelEngine::TransposedTiled(tile) => {
            let tile = tile.clamp_to(np, m, n, k);
            let b = in_layout(Layout::Transposed);
            let at = transpose_ct_tensor(a, Layout::Transposed);
            let out = gemm_transposed_tiled(&at, &b, basis, &tile)?;
            (transpose_ct_tensor(&out, Layout::PMajor), None)
        }
        RowSelEngine::Pipelined(cfg) => {
            let (out, trace) = pipeline_rowsel(a, db.tensor(), basis, cfg)?;
            (out, Some(trace))
        }
    })
}

/// Row selection for a batch: for every query, `D1` ciphertexts where column
/// `n` is `sum_k row_ct[k] ⊙ DB[k][n]`.
pub fn row_select(
    rows: &[&[BfvCiphertext]],
    db: &EncodedDatabase,
    engine: &RowSelEngine,
) -> Result<Vec<Vec<BfvCiphertext>>> {
    let a = query_tensor(rows, db.basis())?;
    let (out, _) = rowsel_tensor(&a, db, engine)?;
    split_output(&out, db.basis())
}
