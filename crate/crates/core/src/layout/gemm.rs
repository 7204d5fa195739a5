use rayon::prelude::*;

use super::tensor::{Layout, Tensor3};
use crate::error::{invalid_arg, invalid_config, Result};
use crate::ring::{Modulus, RnsBasis};

/// Default scratch capacity, standing in for per-block shared memory.
pub const DEFAULT_SCRATCH_BUDGET: usize = 96 * 1024;

/// GEMM tile extents. `bp` batches independent points into one work unit
/// (the p-major engine only).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileConfig {
    pub bm: usize,
    pub bn: usize,
    pub bk: usize,
    pub bp: Option<usize>,
}

impl TileConfig {
    pub fn new(bm: usize, bn: usize, bk: usize, bp: Option<usize>) -> Self {
        TileConfig { bm, bn, bk, bp }
    }

    /// `(16, 16, 8)` with `Bp = 32`, the largest tile that fits next to p-coalescing.
    pub fn pmajor_baseline() -> Self {
        TileConfig::new(16, 16, 8, Some(32))
    }

    /// `(64, 64, 32)`, the tile the transposed layout affords.
    pub fn transposed_default() -> Self {
        TileConfig::new(64, 64, 32, None)
    }

    /// Scratch bytes for one work unit: `(bm·bk + bn·bk)·bp·4`.
    pub fn scratch_footprint(&self) -> usize {
        (self.bm * self.bk + self.bn * self.bk) * self.bp.unwrap_or(1) * 4
    }

    /// Accumulator entries held per work unit: `bm·bn·bp`.
    pub fn accumulator_entries(&self) -> usize {
        self.bm * self.bn * self.bp.unwrap_or(1)
    }

    /// Relative global-memory traffic, `1 / bm` (input reuse grows with the
    /// square tile edge).
    pub fn modeled_traffic(&self) -> f64 {
        1.0 / self.bm as f64
    }

    /// Checks the scratch budget and that every extent divides its dimension.
    pub fn validate(&self, p: usize, m: usize, n: usize, k: usize, budget: usize) -> Result<()> {
        if self.bm == 0 || self.bn == 0 || self.bk == 0 || self.bp == Some(0) {
            return invalid_config("tile extents must be positive");
        }
        let fp = self.scratch_footprint();
        if fp > budget {
            return invalid_config(format!("tile {self:?} needs {fp} scratch bytes, budget is {budget}"));
        }
        let bp = self.bp.unwrap_or(1);
        for (name, t, d) in [("bm", self.bm, m), ("bn", self.bn, n), ("bk", self.bk, k), ("bp", bp, p)] {
            if d % t != 0 {
                return invalid_config(format!("{name} = {t} does not divide extent {d}"));
            }
        }
        Ok(())
    }

    /// Shrinks each extent to the largest divisor of its dimension not above
    /// the requested value.
    pub fn clamp_to(&self, p: usize, m: usize, n: usize, k: usize) -> TileConfig {
        TileConfig {
            bm: largest_divisor_at_most(m, self.bm),
            bn: largest_divisor_at_most(n, self.bn),
            bk: largest_divisor_at_most(k, self.bk),
            bp: self.bp.map(|bp| largest_divisor_at_most(p, bp)),
        }
    }
}

fn largest_divisor_at_most(d: usize, cap: usize) -> usize {
    (1..=cap.min(d).max(1)).rev().find(|t| d.is_multiple_of(*t)).unwrap_or(1)
}

/// Resource ratios of tile `a` over tile `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResourceRatios {
    pub scratch: f64,
    pub accumulator: f64,
    pub traffic: f64,
}

pub fn scratch_footprint(tile: &TileConfig) -> usize {
    tile.scratch_footprint()
}

pub fn traffic_ratio(a: &TileConfig, b: &TileConfig) -> ResourceRatios {
    ResourceRatios {
        scratch: a.scratch_footprint() as f64 / b.scratch_footprint() as f64,
        accumulator: a.accumulator_entries() as f64 / b.accumulator_entries() as f64,
        traffic: a.modeled_traffic() / b.modeled_traffic(),
    }
}

/// Problem extents `(P, M, N, K)` of `out[p,m,n] = sum_k a[p,m,k]·b[p,k,n]`.
pub(crate) fn check_shapes(a: &Tensor3, b: &Tensor3, basis: &RnsBasis) -> Result<[usize; 4]> {
    let [pa, m, k] = a.dims();
    let [pb, kb, n] = b.dims();
    if pa != pb || k != kb {
        return invalid_arg(format!("GEMM shapes {:?} x {:?} are incompatible", a.dims(), b.dims()));
    }
    if pa != basis.len() * basis.degree() {
        return invalid_arg(format!(
            "point extent {pa} is not limbs x degree = {}",
            basis.len() * basis.degree()
        ));
    }
    Ok([pa, m, n, k])
}

#[inline]
pub(crate) fn point_modulus(basis: &RnsBasis, p: usize) -> &Modulus {
    basis.modulus(p / basis.degree())
}

/// Triple loop per point; the oracle for the tiled engines. Output is p-major.
pub fn gemm_naive(a: &Tensor3, b: &Tensor3, basis: &RnsBasis) -> Result<Tensor3> {
    let [np, m, n, k] = check_shapes(a, b, basis)?;
    let mut out = Tensor3::zeros(np, m, n, Layout::PMajor);
    for p in 0..np {
        let q = point_modulus(basis, p);
        for mi in 0..m {
            for ni in 0..n {
                let mut acc = 0u32;
                for ki in 0..k {
                    acc = q.add(acc, q.mul(a.get(p, mi, ki), b.get(p, ki, ni)));
                }
                out.set(p, mi, ni, acc);
            }
        }
    }
    Ok(out)
}

/// Tiled GEMM over p-major inputs. Each work unit owns a `bm × bn` output
/// tile for `bp` points and walks `k` in `bk` steps through a scratch copy of
/// both input tiles.
pub fn gemm_pmajor_tiled(a: &Tensor3, b: &Tensor3, basis: &RnsBasis, tile: &TileConfig) -> Result<Tensor3> {
    gemm_pmajor_tiled_with_budget(a, b, basis, tile, DEFAULT_SCRATCH_BUDGET)
}

pub fn gemm_pmajor_tiled_with_budget(
    a: &Tensor3,
    b: &Tensor3,
    basis: &RnsBasis,
    tile: &TileConfig,
    budget: usize,
) -> Result<Tensor3> {
    let [np, m, n, k] = check_shapes(a, b, basis)?;
    if a.layout() != Layout::PMajor || b.layout() != Layout::PMajor {
        return invalid_arg("gemm_pmajor_tiled expects p-major inputs");
    }
    tile.validate(np, m, n, k, budget)?;
    let (bm, bn, bk) = (tile.bm, tile.bn, tile.bk);
    let bp = tile.bp.unwrap_or(1);
    let ad = a.data();
    let bd = b.data();
    let mut out = Tensor3::zeros(np, m, n, Layout::PMajor);
    // one m-tile of output rows is bm·n·np contiguous words
    out.data_mut()
        .par_chunks_mut(bm * n * np)
        .enumerate()
        .for_each(|(mt, out_rows)| {
            let m0 = mt * bm;
            let mut sa = vec![0u32; bm * bk * bp];
            let mut sb = vec![0u32; bk * bn * bp];
            let mut acc = vec![0u128; bm * bn * bp];
            for n0 in (0..n).step_by(bn) {
                for p0 in (0..np).step_by(bp) {
                    acc.iter_mut().for_each(|x| *x = 0);
                    for k0 in (0..k).step_by(bk) {
                        for i in 0..bm {
                            for kk in 0..bk {
                                let src = ((m0 + i) * k + k0 + kk) * np + p0;
                                sa[(i * bk + kk) * bp..(i * bk + kk + 1) * bp].copy_from_slice(&ad[src..src + bp]);
                            }
                        }
                        for kk in 0..bk {
                            for j in 0..bn {
                                let src = ((k0 + kk) * n + n0 + j) * np + p0;
                                sb[(kk * bn + j) * bp..(kk * bn + j + 1) * bp].copy_from_slice(&bd[src..src + bp]);
                            }
                        }
                        for i in 0..bm {
                            for kk in 0..bk {
                                let av = &sa[(i * bk + kk) * bp..(i * bk + kk + 1) * bp];
                                for j in 0..bn {
                                    let bv = &sb[(kk * bn + j) * bp..(kk * bn + j + 1) * bp];
                                    let cell = &mut acc[(i * bn + j) * bp..(i * bn + j + 1) * bp];
                                    for ((c, &x), &y) in cell.iter_mut().zip(av).zip(bv) {
                                        *c += x as u64 as u128 * y as u128;
                                    }
                                }
                            }
                        }
                    }
                    for i in 0..bm {
                        for j in 0..bn {
                            let cell = &acc[(i * bn + j) * bp..(i * bn + j + 1) * bp];
                            let dst = (i * n + n0 + j) * np + p0;
                            for (pp, &c) in cell.iter().enumerate() {
                                out_rows[dst + pp] = point_modulus(basis, p0 + pp).reduce_u128(c);
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// One point's GEMM in transposed storage: `a` is `[k][m]`, `b` is `[n][k]`,
/// `out` is `[n][m]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_point_transposed(
    a: &[u32],
    b: &[u32],
    out: &mut [u32],
    m: usize,
    n: usize,
    k: usize,
    q: &Modulus,
    tile: &TileConfig,
) {
    let (bm, bn, bk) = (tile.bm, tile.bn, tile.bk);
    let mut sa = vec![0u32; bk * bm];
    let mut sb = vec![0u32; bn * bk];
    let mut acc = vec![0u128; bn * bm];
    for n0 in (0..n).step_by(bn) {
        for m0 in (0..m).step_by(bm) {
            acc.iter_mut().for_each(|x| *x = 0);
            for k0 in (0..k).step_by(bk) {
                for kk in 0..bk {
                    let src = (k0 + kk) * m + m0;
                    sa[kk * bm..(kk + 1) * bm].copy_from_slice(&a[src..src + bm]);
                }
                for j in 0..bn {
                    let src = (n0 + j) * k + k0;
                    sb[j * bk..(j + 1) * bk].copy_from_slice(&b[src..src + bk]);
                }
                for j in 0..bn {
                    let row = &mut acc[j * bm..(j + 1) * bm];
                    for kk in 0..bk {
                        let y = sb[j * bk + kk] as u64 as u128;
                        for (c, &x) in row.iter_mut().zip(&sa[kk * bm..(kk + 1) * bm]) {
                            *c += x as u128 * y;
                        }
                    }
                }
            }
            for j in 0..bn {
                let dst = (n0 + j) * m + m0;
                for (i, &c) in acc[j * bm..(j + 1) * bm].iter().enumerate() {
                    out[dst + i] = q.reduce_u128(c);
                }
            }
        }
    }
}

/// Tiled GEMM over transposed inputs, independent per point. Output is transposed.
pub fn gemm_transposed_tiled(a: &Tensor3, b: &Tensor3, basis: &RnsBasis, tile: &TileConfig) -> Result<Tensor3> {
    gemm_transposed_tiled_with_budget(a, b, basis, tile, DEFAULT_SCRATCH_BUDGET)
}

pub fn gemm_transposed_tiled_with_budget(
    a: &Tensor3,
    b: &Tensor3,
    basis: &RnsBasis,
    tile: &TileConfig,
    budget: usize,
) -> Result<Tensor3> {
    let [np, m, n, k] = check_shapes(a, b, basis)?;
    if a.layout() != Layout::Transposed || b.layout() != Layout::Transposed {
        return invalid_arg("gemm_transposed_tiled expects transposed inputs");
    }
    let tile = TileConfig { bp: None, ..*tile };
    tile.validate(np, m, n, k, budget)?;
    let ad = a.data();
    let bd = b.data();
    let mut out = Tensor3::zeros(np, m, n, Layout::Transposed);
    out.data_mut()
        .par_chunks_mut(m * n)
        .enumerate()
        .for_each(|(p, dst)| {
            gemm_point_transposed(
                &ad[p * k * m..(p + 1) * k * m],
                &bd[p * n * k..(p + 1) * n * k],
                dst,
                m,
                n,
                k,
                point_modulus(basis, p),
                &tile,
            );
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_and_transposed_tile_ratios() {
        let r = traffic_ratio(&TileConfig::pmajor_baseline(), &TileConfig::transposed_default());
        assert_eq!((r.scratch, r.accumulator, r.traffic), (2.0, 2.0, 4.0));
        let same = traffic_ratio(&TileConfig::pmajor_baseline(), &TileConfig::pmajor_baseline());
        assert_eq!((same.scratch, same.accumulator, same.traffic), (1.0, 1.0, 1.0));
    }

    #[test]
    fn budget_and_divisibility() {
        let t = TileConfig::new(64, 64, 64, Some(8));
        assert!(t.validate(64, 64, 64, 64, DEFAULT_SCRATCH_BUDGET).is_err());
        assert!(TileConfig::pmajor_baseline().validate(64, 16, 16, 8, DEFAULT_SCRATCH_BUDGET).is_ok());
        assert!(TileConfig::pmajor_baseline().validate(64, 12, 16, 8, DEFAULT_SCRATCH_BUDGET).is_err());
        let c = TileConfig::transposed_default().clamp_to(64, 6, 16, 16);
        assert_eq!((c.bm, c.bn, c.bk), (6, 16, 16));
    }

    #[test]
    fn doubling_edge_halves_traffic() {
        let a = TileConfig::new(16, 16, 8, None);
        let b = TileConfig::new(32, 32, 8, None);
        assert_eq!(b.modeled_traffic() / a.modeled_traffic(), 0.5);
    }
}
