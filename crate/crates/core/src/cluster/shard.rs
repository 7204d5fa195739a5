use crate::error::{invalid_arg, Result};
use crate::layout::Tensor3;
use crate::protocol::{DbConfig, EncodedDatabase};

/// Column ranges of `D1`, one per worker, in column order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShardSpec {
    d1: usize,
    ranges: Vec<(usize, usize)>,
}

impl ShardSpec {
    /// Ranges must tile `[0, d1)` in order, each with power-of-two length.
    pub fn new(d1: usize, ranges: Vec<(usize, usize)>) -> Result<Self> {
        if ranges.is_empty() {
            return invalid_arg("shard spec needs at least one worker");
        }
        let mut next = 0;
        for &(lo, hi) in &ranges {
            if lo != next || hi <= lo {
                return invalid_arg(format!("range [{lo}, {hi}) does not continue the partition at {next}"));
            }
            if !(hi - lo).is_power_of_two() {
                return invalid_arg(format!("range [{lo}, {hi}) length is not a power of two"));
            }
            next = hi;
        }
        if next != d1 {
            return invalid_arg(format!("ranges cover [0, {next}) but D1 = {d1}"));
        }
        Ok(ShardSpec { d1, ranges })
    }

    /// `n` equal slices; `n` must be a power of two not above `d1`.
    pub fn even(d1: usize, n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() || n > d1 {
            return invalid_arg(format!("cannot split D1 = {d1} into {n} equal power-of-two shards"));
        }
        let w = d1 / n;
        Self::new(d1, (0..n).map(|i| (i * w, (i + 1) * w)).collect())
    }

    pub fn n_workers(&self) -> usize {
        self.ranges.len()
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn ranges(&self) -> &[(usize, usize)] {
        &self.ranges
    }

    pub fn is_uniform(&self) -> bool {
        let w = self.ranges[0].1 - self.ranges[0].0;
        self.ranges.iter().all(|&(lo, hi)| hi - lo == w)
    }

    /// Column bits resolved inside a shard (uniform specs only).
    pub fn local_bits(&self) -> usize {
        (self.ranges[0].1 - self.ranges[0].0).trailing_zeros() as usize
    }
}

/// Worker-local column slices of `db`.
pub fn shard_database(db: &EncodedDatabase, spec: &ShardSpec) -> Result<Vec<EncodedDatabase>> {
    if spec.d1() != db.config().d1 {
        return invalid_arg(format!("spec partitions D1 = {} but the database has D1 = {}", spec.d1(), db.config().d1));
    }
    spec.ranges().iter().map(|&(lo, hi)| db.column_slice(lo, hi)).collect()
}

/// Concatenates column slices back into one database.
pub fn reassemble(shards: &[EncodedDatabase]) -> Result<EncodedDatabase> {
    let Some(first) = shards.first() else {
        return invalid_arg("no shards to reassemble");
    };
    let [np, d0, _] = first.tensor().dims();
    let layout = first.layout();
    if shards
        .iter()
        .any(|s| s.tensor().dims()[..2] != [np, d0] || s.layout() != layout || s.config().record_bytes != first.config().record_bytes)
    {
        return invalid_arg("shards disagree on shape, layout or record size");
    }
    let d1: usize = shards.iter().map(|s| s.config().d1).sum();
    let mut owner = Vec::with_capacity(d1);
    for (si, s) in shards.iter().enumerate() {
        owner.extend((0..s.config().d1).map(|c| (si, c)));
    }
    let config = DbConfig::new(d0, d1, first.config().record_bytes)?;
    let t = Tensor3::from_fn([np, d0, d1], layout, |p, i, j| {
        let (si, c) = owner[j];
        shards[si].tensor().get(p, i, c)
    });
    EncodedDatabase::from_tensor(config, first.basis().clone(), t)
}
