use rayon::prelude::*;

use super::client::{ClientQuery, PublicKeys};
use super::config::DbConfig;
use crate::error::{invalid_arg, invalid_state, Result};
use crate::he::{expansion_index, monomial_ntt, subs, BfvCiphertext, EvalKey, HeParams};
use crate::ring::RnsPoly;

/// Expansion output for one query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpandedQuery {
    /// `D0` ciphertexts, an encrypted one-hot vector over rows.
    pub row_cts: Vec<BfvCiphertext>,
    /// `log2(D1)·ell` ciphertexts, grouped `ell` per column bit (LSB first);
    /// entry `i` of group `j` encrypts `bit_j·z^i` without `Δ` scaling.
    pub col_cts: Vec<BfvCiphertext>,
}

impl ExpandedQuery {
    pub fn len(&self) -> usize {
        self.row_cts.len() + self.col_cts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits a flat expansion result at `D0`.
    pub fn from_flat(mut cts: Vec<BfvCiphertext>, config: &DbConfig) -> Result<Self> {
        if cts.len() < config.d0 {
            return invalid_arg(format!("{} ciphertexts cannot cover {} rows", cts.len(), config.d0));
        }
        let col_cts = cts.split_off(config.d0);
        Ok(ExpandedQuery { row_cts: cts, col_cts })
    }
}

/// Constants for one expansion stage.
pub struct StageKeys<'a> {
    pub stage: usize,
    pub evk: &'a EvalKey,
    /// NTT image of `X^(-2^stage)`.
    pub shift: RnsPoly,
}

impl<'a> StageKeys<'a> {
    pub fn new(stage: usize, keys: &'a PublicKeys, params: &HeParams) -> Result<Self> {
        let n = params.degree();
        let k = expansion_index(n, stage)?;
        let Some(evk) = keys.evk_for(k) else {
            return invalid_state(format!("no evaluation key for stage {stage} (index {k})"));
        };
        Ok(StageKeys {
            stage,
            evk,
            shift: monomial_ntt(params.basis(), 2 * n - (1 << stage))?,
        })
    }

    /// Output pair of one node given its ciphertext and `Subs(ct)`:
    /// `(ct + s, (ct - s)·X^(-2^t))`.
    pub fn combine(&self, ct: &BfvCiphertext, s: &BfvCiphertext, want_odd: bool) -> Result<(BfvCiphertext, Option<BfvCiphertext>)> {
        let even = ct.add(s)?;
        let odd = if want_odd {
            Some(ct.sub(s)?.mul_plain(&self.shift)?)
        } else {
            None
        };
        Ok((even, odd))
    }
}

/// Places stage outputs: node `j` writes slot `j` and, when present, slot `j + 2^t`.
pub fn scatter_stage(pairs: Vec<(BfvCiphertext, Option<BfvCiphertext>)>, stage: usize) -> Vec<BfvCiphertext> {
    let half = 1usize << stage;
    let width = pairs.len();
    let odd_count = pairs.iter().filter(|p| p.1.is_some()).count();
    let mut out: Vec<Option<BfvCiphertext>> = vec![None; width + odd_count];
    for (j, (even, odd)) in pairs.into_iter().enumerate() {
        out[j] = Some(even);
        if let Some(o) = odd {
            out[j + half] = Some(o);
        }
    }
    out.into_iter().map(|c| c.expect("odd outputs are contiguous")).collect()
}

/// Number of nodes alive at stage `t` and whether node `j` emits an odd child.
#[inline]
pub fn stage_width(stage: usize, total: usize) -> usize {
    (1usize << stage).min(total)
}

#[inline]
pub fn emits_odd(node: usize, stage: usize, total: usize) -> bool {
    node + (1 << stage) < total
}

/// Binary-tree oblivious expansion of one query into `D0 + log2(D1)·ell`
/// ciphertexts. Stage `t` applies `Subs` with index `N/2^t + 1`.
pub fn expand_query(
    query: &ClientQuery,
    keys: &PublicKeys,
    config: &DbConfig,
    params: &HeParams,
) -> Result<ExpandedQuery> {
    config.validate_for(params)?;
    let total = config.expanded_count(params.gadget().ell());
    let stages = config.expansion_stages(params.gadget().ell());
    let mut nodes = vec![query.ct.clone()];
    for t in 0..stages {
        let sk = StageKeys::new(t, keys, params)?;
        let pairs = nodes
            .par_iter()
            .enumerate()
            .map(|(j, ct)| {
                let s = subs(ct, sk.evk, params)?;
                sk.combine(ct, &s, emits_odd(j, t, total))
            })
            .collect::<Result<Vec<_>>>()?;
        nodes = scatter_stage(pairs, t);
    }
    debug_assert_eq!(nodes.len(), total);
    ExpandedQuery::from_flat(nodes, config)
}

/// Expands every query of a batch, pairing each with its session keys.
pub fn expand_batch(
    queries: &[(&ClientQuery, &PublicKeys)],
    config: &DbConfig,
    params: &HeParams,
) -> Result<Vec<ExpandedQuery>> {
    queries
        .iter()
        .map(|(q, k)| expand_query(q, k, config, params))
        .collect()
}
