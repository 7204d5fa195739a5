use rayon::prelude::*;

use crate::error::{invalid_arg, Result};
use crate::he::{external_product, multiply_by_secret, BfvCiphertext, ConversionKey, HeParams, RgswCiphertext};

/// Onion-mode RGSW assembly: each group of `ell` expanded column ciphertexts
/// (phases `bit·z^i`) is the plain half; the `s`-weighted half comes from
/// multiplying each by the secret through the conversion key.
pub fn build_rgsw_from_expanded(
    col_cts: &[BfvCiphertext],
    conversion: &ConversionKey,
    params: &HeParams,
) -> Result<Vec<RgswCiphertext>> {
    let ell = params.gadget().ell();
    if !col_cts.len().is_multiple_of(ell) {
        return invalid_arg(format!("{} column ciphertexts do not group by ell = {ell}", col_cts.len()));
    }
    col_cts
        .chunks(ell)
        .map(|group| {
            let a_rows = group
                .par_iter()
                .map(|ct| multiply_by_secret(ct, conversion, params))
                .collect::<Result<Vec<_>>>()?;
            RgswCiphertext::from_halves(a_rows, group.to_vec())
        })
        .collect()
}

/// One tournament node: `even + (odd - even) ⊡ rgsw`.
pub fn tournament_node(
    even: &BfvCiphertext,
    odd: &BfvCiphertext,
    rgsw: &RgswCiphertext,
    params: &HeParams,
) -> Result<BfvCiphertext> {
    let diff = odd.sub(even)?;
    even.add(&external_product(&diff, rgsw, params)?)
}

/// Binary tournament over `cts` (a power of two); stage `j` consumes
/// `rgsws[j]`, LSB first.
pub fn col_tournament(
    cts: Vec<BfvCiphertext>,
    rgsws: &[RgswCiphertext],
    params: &HeParams,
) -> Result<BfvCiphertext> {
    if cts.is_empty() || !cts.len().is_power_of_two() {
        return invalid_arg(format!("tournament over {} ciphertexts needs a power of two", cts.len()));
    }
    let depth = cts.len().trailing_zeros() as usize;
    if rgsws.len() != depth {
        return invalid_arg(format!("tournament of depth {depth} got {} RGSW ciphertexts", rgsws.len()));
    }
    let mut level = cts;
    for rgsw in rgsws.iter().take(depth) {
        level = level
            .par_chunks(2)
            .map(|pair| tournament_node(&pair[0], &pair[1], rgsw, params))
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(level.pop().expect("one ciphertext remains"))
}
