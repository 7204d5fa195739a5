use crate::error::{invalid_arg, invalid_config, Result};
use crate::he::HeParams;

/// Default record payload, one full plaintext at default parameters.
pub const DEFAULT_RECORD_BYTES: usize = 16 * 1024;
/// Default number of DB rows.
pub const DEFAULT_D0: usize = 256;

/// A `D0 × D1` grid of fixed-size records. Record `r` sits at row `r / D1`,
/// column `r % D1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DbConfig {
    pub d0: usize,
    pub d1: usize,
    pub record_bytes: usize,
}

impl DbConfig {
    pub fn new(d0: usize, d1: usize, record_bytes: usize) -> Result<Self> {
        if d0 == 0 {
            return invalid_config("D0 must be positive");
        }
        if d1 == 0 || !d1.is_power_of_two() {
            return invalid_config(format!("D1 = {d1} is not a power of two"));
        }
        if record_bytes == 0 {
            return invalid_config("record size must be positive");
        }
        Ok(DbConfig { d0, d1, record_bytes })
    }

    /// Splits `records` into `D0` rows; the quotient must be a power of two.
    pub fn for_records(records: usize, d0: usize, record_bytes: usize) -> Result<Self> {
        if d0 == 0 || !records.is_multiple_of(d0) {
            return invalid_config(format!("{records} records do not fill {d0} rows evenly"));
        }
        Self::new(d0, records / d0, record_bytes)
    }

    #[inline]
    pub fn records(&self) -> usize {
        self.d0 * self.d1
    }

    /// `log2(D1)`, the tournament depth.
    #[inline]
    pub fn col_bits(&self) -> usize {
        self.d1.trailing_zeros() as usize
    }

    /// Ciphertexts produced by expansion: `D0 + log2(D1)·ell`.
    pub fn expanded_count(&self, ell: usize) -> usize {
        self.d0 + self.col_bits() * ell
    }

    /// `ceil(log2(expanded_count))`.
    pub fn expansion_stages(&self, ell: usize) -> usize {
        let total = self.expanded_count(ell);
        total.next_power_of_two().trailing_zeros() as usize
    }

    pub fn raw_bytes(&self) -> usize {
        self.records() * self.record_bytes
    }

    /// Checks the grid against ring parameters: each record fits one
    /// plaintext and the expansion slots fit in `N` coefficients.
    pub fn validate_for(&self, params: &HeParams) -> Result<()> {
        if self.record_bytes > params.plaintext_bytes() {
            return invalid_config(format!(
                "record of {} bytes exceeds plaintext capacity {}",
                self.record_bytes,
                params.plaintext_bytes()
            ));
        }
        let total = self.expanded_count(params.gadget().ell());
        if total > params.degree() {
            return invalid_config(format!(
                "expansion needs {total} slots but N = {}",
                params.degree()
            ));
        }
        Ok(())
    }

    /// Maps a flat record index to `(row, column)`.
    pub fn locate(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.records() {
            return invalid_arg(format!("record index {index} out of range 0..{}", self.records()));
        }
        Ok((index / self.d1, index % self.d1))
    }
}
