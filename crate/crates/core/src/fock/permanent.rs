use nalgebra::DMatrix;

use super::{C64, MAX_PHOTONS};
use crate::error::{Error, Result};

/// Matrix permanent by Ryser's inclusion-exclusion formula.
///
/// Subsets are visited in Gray-code order so each step updates the row sums
/// with a single column, giving `O(2^n n)` work.
pub fn permanent(m: &DMatrix<C64>) -> Result<C64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Shape(format!(
            "permanent of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if n > MAX_PHOTONS {
        return Err(Error::Capacity {
            what: "permanent dimension",
            value: n,
            limit: MAX_PHOTONS,
        });
    }
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }

    let mut row_sums = vec![C64::default(); n];
    let mut total = C64::default();
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << flipped) != 0;
        gray = next;
        for (i, s) in row_sums.iter_mut().enumerate() {
            if added {
                *s += m[(i, flipped)];
            } else {
                *s -= m[(i, flipped)];
            }
        }
        let prod: C64 = row_sums.iter().product();
        if gray.count_ones() % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        total = -total;
    }
    Ok(total)
}
