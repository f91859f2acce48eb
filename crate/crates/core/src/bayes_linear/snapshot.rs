//! Binary snapshot of a [`PosteriorState`].
//!
//! Layout, all little-endian:
//!
//! | offset | type      | field                                   |
//! |--------|-----------|-----------------------------------------|
//! | 0      | [u8; 8]   | magic `NLBPOST1`                        |
//! | 8      | u32       | dimension `d`                           |
//! | 12     | u32       | strategy (0 = pseudo-inverse, 1 = Cholesky) |
//! | 16     | f64       | sigma^2                                 |
//! | 24     | f64       | epsilon                                 |
//! | 32     | u64       | source sample count                     |
//! | 40     | f64 x d   | posterior mean weights                  |
//! | ...    | f64 x d*d | precision or lower Cholesky factor, row-major |

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use super::posterior::{Factor, PosteriorState};
use crate::binio::*;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NLBPOST1";

impl PosteriorState {
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.dim();
        w.write_all(MAGIC)?;
        write_u32(w, d as u32)?;
        let (tag, m) = match self.factor() {
            Factor::Precision(p) => (0u32, p),
            Factor::Cholesky(l) => (1u32, l),
        };
        write_u32(w, tag)?;
        write_f64(w, self.sigma_sq())?;
        write_f64(w, self.epsilon())?;
        write_u64(w, self.source_count())?;
        write_f64s(w, self.beta_hat().as_slice())?;
        for i in 0..d {
            for j in 0..d {
                write_f64(w, m[(i, j)])?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        expect_magic(r, MAGIC)?;
        let d = read_u32(r)? as usize;
        if d == 0 {
            return Err(Error::Snapshot("zero dimension".into()));
        }
        let tag = read_u32(r)?;
        let sigma_sq = read_f64(r)?;
        let epsilon = read_f64(r)?;
        let count = read_u64(r)?;
        let beta = DVector::from_vec(read_f64s(r, d)?);
        let m = DMatrix::from_row_slice(d, d, &read_f64s(r, d * d)?);
        let factor = match tag {
            0 => Factor::Precision(m),
            1 => Factor::Cholesky(m),
            other => return Err(Error::Snapshot(format!("unknown strategy tag {other}"))),
        };
        Ok(PosteriorState::from_parts(beta, factor, sigma_sq, epsilon, count))
    }
}
