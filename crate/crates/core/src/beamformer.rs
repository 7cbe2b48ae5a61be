use num_complex::Complex64;

use crate::error::Result;
use crate::linalg::CVec;

/// An adaptive (or fixed) beamformer driven one snapshot at a time.
pub trait Beamformer: Send {
    /// Consumes `r(i)`, adapts, and returns the array output for that snapshot.
    ///
    /// SG filters return the a priori output; RLS filters return the output of
    /// the filter that already includes `r(i)`.
    fn process(&mut self, r: &CVec) -> Result<Complex64>;

    /// Effective full-rank weights `S_D w̄` after the last call to `process`.
    fn weights(&self) -> CVec;

    /// Rank currently used to form the output.
    fn rank(&self) -> usize;
}
