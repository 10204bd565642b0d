use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{extend_orthonormal, svd};
use crate::tensor::{Component, TensorTrain};

/// Magnitude of appended singular values relative to the smallest stable one.
pub const UNSTABLE_SCALE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankAdaptation {
    pub previous: usize,
    pub rank: usize,
    pub stable: usize,
    /// The requested `stable + buffer` exceeded the rank cap.
    pub capped: bool,
}

/// Re-sizes rank `r_{m+1}` (between components `m` and `m + 1`) from the singular values
/// of component `m`'s left unfolding.
///
/// Values `σ_k ≥ θ σ_1` are stable. The rank becomes `#stable + buffer`, capped by
/// `max_rank` and by the unfolding dimensions; surplus small values are truncated and
/// missing ones are appended as random directions of size `UNSTABLE_SCALE · min stable σ`.
/// Afterwards component `m` is left-orthogonal and the core sits at `m + 1`.
pub fn rank_adapt<R: Rng + ?Sized>(
    tt: &mut TensorTrain,
    m: usize,
    theta: f64,
    buffer: usize,
    max_rank: usize,
    rng: &mut R,
) -> Result<RankAdaptation> {
    if m + 1 >= tt.order() {
        return Err(Error::DimensionMismatch(format!("no rank after mode {m} in a train of order {}", tt.order())));
    }
    if !tt.gauge().is_centered_at(m) {
        return Err(Error::Orthogonality { mode: m, detail: format!("gauge {:?} is not centered", tt.gauge()) });
    }
    let comp = tt.component(m).clone();
    let next = tt.component(m + 1).clone();
    let (left, mode, previous) = comp.shape();
    let dec = svd(&comp.left_unfolding());
    let s1 = dec.s.first().copied().unwrap_or(0.0);
    let stable = dec.s.iter().filter(|&&s| s > 0.0 && s >= theta * s1).count().max(1);
    let cap = max_rank.min(left * mode).min(next.mode_dim() * next.right_rank()).max(1);
    let target = stable + buffer;
    let rank = target.min(cap);
    let keep = rank.min(dec.s.len());

    let u = extend_orthonormal(&dec.u.columns(0, keep).into_owned(), rank - keep, rng);
    let rank = u.ncols();
    let sv = DMatrix::from_fn(keep, previous, |i, j| dec.s[i] * dec.vt[(i, j)]);
    let carried = sv * next.right_unfolding();
    let width = carried.ncols();
    let min_stable = dec.s[..stable.min(dec.s.len())].iter().copied().fold(f64::INFINITY, f64::min);
    let magnitude = UNSTABLE_SCALE * if min_stable > 0.0 && min_stable.is_finite() { min_stable } else { 1.0 };
    let mut merged = DMatrix::zeros(rank, width);
    merged.rows_mut(0, keep).copy_from(&carried);
    for i in keep..rank {
        let row: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (j, x) in row.into_iter().enumerate() {
            merged[(i, j)] = magnitude * x / norm;
        }
    }
    let first = Component::from_left_unfolding(&u, left, mode);
    let second = Component::from_right_unfolding(&merged, next.mode_dim(), next.right_rank());
    tt.set_pair(m, first, second, true);
    Ok(RankAdaptation { previous, rank, stable, capped: target > cap })
}
