use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dense::{DenseTensor, DimTuple, DEFAULT_DENSE_CAP};
use crate::error::{Error, Result};
use crate::linalg::{qr_thin, svd};

/// Singular values below this fraction of the largest one are treated as zero when
/// computing exact ranks.
pub const EXACT_RANK_RTOL: f64 = 1e-14;

/// Order-3 component tensor of shape `(left, mode, right)`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Component {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || mode == 0 || right == 0 {
            return Err(Error::DimensionMismatch(format!(
                "component shape ({left}, {mode}, {right}) has a zero extent"
            )));
        }
        if data.len() != left * mode * right {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for component shape ({left}, {mode}, {right})",
                data.len()
            )));
        }
        Ok(Self { left, mode, right, data })
    }

    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        Self { left, mode, right, data: vec![0.0; left * mode * right] }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.left, self.mode, self.right)
    }

    pub fn left_rank(&self) -> usize {
        self.left
    }

    pub fn mode_dim(&self) -> usize {
        self.mode
    }

    pub fn right_rank(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }

    /// `(left * mode) x right` matricization.
    pub fn left_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left * self.mode, self.right, &self.data)
    }

    /// `left x (mode * right)` matricization.
    pub fn right_unfolding(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.left, self.mode * self.right, &self.data)
    }

    pub fn from_left_unfolding(m: &DMatrix<f64>, left: usize, mode: usize) -> Self {
        assert_eq!(m.nrows(), left * mode, "left unfolding row count");
        Self { left, mode, right: m.ncols(), data: row_major(m) }
    }

    pub fn from_right_unfolding(m: &DMatrix<f64>, mode: usize, right: usize) -> Self {
        assert_eq!(m.ncols(), mode * right, "right unfolding column count");
        Self { left: m.nrows(), mode, right, data: row_major(m) }
    }

    /// Contracts the mode index with `b`, giving the `left x right` matrix `sum_i b_i V[:, i, :]`.
    pub fn contract_mode(&self, b: &[f64]) -> DMatrix<f64> {
        assert_eq!(b.len(), self.mode, "basis vector length");
        let mut out = DMatrix::zeros(self.left, self.right);
        for a in 0..self.left {
            for (i, &bi) in b.iter().enumerate() {
                if bi == 0.0 {
                    continue;
                }
                let base = (a * self.mode + i) * self.right;
                for c in 0..self.right {
                    out[(a, c)] += bi * self.data[base + c];
                }
            }
        }
        out
    }

    /// Multiplies every mode fiber by `t`: `V'[a, :, b] = t * V[a, :, b]`.
    pub fn transform_mode(&self, t: &DMatrix<f64>) -> Self {
        assert_eq!(t.ncols(), self.mode, "mode transform width");
        let new_mode = t.nrows();
        let mut data = vec![0.0; self.left * new_mode * self.right];
        for a in 0..self.left {
            for c in 0..self.right {
                for i in 0..new_mode {
                    let mut s = 0.0;
                    for j in 0..self.mode {
                        s += t[(i, j)] * self.get(a, j, c);
                    }
                    data[(a * new_mode + i) * self.right + c] = s;
                }
            }
        }
        Self { left: self.left, mode: new_mode, right: self.right, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub(crate) fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Orthogonality bookkeeping: components `0..left` are left-orthogonal and components
/// `right..M` are right-orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gauge {
    pub left: usize,
    pub right: usize,
}

impl Gauge {
    pub fn none(order: usize) -> Self {
        Self { left: 0, right: order }
    }

    /// Whether mode `m` can act as the non-orthogonal core.
    pub fn is_centered_at(&self, m: usize) -> bool {
        self.left >= m && self.right <= m + 1
    }
}

/// Tensor train with order-3 components and boundary ranks 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    components: Vec<Component>,
    gauge: Gauge,
}

impl TensorTrain {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimensionMismatch("tensor train needs at least one component".into()));
        }
        if components[0].left != 1 || components[components.len() - 1].right != 1 {
            return Err(Error::DimensionMismatch("boundary ranks must be 1".into()));
        }
        for (k, pair) in components.windows(2).enumerate() {
            if pair[0].right != pair[1].left {
                return Err(Error::DimensionMismatch(format!(
                    "rank mismatch between components {k} ({}) and {} ({})",
                    pair[0].right,
                    k + 1,
                    pair[1].left
                )));
            }
        }
        let gauge = Gauge::none(components.len());
        Ok(Self { components, gauge })
    }

    /// Rank-1 train `v_1 ⊗ ... ⊗ v_M`.
    pub fn rank_one(vectors: &[Vec<f64>]) -> Result<Self> {
        let comps = vectors.iter().map(|v| Component::new(1, v.len(), 1, v.clone())).collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    /// Zero tensor with all ranks 1.
    pub fn zeros(dims: &DimTuple) -> Self {
        let comps = dims.as_slice().iter().map(|&n| Component::zeros(1, n, 1)).collect();
        Self::new(comps).expect("valid rank-1 shape")
    }

    /// Random train with standard normal entries. `inner_ranks` has length `M - 1`.
    pub fn random<R: Rng + ?Sized>(dims: &DimTuple, inner_ranks: &[usize], rng: &mut R) -> Result<Self> {
        let order = dims.order();
        if inner_ranks.len() + 1 != order {
            return Err(Error::DimensionMismatch(format!("{} inner ranks for order {order}", inner_ranks.len())));
        }
        let mut ranks = vec![1];
        ranks.extend_from_slice(inner_ranks);
        ranks.push(1);
        let comps = (0..order)
            .map(|k| {
                let n = ranks[k] * dims.as_slice()[k] * ranks[k + 1];
                let data = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                Component::new(ranks[k], dims.as_slice()[k], ranks[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.components.iter().map(|c| c.mode).collect()
    }

    /// Representation ranks `(r_0, ..., r_M)`, including the boundary ranks.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.components.iter().map(|c| c.right));
        r
    }

    pub fn component(&self, k: usize) -> &Component {
        &self.components[k]
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    /// Total number of stored parameters.
    pub fn num_parameters(&self) -> usize {
        self.components.iter().map(Component::len).sum()
    }

    /// Replaces component `k` with one of identical shape. Orthogonality of `k` is lost.
    pub fn set_component(&mut self, k: usize, comp: Component) -> Result<()> {
        if comp.shape() != self.components[k].shape() {
            return Err(Error::DimensionMismatch(format!(
                "component {k}: shape {:?} does not match {:?}",
                comp.shape(),
                self.components[k].shape()
            )));
        }
        self.components[k] = comp;
        self.gauge.left = self.gauge.left.min(k);
        self.gauge.right = self.gauge.right.max(k + 1);
        Ok(())
    }

    /// Replaces the adjacent pair `(k, k + 1)`, allowing the shared rank to change.
    /// The caller asserts whether component `k` is left-orthogonal afterwards.
    pub(crate) fn set_pair(&mut self, k: usize, first: Component, second: Component, first_left_orth: bool) {
        assert_eq!(first.left, self.components[k].left);
        assert_eq!(first.mode, self.components[k].mode);
        assert_eq!(second.mode, self.components[k + 1].mode);
        assert_eq!(second.right, self.components[k + 1].right);
        assert_eq!(first.right, second.left);
        self.components[k] = first;
        self.components[k + 1] = second;
        self.gauge.left = if first_left_orth && self.gauge.left >= k { k + 1 } else { self.gauge.left.min(k) };
        self.gauge.right = self.gauge.right.max(k + 2);
    }

    /// Multiplies the represented tensor by `alpha`.
    pub fn scale(&mut self, alpha: f64) {
        let k = self.gauge.left.min(self.order() - 1);
        self.components[k].scale(alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    /// Value `(V, b_1 ⊗ ... ⊗ b_M)_Fro` of the train against per-mode vectors.
    pub fn evaluate(&self, basis_values: &[&[f64]]) -> Result<f64> {
        if basis_values.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} basis vectors for order {}",
                basis_values.len(),
                self.order()
            )));
        }
        let mut acc = vec![1.0];
        for (comp, b) in self.components.iter().zip(basis_values) {
            if b.len() != comp.mode {
                return Err(Error::DimensionMismatch(format!(
                    "basis vector of length {} for mode dimension {}",
                    b.len(),
                    comp.mode
                )));
            }
            acc = contract_left(&acc, comp, b);
        }
        Ok(acc[0])
    }

    /// Entry at a multi-index.
    pub fn entry(&self, index: &[usize]) -> f64 {
        let mut acc = vec![1.0];
        for (comp, &i) in self.components.iter().zip(index) {
            let mut next = vec![0.0; comp.right];
            for (a, &la) in acc.iter().enumerate() {
                let base = (a * comp.mode + i) * comp.right;
                for (c, n) in next.iter_mut().enumerate() {
                    *n += la * comp.data[base + c];
                }
            }
            acc = next;
        }
        acc[0]
    }

    /// Full tensor, refusing when the entry count exceeds `cap`.
    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseTensor> {
        let entries = self.dims().iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if entries > cap {
            return Err(Error::TooLarge { entries, cap });
        }
        // left-to-right chain of partial contractions as (prefix x rank) matrices
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for comp in &self.components {
            let unf = comp.right_unfolding();
            let prod = &acc * unf; // prefix x (mode * right)
            let rows = prod.nrows() * comp.mode;
            let mut next = DMatrix::zeros(rows, comp.right);
            for p in 0..prod.nrows() {
                for i in 0..comp.mode {
                    for c in 0..comp.right {
                        next[(p * comp.mode + i, c)] = prod[(p, i * comp.right + c)];
                    }
                }
            }
            acc = next;
        }
        let dims = DimTuple::new(self.dims())?;
        DenseTensor::new(dims, acc.column(0).iter().copied().collect())
    }

    pub fn to_dense(&self) -> Result<DenseTensor> {
        self.to_dense_capped(DEFAULT_DENSE_CAP)
    }

    /// Frobenius inner product of two trains with equal mode dimensions.
    pub fn dot(&self, other: &TensorTrain) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch("inner product of trains with different dims".into()));
        }
        let mut g = DMatrix::from_element(1, 1, 1.0);
        for (a, b) in self.components.iter().zip(&other.components) {
            let mut next = DMatrix::zeros(a.right, b.right);
            for i in 0..a.mode {
                let sa = slice(a, i);
                let sb = slice(b, i);
                next += sa.transpose() * &g * sb;
            }
            g = next;
        }
        Ok(g[(0, 0)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.dot(self).expect("same dims").max(0.0).sqrt()
    }

    /// Makes component `k` left-orthogonal by thin QR, pushing `R` into component `k + 1`.
    pub fn orthogonalize_core_left(&mut self, k: usize) {
        assert!(k + 1 < self.order(), "cannot push past the last component");
        let comp = &self.components[k];
        let (q, r) = qr_thin(&comp.left_unfolding());
        let new_k = Component::from_left_unfolding(&q, comp.left, comp.mode);
        let next = &self.components[k + 1];
        let merged = r * next.right_unfolding();
        let new_next = Component::from_right_unfolding(&merged, next.mode, next.right);
        self.set_pair(k, new_k, new_next, true);
    }

    /// Makes component `k` right-orthogonal by thin QR, pushing the triangular factor into
    /// component `k - 1`.
    pub fn orthogonalize_core_right(&mut self, k: usize) {
        assert!(k >= 1, "cannot push before the first component");
        let comp = &self.components[k];
        let (q, r) = qr_thin(&comp.right_unfolding().transpose());
        let new_k = Component::from_right_unfolding(&q.transpose(), comp.mode, comp.right);
        let prev = &self.components[k - 1];
        let merged = prev.left_unfolding() * r.transpose();
        let new_prev = Component::from_left_unfolding(&merged, prev.left, prev.mode);
        let rank = new_k.left;
        debug_assert_eq!(new_prev.right, rank);
        let left_ok = self.gauge.left;
        self.components[k - 1] = new_prev;
        self.components[k] = new_k;
        self.gauge.left = left_ok.min(k - 1);
        self.gauge.right = if self.gauge.right <= k + 1 { k } else { self.gauge.right };
    }

    /// Moves the non-orthogonal core to mode `m`: components before `m` become
    /// left-orthogonal and components after `m` right-orthogonal.
    pub fn move_core_to(&mut self, m: usize) {
        assert!(m < self.order());
        for k in self.gauge.left..m {
            self.orthogonalize_core_left(k);
        }
        let start = self.gauge.right.max(m + 1);
        for k in (m + 1..start).rev() {
            self.orthogonalize_core_right(k);
        }
        self.gauge.left = self.gauge.left.max(m);
        self.gauge.right = self.gauge.right.min(m + 1);
    }

    /// All components but the last become left-orthogonal.
    pub fn left_orthogonalize(&mut self) {
        self.gauge = Gauge::none(self.order());
        self.move_core_to(self.order() - 1);
    }

    /// All components but the first become right-orthogonal.
    pub fn right_orthogonalize(&mut self) {
        self.gauge = Gauge::none(self.order());
        self.move_core_to(0);
    }

    pub fn left_orthogonalized(&self) -> Self {
        let mut out = self.clone();
        out.left_orthogonalize();
        out
    }

    pub fn right_orthogonalized(&self) -> Self {
        let mut out = self.clone();
        out.right_orthogonalize();
        out
    }

    /// Inserts `a * a_inv` between components `k` and `k + 1`. Leaves the tensor
    /// unchanged when `a_inv` is the inverse of `a`. An orthogonal `a` with
    /// `a_inv = aᵀ` keeps the orthogonality marker; anything else clears it.
    pub fn apply_gauge(&mut self, k: usize, a: &DMatrix<f64>, a_inv: &DMatrix<f64>) -> Result<()> {
        let r = self.components[k].right;
        if a.shape() != (r, r) || a_inv.shape() != (r, r) {
            return Err(Error::DimensionMismatch(format!("gauge matrices must be {r} x {r}")));
        }
        let first = &self.components[k];
        let new_first = Component::from_left_unfolding(&(first.left_unfolding() * a), first.left, first.mode);
        let second = &self.components[k + 1];
        let new_second =
            Component::from_right_unfolding(&(a_inv * second.right_unfolding()), second.mode, second.right);
        self.components[k] = new_first;
        self.components[k + 1] = new_second;
        let orthogonal =
            (a.transpose() * a - DMatrix::identity(r, r)).amax() < 1e-12 && (a_inv - a.transpose()).amax() < 1e-12;
        if !orthogonal {
            self.gauge = Gauge::none(self.order());
        }
        Ok(())
    }

    /// Rounds the representation: ranks are reduced to the number of singular values
    /// above `rtol * sigma_max` of each unfolding, and capped at `max_rank`.
    pub fn truncate(&self, rtol: f64, max_rank: usize) -> Self {
        let mut tt = self.left_orthogonalized();
        for k in (1..tt.order()).rev() {
            let comp = &tt.components[k];
            let dec = svd(&comp.right_unfolding());
            let smax = dec.s.first().copied().unwrap_or(0.0);
            let keep = dec.s.iter().take_while(|&&s| s > rtol * smax && s > 0.0).count().clamp(1, max_rank.max(1));
            let vt = dec.vt.rows(0, keep).into_owned();
            let us = dec.u.columns(0, keep) * DMatrix::from_diagonal(&DVector::from_row_slice(&dec.s[..keep]));
            let new_k = Component::from_right_unfolding(&vt, comp.mode, comp.right);
            let prev = &tt.components[k - 1];
            let new_prev = Component::from_left_unfolding(&(prev.left_unfolding() * us), prev.left, prev.mode);
            tt.components[k - 1] = new_prev;
            tt.components[k] = new_k;
        }
        tt.gauge = Gauge { left: 0, right: 1 };
        tt
    }

    /// Exact TT-ranks `(r_0, ..., r_M)` of the represented tensor. The zero tensor has all
    /// ranks 1.
    pub fn tt_rank(&self) -> Vec<usize> {
        self.truncate(EXACT_RANK_RTOL, usize::MAX).ranks()
    }
}

/// `acc^T * (sum_i b_i V[:, i, :])` for a row vector `acc` of length `V.left`.
pub(crate) fn contract_left(acc: &[f64], comp: &Component, b: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; comp.right];
    for (a, &la) in acc.iter().enumerate() {
        if la == 0.0 {
            continue;
        }
        for (i, &bi) in b.iter().enumerate() {
            let w = la * bi;
            if w == 0.0 {
                continue;
            }
            let base = (a * comp.mode + i) * comp.right;
            for (c, n) in next.iter_mut().enumerate() {
                *n += w * comp.data[base + c];
            }
        }
    }
    next
}

/// `(sum_i b_i V[:, i, :]) * acc` for a column vector `acc` of length `V.right`.
pub(crate) fn contract_right(acc: &[f64], comp: &Component, b: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; comp.left];
    for (a, n) in next.iter_mut().enumerate() {
        let mut s = 0.0;
        for (i, &bi) in b.iter().enumerate() {
            if bi == 0.0 {
                continue;
            }
            let base = (a * comp.mode + i) * comp.right;
            let mut t = 0.0;
            for (c, &rc) in acc.iter().enumerate() {
                t += comp.data[base + c] * rc;
            }
            s += bi * t;
        }
        *n = s;
    }
    next
}

fn slice(comp: &Component, i: usize) -> DMatrix<f64> {
    DMatrix::from_fn(comp.left, comp.right, |a, c| comp.get(a, i, c))
}

/// TT-SVD of a dense tensor.
///
/// Each unfolding is truncated to the smallest rank whose discarded tail has Frobenius
/// norm at most `tol * ||t|| / sqrt(M - 1)`, never keeping singular values below
/// [`EXACT_RANK_RTOL`] relative, and capped at `max_rank`. The result is left-orthogonal
/// up to the last component.
pub fn tt_svd(t: &DenseTensor, max_rank: usize, tol: f64) -> Result<TensorTrain> {
    if max_rank == 0 {
        return Err(Error::InvalidArgument("max_rank must be at least 1".into()));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be non-negative")));
    }
    let dims = t.dims().as_slice().to_vec();
    let order = dims.len();
    let delta = if order > 1 { tol * t.frobenius_norm() / ((order - 1) as f64).sqrt() } else { 0.0 };
    let mut comps = Vec::with_capacity(order);
    let mut rank = 1;
    let mut rest: usize = dims.iter().product();
    // current remainder, row-major (rank * n_k) x (rest / n_k)
    let mut remainder = t.data().to_vec();
    for &n in dims.iter().take(order - 1) {
        rest /= n;
        let mat = DMatrix::from_row_slice(rank * n, rest, &remainder);
        let dec = svd(&mat);
        let smax = dec.s.first().copied().unwrap_or(0.0);
        let exact = dec.s.iter().take_while(|&&s| s > EXACT_RANK_RTOL * smax && s > 0.0).count();
        let mut keep = exact.max(1);
        // shrink while the discarded tail stays within delta
        let mut tail = dec.s[keep..].iter().map(|s| s * s).sum::<f64>();
        while keep > 1 && tail + dec.s[keep - 1].powi(2) <= delta * delta {
            keep -= 1;
            tail += dec.s[keep].powi(2);
        }
        keep = keep.min(max_rank);
        let u = dec.u.columns(0, keep).into_owned();
        comps.push(Component::from_left_unfolding(&u, rank, n));
        let sv = DMatrix::from_diagonal(&DVector::from_row_slice(&dec.s[..keep])) * dec.vt.rows(0, keep);
        remainder = row_major(&sv);
        rank = keep;
    }
    let last = dims[order - 1];
    comps.push(Component::new(rank, last, 1, remainder)?);
    let mut tt = TensorTrain::new(comps)?;
    tt.gauge = Gauge { left: order - 1, right: order };
    Ok(tt)
}
