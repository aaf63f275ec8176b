//! Lazily structured linear operators.
//!
//! Representation matrices are built from Kronecker products, Kronecker sums,
//! direct sums, permutations and small dense blocks. None of that structure
//! is ever materialized unless the matrix is small: every operator knows how
//! to apply itself (and its conjugate transpose) to a block of vectors, which
//! is all the nullspace iteration needs.
//!
//! Vector blocks are stored row-major (`data[i * width + j]` is component `i`
//! of column `j`) so a permutation acting on a block touches contiguous rows.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::Scalar;

/// A bijection on `[0, size)`. Applying the operator permutes entries as
/// `out[i] = v[fwd[i]]`; `inv` is the inverse map, kept so the adjoint is a
/// plain gather too.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    fwd: Vec<u32>,
    inv: Vec<u32>,
}

impl Permutation {
    pub fn new(fwd: Vec<u32>) -> Result<Self> {
        let n = fwd.len();
        let mut inv = vec![u32::MAX; n];
        for (i, &s) in fwd.iter().enumerate() {
            let s = s as usize;
            if s >= n || inv[s] != u32::MAX {
                return Err(Error::Invalid(format!(
                    "index list of length {n} is not a permutation"
                )));
            }
            inv[s] = i as u32;
        }
        Ok(Permutation { fwd, inv })
    }

    pub fn identity(n: usize) -> Self {
        let fwd: Vec<u32> = (0..n as u32).collect();
        Permutation { inv: fwd.clone(), fwd }
    }

    pub fn size(&self) -> usize {
        self.fwd.len()
    }

    pub fn forward(&self) -> &[u32] {
        &self.fwd
    }

    pub fn inverse(&self) -> Permutation {
        Permutation { fwd: self.inv.clone(), inv: self.fwd.clone() }
    }

    pub fn is_identity(&self) -> bool {
        self.fwd.iter().enumerate().all(|(i, &s)| i as u32 == s)
    }

    /// Operator product `self · other` (apply `other` first).
    pub fn product(&self, other: &Permutation) -> Result<Permutation> {
        if self.size() != other.size() {
            return Err(Error::Dim(format!(
                "permutation product {} vs {}",
                self.size(),
                other.size()
            )));
        }
        let fwd: Vec<u32> = self.fwd.iter().map(|&i| other.fwd[i as usize]).collect();
        Permutation::new(fwd)
    }

    /// Kronecker product of two permutations is again a permutation on the
    /// row-major flattened index space.
    pub fn kron(&self, other: &Permutation) -> Permutation {
        let nb = other.size() as u32;
        let mut fwd = Vec::with_capacity(self.size() * other.size());
        for &a in &self.fwd {
            for &b in &other.fwd {
                fwd.push(a * nb + b);
            }
        }
        Permutation::new(fwd).expect("kron of permutations is a permutation")
    }
}

/// Coordinate-list sparse matrix; triples are kept in insertion order.
#[derive(Clone, Debug)]
pub struct SparseCoo<T> {
    pub rows: usize,
    pub cols: usize,
    pub triples: Vec<(u32, u32, T)>,
}

/// A block of `width` column vectors of length `len`, stored row-major.
#[derive(Clone, Debug)]
pub struct VecBlock<T> {
    pub len: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> VecBlock<T> {
    pub fn zeros(len: usize, width: usize) -> Self {
        VecBlock { len, width, data: vec![T::zero(); len * width] }
    }

    pub fn from_vector(v: &[T]) -> Self {
        VecBlock { len: v.len(), width: 1, data: v.to_vec() }
    }

    /// Column-major `DMatrix` view of the block (transposing copy).
    pub fn to_matrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.len, self.width, |i, j| self.data[i * self.width + j])
    }

    pub fn from_matrix(m: &DMatrix<T>) -> Self {
        let (len, width) = (m.nrows(), m.ncols());
        let mut data = vec![T::zero(); len * width];
        for i in 0..len {
            for j in 0..width {
                data[i * width + j] = m[(i, j)];
            }
        }
        VecBlock { len, width, data }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x.modulus_squared()).sum()
    }
}

/// Whether to apply the operator itself or its conjugate transpose.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Apply {
    Plain,
    Adjoint,
}

/// A structured linear map with matrix-vector products on both sides.
///
/// Cloning is cheap (children are reference-counted), and operators are
/// immutable after construction, so they can be shared freely across threads.
#[derive(Clone, Debug)]
pub enum LinOp<T: Scalar> {
    Dense(Arc<DMatrix<T>>),
    Permutation(Arc<Permutation>),
    Sparse(Arc<SparseCoo<T>>),
    KroneckerProduct(Arc<Vec<LinOp<T>>>),
    KroneckerSum(Arc<Vec<LinOp<T>>>),
    DirectSum(Arc<Vec<LinOp<T>>>),
    ScaledIdentity { scale: T, size: usize },
    Composition(Arc<Vec<LinOp<T>>>),
    Transpose(Arc<LinOp<T>>),
    Negation(Arc<LinOp<T>>),
}

impl<T: Scalar> LinOp<T> {
    pub fn dense(m: DMatrix<T>) -> Self {
        LinOp::Dense(Arc::new(m))
    }

    pub fn permutation(p: Permutation) -> Self {
        LinOp::Permutation(Arc::new(p))
    }

    pub fn sparse(rows: usize, cols: usize, triples: Vec<(u32, u32, T)>) -> Result<Self> {
        for &(r, c, _) in &triples {
            if r as usize >= rows || c as usize >= cols {
                return Err(Error::Invalid(format!(
                    "sparse entry ({r},{c}) outside {rows}x{cols}"
                )));
            }
        }
        Ok(LinOp::Sparse(Arc::new(SparseCoo { rows, cols, triples })))
    }

    pub fn scaled_identity(scale: T, size: usize) -> Self {
        LinOp::ScaledIdentity { scale, size }
    }

    pub fn identity(size: usize) -> Self {
        Self::scaled_identity(T::one(), size)
    }

    pub fn kronecker_product(factors: Vec<LinOp<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Invalid("empty Kronecker product".into()));
        }
        Ok(LinOp::KroneckerProduct(Arc::new(factors)))
    }

    pub fn kronecker_sum(factors: Vec<LinOp<T>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Invalid("empty Kronecker sum".into()));
        }
        for f in &factors {
            if f.rows() != f.cols() {
                return Err(Error::Invalid("Kronecker sum requires square factors".into()));
            }
        }
        Ok(LinOp::KroneckerSum(Arc::new(factors)))
    }

    pub fn direct_sum(blocks: Vec<LinOp<T>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::Invalid("empty direct sum".into()));
        }
        Ok(LinOp::DirectSum(Arc::new(blocks)))
    }

    /// Composition applied right-to-left: `composition([a, b])` is `a ∘ b`.
    /// Adjacent scaled identities are collapsed; nothing else is fused.
    pub fn composition(ops: Vec<LinOp<T>>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Invalid("empty composition".into()));
        }
        for w in ops.windows(2) {
            if w[0].cols() != w[1].rows() {
                return Err(Error::Dim(format!(
                    "composition chain: {} columns vs {} rows",
                    w[0].cols(),
                    w[1].rows()
                )));
            }
        }
        let mut merged: Vec<LinOp<T>> = Vec::with_capacity(ops.len());
        for op in ops {
            match (merged.last(), &op) {
                (
                    Some(LinOp::ScaledIdentity { scale: a, size }),
                    LinOp::ScaledIdentity { scale: b, .. },
                ) => {
                    let fused = LinOp::ScaledIdentity { scale: *a * *b, size: *size };
                    *merged.last_mut().unwrap() = fused;
                }
                _ => merged.push(op),
            }
        }
        if merged.len() == 1 {
            Ok(merged.pop().unwrap())
        } else {
            Ok(LinOp::Composition(Arc::new(merged)))
        }
    }

    /// Plain transpose (not conjugated). Permutations and scaled identities
    /// simplify structurally.
    pub fn transpose(self) -> Self {
        match self {
            LinOp::Permutation(p) => LinOp::Permutation(Arc::new(p.inverse())),
            LinOp::ScaledIdentity { .. } => self,
            LinOp::Transpose(inner) => inner.as_ref().clone(),
            other => LinOp::Transpose(Arc::new(other)),
        }
    }

    pub fn negation(self) -> Self {
        match self {
            LinOp::Negation(inner) => inner.as_ref().clone(),
            other => LinOp::Negation(Arc::new(other)),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            LinOp::Dense(m) => m.nrows(),
            LinOp::Permutation(p) => p.size(),
            LinOp::Sparse(s) => s.rows,
            LinOp::KroneckerProduct(f) => f.iter().map(LinOp::rows).product(),
            LinOp::KroneckerSum(f) => f.iter().map(LinOp::rows).product(),
            LinOp::DirectSum(b) => b.iter().map(LinOp::rows).sum(),
            LinOp::ScaledIdentity { size, .. } => *size,
            LinOp::Composition(ops) => ops[0].rows(),
            LinOp::Transpose(inner) => inner.cols(),
            LinOp::Negation(inner) => inner.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinOp::Dense(m) => m.ncols(),
            LinOp::Permutation(p) => p.size(),
            LinOp::Sparse(s) => s.cols,
            LinOp::KroneckerProduct(f) => f.iter().map(LinOp::cols).product(),
            LinOp::KroneckerSum(f) => f.iter().map(LinOp::cols).product(),
            LinOp::DirectSum(b) => b.iter().map(LinOp::cols).sum(),
            LinOp::ScaledIdentity { size, .. } => *size,
            LinOp::Composition(ops) => ops.last().unwrap().cols(),
            LinOp::Transpose(inner) => inner.rows(),
            LinOp::Negation(inner) => inner.cols(),
        }
    }

    fn in_rows(&self, mode: Apply) -> usize {
        match mode {
            Apply::Plain => self.cols(),
            Apply::Adjoint => self.rows(),
        }
    }

    fn out_rows(&self, mode: Apply) -> usize {
        match mode {
            Apply::Plain => self.rows(),
            Apply::Adjoint => self.cols(),
        }
    }

    /// `op · v` for a single vector.
    pub fn mvm(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols() {
            return Err(Error::Dim(format!(
                "mvm: operator is {}x{}, vector has length {}",
                self.rows(),
                self.cols(),
                v.len()
            )));
        }
        let mut out = vec![T::zero(); self.rows()];
        self.apply_slice(Apply::Plain, v, v.len(), 1, &mut out, false);
        Ok(out)
    }

    /// `opᴴ · v` (conjugate transpose; plain transpose over the reals).
    pub fn adjoint_mvm(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.rows() {
            return Err(Error::Dim(format!(
                "adjoint mvm: operator is {}x{}, vector has length {}",
                self.rows(),
                self.cols(),
                v.len()
            )));
        }
        let mut out = vec![T::zero(); self.cols()];
        self.apply_slice(Apply::Adjoint, v, v.len(), 1, &mut out, false);
        Ok(out)
    }

    /// Apply to a whole block of vectors at once.
    pub fn apply_block(&self, mode: Apply, x: &VecBlock<T>) -> Result<VecBlock<T>> {
        if x.len != self.in_rows(mode) {
            return Err(Error::Dim(format!(
                "block apply: operator is {}x{}, block has {} rows",
                self.rows(),
                self.cols(),
                x.len
            )));
        }
        let mut out = VecBlock::zeros(self.out_rows(mode), x.width);
        self.apply_slice(mode, &x.data, x.len, x.width, &mut out.data, false);
        Ok(out)
    }

    /// Same as [`apply_block`](Self::apply_block) writing into (or
    /// accumulating onto) a caller-provided block.
    pub fn apply_block_into(
        &self,
        mode: Apply,
        x: &VecBlock<T>,
        out: &mut VecBlock<T>,
        accumulate: bool,
    ) -> Result<()> {
        if x.len != self.in_rows(mode) || out.len != self.out_rows(mode) || x.width != out.width {
            return Err(Error::Dim("block apply: shape mismatch".into()));
        }
        self.apply_slice(mode, &x.data, x.len, x.width, &mut out.data, accumulate);
        Ok(())
    }

    /// Core kernel. `x` is `x_rows` rows of `width` scalars; `out` must hold
    /// the matching number of output rows. When `acc` is false `out` is
    /// overwritten, otherwise the result is added to it.
    fn apply_slice(&self, mode: Apply, x: &[T], x_rows: usize, width: usize, out: &mut [T], acc: bool) {
        debug_assert_eq!(x.len(), x_rows * width);
        debug_assert_eq!(out.len(), self.out_rows(mode) * width);
        match self {
            LinOp::ScaledIdentity { scale, .. } => {
                let s = match mode {
                    Apply::Plain => *scale,
                    Apply::Adjoint => scale.conjugate(),
                };
                if acc {
                    for (o, v) in out.iter_mut().zip(x) {
                        *o += s * *v;
                    }
                } else {
                    for (o, v) in out.iter_mut().zip(x) {
                        *o = s * *v;
                    }
                }
            }
            LinOp::Permutation(p) => {
                let map = match mode {
                    Apply::Plain => &p.fwd,
                    Apply::Adjoint => &p.inv,
                };
                if width == 1 {
                    if acc {
                        for (o, &s) in out.iter_mut().zip(map.iter()) {
                            *o += x[s as usize];
                        }
                    } else {
                        for (o, &s) in out.iter_mut().zip(map.iter()) {
                            *o = x[s as usize];
                        }
                    }
                } else {
                    for (i, &s) in map.iter().enumerate() {
                        let src = &x[s as usize * width..(s as usize + 1) * width];
                        let dst = &mut out[i * width..(i + 1) * width];
                        if acc {
                            for (d, v) in dst.iter_mut().zip(src) {
                                *d += *v;
                            }
                        } else {
                            dst.copy_from_slice(src);
                        }
                    }
                }
            }
            LinOp::Dense(m) => {
                if !acc {
                    out.fill(T::zero());
                }
                match mode {
                    Apply::Plain => {
                        // out[i,:] += sum_j m[i,j] x[j,:]
                        for j in 0..m.ncols() {
                            let src = &x[j * width..(j + 1) * width];
                            for i in 0..m.nrows() {
                                let c = m[(i, j)];
                                if c != T::zero() {
                                    let dst = &mut out[i * width..(i + 1) * width];
                                    for (d, v) in dst.iter_mut().zip(src) {
                                        *d += c * *v;
                                    }
                                }
                            }
                        }
                    }
                    Apply::Adjoint => {
                        for i in 0..m.nrows() {
                            let src = &x[i * width..(i + 1) * width];
                            for j in 0..m.ncols() {
                                let c = m[(i, j)].conjugate();
                                if c != T::zero() {
                                    let dst = &mut out[j * width..(j + 1) * width];
                                    for (d, v) in dst.iter_mut().zip(src) {
                                        *d += c * *v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            LinOp::Sparse(s) => {
                if !acc {
                    out.fill(T::zero());
                }
                match mode {
                    Apply::Plain => {
                        for &(r, c, v) in &s.triples {
                            let src = &x[c as usize * width..(c as usize + 1) * width];
                            let dst = &mut out[r as usize * width..(r as usize + 1) * width];
                            for (d, xv) in dst.iter_mut().zip(src) {
                                *d += v * *xv;
                            }
                        }
                    }
                    Apply::Adjoint => {
                        for &(r, c, v) in &s.triples {
                            let vc = v.conjugate();
                            let src = &x[r as usize * width..(r as usize + 1) * width];
                            let dst = &mut out[c as usize * width..(c as usize + 1) * width];
                            for (d, xv) in dst.iter_mut().zip(src) {
                                *d += vc * *xv;
                            }
                        }
                    }
                }
            }
            LinOp::DirectSum(blocks) => {
                let mut xo = 0usize;
                let mut oo = 0usize;
                for b in blocks.iter() {
                    let (bi, bo) = (b.in_rows(mode), b.out_rows(mode));
                    b.apply_slice(
                        mode,
                        &x[xo * width..(xo + bi) * width],
                        bi,
                        width,
                        &mut out[oo * width..(oo + bo) * width],
                        acc,
                    );
                    xo += bi;
                    oo += bo;
                }
            }
            LinOp::KroneckerProduct(factors) => {
                apply_kron(factors, mode, x, width, out, acc);
            }
            LinOp::KroneckerSum(factors) => {
                // X ⊕̄ Y ⊕̄ … applied axis by axis, summing the terms.
                let sizes: Vec<usize> = factors.iter().map(LinOp::rows).collect();
                let total: usize = sizes.iter().product();
                debug_assert_eq!(x_rows, total);
                let mut first = !acc;
                for (i, f) in factors.iter().enumerate() {
                    let inner: usize = sizes[i + 1..].iter().product();
                    let outer: usize = sizes[..i].iter().product();
                    axis_apply(f, mode, x, outer, sizes[i], sizes[i], inner * width, out, !first);
                    first = false;
                }
            }
            LinOp::Composition(ops) => {
                let order: Vec<&LinOp<T>> = match mode {
                    Apply::Plain => ops.iter().rev().collect(),
                    Apply::Adjoint => ops.iter().collect(),
                };
                let mut cur: Vec<T> = x.to_vec();
                let mut cur_rows = x_rows;
                for (k, op) in order.iter().enumerate() {
                    let next_rows = op.out_rows(mode);
                    if k + 1 == order.len() {
                        op.apply_slice(mode, &cur, cur_rows, width, out, acc);
                    } else {
                        let mut next = vec![T::zero(); next_rows * width];
                        op.apply_slice(mode, &cur, cur_rows, width, &mut next, false);
                        cur = next;
                        cur_rows = next_rows;
                    }
                }
            }
            LinOp::Transpose(inner) => {
                // Aᵀ v = conj(Aᴴ conj(v)); over the reals the conjugations
                // vanish and this is just the opposite apply mode.
                let inner_mode = match mode {
                    Apply::Plain => Apply::Adjoint,
                    Apply::Adjoint => Apply::Plain,
                };
                if T::FIELD == crate::field::ScalarField::Real64 {
                    inner.apply_slice(inner_mode, x, x_rows, width, out, acc);
                } else {
                    let xc: Vec<T> = x.iter().map(|v| v.conjugate()).collect();
                    let mut tmp = vec![T::zero(); inner.out_rows(inner_mode) * width];
                    inner.apply_slice(inner_mode, &xc, x_rows, width, &mut tmp, false);
                    if acc {
                        for (o, t) in out.iter_mut().zip(&tmp) {
                            *o += t.conjugate();
                        }
                    } else {
                        for (o, t) in out.iter_mut().zip(&tmp) {
                            *o = t.conjugate();
                        }
                    }
                }
            }
            LinOp::Negation(inner) => {
                if acc {
                    let mut tmp = vec![T::zero(); inner.out_rows(mode) * width];
                    inner.apply_slice(mode, x, x_rows, width, &mut tmp, false);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o -= *t;
                    }
                } else {
                    inner.apply_slice(mode, x, x_rows, width, out, false);
                    for o in out.iter_mut() {
                        *o = -*o;
                    }
                }
            }
        }
    }

    /// Materialize as a dense matrix. Refused above `cap_entries` total
    /// entries; pass `usize::MAX` to force.
    pub fn to_dense(&self, cap_entries: usize) -> Result<DMatrix<T>> {
        let entries = self.rows().saturating_mul(self.cols());
        if entries > cap_entries {
            return Err(Error::SizeCap(format!(
                "{}x{} dense materialization exceeds cap of {} entries",
                self.rows(),
                self.cols(),
                cap_entries
            )));
        }
        Ok(self.to_dense_unchecked())
    }

    fn to_dense_unchecked(&self) -> DMatrix<T> {
        match self {
            LinOp::Dense(m) => m.as_ref().clone(),
            LinOp::Permutation(p) => {
                let n = p.size();
                let mut m = DMatrix::zeros(n, n);
                for (i, &s) in p.fwd.iter().enumerate() {
                    m[(i, s as usize)] = T::one();
                }
                m
            }
            LinOp::Sparse(s) => {
                let mut m = DMatrix::zeros(s.rows, s.cols);
                for &(r, c, v) in &s.triples {
                    m[(r as usize, c as usize)] += v;
                }
                m
            }
            LinOp::KroneckerProduct(factors) => {
                let mut m = factors[0].to_dense_unchecked();
                for f in &factors[1..] {
                    m = m.kronecker(&f.to_dense_unchecked());
                }
                m
            }
            LinOp::KroneckerSum(factors) => {
                let sizes: Vec<usize> = factors.iter().map(LinOp::rows).collect();
                let total: usize = sizes.iter().product();
                let mut m = DMatrix::zeros(total, total);
                for (i, f) in factors.iter().enumerate() {
                    let before: usize = sizes[..i].iter().product();
                    let after: usize = sizes[i + 1..].iter().product();
                    let term = DMatrix::identity(before, before)
                        .kronecker(&f.to_dense_unchecked())
                        .kronecker(&DMatrix::identity(after, after));
                    m += term;
                }
                m
            }
            LinOp::DirectSum(blocks) => {
                let rows = self.rows();
                let cols = self.cols();
                let mut m = DMatrix::zeros(rows, cols);
                let (mut ro, mut co) = (0usize, 0usize);
                for b in blocks.iter() {
                    let bd = b.to_dense_unchecked();
                    m.view_mut((ro, co), (bd.nrows(), bd.ncols())).copy_from(&bd);
                    ro += bd.nrows();
                    co += bd.ncols();
                }
                m
            }
            LinOp::ScaledIdentity { scale, size } => DMatrix::identity(*size, *size) * *scale,
            LinOp::Composition(ops) => {
                let mut m = ops[0].to_dense_unchecked();
                for op in &ops[1..] {
                    m = m * op.to_dense_unchecked();
                }
                m
            }
            LinOp::Transpose(inner) => inner.to_dense_unchecked().transpose(),
            LinOp::Negation(inner) => -inner.to_dense_unchecked(),
        }
    }
}

/// Apply `op` along one tensor axis: the operand is viewed as
/// `(outer, n_in, inner_w)` row-major and `op` maps the middle axis
/// `n_in -> n_out`.
fn axis_apply<T: Scalar>(
    op: &LinOp<T>,
    mode: Apply,
    x: &[T],
    outer: usize,
    n_in: usize,
    n_out: usize,
    inner_w: usize,
    out: &mut [T],
    acc: bool,
) {
    debug_assert_eq!(op.in_rows(mode), n_in);
    debug_assert_eq!(op.out_rows(mode), n_out);
    for o in 0..outer {
        op.apply_slice(
            mode,
            &x[o * n_in * inner_w..(o + 1) * n_in * inner_w],
            n_in,
            inner_w,
            &mut out[o * n_out * inner_w..(o + 1) * n_out * inner_w],
            acc,
        );
    }
}

/// Kronecker-product block apply by iterated axis application; never
/// materializes the product.
fn apply_kron<T: Scalar>(
    factors: &[LinOp<T>],
    mode: Apply,
    x: &[T],
    width: usize,
    out: &mut [T],
    acc: bool,
) {
    let k = factors.len();
    let ins: Vec<usize> = factors.iter().map(|f| f.in_rows(mode)).collect();
    let outs: Vec<usize> = factors.iter().map(|f| f.out_rows(mode)).collect();

    if k == 1 {
        let n_in = ins[0];
        factors[0].apply_slice(mode, x, n_in, width, out, acc);
        return;
    }

    // After processing axis i the buffer has shape
    // (outs[..=i], ins[i+1..], width).
    let mut cur: Vec<T> = Vec::new();
    let mut src_is_x = true;
    for i in 0..k {
        let outer: usize = outs[..i].iter().product();
        let inner: usize = ins[i + 1..].iter().product();
        let dst_len = outer * outs[i] * inner * width;
        if i + 1 == k {
            let src = if src_is_x { x } else { &cur[..] };
            axis_apply(&factors[i], mode, src, outer, ins[i], outs[i], inner * width, out, acc);
        } else {
            let mut dst = vec![T::zero(); dst_len];
            let src = if src_is_x { x } else { &cur[..] };
            axis_apply(&factors[i], mode, src, outer, ins[i], outs[i], inner * width, &mut dst, false);
            cur = dst;
            src_is_x = false;
        }
    }
}

/// Estimate the operator 2-norm by power iteration on `opᴴop`, from a fixed
/// deterministic start vector.
pub fn op_norm_est<T: Scalar>(op: &LinOp<T>, iters: usize) -> f64 {
    use rand::SeedableRng;
    let n = op.cols();
    if n == 0 {
        return 0.0;
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6e6f726d);
    let mut v: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
    let mut lambda = 0.0f64;
    for _ in 0..iters {
        let nv = (v.iter().map(|x| x.modulus_squared()).sum::<f64>()).sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        for x in v.iter_mut() {
            *x = *x * T::from_real(1.0 / nv);
        }
        let w = op.adjoint_mvm(&op.mvm(&v).expect("shape checked")).expect("shape checked");
        lambda = (w.iter().map(|x| x.modulus_squared()).sum::<f64>()).sqrt();
        v = w;
    }
    lambda.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::C64;
    use nalgebra::ComplexField;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    fn randn_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn scaled_identity_mvm() {
        let op = LinOp::scaled_identity(1.0f64, 4);
        assert_eq!(op.mvm(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn cyclic_shift_permutation() {
        // One step of the cyclic shift on four entries.
        let p = Permutation::new(vec![3, 0, 1, 2]).unwrap();
        let op = LinOp::<f64>::permutation(p);
        let (a, b, c, d) = (1.0, 2.0, 3.0, 4.0);
        assert_eq!(op.mvm(&[a, b, c, d]).unwrap(), vec![d, a, b, c]);
        // Adjoint of a permutation is its inverse: exact round trip.
        assert_eq!(op.adjoint_mvm(&[d, a, b, c]).unwrap(), vec![a, b, c, d]);
    }

    #[test]
    fn kronecker_sum_matches_sylvester_form() {
        // (A ⊕̄ B) vec(W) = vec(A W + W Bᵀ) in row-major flattening.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = randn_mat(&mut rng, 3, 3);
        let b = randn_mat(&mut rng, 3, 3);
        let w = randn_mat(&mut rng, 3, 3);
        let op =
            LinOp::kronecker_sum(vec![LinOp::dense(a.clone()), LinOp::dense(b.clone())]).unwrap();
        let vec_w: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| w[(i, j)]).collect();
        let got = op.mvm(&vec_w).unwrap();
        let expect_mat = &a * &w + &w * b.transpose();
        let dense = op.to_dense(usize::MAX).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let k = 3 * i + j;
                assert!((got[k] - expect_mat[(i, j)]).abs() <= 1e-12);
                // explicit dense Kronecker-sum oracle
                let dense_val: f64 = (0..9).map(|l| dense[(k, l)] * vec_w[l]).sum();
                assert!((got[k] - dense_val).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_of_dense_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = randn_mat(&mut rng, 5, 7);
        let op = LinOp::dense(m.clone());
        let v = randn_vec(&mut rng, 5);
        let got = op.adjoint_mvm(&v).unwrap();
        let want = m.transpose() * DMatrix::from_column_slice(5, 1, &v);
        for i in 0..7 {
            assert!((got[i] - want[(i, 0)]).abs() <= 1e-12);
        }
    }

    fn random_op(rng: &mut ChaCha8Rng, depth: usize) -> LinOp<f64> {
        let choice = if depth == 0 { rng.random_range(0..4) } else { rng.random_range(0..8) };
        match choice {
            0 => {
                let (r, c) = (rng.random_range(1..4), rng.random_range(1..4));
                LinOp::dense(randn_mat(rng, r, c))
            }
            1 => {
                let n = rng.random_range(1..5);
                let mut fwd: Vec<u32> = (0..n as u32).collect();
                for i in (1..n).rev() {
                    let j = rng.random_range(0..=i);
                    fwd.swap(i, j);
                }
                LinOp::permutation(Permutation::new(fwd).unwrap())
            }
            2 => LinOp::scaled_identity(rng.sample::<f64, _>(StandardNormal), rng.random_range(1..4)),
            3 => {
                let (r, c) = (rng.random_range(1..4), rng.random_range(1..4));
                let nnz = rng.random_range(0..=(r * c));
                let triples = (0..nnz)
                    .map(|_| {
                        (
                            rng.random_range(0..r) as u32,
                            rng.random_range(0..c) as u32,
                            rng.sample::<f64, _>(StandardNormal),
                        )
                    })
                    .collect();
                LinOp::sparse(r, c, triples).unwrap()
            }
            4 => {
                let k = rng.random_range(2..4);
                LinOp::kronecker_product((0..k).map(|_| random_op(rng, depth - 1)).collect())
                    .unwrap()
            }
            5 => {
                let k = rng.random_range(2..4);
                let factors: Vec<LinOp<f64>> = (0..k)
                    .map(|_| {
                        let n = rng.random_range(1..4);
                        LinOp::dense(randn_mat(rng, n, n))
                    })
                    .collect();
                LinOp::kronecker_sum(factors).unwrap()
            }
            6 => {
                let k = rng.random_range(2..4);
                LinOp::direct_sum((0..k).map(|_| random_op(rng, depth - 1)).collect()).unwrap()
            }
            _ => {
                let inner = random_op(rng, depth - 1);
                let n = inner.rows();
                let m = inner.cols();
                let lr = rng.random_range(1..4);
                let rc = rng.random_range(1..4);
                let left = LinOp::dense(randn_mat(rng, lr, n));
                let right = LinOp::dense(randn_mat(rng, m, rc));
                LinOp::composition(vec![left, inner.transpose().transpose(), right]).unwrap()
            }
        }
    }

    #[test]
    fn structured_mvm_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for case in 0..120 {
            let op = random_op(&mut rng, 2);
            let op = if case % 3 == 0 { op.transpose() } else if case % 3 == 1 { op.negation() } else { op };
            let d = op.to_dense(usize::MAX).unwrap();
            let v = randn_vec(&mut rng, op.cols());
            let got = op.mvm(&v).unwrap();
            let want = &d * DMatrix::from_column_slice(op.cols(), 1, &v);
            let vn: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..op.rows() {
                assert!(
                    (got[i] - want[(i, 0)]).abs() <= 1e-12 * (1.0 + vn),
                    "case {case}: row {i}: {} vs {}",
                    got[i],
                    want[(i, 0)]
                );
            }
            // ⟨Aᴴu, v⟩ = ⟨u, Av⟩
            let u = randn_vec(&mut rng, op.rows());
            let atu = op.adjoint_mvm(&u).unwrap();
            let lhs: f64 = atu.iter().zip(&v).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&got).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())));
            // adjoint of adjoint: apply twice via modes
            let mut back = VecBlock::zeros(op.rows(), 1);
            op.apply_slice(Apply::Plain, &v, v.len(), 1, &mut back.data, false);
            assert_eq!(back.data, got);
        }
    }

    #[test]
    fn complex_adjoint_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = DMatrix::from_fn(4, 3, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let op = LinOp::dense(m).transpose().negation();
        let v: Vec<C64> = (0..op.cols())
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let u: Vec<C64> = (0..op.rows())
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let av = op.mvm(&v).unwrap();
        let ahu = op.adjoint_mvm(&u).unwrap();
        let lhs: C64 = ahu.iter().zip(&v).map(|(a, b)| a.conjugate() * b).sum();
        let rhs: C64 = u.iter().zip(&av).map(|(a, b)| a.conjugate() * b).sum();
        assert!((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
        // consistency with the dense route for complex transpose
        let d = op.to_dense(usize::MAX).unwrap();
        let want = &d * DMatrix::from_column_slice(op.cols(), 1, &v);
        for i in 0..op.rows() {
            assert!((av[i] - want[(i, 0)]).norm() <= 1e-12 * (1.0 + v.iter().map(|x| x.norm()).sum::<f64>()));
        }
    }

    #[test]
    fn to_dense_examples() {
        let si = LinOp::scaled_identity(2.0f64, 2).to_dense(16).unwrap();
        assert_eq!(si, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));

        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let kron = LinOp::kronecker_product(vec![LinOp::identity(2), LinOp::dense(m.clone())])
            .unwrap()
            .to_dense(64)
            .unwrap();
        let mut want = DMatrix::zeros(4, 4);
        want.view_mut((0, 0), (2, 2)).copy_from(&m);
        want.view_mut((2, 2), (2, 2)).copy_from(&m);
        assert_eq!(kron, want);

        let ds = LinOp::direct_sum(vec![LinOp::dense(m.clone()), LinOp::scaled_identity(5.0, 1)])
            .unwrap()
            .to_dense(64)
            .unwrap();
        let mut want = DMatrix::zeros(3, 3);
        want.view_mut((0, 0), (2, 2)).copy_from(&m);
        want[(2, 2)] = 5.0;
        assert_eq!(ds, want);
    }

    #[test]
    fn to_dense_cap_is_enforced() {
        let op = LinOp::scaled_identity(1.0f64, 100);
        assert!(matches!(op.to_dense(99), Err(crate::Error::SizeCap(_))));
    }

    #[test]
    fn empty_constructions_rejected() {
        assert!(LinOp::<f64>::kronecker_product(vec![]).is_err());
        assert!(LinOp::<f64>::direct_sum(vec![]).is_err());
        assert!(LinOp::<f64>::kronecker_sum(vec![]).is_err());
        assert!(LinOp::<f64>::composition(vec![]).is_err());
        let rect = LinOp::dense(DMatrix::<f64>::zeros(2, 3));
        assert!(LinOp::kronecker_sum(vec![rect]).is_err());
    }

    #[test]
    fn composition_is_right_to_left() {
        let a = LinOp::dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        let b = LinOp::dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]));
        // (a ∘ b) v = a (b v)
        let op = LinOp::composition(vec![a, b]).unwrap();
        assert_eq!(op.mvm(&[5.0, 7.0]).unwrap(), vec![14.0, 0.0]);
    }

    #[test]
    fn composition_collapses_adjacent_scaled_identities() {
        let op = LinOp::<f64>::composition(vec![
            LinOp::scaled_identity(2.0, 3),
            LinOp::scaled_identity(3.0, 3),
        ])
        .unwrap();
        assert!(matches!(op, LinOp::ScaledIdentity { scale, .. } if scale == 6.0));
    }

    #[test]
    fn block_apply_matches_per_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let op = random_op(&mut rng, 2);
            let w = rng.random_range(1..5);
            let mut x = VecBlock::zeros(op.cols(), w);
            for v in x.data.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let y = op.apply_block(Apply::Plain, &x).unwrap();
            for j in 0..w {
                let col: Vec<f64> = (0..op.cols()).map(|i| x.data[i * w + j]).collect();
                let want = op.mvm(&col).unwrap();
                for i in 0..op.rows() {
                    assert!((y.data[i * w + j] - want[i]).abs() <= 1e-12 * (1.0 + want[i].abs()));
                }
            }
        }
    }

    #[test]
    fn permutation_block_is_bit_identical() {
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let op = LinOp::<f64>::permutation(p);
        let vals = [0.1 + 0.2, 1.0 / 3.0, std::f64::consts::PI];
        let out = op.mvm(&vals).unwrap();
        assert_eq!(out, vec![vals[2], vals[0], vals[1]]);
    }
}
