//! Matrix groups given by generators, a built-in catalog, and random element
//! sampling.
//!
//! A group is a base dimension, a list of discrete generators and a basis of
//! its Lie algebra, all acting on the base space as [`LinOp`]s. Elements are
//! drawn as `exp(Σ αᵢ Aᵢ) · Π ρ(h_kᵢ)`, which covers a neighborhood of every
//! connected component and is all the equivariance checks need.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{Scalar, ScalarField, C64};
use crate::linop::{LinOp, Permutation};

/// Scaling-and-squaring matrix exponential with a degree-13 Padé core.
///
/// Generators here are small dense matrices (at most 48x48), so one robust
/// fixed-order core is used regardless of norm.
pub fn matrix_exponential<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dim(format!(
            "matrix exponential of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(a.clone());
    }
    if a.iter().any(|x| !x.re().is_finite() || !x.im().is_finite()) {
        return Err(Error::Invalid("matrix exponential of non-finite entries".into()));
    }
    let one_norm = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.modulus()).sum::<f64>())
        .fold(0.0, f64::max);
    const THETA13: f64 = 5.371920351148152;
    let s = if one_norm > THETA13 {
        ((one_norm / THETA13).log2().ceil() as i32).max(0)
    } else {
        0
    };
    let a = a * T::from_real(0.5f64.powi(s));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let c = |k: usize| T::from_real(B[k]);
    let id = DMatrix::<T>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u = &a
        * (&a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9))
            + &a6 * c(7)
            + &a4 * c(5)
            + &a2 * c(3)
            + &id * c(1));
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8))
        + &a6 * c(6)
        + &a4 * c(4)
        + &a2 * c(2)
        + &id * c(0);
    let num = &v + &u;
    let den = &v - &u;
    let mut x = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::Invalid("singular denominator in matrix exponential".into()))?;
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

/// A discrete generator together with its exact inverse.
#[derive(Clone, Debug)]
pub struct DiscreteGen<T: Scalar> {
    pub op: LinOp<T>,
    pub inv: LinOp<T>,
}

impl<T: Scalar> DiscreteGen<T> {
    fn from_permutation(p: Permutation) -> Self {
        let inv = LinOp::permutation(p.inverse());
        DiscreteGen { op: LinOp::permutation(p), inv }
    }

    fn from_op(op: LinOp<T>) -> Result<Self> {
        if let LinOp::Permutation(p) = &op {
            let inv = LinOp::permutation(p.inverse());
            return Ok(DiscreteGen { op, inv });
        }
        let dense = op.to_dense(1 << 26)?;
        let inv = dense
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("discrete generator is not invertible".into()))?;
        Ok(DiscreteGen { op, inv: LinOp::dense(inv) })
    }

    pub fn perm(&self) -> Option<&Permutation> {
        match &self.op {
            LinOp::Permutation(p) => Some(p),
            _ => None,
        }
    }
}

/// A matrix group presented by generators on its base space.
#[derive(Debug)]
pub struct Group<T: Scalar> {
    name: String,
    key: String,
    base_dim: usize,
    discrete: Vec<DiscreteGen<T>>,
    lie: Vec<LinOp<T>>,
    lie_dense: Vec<DMatrix<T>>,
    is_orthogonal: bool,
    is_permutation: bool,
    default_scale: f64,
}

impl<T: Scalar> Group<T> {
    /// General constructor; flags are detected from the generators.
    pub fn from_parts(
        name: impl Into<String>,
        base_dim: usize,
        discrete: Vec<LinOp<T>>,
        lie: Vec<LinOp<T>>,
    ) -> Result<Arc<Self>> {
        let name = name.into();
        if discrete.is_empty() && lie.is_empty() {
            return Err(Error::Invalid(format!("group {name} has no generators")));
        }
        for g in discrete.iter().chain(lie.iter()) {
            if g.rows() != base_dim || g.cols() != base_dim {
                return Err(Error::Dim(format!(
                    "generator of {name} is {}x{}, base dimension is {base_dim}",
                    g.rows(),
                    g.cols()
                )));
            }
        }
        let discrete = discrete
            .into_iter()
            .map(|op| DiscreteGen::from_op(promote_permutation(op)))
            .collect::<Result<Vec<_>>>()?;
        let lie_dense: Vec<DMatrix<T>> =
            lie.iter().map(|a| a.to_dense(1 << 26)).collect::<Result<_>>()?;

        let is_permutation = lie.is_empty() && discrete.iter().all(|g| g.perm().is_some());
        let is_orthogonal = is_permutation || detect_orthogonal(&discrete, &lie_dense);
        let default_scale = if is_orthogonal { 1.0 } else { 0.3 };
        let key = content_key::<T>(&name, base_dim, &discrete, &lie_dense);
        Ok(Arc::new(Group {
            name,
            key,
            base_dim,
            discrete,
            lie,
            lie_dense,
            is_orthogonal,
            is_permutation,
            default_scale,
        }))
    }

    fn catalog(
        name: String,
        base_dim: usize,
        discrete: Vec<DiscreteGen<T>>,
        lie: Vec<LinOp<T>>,
        is_orthogonal: bool,
        is_permutation: bool,
        default_scale: f64,
    ) -> Result<Arc<Self>> {
        let lie_dense: Vec<DMatrix<T>> =
            lie.iter().map(|a| a.to_dense(1 << 26)).collect::<Result<_>>()?;
        Ok(Arc::new(Group {
            key: name.clone(),
            name,
            base_dim,
            discrete,
            lie,
            lie_dense,
            is_orthogonal,
            is_permutation,
            default_scale,
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Stable cache key; catalog groups use their display name, custom groups
    /// hash their generator entries.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn field(&self) -> ScalarField {
        T::FIELD
    }

    pub fn num_discrete(&self) -> usize {
        self.discrete.len()
    }

    pub fn num_lie(&self) -> usize {
        self.lie.len()
    }

    pub fn discrete_gen(&self, k: usize) -> &DiscreteGen<T> {
        &self.discrete[k]
    }

    pub fn lie_gen(&self, i: usize) -> &LinOp<T> {
        &self.lie[i]
    }

    pub fn lie_gen_dense(&self, i: usize) -> &DMatrix<T> {
        &self.lie_dense[i]
    }

    pub fn is_orthogonal(&self) -> bool {
        self.is_orthogonal
    }

    pub fn is_permutation(&self) -> bool {
        self.is_permutation
    }

    pub fn default_scale(&self) -> f64 {
        self.default_scale
    }

    pub fn identity_element(&self) -> GroupElement<T> {
        GroupElement {
            matrix: DMatrix::identity(self.base_dim, self.base_dim),
            perm: self.is_permutation.then(|| Permutation::identity(self.base_dim)),
            alpha: vec![0.0; self.lie.len()],
            word: Vec::new(),
        }
    }

    /// Draw a group element `exp(Σ αᵢAᵢ) · Π ρ(h_kᵢ)` with `αᵢ ~ N(0, scale²)`
    /// and a word of signed generator letters of length uniform in `[0, 2M]`.
    /// Deterministic for a fixed rng state.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Result<GroupElement<T>> {
        if scale <= 0.0 {
            return Err(Error::Invalid("sampling scale must be positive".into()));
        }
        let d = self.lie.len();
        let m = self.discrete.len();
        let alpha: Vec<f64> = (0..d).map(|_| f64::standard_normal(rng) * scale).collect();
        let word: Vec<i32> = if m == 0 {
            Vec::new()
        } else {
            let len = rng.random_range(0..=2 * m);
            (0..len)
                .map(|_| {
                    let k = rng.random_range(1..=m) as i32;
                    if rng.random_range(0..2) == 0 {
                        k
                    } else {
                        -k
                    }
                })
                .collect()
        };
        self.element_from(alpha, word)
    }

    pub fn sample_default<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupElement<T>> {
        self.sample(rng, self.default_scale)
    }

    /// Build the element matrix from provenance data.
    pub fn element_from(&self, alpha: Vec<f64>, word: Vec<i32>) -> Result<GroupElement<T>> {
        if alpha.len() != self.lie.len() {
            return Err(Error::Dim("alpha length must match the Lie basis size".into()));
        }
        let n = self.base_dim;
        let mut matrix = if alpha.iter().any(|&a| a != 0.0) {
            let mut x = DMatrix::<T>::zeros(n, n);
            for (a, gen) in alpha.iter().zip(&self.lie_dense) {
                x += gen * T::from_real(*a);
            }
            matrix_exponential(&x)?
        } else {
            DMatrix::identity(n, n)
        };
        let mut perm = self.is_permutation.then(|| Permutation::identity(n));
        for &k in &word {
            if k == 0 || k.unsigned_abs() as usize > self.discrete.len() {
                return Err(Error::Invalid(format!("word letter {k} out of range")));
            }
            let gen = &self.discrete[(k.unsigned_abs() - 1) as usize];
            let op = if k > 0 { &gen.op } else { &gen.inv };
            matrix = &matrix * op.to_dense(1 << 26)?;
            if let Some(p) = perm.take() {
                let gp = match op {
                    LinOp::Permutation(gp) => gp.as_ref().clone(),
                    _ => unreachable!("permutation group with non-permutation generator"),
                };
                perm = Some(p.product(&gp)?);
            }
        }
        Ok(GroupElement { matrix, perm, alpha, word })
    }
}

/// A sampled group element with its provenance.
#[derive(Clone, Debug)]
pub struct GroupElement<T: Scalar> {
    pub matrix: DMatrix<T>,
    /// Present exactly when the element is a permutation (permutation groups
    /// have no continuous part, so every sampled element qualifies).
    pub perm: Option<Permutation>,
    pub alpha: Vec<f64>,
    pub word: Vec<i32>,
}

impl<T: Scalar> GroupElement<T> {
    pub fn op(&self) -> LinOp<T> {
        match &self.perm {
            Some(p) => LinOp::permutation(p.clone()),
            None => LinOp::dense(self.matrix.clone()),
        }
    }

    /// Inverse as an operator, built from the provenance
    /// (`(e^X · Π h)⁻¹ = Π h⁻¹ · e^{−X}` keeps it well conditioned).
    pub fn inv_op(&self, group: &Group<T>) -> Result<LinOp<T>> {
        if let Some(p) = &self.perm {
            return Ok(LinOp::permutation(p.inverse()));
        }
        let n = group.base_dim();
        let mut m = DMatrix::<T>::identity(n, n);
        for &k in self.word.iter().rev() {
            let gen = group.discrete_gen((k.unsigned_abs() - 1) as usize);
            let op = if k > 0 { &gen.inv } else { &gen.op };
            m = &m * op.to_dense(1 << 26)?;
        }
        if self.alpha.iter().any(|&a| a != 0.0) {
            let mut x = DMatrix::<T>::zeros(n, n);
            for (i, a) in self.alpha.iter().enumerate() {
                x += group.lie_gen_dense(i) * T::from_real(-*a);
            }
            m = &m * matrix_exponential(&x)?;
        }
        Ok(LinOp::dense(m))
    }
}

fn promote_permutation<T: Scalar>(op: LinOp<T>) -> LinOp<T> {
    if let LinOp::Dense(m) = &op {
        if let Some(p) = dense_to_permutation(m) {
            return LinOp::permutation(p);
        }
    }
    op
}

fn dense_to_permutation<T: Scalar>(m: &DMatrix<T>) -> Option<Permutation> {
    if m.nrows() != m.ncols() {
        return None;
    }
    let n = m.nrows();
    let mut fwd = vec![u32::MAX; n];
    for i in 0..n {
        for j in 0..n {
            let x = m[(i, j)];
            if x == T::one() {
                if fwd[i] != u32::MAX {
                    return None;
                }
                fwd[i] = j as u32;
            } else if x != T::zero() {
                return None;
            }
        }
        if fwd[i] == u32::MAX {
            return None;
        }
    }
    Permutation::new(fwd).ok()
}

fn detect_orthogonal<T: Scalar>(discrete: &[DiscreteGen<T>], lie: &[DMatrix<T>]) -> bool {
    // ρ = ρ* requires gᵀg = I for the discrete generators (plain transpose,
    // also over ℂ) and Aᵀ = −A on the algebra.
    let tol = 1e-10;
    for g in discrete {
        let d = match g.op.to_dense(1 << 26) {
            Ok(d) => d,
            Err(_) => return false,
        };
        let n = d.nrows();
        let gt_g = d.transpose() * &d;
        if (gt_g - DMatrix::<T>::identity(n, n)).iter().any(|x| x.modulus() > tol) {
            return false;
        }
    }
    for a in lie {
        let sym = a.transpose() + a;
        if sym.iter().any(|x| x.modulus() > tol) {
            return false;
        }
    }
    true
}

fn content_key<T: Scalar>(
    name: &str,
    base_dim: usize,
    discrete: &[DiscreteGen<T>],
    lie: &[DMatrix<T>],
) -> String {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    h.update((base_dim as u64).to_le_bytes());
    h.update([T::FIELD.tag()]);
    for g in discrete {
        if let Ok(d) = g.op.to_dense(1 << 26) {
            for x in d.iter() {
                h.update(x.re().to_le_bytes());
                h.update(x.im().to_le_bytes());
            }
        }
    }
    for a in lie {
        for x in a.iter() {
            h.update(x.re().to_le_bytes());
            h.update(x.im().to_le_bytes());
        }
    }
    let digest = h.finalize();
    let hex: String = digest.iter().take(12).map(|b| format!("{b:02x}")).collect();
    format!("custom-{name}-{hex}")
}

/// `out[i] = v[fwd[i]]` form of the one-step cyclic shift that maps
/// `[a, b, c, d]` to `[d, a, b, c]`.
pub fn cyclic_shift(n: usize) -> Permutation {
    let fwd: Vec<u32> = (0..n).map(|i| ((i + n - 1) % n) as u32).collect();
    Permutation::new(fwd).expect("cyclic shift is a permutation")
}

fn swap_first_two(n: usize) -> Permutation {
    let mut fwd: Vec<u32> = (0..n as u32).collect();
    if n >= 2 {
        fwd.swap(0, 1);
    }
    Permutation::new(fwd).expect("transposition is a permutation")
}

/// 90° grid rotation on an n×n image flattened row-major.
pub fn rot90(n: usize) -> Permutation {
    let mut fwd = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            fwd[i * n + j] = (j * n + (n - 1 - i)) as u32;
        }
    }
    Permutation::new(fwd).expect("rot90 is a permutation")
}

fn antisym_basis(n: usize) -> Vec<LinOp<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(
                LinOp::sparse(n, n, vec![(i as u32, j as u32, 1.0), (j as u32, i as u32, -1.0)])
                    .unwrap(),
            );
        }
    }
    out
}

fn sign_diag(n: usize, negated: &[usize]) -> LinOp<f64> {
    let triples = (0..n)
        .map(|i| (i as u32, i as u32, if negated.contains(&i) { -1.0 } else { 1.0 }))
        .collect();
    LinOp::sparse(n, n, triples).unwrap()
}

impl Group<f64> {
    /// Cyclic group Z_n acting on n entries by the single-step shift.
    pub fn cyclic(n: usize) -> Result<Arc<Self>> {
        check_param("Z", n)?;
        Group::catalog(
            format!("Z({n})"),
            n,
            vec![DiscreteGen::from_permutation(cyclic_shift(n))],
            vec![],
            true,
            true,
            1.0,
        )
    }

    /// Z_n × Z_n, the 2-d discrete translations on an n×n grid.
    pub fn cyclic_2d(n: usize) -> Result<Arc<Self>> {
        check_param("ZxZ", n)?;
        let p = cyclic_shift(n);
        let id = Permutation::identity(n);
        Group::catalog(
            format!("ZxZ({n})"),
            n * n,
            vec![
                DiscreteGen::from_permutation(p.kron(&id)),
                DiscreteGen::from_permutation(id.kron(&p)),
            ],
            vec![],
            true,
            true,
            1.0,
        )
    }

    /// Symmetric group S_n generated by the n-cycle and the transposition of
    /// the first two entries.
    pub fn symmetric(n: usize) -> Result<Arc<Self>> {
        check_param("S", n)?;
        Group::catalog(
            format!("S({n})"),
            n,
            vec![
                DiscreteGen::from_permutation(cyclic_shift(n)),
                DiscreteGen::from_permutation(swap_first_two(n)),
            ],
            vec![],
            true,
            true,
            1.0,
        )
    }

    /// Dihedral group D_n as a permutation group on the n vertices of a
    /// regular polygon: the rotation plus the reflection `i ↦ (n−i) mod n`.
    pub fn dihedral(n: usize) -> Result<Arc<Self>> {
        check_param("D", n)?;
        let refl: Vec<u32> = (0..n).map(|i| ((n - i) % n) as u32).collect();
        Group::catalog(
            format!("D({n})"),
            n,
            vec![
                DiscreteGen::from_permutation(cyclic_shift(n)),
                DiscreteGen::from_permutation(Permutation::new(refl)?),
            ],
            vec![],
            true,
            true,
            1.0,
        )
    }

    /// The group-convolution symmetry Z₄ ⋉ Z_n², acting on ℝ⁴ ⊗ ℝ^{n²}:
    /// two grid translations and a combined orientation/grid 90° rotation.
    pub fn gcnn(n: usize) -> Result<Arc<Self>> {
        check_param("GCNN", n)?;
        let shift = cyclic_shift(n);
        let id_n = Permutation::identity(n);
        let id4 = Permutation::identity(4);
        let orient = cyclic_shift(4);
        let tx = id4.kron(&shift.kron(&id_n));
        let ty = id4.kron(&id_n.kron(&shift));
        let rot = orient.kron(&rot90(n));
        Group::catalog(
            format!("GCNN({n})"),
            4 * n * n,
            vec![
                DiscreteGen::from_permutation(tx),
                DiscreteGen::from_permutation(ty),
                DiscreteGen::from_permutation(rot),
            ],
            vec![],
            true,
            true,
            1.0,
        )
    }

    /// SO(n): the antisymmetric Lie-algebra basis, no discrete generators.
    pub fn special_orthogonal(n: usize) -> Result<Arc<Self>> {
        check_param("SO", n)?;
        Group::catalog(format!("SO({n})"), n, vec![], antisym_basis(n), true, false, 1.0)
    }

    /// O(n): SO(n) plus the reflection diag(−1, 1, …, 1).
    pub fn orthogonal(n: usize) -> Result<Arc<Self>> {
        check_param("O", n)?;
        let refl = sign_diag(n, &[0]);
        Group::catalog(
            format!("O({n})"),
            n,
            vec![DiscreteGen { op: refl.clone(), inv: refl }],
            antisym_basis(n),
            true,
            false,
            1.0,
        )
    }

    fn lorentz_lie() -> Vec<LinOp<f64>> {
        // Metric diag(1,−1,−1,−1): spatial rotations are antisymmetric,
        // boosts are symmetric in the (0,i) plane.
        let mut lie = Vec::new();
        for i in 1..4usize {
            for j in (i + 1)..4 {
                lie.push(
                    LinOp::sparse(
                        4,
                        4,
                        vec![(i as u32, j as u32, 1.0), (j as u32, i as u32, -1.0)],
                    )
                    .unwrap(),
                );
            }
        }
        for i in 1..4u32 {
            lie.push(LinOp::sparse(4, 4, vec![(0, i, 1.0), (i, 0, 1.0)]).unwrap());
        }
        lie
    }

    /// SO⁺(1,3), the identity component of the Lorentz group.
    pub fn lorentz_proper_orthochronous() -> Result<Arc<Self>> {
        Group::catalog("SO+(1,3)".into(), 4, vec![], Self::lorentz_lie(), false, false, 0.3)
    }

    /// SO(1,3): adds the combined parity/time flip −I.
    pub fn lorentz_special() -> Result<Arc<Self>> {
        let neg = sign_diag(4, &[0, 1, 2, 3]);
        Group::catalog(
            "SO(1,3)".into(),
            4,
            vec![DiscreteGen { op: neg.clone(), inv: neg }],
            Self::lorentz_lie(),
            false,
            false,
            0.3,
        )
    }

    /// O(1,3): −I plus the time-only reversal diag(−1, 1, 1, 1).
    pub fn lorentz_full() -> Result<Arc<Self>> {
        let neg = sign_diag(4, &[0, 1, 2, 3]);
        let time = sign_diag(4, &[0]);
        Group::catalog(
            "O(1,3)".into(),
            4,
            vec![
                DiscreteGen { op: neg.clone(), inv: neg },
                DiscreteGen { op: time.clone(), inv: time },
            ],
            Self::lorentz_lie(),
            false,
            false,
            0.3,
        )
    }

    /// Sp(n) on ℝ^{2n}: basis of {A : AᵀΩ + ΩA = 0} with Ω = [[0, I], [−I, 0]].
    pub fn symplectic(n: usize) -> Result<Arc<Self>> {
        check_param("Sp", n)?;
        let d = 2 * n;
        let mut lie = Vec::new();
        // block [[X, 0], [0, −Xᵀ]] for every unit X
        for i in 0..n {
            for j in 0..n {
                lie.push(
                    LinOp::sparse(
                        d,
                        d,
                        vec![(i as u32, j as u32, 1.0), ((n + j) as u32, (n + i) as u32, -1.0)],
                    )
                    .unwrap(),
                );
            }
        }
        // [[0, Y], [0, 0]] with Y symmetric
        for i in 0..n {
            for j in i..n {
                let mut t = vec![(i as u32, (n + j) as u32, 1.0)];
                if i != j {
                    t.push((j as u32, (n + i) as u32, 1.0));
                }
                lie.push(LinOp::sparse(d, d, t).unwrap());
            }
        }
        // [[0, 0], [Z, 0]] with Z symmetric
        for i in 0..n {
            for j in i..n {
                let mut t = vec![((n + i) as u32, j as u32, 1.0)];
                if i != j {
                    t.push(((n + j) as u32, i as u32, 1.0));
                }
                lie.push(LinOp::sparse(d, d, t).unwrap());
            }
        }
        Group::catalog(format!("Sp({n})"), d, vec![], lie, false, false, 0.3)
    }

    /// The Rubik's cube group on its 48 facets, generated by the six
    /// quarter turns.
    pub fn rubiks() -> Result<Arc<Self>> {
        let gens = rubiks_generators();
        Group::catalog(
            "Rubiks".into(),
            48,
            gens.into_iter().map(DiscreteGen::from_permutation).collect(),
            vec![],
            true,
            true,
            1.0,
        )
    }
}

impl Group<C64> {
    /// SU(n): traceless anti-Hermitian basis over ℂ.
    pub fn special_unitary(n: usize) -> Result<Arc<Self>> {
        if n < 2 {
            return Err(Error::Catalog("SU(n) needs n >= 2".into()));
        }
        let i_unit = C64::new(0.0, 1.0);
        let mut lie = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                lie.push(
                    LinOp::sparse(
                        n,
                        n,
                        vec![
                            (a as u32, b as u32, C64::new(1.0, 0.0)),
                            (b as u32, a as u32, C64::new(-1.0, 0.0)),
                        ],
                    )
                    .unwrap(),
                );
                lie.push(
                    LinOp::sparse(
                        n,
                        n,
                        vec![(a as u32, b as u32, i_unit), (b as u32, a as u32, i_unit)],
                    )
                    .unwrap(),
                );
            }
        }
        for k in 0..(n - 1) {
            lie.push(
                LinOp::sparse(
                    n,
                    n,
                    vec![(k as u32, k as u32, i_unit), ((k + 1) as u32, (k + 1) as u32, -i_unit)],
                )
                .unwrap(),
            );
        }
        Group::catalog(format!("SU({n})"), n, vec![], lie, false, false, 0.3)
    }
}

/// Direct product G_a × G_b acting on the tensor product of the base spaces.
pub fn direct_product<T: Scalar>(a: &Arc<Group<T>>, b: &Arc<Group<T>>) -> Result<Arc<Group<T>>> {
    let (na, nb) = (a.base_dim(), b.base_dim());
    let mut discrete = Vec::new();
    for k in 0..a.num_discrete() {
        let g = a.discrete_gen(k);
        match g.perm() {
            Some(p) => {
                discrete.push(DiscreteGen::from_permutation(p.kron(&Permutation::identity(nb))))
            }
            None => discrete.push(DiscreteGen {
                op: LinOp::kronecker_product(vec![g.op.clone(), LinOp::identity(nb)])?,
                inv: LinOp::kronecker_product(vec![g.inv.clone(), LinOp::identity(nb)])?,
            }),
        }
    }
    for k in 0..b.num_discrete() {
        let g = b.discrete_gen(k);
        match g.perm() {
            Some(p) => {
                discrete.push(DiscreteGen::from_permutation(Permutation::identity(na).kron(p)))
            }
            None => discrete.push(DiscreteGen {
                op: LinOp::kronecker_product(vec![LinOp::identity(na), g.op.clone()])?,
                inv: LinOp::kronecker_product(vec![LinOp::identity(na), g.inv.clone()])?,
            }),
        }
    }
    let mut lie = Vec::new();
    for i in 0..a.num_lie() {
        lie.push(LinOp::kronecker_product(vec![a.lie_gen(i).clone(), LinOp::identity(nb)])?);
    }
    for i in 0..b.num_lie() {
        lie.push(LinOp::kronecker_product(vec![LinOp::identity(na), b.lie_gen(i).clone()])?);
    }
    let lie_dense: Vec<DMatrix<T>> =
        lie.iter().map(|x| x.to_dense(1 << 26)).collect::<Result<_>>()?;
    let is_permutation = a.is_permutation() && b.is_permutation();
    let is_orthogonal = a.is_orthogonal() && b.is_orthogonal();
    let name = format!("{}x{}", a.name(), b.name());
    Ok(Arc::new(Group {
        key: format!("({})x({})", a.key(), b.key()),
        name,
        base_dim: na * nb,
        discrete,
        lie,
        lie_dense,
        is_orthogonal,
        is_permutation,
        default_scale: a.default_scale().min(b.default_scale()),
    }))
}

fn check_param(name: &str, n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::Catalog(format!("{name}(n) needs n >= 1")));
    }
    Ok(())
}

/// Facet permutations of the six Rubik's cube quarter turns, derived from a
/// sticker model rather than hand-written tables.
///
/// Convention: faces are ordered U(+y), D(−y), L(−x), R(+x), F(+z), B(−z);
/// each face enumerates its 8 non-center stickers by scanning a fixed in-face
/// (u, v) frame row-major over offsets {−2, 0, 2}², skipping the center.
/// Facet index = face·8 + local slot. Any consistent convention yields the
/// same subspace ranks; basis vectors depend on it, which is why it is fixed
/// here.
fn rubiks_generators() -> Vec<Permutation> {
    type V3 = [i32; 3];
    fn add(a: V3, b: V3) -> V3 {
        [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
    }
    fn scale(a: V3, s: i32) -> V3 {
        [a[0] * s, a[1] * s, a[2] * s]
    }

    // (normal, u, v) per face
    let faces: [(V3, V3, V3); 6] = [
        ([0, 1, 0], [1, 0, 0], [0, 0, 1]),  // U
        ([0, -1, 0], [1, 0, 0], [0, 0, 1]), // D
        ([-1, 0, 0], [0, 1, 0], [0, 0, 1]), // L
        ([1, 0, 0], [0, 1, 0], [0, 0, 1]),  // R
        ([0, 0, 1], [1, 0, 0], [0, 1, 0]),  // F
        ([0, 0, -1], [1, 0, 0], [0, 1, 0]), // B
    ];

    let mut stickers: Vec<(V3, V3)> = Vec::with_capacity(48);
    let mut slot_of: HashMap<(V3, V3), usize> = HashMap::new();
    for (n, u, v) in faces.iter() {
        for a in [-2i32, 0, 2] {
            for b in [-2i32, 0, 2] {
                if a == 0 && b == 0 {
                    continue;
                }
                let pos = add(add(scale(*n, 3), scale(*u, a)), scale(*v, b));
                let id = stickers.len();
                stickers.push((pos, *n));
                slot_of.insert((pos, *n), id);
            }
        }
    }
    debug_assert_eq!(stickers.len(), 48);

    // quarter-turn rotations about each coordinate axis
    fn rot_x(p: V3) -> V3 {
        [p[0], -p[2], p[1]]
    }
    fn rot_y(p: V3) -> V3 {
        [p[2], p[1], -p[0]]
    }
    fn rot_z(p: V3) -> V3 {
        [-p[1], p[0], p[2]]
    }

    // (layer axis, layer side, rotation) per turn: U, D, L, R, F, B
    let turns: [(usize, i32, fn(V3) -> V3); 6] = [
        (1, 2, rot_y),
        (1, -2, rot_y),
        (0, -2, rot_x),
        (0, 2, rot_x),
        (2, 2, rot_z),
        (2, -2, rot_z),
    ];

    turns
        .iter()
        .map(|&(axis, side, rot)| {
            let mut fwd: Vec<u32> = (0..48).collect();
            for (s, &(pos, normal)) in stickers.iter().enumerate() {
                let in_layer = if side > 0 { pos[axis] >= side } else { pos[axis] <= side };
                if in_layer {
                    let target = slot_of[&(rot(pos), rot(normal))];
                    fwd[target] = s as u32;
                }
            }
            Permutation::new(fwd).expect("face turn is a permutation")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// JSON group files
// ---------------------------------------------------------------------------

/// A group of either scalar field, as produced by the catalog parser or the
/// JSON loader.
#[derive(Clone, Debug)]
pub enum AnyGroup {
    Real(Arc<Group<f64>>),
    Complex(Arc<Group<C64>>),
}

impl AnyGroup {
    pub fn name(&self) -> &str {
        match self {
            AnyGroup::Real(g) => g.name(),
            AnyGroup::Complex(g) => g.name(),
        }
    }

    pub fn field(&self) -> ScalarField {
        match self {
            AnyGroup::Real(_) => ScalarField::Real64,
            AnyGroup::Complex(_) => ScalarField::Complex128,
        }
    }
}

/// Parse a catalog group spec such as `SO(3)`, `S(6)`, `O(1,3)` or `Rubiks`.
pub fn parse_group(spec: &str) -> Result<AnyGroup> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(i) => {
            if !spec.ends_with(')') {
                return Err(Error::Parse(format!("malformed group spec {spec:?}")));
            }
            let inner = &spec[i + 1..spec.len() - 1];
            let args: Vec<usize> = inner
                .split(',')
                .map(|p| {
                    p.trim().parse::<usize>().map_err(|_| {
                        Error::Parse(format!("bad group parameter {p:?} in {spec:?}"))
                    })
                })
                .collect::<Result<_>>()?;
            (&spec[..i], args)
        }
        None => (spec, Vec::new()),
    };
    let one = |args: &[usize]| -> Result<usize> {
        if args.len() == 1 {
            Ok(args[0])
        } else {
            Err(Error::Catalog(format!("{name} expects one parameter")))
        }
    };
    let g = match name {
        "Z" => AnyGroup::Real(Group::cyclic(one(&args)?)?),
        "ZxZ" => AnyGroup::Real(Group::cyclic_2d(one(&args)?)?),
        "S" => AnyGroup::Real(Group::symmetric(one(&args)?)?),
        "D" => AnyGroup::Real(Group::dihedral(one(&args)?)?),
        "GCNN" => AnyGroup::Real(Group::gcnn(one(&args)?)?),
        "SO" => match args.as_slice() {
            [n] => AnyGroup::Real(Group::special_orthogonal(*n)?),
            [1, 3] => AnyGroup::Real(Group::lorentz_special()?),
            _ => return Err(Error::Catalog(format!("unsupported SO signature {args:?}"))),
        },
        "SO+" => match args.as_slice() {
            [1, 3] => AnyGroup::Real(Group::lorentz_proper_orthochronous()?),
            _ => return Err(Error::Catalog("SO+ supports only (1,3)".into())),
        },
        "O" => match args.as_slice() {
            [n] => AnyGroup::Real(Group::orthogonal(*n)?),
            [1, 3] => AnyGroup::Real(Group::lorentz_full()?),
            _ => return Err(Error::Catalog(format!("unsupported O signature {args:?}"))),
        },
        "Sp" => AnyGroup::Real(Group::symplectic(one(&args)?)?),
        "SU" => AnyGroup::Complex(Group::special_unitary(one(&args)?)?),
        "Rubiks" => {
            if !args.is_empty() {
                return Err(Error::Catalog("Rubiks takes no parameters".into()));
            }
            AnyGroup::Real(Group::rubiks()?)
        }
        _ => return Err(Error::Catalog(format!("unknown group {name:?}"))),
    };
    Ok(g)
}

fn entries_json<T: Scalar>(m: &DMatrix<T>) -> serde_json::Value {
    let vals: Vec<serde_json::Value> = (0..m.nrows())
        .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
        .map(|(i, j)| {
            let x = m[(i, j)];
            match T::FIELD {
                ScalarField::Real64 => serde_json::json!(x.re()),
                ScalarField::Complex128 => serde_json::json!([x.re(), x.im()]),
            }
        })
        .collect();
    serde_json::Value::Array(vals)
}

/// Serialize a group definition (dense generator entries, row-major).
pub fn group_to_json<T: Scalar>(g: &Group<T>) -> Result<serde_json::Value> {
    let discrete: Vec<serde_json::Value> = (0..g.num_discrete())
        .map(|k| Ok(entries_json(&g.discrete_gen(k).op.to_dense(1 << 26)?)))
        .collect::<Result<_>>()?;
    let lie: Vec<serde_json::Value> =
        (0..g.num_lie()).map(|i| entries_json(g.lie_gen_dense(i))).collect();
    Ok(serde_json::json!({
        "name": g.name(),
        "field": g.field().to_string(),
        "base_dim": g.base_dim(),
        "discrete_generators": discrete,
        "lie_generators": lie,
    }))
}

fn parse_entry(v: &serde_json::Value) -> Result<(f64, f64)> {
    match v {
        serde_json::Value::Number(x) => Ok((
            x.as_f64().ok_or_else(|| Error::Parse("bad number in group file".into()))?,
            0.0,
        )),
        serde_json::Value::Array(pair) if pair.len() == 2 => {
            let re = pair[0].as_f64().ok_or_else(|| Error::Parse("bad complex entry".into()))?;
            let im = pair[1].as_f64().ok_or_else(|| Error::Parse("bad complex entry".into()))?;
            Ok((re, im))
        }
        _ => Err(Error::Parse("generator entries must be numbers or [re, im] pairs".into())),
    }
}

fn parse_matrix<T: Scalar>(v: &serde_json::Value, n: usize) -> Result<DMatrix<T>> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::Parse("generator must be an array of entries".into()))?;
    if arr.len() != n * n {
        return Err(Error::Parse(format!(
            "generator has {} entries, expected {}",
            arr.len(),
            n * n
        )));
    }
    let mut m = DMatrix::<T>::zeros(n, n);
    for (k, e) in arr.iter().enumerate() {
        let (re, im) = parse_entry(e)?;
        if T::FIELD == ScalarField::Real64 && im != 0.0 {
            return Err(Error::Field("complex entry in a real group file".into()));
        }
        m[(k / n, k % n)] = T::from_re_im(re, im);
    }
    Ok(m)
}

/// Load a group definition from its JSON document.
pub fn group_from_json(doc: &serde_json::Value) -> Result<AnyGroup> {
    let name = doc
        .get("name")
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::Parse("group file: missing name".into()))?
        .to_string();
    let field = match doc.get("field").and_then(|v| v.as_str()) {
        Some("real") | None => ScalarField::Real64,
        Some("complex") => ScalarField::Complex128,
        Some(other) => return Err(Error::Parse(format!("unknown field {other:?}"))),
    };
    let n = doc
        .get("base_dim")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Parse("group file: missing base_dim".into()))?
        as usize;
    let empty = Vec::new();
    let discrete_json =
        doc.get("discrete_generators").and_then(|v| v.as_array()).unwrap_or(&empty);
    let lie_json = doc.get("lie_generators").and_then(|v| v.as_array()).unwrap_or(&empty);

    fn build<T: Scalar>(
        name: String,
        n: usize,
        discrete: &[serde_json::Value],
        lie: &[serde_json::Value],
    ) -> Result<Arc<Group<T>>> {
        let d: Vec<LinOp<T>> = discrete
            .iter()
            .map(|v| Ok(LinOp::dense(parse_matrix::<T>(v, n)?)))
            .collect::<Result<_>>()?;
        let l: Vec<LinOp<T>> = lie
            .iter()
            .map(|v| Ok(LinOp::dense(parse_matrix::<T>(v, n)?)))
            .collect::<Result<_>>()?;
        Group::from_parts(name, n, d, l)
    }

    Ok(match field {
        ScalarField::Real64 => AnyGroup::Real(build::<f64>(name, n, discrete_json, lie_json)?),
        ScalarField::Complex128 => {
            AnyGroup::Complex(build::<C64>(name, n, discrete_json, lie_json)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Truncated Taylor series with pre-scaling, an oracle independent of the
    /// Padé path.
    fn expm_taylor(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let norm = a.norm();
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let a = a * 0.5f64.powi(s);
        let mut sum = DMatrix::<f64>::identity(n, n);
        let mut term = DMatrix::<f64>::identity(n, n);
        for k in 1..=terms {
            term = &term * &a / (k as f64);
            sum += &term;
        }
        let mut x = sum;
        for _ in 0..s {
            x = &x * &x;
        }
        x
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = DMatrix::<f64>::zeros(3, 3);
        let e = matrix_exponential(&z).unwrap();
        assert_eq!(e, DMatrix::identity(3, 3));
    }

    #[test]
    fn expm_rotation_block() {
        let theta: f64 = 0.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = matrix_exponential(&a).unwrap();
        let want =
            DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        assert!((e.clone() - &want).norm() <= 1e-12);
        let taylor = expm_taylor(&a, 30);
        assert!((e - taylor).norm() <= 1e-10);
    }

    #[test]
    fn expm_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a = DMatrix::<f64>::zeros(4, 4);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let v: f64 = f64::standard_normal(&mut rng);
                a[(i, j)] = v;
                a[(j, i)] = -v;
            }
        }
        let e = matrix_exponential(&a).unwrap();
        let einv = matrix_exponential(&(-&a)).unwrap();
        assert!((e * einv - DMatrix::<f64>::identity(4, 4)).norm() <= 1e-10);
    }

    #[test]
    fn expm_matches_taylor_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = DMatrix::<f64>::from_fn(5, 5, |_, _| f64::standard_normal(&mut rng) * 0.8);
            let e = matrix_exponential(&a).unwrap();
            let t = expm_taylor(&a, 40);
            assert!((e.clone() - &t).norm() <= 1e-10 * e.norm().max(1.0));
        }
    }

    #[test]
    fn expm_rejects_non_square() {
        let a = DMatrix::<f64>::zeros(2, 3);
        assert!(matrix_exponential(&a).is_err());
    }

    #[test]
    fn catalog_counts() {
        let s5 = Group::symmetric(5).unwrap();
        assert_eq!(s5.num_discrete(), 2);
        assert_eq!(s5.num_lie(), 0);
        assert_eq!(s5.base_dim(), 5);
        assert!(s5.is_permutation());
        assert!(s5.is_orthogonal());

        let so5 = Group::special_orthogonal(5).unwrap();
        assert_eq!(so5.num_lie(), 10);
        assert_eq!(so5.num_discrete(), 0);

        let rubiks = Group::rubiks().unwrap();
        assert_eq!(rubiks.base_dim(), 48);
        assert_eq!(rubiks.num_discrete(), 6);

        let sp3 = Group::symplectic(3).unwrap();
        assert_eq!(sp3.num_lie(), 21);
        assert_eq!(sp3.base_dim(), 6);

        let su3 = Group::special_unitary(3).unwrap();
        assert_eq!(su3.num_lie(), 8);
    }

    #[test]
    fn discrete_generator_inverse_cancels() {
        for g in [
            parse_group("S(5)").unwrap(),
            parse_group("O(3)").unwrap(),
            parse_group("GCNN(3)").unwrap(),
            parse_group("O(1,3)").unwrap(),
        ] {
            let AnyGroup::Real(g) = g else { unreachable!() };
            for k in 0..g.num_discrete() {
                let gen = g.discrete_gen(k);
                let n = g.base_dim();
                let v: Vec<f64> = (0..n).map(|i| (i as f64) - 1.5).collect();
                let round = gen.inv.mvm(&gen.op.mvm(&v).unwrap()).unwrap();
                for i in 0..n {
                    assert!((round[i] - v[i]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rubiks_turns_have_order_four() {
        let g = Group::rubiks().unwrap();
        for k in 0..6 {
            let p = g.discrete_gen(k).perm().unwrap().clone();
            let mut q = p.clone();
            for _ in 0..3 {
                q = q.product(&p).unwrap();
            }
            assert!(q.is_identity(), "turn {k} does not have order 4");
            assert!(!p.is_identity());
        }
    }

    #[test]
    fn rot90_has_order_four() {
        for n in [2, 3, 5] {
            let p = rot90(n);
            let mut q = p.clone();
            for _ in 0..3 {
                q = q.product(&p).unwrap();
            }
            assert!(q.is_identity());
        }
    }

    #[test]
    fn lie_bases_satisfy_defining_relations() {
        // so(n): antisymmetric
        let g = Group::special_orthogonal(4).unwrap();
        for i in 0..g.num_lie() {
            let a = g.lie_gen_dense(i);
            assert!((a.transpose() + a).norm() <= 1e-12);
        }
        // sp(n): AᵀΩ + ΩA = 0
        let g = Group::symplectic(2).unwrap();
        let mut omega = DMatrix::<f64>::zeros(4, 4);
        for i in 0..2 {
            omega[(i, 2 + i)] = 1.0;
            omega[(2 + i, i)] = -1.0;
        }
        for i in 0..g.num_lie() {
            let a = g.lie_gen_dense(i);
            assert!((a.transpose() * &omega + &omega * a).norm() <= 1e-12);
        }
        // so(1,3): Aᵀη + ηA = 0
        let g = Group::lorentz_proper_orthochronous().unwrap();
        let eta = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, -1.0, -1.0, -1.0,
        ]));
        for i in 0..g.num_lie() {
            let a = g.lie_gen_dense(i);
            assert!((a.transpose() * &eta + &eta * a).norm() <= 1e-12);
        }
        // su(n): anti-Hermitian and traceless
        let g = Group::special_unitary(3).unwrap();
        for i in 0..g.num_lie() {
            let a = g.lie_gen_dense(i);
            assert!((a.adjoint() + a).norm() <= 1e-12);
            assert!(a.trace().norm() <= 1e-12);
        }
    }

    #[test]
    fn lie_bases_are_linearly_independent() {
        fn gram_rank<T: Scalar>(g: &Group<T>) -> usize {
            let d = g.num_lie();
            let mut gram = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    let (a, b) = (g.lie_gen_dense(i), g.lie_gen_dense(j));
                    gram[(i, j)] =
                        a.iter().zip(b.iter()).map(|(x, y)| (x.conjugate() * *y).re()).sum();
                }
            }
            gram.svd(false, false).singular_values.iter().filter(|&&s| s > 1e-9).count()
        }
        let so = Group::special_orthogonal(5).unwrap();
        assert_eq!(gram_rank(so.as_ref()), 10);
        let sp = Group::symplectic(2).unwrap();
        assert_eq!(gram_rank(sp.as_ref()), 10);
        let su = Group::special_unitary(3).unwrap();
        assert_eq!(gram_rank(su.as_ref()), 8);
        let lo = Group::lorentz_full().unwrap();
        assert_eq!(gram_rank(lo.as_ref()), 6);
    }

    #[test]
    fn sampled_identity() {
        let g = Group::special_orthogonal(3).unwrap();
        let e = g.element_from(vec![0.0; 3], vec![]).unwrap();
        assert_eq!(e.matrix, DMatrix::identity(3, 3));
    }

    #[test]
    fn sampled_so3_is_orthogonal() {
        let g = Group::special_orthogonal(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let e = g.sample_default(&mut rng).unwrap();
            let r = &e.matrix;
            assert!((r.transpose() * r - DMatrix::<f64>::identity(3, 3)).norm() <= 1e-9);
            let det = r.determinant();
            assert!((det - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn sampled_lorentz_preserves_metric() {
        let g = Group::lorentz_full().unwrap();
        let eta = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![
            1.0, -1.0, -1.0, -1.0,
        ]));
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let e = g.sample_default(&mut rng).unwrap();
            let l = &e.matrix;
            assert!((l.transpose() * &eta * l - &eta).norm() <= 1e-8);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = Group::orthogonal(3).unwrap();
        let a = g.sample_default(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = g.sample_default(&mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.word, b.word);
    }

    #[test]
    fn element_inverse_matches() {
        let g = Group::lorentz_full().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let e = g.sample_default(&mut rng).unwrap();
        let inv = e.inv_op(&g).unwrap().to_dense(1 << 20).unwrap();
        assert!((&e.matrix * inv - DMatrix::<f64>::identity(4, 4)).norm() <= 1e-9);
    }

    #[test]
    fn permutation_elements_track_their_matrix() {
        let g = Group::rubiks().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..5 {
            let e = g.sample_default(&mut rng).unwrap();
            let p = e.perm.as_ref().expect("permutation group elements carry a permutation");
            let op = LinOp::<f64>::permutation(p.clone());
            let d = op.to_dense(1 << 22).unwrap();
            assert_eq!(d, e.matrix);
        }
    }

    #[test]
    fn group_json_round_trip() {
        let g = Group::cyclic(4).unwrap();
        let doc = group_to_json(g.as_ref()).unwrap();
        let AnyGroup::Real(back) = group_from_json(&doc).unwrap() else { unreachable!() };
        assert_eq!(back.base_dim(), 4);
        assert_eq!(back.num_discrete(), 1);
        assert!(back.is_permutation(), "0/1 dense generators are promoted to permutations");
        assert!(back.is_orthogonal());

        let su = Group::special_unitary(2).unwrap();
        let doc = group_to_json(su.as_ref()).unwrap();
        let AnyGroup::Complex(back) = group_from_json(&doc).unwrap() else { unreachable!() };
        assert_eq!(back.num_lie(), 3);
        assert!(!back.is_orthogonal());
    }

    #[test]
    fn parse_group_specs() {
        assert!(matches!(parse_group("SU(3)").unwrap(), AnyGroup::Complex(_)));
        assert_eq!(parse_group("SO+(1,3)").unwrap().name(), "SO+(1,3)");
        assert_eq!(parse_group("O(1,3)").unwrap().name(), "O(1,3)");
        assert_eq!(parse_group("Z(7)").unwrap().name(), "Z(7)");
        assert!(parse_group("Q(3)").is_err());
        assert!(parse_group("SO+(2,2)").is_err());
    }
}
