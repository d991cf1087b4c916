//! Dense complex tensors with named, dimensioned indices, the pure/mixed
//! Choi representations and the link products.
//!
//! Contraction is always by label *name*, never by position. Amplitudes are
//! stored row-major over the declared label order.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

pub type C64 = Complex64;

/// Default absolute tolerance for unitarity/Hermiticity/equality checks.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Reserved separator for internal row/column name mangling.
const MANGLE: char = '\u{a7}'; // '§'

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("label `{0}` appears more than once")]
    DuplicateLabel(String),
    #[error("label `{0}` has zero dimension")]
    ZeroDim(String),
    #[error("label `{0}` contains the reserved character `{MANGLE}`")]
    ReservedName(String),
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch on label `{name}`: {left} vs {right}")]
    DimMismatch {
        name: String,
        left: usize,
        right: usize,
    },
    #[error("amplitude count {got} does not match label dimension product {expected}")]
    ShapeMismatch { got: usize, expected: usize },
    #[error("`{0:?}` is not a permutation of the tensor labels")]
    BadPermutation(Vec<String>),
    #[error("relabeling is not a bijection on names")]
    BadRelabel,
    #[error("label sets differ: `{0}` present on one side only")]
    LabelSetMismatch(String),
    #[error("matrix shape {rows}x{cols} does not match labels ({out_dim}x{in_dim})")]
    MatrixShape {
        rows: usize,
        cols: usize,
        out_dim: usize,
        in_dim: usize,
    },
    #[error("block is not an isometry: residual {residual:.3e} exceeds tol {tol:.1e}")]
    NotIsometry { residual: f64, tol: f64 },
    #[error("operator is not Hermitian: residual {residual:.3e} exceeds tol {tol:.1e}")]
    NotHermitian { residual: f64, tol: f64 },
    #[error("index {index} out of range for label `{name}` of dimension {dim}")]
    IndexOutOfRange {
        name: String,
        index: usize,
        dim: usize,
    },
}

type Result<T> = std::result::Result<T, TensorError>;

/// A named quantum system carried by one tensor leg.
#[derive(Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        SystemLabel {
            name: name.into(),
            dim,
        }
    }

    /// Qubit shorthand.
    pub fn qubit(name: impl Into<String>) -> Self {
        SystemLabel::new(name, 2)
    }
}

impl fmt::Debug for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.dim)
    }
}

pub fn label_dims(labels: &[SystemLabel]) -> Vec<usize> {
    labels.iter().map(|l| l.dim).collect()
}

pub fn total_dim(labels: &[SystemLabel]) -> usize {
    labels.iter().map(|l| l.dim).product()
}

fn check_labels(labels: &[SystemLabel]) -> Result<()> {
    for l in labels {
        if l.name.contains(MANGLE) {
            return Err(TensorError::ReservedName(l.name.clone()));
        }
    }
    check_labels_internal(labels)
}

/// Like [`check_labels`] but allows the internal row/col mangling.
fn check_labels_internal(labels: &[SystemLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if l.dim == 0 {
            return Err(TensorError::ZeroDim(l.name.clone()));
        }
        if !seen.insert(l.name.as_str()) {
            return Err(TensorError::DuplicateLabel(l.name.clone()));
        }
    }
    Ok(())
}

/// Row-major strides for the given dimensions.
fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// Reorder `amps` (row-major over `dims`) so that axis `perm[k]` of the
/// source becomes axis `k` of the destination.
fn permute_amps(amps: &[C64], dims: &[usize], perm: &[usize]) -> Vec<C64> {
    let rank = dims.len();
    if rank == 0 || perm.iter().enumerate().all(|(k, &p)| k == p) {
        return amps.to_vec();
    }
    let dst_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let dst_strides = strides(&dst_dims);
    // stride of source axis `ax` inside the destination layout
    let mut sstride = vec![0usize; rank];
    for (k, &p) in perm.iter().enumerate() {
        sstride[p] = dst_strides[k];
    }
    let mut out = vec![C64::zero(); amps.len()];
    let mut idx = vec![0usize; rank];
    let mut dst = 0usize;
    for &a in amps {
        out[dst] = a;
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            dst += sstride[ax];
            if idx[ax] < dims[ax] {
                break;
            }
            dst -= dims[ax] * sstride[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// `a` is m×k, `b` is k×n, both row-major. The contraction partners here
/// are frequently permutation-like, so sparse factors on either side take
/// dedicated paths; the dense path skips zero entries of `a`.
fn matmul(a: &[C64], m: usize, k: usize, b: &[C64], n: usize) -> Vec<C64> {
    let mut c = vec![C64::zero(); m * n];
    // sample-count b's sparsity (exact count is one cheap pass)
    let nnz_b = b.iter().filter(|v| !v.is_zero()).count();
    if nnz_b * 4 < k * n {
        let entries: Vec<(usize, usize, C64)> = b
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(idx, v)| (idx / n, idx % n, *v))
            .collect();
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            let crow = &mut c[i * n..(i + 1) * n];
            for &(l, j, v) in &entries {
                let al = arow[l];
                if !al.is_zero() {
                    crow[j] += al * v;
                }
            }
        }
        return c;
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for l in 0..k {
            let ail = a[i * k + l];
            if ail.is_zero() {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (cv, bv) in crow.iter_mut().zip(brow) {
                *cv += ail * bv;
            }
        }
    }
    c
}

/// A complex tensor indexed by named, dimensioned system labels.
///
/// The pure Choi representation of maps lives here: a tensor over
/// `in_labels ∪ out_labels` carries the double-ket of the map.
#[derive(Clone, PartialEq)]
pub struct LabeledTensor {
    labels: Vec<SystemLabel>,
    amps: Vec<C64>,
}

impl fmt::Debug for LabeledTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LabeledTensor({:?}, {} amps, norm² {:.6})",
            self.labels,
            self.amps.len(),
            self.norm_sq()
        )
    }
}

impl LabeledTensor {
    pub fn new(labels: Vec<SystemLabel>, amps: Vec<C64>) -> Result<Self> {
        check_labels(&labels)?;
        Self::from_parts(labels, amps)
    }

    /// Internal constructor for tensors derived from already-validated ones.
    fn from_parts(labels: Vec<SystemLabel>, amps: Vec<C64>) -> Result<Self> {
        check_labels_internal(&labels)?;
        let expected = total_dim(&labels);
        if amps.len() != expected {
            return Err(TensorError::ShapeMismatch {
                got: amps.len(),
                expected,
            });
        }
        Ok(LabeledTensor { labels, amps })
    }

    pub fn scalar(value: C64) -> Self {
        LabeledTensor {
            labels: vec![],
            amps: vec![value],
        }
    }

    pub fn zeros(labels: Vec<SystemLabel>) -> Result<Self> {
        let n = total_dim(&labels);
        LabeledTensor::new(labels, vec![C64::zero(); n])
    }

    /// Computational basis vector |k⟩ on a single label.
    pub fn basis_ket(label: SystemLabel, k: usize) -> Result<Self> {
        if k >= label.dim {
            return Err(TensorError::IndexOutOfRange {
                name: label.name.clone(),
                index: k,
                dim: label.dim,
            });
        }
        let mut amps = vec![C64::zero(); label.dim];
        amps[k] = C64::new(1.0, 0.0);
        LabeledTensor::new(vec![label], amps)
    }

    /// State vector on a single label.
    pub fn ket(label: SystemLabel, amps: Vec<C64>) -> Result<Self> {
        LabeledTensor::new(vec![label], amps)
    }

    pub fn from_fn(labels: Vec<SystemLabel>, f: impl Fn(&[usize]) -> C64) -> Result<Self> {
        check_labels(&labels)?;
        let dims = label_dims(&labels);
        let n = total_dim(&labels);
        let mut amps = Vec::with_capacity(n);
        let mut idx = vec![0usize; labels.len()];
        for _ in 0..n {
            amps.push(f(&idx));
            for ax in (0..labels.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        LabeledTensor::new(labels, amps)
    }

    pub fn labels(&self) -> &[SystemLabel] {
        &self.labels
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    pub fn dim_of(&self, name: &str) -> Option<usize> {
        self.position(name).map(|p| self.labels[p].dim)
    }

    pub fn has_label(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    /// Rename labels according to `(old, new)` pairs. The map must be
    /// injective and must not collide with untouched names.
    pub fn relabel(&self, map: &[(&str, &str)]) -> Result<Self> {
        let mut labels = self.labels.clone();
        let mut touched = HashSet::new();
        for &(old, new) in map {
            if !touched.insert(old) {
                return Err(TensorError::BadRelabel);
            }
            let p = self
                .position(old)
                .ok_or_else(|| TensorError::UnknownLabel(old.to_string()))?;
            labels[p].name = new.to_string();
        }
        check_labels_internal(&labels).map_err(|_| TensorError::BadRelabel)?;
        Ok(LabeledTensor {
            labels,
            amps: self.amps.clone(),
        })
    }

    /// Reorder legs into the order given by `order` (a permutation of the
    /// label names). Amplitudes are repositioned consistently.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(TensorError::BadPermutation(
                order.iter().map(|s| s.to_string()).collect(),
            ));
        }
        let mut perm = Vec::with_capacity(order.len());
        let mut seen = HashSet::new();
        for &name in order {
            let p = self
                .position(name)
                .ok_or_else(|| TensorError::BadPermutation(vec![name.to_string()]))?;
            if !seen.insert(p) {
                return Err(TensorError::BadPermutation(vec![name.to_string()]));
            }
            perm.push(p);
        }
        let dims = label_dims(&self.labels);
        let amps = permute_amps(&self.amps, &dims, &perm);
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        LabeledTensor::from_parts(labels, amps)
    }

    /// Tensor product. Labels must be disjoint.
    pub fn tensor(&self, other: &LabeledTensor) -> Result<Self> {
        for l in &other.labels {
            if self.has_label(&l.name) {
                return Err(TensorError::DuplicateLabel(l.name.clone()));
            }
        }
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for &a in &self.amps {
            for &b in &other.amps {
                amps.push(a * b);
            }
        }
        LabeledTensor::from_parts(labels, amps)
    }

    /// Link product: contracts Σᵢ ⟨i|_Y `self` ⊗ ⟨i|_Y `other` over every
    /// label name shared by the two operands. Disjoint label sets reduce to
    /// the tensor product, identical label sets to the scalar aᵀb.
    pub fn link(&self, other: &LabeledTensor) -> Result<Self> {
        let shared: Vec<String> = self
            .labels
            .iter()
            .filter(|l| other.has_label(&l.name))
            .map(|l| l.name.clone())
            .collect();
        for name in &shared {
            let da = self.dim_of(name).unwrap();
            let db = other.dim_of(name).unwrap();
            if da != db {
                return Err(TensorError::DimMismatch {
                    name: name.clone(),
                    left: da,
                    right: db,
                });
            }
        }
        if shared.is_empty() {
            return self.tensor(other);
        }
        let open_a: Vec<&str> = self
            .labels
            .iter()
            .filter(|l| !shared.contains(&l.name))
            .map(|l| l.name.as_str())
            .collect();
        let open_b: Vec<&str> = other
            .labels
            .iter()
            .filter(|l| !shared.contains(&l.name))
            .map(|l| l.name.as_str())
            .collect();
        let shared_dim: usize = shared
            .iter()
            .map(|n| self.dim_of(n).unwrap())
            .product();

        let mut order_a: Vec<&str> = open_a.clone();
        order_a.extend(shared.iter().map(|s| s.as_str()));
        let pa = self.permute(&order_a)?;
        let mut order_b: Vec<&str> = shared.iter().map(|s| s.as_str()).collect();
        order_b.extend(open_b.iter());
        let pb = other.permute(&order_b)?;

        let m = pa.amps.len() / shared_dim;
        let n = pb.amps.len() / shared_dim;
        let amps = matmul(&pa.amps, m, shared_dim, &pb.amps, n);
        let mut labels: Vec<SystemLabel> = pa.labels[..open_a.len()].to_vec();
        labels.extend_from_slice(&pb.labels[shared.len()..]);
        LabeledTensor::from_parts(labels, amps)
    }

    pub fn conj(&self) -> Self {
        LabeledTensor {
            labels: self.labels.clone(),
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        LabeledTensor {
            labels: self.labels.clone(),
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Elementwise sum; `other` may carry the same labels in any order.
    pub fn add(&self, other: &LabeledTensor) -> Result<Self> {
        let aligned = other.align_to(self)?;
        let amps = self
            .amps
            .iter()
            .zip(&aligned.amps)
            .map(|(a, b)| a + b)
            .collect();
        Ok(LabeledTensor {
            labels: self.labels.clone(),
            amps,
        })
    }

    pub fn sub(&self, other: &LabeledTensor) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Permute `self` into the exact label order of `target`.
    pub fn align_to(&self, target: &LabeledTensor) -> Result<Self> {
        for l in &self.labels {
            if !target.has_label(&l.name) {
                return Err(TensorError::LabelSetMismatch(l.name.clone()));
            }
        }
        if self.labels.len() != target.labels.len() {
            return Err(TensorError::LabelSetMismatch(String::from("<arity>")));
        }
        let order: Vec<&str> = target.labels.iter().map(|l| l.name.as_str()).collect();
        self.permute(&order)
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Max-norm distance after aligning label orders.
    pub fn max_diff(&self, other: &LabeledTensor) -> Result<f64> {
        let aligned = other.align_to(self)?;
        Ok(self
            .amps
            .iter()
            .zip(&aligned.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Fix label `name` to basis index `k`, removing the leg.
    pub fn slice(&self, name: &str, k: usize) -> Result<Self> {
        let p = self
            .position(name)
            .ok_or_else(|| TensorError::UnknownLabel(name.to_string()))?;
        let dim = self.labels[p].dim;
        if k >= dim {
            return Err(TensorError::IndexOutOfRange {
                name: name.to_string(),
                index: k,
                dim,
            });
        }
        // move the sliced axis to the front, then take the k-th block
        let mut order: Vec<&str> = vec![name];
        order.extend(
            self.labels
                .iter()
                .filter(|l| l.name != name)
                .map(|l| l.name.as_str()),
        );
        let perm = self.permute(&order)?;
        let block = perm.amps.len() / dim;
        let amps = perm.amps[k * block..(k + 1) * block].to_vec();
        LabeledTensor::from_parts(perm.labels[1..].to_vec(), amps)
    }

    /// Amplitude at a fully specified multi-index given as `(name, index)`
    /// pairs covering every label.
    pub fn amp_at(&self, assignment: &[(&str, usize)]) -> Result<C64> {
        if assignment.len() != self.labels.len() {
            return Err(TensorError::LabelSetMismatch(String::from("<arity>")));
        }
        let dims = label_dims(&self.labels);
        let st = strides(&dims);
        let mut lin = 0usize;
        for &(name, k) in assignment {
            let p = self
                .position(name)
                .ok_or_else(|| TensorError::UnknownLabel(name.to_string()))?;
            if k >= dims[p] {
                return Err(TensorError::IndexOutOfRange {
                    name: name.to_string(),
                    index: k,
                    dim: dims[p],
                });
            }
            lin += k * st[p];
        }
        Ok(self.amps[lin])
    }

    pub fn nonzero_count(&self, tol: f64) -> usize {
        self.amps.iter().filter(|a| a.norm() > tol).count()
    }
}

/// Σᵢ |i⟩^Y |i⟩^Z — the pure Choi representation of the identity channel
/// between two isomorphic systems.
pub fn identity_dket(y: &SystemLabel, z: &SystemLabel) -> Result<LabeledTensor> {
    if y.dim != z.dim {
        return Err(TensorError::DimMismatch {
            name: format!("{}/{}", y.name, z.name),
            left: y.dim,
            right: z.dim,
        });
    }
    let mut amps = vec![C64::zero(); y.dim * z.dim];
    for i in 0..y.dim {
        amps[i * z.dim + i] = C64::new(1.0, 0.0);
    }
    LabeledTensor::new(vec![y.clone(), z.clone()], amps)
}

/// A linear block mapping ⊗`in_labels` to ⊗`out_labels`, stored row-major
/// as a (∏ out dims) × (∏ in dims) matrix.
#[derive(Clone, PartialEq)]
pub struct UnitaryBlock {
    pub in_labels: Vec<SystemLabel>,
    pub out_labels: Vec<SystemLabel>,
    pub matrix: Vec<C64>,
}

impl fmt::Debug for UnitaryBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "UnitaryBlock({:?} -> {:?})",
            self.in_labels, self.out_labels
        )
    }
}

impl UnitaryBlock {
    /// Construct and verify ‖U†U − 𝟙‖_max ≤ tol. Isometries (strictly more
    /// output than input dimension) pass; true unitaries also have equal
    /// dimensions.
    pub fn new(
        in_labels: Vec<SystemLabel>,
        out_labels: Vec<SystemLabel>,
        matrix: Vec<C64>,
        tol: f64,
    ) -> Result<Self> {
        let b = UnitaryBlock::new_raw(in_labels, out_labels, matrix)?;
        let residual = b.isometry_residual();
        if residual > tol {
            return Err(TensorError::NotIsometry { residual, tol });
        }
        Ok(b)
    }

    /// Construct without the isometry check (Kraus operators, general blocks).
    pub fn new_raw(
        in_labels: Vec<SystemLabel>,
        out_labels: Vec<SystemLabel>,
        matrix: Vec<C64>,
    ) -> Result<Self> {
        check_labels(&in_labels)?;
        check_labels(&out_labels)?;
        let in_dim = total_dim(&in_labels);
        let out_dim = total_dim(&out_labels);
        if matrix.len() != in_dim * out_dim {
            return Err(TensorError::MatrixShape {
                rows: matrix.len() / in_dim.max(1),
                cols: in_dim,
                out_dim,
                in_dim,
            });
        }
        Ok(UnitaryBlock {
            in_labels,
            out_labels,
            matrix,
        })
    }

    /// Basis-to-basis map: column |in⟩ carries |f(in)⟩. `f` receives the
    /// multi-index over `in_labels` and must return one over `out_labels`.
    pub fn basis_map(
        in_labels: Vec<SystemLabel>,
        out_labels: Vec<SystemLabel>,
        f: impl Fn(&[usize]) -> Vec<usize>,
    ) -> Result<Self> {
        check_labels(&in_labels)?;
        check_labels(&out_labels)?;
        let in_dims = label_dims(&in_labels);
        let out_dims = label_dims(&out_labels);
        let in_dim = total_dim(&in_labels);
        let out_dim = total_dim(&out_labels);
        let out_strides = strides(&out_dims);
        let mut matrix = vec![C64::zero(); in_dim * out_dim];
        let mut idx = vec![0usize; in_dims.len()];
        for col in 0..in_dim {
            let out_idx = f(&idx);
            assert_eq!(out_idx.len(), out_dims.len(), "basis_map arity");
            let mut row = 0usize;
            for (ax, &k) in out_idx.iter().enumerate() {
                assert!(k < out_dims[ax], "basis_map range");
                row += k * out_strides[ax];
            }
            matrix[row * in_dim + col] = C64::new(1.0, 0.0);
            for ax in (0..in_dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < in_dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        UnitaryBlock::new_raw(in_labels, out_labels, matrix)
    }

    /// Identity wiring between equal-dimension label lists (the canonical
    /// isomorphism |i⟩ ↦ |i⟩ on linear indices).
    pub fn wire(in_labels: Vec<SystemLabel>, out_labels: Vec<SystemLabel>) -> Result<Self> {
        let in_dim = total_dim(&in_labels);
        let out_dim = total_dim(&out_labels);
        if in_dim != out_dim {
            return Err(TensorError::DimMismatch {
                name: String::from("<wire>"),
                left: in_dim,
                right: out_dim,
            });
        }
        check_labels(&in_labels)?;
        check_labels(&out_labels)?;
        let mut matrix = vec![C64::zero(); in_dim * out_dim];
        for i in 0..in_dim {
            matrix[i * in_dim + i] = C64::new(1.0, 0.0);
        }
        UnitaryBlock::new_raw(in_labels, out_labels, matrix)
    }

    pub fn in_dim(&self) -> usize {
        total_dim(&self.in_labels)
    }

    pub fn out_dim(&self) -> usize {
        total_dim(&self.out_labels)
    }

    /// ‖U†U − 𝟙‖_max over the input space.
    pub fn isometry_residual(&self) -> f64 {
        let n = self.in_dim();
        let m = self.out_dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::zero();
                for r in 0..m {
                    acc += self.matrix[r * n + i].conj() * self.matrix[r * n + j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    /// ‖U†U − 𝟙‖ and ‖UU† − 𝟙‖ both within tol (square unitary).
    pub fn unitarity_residual(&self) -> f64 {
        if self.in_dim() != self.out_dim() {
            return f64::INFINITY;
        }
        let n = self.in_dim();
        let mut worst = self.isometry_residual();
        for i in 0..n {
            for j in i..n {
                let mut acc = C64::zero();
                for c in 0..n {
                    acc += self.matrix[i * n + c] * self.matrix[j * n + c].conj();
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() <= tol
    }

    /// Adjoint block; output and input label lists swap roles.
    pub fn dagger(&self) -> UnitaryBlock {
        let n = self.in_dim();
        let m = self.out_dim();
        let mut matrix = vec![C64::zero(); n * m];
        for r in 0..m {
            for c in 0..n {
                matrix[c * m + r] = self.matrix[r * n + c].conj();
            }
        }
        UnitaryBlock {
            in_labels: self.out_labels.clone(),
            out_labels: self.in_labels.clone(),
            matrix,
        }
    }

    /// Matrix composition `self · other` (apply `other` first). `self`'s
    /// input labels must match `other`'s output labels as a set; the legs
    /// are aligned by name before multiplying.
    pub fn compose(&self, other: &UnitaryBlock) -> Result<UnitaryBlock> {
        for l in &self.in_labels {
            let found = other
                .out_labels
                .iter()
                .find(|o| o.name == l.name)
                .ok_or_else(|| TensorError::UnknownLabel(l.name.clone()))?;
            if found.dim != l.dim {
                return Err(TensorError::DimMismatch {
                    name: l.name.clone(),
                    left: l.dim,
                    right: found.dim,
                });
            }
        }
        if self.in_labels.len() != other.out_labels.len() {
            return Err(TensorError::LabelSetMismatch(String::from("<arity>")));
        }
        // permute other's rows into self's input order
        let t = pure_choi(other)?;
        let in_names: Vec<&str> = other.in_labels.iter().map(|l| l.name.as_str()).collect();
        let out_names: Vec<&str> = self.in_labels.iter().map(|l| l.name.as_str()).collect();
        let aligned = choi_to_matrix(&t, &in_names, &out_names)?;
        let n = aligned.in_dim();
        let k = aligned.out_dim();
        let m = self.out_dim();
        let prod = matmul(&self.matrix, m, k, &aligned.matrix, n);
        UnitaryBlock::new_raw(other.in_labels.clone(), self.out_labels.clone(), prod)
    }

    /// Parallel composition (tensor product of blocks).
    pub fn kron(&self, other: &UnitaryBlock) -> Result<UnitaryBlock> {
        let mut in_labels = self.in_labels.clone();
        in_labels.extend(other.in_labels.iter().cloned());
        let mut out_labels = self.out_labels.clone();
        out_labels.extend(other.out_labels.iter().cloned());
        check_labels(&in_labels)?;
        check_labels(&out_labels)?;
        let (ra, ca) = (self.out_dim(), self.in_dim());
        let (rb, cb) = (other.out_dim(), other.in_dim());
        let mut matrix = vec![C64::zero(); ra * rb * ca * cb];
        for i in 0..ra {
            for j in 0..ca {
                let a = self.matrix[i * ca + j];
                if a.is_zero() {
                    continue;
                }
                for k in 0..rb {
                    for l in 0..cb {
                        let b = other.matrix[k * cb + l];
                        if b.is_zero() {
                            continue;
                        }
                        matrix[(i * rb + k) * (ca * cb) + (j * cb + l)] = a * b;
                    }
                }
            }
        }
        UnitaryBlock::new_raw(in_labels, out_labels, matrix)
    }

    /// Apply the block to a column vector over its input space.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let n = self.in_dim();
        let m = self.out_dim();
        assert_eq!(v.len(), n);
        let mut out = vec![C64::zero(); m];
        for r in 0..m {
            let mut acc = C64::zero();
            for c in 0..n {
                let a = self.matrix[r * n + c];
                if !a.is_zero() {
                    acc += a * v[c];
                }
            }
            out[r] = acc;
        }
        out
    }

    pub fn relabel(&self, map: &[(&str, &str)]) -> Result<UnitaryBlock> {
        let rename = |labels: &[SystemLabel]| -> Vec<SystemLabel> {
            labels
                .iter()
                .map(|l| {
                    let mut l = l.clone();
                    for &(old, new) in map {
                        if l.name == old {
                            l.name = new.to_string();
                        }
                    }
                    l
                })
                .collect()
        };
        UnitaryBlock::new_raw(
            rename(&self.in_labels),
            rename(&self.out_labels),
            self.matrix.clone(),
        )
    }

    pub fn to_dmatrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_iterator(self.out_dim(), self.in_dim(), self.matrix.iter().copied())
    }
}

/// Pure Choi representation |V⟩⟩ = Σᵢ |i⟩ ⊗ V|i⟩ of a block, as a tensor
/// over `in_labels ∪ out_labels`.
pub fn pure_choi(u: &UnitaryBlock) -> Result<LabeledTensor> {
    for l in &u.in_labels {
        if u.out_labels.iter().any(|o| o.name == l.name) {
            return Err(TensorError::DuplicateLabel(l.name.clone()));
        }
    }
    let n = u.in_dim();
    let m = u.out_dim();
    let mut labels = u.in_labels.clone();
    labels.extend(u.out_labels.iter().cloned());
    let mut amps = vec![C64::zero(); n * m];
    for i in 0..n {
        for o in 0..m {
            amps[i * m + o] = u.matrix[o * n + i];
        }
    }
    LabeledTensor::new(labels, amps)
}

/// Inverse of [`pure_choi`] given the in/out split; recovers the block
/// bit-exactly.
pub fn choi_to_matrix(
    t: &LabeledTensor,
    in_names: &[&str],
    out_names: &[&str],
) -> Result<UnitaryBlock> {
    if in_names.len() + out_names.len() != t.rank() {
        return Err(TensorError::LabelSetMismatch(String::from("<split>")));
    }
    let mut order: Vec<&str> = in_names.to_vec();
    order.extend(out_names.iter());
    let p = t.permute(&order)?;
    let in_labels: Vec<SystemLabel> = p.labels()[..in_names.len()].to_vec();
    let out_labels: Vec<SystemLabel> = p.labels()[in_names.len()..].to_vec();
    let n = total_dim(&in_labels);
    let m = total_dim(&out_labels);
    let mut matrix = vec![C64::zero(); n * m];
    for i in 0..n {
        for o in 0..m {
            matrix[o * n + i] = p.amps()[i * m + o];
        }
    }
    UnitaryBlock::new_raw(in_labels, out_labels, matrix)
}

/// Pure Choi of U† given the pure Choi of U and the in/out split of U.
/// The returned tensor keeps the same label names: the former outputs are
/// now inputs and vice versa.
pub fn dagger_choi(
    t: &LabeledTensor,
    in_names: &[&str],
    out_names: &[&str],
) -> Result<LabeledTensor> {
    let u = choi_to_matrix(t, in_names, out_names)?;
    pure_choi(&u.dagger())
}

/// A complex matrix block with separately named row and column spaces;
/// carrier of mixed Choi representations and process matrices.
#[derive(Clone, PartialEq)]
pub struct LabeledOperator {
    pub row_labels: Vec<SystemLabel>,
    pub col_labels: Vec<SystemLabel>,
    pub entries: Vec<C64>, // row-major, (∏ row dims) × (∏ col dims)
}

impl fmt::Debug for LabeledOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LabeledOperator({:?} x {:?})",
            self.row_labels, self.col_labels
        )
    }
}

fn mangle(labels: &[SystemLabel], suffix: char) -> Vec<SystemLabel> {
    labels
        .iter()
        .map(|l| SystemLabel::new(format!("{}{}{}", l.name, MANGLE, suffix), l.dim))
        .collect()
}

impl LabeledOperator {
    pub fn new(
        row_labels: Vec<SystemLabel>,
        col_labels: Vec<SystemLabel>,
        entries: Vec<C64>,
    ) -> Result<Self> {
        check_labels(&row_labels)?;
        check_labels(&col_labels)?;
        let r = total_dim(&row_labels);
        let c = total_dim(&col_labels);
        if entries.len() != r * c {
            return Err(TensorError::ShapeMismatch {
                got: entries.len(),
                expected: r * c,
            });
        }
        Ok(LabeledOperator {
            row_labels,
            col_labels,
            entries,
        })
    }

    /// |t⟩⟨t| with row and column labels both equal to the tensor's labels.
    pub fn outer(t: &LabeledTensor) -> Self {
        let n = t.len();
        let mut entries = vec![C64::zero(); n * n];
        for (i, &a) in t.amps().iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, &b) in t.amps().iter().enumerate() {
                entries[i * n + j] = a * b.conj();
            }
        }
        LabeledOperator {
            row_labels: t.labels().to_vec(),
            col_labels: t.labels().to_vec(),
            entries,
        }
    }

    pub fn identity(labels: Vec<SystemLabel>) -> Result<Self> {
        check_labels(&labels)?;
        let n = total_dim(&labels);
        let mut entries = vec![C64::zero(); n * n];
        for i in 0..n {
            entries[i * n + i] = C64::new(1.0, 0.0);
        }
        LabeledOperator::new(labels.clone(), labels, entries)
    }

    /// Construct with the Hermiticity flag set: ‖M − M†‖_max is verified
    /// against `tol` before the operator is accepted.
    pub fn new_hermitian(
        row_labels: Vec<SystemLabel>,
        col_labels: Vec<SystemLabel>,
        entries: Vec<C64>,
        tol: f64,
    ) -> Result<Self> {
        let op = LabeledOperator::new(row_labels, col_labels, entries)?;
        let residual = op.hermiticity_residual()?;
        if residual > tol {
            return Err(TensorError::NotHermitian { residual, tol });
        }
        Ok(op)
    }

    pub fn row_dim(&self) -> usize {
        total_dim(&self.row_labels)
    }

    pub fn col_dim(&self) -> usize {
        total_dim(&self.col_labels)
    }

    /// Internal tensor view: rows mangled with `§r`, columns with `§c`.
    fn to_tensor(&self) -> LabeledTensor {
        let mut labels = mangle(&self.row_labels, 'r');
        labels.extend(mangle(&self.col_labels, 'c'));
        LabeledTensor::from_parts(labels, self.entries.clone()).expect("operator shape verified")
    }

    fn from_tensor(t: &LabeledTensor) -> Result<Self> {
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for l in t.labels() {
            let (base, suffix) = match l.name.rfind(MANGLE) {
                Some(p) => (&l.name[..p], &l.name[p + MANGLE.len_utf8()..]),
                None => return Err(TensorError::BadRelabel),
            };
            match suffix {
                "r" => rows.push(SystemLabel::new(base, l.dim)),
                "c" => cols.push(SystemLabel::new(base, l.dim)),
                _ => return Err(TensorError::BadRelabel),
            }
        }
        let mut order: Vec<String> = rows
            .iter()
            .map(|l| format!("{}{}r", l.name, MANGLE))
            .collect();
        order.extend(cols.iter().map(|l| format!("{}{}c", l.name, MANGLE)));
        let refs: Vec<&str> = order.iter().map(|s| s.as_str()).collect();
        let p = t.permute(&refs)?;
        LabeledOperator::new(rows, cols, p.amps().to_vec())
    }

    /// Mixed link product: double-index contraction Σᵢᵢ′ Aᵢᵢ′ ⊗ Bᵢᵢ′ over
    /// every shared label name.
    pub fn link(&self, other: &LabeledOperator) -> Result<Self> {
        let ta = self.to_tensor();
        let tb = other.to_tensor();
        let linked = ta.link(&tb)?;
        LabeledOperator::from_tensor(&linked)
    }

    /// Scalar result of a full contraction (all labels shared): Tr(AᵀB).
    pub fn link_scalar(&self, other: &LabeledOperator) -> Result<C64> {
        let linked = self.link(other)?;
        if linked.row_dim() * linked.col_dim() != 1 {
            return Err(TensorError::LabelSetMismatch(String::from(
                "<not a full contraction>",
            )));
        }
        Ok(linked.entries[0])
    }

    pub fn tensor(&self, other: &LabeledOperator) -> Result<Self> {
        let ta = self.to_tensor();
        let tb = other.to_tensor();
        LabeledOperator::from_tensor(&ta.tensor(&tb)?)
    }

    pub fn add(&self, other: &LabeledOperator) -> Result<Self> {
        let ta = self.to_tensor();
        let tb = other.to_tensor();
        LabeledOperator::from_tensor(&ta.add(&tb)?)
    }

    pub fn scale(&self, c: C64) -> Self {
        LabeledOperator {
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    pub fn trace(&self) -> Result<C64> {
        if self.row_dim() != self.col_dim() {
            return Err(TensorError::LabelSetMismatch(String::from("<not square>")));
        }
        let n = self.row_dim();
        Ok((0..n).map(|i| self.entries[i * n + i]).sum())
    }

    /// Partial trace over the named subsystems (present in both row and
    /// column label lists with equal dims).
    pub fn partial_trace(&self, names: &[&str]) -> Result<Self> {
        let mut t = self.to_tensor();
        for &name in names {
            let r = format!("{}{}r", name, MANGLE);
            let c = format!("{}{}c", name, MANGLE);
            let dim = t
                .dim_of(&r)
                .ok_or_else(|| TensorError::UnknownLabel(name.to_string()))?;
            let tr_label_r = SystemLabel::new(r.clone(), dim);
            let tr_label_c = SystemLabel::new(c.clone(), dim);
            let dket = {
                let mut amps = vec![C64::zero(); dim * dim];
                for i in 0..dim {
                    amps[i * dim + i] = C64::new(1.0, 0.0);
                }
                LabeledTensor::from_parts(vec![tr_label_r, tr_label_c], amps)?
            };
            t = t.link(&dket)?;
        }
        LabeledOperator::from_tensor(&t)
    }

    pub fn max_diff(&self, other: &LabeledOperator) -> Result<f64> {
        let ta = self.to_tensor();
        let tb = other.to_tensor();
        ta.max_diff(&tb)
    }

    pub fn hermiticity_residual(&self) -> Result<f64> {
        let aligned = self.aligned_square()?;
        let n = aligned.row_dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (aligned.entries[i * n + j] - aligned.entries[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }

    /// Reorder columns to match the row label order (same names required).
    fn aligned_square(&self) -> Result<Self> {
        for l in &self.row_labels {
            let found = self
                .col_labels
                .iter()
                .find(|c| c.name == l.name)
                .ok_or_else(|| TensorError::LabelSetMismatch(l.name.clone()))?;
            if found.dim != l.dim {
                return Err(TensorError::DimMismatch {
                    name: l.name.clone(),
                    left: l.dim,
                    right: found.dim,
                });
            }
        }
        if self.col_labels.len() != self.row_labels.len() {
            return Err(TensorError::LabelSetMismatch(String::from("<arity>")));
        }
        let t = self.to_tensor();
        let mut order: Vec<String> = self
            .row_labels
            .iter()
            .map(|l| format!("{}{}r", l.name, MANGLE))
            .collect();
        order.extend(
            self.row_labels
                .iter()
                .map(|l| format!("{}{}c", l.name, MANGLE)),
        );
        let refs: Vec<&str> = order.iter().map(|s| s.as_str()).collect();
        let p = t.permute(&refs)?;
        let rows = self.row_labels.clone();
        LabeledOperator::new(rows.clone(), rows, p.amps().to_vec())
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<C64>> {
        let a = self.aligned_square()?;
        let n = a.row_dim();
        Ok(DMatrix::from_row_iterator(n, n, a.entries.iter().copied()))
    }

    /// Minimum eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let m = self.to_dmatrix()?;
        let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(herm);
        Ok(eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(v)))
    }

    pub fn relabel(&self, map: &[(&str, &str)]) -> Result<Self> {
        let rename = |labels: &[SystemLabel]| -> Vec<SystemLabel> {
            labels
                .iter()
                .map(|l| {
                    let mut l = l.clone();
                    for &(old, new) in map {
                        if l.name == old {
                            l.name = new.to_string();
                        }
                    }
                    l
                })
                .collect()
        };
        LabeledOperator::new(
            rename(&self.row_labels),
            rename(&self.col_labels),
            self.entries.clone(),
        )
    }
}

/// Mixed Choi representation M = Σ_k |K_k⟩⟩⟨⟨K_k| of the map with Kraus
/// operators `kraus`; positive semidefinite by construction.
pub fn mixed_choi(kraus: &[UnitaryBlock]) -> Result<LabeledOperator> {
    if kraus.is_empty() {
        return Err(TensorError::ShapeMismatch {
            got: 0,
            expected: 1,
        });
    }
    let first = &kraus[0];
    let mut acc: Option<LabeledOperator> = None;
    for k in kraus {
        if k.in_labels != first.in_labels || k.out_labels != first.out_labels {
            return Err(TensorError::LabelSetMismatch(String::from(
                "<kraus label sets differ>",
            )));
        }
        let v = pure_choi(k)?;
        let term = LabeledOperator::outer(&v);
        acc = Some(match acc {
            None => term,
            Some(a) => a.add(&term)?,
        });
    }
    Ok(acc.unwrap())
}

/// Link a collection of tensors in a greedy order: starting from `start`,
/// repeatedly contract with the pool tensor that minimises the resulting
/// size. Valid whenever every label name occurs at most twice across the
/// whole collection (the result is then order-independent).
pub fn link_all_greedy(start: LabeledTensor, pool: Vec<LabeledTensor>) -> Result<LabeledTensor> {
    let mut acc = start;
    let mut remaining: Vec<LabeledTensor> = pool;
    while !remaining.is_empty() {
        let mut best = 0usize;
        let mut best_size = usize::MAX;
        for (k, t) in remaining.iter().enumerate() {
            let shared: usize = t
                .labels()
                .iter()
                .filter(|l| acc.has_label(&l.name))
                .map(|l| l.dim)
                .product();
            let size = acc.len() / shared.max(1) * (t.len() / shared.max(1));
            if size < best_size {
                best_size = size;
                best = k;
            }
        }
        let t = remaining.swap_remove(best);
        acc = acc.link(&t)?;
    }
    Ok(acc)
}

/// Residual of "the tensor is the pure Choi of a unitary" for the given
/// in/out split: max of the isometry defects of U and U†.
pub fn encodes_unitary_residual(
    t: &LabeledTensor,
    in_names: &[&str],
    out_names: &[&str],
) -> Result<f64> {
    let u = choi_to_matrix(t, in_names, out_names)?;
    Ok(u.unitarity_residual())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn lab(name: &str, dim: usize) -> SystemLabel {
        SystemLabel::new(name, dim)
    }

    #[test]
    fn identity_choi_is_bell_like() {
        let u = UnitaryBlock::wire(vec![lab("Y", 2)], vec![lab("Z", 2)]).unwrap();
        let t = pure_choi(&u).unwrap();
        assert_eq!(t.amps(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn not_choi_is_antidiagonal() {
        let x = UnitaryBlock::basis_map(vec![lab("Y", 2)], vec![lab("Z", 2)], |i| {
            vec![1 - i[0]]
        })
        .unwrap();
        let t = pure_choi(&x).unwrap();
        assert_eq!(t.amps(), &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn qutrit_dket_has_three_unit_amps() {
        let t = identity_dket(&lab("Y", 3), &lab("Z", 3)).unwrap();
        assert_eq!(t.nonzero_count(0.0), 3);
        assert_eq!(t.amp_at(&[("Y", 2), ("Z", 2)]).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn dket_with_itself_wires_identity() {
        let d1 = identity_dket(&lab("Y", 2), &lab("Z", 2)).unwrap();
        let d2 = identity_dket(&lab("Z", 2), &lab("W", 2)).unwrap();
        let wired = d1.link(&d2).unwrap();
        let expect = identity_dket(&lab("Y", 2), &lab("W", 2)).unwrap();
        assert!(wired.max_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn link_disjoint_is_tensor_product() {
        let a = LabeledTensor::new(vec![lab("A", 2)], vec![c(1.0, 0.0), c(2.0, 0.0)]).unwrap();
        let b = LabeledTensor::new(vec![lab("B", 2)], vec![c(3.0, 0.0), c(0.0, 1.0)]).unwrap();
        let ab = a.link(&b).unwrap();
        assert_eq!(ab.amp_at(&[("A", 1), ("B", 1)]).unwrap(), c(0.0, 2.0));
    }

    #[test]
    fn link_identical_labels_is_transpose_pairing() {
        let a = LabeledTensor::new(vec![lab("Y", 2)], vec![c(1.0, 1.0), c(2.0, 0.0)]).unwrap();
        let b = LabeledTensor::new(vec![lab("Y", 2)], vec![c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let s = a.link(&b).unwrap();
        // aᵀb without conjugation
        assert_eq!(s.amps()[0], c(1.0, 1.0) * c(0.0, 1.0) + c(2.0, 0.0));
    }

    #[test]
    fn identity_wiring_relabels_vector() {
        let v = LabeledTensor::new(vec![lab("Y", 2)], vec![c(0.3, 0.1), c(0.0, 0.7)]).unwrap();
        let d = identity_dket(&lab("Y", 2), &lab("Z", 2)).unwrap();
        let w = v.link(&d).unwrap();
        let expect = v.relabel(&[("Y", "Z")]).unwrap();
        assert!(w.max_diff(&expect).unwrap() < 1e-15);
    }

    #[test]
    fn link_dim_mismatch_errors() {
        let a = LabeledTensor::zeros(vec![lab("Y", 2)]).unwrap();
        let b = LabeledTensor::zeros(vec![lab("Y", 3)]).unwrap();
        assert!(matches!(
            a.link(&b),
            Err(TensorError::DimMismatch { .. })
        ));
    }

    #[test]
    fn pure_choi_rejects_shared_in_out_names() {
        let u = UnitaryBlock::wire(vec![lab("Y", 2)], vec![lab("Y", 2)]);
        // wire itself is fine to build raw, but the Choi must reject it
        let u = u.unwrap();
        assert!(matches!(
            pure_choi(&u),
            Err(TensorError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn choi_round_trip_is_bit_exact() {
        let mat: Vec<C64> = (0..24).map(|k| c(k as f64, -(k as f64) / 3.0)).collect();
        let u = UnitaryBlock::new_raw(
            vec![lab("A", 2), lab("B", 3)],
            vec![lab("C", 4)],
            mat.clone(),
        )
        .unwrap();
        let t = pure_choi(&u).unwrap();
        let back = choi_to_matrix(&t, &["A", "B"], &["C"]).unwrap();
        assert_eq!(back.matrix, mat);
    }

    #[test]
    fn dagger_choi_twice_is_identity() {
        let mat: Vec<C64> = vec![
            c(0.6, 0.0),
            c(0.8, 0.0),
            c(-0.8, 0.0),
            c(0.6, 0.0),
        ];
        let u = UnitaryBlock::new(vec![lab("A", 2)], vec![lab("B", 2)], mat, 1e-12).unwrap();
        let t = pure_choi(&u).unwrap();
        let d = dagger_choi(&t, &["A"], &["B"]).unwrap();
        let dd = dagger_choi(&d, &["B"], &["A"]).unwrap();
        assert!(dd.max_diff(&t).unwrap() < 1e-15);
    }

    #[test]
    fn permute_round_trip() {
        let t = LabeledTensor::from_fn(vec![lab("A", 2), lab("B", 3), lab("C", 2)], |idx| {
            c((idx[0] * 100 + idx[1] * 10 + idx[2]) as f64, 0.0)
        })
        .unwrap();
        let p = t.permute(&["C", "A", "B"]).unwrap();
        let back = p.permute(&["A", "B", "C"]).unwrap();
        assert_eq!(back, t);
        assert_eq!(
            p.amp_at(&[("C", 1), ("A", 1), ("B", 2)]).unwrap(),
            c(121.0, 0.0)
        );
    }

    #[test]
    fn relabel_preserves_norm_and_round_trips() {
        let t = LabeledTensor::from_fn(vec![lab("A", 2), lab("B", 2)], |idx| {
            c(idx[0] as f64 + 0.5, idx[1] as f64)
        })
        .unwrap();
        let r = t.relabel(&[("A", "X")]).unwrap();
        assert_eq!(r.norm_sq(), t.norm_sq());
        let back = r.relabel(&[("X", "A")]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn mixed_choi_identity_is_rank_one_trace_two() {
        let id = UnitaryBlock::wire(vec![lab("Y", 2)], vec![lab("Z", 2)]).unwrap();
        let m = mixed_choi(&[id]).unwrap();
        assert_eq!(m.trace().unwrap(), c(2.0, 0.0));
        // rank 1: M² = 2M for the projector onto the dket
        let sq = m.link_pairwise_square();
        assert!(sq.max_diff(&m.scale(c(2.0, 0.0))).unwrap() < 1e-12);
    }

    impl LabeledOperator {
        /// Test helper: matrix square with aligned labels.
        fn link_pairwise_square(&self) -> LabeledOperator {
            let a = self.aligned_square().unwrap();
            let n = a.row_dim();
            let prod = matmul(&a.entries, n, n, &a.entries, n);
            LabeledOperator::new(a.row_labels.clone(), a.col_labels.clone(), prod).unwrap()
        }
    }

    #[test]
    fn depolarizing_choi_is_maximally_mixed() {
        let half = c(0.5, 0.0);
        let paulis: Vec<UnitaryBlock> = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        ]
        .into_iter()
        .map(|m| {
            UnitaryBlock::new_raw(
                vec![lab("Y", 2)],
                vec![lab("Z", 2)],
                m.iter().map(|v| v * half).collect(),
            )
            .unwrap()
        })
        .collect();
        let m = mixed_choi(&paulis).unwrap();
        let expect = LabeledOperator::identity(vec![lab("Y", 2), lab("Z", 2)])
            .unwrap()
            .scale(half);
        assert!(m.max_diff(&expect).unwrap() < 1e-12);
    }



    #[test]
    fn hermitian_constructor_verifies_the_flag() {
        let labels = vec![lab("Y", 2)];
        let herm = vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)];
        assert!(LabeledOperator::new_hermitian(labels.clone(), labels.clone(), herm, 1e-12).is_ok());
        let skew = vec![c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(2.0, 0.0)];
        assert!(matches!(
            LabeledOperator::new_hermitian(labels.clone(), labels, skew, 1e-12),
            Err(TensorError::NotHermitian { .. })
        ));
    }

    #[test]
    fn mixed_link_of_outers_is_outer_of_pure_link() {
        use crate::rng::{random_tensor, seeded};
        let mut rng = seeded(91);
        for _ in 0..10 {
            let a = random_tensor(&mut rng, vec![lab("X", 2), lab("Y", 2)]);
            let b = random_tensor(&mut rng, vec![lab("Y", 2), lab("Z", 2)]);
            let lhs = LabeledOperator::outer(&a).link(&LabeledOperator::outer(&b)).unwrap();
            let rhs = LabeledOperator::outer(&a.link(&b).unwrap());
            assert!(lhs.max_diff(&rhs).unwrap() < 1e-12);
        }
    }

    #[test]
    fn mixed_link_disjoint_is_tensor_product() {
        let a = LabeledOperator::identity(vec![lab("A", 2)]).unwrap().scale(c(2.0, 0.0));
        let b = LabeledOperator::identity(vec![lab("B", 3)]).unwrap();
        let linked = a.link(&b).unwrap();
        let expect = a.tensor(&b).unwrap();
        assert!(linked.max_diff(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn mixed_link_full_contraction_is_trace_pairing() {
        let a = LabeledOperator::new(
            vec![lab("Y", 2)],
            vec![lab("Y", 2)],
            vec![c(1.0, 0.0), c(2.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)],
        )
        .unwrap();
        let b = LabeledOperator::new(
            vec![lab("Y", 2)],
            vec![lab("Y", 2)],
            vec![c(0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)],
        )
        .unwrap();
        // Tr[AᵀB] = Σᵢⱼ AᵢⱼBᵢⱼ
        let expect = c(1.0, 0.0) * c(0.5, 0.0)
            + c(2.0, 1.0) * c(0.0, 0.0)
            + c(0.0, -1.0) * c(1.0, 0.0)
            + c(3.0, 0.0) * c(-1.0, 0.0);
        assert_eq!(a.link_scalar(&b).unwrap(), expect);
    }

    #[test]
    fn partial_trace_of_identity_counts_dims() {
        let id = LabeledOperator::identity(vec![lab("A", 2), lab("B", 3)]).unwrap();
        let tb = id.partial_trace(&["B"]).unwrap();
        let expect = LabeledOperator::identity(vec![lab("A", 2)])
            .unwrap()
            .scale(c(3.0, 0.0));
        assert!(tb.max_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn slice_extracts_blocks() {
        let t = LabeledTensor::from_fn(vec![lab("A", 2), lab("B", 2)], |idx| {
            c((10 * idx[0] + idx[1]) as f64, 0.0)
        })
        .unwrap();
        let s = t.slice("A", 1).unwrap();
        assert_eq!(s.amps(), &[c(10.0, 0.0), c(11.0, 0.0)]);
        let s2 = t.slice("B", 0).unwrap();
        assert_eq!(s2.amps(), &[c(0.0, 0.0), c(10.0, 0.0)]);
    }
}
