//! Seeded randomness helpers: Haar-random unitaries, random permutations,
//! random labeled tensors. Everything routes through one ChaCha generator so
//! runs are reproducible from a single seed.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::tensor::{LabeledTensor, SystemLabel, UnitaryBlock, C64};

pub type Seeded = ChaCha12Rng;

pub fn seeded(seed: u64) -> Seeded {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Haar-random unitary via QR of a complex Ginibre matrix with the phase
/// convention fixed by the diagonal of R.
pub fn haar_unitary(rng: &mut impl Rng, dim: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random unitary block with the given legs (equal total dims).
pub fn random_unitary_block(
    rng: &mut impl Rng,
    in_labels: Vec<SystemLabel>,
    out_labels: Vec<SystemLabel>,
) -> UnitaryBlock {
    let n: usize = in_labels.iter().map(|l| l.dim).product();
    let m: usize = out_labels.iter().map(|l| l.dim).product();
    assert_eq!(n, m, "random unitary needs equal in/out dims");
    let q = haar_unitary(rng, n);
    let matrix: Vec<C64> = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| q[(r, c)])
        .collect();
    UnitaryBlock::new_raw(in_labels, out_labels, matrix).expect("shape consistent")
}

/// Random basis-preserving block: a uniformly random permutation matrix.
pub fn random_permutation_block(
    rng: &mut impl Rng,
    in_labels: Vec<SystemLabel>,
    out_labels: Vec<SystemLabel>,
) -> UnitaryBlock {
    let n: usize = in_labels.iter().map(|l| l.dim).product();
    let m: usize = out_labels.iter().map(|l| l.dim).product();
    assert_eq!(n, m);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let mut matrix = vec![C64::new(0.0, 0.0); n * n];
    for (col, &row) in perm.iter().enumerate() {
        matrix[row * n + col] = C64::new(1.0, 0.0);
    }
    UnitaryBlock::new_raw(in_labels, out_labels, matrix).expect("shape consistent")
}

/// Random dense tensor with unit-normalized Gaussian amplitudes.
pub fn random_tensor(rng: &mut impl Rng, labels: Vec<SystemLabel>) -> LabeledTensor {
    let n: usize = labels.iter().map(|l| l.dim).product();
    let mut amps: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for a in &mut amps {
            *a /= norm;
        }
    }
    LabeledTensor::new(labels, amps).expect("shape consistent")
}

/// Random normalized state vector of the given dimension.
pub fn random_state(rng: &mut impl Rng, dim: usize) -> Vec<C64> {
    let mut v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut v {
        *a /= norm;
    }
    v
}
