//! Dense tensor storage with per-slot variance tags.
//!
//! Index convention, fixed once for the whole crate:
//!
//! * curvature blocks are stored as `B[i][j][k][l]` = coefficient of ∂_i in
//!   `Ω(arg_k, arg_l) ∂_j`, i.e. slot 0 is the output, slot 1 the acted-on
//!   section, slots 2 and 3 the two operator arguments in order
//!   (hh: R(δ_k, δ_l)∂_j = Rⁱ_jkl ∂_i; hv: P(δ_k, ∂̇_l)∂_j = Pⁱ_jkl ∂_i;
//!   vv: Q(∂̇_k, ∂̇_l)∂_j = Qⁱ_jkl ∂_i);
//! * connection coefficients `Γ[i][j][k]` = coefficient of ∂_i in ∇_{δ_k}∂_j
//!   (symmetric in (j,k) for the Cartan horizontal part);
//! * the nonlinear connection is `G[i][j]` = ∂̇_j Gⁱ.

use crate::scalar::Real;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

/// Dense multi-index array over 1..n per slot with declared variance.
#[derive(Clone, Debug)]
pub struct TensorBlock {
    pub data: Vec<f64>,
    pub dim: usize,
    pub variance: Vec<Variance>,
}

impl TensorBlock {
    pub fn zeros(dim: usize, variance: Vec<Variance>) -> Self {
        TensorBlock {
            data: vec![0.0; dim.pow(variance.len() as u32)],
            dim,
            variance,
        }
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        let mut off = 0;
        for &i in idx {
            debug_assert!(i < self.dim);
            off = off * self.dim + i;
        }
        off
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], val: f64) {
        let off = self.offset(idx);
        self.data[off] = val;
    }

    pub fn inf_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// max(1, ‖·‖∞): the reference scale used by relative residual checks.
    pub fn scale(&self) -> f64 {
        self.inf_norm().max(1.0)
    }
}

// ------------------------------------------------------------------
// Internal generic arrays used by the evaluation pipelines.
// ------------------------------------------------------------------

#[derive(Clone, Debug)]
pub(crate) struct Arr2<S> {
    pub d: Vec<S>,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Arr3<S> {
    pub d: Vec<S>,
    pub n: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Arr4<S> {
    pub d: Vec<S>,
    pub n: usize,
}

macro_rules! arr_impl {
    ($name:ident, $rank:expr) => {
        impl<S: Real> $name<S> {
            pub fn from_fn(n: usize, like: &S, mut f: impl FnMut(&[usize; $rank]) -> S) -> Self {
                let total = n.pow($rank as u32);
                let mut d = Vec::with_capacity(total);
                for off in 0..total {
                    let mut idx = [0usize; $rank];
                    let mut rem = off;
                    for slot in (0..$rank).rev() {
                        idx[slot] = rem % n;
                        rem /= n;
                    }
                    d.push(f(&idx));
                }
                let _ = like;
                Self { d, n }
            }
        }

        impl<S> $name<S> {
            #[inline]
            pub fn at(&self, idx: &[usize; $rank]) -> &S {
                let mut off = 0;
                for &i in idx {
                    off = off * self.n + i;
                }
                &self.d[off]
            }
        }
    };
}

arr_impl!(Arr2, 2);
arr_impl!(Arr3, 3);
arr_impl!(Arr4, 4);

impl Arr2<f64> {
    pub fn to_block(&self, variance: [Variance; 2]) -> TensorBlock {
        TensorBlock {
            data: self.d.clone(),
            dim: self.n,
            variance: variance.to_vec(),
        }
    }
}

impl Arr3<f64> {
    pub fn to_block(&self, variance: [Variance; 3]) -> TensorBlock {
        TensorBlock {
            data: self.d.clone(),
            dim: self.n,
            variance: variance.to_vec(),
        }
    }
}

impl Arr4<f64> {
    pub fn to_block(&self, variance: [Variance; 4]) -> TensorBlock {
        TensorBlock {
            data: self.d.clone(),
            dim: self.n,
            variance: variance.to_vec(),
        }
    }
}

/// Generic n×n linear solve (Gauss-Jordan with partial pivoting on the value
/// part), used to invert the fundamental tensor inside generic pipelines.
pub(crate) fn invert_matrix<S: Real>(a: &Arr2<S>, like: &S) -> Option<Arr2<S>> {
    let n = a.n;
    let mut m: Vec<S> = Vec::with_capacity(n * 2 * n);
    for i in 0..n {
        for j in 0..n {
            m.push(a.at(&[i, j]).clone());
        }
        for j in 0..n {
            m.push(like.lift(if i == j { 1.0 } else { 0.0 }));
        }
    }
    let w = 2 * n;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                m[r1 * w + col]
                    .value()
                    .abs()
                    .partial_cmp(&m[r2 * w + col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if m[pivot * w + col].value().abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..w {
                m.swap(pivot * w + j, col * w + j);
            }
        }
        let inv = m[col * w + col].clone();
        for j in 0..w {
            m[col * w + j] = m[col * w + j].clone() / inv.clone();
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * w + col].clone();
            for j in 0..w {
                m[r * w + j] = m[r * w + j].clone() - factor.clone() * m[col * w + j].clone();
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(m[i * w + n + j].clone());
        }
    }
    Some(Arr2 { d: out, n })
}
