//! Scalar abstraction shared by all evaluation pipelines.
//!
//! Every tensor formula in this crate is written once, generically over
//! [`Real`], and then instantiated with
//!   * `f64` for plain point evaluation,
//!   * [`Dual`] for first derivatives of derived quantities in the 2n base
//!     coordinates of TM₀ (used to build horizontal derivatives δ_k),
//!   * [`crate::jet::Jet`] for the truncated-Taylor evaluation of the metric
//!     itself.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Largest supported manifold dimension. Jet tables and the fixed-capacity
/// gradient in [`Dual`] grow quickly with n; 6 covers everything desk-scale.
pub const MAX_DIM: usize = 6;

/// Gradient capacity of [`Dual`]: one slot per x-coordinate and one per
/// v-coordinate.
pub const MAX_GRAD: usize = 2 * MAX_DIM;

/// Arithmetic interface needed by the metric and connection formulas.
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant with the same "shape" (jet space, gradient length) as `self`.
    fn lift(&self, c: f64) -> Self;
    /// The underlying point value.
    fn value(&self) -> f64;
    fn sqrt_r(&self) -> Self;
    fn scale(&self, k: f64) -> Self;
}

impl Real for f64 {
    #[inline]
    fn lift(&self, c: f64) -> Self {
        c
    }
    #[inline]
    fn value(&self) -> f64 {
        *self
    }
    #[inline]
    fn sqrt_r(&self) -> Self {
        self.sqrt()
    }
    #[inline]
    fn scale(&self, k: f64) -> Self {
        self * k
    }
}

/// First-order forward-mode number over the 2n coordinates (x₁..x_n, v₁..v_n)
/// of TM₀. `grad[0..n]` are x-derivatives, `grad[n..2n]` v-derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Dual {
    pub val: f64,
    pub grad: [f64; MAX_GRAD],
    /// number of active gradient slots (= 2n)
    pub m: usize,
}

impl Dual {
    pub fn constant(val: f64, m: usize) -> Self {
        Dual {
            val,
            grad: [0.0; MAX_GRAD],
            m,
        }
    }

    pub fn seeded(val: f64, slot: usize, m: usize) -> Self {
        let mut d = Self::constant(val, m);
        d.grad[slot] = 1.0;
        d
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        let mut out = self;
        out.val += rhs.val;
        for i in 0..self.m {
            out.grad[i] += rhs.grad[i];
        }
        out
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        let mut out = self;
        out.val -= rhs.val;
        for i in 0..self.m {
            out.grad[i] -= rhs.grad[i];
        }
        out
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        let mut out = Dual::constant(self.val * rhs.val, self.m);
        for i in 0..self.m {
            out.grad[i] = self.grad[i] * rhs.val + self.val * rhs.grad[i];
        }
        out
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        let inv = 1.0 / rhs.val;
        let mut out = Dual::constant(self.val * inv, self.m);
        for i in 0..self.m {
            out.grad[i] = (self.grad[i] - out.val * rhs.grad[i]) * inv;
        }
        out
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        let mut out = self;
        out.val = -out.val;
        for i in 0..self.m {
            out.grad[i] = -out.grad[i];
        }
        out
    }
}

impl Real for Dual {
    fn lift(&self, c: f64) -> Self {
        Dual::constant(c, self.m)
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn sqrt_r(&self) -> Self {
        let s = self.val.sqrt();
        let mut out = Dual::constant(s, self.m);
        let half_inv = 0.5 / s;
        for i in 0..self.m {
            out.grad[i] = self.grad[i] * half_inv;
        }
        out
    }
    fn scale(&self, k: f64) -> Self {
        let mut out = *self;
        out.val *= k;
        for i in 0..self.m {
            out.grad[i] *= k;
        }
        out
    }
}
