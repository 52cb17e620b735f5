//! Truncated-Taylor (jet) arithmetic on TM₀ and the finite-difference oracle.
//!
//! A [`Jet`] is a truncated multivariate Taylor polynomial in the 2n
//! coordinates (dx₁..dx_n, dv₁..dv_n) of a support element, with independent
//! total-degree caps for the x-group and the v-group. Evaluating a scalar
//! field in jet arithmetic yields every mixed partial
//! ∂^α_x ∂^β_v f up to the caps in one pass, exact up to rounding.
//!
//! Monomials are stored densely per group, ordered by total degree and then
//! lexicographically; an exponent vector is its own canonical (sorted) key,
//! so Schwarz symmetry holds by construction.

use crate::error::{FinslerError, Result};
use crate::scalar::{Real, MAX_DIM};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex};

/// Largest x-order accepted by [`evaluate_jet`].
pub const MAX_ORDER_X: usize = 3;
/// Largest v-order accepted by [`evaluate_jet`].
pub const MAX_ORDER_V: usize = 6;

/// A point z = (x, v) of TM₀ (v ≠ 0).
#[derive(Clone, Debug, PartialEq)]
pub struct SupportElement {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl SupportElement {
    /// Builds a support element, rejecting v ≈ 0 (the zero section is not
    /// part of TM₀, and homogeneity makes tiny |v| redundant anyway).
    pub fn new(x: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if x.len() != v.len() {
            return Err(FinslerError::Domain(format!(
                "x has length {} but v has length {}",
                x.len(),
                v.len()
            )));
        }
        let norm2: f64 = v.iter().map(|c| c * c).sum();
        if norm2.sqrt() < 1e-8 {
            return Err(FinslerError::Domain(
                "|v| < 1e-8: support elements require a nonzero tangent vector".into(),
            ));
        }
        Ok(SupportElement { x, v })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

fn monomials(n: usize, cap: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur = vec![0u8; n];
    fn rec(out: &mut Vec<Vec<u8>>, cur: &mut Vec<u8>, slot: usize, left: usize, n: usize) {
        if slot == n {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for e in 0..=left {
            cur[slot] = e as u8;
            rec(out, cur, slot + 1, left - e, n);
        }
        cur[slot] = 0;
    }
    for d in 0..=cap {
        rec(&mut out, &mut cur, 0, d, n);
    }
    out
}

fn factorial_product(m: &[u8]) -> f64 {
    m.iter()
        .map(|&e| (1..=e as u64).product::<u64>() as f64)
        .product()
}

/// Shared multiplication tables for one (n, order_x, order_v) jet shape.
pub struct JetSpace {
    pub n: usize,
    pub order_x: usize,
    pub order_v: usize,
    pub xm: Vec<Vec<u8>>,
    pub vm: Vec<Vec<u8>>,
    xi: HashMap<Vec<u8>, usize>,
    vi: HashMap<Vec<u8>, usize>,
    /// ordered index triples (a, b, a+b) with deg(a)+deg(b) within the cap
    xpairs: Vec<(u32, u32, u32)>,
    vpairs: Vec<(u32, u32, u32)>,
    /// α! per monomial (jet coefficients are Taylor coefficients; partial
    /// derivatives are coefficient × α!β!)
    pub fact_x: Vec<f64>,
    pub fact_v: Vec<f64>,
}

impl JetSpace {
    pub fn len(&self) -> usize {
        self.xm.len() * self.vm.len()
    }

    pub fn nv(&self) -> usize {
        self.vm.len()
    }

    fn build(n: usize, order_x: usize, order_v: usize) -> JetSpace {
        let xm = monomials(n, order_x);
        let vm = monomials(n, order_v);
        let xi: HashMap<_, _> = xm.iter().cloned().zip(0..).collect();
        let vi: HashMap<_, _> = vm.iter().cloned().zip(0..).collect();
        let pair_table = |ms: &[Vec<u8>], idx: &HashMap<Vec<u8>, usize>, cap: usize| {
            let mut out = Vec::new();
            for (a, ma) in ms.iter().enumerate() {
                let da: usize = ma.iter().map(|&e| e as usize).sum();
                for (b, mb) in ms.iter().enumerate() {
                    let db: usize = mb.iter().map(|&e| e as usize).sum();
                    if da + db > cap {
                        continue;
                    }
                    let sum: Vec<u8> = ma.iter().zip(mb).map(|(&p, &q)| p + q).collect();
                    out.push((a as u32, b as u32, idx[&sum] as u32));
                }
            }
            out
        };
        let xpairs = pair_table(&xm, &xi, order_x);
        let vpairs = pair_table(&vm, &vi, order_v);
        let fact_x = xm.iter().map(|m| factorial_product(m)).collect();
        let fact_v = vm.iter().map(|m| factorial_product(m)).collect();
        JetSpace {
            n,
            order_x,
            order_v,
            xm,
            vm,
            xi,
            vi,
            xpairs,
            vpairs,
            fact_x,
            fact_v,
        }
    }

    /// Cached lookup of the space for a given shape.
    pub fn get(n: usize, order_x: usize, order_v: usize) -> Arc<JetSpace> {
        static CACHE: Lazy<Mutex<HashMap<(usize, usize, usize), Arc<JetSpace>>>> =
            Lazy::new(|| Mutex::new(HashMap::new()));
        let mut cache = CACHE.lock().unwrap();
        cache
            .entry((n, order_x, order_v))
            .or_insert_with(|| Arc::new(JetSpace::build(n, order_x, order_v)))
            .clone()
    }

    pub fn x_index(&self, m: &[u8]) -> Option<usize> {
        self.xi.get(m).copied()
    }

    pub fn v_index(&self, m: &[u8]) -> Option<usize> {
        self.vi.get(m).copied()
    }
}

/// Truncated Taylor polynomial over a shared [`JetSpace`].
#[derive(Clone)]
pub struct Jet {
    pub space: Arc<JetSpace>,
    /// coefficient layout: `c[xi * nv + vi]`
    pub c: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, val: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = val;
        Jet {
            space: space.clone(),
            c,
        }
    }

    /// The i-th x-coordinate seeded as a jet variable with base value `val`.
    pub fn variable_x(space: &Arc<JetSpace>, i: usize, val: f64) -> Jet {
        let mut jet = Jet::constant(space, val);
        if space.order_x >= 1 {
            let mut mono = vec![0u8; space.n];
            mono[i] = 1;
            let xi = space.x_index(&mono).expect("first-order x monomial");
            jet.c[xi * space.nv()] = 1.0;
        }
        jet
    }

    pub fn variable_v(space: &Arc<JetSpace>, i: usize, val: f64) -> Jet {
        let mut jet = Jet::constant(space, val);
        if space.order_v >= 1 {
            let mut mono = vec![0u8; space.n];
            mono[i] = 1;
            let vi = space.v_index(&mono).expect("first-order v monomial");
            jet.c[vi] = 1.0;
        }
        jet
    }

    #[inline]
    pub fn val(&self) -> f64 {
        self.c[0]
    }

    /// Composition with a univariate power series around the constant term:
    /// `series[k]` is the Taylor coefficient of t^k. Used for 1/u and √u.
    fn compose(&self, series: &[f64]) -> Jet {
        // w = self with the constant term removed; Horner over w
        let mut w = self.clone();
        w.c[0] = 0.0;
        let mut acc = Jet::constant(&self.space, *series.last().unwrap());
        for k in (0..series.len() - 1).rev() {
            acc = acc * w.clone();
            acc.c[0] += series[k];
        }
        acc
    }

    fn series_len(&self) -> usize {
        self.space.order_x + self.space.order_v + 1
    }

    pub fn recip(&self) -> Jet {
        let c0 = self.val();
        let mut series = Vec::with_capacity(self.series_len());
        let mut term = 1.0 / c0;
        for _ in 0..self.series_len() {
            series.push(term);
            term = -term / c0;
        }
        self.compose(&series)
    }

    pub fn sqrt(&self) -> Jet {
        let c0 = self.val();
        let mut series = Vec::with_capacity(self.series_len());
        let mut term = c0.sqrt();
        for k in 1..=self.series_len() {
            series.push(term);
            term *= (1.5 - k as f64) / (k as f64 * c0);
        }
        self.compose(&series)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        for a in self.c.iter_mut() {
            *a = -*a;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let sp = &self.space;
        let nv = sp.nv();
        let mut out = vec![0.0; sp.len()];
        for &(xa, xb, xc) in &sp.xpairs {
            let (ra, rb, rc) = (xa as usize * nv, xb as usize * nv, xc as usize * nv);
            for &(va, vb, vc) in &sp.vpairs {
                out[rc + vc as usize] +=
                    self.c[ra + va as usize] * rhs.c[rb + vb as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            c: out,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Real for Jet {
    fn lift(&self, c: f64) -> Self {
        Jet::constant(&self.space, c)
    }
    fn value(&self) -> f64 {
        self.val()
    }
    fn sqrt_r(&self) -> Self {
        self.sqrt()
    }
    fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        for a in out.c.iter_mut() {
            *a *= k;
        }
        out
    }
}

/// A scalar field on TM₀, evaluable both pointwise and in jet arithmetic.
pub trait ScalarField: Sync {
    fn eval(&self, x: &[f64], v: &[f64]) -> f64;
    fn eval_jet(&self, x: &[Jet], v: &[Jet]) -> Jet;
    /// Domain predicate in the base manifold (used by stencil checks).
    fn in_domain(&self, _x: &[f64]) -> bool {
        true
    }
}

/// Adapter turning a generic closure over [`Real`] scalars into a field.
pub struct FieldFn<F> {
    pub f: F,
    pub domain: Option<Box<dyn Fn(&[f64]) -> bool + Sync>>,
}

impl<F> FieldFn<F>
where
    F: Fn(&[Jet], &[Jet]) -> Jet + Sync,
{
    pub fn new(f: F) -> Self {
        FieldFn { f, domain: None }
    }
}

impl<F> ScalarField for FieldFn<F>
where
    F: Fn(&[Jet], &[Jet]) -> Jet + Sync,
{
    fn eval(&self, x: &[f64], v: &[f64]) -> f64 {
        // zero-order jet: plain evaluation without derivative tracking
        let sp = JetSpace::get(x.len(), 0, 0);
        let xj: Vec<Jet> = x.iter().map(|&c| Jet::constant(&sp, c)).collect();
        let vj: Vec<Jet> = v.iter().map(|&c| Jet::constant(&sp, c)).collect();
        (self.f)(&xj, &vj).val()
    }

    fn eval_jet(&self, x: &[Jet], v: &[Jet]) -> Jet {
        (self.f)(x, v)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.domain.as_ref().map_or(true, |d| d(x))
    }
}

/// All mixed partials of a scalar at a support element, up to the requested
/// orders. Partials are stored once per canonical exponent pair, so the
/// symmetric entries are literally the same storage slot.
#[derive(Clone)]
pub struct JetValue {
    pub space: Arc<JetSpace>,
    /// Taylor coefficients (divide-by-factorial normalization).
    pub taylor: Vec<f64>,
}

impl JetValue {
    pub fn value(&self) -> f64 {
        self.taylor[0]
    }

    pub fn dim(&self) -> usize {
        self.space.n
    }

    /// Partial derivative for explicit exponent vectors.
    pub fn partial_exp(&self, ax: &[u8], bv: &[u8]) -> f64 {
        let xi = self
            .space
            .x_index(ax)
            .unwrap_or_else(|| panic!("x-exponent {:?} outside jet budget", ax));
        let vi = self
            .space
            .v_index(bv)
            .unwrap_or_else(|| panic!("v-exponent {:?} outside jet budget", bv));
        self.taylor[xi * self.space.nv() + vi] * self.space.fact_x[xi] * self.space.fact_v[vi]
    }

    /// Partial derivative ∂_{x_{xs[0]}}..∂̇_{v_{vs[0]}}.. f(z); index lists may
    /// repeat and are order-insensitive.
    pub fn partial(&self, xs: &[usize], vs: &[usize]) -> f64 {
        let mut ax = vec![0u8; self.space.n];
        for &i in xs {
            ax[i] += 1;
        }
        let mut bv = vec![0u8; self.space.n];
        for &i in vs {
            bv[i] += 1;
        }
        self.partial_exp(&ax, &bv)
    }

    /// Iterates `(x_exponents, v_exponents, value)` over every stored partial.
    pub fn partials(&self) -> impl Iterator<Item = (&[u8], &[u8], f64)> + '_ {
        let nv = self.space.nv();
        (0..self.taylor.len()).map(move |idx| {
            let (xi, vi) = (idx / nv, idx % nv);
            (
                self.space.xm[xi].as_slice(),
                self.space.vm[vi].as_slice(),
                self.taylor[idx] * self.space.fact_x[xi] * self.space.fact_v[vi],
            )
        })
    }
}

/// Evaluates all mixed partials of `f` at `z` up to the given orders.
pub fn evaluate_jet(
    f: &dyn ScalarField,
    z: &SupportElement,
    order_x: usize,
    order_v: usize,
) -> Result<JetValue> {
    if order_x > MAX_ORDER_X || order_v > MAX_ORDER_V {
        return Err(FinslerError::OrderBudget {
            requested_x: order_x,
            requested_v: order_v,
            max_x: MAX_ORDER_X,
            max_v: MAX_ORDER_V,
        });
    }
    let n = z.dim();
    if n > MAX_DIM {
        return Err(FinslerError::Dimension(n));
    }
    if !f.in_domain(&z.x) {
        return Err(FinslerError::Domain(
            "support element base point outside the metric domain".into(),
        ));
    }
    let sp = JetSpace::get(n, order_x, order_v);
    let xj: Vec<Jet> = (0..n).map(|i| Jet::variable_x(&sp, i, z.x[i])).collect();
    let vj: Vec<Jet> = (0..n).map(|i| Jet::variable_v(&sp, i, z.v[i])).collect();
    let jet = f.eval_jet(&xj, &vj);
    Ok(JetValue {
        space: sp,
        taylor: jet.c,
    })
}

/// Central-difference estimate of one mixed partial with a single Richardson
/// extrapolation level (leading error O(step⁴)). The step is scaled per
/// coordinate by (1 + |coordinate|). Independent of the jet machinery.
pub fn finite_difference_partial(
    f: &dyn ScalarField,
    z: &SupportElement,
    xs: &[usize],
    vs: &[usize],
    step: f64,
) -> Result<f64> {
    if step < 1e-12 {
        return Err(FinslerError::FdStepUnderflow(step));
    }
    if xs.len() + vs.len() > 4 {
        return Err(FinslerError::OrderBudget {
            requested_x: xs.len(),
            requested_v: vs.len(),
            max_x: 4,
            max_v: 4,
        });
    }
    // slots: 0..n are x-coordinates, n..2n v-coordinates
    let n = z.dim();
    let mut slots: Vec<usize> = xs.to_vec();
    slots.extend(vs.iter().map(|&i| n + i));

    fn stencil(
        f: &dyn ScalarField,
        q: &mut Vec<f64>,
        n: usize,
        slots: &[usize],
        h: f64,
    ) -> Result<f64> {
        if slots.is_empty() {
            if !f.in_domain(&q[..n]) {
                return Err(FinslerError::Domain(
                    "finite-difference stencil point left the metric domain".into(),
                ));
            }
            return Ok(f.eval(&q[..n], &q[n..]));
        }
        let (s, rest) = (slots[0], &slots[1..]);
        let hc = h * (1.0 + q[s].abs());
        q[s] += hc;
        let plus = stencil(f, q, n, rest, h)?;
        q[s] -= 2.0 * hc;
        let minus = stencil(f, q, n, rest, h)?;
        q[s] += hc;
        Ok((plus - minus) / (2.0 * hc))
    }

    let mut q: Vec<f64> = z.x.iter().chain(z.v.iter()).copied().collect();
    let coarse = stencil(f, &mut q, n, &slots, step)?;
    let fine = stencil(f, &mut q, n, &slots, step / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
