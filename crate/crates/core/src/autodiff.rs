//! Minimal reverse-mode automatic differentiation on a Wengert tape.
//!
//! The deformation field is evaluated generically over [`Real`], so the same
//! code path produces plain `f64` values during evaluation and tape-recorded
//! [`Var`]s during training. Local partials are stored at forward time; a
//! single backward sweep accumulates adjoints.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar abstraction shared by `f64` and [`Var`].
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(self) -> f64;
    /// A constant in the same context as `self` (same tape for `Var`).
    fn lift(self, c: f64) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn recip(self) -> Self;
    fn add_c(self, c: f64) -> Self;
    fn mul_c(self, c: f64) -> Self;
}

impl Real for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn lift(self, c: f64) -> f64 {
        c
    }
    #[inline]
    fn sin(self) -> f64 {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        f64::exp(self)
    }
    #[inline]
    fn sqrt(self) -> f64 {
        f64::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> f64 {
        f64::tanh(self)
    }
    #[inline]
    fn recip(self) -> f64 {
        1.0 / self
    }
    #[inline]
    fn add_c(self, c: f64) -> f64 {
        self + c
    }
    #[inline]
    fn mul_c(self, c: f64) -> f64 {
        self * c
    }
}

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Wengert list. Leaves are created with [`Tape::leaf`]; every arithmetic
/// op on [`Var`] appends one node.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn with_capacity(cap: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(cap)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, parents: [u32; 2], partials: [f64; 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node { parents, partials });
        idx
    }

    /// Create an independent variable (a leaf node).
    pub fn leaf(&self, v: f64) -> Var<'_> {
        let idx = self.push([0, 0], [0.0, 0.0]);
        Var {
            tape: self,
            idx,
            v,
        }
    }

    /// Reverse sweep seeding `d(seed)/d(seed) = 1`. Returns adjoints for
    /// every node; index by `Var::index`.
    pub fn backward(&self, seed: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0f64; nodes.len()];
        adj[seed.idx as usize] = 1.0;
        for i in (0..nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = nodes[i];
            if n.partials[0] != 0.0 {
                adj[n.parents[0] as usize] += a * n.partials[0];
            }
            if n.partials[1] != 0.0 {
                adj[n.parents[1] as usize] += a * n.partials[1];
            }
        }
        adj
    }
}

/// A value recorded on a [`Tape`]. Copyable; arithmetic records nodes.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    v: f64,
}

impl<'t> Var<'t> {
    pub fn index(self) -> usize {
        self.idx as usize
    }

    fn unary(self, v: f64, d: f64) -> Var<'t> {
        let idx = self.tape.push([self.idx, 0], [d, 0.0]);
        Var {
            tape: self.tape,
            idx,
            v,
        }
    }

    fn binary(self, o: Var<'t>, v: f64, da: f64, db: f64) -> Var<'t> {
        let idx = self.tape.push([self.idx, o.idx], [da, db]);
        Var {
            tape: self.tape,
            idx,
            v,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.v + o.v, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.v - o.v, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.binary(o, self.v * o.v, o.v, self.v)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let inv = 1.0 / o.v;
        self.binary(o, self.v * inv, inv, -self.v * inv * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.v, -1.0)
    }
}

impl<'t> Real for Var<'t> {
    fn value(self) -> f64 {
        self.v
    }
    fn lift(self, c: f64) -> Var<'t> {
        // constant: a node with zero partials
        let idx = self.tape.push([0, 0], [0.0, 0.0]);
        Var {
            tape: self.tape,
            idx,
            v: c,
        }
    }
    fn sin(self) -> Var<'t> {
        self.unary(self.v.sin(), self.v.cos())
    }
    fn cos(self) -> Var<'t> {
        self.unary(self.v.cos(), -self.v.sin())
    }
    fn exp(self) -> Var<'t> {
        let e = self.v.exp();
        self.unary(e, e)
    }
    fn sqrt(self) -> Var<'t> {
        let s = self.v.sqrt();
        self.unary(s, 0.5 / s)
    }
    fn tanh(self) -> Var<'t> {
        let t = self.v.tanh();
        self.unary(t, 1.0 - t * t)
    }
    fn recip(self) -> Var<'t> {
        let inv = 1.0 / self.v;
        self.unary(inv, -inv * inv)
    }
    fn add_c(self, c: f64) -> Var<'t> {
        self.unary(self.v + c, 1.0)
    }
    fn mul_c(self, c: f64) -> Var<'t> {
        self.unary(self.v * c, c)
    }
}
