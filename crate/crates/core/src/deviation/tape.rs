//! Scalar reverse-mode automatic differentiation.
//!
//! Every operation appends a node holding its value and the partial
//! derivatives with respect to its operands. Nodes are appended in
//! evaluation order, so one reverse sweep yields all adjoints.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Default)]
struct Nodes {
    vals: Vec<f64>,
    /// `ends[k]` is one past the last dependency of node k.
    ends: Vec<u32>,
    dep: Vec<u32>,
    weight: Vec<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Nodes>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.val)
    }
}

/// Adjoints of every node with respect to one output.
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.0[v.idx as usize]
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        let t = Self::default();
        {
            let mut n = t.nodes.borrow_mut();
            n.vals.reserve(nodes);
            n.ends.reserve(nodes);
            n.dep.reserve(2 * nodes);
            n.weight.reserve(2 * nodes);
        }
        t
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, val: f64, deps: impl IntoIterator<Item = (u32, f64)>) -> Var<'_> {
        let mut n = self.nodes.borrow_mut();
        for (d, w) in deps {
            n.dep.push(d);
            n.weight.push(w);
        }
        let end = n.dep.len() as u32;
        n.ends.push(end);
        n.vals.push(val);
        Var {
            tape: self,
            idx: (n.vals.len() - 1) as u32,
            val,
        }
    }

    /// An independent input.
    pub fn var(&self, val: f64) -> Var<'_> {
        self.push(val, [])
    }

    pub fn constant(&self, val: f64) -> Var<'_> {
        self.push(val, [])
    }

    /// `c + sum_k coef_k * x_k`.
    pub fn linear<'t>(&'t self, terms: &[(Var<'t>, f64)], c: f64) -> Var<'t> {
        let val = terms.iter().fold(c, |acc, (v, w)| acc + v.val * w);
        self.push(val, terms.iter().map(|(v, w)| (v.idx, *w)))
    }

    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let val = xs.iter().map(|v| v.val).sum();
        self.push(val, xs.iter().map(|v| (v.idx, 1.0)))
    }

    /// `sqrt(sum_k x_k^2)`, with zero derivative at the origin.
    pub fn norm2<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let val = xs.iter().map(|v| v.val * v.val).sum::<f64>().sqrt();
        let inv = if val > 0.0 { 1.0 / val } else { 0.0 };
        self.push(val, xs.iter().map(|v| (v.idx, v.val * inv)))
    }

    /// Adjoints of `out` with respect to every earlier node.
    pub fn backward(&self, out: Var<'_>) -> Adjoints {
        let n = self.nodes.borrow();
        let mut adj = vec![0.0; n.vals.len()];
        adj[out.idx as usize] = 1.0;
        for k in (0..=out.idx as usize).rev() {
            let a = adj[k];
            if a == 0.0 {
                continue;
            }
            let start = if k == 0 { 0 } else { n.ends[k - 1] as usize };
            for e in start..n.ends[k] as usize {
                adj[n.dep[e] as usize] += a * n.weight[e];
            }
        }
        Adjoints(adj)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.val
    }

    fn unary(self, val: f64, d: f64) -> Var<'t> {
        self.tape.push(val, [(self.idx, d)])
    }

    /// Absolute value with zero derivative at 0.
    pub fn abs(self) -> Var<'t> {
        let d = if self.val > 0.0 {
            1.0
        } else if self.val < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.val.abs(), d)
    }

    pub fn square(self) -> Var<'t> {
        self.unary(self.val * self.val, 2.0 * self.val)
    }

    /// Square root with zero derivative at 0.
    pub fn sqrt(self) -> Var<'t> {
        let s = self.val.sqrt();
        self.unary(s, if s > 0.0 { 0.5 / s } else { 0.0 })
    }

    pub fn exp(self) -> Var<'t> {
        let e = self.val.exp();
        self.unary(e, e)
    }

    pub fn ln(self) -> Var<'t> {
        self.unary(self.val.ln(), 1.0 / self.val)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Var<'t>) -> Var<'t> {
        self.tape
            .push(self.val + o.val, [(self.idx, 1.0), (o.idx, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Var<'t>) -> Var<'t> {
        self.tape
            .push(self.val - o.val, [(self.idx, 1.0), (o.idx, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Var<'t>) -> Var<'t> {
        self.tape
            .push(self.val * o.val, [(self.idx, o.val), (o.idx, self.val)])
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Var<'t>) -> Var<'t> {
        let q = self.val / o.val;
        self.tape
            .push(q, [(self.idx, 1.0 / o.val), (o.idx, -q / o.val)])
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-self.val, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(self.val + c, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(self.val - c, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(self.val * c, c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.unary(self.val / c, 1.0 / c)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, v: Var<'t>) -> Var<'t> {
        v.unary(self - v.val, -1.0)
    }
}
