//! Reverse-mode differentiation over a per-thread expression tape.
//!
//! A [`Var`] is a value plus an index into the tape of the current thread.
//! [`gradient`] clears the tape, seeds one leaf per input, evaluates the
//! closure, and sweeps the recorded partials backwards. Constants never
//! touch the tape, so a node has at most two parents.
//!
//! ```
//! use misclass_core::kernel::{gradient, Real};
//!
//! let mut g = [0.0; 2];
//! let v = gradient(&[3.0, 2.0], &mut g, |x| x[0] * x[0] * x[1] + x[1].ln());
//! assert_eq!(v, 18.0 + 2f64.ln());
//! assert_eq!(g, [12.0, 9.5]);
//! ```

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use statrs::function::gamma::{digamma, ln_gamma};

use super::real::{log_sigmoid, softplus, Real};

const NO_PARENT: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

#[derive(Default)]
struct Tape {
    nodes: Vec<Node>,
    adjoints: Vec<f64>,
}

thread_local! {
    static TAPE: RefCell<Tape> = RefCell::new(Tape::default());
}

/// A differentiable scalar recorded on the current thread's tape.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    idx: u32,
    val: f64,
}

impl Var {
    pub fn constant(val: f64) -> Self {
        Self {
            idx: NO_PARENT,
            val,
        }
    }

    pub fn value(self) -> f64 {
        self.val
    }

    pub fn is_constant(self) -> bool {
        self.idx == NO_PARENT
    }

    fn unary(self, val: f64, d: f64) -> Self {
        if self.is_constant() {
            return Self::constant(val);
        }
        push([self.idx, NO_PARENT], [d, 0.0], val)
    }

    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        match (self.is_constant(), other.is_constant()) {
            (true, true) => Self::constant(val),
            (false, true) => push([self.idx, NO_PARENT], [da, 0.0], val),
            (true, false) => push([other.idx, NO_PARENT], [db, 0.0], val),
            (false, false) => push([self.idx, other.idx], [da, db], val),
        }
    }
}

fn push(parents: [u32; 2], partials: [f64; 2], val: f64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.nodes.len() as u32;
        t.nodes.push(Node { parents, partials });
        Var { idx, val }
    })
}

/// Evaluates `f` at `x`, writes `d f / d x` into `grad`, and returns `f(x)`.
///
/// Must not be nested: the closure owns the thread's tape for its duration.
pub fn gradient<F>(x: &[f64], grad: &mut [f64], f: F) -> f64
where
    F: FnOnce(&[Var]) -> Var,
{
    assert_eq!(x.len(), grad.len(), "gradient buffer length");
    let inputs: Vec<Var> = TAPE.with(|t| {
        let mut t = t.borrow_mut();
        t.nodes.clear();
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                t.nodes.push(Node {
                    parents: [NO_PARENT; 2],
                    partials: [0.0; 2],
                });
                Var { idx: i as u32, val: v }
            })
            .collect()
    });
    let out = f(&inputs);
    grad.iter_mut().for_each(|g| *g = 0.0);
    if out.is_constant() {
        return out.val;
    }
    TAPE.with(|t| {
        let t = &mut *t.borrow_mut();
        let n = out.idx as usize + 1;
        t.adjoints.clear();
        t.adjoints.resize(n, 0.0);
        t.adjoints[n - 1] = 1.0;
        for i in (0..n).rev() {
            let a = t.adjoints[i];
            if a == 0.0 {
                continue;
            }
            let node = t.nodes[i];
            for k in 0..2 {
                let p = node.parents[k];
                if p != NO_PARENT {
                    t.adjoints[p as usize] += node.partials[k] * a;
                }
            }
        }
        for (g, adj) in grad.iter_mut().zip(&t.adjoints) {
            *g = *adj;
        }
    });
    out.val
}

/// Number of nodes recorded by the last evaluation on this thread.
pub fn tape_len() -> usize {
    TAPE.with(|t| t.borrow().nodes.len())
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        self.binary(rhs, self.val + rhs.val, 1.0, 1.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        self.binary(rhs, self.val - rhs.val, 1.0, -1.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        self.binary(rhs, self.val * rhs.val, rhs.val, self.val)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        let q = self.val / rhs.val;
        self.binary(rhs, q, 1.0 / rhs.val, -q / rhs.val)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        self.unary(-self.val, -1.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    fn add(self, rhs: f64) -> Var {
        self.unary(self.val + rhs, 1.0)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    fn sub(self, rhs: f64) -> Var {
        self.unary(self.val - rhs, 1.0)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    fn mul(self, rhs: f64) -> Var {
        self.unary(self.val * rhs, rhs)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    fn div(self, rhs: f64) -> Var {
        self.unary(self.val / rhs, 1.0 / rhs)
    }
}

impl Real for Var {
    fn constant(x: f64) -> Self {
        Var::constant(x)
    }

    fn value(self) -> f64 {
        self.val
    }

    fn rsub(self, c: f64) -> Self {
        self.unary(c - self.val, -1.0)
    }

    fn ln(self) -> Self {
        self.unary(self.val.ln(), 1.0 / self.val)
    }

    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(e, e)
    }

    fn ln_gamma(self) -> Self {
        self.unary(ln_gamma(self.val), digamma(self.val))
    }

    fn softplus(self) -> Self {
        self.unary(softplus(self.val), log_sigmoid(self.val).exp())
    }

    fn logistic(self) -> Self {
        let s = log_sigmoid(self.val).exp();
        self.unary(s, s * (1.0 - s))
    }

    fn min_const(self, cap: f64) -> Self {
        if self.val > cap {
            Var::constant(cap)
        } else {
            self
        }
    }
}
