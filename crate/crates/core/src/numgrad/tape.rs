//! Define-then-run Wengert tape over row-major matrices.
//!
//! Nodes are appended in construction order, so every node's operands precede
//! it and a single reverse sweep suffices for the adjoint pass. A tape is built
//! once per mini-batch: leaves carry their values from construction, inputs are
//! bound at [`Tape::forward`], and [`Tape::backward`] seeds the last node (the
//! root) with unit adjoint.
//!
//! Broadcasting is limited to one case: the right operand of [`Tape::add`] and
//! [`Tape::mul`] may be a single row that is repeated over the left operand's
//! rows.

use ndarray::{Array2, Axis, Zip};

use crate::error::{CutsError, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Input { rows: usize, cols: usize },
    Leaf,
    Affine { x: Var, w: Var, b: Var },
    LeakyRelu { x: Var, slope: T },
    Logistic { x: Var },
    Mul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Scale { x: Var, factor: T },
    Clamp { x: Var, lo: T, hi: T },
    SquaredError { pred: Var, target: Var },
    Sum { x: Var },
    Mean { x: Var },
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    value: Option<Array2<T>>,
    adjoint: Option<Array2<T>>,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    evaluated: bool,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new(), evaluated: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op<T>, value: Option<Array2<T>>, requires_grad: bool) -> Var {
        self.evaluated = false;
        self.nodes.push(Node { op, value, adjoint: None, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Placeholder whose value is bound when the tape is run.
    pub fn input(&mut self, rows: usize, cols: usize, requires_grad: bool) -> Var {
        self.push(Op::Input { rows, cols }, None, requires_grad)
    }

    /// Leaf that never receives an adjoint.
    pub fn constant(&mut self, value: Array2<T>) -> Var {
        self.push(Op::Leaf, Some(value), false)
    }

    /// Leaf whose adjoint is accumulated by [`Tape::backward`].
    pub fn parameter(&mut self, value: Array2<T>) -> Var {
        self.push(Op::Leaf, Some(value), true)
    }

    /// `x · w + b` with `x: rows×in`, `w: in×out`, `b: 1×out`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let rg = self.needs(x) || self.needs(w) || self.needs(b);
        self.push(Op::Affine { x, w, b }, None, rg)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        let rg = self.needs(x);
        self.push(Op::LeakyRelu { x, slope }, None, rg)
    }

    pub fn logistic(&mut self, x: Var) -> Var {
        let rg = self.needs(x);
        self.push(Op::Logistic { x }, None, rg)
    }

    /// Elementwise product; `b` may be a broadcast row.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::Mul { a, b }, None, rg)
    }

    /// Elementwise sum; `b` may be a broadcast row.
    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::Add { a, b }, None, rg)
    }

    pub fn scale(&mut self, x: Var, factor: T) -> Var {
        let rg = self.needs(x);
        self.push(Op::Scale { x, factor }, None, rg)
    }

    /// Clamps into `[lo, hi]`; the adjoint is zero outside the interval.
    pub fn clamp(&mut self, x: Var, lo: T, hi: T) -> Var {
        let rg = self.needs(x);
        self.push(Op::Clamp { x, lo, hi }, None, rg)
    }

    /// Elementwise `(pred - target)^2`.
    pub fn squared_error(&mut self, pred: Var, target: Var) -> Var {
        let rg = self.needs(pred) || self.needs(target);
        self.push(Op::SquaredError { pred, target }, None, rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let rg = self.needs(x);
        self.push(Op::Sum { x }, None, rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let rg = self.needs(x);
        self.push(Op::Mean { x }, None, rg)
    }

    /// Binds `inputs`, evaluates every node and returns the root (last node),
    /// which must be a 1×1 value.
    pub fn forward(&mut self, inputs: &[(Var, Array2<T>)]) -> Result<T> {
        self.evaluate(inputs)?;
        let root = self.nodes.last().and_then(|n| n.value.as_ref()).expect("evaluated tape");
        if root.dim() != (1, 1) {
            return Err(CutsError::Shape(format!("root node is {:?}, expected a scalar", root.dim())));
        }
        Ok(root[[0, 0]])
    }

    /// Binds `inputs` and evaluates every node without requiring a scalar root.
    pub fn evaluate(&mut self, inputs: &[(Var, Array2<T>)]) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(CutsError::State("empty tape".into()));
        }
        self.evaluated = false;
        for node in &mut self.nodes {
            node.adjoint = None;
            if !matches!(node.op, Op::Leaf) {
                node.value = None;
            }
        }
        for (var, value) in inputs {
            let node = self
                .nodes
                .get_mut(var.0)
                .ok_or_else(|| CutsError::Config(format!("unknown node {}", var.0)))?;
            match node.op {
                Op::Input { rows, cols } => {
                    if value.dim() != (rows, cols) {
                        return Err(CutsError::Shape(format!(
                            "input {} expects {}x{}, got {}x{}",
                            var.0,
                            rows,
                            cols,
                            value.nrows(),
                            value.ncols()
                        )));
                    }
                    node.value = Some(value.clone());
                }
                _ => return Err(CutsError::Config(format!("node {} is not an input", var.0))),
            }
        }
        for idx in 0..self.nodes.len() {
            if self.nodes[idx].value.is_some() {
                continue;
            }
            let value = self.compute(idx)?;
            self.nodes[idx].value = Some(value);
        }
        self.evaluated = true;
        Ok(())
    }

    fn val(&self, v: Var) -> &Array2<T> {
        self.nodes[v.0].value.as_ref().expect("operand evaluated before use")
    }

    fn compute(&self, idx: usize) -> Result<Array2<T>> {
        let out = match &self.nodes[idx].op {
            Op::Input { .. } => {
                return Err(CutsError::State(format!("input {idx} was not bound")));
            }
            Op::Leaf => unreachable!("leaves carry values"),
            Op::Affine { x, w, b } => {
                let (x, w, b) = (self.val(*x), self.val(*w), self.val(*b));
                if x.ncols() != w.nrows() || b.dim() != (1, w.ncols()) {
                    return Err(CutsError::Shape(format!(
                        "affine node {idx}: x {:?}, w {:?}, b {:?}",
                        x.dim(),
                        w.dim(),
                        b.dim()
                    )));
                }
                let mut y = x.dot(w);
                y += b;
                y
            }
            Op::LeakyRelu { x, slope } => {
                let s = *slope;
                self.val(*x).mapv(|v| if v > T::zero() { v } else { v * s })
            }
            Op::Logistic { x } => self.val(*x).mapv(logistic),
            Op::Mul { a, b } => {
                let (a, b) = (self.val(*a), self.val(*b));
                check_broadcast(idx, a, b)?;
                a * b
            }
            Op::Add { a, b } => {
                let (a, b) = (self.val(*a), self.val(*b));
                check_broadcast(idx, a, b)?;
                a + b
            }
            Op::Scale { x, factor } => self.val(*x) * *factor,
            Op::Clamp { x, lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                self.val(*x).mapv(|v| v.max(lo).min(hi))
            }
            Op::SquaredError { pred, target } => {
                let (p, t) = (self.val(*pred), self.val(*target));
                if p.dim() != t.dim() {
                    return Err(CutsError::Shape(format!(
                        "squared error node {idx}: {:?} vs {:?}",
                        p.dim(),
                        t.dim()
                    )));
                }
                let mut d = p - t;
                d.mapv_inplace(|v| v * v);
                d
            }
            Op::Sum { x } => Array2::from_elem((1, 1), self.val(*x).sum()),
            Op::Mean { x } => {
                let x = self.val(*x);
                if x.is_empty() {
                    return Err(CutsError::Shape(format!("mean node {idx} over an empty value")));
                }
                Array2::from_elem((1, 1), x.sum() / T::of(x.len() as f64))
            }
        };
        Ok(out)
    }

    /// Reverse sweep from the root. Requires a prior forward pass.
    pub fn backward(&mut self) -> Result<()> {
        if !self.evaluated {
            return Err(CutsError::State("backward called before forward".into()));
        }
        let root = self.nodes.len() - 1;
        if self.nodes[root].value.as_ref().map(|v| v.dim()) != Some((1, 1)) {
            return Err(CutsError::Shape("backward requires a scalar root".into()));
        }
        for node in &mut self.nodes {
            node.adjoint = None;
        }
        if !self.nodes[root].requires_grad {
            return Ok(());
        }
        self.nodes[root].adjoint = Some(Array2::from_elem((1, 1), T::one()));

        for idx in (0..self.nodes.len()).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[idx].adjoint.take() else {
                continue;
            };
            let contributions = self.pullback(idx, &g);
            self.nodes[idx].adjoint = Some(g);
            for (var, grad) in contributions {
                self.accumulate(var, grad);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, grad: Array2<T>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.adjoint {
            Some(acc) => *acc += &grad,
            None => node.adjoint = Some(grad),
        }
    }

    fn pullback(&self, idx: usize, g: &Array2<T>) -> Vec<(Var, Array2<T>)> {
        let mut out = Vec::with_capacity(3);
        match &self.nodes[idx].op {
            Op::Input { .. } | Op::Leaf => {}
            Op::Affine { x, w, b } => {
                if self.needs(*x) {
                    out.push((*x, g.dot(&self.val(*w).t())));
                }
                if self.needs(*w) {
                    out.push((*w, self.val(*x).t().dot(g)));
                }
                if self.needs(*b) {
                    out.push((*b, g.sum_axis(Axis(0)).insert_axis(Axis(0))));
                }
            }
            Op::LeakyRelu { x, slope } => {
                let s = *slope;
                let mut dx = g.clone();
                Zip::from(&mut dx).and(self.val(*x)).for_each(|d, &v| {
                    if v <= T::zero() {
                        *d = *d * s;
                    }
                });
                out.push((*x, dx));
            }
            Op::Logistic { x } => {
                let y = self.nodes[idx].value.as_ref().expect("evaluated");
                let mut dx = g.clone();
                Zip::from(&mut dx).and(y).for_each(|d, &y| *d = *d * y * (T::one() - y));
                out.push((*x, dx));
            }
            Op::Mul { a, b } => {
                if self.needs(*a) {
                    out.push((*a, g * self.val(*b)));
                }
                if self.needs(*b) {
                    let full = g * self.val(*a);
                    out.push((*b, reduce_to(full, self.val(*b).nrows())));
                }
            }
            Op::Add { a, b } => {
                if self.needs(*a) {
                    out.push((*a, g.clone()));
                }
                if self.needs(*b) {
                    out.push((*b, reduce_to(g.clone(), self.val(*b).nrows())));
                }
            }
            Op::Scale { x, factor } => out.push((*x, g * *factor)),
            Op::Clamp { x, lo, hi } => {
                let (lo, hi) = (*lo, *hi);
                let mut dx = g.clone();
                Zip::from(&mut dx).and(self.val(*x)).for_each(|d, &v| {
                    if v < lo || v > hi {
                        *d = T::zero();
                    }
                });
                out.push((*x, dx));
            }
            Op::SquaredError { pred, target } => {
                let two = T::of(2.0);
                let mut d = self.val(*pred) - self.val(*target);
                Zip::from(&mut d).and(g).for_each(|d, &g| *d = *d * two * g);
                if self.needs(*target) {
                    out.push((*target, d.mapv(|v| -v)));
                }
                if self.needs(*pred) {
                    out.push((*pred, d));
                }
            }
            Op::Sum { x } => {
                out.push((*x, Array2::from_elem(self.val(*x).dim(), g[[0, 0]])));
            }
            Op::Mean { x } => {
                let shape = self.val(*x).dim();
                let n = T::of((shape.0 * shape.1) as f64);
                out.push((*x, Array2::from_elem(shape, g[[0, 0]] / n)));
            }
        }
        out
    }

    pub fn value(&self, v: Var) -> Result<&Array2<T>> {
        self.nodes
            .get(v.0)
            .and_then(|n| n.value.as_ref())
            .ok_or_else(|| CutsError::State(format!("node {} has no value; run forward first", v.0)))
    }

    /// Adjoint of `v` after [`Tape::backward`]; zeros when the root does not
    /// depend on `v`.
    pub fn grad(&self, v: Var) -> Result<Array2<T>> {
        let node = self.nodes.get(v.0).ok_or_else(|| CutsError::Config(format!("unknown node {}", v.0)))?;
        if !self.evaluated {
            return Err(CutsError::State("gradient requested before forward".into()));
        }
        match &node.adjoint {
            Some(a) => Ok(a.clone()),
            None => Ok(Array2::zeros(self.value(v)?.dim())),
        }
    }

    /// Like [`Tape::grad`] but moves the buffer out of the tape.
    pub fn take_grad(&mut self, v: Var) -> Result<Array2<T>> {
        let dim = self.value(v)?.dim();
        Ok(self.nodes[v.0].adjoint.take().unwrap_or_else(|| Array2::zeros(dim)))
    }
}

pub fn logistic<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn check_broadcast<T>(idx: usize, a: &Array2<T>, b: &Array2<T>) -> Result<()> {
    let ok = a.dim() == b.dim() || (b.nrows() == 1 && b.ncols() == a.ncols());
    if ok {
        Ok(())
    } else {
        Err(CutsError::Shape(format!("node {idx}: cannot combine {:?} with {:?}", a.dim(), b.dim())))
    }
}

fn reduce_to<T: Scalar>(full: Array2<T>, rows: usize) -> Array2<T> {
    if full.nrows() == rows {
        full
    } else {
        full.sum_axis(Axis(0)).insert_axis(Axis(0))
    }
}
