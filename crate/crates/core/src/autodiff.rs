//! Reverse-mode differentiation over dense complex tensors.
//!
//! A [`Tape`] records every operation of one forward pass. Values are
//! `Complex64` throughout; real quantities are complex numbers with a zero
//! imaginary part.
//!
//! Gradient convention: for a real scalar loss `L` and a complex entry
//! `z = x + iy`, the stored gradient is `∂L/∂x + i·∂L/∂y`. For a holomorphic
//! map `w = f(z)` the adjoint rule is `ḡ_z = conj(f'(z))·ḡ_w`, which is the
//! rule every linear operation below follows. A real optimizer can then step
//! the real and imaginary parts independently.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Handle to a node on a [`Tape`].
///
/// Handles are only meaningful for the tape that created them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ComplexTensor {
    id: usize,
}

impl ComplexTensor {
    pub fn id(self) -> usize {
        self.id
    }
}

/// A differentiable operation implemented outside this module.
///
/// The caller computes the forward value; `backward` maps the output
/// gradient to one gradient per input, in the order the inputs were given
/// to [`Tape::custom`]. `None` means no contribution.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;

    fn backward(&self, inputs: &[&[C64]], output: &[C64], grad_out: &[C64]) -> Vec<Option<Vec<C64>>>;
}

enum Op {
    Leaf,
    Constant,
    Matvec { m: usize, v: usize, rows: usize, cols: usize },
    WeightedSum { coeffs: usize, terms: Vec<usize> },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale { t: usize, s: usize },
    ScaleConst { t: usize, k: C64 },
    MulConst { t: usize, k: Vec<C64> },
    AddConst(usize),
    Conj(usize),
    Re(usize),
    Abs(usize),
    Sum(usize),
    SquaredNorm(usize),
    Tanh(usize),
    Relu(usize),
    Sqrt(usize),
    Recip(usize),
    Gather { t: usize, idx: Vec<usize> },
    Concat(Vec<usize>),
    Softmax(usize),
    CrossEntropy { logits: usize, label: usize },
    Custom { op: Box<dyn CustomOp>, inputs: Vec<usize> },
}

struct Node {
    shape: Vec<usize>,
    value: Vec<C64>,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<C64>>,
}

/// Single-writer record of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<C64>, op: Op, parents: &[usize]) -> ComplexTensor {
        debug_assert_eq!(numel(&shape), value.len());
        let requires_grad = match op {
            Op::Leaf => true,
            Op::Constant => false,
            _ => parents.iter().any(|&p| self.nodes[p].requires_grad),
        };
        let id = self.nodes.len();
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
            grad: None,
        });
        ComplexTensor { id }
    }

    fn check_len(values: &[C64], shape: &[usize]) -> Result<()> {
        if values.len() != numel(shape) {
            return Err(Error::Shape(format!(
                "{} values do not fill shape {:?}",
                values.len(),
                shape
            )));
        }
        Ok(())
    }

    /// Tracked leaf: receives a gradient on [`Tape::backward`].
    pub fn leaf(&mut self, values: Vec<C64>, shape: &[usize]) -> Result<ComplexTensor> {
        Self::check_len(&values, shape)?;
        Ok(self.push(shape.to_vec(), values, Op::Leaf, &[]))
    }

    pub fn leaf_real(&mut self, values: &[f64], shape: &[usize]) -> Result<ComplexTensor> {
        self.leaf(values.iter().map(|&x| re(x)).collect(), shape)
    }

    /// Untracked input.
    pub fn constant(&mut self, values: Vec<C64>, shape: &[usize]) -> Result<ComplexTensor> {
        Self::check_len(&values, shape)?;
        Ok(self.push(shape.to_vec(), values, Op::Constant, &[]))
    }

    pub fn constant_real(&mut self, values: &[f64], shape: &[usize]) -> Result<ComplexTensor> {
        self.constant(values.iter().map(|&x| re(x)).collect(), shape)
    }

    pub fn value(&self, t: ComplexTensor) -> &[C64] {
        &self.nodes[t.id].value
    }

    /// Value of a 0-dim (or single element) node.
    pub fn scalar_value(&self, t: ComplexTensor) -> C64 {
        self.nodes[t.id].value[0]
    }

    pub fn shape(&self, t: ComplexTensor) -> &[usize] {
        &self.nodes[t.id].shape
    }

    pub fn requires_grad(&self, t: ComplexTensor) -> bool {
        self.nodes[t.id].requires_grad
    }

    /// Accumulated gradient of a tracked leaf, if backward has reached it.
    pub fn grad(&self, t: ComplexTensor) -> Option<&[C64]> {
        self.nodes[t.id].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn same_shape(&self, op: &'static str, a: ComplexTensor, b: ComplexTensor) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op,
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        Ok(())
    }

    fn require_scalar(&self, op: &'static str, s: ComplexTensor) -> Result<()> {
        if self.value(s).len() != 1 {
            return Err(Error::Dimension {
                op,
                detail: format!("expected a scalar, got shape {:?}", self.shape(s)),
            });
        }
        Ok(())
    }

    fn unary(&mut self, t: ComplexTensor, f: impl Fn(C64) -> C64, op: Op) -> ComplexTensor {
        let value = self.value(t).iter().map(|&x| f(x)).collect();
        let shape = self.shape(t).to_vec();
        self.push(shape, value, op, &[t.id])
    }

    /// Matrix-vector product; `m` has shape `[r, c]` in row-major order.
    pub fn matvec(&mut self, m: ComplexTensor, v: ComplexTensor) -> Result<ComplexTensor> {
        let (rows, cols) = match *self.shape(m) {
            [r, c] => (r, c),
            ref s => {
                return Err(Error::Dimension {
                    op: "matvec",
                    detail: format!("matrix must be 2-d, got {s:?}"),
                })
            }
        };
        if self.shape(v) != [cols] {
            return Err(Error::Dimension {
                op: "matvec",
                detail: format!("[{rows}, {cols}] matrix against vector {:?}", self.shape(v)),
            });
        }
        let mv = self.value(m);
        let vv = self.value(v);
        let out = (0..rows)
            .map(|i| {
                mv[i * cols..(i + 1) * cols]
                    .iter()
                    .zip(vv)
                    .fold(ZERO, |acc, (a, b)| acc + a * b)
            })
            .collect();
        Ok(self.push(vec![rows], out, Op::Matvec { m: m.id, v: v.id, rows, cols }, &[m.id, v.id]))
    }

    /// `Σ_j coeffs[j] · terms[j]`.
    pub fn weighted_sum(&mut self, coeffs: ComplexTensor, terms: &[ComplexTensor]) -> Result<ComplexTensor> {
        let Some(first) = terms.first() else {
            return Err(Error::Arity {
                op: "weighted_sum",
                detail: "empty term list".into(),
            });
        };
        if self.value(coeffs).len() != terms.len() {
            return Err(Error::Arity {
                op: "weighted_sum",
                detail: format!("{} coefficients for {} terms", self.value(coeffs).len(), terms.len()),
            });
        }
        for t in &terms[1..] {
            self.same_shape("weighted_sum", *first, *t)?;
        }
        let shape = self.shape(*first).to_vec();
        let mut out = vec![ZERO; numel(&shape)];
        let cv = self.value(coeffs);
        for (c, t) in cv.iter().zip(terms) {
            for (o, x) in out.iter_mut().zip(self.value(*t)) {
                *o += c * x;
            }
        }
        let mut parents: Vec<usize> = terms.iter().map(|t| t.id).collect();
        parents.push(coeffs.id);
        let op = Op::WeightedSum {
            coeffs: coeffs.id,
            terms: terms.iter().map(|t| t.id).collect(),
        };
        Ok(self.push(shape, out, op, &parents))
    }

    pub fn add(&mut self, a: ComplexTensor, b: ComplexTensor) -> Result<ComplexTensor> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x + y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a.id, b.id), &[a.id, b.id]))
    }

    pub fn sub(&mut self, a: ComplexTensor, b: ComplexTensor) -> Result<ComplexTensor> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x - y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Sub(a.id, b.id), &[a.id, b.id]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: ComplexTensor, b: ComplexTensor) -> Result<ComplexTensor> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).collect();
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a.id, b.id), &[a.id, b.id]))
    }

    /// Scalar node times tensor; the only broadcast the tape supports.
    pub fn scale(&mut self, t: ComplexTensor, s: ComplexTensor) -> Result<ComplexTensor> {
        self.require_scalar("scale", s)?;
        let k = self.scalar_value(s);
        let out = self.value(t).iter().map(|x| k * x).collect();
        Ok(self.push(self.shape(t).to_vec(), out, Op::Scale { t: t.id, s: s.id }, &[t.id, s.id]))
    }

    pub fn scale_const(&mut self, t: ComplexTensor, k: C64) -> ComplexTensor {
        self.unary(t, |x| k * x, Op::ScaleConst { t: t.id, k })
    }

    /// Elementwise product with a constant tensor (masks, dropout).
    pub fn mul_const(&mut self, t: ComplexTensor, k: Vec<C64>) -> Result<ComplexTensor> {
        if k.len() != self.value(t).len() {
            return Err(Error::Dimension {
                op: "mul_const",
                detail: format!("{} factors for {} entries", k.len(), self.value(t).len()),
            });
        }
        let out = self.value(t).iter().zip(&k).map(|(x, y)| x * y).collect();
        Ok(self.push(self.shape(t).to_vec(), out, Op::MulConst { t: t.id, k }, &[t.id]))
    }

    pub fn add_const(&mut self, t: ComplexTensor, k: C64) -> ComplexTensor {
        self.unary(t, |x| x + k, Op::AddConst(t.id))
    }

    pub fn conj(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| x.conj(), Op::Conj(t.id))
    }

    /// Real part, as a real-valued tensor.
    pub fn real(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| re(x.re), Op::Re(t.id))
    }

    /// Elementwise modulus.
    pub fn abs(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| re(x.norm()), Op::Abs(t.id))
    }

    /// Sum of all entries, as a 0-dim tensor.
    pub fn sum(&mut self, t: ComplexTensor) -> ComplexTensor {
        let s = self.value(t).iter().fold(ZERO, |acc, x| acc + x);
        self.push(vec![], vec![s], Op::Sum(t.id), &[t.id])
    }

    /// `Σ |x|²`, as a real 0-dim tensor.
    pub fn squared_norm(&mut self, t: ComplexTensor) -> ComplexTensor {
        let s = self.value(t).iter().map(|x| x.norm_sqr()).sum::<f64>();
        self.push(vec![], vec![re(s)], Op::SquaredNorm(t.id), &[t.id])
    }

    /// `tanh` of the real part.
    pub fn tanh(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| re(x.re.tanh()), Op::Tanh(t.id))
    }

    /// `max(0, ·)` of the real part.
    pub fn relu(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| re(x.re.max(0.0)), Op::Relu(t.id))
    }

    /// Square root of the real part.
    pub fn sqrt(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| re(x.re.sqrt()), Op::Sqrt(t.id))
    }

    /// Complex reciprocal.
    pub fn recip(&mut self, t: ComplexTensor) -> ComplexTensor {
        self.unary(t, |x| x.inv(), Op::Recip(t.id))
    }

    /// Selects entries of a flattened tensor into a vector.
    pub fn gather(&mut self, t: ComplexTensor, idx: &[usize]) -> Result<ComplexTensor> {
        let v = self.value(t);
        if let Some(&bad) = idx.iter().find(|&&i| i >= v.len()) {
            return Err(Error::Dimension {
                op: "gather",
                detail: format!("index {bad} out of {} entries", v.len()),
            });
        }
        let out = idx.iter().map(|&i| v[i]).collect();
        let op = Op::Gather {
            t: t.id,
            idx: idx.to_vec(),
        };
        Ok(self.push(vec![idx.len()], out, op, &[t.id]))
    }

    /// Flattens and concatenates the given tensors into one vector.
    pub fn concat(&mut self, parts: &[ComplexTensor]) -> Result<ComplexTensor> {
        if parts.is_empty() {
            return Err(Error::Arity {
                op: "concat",
                detail: "nothing to concatenate".into(),
            });
        }
        let out: Vec<C64> = parts.iter().flat_map(|p| self.value(*p).iter().copied()).collect();
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        Ok(self.push(vec![out.len()], out, Op::Concat(ids.clone()), &ids))
    }

    /// Softmax over the real parts of a vector.
    pub fn softmax(&mut self, t: ComplexTensor) -> ComplexTensor {
        let out = softmax_real(self.value(t)).into_iter().map(re).collect();
        self.push(self.shape(t).to_vec(), out, Op::Softmax(t.id), &[t.id])
    }

    /// `logsumexp(z) − z[label]` over the real parts of `logits`.
    pub fn cross_entropy(&mut self, logits: ComplexTensor, label: usize) -> Result<ComplexTensor> {
        let z = self.value(logits);
        if label >= z.len() {
            return Err(Error::Label {
                label,
                classes: z.len(),
            });
        }
        let max = z.iter().map(|x| x.re).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|x| (x.re - max).exp()).sum::<f64>().ln();
        let loss = lse - z[label].re;
        let op = Op::CrossEntropy {
            logits: logits.id,
            label,
        };
        Ok(self.push(vec![], vec![re(loss)], op, &[logits.id]))
    }

    /// Records an externally computed operation.
    pub fn custom(
        &mut self,
        op: Box<dyn CustomOp>,
        inputs: &[ComplexTensor],
        value: Vec<C64>,
        shape: &[usize],
    ) -> Result<ComplexTensor> {
        Self::check_len(&value, shape)?;
        let ids: Vec<usize> = inputs.iter().map(|t| t.id).collect();
        Ok(self.push(shape.to_vec(), value, Op::Custom { op, inputs: ids.clone() }, &ids))
    }

    /// Propagates the gradient of a real scalar to every tracked leaf.
    ///
    /// Leaf gradients accumulate across calls until [`Tape::zero_grad`].
    pub fn backward(&mut self, scalar: ComplexTensor) -> Result<()> {
        let node = &self.nodes[scalar.id];
        if node.value.len() != 1 || !node.shape.is_empty() {
            return Err(Error::Autodiff(format!(
                "backward needs a 0-dim scalar, got shape {:?}",
                node.shape
            )));
        }
        if node.value[0].im.abs() >= 1e-12 {
            return Err(Error::Autodiff(format!(
                "backward needs a real scalar, imaginary part is {:e}",
                node.value[0].im
            )));
        }
        let mut grads: Vec<Option<Vec<C64>>> = (0..=scalar.id).map(|_| None).collect();
        grads[scalar.id] = Some(vec![re(1.0)]);

        for i in (0..=scalar.id).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                grads[i] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
        }

        for (i, g) in grads.into_iter().enumerate() {
            let (Some(g), Op::Leaf) = (g, &self.nodes[i].op) else {
                continue;
            };
            match &mut self.nodes[i].grad {
                Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, node: &Node, g: &[C64], grads: &mut [Option<Vec<C64>>]) {
        let nodes = &self.nodes;
        let needs = |id: usize| nodes[id].requires_grad;
        let val = |id: usize| nodes[id].value.as_slice();

        match &node.op {
            Op::Leaf | Op::Constant => {}
            &Op::Matvec { m, v, rows, cols } => {
                if needs(m) {
                    let vv = val(v);
                    accumulate(grads, m, rows * cols, |acc| {
                        for i in 0..rows {
                            for j in 0..cols {
                                acc[i * cols + j] += g[i] * vv[j].conj();
                            }
                        }
                    });
                }
                if needs(v) {
                    let mv = val(m);
                    accumulate(grads, v, cols, |acc| {
                        for i in 0..rows {
                            for j in 0..cols {
                                acc[j] += mv[i * cols + j].conj() * g[i];
                            }
                        }
                    });
                }
            }
            Op::WeightedSum { coeffs, terms } => {
                let cv = val(*coeffs);
                if needs(*coeffs) {
                    accumulate(grads, *coeffs, terms.len(), |acc| {
                        for (a, &t) in acc.iter_mut().zip(terms) {
                            *a += val(t).iter().zip(g).fold(ZERO, |s, (x, y)| s + x.conj() * y);
                        }
                    });
                }
                for (&t, c) in terms.iter().zip(cv) {
                    if needs(t) {
                        let cc = c.conj();
                        accumulate(grads, t, g.len(), |acc| {
                            acc.iter_mut().zip(g).for_each(|(a, y)| *a += cc * y);
                        });
                    }
                }
            }
            &Op::Add(a, b) => {
                for p in [a, b] {
                    if needs(p) {
                        add_into(grads, p, g);
                    }
                }
            }
            &Op::Sub(a, b) => {
                if needs(a) {
                    add_into(grads, a, g);
                }
                if needs(b) {
                    accumulate(grads, b, g.len(), |acc| acc.iter_mut().zip(g).for_each(|(a, y)| *a -= y));
                }
            }
            &Op::Mul(a, b) => {
                for (p, other) in [(a, b), (b, a)] {
                    if needs(p) {
                        let ov = val(other);
                        accumulate(grads, p, g.len(), |acc| {
                            for ((s, y), o) in acc.iter_mut().zip(g).zip(ov) {
                                *s += o.conj() * y;
                            }
                        });
                    }
                }
            }
            &Op::Scale { t, s } => {
                let k = val(s)[0];
                if needs(t) {
                    accumulate(grads, t, g.len(), |acc| {
                        acc.iter_mut().zip(g).for_each(|(a, y)| *a += k.conj() * y)
                    });
                }
                if needs(s) {
                    let dot = val(t).iter().zip(g).fold(ZERO, |acc, (x, y)| acc + x.conj() * y);
                    accumulate(grads, s, 1, |acc| acc[0] += dot);
                }
            }
            &Op::ScaleConst { t, k } => {
                accumulate(grads, t, g.len(), |acc| {
                    acc.iter_mut().zip(g).for_each(|(a, y)| *a += k.conj() * y)
                });
            }
            Op::MulConst { t, k } => {
                accumulate(grads, *t, g.len(), |acc| {
                    for ((a, y), f) in acc.iter_mut().zip(g).zip(k) {
                        *a += f.conj() * y;
                    }
                });
            }
            &Op::AddConst(t) => add_into(grads, t, g),
            &Op::Conj(t) => {
                accumulate(grads, t, g.len(), |acc| acc.iter_mut().zip(g).for_each(|(a, y)| *a += y.conj()));
            }
            &Op::Re(t) => {
                accumulate(grads, t, g.len(), |acc| acc.iter_mut().zip(g).for_each(|(a, y)| a.re += y.re));
            }
            &Op::Abs(t) => {
                let x = val(t);
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, y), xv) in acc.iter_mut().zip(g).zip(x) {
                        let r = xv.norm();
                        if r > 0.0 {
                            *a += xv * (y.re / r);
                        }
                    }
                });
            }
            &Op::Sum(t) => {
                let n = val(t).len();
                accumulate(grads, t, n, |acc| acc.iter_mut().for_each(|a| *a += g[0]));
            }
            &Op::SquaredNorm(t) => {
                let x = val(t);
                let k = 2.0 * g[0].re;
                accumulate(grads, t, x.len(), |acc| acc.iter_mut().zip(x).for_each(|(a, xv)| *a += xv * k));
            }
            &Op::Tanh(t) => {
                let y = &node.value;
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, gy), yv) in acc.iter_mut().zip(g).zip(y) {
                        a.re += gy.re * (1.0 - yv.re * yv.re);
                    }
                });
            }
            &Op::Relu(t) => {
                let x = val(t);
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, gy), xv) in acc.iter_mut().zip(g).zip(x) {
                        if xv.re > 0.0 {
                            a.re += gy.re;
                        }
                    }
                });
            }
            &Op::Sqrt(t) => {
                let y = &node.value;
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, gy), yv) in acc.iter_mut().zip(g).zip(y) {
                        a.re += gy.re / (2.0 * yv.re);
                    }
                });
            }
            &Op::Recip(t) => {
                let y = &node.value;
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, gy), yv) in acc.iter_mut().zip(g).zip(y) {
                        // d(1/x)/dx = -1/x² = -y²
                        *a += -(yv * yv).conj() * gy;
                    }
                });
            }
            Op::Gather { t, idx } => {
                let n = val(*t).len();
                accumulate(grads, *t, n, |acc| {
                    for (&i, y) in idx.iter().zip(g) {
                        acc[i] += y;
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = val(p).len();
                    if needs(p) {
                        add_into(grads, p, &g[offset..offset + n]);
                    }
                    offset += n;
                }
            }
            &Op::Softmax(t) => {
                let y = &node.value;
                let dot: f64 = y.iter().zip(g).map(|(a, b)| a.re * b.re).sum();
                accumulate(grads, t, g.len(), |acc| {
                    for ((a, gy), yv) in acc.iter_mut().zip(g).zip(y) {
                        a.re += yv.re * (gy.re - dot);
                    }
                });
            }
            &Op::CrossEntropy { logits, label } => {
                let p = softmax_real(val(logits));
                let k = g[0].re;
                accumulate(grads, logits, p.len(), |acc| {
                    for (j, (a, pj)) in acc.iter_mut().zip(&p).enumerate() {
                        let target = if j == label { 1.0 } else { 0.0 };
                        a.re += k * (pj - target);
                    }
                });
            }
            Op::Custom { op, inputs } => {
                let ins: Vec<&[C64]> = inputs.iter().map(|&p| val(p)).collect();
                let parts = op.backward(&ins, &node.value, g);
                debug_assert_eq!(parts.len(), inputs.len(), "{} returned wrong arity", op.name());
                for (&p, part) in inputs.iter().zip(parts) {
                    if let (true, Some(part)) = (needs(p), part) {
                        add_into(grads, p, &part);
                    }
                }
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<C64>>], id: usize, len: usize, f: impl FnOnce(&mut [C64])) {
    let slot = grads[id].get_or_insert_with(|| vec![ZERO; len]);
    f(slot);
}

fn add_into(grads: &mut [Option<Vec<C64>>], id: usize, g: &[C64]) {
    match &mut grads[id] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, y)| *a += y),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

pub(crate) fn softmax_real(z: &[C64]) -> Vec<f64> {
    let max = z.iter().map(|x| x.re).fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|x| (x.re - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}
