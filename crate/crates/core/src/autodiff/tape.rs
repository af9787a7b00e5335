use rand::Rng;

use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Primitive operations recorded on the tape.
#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Add {
        a: Var,
        b: Var,
    },
    AddN {
        xs: Vec<Var>,
    },
    Mul {
        a: Var,
        b: Var,
    },
    Affine {
        x: Var,
        scale: S,
    },
    /// y = x Wᵀ (+ b), with x of rank 1 or 2 and w of shape `[out, in]`.
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    /// y = A Bᵀ with A `[m,k]`, B `[n,k]`.
    MatMulNt {
        a: Var,
        b: Var,
    },
    GatherRows {
        table: Var,
        ids: Vec<usize>,
    },
    GatherElems {
        x: Var,
        ids: Vec<usize>,
    },
    Row {
        m: Var,
        i: usize,
    },
    StackRows {
        rows: Vec<Var>,
    },
    Concat {
        a: Var,
        b: Var,
    },
    Slice {
        x: Var,
        start: usize,
    },
    Reshape {
        x: Var,
    },
    Sigmoid {
        x: Var,
    },
    Tanh {
        x: Var,
    },
    LeakyRelu {
        x: Var,
        slope: S,
    },
    Clamp {
        x: Var,
        lo: S,
        hi: S,
    },
    Ln {
        x: Var,
    },
    MaskedSoftmax {
        x: Var,
        mask: Vec<bool>,
        axis: usize,
    },
    /// out[i,j] = u[i] + v[j]
    PairwiseSum {
        u: Var,
        v: Var,
    },
    /// Inverted dropout; `mask` holds 0 or 1/(1-rate) per element.
    Dropout {
        x: Var,
        mask: Vec<S>,
    },
    Sum {
        x: Var,
    },
}

struct Node<S> {
    t: Tensor<S>,
    op: Op<S>,
    /// Whether a gradient can flow into this node.
    needs: bool,
}

/// Record of one forward pass.
///
/// Replaying the record backward visits operations in exact reverse
/// execution order, so [`Tape::backward`] is deterministic.
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bind an external tensor as a leaf; gradients flow into it iff the
    /// tensor's `requires_grad` is set.
    pub fn leaf(&mut self, t: &Tensor<S>) -> Var {
        self.push(t.clone(), Op::Leaf, t.requires_grad)
    }

    /// Record a non-trainable value.
    pub fn constant(&mut self, t: Tensor<S>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn constant_vec(&mut self, data: Vec<S>) -> Var {
        let n = data.len();
        self.constant(Tensor::from_vec(vec![n], data))
    }

    pub fn zeros(&mut self, shape: Vec<usize>) -> Var {
        self.constant(Tensor::zeros(shape))
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].t
    }

    pub fn data(&self, v: Var) -> &[S] {
        &self.nodes[v.0].t.data
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].t.shape
    }

    /// Value of a one-element tensor.
    pub fn item(&self, v: Var) -> S {
        assert!(
            self.nodes[v.0].t.is_scalar(),
            "item() on non-scalar {:?}",
            self.shape(v)
        );
        self.nodes[v.0].t.data[0]
    }

    pub fn grad(&self, v: Var) -> Option<&[S]> {
        self.nodes[v.0].t.grad.as_deref()
    }

    fn push(&mut self, t: Tensor<S>, op: Op<S>, needs: bool) -> Var {
        self.nodes.push(Node { t, op, needs });
        Var(self.nodes.len() - 1)
    }

    fn emit(&mut self, shape: Vec<usize>, data: Vec<S>, op: Op<S>, inputs: &[Var]) -> Var {
        let needs = inputs.iter().any(|v| self.nodes[v.0].needs);
        let mut t = Tensor::from_vec(shape, data);
        t.requires_grad = needs;
        self.push(t, op, needs)
    }

    // ── Elementwise and arithmetic ──────────────────────────────────────

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add: shape mismatch");
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| *x + *y)
            .collect();
        self.emit(
            self.nodes[a.0].t.shape.clone(),
            data,
            Op::Add { a, b },
            &[a, b],
        )
    }

    pub fn add_n(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty(), "add_n: empty input");
        let shape = self.nodes[xs[0].0].t.shape.clone();
        let mut data = vec![S::zero(); self.data(xs[0]).len()];
        for &x in xs {
            assert_eq!(self.shape(x), &shape[..], "add_n: shape mismatch");
            for (d, v) in data.iter_mut().zip(self.data(x)) {
                *d += *v;
            }
        }
        self.emit(shape, data, Op::AddN { xs: xs.to_vec() }, xs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul: shape mismatch");
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| *x * *y)
            .collect();
        self.emit(
            self.nodes[a.0].t.shape.clone(),
            data,
            Op::Mul { a, b },
            &[a, b],
        )
    }

    /// Elementwise `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: S, shift: S) -> Var {
        let data = self.data(x).iter().map(|v| scale * *v + shift).collect();
        self.emit(
            self.nodes[x.0].t.shape.clone(),
            data,
            Op::Affine { x, scale },
            &[x],
        )
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let data = self
            .data(x)
            .iter()
            .map(|&v| {
                if v >= S::zero() {
                    S::one() / (S::one() + (-v).exp())
                } else {
                    let e = v.exp();
                    e / (S::one() + e)
                }
            })
            .collect();
        self.emit(
            self.nodes[x.0].t.shape.clone(),
            data,
            Op::Sigmoid { x },
            &[x],
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let data = self.data(x).iter().map(|v| v.tanh()).collect();
        self.emit(self.nodes[x.0].t.shape.clone(), data, Op::Tanh { x }, &[x])
    }

    pub fn leaky_relu(&mut self, x: Var, slope: S) -> Var {
        let data = self
            .data(x)
            .iter()
            .map(|&v| if v > S::zero() { v } else { slope * v })
            .collect();
        self.emit(
            self.nodes[x.0].t.shape.clone(),
            data,
            Op::LeakyRelu { x, slope },
            &[x],
        )
    }

    pub fn clamp(&mut self, x: Var, lo: S, hi: S) -> Var {
        assert!(lo < hi, "clamp: empty range");
        let data = self
            .data(x)
            .iter()
            .map(|&v| {
                if v < lo {
                    lo
                } else if v > hi {
                    hi
                } else {
                    v
                }
            })
            .collect();
        self.emit(
            self.nodes[x.0].t.shape.clone(),
            data,
            Op::Clamp { x, lo, hi },
            &[x],
        )
    }

    pub fn ln(&mut self, x: Var) -> Var {
        let data = self.data(x).iter().map(|v| v.ln()).collect();
        self.emit(self.nodes[x.0].t.shape.clone(), data, Op::Ln { x }, &[x])
    }

    // ── Linear algebra ──────────────────────────────────────────────────

    /// `y = x Wᵀ + b`; `x` of rank 1 (`[in]`) or 2 (`[rows, in]`),
    /// `w` of shape `[out, in]`, optional `b` of shape `[out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let (rows, cols) = (self.nodes[x.0].t.rows(), self.nodes[x.0].t.cols());
        let ws = self.shape(w);
        assert_eq!(ws.len(), 2, "linear: weight must be rank 2");
        let (out, win) = (ws[0], ws[1]);
        assert_eq!(
            cols, win,
            "linear: x width {cols} != weight input width {win}"
        );
        let mut data = mm_nt(self.data(x), rows, cols, self.data(w), out, win);
        if let Some(b) = b {
            assert_eq!(self.shape(b), &[out], "linear: bias shape mismatch");
            let bias = self.data(b);
            for r in 0..rows {
                for o in 0..out {
                    data[r * out + o] += bias[o];
                }
            }
        }
        let shape = if self.shape(x).len() == 1 {
            vec![out]
        } else {
            vec![rows, out]
        };
        let mut inputs = vec![x, w];
        if let Some(b) = b {
            inputs.push(b);
        }
        self.emit(shape, data, Op::Linear { x, w, b }, &inputs)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = (self.nodes[a.0].t.rows(), self.nodes[a.0].t.cols());
        let (k2, n) = (self.nodes[b.0].t.rows(), self.nodes[b.0].t.cols());
        assert_eq!(k, k2, "matmul: inner dimensions disagree");
        let data = mm_nn(self.data(a), m, k, self.data(b), k2, n);
        self.emit(vec![m, n], data, Op::MatMul { a, b }, &[a, b])
    }

    /// `A Bᵀ` for A `[m,k]`, B `[n,k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let (m, k) = (self.nodes[a.0].t.rows(), self.nodes[a.0].t.cols());
        let (n, k2) = (self.nodes[b.0].t.rows(), self.nodes[b.0].t.cols());
        assert_eq!(k, k2, "matmul_nt: inner dimensions disagree");
        let data = mm_nt(self.data(a), m, k, self.data(b), n, k2);
        self.emit(vec![m, n], data, Op::MatMulNt { a, b }, &[a, b])
    }

    // ── Indexing and shape ──────────────────────────────────────────────

    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Var {
        let ts = self.shape(table);
        assert_eq!(ts.len(), 2, "gather_rows: table must be rank 2");
        let (v, d) = (ts[0], ts[1]);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            assert!(id < v, "gather_rows: id {id} out of range {v}");
            data.extend_from_slice(&self.data(table)[id * d..(id + 1) * d]);
        }
        self.emit(
            vec![ids.len(), d],
            data,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        )
    }

    pub fn gather_elems(&mut self, x: Var, ids: &[usize]) -> Var {
        assert_eq!(self.shape(x).len(), 1, "gather_elems: input must be rank 1");
        let src = self.data(x);
        let data = ids
            .iter()
            .map(|&i| {
                assert!(
                    i < src.len(),
                    "gather_elems: index {i} out of range {}",
                    src.len()
                );
                src[i]
            })
            .collect();
        self.emit(
            vec![ids.len()],
            data,
            Op::GatherElems {
                x,
                ids: ids.to_vec(),
            },
            &[x],
        )
    }

    /// Row `i` of a rank-2 tensor, as a rank-1 tensor.
    pub fn row(&mut self, m: Var, i: usize) -> Var {
        let ms = self.shape(m);
        assert_eq!(ms.len(), 2, "row: input must be rank 2");
        let (r, c) = (ms[0], ms[1]);
        assert!(i < r, "row: index {i} out of range {r}");
        let data = self.data(m)[i * c..(i + 1) * c].to_vec();
        self.emit(vec![c], data, Op::Row { m, i }, &[m])
    }

    /// Stack rank-1 tensors of equal length into a rank-2 tensor.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "stack_rows: empty input");
        let c = self.data(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            assert_eq!(self.shape(r), &[c], "stack_rows: row shape mismatch");
            data.extend_from_slice(self.data(r));
        }
        self.emit(
            vec![rows.len(), c],
            data,
            Op::StackRows {
                rows: rows.to_vec(),
            },
            rows,
        )
    }

    /// Concatenate two rank-1 tensors, or two rank-2 tensors column-wise.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        match (sa.len(), sb.len()) {
            (1, 1) => {
                let mut data = self.data(a).to_vec();
                data.extend_from_slice(self.data(b));
                let n = data.len();
                self.emit(vec![n], data, Op::Concat { a, b }, &[a, b])
            }
            (2, 2) => {
                assert_eq!(sa[0], sb[0], "concat: row counts disagree");
                let (r, ca, cb) = (sa[0], sa[1], sb[1]);
                let mut data = Vec::with_capacity(r * (ca + cb));
                for i in 0..r {
                    data.extend_from_slice(&self.data(a)[i * ca..(i + 1) * ca]);
                    data.extend_from_slice(&self.data(b)[i * cb..(i + 1) * cb]);
                }
                self.emit(vec![r, ca + cb], data, Op::Concat { a, b }, &[a, b])
            }
            _ => panic!("concat: unsupported ranks {sa:?} / {sb:?}"),
        }
    }

    /// Contiguous slice of a rank-1 tensor.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        assert_eq!(self.shape(x).len(), 1, "slice: input must be rank 1");
        assert!(start + len <= self.data(x).len(), "slice: out of range");
        let data = self.data(x)[start..start + len].to_vec();
        self.emit(vec![len], data, Op::Slice { x, start }, &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Var {
        let numel: usize = shape.iter().product();
        assert_eq!(numel, self.data(x).len(), "reshape: element count mismatch");
        let data = self.data(x).to_vec();
        self.emit(shape, data, Op::Reshape { x }, &[x])
    }

    // ── Softmax, dropout, reductions ────────────────────────────────────

    /// Exp-normalize along `axis`, restricted to positions where `mask` is
    /// true; masked positions receive exactly 0. `mask` has the same element
    /// count as `scores`. Panics if any lane is fully masked.
    pub fn masked_softmax(&mut self, scores: Var, mask: &[bool], axis: usize) -> Var {
        let shape = self.shape(scores).to_vec();
        assert!(
            axis < shape.len(),
            "masked_softmax: axis {axis} out of range"
        );
        assert_eq!(
            mask.len(),
            self.data(scores).len(),
            "masked_softmax: mask length mismatch"
        );
        let lanes = shape[axis];
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.data(scores);
        let mut data = vec![S::zero(); src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| o * lanes * inner + l * inner + i;
                let mut max = None::<S>;
                for l in 0..lanes {
                    if mask[at(l)] {
                        let v = src[at(l)];
                        max = Some(match max {
                            Some(m) if m >= v => m,
                            _ => v,
                        });
                    }
                }
                let max = max.unwrap_or_else(|| panic!("masked_softmax: fully masked lane"));
                let mut sum = S::zero();
                for l in 0..lanes {
                    if mask[at(l)] {
                        let e = (src[at(l)] - max).exp();
                        data[at(l)] = e;
                        sum += e;
                    }
                }
                for l in 0..lanes {
                    if mask[at(l)] {
                        data[at(l)] /= sum;
                    }
                }
            }
        }
        self.emit(
            shape,
            data,
            Op::MaskedSoftmax {
                x: scores,
                mask: mask.to_vec(),
                axis,
            },
            &[scores],
        )
    }

    /// Softmax with every position valid.
    pub fn softmax(&mut self, scores: Var, axis: usize) -> Var {
        let mask = vec![true; self.data(scores).len()];
        self.masked_softmax(scores, &mask, axis)
    }

    /// `out[i, j] = u[i] + v[j]` for rank-1 `u`, `v`.
    pub fn pairwise_sum(&mut self, u: Var, v: Var) -> Var {
        assert_eq!(self.shape(u).len(), 1, "pairwise_sum: u must be rank 1");
        assert_eq!(self.shape(v).len(), 1, "pairwise_sum: v must be rank 1");
        let (n, m) = (self.data(u).len(), self.data(v).len());
        let mut data = Vec::with_capacity(n * m);
        for i in 0..n {
            for j in 0..m {
                data.push(self.data(u)[i] + self.data(v)[j]);
            }
        }
        self.emit(vec![n, m], data, Op::PairwiseSum { u, v }, &[u, v])
    }

    /// Inverted dropout: in training mode each element is zeroed with
    /// probability `rate` and survivors are rescaled by `1/(1-rate)`; in
    /// eval mode (or at rate 0) the input is returned unchanged.
    pub fn dropout<R: Rng>(&mut self, x: Var, rate: f64, training: bool, rng: &mut R) -> Var {
        assert!(
            (0.0..1.0).contains(&rate),
            "dropout: rate {rate} outside [0, 1)"
        );
        if !training || rate == 0.0 {
            return x;
        }
        let keep = S::from_f64(1.0 / (1.0 - rate));
        let mask: Vec<S> = (0..self.data(x).len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    S::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = self
            .data(x)
            .iter()
            .zip(&mask)
            .map(|(v, m)| *v * *m)
            .collect();
        self.emit(
            self.nodes[x.0].t.shape.clone(),
            data,
            Op::Dropout { x, mask },
            &[x],
        )
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let mut s = S::zero();
        for v in self.data(x) {
            s += *v;
        }
        self.emit(vec![1], vec![s], Op::Sum { x }, &[x])
    }

    // ── Backward ────────────────────────────────────────────────────────

    /// Populate the gradient of every reachable `requires_grad` node with
    /// respect to the scalar `loss`. Gradients of unreachable nodes are left
    /// untouched (`None`). Running twice yields identical results.
    pub fn backward(&mut self, loss: Var) {
        assert!(
            self.nodes[loss.0].t.is_scalar(),
            "backward: loss must be scalar"
        );
        for n in &mut self.nodes {
            n.t.grad = None;
        }
        if !self.nodes[loss.0].needs {
            return;
        }
        self.nodes[loss.0].t.grad = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs || self.nodes[i].t.grad.is_none() {
                continue;
            }
            let g = self.nodes[i].t.grad.clone().unwrap();
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::Add { a, b } => {
                    self.accum(a, &g);
                    self.accum(b, &g);
                }
                Op::AddN { xs } => {
                    for x in xs {
                        self.accum(x, &g);
                    }
                }
                Op::Mul { a, b } => {
                    let da: Vec<S> = g.iter().zip(self.data(b)).map(|(g, y)| *g * *y).collect();
                    let db: Vec<S> = g.iter().zip(self.data(a)).map(|(g, x)| *g * *x).collect();
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                Op::Affine { x, scale } => {
                    let dx: Vec<S> = g.iter().map(|g| *g * scale).collect();
                    self.accum(x, &dx);
                }
                Op::Linear { x, w, b } => {
                    let (rows, cols) = (self.nodes[x.0].t.rows(), self.nodes[x.0].t.cols());
                    let out = self.shape(w)[0];
                    let dx = mm_nn(&g, rows, out, self.data(w), out, cols);
                    let dw = mm_tn(&g, rows, out, self.data(x), rows, cols);
                    self.accum(x, &dx);
                    self.accum(w, &dw);
                    if let Some(b) = b {
                        let mut db = vec![S::zero(); out];
                        for r in 0..rows {
                            for (o, db) in db.iter_mut().enumerate() {
                                *db += g[r * out + o];
                            }
                        }
                        self.accum(b, &db);
                    }
                }
                Op::MatMul { a, b } => {
                    let (m, k) = (self.nodes[a.0].t.rows(), self.nodes[a.0].t.cols());
                    let n = self.nodes[b.0].t.cols();
                    let da = mm_nt(&g, m, n, self.data(b), k, n);
                    let db = mm_tn(self.data(a), m, k, &g, m, n);
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                Op::MatMulNt { a, b } => {
                    let (m, k) = (self.nodes[a.0].t.rows(), self.nodes[a.0].t.cols());
                    let n = self.nodes[b.0].t.rows();
                    let da = mm_nn(&g, m, n, self.data(b), n, k);
                    let db = mm_tn(&g, m, n, self.data(a), m, k);
                    self.accum(a, &da);
                    self.accum(b, &db);
                }
                Op::GatherRows { table, ids } => {
                    let d = self.shape(table)[1];
                    let mut dt = vec![S::zero(); self.data(table).len()];
                    for (r, &id) in ids.iter().enumerate() {
                        for c in 0..d {
                            dt[id * d + c] += g[r * d + c];
                        }
                    }
                    self.accum(table, &dt);
                }
                Op::GatherElems { x, ids } => {
                    let mut dx = vec![S::zero(); self.data(x).len()];
                    for (k, &id) in ids.iter().enumerate() {
                        dx[id] += g[k];
                    }
                    self.accum(x, &dx);
                }
                Op::Row { m, i } => {
                    let c = self.shape(m)[1];
                    let mut dm = vec![S::zero(); self.data(m).len()];
                    dm[i * c..(i + 1) * c].copy_from_slice(&g);
                    self.accum(m, &dm);
                }
                Op::StackRows { rows } => {
                    let c = self.data(rows[0]).len();
                    for (r, &row) in rows.iter().enumerate() {
                        self.accum(row, &g[r * c..(r + 1) * c]);
                    }
                }
                Op::Concat { a, b } => {
                    let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
                    if sa.len() == 1 {
                        self.accum(a, &g[..sa[0]]);
                        self.accum(b, &g[sa[0]..]);
                    } else {
                        let (r, ca, cb) = (sa[0], sa[1], sb[1]);
                        let mut da = vec![S::zero(); r * ca];
                        let mut db = vec![S::zero(); r * cb];
                        for i in 0..r {
                            let base = i * (ca + cb);
                            da[i * ca..(i + 1) * ca].copy_from_slice(&g[base..base + ca]);
                            db[i * cb..(i + 1) * cb].copy_from_slice(&g[base + ca..base + ca + cb]);
                        }
                        self.accum(a, &da);
                        self.accum(b, &db);
                    }
                }
                Op::Slice { x, start } => {
                    let mut dx = vec![S::zero(); self.data(x).len()];
                    dx[start..start + g.len()].copy_from_slice(&g);
                    self.accum(x, &dx);
                }
                Op::Reshape { x } => {
                    self.accum(x, &g);
                }
                Op::Sigmoid { x } => {
                    let dx: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[i].t.data)
                        .map(|(g, y)| *g * *y * (S::one() - *y))
                        .collect();
                    self.accum(x, &dx);
                }
                Op::Tanh { x } => {
                    let dx: Vec<S> = g
                        .iter()
                        .zip(&self.nodes[i].t.data)
                        .map(|(g, y)| *g * (S::one() - *y * *y))
                        .collect();
                    self.accum(x, &dx);
                }
                Op::LeakyRelu { x, slope } => {
                    let dx: Vec<S> = g
                        .iter()
                        .zip(self.data(x))
                        .map(|(g, x)| if *x > S::zero() { *g } else { *g * slope })
                        .collect();
                    self.accum(x, &dx);
                }
                Op::Clamp { x, lo, hi } => {
                    let dx: Vec<S> = g
                        .iter()
                        .zip(self.data(x))
                        .map(|(g, x)| if *x > lo && *x < hi { *g } else { S::zero() })
                        .collect();
                    self.accum(x, &dx);
                }
                Op::Ln { x } => {
                    let dx: Vec<S> = g.iter().zip(self.data(x)).map(|(g, x)| *g / *x).collect();
                    self.accum(x, &dx);
                }
                Op::MaskedSoftmax { x, mask, axis } => {
                    let shape = self.shape(x).to_vec();
                    let lanes = shape[axis];
                    let outer: usize = shape[..axis].iter().product();
                    let inner: usize = shape[axis + 1..].iter().product();
                    let y = &self.nodes[i].t.data;
                    let mut dx = vec![S::zero(); y.len()];
                    for o in 0..outer {
                        for ii in 0..inner {
                            let at = |l: usize| o * lanes * inner + l * inner + ii;
                            let mut dot = S::zero();
                            for l in 0..lanes {
                                if mask[at(l)] {
                                    dot += g[at(l)] * y[at(l)];
                                }
                            }
                            for l in 0..lanes {
                                if mask[at(l)] {
                                    dx[at(l)] = y[at(l)] * (g[at(l)] - dot);
                                }
                            }
                        }
                    }
                    self.accum(x, &dx);
                }
                Op::PairwiseSum { u, v } => {
                    let (n, m) = (self.data(u).len(), self.data(v).len());
                    let mut du = vec![S::zero(); n];
                    let mut dv = vec![S::zero(); m];
                    for i in 0..n {
                        for j in 0..m {
                            du[i] += g[i * m + j];
                            dv[j] += g[i * m + j];
                        }
                    }
                    self.accum(u, &du);
                    self.accum(v, &dv);
                }
                Op::Dropout { x, mask } => {
                    let dx: Vec<S> = g.iter().zip(&mask).map(|(g, m)| *g * *m).collect();
                    self.accum(x, &dx);
                }
                Op::Sum { x } => {
                    let dx = vec![g[0]; self.data(x).len()];
                    self.accum(x, &dx);
                }
            }
        }
    }

    fn accum(&mut self, v: Var, contrib: &[S]) {
        let node = &mut self.nodes[v.0];
        if !node.needs {
            return;
        }
        let grad = node
            .t
            .grad
            .get_or_insert_with(|| vec![S::zero(); node.t.data.len()]);
        debug_assert_eq!(grad.len(), contrib.len());
        for (g, c) in grad.iter_mut().zip(contrib) {
            *g += *c;
        }
    }
}

fn mm_nn<S: Scalar>(a: &[S], ar: usize, ac: usize, b: &[S], br: usize, bc: usize) -> Vec<S> {
    debug_assert_eq!(ac, br);
    let mut out = vec![S::zero(); ar * bc];
    for i in 0..ar {
        for p in 0..ac {
            let av = a[i * ac + p];
            for j in 0..bc {
                out[i * bc + j] += av * b[p * bc + j];
            }
        }
    }
    out
}

/// a · bᵀ
fn mm_nt<S: Scalar>(a: &[S], ar: usize, ac: usize, b: &[S], br: usize, bc: usize) -> Vec<S> {
    debug_assert_eq!(ac, bc);
    let mut out = vec![S::zero(); ar * br];
    for i in 0..ar {
        for j in 0..br {
            let mut s = S::zero();
            for p in 0..ac {
                s += a[i * ac + p] * b[j * bc + p];
            }
            out[i * br + j] = s;
        }
    }
    out
}

/// aᵀ · b
fn mm_tn<S: Scalar>(a: &[S], ar: usize, ac: usize, b: &[S], br: usize, bc: usize) -> Vec<S> {
    debug_assert_eq!(ar, br);
    let mut out = vec![S::zero(); ac * bc];
    for p in 0..ar {
        for i in 0..ac {
            let av = a[p * ac + i];
            for j in 0..bc {
                out[i * bc + j] += av * b[p * bc + j];
            }
        }
    }
    out
}
