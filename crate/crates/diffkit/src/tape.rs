use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use crate::{DiffError, Mat, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddColBias(Var, Var),
    AddRowBias(Var, Var),
    Hadamard(Var, Var),
    Scale { scalar: Var, x: Var },
    MulConst(Var, f64),
    AddConst(Var),
    Relu(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Clamp { x: Var, lo: f64, hi: f64 },
    Mask(Var, Arc<Array2<bool>>),
    Sum(Var),
    ColSums(Var),
    GatherRows(Var, Arc<Vec<usize>>),
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Transpose(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run record of primitive operations.
///
/// Creation order is a valid topological order, so backward simply visits
/// nodes from the loss down to index zero.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn ensure_finite(value: &Mat, op: &'static str) -> Result<()> {
    if value.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DiffError::NonFinite { op })
    }
}

fn same_shape(op: &'static str, a: &Mat, b: &Mat) -> Result<()> {
    if a.dim() == b.dim() {
        Ok(())
    } else {
        Err(DiffError::Shape {
            op,
            lhs: a.dim(),
            rhs: b.dim(),
        })
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow for large `|x|`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
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

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let value = self.value(v);
        if value.dim() != (1, 1) {
            return Err(DiffError::Structural(format!(
                "expected a 1x1 node, found {:?}",
                value.dim()
            )));
        }
        Ok(value[[0, 0]])
    }

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn record(&mut self, value: Mat, op: Op, inputs: &[Var], name: &'static str) -> Result<Var> {
        ensure_finite(&value, name)?;
        let rg = self.grad_flag(inputs);
        Ok(self.push(value, op, rg))
    }

    /// Tracked leaf: receives an adjoint on backward.
    pub fn param(&mut self, value: &Mat) -> Var {
        self.push(value.clone(), Op::Leaf, true)
    }

    /// Untracked leaf.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(DiffError::Shape {
                op: "matmul",
                lhs: av.dim(),
                rhs: bv.dim(),
            });
        }
        let out = av.dot(bv);
        self.record(out, Op::MatMul(a, b), &[a, b], "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("add", self.value(a), self.value(b))?;
        let out = self.value(a) + self.value(b);
        self.record(out, Op::Add(a, b), &[a, b], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("sub", self.value(a), self.value(b))?;
        let out = self.value(a) - self.value(b);
        self.record(out, Op::Sub(a, b), &[a, b], "sub")
    }

    /// `x + b` where `b` is `rows×1` and is added to every column of `x`.
    pub fn add_col_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.dim() != (xv.nrows(), 1) {
            return Err(DiffError::Shape {
                op: "add_col_bias",
                lhs: xv.dim(),
                rhs: bv.dim(),
            });
        }
        let out = xv + bv;
        self.record(out, Op::AddColBias(x, bias), &[x, bias], "add_col_bias")
    }

    /// `x + b` where `b` is `1×cols` and is added to every row of `x`.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.dim() != (1, xv.ncols()) {
            return Err(DiffError::Shape {
                op: "add_row_bias",
                lhs: xv.dim(),
                rhs: bv.dim(),
            });
        }
        let out = xv + bv;
        self.record(out, Op::AddRowBias(x, bias), &[x, bias], "add_row_bias")
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        same_shape("hadamard", self.value(a), self.value(b))?;
        let out = self.value(a) * self.value(b);
        self.record(out, Op::Hadamard(a, b), &[a, b], "hadamard")
    }

    /// Multiplies every entry of `x` by the 1×1 node `scalar`.
    pub fn scale(&mut self, scalar: Var, x: Var) -> Result<Var> {
        let s = self.value(scalar);
        if s.dim() != (1, 1) {
            return Err(DiffError::Shape {
                op: "scale",
                lhs: s.dim(),
                rhs: self.value(x).dim(),
            });
        }
        let out = self.value(x) * s[[0, 0]];
        self.record(out, Op::Scale { scalar, x }, &[scalar, x], "scale")
    }

    pub fn mul_const(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x) * c;
        self.record(out, Op::MulConst(x, c), &[x], "mul_const")
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Result<Var> {
        let out = self.value(x) + c;
        self.record(out, Op::AddConst(x), &[x], "add_const")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(|v| v.max(0.0));
        self.record(out, Op::Relu(x), &[x], "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(sigmoid);
        self.record(out, Op::Sigmoid(x), &[x], "sigmoid")
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(softplus);
        self.record(out, Op::Softplus(x), &[x], "softplus")
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(f64::exp);
        self.record(out, Op::Exp(x), &[x], "exp")
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).mapv(f64::ln);
        self.record(out, Op::Log(x), &[x], "log")
    }

    /// Entrywise clamp to `[lo, hi]`; the adjoint is zero where clamping bit.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo > hi {
            return Err(DiffError::Structural(format!("clamp bounds {lo} > {hi}")));
        }
        let out = self.value(x).mapv(|v| v.clamp(lo, hi));
        self.record(out, Op::Clamp { x, lo, hi }, &[x], "clamp")
    }

    /// Masked assignment: entries where `mask` is false are set to zero and
    /// receive no adjoint.
    pub fn mask(&mut self, x: Var, mask: Arc<Array2<bool>>) -> Result<Var> {
        let xv = self.value(x);
        if xv.dim() != mask.dim() {
            return Err(DiffError::Shape {
                op: "mask",
                lhs: xv.dim(),
                rhs: mask.dim(),
            });
        }
        let mut out = xv.clone();
        Zip::from(&mut out).and(mask.as_ref()).for_each(|o, &keep| {
            if !keep {
                *o = 0.0;
            }
        });
        self.record(out, Op::Mask(x, mask), &[x], "mask")
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total = self.value(x).sum();
        self.record(Array2::from_elem((1, 1), total), Op::Sum(x), &[x], "sum")
    }

    /// Column sums as a `1×cols` node.
    pub fn col_sums(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.record(out, Op::ColSums(x), &[x], "col_sums")
    }

    /// Row gather: output row `i` is `x[rows[i], :]`.
    pub fn gather_rows(&mut self, x: Var, rows: Arc<Vec<usize>>) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = rows.iter().find(|&&r| r >= xv.nrows()) {
            return Err(DiffError::Structural(format!(
                "gather row {bad} out of range for {} rows",
                xv.nrows()
            )));
        }
        let out = xv.select(Axis(0), &rows);
        self.record(out, Op::GatherRows(x, rows), &[x], "gather_rows")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        if start + len > xv.ncols() {
            return Err(DiffError::Structural(format!(
                "column slice {start}..{} out of range for {} columns",
                start + len,
                xv.ncols()
            )));
        }
        let out = xv.slice(s![.., start..start + len]).to_owned();
        self.record(out, Op::SliceCols { x, start }, &[x], "slice_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| DiffError::Structural("concat of zero parts".into()))?;
        let rows = self.value(*first).nrows();
        for p in parts {
            let v = self.value(*p);
            if v.nrows() != rows {
                return Err(DiffError::Shape {
                    op: "concat_cols",
                    lhs: self.value(*first).dim(),
                    rhs: v.dim(),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| DiffError::Structural(e.to_string()))?;
        self.record(out, Op::ConcatCols(parts.to_vec()), parts, "concat_cols")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).t().to_owned();
        self.record(out, Op::Transpose(x), &[x], "transpose")
    }

    /// Reverse sweep from a 1×1 node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.dim() != (1, 1) {
            return Err(DiffError::Structural(format!(
                "backward needs a scalar loss, found {:?}",
                lv.dim()
            )));
        }
        let mut adj: Vec<Option<Mat>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(d) = adj[i].take() else { continue };
            ensure_finite(&d, "backward")?;
            self.propagate(node, &d, &mut adj);
            adj[i] = Some(d);
        }
        let shapes = self.nodes[..=loss.0]
            .iter()
            .map(|n| n.value.dim())
            .collect();
        Ok(Gradients { adj, shapes })
    }

    fn propagate(&self, node: &Node, d: &Mat, adj: &mut [Option<Mat>]) {
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, g: Mat| {
            if !wants(v) {
                return;
            }
            match &mut adj[v.0] {
                Some(existing) => *existing += &g,
                slot @ None => *slot = Some(g),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    acc(*a, d.dot(&self.value(*b).t()));
                }
                if wants(*b) {
                    acc(*b, self.value(*a).t().dot(d));
                }
            }
            Op::Add(a, b) => {
                acc(*a, d.clone());
                acc(*b, d.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, d.clone());
                acc(*b, -d);
            }
            Op::AddColBias(x, b) => {
                acc(*x, d.clone());
                if wants(*b) {
                    acc(*b, d.sum_axis(Axis(1)).insert_axis(Axis(1)));
                }
            }
            Op::AddRowBias(x, b) => {
                acc(*x, d.clone());
                if wants(*b) {
                    acc(*b, d.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Hadamard(a, b) => {
                if wants(*a) {
                    acc(*a, d * self.value(*b));
                }
                if wants(*b) {
                    acc(*b, d * self.value(*a));
                }
            }
            Op::Scale { scalar, x } => {
                let s = self.value(*scalar)[[0, 0]];
                if wants(*x) {
                    acc(*x, d * s);
                }
                if wants(*scalar) {
                    let g = (d * self.value(*x)).sum();
                    acc(*scalar, Array2::from_elem((1, 1), g));
                }
            }
            Op::MulConst(x, c) => acc(*x, d * *c),
            Op::AddConst(x) => acc(*x, d.clone()),
            Op::Relu(x) => {
                let mut g = d.clone();
                Zip::from(&mut g).and(self.value(*x)).for_each(|g, &xv| {
                    if xv <= 0.0 {
                        *g = 0.0
                    }
                });
                acc(*x, g);
            }
            Op::Sigmoid(x) => {
                let mut g = d.clone();
                Zip::from(&mut g)
                    .and(&node.value)
                    .for_each(|g, &y| *g *= y * (1.0 - y));
                acc(*x, g);
            }
            Op::Softplus(x) => {
                let mut g = d.clone();
                Zip::from(&mut g)
                    .and(self.value(*x))
                    .for_each(|g, &xv| *g *= sigmoid(xv));
                acc(*x, g);
            }
            Op::Exp(x) => acc(*x, d * &node.value),
            Op::Log(x) => acc(*x, d / self.value(*x)),
            Op::Clamp { x, lo, hi } => {
                let mut g = d.clone();
                Zip::from(&mut g).and(self.value(*x)).for_each(|g, &xv| {
                    if xv < *lo || xv > *hi {
                        *g = 0.0;
                    }
                });
                acc(*x, g);
            }
            Op::Mask(x, mask) => {
                let mut g = d.clone();
                Zip::from(&mut g).and(mask.as_ref()).for_each(|g, &keep| {
                    if !keep {
                        *g = 0.0
                    }
                });
                acc(*x, g);
            }
            Op::Sum(x) => {
                let g = Array2::from_elem(self.value(*x).dim(), d[[0, 0]]);
                acc(*x, g);
            }
            Op::ColSums(x) => {
                let rows = self.value(*x).nrows();
                let g = d
                    .broadcast((rows, d.ncols()))
                    .expect("row vector broadcasts over rows")
                    .to_owned();
                acc(*x, g);
            }
            Op::GatherRows(x, rows) => {
                if wants(*x) {
                    let mut g = Array2::zeros(self.value(*x).dim());
                    for (out_row, &src) in rows.iter().enumerate() {
                        let mut dst = g.row_mut(src);
                        dst += &d.row(out_row);
                    }
                    acc(*x, g);
                }
            }
            Op::SliceCols { x, start } => {
                let mut g = Array2::zeros(self.value(*x).dim());
                g.slice_mut(s![.., *start..*start + d.ncols()]).assign(d);
                acc(*x, g);
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let width = self.value(*p).ncols();
                    acc(*p, d.slice(s![.., offset..offset + width]).to_owned());
                    offset += width;
                }
            }
            Op::Transpose(x) => acc(*x, d.t().to_owned()),
        }
    }
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    adj: Vec<Option<Mat>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Adjoint of `v`; zeros if the loss does not depend on it.
    pub fn get(&self, v: Var) -> Mat {
        match self.adj.get(v.0) {
            Some(Some(g)) => g.clone(),
            Some(None) => Array2::zeros(self.shapes[v.0]),
            None => panic!("variable {} was created after the loss node", v.0),
        }
    }

    /// Adjoint of `v`, moved out of the map.
    pub fn take(&mut self, v: Var) -> Mat {
        match self.adj.get_mut(v.0) {
            Some(slot) => slot
                .take()
                .unwrap_or_else(|| Array2::zeros(self.shapes[v.0])),
            None => panic!("variable {} was created after the loss node", v.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_gives_all_ones() {
        let mut t = Tape::new();
        let x = t.param(&Array2::from_elem((3, 4), 2.5));
        let l = t.sum(x).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(x), Array2::<f64>::ones((3, 4)));
    }

    #[test]
    fn sigmoid_at_zero_has_quarter_slope() {
        let mut t = Tape::new();
        let x = t.param(&Array2::zeros((2, 3)));
        let y = t.sigmoid(x).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get(x).iter().all(|&v| v == 0.25));
    }

    #[test]
    fn matvec_adjoint_rows_equal_v() {
        let v = array![[1.0], [-2.0], [0.5]];
        let mut t = Tape::new();
        let w = t.param(&Array2::from_elem((4, 3), 0.3));
        let vc = t.constant(v.clone());
        let y = t.matmul(w, vc).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap().get(w);
        for row in g.rows() {
            assert_eq!(row.to_vec(), vec![1.0, -2.0, 0.5]);
        }
    }

    #[test]
    fn untouched_leaf_gets_zero_adjoint() {
        let mut t = Tape::new();
        let a = t.param(&Array2::ones((2, 2)));
        let b = t.param(&Array2::ones((3, 1)));
        let l = t.sum(a).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.get(b), Array2::<f64>::zeros((3, 1)));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut t = Tape::new();
        let a = t.param(&Array2::ones((2, 2)));
        assert!(matches!(t.backward(a), Err(DiffError::Structural(_))));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut t = Tape::new();
        let a = t.param(&Array2::ones((2, 2)));
        let b = t.param(&Array2::ones((2, 3)));
        assert!(matches!(t.add(a, b), Err(DiffError::Shape { .. })));
        assert!(matches!(t.hadamard(a, b), Err(DiffError::Shape { .. })));
        let c = t.param(&Array2::ones((3, 2)));
        assert!(matches!(t.matmul(a, c), Err(DiffError::Shape { .. })));
        assert!(matches!(t.add_col_bias(a, c), Err(DiffError::Shape { .. })));
    }

    #[test]
    fn log_of_zero_raises_numerical_error() {
        let mut t = Tape::new();
        let a = t.param(&Array2::zeros((1, 2)));
        assert_eq!(t.log(a), Err(DiffError::NonFinite { op: "log" }));
    }

    #[test]
    fn softplus_tails() {
        assert!((softplus(50.0) - 50.0).abs() < 1e-15);
        assert!(softplus(-50.0) < 1e-21);
        assert!(softplus(-50.0) > 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert!(softplus(1000.0).is_finite());
    }

    #[test]
    fn mask_blocks_gradient_off_support() {
        let mask = Arc::new(array![[true, false], [false, true]]);
        let mut t = Tape::new();
        let w = t.param(&array![[1.0, 2.0], [3.0, 4.0]]);
        let m = t.mask(w, mask).unwrap();
        assert_eq!(t.value(m), &array![[1.0, 0.0], [0.0, 4.0]]);
        let sq = t.hadamard(m, m).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap().get(w);
        assert_eq!(g, array![[2.0, 0.0], [0.0, 8.0]]);
    }

    #[test]
    fn gather_scatters_back_with_repeats() {
        let mut t = Tape::new();
        let x = t.param(&array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        let g = t.gather_rows(x, Arc::new(vec![2, 0, 2])).unwrap();
        assert_eq!(t.value(g), &array![[5.0, 6.0], [1.0, 2.0], [5.0, 6.0]]);
        let l = t.sum(g).unwrap();
        let grad = t.backward(l).unwrap().get(x);
        assert_eq!(grad, array![[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]]);
    }

    #[test]
    fn slice_concat_roundtrip_gradient() {
        let mut t = Tape::new();
        let x = t.param(&array![[1.0, 2.0, 3.0]]);
        let a = t.slice_cols(x, 0, 1).unwrap();
        let b = t.slice_cols(x, 1, 2).unwrap();
        let b2 = t.mul_const(b, 3.0).unwrap();
        let c = t.concat_cols(&[b2, a]).unwrap();
        assert_eq!(t.value(c), &array![[6.0, 9.0, 1.0]]);
        let l = t.sum(c).unwrap();
        assert_eq!(t.backward(l).unwrap().get(x), array![[1.0, 3.0, 3.0]]);
    }
}
