use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tensor::{dot, CsrMatrix, Tensor};

/// Default clamp for row and Frobenius normalization.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    Param,
    Constant,
    MatMul(usize, usize),
    SpMM(Arc<CsrMatrix>, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    AddRow(usize, usize),
    SubRow(usize, usize),
    MeanRows(usize),
    Relu(usize),
    L2NormalizeRows(usize, f64),
    FrobNormalize(usize, f64),
    RowGather(usize, Rc<[usize]>),
    SelectCols(usize, Rc<[usize]>),
    LogSumExpRows(usize),
    Mean(usize),
    Sum(usize),
    Square(usize),
    Exp(usize),
    Log(usize),
    DotRows(usize, usize),
    Reshape(usize),
    HCat(usize, usize),
    Grl(usize, f64),
}

#[derive(Debug)]
struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of a computation. Node ids are assigned in
/// creation order, so the node list is topologically sorted.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

/// Gradients of a scalar with respect to every parameter leaf of a tape.
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<usize, Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.grads.get(&var.id)
    }

    /// Gradient for `var`, or zeros of its shape when the loss does not
    /// depend on it.
    pub fn get_or_zeros(&self, var: Var<'_>) -> Tensor {
        self.grads.get(&var.id).cloned().unwrap_or_else(|| {
            let [r, c] = var.shape();
            Tensor::zeros(r, c)
        })
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Trainable leaf; receives an entry in [`Gradients`].
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Param, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Constant, false)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires_grad(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn record(&self, value: Tensor, op: Op, inputs: &[usize]) -> Var<'_> {
        let rg = self.requires_grad(inputs);
        self.push(value, op, rg)
    }

    /// Reverse sweep from a `1x1` loss. Nodes are visited in strict
    /// reverse creation order, each at most once; adjoints from fan-out
    /// are summed before a node is visited.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::Contract("loss belongs to a different tape".into()));
        }
        let nodes = self.nodes.borrow();
        let shape = nodes[loss.id].value.shape();
        if shape != [1, 1] {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {shape:?}"
            )));
        }
        let mut adj: Vec<Option<Tensor>> = vec![None; loss.id + 1];
        adj[loss.id] = Some(Tensor::scalar(1.0));
        let mut out = Gradients::default();

        for id in (0..=loss.id).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let val = |i: usize| -> &Tensor { &nodes[i].value };
            let mut send = |i: usize, d: Tensor| {
                if !nodes[i].requires_grad {
                    return;
                }
                match &mut adj[i] {
                    Some(acc) => acc.add_assign(&d),
                    slot @ None => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Param => {
                    out.grads.insert(id, g);
                }
                Op::Constant => {}
                Op::MatMul(a, b) => {
                    send(*a, g.matmul_t(val(*b))?);
                    send(*b, val(*a).t_matmul(&g)?);
                }
                Op::SpMM(m, x) => send(*x, m.t_matmul_dense(&g)?),
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::Sub(a, b) => {
                    send(*b, g.map(|x| -x));
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    send(*a, g.zip_map(val(*b), |x, y| x * y));
                    send(*b, g.zip_map(val(*a), |x, y| x * y));
                }
                Op::Scale(a, c) => send(*a, g.map(|x| x * c)),
                Op::AddRow(a, r) => {
                    send(*r, column_sums(&g));
                    send(*a, g);
                }
                Op::SubRow(a, r) => {
                    send(*r, column_sums(&g).map(|x| -x));
                    send(*a, g);
                }
                Op::MeanRows(a) => {
                    let x = val(*a);
                    let inv = 1.0 / x.rows() as f64;
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        for (o, &gj) in d.row_mut(i).iter_mut().zip(g.data()) {
                            *o = gj * inv;
                        }
                    }
                    send(*a, d);
                }
                Op::Relu(a) => send(
                    *a,
                    g.zip_map(val(*a), |gi, x| if x > 0.0 { gi } else { 0.0 }),
                ),
                Op::L2NormalizeRows(a, eps) => {
                    let x = val(*a);
                    let y = &node.value;
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let norm = dot(x.row(i), x.row(i)).sqrt();
                        let gi = g.row(i);
                        let di = d.row_mut(i);
                        if norm > *eps {
                            let yg = dot(y.row(i), gi);
                            for ((o, &gj), &yj) in di.iter_mut().zip(gi).zip(y.row(i)) {
                                *o = (gj - yj * yg) / norm;
                            }
                        } else {
                            for (o, &gj) in di.iter_mut().zip(gi) {
                                *o = gj / eps;
                            }
                        }
                    }
                    send(*a, d);
                }
                Op::FrobNormalize(a, eps) => {
                    let x = val(*a);
                    let norm = x.frobenius_norm();
                    if norm > *eps {
                        let yg = dot(node.value.data(), g.data());
                        send(*a, g.zip_map(&node.value, |gj, yj| (gj - yj * yg) / norm));
                    } else {
                        send(*a, g.map(|gj| gj / eps));
                    }
                }
                Op::RowGather(a, ids) => {
                    let x = val(*a);
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for (k, &i) in ids.iter().enumerate() {
                        for (o, &gj) in d.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += gj;
                        }
                    }
                    send(*a, d);
                }
                Op::SelectCols(a, cols) => {
                    let x = val(*a);
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for (i, &c) in cols.iter().enumerate() {
                        d.row_mut(i)[c] = g.get(i, 0);
                    }
                    send(*a, d);
                }
                Op::LogSumExpRows(a) => {
                    let x = val(*a);
                    let y = &node.value;
                    let mut d = Tensor::zeros(x.rows(), x.cols());
                    for i in 0..x.rows() {
                        let (gi, yi) = (g.get(i, 0), y.get(i, 0));
                        for (o, &xj) in d.row_mut(i).iter_mut().zip(x.row(i)) {
                            *o = gi * (xj - yi).exp();
                        }
                    }
                    send(*a, d);
                }
                Op::Mean(a) => {
                    let x = val(*a);
                    let v = g.item() / x.len() as f64;
                    send(*a, Tensor::filled(x.rows(), x.cols(), v));
                }
                Op::Sum(a) => {
                    let x = val(*a);
                    send(*a, Tensor::filled(x.rows(), x.cols(), g.item()));
                }
                Op::Square(a) => send(*a, g.zip_map(val(*a), |gi, x| 2.0 * x * gi)),
                Op::Exp(a) => send(*a, g.zip_map(&node.value, |gi, y| gi * y)),
                Op::Log(a) => send(*a, g.zip_map(val(*a), |gi, x| gi / x)),
                Op::DotRows(a, b) => {
                    let (xa, xb) = (val(*a), val(*b));
                    let scale_rows = |x: &Tensor| {
                        let mut d = x.clone();
                        for i in 0..d.rows() {
                            let gi = g.get(i, 0);
                            d.row_mut(i).iter_mut().for_each(|v| *v *= gi);
                        }
                        d
                    };
                    let da = scale_rows(xb);
                    let db = scale_rows(xa);
                    send(*a, da);
                    send(*b, db);
                }
                Op::Reshape(a) => {
                    let x = val(*a);
                    send(*a, g.reshaped(x.rows(), x.cols())?);
                }
                Op::HCat(a, b) => {
                    let ca = val(*a).cols();
                    let cb = val(*b).cols();
                    let mut da = Tensor::zeros(g.rows(), ca);
                    let mut db = Tensor::zeros(g.rows(), cb);
                    for i in 0..g.rows() {
                        da.row_mut(i).copy_from_slice(&g.row(i)[..ca]);
                        db.row_mut(i).copy_from_slice(&g.row(i)[ca..]);
                    }
                    send(*a, da);
                    send(*b, db);
                }
                Op::Grl(a, alpha) => send(*a, g.map(|x| -alpha * x)),
            }
        }
        Ok(out)
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (o, &x) in out.data_mut().iter_mut().zip(g.row(i)) {
            *o += x;
        }
    }
    out
}

fn check_same(context: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(
            context,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn check_row(context: &'static str, a: &Tensor, r: &Tensor) -> Result<()> {
    if r.rows() != 1 || r.cols() != a.cols() {
        return Err(Error::dim(
            context,
            format!("row {:?} against {:?}", r.shape(), a.shape()),
        ));
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> [usize; 2] {
        self.value().shape()
    }

    /// Value of a `1x1` var.
    pub fn item(&self) -> f64 {
        self.value().item()
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.record(value, op, &[self.id])
    }

    fn binary(&self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        self.tape.record(value, op, &[self.id, other.id])
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let v = self.value().matmul(&other.value())?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    /// `adj * self` with a constant sparse left operand.
    pub fn sparse_left_matmul(&self, adj: &Arc<CsrMatrix>) -> Result<Var<'t>> {
        let v = adj.matmul_dense(&self.value())?;
        Ok(self.unary(v, Op::SpMM(Arc::clone(adj), self.id)))
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_same("add", &a, &b)?;
        Ok(self.binary(
            other,
            a.zip_map(&b, |x, y| x + y),
            Op::Add(self.id, other.id),
        ))
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_same("sub", &a, &b)?;
        Ok(self.binary(
            other,
            a.zip_map(&b, |x, y| x - y),
            Op::Sub(self.id, other.id),
        ))
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_same("mul", &a, &b)?;
        Ok(self.binary(
            other,
            a.zip_map(&b, |x, y| x * y),
            Op::Mul(self.id, other.id),
        ))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        let v = self.value().map(|x| x * c);
        self.unary(v, Op::Scale(self.id, c))
    }

    /// Adds a `1 x cols` row to every row.
    pub fn add_row(&self, row: Var<'t>) -> Result<Var<'t>> {
        let (a, r) = (self.value(), row.value());
        check_row("add_row", &a, &r)?;
        let mut v = (*a).clone();
        for i in 0..v.rows() {
            for (o, &b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *o += b;
            }
        }
        Ok(self.binary(row, v, Op::AddRow(self.id, row.id)))
    }

    /// Subtracts a `1 x cols` row from every row.
    pub fn sub_row(&self, row: Var<'t>) -> Result<Var<'t>> {
        let (a, r) = (self.value(), row.value());
        check_row("sub_row", &a, &r)?;
        let mut v = (*a).clone();
        for i in 0..v.rows() {
            for (o, &b) in v.row_mut(i).iter_mut().zip(r.data()) {
                *o -= b;
            }
        }
        Ok(self.binary(row, v, Op::SubRow(self.id, row.id)))
    }

    /// Column means as a `1 x cols` row.
    pub fn mean_rows(&self) -> Result<Var<'t>> {
        let a = self.value();
        if a.rows() == 0 {
            return Err(Error::dim("mean_rows", "no rows"));
        }
        let mut v = column_sums(&a);
        let inv = 1.0 / a.rows() as f64;
        v.data_mut().iter_mut().for_each(|x| *x *= inv);
        Ok(self.unary(v, Op::MeanRows(self.id)))
    }

    pub fn relu(&self) -> Var<'t> {
        let v = self.value().map(|x| if x > 0.0 { x } else { 0.0 });
        self.unary(v, Op::Relu(self.id))
    }

    /// Each row divided by `max(norm, eps)`.
    pub fn l2_normalize_rows(&self, eps: f64) -> Result<Var<'t>> {
        if eps <= 0.0 {
            return Err(Error::Domain {
                context: "l2_normalize_rows",
                msg: format!("eps must be positive, got {eps}"),
            });
        }
        let mut v = (*self.value()).clone();
        for i in 0..v.rows() {
            let r = v.row_mut(i);
            let norm = dot(r, r).sqrt().max(eps);
            r.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(self.unary(v, Op::L2NormalizeRows(self.id, eps)))
    }

    /// Whole matrix divided by `max(frobenius norm, eps)`.
    pub fn frobenius_normalize(&self, eps: f64) -> Result<Var<'t>> {
        if eps <= 0.0 {
            return Err(Error::Domain {
                context: "frobenius_normalize",
                msg: format!("eps must be positive, got {eps}"),
            });
        }
        let a = self.value();
        let norm = a.frobenius_norm().max(eps);
        let v = a.map(|x| x / norm);
        Ok(self.unary(v, Op::FrobNormalize(self.id, eps)))
    }

    pub fn row_gather(&self, ids: &[usize]) -> Result<Var<'t>> {
        let a = self.value();
        if let Some(&bad) = ids.iter().find(|&&i| i >= a.rows()) {
            return Err(Error::dim(
                "row_gather",
                format!("row {bad} out of range for {} rows", a.rows()),
            ));
        }
        let v = a.gather_rows(ids);
        Ok(self.unary(v, Op::RowGather(self.id, ids.into())))
    }

    /// `out[i] = self[i, cols[i]]`, an `n x 1` column.
    pub fn select_cols(&self, cols: &[usize]) -> Result<Var<'t>> {
        let a = self.value();
        if cols.len() != a.rows() || cols.iter().any(|&c| c >= a.cols()) {
            return Err(Error::dim(
                "select_cols",
                format!("{} column picks for {:?}", cols.len(), a.shape()),
            ));
        }
        let v = Tensor::column(cols.iter().enumerate().map(|(i, &c)| a.get(i, c)).collect());
        Ok(self.unary(v, Op::SelectCols(self.id, cols.into())))
    }

    /// Row-wise `log(sum(exp(x)))` with max subtraction, `n x 1`.
    pub fn log_sum_exp_rows(&self) -> Result<Var<'t>> {
        let a = self.value();
        if a.cols() == 0 {
            return Err(Error::dim("log_sum_exp_rows", "zero columns"));
        }
        let v = Tensor::column(
            (0..a.rows())
                .map(|i| {
                    let r = a.row(i);
                    let m = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    m + r.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
                })
                .collect(),
        );
        Ok(self.unary(v, Op::LogSumExpRows(self.id)))
    }

    pub fn mean(&self) -> Result<Var<'t>> {
        let a = self.value();
        if a.is_empty() {
            return Err(Error::dim("mean", "empty tensor"));
        }
        let v = Tensor::scalar(a.sum() / a.len() as f64);
        Ok(self.unary(v, Op::Mean(self.id)))
    }

    pub fn sum(&self) -> Var<'t> {
        let v = Tensor::scalar(self.value().sum());
        self.unary(v, Op::Sum(self.id))
    }

    pub fn square(&self) -> Var<'t> {
        let v = self.value().map(|x| x * x);
        self.unary(v, Op::Square(self.id))
    }

    pub fn exp(&self) -> Var<'t> {
        let v = self.value().map(f64::exp);
        self.unary(v, Op::Exp(self.id))
    }

    pub fn log(&self) -> Result<Var<'t>> {
        let a = self.value();
        if let Some(bad) = a.data().iter().find(|&&x| x <= 0.0 || x.is_nan()) {
            return Err(Error::Domain {
                context: "log",
                msg: format!("nonpositive input {bad}"),
            });
        }
        Ok(self.unary(a.map(f64::ln), Op::Log(self.id)))
    }

    /// Row-wise inner products, `n x 1`.
    pub fn dot_rows(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        check_same("dot_rows", &a, &b)?;
        let v = Tensor::column((0..a.rows()).map(|i| dot(a.row(i), b.row(i))).collect());
        Ok(self.binary(other, v, Op::DotRows(self.id, other.id)))
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let v = self.value().reshaped(rows, cols)?;
        Ok(self.unary(v, Op::Reshape(self.id)))
    }

    /// Column concatenation `[self | other]`.
    pub fn hcat(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        if a.rows() != b.rows() {
            return Err(Error::dim(
                "hcat",
                format!("{:?} beside {:?}", a.shape(), b.shape()),
            ));
        }
        let cols = a.cols() + b.cols();
        let mut data = Vec::with_capacity(a.rows() * cols);
        for i in 0..a.rows() {
            data.extend_from_slice(a.row(i));
            data.extend_from_slice(b.row(i));
        }
        let v = Tensor::new(a.rows(), cols, data)?;
        Ok(self.binary(other, v, Op::HCat(self.id, other.id)))
    }

    /// Gradient reversal: identity forward, adjoint scaled by `-alpha`
    /// on the way back.
    pub fn grl(&self, alpha: f64) -> Result<Var<'t>> {
        if alpha.is_nan() || alpha < 0.0 {
            return Err(Error::Domain {
                context: "grl",
                msg: format!("alpha must be nonnegative, got {alpha}"),
            });
        }
        let v = (*self.value()).clone();
        Ok(self.unary(v, Op::Grl(self.id, alpha)))
    }
}
