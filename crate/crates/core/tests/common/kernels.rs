use std::sync::Arc;

use fairgraph::autodiff::{finite_difference_check, GradCheck, Tape, Var, NORM_EPS};
use fairgraph::error::Result;
use fairgraph::rng::{substream, Stream};
use fairgraph::tensor::{CsrMatrix, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap()
}

/// Random sparse `n x m` matrix with roughly a third of the entries set.
fn random_csr(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Arc<CsrMatrix> {
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for _ in 0..n {
        for j in 0..m {
            if rng.random::<f64>() < 0.35 {
                indices.push(j);
                values.push(rng.random_range(-1.0..1.0));
            }
        }
        indptr.push(indices.len());
    }
    Arc::new(CsrMatrix::new(n, m, indptr, indices, values).unwrap())
}

/// Reduces `out` to a scalar through a fixed random weighting so every
/// output entry carries a distinct adjoint.
pub fn weigh<'t>(out: Var<'t>, w: &Tensor) -> Result<Var<'t>> {
    Ok(out.mul(out.tape().constant(w.clone()))?.sum())
}

fn max_error<F>(f: F, params: &[Tensor], seed: u64, exclude: impl Fn(usize, usize) -> bool) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let opts = GradCheck {
        seed,
        ..GradCheck::default()
    };
    finite_difference_check(f, params, &opts, exclude)
        .unwrap()
        .max_rel_error
}

/// Largest central-difference relative error of every tape kernel on
/// random shapes drawn from `seed`, at the default step. `grl` reports its
/// deviation from the `-alpha` adjoint contract instead.
pub fn kernel_errors(seed: u64) -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();
    let mut rng = substream(seed, Stream::Init);
    let n = rng.random_range(2..6);
    let m = rng.random_range(2..5);
    let k = rng.random_range(1..4);
    let a = random(n, m, &mut rng);
    let b = random(n, m, &mut rng);
    let c = random(m, k, &mut rng);
    let row = random(1, m, &mut rng);
    let w_nm = random(n, m, &mut rng);
    let w_nk = random(n, k, &mut rng);
    let w_n1 = random(n, 1, &mut rng);
    let w_1m = random(1, m, &mut rng);
    let adj = random_csr(n, n, &mut rng);
    let ids: Vec<usize> = (0..n + 2).map(|_| rng.random_range(0..n)).collect();
    let w_ids = random(ids.len(), m, &mut rng);
    let cols: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
    let alpha = rng.random_range(0.1..2.0);
    let scale = rng.random_range(-2.0..2.0);

    out.push((
        "matmul",
        max_error(
            |_, v| weigh(v[0].matmul(v[1])?, &w_nk),
            &[a.clone(), c.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "spmm",
        max_error(
            |_, v| weigh(v[0].sparse_left_matmul(&adj)?, &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "add",
        max_error(
            |_, v| weigh(v[0].add(v[1])?, &w_nm),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "sub",
        max_error(
            |_, v| weigh(v[0].sub(v[1])?, &w_nm),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "mul",
        max_error(
            |_, v| weigh(v[0].mul(v[1])?, &w_nm),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "scale",
        max_error(
            |_, v| weigh(v[0].scale(scale), &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "add_row",
        max_error(
            |_, v| weigh(v[0].add_row(v[1])?, &w_nm),
            &[a.clone(), row.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "sub_row",
        max_error(
            |_, v| weigh(v[0].sub_row(v[1])?, &w_nm),
            &[a.clone(), row.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "mean_rows",
        max_error(
            |_, v| weigh(v[0].mean_rows()?, &w_1m),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    let relu_input = a.clone();
    out.push((
        "relu",
        max_error(
            |_, v| weigh(v[0].relu(), &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, c| relu_input.data()[c].abs() < 1e-3,
        ),
    ));
    out.push((
        "l2_normalize_rows",
        max_error(
            |_, v| weigh(v[0].l2_normalize_rows(NORM_EPS)?, &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "frobenius_normalize",
        max_error(
            |_, v| weigh(v[0].frobenius_normalize(NORM_EPS)?, &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "row_gather",
        max_error(
            |_, v| weigh(v[0].row_gather(&ids)?, &w_ids),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "select_cols",
        max_error(
            |_, v| weigh(v[0].select_cols(&cols)?, &w_n1),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "log_sum_exp_rows",
        max_error(
            |_, v| weigh(v[0].log_sum_exp_rows()?, &w_n1),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "mean",
        max_error(
            |_, v| v[0].square().mean(),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "sum",
        max_error(
            |_, v| Ok(v[0].mul(v[1])?.sum()),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "square",
        max_error(
            |_, v| weigh(v[0].square(), &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "exp",
        max_error(
            |_, v| weigh(v[0].exp(), &w_nm),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    let positive = a.map(|x| x.abs() + 0.5);
    out.push((
        "log",
        max_error(
            |_, v| weigh(v[0].log()?, &w_nm),
            &[positive],
            seed,
            |_, _| false,
        ),
    ));
    out.push((
        "dot_rows",
        max_error(
            |_, v| weigh(v[0].dot_rows(v[1])?, &w_n1),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    let w_mn = w_nm.reshaped(m, n).unwrap();
    out.push((
        "reshape",
        max_error(
            |_, v| weigh(v[0].reshape(m, n)?, &w_mn),
            std::slice::from_ref(&a),
            seed,
            |_, _| false,
        ),
    ));
    let w_cat = random(n, 2 * m, &mut rng);
    out.push((
        "hcat",
        max_error(
            |_, v| weigh(v[0].hcat(v[1])?, &w_cat),
            &[a.clone(), b.clone()],
            seed,
            |_, _| false,
        ),
    ));
    // Reversal changes the adjoint only; the plain path is what central
    // differences see, so grl is checked through its -alpha contract.
    let tape = Tape::new();
    let x = tape.param(a.clone());
    let g_rev = tape
        .backward(weigh(x.grl(alpha).unwrap().square(), &w_nm).unwrap())
        .unwrap()
        .get_or_zeros(x);
    let tape = Tape::new();
    let x = tape.param(a.clone());
    let g_plain = tape
        .backward(weigh(x.square(), &w_nm).unwrap())
        .unwrap()
        .get_or_zeros(x);
    let grl = g_rev
        .data()
        .iter()
        .zip(g_plain.data())
        .map(|(r, p)| (r + alpha * p).abs() / p.abs().max(1.0))
        .fold(0.0, f64::max);
    out.push(("grl", grl));
    out
}
