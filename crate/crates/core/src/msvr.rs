//! Multi-output support vector regression trained by iterative reweighted
//! least squares.
//!
//! All outputs share one residual norm `u_i = |y_i - f(x_i)|`, so the
//! quadratic epsilon-insensitive loss couples them and every output ends up
//! with the same set of active (support) samples. With a single output the
//! same solver is an ordinary least-squares-loss SVR.
//!
//! Training minimises
//!
//! ```text
//! 1/2 sum_j beta_j' K beta_j + C sum_i L(u_i),
//! L(u) = 0 for u < eps, (u - eps)^2 otherwise,
//! ```
//!
//! by repeatedly solving the reweighted system on the active set and
//! backtracking along the resulting direction until the true objective
//! strictly decreases.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::interval::SupervisedDataset;
use crate::kernel::{kernel_matrix, rbf, KernelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsvrHyper {
    /// Penalty on the loss term.
    pub c: f64,
    /// Radius of the insensitive tube.
    pub epsilon: f64,
    pub kernel: KernelParams,
}

impl MsvrHyper {
    pub fn new(c: f64, epsilon: f64, sigma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("C must be positive, got {c}")));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be non-negative, got {epsilon}")));
        }
        Ok(Self {
            c,
            epsilon,
            kernel: KernelParams::new(sigma)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iter: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

const MAX_HALVINGS: usize = 32;
const RETRY_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub iterations: usize,
    /// Objective at the starting point followed by every accepted step.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Samples with non-zero weight at the final iterate.
    pub active_set: Vec<usize>,
}

/// Per-feature standardisation fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(inputs: &[Vec<f64>]) -> Self {
        let dim = inputs.first().map_or(0, Vec::len);
        let n = inputs.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for x in inputs {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for x in inputs {
            for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            // constant feature
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsvrModel {
    /// Standardised training inputs.
    pub train_inputs: Vec<Vec<f64>>,
    /// n x m coefficient matrix.
    pub beta: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub hyper: MsvrHyper,
    pub scaler: Scaler,
}

/// Targets as an n x m matrix.
pub fn targets_matrix(data: &SupervisedDataset) -> DMatrix<f64> {
    let m = data.output_dim();
    DMatrix::from_fn(data.len(), m, |i, j| data.targets[i][j])
}

fn check_shapes(beta: &DMatrix<f64>, bias: &DVector<f64>, y: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<()> {
    let n = y.nrows();
    if k.nrows() != n || k.ncols() != n || beta.nrows() != n || beta.ncols() != y.ncols() || bias.len() != y.ncols() {
        return Err(Error::Shape(format!(
            "K {}x{}, beta {}x{}, bias {}, targets {}x{}",
            k.nrows(),
            k.ncols(),
            beta.nrows(),
            beta.ncols(),
            bias.len(),
            y.nrows(),
            y.ncols()
        )));
    }
    Ok(())
}

/// Residual rows `e_i = y_i - (K beta)_i - bias` and their norms.
pub fn residuals(
    beta: &DMatrix<f64>,
    bias: &DVector<f64>,
    y: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_shapes(beta, bias, y, k)?;
    let fitted = k * beta;
    Ok(residuals_from_fitted(&fitted, bias, y))
}

fn residuals_from_fitted(fitted: &DMatrix<f64>, bias: &DVector<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut e = y - fitted;
    for (j, mut col) in e.column_iter_mut().enumerate() {
        col.add_scalar_mut(-bias[j]);
    }
    let u = e.row_iter().map(|r| r.norm()).collect();
    (e, u)
}

/// Quadratic epsilon-insensitive loss.
pub fn loss(u: f64, epsilon: f64) -> f64 {
    if u < epsilon {
        0.0
    } else {
        (u - epsilon) * (u - epsilon)
    }
}

/// Primal objective: kernel-form regulariser plus penalised loss.
pub fn objective(
    beta: &DMatrix<f64>,
    bias: &DVector<f64>,
    y: &DMatrix<f64>,
    k: &DMatrix<f64>,
    hyper: &MsvrHyper,
) -> Result<f64> {
    check_shapes(beta, bias, y, k)?;
    let kb = k * beta;
    Ok(objective_from_parts(beta, &kb, bias, y, hyper))
}

fn objective_from_parts(
    beta: &DMatrix<f64>,
    kb: &DMatrix<f64>,
    bias: &DVector<f64>,
    y: &DMatrix<f64>,
    hyper: &MsvrHyper,
) -> f64 {
    let reg = 0.5 * beta.dot(kb);
    let (_, u) = residuals_from_fitted(kb, bias, y);
    let data: f64 = u.iter().map(|&ui| loss(ui, hyper.epsilon)).sum();
    reg + hyper.c * data
}

/// IRWLS weights `a_i = 2C(u_i - eps)/u_i` outside the tube, zero inside.
pub fn irwls_weights(u: &[f64], hyper: &MsvrHyper) -> Vec<f64> {
    u.iter()
        .map(|&ui| {
            if ui < hyper.epsilon || ui == 0.0 {
                0.0
            } else {
                2.0 * hyper.c * (ui - hyper.epsilon) / ui
            }
        })
        .collect()
}

/// Solves the reweighted least-squares system restricted to the active set
/// `S = {i : a_i > 0}`:
///
/// ```text
/// [ K_SS + D_a^-1   1   ] [beta_S^j]   [ y_S^j    ]
/// [ a_S' K_SS      1'a_S ] [ b^j    ] = [ a_S' y_S^j ]
/// ```
///
/// The second row is equivalent to `1' beta_S^j = 0`, which lets the system
/// be solved through a Cholesky factor of `K_SS + D_a^-1` and a scalar Schur
/// complement for the bias. Inactive samples get zero coefficients.
pub fn irwls_solve(
    k: &DMatrix<f64>,
    weights: &[f64],
    y: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = y.nrows();
    if k.nrows() != n || k.ncols() != n || weights.len() != n {
        return Err(Error::Shape(format!(
            "K {}x{}, {} weights, {} targets",
            k.nrows(),
            k.ncols(),
            weights.len(),
            n
        )));
    }
    let active: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let s = active.len();
    let m = y.ncols();
    let mut a = DMatrix::from_fn(s, s, |p, q| k[(active[p], active[q])]);
    for (p, &i) in active.iter().enumerate() {
        a[(p, p)] += 1.0 / weights[i];
    }
    let chol = match a.clone().cholesky() {
        Some(c) => c,
        None => {
            for p in 0..s {
                a[(p, p)] += RETRY_RIDGE;
            }
            a.cholesky().ok_or_else(|| Error::Numerical {
                iteration: 0,
                msg: "reweighted system is not positive definite".into(),
            })?
        }
    };
    let eta = chol.solve(&DVector::from_element(s, 1.0));
    let rhs = DMatrix::from_fn(s, m, |p, j| y[(active[p], j)]);
    let nu = chol.solve(&rhs);
    let eta_sum = eta.sum();
    if !(eta_sum > 0.0 && eta_sum.is_finite()) {
        return Err(Error::Numerical {
            iteration: 0,
            msg: "degenerate bias equation".into(),
        });
    }
    let mut beta = DMatrix::zeros(n, m);
    let mut bias = DVector::zeros(m);
    for j in 0..m {
        let b = nu.column(j).sum() / eta_sum;
        bias[j] = b;
        for (p, &i) in active.iter().enumerate() {
            beta[(i, j)] = nu[(p, j)] - eta[p] * b;
        }
    }
    Ok((beta, bias))
}

/// Trains on `data`, standardising inputs with a scaler fitted here.
pub fn train(data: &SupervisedDataset, hyper: MsvrHyper, options: TrainOptions) -> Result<(MsvrModel, TrainReport)> {
    if data.len() < 2 {
        return Err(Error::Size {
            what: "training pairs",
            needed: 2,
            got: data.len(),
        });
    }
    let scaler = Scaler::fit(&data.inputs);
    let inputs: Vec<Vec<f64>> = data.inputs.iter().map(|x| scaler.transform(x)).collect();
    let k = kernel_matrix(&inputs, hyper.kernel)?;
    let y = targets_matrix(data);
    let (beta, bias, report) = train_with_kernel(&k, &y, &hyper, options)?;
    Ok((
        MsvrModel {
            train_inputs: inputs,
            beta,
            bias,
            hyper,
            scaler,
        },
        report,
    ))
}

/// IRWLS on a precomputed Gram matrix.
pub fn train_with_kernel(
    k: &DMatrix<f64>,
    y: &DMatrix<f64>,
    hyper: &MsvrHyper,
    options: TrainOptions,
) -> Result<(DMatrix<f64>, DVector<f64>, TrainReport)> {
    let n = y.nrows();
    let m = y.ncols();
    let mut beta = DMatrix::zeros(n, m);
    let mut bias = DVector::zeros(m);
    check_shapes(&beta, &bias, y, k)?;

    let mut kb = DMatrix::zeros(n, m);
    let mut obj = objective_from_parts(&beta, &kb, &bias, y, hyper);
    if !obj.is_finite() {
        return Err(Error::Numerical {
            iteration: 0,
            msg: format!("objective is {obj}"),
        });
    }
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        let (_, u) = residuals_from_fitted(&kb, &bias, y);
        let a = irwls_weights(&u, hyper);
        let (beta_s, bias_s) = match irwls_solve(k, &a, y) {
            Ok(sol) => sol,
            Err(Error::EmptyActiveSet) => {
                converged = true;
                break;
            }
            Err(Error::Numerical { msg, .. }) => {
                return Err(Error::Numerical {
                    iteration: iterations + 1,
                    msg,
                })
            }
            Err(e) => return Err(e),
        };
        iterations += 1;

        let dir_beta = &beta_s - &beta;
        let dir_bias = &bias_s - &bias;
        let k_dir = k * &dir_beta;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand_beta = &beta + &dir_beta * step;
            let cand_kb = &kb + &k_dir * step;
            let cand_bias = &bias + &dir_bias * step;
            let cand_obj = objective_from_parts(&cand_beta, &cand_kb, &cand_bias, y, hyper);
            if !cand_obj.is_finite() {
                return Err(Error::Numerical {
                    iteration: iterations,
                    msg: format!("objective is {cand_obj}"),
                });
            }
            if cand_obj < obj {
                accepted = Some((cand_beta, cand_kb, cand_bias, cand_obj));
                break;
            }
            step *= 0.5;
        }
        let Some((nb, nkb, nbias, nobj)) = accepted else {
            converged = true;
            break;
        };
        let rel = (obj - nobj) / obj.abs().max(f64::MIN_POSITIVE);
        beta = nb;
        kb = nkb;
        bias = nbias;
        obj = nobj;
        trace.push(obj);
        if rel < options.tol || obj == 0.0 {
            converged = true;
            break;
        }
    }

    let (_, u) = residuals_from_fitted(&kb, &bias, y);
    let active_set = irwls_weights(&u, hyper)
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok((
        beta,
        bias,
        TrainReport {
            iterations,
            objective_trace: trace,
            converged,
            active_set,
        },
    ))
}

impl MsvrModel {
    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn input_dim(&self) -> usize {
        self.scaler.mean.len()
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "model expects {} inputs, got {}",
                self.input_dim(),
                x.len()
            )));
        }
        let z = self.scaler.transform(x);
        let mut out: Vec<f64> = self.bias.iter().copied().collect();
        for (i, xi) in self.train_inputs.iter().enumerate() {
            let kv = rbf(xi, &z, self.hyper.kernel)?;
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.beta[(i, j)] * kv;
            }
        }
        Ok(out)
    }

    /// Rows with a non-zero coefficient for output `j`.
    pub fn support(&self, j: usize) -> Vec<usize> {
        (0..self.n_train()).filter(|&i| self.beta[(i, j)] != 0.0).collect()
    }

    /// Writes the line-oriented text format. Values carry 17 significant
    /// digits so a load reproduces the model exactly.
    pub fn save<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "itsforge-msvr 1")?;
        writeln!(out, "m {}", self.output_dim())?;
        writeln!(out, "n {}", self.n_train())?;
        writeln!(out, "dim {}", self.input_dim())?;
        writeln!(out, "c {:.16e}", self.hyper.c)?;
        writeln!(out, "epsilon {:.16e}", self.hyper.epsilon)?;
        writeln!(out, "sigma {:.16e}", self.hyper.kernel.sigma)?;
        writeln!(out, "scaler_mean {}", join(&mut self.scaler.mean.iter().copied()))?;
        writeln!(out, "scaler_std {}", join(&mut self.scaler.std.iter().copied()))?;
        for (i, x) in self.train_inputs.iter().enumerate() {
            writeln!(
                out,
                "row {} | {}",
                join(&mut x.iter().copied()),
                join(&mut self.beta.row(i).iter().copied())
            )?;
        }
        writeln!(out, "bias {}", join(&mut self.bias.iter().copied()))?;
        Ok(())
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
        let mut it = lines.iter().map(String::as_str).filter(|l| !l.trim().is_empty());
        let fmt_err = |msg: String| Error::Format(msg);
        let mut next = |key: &str| -> Result<&str> {
            let line = it.next().ok_or_else(|| fmt_err(format!("missing {key}")))?;
            line.strip_prefix(key)
                .map(str::trim)
                .ok_or_else(|| fmt_err(format!("expected {key:?}, found {line:?}")))
        };
        let version = next("itsforge-msvr")?;
        if version != "1" {
            return Err(fmt_err(format!("unsupported version {version}")));
        }
        let count = |s: &str| s.parse::<usize>().map_err(|_| fmt_err(format!("bad count {s:?}")));
        let m = count(next("m")?)?;
        let n = count(next("n")?)?;
        let dim = count(next("dim")?)?;
        let real = |s: &str| s.parse::<f64>().map_err(|_| fmt_err(format!("bad number {s:?}")));
        let reals = |s: &str, len: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = s.split_whitespace().map(real).collect::<Result<_>>()?;
            if v.len() != len {
                return Err(fmt_err(format!("expected {len} values, got {}", v.len())));
            }
            Ok(v)
        };
        let c = real(next("c")?)?;
        let epsilon = real(next("epsilon")?)?;
        let sigma = real(next("sigma")?)?;
        let hyper = MsvrHyper::new(c, epsilon, sigma)?;
        let mean = reals(next("scaler_mean")?, dim)?;
        let std = reals(next("scaler_std")?, dim)?;
        let mut train_inputs = Vec::with_capacity(n);
        let mut beta = DMatrix::zeros(n, m);
        for i in 0..n {
            let row = next("row")?;
            let (x, b) = row
                .split_once('|')
                .ok_or_else(|| fmt_err(format!("row {i} lacks '|'")))?;
            train_inputs.push(reals(x, dim)?);
            for (j, v) in reals(b, m)?.into_iter().enumerate() {
                beta[(i, j)] = v;
            }
        }
        let bias = DVector::from_vec(reals(next("bias")?, m)?);
        Ok(Self {
            train_inputs,
            beta,
            bias,
            hyper,
            scaler: Scaler { mean, std },
        })
    }
}
