//! Slow, transparent reference computations.

/// Column-wise z-scores with population standard deviation; constant
/// columns are centred only.
pub fn standardize(inputs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = inputs.len() as f64;
    let dim = inputs[0].len();
    let mut out = inputs.to_vec();
    for c in 0..dim {
        let mean = inputs.iter().map(|x| x[c]).sum::<f64>() / n;
        let var = inputs.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        for row in &mut out {
            row[c] = (row[c] - mean) / sd;
        }
    }
    out
}

/// Applies the column statistics of `train` to `rows`.
pub fn standardize_like(train: &[Vec<f64>], rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = train.len() as f64;
    let dim = train[0].len();
    let stats: Vec<(f64, f64)> = (0..dim)
        .map(|c| {
            let mean = train.iter().map(|x| x[c]).sum::<f64>() / n;
            let sd = (train.iter().map(|x| (x[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, if sd > 1e-12 { sd } else { 1.0 })
        })
        .collect();
    rows.iter()
        .map(|x| x.iter().zip(&stats).map(|(v, (m, s))| (v - m) / s).collect())
        .collect()
}

pub fn gram(inputs: &[Vec<f64>], sigma: f64) -> Vec<Vec<f64>> {
    inputs
        .iter()
        .map(|a| {
            inputs
                .iter()
                .map(|b| {
                    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
                    (-d2 / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect()
}

/// MSVR objective `1/2 sum_j beta_j' K beta_j + C sum_i L(u_i)` evaluated
/// directly from its definition.
pub fn msvr_objective(k: &[Vec<f64>], y: &[Vec<f64>], beta: &[Vec<f64>], bias: &[f64], c: f64, eps: f64) -> f64 {
    let n = y.len();
    let m = bias.len();
    let mut reg = 0.0;
    for j in 0..m {
        for p in 0..n {
            for q in 0..n {
                reg += beta[p][j] * k[p][q] * beta[q][j];
            }
        }
    }
    let mut data = 0.0;
    for i in 0..n {
        let mut u2 = 0.0;
        for j in 0..m {
            let fit: f64 = (0..n).map(|p| k[i][p] * beta[p][j]).sum::<f64>() + bias[j];
            u2 += (y[i][j] - fit).powi(2);
        }
        let u = u2.sqrt();
        if u >= eps {
            data += (u - eps).powi(2);
        }
    }
    0.5 * reg + c * data
}

/// Objective state that supports cheap single-coordinate perturbations.
struct State<'a> {
    k: &'a [Vec<f64>],
    y: &'a [Vec<f64>],
    c: f64,
    eps: f64,
    beta: Vec<Vec<f64>>,
    bias: Vec<f64>,
    fitted: Vec<Vec<f64>>,
    quad: f64,
}

impl<'a> State<'a> {
    fn new(k: &'a [Vec<f64>], y: &'a [Vec<f64>], c: f64, eps: f64, beta: Vec<Vec<f64>>, bias: Vec<f64>) -> Self {
        let n = y.len();
        let m = bias.len();
        let mut fitted = vec![vec![0.0; m]; n];
        for i in 0..n {
            for j in 0..m {
                fitted[i][j] = (0..n).map(|p| k[i][p] * beta[p][j]).sum();
            }
        }
        let quad = 0.5 * (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| beta[i][j] * fitted[i][j]).sum::<f64>();
        Self { k, y, c, eps, beta, bias, fitted, quad }
    }

    fn loss_with(&self, col: Option<(usize, &[f64])>, bias: &[f64]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.y.len() {
            let mut u2 = 0.0;
            for j in 0..bias.len() {
                let f = match col {
                    Some((cj, delta)) if cj == j => self.fitted[i][j] + delta[i],
                    _ => self.fitted[i][j],
                };
                u2 += (self.y[i][j] - f - bias[j]).powi(2);
            }
            let u = u2.sqrt();
            if u >= self.eps {
                total += (u - self.eps).powi(2);
            }
        }
        self.c * total
    }

    fn value(&self) -> f64 {
        self.quad + self.loss_with(None, &self.bias)
    }

    /// Objective with `beta[i][j] += h`.
    fn shifted_beta(&self, i: usize, j: usize, h: f64) -> f64 {
        let quad = self.quad + h * self.fitted[i][j] + 0.5 * h * h * self.k[i][i];
        let delta: Vec<f64> = self.k.iter().map(|row| h * row[i]).collect();
        quad + self.loss_with(Some((j, &delta)), &self.bias)
    }

    fn shifted_bias(&self, j: usize, h: f64) -> f64 {
        let mut b = self.bias.clone();
        b[j] += h;
        self.quad + self.loss_with(None, &b)
    }

    fn gradient(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.y.len();
        let m = self.bias.len();
        let step = |x: f64| 1e-6 * x.abs().max(1.0);
        let mut gb = vec![vec![0.0; m]; n];
        for i in 0..n {
            for j in 0..m {
                let h = step(self.beta[i][j]);
                gb[i][j] = (self.shifted_beta(i, j, h) - self.shifted_beta(i, j, -h)) / (2.0 * h);
            }
        }
        let gbias = (0..m)
            .map(|j| {
                let h = step(self.bias[j]);
                (self.shifted_bias(j, h) - self.shifted_bias(j, -h)) / (2.0 * h)
            })
            .collect();
        (gb, gbias)
    }
}

#[derive(Debug, Clone)]
pub struct GdSolution {
    pub beta: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Minimises the MSVR objective on a precomputed Gram matrix by Nesterov
/// accelerated gradient descent with central finite-difference gradients,
/// backtracking on the step size and function-value restarts.
pub fn msvr_gradient_descent(k: &[Vec<f64>], y: &[Vec<f64>], c: f64, eps: f64, max_iter: usize) -> GdSolution {
    let n = y.len();
    let m = y[0].len();
    let zero_b = vec![vec![0.0; m]; n];
    let mut x_beta = zero_b.clone();
    let mut x_bias = vec![0.0; m];
    let mut z_beta = zero_b;
    let mut z_bias = x_bias.clone();
    let mut fx = State::new(k, y, c, eps, x_beta.clone(), x_bias.clone()).value();
    let mut t = 1.0f64;
    let mut lip = 1.0f64;
    let mut iterations = 0;
    let mut stall = 0;
    while iterations < max_iter {
        iterations += 1;
        let z = State::new(k, y, c, eps, z_beta.clone(), z_bias.clone());
        let fz = z.value();
        let (g_beta, g_bias) = z.gradient();
        let g2: f64 = g_beta.iter().flatten().chain(&g_bias).map(|g| g * g).sum();
        if g2 == 0.0 {
            break;
        }
        let (nb, nbias, fnew) = loop {
            let nb: Vec<Vec<f64>> = z_beta
                .iter()
                .zip(&g_beta)
                .map(|(r, g)| r.iter().zip(g).map(|(v, d)| v - d / lip).collect())
                .collect();
            let nbias: Vec<f64> = z_bias.iter().zip(&g_bias).map(|(v, d)| v - d / lip).collect();
            let fnew = State::new(k, y, c, eps, nb.clone(), nbias.clone()).value();
            if fnew <= fz - 0.5 / lip * g2 || lip > 1e12 {
                break (nb, nbias, fnew);
            }
            lip *= 2.0;
        };
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        if fnew > fx {
            // restart momentum
            t = 1.0;
            z_beta = x_beta.clone();
            z_bias = x_bias.clone();
            lip *= 2.0;
            continue;
        }
        let mom = (t - 1.0) / t_next;
        z_beta = nb
            .iter()
            .zip(&x_beta)
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + mom * (p - q)).collect())
            .collect();
        z_bias = nbias.iter().zip(&x_bias).map(|(p, q)| p + mom * (p - q)).collect();
        let rel = (fx - fnew) / fx.abs().max(1e-300);
        x_beta = nb;
        x_bias = nbias;
        fx = fnew;
        t = t_next;
        lip *= 0.9;
        stall = if rel < 1e-13 { stall + 1 } else { 0 };
        if stall >= 50 {
            break;
        }
    }
    GdSolution {
        objective: State::new(k, y, c, eps, x_beta.clone(), x_bias.clone()).value(),
        beta: x_beta,
        bias: x_bias,
        iterations,
    }
}

/// Kernel expansion `sum_p k(x, t_p) beta_p + bias` at each row.
pub fn kernel_predict(train: &[Vec<f64>], beta: &[Vec<f64>], bias: &[f64], sigma: f64, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|x| {
            let kv: Vec<f64> = train
                .iter()
                .map(|t| (-t.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * sigma * sigma)).exp())
                .collect();
            (0..bias.len())
                .map(|j| bias[j] + kv.iter().zip(beta).map(|(k, b)| k * b[j]).sum::<f64>())
                .collect()
        })
        .collect()
}

/// `sum (y - yhat)^2 / sum (y - mean y)^2` over every column.
pub fn relative_variance(actual: &[Vec<f64>], pred: &[Vec<f64>]) -> f64 {
    let m = actual[0].len();
    let n = actual.len() as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..m {
        let mean = actual.iter().map(|a| a[j]).sum::<f64>() / n;
        for (a, p) in actual.iter().zip(pred) {
            num += (a[j] - p[j]).powi(2);
            den += (a[j] - mean).powi(2);
        }
    }
    num / den
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// The reweighted least-squares step in its original bordered, non-symmetric
/// form, restricted to samples with positive weight:
///
/// ```text
/// [ K_S + D_a^-1   1    ] [beta_j]   [ y_j    ]
/// [ a' K_S        1'a   ] [ b_j  ] = [ a' y_j ]
/// ```
///
/// Returns `None` when no weight is positive.
pub fn bordered_step(k: &[Vec<f64>], weights: &[f64], y: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = y.len();
    let m = y[0].len();
    let act: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
    if act.is_empty() {
        return None;
    }
    let s = act.len();
    let mut mat = vec![vec![0.0; s + 1]; s + 1];
    for (p, &i) in act.iter().enumerate() {
        for (q, &l) in act.iter().enumerate() {
            mat[p][q] = k[i][l];
        }
        mat[p][p] += 1.0 / weights[i];
        mat[p][s] = 1.0;
    }
    for q in 0..s {
        mat[s][q] = act.iter().map(|&i| weights[i] * k[i][act[q]]).sum();
    }
    mat[s][s] = act.iter().map(|&i| weights[i]).sum();
    let mut beta = vec![vec![0.0; m]; n];
    let mut bias = vec![0.0; m];
    for j in 0..m {
        let mut rhs: Vec<f64> = act.iter().map(|&i| y[i][j]).collect();
        rhs.push(act.iter().map(|&i| weights[i] * y[i][j]).sum());
        let x = gauss_solve(mat.clone(), rhs)?;
        for (p, &i) in act.iter().enumerate() {
            beta[i][j] = x[p];
        }
        bias[j] = x[s];
    }
    Some((beta, bias))
}

/// Fisher F statistic of a one-way layout from textbook sums of squares.
pub fn anova_f(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (mean - grand).powi(2);
        ssw += g.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let dfb = (groups.len() - 1) as f64;
    let dfw = (all.len() - groups.len()) as f64;
    ((ssb / dfb) / (ssw / dfw), dfb, dfw)
}
