use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Logistic,
    LeastSquares,
}

/// A fitted sparse linear model with coefficients in the original feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l1_strength: f64,
    pub task: Task,
    pub converged: bool,
    /// Fitted to a single-valued target; predicts a constant.
    pub degenerate: bool,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl LinearModel {
    pub fn constant(names: Vec<String>, task: Task, bias: f64) -> Self {
        let p = names.len();
        LinearModel { names, weights: vec![0.0; p], bias, l1_strength: 0.0, task, converged: true, degenerate: true }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Probability for logistic models, fitted value otherwise.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.task {
            Task::Logistic => sigmoid(self.decision(x)),
            Task::LeastSquares => self.decision(x),
        }
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict(r.as_slice().unwrap_or(&r.to_vec()))).collect()
    }

    /// Indices of nonzero coefficients.
    pub fn selected(&self) -> Vec<usize> {
        self.weights.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Scale columns to unit variance before penalizing.
    pub standardize: bool,
}

impl SolverOptions {
    pub fn logistic() -> Self {
        SolverOptions { tol: 1e-6, max_iter: 10_000, standardize: true }
    }

    pub fn lasso() -> Self {
        SolverOptions { tol: 1e-8, max_iter: 10_000, standardize: true }
    }
}

/// Column means and scales. A zero scale marks a constant column, which is
/// excluded from fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>, standardize: bool) -> Self {
        let n = x.nrows().max(1) as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for c in x.columns() {
            let m = c.sum() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            let constant = sd <= 1e-12 * (1.0 + m.abs());
            mean.push(m);
            scale.push(match (constant, standardize) {
                (true, _) => 0.0,
                (false, true) => sd,
                (false, false) => 1.0,
            });
        }
        Standardizer { mean, scale }
    }

    /// Transposed, centered and scaled design (features × samples).
    pub fn transform_t(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut xt = x.t().to_owned();
        for (j, mut row) in xt.axis_iter_mut(Axis(0)).enumerate() {
            let s = self.scale[j];
            if s == 0.0 {
                row.fill(0.0);
            } else {
                let m = self.mean[j];
                row.mapv_inplace(|v| (v - m) / s);
            }
        }
        xt
    }

    /// Maps standardized coefficients and intercept back to original units.
    pub fn unscale(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; w.len()];
        let mut bias = b;
        for j in 0..w.len() {
            if self.scale[j] != 0.0 && w[j] != 0.0 {
                out[j] = w[j] / self.scale[j];
                bias -= out[j] * self.mean[j];
            }
        }
        (out, bias)
    }
}

/// Centered (optionally scaled) design stored feature-major for column sweeps.
#[derive(Debug, Clone)]
pub struct Design {
    pub xt: Array2<f64>,
    pub std: Standardizer,
    pub sq_norms: Vec<f64>,
}

impl Design {
    pub fn new(x: ArrayView2<f64>, standardize: bool) -> Self {
        let std = Standardizer::fit(x, standardize);
        let xt = std.transform_t(x);
        let sq_norms = xt.rows().into_iter().map(|r| r.dot(&r)).collect();
        Design { xt, std, sq_norms }
    }

    pub fn n(&self) -> usize {
        self.xt.ncols()
    }

    pub fn p(&self) -> usize {
        self.xt.nrows()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    /// Objective value after every accepted iteration, starting with the initial point.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_inputs(x: ArrayView2<f64>, y: &[f64], names: &[String]) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("design matrix"));
    }
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} rows but {} targets", x.nrows(), y.len())));
    }
    if names.len() != x.ncols() {
        return Err(Error::Dimension(format!("{} names for {} columns", names.len(), x.ncols())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in design or target".into()));
    }
    Ok(())
}

fn logistic_loss(z: &Array1<f64>, y: &[f64]) -> f64 {
    z.iter().zip(y).map(|(z, y)| softplus(*z) - y * z).sum()
}

/// Smallest penalty that zeroes every standardized logistic coefficient.
pub fn logistic_lambda_max(d: &Design, y: &[f64]) -> f64 {
    let pbar = y.iter().sum::<f64>() / y.len() as f64;
    let r = Array1::from_iter(y.iter().map(|v| pbar - v));
    d.xt.dot(&r).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Proximal gradient descent with backtracking on
/// sum_i logloss(y_i, b + x_i'w) + lambda ||w||_1. The bias is unpenalized.
pub fn logistic_ista(d: &Design, y: &[f64], lambda: f64, opts: &SolverOptions, warm: Option<(&[f64], f64)>) -> (Vec<f64>, f64, FitTrace) {
    let (n, p) = (d.n(), d.p());
    let pbar = (y.iter().sum::<f64>() / n as f64).clamp(1e-12, 1.0 - 1e-12);
    let (mut w, mut b) = match warm {
        Some((w, b)) => (Array1::from(w.to_vec()), b),
        None => (Array1::zeros(p), logit(pbar)),
    };
    let l1 = |w: &Array1<f64>| w.iter().map(|v| v.abs()).sum::<f64>();
    let mut z = d.xt.t().dot(&w) + b;
    let mut f = logistic_loss(&z, y);
    let mut obj = f + lambda * l1(&w);
    let mut trace = FitTrace { objective: vec![obj], ..Default::default() };
    // 1/L for the logistic loss is at least 4 / (||X||_F^2 + n).
    let mut t = 4.0 / (d.sq_norms.iter().sum::<f64>() + n as f64);
    for it in 0..opts.max_iter {
        let r = Array1::from_iter(z.iter().zip(y).map(|(z, y)| sigmoid(*z) - y));
        let g = d.xt.dot(&r);
        let gb = r.sum();
        t *= 2.0;
        let (w_new, b_new, z_new, f_new) = loop {
            let w_new = Array1::from_iter(w.iter().zip(&g).map(|(w, g)| soft_threshold(w - t * g, t * lambda)));
            let b_new = b - t * gb;
            let z_new = d.xt.t().dot(&w_new) + b_new;
            let f_new = logistic_loss(&z_new, y);
            let dw = &w_new - &w;
            let db = b_new - b;
            let quad = f + g.dot(&dw) + gb * db + (dw.dot(&dw) + db * db) / (2.0 * t);
            if f_new <= quad + 1e-12 * quad.abs() || t < 1e-20 {
                break (w_new, b_new, z_new, f_new);
            }
            t *= 0.5;
        };
        let obj_new = f_new + lambda * l1(&w_new);
        trace.iterations = it + 1;
        if obj_new > obj {
            trace.converged = true;
            break;
        }
        let dec = obj - obj_new;
        (w, b, z, f, obj) = (w_new, b_new, z_new, f_new, obj_new);
        trace.objective.push(obj);
        if dec < opts.tol * obj.abs().max(1.0) {
            trace.converged = true;
            break;
        }
    }
    (w.to_vec(), b, trace)
}

/// Smallest alpha that zeroes every coefficient of the centered lasso problem.
pub fn lasso_alpha_max(d: &Design, y: &[f64]) -> f64 {
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let yc = Array1::from_iter(y.iter().map(|v| v - ybar));
    2.0 * d.xt.dot(&yc).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest violation of the lasso optimality conditions for a centered
/// residual `r = y_c - X w`.
pub fn lasso_kkt_violation(d: &Design, r: &[f64], w: &[f64], alpha: f64) -> f64 {
    let r = ndarray::ArrayView1::from(r);
    let mut worst: f64 = 0.0;
    for j in 0..d.p() {
        if d.sq_norms[j] == 0.0 {
            continue;
        }
        let g = 2.0 * d.xt.row(j).dot(&r);
        let v = if w[j] == 0.0 { (g.abs() - alpha).max(0.0) } else { (g - alpha * w[j].signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent on ||y - Xw - b||^2 + alpha ||w||_1 over a
/// centered design. Returns coefficients and the intercept of the centered problem.
pub fn lasso_cd(d: &Design, y: &[f64], alpha: f64, opts: &SolverOptions, warm: Option<&[f64]>) -> (Vec<f64>, f64, FitTrace) {
    let p = d.p();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let mut w = warm.map(|w| w.to_vec()).unwrap_or_else(|| vec![0.0; p]);
    let mut r = Array1::from_iter(y.iter().map(|v| v - ybar));
    let scale = r.dot(&r).sqrt().max(1.0);
    for j in 0..p {
        if w[j] != 0.0 {
            r.scaled_add(-w[j], &d.xt.row(j));
        }
    }
    let objective = |r: &Array1<f64>, w: &[f64]| r.dot(r) + alpha * w.iter().map(|v| v.abs()).sum::<f64>();
    let mut trace = FitTrace { objective: vec![objective(&r, &w)], ..Default::default() };
    let half = alpha / 2.0;
    for it in 0..opts.max_iter {
        let mut max_step: f64 = 0.0;
        for j in 0..p {
            let sq = d.sq_norms[j];
            if sq == 0.0 {
                continue;
            }
            let row = d.xt.row(j);
            let rho = row.dot(&r) + sq * w[j];
            let new = soft_threshold(rho, half) / sq;
            let delta = new - w[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &row);
                w[j] = new;
                max_step = max_step.max(delta.abs() * sq.sqrt());
            }
        }
        trace.iterations = it + 1;
        trace.objective.push(objective(&r, &w));
        if max_step <= opts.tol * scale
            && lasso_kkt_violation(d, r.as_slice().unwrap(), &w, alpha) <= opts.tol * scale
        {
            trace.converged = true;
            break;
        }
    }
    (w, ybar, trace)
}

fn finish(d: &Design, names: &[String], w: &[f64], b: f64, strength: f64, task: Task, converged: bool) -> LinearModel {
    let (weights, bias) = d.std.unscale(w, b);
    LinearModel { names: names.to_vec(), weights, bias, l1_strength: strength, task, converged, degenerate: false }
}

/// L1-penalized logistic regression. `lambda` applies to coefficients of
/// the (optionally standardized) columns; the returned model is in original units.
pub fn fit_l1_logistic(x: ArrayView2<f64>, y: &[f64], names: &[String], lambda: f64, opts: &SolverOptions) -> Result<(LinearModel, FitTrace)> {
    check_inputs(x, y, names)?;
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::DegenerateInput("logistic targets must be 0 or 1".into()));
    }
    let d = Design::new(x, opts.standardize);
    let (w, b, trace) = logistic_ista(&d, y, lambda, opts, None);
    if !trace.converged {
        log::warn!("L1 logistic regression stopped after {} iterations without converging", trace.iterations);
    }
    Ok((finish(&d, names, &w, b, lambda, Task::Logistic, trace.converged), trace))
}

/// Lasso by coordinate descent; objective ||y - Xw - b||^2 + alpha ||w||_1.
pub fn fit_lasso(x: ArrayView2<f64>, y: &[f64], names: &[String], alpha: f64, opts: &SolverOptions) -> Result<(LinearModel, FitTrace)> {
    check_inputs(x, y, names)?;
    let d = Design::new(x, opts.standardize);
    let (w, b, trace) = lasso_cd(&d, y, alpha, opts, None);
    if !trace.converged {
        log::warn!("lasso stopped after {} sweeps without converging", trace.iterations);
    }
    Ok((finish(&d, names, &w, b, alpha, Task::LeastSquares, trace.converged), trace))
}

/// Warm-started fits along a decreasing penalty path on a shared design.
/// A least-squares path stops once the support reaches n - 1 columns or the
/// fit explains 99.9% of the centered sum of squares; the remaining smaller
/// penalties reuse that saturated fit.
pub fn penalty_path(d: &Design, y: &[f64], task: Task, penalties: &[f64], opts: &SolverOptions) -> Vec<(Vec<f64>, f64, bool)> {
    let mut order: Vec<usize> = (0..penalties.len()).collect();
    order.sort_by(|a, b| penalties[*b].total_cmp(&penalties[*a]));
    let mut slots: Vec<Option<(Vec<f64>, f64, bool)>> = vec![None; penalties.len()];
    let mut warm: Option<(Vec<f64>, f64, bool)> = None;
    for i in order {
        if let Some(fit) = warm.as_ref().filter(|f| task == Task::LeastSquares && saturated(d, y, &f.0)) {
            slots[i] = Some(fit.clone());
            continue;
        }
        let (w, b, tr) = match task {
            Task::Logistic => logistic_ista(d, y, penalties[i], opts, warm.as_ref().map(|(w, b, _)| (w.as_slice(), *b))),
            Task::LeastSquares => lasso_cd(d, y, penalties[i], opts, warm.as_ref().map(|(w, _, _)| w.as_slice())),
        };
        warm = Some((w, b, tr.converged));
        slots[i] = warm.clone();
    }
    slots.into_iter().map(|s| s.expect("every penalty fitted")).collect()
}

fn saturated(d: &Design, y: &[f64], w: &[f64]) -> bool {
    if w.iter().filter(|v| **v != 0.0).count() + 1 >= d.n() {
        return true;
    }
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let fitted = d.xt.t().dot(&ndarray::ArrayView1::from(w));
    let (rss, tss) = y.iter().zip(&fitted).fold((0.0, 0.0), |(a, b), (y, f)| (a + (y - ybar - f).powi(2), b + (y - ybar).powi(2)));
    rss <= 1e-3 * tss
}

pub fn model_from_path(d: &Design, names: &[String], fit: &(Vec<f64>, f64, bool), strength: f64, task: Task) -> LinearModel {
    finish(d, names, &fit.0, fit.1, strength, task, fit.2)
}
