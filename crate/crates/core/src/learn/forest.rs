use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::Task;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureSubset {
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub subset: FeatureSubset,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, min_leaf: 1, subset: FeatureSubset::Sqrt, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

/// Impurity times node size: Gini for 0/1 targets, sum of squares otherwise.
fn impurity(task: Task, n: f64, sum: f64, sum_sq: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    match task {
        Task::Logistic => {
            let p = sum / n;
            n * 2.0 * p * (1.0 - p)
        }
        Task::LeastSquares => (sum_sq - sum * sum / n).max(0.0),
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [f64],
    task: Task,
    params: &'a ForestParams,
    n_try: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let value = idx.iter().map(|i| self.y[*i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let p = self.x.ncols();
        let features: Vec<usize> = if self.n_try >= p { (0..p).collect() } else { sample(&mut self.rng, p, self.n_try).into_vec() };
        let n = idx.len() as f64;
        let (sum, sum_sq) = idx.iter().fold((0.0, 0.0), |(s, q), i| (s + self.y[*i], q + self.y[*i] * self.y[*i]));
        let parent = impurity(self.task, n, sum, sum_sq);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for f in features {
            order.sort_by(|a, b| self.x[[*a, f]].total_cmp(&self.x[[*b, f]]).then(a.cmp(b)));
            let (mut ls, mut lq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let yi = self.y[order[k]];
                ls += yi;
                lq += yi * yi;
                let (a, b) = (self.x[[order[k], f]], self.x[[order[k + 1], f]]);
                let nl = (k + 1) as f64;
                if a == b || (k + 1) < self.params.min_leaf || order.len() - k - 1 < self.params.min_leaf {
                    continue;
                }
                let gain = parent - impurity(self.task, nl, ls, lq) - impurity(self.task, n - nl, sum - ls, sum_sq - lq);
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (a + b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|i| self.y[*i] == first);
        let too_deep = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || too_deep || idx.len() < 2 * self.params.min_leaf.max(1) {
            return self.leaf(idx);
        }
        let Some((feature, threshold)) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| self.x[[**i, feature]] <= threshold);
        let me = self.nodes.len();
        self.nodes.push(Node::Leaf { value: f64::NAN });
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Grows one CART tree on the rows `idx`.
pub fn fit_tree<'a>(x: ArrayView2<'a, f64>, y: &'a [f64], idx: &[usize], task: Task, params: &'a ForestParams, seed: u64) -> DecisionTree {
    let p = x.ncols();
    let n_try = match params.subset {
        FeatureSubset::Sqrt => ((p as f64).sqrt().ceil() as usize).max(1),
        FeatureSubset::All => p,
    };
    let mut b = Builder { x, y, task, params, n_try, rng: ChaCha8Rng::seed_from_u64(seed), nodes: Vec::new() };
    b.grow(idx, 0);
    DecisionTree { nodes: b.nodes }
}

/// Bagged CART trees over a subset of the original columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    /// Column indices of the full feature vector used by the trees.
    pub features: Vec<usize>,
    pub trees: Vec<DecisionTree>,
    pub task: Task,
    pub seed: u64,
}

impl RandomForest {
    /// `x` holds all columns; only `features` are used.
    pub fn fit(x: ArrayView2<f64>, y: &[f64], features: Vec<usize>, task: Task, params: &ForestParams, seed: u64) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::DegenerateInput("no selected features for the forest".into()));
        }
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::Dimension(format!("{} rows, {} targets", x.nrows(), y.len())));
        }
        let xs = x.select(ndarray::Axis(1), &features);
        let n = y.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..params.n_trees.max(1))
            .map(|_| {
                let idx: Vec<usize> = if params.bootstrap { (0..n).map(|_| rng.gen_range(0..n)).collect() } else { (0..n).collect() };
                fit_tree(xs.view(), y, &idx, task, params, rng.gen())
            })
            .collect();
        Ok(RandomForest { features, trees, task, seed })
    }

    /// Share of trees voting positive for classification, mean for regression.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let xs: Vec<f64> = self.features.iter().map(|j| x[*j]).collect();
        let n = self.trees.len() as f64;
        match self.task {
            Task::Logistic => self.trees.iter().filter(|t| t.predict(&xs) >= 0.5).count() as f64 / n,
            Task::LeastSquares => self.trees.iter().map(|t| t.predict(&xs)).sum::<f64>() / n,
        }
    }
}
