use super::{check_training_input, fmt_num, mean_log_loss, parse_num, prior_log_odds, probabilities};
use crate::checkpoint::Section;
use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum samples on each side of a split.
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self { n_trees: 50, max_depth: 5, learning_rate: 0.1, min_leaf: 10 }
    }
}

/// Axis-aligned regression tree; samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub enum Tree<T> {
    Leaf(T),
    Split { feature: usize, threshold: T, left: Box<Tree<T>>, right: Box<Tree<T>> },
}

impl<T: Scalar> Tree<T> {
    pub fn eval(&self, row: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                Tree::Leaf(v) => return *v,
                Tree::Split { feature, threshold, left, right } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn max_feature(&self) -> Option<usize> {
        match self {
            Tree::Leaf(_) => None,
            Tree::Split { feature, left, right, .. } => {
                Some((*feature).max(left.max_feature().unwrap_or(0)).max(right.max_feature().unwrap_or(0)))
            }
        }
    }

    /// Pre-order: `(feature threshold left right)` or `(L value)`.
    pub fn serialize(&self) -> String {
        match self {
            Tree::Leaf(v) => format!("(L {})", fmt_num(*v)),
            Tree::Split { feature, threshold, left, right } => {
                format!("({feature} {} {} {})", fmt_num(*threshold), left.serialize(), right.serialize())
            }
        }
    }

    pub fn deserialize(s: &str) -> Result<Self> {
        let spaced = s.replace('(', " ( ").replace(')', " ) ");
        let mut tokens = spaced.split_whitespace();
        let tree = Self::parse_tokens(&mut tokens)?;
        if tokens.next().is_some() {
            return Err(Error::Checkpoint("trailing tokens after tree".into()));
        }
        Ok(tree)
    }

    fn parse_tokens<'a>(tokens: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let bad = || Error::Checkpoint("malformed tree".into());
        if tokens.next() != Some("(") {
            return Err(bad());
        }
        let head = tokens.next().ok_or_else(bad)?;
        let node = if head == "L" {
            Tree::Leaf(parse_num(tokens.next().ok_or_else(bad)?)?)
        } else {
            let feature = head.parse().map_err(|_| bad())?;
            let threshold = parse_num(tokens.next().ok_or_else(bad)?)?;
            let left = Box::new(Self::parse_tokens(tokens)?);
            let right = Box::new(Self::parse_tokens(tokens)?);
            Tree::Split { feature, threshold, left, right }
        };
        if tokens.next() != Some(")") {
            return Err(bad());
        }
        Ok(node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel<T> {
    pub trees: Vec<Tree<T>>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: T,
    /// Prior log-odds.
    pub base_score: T,
    pub n_features: usize,
}

struct Builder<'a, T> {
    x: &'a Matrix<T>,
    residual: Vec<T>,
    hessian: Vec<T>,
    params: GbmParams,
    in_left: Vec<bool>,
}

impl<T: Scalar> Builder<'_, T> {
    fn leaf(&self, idx: &[usize]) -> Tree<T> {
        let g: T = idx.iter().map(|&i| self.residual[i]).sum();
        let h: T = idx.iter().map(|&i| self.hessian[i]).sum();
        Tree::Leaf(if h > T::zero() { g / h } else { T::zero() })
    }

    /// `sorted[f]` holds this node's samples ordered by feature `f`.
    fn build(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> Tree<T> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_leaf.max(1);
        if depth >= self.params.max_depth || n < 2 * min_leaf {
            return self.leaf(&sorted[0]);
        }
        let total: T = sorted[0].iter().map(|&i| self.residual[i]).sum();
        let nt = T::from_usize_lossy(n);
        let parent = total * total / nt;
        // (gain, feature, split position)
        let mut best: Option<(T, usize, usize)> = None;
        for (f, order) in sorted.iter().enumerate() {
            let mut left_sum = T::zero();
            for k in 1..n {
                left_sum += self.residual[order[k - 1]];
                if k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (a, b) = (self.x.get(order[k - 1], f), self.x.get(order[k], f));
                if a == b {
                    continue;
                }
                let nl = T::from_usize_lossy(k);
                let nr = T::from_usize_lossy(n - k);
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, k));
                }
            }
        }
        let Some((_, feature, k)) = best.filter(|(g, _, _)| *g > T::zero()) else {
            return self.leaf(&sorted[0]);
        };
        let order = &sorted[feature];
        let threshold = self.x.get(order[k - 1], feature);
        for (pos, &i) in order.iter().enumerate() {
            self.in_left[i] = pos < k;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for order in &sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| self.in_left[i]);
            left.push(l);
            right.push(r);
        }
        drop(sorted);
        let left = Box::new(self.build(left, depth + 1));
        let right = Box::new(self.build(right, depth + 1));
        Tree::Split { feature, threshold, left, right }
    }
}

pub fn fit_gbm<T: Scalar>(x: &Matrix<T>, y: &[bool], params: &GbmParams) -> Result<GbmModel<T>> {
    fit_gbm_traced(x, y, params).map(|(m, _)| m)
}

/// As [`fit_gbm`], also returning training log loss before the first tree
/// and after each round.
pub fn fit_gbm_traced<T: Scalar>(x: &Matrix<T>, y: &[bool], params: &GbmParams) -> Result<(GbmModel<T>, Vec<T>)> {
    check_training_input(x, y)?;
    if !(params.learning_rate > 0.0) {
        return Err(Error::Config("gbm learning_rate must be positive".into()));
    }
    let base_score = prior_log_odds::<T>(y);
    let lr = T::lit(params.learning_rate);
    let mut eta = vec![base_score; x.rows];
    let mut trace = vec![mean_log_loss(&eta, y)];
    let sorted: Vec<Vec<usize>> = (0..x.cols)
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.rows).collect();
            idx.sort_by(|&a, &b| x.get(a, f).partial_cmp(&x.get(b, f)).expect("finite features").then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let p = probabilities(&eta);
        let residual = p.iter().zip(y).map(|(&pi, &yi)| if yi { T::one() - pi } else { -pi }).collect();
        let hessian = p.iter().map(|&pi| pi * (T::one() - pi)).collect();
        let mut b = Builder { x, residual, hessian, params: *params, in_left: vec![false; x.rows] };
        let tree = b.build(sorted.clone(), 0);
        for (i, e) in eta.iter_mut().enumerate() {
            *e += lr * tree.eval(x.row(i));
        }
        trace.push(mean_log_loss(&eta, y));
        trees.push(tree);
    }
    let model = GbmModel {
        trees,
        n_trees: params.n_trees,
        max_depth: params.max_depth,
        learning_rate: lr,
        base_score,
        n_features: x.cols,
    };
    Ok((model, trace))
}

pub fn predict_gbm<T: Scalar>(model: &GbmModel<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    if x.cols != model.n_features {
        return Err(Error::DimensionMismatch { expected: model.n_features, got: x.cols });
    }
    Ok((0..x.rows)
        .map(|i| {
            let row = x.row(i);
            let eta = model.trees.iter().fold(model.base_score, |acc, t| acc + model.learning_rate * t.eval(row));
            sigmoid(eta)
        })
        .collect())
}

impl<T: Scalar> GbmModel<T> {
    pub fn to_section(&self) -> Section {
        let mut s = Section::new("gbm")
            .with("base_score", fmt_num(self.base_score))
            .with("learning_rate", fmt_num(self.learning_rate))
            .with("n_trees", self.n_trees.to_string())
            .with("max_depth", self.max_depth.to_string())
            .with("n_features", self.n_features.to_string());
        for t in &self.trees {
            s.push("tree", t.serialize());
        }
        s
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let trees = s.get_all("tree").map(Tree::deserialize).collect::<Result<Vec<_>>>()?;
        let m = Self {
            base_score: parse_num(s.get("base_score")?)?,
            learning_rate: parse_num(s.get("learning_rate")?)?,
            n_trees: s.parse("n_trees")?,
            max_depth: s.parse("max_depth")?,
            n_features: s.parse("n_features")?,
            trees,
        };
        if m.trees.len() > m.n_trees || m.trees.iter().any(|t| t.max_feature().is_some_and(|f| f >= m.n_features)) {
            return Err(Error::Checkpoint("gbm trees inconsistent with header".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n: usize, seed: u64) -> (Matrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.gen_range(0.1..5.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let inside = (a - 2.5).abs() < 1.0 && b.abs() < 0.5;
            y.push(if rng.gen_bool(0.1) { !inside } else { inside });
            data.extend([a, b]);
        }
        (Matrix { rows: n, cols: 2, data }, y)
    }

    /// Walks each tree from the root with explicit recursion.
    fn naive_eval(t: &Tree<f64>, row: &[f64]) -> f64 {
        match t {
            Tree::Leaf(v) => *v,
            Tree::Split { feature, threshold, left, right } => {
                if row[*feature] <= *threshold {
                    naive_eval(left, row)
                } else {
                    naive_eval(right, row)
                }
            }
        }
    }

    #[test]
    fn zero_trees_predict_prior() {
        let (x, y) = problem(100, 1);
        let m = fit_gbm(&x, &y, &GbmParams { n_trees: 0, ..GbmParams::default() }).unwrap();
        let prior = y.iter().filter(|&&v| v).count() as f64 / y.len() as f64;
        for p in predict_gbm(&m, &x).unwrap() {
            assert!((p - prior).abs() < 1e-12);
        }
    }

    #[test]
    fn root_split_at_clean_threshold() {
        let vals: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<bool> = vals.iter().map(|&v| v > 24.0).collect();
        let x = Matrix { rows: 40, cols: 1, data: vals };
        let m = fit_gbm(&x, &y, &GbmParams { n_trees: 1, ..GbmParams::default() }).unwrap();
        match &m.trees[0] {
            Tree::Split { feature, threshold, .. } => assert_eq!((*feature, *threshold), (0, 24.0)),
            leaf => panic!("expected split, got {leaf:?}"),
        }
    }

    #[test]
    fn loss_non_increasing_and_depth_bounded() {
        let (x, y) = problem(600, 2);
        let (m, trace) = fit_gbm_traced(&x, &y, &GbmParams::default()).unwrap();
        assert_eq!(trace.len(), 51);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(m.trees.iter().all(|t| t.depth() <= 5));
    }

    #[test]
    fn matches_naive_tree_walk() {
        let (x, y) = problem(300, 3);
        let m = fit_gbm(&x, &y, &GbmParams::default()).unwrap();
        let p = predict_gbm(&m, &x).unwrap();
        for i in 0..x.rows {
            let eta = m.base_score + m.trees.iter().map(|t| 0.1 * naive_eval(t, x.row(i))).sum::<f64>();
            assert!((p[i] - 1.0 / (1.0 + (-eta).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_leaf_tree_changes_nothing() {
        let (x, y) = problem(200, 4);
        let mut m = fit_gbm(&x, &y, &GbmParams { n_trees: 5, ..GbmParams::default() }).unwrap();
        let before = predict_gbm(&m, &x).unwrap();
        m.trees.push(Tree::Split {
            feature: 1,
            threshold: 0.0,
            left: Box::new(Tree::Leaf(0.0)),
            right: Box::new(Tree::Leaf(0.0)),
        });
        assert_eq!(before, predict_gbm(&m, &x).unwrap());
    }

    #[test]
    fn auc_invariant_under_monotone_feature_transform() {
        let (x, y) = problem(400, 5);
        let (xt, yt) = problem(200, 6);
        let m = fit_gbm(&x, &y, &GbmParams::default()).unwrap();
        let auc = roc_auc(&predict_gbm(&m, &xt).unwrap(), &yt).unwrap();
        let (mut xl, mut xtl) = (x.clone(), xt.clone());
        xl.map_column(0, f64::ln);
        xtl.map_column(0, f64::ln);
        let ml = fit_gbm(&xl, &y, &GbmParams::default()).unwrap();
        let auc_l = roc_auc(&predict_gbm(&ml, &xtl).unwrap(), &yt).unwrap();
        assert!((auc - auc_l).abs() <= 1e-12);
    }

    #[test]
    fn errors_and_round_trip() {
        let (x, y) = problem(120, 7);
        assert!(matches!(fit_gbm(&x, &[false; 120], &GbmParams::default()), Err(Error::SingleClassInput)));
        let m = fit_gbm(&x, &y, &GbmParams { n_trees: 4, ..GbmParams::default() }).unwrap();
        let back = GbmModel::<f64>::from_section(&m.to_section()).unwrap();
        assert_eq!(back, m);
        let wide = Matrix { rows: 1, cols: 3, data: vec![0.0; 3] };
        assert!(matches!(predict_gbm(&m, &wide), Err(Error::DimensionMismatch { .. })));
    }
}
