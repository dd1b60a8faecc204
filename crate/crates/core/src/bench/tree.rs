use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 12,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Multi-output CART regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    fn predict_row(&self, row: ArrayView1<'_, f64>) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Best split of one node: (summed SSE, feature, threshold, left rows, right rows).
struct Split {
    cost: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn sse(rows: &[usize], y: ArrayView2<'_, f64>) -> f64 {
    let n = rows.len() as f64;
    (0..y.ncols())
        .map(|d| {
            let (s, s2) = rows.iter().fold((0.0, 0.0), |(s, s2), &i| (s + y[[i, d]], s2 + y[[i, d]] * y[[i, d]]));
            (s2 - s * s / n).max(0.0)
        })
        .sum()
}

fn mean(rows: &[usize], y: ArrayView2<'_, f64>) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..y.ncols())
        .map(|d| rows.iter().map(|&i| y[[i, d]]).sum::<f64>() / n)
        .collect()
}

/// Scans every feature for the split with the lowest summed per-output SSE.
/// Ties keep the earlier feature, then the earlier split position.
fn best_split(rows: &[usize], x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, min_leaf: usize) -> Option<Split> {
    let n = rows.len();
    let outputs = y.ncols();
    let mut best: Option<(f64, usize, usize)> = None;
    let mut sorted = rows.to_vec();
    let mut left_s = vec![0.0; outputs];
    let mut left_s2 = vec![0.0; outputs];
    let mut total_s = vec![0.0; outputs];
    let mut total_s2 = vec![0.0; outputs];
    for &i in rows {
        for d in 0..outputs {
            total_s[d] += y[[i, d]];
            total_s2[d] += y[[i, d]] * y[[i, d]];
        }
    }
    let order_by = |sorted: &mut Vec<usize>, f: usize| {
        sorted.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)))
    };
    for f in 0..x.ncols() {
        order_by(&mut sorted, f);
        left_s.fill(0.0);
        left_s2.fill(0.0);
        for pos in 1..n {
            let i = sorted[pos - 1];
            for d in 0..outputs {
                left_s[d] += y[[i, d]];
                left_s2[d] += y[[i, d]] * y[[i, d]];
            }
            if pos < min_leaf || n - pos < min_leaf {
                continue;
            }
            if x[[sorted[pos - 1], f]] >= x[[sorted[pos], f]] {
                continue;
            }
            let (nl, nr) = (pos as f64, (n - pos) as f64);
            let mut cost = 0.0;
            for d in 0..outputs {
                let rs = total_s[d] - left_s[d];
                let rs2 = total_s2[d] - left_s2[d];
                cost += (left_s2[d] - left_s[d] * left_s[d] / nl).max(0.0) + (rs2 - rs * rs / nr).max(0.0);
            }
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, f, pos));
            }
        }
    }
    best.map(|(cost, feature, pos)| {
        let mut order = sorted;
        order_by(&mut order, feature);
        let lo = x[[order[pos - 1], feature]];
        let hi = x[[order[pos], feature]];
        let mid = lo + (hi - lo) / 2.0;
        let threshold = if mid < hi { mid } else { lo };
        Split {
            cost,
            feature,
            threshold,
            left: order[..pos].to_vec(),
            right: order[pos..].to_vec(),
        }
    })
}

fn grow(
    nodes: &mut Vec<Node>,
    rows: Vec<usize>,
    depth: usize,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    params: TreeParams,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf(mean(&rows, y)));
    if depth >= params.max_depth || rows.len() < 2 * params.min_leaf.max(1) {
        return id;
    }
    let parent = sse(&rows, y);
    let Some(split) = best_split(&rows, x, y, params.min_leaf.max(1)) else {
        return id;
    };
    if !(split.cost < parent - 1e-12 * parent.max(1e-300)) {
        return id;
    }
    let left = grow(nodes, split.left, depth + 1, x, y, params);
    let right = grow(nodes, split.right, depth + 1, x, y, params);
    nodes[id] = Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left,
        right,
    };
    id
}

pub fn tree_fit(features: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>, params: TreeParams) -> Result<RegressionTree> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::Empty("tree training set is empty".into()));
    }
    if targets.nrows() != n {
        return Err(Error::Dimension(format!(
            "{n} feature rows but {} target rows",
            targets.nrows()
        )));
    }
    if n < params.min_leaf {
        return Err(Error::Config(format!(
            "{n} training rows is fewer than min_leaf = {}",
            params.min_leaf
        )));
    }
    let mut nodes = Vec::new();
    grow(&mut nodes, (0..n).collect(), 0, features, targets, params);
    Ok(RegressionTree {
        nodes,
        n_features: features.ncols(),
    })
}

pub fn tree_predict(tree: &RegressionTree, query: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if query.ncols() != tree.n_features {
        return Err(Error::Dimension(format!(
            "query has {} features, tree {}",
            query.ncols(),
            tree.n_features
        )));
    }
    let outputs = match &tree.nodes[0] {
        Node::Leaf(v) => v.len(),
        Node::Split { .. } => tree
            .nodes
            .iter()
            .find_map(|n| match n {
                Node::Leaf(v) => Some(v.len()),
                _ => None,
            })
            .expect("a tree has leaves"),
    };
    let mut out = Array2::zeros((query.nrows(), outputs));
    for (i, row) in query.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&ArrayView1::from(tree.predict_row(row)));
    }
    Ok(out)
}
