//! Random forest over raw integer codes: seeded bootstrap, Gini splits,
//! square-root feature subsampling per split.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RfSpec;
use crate::dataset::TabularDataset;
use crate::error::Result;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: usize, threshold: u16, left: usize, right: usize },
    Leaf { p: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, record: &[u16]) -> &[f64; 2] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p } => return p,
                Node::Split { feature, threshold, left, right } => {
                    at = if record[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    trees: Vec<Tree>,
}

impl RfModel {
    /// Rows are first put into a canonical order (sorted by codes then
    /// label) so that bootstrap draws, and with them the whole forest,
    /// depend only on the data multiset and the seed, not on row order.
    pub fn fit(spec: &RfSpec, data: &TabularDataset, seed: u64) -> Result<Self> {
        let n = data.num_records();
        let d = data.num_features();
        let mut canonical: Vec<usize> = (0..n).collect();
        canonical.sort_by(|&a, &b| {
            data.record(a).cmp(data.record(b)).then(data.label(a).cmp(&data.label(b)))
        });

        let mtry = (d as f64).sqrt().ceil() as usize;
        let mut trees = Vec::with_capacity(spec.n_estimators);
        for t in 0..spec.n_estimators {
            let mut rng = rng_for(seed, &[0x5452_4545, t as u64]);
            let rows: Vec<usize> = if spec.bootstrap {
                (0..n).map(|_| canonical[rng.gen_range(0..n)]).collect()
            } else {
                canonical.clone()
            };
            let mut builder = TreeBuilder { data, mtry, max_depth: spec.max_depth, rng, nodes: vec![] };
            builder.build(rows, 0);
            trees.push(Tree { nodes: builder.nodes });
        }
        Ok(Self { trees })
    }

    /// Mean of the reached leaves' class distributions.
    pub fn predict_record(&self, record: &[u16]) -> [f64; 2] {
        let mut acc = [0.0f64; 2];
        for tree in &self.trees {
            let p = tree.leaf(record);
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let m = self.trees.len() as f64;
        [acc[0] / m, acc[1] / m]
    }
}

struct TreeBuilder<'a> {
    data: &'a TabularDataset,
    mtry: usize,
    max_depth: usize,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    /// Appends the subtree for `rows` and returns its node index.
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let counts = self.class_counts(&rows);
        let done = depth >= self.max_depth
            || rows.len() < 2
            || counts[0] == 0
            || counts[1] == 0;
        let split = if done { None } else { self.best_split(&rows) };
        match split {
            None => {
                let n = rows.len() as f64;
                let idx = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    p: [counts[0] as f64 / n, counts[1] as f64 / n],
                });
                idx
            }
            Some((feature, threshold)) => {
                let (l_rows, r_rows): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| self.data.record(i)[feature] <= threshold);
                let idx = self.nodes.len();
                self.nodes.push(Node::Split { feature, threshold, left: 0, right: 0 });
                let left = self.build(l_rows, depth + 1);
                let right = self.build(r_rows, depth + 1);
                let Node::Split { left: l, right: r, .. } = &mut self.nodes[idx] else {
                    unreachable!()
                };
                *l = left;
                *r = right;
                idx
            }
        }
    }

    fn class_counts(&self, rows: &[usize]) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &i in rows {
            c[self.data.label(i) as usize] += 1;
        }
        c
    }

    /// Minimum weighted-Gini split over a seeded feature subset; `None`
    /// when no candidate strictly improves on the parent impurity.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, u16)> {
        let d = self.data.num_features();
        let mut features: Vec<usize> = (0..d).collect();
        let mut candidates: Vec<usize> = features
            .partial_shuffle(&mut self.rng, self.mtry)
            .0
            .to_vec();
        candidates.sort_unstable();

        let n = rows.len() as f64;
        let counts = self.class_counts(rows);
        let parent = gini(counts[0] as f64, counts[1] as f64);
        let mut best: Option<(f64, usize, u16)> = None;
        for &j in &candidates {
            let a = self.data.alphabet_sizes()[j];
            let mut per_code = vec![[0usize; 2]; a];
            for &i in rows {
                per_code[self.data.record(i)[j] as usize][self.data.label(i) as usize] += 1;
            }
            let mut l0 = 0.0;
            let mut l1 = 0.0;
            for code in 0..a.saturating_sub(1) {
                l0 += per_code[code][0] as f64;
                l1 += per_code[code][1] as f64;
                let nl = l0 + l1;
                let nr = n - nl;
                if nl == 0.0 || nr == 0.0 {
                    continue;
                }
                let r0 = counts[0] as f64 - l0;
                let r1 = counts[1] as f64 - l1;
                let weighted = (nl * gini(l0, l1) + nr * gini(r0, r1)) / n;
                if weighted + 1e-12 < parent
                    && best.map_or(true, |(b, _, _)| weighted + 1e-12 < b)
                {
                    best = Some((weighted, j, code as u16));
                }
            }
        }
        best.map(|(_, j, t)| (j, t))
    }
}

fn gini(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (c0 * c0 + c1 * c1) / (n * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synthesize;

    fn toy(records: Vec<u16>, labels: Vec<u8>, d: usize) -> TabularDataset {
        let names = (0..d).map(|j| format!("f{j}")).collect();
        TabularDataset::from_codes(records, labels, names, 10).unwrap()
    }

    #[test]
    fn depth_zero_single_tree_reports_training_distribution() {
        let data = toy(vec![0, 1, 2, 3], vec![1, 1, 1, 0], 1);
        let spec = RfSpec { n_estimators: 1, max_depth: 0, bootstrap: false };
        let model = RfModel::fit(&spec, &data, 1).unwrap();
        assert_eq!(model.predict_record(&[0]), [0.25, 0.75]);
    }

    #[test]
    fn single_feature_split_separates_classes() {
        // Label = code >= 2; depth 1 suffices.
        let data = toy(vec![0, 0, 1, 1, 2, 2, 3, 3], vec![0, 0, 1, 1], 2);
        let spec = RfSpec { n_estimators: 5, max_depth: 1, bootstrap: false };
        let model = RfModel::fit(&spec, &data, 3).unwrap();
        assert!(model.predict_record(&[0, 0])[0] > 0.9);
        assert!(model.predict_record(&[3, 3])[1] > 0.9);
    }

    #[test]
    fn training_row_order_does_not_change_predictions() {
        let data = synthesize(300, 6, 0.5, 0.5, 4, 5).unwrap();
        let spec = RfSpec { n_estimators: 20, max_depth: 2, bootstrap: true };
        let a = RfModel::fit(&spec, &data, 9).unwrap();

        let perm: Vec<usize> = (0..300).rev().collect();
        let permuted = data.subset(&perm).unwrap();
        let b = RfModel::fit(&spec, &permuted, 9).unwrap();
        for i in 0..50 {
            assert_eq!(a.predict_record(data.record(i)), b.predict_record(data.record(i)));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let data = synthesize(200, 6, 0.5, 0.5, 4, 5).unwrap();
        let spec = RfSpec::default();
        let a = RfModel::fit(&spec, &data, 4).unwrap();
        let b = RfModel::fit(&spec, &data, 4).unwrap();
        assert_eq!(a, b);
    }
}
