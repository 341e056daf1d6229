//! Ordered tree edit distance (Zhang–Shasha keyroot formulation).

use super::tree::{LabeledTree, NodeLabel};

/// Edit operation costs. Implementations must return non-negative values and
/// `rename(a, a) == 0`.
pub trait CostModel {
    fn insert(&self, node: &NodeLabel) -> f64;
    fn delete(&self, node: &NodeLabel) -> f64;
    fn rename(&self, from: &NodeLabel, to: &NodeLabel) -> f64;
}

/// Unit insert/delete; rename is free only when tag and spans both match.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructureCost;

impl CostModel for StructureCost {
    fn insert(&self, _: &NodeLabel) -> f64 {
        1.0
    }

    fn delete(&self, _: &NodeLabel) -> f64 {
        1.0
    }

    fn rename(&self, from: &NodeLabel, to: &NodeLabel) -> f64 {
        if from == to {
            0.0
        } else {
            1.0
        }
    }
}

struct Indexed<'a> {
    labels: Vec<&'a NodeLabel>,
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(tree: &'a LabeledTree) -> Self {
        let (order, lml) = tree.postorder();
        let labels = order.iter().map(|&n| tree.label(n)).collect();
        // A keyroot is the highest postorder node for each distinct leftmost leaf.
        let mut last = vec![None; lml.len()];
        for (i, &l) in lml.iter().enumerate() {
            last[l] = Some(i);
        }
        let mut keyroots: Vec<usize> = last.into_iter().flatten().collect();
        keyroots.sort_unstable();
        Self {
            labels,
            lml,
            keyroots,
        }
    }
}

/// Minimum total cost of node insertions, deletions and renames turning `a`
/// into `b`.
pub fn tree_edit_distance<C: CostModel + ?Sized>(a: &LabeledTree, b: &LabeledTree, cost: &C) -> f64 {
    let ta = Indexed::new(a);
    let tb = Indexed::new(b);
    let (na, nb) = (ta.labels.len(), tb.labels.len());
    if na == 0 {
        return tb.labels.iter().map(|l| cost.insert(l)).sum();
    }
    if nb == 0 {
        return ta.labels.iter().map(|l| cost.delete(l)).sum();
    }

    let mut td = vec![0.0f64; na * nb];
    let mut fd: Vec<f64> = Vec::new();

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let li = ta.lml[i];
            let lj = tb.lml[j];
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd.clear();
            fd.resize(rows * cols, 0.0);
            let at = |r: usize, c: usize| r * cols + c;

            for x in li..=i {
                let r = x - li + 1;
                fd[at(r, 0)] = fd[at(r - 1, 0)] + cost.delete(ta.labels[x]);
            }
            for y in lj..=j {
                let c = y - lj + 1;
                fd[at(0, c)] = fd[at(0, c - 1)] + cost.insert(tb.labels[y]);
            }
            for x in li..=i {
                let r = x - li + 1;
                for y in lj..=j {
                    let c = y - lj + 1;
                    let del = fd[at(r - 1, c)] + cost.delete(ta.labels[x]);
                    let ins = fd[at(r, c - 1)] + cost.insert(tb.labels[y]);
                    if ta.lml[x] == li && tb.lml[y] == lj {
                        let ren = fd[at(r - 1, c - 1)] + cost.rename(ta.labels[x], tb.labels[y]);
                        let v = del.min(ins).min(ren);
                        fd[at(r, c)] = v;
                        td[x * nb + y] = v;
                    } else {
                        let sub = fd[at(ta.lml[x] - li, tb.lml[y] - lj)] + td[x * nb + y];
                        fd[at(r, c)] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[(na - 1) * nb + (nb - 1)]
}
