//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

pub mod rf;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use tsrlab_core::grammar::{Cell, Row, Section, Span, TableTree, Token};
use tsrlab_core::teds::{LabeledTree, NodeLabel, Tag};

/// Exhaustive edit-script search for unit-cost ordered tree edit distance.
///
/// Every edit script can be reordered into deletions from `a`, then renames,
/// then insertions (deletions from `b` run backwards) without raising its
/// cost. This enumerates every pair of kept node sets, keeps the pairs whose
/// remaining forests have identical shape, and prices the script as
/// deletions + insertions + label mismatches. Only usable on tiny trees.
pub fn brute_force_distance(a: &LabeledTree, b: &LabeledTree) -> f64 {
    assert!(a.len() <= 12 && b.len() <= 12, "oracle is exponential");
    let ka = kept_forests(a);
    let kb = kept_forests(b);
    let mut best = usize::MAX;
    for (shape, entries_a) in &ka {
        let Some(entries_b) = kb.get(shape) else { continue };
        for (del_a, labels_a) in entries_a {
            for (del_b, labels_b) in entries_b {
                let renames = labels_a.iter().zip(labels_b).filter(|(x, y)| x != y).count();
                best = best.min(del_a + del_b + renames);
            }
        }
    }
    best as f64
}

type Forests = HashMap<Vec<usize>, Vec<(usize, Vec<NodeLabel>)>>;

/// For every subset of kept nodes: the preorder depth sequence of the forest
/// left after deleting the others (which determines its shape), the number of
/// deletions, and the kept labels in preorder.
fn kept_forests(t: &LabeledTree) -> Forests {
    let n = t.len();
    let parents = t.parents();
    let mut out: Forests = HashMap::new();
    for mask in 0u32..(1 << n) {
        let kept = |i: usize| mask & (1 << i) != 0;
        let mut depths = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            if !kept(i) {
                continue;
            }
            let mut depth = 0;
            let mut p = parents[i];
            while let Some(q) = p {
                if kept(q) {
                    depth += 1;
                }
                p = parents[q];
            }
            depths.push(depth);
            labels.push(*t.label(i));
        }
        let deleted = n - labels.len();
        out.entry(depths).or_default().push((deleted, labels));
    }
    out
}

const LABEL_POOL: [NodeLabel; 6] = [
    NodeLabel::tag(Tag::Table),
    NodeLabel::tag(Tag::Thead),
    NodeLabel::tag(Tag::Tbody),
    NodeLabel::tag(Tag::Tr),
    NodeLabel::tag(Tag::Td),
    NodeLabel::tag(Tag::Td),
];

fn random_label<R: Rng>(rng: &mut R) -> NodeLabel {
    let mut l = *LABEL_POOL.choose(rng).unwrap();
    if l.tag == Tag::Td && rng.gen_bool(0.4) {
        l.colspan = Span::new(rng.gen_range(2..=3));
    }
    l
}

/// Random ordered tree with exactly `n` nodes and labels from a small pool.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize) -> LabeledTree {
    assert!(n >= 1);
    // Attach node i to a random earlier node; rebuild recursively.
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let p = rng.gen_range(0..i);
        children[p].push(i);
    }
    let labels: Vec<NodeLabel> = (0..n).map(|_| random_label(rng)).collect();
    fn build(i: usize, children: &[Vec<usize>], labels: &[NodeLabel]) -> LabeledTree {
        LabeledTree::node(
            labels[i],
            children[i].iter().map(|&c| build(c, children, labels)).collect(),
        )
    }
    build(0, &children, &labels)
}

fn random_span<R: Rng>(rng: &mut R) -> Option<Span> {
    if rng.gen_bool(0.15) {
        Span::new(rng.gen_range(2..=10))
    } else {
        None
    }
}

fn random_row<R: Rng>(rng: &mut R) -> Row {
    let n = rng.gen_range(0..5);
    Row::new(
        (0..n)
            .map(|_| Cell::spanning(random_span(rng), random_span(rng)))
            .collect(),
    )
}

/// Random valid table structure (not necessarily span-consistent).
pub fn random_table<R: Rng>(rng: &mut R) -> TableTree {
    let n_sections = rng.gen_range(0..4);
    let sections = (0..n_sections)
        .map(|_| match rng.gen_range(0..3) {
            0 => Section::Head((0..rng.gen_range(0..3)).map(|_| random_row(rng)).collect()),
            1 => Section::Body((0..rng.gen_range(0..5)).map(|_| random_row(rng)).collect()),
            _ => Section::Bare(random_row(rng)),
        })
        .collect();
    TableTree::new(sections)
}

/// Whether the open/close tags of a token list form a balanced bracket
/// sequence, treating `<td` ... `>` as an opening `td`.
pub fn is_balanced(tokens: &[Token]) -> bool {
    let mut stack = Vec::new();
    let mut in_fragment = false;
    for t in tokens {
        if in_fragment {
            match t {
                Token::RowSpan(_) | Token::ColSpan(_) => continue,
                Token::TagEnd => {
                    in_fragment = false;
                    continue;
                }
                _ => return false,
            }
        }
        match t {
            Token::TheadOpen => stack.push("thead"),
            Token::TbodyOpen => stack.push("tbody"),
            Token::TrOpen => stack.push("tr"),
            Token::TdOpen => stack.push("td"),
            Token::TdStart => {
                stack.push("td");
                in_fragment = true;
            }
            Token::TheadClose | Token::TbodyClose | Token::TrClose | Token::TdClose => {
                let want = match t {
                    Token::TheadClose => "thead",
                    Token::TbodyClose => "tbody",
                    Token::TrClose => "tr",
                    _ => "td",
                };
                if stack.pop() != Some(want) {
                    return false;
                }
            }
            Token::TagEnd | Token::RowSpan(_) | Token::ColSpan(_) => return false,
            _ => {}
        }
    }
    stack.is_empty() && !in_fragment
}

/// Deletes one random token or swaps two adjacent distinct tokens.
pub fn mutate<R: Rng>(rng: &mut R, tokens: &[Token]) -> Vec<Token> {
    let mut out = tokens.to_vec();
    if out.len() >= 2 && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..out.len() - 1);
        out.swap(i, i + 1);
    } else if !out.is_empty() {
        let i = rng.gen_range(0..out.len());
        out.remove(i);
    }
    out
}
