//! Tiny synthetic table images for overfitting experiments.

use std::collections::HashSet;

use rand::Rng;

use super::tensor::Tensor;
use crate::grammar::{Cell, Row, Section, Span, TableTree, Token, TokenSequence};

pub const SYNTH_SIZE: usize = 32;
const INK: f64 = 0.1;
const HEAD_SHADE: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Merge {
    None,
    /// Cell at (row, col) spans two columns.
    Cols(usize, usize),
    /// Cell at (row, col) spans two rows.
    Rows(usize, usize),
}

/// Layout of one synthetic table: an owner id per grid slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthTable {
    pub rows: usize,
    pub cols: usize,
    pub head_rows: usize,
    owner: Vec<usize>,
    pub tree: TableTree,
}

impl SynthTable {
    fn build(rows: usize, cols: usize, head_rows: usize, merge: Merge) -> Self {
        let mut owner: Vec<usize> = (0..rows * cols).collect();
        let mut grid: Vec<Vec<Option<Cell>>> = vec![vec![Some(Cell::plain()); cols]; rows];
        let two = Span::new(2);
        match merge {
            Merge::None => {}
            Merge::Cols(r, c) => {
                owner[r * cols + c + 1] = r * cols + c;
                grid[r][c] = Some(Cell::spanning(None, two));
                grid[r][c + 1] = None;
            }
            Merge::Rows(r, c) => {
                owner[(r + 1) * cols + c] = r * cols + c;
                grid[r][c] = Some(Cell::spanning(two, None));
                grid[r + 1][c] = None;
            }
        }
        let to_row = |cells: &Vec<Option<Cell>>| Row::new(cells.iter().flatten().copied().collect());
        let mut sections = Vec::new();
        if head_rows > 0 {
            sections.push(Section::Head(grid[..head_rows].iter().map(to_row).collect()));
        }
        sections.push(Section::Body(grid[head_rows..].iter().map(to_row).collect()));
        Self {
            rows,
            cols,
            head_rows,
            owner,
            tree: TableTree::new(sections),
        }
    }

    /// `<sos>`, the structure tokens, `<eos>`.
    pub fn tokens(&self, bound: usize) -> TokenSequence {
        let mut t = vec![Token::Sos];
        t.extend(self.tree.to_tokens());
        t.push(Token::Eos);
        TokenSequence::with_bound(t, bound).expect("synthetic tables are short")
    }

    /// Three-channel `SYNTH_SIZE`² rendering on a white page. Lines are drawn
    /// only where two different cells meet, so merged cells stay open.
    pub fn render(&self) -> Tensor {
        let s = SYNTH_SIZE;
        let slot = |y: usize, x: usize| (y * self.rows / s, x * self.cols / s);
        let who = |y: usize, x: usize| {
            let (r, c) = slot(y, x);
            self.owner[r * self.cols + c]
        };
        let mut img = Tensor::full(&[3, s, s], 1.0);
        for y in 0..s {
            for x in 0..s {
                let edge = y == 0
                    || x == 0
                    || y == s - 1
                    || x == s - 1
                    || who(y, x) != who(y + 1, x)
                    || who(y, x) != who(y, x + 1);
                let v = if edge {
                    INK
                } else if slot(y, x).0 < self.head_rows {
                    HEAD_SHADE
                } else {
                    1.0
                };
                for ch in 0..3 {
                    img.data_mut()[(ch * s + y) * s + x] = v;
                }
            }
        }
        img
    }
}

fn random_table<R: Rng>(rng: &mut R) -> SynthTable {
    let rows = rng.gen_range(1..=4);
    let cols = rng.gen_range(1..=4);
    let head_rows = if rows > 1 && rng.gen_bool(0.5) { 1 } else { 0 };
    let merge = match rng.gen_range(0..3) {
        1 if cols > 1 => Merge::Cols(rng.gen_range(0..rows), rng.gen_range(0..cols - 1)),
        2 if rows > 1 => {
            let r = rng.gen_range(0..rows - 1);
            // Keep the merge inside one section.
            if head_rows > 0 && r == 0 {
                Merge::None
            } else {
                Merge::Rows(r, rng.gen_range(0..cols))
            }
        }
        _ => Merge::None,
    };
    SynthTable::build(rows, cols, head_rows, merge)
}

/// `count` tables that differ pairwise in both structure and rendering.
/// (A merge across a whole one-row table draws the same picture as a single cell.)
pub fn synth_tables<R: Rng>(rng: &mut R, count: usize) -> Vec<SynthTable> {
    let mut trees = HashSet::new();
    let mut images = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t = random_table(rng);
        let pixels: Vec<u64> = t.render().data().iter().map(|v| v.to_bits()).collect();
        if !trees.contains(&t.tree) && images.insert(pixels) {
            trees.insert(t.tree.clone());
            out.push(t);
        }
    }
    out
}

/// Image and target pairs ready for training.
pub fn synth_dataset<R: Rng>(rng: &mut R, count: usize, bound: usize) -> Vec<(Tensor, TokenSequence)> {
    synth_tables(rng, count)
        .into_iter()
        .map(|t| (t.render(), t.tokens(bound)))
        .collect()
}
