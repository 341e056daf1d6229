//! HTML table-structure vocabulary, tokenization and parsing.

mod grid;
mod sequence;
mod token;
mod tree;

pub use grid::{expand_grid, GridTable, GridWarning};
pub use sequence::{
    detokenize, split_structure, tokenize, tokenize_str, tokenize_with_bound, TokenSequence, DEFAULT_MAX_LEN,
};
pub use token::{
    vocabulary, vocabulary_hash, vocabulary_manifest, Span, Token, MANIFEST_VERSION, VOCAB_SIZE,
};
pub use tree::{classify, parse, Cell, Row, Section, TableClass, TableTree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("sequence length {len} exceeds bound {bound}")]
    LengthExceeded { len: usize, bound: usize },
    #[error("sequence contains <unk> at position {pos}")]
    ContainsUnknown { pos: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("closing </{tag}> at position {pos} has no matching opening tag")]
    UnbalancedTag { pos: usize, tag: &'static str },
    #[error("<{tag}> at position {pos} cannot appear inside <{parent}>")]
    IllegalNesting {
        pos: usize,
        tag: &'static str,
        parent: &'static str,
    },
    #[error("`<td` at position {pos} is not closed by `>`")]
    DanglingFragment { pos: usize },
    #[error("repeated span attribute at position {pos}")]
    DuplicateSpan { pos: usize },
    #[error("unexpected token {token:?} at position {pos}")]
    UnexpectedToken { pos: usize, token: &'static str },
    #[error("<{tag}> is never closed")]
    UnclosedTag { tag: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GridError {
    #[error("cells {first} and {second} both cover row {row}, column {col}")]
    SpanOverlap {
        row: usize,
        col: usize,
        first: usize,
        second: usize,
    },
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn span() -> impl Strategy<Value = Option<Span>> {
        prop_oneof![
            3 => Just(None),
            1 => (2u32..=10).prop_map(Span::new),
        ]
    }

    fn cell() -> impl Strategy<Value = Cell> {
        (span(), span()).prop_map(|(r, c)| Cell::spanning(r, c))
    }

    fn row() -> impl Strategy<Value = Row> {
        prop::collection::vec(cell(), 0..5).prop_map(Row::new)
    }

    pub(crate) fn table() -> impl Strategy<Value = TableTree> {
        let section = prop_oneof![
            prop::collection::vec(row(), 0..3).prop_map(Section::Head),
            prop::collection::vec(row(), 0..4).prop_map(Section::Body),
            row().prop_map(Section::Bare),
        ];
        prop::collection::vec(section, 0..3).prop_map(TableTree::new)
    }

    proptest! {
        #[test]
        fn detokenize_inverts_tokenize(tree in table()) {
            let surfaces: Vec<&str> = tree.to_tokens().iter().map(|t| t.surface()).collect();
            let seq = tokenize_with_bound(&surfaces, usize::MAX).unwrap();
            let s = detokenize(&seq).unwrap();
            prop_assert_eq!(s.clone(), surfaces.concat());
            prop_assert_eq!(tokenize_str(&s, usize::MAX).unwrap(), seq);
        }

        #[test]
        fn parse_inverts_serialization(tree in table()) {
            prop_assert_eq!(parse(&tree.to_tokens()).unwrap(), tree);
        }

        #[test]
        fn complex_iff_span_token_present(tree in table()) {
            let has_span = tree
                .to_tokens()
                .iter()
                .any(|t| matches!(t, Token::RowSpan(_) | Token::ColSpan(_)));
            prop_assert_eq!(classify(&tree) == TableClass::Complex, has_span);
        }

        #[test]
        fn grid_covers_positions_once(tree in table()) {
            if let Ok(g) = expand_grid(&tree) {
                let covered: usize = tree.cells().map(|c| c.rows() * c.cols()).sum();
                let occupied = g.occupancy.iter().filter(|o| o.is_some()).count();
                prop_assert_eq!(covered, occupied);
            }
        }
    }
}
