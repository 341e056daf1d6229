use std::fmt;

use super::token::{Span, Token};
use super::ParseError;

/// One `<td>` cell. A cell without spans serializes as `<td></td>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Cell {
    pub rowspan: Option<Span>,
    pub colspan: Option<Span>,
}

impl Cell {
    pub fn plain() -> Self {
        Self::default()
    }

    pub fn spanning(rowspan: Option<Span>, colspan: Option<Span>) -> Self {
        Self { rowspan, colspan }
    }

    pub fn is_spanning(&self) -> bool {
        self.rowspan.is_some() || self.colspan.is_some()
    }

    pub fn rows(&self) -> usize {
        self.rowspan.map_or(1, |s| s.get() as usize)
    }

    pub fn cols(&self) -> usize {
        self.colspan.map_or(1, |s| s.get() as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Row {
    pub cells: Vec<Cell>,
}

impl Row {
    pub fn new(cells: Vec<Cell>) -> Self {
        Self { cells }
    }
}

/// A top-level child of the implicit `table` root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Section {
    Head(Vec<Row>),
    Body(Vec<Row>),
    /// A `<tr>` directly under the table, with no `thead`/`tbody` wrapper.
    Bare(Row),
}

/// Parsed structure tree. The `table` root is implicit; nesting rules
/// (sections hold rows, rows hold cells) are enforced by the types.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TableTree {
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TableClass {
    Simple,
    Complex,
}

impl fmt::Display for TableClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableClass::Simple => f.write_str("simple"),
            TableClass::Complex => f.write_str("complex"),
        }
    }
}

impl TableTree {
    pub fn new(sections: Vec<Section>) -> Self {
        Self { sections }
    }

    /// All rows in document order.
    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.sections.iter().flat_map(|s| match s {
            Section::Head(rows) | Section::Body(rows) => rows.iter().collect::<Vec<_>>(),
            Section::Bare(row) => vec![row],
        })
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.rows().flat_map(|r| r.cells.iter())
    }

    /// Node count excluding the implicit root.
    pub fn node_count(&self) -> usize {
        self.sections
            .iter()
            .map(|s| match s {
                Section::Head(rows) | Section::Body(rows) => {
                    1 + rows.iter().map(|r| 1 + r.cells.len()).sum::<usize>()
                }
                Section::Bare(row) => 1 + row.cells.len(),
            })
            .sum()
    }

    pub fn classify(&self) -> TableClass {
        if self.cells().any(Cell::is_spanning) {
            TableClass::Complex
        } else {
            TableClass::Simple
        }
    }

    /// Canonical token form. Spanning cells emit rowspan before colspan.
    pub fn to_tokens(&self) -> Vec<Token> {
        fn push_row(out: &mut Vec<Token>, row: &Row) {
            out.push(Token::TrOpen);
            for cell in &row.cells {
                if cell.is_spanning() {
                    out.push(Token::TdStart);
                    if let Some(r) = cell.rowspan {
                        out.push(Token::RowSpan(r));
                    }
                    if let Some(c) = cell.colspan {
                        out.push(Token::ColSpan(c));
                    }
                    out.push(Token::TagEnd);
                } else {
                    out.push(Token::TdOpen);
                }
                out.push(Token::TdClose);
            }
            out.push(Token::TrClose);
        }

        let mut out = Vec::new();
        for section in &self.sections {
            match section {
                Section::Head(rows) => {
                    out.push(Token::TheadOpen);
                    rows.iter().for_each(|r| push_row(&mut out, r));
                    out.push(Token::TheadClose);
                }
                Section::Body(rows) => {
                    out.push(Token::TbodyOpen);
                    rows.iter().for_each(|r| push_row(&mut out, r));
                    out.push(Token::TbodyClose);
                }
                Section::Bare(row) => push_row(&mut out, row),
            }
        }
        out
    }
}

/// Convenience wrapper for [`TableTree::classify`].
pub fn classify(tree: &TableTree) -> TableClass {
    tree.classify()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Open {
    Thead,
    Tbody,
    Tr,
    Td,
}

impl Open {
    fn name(self) -> &'static str {
        match self {
            Open::Thead => "thead",
            Open::Tbody => "tbody",
            Open::Tr => "tr",
            Open::Td => "td",
        }
    }
}

struct Parser {
    sections: Vec<Section>,
    stack: Vec<Open>,
    rows: Vec<Row>,
    row: Vec<Cell>,
    cell: Cell,
}

impl Parser {
    fn parent_name(&self) -> &'static str {
        self.stack.last().map_or("table", |o| o.name())
    }

    fn open(&mut self, pos: usize, tag: Open) -> Result<(), ParseError> {
        let allowed = matches!(
            (self.stack.last(), tag),
            (None, Open::Thead | Open::Tbody | Open::Tr)
                | (Some(Open::Thead | Open::Tbody), Open::Tr)
                | (Some(Open::Tr), Open::Td)
        );
        if !allowed {
            return Err(ParseError::IllegalNesting {
                pos,
                tag: tag.name(),
                parent: self.parent_name(),
            });
        }
        self.stack.push(tag);
        Ok(())
    }

    fn close(&mut self, pos: usize, tag: Open) -> Result<(), ParseError> {
        if self.stack.last() != Some(&tag) {
            return Err(ParseError::UnbalancedTag { pos, tag: tag.name() });
        }
        self.stack.pop();
        match tag {
            Open::Td => self.row.push(std::mem::take(&mut self.cell)),
            Open::Tr => {
                let row = Row::new(std::mem::take(&mut self.row));
                if self.stack.is_empty() {
                    self.sections.push(Section::Bare(row));
                } else {
                    self.rows.push(row);
                }
            }
            Open::Thead => self.sections.push(Section::Head(std::mem::take(&mut self.rows))),
            Open::Tbody => self.sections.push(Section::Body(std::mem::take(&mut self.rows))),
        }
        Ok(())
    }
}

/// Strips a leading `<sos>` and a trailing `<eos>` (plus any `<pad>` after it).
pub(crate) fn strip_specials(tokens: &[Token]) -> (&[Token], usize) {
    let mut body = tokens;
    let mut offset = 0;
    if body.first() == Some(&Token::Sos) {
        body = &body[1..];
        offset = 1;
    }
    while body.last() == Some(&Token::Pad) {
        body = &body[..body.len() - 1];
    }
    if body.last() == Some(&Token::Eos) {
        body = &body[..body.len() - 1];
    }
    (body, offset)
}

/// Parses structure tokens into a [`TableTree`].
///
/// A leading `<sos>` and trailing `<eos>` are ignored; any other special token
/// is rejected. `<td` followed directly by `>` is accepted as a plain cell.
pub fn parse(tokens: &[Token]) -> Result<TableTree, ParseError> {
    let (body, offset) = strip_specials(tokens);
    let mut p = Parser {
        sections: Vec::new(),
        stack: Vec::new(),
        rows: Vec::new(),
        row: Vec::new(),
        cell: Cell::default(),
    };

    let mut i = 0;
    while i < body.len() {
        let pos = i + offset;
        match body[i] {
            Token::TheadOpen => p.open(pos, Open::Thead)?,
            Token::TbodyOpen => p.open(pos, Open::Tbody)?,
            Token::TrOpen => p.open(pos, Open::Tr)?,
            Token::TdOpen => p.open(pos, Open::Td)?,
            Token::TheadClose => p.close(pos, Open::Thead)?,
            Token::TbodyClose => p.close(pos, Open::Tbody)?,
            Token::TrClose => p.close(pos, Open::Tr)?,
            Token::TdClose => p.close(pos, Open::Td)?,
            Token::TdStart => {
                p.open(pos, Open::Td)?;
                let mut cell = Cell::default();
                i += 1;
                loop {
                    match body.get(i) {
                        Some(Token::TagEnd) => break,
                        Some(Token::RowSpan(s)) => {
                            if cell.rowspan.replace(*s).is_some() {
                                return Err(ParseError::DuplicateSpan { pos: i + offset });
                            }
                        }
                        Some(Token::ColSpan(s)) => {
                            if cell.colspan.replace(*s).is_some() {
                                return Err(ParseError::DuplicateSpan { pos: i + offset });
                            }
                        }
                        _ => return Err(ParseError::DanglingFragment { pos }),
                    }
                    i += 1;
                }
                p.cell = cell;
            }
            t @ (Token::TagEnd
            | Token::RowSpan(_)
            | Token::ColSpan(_)
            | Token::Pad
            | Token::Sos
            | Token::Eos
            | Token::Unk) => {
                return Err(ParseError::UnexpectedToken {
                    pos,
                    token: t.surface(),
                })
            }
        }
        i += 1;
    }

    if let Some(open) = p.stack.last() {
        return Err(ParseError::UnclosedTag { tag: open.name() });
    }
    Ok(TableTree::new(p.sections))
}
