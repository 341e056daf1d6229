//! The fixed 32-symbol structure vocabulary.
//!
//! Ids are assigned in this order and never change:
//!
//! | id      | token                                   |
//! |---------|-----------------------------------------|
//! | 0..=3   | `<pad>`, `<sos>`, `<eos>`, `<unk>`      |
//! | 4..=11  | `<thead>` `</thead>` `<tbody>` `</tbody>` `<tr>` `</tr>` `<td>` `</td>` |
//! | 12, 13  | `<td` and `>`                           |
//! | 14..=22 | ` rowspan="2"` .. ` rowspan="10"`       |
//! | 23..=31 | ` colspan="2"` .. ` colspan="10"`       |

use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;

use sha2::{Digest, Sha256};

pub const VOCAB_SIZE: usize = 32;
pub const MANIFEST_VERSION: u32 = 1;

/// A row or column span in `2..=10`. A span of one is a plain cell and has no token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span(u8);

impl Span {
    pub const MIN: u8 = 2;
    pub const MAX: u8 = 10;

    pub fn new(value: u32) -> Option<Span> {
        if (Self::MIN as u32..=Self::MAX as u32).contains(&value) {
            Some(Span(value as u8))
        } else {
            None
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Pad,
    Sos,
    Eos,
    Unk,
    TheadOpen,
    TheadClose,
    TbodyOpen,
    TbodyClose,
    TrOpen,
    TrClose,
    TdOpen,
    TdClose,
    /// `<td` — opens a spanning cell; attributes follow, then [`Token::TagEnd`].
    TdStart,
    /// `>` — closes the opening fragment of a spanning cell.
    TagEnd,
    RowSpan(Span),
    ColSpan(Span),
}

const SPAN_COUNT: u32 = (Span::MAX - Span::MIN + 1) as u32;
const ROWSPAN_BASE: u32 = 14;
const COLSPAN_BASE: u32 = ROWSPAN_BASE + SPAN_COUNT;

static VOCAB: LazyLock<Vec<Token>> = LazyLock::new(|| {
    (0..VOCAB_SIZE as u32)
        .map(|id| Token::from_id(id).expect("every id below 32 is assigned"))
        .collect()
});

static SURFACES: LazyLock<Vec<String>> = LazyLock::new(|| VOCAB.iter().map(|t| t.render_surface()).collect());

static BY_SURFACE: LazyLock<HashMap<&'static str, Token>> = LazyLock::new(|| {
    VOCAB
        .iter()
        .zip(SURFACES.iter())
        .map(|(t, s)| (s.as_str(), *t))
        .collect()
});

impl Token {
    pub fn id(self) -> u32 {
        match self {
            Token::Pad => 0,
            Token::Sos => 1,
            Token::Eos => 2,
            Token::Unk => 3,
            Token::TheadOpen => 4,
            Token::TheadClose => 5,
            Token::TbodyOpen => 6,
            Token::TbodyClose => 7,
            Token::TrOpen => 8,
            Token::TrClose => 9,
            Token::TdOpen => 10,
            Token::TdClose => 11,
            Token::TdStart => 12,
            Token::TagEnd => 13,
            Token::RowSpan(s) => ROWSPAN_BASE + (s.0 - Span::MIN) as u32,
            Token::ColSpan(s) => COLSPAN_BASE + (s.0 - Span::MIN) as u32,
        }
    }

    pub fn from_id(id: u32) -> Option<Token> {
        let t = match id {
            0 => Token::Pad,
            1 => Token::Sos,
            2 => Token::Eos,
            3 => Token::Unk,
            4 => Token::TheadOpen,
            5 => Token::TheadClose,
            6 => Token::TbodyOpen,
            7 => Token::TbodyClose,
            8 => Token::TrOpen,
            9 => Token::TrClose,
            10 => Token::TdOpen,
            11 => Token::TdClose,
            12 => Token::TdStart,
            13 => Token::TagEnd,
            i if (ROWSPAN_BASE..COLSPAN_BASE).contains(&i) => {
                Token::RowSpan(Span((i - ROWSPAN_BASE) as u8 + Span::MIN))
            }
            i if (COLSPAN_BASE..VOCAB_SIZE as u32).contains(&i) => {
                Token::ColSpan(Span((i - COLSPAN_BASE) as u8 + Span::MIN))
            }
            _ => return None,
        };
        Some(t)
    }

    pub fn from_surface(surface: &str) -> Option<Token> {
        BY_SURFACE.get(surface).copied()
    }

    /// Surface form as it appears in annotation token lists. Span attributes carry
    /// a leading space.
    pub fn surface(self) -> &'static str {
        SURFACES[self.id() as usize].as_str()
    }

    fn render_surface(self) -> String {
        match self {
            Token::Pad => "<pad>".into(),
            Token::Sos => "<sos>".into(),
            Token::Eos => "<eos>".into(),
            Token::Unk => "<unk>".into(),
            Token::TheadOpen => "<thead>".into(),
            Token::TheadClose => "</thead>".into(),
            Token::TbodyOpen => "<tbody>".into(),
            Token::TbodyClose => "</tbody>".into(),
            Token::TrOpen => "<tr>".into(),
            Token::TrClose => "</tr>".into(),
            Token::TdOpen => "<td>".into(),
            Token::TdClose => "</td>".into(),
            Token::TdStart => "<td".into(),
            Token::TagEnd => ">".into(),
            Token::RowSpan(s) => format!(" rowspan=\"{s}\""),
            Token::ColSpan(s) => format!(" colspan=\"{s}\""),
        }
    }

    pub fn is_special(self) -> bool {
        matches!(self, Token::Pad | Token::Sos | Token::Eos | Token::Unk)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// The full vocabulary in id order.
pub fn vocabulary() -> &'static [Token] {
    &VOCAB
}

/// Text manifest of the id table, one `id<TAB>surface` line per token after a
/// version header.
pub fn vocabulary_manifest() -> String {
    let mut out = format!("# tsrlab structure vocabulary v{MANIFEST_VERSION}\n");
    for t in vocabulary() {
        out.push_str(&format!("{}\t{}\n", t.id(), t.surface()));
    }
    out
}

/// Hex SHA-256 of [`vocabulary_manifest`].
pub fn vocabulary_hash() -> String {
    let digest = Sha256::digest(vocabulary_manifest().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
