use super::token::{vocabulary, Token};
use super::GrammarError;

/// Maximum decoder sequence length used throughout the model.
pub const DEFAULT_MAX_LEN: usize = 512;

/// An ordered token list that never exceeds its length bound.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    tokens: Vec<Token>,
    bound: usize,
}

impl TokenSequence {
    pub fn new(tokens: Vec<Token>) -> Result<Self, GrammarError> {
        Self::with_bound(tokens, DEFAULT_MAX_LEN)
    }

    pub fn with_bound(tokens: Vec<Token>, bound: usize) -> Result<Self, GrammarError> {
        if tokens.len() > bound {
            return Err(GrammarError::LengthExceeded {
                len: tokens.len(),
                bound,
            });
        }
        Ok(Self { tokens, bound })
    }

    /// A sequence with no practical length bound, for evaluating long annotations.
    pub fn unbounded(tokens: Vec<Token>) -> Self {
        Self {
            tokens,
            bound: usize::MAX,
        }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.id()).collect()
    }

    pub fn into_tokens(self) -> Vec<Token> {
        self.tokens
    }
}

fn map_surfaces<S: AsRef<str>>(raw: &[S]) -> Vec<Token> {
    raw.iter()
        .map(|s| Token::from_surface(s.as_ref()).unwrap_or(Token::Unk))
        .collect()
}

/// Maps tag strings to tokens. Anything outside the vocabulary becomes `<unk>`.
pub fn tokenize<S: AsRef<str>>(raw: &[S]) -> Result<TokenSequence, GrammarError> {
    tokenize_with_bound(raw, DEFAULT_MAX_LEN)
}

pub fn tokenize_with_bound<S: AsRef<str>>(raw: &[S], bound: usize) -> Result<TokenSequence, GrammarError> {
    TokenSequence::with_bound(map_surfaces(raw), bound)
}

/// Canonical structure string: surfaces concatenated, `<sos>`/`<eos>`/`<pad>` dropped.
pub fn detokenize(seq: &TokenSequence) -> Result<String, GrammarError> {
    let mut out = String::new();
    for (pos, t) in seq.tokens().iter().enumerate() {
        match t {
            Token::Unk => return Err(GrammarError::ContainsUnknown { pos }),
            Token::Sos | Token::Eos | Token::Pad => {}
            t => out.push_str(t.surface()),
        }
    }
    Ok(out)
}

/// Splits a canonical structure string into surface strings by longest match.
///
/// Runs of characters that start no known surface are returned as a single
/// piece, which [`tokenize`] then maps to `<unk>`.
pub fn split_structure(s: &str) -> Vec<String> {
    let mut pieces = Vec::new();
    let mut unknown = String::new();
    let mut rest = s;
    while !rest.is_empty() {
        let best = vocabulary()
            .iter()
            .map(|t| t.surface())
            .filter(|surf| rest.starts_with(surf))
            .max_by_key(|surf| surf.len());
        match best {
            Some(surf) => {
                if !unknown.is_empty() {
                    pieces.push(std::mem::take(&mut unknown));
                }
                pieces.push(surf.to_string());
                rest = &rest[surf.len()..];
            }
            None => {
                let ch = rest.chars().next().expect("rest is non-empty");
                unknown.push(ch);
                rest = &rest[ch.len_utf8()..];
            }
        }
    }
    if !unknown.is_empty() {
        pieces.push(unknown);
    }
    pieces
}

/// Tokenizes a canonical structure string.
pub fn tokenize_str(s: &str, bound: usize) -> Result<TokenSequence, GrammarError> {
    tokenize_with_bound(&split_structure(s), bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::Span;

    #[test]
    fn plain_row_tokenizes_without_unknowns() {
        let seq = tokenize(&["<tr>", "<td>", "</td>", "</tr>"]).unwrap();
        assert_eq!(seq.len(), 4);
        assert!(!seq.tokens().contains(&Token::Unk));
    }

    #[test]
    fn spanning_cell_opening() {
        let seq = tokenize(&["<td", " colspan=\"6\"", ">"]).unwrap();
        assert_eq!(
            seq.tokens(),
            &[
                Token::TdStart,
                Token::ColSpan(Span::new(6).unwrap()),
                Token::TagEnd
            ]
        );
    }

    #[test]
    fn oversized_span_is_unknown() {
        let seq = tokenize(&["<td", " colspan=\"12\"", ">"]).unwrap();
        assert_eq!(seq.tokens()[1], Token::Unk);
    }

    #[test]
    fn length_bound_enforced() {
        let raw = vec!["<td>"; 513];
        assert!(matches!(
            tokenize(&raw),
            Err(GrammarError::LengthExceeded { len: 513, bound: 512 })
        ));
        assert!(tokenize(&raw[..512]).is_ok());
    }

    #[test]
    fn detokenize_examples() {
        let seq = tokenize(&["<tr>", "<td>", "</td>", "</tr>"]).unwrap();
        assert_eq!(detokenize(&seq).unwrap(), "<tr><td></td></tr>");
        assert_eq!(detokenize(&TokenSequence::new(vec![]).unwrap()).unwrap(), "");
        let seq = TokenSequence::new(vec![Token::Sos, Token::TdOpen, Token::TdClose, Token::Eos]).unwrap();
        assert_eq!(detokenize(&seq).unwrap(), "<td></td>");
    }

    #[test]
    fn detokenize_rejects_unknown() {
        let seq = TokenSequence::new(vec![Token::TdOpen, Token::Unk]).unwrap();
        assert!(matches!(
            detokenize(&seq),
            Err(GrammarError::ContainsUnknown { pos: 1 })
        ));
    }

    #[test]
    fn split_prefers_longest_surface() {
        assert_eq!(
            split_structure("<td><td colspan=\"3\"></td>"),
            vec!["<td>", "<td", " colspan=\"3\"", ">", "</td>"]
        );
        assert_eq!(split_structure("<tr>junk</tr>"), vec!["<tr>", "junk", "</tr>"]);
    }
}
