use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the four fiber-map labels.
///
/// By convention labels `1` and `2` name the dilations (fixed points below 0
/// and above 1 respectively) and labels `3` and `4` name the contractions
/// (again fixed points below 0 and above 1). The numeric labels are what
/// appear in words, window strings, and file formats.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "char", into = "char")]
pub enum Symbol {
    /// Dilation with repelling fixed point left of 0.
    D1,
    /// Dilation with repelling fixed point right of 1.
    D2,
    /// Contraction with attracting fixed point left of 0.
    C3,
    /// Contraction with attracting fixed point right of 1.
    C4,
}

pub const ALL_SYMBOLS: [Symbol; 4] = [Symbol::D1, Symbol::D2, Symbol::C3, Symbol::C4];

impl Symbol {
    pub fn from_char(c: char) -> Result<Self> {
        match c {
            '1' => Ok(Symbol::D1),
            '2' => Ok(Symbol::D2),
            '3' => Ok(Symbol::C3),
            '4' => Ok(Symbol::C4),
            other => Err(Error::invalid(format!(
                "symbol must be one of 1,2,3,4, got {other:?}"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::D1 => '1',
            Symbol::D2 => '2',
            Symbol::C3 => '3',
            Symbol::C4 => '4',
        }
    }

    pub fn index(self) -> usize {
        match self {
            Symbol::D1 => 0,
            Symbol::D2 => 1,
            Symbol::C3 => 2,
            Symbol::C4 => 3,
        }
    }

    /// True for the dilation labels `1` and `2`.
    pub fn is_dilation(self) -> bool {
        matches!(self, Symbol::D1 | Symbol::D2)
    }
}

impl TryFrom<char> for Symbol {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        Symbol::from_char(c)
    }
}

impl From<Symbol> for char {
    fn from(s: Symbol) -> char {
        s.as_char()
    }
}

impl std::fmt::Display for Symbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A non-empty finite word over the four symbols.
///
/// Words are written and parsed as plain digit strings, e.g. `"1212"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::invalid("word must be non-empty"));
        }
        Ok(Word(symbols))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let symbols = s
            .chars()
            .map(Symbol::from_char)
            .collect::<Result<Vec<_>>>()?;
        Word::new(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Words are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn concat(parts: &[&[Symbol]]) -> Result<Word> {
        Word::new(parts.concat())
    }
}

impl std::ops::Index<usize> for Word {
    type Output = Symbol;

    fn index(&self, i: usize) -> &Symbol {
        &self.0[i]
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Word::parse(&s)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        let w = Word::parse("124331").unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(w.to_string(), "124331");
        assert_eq!(w[2], Symbol::C4);
    }

    #[test]
    fn rejects_empty_and_foreign_characters() {
        assert!(Word::parse("").is_err());
        assert!(Word::parse("105").is_err());
        assert!(Word::parse("12a").is_err());
    }

    #[test]
    fn reversal_is_an_involution() {
        let w = Word::parse("1123").unwrap();
        assert_eq!(w.reversed().to_string(), "3211");
        assert_eq!(w.reversed().reversed(), w);
    }

    #[test]
    fn serde_uses_digit_strings() {
        let w = Word::parse("31").unwrap();
        assert_eq!(serde_json::to_string(&w).unwrap(), "\"31\"");
        let back: Word = serde_json::from_str("\"31\"").unwrap();
        assert_eq!(back, w);
        assert!(serde_json::from_str::<Word>("\"\"").is_err());
    }
}
