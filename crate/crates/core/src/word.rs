//! Words over the alphabet `{0, .., d-1}`.
//!
//! A word doubles as a vertex of the self-similarity complex: its level is
//! its length, the root is the empty word. The group acts on the leftmost
//! letter first. Vertical edges prepend a letter (`w -- xw`), so the vertex
//! below `xw` is `w` and the cone over `v` is the set of words ending in `v`.
//! The shift map `F` deletes the last letter.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const DIGITS: &[u8] = b"0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

pub type Vertex = Word;

impl Word {
    pub fn root() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<u8> {
        self.0
    }

    /// Length of the word, i.e. the level of the vertex.
    pub fn level(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Removes the first `k` letters: the vertex `k` levels below on the
    /// vertical geodesic to the root.
    pub fn push_down(&self, k: usize) -> Result<Word> {
        if k > self.0.len() {
            return Err(Error::KTooLarge { k, level: self.0.len() });
        }
        Ok(Word(self.0[k..].to_vec()))
    }

    /// `F^k`: deletes the last `k` letters.
    pub fn shift(&self, k: usize) -> Result<Word> {
        if k > self.0.len() {
            return Err(Error::KTooLarge { k, level: self.0.len() });
        }
        Ok(Word(self.0[..self.0.len() - k].to_vec()))
    }

    pub fn prepend(&self, letter: u8) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(letter);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    pub fn concat(&self, tail: &[u8]) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(tail);
        Word(v)
    }

    /// True iff `suffix` is a suffix of this word, i.e. this vertex lies in
    /// the cone over `suffix`.
    pub fn has_suffix(&self, suffix: &Word) -> bool {
        self.0.ends_with(&suffix.0)
    }

    pub fn check_alphabet(&self, degree: usize) -> Result<()> {
        match self.0.iter().find(|&&x| x as usize >= degree) {
            Some(&x) => Err(Error::LetterOutOfRange { letter: x as usize, degree }),
            None => Ok(()),
        }
    }

    /// Parses a digit string such as `"0110"`; letters above 9 use `a..z`.
    pub fn parse(s: &str) -> Result<Word> {
        s.bytes()
            .map(|b| {
                DIGITS
                    .iter()
                    .position(|&c| c == b.to_ascii_lowercase())
                    .map(|p| p as u8)
                    .ok_or_else(|| Error::InvalidRay(s.to_string()))
            })
            .collect::<Result<Vec<u8>>>()
            .map(Word)
    }

    /// Index of the word among `X^n` with the leftmost letter least significant.
    pub fn index(&self, degree: usize) -> usize {
        self.0.iter().rev().fold(0usize, |acc, &x| acc * degree + x as usize)
    }

    pub fn from_index(mut index: usize, level: usize, degree: usize) -> Word {
        let mut v = Vec::with_capacity(level);
        for _ in 0..level {
            v.push((index % degree) as u8);
            index /= degree;
        }
        Word(v)
    }

    /// All words of length `level`, in index order.
    pub fn all(level: usize, degree: usize) -> impl Iterator<Item = Word> {
        let count = degree.pow(level as u32);
        (0..count).map(move |i| Word::from_index(i, level, degree))
    }
}

impl From<Vec<u8>> for Word {
    fn from(v: Vec<u8>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for &x in &self.0 {
            let c = DIGITS.get(x as usize).copied().unwrap_or(b'?');
            write!(f, "{}", c as char)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({self})")
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let text: String = self.0.iter().map(|&x| DIGITS[x as usize] as char).collect();
        s.serialize_str(&text)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_down_removes_prefix() {
        let w = Word::parse("011").unwrap();
        assert_eq!(w.push_down(1).unwrap(), Word::parse("11").unwrap());
        assert_eq!(w.push_down(3).unwrap(), Word::root());
        assert_eq!(Word::parse("0101").unwrap().push_down(2).unwrap(), Word::parse("01").unwrap());
        assert_eq!(w.push_down(0).unwrap(), w);
        assert!(matches!(w.push_down(4), Err(Error::KTooLarge { k: 4, level: 3 })));
    }

    #[test]
    fn shift_removes_suffix() {
        let w = Word::parse("0110").unwrap();
        assert_eq!(w.shift(1).unwrap(), Word::parse("011").unwrap());
        assert!(w.shift(5).is_err());
    }

    #[test]
    fn index_round_trip_is_lsb_first() {
        assert_eq!(Word::parse("10").unwrap().index(2), 1);
        assert_eq!(Word::parse("01").unwrap().index(2), 2);
        for i in 0..27 {
            assert_eq!(Word::from_index(i, 3, 3).index(3), i);
        }
    }

    #[test]
    fn display_of_root() {
        assert_eq!(Word::root().to_string(), "ε");
        assert_eq!(Word::parse("012").unwrap().to_string(), "012");
    }
}
