//! Group definitions: permutations of the alphabet plus restriction words.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidGroup(format!("alphabet size {size} is below 2")));
        }
        if size > 36 {
            return Err(Error::InvalidGroup(format!("alphabet size {size} exceeds 36")));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }
}

/// A generator or the inverse of one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GenSym {
    pub index: usize,
    pub inverted: bool,
}

impl GenSym {
    pub fn new(index: usize) -> Self {
        GenSym { index, inverted: false }
    }

    pub fn inverse(self) -> Self {
        GenSym { index: self.index, inverted: !self.inverted }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorDef {
    pub name: String,
    pub perm: Vec<u8>,
    pub restrictions: Vec<Vec<GenSym>>,
}

/// The defining data of a self-similar group: for each generator `s`, the
/// permutation `x -> x^s` and the restriction words `s|_x`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WreathRecursion {
    alphabet: Alphabet,
    generators: Vec<GeneratorDef>,
}

#[derive(Serialize, Deserialize)]
struct RawGenerator {
    name: String,
    perm: Vec<usize>,
    restrictions: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RawRecursion {
    alphabet: usize,
    generators: Vec<RawGenerator>,
}

impl WreathRecursion {
    pub fn new(alphabet: Alphabet, generators: Vec<GeneratorDef>) -> Result<Self> {
        let rec = WreathRecursion { alphabet, generators };
        rec.validate()?;
        Ok(rec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawRecursion = serde_json::from_str(text)?;
        let alphabet = Alphabet::new(raw.alphabet)?;
        let names: Vec<String> = raw.generators.iter().map(|g| g.name.clone()).collect();
        check_names(&names)?;
        let mut generators = Vec::with_capacity(raw.generators.len());
        for g in &raw.generators {
            let mut perm = Vec::with_capacity(g.perm.len());
            for &p in &g.perm {
                if p >= alphabet.size() {
                    return Err(Error::LetterOutOfRange { letter: p, degree: alphabet.size() });
                }
                perm.push(p as u8);
            }
            let restrictions = g
                .restrictions
                .iter()
                .map(|w| parse_word(w, &names))
                .collect::<Result<Vec<_>>>()?;
            generators.push(GeneratorDef { name: g.name.clone(), perm, restrictions });
        }
        Self::new(alphabet, generators)
    }

    pub fn to_json(&self) -> String {
        let names = self.names();
        let raw = RawRecursion {
            alphabet: self.alphabet.size(),
            generators: self
                .generators
                .iter()
                .map(|g| RawGenerator {
                    name: g.name.clone(),
                    perm: g.perm.iter().map(|&p| p as usize).collect(),
                    restrictions: g.restrictions.iter().map(|w| format_word(w, &names)).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("recursion serializes")
    }

    fn validate(&self) -> Result<()> {
        let d = self.alphabet.size();
        if self.generators.is_empty() {
            return Err(Error::InvalidGroup("no generators declared".into()));
        }
        check_names(&self.names())?;
        for g in &self.generators {
            if g.perm.len() != d {
                return Err(Error::InvalidGroup(format!(
                    "generator `{}` has a permutation of length {}, expected {d}",
                    g.name,
                    g.perm.len()
                )));
            }
            let mut seen = vec![false; d];
            for &p in &g.perm {
                let p = p as usize;
                if p >= d {
                    return Err(Error::LetterOutOfRange { letter: p, degree: d });
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(Error::InvalidGroup(format!(
                        "permutation of `{}` is not a bijection",
                        g.name
                    )));
                }
            }
            if g.restrictions.len() != d {
                return Err(Error::InvalidGroup(format!(
                    "generator `{}` has {} restrictions, expected {d}",
                    g.name,
                    g.restrictions.len()
                )));
            }
            for w in &g.restrictions {
                if let Some(s) = w.iter().find(|s| s.index >= self.generators.len()) {
                    return Err(Error::UndeclaredGenerator(format!("#{}", s.index)));
                }
            }
        }
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn degree(&self) -> usize {
        self.alphabet.size()
    }

    pub fn generators(&self) -> &[GeneratorDef] {
        &self.generators
    }

    pub fn names(&self) -> Vec<String> {
        self.generators.iter().map(|g| g.name.clone()).collect()
    }

    /// Image of letter `x` under a generator symbol.
    pub fn apply_letter(&self, s: GenSym, x: u8) -> u8 {
        let perm = &self.generators[s.index].perm;
        if s.inverted {
            perm.iter().position(|&p| p == x).expect("perm is a bijection") as u8
        } else {
            perm[x as usize]
        }
    }

    /// Restriction word of a generator symbol at letter `x`. For an inverse
    /// symbol this is `(s|_{x^{s^{-1}}})^{-1}`.
    pub fn restriction_word(&self, s: GenSym, x: u8) -> Vec<GenSym> {
        let g = &self.generators[s.index];
        if s.inverted {
            let y = self.apply_letter(s, x);
            invert_word(&g.restrictions[y as usize])
        } else {
            g.restrictions[x as usize].clone()
        }
    }

    pub fn parse_word(&self, text: &str) -> Result<Vec<GenSym>> {
        parse_word(text, &self.names())
    }

    pub fn format_word(&self, word: &[GenSym]) -> String {
        format_word(word, &self.names())
    }

    /// A stable content hash of the definition, used to tag reports.
    pub fn content_hash(&self) -> String {
        crate::hash_hex(self.to_json().as_bytes())
    }
}

fn check_names(names: &[String]) -> Result<()> {
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() {
            return Err(Error::InvalidGroup("empty generator name".into()));
        }
        if n.contains('~') || n.contains(char::is_whitespace) {
            return Err(Error::InvalidGroup(format!("generator name `{n}` contains `~` or whitespace")));
        }
        if names[..i].contains(n) {
            return Err(Error::InvalidGroup(format!("generator `{n}` declared twice")));
        }
    }
    Ok(())
}

pub fn invert_word(word: &[GenSym]) -> Vec<GenSym> {
    word.iter().rev().map(|s| s.inverse()).collect()
}

/// Appends `s` to `word`, cancelling against a trailing inverse.
pub fn push_reduced(word: &mut Vec<GenSym>, s: GenSym) {
    if word.last() == Some(&s.inverse()) {
        word.pop();
    } else {
        word.push(s);
    }
}

pub fn reduce(word: &[GenSym]) -> Vec<GenSym> {
    let mut out = Vec::with_capacity(word.len());
    for &s in word {
        push_reduced(&mut out, s);
    }
    out
}

/// Parses a concatenation of generator names; `~a` is the inverse of `a`.
/// Names are matched greedily, longest first.
fn parse_word(text: &str, names: &[String]) -> Result<Vec<GenSym>> {
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(names[i].len()));
    let mut rest = text.trim();
    let mut word = Vec::new();
    while !rest.is_empty() {
        let (inverted, body) = match rest.strip_prefix('~') {
            Some(b) => (true, b),
            None => (false, rest),
        };
        let index = order
            .iter()
            .copied()
            .find(|&i| body.starts_with(names[i].as_str()))
            .ok_or_else(|| Error::UndeclaredGenerator(text.to_string()))?;
        word.push(GenSym { index, inverted });
        rest = &body[names[index].len()..];
    }
    Ok(word)
}

fn format_word(word: &[GenSym], names: &[String]) -> String {
    let mut out = String::new();
    for s in word {
        if s.inverted {
            out.push('~');
        }
        out.push_str(&names[s.index]);
    }
    out
}
