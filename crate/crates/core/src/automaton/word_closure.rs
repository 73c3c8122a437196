//! Formal-word automata: the states are freely reduced words in generator
//! symbols and the transitions are read directly off the recursion. This is
//! how generators get interned, and it gives an equality test that does not
//! depend on the element table.

use std::collections::HashMap;

use super::recursion::{invert_word, push_reduced, reduce, GenSym, WreathRecursion};
use crate::error::{Error, Result};

/// Image of letter `x` under `word` and the formal restriction `word|_x`.
pub fn formal_step(rec: &WreathRecursion, word: &[GenSym], x: u8) -> (u8, Vec<GenSym>) {
    let mut y = x;
    let mut out = Vec::new();
    for &s in word {
        for r in rec.restriction_word(s, y) {
            push_reduced(&mut out, r);
        }
        y = rec.apply_letter(s, y);
    }
    (y, out)
}

pub struct FormalAutomaton {
    pub words: Vec<Vec<GenSym>>,
    pub perms: Vec<Vec<u8>>,
    /// `succ[i][x]` is the index of `words[i]|_x`.
    pub succ: Vec<Vec<usize>>,
}

/// Restriction closure of the given words, up to `state_cap` states.
pub fn formal_closure(
    rec: &WreathRecursion,
    start: &[Vec<GenSym>],
    state_cap: usize,
) -> Result<FormalAutomaton> {
    let d = rec.degree();
    let mut index: HashMap<Vec<GenSym>, usize> = HashMap::new();
    let mut words: Vec<Vec<GenSym>> = Vec::new();
    for w in start {
        let w = reduce(w);
        if !index.contains_key(&w) {
            index.insert(w.clone(), words.len());
            words.push(w);
        }
    }
    let mut perms = Vec::new();
    let mut succ = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let mut perm = Vec::with_capacity(d);
        let mut next = Vec::with_capacity(d);
        for x in 0..d as u8 {
            let (y, r) = formal_step(rec, &words[i], x);
            perm.push(y);
            let j = match index.get(&r) {
                Some(&j) => j,
                None => {
                    if words.len() >= state_cap {
                        return Err(Error::StateCapExceeded { cap: state_cap });
                    }
                    index.insert(r.clone(), words.len());
                    words.push(r);
                    words.len() - 1
                }
            };
            next.push(j);
        }
        perms.push(perm);
        succ.push(next);
        i += 1;
    }
    Ok(FormalAutomaton { words, perms, succ })
}

/// Decides whether `word` acts trivially on every finite word: the greatest
/// set of states with identity root permutation whose restrictions all stay
/// in the set.
pub fn is_trivial(rec: &WreathRecursion, word: &[GenSym], state_cap: usize) -> Result<bool> {
    let aut = formal_closure(rec, &[word.to_vec()], state_cap)?;
    let mut alive: Vec<bool> =
        aut.perms.iter().map(|p| p.iter().enumerate().all(|(x, &y)| x as u8 == y)).collect();
    loop {
        let mut changed = false;
        for i in 0..alive.len() {
            if alive[i] && aut.succ[i].iter().any(|&j| !alive[j]) {
                alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(alive[0])
}

/// `g == h` as transformations of the tree, via triviality of `g h^{-1}`.
pub fn words_equal(
    rec: &WreathRecursion,
    g: &[GenSym],
    h: &[GenSym],
    state_cap: usize,
) -> Result<bool> {
    let mut w = g.to_vec();
    w.extend(invert_word(h));
    is_trivial(rec, &w, state_cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grigorchuk() -> WreathRecursion {
        WreathRecursion::from_json(
            r#"{"alphabet": 2, "generators": [
                {"name": "a", "perm": [1, 0], "restrictions": ["", ""]},
                {"name": "b", "perm": [0, 1], "restrictions": ["a", "c"]},
                {"name": "c", "perm": [0, 1], "restrictions": ["a", "d"]},
                {"name": "d", "perm": [0, 1], "restrictions": ["", "b"]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn grigorchuk_relations() {
        let rec = grigorchuk();
        for name in ["aa", "bb", "cc", "dd", "bcd", "dcb"] {
            let w = rec.parse_word(name).unwrap();
            assert!(is_trivial(&rec, &w, 1000).unwrap(), "{name}");
        }
        for name in ["a", "b", "ab", "bc", "abab"] {
            let w = rec.parse_word(name).unwrap();
            assert!(!is_trivial(&rec, &w, 1000).unwrap(), "{name}");
        }
        // (ad)^4 = e
        let w = rec.parse_word("adadadad").unwrap();
        assert!(is_trivial(&rec, &w, 1000).unwrap());
    }

    #[test]
    fn cap_error() {
        let rec = grigorchuk();
        let w = rec.parse_word("abacabad").unwrap();
        assert!(matches!(is_trivial(&rec, &w, 2), Err(Error::StateCapExceeded { cap: 2 })));
    }
}
