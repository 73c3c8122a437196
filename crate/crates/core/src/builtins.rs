//! Shipped group definitions.

use crate::automaton::WreathRecursion;
use crate::error::{Error, Result};

pub const NAMES: [&str; 3] = ["odometer", "grigorchuk", "basilica"];

#[derive(Clone, Debug)]
pub struct BuiltinGroup {
    pub name: &'static str,
    pub recursion: WreathRecursion,
    pub degree: usize,
    /// Nucleus size when it is fixed by a hand computation.
    pub expected_nucleus: Option<usize>,
    pub notes: &'static str,
}

fn source(name: &str) -> Option<&'static str> {
    match name {
        "odometer" => Some(include_str!("../groups/odometer.json")),
        "grigorchuk" => Some(include_str!("../groups/grigorchuk.json")),
        "basilica" => Some(include_str!("../groups/basilica.json")),
        _ => None,
    }
}

pub fn builtin_group(name: &str) -> Result<WreathRecursion> {
    let text = source(name).ok_or_else(|| Error::UnknownName(name.to_string()))?;
    WreathRecursion::from_json(text)
}

pub fn builtin(name: &str) -> Result<BuiltinGroup> {
    let recursion = builtin_group(name)?;
    let (name, expected_nucleus, notes) = match name {
        "odometer" => ("odometer", Some(3), "a = swap with a|_0 = e, a|_1 = a; acts as +1 on binary numbers written least significant letter first"),
        "grigorchuk" => ("grigorchuk", Some(5), "a = swap; b = (a, c), c = (a, d), d = (e, b); a, b, c, d are involutions and bcd = e"),
        _ => ("basilica", None, "a = (e, b) fixing letters, b = swap with b|_0 = e, b|_1 = a"),
    };
    Ok(BuiltinGroup { name, degree: recursion.degree(), recursion, expected_nucleus, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_parse() {
        for name in NAMES {
            let b = builtin(name).unwrap();
            assert_eq!(b.degree, 2);
        }
        assert!(matches!(builtin_group("lamplighter"), Err(Error::UnknownName(_))));
    }
}
