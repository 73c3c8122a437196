//! Interning of group elements as states of one global minimal Mealy
//! automaton. Two elements get the same id iff they act identically on all
//! words, because the table never holds two equivalent states.

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

pub type ElemId = u32;

pub const IDENTITY: ElemId = 0;

/// Reference from a state under construction to its restriction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ref {
    Known(ElemId),
    Local(usize),
}

#[derive(Clone, Debug)]
pub struct LocalState {
    pub perm: Vec<u8>,
    pub rest: Vec<Ref>,
}

#[derive(Debug)]
pub struct ElementTable {
    degree: usize,
    state_cap: usize,
    perms: Vec<u8>,
    rests: Vec<ElemId>,
    rows: HashMap<(Vec<u8>, Vec<ElemId>), ElemId>,
    keys: HashMap<Vec<u32>, ElemId>,
    products: HashMap<(ElemId, ElemId), ElemId>,
    inverses: HashMap<ElemId, ElemId>,
}

impl ElementTable {
    pub fn new(degree: usize, state_cap: usize) -> Self {
        let mut t = ElementTable {
            degree,
            state_cap,
            perms: Vec::new(),
            rests: Vec::new(),
            rows: HashMap::new(),
            keys: HashMap::new(),
            products: HashMap::new(),
            inverses: HashMap::new(),
        };
        let id = t.push_row((0..degree as u8).collect(), vec![IDENTITY; degree], None);
        debug_assert_eq!(id, IDENTITY);
        t.inverses.insert(IDENTITY, IDENTITY);
        t
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.perms.len() / self.degree
    }

    #[inline]
    pub fn perm(&self, g: ElemId) -> &[u8] {
        let i = g as usize * self.degree;
        &self.perms[i..i + self.degree]
    }

    #[inline]
    pub fn rest(&self, g: ElemId) -> &[ElemId] {
        let i = g as usize * self.degree;
        &self.rests[i..i + self.degree]
    }

    #[inline]
    pub fn image(&self, g: ElemId, x: u8) -> u8 {
        self.perms[g as usize * self.degree + x as usize]
    }

    #[inline]
    pub fn restrict_letter(&self, g: ElemId, x: u8) -> ElemId {
        self.rests[g as usize * self.degree + x as usize]
    }

    pub fn act(&self, mut g: ElemId, word: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(word.len());
        for &x in word {
            if g == IDENTITY {
                out.extend_from_slice(&word[out.len()..]);
                break;
            }
            out.push(self.image(g, x));
            g = self.restrict_letter(g, x);
        }
        out
    }

    pub fn restrict(&self, mut g: ElemId, word: &[u8]) -> ElemId {
        for &x in word {
            if g == IDENTITY {
                break;
            }
            g = self.restrict_letter(g, x);
        }
        g
    }

    /// All states reachable from `start` by restriction, in BFS order.
    pub fn closure(&self, start: &[ElemId]) -> Vec<ElemId> {
        let mut seen: HashMap<ElemId, ()> = HashMap::new();
        let mut order = Vec::new();
        let mut queue: VecDeque<ElemId> = VecDeque::new();
        for &g in start {
            if seen.insert(g, ()).is_none() {
                queue.push_back(g);
            }
        }
        while let Some(g) = queue.pop_front() {
            order.push(g);
            for &h in self.rest(g) {
                if seen.insert(h, ()).is_none() {
                    queue.push_back(h);
                }
            }
        }
        order
    }

    fn push_row(&mut self, perm: Vec<u8>, rest: Vec<ElemId>, key: Option<Vec<u32>>) -> ElemId {
        let id = self.len() as ElemId;
        self.perms.extend_from_slice(&perm);
        self.rests.extend_from_slice(&rest);
        self.rows.insert((perm, rest), id);
        let key = key.unwrap_or_else(|| {
            let d = self.degree;
            canonical_key(id as usize, d, |g| self.perm(g as ElemId), |g, x| {
                self.restrict_letter(g as ElemId, x as u8) as usize
            })
        });
        self.keys.insert(key, id);
        id
    }

    fn check_cap(&self, extra: usize) -> Result<()> {
        if self.len() + extra > self.state_cap {
            return Err(Error::StateCapExceeded { cap: self.state_cap });
        }
        Ok(())
    }

    /// Interns the states of a local automaton and returns their ids.
    pub fn intern(&mut self, local: &[LocalState]) -> Result<Vec<ElemId>> {
        if let Some(ids) = self.intern_acyclic(local)? {
            return Ok(ids);
        }
        self.intern_refined(local)
    }

    /// Resolves local states bottom-up by row lookup when the local
    /// restriction graph has no cycle. Returns `None` if it has one.
    fn intern_acyclic(&mut self, local: &[LocalState]) -> Result<Option<Vec<ElemId>>> {
        let n = local.len();
        let mut indeg = vec![0usize; n];
        for s in local {
            for r in &s.rest {
                if let Ref::Local(j) = r {
                    indeg[*j] += 1;
                }
            }
        }
        // Reverse topological order: process states whose successors are resolved.
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = stack.pop() {
            order.push(i);
            for r in &local[i].rest {
                if let Ref::Local(j) = r {
                    indeg[*j] -= 1;
                    if indeg[*j] == 0 {
                        stack.push(*j);
                    }
                }
            }
        }
        if order.len() < n {
            return Ok(None);
        }
        let mut ids: Vec<Option<ElemId>> = vec![None; n];
        for &i in order.iter().rev() {
            let rest: Vec<ElemId> = local[i]
                .rest
                .iter()
                .map(|r| match *r {
                    Ref::Known(id) => id,
                    Ref::Local(j) => ids[j].expect("successor resolved first"),
                })
                .collect();
            let key = (local[i].perm.clone(), rest);
            let id = match self.rows.get(&key) {
                Some(&id) => id,
                None => {
                    self.check_cap(1)?;
                    self.push_row(key.0, key.1, None)
                }
            };
            ids[i] = Some(id);
        }
        Ok(Some(ids.into_iter().map(|x| x.unwrap()).collect()))
    }

    /// Moore refinement over the local states together with every existing
    /// state they reach. Existing states are pairwise inequivalent, so each
    /// class holds at most one of them.
    fn intern_refined(&mut self, local: &[LocalState]) -> Result<Vec<ElemId>> {
        let d = self.degree;
        let n = local.len();
        let mut seeds = vec![IDENTITY];
        for s in local {
            for r in &s.rest {
                if let Ref::Known(id) = r {
                    seeds.push(*id);
                }
            }
        }
        let existing = self.closure(&seeds);
        let index_of: HashMap<ElemId, usize> =
            existing.iter().enumerate().map(|(i, &g)| (g, n + i)).collect();
        let total = n + existing.len();
        let mut succ = vec![0usize; total * d];
        let mut perms: Vec<Vec<u8>> = Vec::with_capacity(total);
        for (i, s) in local.iter().enumerate() {
            perms.push(s.perm.clone());
            for (x, r) in s.rest.iter().enumerate() {
                succ[i * d + x] = match *r {
                    Ref::Local(j) => j,
                    Ref::Known(id) => index_of[&id],
                };
            }
        }
        for (k, &g) in existing.iter().enumerate() {
            perms.push(self.perm(g).to_vec());
            for (x, h) in self.rest(g).iter().enumerate() {
                succ[(n + k) * d + x] = index_of[h];
            }
        }

        let mut class = vec![0usize; total];
        let mut count = {
            let mut ids: HashMap<&Vec<u8>, usize> = HashMap::new();
            for (i, p) in perms.iter().enumerate() {
                let next = ids.len();
                class[i] = *ids.entry(p).or_insert(next);
            }
            ids.len()
        };
        loop {
            let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
            let mut next_class = vec![0usize; total];
            for i in 0..total {
                let mut sig = Vec::with_capacity(d + 1);
                sig.push(class[i]);
                sig.extend(succ[i * d..(i + 1) * d].iter().map(|&j| class[j]));
                let next = ids.len();
                next_class[i] = *ids.entry(sig).or_insert(next);
            }
            let new_count = ids.len();
            class = next_class;
            if new_count == count {
                break;
            }
            count = new_count;
        }

        let mut class_id: Vec<Option<ElemId>> = vec![None; count];
        for (k, &g) in existing.iter().enumerate() {
            let c = class[n + k];
            debug_assert!(class_id[c].is_none(), "table is not minimal");
            class_id[c] = Some(g);
        }
        // A class without a reachable existing member can still match a
        // stored state elsewhere in the table; look those up by key.
        let mut rep = vec![usize::MAX; count];
        for i in (0..total).rev() {
            rep[class[i]] = i;
        }
        let class_key = |c: usize| {
            canonical_key(c, d, |k| &perms[rep[k]], |k, x| class[succ[rep[k] * d + x]])
        };
        let mut fresh: Vec<(usize, Vec<u32>)> = Vec::new();
        for &c in &class[..n] {
            if class_id[c].is_some() {
                continue;
            }
            let key = class_key(c);
            match self.keys.get(&key) {
                Some(&id) => class_id[c] = Some(id),
                None => {
                    class_id[c] = Some(ElemId::MAX);
                    fresh.push((c, key));
                }
            }
        }
        self.check_cap(fresh.len())?;
        let base = self.len() as ElemId;
        for (k, (c, _)) in fresh.iter().enumerate() {
            class_id[*c] = Some(base + k as ElemId);
        }
        for (c, key) in fresh {
            let i = rep[c];
            let rest: Vec<ElemId> =
                succ[i * d..(i + 1) * d].iter().map(|&j| class_id[class[j]].unwrap()).collect();
            self.push_row(perms[i].clone(), rest, Some(key));
        }
        Ok((0..n).map(|i| class_id[class[i]].unwrap()).collect())
    }

    /// The element acting as `g` followed by `h`.
    pub fn product(&mut self, g: ElemId, h: ElemId) -> Result<ElemId> {
        if g == IDENTITY {
            return Ok(h);
        }
        if h == IDENTITY {
            return Ok(g);
        }
        if let Some(&p) = self.products.get(&(g, h)) {
            return Ok(p);
        }
        let d = self.degree;
        let mut index: HashMap<(ElemId, ElemId), usize> = HashMap::new();
        let mut pairs = vec![(g, h)];
        index.insert((g, h), 0);
        let mut local: Vec<LocalState> = Vec::new();
        let mut i = 0;
        while i < pairs.len() {
            let (p, q) = pairs[i];
            let mut perm = Vec::with_capacity(d);
            let mut rest = Vec::with_capacity(d);
            for x in 0..d as u8 {
                let y = self.image(p, x);
                perm.push(self.image(q, y));
                let pair = (self.restrict_letter(p, x), self.restrict_letter(q, y));
                let r = if pair.0 == IDENTITY {
                    Ref::Known(pair.1)
                } else if pair.1 == IDENTITY {
                    Ref::Known(pair.0)
                } else if let Some(&known) = self.products.get(&pair) {
                    Ref::Known(known)
                } else if let Some(&j) = index.get(&pair) {
                    Ref::Local(j)
                } else {
                    let j = pairs.len();
                    if j > self.state_cap {
                        return Err(Error::StateCapExceeded { cap: self.state_cap });
                    }
                    index.insert(pair, j);
                    pairs.push(pair);
                    Ref::Local(j)
                };
                rest.push(r);
            }
            local.push(LocalState { perm, rest });
            i += 1;
        }
        let ids = self.intern(&local)?;
        for (pair, id) in pairs.into_iter().zip(ids.iter()) {
            self.products.insert(pair, *id);
        }
        Ok(ids[0])
    }

    pub fn inverse(&mut self, g: ElemId) -> Result<ElemId> {
        if let Some(&inv) = self.inverses.get(&g) {
            return Ok(inv);
        }
        let d = self.degree;
        let states: Vec<ElemId> =
            self.closure(&[g]).into_iter().filter(|s| !self.inverses.contains_key(s)).collect();
        let index: HashMap<ElemId, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let local: Vec<LocalState> = states
            .iter()
            .map(|&s| {
                let perm = self.perm(s);
                let mut inv_perm = vec![0u8; d];
                for (x, &y) in perm.iter().enumerate() {
                    inv_perm[y as usize] = x as u8;
                }
                // (s^{-1})|_x = (s|_{x^{s^{-1}}})^{-1}
                let rest = (0..d)
                    .map(|x| {
                        let r = self.restrict_letter(s, inv_perm[x]);
                        match index.get(&r) {
                            Some(&j) => Ref::Local(j),
                            None => Ref::Known(self.inverses[&r]),
                        }
                    })
                    .collect();
                LocalState { perm: inv_perm, rest }
            })
            .collect();
        let ids = self.intern(&local)?;
        for (&s, &inv) in states.iter().zip(ids.iter()) {
            self.inverses.insert(s, inv);
            self.inverses.insert(inv, s);
        }
        Ok(self.inverses[&g])
    }
}

/// Breadth-first numbering of the states reachable from `start` in a
/// minimal automaton, written out as (permutation, successor numbers) per
/// state. Equivalent states of minimal automata get equal keys.
fn canonical_key<'a>(
    start: usize,
    d: usize,
    perm: impl Fn(usize) -> &'a [u8],
    succ: impl Fn(usize, usize) -> usize,
) -> Vec<u32> {
    let mut number: HashMap<usize, u32> = HashMap::from([(start, 0)]);
    let mut order = vec![start];
    let mut key = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        key.extend(perm(s).iter().map(|&p| p as u32));
        for x in 0..d {
            let t = succ(s, x);
            let next = order.len() as u32;
            let k = *number.entry(t).or_insert_with(|| {
                order.push(t);
                next
            });
            key.push(k);
        }
        i += 1;
    }
    key
}
