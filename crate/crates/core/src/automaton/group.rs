use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, RwLock};

use super::recursion::{invert_word, reduce, GenSym, WreathRecursion};
use super::table::{ElemId, ElementTable, LocalState, Ref, IDENTITY};
use super::word_closure::{formal_closure, formal_step, words_equal};
use crate::error::{Error, Result};

pub const DEFAULT_STATE_CAP: usize = 100_000;
pub const DEFAULT_MAX_ROUNDS: usize = 50;

/// A group element: its canonical id plus one representative word.
#[derive(Clone, Debug)]
pub struct Element {
    pub id: ElemId,
    pub word: Vec<GenSym>,
}

impl PartialEq for Element {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Element {}

impl Hash for Element {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl Element {
    pub fn is_identity(&self) -> bool {
        self.id == IDENTITY
    }
}

pub struct Group {
    rec: WreathRecursion,
    table: RwLock<ElementTable>,
    gens: Vec<ElemId>,
    state_cap: usize,
}

impl Group {
    pub fn new(rec: WreathRecursion) -> Result<Self> {
        Self::with_state_cap(rec, DEFAULT_STATE_CAP)
    }

    pub fn with_state_cap(rec: WreathRecursion, state_cap: usize) -> Result<Self> {
        let d = rec.degree();
        let mut table = ElementTable::new(d, state_cap);
        let start: Vec<Vec<GenSym>> = (0..rec.generators().len())
            .flat_map(|i| [vec![GenSym::new(i)], vec![GenSym::new(i).inverse()]])
            .collect();
        let aut = formal_closure(&rec, &start, state_cap)?;
        let local: Vec<LocalState> = aut
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if w.is_empty() {
                    // The empty word is the identity.
                    LocalState { perm: (0..d as u8).collect(), rest: vec![Ref::Known(IDENTITY); d] }
                } else {
                    LocalState {
                        perm: aut.perms[i].clone(),
                        rest: aut.succ[i].iter().map(|&j| Ref::Local(j)).collect(),
                    }
                }
            })
            .collect();
        let ids = table.intern(&local)?;
        let gens = ids[..start.len()].to_vec();
        Ok(Group { rec, table: RwLock::new(table), gens, state_cap })
    }

    pub fn recursion(&self) -> &WreathRecursion {
        &self.rec
    }

    pub fn degree(&self) -> usize {
        self.rec.degree()
    }

    pub fn state_cap(&self) -> usize {
        self.state_cap
    }

    pub fn table_size(&self) -> usize {
        self.read().len()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, ElementTable> {
        self.table.read().expect("element table lock poisoned")
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, ElementTable> {
        self.table.write().expect("element table lock poisoned")
    }

    pub fn identity(&self) -> Element {
        Element { id: IDENTITY, word: Vec::new() }
    }

    pub fn generator(&self, s: GenSym) -> Result<Element> {
        if s.index >= self.rec.generators().len() {
            return Err(Error::UndeclaredGenerator(format!("#{}", s.index)));
        }
        Ok(Element { id: self.gens[2 * s.index + s.inverted as usize], word: vec![s] })
    }

    /// `S ∪ S^{-1}`: positive generators first, then their inverses.
    pub fn symmetric_generators(&self) -> Vec<Element> {
        let n = self.rec.generators().len();
        let pos = (0..n).map(GenSym::new);
        let neg = (0..n).map(|i| GenSym::new(i).inverse());
        pos.chain(neg).map(|s| self.generator(s).unwrap()).collect()
    }

    pub fn element(&self, word: &[GenSym]) -> Result<Element> {
        let mut id = IDENTITY;
        for &s in word {
            let g = self.generator(s)?;
            id = self.write().product(id, g.id)?;
        }
        Ok(Element { id, word: reduce(word) })
    }

    pub fn parse(&self, text: &str) -> Result<Element> {
        self.element(&self.rec.parse_word(text)?)
    }

    pub fn format(&self, g: &Element) -> String {
        if g.word.is_empty() {
            "e".to_string()
        } else {
            self.rec.format_word(&g.word)
        }
    }

    fn check_word(&self, w: &[u8]) -> Result<()> {
        let d = self.degree();
        match w.iter().find(|&&x| x as usize >= d) {
            Some(&x) => Err(Error::LetterOutOfRange { letter: x as usize, degree: d }),
            None => Ok(()),
        }
    }

    pub fn act(&self, g: &Element, w: &[u8]) -> Result<Vec<u8>> {
        self.check_word(w)?;
        Ok(self.read().act(g.id, w))
    }

    pub fn act_id(&self, g: ElemId, w: &[u8]) -> Vec<u8> {
        self.read().act(g, w)
    }

    pub fn restrict(&self, g: &Element, v: &[u8]) -> Result<Element> {
        self.check_word(v)?;
        let id = self.read().restrict(g.id, v);
        let mut word = g.word.clone();
        for &x in v {
            word = formal_step(&self.rec, &word, x).1;
        }
        Ok(Element { id, word })
    }

    pub fn restrict_id(&self, g: ElemId, v: &[u8]) -> ElemId {
        self.read().restrict(g, v)
    }

    /// The element acting as `g` then `h`.
    pub fn product(&self, g: &Element, h: &Element) -> Result<Element> {
        let id = self.write().product(g.id, h.id)?;
        let mut word = g.word.clone();
        word.extend_from_slice(&h.word);
        Ok(Element { id, word: reduce(&word) })
    }

    pub fn product_id(&self, g: ElemId, h: ElemId) -> Result<ElemId> {
        self.write().product(g, h)
    }

    pub fn inverse(&self, g: &Element) -> Result<Element> {
        let id = self.write().inverse(g.id)?;
        Ok(Element { id, word: invert_word(&g.word) })
    }

    /// Equality through the formal-word closure of `g h^{-1}`, independent
    /// of the element table.
    pub fn equal(&self, g: &Element, h: &Element, state_cap: usize) -> Result<bool> {
        words_equal(&self.rec, &g.word, &h.word, state_cap)
    }

    /// Smallest superset closed under restriction by every letter, in BFS
    /// order with each element carrying a formal restriction word.
    pub fn close_under_restrictions(&self, set: &[Element]) -> Result<Vec<Element>> {
        let d = self.degree() as u8;
        let mut seen: HashSet<ElemId> = HashSet::new();
        let mut out: Vec<Element> = Vec::new();
        let mut queue: VecDeque<Element> = VecDeque::new();
        for g in set {
            if seen.insert(g.id) {
                queue.push_back(g.clone());
            }
        }
        while let Some(g) = queue.pop_front() {
            for x in 0..d {
                let id = self.read().restrict_letter(g.id, x);
                if seen.insert(id) {
                    if seen.len() > self.state_cap {
                        return Err(Error::StateCapExceeded { cap: self.state_cap });
                    }
                    let word = formal_step(&self.rec, &g.word, x).1;
                    queue.push_back(Element { id, word });
                }
            }
            out.push(g);
        }
        Ok(out)
    }

    /// Elements of `g`'s restriction closure that recur at arbitrarily deep
    /// levels: those reachable from a cycle.
    pub fn recurrent_part(&self, g: &Element) -> Result<Vec<Element>> {
        let closure = self.close_under_restrictions(std::slice::from_ref(g))?;
        let ids: Vec<ElemId> = closure.iter().map(|e| e.id).collect();
        let keep = recurrent_ids(&self.read(), &ids);
        Ok(closure.into_iter().filter(|e| keep.contains(&e.id)).collect())
    }

    /// Fixpoint computation of the nucleus. Starts from the restriction
    /// closure of `S ∪ S^{-1} ∪ {e}` and adjoins the recurrent parts of
    /// pairwise products until nothing new appears.
    pub fn compute_nucleus(&self, max_rounds: usize) -> Result<Nucleus> {
        let mut start = vec![self.identity()];
        start.extend(self.symmetric_generators());
        let mut members = self.close_under_restrictions(&start)?;
        let mut member_ids: HashSet<ElemId> = members.iter().map(|e| e.id).collect();
        let mut known = member_ids.clone();
        let mut frontier_from = 0;
        let mut stable = false;
        for round in 0..max_rounds {
            let mut fresh: Vec<Element> = Vec::new();
            let n = members.len();
            // Pairwise products of a growing candidate set are the expensive
            // part of a divergent run; stop once they outnumber the state cap.
            if n.saturating_mul(n) > self.state_cap {
                return Err(Error::NotContractingWithinBound { rounds: round });
            }
            for i in 0..n {
                for j in 0..n {
                    if i < frontier_from && j < frontier_from {
                        continue;
                    }
                    let p = self.product(&members[i], &members[j])?;
                    for r in self.recurrent_part(&p)? {
                        if known.insert(r.id) {
                            let inv = self.inverse(&r)?;
                            fresh.push(r);
                            if known.insert(inv.id) {
                                fresh.push(inv);
                            }
                        }
                    }
                }
            }
            if fresh.is_empty() {
                stable = true;
                break;
            }
            frontier_from = n;
            let closed = self.close_under_restrictions(&fresh)?;
            for e in closed {
                known.insert(e.id);
                if member_ids.insert(e.id) {
                    members.push(e);
                }
            }
        }
        if !stable {
            return Err(Error::NotContractingWithinBound { rounds: max_rounds });
        }
        let ids: Vec<ElemId> = members.iter().map(|e| e.id).collect();
        let keep = recurrent_ids(&self.read(), &ids);
        let elements: Vec<Element> = members.into_iter().filter(|e| keep.contains(&e.id)).collect();
        Ok(Nucleus::new(elements))
    }

    /// Layer sets of restrictions `{g|_v : |v| = i}` until they fall into
    /// `target`; returns the first such depth.
    pub fn depth_into(&self, g: ElemId, target: &HashSet<ElemId>) -> Result<usize> {
        let t = self.read();
        let d = t.degree() as u8;
        let mut layer: BTreeSet<ElemId> = BTreeSet::from([g]);
        let mut seen: HashSet<Vec<ElemId>> = HashSet::new();
        for depth in 0.. {
            if layer.iter().all(|h| target.contains(h)) {
                return Ok(depth);
            }
            if !seen.insert(layer.iter().copied().collect()) {
                return Err(Error::NotContractingWithinBound { rounds: depth });
            }
            layer = layer.iter().flat_map(|&h| (0..d).map(move |x| (h, x))).map(|(h, x)| t.restrict_letter(h, x)).collect();
        }
        unreachable!()
    }
}

/// States among `ids` (a restriction-closed set) that are reachable from a
/// cycle of the restriction graph.
fn recurrent_ids(table: &ElementTable, ids: &[ElemId]) -> HashSet<ElemId> {
    let index: HashMap<ElemId, usize> = ids.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let n = ids.len();
    let adj: Vec<Vec<usize>> = ids
        .iter()
        .map(|&g| {
            let mut v: Vec<usize> = table.rest(g).iter().map(|h| index[h]).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    // A vertex lies on a cycle iff it can reach itself.
    let mut on_cycle = vec![false; n];
    for s in 0..n {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = adj[s].clone();
        while let Some(u) = stack.pop() {
            if u == s {
                on_cycle[s] = true;
                break;
            }
            if !std::mem::replace(&mut seen[u], true) {
                stack.extend(adj[u].iter().copied());
            }
        }
    }
    let mut keep = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&i| on_cycle[i]).collect();
    while let Some(u) = stack.pop() {
        if !std::mem::replace(&mut keep[u], true) {
            stack.extend(adj[u].iter().copied());
        }
    }
    (0..n).filter(|&i| keep[i]).map(|i| ids[i]).collect()
}

fn word_order(a: &Element, b: &Element) -> std::cmp::Ordering {
    (a.word.len(), &a.word).cmp(&(b.word.len(), &b.word))
}

#[derive(Clone, Debug)]
pub struct Nucleus {
    pub elements: Vec<Element>,
    ids: HashSet<ElemId>,
}

impl Nucleus {
    fn new(mut elements: Vec<Element>) -> Self {
        elements.sort_by(word_order);
        let ids = elements.iter().map(|e| e.id).collect();
        Nucleus { elements, ids }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, id: ElemId) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> &HashSet<ElemId> {
        &self.ids
    }
}

/// A symmetric generating set closed under restriction and containing the
/// nucleus: `closure(S ∪ S^{-1}) ∪ 𝒩` without the identity.
#[derive(Clone, Debug)]
pub struct GoodGenerators {
    pub elements: Vec<Element>,
    pub names: Vec<String>,
    /// `inverse[i]` is the position of the inverse of element `i`.
    pub inverse: Vec<usize>,
}

impl GoodGenerators {
    pub fn new(group: &Group, nucleus: &Nucleus) -> Result<Self> {
        let mut start = group.symmetric_generators();
        start.extend(nucleus.elements.iter().cloned());
        let closed = group.close_under_restrictions(&start)?;
        let mut best: HashMap<ElemId, Element> = HashMap::new();
        for e in closed.into_iter().filter(|e| !e.is_identity()) {
            match best.get(&e.id) {
                Some(prev) if word_order(prev, &e).is_le() => {}
                _ => {
                    best.insert(e.id, e);
                }
            }
        }
        let mut elements: Vec<Element> = best.into_values().collect();
        elements.sort_by(word_order);
        let pos: HashMap<ElemId, usize> = elements.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        let mut inverse = Vec::with_capacity(elements.len());
        for e in &elements {
            let inv = group.inverse(e)?;
            let j = *pos
                .get(&inv.id)
                .ok_or_else(|| Error::InvalidGroup("generating set is not symmetric".into()))?;
            inverse.push(j);
        }
        let names = elements.iter().map(|e| group.format(e)).collect();
        Ok(GoodGenerators { elements, names, inverse })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Positions of one representative per inverse pair (involutions included).
    pub fn pair_representatives(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.inverse[i] >= i).collect()
    }
}

/// Flat Mealy automaton of the good generating set and the identity, for
/// fast actions on words. State 0 is the identity, state `i + 1` is
/// generator `i`.
#[derive(Clone, Debug)]
pub struct GeneratorAutomaton {
    degree: usize,
    perm: Vec<u8>,
    rest: Vec<u32>,
}

impl GeneratorAutomaton {
    fn new(group: &Group, gens: &GoodGenerators) -> Self {
        let d = group.degree();
        let table = group.read();
        let mut local: HashMap<ElemId, u32> = HashMap::from([(IDENTITY, 0)]);
        for (i, e) in gens.elements.iter().enumerate() {
            local.insert(e.id, i as u32 + 1);
        }
        let mut perm = Vec::with_capacity((gens.len() + 1) * d);
        let mut rest = Vec::with_capacity((gens.len() + 1) * d);
        let states = std::iter::once(IDENTITY).chain(gens.elements.iter().map(|e| e.id));
        for g in states {
            perm.extend_from_slice(table.perm(g));
            rest.extend(table.rest(g).iter().map(|h| local[h]));
        }
        GeneratorAutomaton { degree: d, perm, rest }
    }

    /// Number of states: the identity plus one per generator.
    pub fn state_count(&self) -> usize {
        self.perm.len() / self.degree
    }

    /// Image of `x` and the next state, for automaton state `state`.
    #[inline]
    pub fn step(&self, state: usize, x: u8) -> (u8, usize) {
        let k = state * self.degree + x as usize;
        (self.perm[k], self.rest[k] as usize)
    }

    /// Image of `w` under generator `s` (an index into the generating set).
    #[inline]
    pub fn act(&self, s: usize, w: &[u8], out: &mut Vec<u8>) {
        out.clear();
        let mut state = s + 1;
        for (i, &x) in w.iter().enumerate() {
            if state == 0 {
                out.extend_from_slice(&w[i..]);
                return;
            }
            let k = state * self.degree + x as usize;
            out.push(self.perm[k]);
            state = self.rest[k] as usize;
        }
    }

    /// Applies `s` in place.
    #[inline]
    pub fn act_in_place(&self, s: usize, w: &mut [u8]) {
        let mut state = s + 1;
        for x in w.iter_mut() {
            if state == 0 {
                return;
            }
            let k = state * self.degree + *x as usize;
            *x = self.perm[k];
            state = self.rest[k] as usize;
        }
    }
}

/// A contracting group together with its nucleus, its good generating set
/// and cached magic levels.
pub struct Structure {
    pub group: Group,
    pub nucleus: Nucleus,
    pub gens: GoodGenerators,
    automaton: GeneratorAutomaton,
    magic_cache: Mutex<HashMap<usize, usize>>,
    ball_budget: usize,
}

pub const DEFAULT_BALL_BUDGET: usize = 30_000;

impl Structure {
    pub fn new(rec: WreathRecursion) -> Result<Self> {
        Self::with_limits(rec, DEFAULT_STATE_CAP, DEFAULT_MAX_ROUNDS)
    }

    pub fn with_limits(rec: WreathRecursion, state_cap: usize, max_rounds: usize) -> Result<Self> {
        let group = Group::with_state_cap(rec, state_cap)?;
        let nucleus = group.compute_nucleus(max_rounds)?;
        let gens = GoodGenerators::new(&group, &nucleus)?;
        let automaton = GeneratorAutomaton::new(&group, &gens);
        Ok(Structure {
            group,
            nucleus,
            gens,
            automaton,
            magic_cache: Mutex::new(HashMap::new()),
            ball_budget: DEFAULT_BALL_BUDGET,
        })
    }

    pub fn degree(&self) -> usize {
        self.group.degree()
    }

    pub fn automaton(&self) -> &GeneratorAutomaton {
        &self.automaton
    }

    /// Distinct elements of word norm at most `radius` with their norms, in
    /// breadth-first order.
    pub fn group_ball(&self, radius: usize) -> Result<Vec<(Element, usize)>> {
        self.ball_within(radius, usize::MAX)?.ok_or(Error::StateCapExceeded { cap: usize::MAX })
    }

    /// Like [`Self::group_ball`] but gives up (returns `None`) once more than
    /// `budget` elements are found.
    pub fn ball_within(&self, radius: usize, budget: usize) -> Result<Option<Vec<(Element, usize)>>> {
        let mut seen: HashSet<ElemId> = HashSet::from([IDENTITY]);
        let mut ball = vec![(self.group.identity(), 0usize)];
        let mut start = 0;
        for r in 1..=radius {
            let end = ball.len();
            for i in start..end {
                for s in &self.gens.elements {
                    let g = self.group.product(&ball[i].0, s)?;
                    if seen.insert(g.id) {
                        ball.push((g, r));
                        if ball.len() > budget {
                            return Ok(None);
                        }
                    }
                }
            }
            start = end;
        }
        Ok(Some(ball))
    }

    /// Depth after which all restrictions of `g` lie in the nucleus.
    pub fn element_magic_level(&self, g: ElemId) -> Result<usize> {
        self.group.depth_into(g, self.nucleus.ids())
    }

    /// Exact `m(L)`: the largest element magic level over the ball of radius `L`.
    pub fn magic_level(&self, radius: usize) -> Result<usize> {
        if let Some(&m) = self.magic_cache.lock().unwrap().get(&radius) {
            return Ok(m);
        }
        let mut m = 0;
        for (g, _) in self.group_ball(radius)? {
            m = m.max(self.element_magic_level(g.id)?);
        }
        self.magic_cache.lock().unwrap().insert(radius, m);
        Ok(m)
    }

    /// `max m(n1 n2)` over pairs of nucleus elements.
    pub fn nucleus_square_level(&self) -> Result<usize> {
        let mut m = 0;
        for a in &self.nucleus.elements {
            for b in &self.nucleus.elements {
                let p = self.group.product_id(a.id, b.id)?;
                m = m.max(self.element_magic_level(p)?);
            }
        }
        Ok(m)
    }

    /// An upper bound for `m(L)`. Exact when the ball fits the budget;
    /// otherwise a norm-`L` element splits as a product of two elements of
    /// norm at most `⌈L/2⌉`, whose restrictions at depth `m(⌈L/2⌉)` are
    /// nucleus elements, so `m(L) ≤ m(⌈L/2⌉) + max m(n1 n2)`.
    pub fn magic_level_bound(&self, radius: usize) -> Result<(usize, bool)> {
        if let Some(&m) = self.magic_cache.lock().unwrap().get(&radius) {
            return Ok((m, true));
        }
        if let Some(ball) = self.ball_within(radius, self.ball_budget)? {
            let mut m = 0;
            for (g, _) in ball {
                m = m.max(self.element_magic_level(g.id)?);
            }
            self.magic_cache.lock().unwrap().insert(radius, m);
            return Ok((m, true));
        }
        let (half, _) = self.magic_level_bound(radius.div_ceil(2))?;
        Ok((half + self.nucleus_square_level()?, false))
    }
}
