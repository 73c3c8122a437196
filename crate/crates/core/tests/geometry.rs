use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsim::automaton::Structure;
use selfsim::builtins::{builtin_group, NAMES};
use selfsim::complex::Complex;
use selfsim::geometry::*;
use selfsim::Word;

/// HΣ of the builtins, as measured by the complex tests.
const HSIGMA: [usize; 3] = [5, 5, 9];

fn complex(name: &str) -> &'static Complex {
    static CACHE: OnceLock<Vec<Complex>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        NAMES.iter().map(|n| Complex::new(Arc::new(Structure::new(builtin_group(n).unwrap()).unwrap()))).collect()
    });
    &all[NAMES.iter().position(|n| *n == name).unwrap()]
}

fn geometry(name: &str) -> Geometry<'static> {
    Geometry::new(complex(name), HSIGMA[NAMES.iter().position(|n| *n == name).unwrap()])
}

fn w(s: &str) -> Word {
    Word::parse(s).unwrap()
}

fn random_word(rng: &mut ChaCha8Rng, n: usize) -> Word {
    Word::new((0..n).map(|_| rng.gen_range(0..2u8)).collect())
}

/// Full complex on levels `0..=depth` as adjacency lists.
fn truncated(c: &Complex, depth: usize) -> (Vec<Word>, HashMap<Word, usize>, Vec<Vec<usize>>) {
    let words: Vec<Word> = (0..=depth).flat_map(|n| Word::all(n, 2)).collect();
    let index: HashMap<Word, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut adj = vec![Vec::new(); words.len()];
    for (i, u) in words.iter().enumerate() {
        if !u.is_empty() {
            let j = index[&u.push_down(1).unwrap()];
            adj[i].push(j);
            adj[j].push(i);
        }
        for n in c.neighbors(u.letters()) {
            adj[i].push(index[&Word::new(n)]);
        }
    }
    (words, index, adj)
}

fn bfs(adj: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut q = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        q.push_back(s);
    }
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    dist
}

#[test]
fn umbra_matches_the_distance_definition() {
    for name in NAMES {
        let c = complex(name);
        let (words, _, adj) = truncated(c, 7);
        for v in [HorizontalSet::new(c.horizontal_ball(&[0, 0, 0], 1)).unwrap(), HorizontalSet::singleton(w("01"))] {
            let outside: Vec<usize> = (0..words.len()).filter(|&i| !shadow_contains(&v, &words[i])).collect();
            let dist = bfs(&adj, &outside);
            for (i, u) in words.iter().enumerate().filter(|(_, u)| u.len() < 7) {
                assert_eq!(umbra_contains(c, &v, u), dist[i] > 1, "{name}: {u}");
            }
        }
    }
}

#[test]
fn umbra_examples() {
    let c = complex("odometer");
    let v = HorizontalSet::new(c.horizontal_ball(&[0, 0, 0], 1)).unwrap();
    for u in v.words() {
        assert!(!umbra_contains(c, &v, u));
    }
    // The unit ball around 000 lies in V, so everything above x000 is in the umbra.
    for x in 0..2u8 {
        for tail in Word::all(2, 2) {
            let u = tail.concat(&[x, 0, 0, 0]);
            assert!(umbra_contains(c, &v, &u), "{u}");
        }
    }
}

#[test]
fn unit_ball_inside_gives_umbra() {
    for name in NAMES {
        let c = complex(name);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let center = random_word(&mut rng, 5);
            let v = HorizontalSet::new(c.horizontal_ball(center.letters(), 2)).unwrap();
            for u in v.words() {
                if c.horizontal_ball(u.letters(), 1).iter().all(|z| v.contains(z)) {
                    for x in 0..2u8 {
                        assert!(umbra_contains(c, &v, &u.prepend(x)), "{name}: {u}");
                    }
                }
            }
        }
    }
}

#[test]
fn distances_to_shadow_and_complement_match_bfs() {
    for name in NAMES {
        let c = complex(name);
        let (words, index, adj) = truncated(c, 7);
        for v in [HorizontalSet::new(c.horizontal_ball(&[1, 0, 1], 1)).unwrap(), HorizontalSet::singleton(w("0110"))] {
            let inside: Vec<usize> = (0..words.len()).filter(|&i| shadow_contains(&v, &words[i])).collect();
            let outside: Vec<usize> = (0..words.len()).filter(|&i| !shadow_contains(&v, &words[i])).collect();
            let to_in = bfs(&adj, &inside);
            let to_out = bfs(&adj, &outside);
            // Truncation can only shorten paths that climb above level 7, so
            // compare on levels well below it.
            for u in words.iter().filter(|u| u.len() <= 5) {
                let i = index[u];
                assert_eq!(distance_to_shadow(c, &v, u), to_in[i], "{name}: {u}");
                assert_eq!(distance_to_complement(c, &v, u), to_out[i], "{name}: {u}");
            }
        }
    }
}

#[test]
fn hull_examples() {
    let g = geometry("odometer");
    let c = g.complex;
    let single = HorizontalSet::singleton(w("0110"));
    let hull = g.hull(&single, 0).unwrap();
    assert_eq!(hull.layers.len(), 1);
    assert_eq!(hull.layers[0], c.horizontal_ball(&[0, 1, 1, 0], g.hsigma));

    let g1 = Geometry::new(c, 1);
    let v = HorizontalSet::new(c.horizontal_ball(&[0, 0, 0, 0], 1)).unwrap();
    let hull = g1.hull(&v, 2).unwrap();
    assert_eq!(hull.layers.len(), 2);
    // Layer 0: the arc -2..=2 around 0 on the 16-cycle; layer 1: the
    // halved arc -1..=1 widened by one on the 8-cycle.
    let arc = |n: usize, values: &[i64]| -> BTreeSet<Word> {
        values.iter().map(|&x| Word::from_index(x.rem_euclid(1 << n) as usize, n, 2)).collect()
    };
    assert_eq!(hull.layers[0], arc(4, &[-2, -1, 0, 1, 2]));
    assert_eq!(hull.layers[1], arc(3, &[-2, -1, 0, 1]));
    assert!(matches!(g1.hull(&HorizontalSet::singleton(w("0")), 4), Err(selfsim::Error::LevelTooSmall { .. })));
}

#[test]
fn hulls_are_connected_and_contain_geodesics() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for name in NAMES {
        let g = geometry(name);
        let c = g.complex;
        for _ in 0..12 {
            let n = rng.gen_range(5..=8);
            let center = random_word(&mut rng, n);
            let v = HorizontalSet::new(c.horizontal_ball(center.letters(), rng.gen_range(0..=2))).unwrap();
            let diam = v.diameter(c).unwrap();
            let hull = g.hull(&v, diam).unwrap();
            for u in v.words() {
                assert!(hull.contains(u));
            }
            let set: BTreeSet<Word> = hull.vertices().into_iter().collect();
            assert_eq!(induced_components(c, &set).len(), 1, "{name}");
            for a in v.words() {
                for b in v.words() {
                    let geo = c.geodesic(a.letters(), b.letters(), None);
                    for &(l, h) in &geo.realizing {
                        let (pa, pb) = (a.push_down(n - l).unwrap(), b.push_down(n - l).unwrap());
                        for i in 0..=(n - l) {
                            assert!(hull.contains(&a.push_down(i).unwrap()), "{name}");
                            assert!(hull.contains(&b.push_down(i).unwrap()), "{name}");
                        }
                        for z in c.horizontal_ball(pa.letters(), h) {
                            let on_path = c.horizontal_distance(&pa, &z).unwrap() + c.horizontal_distance(&z, &pb).unwrap() == h;
                            assert!(!on_path || hull.contains(&z), "{name}: {a} {b} via {z}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn odometer_cone_types_are_uniform() {
    let g = geometry("odometer");
    let report = g.enumerate_cone_types(0..=10).unwrap();
    assert_eq!(report.levels[0].count, 1);
    for l in &report.levels[4..] {
        assert_eq!(l.count, 1, "level {}", l.level);
    }
    assert!(report.stable_over(3));
}

#[test]
fn grigorchuk_cone_types_stabilize() {
    let report = geometry("grigorchuk").enumerate_cone_types(0..=10).unwrap();
    let cumulative: Vec<usize> = report.levels.iter().map(|l| l.cumulative).collect();
    assert!(cumulative.windows(2).all(|w| w[0] <= w[1]));
    assert!(report.stable_over(3), "{cumulative:?}");
}

#[test]
fn equal_cone_types_give_equal_singleton_shadow_types() {
    let g = geometry("grigorchuk");
    let words: Vec<Word> = Word::all(7, 2).collect();
    for a in words.iter().step_by(5) {
        for b in words.iter().step_by(7) {
            if g.cone_type(a) == g.cone_type(b) {
                let sa = g.shadow_type(&HorizontalSet::singleton(a.clone()), 0).unwrap();
                let sb = g.shadow_type(&HorizontalSet::singleton(b.clone()), 0).unwrap();
                assert_eq!(sa, sb);
            }
        }
    }
}

#[test]
fn odometer_shadow_types_of_unit_balls_are_finite() {
    let report = geometry("odometer").enumerate_shadow_types(1, 2..=9).unwrap();
    assert!(report.stable_over(3));
    // Two mirror-image types per level: directed edge labels tell them apart.
    for l in &report.levels[3..] {
        assert_eq!(l.count, 2, "level {}", l.level);
    }
}

#[test]
fn horizontal_shadow_edges_push_down() {
    for name in NAMES {
        let c = complex(name);
        for v in [HorizontalSet::new(c.horizontal_ball(&[1, 1, 0], 1)).unwrap(), HorizontalSet::singleton(w("10"))] {
            for u in shadow_vertices(&v, 4, 2).into_iter().filter(|u| u.len() > v.level()) {
                for n in c.neighbors(u.letters()) {
                    let n = Word::new(n);
                    if shadow_contains(&v, &n) {
                        let (pu, pn) = (u.push_down(1).unwrap(), n.push_down(1).unwrap());
                        assert!(shadow_contains(&v, &pu) && shadow_contains(&v, &pn));
                        assert!(c.horizontal_distance(&pu, &pn).unwrap() <= 1, "{name}");
                    }
                }
            }
        }
    }
}

#[test]
fn shadows_are_quasiconvex() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (k, name) in NAMES.iter().enumerate() {
        let c = complex(name);
        for _ in 0..30 {
            let len = rng.gen_range(3..=5);
            let center = random_word(&mut rng, len);
            let v = HorizontalSet::new(c.horizontal_ball(center.letters(), rng.gen_range(0..=1))).unwrap();
            let q = v.diameter(c).unwrap().div_ceil(2).max(HSIGMA[k].div_ceil(2)) + 1;
            let members: Vec<Word> = shadow_vertices(&v, 3, 2).into_iter().collect();
            for _ in 0..10 {
                let a = members.choose(&mut rng).unwrap();
                let b = members.choose(&mut rng).unwrap();
                let geo = c.geodesic(a.letters(), b.letters(), None);
                for &(l, h) in &geo.realizing {
                    let (pa, pb) = (a.push_down(a.len() - l).unwrap(), b.push_down(b.len() - l).unwrap());
                    let mut path: Vec<Word> = (0..=a.len() - l).map(|i| a.push_down(i).unwrap()).collect();
                    path.extend((0..=b.len() - l).map(|i| b.push_down(i).unwrap()));
                    path.extend(c.horizontal_ball(pa.letters(), h).into_iter().filter(|z| {
                        c.horizontal_distance(&pa, z).unwrap() + c.horizontal_distance(z, &pb).unwrap() == h
                    }));
                    for z in &path {
                        assert!(distance_to_shadow(c, &v, z) <= q, "{name}: {a} {b} via {z}");
                    }
                }
            }
        }
    }
}

#[test]
fn separated_sets_have_separated_shadows() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for name in NAMES {
        let c = complex(name);
        let mut checked = 0;
        while checked < 30 {
            let n = rng.gen_range(3..=6);
            let v1 = HorizontalSet::new(c.horizontal_ball(random_word(&mut rng, n).letters(), 1)).unwrap();
            let v2 = HorizontalSet::new(c.horizontal_ball(random_word(&mut rng, n).letters(), 1)).unwrap();
            let apart = v1.words().iter().all(|a| v2.words().iter().all(|b| c.horizontal_distance(a, b).unwrap() >= 2));
            if !apart {
                continue;
            }
            checked += 1;
            // Only horizontal neighbors can cross from one shadow to the other.
            for u in shadow_vertices(&v1, 3, 2) {
                for x in c.neighbors(u.letters()) {
                    assert!(!shadow_contains(&v2, &Word::new(x)), "{name}");
                }
            }
        }
    }
}

#[test]
fn components_are_at_least_two_apart() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in NAMES {
        let c = complex(name);
        for _ in 0..20 {
            let set: BTreeSet<Word> =
                (0..25).map(|_| { let n = rng.gen_range(2..=6); random_word(&mut rng, n) }).collect();
            let comps = induced_components(c, &set);
            assert_eq!(comps.iter().map(|x| x.len()).sum::<usize>(), set.len());
            for (i, a) in comps.iter().enumerate() {
                for b in &comps[i + 1..] {
                    for x in a {
                        for y in b {
                            assert!(c.graph_distance(x, y) >= 2, "{name}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn umbra_points_penetrate_at_unit_speed() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for name in NAMES {
        let st = complex(name).structure();
        let c = complex(name);
        let (m, _) = st.magic_level_bound(HSIGMA[NAMES.iter().position(|n| *n == name).unwrap()]).unwrap();
        let mut checked = 0;
        while checked < 40 {
            let len = rng.gen_range(3..=5);
            let center = random_word(&mut rng, len);
            let v = HorizontalSet::new(c.horizontal_ball(center.letters(), 1)).unwrap();
            let len = rng.gen_range(1..=2);
            let u = random_word(&mut rng, len).concat(center.letters());
            if !umbra_contains(c, &v, &u) {
                continue;
            }
            checked += 1;
            for extra in 0..=4 {
                let x = random_word(&mut rng, extra).concat(u.letters());
                let bound = x.len() as i64 - (u.len() + m) as i64;
                assert!(distance_to_complement(c, &v, &x) as i64 >= bound, "{name}: {u} {x}");
            }
        }
    }
}

fn permuted(g: &LabelledGraph, perm: &[u32]) -> LabelledGraph {
    let mut out = LabelledGraph::new(g.len());
    for (i, &c) in g.colors.iter().enumerate() {
        out.colors[perm[i] as usize] = c;
    }
    out.edges = g.edges.iter().map(|&(u, v, l)| (perm[u as usize], perm[v as usize], l)).collect();
    out
}

/// Isomorphism test by trying every bijection.
fn isomorphic(a: &LabelledGraph, b: &LabelledGraph) -> bool {
    fn extend(a: &LabelledGraph, b: &LabelledGraph, perm: &mut Vec<u32>, used: &mut Vec<bool>) -> bool {
        let i = perm.len();
        if i == a.len() {
            let mut ea: Vec<_> = permuted(a, perm).edges;
            let mut eb = b.edges.clone();
            ea.sort_unstable();
            eb.sort_unstable();
            return ea == eb;
        }
        for j in 0..b.len() {
            if !used[j] && a.colors[i] == b.colors[j] {
                used[j] = true;
                perm.push(j as u32);
                if extend(a, b, perm, used) {
                    return true;
                }
                perm.pop();
                used[j] = false;
            }
        }
        false
    }
    a.len() == b.len() && a.edges.len() == b.edges.len() && extend(a, b, &mut Vec::new(), &mut vec![false; b.len()])
}

fn arb_graph() -> impl Strategy<Value = LabelledGraph> {
    (1..7usize).prop_flat_map(|n| {
        (prop::collection::vec(0..2u32, n), prop::collection::vec((0..n as u32, 0..n as u32, 0..2u32), 0..10)).prop_map(
            |(colors, mut edges)| {
                edges.sort_unstable();
                edges.dedup();
                LabelledGraph { colors, edges }
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn canonical_form_ignores_vertex_names(g in arb_graph(), seed in any::<u64>()) {
        let mut perm: Vec<u32> = (0..g.len() as u32).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(canonical_form(&g), canonical_form(&permuted(&g, &perm)));
    }

    #[test]
    fn canonical_form_sees_edge_edits(g in arb_graph(), pick in any::<prop::sample::Index>(), flip in any::<bool>()) {
        let mut h = g.clone();
        if g.edges.is_empty() || flip {
            let n = g.len() as u32;
            let extra = (pick.index(n as usize) as u32, (pick.index(n as usize * 7) as u32) % n, 2);
            h.edges.push(extra);
        } else {
            h.edges.remove(pick.index(g.edges.len()));
        }
        prop_assert_ne!(canonical_form(&g), canonical_form(&h));
    }

    #[test]
    fn canonical_form_agrees_with_brute_force(a in arb_graph(), b in arb_graph(), seed in any::<u64>(), same in any::<bool>()) {
        let b = if same && b.len() == a.len() {
            let mut perm: Vec<u32> = (0..a.len() as u32).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            permuted(&a, &perm)
        } else {
            b
        };
        prop_assert_eq!(canonical_form(&a) == canonical_form(&b), isomorphic(&a, &b));
    }
}

#[test]
fn distinct_shadow_types_have_non_isomorphic_hulls() {
    let g = Geometry::new(complex("grigorchuk"), 1);
    let c = g.complex;
    let mut by_form: HashMap<CanonicalForm, LabelledGraph> = HashMap::new();
    for center in Word::all(5, 2) {
        let v = HorizontalSet::new(c.horizontal_ball(center.letters(), 1)).unwrap();
        let hull = g.hull(&v, 0).unwrap();
        if hull.vertex_count() > 7 {
            continue;
        }
        let graph = induced_graph(c, &hull.vertices(), |x| v.contains(x) as u32);
        by_form.entry(g.shadow_type(&v, 0).unwrap()).or_insert(graph);
    }
    let graphs: Vec<&LabelledGraph> = by_form.values().collect();
    assert!(graphs.len() > 1);
    for (i, a) in graphs.iter().enumerate() {
        for b in &graphs[i + 1..] {
            assert!(!isomorphic(a, b));
        }
    }
}
