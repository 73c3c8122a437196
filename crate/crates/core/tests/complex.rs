use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsim::automaton::Structure;
use selfsim::builtins::{builtin_group, NAMES};
use selfsim::complex::Complex;
use selfsim::Word;

fn complex(name: &str) -> &'static Complex {
    static CACHE: OnceLock<Vec<Complex>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        NAMES.iter().map(|n| Complex::new(Arc::new(Structure::new(builtin_group(n).unwrap()).unwrap()))).collect()
    });
    &all[NAMES.iter().position(|n| *n == name).unwrap()]
}

/// All words up to `depth` with vertical and horizontal edges, as adjacency lists.
fn truncated_complex(c: &Complex, depth: usize) -> (Vec<Word>, Vec<Vec<usize>>) {
    let d = c.degree();
    let words: Vec<Word> = (0..=depth).flat_map(|n| Word::all(n, d)).collect();
    let index: HashMap<Word, usize> = words.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let mut adj = vec![Vec::new(); words.len()];
    for (i, w) in words.iter().enumerate() {
        if !w.is_empty() {
            let j = index[&w.push_down(1).unwrap()];
            adj[i].push(j);
            adj[j].push(i);
        }
        for s in 0..c.structure().gens.len() {
            let j = index[&Word::new(c.image(s, w.letters()))];
            if j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    (words, adj)
}

fn bfs(adj: &[Vec<usize>], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut q = VecDeque::from([from]);
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
fn graph_distance_matches_full_bfs_to_level_five() {
    for name in NAMES {
        let c = complex(name);
        let (words, adj) = truncated_complex(c, 5);
        for (i, u) in words.iter().enumerate() {
            let dist = bfs(&adj, i);
            for (j, v) in words.iter().enumerate() {
                assert_eq!(c.graph_distance(u, v), dist[j], "{name}: {u} {v}");
            }
        }
    }
}

#[test]
fn graph_distance_examples() {
    let c = complex("odometer");
    let (words, adj) = truncated_complex(c, 4);
    let pos = |s: &str| words.iter().position(|w| *w == Word::parse(s).unwrap()).unwrap();
    assert_eq!(bfs(&adj, pos("00"))[pos("01")], 2);
    assert_eq!(bfs(&adj, pos("10"))[pos("11")], 2);
    assert_eq!(c.graph_distance(&Word::parse("00").unwrap(), &Word::parse("01").unwrap()), 2);
}

#[test]
fn augmented_tree_law() {
    for name in NAMES {
        let c = complex(name);
        for n in 1..=8 {
            let g = c.build_level_graph(n).unwrap();
            for &(u, v, _) in &g.edges {
                let pu = g.word(u as usize).push_down(1).unwrap();
                let pv = g.word(v as usize).push_down(1).unwrap();
                assert!(c.horizontal_distance(&pu, &pv).unwrap() <= 1, "{name}");
            }
        }
    }
}

#[test]
fn levels_are_connected() {
    for name in NAMES {
        let c = complex(name);
        for n in 0..=10 {
            assert!(c.build_level_graph(n).unwrap().is_connected(), "{name} level {n}");
        }
    }
}

#[test]
fn graph_distance_is_a_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in NAMES {
        let c = complex(name);
        let random_word = |rng: &mut ChaCha8Rng| {
            let n = rng.gen_range(0..=9);
            Word::new((0..n).map(|_| rng.gen_range(0..2u8)).collect())
        };
        for _ in 0..10_000 {
            let (x, y, z) = (random_word(&mut rng), random_word(&mut rng), random_word(&mut rng));
            let (xy, yz, xz) = (c.graph_distance(&x, &y), c.graph_distance(&y, &z), c.graph_distance(&x, &z));
            assert_eq!(xy, c.graph_distance(&y, &x));
            assert!(xz <= xy + yz, "{name}: {x} {y} {z}");
            assert_eq!(xy == 0, x == y);
        }
    }
}

#[test]
fn shift_map_does_not_increase_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in NAMES {
        let c = complex(name);
        for _ in 0..2000 {
            let a = rng.gen_range(1..=9);
            let b = rng.gen_range(1..=9);
            let u = Word::new((0..a).map(|_| rng.gen_range(0..2u8)).collect());
            let v = Word::new((0..b).map(|_| rng.gen_range(0..2u8)).collect());
            let fu = u.shift(1).unwrap();
            let fv = v.shift(1).unwrap();
            assert!(c.graph_distance(&fu, &fv) <= c.graph_distance(&u, &v), "{name}: {u} {v}");
        }
    }
}

#[test]
fn hsigma_is_monotone_and_stabilizes() {
    for name in NAMES {
        let c = complex(name);
        let report = c.estimate_hsigma(9, 16, 1).unwrap();
        assert!(report.stabilized, "{name}: {:?}", report.per_level);
        assert!(report.min_horizontal_value <= report.value);
        let mut running = 0;
        for l in &report.per_level {
            assert!(l.exhaustive);
            running = running.max(l.max_horizontal_geodesic);
        }
        assert_eq!(running, report.value);
        // Truncating the scan cannot increase the estimate.
        let shorter = c.estimate_hsigma(6, 16, 1).unwrap();
        assert!(shorter.value <= report.value);
    }
}

#[test]
fn capped_geodesics_agree_with_uncapped() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for name in NAMES {
        let c = complex(name);
        let h = c.estimate_hsigma(8, 16, 1).unwrap().value;
        for _ in 0..3000 {
            let a = rng.gen_range(0..=10);
            let b = rng.gen_range(0..=10);
            let u: Vec<u8> = (0..a).map(|_| rng.gen_range(0..2u8)).collect();
            let v: Vec<u8> = (0..b).map(|_| rng.gen_range(0..2u8)).collect();
            assert_eq!(c.geodesic(&u, &v, Some(h)), c.geodesic(&u, &v, None));
        }
    }
}

#[test]
fn delta_is_finite_and_stable() {
    for name in NAMES {
        let c = complex(name);
        let a = c.estimate_delta(3000, 8, None, 2).delta;
        let b = c.estimate_delta(3000, 8, None, 2).delta;
        assert_eq!(a, b);
        assert!(a.is_finite() && a >= 0.0);
    }
}
