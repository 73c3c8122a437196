use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfsim::automaton::Structure;
use selfsim::boundary::*;
use selfsim::builtins::{builtin_group, NAMES};
use selfsim::complex::Complex;
use selfsim::Word;

const HSIGMA: [usize; 3] = [5, 5, 9];

fn complex(name: &str) -> &'static Complex {
    static CACHE: OnceLock<Vec<Complex>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        NAMES.iter().map(|n| Complex::new(Arc::new(Structure::new(builtin_group(n).unwrap()).unwrap()))).collect()
    });
    &all[NAMES.iter().position(|n| *n == name).unwrap()]
}

fn boundary(name: &str) -> Boundary<'static> {
    Boundary::new(complex(name), HSIGMA[NAMES.iter().position(|n| *n == name).unwrap()]).unwrap()
}

fn ray(s: &str) -> Ray {
    Ray::parse(s).unwrap()
}

fn w(s: &str) -> Word {
    Word::parse(s).unwrap()
}

/// A second ray agreeing with `r` except for a few early letters.
fn perturbed(r: &Ray, rng: &mut ChaCha8Rng) -> Ray {
    let n = r.preperiod().len() + r.period().len() + 2;
    let mut pre: Vec<u8> = (1..=n).map(|t| r.letter(t)).collect();
    for _ in 0..rng.gen_range(1..=2) {
        let i = rng.gen_range(0..n);
        pre[i] ^= 1;
    }
    let period: Vec<u8> = (n + 1..=n + r.period().len()).map(|t| r.letter(t)).collect();
    Ray::new(pre, period).unwrap()
}

#[test]
fn equivalence_examples() {
    let c = complex("odometer");
    let zero = ray(";0");
    assert!(matches!(rays_equivalent(c, &zero, &zero, 50), Verdict::Equivalent { .. }));
    assert_eq!(rays_equivalent(c, &zero, &ray("1;0"), 50), Verdict::Inequivalent { t: 2 });
    assert_eq!(divergence_product(c, &zero, &ray("1;0"), 50), Divergence::At(1));
    assert_eq!(divergence_product(c, &ray("1;0"), &zero, 50), Divergence::At(1));
    assert_eq!(divergence_product(c, &zero, &zero, 50), Divergence::Infinite);
    // 0111... and 1000... are neighbors at every level: 1 + 2 + 4 + ... carries.
    assert!(matches!(rays_equivalent(c, &ray(";1"), &ray(";0"), 50), Verdict::Equivalent { .. }));
}

#[test]
fn verdicts_match_a_direct_distance_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for name in NAMES {
        let c = complex(name);
        for r1 in random_rays(2, 150, 31) {
            let r2 = perturbed(&r1, &mut rng);
            let verdict = rays_equivalent(c, &r1, &r2, 200);
            let first_far = (0..=40).find(|&t| c.horizontal_distance_within(r1.vertex(t).letters(), r2.vertex(t).letters(), 1).is_none());
            match verdict {
                Verdict::Inequivalent { t } => assert_eq!(first_far, Some(t), "{name}: {r1} {r2}"),
                Verdict::Equivalent { .. } => assert_eq!(first_far, None, "{name}: {r1} {r2}"),
                Verdict::Unknown { .. } => panic!("undecided: {r1} {r2}"),
            }
            assert_eq!(divergence_product(c, &r1, &r2, 200), divergence_product(c, &r2, &r1, 200));
        }
    }
}

#[test]
fn grigorchuk_b_carrier_rays() {
    let c = complex("grigorchuk");
    let b = c.structure().group.parse("b").unwrap();
    for pre in ["", "1", "11", "011", "1101"] {
        let r1 = Ray::new(w(pre).into_letters(), vec![0]).unwrap();
        let moved = c.structure().group.act(&b, r1.vertex(pre.len() + 1).letters()).unwrap();
        let r2 = Ray::through(&Word::new(moved), vec![0]).unwrap();
        let verdict = rays_equivalent(c, &r1, &r2, 200);
        let first_far = (0..=40).find(|&t| c.horizontal_distance_within(r1.vertex(t).letters(), r2.vertex(t).letters(), 1).is_none());
        assert_eq!(matches!(verdict, Verdict::Equivalent { .. }), first_far.is_none(), "{r1} {r2}");
    }
}

#[test]
fn equivalence_is_an_equivalence_relation() {
    for name in NAMES {
        let c = complex(name);
        let rays = random_rays(2, 40, 77);
        let eq: Vec<Vec<bool>> = rays
            .iter()
            .map(|a| rays.iter().map(|b| matches!(rays_equivalent(c, a, b, 300), Verdict::Equivalent { .. })).collect())
            .collect();
        for i in 0..rays.len() {
            assert!(eq[i][i]);
            for j in 0..rays.len() {
                assert_eq!(eq[i][j], eq[j][i]);
                for k in 0..rays.len() {
                    assert!(!(eq[i][j] && eq[j][k]) || eq[i][k], "{name}");
                }
            }
        }
    }
}

#[test]
fn product_examples() {
    let b = boundary("odometer");
    let v = w("0110");
    assert_eq!(b.gromov_product(&Word::root(), &v), 0.0);
    assert_eq!(b.gromov_product(&w("10"), &v), 2.0);
    assert_eq!(b.gromov_product(&w("00"), &w("01")), 1.0);
    assert_eq!(b.level_product(&v, &v), 4);
    assert_eq!(b.level_product(&w("10"), &v), 2);
    assert_eq!(b.level_product(&w("00"), &w("01")), 2);
}

#[test]
fn products_are_comparable() {
    for (k, name) in NAMES.iter().enumerate() {
        let b = boundary(name);
        let words: Vec<Word> = (0..=5).flat_map(|n| Word::all(n, 2)).collect();
        for u in &words {
            for v in &words {
                let g = b.gromov_product(u, v);
                let l = b.level_product(u, v) as f64;
                assert!(l - HSIGMA[k] as f64 / 2.0 <= g && g <= l, "{name}: {u} {v}");
            }
        }
    }
}

#[test]
fn divergence_and_level_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for name in NAMES {
        let b = boundary(name);
        for r1 in random_rays(2, 60, 9) {
            let r2 = perturbed(&r1, &mut rng);
            if let Divergence::At(div) = divergence_product(b.complex, &r1, &r2, 200) {
                for t in div + 1..=div + 15 {
                    let level = b.level_product(&r1.vertex(t), &r2.vertex(t));
                    assert!(div <= level && level <= div + b.magic, "{name}: {r1} {r2} t={t}");
                }
            }
        }
    }
}

#[test]
fn visual_distance_examples() {
    let b = boundary("odometer");
    let params = VisualParams::new(0.1, 30, 2.0, b.magic);
    assert_eq!(b.visual_distance(&ray(";1"), &ray(";0"), &params).unwrap(), 0.0);
    let d = b.visual_distance(&ray(";0"), &ray("1;0"), &params).unwrap();
    let level = -d.ln() / 0.1;
    assert!((1.0 - 1e-9..=1.0 + b.magic as f64 + 1e-9).contains(&level), "{level}");
    let deeper = VisualParams::new(0.1, 40, 2.0, b.magic);
    assert_eq!(d, b.visual_distance(&ray(";0"), &ray("1;0"), &deeper).unwrap());
    let shallow = VisualParams::new(0.1, 1, 2.0, b.magic);
    assert!(matches!(
        b.visual_distance(&ray(";0"), &ray(";1"), &shallow),
        Err(selfsim::Error::UndecidedEquivalence(1))
    ));
}

#[test]
fn visual_distances_settle_with_depth() {
    for name in NAMES {
        let b = boundary(name);
        let rays = random_rays(2, 30, 4);
        let p1 = VisualParams::new(b.default_epsilon(), 30, 2.0, b.magic);
        let p2 = VisualParams::new(b.default_epsilon(), 40, 2.0, b.magic);
        for r1 in &rays {
            for r2 in &rays {
                assert_eq!(b.visual_distance(r1, r2, &p1).unwrap(), b.visual_distance(r1, r2, &p2).unwrap(), "{name}");
            }
        }
    }
}

#[test]
fn local_degrees() {
    let b = boundary("odometer");
    let ld = b.local_degree(&ray(";0"), 2..=12);
    assert!(ld.under.iter().all(|&x| x == 1));
    assert_eq!(ld.value().unwrap(), 1);
    for name in NAMES {
        let b = boundary(name);
        for r in random_rays(2, 20, 8) {
            let ld = b.local_degree(&r, 3..=12);
            assert!(ld.under.iter().all(|&x| x >= 1));
            assert!(ld.under.windows(2).all(|w| w[0] >= w[1]), "{name}: {r} {:?}", ld.under);
            assert!(ld.under.iter().zip(&ld.over).all(|(u, o)| u <= o));
        }
    }
}

#[test]
fn preimage_degrees_sum_to_the_degree() {
    let b = boundary("odometer");
    let pc = b.preimage_classes(&ray(";0"), 200, 4..=12).unwrap();
    assert_eq!(pc.classes.len(), 2);
    assert!(pc.classes.iter().all(|c| c.degree == 1));
    for name in NAMES {
        let b = boundary(name);
        for r in random_rays(2, 12, 21).into_iter().chain([ray(";0"), ray(";1"), ray(";01")]) {
            let pc = b.preimage_classes(&r, 200, 4..=12).unwrap();
            assert_eq!(pc.classes.iter().map(|c| c.members.len()).sum::<usize>(), 2);
            assert_eq!(pc.degree_sum, 2, "{name}: {r}");
        }
    }
    // In the Grigorchuk complex the two preimages of 0111... stay adjacent.
    let pc = boundary("grigorchuk").preimage_classes(&ray("0;1"), 200, 4..=12).unwrap();
    assert_eq!(pc.classes.len(), 1);
    assert_eq!(pc.classes[0].degree, 2);
}

#[test]
fn diameter_tables() {
    for name in NAMES {
        let b = boundary(name);
        let params = VisualParams::new(b.default_epsilon(), 30, 2.0, b.magic);
        let report = b.diameter_report(&ray("1;0"), 0..=8, &params, 2).unwrap();
        assert_eq!(report.rows[0].t, 0);
        assert!(report.rows[0].shadow_diameter.is_finite());
        assert!(report.inclusion, "{name}");
        assert!(report.band.is_finite() && report.band >= 1.0);
        let first = report.rows[3].shadow_diameter;
        let last = report.rows.last().unwrap().shadow_diameter;
        assert!(last < first, "{name}");
    }
}

#[test]
fn quasi_ultrametric_on_random_triples() {
    for name in NAMES {
        let b = boundary(name);
        let params = VisualParams::new(b.default_epsilon(), 30, 2.0, b.magic);
        let report = b.check_ultrametric(&random_rays(2, 40, 1), 300, &params, 3).unwrap();
        assert_eq!(report.violations, 0, "{name}");
    }
}

#[test]
fn umbra_roundness_is_finite() {
    let b = boundary("odometer");
    let params = VisualParams::new(b.default_epsilon(), 30, 2.0, b.magic);
    let round = b.umbra_roundness(&ray(";0"), 4, 3, &params).unwrap();
    assert!(round.is_finite() && round >= 1.0);
}
