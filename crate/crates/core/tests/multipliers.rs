mod common;

use common::{pipeline, random_stationary, Pipeline};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tiltstab::fixtures;
use tiltstab::numerics::rank;

fn check_vertices(pl: &Pipeline) {
    let vs = pl.poly.enumerate_vertices().unwrap();
    let eq = pl.sd.equality_indices();
    // Λ has a line, hence no vertices, iff the equality gradients are dependent
    let dependent = rank(&pl.sd.con_grads.select_rows(&eq), 1e-8) < eq.len();
    assert_eq!(vs.is_empty(), dependent);
    if dependent {
        return;
    }
    let mut union: Vec<usize> = Vec::new();
    for v in vs {
        assert!(pl.poly.violation(v) <= 1e-8, "{v:?}");
        let support = pl.poly.positive_support(v);
        let mut rows = eq.clone();
        rows.extend(&support);
        rows.sort_unstable();
        rows.dedup();
        assert_eq!(rank(&pl.sd.con_grads.select_rows(&rows), 1e-8), rows.len(), "{v:?}");
        union.extend(support);
        let c = pl.poly.support_gradient_combination(v).unwrap();
        assert!(c.iter().all(|x| x.abs() <= 1e-8), "{c:?}");
    }
    union.sort_unstable();
    union.dedup();
    let su = pl.poly.support_union().unwrap();
    // a polytope attains its support union on vertices; rays can add more
    if pl.cq.mfcq.holds {
        assert_eq!(su.indices, union, "{}", pl.problem);
    } else {
        assert!(union.iter().all(|i| su.indices.contains(i)), "{}", pl.problem);
    }
    assert_eq!(pl.poly.positive_support(&su.full_support), su.indices);
}

#[test]
fn nlp1_vertices() {
    check_vertices(&pipeline(fixtures::nlp1()));
}

#[test]
fn random_stationary_vertices() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..60 {
        let pl = random_stationary(&mut rng);
        assert!(!pl.poly.is_empty());
        if pl.sd.num_constraints() <= 12 {
            check_vertices(&pl);
        }
    }
}

#[test]
fn nlp1_directional_multipliers() {
    let pl = pipeline(fixtures::nlp1());
    let d = pl.poly.directional_multipliers(&pl.sd, &[0.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!(d.value, Some(0.0));
    assert_eq!(d.face_vertices.len(), 8);
    let z = pl.poly.directional_multipliers(&pl.sd, &[0.0; 4]).unwrap();
    assert_eq!(z.value, Some(0.0));
    assert_eq!(z.face_vertices.len(), 8);
    // curvature only through x2: v = e2 favors large λ5 + λ7
    let e2 = pl.poly.directional_multipliers(&pl.sd, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    assert!(e2.face_vertices.len() < 8);
}

#[test]
fn nlp1_bounded_multiplier() {
    let pl = pipeline(fixtures::nlp1());
    let lam = pl.poly.bounded_multiplier(1e3).unwrap().expect("γ = 1e3 is generous");
    assert!(pl.poly.contains(&lam));
    let xs = common::norm(pl.poly.target());
    assert!(common::norm(&lam) <= 1e3 * xs);
}
