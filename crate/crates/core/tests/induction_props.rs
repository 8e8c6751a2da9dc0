mod common;

use common::{naive_constituent, naive_dependency, permutations, random_binary_tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structformer::induction::{distances_to_tree, heights_and_tree_to_dep, tree_to_distances};
use structformer::treebank::emit_bracket;
use structformer::trees::{validate_dep_tree, Head, TokenSeq};

fn tokens(n: usize) -> TokenSeq {
    let words: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    TokenSeq::new(words).unwrap()
}

fn bare(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("t{i}")).collect()
}

fn check_alg1(d: &[f64]) {
    let n = d.len() + 1;
    let words = bare(n);
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    let got = distances_to_tree(&tokens(n), d).unwrap();
    let want = if n == 1 {
        "(X t0)".to_string()
    } else {
        naive_constituent(&refs, d)
    };
    assert_eq!(emit_bracket(&got), want, "distances {d:?}");
}

#[test]
fn alg1_exhaustive_small() {
    for n in 1..=6 {
        for perm in permutations(n - 1) {
            let d: Vec<f64> = perm.iter().map(|&r| r as f64).collect();
            check_alg1(&d);
        }
    }
}

#[test]
fn alg1_random_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=12);
        // coarse values force ties, which must resolve to the leftmost maximum
        let d: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(0..4) as f64).collect();
        check_alg1(&d);
        let d: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        check_alg1(&d);
    }
}

#[test]
fn alg1_internal_node_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let n = rng.gen_range(1..=12);
        let d: Vec<f64> = (0..n - 1).map(|_| rng.gen::<f64>()).collect();
        let t = distances_to_tree(&tokens(n), &d).unwrap();
        assert_eq!(t.num_nodes(), n - 1);
        assert_eq!(t.num_leaves(), n);
    }
}

#[test]
fn tree_distance_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let t = random_binary_tree(&mut rng, n);
        let d = tree_to_distances(&t);
        let back = distances_to_tree(&tokens(n), &d).unwrap();
        assert!(
            back.same_shape(&t),
            "{} vs {}",
            emit_bracket(&back),
            emit_bracket(&t)
        );
    }
}

#[test]
fn alg2_matches_naive() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=12);
        let t = random_binary_tree(&mut rng, n);
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let dep = heights_and_tree_to_dep(&h, &t).unwrap();
        validate_dep_tree(&dep).unwrap();
        let want = naive_dependency(&h, &t);
        let got: Vec<Option<usize>> = dep
            .heads
            .iter()
            .map(|h| match h {
                Head::Root => None,
                Head::Token(j) => Some(*j),
            })
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn alg2_ties_always_validate() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let t = random_binary_tree(&mut rng, n);
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0..3) as f64).collect();
        validate_dep_tree(&heights_and_tree_to_dep(&h, &t).unwrap()).unwrap();
    }
}

#[test]
fn rank_preserving_transforms_keep_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..300 {
        let n = rng.gen_range(2..=12);
        let d: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c = rng.gen_range(-10.0..10.0);
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        let cube = |v: &[f64]| {
            v.iter()
                .map(|x: &f64| x.powi(3) * 2.0 + 1.0)
                .collect::<Vec<_>>()
        };
        let base = distances_to_tree(&tokens(n), &d).unwrap();
        let dep = heights_and_tree_to_dep(&h, &base).unwrap();
        for (dd, hh) in [(shift(&d), shift(&h)), (cube(&d), cube(&h))] {
            let t = distances_to_tree(&tokens(n), &dd).unwrap();
            assert_eq!(t, base);
            assert_eq!(heights_and_tree_to_dep(&hh, &t).unwrap(), dep);
        }
    }
}
