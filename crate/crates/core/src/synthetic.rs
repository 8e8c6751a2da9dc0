//! Tiny template grammar for smoke runs and demos.
//!
//! ```text
//! S  -> NP VP
//! NP -> Det N | Det Adj N
//! VP -> V NP
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::trees::ConstTree;

const DET: [&str; 2] = ["the", "a"];
const ADJ: [&str; 3] = ["big", "small", "red"];
const NOUN: [&str; 4] = ["dog", "cat", "bird", "man"];
const VERB: [&str; 3] = ["sees", "likes", "chases"];

fn pick(rng: &mut ChaCha8Rng, words: &[&str]) -> String {
    words.choose(rng).expect("non-empty word list").to_string()
}

fn noun_phrase(rng: &mut ChaCha8Rng, start: usize) -> ConstTree {
    let mut kids = vec![ConstTree::leaf(pick(rng, &DET), start)];
    if rng.gen_bool(0.5) {
        kids.push(ConstTree::leaf(pick(rng, &ADJ), start + 1));
    }
    let next = start + kids.len();
    kids.push(ConstTree::leaf(pick(rng, &NOUN), next));
    ConstTree::node("NP", kids)
}

/// `count` labeled trees drawn from the grammar.
pub fn template_corpus(count: usize, seed: u64) -> Vec<ConstTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let subj = noun_phrase(&mut rng, 0);
            let v = subj.num_leaves();
            let verb = ConstTree::leaf(pick(&mut rng, &VERB), v);
            let obj = noun_phrase(&mut rng, v + 1);
            ConstTree::node("S", vec![subj, ConstTree::node("VP", vec![verb, obj])])
        })
        .collect()
}
