use proptest::prelude::*;
use structformer::treebank::{
    emit_bracket, emit_conll, parse_bracket, parse_bracket_corpus, parse_conll, train_bpe,
    ConllSentence,
};
use structformer::trees::{validate_const_tree, validate_dep_tree, ConstTree, DepTree, TokenSeq};

fn token() -> impl Strategy<Value = String> {
    "[A-Za-z0-9&'$%.,:;!?-]{1,6}"
}

fn label() -> impl Strategy<Value = String> {
    "[A-Z]{1,4}(-[A-Z]{1,3})?"
}

fn const_tree() -> impl Strategy<Value = ConstTree> {
    let leaf = token().prop_map(|t| ConstTree::leaf(t, 0));
    leaf.prop_recursive(5, 40, 4, |inner| {
        (label(), prop::collection::vec(inner, 1..5)).prop_map(|(l, kids)| ConstTree::node(l, kids))
    })
    .prop_map(|t| {
        let t = if t.is_leaf() {
            ConstTree::node("X", vec![t])
        } else {
            t
        };
        t.reindexed()
    })
}

/// Random rooted tree: token `order[k]` attaches to one of `order[..k]`.
fn dep_sentence() -> impl Strategy<Value = ConllSentence> {
    (1usize..12)
        .prop_flat_map(|n| {
            (
                Just(n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
                prop::collection::vec(any::<prop::sample::Index>(), n),
                prop::collection::vec(token(), n),
                prop::collection::vec(prop::option::of("[a-z]{1,5}"), n),
                prop::collection::vec(prop::option::of("[A-Z]{2,3}"), n),
                prop::option::of(prop::collection::vec("[a-z]{2,5}", n)),
            )
        })
        .prop_map(|(n, order, picks, words, lemmas, pos, labels)| {
            let mut heads = vec![None; n];
            for k in 1..n {
                heads[order[k]] = Some(order[picks[k].index(k)]);
            }
            let mut tree = DepTree::from_options(&heads);
            tree.labels = labels;
            ConllSentence {
                tokens: TokenSeq::new(words).unwrap(),
                tree,
                lemmas,
                pos,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn bracket_roundtrip(tree in const_tree()) {
        let n = tree.num_leaves();
        validate_const_tree(&tree, n).unwrap();
        let text = emit_bracket(&tree);
        let (back, toks) = parse_bracket(&text).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(toks.len(), n);
        prop_assert_eq!(emit_bracket(&back), text);
    }

    #[test]
    fn conll_roundtrip(sents in prop::collection::vec(dep_sentence(), 1..4)) {
        for s in &sents {
            validate_dep_tree(&s.tree).unwrap();
        }
        let text = emit_conll(&sents);
        let back = parse_conll(&text).unwrap();
        prop_assert_eq!(&back, &sents);
        prop_assert_eq!(emit_conll(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bpe_pieces_concatenate_to_word(
        corpus in prop::collection::vec("[a-zA-Z]{1,8}", 1..30),
        extra in 0usize..40,
        probe in "[a-zA-Z]{1,10}",
    ) {
        let base: std::collections::BTreeSet<char> = corpus.iter().flat_map(|w| w.chars()).collect();
        let model = train_bpe(corpus.iter().map(String::as_str), base.len() + extra).unwrap();
        for w in corpus.iter().chain(std::iter::once(&probe)) {
            let pieces = model.segment(w);
            prop_assert_eq!(pieces.concat(), w.clone());
            prop_assert!(pieces.iter().all(|p| !p.is_empty()));
        }
        let reloaded = structformer::treebank::BpeModel::from_file_str(&model.to_file_string()).unwrap();
        prop_assert_eq!(reloaded, model);
    }
}

#[test]
fn corpus_of_trees_roundtrips() {
    let text = "(S (NP a) (VP b c))\n(X (X d) e)\n";
    let parsed = parse_bracket_corpus(text).unwrap();
    let emitted: Vec<String> = parsed.iter().map(|(t, _)| emit_bracket(t)).collect();
    assert_eq!(emitted.join("\n") + "\n", text);
}
