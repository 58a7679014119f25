use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::corpus::Corpus;
use super::potential::PotentialFunction;
use crate::engine::{init_model, ConceptPrior, Hyperparams};
use crate::testutil::corpus;

fn fruit_corpus() -> Arc<Corpus> {
    let fruit = ["apple", "pear", "plum", "fig", "kiwi", "food"];
    let cars = ["car", "bus", "train", "bike", "road", "food"];
    let texts: Vec<String> = (0..30)
        .map(|j| {
            let base = if j % 2 == 0 { &fruit } else { &cars };
            (0..10).map(|i| base[(i * 5 + j * 3) % 6]).collect::<Vec<_>>().join(" ")
        })
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    corpus(&refs)
}

fn trained(k_init: usize, seed: u64) -> ModelState {
    let h = Hyperparams { k_init, rng_seed: seed, ..Hyperparams::default() };
    let mut s = init_model(fruit_corpus(), ConceptPrior::new(), h).unwrap().state;
    s.train(20);
    s
}

fn wid(s: &ModelState, w: &str) -> WordId {
    s.corpus().vocabulary().id(w).unwrap()
}

/// A topic that currently holds `w`.
fn topic_with(s: &ModelState, w: WordId) -> TopicId {
    *s.active_topics().iter().max_by_key(|&&k| s.n_kw(k, w)).unwrap()
}

fn apply(s: &ModelState, rs: Vec<Refinement>) -> ModelState {
    apply_refinements(s, &rs, ApplyOptions::default()).unwrap().state
}

#[test]
fn swap_penalty_worked_examples() {
    assert_eq!(swap_penalty(10, 4, 12), 0.5);
    assert_eq!(swap_penalty(20, 2, 10), 0.0);
    assert_eq!(swap_penalty(5, 5, 12), 1.0);
}

#[test]
fn swap_penalty_edges() {
    assert_eq!(swap_penalty(3, 1, 0), 0.0);
    assert_eq!(swap_penalty(1, 1, 0), 1.0);
    assert_eq!(swap_penalty(1, 4, 0), 1.0);
    // w2 already ahead: negative r, clamped to 1
    assert_eq!(swap_penalty(1, 9, 2), 1.0);
    assert_eq!(swap_penalty(12, 2, 10), 0.0);
}

proptest! {
    #[test]
    fn swap_penalty_in_unit_interval(a in 0u32..1000, b in 0u32..1000, c in 0u32..1000) {
        let d = swap_penalty(a, b, c);
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn remove_word_layer() {
    let s = trained(3, 1);
    let apple = wid(&s, "apple");
    let z = topic_with(&s, apple);
    let c = compile(&Refinement::RemoveWord { word: "apple".into(), topic: z }, &s).unwrap();
    let mut p = PotentialFunction::new();
    p.extend(c.layers.iter().copied());
    let other = s.active_topics().iter().copied().find(|&k| k != z).unwrap();
    for j in 0..s.corpus().len() as u32 {
        assert_eq!(p.lookup(z, apple, j), 0.0);
        assert_eq!(p.lookup(other, apple, j), 1.0);
    }
    assert_eq!(c.forget.len() as u32, s.n_kw(z, apple));
}

#[test]
fn remove_word_apply_is_hard_and_leaves_source() {
    let s = trained(3, 2);
    let before = s.to_bytes();
    let apple = wid(&s, "apple");
    let z = topic_with(&s, apple);
    assert!(s.n_kw(z, apple) > 0);
    let mut child = apply(&s, vec![Refinement::RemoveWord { word: "apple".into(), topic: z }]);
    assert_eq!(s.to_bytes(), before);
    assert_eq!(child.n_kw(z, apple), 0);
    for _ in 0..50 {
        child.gibbs_sweep();
        assert_eq!(child.n_kw(z, apple), 0);
    }
    child.check_invariants().unwrap();
}

#[test]
fn add_word_apply_is_exclusive() {
    let s = trained(4, 3);
    let food = wid(&s, "food");
    let z = s.active_topics()[0];
    let mut child = apply(&s, vec![Refinement::AddWord { word: "food".into(), topic: z }]);
    let check = |c: &ModelState| {
        for &k in c.active_topics() {
            if k != z {
                assert_eq!(c.n_kw(k, food), 0);
            }
        }
        assert_eq!(c.n_kw(z, food) as usize, c.corpus().term_counts()[food as usize] as usize);
    };
    check(&child);
    for _ in 0..50 {
        child.gibbs_sweep();
        check(&child);
    }
}

#[test]
fn add_then_remove_last_write_wins() {
    let s = trained(3, 4);
    let food = wid(&s, "food");
    let z = s.active_topics()[0];
    let child = apply(
        &s,
        vec![
            Refinement::AddWord { word: "food".into(), topic: z },
            Refinement::RemoveWord { word: "food".into(), topic: z },
        ],
    );
    for j in 0..3 {
        assert_eq!(child.potential().lookup(z, food, j), 0.0);
    }
    // every cell of the word is zero now, so the sampler falls back
    child.check_invariants().unwrap();
}

#[test]
fn empty_batch_is_rejected() {
    let s = trained(2, 5);
    assert!(matches!(apply_refinements(&s, &[], ApplyOptions::default()), Err(Error::EmptyPending)));
}

#[test]
fn batch_is_atomic() {
    let s = trained(3, 6);
    let before = s.to_bytes();
    let z = s.active_topics()[0];
    let r = apply_refinements(
        &s,
        &[
            Refinement::RemoveWord { word: "apple".into(), topic: z },
            Refinement::RemoveWord { word: "zebra".into(), topic: z },
        ],
        ApplyOptions::default(),
    );
    assert!(matches!(r, Err(Error::UnknownWord(_))));
    assert_eq!(s.to_bytes(), before);
}

#[test]
fn preflight_sees_earlier_items() {
    let s = trained(3, 6);
    let before = s.to_bytes();
    let (t1, t2) = (s.active_topics()[0], s.active_topics()[1]);
    assert!(matches!(preflight(&s, &[]), Err(Error::EmptyPending)));
    let w = s.top_words(t1, 1).unwrap()[0].0;
    let term = s.corpus().vocabulary().term(w).to_owned();
    let split = Refinement::SplitTopic { topic: t1, seeds: vec![term.clone()] };
    let recs = preflight(&s, &[split.clone(), Refinement::RemoveWord { word: term, topic: t2 }]).unwrap();
    assert_eq!(recs.len(), 2);
    let merge = Refinement::MergeTopics { topic1: t1, topic2: t2 };
    let applied = apply_refinements(&s, std::slice::from_ref(&merge), ApplyOptions::default()).unwrap();
    assert_eq!(preflight(&s, &[merge]).unwrap(), applied.records);
    assert_eq!(s.to_bytes(), before);
}

#[test]
fn compile_errors() {
    let s = trained(3, 7);
    let z = s.active_topics()[0];
    let bad = [
        (Refinement::AddWord { word: "zebra".into(), topic: z }, "word"),
        (Refinement::AddWord { word: "apple".into(), topic: 99 }, "topic"),
        (Refinement::RemoveDoc { doc: "nope".into(), topic: z }, "doc"),
        (Refinement::MergeTopics { topic1: z, topic2: z }, "merge"),
        (Refinement::SwapOrder { word1: "apple".into(), word2: "apple".into(), topic: z }, "swap"),
        (Refinement::SplitTopic { topic: z, seeds: vec![] }, "split"),
    ];
    for (r, what) in bad {
        assert!(compile(&r, &s).is_err(), "{what}");
        assert!(validate(&r, &s).is_err(), "{what}");
    }
    assert!(matches!(
        compile(&Refinement::RemoveDoc { doc: "nope".into(), topic: z }, &s),
        Err(Error::UnknownDocument(_))
    ));
    assert!(matches!(
        compile(&Refinement::AddWord { word: "apple".into(), topic: 99 }, &s),
        Err(Error::InactiveTopic(99))
    ));
}

#[test]
fn swap_layers_are_exact() {
    let s = trained(3, 8);
    let (apple, pear) = (wid(&s, "apple"), wid(&s, "pear"));
    let z = topic_with(&s, apple);
    let delta = swap_penalty(s.n_kw(z, apple), s.n_kw(z, pear), s.n_w_excluding(pear, z));
    let r = apply_refinements(
        &s,
        &[Refinement::SwapOrder { word1: "apple".into(), word2: "pear".into(), topic: z }],
        ApplyOptions::default(),
    )
    .unwrap();
    match &r.records[0] {
        EdgeRecord::SwapOrder { computed_delta, .. } => assert_eq!(*computed_delta, delta),
        other => panic!("unexpected record {other:?}"),
    }
    let p = r.state.potential();
    for j in 0..s.corpus().len() as u32 {
        assert_eq!(p.lookup(z, pear, j), 1.0);
        for k in 1..=10 {
            if k != z {
                assert_eq!(p.lookup(k, pear, j), delta);
            }
        }
        assert_eq!(p.lookup(z, apple, j), 1.0);
    }
}

#[test]
fn remove_doc_zeroes_document() {
    let s = trained(3, 9);
    let j = 0;
    let z = s.doc_topic_dist(j).into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let doc = s.corpus().document(j).id.clone();
    let mut child = apply(&s, vec![Refinement::RemoveDoc { doc, topic: z }]);
    for _ in 0..20 {
        assert_eq!(child.doc_topic_weight(j, z), 0.0);
        child.gibbs_sweep();
    }
}

#[test]
fn merge_moves_every_token() {
    let s = trained(2, 10);
    let topics = s.active_topics().to_vec();
    assert!(topics.len() >= 2);
    let (t1, t2) = (topics[0], topics[1]);
    let (n1, n2) = (s.n_k(t1), s.n_k(t2));
    let r = Refinement::MergeTopics { topic1: t1, topic2: t2 };
    let now = apply_refinements(&s, std::slice::from_ref(&r), ApplyOptions { sweeps: 0 }).unwrap().state;
    assert!(!now.is_active(t2));
    assert_eq!(now.n_k(t1), n1 + n2);
    let mut later = apply(&s, vec![r]);
    assert!(!later.is_active(t2));
    assert_eq!(later.total_assigned(), s.total_assigned());
    later.train(5);
    assert!(!later.is_active(t2));
}

#[test]
fn merge_transfers_seeds() {
    let h = Hyperparams { k_init: 3, rng_seed: 11, ..Hyperparams::default() };
    let mut p = ConceptPrior::new();
    p.add(2, "apple").unwrap();
    let mut s = init_model(fruit_corpus(), p, h).unwrap().state;
    s.train(5);
    let child = apply(&s, vec![Refinement::MergeTopics { topic1: 1, topic2: 2 }]);
    assert_eq!(child.priors().topic_of("apple"), Some(1));
    assert!(!child.is_active(2));
    assert!(!child.dormant_topics().contains(&2));
    let apple = wid(&child, "apple");
    for &k in child.active_topics() {
        if k != 1 {
            assert_eq!(child.n_kw(k, apple), 0);
        }
    }
}

#[test]
fn split_creates_topic_holding_seeds() {
    let s = trained(2, 12);
    let (apple, pear) = (wid(&s, "apple"), wid(&s, "pear"));
    let t = topic_with(&s, apple);
    let seeds: Vec<String> = ["apple", "pear"]
        .iter()
        .filter(|w| s.n_kw(t, wid(&s, w)) > 0)
        .map(|w| w.to_string())
        .collect();
    let expected = s.next_topic_id();
    let r = apply_refinements(&s, &[Refinement::SplitTopic { topic: t, seeds: seeds.clone() }], ApplyOptions::default())
        .unwrap();
    assert_eq!(r.records[0], EdgeRecord::SplitTopic { topic: t, seeds: seeds.clone(), new_topic: expected });
    let c = r.state;
    assert!(c.is_active(expected));
    for w in [apple, pear] {
        if seeds.iter().any(|x| wid(&s, x) == w) {
            assert_eq!(c.n_kw(expected, w), c.word_total(w));
        }
    }
    assert!(c.next_topic_id() > expected);
}

#[test]
fn split_rejects_foreign_and_duplicate_seeds() {
    let s = trained(2, 13);
    let t = s.active_topics()[0];
    let absent = s
        .corpus()
        .vocabulary()
        .terms()
        .iter()
        .find(|w| s.n_kw(t, wid(&s, w)) == 0)
        .cloned();
    if let Some(w) = absent {
        assert!(compile(&Refinement::SplitTopic { topic: t, seeds: vec![w] }, &s).is_err());
    }
    let present = s.corpus().vocabulary().terms().iter().find(|w| s.n_kw(t, wid(&s, w)) > 0).unwrap().clone();
    assert!(compile(&Refinement::SplitTopic { topic: t, seeds: vec![present.clone(), present] }, &s).is_err());
}

#[test]
fn pending_queue_and_undo() {
    let a = Refinement::AddWord { word: "apple".into(), topic: 1 };
    let b = Refinement::RemoveWord { word: "pear".into(), topic: 2 };
    let c = Refinement::RemoveDoc { doc: "d3".into(), topic: 1 };
    let mut p = PendingSet::new();
    p.queue(a.clone());
    assert_eq!(p.undo(), Some(a.clone()));
    assert!(p.is_empty());
    p.queue(a.clone());
    p.queue(b.clone());
    p.queue(c.clone());
    assert_eq!(p.undo(), Some(c));
    assert_eq!(p.items(), &[a, b]);
    let mut e = PendingSet::new();
    assert_eq!(e.undo(), None);
    assert!(e.is_empty());
}

#[test]
fn records_serialize_flat() {
    let r = Refinement::SwapOrder { word1: "apple".into(), word2: "pear".into(), topic: 3 };
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v, serde_json::json!({"type": "swap_order", "word1": "apple", "word2": "pear", "topic": 3}));
    let e = EdgeRecord::SwapOrder { word1: "apple".into(), word2: "pear".into(), topic: 3, computed_delta: 0.5 };
    let v = serde_json::to_value(&e).unwrap();
    assert_eq!(v["computed_delta"], 0.5);
    assert_eq!(e.refinement(), Some(r));
    assert_eq!(EdgeRecord::Train { iters: 3 }.refinement(), None);
    let back: Refinement = serde_json::from_str(r#"{"type":"merge_topics","topic1":1,"topic2":2}"#).unwrap();
    assert_eq!(back, Refinement::MergeTopics { topic1: 1, topic2: 2 });
}

#[test]
fn records_follow_queue_order() {
    let s = trained(3, 14);
    let z = s.active_topics()[0];
    let rs = vec![
        Refinement::AddWord { word: "kiwi".into(), topic: z },
        Refinement::RemoveDoc { doc: "d1".into(), topic: z },
    ];
    let out = apply_refinements(&s, &rs, ApplyOptions::default()).unwrap();
    let back: Vec<Refinement> = out.records.iter().filter_map(EdgeRecord::refinement).collect();
    assert_eq!(back, rs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constraints_hold_after_apply(seed in 0u64..1000, ops in prop::collection::vec((0usize..6, any::<bool>()), 1..4)) {
        let s = trained(3, seed);
        let words = ["apple", "pear", "car", "bus", "food", "road"];
        let topics = s.active_topics().to_vec();
        let rs: Vec<Refinement> = ops
            .iter()
            .enumerate()
            .map(|(i, &(w, add))| {
                let topic = topics[i % topics.len()];
                let word = words[w].to_string();
                if add { Refinement::AddWord { word, topic } } else { Refinement::RemoveWord { word, topic } }
            })
            .collect();
        let child = apply(&s, rs);
        prop_assert_eq!(child.check_invariants(), Ok(()));
        for k in child.active_topics().iter().copied() {
            for w in 0..child.vocab_size() as u32 {
                if child.n_kw(k, w) > 0 {
                    for j in 0..child.corpus().len() {
                        let doc = &child.corpus().document(j).tokens;
                        for (i, &x) in doc.iter().enumerate() {
                            if x == w && child.token_topic(j, i) == Some(k) {
                                prop_assert!(child.potential().lookup(k, w, j as u32) > 0.0);
                            }
                        }
                    }
                }
            }
        }
    }
}
