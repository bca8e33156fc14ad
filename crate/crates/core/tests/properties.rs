use std::collections::{BTreeSet, VecDeque};

use proptest::prelude::*;
use wallfilter_core::corpus::{parse_corpus_xml, preprocess, tokenize, whitespace_tokens};
use wallfilter_core::eval::evaluate;
use wallfilter_core::policy::{decide, DecisionKind, ModerationDecision};
use wallfilter_core::svm::featurize;
use wallfilter_core::{
    ClassLabel, ClassPosterior, Corpus, NbModel, PerClass, PolicyConfig, RawMessage, StopList,
    SvmModel, SvmParams, TokenizedDoc, UserProfile,
};
use wallfilter_oracle::{posterior_f64, LabeledDoc};

const POOL: [&str; 10] = ["t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"];

fn label() -> impl Strategy<Value = ClassLabel> {
    (0usize..5).prop_map(|i| ClassLabel::ALL[i])
}

fn small_doc(max_len: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(&POOL[..]), 0..=max_len)
        .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

fn training_set() -> impl Strategy<Value = Vec<TokenizedDoc>> {
    prop::collection::vec((small_doc(6), label()), 1..=20).prop_map(|docs| {
        docs.into_iter()
            .map(|(tokens, l)| TokenizedDoc::from_tokens(tokens).labeled(l))
            .collect()
    })
}

fn query_doc() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop_oneof![9 => prop::sample::select(&POOL[..]), 1 => Just("unseen")],
        0..=8,
    )
    .prop_map(|v| v.into_iter().map(str::to_string).collect())
}

fn alpha() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.25, 0.5, 1.0, 2.0])
}

fn as_oracle(docs: &[TokenizedDoc]) -> Vec<LabeledDoc> {
    docs.iter()
        .map(|d| LabeledDoc {
            class: d.label.unwrap().index(),
            tokens: d.tokens.clone(),
        })
        .collect()
}

fn messages() -> impl Strategy<Value = Vec<RawMessage>> {
    prop::collection::vec(
        (
            "[a-z0-9]{1,5}",
            "\\PC{0,30}",
            prop::option::of(label()),
        ),
        0..8,
    )
    .prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, (author, text, label))| RawMessage {
                id: format!("m{i}"),
                author_id: author,
                text,
                label,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn posterior_matches_exact_fractions(
        train in training_set(),
        doc in query_doc(),
        alpha in alpha(),
    ) {
        let model = NbModel::train(&train, alpha).unwrap();
        let oracle_train = as_oracle(&train);
        let query = TokenizedDoc::from_tokens(doc.clone());
        for c in ClassLabel::ALL {
            let got = model.posterior(&query, c);
            let want = posterior_f64(&oracle_train, alpha, &doc, c.index());
            prop_assert!((got - want).abs() <= 1e-9, "{c}: {got} vs {want}");
        }
    }

    #[test]
    fn complement_sums_to_one(train in training_set(), doc in query_doc(), c in label()) {
        let model = NbModel::train(&train, 1.0).unwrap();
        let d = TokenizedDoc::from_tokens(doc);
        let p = model.posterior(&d, c);
        let q = model.complement_posterior(&d, c);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn likelihood_is_a_probability(train in training_set(), t in query_doc(), c in label(), comp: bool) {
        let model = NbModel::train(&train, 1.0).unwrap();
        for token in &t {
            let l = model.token_likelihood(token, c, comp);
            prop_assert!(l > 0.0 && l <= 1.0);
            if model.vocabulary_len() >= 2 {
                prop_assert!(l < 1.0);
            }
        }
    }

    #[test]
    fn classify_ignores_token_order(train in training_set(), doc in query_doc(), seed: u64) {
        let model = NbModel::train(&train, 1.0).unwrap();
        let mut shuffled = doc.clone();
        // Fisher-Yates driven by a simple LCG so the permutation is arbitrary.
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let a = model.classify(&TokenizedDoc::from_tokens(doc));
        let b = model.classify(&TokenizedDoc::from_tokens(shuffled));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn evidence_for_class_never_lowers_its_posterior(
        train in training_set(),
        doc in query_doc(),
        c in label(),
    ) {
        let model = NbModel::train(&train, 1.0).unwrap();
        let base = model.posterior(&TokenizedDoc::from_tokens(doc.clone()), c);
        for extra in POOL {
            if model.token_likelihood(extra, c, false) > model.token_likelihood(extra, c, true) {
                let mut longer = doc.clone();
                longer.push(extra.to_string());
                let p = model.posterior(&TokenizedDoc::from_tokens(longer), c);
                prop_assert!(p >= base, "{extra}: {p} < {base}");
            }
        }
    }

    #[test]
    fn training_is_order_independent_and_bit_stable(train in training_set()) {
        let mut reversed = train.clone();
        reversed.reverse();
        let a = NbModel::train(&train, 1.0).unwrap().to_bytes();
        let b = NbModel::train(&train, 1.0).unwrap().to_bytes();
        let r = NbModel::train(&reversed, 1.0).unwrap().to_bytes();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(&a, &r);
        prop_assert_eq!(NbModel::from_bytes(&a).unwrap(), NbModel::train(&train, 1.0).unwrap());
    }

    #[test]
    fn corpus_xml_round_trip(docs in messages()) {
        let corpus = Corpus::new(docs).unwrap();
        let back = parse_corpus_xml(corpus.to_xml().as_bytes()).unwrap();
        prop_assert_eq!(back, corpus);
    }

    #[test]
    fn preprocessing_is_idempotent(text in "\\PC{0,40}") {
        let stops = StopList::english();
        let msg = RawMessage { id: "x".into(), author_id: "a".into(), text, label: None };
        let once = preprocess(&msg, &stops);
        let again = preprocess(&RawMessage { text: once.tokens.join(" "), ..msg }, &stops);
        prop_assert_eq!(&once.tokens, &again.tokens);
        for t in &once.tokens {
            prop_assert!(!t.is_empty());
            prop_assert!(!stops.contains(t));
            prop_assert!(t.chars().all(char::is_alphanumeric));
            prop_assert_eq!(&t.to_lowercase(), t);
        }
    }

    // Holds when no whitespace-delimited word has punctuation between two
    // alphanumeric runs; see the README for the general caveat.
    #[test]
    fn preprocessing_never_grows_vocabulary(
        texts in prop::collection::vec(
            prop::collection::vec("(the|I|A|[A-Za-z0-9]{1,5})[,.!?]?", 0..8),
            1..10,
        )
    ) {
        let stops = StopList::english();
        let mut with = BTreeSet::new();
        let mut without = BTreeSet::new();
        for (i, words) in texts.iter().enumerate() {
            let msg = RawMessage {
                id: format!("m{i}"),
                author_id: "a".into(),
                text: words.join(" "),
                label: None,
            };
            with.extend(preprocess(&msg, &stops).tokens);
            without.extend(whitespace_tokens(&msg).tokens);
        }
        prop_assert!(with.len() <= without.len());
    }

    #[test]
    fn raising_tau_never_adds_flags(probs in prop::array::uniform5(0.0f64..=1.0), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let post = ClassPosterior::new(PerClass::from_fn(|c| probs[c.index()]));
        let flagged = |tau| {
            let cfg = PolicyConfig { tau, ..PolicyConfig::default() };
            decide(&post, &cfg).flagged_classes()
        };
        let strict = flagged(hi);
        prop_assert!(strict.is_subset(&flagged(lo)));
        prop_assert!(!strict.contains(&ClassLabel::Neutral));
    }

    #[test]
    fn user_window_law(
        flags in prop::collection::vec(prop::option::of(label()), 0..40),
        window in 1usize..8,
        rho in 0.05f64..=1.0,
    ) {
        let cfg = PolicyConfig { window, rho, ..PolicyConfig::default() };
        let mut profile = UserProfile::new("u");
        let mut shadow: VecDeque<bool> = VecDeque::new();
        let mut should_block = false;
        for (i, f) in flags.iter().enumerate() {
            let kind = match f {
                Some(c) if !c.is_neutral() => DecisionKind::Flag([*c].into()),
                _ => DecisionKind::Publish,
            };
            let flagged = matches!(kind, DecisionKind::Flag(_));
            profile.record(&format!("m{i}"), &ModerationDecision { kind, evidence: None }, &cfg);
            shadow.push_back(flagged);
            if shadow.len() > window {
                shadow.pop_front();
            }
            let count = shadow.iter().filter(|&&b| b).count();
            should_block |= count as f64 / window as f64 >= rho;
            prop_assert!(profile.recent_outcomes.len() <= window);
            prop_assert_eq!(profile.blocked, should_block);
            prop_assert!(profile.restricted_classes.iter().all(|c| !c.is_neutral()));
        }
    }

    #[test]
    fn svm_margins_are_linear_in_counts(train in training_set(), doc in small_doc(6), k in 1u32..6, c in label()) {
        let params = SvmParams { epochs: 3, ..SvmParams::default() };
        let model = SvmModel::train(&train, params).unwrap();
        let x = featurize(&TokenizedDoc::from_tokens(doc), model.vocab());
        let b = model.bias(c);
        let base = model.margin(c, &x) - b;
        let scaled = model.margin(c, &x.scaled(k)) - b;
        let tol = 1e-9 * (1.0 + base.abs() * k as f64 + b.abs());
        prop_assert!((scaled - k as f64 * base).abs() <= tol, "{scaled} vs {}", k as f64 * base);
    }

    #[test]
    fn confusion_rows_match_gold_counts(
        pairs in prop::collection::vec((label(), label()), 1..50)
    ) {
        let docs: Vec<TokenizedDoc> = pairs
            .iter()
            .enumerate()
            .map(|(i, (gold, pred))| TokenizedDoc {
                message_id: i.to_string(),
                tokens: vec![pred.as_str().to_string()],
                label: Some(*gold),
            })
            .collect();
        let by_token = |d: &TokenizedDoc| d.tokens[0].parse::<ClassLabel>().unwrap();
        let r = evaluate(&by_token, &docs).unwrap();
        prop_assert_eq!(r.correct, r.confusion.trace());
        prop_assert_eq!(r.correct + r.incorrect, pairs.len() as u64);
        for c in ClassLabel::ALL {
            let gold = pairs.iter().filter(|(g, _)| *g == c).count() as u64;
            prop_assert_eq!(r.confusion.row_sum(c), gold);
        }
    }
}

#[test]
fn tokenizer_never_emits_empty_tokens_on_separators_only() {
    assert!(tokenize("--- ... !!!").is_empty());
}
