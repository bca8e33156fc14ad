//! Brute-force reference for the one-vs-rest Bayes posterior.
//!
//! Everything here is recomputed from the raw labeled documents with exact
//! rational arithmetic: no logarithms, no floating point until the final
//! conversion. It shares no code with `wallfilter-core` so that tests can use
//! it as an independent check on the log-space implementation.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// A labeled training document, class given as an index.
#[derive(Debug, Clone)]
pub struct LabeledDoc {
    pub class: usize,
    pub tokens: Vec<String>,
}

fn int(n: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Exact-fraction posterior of `class` for `doc` under Laplace-smoothed
/// multinomial counts, one class against the union of all others.
///
/// `alpha` must be exactly representable; pass it as a rational.
pub fn posterior_exact(
    train: &[LabeledDoc],
    alpha: &BigRational,
    doc: &[String],
    class: usize,
) -> BigRational {
    let vocab: BTreeSet<&str> = train
        .iter()
        .flat_map(|d| d.tokens.iter().map(String::as_str))
        .collect();
    // An empty vocabulary would zero the smoothing denominator.
    let vocab_size = int(vocab.len().max(1));

    let total_docs = int(train.len());
    let in_class = train.iter().filter(|d| d.class == class).count();
    let prior = int(in_class) / total_docs.clone();
    let prior_rest = BigRational::one() - prior.clone();

    let count = |token: &str, mine: bool| -> usize {
        train
            .iter()
            .filter(|d| (d.class == class) == mine)
            .map(|d| d.tokens.iter().filter(|t| t.as_str() == token).count())
            .sum()
    };
    let total = |mine: bool| -> usize {
        train
            .iter()
            .filter(|d| (d.class == class) == mine)
            .map(|d| d.tokens.len())
            .sum()
    };
    let total_in = int(total(true));
    let total_out = int(total(false));

    let mut like_in = BigRational::one();
    let mut like_out = BigRational::one();
    for token in doc {
        like_in *= (int(count(token, true)) + alpha) / (total_in.clone() + alpha * &vocab_size);
        like_out *= (int(count(token, false)) + alpha) / (total_out.clone() + alpha * &vocab_size);
    }

    let numerator = like_in * prior;
    let denominator = numerator.clone() + like_out * prior_rest;
    if denominator.is_zero() {
        return BigRational::zero();
    }
    numerator / denominator
}

/// [`posterior_exact`] converted to the nearest `f64`.
pub fn posterior_f64(train: &[LabeledDoc], alpha: f64, doc: &[String], class: usize) -> f64 {
    let alpha = BigRational::from_float(alpha).expect("finite alpha");
    posterior_exact(train, &alpha, doc, class)
        .to_f64()
        .expect("posterior fits in f64")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(class: usize, tokens: &[&str]) -> LabeledDoc {
        LabeledDoc {
            class,
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
        }
    }

    #[test]
    fn spam_ham_by_hand() {
        // {[spam] x2 -> 1, [ham] x2 -> 0}, alpha 1, |V| = 2.
        // L_in = (2+1)/(2+2) = 3/4, L_out = (0+1)/(2+2) = 1/4, priors 1/2.
        let train = vec![doc(1, &["spam"]), doc(1, &["spam"]), doc(0, &["ham"]), doc(0, &["ham"])];
        let p = posterior_exact(&train, &BigRational::one(), &["spam".to_string()], 1);
        assert_eq!(p, BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn empty_doc_is_prior() {
        let train = vec![doc(0, &["a"]), doc(1, &["b"]), doc(1, &["c"])];
        let p = posterior_exact(&train, &BigRational::one(), &[], 1);
        assert_eq!(p, BigRational::new(2.into(), 3.into()));
    }

    #[test]
    fn absent_class_is_zero() {
        let train = vec![doc(0, &["a"])];
        assert!(posterior_exact(&train, &BigRational::one(), &["a".into()], 3).is_zero());
    }
}
