//! Shared inputs for the benchmarks.

use actlang::generator::Tables;
use actlang::markov::conversation::conversation_chain;
use actlang::{fixtures, infer_grammar, RateMatrix};

/// Choice tables of the grammar inferred from the largest bundled corpus.
pub fn tables() -> Tables {
    infer_grammar(&fixtures::table4_grammar_corpus(), &fixtures::alphabet())
        .expect("bundled corpus infers")
        .choice_tables()
        .into()
}

/// The 14-state conversation chain with uneven, strictly positive rates.
pub fn chain() -> RateMatrix {
    conversation_chain(|j, k| 0.2 + 0.1 * ((3 * j + 7 * k) % 11) as f64).expect("rates are positive")
}

/// Initial distribution with all mass on the first state.
pub fn point_mass(n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[0] = 1.0;
    p
}
