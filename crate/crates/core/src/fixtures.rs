//! Bundled reference data: the procedure alphabet, five yearly corpora
//! (1995-1999) and an example price list.

use crate::corpus::{Alphabet, CorpusSeries, PriceList, YearCorpus};

pub const ALPHABET_TSV: &str = include_str!("../fixtures/alphabet.tsv");
pub const PRICES_TSV: &str = include_str!("../fixtures/prices_example.tsv");
pub const TABLE_TSV: [&str; 5] = [
    include_str!("../fixtures/table1.tsv"),
    include_str!("../fixtures/table2.tsv"),
    include_str!("../fixtures/table3.tsv"),
    include_str!("../fixtures/table4.tsv"),
    include_str!("../fixtures/table5.tsv"),
];
/// The 1998 corpus without its `RD` row; the rows sum to 7032.
pub const TABLE4_GRAMMAR_TSV: &str = include_str!("../fixtures/table4_grammar.tsv");

pub fn alphabet() -> Alphabet {
    Alphabet::parse(ALPHABET_TSV).expect("bundled alphabet parses")
}

pub fn prices() -> PriceList {
    PriceList::parse(PRICES_TSV, &alphabet()).expect("bundled prices parse")
}

/// Corpus `n` of 1..=5 (years 1995..=1999), as transcribed.
pub fn table(n: usize) -> YearCorpus {
    YearCorpus::parse(TABLE_TSV[n - 1], &alphabet()).expect("bundled table parses")
}

pub fn table4_grammar_corpus() -> YearCorpus {
    YearCorpus::parse(TABLE4_GRAMMAR_TSV, &alphabet()).expect("bundled table parses")
}

pub fn all_tables() -> Vec<YearCorpus> {
    (1..=5).map(table).collect()
}

/// The five years with 1998 replaced by [`table4_grammar_corpus`].
pub fn series() -> CorpusSeries {
    let mut years = all_tables();
    years[3] = table4_grammar_corpus();
    CorpusSeries::new(alphabet(), years).expect("bundled series is ordered")
}
