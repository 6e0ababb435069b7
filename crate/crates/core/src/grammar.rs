//! Leveled stochastic regular grammars.
//!
//! A grammar is a prefix tree of contexts. The root context (written `S`)
//! produces the first letter of a word; the context reached after emitting
//! `l1 l2 ... lk` with continuation produces letter `k + 1`. Each context
//! owns a set of rules `(emit, continues)` whose probabilities sum to one,
//! where `continues` is the starred form in the published tables: a word
//! that goes on past this letter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Letter, ShortWord, YearCorpus};
use crate::error::{Error, Result};

pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Path from the root to a context; empty for the start symbol.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Context(Vec<Letter>);

impl Context {
    pub fn root() -> Self {
        Context(Vec::new())
    }

    pub fn new(prefix: Vec<Letter>) -> Self {
        Context(prefix)
    }

    pub fn prefix(&self) -> &[Letter] {
        &self.0
    }

    /// Level of the rules held by this context (root rules are level 1).
    pub fn level(&self) -> usize {
        self.0.len() + 1
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, letter: Letter) -> Context {
        let mut p = self.0.clone();
        p.push(letter);
        Context(p)
    }

    pub fn parent(&self) -> Option<(Context, Letter)> {
        let (last, rest) = self.0.split_last()?;
        Some((Context(rest.to_vec()), *last))
    }

    /// Inverse of `Display`: `S` is the root, anything else a short word.
    pub fn parse(s: &str, alphabet: &Alphabet) -> Result<Self> {
        if s.trim() == "S" {
            return Ok(Context::root());
        }
        Ok(Context(alphabet.parse_word(s)?.letters().to_vec()))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("S");
        }
        for l in &self.0 {
            f.write_str(l.as_str())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Outcome label within a context.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct RuleKey {
    pub emit: Letter,
    pub continues: bool,
}

impl RuleKey {
    pub fn stop(emit: Letter) -> Self {
        RuleKey {
            emit,
            continues: false,
        }
    }

    pub fn cont(emit: Letter) -> Self {
        RuleKey {
            emit,
            continues: true,
        }
    }
}

impl fmt::Display for RuleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.emit, if self.continues { "*" } else { "" })
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Rule {
    pub emit: Letter,
    pub continues: bool,
    pub probability: f64,
}

impl Rule {
    pub fn key(&self) -> RuleKey {
        RuleKey {
            emit: self.emit,
            continues: self.continues,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeveledGrammar {
    alphabet: Alphabet,
    // rules of each context sorted by (alphabet index, stop before continue)
    contexts: BTreeMap<Context, Vec<Rule>>,
}

impl LeveledGrammar {
    /// Validates and assembles a grammar from per-context rule lists.
    ///
    /// Zero-probability rules are kept. A continuation rule with positive
    /// probability requires its child context to exist; every non-root
    /// context requires the continuation rule leading to it.
    pub fn new(alphabet: Alphabet, contexts: BTreeMap<Context, Vec<Rule>>) -> Result<Self> {
        if !contexts.contains_key(&Context::root()) {
            return Err(Error::invalid("grammar", "missing start context S"));
        }
        let mut sorted = BTreeMap::new();
        for (ctx, mut rules) in contexts {
            if let Some(l) = ctx.prefix().iter().find(|l| !alphabet.contains(**l)) {
                return Err(Error::invalid("grammar", format!("context {ctx} uses unknown letter {l}")));
            }
            if rules.is_empty() {
                return Err(Error::invalid("grammar", format!("context {ctx} has no rules")));
            }
            let mut sum = 0.0;
            for r in &rules {
                if !alphabet.contains(r.emit) {
                    return Err(Error::invalid(
                        "grammar",
                        format!("context {ctx} emits unknown letter {}", r.emit),
                    ));
                }
                if !(0.0..=1.0).contains(&r.probability) {
                    return Err(Error::invalid(
                        "grammar",
                        format!("rule {ctx}->{} has probability {}", r.key(), r.probability),
                    ));
                }
                sum += r.probability;
            }
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(Error::invalid(
                    "grammar",
                    format!("rules of context {ctx} sum to {sum}"),
                ));
            }
            rules.sort_by_key(|r| (alphabet.index_of(r.emit), r.continues));
            if let Some(w) = rules.windows(2).find(|w| w[0].key() == w[1].key()) {
                return Err(Error::invalid(
                    "grammar",
                    format!("context {ctx} lists rule {} twice", w[0].key()),
                ));
            }
            sorted.insert(ctx, rules);
        }
        for (ctx, rules) in &sorted {
            if let Some((parent, letter)) = ctx.parent() {
                let reachable = sorted
                    .get(&parent)
                    .is_some_and(|rs| rs.iter().any(|r| r.emit == letter && r.continues));
                if !reachable {
                    return Err(Error::invalid(
                        "grammar",
                        format!("context {ctx} has no continuation rule {letter}* in {parent}"),
                    ));
                }
            }
            for r in rules.iter().filter(|r| r.continues && r.probability > 0.0) {
                if !sorted.contains_key(&ctx.child(r.emit)) {
                    return Err(Error::invalid(
                        "grammar",
                        format!("rule {ctx}->{}* leads to an undefined context", r.emit),
                    ));
                }
            }
        }
        Ok(LeveledGrammar {
            alphabet,
            contexts: sorted,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Context, &[Rule])> {
        self.contexts.iter().map(|(c, r)| (c, r.as_slice()))
    }

    pub fn rules(&self, ctx: &Context) -> Option<&[Rule]> {
        self.contexts.get(ctx).map(Vec::as_slice)
    }

    pub fn probability(&self, ctx: &Context, key: RuleKey) -> f64 {
        self.rules(ctx)
            .and_then(|rs| rs.iter().find(|r| r.key() == key))
            .map_or(0.0, |r| r.probability)
    }

    /// Number of levels (the longest word length the grammar can produce).
    pub fn depth(&self) -> usize {
        self.contexts.keys().map(Context::level).max().unwrap_or(0)
    }

    /// Contexts of level `d` (1-based) in canonical order.
    pub fn level(&self, d: usize) -> impl Iterator<Item = (&Context, &[Rule])> {
        self.contexts().filter(move |(c, _)| c.level() == d)
    }

    /// Chain product of rule probabilities; 0 when no chain exists.
    pub fn word_probability(&self, w: &ShortWord) -> f64 {
        let letters = w.letters();
        let mut ctx = Context::root();
        let mut p = 1.0;
        for (i, l) in letters.iter().enumerate() {
            let key = RuleKey {
                emit: *l,
                continues: i + 1 < letters.len(),
            };
            p *= self.probability(&ctx, key);
            if p == 0.0 {
                return 0.0;
            }
            ctx = ctx.child(*l);
        }
        p
    }

    /// Every word with nonzero probability, with that probability, in
    /// depth-first canonical order.
    pub fn distribution(&self) -> Vec<(ShortWord, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(Context::root(), 1.0)];
        while let Some((ctx, p)) = stack.pop() {
            let Some(rules) = self.contexts.get(&ctx) else {
                continue;
            };
            // reversed push keeps canonical order on pop
            for r in rules.iter().rev().filter(|r| r.probability > 0.0) {
                let q = p * r.probability;
                let child = ctx.child(r.emit);
                if r.continues {
                    stack.push((child, q));
                } else {
                    out.push((ShortWord::new(child.0).expect("non-empty"), q));
                }
            }
        }
        out
    }

    pub fn support(&self) -> BTreeSet<ShortWord> {
        self.distribution().into_iter().map(|(w, _)| w).collect()
    }

    /// Expected word length, Σ P(w)·|w|.
    pub fn expected_length(&self) -> f64 {
        self.distribution()
            .iter()
            .map(|(w, p)| p * w.len() as f64)
            .sum()
    }

    /// Table A (letter mass per context) and Table B (stop share per letter).
    pub fn choice_tables(&self) -> (ChoiceTable, StopTable) {
        let mut choice = BTreeMap::new();
        let mut stop = BTreeMap::new();
        for (ctx, rules) in &self.contexts {
            let mut entries: Vec<ChoiceEntry> = Vec::new();
            let mut shares = Vec::new();
            for r in rules {
                // rules are sorted, so the stop and continue rules of a letter are adjacent
                let (s, c) = if r.continues { (0.0, r.probability) } else { (r.probability, 0.0) };
                match entries.last_mut() {
                    Some(e) if e.letter == r.emit => {
                        e.mass += r.probability;
                        e.stop_mass += s;
                        e.continue_mass += c;
                    }
                    _ => entries.push(ChoiceEntry {
                        letter: r.emit,
                        mass: r.probability,
                        stop_mass: s,
                        continue_mass: c,
                    }),
                }
            }
            entries.retain(|e| e.mass > 0.0);
            for e in &entries {
                shares.push((e.letter, e.stop_mass / e.mass));
            }
            choice.insert(ctx.clone(), entries);
            stop.insert(ctx.clone(), shares);
        }
        (ChoiceTable(choice), StopTable(stop))
    }

    /// Structured export; see [`GrammarDoc`].
    pub fn to_doc(&self) -> GrammarDoc {
        let mut levels: Vec<Vec<RuleDoc>> = vec![Vec::new(); self.depth()];
        for (ctx, rules) in &self.contexts {
            for r in rules {
                levels[ctx.level() - 1].push(RuleDoc {
                    context: ctx.to_string(),
                    emit: r.emit,
                    continues: r.continues,
                    probability: round_sig(r.probability, 12),
                });
            }
        }
        GrammarDoc {
            alphabet: self
                .alphabet
                .entries()
                .map(|(letter, d)| AlphabetEntry {
                    letter,
                    description: d.to_string(),
                })
                .collect(),
            levels,
        }
    }

    pub fn from_doc(doc: &GrammarDoc) -> Result<Self> {
        let alphabet = Alphabet::new(
            doc.alphabet
                .iter()
                .map(|e| (e.letter, e.description.clone())),
        )?;
        let mut contexts: BTreeMap<Context, Vec<Rule>> = BTreeMap::new();
        for (i, level) in doc.levels.iter().enumerate() {
            for r in level {
                let ctx = Context::parse(&r.context, &alphabet)?;
                if ctx.level() != i + 1 {
                    return Err(Error::invalid(
                        "grammar",
                        format!("context {} listed under level {}", r.context, i + 1),
                    ));
                }
                contexts.entry(ctx).or_default().push(Rule {
                    emit: r.emit,
                    continues: r.continues,
                    probability: r.probability,
                });
            }
        }
        LeveledGrammar::new(alphabet, contexts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("grammar serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GrammarDoc = serde_json::from_str(text)
            .map_err(|e| Error::parse(e.line(), e.to_string()))?;
        LeveledGrammar::from_doc(&doc)
    }
}

/// Count-normalized grammar of a corpus. Each context's rules are divided by
/// the listed mass of the words traversing it.
pub fn infer_grammar(corpus: &YearCorpus, alphabet: &Alphabet) -> Result<LeveledGrammar> {
    let mut counts: BTreeMap<Context, HashMap<RuleKey, u64>> = BTreeMap::new();
    for (w, c) in corpus.rows() {
        let letters = w.letters();
        for (d, l) in letters.iter().enumerate() {
            let key = RuleKey {
                emit: *l,
                continues: d + 1 < letters.len(),
            };
            *counts
                .entry(Context(letters[..d].to_vec()))
                .or_default()
                .entry(key)
                .or_default() += c;
        }
    }
    let contexts = counts
        .into_iter()
        .map(|(ctx, rules)| {
            let total: u64 = rules.values().sum();
            let rules = rules
                .into_iter()
                .map(|(k, c)| Rule {
                    emit: k.emit,
                    continues: k.continues,
                    probability: c as f64 / total as f64,
                })
                .collect();
            (ctx, rules)
        })
        .collect();
    LeveledGrammar::new(alphabet.clone(), contexts)
}

pub(crate) fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", (digits - 1) as usize, x).parse().unwrap_or(x)
}

/// One letter of Table A. `continue_mass > 0` is the starred form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChoiceEntry {
    pub letter: Letter,
    pub mass: f64,
    pub stop_mass: f64,
    pub continue_mass: f64,
}

impl ChoiceEntry {
    pub fn starred(&self) -> bool {
        self.continue_mass > 0.0
    }
}

/// Per-context letter choice probabilities, in canonical alphabet order.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiceTable(BTreeMap<Context, Vec<ChoiceEntry>>);

impl ChoiceTable {
    pub fn entries(&self, ctx: &Context) -> Option<&[ChoiceEntry]> {
        self.0.get(ctx).map(Vec::as_slice)
    }

    pub fn get(&self, ctx: &Context, letter: Letter) -> Option<f64> {
        self.entries(ctx)?
            .iter()
            .find(|e| e.letter == letter)
            .map(|e| e.mass)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Context, &[ChoiceEntry])> {
        self.0.iter().map(|(c, e)| (c, e.as_slice()))
    }
}

/// Per-context, per-letter probability of stopping after the letter.
#[derive(Clone, Debug, PartialEq)]
pub struct StopTable(BTreeMap<Context, Vec<(Letter, f64)>>);

impl StopTable {
    pub fn get(&self, ctx: &Context, letter: Letter) -> Option<f64> {
        self.0
            .get(ctx)?
            .iter()
            .find(|(l, _)| *l == letter)
            .map(|(_, s)| *s)
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&Context, &[(Letter, f64)])> {
        self.0.iter().map(|(c, e)| (c, e.as_slice()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphabetEntry {
    pub letter: Letter,
    #[serde(default)]
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleDoc {
    pub context: String,
    pub emit: Letter,
    pub continues: bool,
    pub probability: f64,
}

/// Interchange form: `levels[d - 1]` holds every rule of level `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrammarDoc {
    pub alphabet: Vec<AlphabetEntry>,
    pub levels: Vec<Vec<RuleDoc>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn l(s: &str) -> Letter {
        Letter::new(s).unwrap()
    }

    fn word(a: &Alphabet, s: &str) -> ShortWord {
        a.parse_word(s).unwrap()
    }

    #[test]
    fn degenerate_corpus() {
        let a = Alphabet::from_codes(["DR"]).unwrap();
        let c = YearCorpus::parse("#year:2000\nDR\t10\n", &a).unwrap();
        let g = infer_grammar(&c, &a).unwrap();
        assert_eq!(g.probability(&Context::root(), RuleKey::stop(l("DR"))), 1.0);
        assert_eq!(g.word_probability(&word(&a, "DR")), 1.0);
        assert_eq!(g.support().len(), 1);
    }

    #[test]
    fn table1_counts() {
        let a = fixtures::alphabet();
        let c = fixtures::table(1);
        let g = infer_grammar(&c, &a).unwrap();
        let p = g.word_probability(&word(&a, "DR"));
        assert!((p - 357.0 / 676.0).abs() < 1e-12);
        assert!((p - 0.528).abs() < 1e-3);
        assert_eq!(g.support().len(), 11);
        assert_eq!(g.word_probability(&word(&a, "SOSOSO")), 0.0);
    }

    #[test]
    fn table4_level_one() {
        let a = fixtures::alphabet();
        let g = infer_grammar(&fixtures::table4_grammar_corpus(), &a).unwrap();
        let s = Context::root();
        assert!((g.probability(&s, RuleKey::stop(l("DR"))) - 3032.0 / 7032.0).abs() < 1e-15);
        assert!((g.probability(&s, RuleKey::cont(l("DR"))) - 1815.0 / 7032.0).abs() < 1e-15);
    }

    #[test]
    fn faithful_on_every_fixture() {
        let a = fixtures::alphabet();
        for c in fixtures::all_tables() {
            let g = infer_grammar(&c, &a).unwrap();
            let total = c.total() as f64;
            for (w, n) in c.rows() {
                assert!((g.word_probability(w) - *n as f64 / total).abs() < 1e-12, "{w}");
            }
            let support: BTreeSet<_> = c.rows().iter().map(|(w, _)| w.clone()).collect();
            assert_eq!(g.support(), support);
            let mass: f64 = g.distribution().iter().map(|(_, p)| p).sum();
            assert!((mass - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn table_identity() {
        let a = fixtures::alphabet();
        let g = infer_grammar(&fixtures::table(4), &a).unwrap();
        let (choice, stop) = g.choice_tables();
        for (ctx, rules) in g.contexts() {
            let col: f64 = choice.entries(ctx).unwrap().iter().map(|e| e.mass).sum();
            assert!((col - 1.0).abs() < 1e-9);
            for r in rules.iter().filter(|r| !r.continues) {
                let lhs = choice.get(ctx, r.emit).unwrap() * stop.get(ctx, r.emit).unwrap();
                assert!((lhs - r.probability).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stop_share_edges() {
        let a = Alphabet::from_codes(["A_", "DR"]).unwrap();
        let c = YearCorpus::parse("#year:2000\nA_\t2\nA_DR\t2\nDR\t4\n", &a).unwrap();
        let g = infer_grammar(&c, &a).unwrap();
        let (choice, stop) = g.choice_tables();
        let s = Context::root();
        assert_eq!(stop.get(&s, l("A_")), Some(0.5));
        assert_eq!(stop.get(&s, l("DR")), Some(1.0));
        assert_eq!(choice.get(&s, l("A_")), Some(0.5));
        assert!(choice.entries(&s).unwrap()[0].starred());
    }

    #[test]
    fn json_round_trip() {
        let a = fixtures::alphabet();
        let g = infer_grammar(&fixtures::table(3), &a).unwrap();
        let back = LeveledGrammar::from_json(&g.to_json()).unwrap();
        for (ctx, rules) in g.contexts() {
            for r in rules {
                let q = back.probability(ctx, r.key());
                assert!((q - r.probability).abs() <= 1e-11 * r.probability);
            }
        }
        assert_eq!(back.support(), g.support());
    }

    #[test]
    fn json_context_names() {
        let a = fixtures::alphabet();
        let g = infer_grammar(&fixtures::table4_grammar_corpus(), &a).unwrap();
        let json = g.to_json();
        assert!(json.contains("\"context\": \"S\""));
        assert!(json.contains("\"context\": \"A_\""));
    }

    #[test]
    fn rejects_broken_trees() {
        let a = Alphabet::from_codes(["A_", "DR"]).unwrap();
        let mut ctx = BTreeMap::new();
        ctx.insert(
            Context::root(),
            vec![Rule { emit: l("A_"), continues: true, probability: 1.0 }],
        );
        assert!(LeveledGrammar::new(a.clone(), ctx.clone()).is_err(), "dangling continuation");
        ctx.insert(
            Context::new(vec![l("DR")]),
            vec![Rule { emit: l("A_"), continues: false, probability: 1.0 }],
        );
        assert!(LeveledGrammar::new(a.clone(), ctx).is_err(), "unreachable context");

        let mut bad = BTreeMap::new();
        bad.insert(
            Context::root(),
            vec![Rule { emit: l("DR"), continues: false, probability: 0.7 }],
        );
        assert!(LeveledGrammar::new(a, bad).is_err(), "does not sum to 1");
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<(Vec<usize>, u64)>> {
        prop::collection::vec((prop::collection::vec(0usize..4, 1..5), 1u64..50), 1..12)
    }

    proptest! {
        #[test]
        fn random_corpora_are_faithful(rows in corpus_strategy()) {
            let a = Alphabet::from_codes(["A_", "AN", "DR", "S4"]).unwrap();
            let mut merged: BTreeMap<ShortWord, u64> = BTreeMap::new();
            for (idx, c) in rows {
                let w = ShortWord::new(idx.iter().map(|i| a.letters()[*i]).collect()).unwrap();
                *merged.entry(w).or_default() += c;
            }
            let total: u64 = merged.values().sum();
            let corpus = YearCorpus::new(2000, merged.clone().into_iter().collect(), None).unwrap();
            let g = infer_grammar(&corpus, &a).unwrap();
            for (ctx, rules) in g.contexts() {
                let s: f64 = rules.iter().map(|r| r.probability).sum();
                prop_assert!((s - 1.0).abs() < 1e-9, "{ctx}");
            }
            for (w, c) in &merged {
                prop_assert!((g.word_probability(w) - *c as f64 / total as f64).abs() < 1e-12);
            }
            prop_assert_eq!(g.support(), merged.keys().cloned().collect::<BTreeSet<_>>());
        }

        #[test]
        fn word_format_round_trip(idx in prop::collection::vec(0usize..14, 1..8)) {
            let a = fixtures::alphabet();
            let w = ShortWord::new(idx.iter().map(|i| a.letters()[*i]).collect()).unwrap();
            prop_assert_eq!(a.parse_word(&w.to_string()).unwrap(), w);
        }
    }
}
