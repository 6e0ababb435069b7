//! Simulation of short and long words from Table A / Table B, and cost
//! statistics against a price list.
//!
//! Word `i` of a run draws everything it needs (letters, stop decisions,
//! repetition counts) from its own substream `(seed, stream, i)`, so a run
//! split into batches concatenates to the single-batch output exactly.

use std::collections::BTreeMap;
use std::ops::Range;

use rand_core::RngCore;

use crate::corpus::{Letter, LongWord, PriceList, ShortWord};
use crate::error::{Error, Result};
use crate::grammar::{ChoiceTable, Context, StopTable};
use crate::rng::{pick, streams, substream, uniform};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub n: u64,
    pub stream: u64,
}

impl GenConfig {
    pub fn new(seed: u64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::pre("n must be ≥ 1"));
        }
        Ok(GenConfig {
            seed,
            n,
            stream: streams::WORDS,
        })
    }

    pub fn with_stream(self, stream: u64) -> Self {
        GenConfig { stream, ..self }
    }
}

/// Table A and Table B of one grammar.
#[derive(Clone, Debug, PartialEq)]
pub struct Tables {
    pub choice: ChoiceTable,
    pub stop: StopTable,
}

impl From<(ChoiceTable, StopTable)> for Tables {
    fn from((choice, stop): (ChoiceTable, StopTable)) -> Self {
        Tables { choice, stop }
    }
}

/// One pass of the generation loop: choose a letter at the current level,
/// and when it may continue, decide between stopping and descending.
pub fn sample_word(tables: &Tables, rng: &mut impl RngCore) -> Result<ShortWord> {
    let mut ctx = Context::root();
    loop {
        let entries = tables
            .choice
            .entries(&ctx)
            .filter(|e| !e.is_empty())
            .ok_or_else(|| Error::invalid("tables", format!("context {ctx} has no entries")))?;
        let i = pick(entries.iter().map(|e| e.mass), uniform(rng))
            .ok_or_else(|| Error::invalid("tables", format!("context {ctx} has zero mass")))?;
        let e = entries[i];
        let stop = if e.starred() {
            let share = tables.stop.get(&ctx, e.letter).ok_or_else(|| {
                Error::invalid("tables", format!("no stop share for {} in {ctx}", e.letter))
            })?;
            uniform(rng) < share
        } else {
            true
        };
        ctx = ctx.child(e.letter);
        if stop {
            return ShortWord::new(ctx.prefix().to_vec());
        }
    }
}

/// Words `range` of the run described by `seed` and `stream`.
pub fn generate_range(
    tables: &Tables,
    seed: u64,
    stream: u64,
    range: Range<u64>,
) -> Result<Vec<ShortWord>> {
    range
        .map(|i| sample_word(tables, &mut substream(seed, stream, i)))
        .collect()
}

pub fn generate_short(tables: &Tables, cfg: &GenConfig) -> Result<Vec<ShortWord>> {
    generate_range(tables, cfg.seed, cfg.stream, 0..cfg.n)
}

/// Distribution of repetition counts for one letter.
#[derive(Clone, Debug, PartialEq)]
pub enum CountDist {
    /// `(count, probability)` in increasing count order.
    Empirical(Vec<(u32, f64)>),
    /// Geometric on `{1, 2, ...}` with the given mean (≥ 1).
    Geometric { mean: f64 },
}

impl CountDist {
    pub fn degenerate() -> Self {
        CountDist::Empirical(vec![(1, 1.0)])
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> u32 {
        match self {
            CountDist::Empirical(table) => {
                let i = pick(table.iter().map(|(_, p)| *p), uniform(rng)).unwrap_or(0);
                table[i].0
            }
            CountDist::Geometric { mean } => {
                let p = 1.0 / mean;
                if p >= 1.0 {
                    return 1;
                }
                // 1 - u lies in (0, 1]
                let u = 1.0 - uniform(rng);
                let k = 1.0 + (u.ln() / (1.0 - p).ln()).floor();
                k.min(u32::MAX as f64) as u32
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CountDist::Empirical(t) => t.iter().map(|(c, p)| *c as f64 * p).sum(),
            CountDist::Geometric { mean } => *mean,
        }
    }
}

/// Per-letter repetition-count distributions; unlisted letters repeat once.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CountModel {
    dists: BTreeMap<Letter, CountDist>,
}

impl CountModel {
    pub fn new(dists: BTreeMap<Letter, CountDist>) -> Result<Self> {
        for (l, d) in &dists {
            match d {
                CountDist::Empirical(t) => {
                    let s: f64 = t.iter().map(|(_, p)| p).sum();
                    if t.is_empty() || (s - 1.0).abs() > 1e-9 {
                        return Err(Error::invalid("count model", format!("{l} does not sum to 1")));
                    }
                    if t.iter().any(|(c, p)| *c == 0 || *p < 0.0) {
                        return Err(Error::invalid("count model", format!("{l} has count 0 or a negative weight")));
                    }
                }
                CountDist::Geometric { mean } => {
                    if !(mean.is_finite() && *mean >= 1.0) {
                        return Err(Error::invalid("count model", format!("{l} mean must be ≥ 1")));
                    }
                }
            }
        }
        Ok(CountModel { dists })
    }

    /// Every letter repeats once.
    pub fn unit() -> Self {
        CountModel::default()
    }

    pub fn geometric(letters: &[Letter], mean: f64) -> Result<Self> {
        CountModel::new(
            letters
                .iter()
                .map(|l| (*l, CountDist::Geometric { mean }))
                .collect(),
        )
    }

    pub fn dist(&self, letter: Letter) -> CountDist {
        self.dists
            .get(&letter)
            .cloned()
            .unwrap_or_else(CountDist::degenerate)
    }

    fn sample(&self, letter: Letter, rng: &mut impl RngCore) -> u32 {
        match self.dists.get(&letter) {
            Some(d) => d.sample(rng),
            None => 1,
        }
    }
}

/// Pooled empirical count distribution of every letter in a weighted
/// long-word corpus.
pub fn fit_count_model(corpus: &[(LongWord, u64)]) -> Result<CountModel> {
    if corpus.is_empty() {
        return Err(Error::pre("count corpus is empty"));
    }
    let mut tallies: BTreeMap<Letter, BTreeMap<u32, u64>> = BTreeMap::new();
    for (w, weight) in corpus {
        for (l, c) in w.entries() {
            *tallies.entry(*l).or_default().entry(*c).or_default() += weight;
        }
    }
    let dists = tallies
        .into_iter()
        .filter_map(|(l, t)| {
            let total: u64 = t.values().sum();
            (total > 0).then(|| {
                let table = t
                    .into_iter()
                    .map(|(c, n)| (c, n as f64 / total as f64))
                    .collect();
                (l, CountDist::Empirical(table))
            })
        })
        .collect();
    CountModel::new(dists)
}

/// Attaches a sampled repetition count to every letter of `w`, in order.
pub fn expand_with(w: &ShortWord, model: &CountModel, rng: &mut impl RngCore) -> LongWord {
    let entries = w
        .letters()
        .iter()
        .map(|l| (*l, model.sample(*l, rng)))
        .collect();
    LongWord::new(entries).expect("counts are ≥ 1 and the word is non-empty")
}

/// [`expand_with`] on the dedicated count stream of `seed`.
pub fn expand_long(w: &ShortWord, model: &CountModel, seed: u64) -> LongWord {
    expand_with(w, model, &mut substream(seed, streams::COUNTS, 0))
}

/// Words `range` of a run, each expanded with counts drawn after its
/// letters on the same substream.
pub fn simulate_range(
    tables: &Tables,
    model: &CountModel,
    seed: u64,
    stream: u64,
    range: Range<u64>,
) -> Result<Vec<LongWord>> {
    range
        .map(|i| {
            let mut rng = substream(seed, stream, i);
            let w = sample_word(tables, &mut rng)?;
            Ok(expand_with(&w, model, &mut rng))
        })
        .collect()
}

pub fn simulate(tables: &Tables, model: &CountModel, cfg: &GenConfig) -> Result<Vec<LongWord>> {
    simulate_range(tables, model, cfg.seed, cfg.stream, 0..cfg.n)
}

/// Σ count · price.
pub fn cost(w: &LongWord, prices: &PriceList) -> Result<f64> {
    w.entries()
        .iter()
        .map(|(l, c)| {
            prices
                .price(*l)
                .map(|p| *c as f64 * p)
                .ok_or_else(|| Error::pre(format!("no price for {l}")))
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostStats {
    pub n: usize,
    pub mean: f64,
    /// Absent when some word costs 0.
    pub harmonic_mean: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl CostStats {
    pub fn from_costs(costs: &[f64]) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::pre("cost statistics need at least one word"));
        }
        if let Some(c) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::pre(format!("invalid cost {c}")));
        }
        let n = costs.len();
        let mean = costs.iter().sum::<f64>() / n as f64;
        let harmonic_mean = costs
            .iter()
            .all(|c| *c > 0.0)
            .then(|| n as f64 / costs.iter().map(|c| 1.0 / c).sum::<f64>());
        Ok(CostStats {
            n,
            mean,
            harmonic_mean,
            min: costs.iter().copied().fold(f64::INFINITY, f64::min),
            max: costs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    pub fn harmonic(&self) -> Result<f64> {
        self.harmonic_mean
            .ok_or_else(|| Error::pre("harmonic mean undefined: a word costs 0"))
    }

    pub fn to_tsv(&self) -> String {
        let h = self
            .harmonic_mean
            .map_or_else(|| "NA".to_string(), |h| format!("{h:.4}"));
        format!(
            "stat\tvalue\nn\t{}\nmean\t{:.4}\nharmonic_mean\t{h}\nmin\t{:.4}\nmax\t{:.4}\n",
            self.n, self.mean, self.min, self.max
        )
    }
}

pub fn cost_stats(population: &[LongWord], prices: &PriceList) -> Result<CostStats> {
    let costs = population
        .iter()
        .map(|w| cost(w, prices))
        .collect::<Result<Vec<_>>>()?;
    CostStats::from_costs(&costs)
}
