//! Leveled stochastic grammars over procedure codes, linear trend
//! forecasts of their rules, seeded word simulation, continuous-time
//! Markov models of group conversation and an assembly-word parser.

pub mod assembly;
pub mod corpus;
pub mod error;
pub mod fixtures;
pub mod forecast;
pub mod generator;
pub mod grammar;
pub mod markov;
pub mod rng;

pub use assembly::{parse_aword, station_counts, structure_metrics, AssemblyNode, DAction, Declarations};
pub use corpus::{Alphabet, CorpusSeries, Letter, LongWord, PriceList, ShortWord, YearCorpus};
pub use error::{Error, Result};
pub use forecast::{fit_trends, TrendCell, TrendModel};
pub use generator::{CostStats, CountModel, GenConfig, Tables};
pub use grammar::{infer_grammar, ChoiceTable, Context, LeveledGrammar, Rule, RuleKey, StopTable};
pub use markov::{solve_ctmc, stationary, NeighborFn, Partition, RateMatrix, SemanticTree};
