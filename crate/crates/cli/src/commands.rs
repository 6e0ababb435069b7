use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use actlang::assembly::{parse_aword, station_counts, structure_metrics, AssemblyNode, Declarations};
use actlang::forecast::fixture;
use actlang::forecast::Prediction;
use actlang::generator::{cost_stats, generate_short, simulate, CountModel, GenConfig, Tables};
use actlang::grammar::GrammarDoc;
use actlang::markov::ctmc::{trajectory, ChainDoc, RateMatrix};
use actlang::markov::tree::{tree_chain, tree_transition, TreeDoc};
use actlang::{fit_trends, fixtures, infer_grammar, Alphabet, Context, CorpusSeries, LeveledGrammar, LongWord, PriceList, Rule, RuleKey, YearCorpus};
use serde_json::{json, Value};

use crate::output::{emit, num, unwrap_data, Provenance};
use crate::{Command, Common, Failure};

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn text(path: &Path, bytes: &[u8]) -> Result<String, Failure> {
    String::from_utf8(bytes.to_vec()).map_err(|_| Failure::input(format!("{}: not UTF-8 text", path.display())))
}

fn json_doc<T: serde::de::DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, Failure> {
    let v: Value = serde_json::from_slice(bytes)
        .map_err(|e| Failure::input(format!("{}:{}: {e}", path.display(), e.line())))?;
    serde_json::from_value(unwrap_data(v)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Inputs read once, so the digest and the parse see the same bytes.
struct Inputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Inputs {
    fn load<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> Result<Self, Failure> {
        let files = paths
            .into_iter()
            .map(|p| Ok((p.clone(), read(p)?)))
            .collect::<Result<Vec<_>, Failure>>()?;
        Ok(Inputs { files })
    }

    fn get(&self, path: &Path) -> &[u8] {
        &self.files.iter().find(|(p, _)| p == path).expect("loaded").1
    }

    fn bytes(&self) -> Vec<Vec<u8>> {
        self.files.iter().map(|(_, b)| b.clone()).collect()
    }
}

pub fn run(cmd: &Command, common: &Common) -> Result<(), Failure> {
    let mut paths: Vec<PathBuf> = common.alphabet.iter().cloned().collect();
    match cmd {
        Command::Infer { corpus } => paths.push(corpus.clone()),
        Command::Forecast { corpora, .. } => paths.extend(corpora.iter().cloned()),
        Command::Gen { grammar, .. } => paths.push(grammar.clone()),
        Command::Cost { words, prices } => {
            paths.push(words.clone());
            paths.extend(prices.iter().cloned());
        }
        Command::Ctmc { chain, .. } => paths.push(chain.clone()),
        Command::TreeWalk { tree, .. } => paths.push(tree.clone()),
        Command::Aword { word, decl, .. } => {
            paths.push(word.clone());
            paths.extend(decl.iter().cloned());
        }
    }
    let inputs = Inputs::load(&paths)?;
    let seed = match cmd {
        Command::Gen { seed: Some(s), .. } => Some(*s),
        Command::Gen { seed: None, .. } => return Err(Failure::input("gen needs --seed")),
        _ => None,
    };
    let manifest = format!("{cmd:?}\n{:?}\n{:?}", common.format, common.alphabet);
    let prov = Provenance::new(&manifest, &inputs.bytes(), seed);
    let alphabet = match &common.alphabet {
        Some(p) => Alphabet::parse(&text(p, inputs.get(p))?).map_err(|e| Failure::at(p, e))?,
        None => fixtures::alphabet(),
    };
    let ctx = Ctx { common, prov, inputs, alphabet };
    match cmd {
        Command::Infer { corpus } => infer(&ctx, corpus),
        Command::Forecast { corpora, year, published } => forecast(&ctx, corpora, *year, *published),
        Command::Gen { grammar, n, counts, .. } => gen(&ctx, grammar, seed.unwrap(), *n, *counts),
        Command::Cost { words, prices } => cost(&ctx, words, prices.as_deref()),
        Command::Ctmc { chain, t, steps, p0 } => ctmc(&ctx, chain, *t, *steps, p0.as_deref()),
        Command::TreeWalk { tree, t, steps, start } => tree_walk(&ctx, tree, *t, *steps, start.as_deref()),
        Command::Aword { word, decl, times, workers } => aword(&ctx, word, decl.as_deref(), times.as_deref(), *workers),
    }
}

struct Ctx<'a> {
    common: &'a Common,
    prov: Provenance,
    inputs: Inputs,
    alphabet: Alphabet,
}

impl Ctx<'_> {
    fn emit(&self, tsv: impl FnOnce() -> String, data: impl FnOnce() -> Value) -> Result<(), Failure> {
        emit(&self.prov, self.common.format, self.common.out.as_deref(), tsv, data)
    }

    fn text(&self, path: &Path) -> Result<String, Failure> {
        text(path, self.inputs.get(path))
    }

    fn corpus(&self, path: &Path) -> Result<YearCorpus, Failure> {
        YearCorpus::parse(&self.text(path)?, &self.alphabet).map_err(|e| Failure::at(path, e))
    }
}

fn rules_tsv(rows: impl IntoIterator<Item = (Context, RuleKey, f64)>) -> String {
    let mut s = String::from("context\trule\tprobability\n");
    for (c, k, p) in rows {
        s += &format!("{c}\t{k}\t{}\n", num(p));
    }
    s
}

fn rules_json(rows: impl IntoIterator<Item = (Context, RuleKey, f64)>) -> Value {
    Value::Array(
        rows.into_iter()
            .map(|(c, k, p)| json!({ "context": c.to_string(), "rule": k.to_string(), "probability": p }))
            .collect(),
    )
}

fn grammar_rows(g: &LeveledGrammar) -> Vec<(Context, RuleKey, f64)> {
    g.contexts()
        .flat_map(|(c, rules)| rules.iter().map(move |r| (c.clone(), r.key(), r.probability)))
        .collect()
}

fn prediction_rows(p: &Prediction) -> Vec<(Context, RuleKey, f64)> {
    p.iter()
        .flat_map(|(c, row)| row.iter().map(move |(k, v)| (c.clone(), *k, *v)))
        .collect()
}

fn infer(ctx: &Ctx, corpus: &Path) -> Result<(), Failure> {
    let c = ctx.corpus(corpus)?;
    let g = infer_grammar(&c, &ctx.alphabet).map_err(|e| Failure::at(corpus, e))?;
    ctx.emit(
        || rules_tsv(grammar_rows(&g)),
        || serde_json::to_value(g.to_doc()).expect("grammar serializes"),
    )
}

fn forecast(ctx: &Ctx, corpora: &[PathBuf], year: Option<i32>, published: bool) -> Result<(), Failure> {
    if published {
        let year = year.unwrap_or(2000);
        let blocks = fixture::blocks();
        let rows = |f: &dyn Fn(&fixture::FormulaBlock) -> Vec<(RuleKey, f64)>| -> Vec<(Context, RuleKey, f64)> {
            blocks
                .iter()
                .flat_map(|b| f(b).into_iter().map(|(k, v)| (b.context.clone(), k, v)))
                .collect()
        };
        let pred = rows(&|b| fixture::fixture_predictor(b, year));
        let lim = rows(&|b| b.marginal());
        return ctx.emit(
            || format!("# prediction {year}\n{}\n# marginal\n{}", rules_tsv(pred.clone()), rules_tsv(lim.clone())),
            || json!({ "year": year, "prediction": rules_json(pred.clone()), "marginal": rules_json(lim.clone()) }),
        );
    }
    if corpora.len() < 2 {
        return Err(Failure::input("forecast needs at least two yearly corpora (or --published)"));
    }
    let years = corpora.iter().map(|p| ctx.corpus(p)).collect::<Result<Vec<_>, _>>()?;
    let last = years.iter().map(YearCorpus::year).max().unwrap();
    let series = CorpusSeries::new(ctx.alphabet.clone(), years).map_err(Failure::from)?;
    let model = fit_trends(&series)?;
    let year = year.unwrap_or(last + 1);
    let pred = model.predict(year)?;
    let lim = model.marginal()?;
    ctx.emit(
        || {
            let mut s = String::from("# trend\ncontext\trule\tintercept\tslope\n");
            for (c, cells) in model.contexts() {
                for cell in cells {
                    s += &format!("{c}\t{}\t{}\t{}\n", cell.key, num(cell.intercept), num(cell.slope));
                }
            }
            s + &format!("\n# prediction {year}\n") + &rules_tsv(prediction_rows(&pred)) + "\n# marginal\n" + &rules_tsv(prediction_rows(&lim))
        },
        || {
            json!({
                "model": serde_json::to_value(model.to_doc()).expect("model serializes"),
                "year": year,
                "prediction": rules_json(prediction_rows(&pred)),
                "marginal": rules_json(prediction_rows(&lim)),
            })
        },
    )
}

/// A grammar from `infer` output, tab separated or structured.
fn read_grammar(ctx: &Ctx, path: &Path) -> Result<LeveledGrammar, Failure> {
    let bytes = ctx.inputs.get(path);
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        let doc: GrammarDoc = json_doc(path, bytes)?;
        return LeveledGrammar::from_doc(&doc).map_err(|e| Failure::at(path, e));
    }
    let text = ctx.text(path)?;
    let mut contexts: BTreeMap<Context, Vec<Rule>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') || line.starts_with("context\t") {
            continue;
        }
        let bad = |msg: String| Failure::input(format!("{}:{}: {msg}", path.display(), i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(bad(format!("expected 3 tab-separated fields, got {}", f.len())));
        }
        let c = Context::parse(f[0], &ctx.alphabet).map_err(|e| bad(e.to_string()))?;
        let (code, continues) = match f[1].strip_suffix('*') {
            Some(code) => (code, true),
            None => (f[1], false),
        };
        let emit = code.parse().map_err(|e: actlang::Error| bad(e.to_string()))?;
        let probability: f64 = f[2].parse().map_err(|_| bad(format!("bad probability {:?}", f[2])))?;
        contexts.entry(c).or_default().push(Rule { emit, continues, probability });
    }
    for rules in contexts.values_mut() {
        rules.sort_by_key(|r| (ctx.alphabet.index_of(r.emit), r.continues));
    }
    LeveledGrammar::new(ctx.alphabet.clone(), contexts).map_err(|e| Failure::at(path, e))
}

fn gen(ctx: &Ctx, grammar: &Path, seed: u64, n: u64, counts: Option<f64>) -> Result<(), Failure> {
    let cfg = GenConfig::new(seed, n)?;
    let g = read_grammar(ctx, grammar)?;
    let tables: Tables = g.choice_tables().into();
    let words: Vec<String> = match counts {
        None => generate_short(&tables, &cfg)?.iter().map(|w| w.to_string()).collect(),
        Some(mean) => {
            let model = CountModel::geometric(ctx.alphabet.letters(), mean)?;
            simulate(&tables, &model, &cfg)?.iter().map(|w| w.to_string()).collect()
        }
    };
    ctx.emit(
        || {
            let mut s = String::from("index\tword\n");
            for (i, w) in words.iter().enumerate() {
                s += &format!("{i}\t{w}\n");
            }
            s
        },
        || json!({ "seed": seed, "n": n, "words": words }),
    )
}

fn cost(ctx: &Ctx, words: &Path, prices: Option<&Path>) -> Result<(), Failure> {
    let prices = match prices {
        Some(p) => PriceList::parse(&ctx.text(p)?, &ctx.alphabet).map_err(|e| Failure::at(p, e))?,
        None => fixtures::prices(),
    };
    let mut population: Vec<LongWord> = Vec::new();
    for (i, line) in ctx.text(words)?.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "index\tword" || line == "word" {
            continue;
        }
        let field = line.rsplit('\t').next().unwrap();
        let bad = |e: actlang::Error| Failure::input(format!("{}:{}: {e}", words.display(), i + 1));
        let w = if field.contains('-') {
            ctx.alphabet.parse_long_word(field).map_err(bad)?
        } else {
            let short = ctx.alphabet.parse_word(field).map_err(bad)?;
            LongWord::new(short.letters().iter().map(|l| (*l, 1)).collect()).map_err(bad)?
        };
        population.push(w);
    }
    let stats = cost_stats(&population, &prices).map_err(|e| Failure::at(words, e))?;
    ctx.emit(
        || stats.to_tsv(),
        || {
            json!({
                "n": stats.n,
                "mean": stats.mean,
                "harmonic_mean": stats.harmonic_mean,
                "min": stats.min,
                "max": stats.max,
            })
        },
    )
}

fn times(t: f64, steps: usize) -> Result<Vec<f64>, Failure> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Failure::input(format!("--t must be a non-negative number, got {t}")));
    }
    if steps == 0 {
        return Err(Failure::input("--steps must be ≥ 1"));
    }
    Ok((0..=steps).map(|i| t * i as f64 / steps as f64).collect())
}

fn trajectory_tsv(labels: &[String], ts: &[f64], rows: &[Vec<f64>]) -> String {
    let mut s = format!("t\t{}\n", labels.join("\t"));
    for (t, row) in ts.iter().zip(rows) {
        let cells: Vec<String> = row.iter().map(|p| num(*p)).collect();
        s += &format!("{}\t{}\n", num(*t), cells.join("\t"));
    }
    s
}

fn point_mass(n: usize, at: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[at] = 1.0;
    p
}

fn ctmc(ctx: &Ctx, path: &Path, t: f64, steps: usize, p0: Option<&str>) -> Result<(), Failure> {
    let doc: ChainDoc = json_doc(path, ctx.inputs.get(path))?;
    let chain = RateMatrix::from_doc(&doc).map_err(|e| Failure::at(path, e))?;
    if chain.is_empty() {
        return Err(Failure::input(format!("{}: chain has no states", path.display())));
    }
    let p0 = match p0 {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::input(format!("--p0: bad number {x:?}"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => point_mass(chain.len(), 0),
    };
    let ts = times(t, steps)?;
    let rows = trajectory(&chain, &p0, &ts)?;
    ctx.emit(
        || trajectory_tsv(chain.labels(), &ts, &rows),
        || json!({ "states": chain.labels(), "times": ts, "p": rows }),
    )
}

fn tree_walk(ctx: &Ctx, path: &Path, t: f64, steps: usize, start: Option<&str>) -> Result<(), Failure> {
    let doc: TreeDoc = json_doc(path, ctx.inputs.get(path))?;
    let tree = doc.tree().map_err(|e| Failure::at(path, e))?;
    let favorites = doc.favorite_sets(&tree).map_err(|e| Failure::at(path, e))?;
    let rates = doc.resolved_rates(&tree).map_err(|e| Failure::at(path, e))?;
    let chain = tree_chain(&tree, &rates).map_err(|e| Failure::at(path, e))?;
    let at = match start {
        Some(l) => tree.index_of(l).ok_or_else(|| Failure::input(format!("--start: unknown theme {l}")))?,
        None => 0,
    };
    let ts = times(t, steps)?;
    let rows = trajectory(&chain, &point_mass(tree.len(), at), &ts)?;
    let step = tree_transition(&tree, &favorites);
    ctx.emit(
        || trajectory_tsv(chain.labels(), &ts, &rows),
        || {
            let words: Vec<String> = (0..tree.len()).map(|i| tree.word(i)).collect();
            let matrix: Vec<Vec<f64>> = (0..tree.len()).map(|i| step.row(i).iter().copied().collect()).collect();
            json!({ "states": chain.labels(), "words": words, "step": matrix, "times": ts, "p": rows })
        },
    )
}

fn node_json(n: &AssemblyNode) -> Value {
    match n {
        AssemblyNode::Element(x) => json!({ "element": x }),
        AssemblyNode::Inner { children, .. } => json!({
            "children": children.iter().map(node_json).collect::<Vec<_>>(),
            "actions": n.actions(),
            "processes": n.processes(),
        }),
    }
}

fn aword(ctx: &Ctx, path: &Path, decl: Option<&Path>, times: Option<&str>, workers: Option<u32>) -> Result<(), Failure> {
    let decl = match decl {
        Some(p) => Declarations::parse(&ctx.text(p)?).map_err(|e| Failure::at(p, e))?,
        None => Declarations::default(),
    };
    let tree = parse_aword(&ctx.text(path)?, &decl).map_err(|e| Failure::at(path, e))?;
    let m = structure_metrics(&tree);
    let stations = match times {
        Some(s) => {
            let ts = s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Failure::input(format!("--times: bad number {x:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            Some(station_counts(&tree, &ts)?)
        }
        None => None,
    };
    let inner_index: Vec<*const AssemblyNode> = tree.inner_nodes().into_iter().map(|n| n as *const _).collect();
    ctx.emit(
        || {
            let mut s = format!(
                "word\t{tree}\ndepth\t{}\ninner_count\t{}\nleaf_count\t{}\nmax_parallel_jobs\t{}\n\n",
                m.depth, m.inner_count, m.leaf_count, m.max_parallel_jobs
            );
            fn walk(n: &AssemblyNode, depth: usize, idx: &[*const AssemblyNode], st: Option<&[u32]>, w: Option<u32>, out: &mut String) {
                let pad = "  ".repeat(depth);
                match n {
                    AssemblyNode::Element(x) => *out += &format!("{pad}{x}\n"),
                    AssemblyNode::Inner { children, .. } => {
                        let i = idx.iter().position(|p| std::ptr::eq(*p, n)).unwrap();
                        *out += &format!("{pad}node {i}: actions [{}] processes [{}]", n.actions().join(", "), n.processes().join(", "));
                        if let Some(st) = st {
                            *out += &format!(" stations {}", st[i]);
                            if let Some(w) = w {
                                *out += &format!(" workers {}", st[i] * w);
                            }
                        }
                        *out += "\n";
                        for c in children {
                            walk(c, depth + 1, idx, st, w, out);
                        }
                    }
                }
            }
            walk(&tree, 0, &inner_index, stations.as_deref(), workers, &mut s);
            s
        },
        || {
            json!({
                "word": tree.to_string(),
                "tree": node_json(&tree),
                "metrics": {
                    "depth": m.depth,
                    "inner_count": m.inner_count,
                    "leaf_count": m.leaf_count,
                    "max_parallel_jobs": m.max_parallel_jobs,
                },
                "stations": stations,
                "workers": stations.as_ref().zip(workers).map(|(s, w)| s.iter().map(|x| x * w).collect::<Vec<_>>()),
            })
        },
    )
}
