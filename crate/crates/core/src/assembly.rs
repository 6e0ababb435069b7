//! Assembly words: nested parentheses recording which elements are joined,
//! by which human actions and natural processes, and in what order.
//!
//! ```text
//! node  := '(' node {',' node} [(';' | ':') op {',' op}] ')' | element
//! ```
//!
//! A parenthesis is a new element built from its children; an inner
//! parenthesis has to be finished before the one around it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::rng::{pick, streams, substream, uniform};

/// Class of an identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IdClass {
    Element,
    Action,
    Process,
}

/// Declared element, action and process ids. Without declarations an id is
/// classed by its first letter: `x` element, `a` action, `p`/`P` process.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Declarations {
    pub elements: BTreeSet<String>,
    pub actions: BTreeSet<String>,
    pub processes: BTreeSet<String>,
    /// Condition sets, kept verbatim.
    pub conditions: BTreeMap<String, String>,
}

impl Declarations {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty() && self.actions.is_empty() && self.processes.is_empty()
    }

    pub fn classify(&self, id: &str) -> Option<IdClass> {
        if self.is_empty() {
            return match id.chars().next()? {
                'x' => Some(IdClass::Element),
                'a' => Some(IdClass::Action),
                'p' | 'P' => Some(IdClass::Process),
                _ => None,
            };
        }
        if self.elements.contains(id) {
            Some(IdClass::Element)
        } else if self.actions.contains(id) {
            Some(IdClass::Action)
        } else if self.processes.contains(id) {
            Some(IdClass::Process)
        } else {
            None
        }
    }

    /// Lines `E: ids`, `A: ids`, `P: ids` (ids split on whitespace or
    /// commas) and `C <id>: text`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut d = Declarations::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `<kind>: ...`, got {line:?}")))?;
            let ids = || {
                rest.split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
            };
            match head.trim() {
                "E" => d.elements.extend(ids()),
                "A" => d.actions.extend(ids()),
                "P" => d.processes.extend(ids()),
                h if h.starts_with("C ") => {
                    d.conditions.insert(h[2..].trim().to_string(), rest.trim().to_string());
                }
                h => return Err(Error::parse(i + 1, format!("unknown declaration kind {h:?}"))),
            }
        }
        let clash = d
            .elements
            .intersection(&d.actions)
            .chain(d.elements.intersection(&d.processes))
            .chain(d.actions.intersection(&d.processes))
            .next();
        if let Some(id) = clash {
            return Err(Error::invalid("declarations", format!("{id} declared in two classes")));
        }
        Ok(d)
    }
}

/// A joining step after the children are in place.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Action(String),
    Process(String),
}

impl Op {
    pub fn id(&self) -> &str {
        match self {
            Op::Action(s) | Op::Process(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum AssemblyNode {
    Element(String),
    /// `children` is never empty; `ops` keeps the written order.
    Inner { children: Vec<AssemblyNode>, ops: Vec<Op> },
}

impl AssemblyNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, AssemblyNode::Element(_))
    }

    pub fn children(&self) -> &[AssemblyNode] {
        match self {
            AssemblyNode::Element(_) => &[],
            AssemblyNode::Inner { children, .. } => children,
        }
    }

    pub fn ops(&self) -> &[Op] {
        match self {
            AssemblyNode::Element(_) => &[],
            AssemblyNode::Inner { ops, .. } => ops,
        }
    }

    pub fn actions(&self) -> Vec<&str> {
        self.ops()
            .iter()
            .filter_map(|o| match o {
                Op::Action(a) => Some(a.as_str()),
                Op::Process(_) => None,
            })
            .collect()
    }

    pub fn processes(&self) -> Vec<&str> {
        self.ops()
            .iter()
            .filter_map(|o| match o {
                Op::Process(p) => Some(p.as_str()),
                Op::Action(_) => None,
            })
            .collect()
    }

    /// Inner nodes in pre-order; index 0 is the root when it is inner.
    pub fn inner_nodes(&self) -> Vec<&AssemblyNode> {
        let mut out = Vec::new();
        fn walk<'a>(n: &'a AssemblyNode, out: &mut Vec<&'a AssemblyNode>) {
            if !n.is_leaf() {
                out.push(n);
                for c in n.children() {
                    walk(c, out);
                }
            }
        }
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for AssemblyNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssemblyNode::Element(x) => f.write_str(x),
            AssemblyNode::Inner { children, ops } => {
                f.write_str("(")?;
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{c}")?;
                }
                if !ops.is_empty() {
                    f.write_str("; ")?;
                    for (i, o) in ops.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        f.write_str(o.id())?;
                    }
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Comma,
    Semi,
    Id(String),
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    decl: &'a Declarations,
    last_line: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' => line += 1,
            c if c.is_whitespace() => {}
            '(' => out.push((Tok::Open, line)),
            ')' => out.push((Tok::Close, line)),
            ',' => out.push((Tok::Comma, line)),
            ';' | ':' => out.push((Tok::Semi, line)),
            c if c.is_alphanumeric() || c == '_' => {
                let mut id = c.to_string();
                while let Some(&d) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        id.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Id(id), line));
            }
            c => return Err(Error::parse(line, format!("unexpected character {c:?}"))),
        }
    }
    Ok(out)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.1)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn node(&mut self) -> Result<AssemblyNode> {
        let line = self.line();
        match self.next() {
            Some(Tok::Open) => self.inner(line),
            Some(Tok::Id(id)) => match self.decl.classify(&id) {
                Some(IdClass::Element) => Ok(AssemblyNode::Element(id)),
                Some(_) => Err(Error::parse(line, format!("{id} is not an element"))),
                None => Err(Error::parse(line, format!("unknown identifier {id}"))),
            },
            Some(Tok::Close) if self.pos >= 2 && self.toks[self.pos - 2].0 == Tok::Open => {
                Err(Error::parse(line, "empty child list"))
            }
            Some(t) => Err(Error::parse(line, format!("expected element or '(', got {t:?}"))),
            None => Err(Error::parse(line, "unbalanced parentheses: input ends inside a node")),
        }
    }

    fn inner(&mut self, open_line: usize) -> Result<AssemblyNode> {
        let mut children = vec![self.node()?];
        let mut ops = Vec::new();
        loop {
            let line = self.line();
            match self.next() {
                Some(Tok::Comma) => children.push(self.node()?),
                Some(Tok::Semi) => {
                    ops = self.tail()?;
                    break;
                }
                Some(Tok::Close) => return Ok(AssemblyNode::Inner { children, ops }),
                Some(t) => return Err(Error::parse(line, format!("expected ',', ';' or ')', got {t:?}"))),
                None => {
                    return Err(Error::parse(
                        open_line,
                        "unbalanced parentheses: '(' is never closed",
                    ))
                }
            }
        }
        let line = self.line();
        match self.next() {
            Some(Tok::Close) => Ok(AssemblyNode::Inner { children, ops }),
            Some(t) => Err(Error::parse(line, format!("expected ')', got {t:?}"))),
            None => Err(Error::parse(open_line, "unbalanced parentheses: '(' is never closed")),
        }
    }

    fn tail(&mut self) -> Result<Vec<Op>> {
        let mut ops = Vec::new();
        if self.peek() == Some(&Tok::Close) {
            return Ok(ops);
        }
        loop {
            let line = self.line();
            match self.next() {
                Some(Tok::Id(id)) => match self.decl.classify(&id) {
                    Some(IdClass::Action) => ops.push(Op::Action(id)),
                    Some(IdClass::Process) => ops.push(Op::Process(id)),
                    Some(IdClass::Element) => {
                        return Err(Error::parse(line, format!("element {id} after ';'")))
                    }
                    None => return Err(Error::parse(line, format!("unknown identifier {id}"))),
                },
                Some(t) => return Err(Error::parse(line, format!("expected action or process, got {t:?}"))),
                None => return Err(Error::parse(line, "unbalanced parentheses: input ends inside a node")),
            }
            if self.peek() == Some(&Tok::Comma) {
                self.pos += 1;
            } else {
                return Ok(ops);
            }
        }
    }
}

/// Parse one assembly word.
pub fn parse_aword(text: &str, decl: &Declarations) -> Result<AssemblyNode> {
    let toks = lex(text)?;
    let last_line = toks.last().map_or(1, |t| t.1);
    let mut p = Parser { toks, pos: 0, decl, last_line };
    let node = p.node()?;
    if p.pos < p.toks.len() {
        let line = p.line();
        return Err(match p.peek() {
            Some(Tok::Close) => Error::parse(line, "unbalanced parentheses: extra ')'"),
            _ => Error::parse(line, "trailing input after the word"),
        });
    }
    Ok(node)
}

/// Parallel workplaces per inner node (pre-order) so that every sub-assembly
/// keeps pace with the final one: `ceil(time / root time)`, root 1.
pub fn station_counts(tree: &AssemblyNode, times: &[f64]) -> Result<Vec<u32>> {
    let inner = tree.inner_nodes();
    if times.len() != inner.len() {
        return Err(Error::pre(format!(
            "{} inner nodes but {} times",
            inner.len(),
            times.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("timing", format!("time {t} must be positive")));
    }
    let Some(&root) = times.first() else {
        return Ok(Vec::new());
    };
    // the tolerance keeps 3·t/t from rounding up to 4
    Ok(std::iter::once(1)
        .chain(times[1..].iter().map(|t| ((t / root) - 1e-9).ceil().max(1.0) as u32))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructureMetrics {
    /// Deepest parenthesis nesting; 0 for a bare element.
    pub depth: usize,
    pub inner_count: usize,
    pub leaf_count: usize,
    /// Most inner nodes at one nesting level.
    pub max_parallel_jobs: usize,
}

pub fn structure_metrics(tree: &AssemblyNode) -> StructureMetrics {
    let mut per_level: Vec<usize> = Vec::new();
    let mut leaves = 0;
    let mut stack = vec![(tree, 0usize)];
    while let Some((n, d)) = stack.pop() {
        match n {
            AssemblyNode::Element(_) => leaves += 1,
            AssemblyNode::Inner { children, .. } => {
                if per_level.len() <= d {
                    per_level.resize(d + 1, 0);
                }
                per_level[d] += 1;
                stack.extend(children.iter().map(|c| (c, d + 1)));
            }
        }
    }
    StructureMetrics {
        depth: per_level.len(),
        inner_count: per_level.iter().sum(),
        leaf_count: leaves,
        max_parallel_jobs: per_level.iter().copied().max().unwrap_or(0),
    }
}

/// What breaking an element yields.
#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Fragments(Vec<String>),
    /// `(fragment count, probability)`.
    SizeDistribution(Vec<(u32, f64)>),
}

/// A disassembly of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct DAction {
    target: String,
    outcome: Outcome,
}

impl DAction {
    pub fn new(target: impl Into<String>, outcome: Outcome) -> Result<Self> {
        match &outcome {
            Outcome::Fragments(f) if f.is_empty() => {
                return Err(Error::invalid("disassembly", "no fragments"))
            }
            Outcome::SizeDistribution(d) => {
                let total: f64 = d.iter().map(|(_, p)| p).sum();
                if d.is_empty()
                    || d.iter().any(|(n, p)| *n == 0 || !(*p >= 0.0))
                    || (total - 1.0).abs() > 1e-9
                {
                    return Err(Error::invalid(
                        "disassembly",
                        "size distribution needs counts ≥ 1 with probabilities summing to 1",
                    ));
                }
            }
            Outcome::Fragments(_) => {}
        }
        Ok(DAction { target: target.into(), outcome })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn outcome(&self) -> &Outcome {
        &self.outcome
    }
}

/// Fragments of `d`. A declared set comes back as is; a size distribution
/// draws the count from the fragment stream of `seed` and names the pieces
/// `F<target>_1..n`.
pub fn apply_daction(d: &DAction, seed: u64) -> Vec<String> {
    match &d.outcome {
        Outcome::Fragments(f) => f.clone(),
        Outcome::SizeDistribution(dist) => {
            let mut rng = substream(seed, streams::FRAGMENTS, 0);
            let i = pick(dist.iter().map(|(_, p)| *p), uniform(&mut rng)).unwrap_or(0);
            (1..=dist[i].0).map(|k| format!("F{}_{k}", d.target)).collect()
        }
    }
}
