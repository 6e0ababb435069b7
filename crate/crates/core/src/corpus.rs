//! Procedure alphabets, short and long words, yearly frequency tables and
//! price lists.
//!
//! A procedure letter is a fixed-width two-character code (`A_`, `DR`,
//! `S4`, ...). Short words are concatenations of letters with no separator;
//! long words attach a repetition count to every letter (`AN-1 DR-17`).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A two-character procedure code over `[A-Z0-9_]`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter([u8; 2]);

impl Letter {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 2 {
            return Err(Error::invalid(
                "letter",
                format!("{code:?} must be exactly 2 characters"),
            ));
        }
        if !bytes
            .iter()
            .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || *b == b'_')
        {
            return Err(Error::invalid(
                "letter",
                format!("{code:?} may only contain A-Z, 0-9 and _"),
            ));
        }
        Ok(Letter([bytes[0], bytes[1]]))
    }

    pub fn as_str(&self) -> &str {
        // constructor only admits ASCII
        std::str::from_utf8(&self.0).expect("ascii letter")
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl FromStr for Letter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Letter::new(s)
    }
}

impl Serialize for Letter {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Letter {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Letter::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Ordered set of letters with free-text descriptions.
///
/// The declaration order is the canonical order used for every tie-break
/// and for inverse-CDF sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct Alphabet {
    letters: Vec<Letter>,
    descriptions: Vec<String>,
    index: HashMap<Letter, usize>,
}

impl Alphabet {
    pub fn new(entries: impl IntoIterator<Item = (Letter, String)>) -> Result<Self> {
        let mut letters = Vec::new();
        let mut descriptions = Vec::new();
        let mut index = HashMap::new();
        for (letter, desc) in entries {
            if index.insert(letter, letters.len()).is_some() {
                return Err(Error::invalid(
                    "alphabet",
                    format!("duplicate letter {letter}"),
                ));
            }
            letters.push(letter);
            descriptions.push(desc);
        }
        if letters.is_empty() {
            return Err(Error::invalid("alphabet", "no letters declared"));
        }
        Ok(Alphabet {
            letters,
            descriptions,
            index,
        })
    }

    /// Alphabet with empty descriptions.
    pub fn from_codes<'a>(codes: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let entries = codes
            .into_iter()
            .map(|c| Letter::new(c).map(|l| (l, String::new())))
            .collect::<Result<Vec<_>>>()?;
        Alphabet::new(entries)
    }

    /// Parses `letter<TAB>description` lines. Blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (code, desc) = line.split_once('\t').unwrap_or((line, ""));
            let letter = Letter::new(code.trim()).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if !seen.insert(letter) {
                return Err(Error::parse(i + 1, format!("duplicate letter {letter}")));
            }
            entries.push((letter, desc.trim().to_string()));
        }
        Alphabet::new(entries).map_err(|e| Error::parse(1, e.to_string()))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn contains(&self, letter: Letter) -> bool {
        self.index.contains_key(&letter)
    }

    /// Canonical position of `letter`.
    pub fn index_of(&self, letter: Letter) -> Option<usize> {
        self.index.get(&letter).copied()
    }

    pub fn description(&self, letter: Letter) -> Option<&str> {
        self.index_of(letter).map(|i| self.descriptions[i].as_str())
    }

    pub fn entries(&self) -> impl Iterator<Item = (Letter, &str)> {
        self.letters
            .iter()
            .copied()
            .zip(self.descriptions.iter().map(String::as_str))
    }

    fn lookup(&self, code: &str) -> Result<Letter> {
        let letter = Letter::new(code)?;
        if !self.contains(letter) {
            return Err(Error::invalid("word", format!("unknown letter {letter}")));
        }
        Ok(letter)
    }

    /// Splits a short word into consecutive two-character letters.
    /// ASCII whitespace between letters is ignored (`"A_ANDR S4 S2"`).
    pub fn parse_word(&self, s: &str) -> Result<ShortWord> {
        let compact: String = s.chars().filter(|c| !c.is_ascii_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::invalid("word", "empty word"));
        }
        if !compact.is_ascii() || compact.len() % 2 != 0 {
            return Err(Error::invalid(
                "word",
                format!("{s:?} has odd length; letters are 2 characters"),
            ));
        }
        let letters = (0..compact.len())
            .step_by(2)
            .map(|i| self.lookup(&compact[i..i + 2]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShortWord(letters))
    }

    /// Parses a long word such as `A_-5AN-2DR-11 S4-1 S2-2` or
    /// `AN-1; DR-17; S4-2`.
    pub fn parse_long_word(&self, s: &str) -> Result<LongWord> {
        let compact: Vec<u8> = s
            .bytes()
            .filter(|b| !b.is_ascii_whitespace() && *b != b';' && *b != b',')
            .collect();
        let bad = |msg: String| Error::invalid("long word", format!("{s:?}: {msg}"));
        let mut entries = Vec::new();
        let mut i = 0;
        while i < compact.len() {
            if i + 3 > compact.len() || compact[i + 2] != b'-' {
                return Err(bad(format!("expected LETTER-count at offset {i}")));
            }
            let code = std::str::from_utf8(&compact[i..i + 2]).map_err(|_| bad("non-ascii".into()))?;
            let letter = self.lookup(code).map_err(|e| bad(e.to_string()))?;
            i += 3;
            let start = i;
            while i < compact.len() && compact[i].is_ascii_digit() {
                i += 1;
            }
            if start == i {
                return Err(bad(format!("missing count after {letter}")));
            }
            let count: u32 = std::str::from_utf8(&compact[start..i])
                .unwrap()
                .parse()
                .map_err(|_| bad("count out of range".into()))?;
            entries.push((letter, count));
        }
        LongWord::new(entries)
    }
}

/// A patient's deduplicated procedure sequence.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShortWord(Vec<Letter>);

impl ShortWord {
    pub fn new(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::invalid("word", "empty word"));
        }
        Ok(ShortWord(letters))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ShortWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            f.write_str(l.as_str())?;
        }
        Ok(())
    }
}

impl fmt::Debug for ShortWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

/// A short word with a repetition count on every letter.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LongWord(Vec<(Letter, u32)>);

impl LongWord {
    pub fn new(entries: Vec<(Letter, u32)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("long word", "empty word"));
        }
        if let Some((l, _)) = entries.iter().find(|(_, c)| *c == 0) {
            return Err(Error::invalid(
                "long word",
                format!("count for {l} must be at least 1"),
            ));
        }
        Ok(LongWord(entries))
    }

    pub fn entries(&self) -> &[(Letter, u32)] {
        &self.0
    }

    /// Projection onto letters.
    pub fn short(&self) -> ShortWord {
        ShortWord(self.0.iter().map(|(l, _)| *l).collect())
    }

    /// Concatenation, used to check that cost is additive.
    pub fn concat(&self, other: &LongWord) -> LongWord {
        let mut entries = self.0.clone();
        entries.extend_from_slice(&other.0);
        LongWord(entries)
    }
}

impl fmt::Display for LongWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, c)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}-{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for LongWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

/// Word counts observed in one year.
#[derive(Clone, Debug, PartialEq)]
pub struct YearCorpus {
    year: i32,
    rows: Vec<(ShortWord, u64)>,
    population: Option<u64>,
}

impl YearCorpus {
    pub fn new(year: i32, rows: Vec<(ShortWord, u64)>, population: Option<u64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("corpus", "no rows"));
        }
        let mut seen = HashSet::new();
        for (w, c) in &rows {
            if *c == 0 {
                return Err(Error::invalid("corpus", format!("count for {w} must be positive")));
            }
            if !seen.insert(w) {
                return Err(Error::invalid("corpus", format!("duplicate word {w}")));
            }
        }
        let corpus = YearCorpus {
            year,
            rows,
            population,
        };
        if let Some(p) = population {
            if corpus.total() > p {
                return Err(Error::invalid(
                    "corpus",
                    format!("listed counts {} exceed population {p}", corpus.total()),
                ));
            }
        }
        Ok(corpus)
    }

    /// Parses the corpus TSV format:
    ///
    /// ```text
    /// #year:1998<TAB>#population:7452
    /// DR<TAB>3032
    /// ```
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (year, population) = loop {
            match lines.next() {
                None => return Err(Error::parse(1, "missing #year header")),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => break parse_header(l.trim_end_matches('\r'), i + 1)?,
            }
        };
        let mut rows = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 1;
            let (word, count) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n, "expected word<TAB>count"))?;
            let word = alphabet
                .parse_word(word)
                .map_err(|e| Error::parse(n, e.to_string()))?;
            let count: i64 = count
                .trim()
                .parse()
                .map_err(|_| Error::parse(n, format!("bad count {count:?}")))?;
            if count <= 0 {
                return Err(Error::parse(n, format!("count must be positive, got {count}")));
            }
            if !seen.insert(word.clone()) {
                return Err(Error::parse(n, format!("duplicate word {word}")));
            }
            rows.push((word, count as u64));
        }
        YearCorpus::new(year, rows, population).map_err(|e| Error::parse(1, e.to_string()))
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn population(&self) -> Option<u64> {
        self.population
    }

    /// Rows in file order.
    pub fn rows(&self) -> &[(ShortWord, u64)] {
        &self.rows
    }

    pub fn count(&self, word: &ShortWord) -> Option<u64> {
        self.rows.iter().find(|(w, _)| w == word).map(|(_, c)| *c)
    }

    /// Listed-row mass; the normalizer for every probability.
    pub fn total(&self) -> u64 {
        self.rows.iter().map(|(_, c)| c).sum()
    }

    /// Fraction of the stated population covered by the listed rows.
    pub fn coverage(&self) -> Option<f64> {
        self.population.map(|p| self.total() as f64 / p as f64)
    }

    /// Copy without the given words.
    pub fn without(&self, words: &[ShortWord]) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .filter(|(w, _)| !words.contains(w))
            .cloned()
            .collect();
        YearCorpus::new(self.year, rows, self.population)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("#year:{}", self.year);
        if let Some(p) = self.population {
            out.push_str(&format!("\t#population:{p}"));
        }
        out.push('\n');
        for (w, c) in &self.rows {
            out.push_str(&format!("{w}\t{c}\n"));
        }
        out
    }
}

fn parse_header(line: &str, n: usize) -> Result<(i32, Option<u64>)> {
    let mut year = None;
    let mut population = None;
    for field in line.split('\t') {
        let field = field.trim();
        if let Some(v) = field.strip_prefix("#year:") {
            year = Some(
                v.trim()
                    .parse()
                    .map_err(|_| Error::parse(n, format!("bad year {v:?}")))?,
            );
        } else if let Some(v) = field.strip_prefix("#population:") {
            if !v.trim().is_empty() {
                population = Some(
                    v.trim()
                        .parse()
                        .map_err(|_| Error::parse(n, format!("bad population {v:?}")))?,
                );
            }
        } else if !field.is_empty() {
            return Err(Error::parse(n, format!("unexpected header field {field:?}")));
        }
    }
    let year = year.ok_or_else(|| Error::parse(n, "missing #year header"))?;
    Ok((year, population))
}

/// Yearly corpora over one alphabet, in strictly increasing year order.
#[derive(Clone, Debug)]
pub struct CorpusSeries {
    alphabet: Alphabet,
    years: Vec<YearCorpus>,
}

impl CorpusSeries {
    pub fn new(alphabet: Alphabet, years: Vec<YearCorpus>) -> Result<Self> {
        if years.is_empty() {
            return Err(Error::invalid("series", "no corpora"));
        }
        for pair in years.windows(2) {
            if pair[1].year <= pair[0].year {
                return Err(Error::invalid(
                    "series",
                    format!("years must increase strictly ({} then {})", pair[0].year, pair[1].year),
                ));
            }
        }
        for c in &years {
            for (w, _) in c.rows() {
                if let Some(l) = w.letters().iter().find(|l| !alphabet.contains(**l)) {
                    return Err(Error::invalid(
                        "series",
                        format!("{} uses letter {l} outside the shared alphabet", c.year),
                    ));
                }
            }
        }
        Ok(CorpusSeries { alphabet, years })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn years(&self) -> &[YearCorpus] {
        &self.years
    }
}

/// Normative price per letter.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceList {
    prices: HashMap<Letter, f64>,
}

impl PriceList {
    pub fn new(prices: HashMap<Letter, f64>, alphabet: &Alphabet) -> Result<Self> {
        for (l, p) in &prices {
            if !alphabet.contains(*l) {
                return Err(Error::invalid("price list", format!("unknown letter {l}")));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::invalid(
                    "price list",
                    format!("price for {l} must be a non-negative number, got {p}"),
                ));
            }
        }
        if let Some(l) = alphabet.letters().iter().find(|l| !prices.contains_key(l)) {
            return Err(Error::invalid("price list", format!("no price for {l}")));
        }
        Ok(PriceList { prices })
    }

    /// Parses `letter<TAB>price` rows; every alphabet letter must be priced.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self> {
        let mut prices = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 1;
            let (code, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(n, "expected letter<TAB>price"))?;
            let letter = Letter::new(code.trim()).map_err(|e| Error::parse(n, e.to_string()))?;
            if !alphabet.contains(letter) {
                return Err(Error::parse(n, format!("unknown letter {letter}")));
            }
            let price: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(n, format!("bad price {value:?}")))?;
            if !price.is_finite() || price < 0.0 {
                return Err(Error::parse(n, format!("negative price {price} for {letter}")));
            }
            if prices.insert(letter, price).is_some() {
                return Err(Error::parse(n, format!("duplicate letter {letter}")));
            }
        }
        PriceList::new(prices, alphabet).map_err(|e| Error::parse(0, e.to_string()))
    }

    pub fn price(&self, letter: Letter) -> Option<f64> {
        self.prices.get(&letter).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha() -> Alphabet {
        Alphabet::from_codes(["A_", "AN", "DR", "LP", "S4", "S2"]).unwrap()
    }

    #[test]
    fn letter_rules() {
        assert!(Letter::new("A_").is_ok());
        assert!(Letter::new("S4").is_ok());
        assert!(Letter::new("a_").is_err());
        assert!(Letter::new("DRX").is_err());
        assert!(Letter::new("D").is_err());
    }

    #[test]
    fn word_parse_examples() {
        let a = alpha();
        let w = a.parse_word("A_ANDR").unwrap();
        assert_eq!(w.letters().iter().map(|l| l.as_str()).collect::<Vec<_>>(), ["A_", "AN", "DR"]);
        assert_eq!(a.parse_word("DR").unwrap().len(), 1);
        assert!(a.parse_word("").is_err());
        assert!(a.parse_word("DRX").is_err());
        assert!(a.parse_word("DRE_").is_err(), "E_ not declared");
        assert_eq!(a.parse_word("A_ANDR S4 S2").unwrap().to_string(), "A_ANDRS4S2");
    }

    #[test]
    fn corpus_examples() {
        let a = alpha();
        let c = YearCorpus::parse("#year:1998\t#population:7452\nDR\t3032\n", &a).unwrap();
        assert_eq!(c.year(), 1998);
        assert_eq!(c.count(&a.parse_word("DR").unwrap()), Some(3032));

        let c = YearCorpus::parse("#year:2000\nA_\t1\n", &a).unwrap();
        assert_eq!(c.rows().len(), 1);
        assert_eq!(c.population(), None);

        let err = YearCorpus::parse("#year:2000\nDRX\t5\n", &a).unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("odd length"));
    }

    #[test]
    fn corpus_errors() {
        let a = alpha();
        assert!(YearCorpus::parse("#year:2000\nDR\t0\n", &a).is_err());
        assert!(YearCorpus::parse("#year:2000\nDR\t-4\n", &a).is_err());
        let dup = YearCorpus::parse("#year:2000\nDR\t1\nDR\t2\n", &a).unwrap_err();
        assert_eq!(dup.line(), Some(3));
        assert!(YearCorpus::parse("#year:2000\nZZ\t1\n", &a).is_err());
        assert!(YearCorpus::parse("DR\t1\n", &a).is_err());
        assert!(YearCorpus::parse("#year:2000\t#population:3\nDR\t5\n", &a).is_err());
    }

    #[test]
    fn prices() {
        let a = Alphabet::from_codes(["AN", "DR", "S4"]).unwrap();
        let p = PriceList::parse("AN\t100\nDR\t10.0\nS4\t500\n", &a).unwrap();
        assert_eq!(p.price(Letter::new("DR").unwrap()), Some(10.0));
        assert!(PriceList::parse("AN\t100\nDR\t10.0\n", &a).is_err());
        let neg = PriceList::parse("AN\t-3\nDR\t10\nS4\t1\n", &a).unwrap_err();
        assert!(neg.to_string().contains("negative"));
        assert!(PriceList::parse("AN\t1\nAN\t2\nDR\t10\nS4\t1\n", &a).is_err());
    }

    #[test]
    fn long_words() {
        let a = Alphabet::from_codes(["A_", "AN", "DR", "S4", "S2", "S5"]).unwrap();
        let w = a.parse_long_word("A_-5AN-2DR-11 S4-1 S2-2").unwrap();
        assert_eq!(w.entries().len(), 5);
        assert_eq!(w.short().to_string(), "A_ANDRS4S2");
        let w = a.parse_long_word("AN-1; DR-17; S4-2; S5-1").unwrap();
        assert_eq!(w.to_string(), "AN-1 DR-17 S4-2 S5-1");
        assert!(a.parse_long_word("AN-0").is_err());
        assert!(a.parse_long_word("AN1").is_err());
        assert!(a.parse_long_word("AN-").is_err());
        let s5 = Alphabet::from_codes(["AN"]).unwrap().parse_long_word("S5-1");
        assert!(s5.is_err(), "undeclared S5 is rejected");
    }

    #[test]
    fn alphabet_file() {
        let a = Alphabet::parse("A_\tTRANSPORTATION\nDR\tDRUG\n").unwrap();
        assert_eq!(a.description(Letter::new("A_").unwrap()), Some("TRANSPORTATION"));
        assert_eq!(a.index_of(Letter::new("DR").unwrap()), Some(1));
        assert!(Alphabet::parse("A_\tX\nA_\tY\n").is_err());
        assert!(Alphabet::parse("").is_err());
    }
}
