//! Which theme a person proposes, given who around them shares it.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::partition::{Mark, NeighborFn, Person};

/// One person's themes: favorites with suitability weights summing to 1,
/// sick themes, and an activity level.
#[derive(Clone, Debug, PartialEq)]
pub struct Preferences {
    favorites: Vec<(String, f64)>,
    sick: BTreeSet<String>,
    activity: f64,
}

impl Preferences {
    pub fn new(favorites: Vec<(String, f64)>, sick: BTreeSet<String>, activity: f64) -> Result<Self> {
        if favorites.is_empty() {
            return Err(Error::invalid("preferences", "empty favorite set"));
        }
        if favorites.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::invalid("preferences", "weights must be ≥ 0"));
        }
        let total: f64 = favorites.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("preferences", format!("weights sum to {total}, not 1")));
        }
        let names: BTreeSet<&String> = favorites.iter().map(|(t, _)| t).collect();
        if names.len() != favorites.len() {
            return Err(Error::invalid("preferences", "repeated favorite theme"));
        }
        if !(activity >= 0.0) {
            return Err(Error::invalid("preferences", "activity must be ≥ 0"));
        }
        Ok(Preferences { favorites, sick, activity })
    }

    /// Equal weights over `themes`, no sick themes, activity 1.
    pub fn equal(themes: &[&str]) -> Result<Self> {
        let w = 1.0 / themes.len().max(1) as f64;
        Preferences::new(themes.iter().map(|t| (t.to_string(), w)).collect(), BTreeSet::new(), 1.0)
    }

    pub fn with_sick(mut self, sick: &[&str]) -> Self {
        self.sick = sick.iter().map(|t| t.to_string()).collect();
        self
    }

    pub fn with_activity(mut self, activity: f64) -> Result<Self> {
        if !(activity >= 0.0) {
            return Err(Error::invalid("preferences", "activity must be ≥ 0"));
        }
        self.activity = activity;
        Ok(self)
    }

    pub fn favorites(&self) -> &[(String, f64)] {
        &self.favorites
    }

    pub fn sick(&self) -> &BTreeSet<String> {
        &self.sick
    }

    pub fn activity(&self) -> f64 {
        self.activity
    }

    pub fn likes(&self, theme: &str) -> bool {
        self.favorites.iter().any(|(t, _)| t == theme)
    }
}

/// Preferences of everyone in a group.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ThemeWeights {
    people: BTreeMap<Person, Preferences>,
}

impl ThemeWeights {
    pub fn new(people: BTreeMap<Person, Preferences>) -> Self {
        ThemeWeights { people }
    }

    pub fn get(&self, j: Person) -> Option<&Preferences> {
        self.people.get(&j)
    }

    fn of(&self, j: Person) -> Result<&Preferences> {
        self.people
            .get(&j)
            .ok_or_else(|| Error::invalid("theme weights", format!("no preferences for person {j}")))
    }

    /// +1 for a favorite, −1 for a sick theme that is not also a favorite,
    /// 0 otherwise.
    pub fn sup(&self, j: Person, theme: &str) -> Result<i8> {
        let p = self.of(j)?;
        Ok(if p.likes(theme) {
            1
        } else if p.sick.contains(theme) {
            -1
        } else {
            0
        })
    }

    /// Members of `among` holding `theme` as a favorite.
    pub fn sub(&self, theme: &str, among: &BTreeSet<Person>) -> BTreeSet<Person> {
        among
            .iter()
            .copied()
            .filter(|k| self.people.get(k).is_some_and(|p| p.likes(theme)))
            .collect()
    }

    /// Chance that `j` is the one who proposes: activity share over `group`.
    pub fn initiator_probability(&self, j: Person, group: &BTreeSet<Person>) -> Result<f64> {
        if !group.contains(&j) {
            return Err(Error::pre(format!("person {j} is not in the group")));
        }
        let total = group.iter().map(|k| self.of(*k).map(|p| p.activity)).sum::<Result<f64>>()?;
        let own = self.of(j)?.activity;
        Ok(if total > 0.0 { own / total } else { 1.0 / group.len() as f64 })
    }
}

/// Distribution over `F(j) ∪ {Null}` of the theme `j` proposes. A favorite
/// scores `(|sub(t, N(j))| − 1)·w / |F(j)|`; silence takes whatever the
/// favorites leave of 1, and the scores are rescaled to sum to 1.
pub fn theme_distribution(weights: &ThemeWeights, nf: &NeighborFn, j: Person) -> Result<Vec<(Mark, f64)>> {
    let prefs = weights.of(j)?;
    let around = nf
        .of(j)
        .ok_or_else(|| Error::invalid("neighbor function", format!("no neighbors for person {j}")))?;
    let size = prefs.favorites.len() as f64;
    let mut out: Vec<(Mark, f64)> = prefs
        .favorites
        .iter()
        .map(|(t, w)| {
            let n = weights.sub(t, around).len() as f64;
            (Mark::Theme(t.clone()), (n - 1.0).max(0.0) * w / size)
        })
        .collect();
    let spoken: f64 = out.iter().map(|(_, s)| s).sum();
    out.push((Mark::Null, (1.0 - spoken).max(0.0)));
    let v: f64 = out.iter().map(|(_, s)| s).sum();
    for (_, s) in &mut out {
        *s /= v;
    }
    Ok(out)
}

/// One entry of [`theme_distribution`].
pub fn theme_probability(weights: &ThemeWeights, nf: &NeighborFn, j: Person, theme: &Mark) -> Result<f64> {
    theme_distribution(weights, nf, j)?
        .into_iter()
        .find(|(m, _)| m == theme)
        .map(|(_, p)| p)
        .ok_or_else(|| Error::pre(format!("{theme:?} is neither a favorite of person {j} nor Null")))
}
