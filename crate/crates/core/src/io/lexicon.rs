//! First-name and gender-clue lexicons (UTF-8 TSV, `#` comments).

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Gender;
use crate::text::{fold, fold_name};

/// Titles stripped from proper-name keys and skipped when looking for a
/// first name. Folded forms.
pub const HONORIFICS: &[&str] = &[
    "m", "m.", "mm", "mm.", "mme", "mme.", "mmes", "mlle", "mlle.", "mlles", "mr", "mr.", "mrs",
    "mrs.", "ms", "ms.", "miss", "sir", "lady", "lord", "dr", "dr.", "monsieur", "madame",
    "mademoiselle", "messieurs", "mesdames", "docteur", "maitre", "me", "monseigneur", "mgr",
    "abbe", "pere", "mere", "frere", "soeur", "saint", "sainte", "st", "ste", "comte", "comtesse",
    "baron", "baronne", "marquis", "marquise", "duc", "duchesse", "prince", "princesse", "roi",
    "reine", "capitaine", "colonel", "general", "don", "dona", "herr", "frau",
];

/// Determiners and name particles dropped from proper-name keys.
pub const NAME_FUNCTION_WORDS: &[&str] = &[
    "le", "la", "les", "l'", "l", "un", "une", "des", "de", "du", "d'", "d", "the", "a", "an",
    "of", "van", "von", "der", "di", "da", "del",
];

pub fn is_honorific(token: &str) -> bool {
    HONORIFICS.contains(&fold(token).as_str())
}

pub fn is_name_function_word(token: &str) -> bool {
    NAME_FUNCTION_WORDS.contains(&fold(token).as_str())
}

fn lexicon_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Lexicon {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim_end_matches('\r');
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, l))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NameCounts {
    pub male: u64,
    pub female: u64,
}

impl NameCounts {
    pub fn total(&self) -> u64 {
        self.male + self.female
    }
}

/// Birth counts per folded first name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FirstNameLexicon {
    entries: BTreeMap<String, NameCounts>,
}

impl FirstNameLexicon {
    /// Parses rows `name<TAB>male_count<TAB>female_count`. Duplicate names
    /// (after folding) are summed.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, NameCounts> = BTreeMap::new();
        for (line, row) in data_lines(text) {
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 3 {
                return Err(lexicon_err(
                    source,
                    line,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let name = fold_name(cols[0]);
            if name.is_empty() {
                return Err(lexicon_err(source, line, "empty name"));
            }
            let count = |s: &str, what: &str| -> Result<u64> {
                s.trim().parse::<u64>().map_err(|_| {
                    lexicon_err(source, line, format!("{what} count `{}` is not a non-negative integer", s.trim()))
                })
            };
            let male = count(cols[1], "male")?;
            let female = count(cols[2], "female")?;
            if male == 0 && female == 0 {
                return Err(lexicon_err(source, line, format!("both counts are zero for `{name}`")));
            }
            let e = entries.entry(name).or_default();
            e.male += male;
            e.female += female;
        }
        if entries.is_empty() {
            return Err(lexicon_err(source, 0, "lexicon has no entries"));
        }
        Ok(FirstNameLexicon { entries })
    }

    pub fn from_entries<'a>(rows: impl IntoIterator<Item = (&'a str, u64, u64)>) -> Self {
        let mut entries: BTreeMap<String, NameCounts> = BTreeMap::new();
        for (name, male, female) in rows {
            let e = entries.entry(fold_name(name)).or_default();
            e.male += male;
            e.female += female;
        }
        FirstNameLexicon { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, NameCounts)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Rows in the format read by [`FirstNameLexicon::parse`].
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# name\tmale\tfemale\n");
        for (name, c) in &self.entries {
            s.push_str(&format!("{name}\t{}\t{}\n", c.male, c.female));
        }
        s
    }

    pub fn get(&self, name: &str) -> Option<NameCounts> {
        self.entries.get(&fold_name(name)).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Majority gender of `name` when its share reaches `ratio_threshold`.
    pub fn gender_of(&self, name: &str, ratio_threshold: f64) -> Gender {
        let Some(c) = self.get(name) else {
            return Gender::Unknown;
        };
        let total = c.total() as f64;
        if c.male as f64 / total >= ratio_threshold && c.male > c.female {
            Gender::Masculine
        } else if c.female as f64 / total >= ratio_threshold && c.female > c.male {
            Gender::Feminine
        } else {
            Gender::Unknown
        }
    }
}

pub fn load_firstname_lexicon(path: impl AsRef<Path>) -> Result<FirstNameLexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FirstNameLexicon::parse(&text, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClueKind {
    Pronoun,
    Noun,
    Article,
    Adjective,
    Honorific,
}

impl ClueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClueKind::Pronoun => "pronoun",
            ClueKind::Noun => "noun",
            ClueKind::Article => "article",
            ClueKind::Adjective => "adjective",
            ClueKind::Honorific => "honorific",
        }
    }
}

impl fmt::Display for ClueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClueKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pronoun" => Ok(ClueKind::Pronoun),
            "noun" => Ok(ClueKind::Noun),
            "article" | "determiner" => Ok(ClueKind::Article),
            "adjective" | "adj" => Ok(ClueKind::Adjective),
            "honorific" | "title" => Ok(ClueKind::Honorific),
            other => Err(format!("unknown clue kind `{other}`")),
        }
    }
}

/// Explicit gender clues keyed by folded token form and clue kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderClueLexicon {
    entries: BTreeMap<(String, ClueKind), Gender>,
}

impl GenderClueLexicon {
    /// Adds a clue; a form may not carry both genders within one kind.
    pub fn insert(&mut self, form: &str, kind: ClueKind, gender: Gender) -> std::result::Result<(), String> {
        if !gender.is_known() {
            return Err(format!("clue `{form}` must be m or f"));
        }
        let key = (fold(form), kind);
        match self.entries.get(&key) {
            Some(&g) if g != gender => Err(format!(
                "`{}` listed as both masculine and feminine {kind}",
                key.0
            )),
            _ => {
                self.entries.insert(key, gender);
                Ok(())
            }
        }
    }

    /// Parses rows `form<TAB>gender<TAB>kind`.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut lex = GenderClueLexicon::default();
        for (line, row) in data_lines(text) {
            let cols: Vec<&str> = row.split('\t').map(str::trim).collect();
            if cols.len() != 3 {
                return Err(lexicon_err(
                    source,
                    line,
                    format!("expected 3 tab-separated columns, found {}", cols.len()),
                ));
            }
            let gender: Gender = cols[1].parse().map_err(|m: String| lexicon_err(source, line, m))?;
            let kind: ClueKind = cols[2].parse().map_err(|m: String| lexicon_err(source, line, m))?;
            lex.insert(cols[0], kind, gender)
                .map_err(|m| lexicon_err(source, line, m))?;
        }
        if lex.entries.is_empty() {
            return Err(lexicon_err(source, 0, "lexicon has no entries"));
        }
        Ok(lex)
    }

    /// Every clue attached to a token form, in kind order.
    pub fn lookup(&self, form: &str) -> Vec<(ClueKind, Gender)> {
        let f = fold(form);
        self.entries
            .range((f.clone(), ClueKind::Pronoun)..=(f, ClueKind::Honorific))
            .map(|((_, k), g)| (*k, *g))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A small built-in French clue list: personal pronouns, articles,
    /// common kinship and social nouns, agreeing adjectives and titles.
    pub fn french_default() -> Self {
        use ClueKind::*;
        use Gender::{Feminine as F, Masculine as M};
        let rows: &[(&str, Gender, ClueKind)] = &[
            ("il", M, Pronoun),
            ("lui-même", M, Pronoun),
            ("celui", M, Pronoun),
            ("celui-ci", M, Pronoun),
            ("celui-là", M, Pronoun),
            ("elle", F, Pronoun),
            ("elle-même", F, Pronoun),
            ("celle", F, Pronoun),
            ("celle-ci", F, Pronoun),
            ("celle-là", F, Pronoun),
            ("le", M, Article),
            ("un", M, Article),
            ("du", M, Article),
            ("au", M, Article),
            ("ce", M, Article),
            ("cet", M, Article),
            ("la", F, Article),
            ("une", F, Article),
            ("cette", F, Article),
            ("homme", M, Noun),
            ("garçon", M, Noun),
            ("monsieur", M, Noun),
            ("père", M, Noun),
            ("fils", M, Noun),
            ("frère", M, Noun),
            ("oncle", M, Noun),
            ("neveu", M, Noun),
            ("mari", M, Noun),
            ("époux", M, Noun),
            ("roi", M, Noun),
            ("prince", M, Noun),
            ("comte", M, Noun),
            ("marquis", M, Noun),
            ("baron", M, Noun),
            ("duc", M, Noun),
            ("seigneur", M, Noun),
            ("vieillard", M, Noun),
            ("abbé", M, Noun),
            ("curé", M, Noun),
            ("femme", F, Noun),
            ("fille", F, Noun),
            ("dame", F, Noun),
            ("madame", F, Noun),
            ("mademoiselle", F, Noun),
            ("mère", F, Noun),
            ("sœur", F, Noun),
            ("tante", F, Noun),
            ("nièce", F, Noun),
            ("épouse", F, Noun),
            ("reine", F, Noun),
            ("princesse", F, Noun),
            ("comtesse", F, Noun),
            ("marquise", F, Noun),
            ("baronne", F, Noun),
            ("duchesse", F, Noun),
            ("servante", F, Noun),
            ("vieille", F, Adjective),
            ("vieux", M, Adjective),
            ("petit", M, Adjective),
            ("petite", F, Adjective),
            ("beau", M, Adjective),
            ("belle", F, Adjective),
            ("heureux", M, Adjective),
            ("heureuse", F, Adjective),
            ("M.", M, Honorific),
            ("MM.", M, Honorific),
            ("Mme", F, Honorific),
            ("Mlle", F, Honorific),
            ("Mr.", M, Honorific),
            ("Mrs.", F, Honorific),
            ("Miss", F, Honorific),
            ("Sir", M, Honorific),
            ("Lady", F, Honorific),
            ("Lord", M, Honorific),
        ];
        let mut lex = GenderClueLexicon::default();
        for &(form, g, kind) in rows {
            lex.insert(form, kind, g).expect("built-in clues are consistent");
        }
        lex
    }
}

pub fn load_gender_clue_lexicon(path: impl AsRef<Path>) -> Result<GenderClueLexicon> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GenderClueLexicon::parse(&text, &path.display().to_string())
}
