//! Closed-class morphological hints for French pronouns.

use super::{Gender, Number, Person, Token, TokenCategory};
use crate::text::fold;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PronounHint {
    pub gender: Gender,
    pub number: Number,
    pub person: Person,
}

const fn hint(gender: Gender, number: Number, person: Person) -> PronounHint {
    PronounHint {
        gender,
        number,
        person,
    }
}

/// Morphology of a French personal, reflexive or possessive pronoun form.
/// Possessive determiners agree with the possessed noun, so their gender is
/// left unknown.
pub fn french_pronoun_hint(form: &str) -> Option<PronounHint> {
    use Gender::{Feminine as F, Masculine as M, Unknown as GU};
    use Number::{Plural as Pl, Singular as Sg, Unknown as NU};
    use Person::{First, Second, Third};
    let h = match fold(form).trim_end_matches('\'') {
        "je" | "j" | "me" | "m" | "moi" | "mon" | "ma" | "mes" => hint(GU, Sg, First),
        "tu" | "te" | "t" | "toi" | "ton" | "ta" | "tes" => hint(GU, Sg, Second),
        "il" | "lui-meme" | "celui" | "celui-ci" | "celui-la" => hint(M, Sg, Third),
        "elle" | "elle-meme" | "celle" | "celle-ci" | "celle-la" => {
            hint(F, Sg, Third)
        }
        "ils" | "eux" | "ceux" => hint(M, Pl, Third),
        "elles" | "celles" => hint(F, Pl, Third),
        "lui" | "se" | "s" | "soi" | "son" | "sa" | "ses" => hint(GU, Sg, Third),
        "leur" | "leurs" => hint(GU, Pl, Third),
        "nous" | "notre" | "nos" => hint(GU, Pl, First),
        "vous" | "votre" | "vos" => hint(GU, NU, Second),
        "on" => hint(GU, NU, Third),
        _ => return None,
    };
    Some(h)
}

/// Fills unknown hints on pronoun tokens from the closed-class table.
/// Tokens whose category is unknown but whose form is a listed pronoun are
/// marked as pronouns. Hints already present are never overwritten.
pub fn fill_french_hints(tokens: &mut [Token]) {
    for tok in tokens {
        let Some(h) = french_pronoun_hint(&tok.text) else {
            continue;
        };
        if tok.category_hint == TokenCategory::Unknown {
            tok.category_hint = TokenCategory::Pronoun;
        }
        if tok.category_hint != TokenCategory::Pronoun {
            continue;
        }
        if tok.gender_hint == Gender::Unknown {
            tok.gender_hint = h.gender;
        }
        if tok.number_hint == Number::Unknown {
            tok.number_hint = h.number;
        }
        if tok.person_hint == Person::Unknown {
            tok.person_hint = h.person;
        }
    }
}
