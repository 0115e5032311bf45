//! Domain enums shared across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Gender label. Encoded on disk as an integer: 0 = female, 1 = male.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn index(self) -> u8 {
        match self {
            Gender::Female => 0,
            Gender::Male => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
        }
    }

    pub fn opposite(self) -> Gender {
        match self {
            Gender::Female => Gender::Male,
            Gender::Male => Gender::Female,
        }
    }

    pub fn from_index(i: u8) -> Option<Gender> {
        match i {
            0 => Some(Gender::Female),
            1 => Some(Gender::Male),
            _ => None,
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "female" | "f" | "0" => Ok(Gender::Female),
            "male" | "m" | "1" => Ok(Gender::Male),
            other => Err(format!("unknown gender \"{other}\"")),
        }
    }
}

// On the wire a gender is the 0/1 class label.
impl Serialize for Gender {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.index())
    }
}

impl<'de> Deserialize<'de> for Gender {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Gender::from_index(v)
            .ok_or_else(|| serde::de::Error::custom(format!("gender must be 0 or 1, got {v}")))
    }
}

/// Part-of-speech tag used to group attribution and TF-IDF tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartOfSpeech {
    Noun,
    Verb,
    Adjective,
    Pronoun,
    Other,
}

impl PartOfSpeech {
    pub fn label(self) -> &'static str {
        match self {
            PartOfSpeech::Noun => "noun",
            PartOfSpeech::Verb => "verb",
            PartOfSpeech::Adjective => "adjective",
            PartOfSpeech::Pronoun => "pronoun",
            PartOfSpeech::Other => "other",
        }
    }
}

impl fmt::Display for PartOfSpeech {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PartOfSpeech {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "noun" => Ok(PartOfSpeech::Noun),
            "verb" => Ok(PartOfSpeech::Verb),
            "adjective" | "adj" => Ok(PartOfSpeech::Adjective),
            "pronoun" => Ok(PartOfSpeech::Pronoun),
            "other" => Ok(PartOfSpeech::Other),
            other => Err(format!("unknown part of speech \"{other}\"")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gender_roundtrips_through_index() {
        for g in [Gender::Female, Gender::Male] {
            assert_eq!(Gender::from_index(g.index()), Some(g));
        }
        assert_eq!(Gender::from_index(2), None);
    }

    #[test]
    fn gender_serializes_as_integer() {
        assert_eq!(serde_json::to_string(&Gender::Male).unwrap(), "1");
        assert_eq!(serde_json::to_string(&Gender::Female).unwrap(), "0");
        let g: Gender = serde_json::from_str("0").unwrap();
        assert_eq!(g, Gender::Female);
        assert!(serde_json::from_str::<Gender>("2").is_err());
    }
}
