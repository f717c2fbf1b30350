//! Three-valued answers returned by knowledge algorithms.

use std::fmt;
use std::ops::{BitAnd, Not};

use serde::{Serialize, Serializer};

/// `Yes`, `No`, or `?` (the algorithm cannot decide).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

impl Answer {
    pub fn is_yes(self) -> bool {
        self == Answer::Yes
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Answer::Yes => "Yes",
            Answer::No => "No",
            Answer::Unknown => "?",
        }
    }
}

impl From<bool> for Answer {
    fn from(b: bool) -> Self {
        if b {
            Answer::Yes
        } else {
            Answer::No
        }
    }
}

impl Not for Answer {
    type Output = Answer;

    fn not(self) -> Answer {
        match self {
            Answer::Yes => Answer::No,
            Answer::No => Answer::Yes,
            Answer::Unknown => Answer::Unknown,
        }
    }
}

// No absorbs `?`; Yes does not.
impl BitAnd for Answer {
    type Output = Answer;

    fn bitand(self, rhs: Answer) -> Answer {
        match (self, rhs) {
            (Answer::No, _) | (_, Answer::No) => Answer::No,
            (Answer::Yes, Answer::Yes) => Answer::Yes,
            _ => Answer::Unknown,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::Answer::*;

    #[test]
    fn stated_combination_rules() {
        assert_eq!(!Unknown, Unknown);
        assert_eq!(No & Unknown, No);
        assert_eq!(Unknown & No, No);
        assert_eq!(Yes & Unknown, Unknown);
        assert_eq!(Unknown & Yes, Unknown);
    }

    #[test]
    fn classical_on_definite_values() {
        assert_eq!(!Yes, No);
        assert_eq!(!No, Yes);
        assert_eq!(Yes & Yes, Yes);
        assert_eq!(Yes & No, No);
        assert_eq!(No & No, No);
        assert_eq!(Unknown & Unknown, Unknown);
    }

    #[test]
    fn renders_question_mark() {
        assert_eq!(Unknown.to_string(), "?");
    }
}
