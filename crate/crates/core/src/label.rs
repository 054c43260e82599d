use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Iconic gesture category.
///
/// The six named variants are the sandwich-task gesture set; anything else is
/// carried verbatim in [`GestureLabel::Other`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GestureLabel {
    Cutting,
    Eating,
    Folding,
    Layering,
    Opening,
    Spreading,
    Other(String),
}

impl GestureLabel {
    /// The six named labels in canonical order.
    pub const NAMED: [GestureLabel; 6] = [
        GestureLabel::Cutting,
        GestureLabel::Eating,
        GestureLabel::Folding,
        GestureLabel::Layering,
        GestureLabel::Opening,
        GestureLabel::Spreading,
    ];

    /// Maps a raw label string onto the enum. Exact, case-sensitive match
    /// against the six names; everything else becomes `Other(raw)`.
    pub fn parse(raw: &str) -> GestureLabel {
        match raw {
            "cutting" => GestureLabel::Cutting,
            "eating" => GestureLabel::Eating,
            "folding" => GestureLabel::Folding,
            "layering" => GestureLabel::Layering,
            "opening" => GestureLabel::Opening,
            "spreading" => GestureLabel::Spreading,
            other => GestureLabel::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            GestureLabel::Cutting => "cutting",
            GestureLabel::Eating => "eating",
            GestureLabel::Folding => "folding",
            GestureLabel::Layering => "layering",
            GestureLabel::Opening => "opening",
            GestureLabel::Spreading => "spreading",
            GestureLabel::Other(raw) => raw,
        }
    }

    /// Base verb form ("cut" for cutting). `Other` labels return their raw text.
    pub fn verb(&self) -> &str {
        match self {
            GestureLabel::Cutting => "cut",
            GestureLabel::Eating => "eat",
            GestureLabel::Folding => "fold",
            GestureLabel::Layering => "layer",
            GestureLabel::Opening => "open",
            GestureLabel::Spreading => "spread",
            GestureLabel::Other(raw) => raw,
        }
    }

    pub fn is_named(&self) -> bool {
        !matches!(self, GestureLabel::Other(_))
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for GestureLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for GestureLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        if raw.is_empty() {
            return Err(serde::de::Error::custom("gesture label must not be empty"));
        }
        Ok(GestureLabel::parse(&raw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn named_set_is_the_six_labels() {
        let names: Vec<&str> = GestureLabel::NAMED.iter().map(|l| l.as_str()).collect();
        assert_eq!(
            names,
            [
                "cutting",
                "eating",
                "folding",
                "layering",
                "opening",
                "spreading"
            ]
        );
    }

    #[test]
    fn other_round_trips_through_json() {
        let l = GestureLabel::parse("pointing");
        assert_eq!(l, GestureLabel::Other("pointing".into()));
        let s = serde_json::to_string(&l).unwrap();
        assert_eq!(s, "\"pointing\"");
        assert_eq!(serde_json::from_str::<GestureLabel>(&s).unwrap(), l);
    }

    proptest! {
        #[test]
        fn label_closure(raw in "[a-zA-Z ]{1,12}") {
            let l = GestureLabel::parse(&raw);
            prop_assert_eq!(l.as_str(), raw.as_str());
            let named = GestureLabel::NAMED.iter().any(|n| n.as_str() == raw);
            prop_assert_eq!(l.is_named(), named);
        }
    }
}
