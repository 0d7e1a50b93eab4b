use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Category, CategoryId};

/// Category list plus the exclusion rules that narrow it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ontology {
    pub categories: Vec<Category>,
    pub excluded_supercategories: BTreeSet<String>,
    pub excluded_names: BTreeSet<String>,
}

const FASHIONPEDIA: [(&str, &str); 46] = [
    ("shirt, blouse", "upperbody"),
    ("top, t-shirt, sweatshirt", "upperbody"),
    ("sweater", "upperbody"),
    ("cardigan", "upperbody"),
    ("jacket", "upperbody"),
    ("vest", "upperbody"),
    ("pants", "lowerbody"),
    ("shorts", "lowerbody"),
    ("skirt", "lowerbody"),
    ("coat", "wholebody"),
    ("dress", "wholebody"),
    ("jumpsuit", "wholebody"),
    ("cape", "wholebody"),
    ("glasses", "head"),
    ("hat", "head"),
    ("headband, head covering, hair accessory", "head"),
    ("tie", "neck"),
    ("glove", "arms and hands"),
    ("watch", "arms and hands"),
    ("belt", "waist"),
    ("leg warmer", "legs and feet"),
    ("tights, stockings", "legs and feet"),
    ("sock", "legs and feet"),
    ("shoe", "legs and feet"),
    ("bag, wallet", "others"),
    ("scarf", "others"),
    ("umbrella", "others"),
    ("hood", "garment parts"),
    ("collar", "garment parts"),
    ("lapel", "garment parts"),
    ("epaulette", "garment parts"),
    ("sleeve", "garment parts"),
    ("pocket", "garment parts"),
    ("neckline", "garment parts"),
    ("buckle", "closures"),
    ("zipper", "closures"),
    ("applique", "decorations"),
    ("bead", "decorations"),
    ("bow", "decorations"),
    ("flower", "decorations"),
    ("fringe", "decorations"),
    ("ribbon", "decorations"),
    ("rivet", "decorations"),
    ("ruffle", "decorations"),
    ("sequin", "decorations"),
    ("tassel", "decorations"),
];

impl Ontology {
    /// The 46 Fashionpedia apparel categories, numbered from 1 in their
    /// published order, with no exclusions.
    pub fn fashionpedia_full() -> Self {
        let categories = FASHIONPEDIA
            .iter()
            .enumerate()
            .map(|(i, (name, sup))| Category {
                id: CategoryId(i as u64 + 1),
                name: name.to_string(),
                supercategory: sup.to_string(),
            })
            .collect();
        Self {
            categories,
            excluded_supercategories: BTreeSet::new(),
            excluded_names: BTreeSet::new(),
        }
    }

    /// Categories that are never whole primary items, or too rare to keep.
    pub fn fashionpedia() -> Self {
        Self {
            excluded_supercategories: ["garment parts", "closures", "decorations"]
                .map(String::from)
                .into(),
            excluded_names: ["sweater", "cape", "tie", "belt", "leg warmer"]
                .map(String::from)
                .into(),
            ..Self::fashionpedia_full()
        }
    }

    fn exclusion(&self, c: &Category) -> Option<String> {
        if self.excluded_supercategories.contains(&c.supercategory) {
            Some(format!("supercategory {}", c.supercategory))
        } else if self
            .excluded_names
            .iter()
            .any(|n| normalize_label(n) == normalize_label(&c.name))
        {
            Some("excluded name".into())
        } else {
            None
        }
    }

    /// Categories left after the exclusions.
    pub fn surviving(&self) -> Vec<Category> {
        self.categories
            .iter()
            .filter(|c| self.exclusion(c).is_none())
            .cloned()
            .collect()
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }
}

impl Default for Ontology {
    fn default() -> Self {
        Self::fashionpedia()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelRejection {
    Excluded { name: String, why: String },
    Unknown(String),
}

impl std::fmt::Display for LabelRejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelRejection::Excluded { name, why } => write!(f, "{name}: {why}"),
            LabelRejection::Unknown(l) => write!(f, "no category named {l:?}"),
        }
    }
}

/// Lowercases, turns punctuation into spaces and collapses whitespace, so
/// `"Bag,Wallet"` and `"bag, wallet"` agree.
pub fn normalize_label(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_lowercase().next().unwrap_or(c)
            } else {
                ' '
            }
        })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact match on the normalized full category name.
pub fn map_label(label: &str, ont: &Ontology) -> Result<Category, LabelRejection> {
    let want = normalize_label(label);
    let c = ont
        .categories
        .iter()
        .find(|c| normalize_label(&c.name) == want)
        .ok_or_else(|| LabelRejection::Unknown(want.clone()))?;
    match ont.exclusion(c) {
        Some(why) => Err(LabelRejection::Excluded {
            name: c.name.clone(),
            why,
        }),
        None => Ok(c.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ontology_keeps_22() {
        let ont = Ontology::default();
        assert_eq!(ont.categories.len(), 46);
        let kept = ont.surviving();
        assert_eq!(kept.len(), 22);
        let names: BTreeSet<_> = kept.iter().map(|c| c.name.as_str()).collect();
        for n in ["shoe", "bag, wallet", "umbrella", "jacket", "pants"] {
            assert!(names.contains(n), "{n}");
        }
    }

    #[test]
    fn mapping() {
        let ont = Ontology::default();
        assert_eq!(map_label("shoe", &ont).unwrap().name, "shoe");
        assert_eq!(
            map_label("  Bag,Wallet ", &ont).unwrap().name,
            "bag, wallet"
        );
        assert_eq!(
            map_label("sleeve", &ont),
            Err(LabelRejection::Excluded {
                name: "sleeve".into(),
                why: "supercategory garment parts".into()
            })
        );
        assert!(matches!(
            map_label("belt", &ont),
            Err(LabelRejection::Excluded { .. })
        ));
        assert_eq!(
            map_label("spaceship", &ont),
            Err(LabelRejection::Unknown("spaceship".into()))
        );
        assert!(matches!(
            map_label("bag", &ont),
            Err(LabelRejection::Unknown(_))
        ));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_label("  Running\tSHOE. "), "running shoe");
        assert_eq!(
            normalize_label("top, t-shirt,sweatshirt"),
            "top t shirt sweatshirt"
        );
        assert_eq!(normalize_label("!!"), "");
    }
}
