use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Match counts from which P/R/F1 are derived.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn new(tp: usize, predicted: usize, gold: usize) -> Self {
        debug_assert!(tp <= predicted && tp <= gold);
        Self {
            tp,
            predicted,
            gold,
        }
    }

    /// P/R/F1 with zero denominators scoring 0.
    pub fn prf(self) -> Prf {
        Prf::from_counts(self)
    }

    /// Item-level P/R/F1: when both sides are empty the item is vacuously
    /// correct and scores 1.
    pub fn item_prf(self) -> Prf {
        if self.predicted == 0 && self.gold == 0 {
            Prf {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0,
                ..Prf::from_counts(self)
            }
        } else {
            Prf::from_counts(self)
        }
    }
}

impl Add for Counts {
    type Output = Counts;

    fn add(self, rhs: Counts) -> Counts {
        Counts {
            tp: self.tp + rhs.tp,
            predicted: self.predicted + rhs.predicted,
            gold: self.gold + rhs.gold,
        }
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Prf {
    pub fn from_counts(c: Counts) -> Self {
        let precision = ratio(c.tp, c.predicted);
        let recall = ratio(c.tp, c.gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            true_positives: c.tp,
            predicted: c.predicted,
            gold: c.gold,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts::new(self.true_positives, self.predicted, self.gold)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Overall counts plus counts per subcategory (punctuation class, POS tag,
/// entity category).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfBreakdown {
    pub counts: Counts,
    pub per_category: BTreeMap<String, Counts>,
}

impl PrfBreakdown {
    pub fn prf(&self) -> Prf {
        self.counts.prf()
    }

    pub fn item_prf(&self) -> Prf {
        self.counts.item_prf()
    }

    pub fn category_prf(&self) -> BTreeMap<String, Prf> {
        self.per_category
            .iter()
            .map(|(k, c)| (k.clone(), c.prf()))
            .collect()
    }

    pub(crate) fn bump(&mut self, category: &str, f: impl FnOnce(&mut Counts)) {
        f(self.per_category.entry(category.to_owned()).or_default());
    }

    pub fn merge(&mut self, other: &PrfBreakdown) {
        self.counts += other.counts;
        for (k, c) in &other.per_category {
            *self.per_category.entry(k.clone()).or_default() += *c;
        }
    }
}
