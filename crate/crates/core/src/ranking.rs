use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

/// One ranked item. Items spliced in by reference expansion carry no score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedItem {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Ordered `(id, score)` entries passed between pipeline stages. Position is rank.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedList {
    pub items: Vec<RankedItem>,
}

impl RankedList {
    pub fn new(items: Vec<RankedItem>) -> Self {
        Self { items }
    }

    /// Sorts `(id, score)` by score descending, ties by ascending id, and keeps `k`.
    pub fn top_k_by_score(mut scored: Vec<(String, f64)>, k: usize) -> Self {
        scored.sort_by(|a, b| desc_score_then_id(a.1, &a.0, b.1, &b.0));
        scored.truncate(k);
        Self::from_scored(scored)
    }

    pub fn from_scored(scored: Vec<(String, f64)>) -> Self {
        Self {
            items: scored
                .into_iter()
                .map(|(id, s)| RankedItem { id, score: Some(s) })
                .collect(),
        }
    }

    pub fn from_ids<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            items: ids
                .into_iter()
                .map(|id| RankedItem {
                    id: id.into(),
                    score: None,
                })
                .collect(),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.id.as_str())
    }

    pub fn id_vec(&self) -> Vec<String> {
        self.ids().map(str::to_string).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// 0-based position of `id`.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|i| i.id == id)
    }
}

/// Descending by score (NaN last), then ascending by id.
pub(crate) fn desc_score_then_id(sa: f64, ia: &str, sb: f64, ib: &str) -> Ordering {
    sb.partial_cmp(&sa)
        .unwrap_or_else(|| sa.is_nan().cmp(&sb.is_nan()))
        .then_with(|| ia.cmp(ib))
}
