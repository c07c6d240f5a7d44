//! Attribute suggestions for a row selection by standard-deviation ratio.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default inclusion threshold.
pub const DEFAULT_TAU: f64 = 0.5;
/// Threshold used in the walkthrough of the German socio-economic data.
pub const GERMAN_WALKTHROUGH_TAU: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRatio {
    pub index: usize,
    pub name: String,
    /// `None` when the attribute does not vary over all rows.
    pub ratio: Option<f64>,
    pub included: bool,
}

/// Per-attribute `σ_selection / σ_all`, sorted ascending by ratio
/// (undefined ratios last, ties by column index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSuggestion {
    pub tau: f64,
    pub attributes: Vec<AttributeRatio>,
}

impl AttributeSuggestion {
    /// Column indices with ratio below `tau`, in ratio order.
    pub fn included(&self) -> Vec<usize> {
        self.attributes.iter().filter(|a| a.included).map(|a| a.index).collect()
    }

    /// Ratio per column index.
    pub fn ratios(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.attributes.len()];
        for a in &self.attributes {
            out[a.index] = a.ratio;
        }
        out
    }
}

fn population_sd(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn suggest_attributes(data: &Dataset, rows: &[usize], tau: f64) -> Result<AttributeSuggestion> {
    let mut rows = rows.to_vec();
    rows.sort_unstable();
    rows.dedup();
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("selection needs at least two rows".into()));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let n = data.n_rows();
    if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
        return Err(Error::InvalidArgument(format!("row {bad} out of range (n={n})")));
    }
    let values = data.values();
    let mut attributes: Vec<AttributeRatio> = (0..data.n_cols())
        .map(|j| {
            let col = values.column(j);
            let all = population_sd(col.iter().copied());
            let ratio = if all > 0.0 {
                Some(population_sd(rows.iter().map(|&i| col[i])) / all)
            } else {
                None
            };
            AttributeRatio {
                index: j,
                name: data.column_names()[j].clone(),
                ratio,
                included: ratio.is_some_and(|r| r < tau),
            }
        })
        .collect();
    attributes.sort_by(|a, b| match (a.ratio, b.ratio) {
        (Some(x), Some(y)) => x.total_cmp(&y).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    Ok(AttributeSuggestion { tau, attributes })
}
