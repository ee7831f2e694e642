//! Quantiles and posterior summaries.
//!
//! Quantiles use linear interpolation between order statistics: for sorted
//! `x_0..x_{n−1}` the `p`-quantile sits at position `(n − 1) p`.

use super::DiagnosticsError;

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of an empty sample");
    let pos = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, p)
}

/// Weighted quantile; reduces to [`quantile_sorted`] when all weights are equal.
///
/// Sorted value `k` is placed at `C_k / C_last`, where `C_k` is the total weight
/// strictly before it.
pub fn weighted_quantile(values: &[f64], weights: &[f64], p: f64) -> f64 {
    assert_eq!(values.len(), weights.len());
    if weights.windows(2).all(|w| w[0] == w[1]) {
        return quantile(values, p);
    }
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    if order.len() == 1 {
        return values[order[0]];
    }
    let mut positions = Vec::with_capacity(order.len());
    let mut acc = 0.0;
    for &i in &order {
        positions.push(acc);
        acc += weights[i];
    }
    let last = *positions.last().unwrap();
    let target = p.clamp(0.0, 1.0) * last;
    let k = positions.partition_point(|&c| c <= target);
    if k >= order.len() {
        return values[*order.last().unwrap()];
    }
    let (c0, c1) = (positions[k - 1], positions[k]);
    let (v0, v1) = (values[order[k - 1]], values[order[k]]);
    v0 + (target - c0) / (c1 - c0) * (v1 - v0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
    pub sd: f64,
}

/// Per-parameter mean, median, 90 % credible interval and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Key/value text with three decimals, one `[name]` table per parameter.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.parameters {
            out.push_str(&format!(
                "[{}]\nmean = {:.3}\nmedian = {:.3}\nq05 = {:.3}\nq95 = {:.3}\nsd = {:.3}\n\n",
                p.name, p.mean, p.median, p.q05, p.q95, p.sd
            ));
        }
        out
    }

    /// Rows `name | mean | median | (q05, q95)`.
    pub fn to_table(&self) -> String {
        let mut out = String::from("parameter | mean | median | 90% credible interval\n");
        for p in &self.parameters {
            out.push_str(&format!(
                "{} | {:.3} | {:.3} | ({:.3}, {:.3})\n",
                p.name, p.mean, p.median, p.q05, p.q95
            ));
        }
        out
    }
}

pub const MIN_SUMMARY_SAMPLES: usize = 100;

/// Summarises each named sample column; every column needs at least 100 values.
pub fn summarize(names: &[String], samples: &[Vec<f64>]) -> Result<PosteriorSummary, DiagnosticsError> {
    if names.len() != samples.len() {
        return Err(DiagnosticsError::Invalid(format!(
            "{} names for {} sample columns",
            names.len(),
            samples.len()
        )));
    }
    let parameters = names
        .iter()
        .zip(samples)
        .map(|(name, col)| {
            if col.len() < MIN_SUMMARY_SAMPLES {
                return Err(DiagnosticsError::TooFewSamples {
                    needed: MIN_SUMMARY_SAMPLES,
                    got: col.len(),
                });
            }
            let mut sorted = col.clone();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len() as f64;
            // summing the sorted copy keeps the result permutation-invariant
            let mean = sorted.iter().sum::<f64>() / n;
            let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(ParameterSummary {
                name: name.clone(),
                mean,
                median: quantile_sorted(&sorted, 0.5),
                q05: quantile_sorted(&sorted, 0.05),
                q95: quantile_sorted(&sorted, 0.95),
                sd: var.sqrt(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(PosteriorSummary { parameters })
}

/// `theta1..thetaq, sigma2`.
pub fn parameter_names(q: usize) -> Vec<String> {
    (1..=q).map(|k| format!("theta{k}")).chain(["sigma2".to_string()]).collect()
}
