//! Sequences indexed by level and their exponential decay fits.

use serde::Serialize;

/// Least-squares fit of `log value ≈ log C + n log λ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub lambda: f64,
    /// Root-mean-square residual of the fit in `log` units.
    pub residual: f64,
    /// Levels used by the fit.
    pub used: usize,
    /// Levels skipped because the value was at or below the precision floor.
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub quantity: String,
    /// `(n, value)`.
    pub values: Vec<(usize, f64)>,
    pub fit: Option<DecayFit>,
}

impl DecayReport {
    /// Build the report and fit over `n >= n_min`, ignoring values `<= floor`.
    pub fn new(quantity: impl Into<String>, values: Vec<(usize, f64)>, n_min: usize, floor: f64) -> Self {
        let fit = fit_decay(&values, n_min, floor);
        DecayReport {
            quantity: quantity.into(),
            values,
            fit,
        }
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.values.iter().find(|(k, _)| *k == n).map(|(_, v)| *v)
    }

    pub fn all_zero(&self) -> bool {
        self.values.iter().all(|(_, v)| *v == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|(_, v)| v.is_finite())
    }
}

/// Fit `log v = log C + n log λ` by least squares. Needs two usable levels.
pub fn fit_decay(values: &[(usize, f64)], n_min: usize, floor: f64) -> Option<DecayFit> {
    let window: Vec<&(usize, f64)> = values.iter().filter(|(n, _)| *n >= n_min).collect();
    let used: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, v)| v.is_finite() && *v > floor && *v > 0.0)
        .map(|(n, v)| (*n as f64, v.ln()))
        .collect();
    let censored = window.len() - used.len();
    if used.len() < 2 {
        return None;
    }
    let k = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / k;
    let my = used.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = used.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = used.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = used
        .iter()
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Some(DecayFit {
        c: intercept.exp(),
        lambda: slope.exp(),
        residual: (rss / k).sqrt(),
        used: used.len(),
        censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_geometric_sequence() {
        let values: Vec<(usize, f64)> = (0..12).map(|n| (n, 3.0 * 0.5f64.powi(n as i32))).collect();
        let fit = fit_decay(&values, 4, 0.0).unwrap();
        assert!((fit.lambda - 0.5).abs() < 1e-12);
        assert!((fit.c - 3.0).abs() < 1e-9);
        assert!(fit.residual < 1e-12);
        assert_eq!(fit.used, 8);
    }

    #[test]
    fn zeros_are_censored() {
        let values = vec![(4, 0.0), (5, 0.0), (6, 1e-3)];
        assert_eq!(fit_decay(&values, 4, 1e-100), None);
        let r = DecayReport::new("x", values, 4, 1e-100);
        assert!(r.all_finite());
        assert!(!r.all_zero());
    }
}
