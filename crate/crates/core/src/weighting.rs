//! Parametric map from attention scores to objective weights,
//! `w(a) = (1−d)·((a − a_min)/(a_max − a_min))^γ + d`.

use serde::{Deserialize, Serialize};

use crate::error::{IaqError, Result};
use crate::model::ImportanceMap;

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    /// Shape exponent γ; > 1 convex, < 1 concave.
    pub gamma: f64,
    /// Floor d keeping every weight strictly positive.
    pub floor: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            floor: DEFAULT_WEIGHT_FLOOR,
        }
    }
}

impl WeightParams {
    pub fn new(gamma: f64, floor: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(IaqError::InvalidParameter(format!("gamma = {gamma} must be > 0")));
        }
        if !(floor > 0.0 && floor < 1.0) {
            return Err(IaqError::InvalidParameter(format!(
                "weight floor = {floor} must lie in (0, 1)"
            )));
        }
        Ok(Self { gamma, floor })
    }

    pub fn with_gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, DEFAULT_WEIGHT_FLOOR)
    }
}

/// Weight of score `a` given the score range of its map. A degenerate range
/// (`a_max == a_min`) maps every patch to weight 1.
pub fn weight(a: f64, a_min: f64, a_max: f64, params: &WeightParams) -> f64 {
    let span = a_max - a_min;
    if span <= 0.0 {
        return 1.0;
    }
    let t = ((a - a_min) / span).clamp(0.0, 1.0);
    (1.0 - params.floor) * t.powf(params.gamma) + params.floor
}

pub fn weight_vector(map: &ImportanceMap, params: &WeightParams) -> Vec<f64> {
    let (lo, hi) = map.min_max();
    map.scores()
        .iter()
        .map(|&a| weight(a, lo, hi, params))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let p = WeightParams::default();
        assert_eq!(weight(0.3, 0.1, 0.3, &p), 1.0);
        assert_eq!(weight(0.1, 0.1, 0.3, &p), 1e-7);
        let mid = weight(0.2, 0.1, 0.3, &p);
        assert!((mid - ((1.0 - 1e-7) / 2.0 + 1e-7)).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores_get_unit_weight() {
        let map = ImportanceMap::uniform(2, 3).unwrap();
        assert!(weight_vector(&map, &WeightParams::default())
            .iter()
            .all(|&w| w == 1.0));
    }

    #[test]
    fn two_scores_map_to_floor_and_one() {
        let map = ImportanceMap::from_scores(vec![0.25, 0.75]).unwrap();
        let w = weight_vector(&map, &WeightParams::default());
        assert_eq!(w, vec![1e-7, 1.0]);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(WeightParams::new(0.0, 1e-7).is_err());
        assert!(WeightParams::new(1.0, 0.0).is_err());
        assert!(WeightParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn curvature_follows_gamma() {
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        for (gamma, sign) in [(0.5, -1.0), (1.0, 0.0), (1.5, 1.0)] {
            let p = WeightParams::with_gamma(gamma).unwrap();
            let w: Vec<f64> = grid.iter().map(|&a| weight(a, 0.0, 1.0, &p)).collect();
            for k in 1..w.len() - 1 {
                let second = w[k + 1] - 2.0 * w[k] + w[k - 1];
                if sign == 0.0 {
                    assert!(second.abs() < 1e-12);
                } else {
                    assert!(second * sign >= -1e-15, "gamma {gamma} at {k}: {second}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn order_preserving_and_bounded(
            scores in proptest::collection::vec(0.0f64..1.0, 2..40),
            gamma in 0.1f64..3.0,
        ) {
            prop_assume!(scores.iter().sum::<f64>() > 0.0);
            let map = ImportanceMap::from_scores(scores).unwrap();
            let p = WeightParams::with_gamma(gamma).unwrap();
            let w = weight_vector(&map, &p);
            let a = map.scores();
            for i in 0..a.len() {
                prop_assert!(w[i] >= p.floor && w[i] <= 1.0);
                for j in 0..a.len() {
                    if a[i] >= a[j] {
                        prop_assert!(w[i] >= w[j]);
                    }
                }
            }
        }
    }
}
