//! Beliefs about the rival's strategy.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Number of points of the parameter grid `{0.00, 0.05, ..., 1.00}`.
pub const GRID_POINTS: usize = 21;

pub fn grid_labels() -> Vec<String> {
    (0..GRID_POINTS).map(|i| format!("{:.2}", i as f64 / 20.0)).collect()
}

/// Grid index of `value`, if it lies on the grid.
pub fn grid_index(value: f64) -> Option<usize> {
    let x = value * 20.0;
    let i = x.round();
    ((x - i).abs() < 1e-9 && (0.0..=20.0).contains(&i)).then_some(i as usize)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyMode {
    /// Rival copies Firm2's previous move.
    #[default]
    Tft,
    /// Rival cooperates with probability alpha_C after cooperation and
    /// alpha_D after defection.
    Generalized,
}

/// Belief about one strategy parameter.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaBelief {
    /// Uniform prior over the grid.
    #[default]
    Uniform,
    /// A grid point, entered as a hard finding in every stage.
    Point(f64),
    /// Likelihood weights over the grid, entered in every stage.
    Likelihood(Vec<f64>),
}

impl AlphaBelief {
    pub fn validate(&self, name: &str) -> Result<()> {
        match self {
            AlphaBelief::Uniform => Ok(()),
            AlphaBelief::Point(v) => grid_index(*v)
                .map(|_| ())
                .ok_or_else(|| ModelError::InvalidAlpha(format!("{name} = {v} is not a grid point"))),
            AlphaBelief::Likelihood(w) => {
                if w.len() != GRID_POINTS || w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().all(|x| *x == 0.0) {
                    Err(ModelError::InvalidAlpha(format!(
                        "{name} likelihood needs {GRID_POINTS} nonnegative weights, not all zero"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Uniform weight on grid points strictly above `t`.
    pub fn above(t: f64) -> Self {
        AlphaBelief::Likelihood((0..GRID_POINTS).map(|i| if i as f64 / 20.0 > t + 1e-12 { 1.0 } else { 0.0 }).collect())
    }

    /// Uniform weight on grid points strictly below `t`.
    pub fn below(t: f64) -> Self {
        AlphaBelief::Likelihood((0..GRID_POINTS).map(|i| if (i as f64 / 20.0) < t - 1e-12 { 1.0 } else { 0.0 }).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StrategyParams {
    pub mode: StrategyMode,
    #[serde(default)]
    pub alpha_c: AlphaBelief,
    #[serde(default)]
    pub alpha_d: AlphaBelief,
    /// Rival is known to cooperate in the first stage.
    pub stage1_cooperates: bool,
}

impl StrategyParams {
    pub fn tft() -> Self {
        StrategyParams {
            mode: StrategyMode::Tft,
            alpha_c: AlphaBelief::Uniform,
            alpha_d: AlphaBelief::Uniform,
            stage1_cooperates: true,
        }
    }

    /// Generalized strategy with point beliefs; the opening move is unknown.
    pub fn generalized(alpha_c: f64, alpha_d: f64) -> Self {
        StrategyParams {
            mode: StrategyMode::Generalized,
            alpha_c: AlphaBelief::Point(alpha_c),
            alpha_d: AlphaBelief::Point(alpha_d),
            stage1_cooperates: false,
        }
    }

    /// Uniform likelihood on `alpha_C > 0.5` and `alpha_D < 0.5`.
    pub fn likelihood_preset() -> Self {
        StrategyParams {
            mode: StrategyMode::Generalized,
            alpha_c: AlphaBelief::above(0.5),
            alpha_d: AlphaBelief::below(0.5),
            stage1_cooperates: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha_c.validate("alpha_C")?;
        self.alpha_d.validate("alpha_D")
    }
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams::tft()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid() {
        let g = grid_labels();
        assert_eq!(g.len(), 21);
        assert_eq!(g[5], "0.25");
        assert_eq!(grid_index(0.8), Some(16));
        assert_eq!(grid_index(0.33), None);
        assert_eq!(grid_index(1.2), None);
    }

    #[test]
    fn likelihood_preset_masks_half_grid() {
        let AlphaBelief::Likelihood(c) = AlphaBelief::above(0.5) else { unreachable!() };
        assert_eq!(c.iter().sum::<f64>(), 10.0);
        assert_eq!(c[10], 0.0);
        assert_eq!(c[11], 1.0);
        let AlphaBelief::Likelihood(d) = AlphaBelief::below(0.5) else { unreachable!() };
        assert_eq!(d.iter().sum::<f64>(), 10.0);
        assert_eq!(d[9], 1.0);
        assert_eq!(d[10], 0.0);
    }

    #[test]
    fn off_grid_point_is_rejected() {
        assert!(StrategyParams::generalized(0.33, 0.1).validate().is_err());
        assert!(StrategyParams::generalized(0.8, 0.25).validate().is_ok());
    }
}
