//! Stage-game payoffs of the row player (Firm2).

use serde::{Deserialize, Serialize};

/// Firm2's payoff for each outcome of one stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    /// Both cooperate.
    pub a: f64,
    /// Both defect.
    pub b: f64,
    /// Firm2 cooperates, Firm1 defects.
    pub c: f64,
    /// Firm2 defects, Firm1 cooperates.
    pub d: f64,
}

impl PayoffMatrix {
    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        PayoffMatrix { a, b, c, d }
    }

    /// Homogeneous goods: undercutting captures the whole market.
    pub const fn perfect_substitutes() -> Self {
        PayoffMatrix::new(100.0, 0.0, -10.0, 150.0)
    }

    /// Differentiated goods.
    pub const fn imperfect_substitutes() -> Self {
        PayoffMatrix::new(150.0, 100.0, 50.0, 160.0)
    }

    /// `d > a > b >= c` and `2a > c + d > 2b`.
    pub fn is_prisoners_dilemma(&self) -> bool {
        let PayoffMatrix { a, b, c, d } = *self;
        d > a && a > b && b >= c && 2.0 * a > c + d && c + d > 2.0 * b
    }

    /// Utility over `(Firm1, Firm2)` with Firm1 in `moves` order and Firm2 in
    /// `[defect, cooperate]` order; a `stop` row pays nothing.
    pub fn utility_values(&self, with_stop: bool) -> Vec<f64> {
        let mut v = vec![self.b, self.c, self.d, self.a];
        if with_stop {
            v.extend([0.0, 0.0]);
        }
        v
    }

    /// Payoff of `firm2` against `firm1`, both `0 = defect`, `1 = cooperate`.
    pub fn payoff(&self, firm1: usize, firm2: usize) -> f64 {
        self.utility_values(false)[firm1 * 2 + firm2]
    }

    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        let f = |x: f64| scale * x + shift;
        PayoffMatrix::new(f(self.a), f(self.b), f(self.c), f(self.d))
    }
}
