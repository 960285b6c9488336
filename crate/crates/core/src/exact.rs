//! Brute-force reference semantics.
//!
//! Every coalition value is tabulated once, then Shapley values and
//! GEO-by-feature Shapley interaction indices are accumulated directly from
//! their defining weighted sums. Nothing here goes through a least-squares
//! solve, so these results serve as the ground truth for [`crate::kernel`].

use crate::data::BackgroundSet;
use crate::error::{Error, Result};
use crate::explanation::{Additive, Attribution};
use crate::game::{coalition_value, Coalition, PlayerIndex, PredictionOracle};

/// Player limit for exhaustive Shapley values.
pub const DEFAULT_MAX_PLAYERS: usize = 20;
/// Player limit for exhaustive GeoShapley.
pub const GEOSHAPLEY_MAX_PLAYERS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactAttribution {
    pub phi: Vec<f64>,
    pub phi0: f64,
}

impl Additive for ExactAttribution {
    fn total(&self) -> f64 {
        self.phi0 + self.phi.iter().sum::<f64>()
    }
}

/// All `2^m` coalition values of one game, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct GameTable {
    m: usize,
    values: Vec<f64>,
}

impl GameTable {
    /// Tabulates an arbitrary set function.
    pub fn from_fn(m: usize, f: impl Fn(Coalition) -> f64) -> Result<Self> {
        check_limit(m, DEFAULT_MAX_PLAYERS)?;
        Ok(GameTable {
            m,
            values: (0..1u64 << m).map(|bits| f(Coalition(bits))).collect(),
        })
    }

    /// Tabulates the interventional game of a model, one `coalition_value`
    /// call per coalition.
    pub fn from_model(
        oracle: &dyn PredictionOracle,
        instance: &[f64],
        background: &BackgroundSet,
        players: &PlayerIndex,
        max_players: usize,
    ) -> Result<Self> {
        let m = players.m();
        check_limit(m, max_players)?;
        let values = (0..1u64 << m)
            .map(|bits| coalition_value(oracle, instance, Coalition(bits), background, players))
            .collect::<Result<Vec<_>>>()?;
        Ok(GameTable { m, values })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn value(&self, c: Coalition) -> f64 {
        self.values[c.0 as usize]
    }

    /// Shapley values by the subset-weighted sum over all coalitions.
    pub fn shapley(&self) -> ExactAttribution {
        let m = self.m;
        // weight of a coalition of size s not containing j: s!(m-s-1)!/m! = 1/(m C(m-1, s))
        let weights: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
        let mut phi = vec![0.0; m];
        for bits in 0..1u64 << m {
            let s = Coalition(bits);
            let size = s.size();
            for (j, phi_j) in phi.iter_mut().enumerate() {
                if !s.contains(j) {
                    *phi_j += weights[size] * (self.value(s.with(j)) - self.value(s));
                }
            }
        }
        ExactAttribution {
            phi,
            phi0: self.value(Coalition::EMPTY),
        }
    }

    /// Shapley interaction index of the pair `(a, b)`:
    /// `sum_{S ⊆ M\{a,b}} s!(m-s-2)!/(m-1)! [v(S+a+b) - v(S+a) - v(S+b) + v(S)]`.
    pub fn interaction(&self, a: usize, b: usize) -> f64 {
        let m = self.m;
        assert!(a != b && a < m && b < m);
        let weights: Vec<f64> = (0..m - 1)
            .map(|s| 1.0 / ((m - 1) as f64 * binomial(m - 2, s)))
            .collect();
        let mut acc = 0.0;
        for bits in 0..1u64 << m {
            let s = Coalition(bits);
            if s.contains(a) || s.contains(b) {
                continue;
            }
            let delta = self.value(s.with(a).with(b)) - self.value(s.with(a)) - self.value(s.with(b))
                + self.value(s);
            acc += weights[s.size()] * delta;
        }
        acc
    }

    /// GeoShapley split of the game with `geo` as the location player.
    ///
    /// `phi_geo_x[j]` is the GEO-feature interaction index; half of it is
    /// taken out of each of the two players' Shapley values.
    pub fn geoshapley(&self, geo: usize) -> Attribution {
        let shapley = self.shapley();
        let features: Vec<usize> = (0..self.m).filter(|&j| j != geo).collect();
        let phi_geo_x: Vec<f64> = features.iter().map(|&j| self.interaction(geo, j)).collect();
        let phi = features
            .iter()
            .zip(&phi_geo_x)
            .map(|(&j, inter)| shapley.phi[j] - 0.5 * inter)
            .collect();
        Attribution {
            phi0: shapley.phi0,
            phi_geo: shapley.phi[geo] - 0.5 * phi_geo_x.iter().sum::<f64>(),
            phi,
            phi_geo_x,
        }
    }
}

fn check_limit(m: usize, limit: usize) -> Result<()> {
    if m > limit {
        return Err(Error::TooManyPlayers {
            players: m,
            limit,
            required: 1u128 << m.min(127),
        });
    }
    Ok(())
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Exact Shapley values of every player, `phi0 = v(∅)`.
pub fn shapley_exact(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    background: &BackgroundSet,
    players: &PlayerIndex,
) -> Result<ExactAttribution> {
    shapley_exact_with_limit(oracle, instance, background, players, DEFAULT_MAX_PLAYERS)
}

pub fn shapley_exact_with_limit(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    background: &BackgroundSet,
    players: &PlayerIndex,
    max_players: usize,
) -> Result<ExactAttribution> {
    Ok(GameTable::from_model(oracle, instance, background, players, max_players)?.shapley())
}

/// Exhaustive GeoShapley for one instance.
pub fn geoshapley_enumerated(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    background: &BackgroundSet,
    players: &PlayerIndex,
) -> Result<Attribution> {
    let geo = players
        .geo()
        .ok_or_else(|| Error::Config("GeoShapley needs the location player".into()))?;
    let table = GameTable::from_model(oracle, instance, background, players, GEOSHAPLEY_MAX_PLAYERS)?;
    Ok(table.geoshapley(geo))
}

/// `|base + sum(components) - prediction| <= tol`.
pub fn verify_efficiency(attribution: &impl Additive, prediction: f64, tol: f64) -> bool {
    (attribution.total() - prediction).abs() <= tol
}
