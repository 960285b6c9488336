//! Kernel (weighted least squares) estimation of GeoShapley values.
//!
//! Two constrained regressions share one coalition design:
//!
//! 1. Shapley values of all `m` players: the coalition values are regressed
//!    on player membership with Shapley-kernel weights, with `v(∅)` and
//!    `v(M)` imposed as hard constraints.
//! 2. GEO-feature interactions: for every sampled feature subset `T` both
//!    `T` and `T ∪ {GEO}` are in the design, so the location player's
//!    marginal game `w(T) = v(T ∪ {GEO}) - v(T)` is observed. Its Shapley
//!    values over the `p` features are the GEO-feature Shapley interaction
//!    indices and are estimated with the same kind of regression.
//!
//! Half of each interaction is then moved out of the feature's and the
//! location player's Shapley values, which leaves the components summing to
//! the prediction whatever the estimation error of step 2. At full
//! enumeration both regressions are exact, and a model that never reads the
//! coordinates gets `phi_geo = phi_geo_x = 0`.

use std::collections::{BTreeSet, HashMap, HashSet};

use nalgebra::DMatrix;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{BackgroundSet, DataSet};
use crate::error::{Error, Result};
use crate::exact::binomial;
use crate::explanation::{Attribution, ExplanationRow, ExplanationSet};
use crate::game::{build_players, coalition_values, Coalition, PlayerIndex, PredictionOracle};
use crate::linalg::{sum_constrained_wls, SolverPath};

/// Shapley kernel `(m-1) / (C(m,s) s (m-s))` for `0 < s < m`.
pub fn shapley_kernel_weight(s: usize, m: usize) -> Result<f64> {
    if s == 0 || s >= m {
        return Err(Error::Design(format!(
            "coalition size {s} of {m} is an endpoint; endpoints are constraints, not weighted rows"
        )));
    }
    Ok((m - 1) as f64 / (binomial(m, s) * s as f64 * (m - s) as f64))
}

/// Fixed part of the default budget.
const DEFAULT_BUDGET_BASE: usize = 2048;

/// `min(2^m, 2048 + 2m)`: full enumeration up to `m = 11`.
pub fn default_budget(m: usize) -> usize {
    let cap = DEFAULT_BUDGET_BASE + 2 * m;
    if m >= 63 {
        cap
    } else {
        ((1u64 << m) as usize).min(cap)
    }
}

/// Smallest budget accepted for `m` players.
pub fn minimum_budget(m: usize) -> usize {
    let full = if m >= 63 { usize::MAX } else { 1usize << m };
    full.min(2 * m + 2)
}

#[derive(Debug, Clone, Copy)]
struct WeightedRow {
    row: usize,
    weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct PairRow {
    /// design row of `T`
    without_geo: usize,
    /// design row of `T ∪ {GEO}`
    with_geo: usize,
    weight: f64,
}

/// Coalition design shared by every explained row.
///
/// `z` holds one row per coalition: an intercept column, `m` membership
/// columns and, with a location player, `p` columns `z_GEO * z_j`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    players: PlayerIndex,
    coalitions: Vec<Coalition>,
    z: DMatrix<f64>,
    empty: usize,
    full: usize,
    shapley_rows: Vec<WeightedRow>,
    interaction_rows: Vec<PairRow>,
    /// `(T = ∅, T = all features)` pairs, present with a location player.
    interaction_ends: Option<(PairRow, PairRow)>,
}

impl DesignMatrix {
    /// Validates a coalition list and derives the regression weights.
    ///
    /// Coalitions must be unique and include `∅` and the grand coalition;
    /// with a location player the list must be closed under adding or
    /// removing it. Each size stratum is weighted by its Shapley-kernel mass
    /// divided evenly over the coalitions drawn from it.
    pub fn from_coalitions(players: PlayerIndex, coalitions: Vec<Coalition>) -> Result<Self> {
        let m = players.m();
        let full_set = Coalition::full(m);
        let mut index = HashMap::with_capacity(coalitions.len());
        for (i, c) in coalitions.iter().enumerate() {
            if c.0 & !full_set.0 != 0 {
                return Err(Error::Design(format!("coalition {c:?} names a player beyond {m}")));
            }
            if index.insert(*c, i).is_some() {
                return Err(Error::Design(format!("coalition {c:?} appears more than once")));
            }
        }
        let empty = *index
            .get(&Coalition::EMPTY)
            .ok_or_else(|| Error::Design("empty coalition missing".into()))?;
        let full = *index
            .get(&full_set)
            .ok_or_else(|| Error::Design("grand coalition missing".into()))?;

        let p = players.n_features();
        let geo = players.geo();

        // stratum = (size, holds the location player)
        let stratum = |c: Coalition| -> (usize, bool) {
            (c.size(), geo.map(|g| c.contains(g)).unwrap_or(false))
        };
        let population = |(s, has_geo): (usize, bool)| -> f64 {
            match geo {
                None => binomial(m, s),
                Some(_) if has_geo => binomial(p, s - 1),
                Some(_) => binomial(p, s),
            }
        };
        let mut drawn: HashMap<(usize, bool), usize> = HashMap::new();
        for &c in &coalitions {
            *drawn.entry(stratum(c)).or_default() += 1;
        }
        let mut shapley_rows = Vec::new();
        for (i, &c) in coalitions.iter().enumerate() {
            let s = c.size();
            if s == 0 || s == m {
                continue;
            }
            let key = stratum(c);
            let weight = shapley_kernel_weight(s, m)? * population(key) / drawn[&key] as f64;
            shapley_rows.push(WeightedRow { row: i, weight });
        }

        let mut interaction_rows = Vec::new();
        let mut interaction_ends = None;
        if let Some(g) = geo {
            let mut per_size: HashMap<usize, usize> = HashMap::new();
            let mut pairs = Vec::new();
            for (i, &c) in coalitions.iter().enumerate() {
                if c.contains(g) {
                    continue;
                }
                let partner = index.get(&c.with(g)).copied().ok_or_else(|| {
                    Error::Design(format!("coalition {c:?} lacks its partner with the location player"))
                })?;
                *per_size.entry(c.size()).or_default() += 1;
                pairs.push((c, i, partner));
            }
            if pairs.len() * 2 != coalitions.len() {
                return Err(Error::Design(
                    "some coalitions with the location player lack their partner without it".into(),
                ));
            }
            let mut lo = None;
            let mut hi = None;
            for (c, without_geo, with_geo) in pairs {
                let t = c.size();
                let mut row = PairRow {
                    without_geo,
                    with_geo,
                    weight: 0.0,
                };
                if t == 0 {
                    lo = Some(row);
                } else if t == p {
                    hi = Some(row);
                } else {
                    row.weight = shapley_kernel_weight(t, p)? * binomial(p, t) / per_size[&t] as f64;
                    interaction_rows.push(row);
                }
            }
            interaction_ends = Some((
                lo.ok_or_else(|| Error::Design("location-only coalition missing".into()))?,
                hi.ok_or_else(|| Error::Design("all-features coalition missing".into()))?,
            ));
        }

        let width = 1 + m + if geo.is_some() { p } else { 0 };
        let z = DMatrix::from_fn(coalitions.len(), width, |r, col| {
            let c = coalitions[r];
            let bit = |j: usize| f64::from(u8::from(c.contains(j)));
            match col {
                0 => 1.0,
                col if col <= m => bit(col - 1),
                col => {
                    let j = col - 1 - m;
                    bit(j) * geo.map(bit).unwrap_or(0.0)
                }
            }
        });

        Ok(DesignMatrix {
            players,
            coalitions,
            z,
            empty,
            full,
            shapley_rows,
            interaction_rows,
            interaction_ends,
        })
    }

    pub fn players(&self) -> &PlayerIndex {
        &self.players
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    /// `q x (1 + m + p)` indicator matrix (no interaction columns without a
    /// location player).
    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Whether every coalition of the `m` players is present.
    pub fn is_full_enumeration(&self) -> bool {
        let m = self.players.m();
        m < 63 && self.coalitions.len() == 1usize << m
    }
}

/// Chooses the coalitions to evaluate.
///
/// With `2^m <= budget` every coalition is used. Otherwise subsets are drawn
/// in complement pairs: whole size strata from the extremes inward (all
/// singletons and all co-singletons first) while they fit, then seeded
/// random pairs from the remaining strata in proportion to their kernel
/// mass. With a location player the subsets are drawn over the features and
/// each one enters both with and without the location player.
pub fn build_design(players: &PlayerIndex, budget: usize, seed: u64) -> Result<DesignMatrix> {
    let m = players.m();
    let minimum = minimum_budget(m);
    if budget < minimum {
        return Err(Error::BudgetTooSmall { budget, minimum });
    }
    let geo = players.geo();
    let units_over = if geo.is_some() { players.n_features() } else { m };
    let unit_budget = if geo.is_some() { budget / 2 } else { budget };
    let enumerate = m < 63 && (1u128 << m) <= budget as u128;

    let units: Vec<u64> = if enumerate {
        (0..1u64 << units_over).collect()
    } else {
        sample_units(units_over, unit_budget, seed)
    };
    let mut units = units;
    units.sort_by_key(|&u| (u.count_ones(), u));

    let coalitions: Vec<Coalition> = match geo {
        None => units.into_iter().map(Coalition).collect(),
        Some(g) => units
            .into_iter()
            .flat_map(|u| [Coalition(u), Coalition(u).with(g)])
            .collect(),
    };
    DesignMatrix::from_coalitions(*players, coalitions)
}

fn sample_units(n: usize, budget: usize, seed: u64) -> Vec<u64> {
    let full = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut chosen: BTreeSet<u64> = BTreeSet::new();
    chosen.insert(0);
    chosen.insert(full);
    let mut remaining = budget.saturating_sub(2);

    let mut k = 1;
    while k <= n / 2 {
        let stratum = if 2 * k == n {
            binomial(n, k)
        } else {
            2.0 * binomial(n, k)
        };
        if stratum > remaining as f64 {
            break;
        }
        for s in k_subsets(n, k) {
            chosen.insert(s);
            chosen.insert(!s & full);
        }
        remaining -= stratum as usize;
        k += 1;
    }
    if k > n / 2 || remaining < 2 {
        return chosen.into_iter().collect();
    }

    let sizes: Vec<usize> = (k..=n / 2).collect();
    let mass: Vec<f64> = sizes
        .iter()
        .map(|&s| {
            let w = shapley_kernel_weight(s, n).unwrap_or(0.0) * binomial(n, s);
            if 2 * s == n {
                w
            } else {
                2.0 * w
            }
        })
        .collect();
    let pick = WeightedIndex::new(&mass).expect("positive kernel mass");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0usize;
    let max_attempts = 64 * budget + 1024;
    while remaining >= 2 && attempts < max_attempts {
        attempts += 1;
        let s = sizes[pick.sample(&mut rng)];
        let subset = rand::seq::index::sample(&mut rng, n, s)
            .into_iter()
            .fold(0u64, |acc, j| acc | (1u64 << j));
        if chosen.insert(subset) {
            chosen.insert(!subset & full);
            remaining -= 2;
        }
    }
    chosen.into_iter().collect()
}

/// All `k`-subsets of `n < 63` items as bitmasks, `k >= 1` (Gosper's hack).
fn k_subsets(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = 1u64 << n;
    let mut cur = (1u64 << k) - 1;
    std::iter::from_fn(move || {
        if cur >= limit {
            return None;
        }
        let out = cur;
        let c = cur & cur.wrapping_neg();
        let r = cur + c;
        cur = (((r ^ cur) >> 2) / c) | r;
        Some(out)
    })
}

/// Solves both constrained regressions for one row of coalition values
/// (aligned with [`DesignMatrix::coalitions`]).
pub fn solve_attributions(
    design: &DesignMatrix,
    values: &[f64],
    solver: SolverPath,
) -> Result<Attribution> {
    if values.len() != design.len() {
        return Err(Error::Design(format!(
            "{} coalition values for a design of {} rows",
            values.len(),
            design.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "value of coalition {:?}",
            design.coalitions[i]
        )));
    }
    let players = design.players;
    let m = players.m();
    let v_empty = values[design.empty];
    let v_full = values[design.full];

    let membership = |rows: &mut dyn Iterator<Item = usize>, cols: usize| -> DMatrix<f64> {
        let rows: Vec<usize> = rows.collect();
        DMatrix::from_fn(rows.len(), cols, |r, j| design.z[(rows[r], 1 + j)])
    };

    let a = membership(&mut design.shapley_rows.iter().map(|r| r.row), m);
    let y: Vec<f64> = design.shapley_rows.iter().map(|r| values[r.row] - v_empty).collect();
    let w: Vec<f64> = design.shapley_rows.iter().map(|r| r.weight).collect();
    let shapley = sum_constrained_wls(&a, &y, &w, v_full - v_empty, solver)
        .map_err(|e| rank_context(e, "player effects"))?;

    let Some((lo, hi)) = design.interaction_ends else {
        return Ok(Attribution {
            phi0: v_empty,
            phi_geo: 0.0,
            phi: shapley.iter().copied().collect(),
            phi_geo_x: vec![0.0; m],
        });
    };

    let p = players.n_features();
    let marginal = |pair: &PairRow| values[pair.with_geo] - values[pair.without_geo];
    let w_empty = marginal(&lo);
    let w_full = marginal(&hi);
    let a = membership(&mut design.interaction_rows.iter().map(|r| r.without_geo), p);
    let y: Vec<f64> = design
        .interaction_rows
        .iter()
        .map(|r| marginal(r) - w_empty)
        .collect();
    let w: Vec<f64> = design.interaction_rows.iter().map(|r| r.weight).collect();
    let interactions = sum_constrained_wls(&a, &y, &w, w_full - w_empty, solver)
        .map_err(|e| rank_context(e, "location interactions"))?;

    let phi_geo_x: Vec<f64> = interactions.iter().copied().collect();
    let phi = (0..p).map(|j| shapley[j] - 0.5 * phi_geo_x[j]).collect();
    Ok(Attribution {
        phi0: v_empty,
        phi_geo: shapley[p] - 0.5 * phi_geo_x.iter().sum::<f64>(),
        phi,
        phi_geo_x,
    })
}

fn rank_context(e: Error, stage: &str) -> Error {
    match e {
        Error::RankDeficient(msg) => {
            Error::RankDeficient(format!("{stage}: {msg}; increase the coalition budget"))
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExplainConfig {
    /// Design rows; `None` uses [`default_budget`].
    pub budget: Option<usize>,
    pub seed: u64,
    pub include_geo: bool,
    pub solver: SolverPath,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            budget: None,
            seed: 0,
            include_geo: true,
            solver: SolverPath::Qr,
        }
    }
}

/// Explains every row of `dataset`.
///
/// One design is built and shared; each row then costs one oracle batch of
/// `design.len() * background.len()` model rows and two small solves. Rows
/// run in parallel when the oracle allows it.
pub fn explain(
    dataset: &DataSet,
    oracle: &dyn PredictionOracle,
    background: &BackgroundSet,
    config: &ExplainConfig,
) -> Result<ExplanationSet> {
    let players = build_players(dataset, config.include_geo)?;
    let budget = config.budget.unwrap_or_else(|| default_budget(players.m()));
    let design = build_design(&players, budget, config.seed)?;
    explain_with_design(dataset, oracle, background, &design, config.solver)
}

pub fn explain_with_design(
    dataset: &DataSet,
    oracle: &dyn PredictionOracle,
    background: &BackgroundSet,
    design: &DesignMatrix,
    solver: SolverPath,
) -> Result<ExplanationSet> {
    let players = *design.players();
    if players.n_features() != dataset.n_features() {
        return Err(Error::ColumnMismatch {
            expected: players.n_columns(),
            actual: dataset.n_columns(),
        });
    }
    let one = |i: usize| -> Result<ExplanationRow> {
        let instance = dataset.model_row(i);
        let values = coalition_values(oracle, &instance, design.coalitions(), background, &players)?;
        let attribution = solve_attributions(design, &values, solver)?;
        Ok(ExplanationRow {
            row_id: dataset.row_ids()[i].clone(),
            coords: dataset.coords()[i],
            x: instance[..players.n_features()].to_vec(),
            prediction: values[design.full],
            attribution,
        })
    };
    let results: Vec<Result<ExplanationRow>> = if oracle.concurrency_safe() {
        (0..dataset.n_rows()).into_par_iter().map(one).collect()
    } else {
        (0..dataset.n_rows()).map(one).collect()
    };

    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push((dataset.row_ids()[i].clone(), e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Rows(failures));
    }
    Ok(ExplanationSet {
        feature_names: dataset.feature_names().to_vec(),
        include_geo: players.has_geo(),
        rows,
    })
}

/// Distinct-coalition check used by tests and callers assembling designs by hand.
pub fn unique_coalitions(coalitions: &[Coalition]) -> bool {
    let mut seen = HashSet::with_capacity(coalitions.len());
    coalitions.iter().all(|c| seen.insert(*c))
}
