//! The coalition game induced by a model, an instance and a background set.
//!
//! Players are the `p` feature columns plus, optionally, one joint location
//! player (`GEO`) owning both coordinate columns. A coalition's value is the
//! interventional expectation: members take the instance's values, everyone
//! else takes each background row's values in turn, and the model outputs are
//! averaged.

use std::fmt;

use nalgebra::DMatrix;

use crate::data::{BackgroundSet, DataSet};
use crate::error::{Error, Result};

/// Opaque batch predictor over `r x (p + 2)` input rows.
pub trait PredictionOracle: Send + Sync {
    /// Expected input width.
    fn n_columns(&self) -> usize;

    /// One prediction per row. Must be deterministic for a fixed oracle state.
    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>>;

    /// Whether `predict` may be called from several threads at once.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

impl<T: PredictionOracle + ?Sized> PredictionOracle for Box<T> {
    fn n_columns(&self) -> usize {
        (**self).n_columns()
    }
    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        (**self).predict(rows)
    }
    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}

impl<T: PredictionOracle + ?Sized> PredictionOracle for std::sync::Arc<T> {
    fn n_columns(&self) -> usize {
        (**self).n_columns()
    }
    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        (**self).predict(rows)
    }
    fn concurrency_safe(&self) -> bool {
        (**self).concurrency_safe()
    }
}

/// Something that can produce a fresh oracle from training data (used by
/// cross-validation and the bootstrap).
pub trait Trainer: Send + Sync {
    fn fit(&self, x: &DMatrix<f64>, y: &[f64]) -> Result<Box<dyn PredictionOracle>>;
}

/// Adapter turning a closure into an oracle. Handy for constructed games.
pub struct FnOracle<F> {
    n_columns: usize,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(n_columns: usize, f: F) -> Self {
        FnOracle { n_columns, f }
    }
}

impl<F> PredictionOracle for FnOracle<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn n_columns(&self) -> usize {
        self.n_columns
    }

    fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
        if rows.ncols() != self.n_columns {
            return Err(Error::ColumnMismatch {
                expected: self.n_columns,
                actual: rows.ncols(),
            });
        }
        let mut buf = vec![0.0; self.n_columns];
        Ok((0..rows.nrows())
            .map(|i| {
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = rows[(i, j)];
                }
                (self.f)(&buf)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    Feature(usize),
    Geo,
}

/// Maps player indices to model input columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlayerIndex {
    n_features: usize,
    include_geo: bool,
}

pub const MAX_PLAYERS: usize = 63;

impl PlayerIndex {
    pub fn new(n_features: usize, include_geo: bool) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Data("at least one feature is required".into()));
        }
        let players = PlayerIndex {
            n_features,
            include_geo,
        };
        if players.m() > MAX_PLAYERS {
            return Err(Error::Config(format!(
                "{} players exceed the supported maximum of {MAX_PLAYERS}",
                players.m()
            )));
        }
        Ok(players)
    }

    /// Player count: `p + 1` with the location player, `p` without.
    pub fn m(&self) -> usize {
        self.n_features + usize::from(self.include_geo)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn has_geo(&self) -> bool {
        self.include_geo
    }

    /// Index of the location player (always last).
    pub fn geo(&self) -> Option<usize> {
        self.include_geo.then_some(self.n_features)
    }

    pub fn player(&self, index: usize) -> Player {
        if index < self.n_features {
            Player::Feature(index)
        } else {
            debug_assert!(self.include_geo && index == self.n_features);
            Player::Geo
        }
    }

    /// Model input columns owned by a player.
    pub fn columns(&self, index: usize) -> Vec<usize> {
        match self.player(index) {
            Player::Feature(j) => vec![j],
            Player::Geo => vec![self.n_features, self.n_features + 1],
        }
    }

    /// Input width expected by the model.
    pub fn n_columns(&self) -> usize {
        self.n_features + 2
    }

    /// For every model column, whether the instance value is used under `coalition`.
    ///
    /// Coordinates that are not a player stay fixed at the instance.
    pub fn instance_mask(&self, coalition: Coalition) -> Vec<bool> {
        let mut mask = vec![false; self.n_columns()];
        for (j, slot) in mask.iter_mut().enumerate().take(self.n_features) {
            *slot = coalition.contains(j);
        }
        let coords_from_instance = match self.geo() {
            Some(g) => coalition.contains(g),
            None => true,
        };
        mask[self.n_features] = coords_from_instance;
        mask[self.n_features + 1] = coords_from_instance;
        mask
    }
}

/// Builds the player index for a dataset.
pub fn build_players(dataset: &DataSet, include_geo: bool) -> Result<PlayerIndex> {
    PlayerIndex::new(dataset.n_features(), include_geo)
}

/// Membership bitmask over at most 63 players.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(m: usize) -> Coalition {
        if m >= 64 {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << m) - 1)
        }
    }

    pub fn from_players(players: &[usize]) -> Coalition {
        Coalition(players.iter().fold(0u64, |acc, &j| acc | (1u64 << j)))
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn with(self, player: usize) -> Coalition {
        Coalition(self.0 | (1u64 << player))
    }

    pub fn without(self, player: usize) -> Coalition {
        Coalition(self.0 & !(1u64 << player))
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn complement(self, m: usize) -> Coalition {
        Coalition(!self.0 & Coalition::full(m).0)
    }

    pub fn members(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |j| bits >> j & 1 == 1)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

fn check_layout(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    background: &BackgroundSet,
    players: &PlayerIndex,
) -> Result<()> {
    let width = players.n_columns();
    for actual in [instance.len(), background.n_columns(), oracle.n_columns()] {
        if actual != width {
            return Err(Error::ColumnMismatch {
                expected: width,
                actual,
            });
        }
    }
    Ok(())
}

/// Mean of one block of predictions. Identical values return that value
/// exactly so the grand coalition reproduces `f(instance)` bit for bit.
fn block_mean(values: &[f64]) -> f64 {
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        first
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Interventional value of one coalition: `(1/k) sum_b f(z_b)`.
///
/// Issues exactly `k` model rows, in one batch.
pub fn coalition_value(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    coalition: Coalition,
    background: &BackgroundSet,
    players: &PlayerIndex,
) -> Result<f64> {
    Ok(coalition_values(oracle, instance, &[coalition], background, players)?[0])
}

/// Values of several coalitions for one instance, evaluated in a single batch
/// of `coalitions.len() * k` rows.
pub fn coalition_values(
    oracle: &dyn PredictionOracle,
    instance: &[f64],
    coalitions: &[Coalition],
    background: &BackgroundSet,
    players: &PlayerIndex,
) -> Result<Vec<f64>> {
    check_layout(oracle, instance, background, players)?;
    if coalitions.is_empty() {
        return Ok(Vec::new());
    }
    let k = background.len();
    let width = players.n_columns();
    let bg = background.rows();
    let masks: Vec<Vec<bool>> = coalitions.iter().map(|&c| players.instance_mask(c)).collect();
    let total = coalitions.len() * k;
    let batch = DMatrix::from_fn(total, width, |r, j| {
        let (c, b) = (r / k, r % k);
        if masks[c][j] {
            instance[j]
        } else {
            bg[(b, j)]
        }
    });
    let label = || {
        if coalitions.len() == 1 {
            format!("coalition {:?}, {k} background rows", coalitions[0])
        } else {
            format!("{} coalitions x {k} background rows", coalitions.len())
        }
    };
    let preds = oracle.predict(&batch).map_err(|e| Error::Oracle {
        batch: label(),
        message: e.to_string(),
    })?;
    if preds.len() != total {
        return Err(Error::PredictionLength {
            batch: label(),
            expected: total,
            actual: preds.len(),
        });
    }
    if let Some(row) = preds.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinitePrediction {
            batch: label(),
            row,
        });
    }
    Ok(preds.chunks(k).map(block_mean).collect())
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    fn bg(rows: &[&[f64]]) -> BackgroundSet {
        let c = rows[0].len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        BackgroundSet::from_rows(DMatrix::from_row_slice(rows.len(), c, &flat)).unwrap()
    }

    #[test]
    fn player_counts() {
        assert_eq!(PlayerIndex::new(7, true).unwrap().m(), 8);
        assert_eq!(PlayerIndex::new(7, true).unwrap().geo(), Some(7));
        assert_eq!(PlayerIndex::new(7, true).unwrap().columns(7), vec![7, 8]);
        let no_geo = PlayerIndex::new(3, false).unwrap();
        assert_eq!(no_geo.m(), 3);
        assert_eq!(no_geo.geo(), None);
        assert_eq!(PlayerIndex::new(1, true).unwrap().m(), 2);
    }

    #[test]
    fn every_column_is_owned_once() {
        let players = PlayerIndex::new(5, true).unwrap();
        let mut owned: Vec<usize> = (0..players.m()).flat_map(|j| players.columns(j)).collect();
        owned.sort_unstable();
        assert_eq!(owned, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn product_game_partial_coalition() {
        // f = x1 * x2 over columns (x1, x2, u, v)
        let f = FnOracle::new(4, |r: &[f64]| r[0] * r[1]);
        let players = PlayerIndex::new(2, true).unwrap();
        let background = bg(&[&[0.0, 0.0, 0.0, 0.0]]);
        let x = [1.0, 1.0, 0.0, 0.0];
        let v = coalition_value(&f, &x, Coalition::from_players(&[0]), &background, &players).unwrap();
        assert_eq!(v, 0.0);
        let full = coalition_value(&f, &x, Coalition::full(3), &background, &players).unwrap();
        assert_eq!(full, 1.0);
    }

    #[test]
    fn empty_coalition_ignores_instance() {
        let f = FnOracle::new(3, |r: &[f64]| 2.0 * r[0] + r[1] - r[2]);
        let players = PlayerIndex::new(1, true).unwrap();
        let background = bg(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let a = coalition_value(&f, &[9.0, 9.0, 9.0], Coalition::EMPTY, &background, &players).unwrap();
        let b = coalition_value(&f, &[-1.0, 0.5, 7.0], Coalition::EMPTY, &background, &players).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, (1.0 + 7.0) / 2.0);
    }

    struct Counting {
        rows: AtomicUsize,
        calls: AtomicUsize,
    }

    impl PredictionOracle for Counting {
        fn n_columns(&self) -> usize {
            3
        }
        fn predict(&self, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.rows.fetch_add(rows.nrows(), Ordering::SeqCst);
            Ok(vec![0.0; rows.nrows()])
        }
    }

    #[test]
    fn one_batch_of_k_rows_per_call() {
        let oracle = Counting {
            rows: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        };
        let players = PlayerIndex::new(1, true).unwrap();
        let background = bg(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], &[7.0, 8.0, 9.0]]);
        coalition_value(&oracle, &[0.0; 3], Coalition(1), &background, &players).unwrap();
        assert_eq!(oracle.calls.load(Ordering::SeqCst), 1);
        assert_eq!(oracle.rows.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn geo_moves_both_coordinates() {
        // reads only the second coordinate
        let f = FnOracle::new(3, |r: &[f64]| r[2]);
        let players = PlayerIndex::new(1, true).unwrap();
        let background = bg(&[&[0.0, 0.0, 0.0]]);
        let x = [5.0, 1.0, 2.0];
        let without = coalition_value(&f, &x, Coalition::from_players(&[0]), &background, &players).unwrap();
        let with = coalition_value(&f, &x, Coalition::from_players(&[0, 1]), &background, &players).unwrap();
        assert_eq!(without, 0.0);
        assert_eq!(with, 2.0);
        // toggling the feature player alone never moves it
        let geo_only = coalition_value(&f, &x, Coalition::from_players(&[1]), &background, &players).unwrap();
        assert_eq!(geo_only, with);
    }

    #[test]
    fn non_finite_prediction_is_an_error() {
        let f = FnOracle::new(3, |r: &[f64]| if r[0] > 0.5 { f64::NAN } else { 0.0 });
        let players = PlayerIndex::new(1, true).unwrap();
        let background = bg(&[&[0.0, 0.0, 0.0]]);
        let err = coalition_value(&f, &[1.0, 0.0, 0.0], Coalition::full(2), &background, &players).unwrap_err();
        assert!(matches!(err, Error::NonFinitePrediction { .. }));
    }

    #[test]
    fn layout_mismatch_rejected() {
        let f = FnOracle::new(4, |_: &[f64]| 0.0);
        let players = PlayerIndex::new(1, true).unwrap();
        let background = bg(&[&[0.0, 0.0, 0.0]]);
        assert!(matches!(
            coalition_value(&f, &[0.0; 3], Coalition::EMPTY, &background, &players),
            Err(Error::ColumnMismatch { .. })
        ));
    }
}
