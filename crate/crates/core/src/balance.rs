//! Dynamic Weight Average (DWA) balancing of per-class detection heads.
//!
//! Each head `c` gets a weight
//!
//! ```text
//! alpha_c(t) = |C| * exp(w_c(t-1) / T) / sum_k exp(w_k(t-1) / T)
//! w_c(t-1)   = L_c(t-1) / L_c(t-2)
//! ```
//!
//! where `L_c(t)` is the head's loss averaged over window `t` and `T` is a
//! temperature. Heads whose loss falls more slowly get larger weights. The
//! weights feed the detector loss
//! `(1 / N_pos) * sum_c alpha_c * (b_loc L_loc + b_cls L_cls + b_dir L_dir)`.

use std::collections::BTreeMap;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::ClassCatalog;
use crate::error::{Error, Position, Result};
use crate::scalar::Real;
use crate::types::ClassId;

/// Prior-window losses below this are treated as converged (`w_c = 1`).
pub const MIN_PRIOR_LOSS: f64 = 1e-12;
pub const DEFAULT_TEMPERATURE: f64 = 2.0;
pub const DEFAULT_WINDOW: usize = 50;

/// Component losses of one detection head at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadLoss<T = f64> {
    pub loc: T,
    pub cls: T,
    pub dir: T,
}

impl<T: Real> HeadLoss<T> {
    pub fn new(loc: T, cls: T, dir: T) -> Self {
        Self { loc, cls, dir }
    }

    pub fn weighted(&self, beta: &LossWeights<T>) -> T {
        beta.loc * self.loc + beta.cls * self.cls + beta.dir * self.dir
    }

    fn is_valid(&self) -> bool {
        [self.loc, self.cls, self.dir]
            .iter()
            .all(|v| v.is_finite() && *v >= T::zero())
    }

    fn scaled(&self, k: T) -> Self {
        Self::new(self.loc * k, self.cls * k, self.dir * k)
    }
}

/// Component weights `(beta_loc, beta_cls, beta_dir)`; defaults to `(2, 1, 0.2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights<T = f64> {
    pub loc: T,
    pub cls: T,
    pub dir: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self {
            loc: T::lit(2.0),
            cls: T::one(),
            dir: T::lit(0.2),
        }
    }
}

/// Per-head losses and positive-anchor count at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSnapshot<T = f64> {
    pub heads: BTreeMap<ClassId, HeadLoss<T>>,
    pub n_pos: u64,
}

impl<T: Real> LossSnapshot<T> {
    pub fn new(heads: BTreeMap<ClassId, HeadLoss<T>>, n_pos: u64) -> Result<Self> {
        let s = Self { heads, n_pos };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((id, _)) = self.heads.iter().find(|(_, h)| !h.is_valid()) {
            return Err(Error::Validation(format!(
                "head {id} has a negative or non-finite loss"
            )));
        }
        if self.n_pos == 0 {
            return Err(Error::Validation("N_pos must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaConfig<T = f64> {
    pub temperature: T,
    /// Iterations averaged into one window loss.
    pub window: usize,
}

impl<T: Real> Default for DwaConfig<T> {
    fn default() -> Self {
        Self {
            temperature: T::lit(DEFAULT_TEMPERATURE),
            window: DEFAULT_WINDOW,
        }
    }
}

impl<T: Real> DwaConfig<T> {
    pub fn new(temperature: T, window: usize) -> Result<Self> {
        let c = Self { temperature, window };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > T::zero()) || !self.temperature.is_finite() {
            return Err(Error::Validation(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.window == 0 {
            return Err(Error::Validation("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// Balancing weights in effect during window `timestep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<T = f64> {
    pub timestep: usize,
    pub alpha: BTreeMap<ClassId, T>,
}

impl<T: Real> WeightVector<T> {
    pub fn ones(timestep: usize, heads: impl IntoIterator<Item = ClassId>) -> Self {
        Self {
            timestep,
            alpha: heads.into_iter().map(|c| (c, T::one())).collect(),
        }
    }

    pub fn get(&self, head: ClassId) -> Option<T> {
        self.alpha.get(&head).copied()
    }

    pub fn sum(&self) -> T {
        self.alpha.values().copied().sum()
    }
}

/// Weight vectors with strictly increasing timesteps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightTrajectory<T = f64> {
    entries: Vec<WeightVector<T>>,
}

impl<T: Real> WeightTrajectory<T> {
    pub fn push(&mut self, v: WeightVector<T>) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if v.timestep <= last.timestep {
                return Err(Error::Usage(format!(
                    "trajectory timesteps must increase ({} after {})",
                    v.timestep, last.timestep
                )));
            }
        }
        self.entries.push(v);
        Ok(())
    }

    pub fn entries(&self) -> &[WeightVector<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&WeightVector<T>> {
        self.entries.last()
    }

    /// `timestep,class_name,alpha` rows.
    pub fn to_csv(&self, catalog: &ClassCatalog) -> Result<String> {
        let mut out = String::from("timestep,class_name,alpha\n");
        for v in &self.entries {
            for (id, a) in &v.alpha {
                out.push_str(&format!("{},{},{:?}\n", v.timestep, catalog.name(*id)?, a));
            }
        }
        Ok(out)
    }
}

/// Mean of one head's weighted loss over a window of snapshots.
pub fn window_average<T: Real>(snapshots: &[LossSnapshot<T>], head: ClassId, beta: &LossWeights<T>) -> Result<T> {
    if snapshots.is_empty() {
        return Err(Error::Usage("cannot average an empty window".into()));
    }
    let mut sum = T::zero();
    for s in snapshots {
        let h = s
            .heads
            .get(&head)
            .ok_or_else(|| Error::Usage(format!("snapshot lacks head {head}")))?;
        sum = sum + h.weighted(beta);
    }
    Ok(sum / T::lit(snapshots.len() as f64))
}

/// `|C| * softmax(rates / T)`.
pub fn dwa_weights<T: Real>(rates: &[T], temperature: T) -> Vec<T> {
    if rates.is_empty() {
        return Vec::new();
    }
    let scaled: Vec<T> = rates.iter().map(|w| *w / temperature).collect();
    let max = scaled.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = scaled.iter().map(|s| (*s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let n = T::lit(rates.len() as f64);
    exps.into_iter().map(|e| n * e / total).collect()
}

/// Relative descending rates `L(t-1) / L(t-2)`, clamped to 1 for converged heads.
pub fn descent_rates<T: Real>(
    prev: &BTreeMap<ClassId, T>,
    prev2: &BTreeMap<ClassId, T>,
) -> Result<BTreeMap<ClassId, T>> {
    prev.iter()
        .map(|(id, l1)| {
            let l2 = *prev2
                .get(id)
                .ok_or_else(|| Error::Usage(format!("head {id} missing from earlier window")))?;
            let w = if l2 < T::lit(MIN_PRIOR_LOSS) {
                warn!("head {id}: prior window loss {l2} is ~0; using neutral descent rate");
                T::one()
            } else {
                *l1 / l2
            };
            Ok((*id, w))
        })
        .collect()
}

/// Weights for window `timestep` given per-window average losses
/// (`history[i]` is window `i`). Windows 0 and 1 get all-ones.
pub fn dwa_step<T: Real>(
    timestep: usize,
    history: &[BTreeMap<ClassId, T>],
    heads: &[ClassId],
    config: &DwaConfig<T>,
) -> Result<WeightVector<T>> {
    config.validate()?;
    if timestep < 2 {
        return Ok(WeightVector::ones(timestep, heads.iter().copied()));
    }
    if history.len() < timestep {
        return Err(Error::Usage(format!(
            "weights for window {timestep} need {timestep} completed windows, have {}",
            history.len()
        )));
    }
    let rates = descent_rates(&history[timestep - 1], &history[timestep - 2])?;
    let ordered: Vec<T> = heads
        .iter()
        .map(|h| {
            rates
                .get(h)
                .copied()
                .ok_or_else(|| Error::Usage(format!("no loss history for head {h}")))
        })
        .collect::<Result<_>>()?;
    let alpha = dwa_weights(&ordered, config.temperature);
    Ok(WeightVector {
        timestep,
        alpha: heads.iter().copied().zip(alpha).collect(),
    })
}

/// Weighted detector loss for one snapshot.
pub fn total_loss<T: Real>(snapshot: &LossSnapshot<T>, alpha: &WeightVector<T>, beta: &LossWeights<T>) -> Result<T> {
    if snapshot.n_pos == 0 {
        return Err(Error::Usage("N_pos must be at least 1".into()));
    }
    let mut sum = T::zero();
    for (id, h) in &snapshot.heads {
        let a = alpha
            .get(*id)
            .ok_or_else(|| Error::Usage(format!("no balancing weight for head {id}")))?;
        sum = sum + a * h.weighted(beta);
    }
    Ok(sum / T::lit(snapshot.n_pos as f64))
}

/// Sequential DWA state machine: feed snapshots in order, read the weights
/// for the current window.
#[derive(Debug, Clone)]
pub struct DwaScheduler<T: Real = f64> {
    config: DwaConfig<T>,
    beta: LossWeights<T>,
    heads: Vec<ClassId>,
    window: Vec<LossSnapshot<T>>,
    history: Vec<BTreeMap<ClassId, T>>,
    current: WeightVector<T>,
}

impl<T: Real> DwaScheduler<T> {
    pub fn new(heads: impl IntoIterator<Item = ClassId>, config: DwaConfig<T>, beta: LossWeights<T>) -> Result<Self> {
        config.validate()?;
        let mut heads: Vec<ClassId> = heads.into_iter().collect();
        heads.sort();
        heads.dedup();
        if heads.is_empty() {
            return Err(Error::Usage("scheduler needs at least one head".into()));
        }
        Ok(Self {
            current: WeightVector::ones(0, heads.iter().copied()),
            config,
            beta,
            heads,
            window: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn heads(&self) -> &[ClassId] {
        &self.heads
    }

    /// Weights for the window currently being filled.
    pub fn current(&self) -> &WeightVector<T> {
        &self.current
    }

    /// Completed window averages, oldest first.
    pub fn history(&self) -> &[BTreeMap<ClassId, T>] {
        &self.history
    }

    /// Records one iteration. Returns the new weights when it completes a window.
    pub fn observe(&mut self, snapshot: LossSnapshot<T>) -> Result<Option<WeightVector<T>>> {
        snapshot.validate()?;
        if snapshot.heads.len() != self.heads.len() || !self.heads.iter().all(|h| snapshot.heads.contains_key(h)) {
            return Err(Error::Usage("snapshot heads do not match the scheduler heads".into()));
        }
        self.window.push(snapshot);
        if self.window.len() < self.config.window {
            return Ok(None);
        }
        let averages = self
            .heads
            .iter()
            .map(|h| Ok((*h, window_average(&self.window, *h, &self.beta)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        self.window.clear();
        self.history.push(averages);
        let next = dwa_step(self.history.len(), &self.history, &self.heads, &self.config)?;
        self.current = next.clone();
        Ok(Some(next))
    }
}

/// Runs a scheduler over a loss stream. The trajectory starts with the
/// initial all-ones weights and gains one entry per completed window.
pub fn run_trajectory<T, I>(
    stream: I,
    heads: impl IntoIterator<Item = ClassId>,
    config: DwaConfig<T>,
    beta: LossWeights<T>,
) -> Result<WeightTrajectory<T>>
where
    T: Real,
    I: IntoIterator<Item = LossSnapshot<T>>,
{
    let mut scheduler = DwaScheduler::new(heads, config, beta)?;
    let mut trajectory = WeightTrajectory::default();
    trajectory.push(scheduler.current().clone())?;
    for snapshot in stream {
        if let Some(v) = scheduler.observe(snapshot)? {
            trajectory.push(v)?;
        }
    }
    Ok(trajectory)
}

/// One head of a synthetic loss curve: `initial * exp(-decay * i) * (1 + noise * u)`,
/// `u` uniform in `[-1, 1]`. All three components follow the curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticHead {
    pub class: String,
    pub initial_loss: f64,
    pub decay_rate: f64,
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLosses {
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    pub heads: Vec<SyntheticHead>,
}

impl SyntheticLosses {
    pub fn generate<T: Real>(&self, catalog: &ClassCatalog) -> Result<Vec<LossSnapshot<T>>> {
        let ids = self
            .heads
            .iter()
            .map(|h| {
                if !(h.initial_loss > 0.0 && h.initial_loss.is_finite()) || !h.decay_rate.is_finite() {
                    return Err(Error::Validation(format!("head `{}`: invalid loss curve", h.class)));
                }
                if !(0.0..1.0).contains(&h.noise) {
                    return Err(Error::Validation(format!(
                        "head `{}`: noise must be in [0, 1)",
                        h.class
                    )));
                }
                catalog.require_id(&h.class)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.iterations);
        for i in 0..self.iterations {
            let heads = self
                .heads
                .iter()
                .zip(&ids)
                .map(|(h, id)| {
                    let u: f64 = if h.noise > 0.0 {
                        rng.random_range(-1.0..=1.0)
                    } else {
                        0.0
                    };
                    let l = h.initial_loss * (-h.decay_rate * i as f64).exp() * (1.0 + h.noise * u);
                    (*id, HeadLoss::new(T::lit(l), T::lit(l), T::lit(l)))
                })
                .collect();
            out.push(LossSnapshot::new(heads, 1)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct LossRow {
    iteration: u64,
    class_name: String,
    loc: f64,
    cls: f64,
    dir: f64,
    #[serde(default)]
    n_pos: Option<u64>,
}

/// Parses recorded losses: `iteration,class_name,loc,cls,dir[,n_pos]`, one
/// row per head per iteration, iterations non-decreasing.
pub fn read_loss_csv<T: Real>(text: &str, catalog: &ClassCatalog) -> Result<Vec<LossSnapshot<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<LossSnapshot<T>> = Vec::new();
    let mut current: Option<u64> = None;
    for (i, row) in reader.deserialize::<LossRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::format(Position::Line(line), e.to_string()))?;
        let id = catalog
            .id_of(&row.class_name)
            .ok_or_else(|| Error::format(Position::Line(line), format!("unknown class `{}`", row.class_name)))?;
        let head = HeadLoss::new(T::lit(row.loc), T::lit(row.cls), T::lit(row.dir));
        if !head.is_valid() {
            return Err(Error::format(
                Position::Line(line),
                "losses must be finite and non-negative",
            ));
        }
        let n_pos = row.n_pos.unwrap_or(1);
        if n_pos == 0 {
            return Err(Error::format(Position::Line(line), "n_pos must be at least 1"));
        }
        match current {
            Some(it) if it == row.iteration => {}
            Some(it) if row.iteration < it => {
                return Err(Error::format(Position::Line(line), "iterations must not decrease"));
            }
            _ => {
                current = Some(row.iteration);
                out.push(LossSnapshot {
                    heads: BTreeMap::new(),
                    n_pos,
                });
            }
        }
        let snap = out.last_mut().expect("pushed above");
        if snap.heads.insert(id, head).is_some() {
            return Err(Error::format(
                Position::Line(line),
                format!("duplicate head `{}`", row.class_name),
            ));
        }
    }
    Ok(out)
}

/// Scales every loss of one head by `factor`; used to check scale invariance.
pub fn scale_head<T: Real>(stream: &[LossSnapshot<T>], head: ClassId, factor: T) -> Vec<LossSnapshot<T>> {
    stream
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if let Some(h) = s.heads.get_mut(&head) {
                *h = h.scaled(factor);
            }
            s
        })
        .collect()
}
