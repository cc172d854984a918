use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::pareto::{crowding_distances, nondomination_ranks, Point};

/// One environment step as seen by the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    /// Scaled reward.
    pub reward: [f64; 2],
    /// Conditioning the policy received at this step.
    pub desired_return: [f64; 2],
    pub desired_horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    transitions: Vec<Transition>,
    ret: [f64; 2],
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>) -> Self {
        let ret = transitions.iter().fold([0.0, 0.0], |a, t| [a[0] + t.reward[0], a[1] + t.reward[1]]);
        Self { transitions, ret }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Componentwise sum of the scaled rewards.
    pub fn ret(&self) -> [f64; 2] {
        self.ret
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Return still to be collected from step `t` on.
    pub fn return_to_go(&self, t: usize) -> [f64; 2] {
        self.transitions[t..].iter().fold([0.0, 0.0], |a, tr| [a[0] + tr.reward[0], a[1] + tr.reward[1]])
    }
}

/// Conditioning for a fresh episode, in scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredTarget {
    pub desired_return: [f64; 2],
    pub desired_horizon: f64,
}

impl DesiredTarget {
    pub fn new(desired_return: [f64; 2], desired_horizon: f64) -> Result<Self> {
        if !(desired_return.iter().all(|v| v.is_finite()) && desired_horizon >= 1.0) {
            return Err(Error::InvalidInput(format!("invalid target {desired_return:?} / {desired_horizon}")));
        }
        Ok(Self { desired_return, desired_horizon })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    trajectory: Trajectory,
    /// Insertion counter; larger is newer.
    serial: u64,
    rank: usize,
    crowding: f64,
}

/// Bounded episode store. When over capacity it keeps the best entries by
/// non-domination rank, then crowding distance, then recency.
#[derive(Debug, Clone)]
pub struct ExperienceBuffer {
    capacity: usize,
    entries: Vec<Entry>,
    next_serial: u64,
}

impl ExperienceBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("buffer capacity must be positive".into()));
        }
        Ok(Self { capacity, entries: Vec::new(), next_serial: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.entries.iter().map(|e| &e.trajectory)
    }

    pub fn returns(&self) -> Vec<Point> {
        self.entries.iter().map(|e| e.trajectory.ret()).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.rank).collect()
    }

    pub fn crowding(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.crowding).collect()
    }

    /// Entries on the first front.
    pub fn front(&self) -> Vec<&Trajectory> {
        self.entries.iter().filter(|e| e.rank == 0).map(|e| &e.trajectory).collect()
    }

    /// Inserts a batch, then prunes back to capacity.
    pub fn insert(&mut self, trajectories: impl IntoIterator<Item = Trajectory>) {
        for trajectory in trajectories {
            self.entries.push(Entry { trajectory, serial: self.next_serial, rank: 0, crowding: 0.0 });
            self.next_serial += 1;
        }
        self.rank_entries();
        if self.entries.len() > self.capacity {
            self.entries.sort_by(|a, b| {
                a.rank
                    .cmp(&b.rank)
                    .then(b.crowding.total_cmp(&a.crowding))
                    .then(b.serial.cmp(&a.serial))
            });
            self.entries.truncate(self.capacity);
            // ranks are unchanged by dropping a worst tail, crowding is not
            self.rank_entries();
        }
        self.entries.sort_by_key(|e| e.serial);
    }

    fn rank_entries(&mut self) {
        let returns = self.returns();
        let ranks = nondomination_ranks(&returns);
        let max_rank = ranks.iter().copied().max().unwrap_or(0);
        let mut crowd = vec![0.0; returns.len()];
        for r in 0..=max_rank {
            let idx: Vec<usize> = (0..returns.len()).filter(|&i| ranks[i] == r).collect();
            let pts: Vec<Point> = idx.iter().map(|&i| returns[i]).collect();
            for (&i, d) in idx.iter().zip(crowding_distances(&pts)) {
                crowd[i] = d;
            }
        }
        // repeated returns add nothing; only the newest copy keeps its distance
        let mut order: Vec<usize> = (0..returns.len()).collect();
        order.sort_by(|&a, &b| {
            returns[a][0]
                .total_cmp(&returns[b][0])
                .then(returns[a][1].total_cmp(&returns[b][1]))
                .then(self.entries[b].serial.cmp(&self.entries[a].serial))
        });
        for w in order.windows(2) {
            if returns[w[0]] == returns[w[1]] {
                crowd[w[1]] = 0.0;
            }
        }
        for (i, e) in self.entries.iter_mut().enumerate() {
            e.rank = ranks[i];
            e.crowding = crowd[i];
        }
    }

    /// Population standard deviation of the returns, per objective.
    pub fn return_std(&self) -> [f64; 2] {
        let n = self.entries.len().max(1) as f64;
        let r = self.returns();
        let mut out = [0.0; 2];
        for (o, v) in out.iter_mut().enumerate() {
            let mean = r.iter().map(|p| p[o]).sum::<f64>() / n;
            *v = (r.iter().map(|p| (p[o] - mean).powi(2)).sum::<f64>() / n).sqrt();
        }
        out
    }

    /// Total number of stored transitions.
    pub fn transition_count(&self) -> usize {
        self.entries.iter().map(|e| e.trajectory.len()).sum()
    }

    /// Transition `k` in storage order: `(trajectory, step)`.
    pub fn locate(&self, mut k: usize) -> Option<(&Trajectory, usize)> {
        for e in &self.entries {
            if k < e.trajectory.len() {
                return Some((&e.trajectory, k));
            }
            k -= e.trajectory.len();
        }
        None
    }
}

/// Exploration target: a random first-front trajectory's return and length,
/// perturbed by Gaussian noise scaled with the buffer spread, and pushed up
/// on one random objective.
pub fn choose_desired<R: Rng + ?Sized>(buffer: &ExperienceBuffer, return_noise_scale: f64, rng: &mut R) -> Result<DesiredTarget> {
    let front = buffer.front();
    if front.is_empty() {
        return Err(Error::Empty("experience buffer"));
    }
    let pick = front[rng.random_range(0..front.len())];
    let std = buffer.return_std();
    let mut ret = pick.ret();
    if return_noise_scale > 0.0 {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        for o in 0..2 {
            ret[o] += return_noise_scale * std[o] * normal.sample(rng);
        }
        let o = rng.random_range(0..2);
        ret[o] += return_noise_scale * std[o];
    }
    DesiredTarget::new(ret, pick.len().max(1) as f64)
}
