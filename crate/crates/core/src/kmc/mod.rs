//! Continuous-time kinetic Monte Carlo over single-qudit `X^a` events.
//!
//! Every edge carries `N − 1` candidate events (one per power `a`). Their
//! Davies rates depend only on the edge's incidence weights and the charges
//! on its two endpoint faces, so all rates are read from a precomputed table
//! and an applied event only refreshes the edges touching the two faces it
//! changed.

mod observables;
mod rates;
mod sumtree;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

pub use observables::{observables, Observables};
pub use rates::davies_rate;
pub use sumtree::SumTree;

use crate::energy::{delta_energy_local, energy, EnergySnapshot, MassVector};
use crate::error::{Error, Result};
use crate::lattice::{ErrorState, Lattice};
use crate::real::Real;

/// Events between exact energy recomputations.
pub const ENERGY_REFRESH_INTERVAL: u64 = 1 << 20;

/// Which events the bath may drive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Every single-qudit event.
    #[default]
    Full,
    /// No new excitations: an event may not act on an edge with two empty
    /// faces, may not leave both faces of its edge empty, and may not raise
    /// the number of charged faces unless it lowers the energy. Charges
    /// hop, heavy charges decay into light ones and charges fuse, but light
    /// charges never split.
    Restricted,
    /// Only the first two conditions of [`Mode::Restricted`]. Symmetric
    /// under event reversal, so detailed balance holds within the allowed
    /// states; light charges split at a thermally suppressed rate.
    RestrictedReversible,
}

impl Mode {
    /// Whether an event taking endpoint charges `before` to `after` and
    /// releasing energy `omega` is allowed.
    #[inline]
    pub fn allows<T: Real>(self, before: (u8, u8), after: (u8, u8), omega: T) -> bool {
        let count = |(a, b): (u8, u8)| (a != 0) as u8 + (b != 0) as u8;
        let (c0, c1) = (count(before), count(after));
        match self {
            Mode::Full => true,
            Mode::RestrictedReversible => c0 > 0 && c1 > 0,
            Mode::Restricted => c0 > 0 && c1 > 0 && (c1 <= c0 || omega > T::zero()),
        }
    }
}

/// Per-trajectory random stream, keyed by a master seed, a stream key (for
/// example the sweep point) and the trial id. Independent of scheduling.
pub fn trial_rng(master_seed: u64, stream_key: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(master_seed ^ splitmix(stream_key)));
    rng.set_stream(trial);
    rng
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Rates and energy changes for every (edge class, endpoint charges, power).
#[derive(Clone, Debug)]
struct RateTable<T> {
    n: usize,
    edge_class: Vec<u8>,
    rates: Vec<T>,
    omegas: Vec<T>,
    creations: Vec<bool>,
}

impl<T: Real> RateTable<T> {
    fn build(lat: &Lattice, masses: &MassVector<T>, beta: T, mode: Mode) -> Self {
        let z = lat.modulus();
        let n = lat.n() as usize;
        let mut classes: Vec<(u8, u8)> = Vec::new();
        let edge_class = lat
            .edges()
            .iter()
            .map(|e| {
                let key = (e.w_from, e.w_to);
                match classes.iter().position(|&c| c == key) {
                    Some(i) => i as u8,
                    None => {
                        classes.push(key);
                        (classes.len() - 1) as u8
                    }
                }
            })
            .collect();

        let size = classes.len() * n * n * (n - 1);
        let mut rates = Vec::with_capacity(size);
        let mut omegas = Vec::with_capacity(size);
        let mut creations = Vec::with_capacity(size);
        for &(w_from, w_to) in &classes {
            let edge = crate::lattice::Edge {
                from: 0,
                to: 1,
                w_from,
                w_to,
            };
            for q_from in 0..n as u8 {
                for q_to in 0..n as u8 {
                    for a in 1..n as u8 {
                        let omega = delta_energy_local(z, &edge, q_from, q_to, a, masses);
                        let after = (z.add(q_from, z.mul(w_from, a)), z.add(q_to, z.mul(w_to, a)));
                        let rate = if mode.allows((q_from, q_to), after, omega) {
                            rates::davies_rate_unchecked(omega, beta)
                        } else {
                            T::zero()
                        };
                        rates.push(rate);
                        omegas.push(omega);
                        creations.push(q_from == 0 && q_to == 0);
                    }
                }
            }
        }
        Self {
            n,
            edge_class,
            rates,
            omegas,
            creations,
        }
    }

    #[inline]
    fn index(&self, edge: usize, q_from: u8, q_to: u8, a: u8) -> usize {
        let n = self.n;
        ((self.edge_class[edge] as usize * n + q_from as usize) * n + q_to as usize) * (n - 1)
            + (a as usize - 1)
    }
}

/// Shared, immutable description of the dynamics: lattice, masses,
/// temperature and mode. One per sweep point, borrowed by every trial.
#[derive(Clone, Debug)]
pub struct Dynamics<'a, T> {
    lat: &'a Lattice,
    masses: MassVector<T>,
    beta: T,
    mode: Mode,
    table: RateTable<T>,
}

impl<'a, T: Real> Dynamics<'a, T> {
    pub fn new(lat: &'a Lattice, masses: MassVector<T>, beta: T, mode: Mode) -> Result<Self> {
        masses.check_modulus(lat.n())?;
        davies_rate(T::zero(), beta)?;
        let table = RateTable::build(lat, &masses, beta, mode);
        Ok(Self {
            lat,
            masses,
            beta,
            mode,
            table,
        })
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lat
    }

    pub fn masses(&self) -> &MassVector<T> {
        &self.masses
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Number of candidate events, `2L² (N − 1)`.
    pub fn num_events(&self) -> usize {
        self.lat.num_edges() * (self.table.n - 1)
    }

    #[inline]
    fn slot(&self, state: &ErrorState, edge: usize, a: u8) -> usize {
        let e = self.lat.edge(edge);
        self.table
            .index(edge, state.charge(e.from), state.charge(e.to), a)
    }

    /// Current rate of `X^a` on `edge` (zero if the mode forbids it).
    #[inline]
    pub fn rate(&self, state: &ErrorState, edge: usize, a: u8) -> T {
        self.table.rates[self.slot(state, edge, a)]
    }

    /// Energy released by `X^a` on `edge`.
    #[inline]
    pub fn omega(&self, state: &ErrorState, edge: usize, a: u8) -> T {
        self.table.omegas[self.slot(state, edge, a)]
    }

    /// Rate recomputed from scratch, bypassing the table.
    pub fn rate_uncached(&self, state: &ErrorState, edge: usize, a: u8) -> T {
        let z = self.lat.modulus();
        let e = self.lat.edge(edge);
        let (qf, qt) = (state.charge(e.from), state.charge(e.to));
        let omega = delta_energy_local(z, e, qf, qt, a, &self.masses);
        let after = (z.add(qf, z.mul(e.w_from, a)), z.add(qt, z.mul(e.w_to, a)));
        if !self.mode.allows((qf, qt), after, omega) {
            return T::zero();
        }
        rates::davies_rate_unchecked(omega, self.beta)
    }

    /// Event index over every `(edge, power)` pair for `state`.
    pub fn index(&self, state: &ErrorState) -> SumTree<T> {
        let per = self.table.n - 1;
        let mut weights = Vec::with_capacity(self.num_events());
        for edge in 0..self.lat.num_edges() {
            for a in 1..=per as u8 {
                weights.push(self.rate(state, edge, a));
            }
        }
        SumTree::from_weights(&weights)
    }
}

/// One applied event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord<T> {
    pub time: T,
    pub edge: usize,
    pub power: u8,
    pub omega: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome<T> {
    Event(EventRecord<T>),
    /// Total rate is zero; nothing can ever happen again.
    Absorbing,
}

/// Resumable trajectory state without the event index.
#[derive(Clone, Debug)]
pub struct Checkpoint<T> {
    pub state: ErrorState,
    pub time: T,
    pub events: u64,
    pub creations: u64,
    pub rng: ChaCha8Rng,
}

/// A single stochastic trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory<'d, T: Real> {
    dynamics: &'d Dynamics<'d, T>,
    state: ErrorState,
    index: SumTree<T>,
    time: T,
    events: u64,
    creations: u64,
    energy: EnergySnapshot<T>,
    rng: ChaCha8Rng,
}

impl<'d, T: Real> Trajectory<'d, T> {
    pub fn new(dynamics: &'d Dynamics<'d, T>, state: ErrorState, rng: ChaCha8Rng) -> Self {
        let index = dynamics.index(&state);
        let energy = EnergySnapshot::of(&state, &dynamics.masses);
        Self {
            dynamics,
            state,
            index,
            time: T::zero(),
            events: 0,
            creations: 0,
            energy,
            rng,
        }
    }

    pub fn resume(dynamics: &'d Dynamics<'d, T>, cp: Checkpoint<T>) -> Self {
        let mut traj = Self::new(dynamics, cp.state, cp.rng);
        traj.time = cp.time;
        traj.events = cp.events;
        traj.creations = cp.creations;
        traj
    }

    pub fn checkpoint(self) -> Checkpoint<T> {
        Checkpoint {
            state: self.state,
            time: self.time,
            events: self.events,
            creations: self.creations,
            rng: self.rng,
        }
    }

    pub fn state(&self) -> &ErrorState {
        &self.state
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Events that created charges on two previously empty faces.
    pub fn creations(&self) -> u64 {
        self.creations
    }

    pub fn energy(&self) -> T {
        self.energy.total
    }

    pub fn total_rate(&self) -> T {
        self.index.total()
    }

    pub fn index(&self) -> &SumTree<T> {
        &self.index
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Largest relative deviation between cached and freshly computed rates.
    pub fn max_rate_cache_error(&self) -> f64 {
        let per = self.dynamics.table.n - 1;
        let mut worst = 0.0f64;
        for edge in 0..self.dynamics.lat.num_edges() {
            for a in 1..=per as u8 {
                let cached = self.index.get(edge * per + a as usize - 1).as_f64();
                let fresh = self.dynamics.rate_uncached(&self.state, edge, a).as_f64();
                let denom = fresh.abs().max(f64::MIN_POSITIVE);
                let err = if cached == fresh { 0.0 } else { (cached - fresh).abs() / denom };
                worst = worst.max(err);
            }
        }
        worst
    }

    /// Exact energy from the current charges.
    pub fn recompute_energy(&mut self) -> T {
        self.energy = EnergySnapshot::of(&self.state, &self.dynamics.masses);
        self.energy.total
    }

    fn draw_wait(&mut self, total: T) -> T {
        let e: f64 = self.rng.sample(Exp1);
        T::of(e) / total
    }

    fn fire(&mut self, total: T) -> EventRecord<T> {
        let u: f64 = self.rng.random();
        let leaf = self.index.find(T::of(u) * total);
        let per = self.dynamics.table.n - 1;
        let edge = leaf / per;
        let power = (leaf % per) as u8 + 1;
        let lat = self.dynamics.lat;
        let slot = self.dynamics.slot(&self.state, edge, power);
        let omega = self.dynamics.table.omegas[slot];
        if self.dynamics.table.creations[slot] {
            self.creations += 1;
        }
        let changes = self.state.apply_event(lat, edge, power);
        self.energy.apply(&changes, &self.dynamics.masses);
        self.events += 1;

        let [a, b] = [changes[0].face, changes[1].face];
        let fa = lat.face_edges(a);
        let fb = lat.face_edges(b);
        for (i, &e) in fa.iter().chain(fb.iter()).enumerate() {
            // face_edges(b) may repeat edges of face a (always the fired edge,
            // and more on L = 2)
            if i >= 4 && fa.contains(&e) {
                continue;
            }
            for p in 1..=per as u8 {
                let r = self.dynamics.rate(&self.state, e, p);
                self.index.update(e * per + p as usize - 1, r);
            }
        }
        if self.events.is_multiple_of(ENERGY_REFRESH_INTERVAL) {
            self.recompute_energy();
            self.index.rebuild();
        }
        EventRecord {
            time: self.time,
            edge,
            power,
            omega,
        }
    }

    /// Advance by one Gillespie step.
    pub fn step(&mut self) -> StepOutcome<T> {
        let total = self.index.total();
        if !(total > T::zero()) {
            return StepOutcome::Absorbing;
        }
        let dt = self.draw_wait(total);
        self.time = self.time + dt;
        StepOutcome::Event(self.fire(total))
    }

    /// Run until `t_end`, calling `on_event` after each applied event. The
    /// event whose clock would overshoot `t_end` is discarded (the waiting
    /// time is memoryless) and the clock is set to `t_end`. Returns `true`
    /// if the trajectory is in an absorbing state.
    pub fn run_until(&mut self, t_end: T, mut on_event: impl FnMut(&EventRecord<T>, &ErrorState)) -> bool {
        loop {
            let total = self.index.total();
            if !(total > T::zero()) {
                if t_end > self.time {
                    self.time = t_end;
                }
                return true;
            }
            let dt = self.draw_wait(total);
            if self.time + dt > t_end {
                self.time = t_end;
                return false;
            }
            self.time = self.time + dt;
            let rec = self.fire(total);
            on_event(&rec, &self.state);
        }
    }

    /// Observables of the current state.
    pub fn observables(&self) -> Observables<T> {
        observables(&self.state, self.dynamics.lat, &self.dynamics.masses)
    }

    pub fn energy_drift(&self) -> T {
        (self.energy.total - energy(self.state.charges(), &self.dynamics.masses)).abs()
    }
}

/// CSV event log: `time,edge,power,omega`.
pub struct EventLog<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> EventLog<W> {
    pub fn new(inner: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(["time", "edge", "power", "omega"])?;
        Ok(Self { writer })
    }

    pub fn record<T: Real>(&mut self, rec: &EventRecord<T>) -> Result<()> {
        self.writer.write_record(&[
            rec.time.to_string(),
            rec.edge.to_string(),
            rec.power.to_string(),
            rec.omega.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer
            .flush()
            .map_err(|e| Error::io("event log", e))
    }
}

#[cfg(test)]
mod tests;
