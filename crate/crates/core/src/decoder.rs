//! Hard-decision renormalization-group (HDRG) decoder with defect-aware
//! charge transport.
//!
//! At level `ℓ` charged faces within linking distance `D(ℓ)` (Chebyshev
//! metric on the torus) are merged into clusters by union-find. Each
//! cluster's charges are carried to its root along a canonical path; a
//! crossing towards the framed side of a defect line multiplies the carried
//! charge by `M`, the opposite crossing by `M⁻¹`. A cluster whose transported
//! charges sum to zero is annihilated and the carrying edge powers join the
//! correction. Levels continue until no charge is left, or until `D(ℓ)`
//! exceeds the cutoff, in which case decoding fails.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{EdgeVec, ErrorState, Lattice, Step};

/// Growth of the linking distance with the level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceSchedule {
    /// `D(ℓ) = ℓ`.
    #[default]
    Linear,
    /// `D(ℓ) = 2^(ℓ−1)`.
    Doubling,
}

impl DistanceSchedule {
    pub fn distance(self, level: u32) -> usize {
        match self {
            DistanceSchedule::Linear => level as usize,
            DistanceSchedule::Doubling => 1usize << (level - 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HdrgDecoder {
    pub schedule: DistanceSchedule,
    /// Largest linking distance is `floor(L / cutoff_divisor)`.
    pub cutoff_divisor: usize,
}

impl Default for HdrgDecoder {
    fn default() -> Self {
        Self {
            schedule: DistanceSchedule::Linear,
            cutoff_divisor: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecodeResult {
    /// Edge powers to add to the error configuration.
    Correction(Vec<u8>),
    Failure,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub result: DecodeResult,
    pub levels: u32,
    /// Largest Chebyshev diameter among annihilated clusters.
    pub max_cluster_diameter: usize,
}

impl DecodeOutcome {
    pub fn correction(&self) -> Option<&[u8]> {
        match &self.result {
            DecodeResult::Correction(c) => Some(c),
            DecodeResult::Failure => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recovery {
    Success,
    LogicalFailure,
    DecoderFailure,
}

impl Recovery {
    pub fn is_success(self) -> bool {
        self == Recovery::Success
    }
}

/// One cluster at one level, for the decode trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterTrace {
    pub root: usize,
    pub members: Vec<(usize, u8)>,
    pub root_charge: u8,
    pub annihilated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelTrace {
    pub level: u32,
    pub distance: usize,
    pub clusters: Vec<ClusterTrace>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DecodeTrace {
    pub levels: Vec<LevelTrace>,
}

impl fmt::Display for DecodeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for lvl in &self.levels {
            writeln!(f, "level {} distance {} clusters {}", lvl.level, lvl.distance, lvl.clusters.len())?;
            for c in &lvl.clusters {
                let members: Vec<String> = c.members.iter().map(|(f, k)| format!("{f}:{k}")).collect();
                writeln!(
                    f,
                    "  root {} charge {} {} [{}]",
                    c.root,
                    c.root_charge,
                    if c.annihilated { "annihilated" } else { "kept" },
                    members.join(" ")
                )?;
            }
        }
        Ok(())
    }
}

/// Result of carrying a charge along a face path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transport {
    pub charge: u8,
    /// Edge powers that physically realize the move.
    pub powers: EdgeVec,
}

/// Carry charge `k` along `path`. Consecutive faces must be adjacent.
pub fn transport(lat: &Lattice, path: &[usize], k: u8) -> Result<Transport> {
    let z = lat.modulus();
    let mut charge = z.reduce(k as i64);
    let mut powers = Vec::with_capacity(path.len().saturating_sub(1));
    for pair in path.windows(2) {
        let (u, v) = (pair[0], pair[1]);
        let step = lat.step_between(u, v).ok_or(Error::NotAdjacent(u, v))?;
        let (edge, _) = lat.neighbor(u, step);
        let hop = lat.hop(edge, u, charge);
        powers.push((edge, hop.power));
        charge = hop.arriving;
    }
    Ok(Transport { charge, powers })
}

/// Signed minimal-image offset from `a` to `b` on a ring of length `l`;
/// exact antipodes resolve to `+l/2`.
fn ring_offset(a: usize, b: usize, l: usize) -> isize {
    let d = (b + l - a) % l;
    if 2 * d <= l {
        d as isize
    } else {
        d as isize - l as isize
    }
}

/// Chebyshev distance on the torus.
pub fn torus_distance(lat: &Lattice, u: usize, v: usize) -> usize {
    let l = lat.size();
    let (ux, uy) = lat.face_xy(u);
    let (vx, vy) = lat.face_xy(v);
    let dx = ring_offset(ux, vx, l).unsigned_abs();
    let dy = ring_offset(uy, vy, l).unsigned_abs();
    dx.max(dy)
}

/// Row-first, then column, minimal-image steps from `u` to `v`.
pub fn canonical_steps(lat: &Lattice, u: usize, v: usize) -> Vec<Step> {
    let l = lat.size();
    let (ux, uy) = lat.face_xy(u);
    let (vx, vy) = lat.face_xy(v);
    let dx = ring_offset(ux, vx, l);
    let dy = ring_offset(uy, vy, l);
    let mut steps = Vec::with_capacity(dx.unsigned_abs() + dy.unsigned_abs());
    let sx = if dx >= 0 { Step::PlusX } else { Step::MinusX };
    let sy = if dy >= 0 { Step::PlusY } else { Step::MinusY };
    steps.extend(std::iter::repeat_n(sx, dx.unsigned_abs()));
    steps.extend(std::iter::repeat_n(sy, dy.unsigned_abs()));
    steps
}

/// Faces visited by the canonical path, endpoints included.
pub fn canonical_path(lat: &Lattice, u: usize, v: usize) -> Vec<usize> {
    let mut path = vec![u];
    let mut f = u;
    for s in canonical_steps(lat, u, v) {
        f = lat.neighbor(f, s).1;
        path.push(f);
    }
    path
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    // The smaller index becomes the representative, so with members sorted
    // by face index every cluster is represented by its least face.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl HdrgDecoder {
    pub fn max_distance(&self, l: usize) -> usize {
        l / self.cutoff_divisor.max(1)
    }

    pub fn decode(&self, lat: &Lattice, syndrome: &[u8]) -> DecodeOutcome {
        self.run(lat, syndrome, None)
    }

    pub fn decode_traced(&self, lat: &Lattice, syndrome: &[u8]) -> (DecodeOutcome, DecodeTrace) {
        let mut trace = DecodeTrace::default();
        let out = self.run(lat, syndrome, Some(&mut trace));
        (out, trace)
    }

    fn run(&self, lat: &Lattice, syndrome: &[u8], mut trace: Option<&mut DecodeTrace>) -> DecodeOutcome {
        let z = lat.modulus();
        let mut charges = syndrome.to_vec();
        let mut correction = vec![0u8; lat.num_edges()];
        let mut max_diameter = 0;
        let max_distance = self.max_distance(lat.size());
        let mut level = 0u32;

        loop {
            // Sorted by face index.
            let charged: Vec<usize> = (0..charges.len()).filter(|&f| charges[f] != 0).collect();
            if charged.is_empty() {
                return DecodeOutcome {
                    result: DecodeResult::Correction(correction),
                    levels: level,
                    max_cluster_diameter: max_diameter,
                };
            }
            level += 1;
            let distance = self.schedule.distance(level);
            if distance > max_distance {
                return DecodeOutcome {
                    result: DecodeResult::Failure,
                    levels: level - 1,
                    max_cluster_diameter: max_diameter,
                };
            }

            let mut uf = UnionFind::new(charged.len());
            for i in 0..charged.len() {
                for j in i + 1..charged.len() {
                    if torus_distance(lat, charged[i], charged[j]) <= distance {
                        uf.union(i, j);
                    }
                }
            }
            let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); charged.len()];
            for i in 0..charged.len() {
                let r = uf.find(i);
                clusters[r].push(charged[i]);
            }

            let mut level_trace = trace.as_ref().map(|_| LevelTrace {
                level,
                distance,
                clusters: Vec::new(),
            });
            for members in clusters.into_iter().filter(|c| !c.is_empty()) {
                let root = members[0];
                let mut total = charges[root];
                for &f in &members[1..] {
                    let (end, arriving) =
                        lat.transported(f, &canonical_steps(lat, f, root), charges[f]);
                    debug_assert_eq!(end, root);
                    total = z.add(total, arriving);
                }
                let annihilated = total == 0;
                if let Some(lt) = level_trace.as_mut() {
                    lt.clusters.push(ClusterTrace {
                        root,
                        members: members.iter().map(|&f| (f, charges[f])).collect(),
                        root_charge: total,
                        annihilated,
                    });
                }
                if !annihilated {
                    continue;
                }
                for &f in &members[1..] {
                    let k = charges[f];
                    let (_, arriving) =
                        lat.carry(f, &canonical_steps(lat, f, root), k, &mut correction);
                    charges[f] = 0;
                    charges[root] = z.add(charges[root], arriving);
                }
                debug_assert_eq!(charges[root], 0);
                for (i, &a) in members.iter().enumerate() {
                    for &b in &members[i + 1..] {
                        max_diameter = max_diameter.max(torus_distance(lat, a, b));
                    }
                }
            }
            if let (Some(t), Some(lt)) = (trace.as_deref_mut(), level_trace) {
                t.levels.push(lt);
            }
        }
    }

    /// Decode the current syndrome of `state` (without mutating it) and
    /// classify the corrected configuration.
    pub fn attempt_recovery(&self, lat: &Lattice, state: &ErrorState) -> Recovery {
        let out = self.decode(lat, state.charges());
        let Some(correction) = out.correction() else {
            return Recovery::DecoderFailure;
        };
        let z = lat.modulus();
        let (s1, s2) = lat.logical_class_unchecked(state.powers());
        let (c1, c2) = lat.logical_class_unchecked(correction);
        if cfg!(debug_assertions) {
            let mut fixed = state.clone();
            fixed.apply_powers(lat, correction);
            debug_assert!(fixed.is_vacuum(), "correction left charges behind");
        }
        if z.add(s1, c1) == 0 && z.add(s2, c2) == 0 {
            Recovery::Success
        } else {
            Recovery::LogicalFailure
        }
    }
}
