//! Periodic Z_N lattice with an oriented grid of charge-modifying defect lines.
//!
//! Layout: qudits live on the `2L²` edges of an `L × L` torus of primal faces,
//! and electric charges live on the faces. Faces are indexed `y * L + x`.
//! Edge `X(x, y)` (index `y * L + x`) joins face `(x-1, y)` to `(x, y)`;
//! edge `Y(x, y)` (index `L² + y * L + x`) joins `(x, y-1)` to `(x, y)`.
//! Each edge is oriented from its first face to its second: the default
//! incidence weight is `-1` on the first face and `+1` on the second.
//!
//! A vertical defect line at coordinate `c` cuts the edges `X(c, ·)` and a
//! horizontal line at `c` cuts `Y(·, c)`. The weight on the framed side of
//! the cut is multiplied by `M`, so a charge carried across a line towards
//! its framed side is multiplied by `M`, and by `M⁻¹` in the other direction.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ZnMatrix;
use crate::zn::{gcd, Modulus};

/// Which side of a defect line carries the modified weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framing {
    /// The `+x` side of a vertical line, `+y` side of a horizontal one.
    #[default]
    Plus,
    Minus,
}

/// A defect line; deserializes from a bare coordinate or `{ at, framing }`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "DefectLineRepr")]
pub struct DefectLine {
    pub at: usize,
    pub framing: Framing,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DefectLineRepr {
    At(usize),
    Full {
        at: usize,
        #[serde(default)]
        framing: Framing,
    },
}

impl From<DefectLineRepr> for DefectLine {
    fn from(r: DefectLineRepr) -> Self {
        match r {
            DefectLineRepr::At(at) => DefectLine::plus(at),
            DefectLineRepr::Full { at, framing } => DefectLine { at, framing },
        }
    }
}

impl DefectLine {
    pub fn plus(at: usize) -> Self {
        Self {
            at,
            framing: Framing::Plus,
        }
    }
}

/// Geometry and defect layout of a lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Charge modulus.
    pub n: u32,
    /// Linear size in primal faces.
    pub l: usize,
    /// Defect multiplier.
    pub m: u32,
    /// Vertical lines (cutting `X` edges), by column.
    pub vertical: Vec<DefectLine>,
    /// Horizontal lines (cutting `Y` edges), by row.
    pub horizontal: Vec<DefectLine>,
}

/// Line coordinates `0, g₀, g₀+g₁, …` produced by cycling through `gaps`,
/// stopping before `l`.
pub fn pattern_coordinates(l: usize, gaps: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    if gaps.is_empty() || gaps.contains(&0) {
        return out;
    }
    let mut at = 0;
    let mut i = 0;
    while at < l {
        out.push(at);
        at += gaps[i % gaps.len()];
        i += 1;
    }
    out
}

impl LatticeSpec {
    pub fn defect_free(n: u32, l: usize) -> Self {
        Self {
            n,
            l,
            m: 1,
            vertical: Vec::new(),
            horizontal: Vec::new(),
        }
    }

    /// Same line pattern in both directions, all lines framed on the `+` side.
    pub fn with_gap_pattern(n: u32, l: usize, m: u32, gaps: &[usize]) -> Self {
        let lines: Vec<DefectLine> = pattern_coordinates(l, gaps)
            .into_iter()
            .map(DefectLine::plus)
            .collect();
        Self {
            n,
            l,
            m,
            vertical: lines.clone(),
            horizontal: lines,
        }
    }

    pub fn has_defects(&self) -> bool {
        self.m != 1 && !(self.vertical.is_empty() && self.horizontal.is_empty())
    }

    /// Checks the structural invariants (not the degeneracy condition).
    pub fn check(&self) -> Result<()> {
        Modulus::new(self.n)?;
        if self.l < 2 {
            return Err(Error::InvalidSpec(format!("L = {} must be at least 2", self.l)));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidSpec(format!(
                "multiplier M = {} must satisfy 1 <= M < N = {}",
                self.m, self.n
            )));
        }
        if gcd(self.m, self.n) != 1 {
            return Err(Error::InvalidSpec(format!(
                "gcd(M, N) = gcd({}, {}) != 1",
                self.m, self.n
            )));
        }
        for (name, lines) in [("vertical", &self.vertical), ("horizontal", &self.horizontal)] {
            let mut seen = vec![false; self.l];
            for line in lines {
                if line.at >= self.l {
                    return Err(Error::InvalidSpec(format!(
                        "{name} line at {} outside [0, {})",
                        line.at, self.l
                    )));
                }
                if std::mem::replace(&mut seen[line.at], true) {
                    return Err(Error::InvalidSpec(format!(
                        "duplicate {name} line at {}",
                        line.at
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of the winding-consistency check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegeneracyReport {
    /// Net multiplier for a charge winding once in `x`.
    pub vertical_residue: u32,
    /// Net multiplier for a charge winding once in `y`.
    pub horizontal_residue: u32,
    /// Multiplicative order of `M`; net line counts must be multiples of it.
    pub order: u32,
}

impl DegeneracyReport {
    pub fn ok(&self) -> bool {
        self.vertical_residue == 1 && self.horizontal_residue == 1
    }
}

impl std::fmt::Display for DegeneracyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.ok() {
            write!(f, "ok")
        } else {
            write!(
                f,
                "a charge winding the torus is multiplied by {} (across vertical lines) and {} (across horizontal lines) instead of 1; net line counts (plus minus minus framing) must be multiples of ord(M) = {}",
                self.vertical_residue, self.horizontal_residue, self.order
            )
        }
    }
}

/// A charge carried once around either cycle of the torus must come back
/// unchanged. Each `Plus` line it crosses multiplies it by `M`, each `Minus`
/// line by `M⁻¹`, so `M^(#plus − #minus) ≡ 1 (mod N)` in both directions.
pub fn validate_degeneracy(spec: &LatticeSpec) -> Result<DegeneracyReport> {
    let z = Modulus::new(spec.n)?;
    let m = (spec.m % spec.n) as u8;
    if m == 0 {
        return Err(Error::InvalidSpec("M ≡ 0 (mod N)".into()));
    }
    let m_inv = z.inv(m);
    let winding = |lines: &[DefectLine]| {
        lines.iter().fold(1u8, |acc, line| match line.framing {
            Framing::Plus => z.mul(acc, m),
            Framing::Minus => z.mul(acc, m_inv),
        }) as u32
    };
    Ok(DegeneracyReport {
        vertical_residue: winding(&spec.vertical),
        horizontal_residue: winding(&spec.horizontal),
        order: z.order(m),
    })
}

/// Unit moves between neighboring faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    PlusX,
    MinusX,
    PlusY,
    MinusY,
}

/// An edge and its two incident faces with their Z_N weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub w_from: u8,
    pub w_to: u8,
}

impl Edge {
    /// Weight of `face` in this edge's column of the incidence matrix.
    #[inline]
    pub fn weight(&self, face: usize) -> u8 {
        if face == self.from {
            self.w_from
        } else if face == self.to {
            self.w_to
        } else {
            0
        }
    }
}

/// Power `a` to place on an edge in order to carry charge `k` off face `u`
/// onto the opposite face `v`, and the charge that arrives there.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hop {
    pub edge: usize,
    pub power: u8,
    pub arriving: u8,
}

/// Sparse vector over edges.
pub type EdgeVec = Vec<(usize, u8)>;

#[derive(Clone, Debug)]
pub struct Lattice {
    spec: LatticeSpec,
    z: Modulus,
    edges: Vec<Edge>,
    stabilizers: Vec<EdgeVec>,
    cocycles: [EdgeVec; 2],
}

impl Lattice {
    pub fn build(spec: LatticeSpec) -> Result<Self> {
        spec.check()?;
        let report = validate_degeneracy(&spec)?;
        if !report.ok() {
            return Err(Error::Degeneracy(report.to_string()));
        }
        let z = Modulus::new(spec.n)?;
        let l = spec.l;
        let m = spec.m as u8;
        let minus_one = z.neg(1);

        let mut v_frame = vec![None; l];
        for line in &spec.vertical {
            v_frame[line.at] = Some(line.framing);
        }
        let mut h_frame = vec![None; l];
        for line in &spec.horizontal {
            h_frame[line.at] = Some(line.framing);
        }

        let weights = |framing: Option<Framing>| match framing {
            None => (minus_one, 1),
            Some(Framing::Plus) => (minus_one, m),
            Some(Framing::Minus) => (z.neg(m), 1),
        };

        let mut edges = Vec::with_capacity(2 * l * l);
        for y in 0..l {
            for x in 0..l {
                let (w_from, w_to) = weights(v_frame[x]);
                edges.push(Edge {
                    from: y * l + (x + l - 1) % l,
                    to: y * l + x,
                    w_from,
                    w_to,
                });
            }
        }
        for y in 0..l {
            for x in 0..l {
                let (w_from, w_to) = weights(h_frame[y]);
                edges.push(Edge {
                    from: ((y + l - 1) % l) * l + x,
                    to: y * l + x,
                    w_from,
                    w_to,
                });
            }
        }

        let mut lat = Self {
            spec,
            z,
            edges,
            stabilizers: Vec::new(),
            cocycles: [Vec::new(), Vec::new()],
        };
        lat.stabilizers = (0..l * l).map(|v| lat.vertex_loop(v)).collect();
        lat.cocycles = logical_functionals(&lat)?;
        Ok(lat)
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn modulus(&self) -> Modulus {
        self.z
    }

    pub fn n(&self) -> u32 {
        self.z.n()
    }

    pub fn size(&self) -> usize {
        self.spec.l
    }

    pub fn num_faces(&self) -> usize {
        self.spec.l * self.spec.l
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn face_xy(&self, f: usize) -> (usize, usize) {
        (f % self.spec.l, f / self.spec.l)
    }

    pub fn face_at(&self, x: usize, y: usize) -> usize {
        let l = self.spec.l;
        (y % l) * l + x % l
    }

    pub fn x_edge(&self, x: usize, y: usize) -> usize {
        let l = self.spec.l;
        (y % l) * l + x % l
    }

    pub fn y_edge(&self, x: usize, y: usize) -> usize {
        let l = self.spec.l;
        l * l + (y % l) * l + x % l
    }

    /// Whether edge `e` is cut by a defect line.
    pub fn is_defect_edge(&self, e: usize) -> bool {
        let edge = &self.edges[e];
        let one = 1;
        !(edge.w_to == one && edge.w_from == self.z.neg(one))
    }

    /// The four edges touching face `f`: `X(x,y)`, `X(x+1,y)`, `Y(x,y)`, `Y(x,y+1)`.
    #[inline]
    pub fn face_edges(&self, f: usize) -> [usize; 4] {
        let (x, y) = self.face_xy(f);
        [
            self.x_edge(x, y),
            self.x_edge(x + 1, y),
            self.y_edge(x, y),
            self.y_edge(x, y + 1),
        ]
    }

    /// Edge used and face reached when stepping from face `f`.
    pub fn neighbor(&self, f: usize, step: Step) -> (usize, usize) {
        let l = self.spec.l;
        let (x, y) = self.face_xy(f);
        match step {
            Step::PlusX => (self.x_edge(x + 1, y), self.face_at(x + 1, y)),
            Step::MinusX => (self.x_edge(x, y), self.face_at(x + l - 1, y)),
            Step::PlusY => (self.y_edge(x, y + 1), self.face_at(x, y + 1)),
            Step::MinusY => (self.y_edge(x, y), self.face_at(x, y + l - 1)),
        }
    }

    /// Step leading from `u` to an adjacent face `v`, preferring `+x`, `-x`,
    /// `+y`, `-y` in that order when several edges join them (only at `L = 2`).
    pub fn step_between(&self, u: usize, v: usize) -> Option<Step> {
        [Step::PlusX, Step::MinusX, Step::PlusY, Step::MinusY]
            .into_iter()
            .find(|&s| self.neighbor(u, s).1 == v)
    }

    /// Carry charge `k` across `edge` from face `u` to the other endpoint.
    #[inline]
    pub fn hop(&self, edge: usize, u: usize, k: u8) -> Hop {
        let e = &self.edges[edge];
        let (wu, wv) = if u == e.from {
            (e.w_from, e.w_to)
        } else {
            debug_assert_eq!(u, e.to);
            (e.w_to, e.w_from)
        };
        let z = self.z;
        let power = z.neg(z.div(k, wu));
        Hop {
            edge,
            power,
            arriving: z.mul(wv, power),
        }
    }

    /// Carry charge `k` from `start` along `steps`, accumulating edge powers
    /// into `acc`. Returns the final face and the charge that arrives there.
    pub fn carry(&self, start: usize, steps: &[Step], k: u8, acc: &mut [u8]) -> (usize, u8) {
        let mut face = start;
        let mut charge = k;
        for &s in steps {
            let (edge, next) = self.neighbor(face, s);
            let hop = self.hop(edge, face, charge);
            acc[edge] = self.z.add(acc[edge], hop.power);
            charge = hop.arriving;
            face = next;
        }
        (face, charge)
    }

    /// Like [`Lattice::carry`] without recording the edge powers.
    pub fn transported(&self, start: usize, steps: &[Step], k: u8) -> (usize, u8) {
        let mut face = start;
        let mut charge = k;
        for &s in steps {
            let (edge, next) = self.neighbor(face, s);
            charge = self.hop(edge, face, charge).arriving;
            face = next;
        }
        (face, charge)
    }

    /// Stabilizer pattern around the vertex at the lower-left corner of face
    /// `v`: a unit charge carried around the four surrounding faces.
    fn vertex_loop(&self, v: usize) -> EdgeVec {
        let (x, y) = self.face_xy(v);
        let l = self.spec.l;
        let start = self.face_at(x + l - 1, y + l - 1);
        let mut acc = vec![0u8; self.edges.len()];
        let steps = [Step::PlusX, Step::PlusY, Step::MinusX, Step::MinusY];
        let (end, k) = self.carry(start, &steps, 1, &mut acc);
        debug_assert_eq!(end, start);
        debug_assert_eq!(k, 1, "contractible loop changed the carried charge");
        let out: EdgeVec = [
            self.x_edge(x, y + l - 1),
            self.y_edge(x, y),
            self.x_edge(x, y),
            self.y_edge(x + l - 1, y),
        ]
        .into_iter()
        .map(|e| (e, acc[e]))
        .collect();
        out
    }

    /// Stabilizer generators, one per vertex, as sparse edge vectors.
    pub fn stabilizers(&self) -> &[EdgeVec] {
        &self.stabilizers
    }

    /// Dense edge vector of stabilizer `v`.
    pub fn stabilizer_dense(&self, v: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.num_edges()];
        for &(e, p) in &self.stabilizers[v] {
            out[e] = self.z.add(out[e], p);
        }
        out
    }

    /// The two logical functionals as sparse edge vectors.
    pub fn cocycles(&self) -> &[EdgeVec; 2] {
        &self.cocycles
    }

    pub fn cocycle_dense(&self, i: usize) -> Vec<u8> {
        let mut out = vec![0u8; self.num_edges()];
        for &(e, p) in &self.cocycles[i] {
            out[e] = p;
        }
        out
    }

    /// Canonical winding string of a unit charge starting at face `(0, 0)`:
    /// direction 0 winds along `+x`, direction 1 along `+y`. The edge powers
    /// compensate for defect crossings, so the syndrome is zero.
    pub fn winding_string(&self, direction: usize) -> Vec<u8> {
        let step = if direction == 0 { Step::PlusX } else { Step::PlusY };
        let steps = vec![step; self.spec.l];
        let mut acc = vec![0u8; self.num_edges()];
        self.carry(0, &steps, 1, &mut acc);
        acc
    }

    fn check_len(&self, s: &[u8]) -> Result<()> {
        if s.len() != self.num_edges() {
            return Err(Error::SizeMismatch {
                expected: self.num_edges(),
                got: s.len(),
            });
        }
        Ok(())
    }

    /// Face charges `W · s (mod N)`.
    pub fn syndrome(&self, s: &[u8]) -> Result<Vec<u8>> {
        self.check_len(s)?;
        let z = self.z;
        let mut q = vec![0u8; self.num_faces()];
        for (edge, &a) in self.edges.iter().zip(s) {
            if a == 0 {
                continue;
            }
            q[edge.from] = z.add(q[edge.from], z.mul(edge.w_from, a));
            q[edge.to] = z.add(q[edge.to], z.mul(edge.w_to, a));
        }
        Ok(q)
    }

    /// `(φ₁ · s, φ₂ · s)` for a syndrome-free configuration. `(0, 0)` exactly
    /// when `s` is a product of stabilizers.
    pub fn logical_class(&self, s: &[u8]) -> Result<(u8, u8)> {
        let q = self.syndrome(s)?;
        let charged = q.iter().filter(|&&c| c != 0).count();
        if charged > 0 {
            return Err(Error::NonzeroSyndrome(charged));
        }
        Ok(self.logical_class_unchecked(s))
    }

    /// [`Lattice::logical_class`] without the syndrome check.
    pub fn logical_class_unchecked(&self, s: &[u8]) -> (u8, u8) {
        let z = self.z;
        let eval = |phi: &EdgeVec| {
            phi.iter()
                .fold(0u8, |acc, &(e, w)| z.add(acc, z.mul(w, s[e])))
        };
        (eval(&self.cocycles[0]), eval(&self.cocycles[1]))
    }

    /// Face × edge incidence matrix `W`.
    pub fn incidence_matrix(&self) -> ZnMatrix {
        let mut w = ZnMatrix::zeros(self.z, self.num_faces(), self.num_edges());
        for (e, edge) in self.edges.iter().enumerate() {
            w.set(edge.from, e, edge.w_from);
            w.set(edge.to, e, edge.w_to);
        }
        w
    }

    /// Edge × vertex stabilizer matrix `B` (one column per generator).
    pub fn stabilizer_matrix(&self) -> ZnMatrix {
        let mut b = ZnMatrix::zeros(self.z, self.num_edges(), self.stabilizers.len());
        for (v, stab) in self.stabilizers.iter().enumerate() {
            for &(e, p) in stab {
                b.set(e, v, self.z.add(b.get(e, v), p));
            }
        }
        b
    }

    /// Checks the stabilizer/cocycle algebra by Gaussian elimination. Cost is
    /// cubic in `L²`; intended for `L` up to about 16.
    pub fn audit(&self) -> AlgebraAudit {
        let z = self.z;
        let w = self.incidence_matrix();
        let b = self.stabilizer_matrix();
        let syndrome_free = (0..self.stabilizers.len()).all(|v| {
            self.syndrome(&self.stabilizer_dense(v))
                .map(|q| q.iter().all(|&c| c == 0))
                .unwrap_or(false)
        });
        let phi = [self.cocycle_dense(0), self.cocycle_dense(1)];
        let cocycles_vanish = (0..self.stabilizers.len()).all(|v| {
            let col = self.stabilizer_dense(v);
            phi.iter().all(|p| z.dot(p, &col) == 0)
        });
        let rank_w = w.rank();
        let rank_b = b.rank();
        let phi_rows = ZnMatrix::from_rows(z, self.num_edges(), &phi);
        let rank_w_phi = w.vstack(&phi_rows).rank();
        let windings = [self.winding_string(0), self.winding_string(1)];
        let normalization = [
            [z.dot(&phi[0], &windings[0]), z.dot(&phi[0], &windings[1])],
            [z.dot(&phi[1], &windings[0]), z.dot(&phi[1], &windings[1])],
        ];
        AlgebraAudit {
            rank_w,
            rank_b,
            logical_dimension: self.num_edges() - rank_w - rank_b,
            stabilizers_syndrome_free: syndrome_free,
            cocycles_vanish_on_stabilizers: cocycles_vanish,
            cocycles_independent_mod_w: rank_w_phi == rank_w + 2,
            normalization,
        }
    }

    /// Writes `W`, `B` and the cocycles as `row col value` triplet files.
    pub fn write_debug_dump(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = format!("% W faces={} edges={} N={}\n", self.num_faces(), self.num_edges(), self.n());
        for (e, edge) in self.edges.iter().enumerate() {
            let _ = writeln!(w, "{} {} {}", edge.from, e, edge.w_from);
            let _ = writeln!(w, "{} {} {}", edge.to, e, edge.w_to);
        }
        let mut b = format!("% B edges={} generators={} N={}\n", self.num_edges(), self.stabilizers.len(), self.n());
        for (v, stab) in self.stabilizers.iter().enumerate() {
            for &(e, p) in stab {
                let _ = writeln!(b, "{e} {v} {p}");
            }
        }
        let mut phi = format!("% phi functionals=2 edges={} N={}\n", self.num_edges(), self.n());
        for (i, c) in self.cocycles.iter().enumerate() {
            for &(e, p) in c {
                let _ = writeln!(phi, "{i} {e} {p}");
            }
        }
        for (name, body) in [("W.txt", w), ("B.txt", b), ("phi.txt", phi)] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// Result of [`Lattice::audit`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlgebraAudit {
    pub rank_w: usize,
    pub rank_b: usize,
    /// `dim ker W − rank B`; 2 for an intact encoding.
    pub logical_dimension: usize,
    pub stabilizers_syndrome_free: bool,
    pub cocycles_vanish_on_stabilizers: bool,
    pub cocycles_independent_mod_w: bool,
    /// `φᵢ · windingⱼ`; the identity for normalized functionals.
    pub normalization: [[u8; 2]; 2],
}

impl AlgebraAudit {
    pub fn passed(&self) -> bool {
        self.logical_dimension == 2
            && self.stabilizers_syndrome_free
            && self.cocycles_vanish_on_stabilizers
            && self.cocycles_independent_mod_w
            && self.normalization == [[1, 0], [0, 1]]
    }
}

/// Builds the two logical functionals as weighted cuts.
///
/// `φ₁` lives on the `X` edges of column 0 and `φ₂` on the `Y` edges of
/// row 0. Only the vertex loops along the cut touch its support, and each
/// touches two consecutive cut edges, so vanishing on every stabilizer is a
/// first-order recurrence for the cut weights. The recurrence closes around
/// the torus exactly when the degeneracy condition holds. Each functional is
/// then scaled to evaluate to 1 on its own canonical winding string.
pub fn logical_functionals(lat: &Lattice) -> Result<[EdgeVec; 2]> {
    let z = lat.z;
    let l = lat.spec.l;
    let entry = |v: usize, e: usize| -> u8 {
        lat.stabilizers[v]
            .iter()
            .filter(|&&(edge, _)| edge == e)
            .fold(0, |acc, &(_, p)| z.add(acc, p))
    };

    // Cut edge i and the vertex loop joining cut edges i-1 and i.
    let cuts: [(Vec<usize>, Vec<usize>); 2] = [
        (
            (0..l).map(|y| lat.x_edge(0, y)).collect(),
            (0..l).map(|y| lat.face_at(0, y)).collect(),
        ),
        (
            (0..l).map(|x| lat.y_edge(x, 0)).collect(),
            (0..l).map(|x| lat.face_at(x, 0)).collect(),
        ),
    ];

    let mut out: [EdgeVec; 2] = [Vec::new(), Vec::new()];
    for (dir, (edges, vertices)) in cuts.iter().enumerate() {
        let mut alpha = vec![0u8; l];
        alpha[0] = 1;
        for i in 1..l {
            let v = vertices[i];
            let prev = entry(v, edges[i - 1]);
            let cur = entry(v, edges[i]);
            if cur == 0 {
                return Err(Error::Degeneracy(format!(
                    "vertex loop {v} does not cross cut edge {}",
                    edges[i]
                )));
            }
            alpha[i] = z.neg(z.div(z.mul(alpha[i - 1], prev), cur));
        }
        let v0 = vertices[0];
        let closure = z.add(
            z.mul(alpha[l - 1], entry(v0, edges[l - 1])),
            z.mul(alpha[0], entry(v0, edges[0])),
        );
        if closure != 0 {
            return Err(Error::Degeneracy(format!(
                "cut functional {} does not close around the torus",
                dir + 1
            )));
        }
        let winding = lat.winding_string(dir);
        let norm = edges
            .iter()
            .zip(&alpha)
            .fold(0u8, |acc, (&e, &a)| z.add(acc, z.mul(a, winding[e])));
        if norm == 0 {
            return Err(Error::Degeneracy(format!(
                "winding string {} is not detected by its cut functional",
                dir + 1
            )));
        }
        let scale = z.inv(norm);
        out[dir] = edges
            .iter()
            .zip(&alpha)
            .map(|(&e, &a)| (e, z.mul(a, scale)))
            .collect();
    }
    Ok(out)
}

/// Charge change on one face caused by an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaceChange {
    pub face: usize,
    pub old: u8,
    pub new: u8,
}

/// Net X-power on every edge plus the cached face charges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ErrorState {
    powers: Vec<u8>,
    charges: Vec<u8>,
}

impl ErrorState {
    pub fn vacuum(lat: &Lattice) -> Self {
        Self {
            powers: vec![0; lat.num_edges()],
            charges: vec![0; lat.num_faces()],
        }
    }

    pub fn from_powers(lat: &Lattice, powers: Vec<u8>) -> Result<Self> {
        let charges = lat.syndrome(&powers)?;
        if let Some(&bad) = powers.iter().find(|&&a| a as u32 >= lat.n()) {
            return Err(Error::InvalidParameter(format!(
                "edge power {bad} outside [0, {})",
                lat.n()
            )));
        }
        Ok(Self { powers, charges })
    }

    pub fn powers(&self) -> &[u8] {
        &self.powers
    }

    pub fn charges(&self) -> &[u8] {
        &self.charges
    }

    #[inline]
    pub fn charge(&self, f: usize) -> u8 {
        self.charges[f]
    }

    pub fn charged_faces(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.charges
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(f, &c)| (f, c))
    }

    pub fn is_vacuum(&self) -> bool {
        self.charges.iter().all(|&c| c == 0)
    }

    /// Apply `X^a` on `edge`; returns the two endpoint faces (from, to).
    #[inline]
    pub fn apply_event(&mut self, lat: &Lattice, edge: usize, a: u8) -> [FaceChange; 2] {
        let z = lat.modulus();
        let e = lat.edge(edge);
        self.powers[edge] = z.add(self.powers[edge], a);
        let old_from = self.charges[e.from];
        let new_from = z.add(old_from, z.mul(e.w_from, a));
        self.charges[e.from] = new_from;
        let old_to = self.charges[e.to];
        let new_to = z.add(old_to, z.mul(e.w_to, a));
        self.charges[e.to] = new_to;
        [
            FaceChange {
                face: e.from,
                old: old_from,
                new: new_from,
            },
            FaceChange {
                face: e.to,
                old: old_to,
                new: new_to,
            },
        ]
    }

    /// Add an edge vector (e.g. a decoder correction).
    pub fn apply_powers(&mut self, lat: &Lattice, delta: &[u8]) {
        for (e, &a) in delta.iter().enumerate() {
            if a != 0 {
                self.apply_event(lat, e, a);
            }
        }
    }

    /// Whether the cached charges agree with `W · s`.
    pub fn is_consistent(&self, lat: &Lattice) -> bool {
        lat.syndrome(&self.powers)
            .map(|q| q == self.charges)
            .unwrap_or(false)
    }
}
