//! Electric-sector energies: each face holding charge `k` costs `J[k]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Edge, ErrorState, FaceChange, Lattice};
use crate::real::Real;
use crate::zn::Modulus;

/// Masses of the `N − 1` nonzero charges. Index 0 is the vacuum and costs 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassVector<T> {
    masses: Vec<T>,
}

impl<T: Real> MassVector<T> {
    /// `values[k - 1]` is the mass of charge `k`.
    pub fn new(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("mass vector is empty".into()));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > T::zero()) || !v.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "mass of charge {} is {v}, must be positive",
                k + 1
            )));
        }
        let mut masses = Vec::with_capacity(values.len() + 1);
        masses.push(T::zero());
        masses.extend_from_slice(values);
        Ok(Self { masses })
    }

    /// `J_k = light` for `k ∈ {1, N−1}` and `heavy` otherwise.
    pub fn light_heavy(n: u32, light: T, heavy: T) -> Result<Self> {
        let values: Vec<T> = (1..n)
            .map(|k| if k == 1 || k == n - 1 { light } else { heavy })
            .collect();
        Self::new(&values)
    }

    pub fn uniform(n: u32, mass: T) -> Result<Self> {
        Self::new(&vec![mass; n as usize - 1])
    }

    /// Number of charge values including the vacuum.
    pub fn modulus(&self) -> u32 {
        self.masses.len() as u32
    }

    #[inline]
    pub fn mass(&self, k: u8) -> T {
        self.masses[k as usize]
    }

    /// Masses of charges `1..N`.
    pub fn values(&self) -> &[T] {
        &self.masses[1..]
    }

    /// Cheapest pair creation on a defect-free edge: `min_a J[a] + J[N−a]`.
    pub fn pair_gap(&self) -> T {
        let n = self.masses.len();
        (1..n)
            .map(|a| self.masses[a] + self.masses[n - a])
            .fold(T::infinity(), T::min)
    }

    pub fn check_modulus(&self, n: u32) -> Result<()> {
        if self.modulus() != n {
            return Err(Error::InvalidParameter(format!(
                "mass vector has {} entries, expected N - 1 = {}",
                self.masses.len() - 1,
                n - 1
            )));
        }
        Ok(())
    }
}

/// Total energy `Σ_f J[q(f)]`.
pub fn energy<T: Real>(charges: &[u8], masses: &MassVector<T>) -> T {
    charges
        .iter()
        .filter(|&&k| k != 0)
        .map(|&k| masses.mass(k))
        .sum()
}

/// Energy released, `E_before − E_after`, when `X^a` acts on an edge whose
/// endpoint faces hold `q_from` and `q_to`.
#[inline]
pub fn delta_energy_local<T: Real>(
    z: Modulus,
    edge: &Edge,
    q_from: u8,
    q_to: u8,
    a: u8,
    masses: &MassVector<T>,
) -> T {
    let new_from = z.add(q_from, z.mul(edge.w_from, a));
    let new_to = z.add(q_to, z.mul(edge.w_to, a));
    (masses.mass(q_from) + masses.mass(q_to)) - (masses.mass(new_from) + masses.mass(new_to))
}

/// `ω` for applying `X^a` on `edge` to `state`. Positive when energy is
/// released to the bath.
pub fn delta_energy<T: Real>(
    state: &ErrorState,
    lat: &Lattice,
    edge: usize,
    a: u8,
    masses: &MassVector<T>,
) -> T {
    let e = lat.edge(edge);
    delta_energy_local(
        lat.modulus(),
        e,
        state.charge(e.from),
        state.charge(e.to),
        a,
        masses,
    )
}

/// Running total energy, updated from face changes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergySnapshot<T> {
    pub total: T,
}

impl<T: Real> EnergySnapshot<T> {
    pub fn of(state: &ErrorState, masses: &MassVector<T>) -> Self {
        Self {
            total: energy(state.charges(), masses),
        }
    }

    #[inline]
    pub fn apply(&mut self, changes: &[FaceChange], masses: &MassVector<T>) {
        for c in changes {
            self.total = self.total - masses.mass(c.old) + masses.mass(c.new);
        }
    }
}
