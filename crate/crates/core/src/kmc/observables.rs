use crate::energy::{energy, MassVector};
use crate::lattice::{ErrorState, Lattice};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observables<T> {
    /// Total energy of the charges.
    pub total_mass: T,
    /// Mass-weighted mean torus distance of the charges from their
    /// mass-weighted centroid.
    pub spread: T,
}

/// Circular mean of positions on a ring of length `l`, weighted.
fn circular_mean<T: Real>(points: &[(T, T)], l: T) -> T {
    let scale = T::TAU() / l;
    let (s, c) = points.iter().fold((T::zero(), T::zero()), |(s, c), &(x, w)| {
        let (sin, cos) = (x * scale).sin_cos();
        (s + w * sin, c + w * cos)
    });
    if s == T::zero() && c == T::zero() {
        return T::zero();
    }
    let mean = s.atan2(c) / scale;
    if mean < T::zero() {
        mean + l
    } else {
        mean
    }
}

/// Minimal-image separation on a ring of length `l`.
fn ring_delta<T: Real>(a: T, b: T, l: T) -> T {
    let d = (a - b).abs() % l;
    d.min(l - d)
}

/// Total mass and spread. The centroid is taken per axis as a circular mean
/// so that clusters straddling the periodic boundary are handled; distances
/// are Euclidean minimal-image. Spread is 0 without charges.
pub fn observables<T: Real>(state: &ErrorState, lat: &Lattice, masses: &MassVector<T>) -> Observables<T> {
    let total_mass = energy(state.charges(), masses);
    if total_mass == T::zero() {
        return Observables {
            total_mass,
            spread: T::zero(),
        };
    }
    let l = T::of(lat.size() as f64);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (f, k) in state.charged_faces() {
        let (x, y) = lat.face_xy(f);
        let w = masses.mass(k);
        xs.push((T::of(x as f64), w));
        ys.push((T::of(y as f64), w));
    }
    let cx = circular_mean(&xs, l);
    let cy = circular_mean(&ys, l);
    let spread = xs
        .iter()
        .zip(&ys)
        .map(|(&(x, w), &(y, _))| {
            let dx = ring_delta(x, cx, l);
            let dy = ring_delta(y, cy, l);
            w * (dx * dx + dy * dy).sqrt()
        })
        .sum::<T>()
        / total_mass;
    Observables { total_mass, spread }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vacuum_is_zero() {
        let lat = Lattice::build(LatticeSpec::defect_free(5, 8)).unwrap();
        let j = MassVector::light_heavy(5, 0.4, 1.0).unwrap();
        let o = observables(&ErrorState::vacuum(&lat), &lat, &j);
        assert_eq!((o.total_mass, o.spread), (0.0, 0.0));
    }

    #[test]
    fn adjacent_pair() {
        let lat = Lattice::build(LatticeSpec::defect_free(5, 8)).unwrap();
        let j = MassVector::light_heavy(5, 0.4, 1.0).unwrap();
        let mut st = ErrorState::vacuum(&lat);
        st.apply_event(&lat, lat.x_edge(3, 2), 1);
        let o = observables(&st, &lat, &j);
        assert_abs_diff_eq!(o.total_mass, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(o.spread, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pair_across_the_boundary_uses_minimal_image() {
        let lat = Lattice::build(LatticeSpec::defect_free(5, 10)).unwrap();
        let j = MassVector::uniform(5, 1.0).unwrap();
        let mut st = ErrorState::vacuum(&lat);
        // charges at x = 9 and x = 1 (distance 2 through the boundary), y = 4
        let mut acc = vec![0u8; lat.num_edges()];
        lat.carry(lat.face_at(9, 4), &[crate::lattice::Step::PlusX; 2], 3, &mut acc);
        st.apply_powers(&lat, &acc);
        let o = observables(&st, &lat, &j);
        assert_abs_diff_eq!(o.spread, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn equal_charges_at_distance_d_have_spread_half_d() {
        let lat = Lattice::build(LatticeSpec::defect_free(5, 16)).unwrap();
        let j = MassVector::uniform(5, 1.0).unwrap();
        for d in 1..8usize {
            let mut st = ErrorState::vacuum(&lat);
            let mut acc = vec![0u8; lat.num_edges()];
            lat.carry(lat.face_at(2, 3), &vec![crate::lattice::Step::PlusY; d], 1, &mut acc);
            st.apply_powers(&lat, &acc);
            let o = observables(&st, &lat, &j);
            assert_abs_diff_eq!(o.spread, d as f64 / 2.0, epsilon = 1e-9);
        }
    }
}
