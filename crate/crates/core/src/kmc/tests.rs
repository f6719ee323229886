use super::*;
use crate::lattice::{LatticeSpec, Step};
use approx::assert_relative_eq;

fn lattice(l: usize) -> Lattice {
    Lattice::build(LatticeSpec::defect_free(5, l)).unwrap()
}

fn grid(l: usize) -> Lattice {
    Lattice::build(LatticeSpec::with_gap_pattern(5, l, 2, &[1, 2])).unwrap()
}

fn masses() -> MassVector<f64> {
    MassVector::light_heavy(5, 0.38, 1.0).unwrap()
}

#[test]
fn vacuum_restricted_is_absorbing() {
    let lat = lattice(6);
    let d = Dynamics::new(&lat, masses(), 8.0, Mode::Restricted).unwrap();
    let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(1, 0, 0));
    assert_eq!(t.total_rate(), 0.0);
    assert_eq!(t.step(), StepOutcome::Absorbing);
    assert!(t.run_until(10.0, |_, _| panic!("no events expected")));
    assert_eq!(t.time(), 10.0);
}

#[test]
fn vacuum_full_rates_are_creation_rates() {
    let lat = lattice(4);
    let j = masses();
    let d = Dynamics::new(&lat, j.clone(), 2.0, Mode::Full).unwrap();
    let vac = ErrorState::vacuum(&lat);
    for e in 0..lat.num_edges() {
        for a in 1..5u8 {
            let gap = j.mass(a) + j.mass(5 - a);
            let want = davies_rate(-gap, 2.0).unwrap();
            assert_relative_eq!(d.rate(&vac, e, a), want, max_relative = 1e-14);
            assert_relative_eq!(d.omega(&vac, e, a), -gap, max_relative = 1e-14);
        }
    }
    assert_relative_eq!(
        d.index(&vac).total(),
        (0..lat.num_edges() * 4).map(|i| {
            let a = (i % 4) as u8 + 1;
            davies_rate(-(j.mass(a) + j.mass(5 - a)), 2.0).unwrap()
        }).sum::<f64>(),
        max_relative = 1e-12
    );
}

#[test]
fn hops_near_a_pair_outpace_creation() {
    let lat = lattice(8);
    let d = Dynamics::new(&lat, masses(), 8.0, Mode::Full).unwrap();
    let mut st = ErrorState::vacuum(&lat);
    st.apply_event(&lat, lat.x_edge(4, 4), 1);
    // moving the +1 charge one step further costs nothing
    let hop = d.rate(&st, lat.x_edge(5, 4), 1);
    let far = d.rate(&st, lat.x_edge(1, 1), 1);
    assert_relative_eq!(hop, 1.0 / 8.0, max_relative = 1e-12);
    assert!(hop > 50.0 * far);
}

#[test]
fn table_matches_direct_computation() {
    let lat = grid(6);
    let d = Dynamics::new(&lat, masses(), 3.0, Mode::Full).unwrap();
    let r = Dynamics::new(&lat, masses(), 3.0, Mode::Restricted).unwrap();
    let s = Dynamics::new(&lat, masses(), 3.0, Mode::RestrictedReversible).unwrap();
    let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(2, 0, 0));
    for _ in 0..500 {
        t.step();
        for e in 0..lat.num_edges() {
            for a in 1..5u8 {
                assert_eq!(d.rate(t.state(), e, a), d.rate_uncached(t.state(), e, a));
                assert_eq!(r.rate(t.state(), e, a), r.rate_uncached(t.state(), e, a));
                assert_eq!(s.rate(t.state(), e, a), s.rate_uncached(t.state(), e, a));
            }
        }
    }
}

#[test]
fn incremental_index_stays_coherent() {
    for lat in [lattice(2), lattice(8), grid(6)] {
        let d = Dynamics::new(&lat, masses(), 1.5, Mode::Full).unwrap();
        let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(3, 0, 0));
        for _ in 0..100_000 {
            t.step();
        }
        assert!(t.max_rate_cache_error() <= 1e-12, "{}", t.max_rate_cache_error());
        assert!(t.state().is_consistent(&lat));
        assert!(t.energy_drift() < 1e-9);
        let fresh = d.index(t.state()).total();
        assert_relative_eq!(t.total_rate(), fresh, max_relative = 1e-12);
    }
}

#[test]
fn trajectories_are_reproducible() {
    let lat = grid(6);
    let d = Dynamics::new(&lat, masses(), 4.0, Mode::Full).unwrap();
    let run = |seed| {
        let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(seed, 9, 4));
        let mut log = Vec::new();
        t.run_until(500.0, |r, _| log.push((r.edge, r.power, r.time.to_bits())));
        (log, t.state().clone())
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).0, run(6).0);
}

#[test]
fn checkpoint_resume_is_seamless() {
    let lat = lattice(6);
    let d = Dynamics::new(&lat, masses(), 3.0, Mode::Full).unwrap();
    let mut a = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(7, 0, 0));
    a.run_until(200.0, |_, _| {});
    let mut b = Trajectory::resume(&d, a.clone().checkpoint());
    a.run_until(400.0, |_, _| {});
    b.run_until(400.0, |_, _| {});
    assert_eq!(a.state(), b.state());
    assert_eq!(a.events(), b.events());
}

#[test]
fn restricted_pair_never_vanishes_or_creates() {
    let lat = lattice(8);
    let d = Dynamics::new(&lat, masses(), 2.0, Mode::Restricted).unwrap();
    for seed in 0..20 {
        let mut st = ErrorState::vacuum(&lat);
        st.apply_event(&lat, lat.x_edge(3, 3), 1);
        let mut t = Trajectory::new(&d, st, trial_rng(seed, 1, 0));
        let absorbed = t.run_until(300.0, |_, s| assert!(!s.is_vacuum()));
        assert!(!absorbed);
        assert_eq!(t.creations(), 0);
        assert!(t.events() > 0);
    }
}

#[test]
fn reversible_restriction_is_symmetric() {
    // an allowed event's inverse is allowed from the resulting state
    let lat = grid(6);
    let d = Dynamics::new(&lat, masses(), 2.0, Mode::RestrictedReversible).unwrap();
    let mut st = ErrorState::vacuum(&lat);
    st.apply_event(&lat, lat.y_edge(1, 1), 2);
    let mut rng = trial_rng(11, 0, 1);
    for _ in 0..2000 {
        let e = rng.random_range(0..lat.num_edges());
        let a = rng.random_range(1..5u8);
        if d.rate(&st, e, a) > 0.0 {
            let mut next = st.clone();
            next.apply_event(&lat, e, a);
            assert!(d.rate(&next, e, 5 - a) > 0.0);
            st = next;
        }
    }
}

#[test]
fn restricted_pair_without_grid_keeps_its_charges() {
    let lat = lattice(8);
    let j = MassVector::light_heavy(5, 0.4, 1.0).unwrap();
    // converting the pair to heavy charges costs 1.2 and is rare at beta = 8
    let d = Dynamics::new(&lat, j, 8.0, Mode::Restricted).unwrap();
    let mut st = ErrorState::vacuum(&lat);
    st.apply_event(&lat, lat.x_edge(3, 3), 1);
    let mut t = Trajectory::new(&d, st, trial_rng(31, 0, 0));
    t.run_until(2000.0, |_, s| assert_eq!(s.charged_faces().count(), 2));
    assert!(t.events() > 100);
    assert_relative_eq!(t.energy(), 0.8, max_relative = 1e-9);
}

#[test]
fn restricted_grid_lets_heavy_charges_decay() {
    let lat = grid(6);
    let j = MassVector::light_heavy(5, 0.4, 1.0).unwrap();
    let d = Dynamics::new(&lat, j, 4.0, Mode::Restricted).unwrap();
    let mut grew = false;
    for seed in 0..20 {
        let mut st = ErrorState::vacuum(&lat);
        st.apply_event(&lat, lat.x_edge(2, 0), 1);
        let mut t = Trajectory::new(&d, st, trial_rng(37, seed, 0));
        t.run_until(500.0, |_, s| grew |= s.charged_faces().count() > 2);
        assert!(!t.state().is_vacuum());
    }
    assert!(grew);
}

#[test]
fn restriction_table() {
    let r = Mode::Restricted;
    // creation from vacuum and annihilation into vacuum
    assert!(!r.allows((0, 0), (4, 1), -0.8));
    assert!(!r.allows((4, 1), (0, 0), 0.8));
    // hop, exothermic decay, fusion
    assert!(r.allows((1, 0), (0, 1), 0.0));
    assert!(r.allows((2, 0), (1, 1), 0.2));
    assert!(r.allows((1, 1), (2, 0), -0.2));
    // a light charge splitting
    assert!(!r.allows((1, 0), (4, 2), -1.0));
    assert!(Mode::RestrictedReversible.allows((1, 0), (4, 2), -1.0));
    assert!(Mode::Full.allows((0, 0), (4, 1), -0.8));
}

#[test]
fn mean_waiting_time_matches_total_rate() {
    let lat = lattice(4);
    let d = Dynamics::new(&lat, masses(), 1.0, Mode::Full).unwrap();
    let st = ErrorState::vacuum(&lat);
    let total = d.index(&st).total();
    let n = 20_000;
    let mut sum = 0.0;
    for i in 0..n {
        let mut t = Trajectory::new(&d, st.clone(), trial_rng(13, 0, i));
        match t.step() {
            StepOutcome::Event(r) => sum += r.time,
            StepOutcome::Absorbing => unreachable!(),
        }
    }
    let mean = sum / n as f64;
    // exponential: relative standard error 1/sqrt(n)
    assert!((mean * total - 1.0).abs() < 5.0 / (n as f64).sqrt());
}

#[test]
fn event_selection_follows_rates() {
    let lat = lattice(2);
    let j = masses();
    let d = Dynamics::new(&lat, j, 1.0, Mode::Full).unwrap();
    let mut st = ErrorState::vacuum(&lat);
    let mut acc = vec![0u8; lat.num_edges()];
    lat.carry(0, &[Step::PlusX], 1, &mut acc);
    st.apply_powers(&lat, &acc);
    let idx = d.index(&st);
    let total = idx.total();
    let n = 40_000u64;
    let mut counts = vec![0u64; d.num_events()];
    for i in 0..n {
        let mut t = Trajectory::new(&d, st.clone(), trial_rng(17, 0, i));
        if let StepOutcome::Event(r) = t.step() {
            counts[r.edge * 4 + r.power as usize - 1] += 1;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = idx.get(k) / total;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - p).abs() < 5.0 * sd + 1e-12, "event {k}");
    }
}

#[test]
fn event_log_writes_rows() {
    let lat = lattice(4);
    let d = Dynamics::new(&lat, masses(), 1.0, Mode::Full).unwrap();
    let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(19, 0, 0));
    let mut buf = Vec::new();
    {
        let mut log = EventLog::new(&mut buf).unwrap();
        t.run_until(5.0, |r, _| log.record(r).unwrap());
        log.finish().unwrap();
    }
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time,edge,power,omega\n"));
    assert_eq!(text.lines().count() as u64, t.events() + 1);
}

#[test]
fn observables_follow_the_trajectory() {
    let lat = lattice(8);
    let j = masses();
    let d = Dynamics::new(&lat, j.clone(), 8.0, Mode::Restricted).unwrap();
    let mut st = ErrorState::vacuum(&lat);
    st.apply_event(&lat, lat.x_edge(2, 2), 1);
    let t = Trajectory::new(&d, st, trial_rng(23, 0, 0));
    let o = t.observables();
    assert_relative_eq!(o.total_mass, 0.76, max_relative = 1e-12);
    assert_relative_eq!(o.spread, 0.5, max_relative = 1e-12);
    assert_relative_eq!(t.energy(), 0.76, max_relative = 1e-12);
}

#[test]
fn invalid_temperature_rejected() {
    let lat = lattice(4);
    assert!(Dynamics::new(&lat, masses(), -1.0, Mode::Full).is_err());
    assert!(Dynamics::new(&lat, masses(), f64::NAN, Mode::Full).is_err());
    let wrong = MassVector::uniform(7, 1.0).unwrap();
    assert!(Dynamics::new(&lat, wrong, 1.0, Mode::Full).is_err());
}

#[test]
fn f32_dynamics_run() {
    let lat = lattice(4);
    let j = MassVector::<f32>::light_heavy(5, 0.38, 1.0).unwrap();
    let d = Dynamics::new(&lat, j, 2.0f32, Mode::Full).unwrap();
    let mut t = Trajectory::new(&d, ErrorState::vacuum(&lat), trial_rng(29, 0, 0));
    t.run_until(100.0, |_, _| {});
    assert!(t.state().is_consistent(&lat));
}
