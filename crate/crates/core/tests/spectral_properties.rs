use std::f64::consts::PI;

use lcesim::timestepper::cfl_dt;
use lcesim::{Grid, ScalarField, Spectral, VectorField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(dim: usize, n: usize) -> Grid {
    Grid::new(dim, 2.0 * PI, n).unwrap()
}

fn random_field(g: Grid, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField::from_vec(g, (0..g.num_points()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_vector(g: Grid, seed: u64) -> VectorField {
    let mut v = VectorField(std::array::from_fn(|a| {
        random_field(g, seed.wrapping_mul(3).wrapping_add(a as u64))
    }));
    if g.dim() == 2 {
        v.0[2] = ScalarField::zeros(g);
    }
    v
}

fn vinner(a: &VectorField, b: &VectorField) -> f64 {
    (0..3).map(|i| a.0[i].inner(&b.0[i])).sum()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![Just((2, 8)), Just((2, 16)), Just((3, 8)), Just((3, 16))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_round_trip((dim, n) in dims(), seed in any::<u64>()) {
        let g = grid(dim, n);
        let sp = Spectral::new(g);
        let f = random_field(g, seed);
        let back = sp.backward(&sp.forward(&f).unwrap());
        prop_assert!(back.sub(&f).max_abs() < 1e-13);
    }

    #[test]
    fn parseval((dim, n) in dims(), seed in any::<u64>()) {
        let g = grid(dim, n);
        let sp = Spectral::new(g);
        let f = random_field(g, seed);
        let physical = f.inner(&f);
        let spectral = sp.spectral_energy(&sp.forward(&f).unwrap());
        prop_assert!((physical - spectral).abs() <= 1e-12 * physical);
    }

    #[test]
    fn leray_is_an_orthogonal_projector((dim, n) in dims(), seed in any::<u64>()) {
        let g = grid(dim, n);
        let sp = Spectral::new(g);
        let v = random_vector(g, seed);
        let w = random_vector(g, seed ^ 0x5555);
        let pv = sp.leray_project(&v);
        prop_assert!(sp.leray_project(&pv).sub(&pv).max_abs() < 1e-13);
        prop_assert!(sp.divergence(&pv).max_abs() < 1e-11);
        let pw = sp.leray_project(&w);
        let (a, b) = (vinner(&pv, &w), vinner(&v, &pw));
        prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn derivatives_commute((dim, n) in dims(), seed in any::<u64>()) {
        let g = grid(dim, n);
        let sp = Spectral::new(g);
        let f = sp.dealias_field(&random_field(g, seed));
        let ab = sp.derivative(&sp.derivative(&f, 0), 1);
        let ba = sp.derivative(&sp.derivative(&f, 1), 0);
        prop_assert!(ab.sub(&ba).max_abs() < 1e-11);
        let mut lap = ScalarField::zeros(g);
        for a in 0..dim {
            lap.axpy(1.0, &sp.derivative(&sp.derivative(&f, a), a));
        }
        prop_assert!(lap.sub(&sp.laplacian(&f)).max_abs() < 1e-10);
        prop_assert!(sp.curl(&sp.gradient(&f)).max_abs() < 1e-10);
    }

    #[test]
    fn wave_propagator_is_a_group((dim, n) in dims(), seed in any::<u64>(), t1 in 0.0..2.0f64, t2 in 0.0..2.0f64) {
        let g = grid(dim, n);
        let sp = Spectral::new(g);
        let f = sp.dealias_field(&random_field(g, seed));
        let v = sp.dealias_field(&random_field(g, !seed));
        let (a, b) = sp.wave_evolve(&f, &v, t1);
        let (a, b) = sp.wave_evolve(&a, &b, t2);
        let (c, d) = sp.wave_evolve(&f, &v, t1 + t2);
        prop_assert!(a.sub(&c).max_abs() < 1e-11);
        prop_assert!(b.sub(&d).max_abs() < 1e-11);
        let energy = |p: &ScalarField, q: &ScalarField| {
            let grad = sp.gradient(p);
            q.inner(q) + vinner(&grad, &grad)
        };
        let (e0, e1) = (energy(&f, &v), energy(&c, &d));
        prop_assert!((e0 - e1).abs() <= 1e-11 * e0);
    }

    #[test]
    fn cfl_step_shrinks_with_velocity(s in 0.0..10.0f64, extra in 0.0..10.0f64) {
        let g = grid(2, 16);
        let u = |m: f64| VectorField::from_fn(g, |x| [m * x[1].sin(), 0.0, 0.0]);
        prop_assert!(cfl_dt(&g, &u(s + extra), 0.4) <= cfl_dt(&g, &u(s), 0.4));
    }
}

#[test]
fn wave_propagator_matches_standing_wave() {
    let g = grid(3, 16);
    let sp = Spectral::new(g);
    let f = ScalarField::from_fn(g, |x| (3.0 * x[0]).sin() + 0.5);
    let v = ScalarField::from_fn(g, |x| (2.0 * x[1]).cos() + 0.25);
    let t = 0.7;
    let (a, b) = sp.wave_evolve(&f, &v, t);
    let want_a = ScalarField::from_fn(g, |x| {
        (3.0 * x[0]).sin() * (3.0 * t).cos() + 0.5 + (2.0 * x[1]).cos() * (2.0 * t).sin() / 2.0 + 0.25 * t
    });
    let want_b = ScalarField::from_fn(g, |x| {
        -3.0 * (3.0 * x[0]).sin() * (3.0 * t).sin() + (2.0 * x[1]).cos() * (2.0 * t).cos() + 0.25
    });
    assert!(a.sub(&want_a).max_abs() < 1e-13);
    assert!(b.sub(&want_b).max_abs() < 1e-13);
}
