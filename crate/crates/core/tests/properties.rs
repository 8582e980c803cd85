use std::f64::consts::PI;

use gedanken::doppler::{collide_exact, conservation_residuals, infer_velocity, CollisionInput};
use gedanken::lattice::{make_grid, transform_1d, ComplexVector, Grid1D, Rep};
use gedanken::measurement::{conditional, joint_density, marginal, pointer_spectrum, Density};
use gedanken::states::{normalize, transform_axis, StateTensor, PARTICLE1, PARTICLE2};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Grid1D> {
    (prop::sample::select(vec![8usize, 16, 32, 64]), 1.0f64..40.0)
        .prop_map(|(n, l)| make_grid(n, l).unwrap())
}

fn vector(grid: &Grid1D, parts: &[(f64, f64)]) -> ComplexVector {
    let values = parts
        .iter()
        .map(|&(re, im)| Complex64::new(re, im))
        .collect();
    ComplexVector::new(grid.clone(), values, Rep::Position).unwrap()
}

fn grid_and_vector() -> impl Strategy<Value = (Grid1D, ComplexVector)> {
    grid_strategy().prop_flat_map(|g| {
        let n = g.n_points();
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
            .prop_map(move |p| (g.clone(), vector(&g, &p)))
    })
}

fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Plain sum of the discrete transform, used as the reference.
fn direct_sum(v: &ComplexVector) -> Vec<Complex64> {
    let g = &v.grid;
    let pre = g.spacing() / (2.0 * PI).sqrt();
    g.momenta()
        .iter()
        .map(|&k| {
            g.positions()
                .iter()
                .zip(&v.values)
                .map(|(&x, &a)| a * Complex64::from_polar(1.0, -k * x))
                .sum::<Complex64>()
                * pre
        })
        .collect()
}

fn random_state(grid: &Grid1D, parts: &[(f64, f64)]) -> StateTensor {
    let n = grid.n_points();
    let amps = ArrayD::from_shape_vec(
        IxDyn(&[n, n]),
        parts
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect(),
    )
    .unwrap();
    let st = StateTensor::new(
        grid.clone(),
        amps,
        vec![Rep::Position; 2],
        vec![PARTICLE1.into(), PARTICLE2.into()],
    )
    .unwrap();
    normalize(&st).unwrap()
}

fn pair_state() -> impl Strategy<Value = StateTensor> {
    (prop::sample::select(vec![8usize, 16]), 2.0f64..20.0).prop_flat_map(|(n, l)| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |p| random_state(&make_grid(n, l).unwrap(), &p))
    })
}

fn close(a: &Density, b: &Density, tol: f64) -> bool {
    a.values()
        .iter()
        .zip(b.values().iter())
        .all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #[test]
    fn transform_preserves_norm_and_inverts((_g, v) in grid_and_vector()) {
        let k = transform_1d(&v, Rep::Momentum);
        let scale = v.norm_sqr();
        prop_assert!((k.norm_sqr() - scale).abs() <= 1e-12 * scale);
        let back = transform_1d(&k, Rep::Position);
        let diff: Vec<Complex64> = back.values.iter().zip(&v.values).map(|(a, b)| a - b).collect();
        prop_assert!(max_abs(&diff) <= 1e-12 * max_abs(&v.values).max(1e-300));
    }

    #[test]
    fn transform_matches_direct_sum((_g, v) in grid_and_vector()) {
        let fast = transform_1d(&v, Rep::Momentum);
        let slow = direct_sum(&v);
        let diff: Vec<Complex64> = fast.values.iter().zip(&slow).map(|(a, b)| a - b).collect();
        prop_assert!(max_abs(&diff) <= 1e-12 * max_abs(&slow).max(1e-300));
    }

    #[test]
    fn inner_products_survive((g, v) in grid_and_vector(), seed in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
        let w = vector(&g, &seed[..g.n_points()]);
        let inner = |a: &ComplexVector, b: &ComplexVector| {
            a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum::<Complex64>() * a.grid.cell(a.rep)
        };
        let before = inner(&v, &w);
        let after = inner(&transform_1d(&v, Rep::Momentum), &transform_1d(&w, Rep::Momentum));
        prop_assert!((before - after).norm() <= 1e-12 * (v.norm_sqr() * w.norm_sqr()).sqrt());
    }

    #[test]
    fn lattice_shift_is_a_phase((g, v) in grid_and_vector(), steps in 0usize..64) {
        let n = g.n_points();
        let s = steps % n;
        let x0 = s as f64 * g.spacing();
        // psi(x - x0) on the periodic lattice
        let mut shifted = v.values.clone();
        shifted.rotate_right(s);
        let shifted = ComplexVector::new(g.clone(), shifted, Rep::Position).unwrap();
        let lhs = transform_1d(&shifted, Rep::Momentum);
        let rhs = transform_1d(&v, Rep::Momentum);
        let diff: Vec<Complex64> = g
            .momenta()
            .iter()
            .zip(lhs.values.iter().zip(&rhs.values))
            .map(|(&k, (a, b))| a - b * Complex64::from_polar(1.0, -k * x0))
            .collect();
        prop_assert!(max_abs(&diff) <= 1e-11 * max_abs(&rhs.values).max(1e-300));
    }

    #[test]
    fn axis_transforms_commute(st in pair_state()) {
        let a = transform_axis(&transform_axis(&st, PARTICLE1, Rep::Momentum).unwrap(), PARTICLE2, Rep::Momentum).unwrap();
        let b = transform_axis(&transform_axis(&st, PARTICLE2, Rep::Momentum).unwrap(), PARTICLE1, Rep::Momentum).unwrap();
        let diff = (a.amplitudes() - b.amplitudes()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12 * a.amplitudes().iter().map(|z| z.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn bob_cannot_see_alices_basis(st in pair_state(), bob in prop::sample::select(vec![Rep::Position, Rep::Momentum])) {
        let here = pointer_spectrum(&st, PARTICLE2, bob).unwrap();
        let rotated = transform_axis(&st, PARTICLE1, Rep::Momentum).unwrap();
        let there = pointer_spectrum(&rotated, PARTICLE2, bob).unwrap();
        prop_assert!(close(&here, &there, 1e-12 * here.values().iter().cloned().fold(0.0, f64::max)));
    }

    #[test]
    fn conditional_times_marginal_is_joint(st in pair_state(), pick in 0usize..16) {
        let joint = joint_density(&st, &[Rep::Position, Rep::Momentum]).unwrap();
        let alice = marginal(&joint, &[PARTICLE1]).unwrap();
        prop_assert!((alice.total() - 1.0).abs() < 1e-12);
        let n = joint.grid().n_points();
        let i = pick % n;
        let x = joint.coords(0)[i];
        let cond = conditional(&joint, PARTICLE1, x).unwrap();
        prop_assert!((cond.total() - 1.0).abs() < 1e-12);
        let pa = alice.values()[[i].as_slice()];
        for j in 0..n {
            let lhs = pa * cond.values()[[j].as_slice()];
            let rhs = joint.values()[[i, j].as_slice()];
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-12));
        }
    }

    #[test]
    fn collisions_conserve_and_invert(
        log_w in -3.0f64..0.0,
        v in -1e-3f64..1e-3,
        log_m in 3.0f64..12.0,
    ) {
        let input = CollisionInput::new(10f64.powf(log_w), v, 10f64.powf(log_m)).unwrap();
        let out = collide_exact(&input).unwrap();
        let (e, p) = conservation_residuals(&input, &out);
        prop_assert!(e < 1e-12 && p < 1e-12);
        let back = collide_exact(&CollisionInput::new(input.omega_in, infer_velocity(input.omega_in, out.omega_out, input.mass).unwrap(), input.mass).unwrap()).unwrap();
        prop_assert!((back.omega_out - out.omega_out).abs() <= 1e-10 * out.omega_out);
    }

    #[test]
    fn shift_decreases_with_velocity(
        log_w in -3.0f64..0.0,
        v in -1e-3f64..9e-4,
        dv in 1e-6f64..1e-4,
        log_m in 3.0f64..12.0,
    ) {
        let (w, m) = (10f64.powf(log_w), 10f64.powf(log_m));
        let a = collide_exact(&CollisionInput::new(w, v, m).unwrap()).unwrap();
        let b = collide_exact(&CollisionInput::new(w, v + dv, m).unwrap()).unwrap();
        prop_assert!(b.shift_exact < a.shift_exact);
    }
}
