use dynsub_core::linalg::generalized_symmetric_eigen;
use dynsub_core::metrics::{mac, trajectory_mse};
use dynsub_core::model::{
    finite_difference_tangent, restoring_force, tangent_at_zero, FirstOrderModel, StateVector,
    Substructure, FD_STEP,
};
use dynsub_core::models::{chain, ChainSpec};
use dynsub_core::reduction::reduce;
use dynsub_core::{LinearSubstructure, NonlinearSubstructure, SuspensionElement};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Grounded chain with randomized masses and springs.
fn random_chain(masses: &[f64], springs: &[f64]) -> LinearSubstructure {
    let n = masses.len();
    let m = DMatrix::from_diagonal(&DVector::from_column_slice(masses));
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] += springs[i];
        if i > 0 {
            k[(i - 1, i - 1)] += springs[i];
            k[(i - 1, i)] -= springs[i];
            k[(i, i - 1)] -= springs[i];
        }
    }
    let c = &k * 1e-3;
    LinearSubstructure::new(
        m,
        Some(c),
        k,
        dynsub_core::DofPartition::from_boundary(n, vec![n - 1]).unwrap(),
    )
    .unwrap()
}

fn chain_params() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(0.2f64..5.0, n),
            prop::collection::vec(10.0f64..1000.0, n),
        )
    })
}

fn element() -> impl Strategy<Value = SuspensionElement> {
    (0.05f64..1.0, 1.0f64..100.0, 0.0f64..2.0, 0.0f64..20.0, 0.1f64..2.0).prop_map(
        |(mass, k1, c1, c2, c3)| SuspensionElement {
            mass,
            k1,
            c1,
            c2,
            c3,
            ..SuspensionElement::reference(0)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_restoring_is_tangent_times_state(
        (masses, springs) in chain_params(),
        seed in prop::collection::vec(-1.0f64..1.0, 20),
    ) {
        let sub: Substructure = random_chain(&masses, &springs).into();
        let n = sub.dofs();
        let y = StateVector::from_values(seed.iter().cycle().take(2 * n).copied().collect()).unwrap();
        let r = restoring_force(&sub, &y).unwrap();
        let r0 = tangent_at_zero(&sub) * DVector::from_column_slice(y.as_slice());
        for (a, b) in r.iter().zip(r0.iter()) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn suspension_tangent_matches_finite_differences(e in element(), relative in any::<bool>()) {
        let sub: Substructure = NonlinearSubstructure::new(vec![e, e], relative).unwrap().into();
        let analytic = sub.tangent_at_zero();
        let fd = finite_difference_tangent(&sub, &StateVector::zeros(4), FD_STEP);
        let scale = analytic.damping.amax().max(analytic.stiffness.amax());
        prop_assert!((fd.stiffness - &analytic.stiffness).amax() <= 1e-6 * scale);
        prop_assert!((fd.damping - &analytic.damping).amax() <= 1e-6 * scale);
    }

    #[test]
    fn damper_law_is_odd_monotone_and_bounded(
        e in element(),
        a in -50.0f64..50.0,
        b in -50.0f64..50.0,
    ) {
        prop_assert_eq!(e.damper_force(-a), -e.damper_force(a));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(e.damper_force(lo) <= e.damper_force(hi));
        prop_assert!((e.damper_force(a) - e.c1 * a).abs() < e.c2.max(f64::MIN_POSITIVE));
        prop_assert_eq!(e.spring_force(a), e.k1 * a);
    }

    #[test]
    fn mac_is_scale_invariant_and_symmetric(
        a in prop::collection::vec(-1.0f64..1.0, 12),
        b in prop::collection::vec(-1.0f64..1.0, 12),
        sa in prop::sample::select(vec![-3.0, -0.5, 0.25, 7.0]),
        sb in prop::sample::select(vec![-2.0, 0.1, 4.0]),
    ) {
        let ma = DMatrix::from_column_slice(6, 2, &a);
        let mb = DMatrix::from_column_slice(6, 2, &b);
        prop_assume!(ma.column_iter().chain(mb.column_iter()).all(|c| c.norm() > 1e-3));
        let base = mac(&ma, &mb).unwrap().values;
        let scaled = mac(&(&ma * sa), &(&mb * sb)).unwrap().values;
        prop_assert!((&base - &scaled).amax() < 1e-12);
        let swapped = mac(&mb, &ma).unwrap().values;
        prop_assert!((&base - swapped.transpose()).amax() < 1e-15);
        prop_assert!(base.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn mse_is_nonnegative_and_zero_on_identity(
        a in prop::collection::vec(-10.0f64..10.0, 1..40),
        shift in -1.0f64..1.0,
    ) {
        prop_assert_eq!(trajectory_mse(&a, &a).unwrap().mse, 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + shift).collect();
        let m = trajectory_mse(&b, &a).unwrap();
        prop_assert!(m.mse >= 0.0 && m.relative >= 0.0);
    }

    #[test]
    fn reduced_frequencies_bound_full_and_improve_with_modes((masses, springs) in chain_params()) {
        let sub = random_chain(&masses, &springs);
        let full = generalized_symmetric_eigen(sub.stiffness(), sub.mass()).unwrap().frequencies();
        let internal = sub.partition().internal().len();
        let mut previous: Option<Vec<f64>> = None;
        for r in 1..=internal {
            let red = reduce(&sub, r).unwrap();
            // Positive-definite reduced mass.
            prop_assert!(red.reduced_mass.clone().cholesky().is_some());
            let freqs = generalized_symmetric_eigen(&red.reduced_stiffness, &red.reduced_mass)
                .unwrap()
                .frequencies();
            for (fr, ff) in freqs.iter().zip(&full) {
                prop_assert!(*fr >= ff * (1.0 - 1e-9));
            }
            if let Some(prev) = &previous {
                for (now, before) in freqs.iter().zip(prev) {
                    prop_assert!(*now <= before * (1.0 + 1e-9));
                }
            }
            previous = Some(freqs);
        }
    }

    #[test]
    fn eigenpairs_satisfy_the_residual_contract((masses, springs) in chain_params()) {
        let sub = random_chain(&masses, &springs);
        let (k, m) = (sub.stiffness(), sub.mass());
        let eig = generalized_symmetric_eigen(k, m).unwrap();
        for (i, lambda) in eig.values.iter().enumerate() {
            let phi = eig.vectors.column(i);
            let res = (k * phi - m * phi * *lambda).norm();
            prop_assert!(res <= 1e-8 * k.norm() * phi.norm());
            let gen_norm = (phi.transpose() * m * phi)[(0, 0)];
            prop_assert!((gen_norm - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn full_basis_preserves_boundary_receptance() {
    let sub = chain(&ChainSpec::new(7, 1.0, 300.0, 0.0), vec![2, 6]).unwrap();
    let red = reduce(&sub, sub.partition().internal().len()).unwrap();
    let boundary = sub.partition().boundary().to_vec();
    let idx: Vec<usize> = boundary.iter().map(|&d| red.reduced_index_of(d).unwrap()).collect();
    for omega in [0.5, 3.0, 11.0, 40.0] {
        let h_full = (sub.stiffness() - sub.mass() * omega * omega).try_inverse().unwrap();
        let h_red = (&red.reduced_stiffness - &red.reduced_mass * omega * omega)
            .try_inverse()
            .unwrap();
        for (a, &da) in boundary.iter().enumerate() {
            for (b, &db) in boundary.iter().enumerate() {
                let (x, y) = (h_full[(da, db)], h_red[(idx[a], idx[b])]);
                assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-12), "omega {omega}");
            }
        }
    }
}

#[test]
fn projection_recovers_expanded_states() {
    let sub = chain(&ChainSpec::new(9, 1.5, 200.0, 0.0), vec![0, 8]).unwrap();
    let red = reduce(&sub, 3).unwrap();
    let q: Vec<f64> = (0..red.reduced_dofs()).map(|i| (i as f64 + 1.0).sqrt()).collect();
    let x = red.expand(&q).unwrap();
    let back = red.project(&x, sub.mass()).unwrap();
    for (a, b) in q.iter().zip(&back) {
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }
}
