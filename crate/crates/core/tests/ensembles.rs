use coupling_geometry::ensembles::{
    entropy_profile, entropy_profile_with_budget, generate_ensemble, ks_uniform_distance, run_test,
    statistic_profile, DistributionSummary, EnsembleSpec, Statistic,
};
use coupling_geometry::geometry::{compute_geometry, GeometryParams};
use coupling_geometry::model::{BinaryMatrix, BlockGrid, CouplingGeometry};
use coupling_geometry::samplers::{block_margins, SamplerKind};
use coupling_geometry::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, fill: f64, seed: u64) -> BinaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<Vec<u8>> = (0..rows)
        .map(|_| (0..cols).map(|_| u8::from(rng.gen_bool(fill))).collect())
        .collect();
    BinaryMatrix::from_rows(&cells).unwrap()
}

/// Row i holds roughly `cols - i * slope` leading ones, with noise.
fn noisy_staircase(rows: usize, cols: usize, seed: u64) -> BinaryMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells: Vec<Vec<u8>> = (0..rows)
        .map(|i| {
            let reach = cols as f64 * (1.0 - i as f64 / rows as f64);
            (0..cols)
                .map(|j| {
                    let inside = (j as f64) < reach;
                    u8::from(inside ^ rng.gen_bool(0.08))
                })
                .collect()
        })
        .collect();
    BinaryMatrix::from_rows(&cells).unwrap()
}

fn quick_geometry(matrix: &BinaryMatrix) -> CouplingGeometry {
    let params = GeometryParams {
        anneal_steps: 3_000,
        max_iterations: 4,
        ..GeometryParams::with_seed(5)
    };
    compute_geometry(matrix, &params).unwrap()
}

#[test]
fn members_keep_block_margins_and_are_reproducible() {
    let m = noisy_staircase(12, 14, 1);
    let g = quick_geometry(&m);
    let grid = g.finest_grid.clone();
    let spec = EnsembleSpec::exact(Some(grid.clone()), 20, 42);
    let a: Vec<BinaryMatrix> = generate_ensemble(&m, &spec).map(Result::unwrap).collect();
    let b: Vec<BinaryMatrix> = generate_ensemble(&m, &spec).map(Result::unwrap).collect();
    assert_eq!(a.len(), 20);
    assert_eq!(a, b);
    for s in &a {
        for rg in &grid.row_groups {
            for cg in &grid.col_groups {
                assert_eq!(block_margins(s, rg, cg), block_margins(&m, rg, cg));
            }
        }
    }
}

#[test]
fn saturated_grid_returns_the_original() {
    let m = random_matrix(6, 7, 0.5, 3);
    let grid = BlockGrid::new((0..6).map(|i| vec![i]).collect(), (0..7).map(|j| vec![j]).collect()).unwrap();
    let spec = EnsembleSpec::exact(Some(grid.clone()), 1, 9);
    let out: Vec<_> = generate_ensemble(&m, &spec).collect();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].as_ref().unwrap(), &m);
    let e = entropy_profile(&m, &[grid]).unwrap();
    assert_eq!(e[0].log10_size, Some(0.0));
    assert_eq!(e[0].count.as_deref(), Some("1"));
}

#[test]
fn budget_failure_is_an_explicit_marker() {
    let m = random_matrix(20, 20, 0.5, 4);
    let spec = EnsembleSpec {
        state_budget: 1_000,
        ..EnsembleSpec::exact(None, 5, 1)
    };
    let out: Vec<_> = generate_ensemble(&m, &spec).collect();
    assert_eq!(out.len(), 1);
    assert!(matches!(out[0], Err(Error::BudgetExceeded { .. })));

    let e = entropy_profile_with_budget(&m, &[BlockGrid::whole(20, 20)], 1_000).unwrap();
    assert!(e[0].log10_size.is_none());
    assert!(e[0].error.is_some());
}

#[test]
fn invalid_specs_are_rejected() {
    let m = random_matrix(5, 5, 0.5, 5);
    let zero = EnsembleSpec::exact(None, 0, 1);
    assert!(matches!(generate_ensemble(&m, &zero).next(), Some(Err(Error::Argument(_)))));
    let wrong = EnsembleSpec::exact(Some(BlockGrid::whole(4, 5)), 3, 1);
    assert!(generate_ensemble(&m, &wrong).next().unwrap().is_err());
}

#[test]
fn chain_ensembles_keep_margins() {
    let m = random_matrix(10, 12, 0.4, 6);
    for sampler in [SamplerKind::Checkerboard, SamplerKind::Curveball] {
        let spec = EnsembleSpec {
            sampler,
            burn_in: 200,
            thin: 10,
            ..EnsembleSpec::exact(None, 15, 2)
        };
        let out: Vec<_> = generate_ensemble(&m, &spec).map(Result::unwrap).collect();
        assert_eq!(out.len(), 15);
        let whole: Vec<usize> = (0..10).collect();
        let cols: Vec<usize> = (0..12).collect();
        for s in &out {
            assert_eq!(block_margins(s, &whole, &cols), block_margins(&m, &whole, &cols));
        }
    }
}

#[test]
fn entropy_is_monotone_from_finest_to_coarsest() {
    let m = noisy_staircase(14, 16, 7);
    let g = quick_geometry(&m);
    let grids = g.grid_series();
    let e = entropy_profile(&m, &grids).unwrap();
    let logs: Vec<f64> = e.iter().map(|x| x.log10_size.unwrap()).collect();
    assert!(logs.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{logs:?}");
}

#[test]
fn ncg_is_a_singleton_on_the_finest_grid() {
    let m = noisy_staircase(12, 12, 8);
    let g = quick_geometry(&m);
    let spec = EnsembleSpec::exact(None, 40, 11);
    let grids = vec![g.finest_grid.clone(), g.coarsest_grid()];
    let prof = statistic_profile(&m, &g, &grids, Statistic::Ncg, &spec).unwrap();
    assert_eq!(prof.len(), 2);
    assert!(prof[0].is_singleton());
    assert_eq!(prof[0].std, 0.0);
    assert!(prof.iter().all(|p| p.values.len() == 40));
    let again = statistic_profile(&m, &g, &grids, Statistic::Ncg, &spec).unwrap();
    assert_eq!(prof, again);
}

#[test]
fn summaries_recompute_from_raw_values() {
    let m = noisy_staircase(10, 10, 9);
    let g = quick_geometry(&m);
    let spec = EnsembleSpec::exact(None, 60, 12);
    for st in Statistic::ALL {
        let prof = statistic_profile(&m, &g, &[g.coarsest_grid()], st, &spec).unwrap();
        let s = &prof[0];
        let again = DistributionSummary::from_values(&s.statistic, s.values.clone()).unwrap();
        assert_eq!(s, &again);
        for &(p, q) in &s.quantiles {
            assert_eq!(q, s.quantile(p));
        }
    }
}

#[test]
fn efficient_statistic_yields_one_p_value() {
    let m = noisy_staircase(12, 12, 10);
    let g = quick_geometry(&m);
    let null = EnsembleSpec::exact(None, 200, 1);
    let alt = EnsembleSpec::exact(Some(g.finest_grid.clone()), 20, 2);
    let r = run_test(&m, &g, Statistic::Ncg, &null, &alt).unwrap();
    assert!(r.efficient);
    assert!(r.p_value.is_some() && r.p_value_distribution.is_none());
    assert!(r.p_value.unwrap() < 0.05, "{:?}", r.p_value);

    let r = run_test(&m, &g, Statistic::NPlus, &null, &alt).unwrap();
    assert_eq!(r.efficient, r.p_value.is_some());
    assert_eq!(!r.efficient, r.p_value_distribution.is_some());

    // null must be coarser than the alternative
    assert!(run_test(&m, &g, Statistic::Ncg, &alt, &null).is_err());
}

#[test]
fn identical_specs_give_roughly_uniform_p_values() {
    let m = random_matrix(12, 12, 0.5, 13);
    let g = quick_geometry(&m);
    let null = EnsembleSpec::exact(None, 2_000, 21);
    let alt = null.with_seed(22);
    let r = run_test(&m, &g, Statistic::Ncg, &null, &alt).unwrap();
    let ps = r.p_value_distribution.expect("not a singleton");
    let d = ks_uniform_distance(&ps.values);
    assert!(d < 0.08, "KS distance {d}");
}
