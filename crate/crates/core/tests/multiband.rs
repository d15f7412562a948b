use bicforge_core::bic::{self, Tolerances, Verdict};
use bicforge_core::linalg::cr;
use bicforge_core::lippmann::{self, FindOptions, Setup};
use bicforge_core::*;

fn sech2(grid: &Grid) -> PotentialSpec {
    let values = grid.points().into_iter().map(|x| -1.0 / x.cosh().powi(2)).collect();
    PotentialSpec::Tabulated { grid: grid.clone(), values }
}

fn three_band(t: f64) -> BandModel {
    let a0 = linalg::from_rows(&[
        &[cr(1.0), cr(t), cr(0.0)],
        &[cr(t), cr(0.0), cr(0.0)],
        &[cr(0.0), cr(0.0), cr(2.0)],
    ]);
    BandModel::new(1.0, a0, linalg::zeros(3, 3), linalg::real_diag(&[1.0, 0.0, 0.0])).unwrap()
}

#[test]
fn decoupled_channel_bound_state_is_exact_bic() {
    let grid = Grid::symmetric(40.0, 2048).unwrap();
    let model = three_band(0.0);
    let state = SpinorField::from_fn(grid.clone(), 3, |x| vec![cr(1.0 / x.cosh()), cr(0.0), cr(0.0)]).unwrap();
    let zero = PotentialSpec::Delta { lambda: 0.0 };
    let report = bic::multiband_criterion(
        &model,
        0.5,
        &state,
        vec![sech2(&grid), zero.clone(), zero],
        &Tolerances::default(),
    )
    .unwrap();
    assert_eq!(report.region, RegionTag::Mixed);
    assert_eq!(report.real_poles.len(), 2);
    assert_eq!(report.max_residual_rel, 0.0);
    assert!(report.tail_rel < 1e-3);
    assert_eq!(report.verdict, Verdict::ExactBic);
    assert!(bic::multiband_criterion(&model, 0.5, &state, vec![sech2(&grid)], &Tolerances::default()).is_err());
}

#[test]
fn interchannel_coupling_gives_quasi_bic() {
    let grid = Grid::symmetric(40.0, 2048).unwrap();
    let model = three_band(0.2);
    let coupling = Coupling::scalar(sech2(&grid), linalg::real_diag(&[1.0, 0.0, 0.0]));
    let setup = Setup::with_coupling(model.clone(), coupling, grid).unwrap();
    let sols = lippmann::find_energy(&setup, 0.1, 0.95, &FindOptions::default()).unwrap();
    let sol = sols
        .iter()
        .min_by(|a, b| (a.energy - 0.5).abs().total_cmp(&(b.energy - 0.5).abs()))
        .unwrap();
    assert!((sol.energy - 0.5).abs() < 0.1, "{}", sol.energy);
    let report = bic::classify_solution(&setup, sol, &Tolerances::default()).unwrap();
    assert_eq!(report.verdict, Verdict::QuasiBic);
    assert!(report.max_residual_rel > 1e-3 && report.tail_rel > 1e-3);
}

#[test]
fn solved_delta_states() {
    let b = linalg::real_diag(&[1.0, 0.0]);
    let model = BandModel::two_band(0.0, 1.0, b.clone(), 1.0).unwrap();
    let setup = Setup::new(model, PotentialSpec::Delta { lambda: -1.0 }, Grid::symmetric(30.0, 2048).unwrap())
        .unwrap();
    let sols = lippmann::find_energy(&setup, -0.99, 0.99, &FindOptions::default()).unwrap();
    assert_eq!(sols.len(), 1);
    assert!((sols[0].energy - 0.875).abs() < 1e-3);
    let report = bic::classify_solution(&setup, &sols[0], &Tolerances::default()).unwrap();
    assert_eq!(report.verdict, Verdict::QuasiBic);

    let single = BandModel::single_band(1.0, 1.0).unwrap();
    let setup = Setup::new(single, PotentialSpec::Delta { lambda: -1.0 }, Grid::symmetric(40.0, 2048).unwrap())
        .unwrap();
    let sol = lippmann::solve_state(&setup, -0.5).unwrap();
    let report = bic::classify_solution(&setup, &sol, &Tolerances::default()).unwrap();
    assert_eq!(report.verdict, Verdict::ConventionalBound);
    assert!(report.real_poles.is_empty());
}
