use std::path::Path;

use bicforge_core::bic::{self, BicReport, ScanPoint, ScanRow, Tolerances, Verdict};
use bicforge_core::delta::{self, DeltaSolution};
use bicforge_core::green::{self, GreenKernel};
use bicforge_core::linalg::{self, c64};
use bicforge_core::lippmann::{self, FindOptions, SolveSummary};
use bicforge_core::oracle::{self, LocalizationMetrics};
use bicforge_core::potential::e_bic_analytic;
use bicforge_core::{spectral, BandModel, Error, PoleLabel};
use serde::Serialize;

use crate::args::{DeltaArgs, KernelArgs, ModelKind, OracleArgs, ScanArgs, TolArgs, VerifyArgs};
use crate::output::{num, opt, Table};
use crate::problem::{self, general_matrix, Family, Problem};
use crate::CliError;

/// A rendered command result: the serializable report, its flat table and
/// whether the run counts as a failed check.
pub struct Outcome<T> {
    pub report: T,
    pub table: Table,
    pub check_failed: bool,
}

fn tolerances(t: &TolArgs) -> Tolerances {
    Tolerances { tol_bic: t.tol_bic, tol_tail: t.tol_tail, ..Tolerances::default() }
}

#[derive(Debug, Serialize)]
pub struct PoleRow {
    pub re: f64,
    pub im: f64,
    pub label: PoleLabel,
}

fn pole_rows(model: &BandModel, energy: f64) -> Result<Vec<PoleRow>, CliError> {
    let set = spectral::poles(model, energy)?;
    Ok(set
        .roots
        .iter()
        .zip(&set.labels)
        .map(|(p, l)| PoleRow { re: p.re, im: p.im, label: *l })
        .collect())
}

fn write_side(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
pub struct DeltaReport {
    pub model: &'static str,
    pub mass: f64,
    pub e_b: f64,
    pub kappa: f64,
    pub p_real: f64,
    pub lambda_c: Option<f64>,
    pub in_gap: Option<bool>,
    /// Single-exponential energy expression; differs from `e_b` below the critical coupling.
    pub formula_energy: Option<f64>,
    pub ratio: Option<f64>,
    pub closed_form_ratio: Option<f64>,
    pub amp_loc: f64,
    pub amp_ext: f64,
    pub verdict: Verdict,
    pub boundary_residual: f64,
    pub bare_extended_residual: Option<f64>,
    pub poles: Vec<PoleRow>,
}

pub fn delta_bound(args: &DeltaArgs) -> Result<Outcome<DeltaReport>, CliError> {
    let p = Problem::resolve(&args.model, ModelKind::SingleBand)?;
    let m = p.mass;
    let s = p.scale;
    let (sol, b, lambda_c, in_gap, formula, ratio, closed_form): (DeltaSolution, _, _, _, _, _, _) = match p.family {
        Family::SingleBand { lambda } => {
            let sol = delta::single_band_bound(lambda * s, m)?;
            (sol, linalg::real_diag(&[lambda * s]), None, None, None, None, None)
        }
        Family::TwoBand { mu, g, lambda } => {
            let l = lambda * s;
            let sol = delta::two_band_solution(mu, g, l, m)?;
            let e = delta::two_band_bound_energy(mu, g, l, m)?;
            let lc = delta::lambda_critical(mu, g, m)?;
            let in_gap = sol.e_b > -mu.hypot(g) && sol.e_b < mu.hypot(g);
            (sol, linalg::real_diag(&[l, 0.0]), Some(lc), Some(in_gap), Some(e.e_b), None, None)
        }
        Family::GeneralB { mu, g, b } => {
            let bm = linalg::scaled(&general_matrix(b), c64::new(s, 0.0));
            let gb = delta::general_b_kappa(&bm, mu, g, m)?;
            let sol = delta::general_b_solution(&bm, mu, g, m)?;
            let in_gap = sol.e_b > -mu.hypot(g) && sol.e_b < mu.hypot(g);
            (sol, bm, None, Some(in_gap), None, Some(gb.ratio), Some(gb.closed_form_ratio))
        }
        Family::Soc { .. } | Family::File => {
            return Err(CliError::Usage("delta-bound needs --single-band or --two-band".into()));
        }
    };
    let verdict = bic::classify_delta(&p.model, &sol)?;
    let bare = (sol.amp_ext != 0.0).then(|| delta::boundary_residual_rel(&delta::bare_extended_mode(&sol), &b));
    let report = DeltaReport {
        model: p.label(),
        mass: m,
        e_b: sol.e_b,
        kappa: sol.kappa,
        p_real: sol.p_real,
        lambda_c,
        in_gap,
        formula_energy: formula,
        ratio,
        closed_form_ratio: closed_form,
        amp_loc: sol.amp_loc,
        amp_ext: sol.amp_ext,
        verdict,
        boundary_residual: delta::boundary_residual_rel(&sol, &b),
        bare_extended_residual: bare,
        poles: pole_rows(&p.model, sol.e_b)?,
    };
    if let Some(path) = &args.wavefunction {
        let grid = problem::grid(&args.grid, 10.0, 1001)?;
        write_side(path, &sol.sample(&grid)?.to_tsv())?;
    }
    let table = Table::fields(vec![
        ("model", report.model.to_string()),
        ("e_b", num(report.e_b)),
        ("kappa", num(report.kappa)),
        ("p_real", num(report.p_real)),
        ("lambda_c", opt(report.lambda_c)),
        ("verdict", report.verdict.to_string()),
        ("boundary_residual", num(report.boundary_residual)),
        ("bare_extended_residual", opt(report.bare_extended_residual)),
    ]);
    Ok(Outcome { report, table, check_failed: false })
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub model: &'static str,
    pub half_width: f64,
    pub n_points: usize,
    pub reference_energy: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub solutions_found: usize,
    pub solver: SolveSummary,
    pub criterion: BicReport,
}

pub fn bic_verify(args: &VerifyArgs) -> Result<Outcome<VerifyReport>, CliError> {
    let p = Problem::resolve(&args.model, ModelKind::Soc)?;
    let grid = problem::grid(&args.grid, 30.0, 4096)?;
    let setup = p.setup(grid.clone())?;
    let tol = tolerances(&args.tol);
    let (sol, window, found) = match args.energy {
        Some(e) => (lippmann::solve_state(&setup, e)?, None, 1),
        None => {
            let window = match &args.window {
                Some(w) => problem::parse_window(w)?,
                None => p.default_window()?,
            };
            log::info!("searching ({}, {}) on {} points", window.0, window.1, grid.n_points);
            let sols = lippmann::find_energy(&setup, window.0, window.1, &FindOptions::default())?;
            let found = sols.len();
            let pick = pick_solution(sols, p.target);
            (pick, Some(window), found)
        }
    };
    let criterion = bic::classify_solution(&setup, &sol, &tol)?;
    if let Some(path) = &args.spectrum {
        write_side(path, &spectrum_tsv(&sol.state, &setup.coupling, &criterion)?)?;
    }
    if let Some(path) = &args.state {
        write_side(path, &sol.state.to_tsv())?;
    }
    let mut table = Table::new(&[
        "energy",
        "verdict",
        "max_residual_rel",
        "tail_rel",
        "tail_decay_rate",
        "peak_fourier",
        "conflict",
        "fixed_point_residual",
    ]);
    table.push(vec![
        num(criterion.energy),
        criterion.verdict.to_string(),
        num(criterion.max_residual_rel),
        num(criterion.tail_rel),
        num(criterion.tail_decay_rate),
        num(criterion.peak_fourier),
        criterion.conflict.to_string(),
        num(sol.fixed_point_residual),
    ]);
    let report = VerifyReport {
        model: p.label(),
        half_width: grid.half_width(),
        n_points: grid.n_points,
        reference_energy: p.target,
        window,
        solutions_found: found,
        solver: sol.summary(),
        criterion,
    };
    Ok(Outcome { report, table, check_failed: false })
}

fn pick_solution(sols: Vec<lippmann::SolveReport>, target: Option<f64>) -> lippmann::SolveReport {
    let key = |s: &lippmann::SolveReport| match target {
        Some(t) => (s.energy - t).abs(),
        None => s.fixed_point_residual,
    };
    sols.into_iter()
        .min_by(|a, b| key(a).total_cmp(&key(b)))
        .expect("find_energy returns at least one solution")
}

fn spectrum_tsv(
    state: &bicforge_core::SpinorField,
    coupling: &bicforge_core::Coupling,
    criterion: &BicReport,
) -> Result<String, CliError> {
    let p_max = criterion.real_poles.iter().fold(1.0f64, |a, p| a.max(p.abs()));
    let q_max = (4.0 * p_max).min(0.999 * bic::MAX_FOURIER_STEP / state.grid.dx);
    let samples = 801;
    let nc = state.n_channels;
    let mut out = String::from("# q\tnorm");
    for c in 0..nc {
        out.push_str(&format!("\tre_{c}\tim_{c}"));
    }
    out.push('\n');
    for k in 0..samples {
        let q = -q_max + 2.0 * q_max * k as f64 / (samples - 1) as f64;
        let f = bic::fourier_residual(state, coupling, q)?;
        out.push_str(&format!("{}\t{}", num(q), num(linalg::norm(&f))));
        for z in &f {
            out.push_str(&format!("\t{}\t{}", num(z.re), num(z.im)));
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct ScanReport {
    pub param: String,
    pub rows: Vec<ScanRow>,
}

pub fn scan(args: &ScanArgs) -> Result<Outcome<ScanReport>, CliError> {
    let values = problem::parse_range(&args.range)?;
    let window = args.window.as_deref().map(problem::parse_window).transpose()?;
    // fail early on a configuration that cannot produce any row
    Problem::resolve(&problem::with_param(&args.model, args.param, values[0])?, ModelKind::Soc)?;
    let grid = problem::grid(&args.grid, 30.0, 2048)?;
    let tol = tolerances(&args.tol);
    let family = |v: f64| -> bicforge_core::Result<ScanPoint> {
        let p = problem::with_param(&args.model, args.param, v)
            .and_then(|m| Problem::resolve(&m, ModelKind::Soc))
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let w = match window {
            Some(w) => w,
            None => p.default_window().map_err(|e| Error::InvalidModel(e.to_string()))?,
        };
        let setup = p.setup(grid.clone()).map_err(|e| Error::InvalidModel(e.to_string()))?;
        Ok(ScanPoint { setup, window: w, target: p.target })
    };
    let rows = bic::scan_parameter(family, &values, &FindOptions::default(), &tol);
    let mut table = Table::new(&["param", "energy", "residual_rel", "tail_rel", "verdict", "candidate", "error"]);
    for r in &rows {
        table.push(vec![
            num(r.param),
            opt(r.energy),
            opt(r.residual_rel),
            opt(r.tail_rel),
            r.verdict.map(|v| v.to_string()).unwrap_or_default(),
            r.candidate.to_string(),
            r.error.clone().unwrap_or_default(),
        ]);
    }
    let param = format!("{:?}", args.param).to_lowercase();
    Ok(Outcome { report: ScanReport { param, rows }, table, check_failed: false })
}

#[derive(Debug, Serialize)]
pub struct OracleState {
    pub index: usize,
    pub energy: f64,
    #[serde(flatten)]
    pub localization: LocalizationMetrics,
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub model: &'static str,
    pub half_width: f64,
    pub n_points: usize,
    pub dim: usize,
    pub target: f64,
    pub x_cut: f64,
    pub states: Vec<OracleState>,
}

pub fn oracle(args: &OracleArgs) -> Result<Outcome<OracleReport>, CliError> {
    let n = args.grid.n.unwrap_or(2048);
    // every model has at least one channel
    if n > oracle::MAX_DIM {
        return Err(Error::GridTooLarge { dim: n, limit: oracle::MAX_DIM }.into());
    }
    let p = Problem::resolve(&args.model, ModelKind::Soc)?;
    let grid = problem::grid(&args.grid, 30.0, 2048)?;
    let target = args
        .target
        .or(p.target)
        .ok_or_else(|| CliError::Usage("missing --target".into()))?;
    let x_cut = args.x_cut.unwrap_or(grid.half_width() / 2.0);
    let h = oracle::assemble(&p.model, &grid, &p.coupling)?;
    let pairs = oracle::eigen_near(&h, target, args.k)?;
    let mut states = Vec::with_capacity(pairs.len());
    let mut dump = String::new();
    for (index, (energy, field)) in pairs.iter().enumerate() {
        states.push(OracleState { index, energy: *energy, localization: oracle::localization(field, x_cut)? });
        if args.states.is_some() {
            dump.push_str(&format!("# state {index} energy {energy}\n"));
            dump.push_str(&field.to_tsv());
            dump.push_str("\n\n");
        }
    }
    if let Some(path) = &args.states {
        write_side(path, &dump)?;
    }
    let mut table = Table::new(&["index", "energy", "ipr", "tail_mass"]);
    for s in &states {
        table.push(vec![
            s.index.to_string(),
            num(s.energy),
            num(s.localization.ipr),
            num(s.localization.tail_mass),
        ]);
    }
    let report = OracleReport {
        model: p.label(),
        half_width: grid.half_width(),
        n_points: grid.n_points,
        dim: h.dim(),
        target,
        x_cut,
        states,
    };
    Ok(Outcome { report, table, check_failed: false })
}

#[derive(Debug, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub energy: f64,
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub status: &'static str,
    pub message: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct KernelReport {
    pub passed: bool,
    pub rows: Vec<CheckRow>,
}

fn check(check: String, energy: f64, tolerance: f64, value: bicforge_core::Result<f64>) -> CheckRow {
    match value {
        Ok(d) => CheckRow {
            check,
            energy,
            deviation: Some(d),
            tolerance,
            status: if d < tolerance { "ok" } else { "fail" },
            message: None,
        },
        Err(e) => CheckRow {
            check,
            energy,
            deviation: None,
            tolerance,
            status: "error",
            message: Some(format!("{}: {e}", error_name(&e))),
        },
    }
}

fn error_name(e: &Error) -> String {
    let dbg = format!("{e:?}");
    dbg.split(['(', ' ', '{']).next().unwrap_or_default().to_string()
}

fn sample_points() -> Vec<f64> {
    (-20..=20).map(|k| k as f64 * 0.37).collect()
}

fn jump_error(k: &GreenKernel, mass: f64) -> f64 {
    let expect = linalg::scaled(&linalg::pauli::identity(k.n), c64::new(2.0 * mass, 0.0));
    linalg::max_abs_diff(&k.derivative_jump(), &expect)
}

fn gap_pair(mu: f64, g: f64, mass: f64, e: f64) -> bicforge_core::Result<f64> {
    let model = BandModel::two_band(mu, g, linalg::real_diag(&[1.0, 0.0]), mass)?;
    let r = green::residue_green(&model, e)?;
    let c = green::constant_a_kernel(&model, e)?;
    Ok(green::max_deviation(&r, &c, &sample_points()))
}

pub fn kernel_check(args: &KernelArgs) -> Result<Outcome<KernelReport>, CliError> {
    let mut rows = Vec::new();
    if let Some(e) = args.energy {
        let (mu, g, m) = (args.mu.unwrap_or(0.0), args.g.unwrap_or(1.0), args.mass.unwrap_or(1.0));
        rows.push(check(format!("two_band_closed_form mu={mu} g={g}"), e, 1e-10, gap_pair(mu, g, m, e)));
        let identity = BandModel::two_band(mu, g, linalg::real_diag(&[1.0, 0.0]), m)
            .and_then(|model| green::residue_green(&model, e).map(|k| (model, k)))
            .map(|(model, k)| green::defining_identity_residual(&k, &model, 1.3, 1e-3));
        rows.push(check("two_band_identity".into(), e, 1e-5, identity));
    } else {
        default_suite(&mut rows);
    }
    let passed = rows.iter().all(|r| r.status == "ok");
    let mut table = Table::new(&["check", "energy", "deviation", "tolerance", "status", "message"]);
    for r in &rows {
        table.push(vec![
            r.check.clone(),
            num(r.energy),
            opt(r.deviation),
            num(r.tolerance),
            r.status.to_string(),
            r.message.clone().unwrap_or_default(),
        ]);
    }
    Ok(Outcome { report: KernelReport { passed, rows }, table, check_failed: !passed })
}

fn default_suite(rows: &mut Vec<CheckRow>) {
    let xs = sample_points();
    for m in [1.0, 0.7] {
        for e in [0.5, 1.3] {
            let dev = BandModel::single_band(m, -1.0).and_then(|model| green::residue_green(&model, e)).map(|k| {
                xs.iter()
                    .map(|&x| (k.evaluate(x)[(0, 0)] - c64::new(delta::extended_green_1d(e, m, x), 0.0)).norm())
                    .fold(0.0, f64::max)
            });
            rows.push(check(format!("single_band_standing_wave m={m}"), e, 1e-12, dev));
        }
    }
    for k in 0..20 {
        let kf = k as f64;
        let mu = 0.8 * (1.3 * kf + 0.2).sin();
        let g = 0.3 + 0.7 * (0.7 * kf + 0.1).cos().abs();
        let s = mu.hypot(g);
        let e = s * (-0.95 + 1.9 * (0.618_034 * kf + 0.31).fract());
        rows.push(check(format!("two_band_closed_form mu={mu:.6} g={g:.6}"), e, 1e-10, gap_pair(mu, g, 1.0, e)));
    }
    let e_bic = e_bic_analytic(0.5, 0.7, 1.0).expect("valid soc parameters");
    for m in [1.0, 0.6] {
        for e in [0.3, e_bic, 0.9] {
            let dev = BandModel::spin_orbit(0.5, 1.0, linalg::real_diag(&[1.0, 0.0]), m).and_then(|model| {
                let a = green::residue_green(&model, e)?;
                let b = green::soc_kernel(&model, e)?;
                Ok(green::max_deviation(&a, &b, &xs))
            });
            rows.push(check(format!("soc_closed_form m={m}"), e, 1e-10, dev));
        }
    }
    let identity_cases: Vec<(String, bicforge_core::Result<BandModel>, f64)> = vec![
        ("single_band".into(), BandModel::single_band(1.0, -1.0), 0.5),
        ("single_band".into(), BandModel::single_band(1.0, -1.0), -0.5),
        ("two_band".into(), BandModel::two_band(0.3, 0.8, linalg::real_diag(&[1.0, 0.0]), 1.0), 0.2),
        ("soc".into(), BandModel::spin_orbit(0.5, 1.0, linalg::real_diag(&[1.0, 0.0]), 1.0), e_bic),
    ];
    for (name, model, e) in identity_cases {
        let kernel = model.and_then(|model| green::residue_green(&model, e).map(|k| (model, k)));
        let (ident, jump) = match &kernel {
            Ok((model, k)) => (
                Ok(green::defining_identity_residual(k, model, 1.3, 1e-3)),
                Ok(jump_error(k, model.mass())),
            ),
            Err(err) => (Err(err.clone()), Err(err.clone())),
        };
        rows.push(check(format!("{name}_identity"), e, 1e-5, ident));
        rows.push(check(format!("{name}_jump"), e, 1e-8, jump));
    }
    // O(h^2): halving the step quarters the identity residual
    let order = BandModel::spin_orbit(0.5, 1.0, linalg::real_diag(&[1.0, 0.0]), 1.0).and_then(|model| {
        let k = green::soc_kernel(&model, e_bic)?;
        let coarse = green::defining_identity_residual(&k, &model, 1.3, 0.04);
        let fine = green::defining_identity_residual(&k, &model, 1.3, 0.02);
        Ok((coarse / fine - 4.0).abs())
    });
    rows.push(check("soc_identity_order".into(), e_bic, 0.5, order));
}

/// Exit-code class of a core error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoBoundState(_) => 2,
        Error::NoConvergence(_)
        | Error::NoSolutionInRange { .. }
        | Error::NoNearUnitEigenvalue { .. }
        | Error::Eigensolver(_) => 3,
        Error::GridTooLarge { .. } => 4,
        _ => 1,
    }
}
