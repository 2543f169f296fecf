use std::fs;
use std::path::Path;
use std::time::Instant;

use bmirelax::diagnostics::{certify as certify_candidate, Candidate, CertifyOptions, Verdict};
use bmirelax::io::json::reals;
use bmirelax::io::report::{BoundEntry, CertificateEntry, ConeResult, OracleEntry, SequentialEntry, Timing};
use bmirelax::io::{parse_problem, write_dump, CertifyInput, ProblemFile, Real, ReportFile, SettingsEcho, StandardForm};
use bmirelax::oracle::{grid_distance, grid_feasible_set, grid_optimum, sphere_pencil_norm, GridBox};
use bmirelax::relaxation::{build_relaxation, eta_search, lower_bound, solve_relaxation, Bound, EtaSearchOptions, PenaltyConfig, RelaxStatus};
use bmirelax::sequential::{self, SequentialSettings, Termination};
use bmirelax::{BmiError, BmiProblem, ConeKind, NormOrder, Result};
use bmirelax_conic::{ConicError, SolverSettings};
use nalgebra::DVector;

use crate::{Common, Outcome, PointArg};

/// Grid spacing of the sphere sweep bracketing the pencil norm.
const NORM_SWEEP_RESOLUTION: f64 = 0.01;

pub fn error_code(e: &BmiError) -> u8 {
    match e {
        BmiError::Solver(ConicError::EigenFailure(_) | ConicError::NoDual(_)) | BmiError::SolveFailed { .. } | BmiError::Numerical(_) => 3,
        _ => 1,
    }
}

struct Session {
    common: Common,
    file: ProblemFile,
    settings: SolverSettings,
    started: Instant,
}

impl Session {
    fn open(common: &Common) -> Result<Self> {
        let started = Instant::now();
        let settings = SolverSettings { eps_abs: common.eps, eps_rel: common.eps, max_iter: common.max_iter, ..SolverSettings::default() };
        settings.validate()?;
        let text = fs::read_to_string(&common.problem)?;
        let file = parse_problem(&text, common.strict)?;
        for w in &file.warnings {
            log::warn!("{}: {w}", common.problem.display());
        }
        Ok(Self { common: common.clone(), file, settings, started })
    }

    fn problem(&self) -> &BmiProblem {
        &self.file.problem
    }

    /// `--x-check`, then the file's `x_check`, then the origin.
    fn point(&self, arg: &PointArg) -> Result<DVector<f64>> {
        let n = self.problem().n();
        match (&arg.x_check, &self.file.x_check) {
            (Some(v), _) if v.len() != n => Err(BmiError::Input(format!("--x-check has {} entries, problem has n = {n}", v.len()))),
            (Some(v), _) if v.iter().any(|t| !t.is_finite()) => Err(BmiError::Input("--x-check must be finite".into())),
            (Some(v), _) => Ok(DVector::from_vec(v.clone())),
            (None, Some(v)) => Ok(v.clone()),
            (None, None) => Ok(DVector::zeros(n)),
        }
    }

    fn report(&self, command: &str) -> ReportFile {
        ReportFile::new(command, self.problem().n(), self.problem().m(), SettingsEcho::new(&self.settings, self.common.seed))
    }

    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions { seed: self.common.seed, ..CertifyOptions::default() }
    }

    fn emit(&self, mut report: ReportFile) -> Result<()> {
        if self.common.timing {
            report.timing = Some(Timing { seconds: Real(self.started.elapsed().as_secs_f64()) });
        }
        let text = report.to_json();
        match &self.common.out {
            Some(path) => fs::write(path, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn status_outcome(status: RelaxStatus) -> Outcome {
    match status {
        RelaxStatus::Optimal => Outcome::Success,
        RelaxStatus::Infeasible | RelaxStatus::Unbounded => Outcome::Negative,
        RelaxStatus::Inaccurate | RelaxStatus::Failed => Outcome::Undecided,
    }
}

fn verdict_outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Verified => Outcome::Success,
        Verdict::Violated => Outcome::Negative,
        Verdict::Inconclusive => Outcome::Undecided,
    }
}

pub fn relax(common: &Common, cone: ConeKind, penalty: bool, eta: Option<f64>, point: &PointArg, dump: Option<&Path>) -> Result<Outcome> {
    let s = Session::open(common)?;
    let pen = if penalty {
        let eta = eta.unwrap_or_else(|| s.problem().c.norm().max(1.0));
        Some(PenaltyConfig::new(s.point(point)?, eta)?)
    } else {
        None
    };
    let program = build_relaxation(s.problem(), cone, pen.as_ref())?;
    if let Some(path) = dump {
        fs::write(path, write_dump(&StandardForm::from(&program)))?;
    }
    let sol = solve_relaxation(&program, &s.settings)?;
    let mut report = s.report("relax");
    report.results.push(ConeResult::from_solution(&sol));
    s.emit(report)?;
    Ok(status_outcome(sol.status))
}

pub fn solve(common: &Common, cone: ConeKind, eta: Option<f64>, point: &PointArg) -> Result<Outcome> {
    let s = Session::open(common)?;
    let x_check = s.point(point)?;
    let options = EtaSearchOptions { eta0: eta, ..EtaSearchOptions::default() };
    let search = eta_search(s.problem(), cone, &x_check, &options, &s.settings)?;
    let mut entry = ConeResult::from_search(&search);
    let mut outcome = status_outcome(search.solution.status);
    if search.solution.status.has_solution() {
        let cert = certify_candidate(s.problem(), cone, &Candidate::from(&search.solution), &s.certify_options(), &s.settings)?;
        if outcome == Outcome::Success && !(search.exact && cert.feasible) {
            outcome = Outcome::Undecided;
        }
        entry.certificate = Some(CertificateEntry::from(&cert));
    }
    let mut report = s.report("solve");
    report.settings.eta = eta.map(Real);
    report.settings.x_check = Some(reals(x_check.as_slice()));
    report.results.push(entry);
    s.emit(report)?;
    Ok(outcome)
}

pub fn sequential(common: &Common, cone: ConeKind, eta: Option<f64>, rounds: usize, point: &PointArg) -> Result<Outcome> {
    let s = Session::open(common)?;
    let x0 = s.point(point)?;
    let settings = SequentialSettings { max_rounds: rounds, eta0: eta, kind: cone, ..SequentialSettings::default() };
    let trace = sequential::run(s.problem(), &x0, &settings, &s.settings)?;
    let outcome = match (trace.termination, &trace.best) {
        (Termination::Infeasible, None) => Outcome::Negative,
        (_, Some(_)) => Outcome::Success,
        (_, None) => Outcome::Undecided,
    };
    let mut report = s.report("sequential");
    report.settings.eta = eta.map(Real);
    report.settings.x_check = Some(reals(x0.as_slice()));
    report.sequential = Some(SequentialEntry::new(cone, &trace));
    s.emit(report)?;
    Ok(outcome)
}

pub fn certify(common: &Common, solution: &Path, cone: Option<ConeKind>, point: &PointArg) -> Result<Outcome> {
    let s = Session::open(common)?;
    let input = CertifyInput::parse(&fs::read_to_string(solution)?)?;
    let (n, m) = (s.problem().n(), s.problem().m());
    let mut report = s.report("certify");
    let mut outcome = Outcome::Success;
    for (recorded, mut cand) in input.candidates()? {
        if cand.x.len() != n || cand.lambda.nrows() != m {
            return Err(BmiError::Input(format!("solution has n = {}, m = {}; problem has n = {n}, m = {m}", cand.x.len(), cand.lambda.nrows())));
        }
        if point.x_check.is_some() {
            cand.x_check = Some(s.point(point)?);
        }
        let kind = cone.or(recorded).unwrap_or(ConeKind::Sdp);
        let cert = certify_candidate(s.problem(), kind, &cand, &s.certify_options(), &s.settings)?;
        outcome = outcome.worst(verdict_outcome(cert.verdict()));
        let mut entry = ConeResult::given(kind, &cand, s.problem().c.dot(&cand.x));
        entry.certificate = Some(CertificateEntry::from(&cert));
        report.results.push(entry);
    }
    s.emit(report)?;
    Ok(outcome)
}

pub fn oracle(common: &Common, resolution: f64, radius: f64, point: &PointArg) -> Result<Outcome> {
    let s = Session::open(common)?;
    if !(resolution > 0.0 && radius >= 0.0 && radius.is_finite()) {
        return Err(BmiError::Input("--resolution must be positive and --radius finite and nonnegative".into()));
    }
    let center = s.point(point)?;
    let has_point = point.x_check.is_some() || s.file.x_check.is_some();
    let gbox = GridBox::around(center.as_slice(), radius)?;
    let tol = 0.0;
    let feasible = grid_feasible_set(s.problem(), &gbox, resolution, tol)?;
    let optimum = grid_optimum(s.problem(), &gbox, resolution, tol)?;
    let distance = if has_point { grid_distance(s.problem(), center.as_slice(), &gbox, resolution, tol)? } else { None };
    let bracket = if s.problem().m() <= 3 { Some(sphere_pencil_norm(&s.problem().pencil, NormOrder::Two, NORM_SWEEP_RESOLUTION)?) } else { None };
    let mut report = s.report("oracle");
    report.oracle = Some(OracleEntry {
        lower: reals(&gbox.lower),
        upper: reals(&gbox.upper),
        resolution: Real(resolution),
        feasible_nodes: feasible.len(),
        optimum_x: optimum.as_ref().map(|o| reals(o.0.as_slice())),
        optimum_value: optimum.as_ref().map(|o| Real(o.1)),
        distance: distance.map(Real),
        pencil_norm_bracket: bracket.map(|b| [Real(b.lower), Real(b.upper)]),
    });
    s.emit(report)?;
    Ok(if feasible.is_empty() { Outcome::Negative } else { Outcome::Success })
}

pub fn bounds(common: &Common) -> Result<Outcome> {
    let s = Session::open(common)?;
    let shared = &s;
    let results: Vec<Result<Bound>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ConeKind::ALL.iter().map(|&kind| scope.spawn(move || lower_bound(shared.problem(), kind, &shared.settings))).collect();
        handles.into_iter().map(|h| h.join().expect("bound worker panicked")).collect()
    });
    let mut entries = Vec::new();
    let mut outcome = Outcome::Success;
    for (kind, bound) in ConeKind::ALL.into_iter().zip(results) {
        let bound = bound?;
        outcome = outcome.worst(match bound {
            Bound::Finite { accurate: true, .. } => Outcome::Success,
            Bound::Finite { accurate: false, .. } => Outcome::Undecided,
            Bound::Infeasible | Bound::Unbounded => Outcome::Negative,
        });
        entries.push(BoundEntry::new(kind, bound));
    }
    let mut report = s.report("bounds");
    report.bounds = Some(entries);
    s.emit(report)?;
    Ok(outcome)
}
