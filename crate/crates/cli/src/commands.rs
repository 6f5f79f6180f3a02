//! Subcommand implementations. Each writes its artifacts and returns a summary.

use beckner_core::fields::io::{field_from_binary, field_from_csv, field_to_binary, field_to_csv};
use beckner_core::fields::{
    coarea_check, estimate_isoperimetric_constant, regime_sets, SampleFamily,
};
use beckner_core::inequality::{
    blowup_csv, blowup_sequence, constant_curve, curve_csv, entropy, verify_limit_lemmas,
    InequalityProblem, InequalityReport,
};
use beckner_core::table::{fmt_f64, Table};
use beckner_core::{
    admissibility_margin, all_degenerate_states, degenerate_state, sigma_obs, verify_cuboid,
    AdmissibilityReport, CoefficientSystem, Error as CoreError, Grid, GridField, IndexSet,
};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::{FieldSpec, RunConfig, TestFunction};
use crate::error::{config_error, CliError};
use crate::output::{Output, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Check,
    States,
    Cuboid,
    Sigma,
    Coarea,
    Isoperimetric,
    Regimes,
    Blowup,
    EstimateC,
    Verify,
    Entropy,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::States => "states",
            Command::Cuboid => "cuboid",
            Command::Sigma => "sigma",
            Command::Coarea => "coarea",
            Command::Isoperimetric => "isoperimetric",
            Command::Regimes => "regimes",
            Command::Blowup => "blowup",
            Command::EstimateC => "estimate_c",
            Command::Verify => "verify",
            Command::Entropy => "entropy",
            Command::Report => "report",
        }
    }
}

/// Order in which `report` runs the individual subcommands.
const REPORT_ORDER: [Command; 11] = [
    Command::Check,
    Command::States,
    Command::Cuboid,
    Command::Sigma,
    Command::Coarea,
    Command::Isoperimetric,
    Command::Regimes,
    Command::Blowup,
    Command::EstimateC,
    Command::Verify,
    Command::Entropy,
];

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Output,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let out = Output::create(&cfg.output_dir)?;
        Ok(Ctx { cfg, out })
    }

    fn sys(&self) -> &CoefficientSystem {
        &self.cfg.system
    }
}

/// Run `cmd`, write `<name>_summary.txt` and return the summary text.
pub fn run(cmd: Command, ctx: &Ctx) -> Result<String, CliError> {
    if cmd == Command::Report {
        return report(ctx);
    }
    let summary = run_one(cmd, ctx)?.render();
    ctx.out
        .write(&format!("{}_summary.txt", cmd.name()), &summary)?;
    Ok(summary)
}

fn run_one(cmd: Command, ctx: &Ctx) -> Result<Summary, CliError> {
    match cmd {
        Command::Check => check(ctx),
        Command::States => states(ctx),
        Command::Cuboid => cuboid(ctx),
        Command::Sigma => sigma(ctx),
        Command::Coarea => coarea(ctx),
        Command::Isoperimetric => isoperimetric(ctx),
        Command::Regimes => regimes(ctx),
        Command::Blowup => blowup(ctx),
        Command::EstimateC => estimate_c(ctx),
        Command::Verify => verify(ctx),
        Command::Entropy => entropy_cmd(ctx),
        Command::Report => unreachable!("report is dispatched separately"),
    }
}

/// Runs every subcommand. Steps that need an admissible system are skipped
/// on an inadmissible one, and the run then ends with the inadmissible status.
fn report(ctx: &Ctx) -> Result<String, CliError> {
    let mut text = String::new();
    let mut blocked: Option<f64> = None;
    for cmd in REPORT_ORDER {
        match run_one(cmd, ctx) {
            Ok(s) => {
                let rendered = s.render();
                ctx.out
                    .write(&format!("{}_summary.txt", cmd.name()), &rendered)?;
                text.push_str(&rendered);
            }
            Err(CliError::Core(CoreError::Inadmissible { kappa_star })) => {
                blocked = Some(kappa_star);
                text.push_str(&format!(
                    "[{}]\nskipped = inadmissible system\n",
                    cmd.name()
                ));
            }
            Err(e) => return Err(e),
        }
    }
    ctx.out.write("report_summary.txt", &text)?;
    match blocked {
        Some(kappa_star) => Err(CoreError::Inadmissible { kappa_star }.into()),
        None => Ok(text),
    }
}

fn require_admissible(sys: &CoefficientSystem) -> Result<AdmissibilityReport, CliError> {
    let rep = admissibility_margin(sys)?;
    if !rep.is_admissible() {
        return Err(CoreError::Inadmissible {
            kappa_star: rep.kappa_star,
        }
        .into());
    }
    Ok(rep)
}

/// The override if given, else the LP gap.
fn run_sigma(ctx: &Ctx) -> Result<f64, CliError> {
    match ctx.cfg.sigma_override {
        Some(s) => Ok(s),
        None => Ok(sigma_obs(ctx.sys())?.sigma),
    }
}

fn problem(ctx: &Ctx) -> Result<InequalityProblem, CliError> {
    require_admissible(ctx.sys())?;
    let p = InequalityProblem::new(ctx.sys(), ctx.cfg.p)?;
    Ok(match ctx.cfg.sigma_override {
        Some(s) => p.with_sigma(s)?,
        None => p,
    })
}

fn check(ctx: &Ctx) -> Result<Summary, CliError> {
    let rep = admissibility_margin(ctx.sys())?;
    ctx.out.write_json("admissibility.json", &rep)?;
    let mut s = Summary::new("check");
    s.line("n_species", ctx.sys().n_species())
        .line("admissible", rep.is_admissible())
        .line("kappa_star", fmt_f64(rep.kappa_star))
        .line("worst_minor_set", rep.worst_minor_set)
        .line("worst_minor_value", fmt_f64(rep.worst_minor_value))
        .line("worst_augmented_set", rep.worst_augmented_set)
        .line("worst_augmented_index", rep.worst_augmented_index)
        .line("worst_augmented_value", fmt_f64(rep.worst_augmented_value))
        .line("bound_margin", fmt_f64(rep.bound_margin));
    Ok(s)
}

fn states(ctx: &Ctx) -> Result<Summary, CliError> {
    let st = all_degenerate_states(ctx.sys())?;
    ctx.out.write("states.csv", st.to_csv())?;
    ctx.out.write_json("states.json", &st)?;
    let mut s = Summary::new("states");
    s.line("count", st.iter().count())
        .line("max_coordinate", fmt_f64(st.max_coordinate()))
        .line("coexistence", fmt_vec(&st.coexistence().u));
    Ok(s)
}

fn cuboid(ctx: &Ctx) -> Result<Summary, CliError> {
    let rep = verify_cuboid(ctx.sys())?;
    ctx.out.write_json("cuboid.json", &rep)?;
    ctx.out.write("vertices.csv", rep.vertices_csv())?;
    let mut s = Summary::new("cuboid");
    s.line("is_cuboid", rep.is_cuboid)
        .line("vertices", rep.vertices.len())
        .line("bounded", rep.bounded)
        .line("vertices_match_states", rep.vertices_match_states)
        .line("facets_match_cube", rep.facets_match_cube)
        .line(
            "certificate_preserves_incidence",
            rep.certificate_preserves_incidence,
        );
    Ok(s)
}

fn sigma(ctx: &Ctx) -> Result<Summary, CliError> {
    require_admissible(ctx.sys())?;
    let cert = sigma_obs(ctx.sys())?;
    ctx.out.write_json("sigma.json", &cert)?;
    ctx.out.write("sigma_profile.csv", cert.profile_csv())?;
    let mut s = Summary::new("sigma");
    s.line("sigma", fmt_f64(cert.sigma))
        .line("sigma_max", fmt_f64(cert.sigma_max))
        .line("binding_index", cert.binding_index);
    if let Some(o) = ctx.cfg.sigma_override {
        s.line("sigma_override", fmt_f64(o));
    }
    Ok(s)
}

fn coarea(ctx: &Ctx) -> Result<Summary, CliError> {
    let spec = &ctx.cfg.experiment.coarea;
    if spec.resolutions.is_empty() {
        return Err(config_error("coarea needs at least one resolution"));
    }
    let extents = ctx.cfg.grid.extents.clone();
    let lx = extents.first().copied().unwrap_or(1.0);
    let ly = extents.get(1).copied().unwrap_or(0.0);
    let (cx, cy) = (0.5 * lx, 0.5 * ly);
    let func = spec.function;
    let eval = move |p: [f64; 2]| match func {
        TestFunction::X => p[0],
        TestFunction::XPlusY => p[0] + p[1],
        TestFunction::Radial => ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt(),
    };
    let [t_lo, t_hi] = spec.window.unwrap_or(match func {
        TestFunction::X => [0.0, lx],
        TestFunction::XPlusY => [0.0, lx + ly],
        TestFunction::Radial => [0.0, cx.hypot(cy)],
    });
    let mut t = Table::new([
        "resolution",
        "grad_integral",
        "level_integral_raw",
        "level_integral_calibrated",
        "rel_error_raw",
        "rel_error_calibrated",
    ]);
    let mut last = None;
    for &r in &spec.resolutions {
        let grid = Grid::new(extents.clone(), vec![r; extents.len()])?;
        let field = GridField::scalar_from_fn(&grid, eval)?;
        let c = coarea_check(&field, t_lo, t_hi, spec.levels)?;
        let mut row = vec![r.to_string()];
        row.extend(
            [
                c.grad_integral,
                c.level_integral_raw,
                c.level_integral_calibrated,
                c.rel_error_raw,
                c.rel_error_calibrated,
            ]
            .map(fmt_f64),
        );
        t.push(row);
        last = Some((r, c));
    }
    ctx.out.write("coarea.csv", t.to_csv())?;
    let (r, c) = last.expect("nonempty resolutions");
    let mut s = Summary::new("coarea");
    s.line("function", func.name())
        .line("window", format!("{}..{}", fmt_f64(t_lo), fmt_f64(t_hi)))
        .line("finest_resolution", r)
        .line("rel_error_raw", fmt_f64(c.rel_error_raw))
        .line("rel_error_calibrated", fmt_f64(c.rel_error_calibrated));
    Ok(s)
}

fn isoperimetric(ctx: &Ctx) -> Result<Summary, CliError> {
    let families = match &ctx.cfg.experiment.isoperimetric.families {
        Some(f) => f.clone(),
        None => SampleFamily::standard(ctx.cfg.require_seed("isoperimetric")?),
    };
    let grid = ctx.cfg.grid()?;
    let est = estimate_isoperimetric_constant(&grid, &families)?;
    let mut t = Table::new(["family", "measure", "perimeter", "ratio"]);
    for x in &est.samples {
        t.push(vec![
            x.family.clone(),
            fmt_f64(x.measure),
            fmt_f64(x.perimeter),
            fmt_f64(x.ratio),
        ]);
    }
    ctx.out.write("isoperimetric.csv", t.to_csv())?;
    ctx.out.write_json("isoperimetric.json", &est)?;
    let mut s = Summary::new("isoperimetric");
    s.line("constant", fmt_f64(est.constant))
        .line("exponent", fmt_f64(est.exponent))
        .line("samples", est.samples.len());
    Ok(s)
}

fn build_field(ctx: &Ctx, spec: &FieldSpec) -> Result<GridField, CliError> {
    let sys = ctx.sys();
    let n = sys.n_species();
    let grid = ctx.cfg.grid()?;
    let field = match spec {
        FieldSpec::Degenerate { set } => {
            if !set.fits(n) {
                return Err(config_error(format!("set {set} is outside 1..={n}")));
            }
            GridField::constant(&grid, &degenerate_state(sys, *set)?.u)?
        }
        FieldSpec::Constant { values } => GridField::constant(&grid, values)?,
        FieldSpec::Ramp { from, to } => {
            if from.len() != n || to.len() != n {
                return Err(config_error(format!("ramp end points need {n} entries")));
            }
            let lx = grid.extents()[0];
            GridField::from_fn(&grid, n, |p| {
                let s = p[0] / lx;
                from.iter().zip(to).map(|(a, b)| a + (b - a) * s).collect()
            })?
        }
        FieldSpec::Csv { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            field_from_csv(&text)?
        }
        FieldSpec::Binary { path } => {
            let bytes = std::fs::read(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            field_from_binary(&bytes, Some(grid.extents()))?
        }
    };
    if field.n_components() != n {
        return Err(config_error(format!(
            "field has {} components, system has {n} species",
            field.n_components()
        )));
    }
    Ok(field)
}

#[derive(Serialize)]
struct RegimeRecord {
    set: IndexSet,
    measure: f64,
}

#[derive(Serialize)]
struct RegimesRecord {
    sigma: f64,
    regimes: Vec<RegimeRecord>,
    leftover_measure: f64,
}

fn regimes(ctx: &Ctx) -> Result<Summary, CliError> {
    let sigma = run_sigma(ctx)?;
    let field = build_field(ctx, &ctx.cfg.experiment.regimes)?;
    let rs = regime_sets(ctx.sys(), &field, sigma)?;
    ctx.out.write("regimes.csv", rs.to_csv())?;
    let record = RegimesRecord {
        sigma,
        regimes: rs
            .measures()
            .into_iter()
            .map(|(set, measure)| RegimeRecord { set, measure })
            .collect(),
        leftover_measure: rs.leftover_measure,
    };
    ctx.out.write_json("regimes.json", &record)?;
    let mut s = Summary::new("regimes");
    s.line("sigma", fmt_f64(sigma));
    for r in &record.regimes {
        s.line(&format!("measure{}", r.set), fmt_f64(r.measure));
    }
    s.line("leftover_measure", fmt_f64(rs.leftover_measure));
    Ok(s)
}

#[derive(Serialize)]
struct BlowupRecord {
    k: usize,
    u: Vec<f64>,
    report: InequalityReport,
}

fn blowup(ctx: &Ctx) -> Result<Summary, CliError> {
    let problem = problem(ctx)?;
    let n = ctx.sys().n_species();
    let spec = &ctx.cfg.experiment.blowup;
    if spec.steps == 0 {
        return Err(config_error("blowup needs at least one step"));
    }
    let set = spec.set.unwrap_or(IndexSet::full(n));
    let grid = ctx.cfg.grid()?;
    let seq = blowup_sequence(&problem, set, spec.steps, &grid)?;
    ctx.out.write("blowup.csv", blowup_csv(&seq))?;
    let records: Vec<BlowupRecord> = seq
        .iter()
        .map(|st| BlowupRecord {
            k: st.k,
            u: st.u.clone(),
            report: st.report.clone(),
        })
        .collect();
    ctx.out.write_json("blowup.json", &records)?;
    let last = seq.last().expect("steps ≥ 1");
    let mut s = Summary::new("blowup");
    s.line("set", set)
        .line("steps", spec.steps)
        .line("final_ratio", fmt_f64(last.report.ratio));
    Ok(s)
}

#[derive(Serialize)]
struct EstimateRecord {
    rho: f64,
    c_estimate: f64,
    optimizer_best: f64,
    baseline_best: f64,
    optimizer_evaluations: usize,
    baseline_evaluations: usize,
    separation_too_small: bool,
    fd_max_rel_error: f64,
    maximizer_report: InequalityReport,
}

fn estimate_c(ctx: &Ctx) -> Result<Summary, CliError> {
    let seed = ctx.cfg.require_seed("estimate-c")?;
    let rhos = ctx.cfg.separations()?;
    let spec = &ctx.cfg.experiment.estimate_c;
    let problem = problem(ctx)?;
    let grid = ctx.cfg.grid()?;
    let mut opt = spec.optimizer.clone();
    opt.seed = seed;
    let curve = constant_curve(&problem, &grid, &rhos, &opt)?;
    ctx.out.write("c_curve.csv", curve_csv(&curve))?;
    let mut records = Vec::with_capacity(curve.len());
    let mut s = Summary::new("estimate_c");
    s.line("p", fmt_f64(ctx.cfg.p)).line("seed", seed);
    for (k, e) in curve.iter().enumerate() {
        ctx.out.write(&format!("trace_rho{k}.csv"), e.trace_csv())?;
        ctx.out
            .write(&format!("maximizer_rho{k}.csv"), field_to_csv(&e.maximizer))?;
        if spec.binary_dump {
            ctx.out.write(
                &format!("maximizer_rho{k}.bin"),
                field_to_binary(&e.maximizer),
            )?;
        }
        s.line(&format!("rho{k}"), fmt_f64(e.rho))
            .line(&format!("c_estimate{k}"), fmt_f64(e.c_estimate))
            .line(&format!("optimizer_best{k}"), fmt_f64(e.optimizer_best))
            .line(&format!("baseline_best{k}"), fmt_f64(e.baseline_best))
            .line(&format!("separation_too_small{k}"), e.separation_too_small);
        records.push(EstimateRecord {
            rho: e.rho,
            c_estimate: e.c_estimate,
            optimizer_best: e.optimizer_best,
            baseline_best: e.baseline_best,
            optimizer_evaluations: e.optimizer_evaluations,
            baseline_evaluations: e.baseline_evaluations,
            separation_too_small: e.separation_too_small,
            fd_max_rel_error: e.fd_max_rel_error,
            maximizer_report: e.maximizer_report.clone(),
        });
    }
    ctx.out.write_json("estimate_c.json", &records)?;
    Ok(s)
}

fn verify(ctx: &Ctx) -> Result<Summary, CliError> {
    let seed = ctx.cfg.require_seed("verify")?;
    require_admissible(ctx.sys())?;
    let rep = verify_limit_lemmas(ctx.sys(), &ctx.cfg.verify_config(seed))?;
    ctx.out.write_json("verify.json", &rep)?;
    ctx.out.write("verify_gstab.csv", rep.gstab_csv())?;
    ctx.out.write("verify_sigma1.csv", rep.sigma1_csv())?;
    let mut s = Summary::new("verify");
    s.line("status", if rep.passed() { "passed" } else { "flagged" });
    s.extend_text(&rep.summary());
    for (k, f) in rep.flagged.iter().enumerate() {
        s.line(&format!("flag{k}"), f);
    }
    if !rep.passed() {
        log::warn!("verify recorded {} flagged findings", rep.flagged.len());
    }
    Ok(s)
}

fn entropy_cmd(ctx: &Ctx) -> Result<Summary, CliError> {
    let field = build_field(ctx, &ctx.cfg.experiment.entropy)?;
    let e = entropy(ctx.sys(), &field)?;
    ctx.out.write_json("entropy.json", &e)?;
    let mut s = Summary::new("entropy");
    s.line("value", fmt_f64(e.value))
        .line("symmetrized", e.symmetrized);
    Ok(s)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", parts.join(", "))
}
