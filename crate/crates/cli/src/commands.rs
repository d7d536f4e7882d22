use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use t2var::charts::{self, sig, DesignDoc};
use t2var::estimation::{self, TimeSeriesData};
use t2var::numerics::RngStream;
use t2var::performance::{self, FtsResult, ScenarioGrid, ShiftSpec, SimOptions};
use t2var::{ChartDesign, ChartMode, Error, Phase, VarModel};

use crate::{ArlArgs, CompareArgs, DesignArgs, FitArgs, MonitorArgs, PhaseArg, SimulateArgs};

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_ESTIMATION: u8 = 3;
pub const EXIT_MODEL: u8 = 4;
pub const EXIT_SIMULATION: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

/// Default exit code for a library error outside model fitting.
fn code_of(e: &Error) -> u8 {
    match e {
        Error::ExcessiveCensoring { .. } => EXIT_SIMULATION,
        Error::NotStationary { .. }
        | Error::InvalidModel(_)
        | Error::NotPositiveDefinite { .. }
        | Error::SingularMatrix { .. }
        | Error::NonConvergence { .. } => EXIT_MODEL,
        Error::RankDeficientRegressors | Error::ZeroVariance => EXIT_ESTIMATION,
        _ => EXIT_PARSE,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(code_of(&e), e.to_string())
    }
}

fn at(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::new(code_of(&e), format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Result<VarModel<f64>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    let doc = serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
    VarModel::from_doc(&doc).map_err(|e| match e {
        Error::Parse(_) => Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())),
        other => Failure::new(EXIT_MODEL, format!("{}: {other}", path.display())),
    })
}

fn stationary_model(path: &Path) -> Result<VarModel<f64>, Failure> {
    let m = read_model(path)?;
    m.require_stationary().map_err(at(path))?;
    Ok(m)
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<S: Serialize>(out: &Option<PathBuf>, value: &S) -> Result<(), Failure> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w).and_then(|_| w.flush()).map_err(Error::from)?;
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::new(EXIT_PARSE, format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn check_n(n: usize) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::new(EXIT_PARSE, "--n must be at least 1"));
    }
    Ok(())
}

/// One value broadcasts to every variable.
fn shift_for(values: &[f64], v: usize) -> Result<ShiftSpec<f64>, Failure> {
    let delta = match values.len() {
        0 => vec![0.0; v],
        1 => vec![values[0]; v],
        k if k == v => values.to_vec(),
        k => {
            return Err(Failure::new(
                EXIT_PARSE,
                format!("shift has {k} entries but the model has {v} variables"),
            ))
        }
    };
    Ok(ShiftSpec::new(delta)?)
}

pub fn fit(a: FitArgs) -> Result<(), Failure> {
    let data = TimeSeriesData::<f64>::from_csv(open(&a.data)?).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", a.data.display())))?;
    let data = if a.demean { estimation::center(&data).0 } else { data };
    let estimation_failure = |e: Error| Failure::new(EXIT_ESTIMATION, format!("{}: {e}", a.data.display()));
    if a.p_max == 0 {
        return Err(Failure::new(EXIT_PARSE, "--p-max must be at least 1"));
    }
    let selection = estimation::select_order(&data, a.p_max).map_err(estimation_failure)?;
    let order = a.order.unwrap_or(selection.order);
    let fit = estimation::fit_var_ols(&data, order).map_err(estimation_failure)?;
    if !fit.stationary {
        eprintln!(
            "t2var: warning: fitted VAR({order}) is not stationary (max modulus {:.4}); mean taken from the sample",
            fit.max_modulus
        );
    }
    write_json(&a.out, &fit.model.to_doc())?;
    if let Some(path) = &a.report {
        let report = estimation::fit_report(&selection, &fit).map_err(estimation_failure)?;
        write_json(&Some(path.clone()), &report)?;
    }
    Ok(())
}

pub fn design(a: DesignArgs) -> Result<(), Failure> {
    check_alpha(a.alpha)?;
    check_n(a.n)?;
    let model = stationary_model(&a.model)?;
    let phase = match (a.phase, a.m) {
        (PhaseArg::Two, _) => Phase::Two,
        (PhaseArg::One, Some(m)) if m > 0 => Phase::One { m },
        (PhaseArg::One, _) => return Err(Failure::new(EXIT_PARSE, "--phase one needs --m (number of samples)")),
    };
    let d = charts::build_design(&model, a.n, a.alpha, a.mode.into(), phase)?;
    write_json(&a.out, &d.to_doc())
}

pub fn monitor(a: MonitorArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.design).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", a.design.display())))?;
    let doc: DesignDoc = serde_json::from_str(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", a.design.display())))?;
    let design = ChartDesign::<f64>::from_doc(&doc).map_err(at(&a.design))?;
    let model = match (&a.model, design.mode) {
        (Some(p), _) => read_model(p)?,
        (None, ChartMode::Residuals) => return Err(Failure::new(EXIT_PARSE, "residual charts need --model")),
        // observations mode only reads the design
        (None, ChartMode::Observations) => VarModel::var1(
            design.mu0.clone(),
            t2var::Matrix::zeros(design.v, design.v),
            design.sigma.clone(),
        )?,
    };
    if model.v() != design.v {
        return Err(Failure::new(
            EXIT_PARSE,
            format!("design has {} variables, model has {}", design.v, model.v()),
        ));
    }
    let rows = charts::read_labelled_csv::<f64, _>(open(&a.data)?).map_err(at(&a.data))?;
    if rows.names.len() != design.v {
        return Err(Failure::new(
            EXIT_PARSE,
            format!("{}: {} data columns, design expects {}", a.data.display(), rows.names.len(), design.v),
        ));
    }
    let blocks = charts::group_blocks(&rows, design.n, model.p()).map_err(at(&a.data))?;
    let points = charts::monitor(&design, &model, &blocks).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", a.data.display())))?;
    let mut w = sink(&a.out)?;
    charts::write_chart_csv(&mut w, &points, design.ucl)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

pub fn arl(a: ArlArgs) -> Result<(), Failure> {
    let mut grid = ScenarioGrid::load(&a.scenarios).map_err(at(&a.scenarios))?;
    check_alpha(grid.alpha)?;
    if grid.n.contains(&0) {
        return Err(Failure::new(EXIT_PARSE, "sample sizes must be at least 1"));
    }
    if let Some(m) = a.mode {
        grid.mode = m.into();
    }
    let rows = performance::arl_table(&grid).map_err(at(&a.scenarios))?;
    let mut w = sink(&a.out)?;
    performance::write_arl_csv(&mut w, &rows)?;
    w.flush().map_err(Error::from)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Comparison {
    n: usize,
    alpha: f64,
    delta: Vec<f64>,
    arl_observations: f64,
    arl_residuals: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_to_signal: Option<FtsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

pub fn compare(a: CompareArgs) -> Result<(), Failure> {
    check_alpha(a.alpha)?;
    check_n(a.n)?;
    if a.reps == 0 || a.max_cap == 0 {
        return Err(Failure::new(EXIT_PARSE, "--reps and --max-cap must be positive"));
    }
    let model = stationary_model(&a.model)?;
    let shift = shift_for(&a.delta, model.v())?;
    let obs = charts::build_design(&model, a.n, a.alpha, ChartMode::Observations, Phase::Two)?;
    let res = charts::build_design(&model, a.n, a.alpha, ChartMode::Residuals, Phase::Two)?;
    let fts = if a.fts {
        let opts = SimOptions {
            max_cap: a.max_cap,
            ..SimOptions::new(a.reps, a.seed)
        };
        Some(performance::first_to_signal(&model, a.n, a.alpha, &shift, &opts)?)
    } else {
        None
    };
    let out = Comparison {
        n: a.n,
        alpha: a.alpha,
        delta: shift.delta.clone(),
        arl_observations: performance::arl1(&obs, &model, &shift)?,
        arl_residuals: performance::arl1(&res, &model, &shift)?,
        seed: fts.as_ref().map(|_| a.seed),
        first_to_signal: fts,
    };
    write_json(&a.out, &out)
}

pub fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    check_n(a.n)?;
    let model = stationary_model(&a.model)?;
    let rows = match (a.blocks, a.length) {
        (Some(b), None) => b * a.n,
        (None, Some(l)) if l % a.n == 0 => l,
        (None, Some(l)) => {
            return Err(Failure::new(EXIT_PARSE, format!("--length {l} is not a multiple of --n {}", a.n)));
        }
        _ => return Err(Failure::new(EXIT_PARSE, "give --blocks or --length")),
    };
    if rows == 0 {
        return Err(Failure::new(EXIT_PARSE, "nothing to simulate"));
    }
    let (v, p) = (model.v(), model.p());
    let delta = shift_for(&a.shift, v)?.raw(&model)?;
    let x = performance::simulate_segment(&model, p + rows, performance::default_burn_in(p), RngStream::new(a.seed, 0))?;

    let mut w = sink(&a.out)?;
    let names: Vec<String> = (1..=v).map(|j| format!("x{j}")).collect();
    writeln!(w, "t,{}", names.join(",")).map_err(Error::from)?;
    let mut put = |t: usize, row: &[f64], shifted: bool| -> io::Result<()> {
        write!(w, "{t}")?;
        for (j, &x) in row.iter().enumerate() {
            let x = if shifted { x + delta[j] } else { x };
            write!(w, ",{}", sig(x, 6))?;
        }
        writeln!(w)
    };
    // the preamble rows give residual charts their history
    for i in 0..p {
        put(0, x.row(i), false).map_err(Error::from)?;
    }
    for r in 0..rows {
        let block = r / a.n + 1;
        put(block, x.row(p + r), block >= a.shift_from).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}
