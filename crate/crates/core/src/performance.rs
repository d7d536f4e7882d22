//! Run-length performance: analytic ARL from the non-central χ² law, and
//! Monte-Carlo run lengths on simulated VAR data.
//!
//! Simulated inspections are independent stationary segments by default. Each
//! segment starts from an exact draw of the stacked state `Z ~ N(μ, Σ_Z)`,
//! which is what a long burn-in only approximates; the `p` rows of that state
//! double as the residual chart's history.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{build_design, ChartDesign, ChartMode, Phase};
use crate::error::{Error, Result};
use crate::numerics::rng::standard_normal;
use crate::numerics::special::noncentral_chi2_sf;
use crate::numerics::{cholesky, Matrix, RngStream};
use crate::scalar::Real;
use crate::var_model::{ModelDoc, VarModel};

pub const DEFAULT_MAX_CAP: usize = 100_000;
pub const DEFAULT_REPLICATIONS: usize = 10_000;
/// Largest tolerated fraction of censored replications.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;

/// Standardized mean shift: `μ¹_j = μ⁰_j + δ_j·√(Σ_ε)_jj`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec<T: Real> {
    pub delta: Vec<T>,
}

impl<T: Real> ShiftSpec<T> {
    pub fn new(delta: Vec<T>) -> Result<Self> {
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("shift has non-finite entries".into()));
        }
        Ok(Self { delta })
    }

    /// Same `δ` in every coordinate.
    pub fn uniform(v: usize, delta: T) -> Self {
        Self { delta: vec![delta; v] }
    }

    pub fn none(v: usize) -> Self {
        Self::uniform(v, T::zero())
    }

    /// `Δ = μ¹ − μ⁰` in process units.
    pub fn raw(&self, model: &VarModel<T>) -> Result<Vec<T>> {
        if self.delta.len() != model.v() {
            return Err(Error::DimensionMismatch {
                expected: format!("shift of length {}", model.v()),
                found: self.delta.len().to_string(),
            });
        }
        let s = model.sigma_eps();
        Ok(self.delta.iter().enumerate().map(|(j, &d)| d * s[(j, j)].sqrt()).collect())
    }

    /// The process after the shift.
    pub fn apply(&self, model: &VarModel<T>) -> Result<VarModel<T>> {
        let delta = self.raw(model)?;
        model.with_mu(model.mu().iter().zip(delta).map(|(&m, d)| m + d).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLengthResult {
    pub replications: usize,
    pub mean_rl: f64,
    pub std_error: f64,
    pub max_cap: usize,
    pub censored_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtsResult {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub replications: usize,
    pub censored_count: usize,
}

/// How consecutive inspection blocks relate in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Each block is a fresh stationary segment.
    #[default]
    Independent,
    /// Blocks are consecutive stretches of one unbroken series.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub replications: usize,
    pub max_cap: usize,
    pub master_seed: u64,
    pub sampling: Sampling,
}

impl SimOptions {
    pub fn new(replications: usize, master_seed: u64) -> Self {
        Self {
            replications,
            max_cap: DEFAULT_MAX_CAP,
            master_seed,
            sampling: Sampling::Independent,
        }
    }
}

/// `d = Δᵀ Σ_X̄⁻¹ Δ` with `Δ` in process units.
pub fn noncentrality<T: Real>(model: &VarModel<T>, n: usize, shift: &ShiftSpec<T>) -> Result<T> {
    let delta = shift.raw(model)?;
    let inv = crate::numerics::spd_inverse(&model.sigma_xbar(n)?)?;
    Ok(inv.quadratic_form(&delta).max(T::zero()))
}

pub fn arl0<T: Real>(alpha: T) -> Result<T> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(T::one() / alpha)
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Non-centrality of the design's statistic under `shift`.
///
/// A sustained shift `Δ` in the process mean moves the mean residual by
/// `(I − ΣΦ_i)Δ`, so residual charts see that vector, not `Δ` itself.
pub fn design_noncentrality<T: Real>(design: &ChartDesign<T>, model: &VarModel<T>, shift: &ShiftSpec<T>) -> Result<T> {
    let delta = shift.raw(model)?;
    let seen = match design.mode {
        ChartMode::Observations => delta,
        ChartMode::Residuals => (&Matrix::identity(model.v()) - &model.phi_sum()).mul_vec(&delta),
    };
    Ok(design.inv_cov.quadratic_form(&seen).max(T::zero()))
}

/// `1 / (1 − F_{χ²(v,d)}(UCL))`.
pub fn arl1<T: Real>(design: &ChartDesign<T>, model: &VarModel<T>, shift: &ShiftSpec<T>) -> Result<T> {
    let d = design_noncentrality(design, model, shift)?;
    let v = u32::try_from(design.v).map_err(|_| Error::InvalidArgument("dimension too large".into()))?;
    Ok(T::one() / noncentral_chi2_sf(design.ucl, v, d))
}

/// Scenario grid file: models crossed with sample sizes and shifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid {
    pub alpha: f64,
    pub n: Vec<usize>,
    pub delta: Vec<f64>,
    #[serde(default = "default_mode")]
    pub mode: ChartMode,
    pub scenarios: Vec<Scenario>,
}

fn default_mode() -> ChartMode {
    ChartMode::Observations
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDoc>,
    /// Path to a model JSON document, relative to the grid file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ref: Option<String>,
    /// Reference values indexed `[delta][n]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<Vec<f64>>>,
}

impl ScenarioGrid {
    /// Reads a grid and inlines every `model_ref`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut grid: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for s in &mut grid.scenarios {
            if s.model.is_none() {
                let r = s
                    .model_ref
                    .as_ref()
                    .ok_or_else(|| Error::Parse(format!("scenario `{}` has neither model nor model_ref", s.id)))?;
                s.model = Some(serde_json::from_str(&std::fs::read_to_string(base.join(r))?)?);
            }
        }
        Ok(grid)
    }

    pub fn models<T: Real>(&self) -> Result<Vec<(String, VarModel<T>)>> {
        self.scenarios
            .iter()
            .map(|s| {
                let doc = s
                    .model
                    .as_ref()
                    .ok_or_else(|| Error::Parse(format!("scenario `{}` has no inline model", s.id)))?;
                Ok((s.id.clone(), VarModel::from_doc(doc)?))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArlRow {
    pub scenario_id: String,
    pub n: usize,
    pub delta: f64,
    pub arl: f64,
}

/// Analytic ARL for every (scenario, n, δ) cell; `δ = 0` cells are `1/α`.
pub fn arl_table(grid: &ScenarioGrid) -> Result<Vec<ArlRow>> {
    let alpha = grid.alpha;
    let mut out = Vec::new();
    for (id, model) in grid.models::<f64>()? {
        model.require_stationary()?;
        for &n in &grid.n {
            let design = build_design(&model, n, alpha, grid.mode, Phase::Two)?;
            for &delta in &grid.delta {
                let arl = if delta == 0.0 {
                    arl0(alpha)?
                } else {
                    arl1(&design, &model, &ShiftSpec::uniform(model.v(), delta))?
                };
                out.push(ArlRow {
                    scenario_id: id.clone(),
                    n,
                    delta,
                    arl,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_arl_csv<W: Write>(mut w: W, rows: &[ArlRow]) -> Result<()> {
    writeln!(w, "scenario_id,n,delta,arl")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.scenario_id, r.n, r.delta, crate::charts::sig(r.arl, 6))?;
    }
    Ok(())
}

/// Draws VAR paths for one data-generating model.
#[derive(Debug, Clone)]
pub struct Simulator<T: Real> {
    v: usize,
    p: usize,
    mu: Vec<T>,
    c: Vec<T>,
    phis: Vec<Matrix<T>>,
    chol_eps: Matrix<T>,
    chol_z: Matrix<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(model: &VarModel<T>) -> Result<Self> {
        let sz = model.sigma_z()?;
        Ok(Self {
            v: model.v(),
            p: model.p(),
            mu: model.mu().to_vec(),
            c: model.intercept(),
            phis: model.phis().to_vec(),
            chol_eps: cholesky(model.sigma_eps())?,
            chol_z: cholesky(&sz)?,
        })
    }

    /// Overwrites `rows[0..p]` (oldest first) with a draw from the stationary law.
    fn stationary_start<R: Rng>(&self, rng: &mut R, rows: &mut [T]) {
        let k = self.v * self.p;
        let z: Vec<T> = (0..k).map(|_| standard_normal(rng)).collect();
        for i in 0..k {
            let mut acc = T::zero();
            for j in 0..=i {
                acc = acc + self.chol_z[(i, j)] * z[j];
            }
            // stacked index i belongs to lag i / v, i.e. row p-1-lag
            let (lag, col) = (i / self.v, i % self.v);
            rows[(self.p - 1 - lag) * self.v + col] = self.mu[col] + acc;
        }
    }

    /// Fills row `r` from rows `r−p .. r−1` plus a fresh innovation.
    fn step<R: Rng>(&self, rng: &mut R, rows: &mut [T], r: usize, eps: &mut [T]) {
        let v = self.v;
        for e in eps.iter_mut() {
            *e = standard_normal(rng);
        }
        for a in 0..v {
            let mut x = self.c[a];
            for b in 0..=a {
                x = x + self.chol_eps[(a, b)] * eps[b];
            }
            for (i, phi) in self.phis.iter().enumerate() {
                let prev = (r - 1 - i) * v;
                for b in 0..v {
                    x = x + phi[(a, b)] * rows[prev + b];
                }
            }
            rows[r * v + a] = x;
        }
    }

    /// `p` history rows followed by `n` block rows, row-major.
    fn fresh_block<R: Rng>(&self, rng: &mut R, n: usize, buf: &mut Vec<T>, eps: &mut [T]) {
        buf.clear();
        buf.resize((self.p + n) * self.v, T::zero());
        self.stationary_start(rng, buf);
        for r in self.p..self.p + n {
            self.step(rng, buf, r, eps);
        }
    }

    /// Shifts the last `p` rows to the front and appends `n` new rows.
    fn continue_block<R: Rng>(&self, rng: &mut R, n: usize, buf: &mut [T], eps: &mut [T]) {
        let v = self.v;
        let total = buf.len() / v;
        buf.copy_within((total - self.p) * v.., 0);
        for r in self.p..self.p + n {
            self.step(rng, buf, r, eps);
        }
    }
}

/// Generates `burn_in + length` steps from `X = μ` and returns the last `length` rows.
pub fn simulate_segment<T: Real>(model: &VarModel<T>, length: usize, burn_in: usize, stream: RngStream) -> Result<Matrix<T>> {
    let sim = Simulator::new(model)?;
    let (v, p) = (sim.v, sim.p);
    if length == 0 {
        return Err(Error::InvalidArgument("segment length must be positive".into()));
    }
    let mut rng = stream.rng();
    let total = p + burn_in + length;
    let mut rows = vec![T::zero(); total * v];
    for r in 0..p {
        rows[r * v..(r + 1) * v].copy_from_slice(model.mu());
    }
    let mut eps = vec![T::zero(); v];
    for r in p..total {
        sim.step(&mut rng, &mut rows, r, &mut eps);
    }
    Matrix::new(length, v, rows[(total - length) * v..].to_vec())
}

/// Burn-in used for standalone segments.
pub fn default_burn_in(p: usize) -> usize {
    500.max(50 * p)
}

/// Evaluates one chart on a history-plus-block buffer without allocating.
struct Evaluator<'a, T: Real> {
    design: &'a ChartDesign<T>,
    c: Vec<T>,
    phis: &'a [Matrix<T>],
    p: usize,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(design: &'a ChartDesign<T>, chart_model: &'a VarModel<T>, data_p: usize) -> Result<Self> {
        if design.v != chart_model.v() {
            return Err(Error::DimensionMismatch {
                expected: format!("model of dimension {}", design.v),
                found: chart_model.v().to_string(),
            });
        }
        if design.mode == ChartMode::Residuals && chart_model.p() > data_p {
            return Err(Error::MissingHistory {
                needed: chart_model.p(),
                found: data_p,
            });
        }
        Ok(Self {
            design,
            c: chart_model.intercept(),
            phis: chart_model.phis(),
            p: data_p,
        })
    }

    fn signals(&self, buf: &[T], mean: &mut [T]) -> bool {
        let (v, n) = (self.design.v, self.design.n);
        mean.iter_mut().for_each(|m| *m = T::zero());
        for j in 0..n {
            let r = self.p + j;
            for a in 0..v {
                let mut x = buf[r * v + a];
                if self.design.mode == ChartMode::Residuals {
                    x = x - self.c[a];
                    for (i, phi) in self.phis.iter().enumerate() {
                        let prev = (r - 1 - i) * v;
                        for b in 0..v {
                            x = x - phi[(a, b)] * buf[prev + b];
                        }
                    }
                }
                mean[a] = mean[a] + x;
            }
        }
        let nn = T::count(n);
        for (m, &m0) in mean.iter_mut().zip(&self.design.mu0) {
            *m = *m / nn - m0;
        }
        self.design.inv_cov.quadratic_form(mean) > self.design.ucl
    }
}

fn check_options(opts: &SimOptions) -> Result<()> {
    if opts.replications == 0 || opts.max_cap == 0 {
        return Err(Error::InvalidArgument("replications and max_cap must be positive".into()));
    }
    Ok(())
}

fn censoring_check(censored: usize, opts: &SimOptions) -> Result<()> {
    if censored as f64 > MAX_CENSORED_FRACTION * opts.replications as f64 {
        return Err(Error::ExcessiveCensoring {
            censored,
            replications: opts.replications,
            cap: opts.max_cap,
        });
    }
    Ok(())
}

/// Runs every chart in `evals` on one shared stream of blocks until all have
/// signalled or the cap is reached; returns each chart's run length.
fn joint_run_lengths<T: Real>(sim: &Simulator<T>, evals: &[Evaluator<'_, T>], n: usize, opts: &SimOptions, rep: usize) -> Vec<usize> {
    let mut rng = RngStream::new(opts.master_seed, rep as u64).rng();
    let mut buf = Vec::new();
    let mut eps = vec![T::zero(); sim.v];
    let mut mean = vec![T::zero(); sim.v];
    let mut rl = vec![0usize; evals.len()];
    let mut open = evals.len();
    for t in 1..=opts.max_cap {
        if t == 1 || opts.sampling == Sampling::Independent {
            sim.fresh_block(&mut rng, n, &mut buf, &mut eps);
        } else {
            sim.continue_block(&mut rng, n, &mut buf, &mut eps);
        }
        for (k, ev) in evals.iter().enumerate() {
            if rl[k] == 0 && ev.signals(&buf, &mut mean) {
                rl[k] = t;
                open -= 1;
            }
        }
        if open == 0 {
            break;
        }
    }
    rl
}

/// Monte-Carlo run length of `design` on data from `data_model`.
///
/// `chart_model` supplies the in-control dynamics the chart was built from
/// (used for residuals); `data_model` generates the observations.
pub fn simulate_run_length<T: Real>(
    design: &ChartDesign<T>,
    chart_model: &VarModel<T>,
    data_model: &VarModel<T>,
    opts: &SimOptions,
) -> Result<RunLengthResult> {
    check_options(opts)?;
    let sim = Simulator::new(data_model)?;
    let evals = [Evaluator::new(design, chart_model, sim.p)?];
    let lengths: Vec<usize> = (0..opts.replications)
        .into_par_iter()
        .map(|rep| joint_run_lengths(&sim, &evals, design.n, opts, rep)[0])
        .collect();
    let censored = lengths.iter().filter(|&&l| l == 0).count();
    censoring_check(censored, opts)?;
    let vals: Vec<f64> = lengths
        .iter()
        .map(|&l| if l == 0 { opts.max_cap } else { l } as f64)
        .collect();
    let r = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / r;
    let var = if vals.len() > 1 {
        vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    Ok(RunLengthResult {
        replications: opts.replications,
        mean_rl: mean,
        std_error: (var / r).sqrt(),
        max_cap: opts.max_cap,
        censored_count: censored,
    })
}

/// In-control ARL of a chart designed as if observations were independent
/// (`Σ_ε/n`, χ² limit) while data follow `true_model`.
pub fn misdesign_arl0<T: Real>(true_model: &VarModel<T>, n: usize, alpha: T, opts: &SimOptions) -> Result<RunLengthResult> {
    let ucl = crate::charts::phase2_ucl(alpha, true_model.v())?;
    let sigma = true_model.sigma_eps().scale(T::one() / T::count(n.max(1)));
    let design = ChartDesign::from_parts(
        ChartMode::Observations,
        Phase::Two,
        n,
        true_model.mu().to_vec(),
        sigma,
        alpha,
        ucl,
    )?;
    simulate_run_length(&design, true_model, true_model, opts)
}

/// Head-to-head on one data stream: `p1 = P(R_a < R_b)`, `p2 = P(R_b < R_a)`,
/// `p3 = P(R_a = R_b)`.
pub fn first_to_signal_designs<T: Real>(
    a: &ChartDesign<T>,
    b: &ChartDesign<T>,
    chart_model: &VarModel<T>,
    data_model: &VarModel<T>,
    opts: &SimOptions,
) -> Result<FtsResult> {
    check_options(opts)?;
    if a.n != b.n {
        return Err(Error::InvalidArgument("both charts must inspect the same sample size".into()));
    }
    let sim = Simulator::new(data_model)?;
    let evals = [Evaluator::new(a, chart_model, sim.p)?, Evaluator::new(b, chart_model, sim.p)?];
    let pairs: Vec<(usize, usize)> = (0..opts.replications)
        .into_par_iter()
        .map(|rep| {
            let rl = joint_run_lengths(&sim, &evals, a.n, opts, rep);
            (rl[0], rl[1])
        })
        .collect();
    let cap = |l: usize| if l == 0 { opts.max_cap + 1 } else { l };
    let (mut n1, mut n2, mut n3, mut censored) = (0, 0, 0, 0);
    for &(ra, rb) in &pairs {
        if ra == 0 || rb == 0 {
            censored += 1;
        }
        match cap(ra).cmp(&cap(rb)) {
            std::cmp::Ordering::Less => n1 += 1,
            std::cmp::Ordering::Greater => n2 += 1,
            std::cmp::Ordering::Equal => n3 += 1,
        }
    }
    censoring_check(censored, opts)?;
    let r = opts.replications as f64;
    let (p1, p2) = (n1 as f64 / r, n2 as f64 / r);
    Ok(FtsResult {
        p1,
        p2,
        p3: 1.0 - p1 - p2,
        n1,
        n2,
        n3,
        replications: opts.replications,
        censored_count: censored,
    })
}

/// Observations chart (first) against residuals chart (second), both with
/// the χ²_v(α) limit, on data shifted by `shift`.
pub fn first_to_signal<T: Real>(
    model: &VarModel<T>,
    n: usize,
    alpha: T,
    shift: &ShiftSpec<T>,
    opts: &SimOptions,
) -> Result<FtsResult> {
    let obs = build_design(model, n, alpha, ChartMode::Observations, Phase::Two)?;
    let res = build_design(model, n, alpha, ChartMode::Residuals, Phase::Two)?;
    first_to_signal_designs(&obs, &res, model, &shift.apply(model)?, opts)
}
