//! Hotelling T² charts on sample means of raw observations or of VAR residuals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::special::{chi2_quantile_upper, f_quantile_upper};
use crate::numerics::{spd_inverse, Matrix};
use crate::scalar::Real;
use crate::var_model::VarModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartMode {
    Observations,
    Residuals,
}

impl std::str::FromStr for ChartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "observations" | "obs" => Ok(Self::Observations),
            "residuals" | "res" => Ok(Self::Residuals),
            other => Err(Error::Parse(format!("unknown chart mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Phase {
    /// Retrospective screening of `m` samples with estimated parameters.
    One { m: usize },
    /// Prospective monitoring with known parameters.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartDesign<T: Real> {
    pub mode: ChartMode,
    pub phase: Phase,
    pub v: usize,
    pub n: usize,
    pub mu0: Vec<T>,
    /// Covariance of the charted mean: Σ_X̄ or Σ_ε/n.
    pub sigma: Matrix<T>,
    pub inv_cov: Matrix<T>,
    pub ucl: T,
    pub alpha: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock<T: Real> {
    pub t: usize,
    /// `n × v`, oldest row first.
    pub observations: Matrix<T>,
    /// The `p` rows immediately preceding the block, oldest first.
    pub history: Option<Matrix<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint<T> {
    pub t: usize,
    pub t2: T,
    pub signal: bool,
}

/// `χ²_v(α)`.
pub fn phase2_ucl<T: Real>(alpha: T, v: usize) -> Result<T> {
    check_alpha(alpha)?;
    Ok(chi2_quantile_upper(alpha, dof(v)?))
}

/// `v(m−1)(n−1)/(mn−m−v+1) · F_{α, v, mn−m−v+1}`.
pub fn phase1_ucl<T: Real>(alpha: T, v: usize, m: usize, n: usize) -> Result<T> {
    check_alpha(alpha)?;
    let d2 = (m * n) as i64 - m as i64 - v as i64 + 1;
    if d2 < 1 {
        return Err(Error::DegreesOfFreedomExhausted(d2));
    }
    let scale = T::count(v * (m - 1) * (n - 1)) / T::lit(d2 as f64);
    Ok(scale * f_quantile_upper(alpha, dof(v)?, d2 as u32))
}

fn dof(v: usize) -> Result<u32> {
    u32::try_from(v)
        .ok()
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("dimension {v} is not a valid degree of freedom")))
}

fn check_alpha<T: Real>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Limit implied by `alpha` for the given phase.
pub fn ucl_for<T: Real>(alpha: T, v: usize, n: usize, phase: Phase) -> Result<T> {
    match phase {
        Phase::Two => phase2_ucl(alpha, v),
        Phase::One { m } => phase1_ucl(alpha, v, m, n),
    }
}

impl<T: Real> ChartDesign<T> {
    /// Assembles a design from an explicit covariance of the charted mean.
    pub fn from_parts(
        mode: ChartMode,
        phase: Phase,
        n: usize,
        mu0: Vec<T>,
        sigma: Matrix<T>,
        alpha: T,
        ucl: T,
    ) -> Result<Self> {
        let v = mu0.len();
        if sigma.shape() != (v, v) {
            return Err(Error::DimensionMismatch {
                expected: format!("({v}, {v}) covariance"),
                found: format!("{:?}", sigma.shape()),
            });
        }
        check_alpha(alpha)?;
        if !(ucl > T::zero()) || !ucl.is_finite() {
            return Err(Error::InvalidArgument(format!("ucl must be positive, got {ucl}")));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("sample size n must be at least 1".into()));
        }
        let inv_cov = spd_inverse(&sigma)?;
        Ok(Self {
            mode,
            phase,
            v,
            n,
            mu0,
            sigma,
            inv_cov,
            ucl,
            alpha,
        })
    }

    pub fn t2(&self, mean: &[T]) -> Result<T> {
        t2_statistic(self, mean)
    }

    pub fn to_doc(&self) -> DesignDoc {
        DesignDoc {
            mode: self.mode,
            phase: self.phase,
            v: self.v,
            n: self.n,
            alpha: self.alpha.as_f64(),
            ucl: self.ucl.as_f64(),
            mu0: self.mu0.iter().map(|x| x.as_f64()).collect(),
            sigma: self.sigma.to_f64().as_slice().to_vec(),
            inv_cov: self.inv_cov.to_f64().as_slice().to_vec(),
        }
    }

    /// Rebuilds a design, keeping the serialized inverse verbatim.
    pub fn from_doc(doc: &DesignDoc) -> Result<Self> {
        let v = doc.v;
        let mat = |d: &[f64], what: &str| -> Result<Matrix<T>> {
            if d.len() != v * v {
                return Err(Error::Parse(format!("{what} has {} entries, expected {}", d.len(), v * v)));
            }
            Matrix::new(v, v, d.iter().map(|&x| T::lit(x)).collect())
        };
        if doc.mu0.len() != v {
            return Err(Error::Parse(format!("mu0 has {} entries, v = {v}", doc.mu0.len())));
        }
        let mut design = Self::from_parts(
            doc.mode,
            doc.phase,
            doc.n,
            doc.mu0.iter().map(|&x| T::lit(x)).collect(),
            mat(&doc.sigma, "sigma")?,
            T::lit(doc.alpha),
            T::lit(doc.ucl),
        )?;
        design.inv_cov = mat(&doc.inv_cov, "inv_cov")?;
        Ok(design)
    }
}

/// Serialized chart design; matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDoc {
    pub mode: ChartMode,
    pub phase: Phase,
    pub v: usize,
    pub n: usize,
    pub alpha: f64,
    pub ucl: f64,
    pub mu0: Vec<f64>,
    pub sigma: Vec<f64>,
    pub inv_cov: Vec<f64>,
}

/// Builds the chart for `model` at sample size `n`.
///
/// Observations mode charts `x̄` against `Σ_X̄(n)`; residuals mode charts the
/// mean residual against `Σ_ε/n` with target zero.
pub fn build_design<T: Real>(
    model: &VarModel<T>,
    n: usize,
    alpha: T,
    mode: ChartMode,
    phase: Phase,
) -> Result<ChartDesign<T>> {
    model.require_stationary()?;
    let ucl = ucl_for(alpha, model.v(), n, phase)?;
    let (mu0, sigma) = match mode {
        ChartMode::Observations => (model.mu().to_vec(), model.sigma_xbar(n)?),
        ChartMode::Residuals => (
            vec![T::zero(); model.v()],
            model.sigma_eps().scale(T::one() / T::count(n.max(1))),
        ),
    };
    ChartDesign::from_parts(mode, phase, n, mu0, sigma, alpha, ucl)
}

/// `(x̄ − μ⁰)ᵀ Σ⁻¹ (x̄ − μ⁰)`.
pub fn t2_statistic<T: Real>(design: &ChartDesign<T>, mean: &[T]) -> Result<T> {
    if mean.len() != design.v {
        return Err(Error::DimensionMismatch {
            expected: format!("mean vector of length {}", design.v),
            found: mean.len().to_string(),
        });
    }
    let d: Vec<T> = mean.iter().zip(&design.mu0).map(|(&x, &m)| x - m).collect();
    Ok(design.inv_cov.quadratic_form(&d).max(T::zero()))
}

/// One-step-ahead residuals `e_t = X_t − C − Σ Φ_i X_{t−i}` for every row of the block.
pub fn residuals<T: Real>(model: &VarModel<T>, block: &SampleBlock<T>) -> Result<Matrix<T>> {
    let (v, p) = (model.v(), model.p());
    let hist = block.history.as_ref().ok_or(Error::MissingHistory { needed: p, found: 0 })?;
    if hist.rows() < p {
        return Err(Error::MissingHistory {
            needed: p,
            found: hist.rows(),
        });
    }
    if hist.cols() != v || block.observations.cols() != v {
        return Err(Error::DimensionMismatch {
            expected: format!("{v} columns"),
            found: format!("history {:?}, block {:?}", hist.shape(), block.observations.shape()),
        });
    }
    let c = model.intercept();
    let n = block.observations.rows();
    let h0 = hist.rows();
    let row_at = |idx: isize| -> &[T] {
        // idx < 0 reaches back into the history
        if idx >= 0 {
            block.observations.row(idx as usize)
        } else {
            hist.row((h0 as isize + idx) as usize)
        }
    };
    let mut out = Matrix::zeros(n, v);
    for j in 0..n {
        let mut e: Vec<T> = block
            .observations
            .row(j)
            .iter()
            .zip(&c)
            .map(|(&x, &ci)| x - ci)
            .collect();
        for (i, phi) in model.phis().iter().enumerate() {
            let lagged = phi.mul_vec(row_at(j as isize - 1 - i as isize));
            for (ek, lk) in e.iter_mut().zip(lagged) {
                *ek = *ek - lk;
            }
        }
        for (k, ek) in e.into_iter().enumerate() {
            out[(j, k)] = ek;
        }
    }
    Ok(out)
}

/// Column means of a block of rows.
pub fn column_means<T: Real>(rows: &Matrix<T>) -> Vec<T> {
    let n = T::count(rows.rows());
    (0..rows.cols())
        .map(|j| (0..rows.rows()).map(|i| rows[(i, j)]).sum::<T>() / n)
        .collect()
}

/// T² of one block under the design's mode.
pub fn block_t2<T: Real>(design: &ChartDesign<T>, model: &VarModel<T>, block: &SampleBlock<T>) -> Result<T> {
    if block.observations.rows() != design.n {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows per block", design.n),
            found: block.observations.rows().to_string(),
        });
    }
    let mean = match design.mode {
        ChartMode::Observations => column_means(&block.observations),
        ChartMode::Residuals => column_means(&residuals(model, block)?),
    };
    t2_statistic(design, &mean)
}

pub fn monitor<T: Real>(
    design: &ChartDesign<T>,
    model: &VarModel<T>,
    blocks: &[SampleBlock<T>],
) -> Result<Vec<ChartPoint<T>>> {
    blocks
        .iter()
        .map(|b| {
            let t2 = block_t2(design, model, b)?;
            Ok(ChartPoint {
                t: b.t,
                t2,
                signal: t2 > design.ucl,
            })
        })
        .collect()
}

/// Parsed `t,<name1>,…,<namev>` file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledRows<T: Real> {
    pub names: Vec<String>,
    pub t: Vec<i64>,
    pub rows: Vec<Vec<T>>,
}

pub fn read_labelled_csv<T: Real, R: Read>(reader: R) -> Result<LabelledRows<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 || !header[0].eq_ignore_ascii_case("t") {
        return Err(Error::Parse("header must be `t,<name1>,...`".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut t = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != names.len() + 1 {
            return Err(Error::Parse(format!("row {}: expected {} fields", line + 1, names.len() + 1)));
        }
        let ti: i64 = rec[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad t `{}`", line + 1, &rec[0])))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::Parse(format!("row {}: bad number `{s}`", line + 1)))
            })
            .collect::<Result<Vec<T>>>()?;
        t.push(ti);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    Ok(LabelledRows { names, t, rows })
}

/// Groups rows into inspection blocks of `n` consecutive rows.
///
/// Leading rows labelled `t = 0` are a history preamble. Each block carries the
/// `p` rows preceding it (from the preamble or the previous block) as history
/// when that many exist. A block takes its label from `t` when all its rows
/// share one, otherwise its 1-based position.
pub fn group_blocks<T: Real>(data: &LabelledRows<T>, n: usize, p: usize) -> Result<Vec<SampleBlock<T>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size n must be at least 1".into()));
    }
    let v = data.names.len();
    let start = data.t.iter().take_while(|&&t| t == 0).count();
    let body = data.rows.len() - start;
    if !body.is_multiple_of(n) {
        return Err(Error::Parse(format!("{body} data rows do not split into blocks of {n}")));
    }
    let to_matrix = |rows: &[Vec<T>]| Matrix::new(rows.len(), v, rows.iter().flatten().copied().collect());
    let mut blocks = Vec::with_capacity(body / n);
    for (k, lo) in (start..data.rows.len()).step_by(n).enumerate() {
        let labels = &data.t[lo..lo + n];
        let t = if labels.iter().all(|&x| x == labels[0]) && labels[0] > 0 {
            labels[0] as usize
        } else {
            k + 1
        };
        let history = if p > 0 && lo >= p {
            Some(to_matrix(&data.rows[lo - p..lo])?)
        } else {
            None
        };
        blocks.push(SampleBlock {
            t,
            observations: to_matrix(&data.rows[lo..lo + n])?,
            history,
        });
    }
    Ok(blocks)
}

/// Rounds to `digits` significant digits for display.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    s.parse::<f64>().map(|r| r.to_string()).unwrap_or(s)
}

/// Writes `t,t2,ucl,signal`.
pub fn write_chart_csv<T: Real, W: Write>(mut w: W, points: &[ChartPoint<T>], ucl: T) -> Result<()> {
    writeln!(w, "t,t2,ucl,signal")?;
    for pt in points {
        writeln!(w, "{},{},{},{}", pt.t, sig(pt.t2.as_f64(), 8), sig(ucl.as_f64(), 6), pt.signal)?;
    }
    Ok(())
}
