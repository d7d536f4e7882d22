//! Phase-I identification: least-squares VAR(p) fits, AIC order selection and
//! sample autocorrelations.

use std::io::Read;

use serde::Serialize;

use crate::charts::read_labelled_csv;
use crate::error::{Error, Result};
use crate::numerics::{cholesky, log_det_spd, solve, Matrix};
use crate::scalar::Real;
use crate::var_model::{ModelDoc, VarModel};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData<T: Real> {
    pub names: Vec<String>,
    /// `T × v`, oldest first.
    pub rows: Matrix<T>,
}

impl<T: Real> TimeSeriesData<T> {
    pub fn new(names: Vec<String>, rows: Matrix<T>) -> Result<Self> {
        if names.len() != rows.cols() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} names", rows.cols()),
                found: names.len().to_string(),
            });
        }
        Ok(Self { names, rows })
    }

    /// Reads `t,<name1>,…` CSV; the `t` column is ignored beyond parsing.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let d = read_labelled_csv::<T, R>(reader)?;
        let v = d.names.len();
        let rows = Matrix::new(d.rows.len(), v, d.rows.into_iter().flatten().collect())?;
        Self::new(d.names, rows)
    }

    pub fn v(&self) -> usize {
        self.rows.cols()
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.len()).map(|i| self.rows[(i, j)]).collect()
    }
}

/// Subtracts column means; returns the centred data and the means.
pub fn center<T: Real>(data: &TimeSeriesData<T>) -> (TimeSeriesData<T>, Vec<T>) {
    let means = crate::charts::column_means(&data.rows);
    let rows = Matrix::from_fn(data.len(), data.v(), |i, j| data.rows[(i, j)] - means[j]);
    (
        TimeSeriesData {
            names: data.names.clone(),
            rows,
        },
        means,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarFit<T: Real> {
    pub model: VarModel<T>,
    pub intercept: Vec<T>,
    /// `effective_t × v`.
    pub residual_rows: Matrix<T>,
    /// `ln det` of the ML residual covariance (divisor `effective_t`).
    pub log_det_sigma: T,
    pub effective_t: usize,
    pub stationary: bool,
    pub max_modulus: T,
    /// μ̂ fell back to the sample mean because the fit is not stationary.
    pub mean_from_sample: bool,
}

impl<T: Real> VarFit<T> {
    pub fn p(&self) -> usize {
        self.model.p()
    }
}

/// Equationwise OLS with intercept on all available rows.
pub fn fit_var_ols<T: Real>(data: &TimeSeriesData<T>, p: usize) -> Result<VarFit<T>> {
    fit_from(data, p, p)
}

/// OLS using responses `X_start … X_{T−1}` (0-based), so several orders can
/// share one estimation sample.
pub fn fit_from<T: Real>(data: &TimeSeriesData<T>, p: usize, start: usize) -> Result<VarFit<T>> {
    let (tt, v) = (data.len(), data.v());
    if p == 0 || start < p {
        return Err(Error::InvalidArgument(format!("bad order/start ({p}, {start})")));
    }
    let k = v * p + 1;
    if tt < v * p + v + 10 || tt <= start + k {
        return Err(Error::InvalidArgument(format!(
            "{tt} observations are too few for a VAR({p}) in {v} variables"
        )));
    }
    let m = tt - start;
    let x = Matrix::from_fn(m, k, |r, c| {
        if c == 0 {
            T::one()
        } else {
            let (lag, col) = ((c - 1) / v + 1, (c - 1) % v);
            data.rows[(start + r - lag, col)]
        }
    });
    let y = Matrix::from_fn(m, v, |r, c| data.rows[(start + r, c)]);
    let xt = x.transpose();
    let gram = &xt * &x;
    let b = solve(&gram, &(&xt * &y)).map_err(|e| match e {
        Error::SingularMatrix { .. } => Error::RankDeficientRegressors,
        other => other,
    })?;
    let resid = &y - &(&x * &b);
    let cross = (&resid.transpose() * &resid).symmetrized();
    let sigma_ml = cross.scale(T::one() / T::count(m));
    let dof = m.checked_sub(k).filter(|&d| d > 0).ok_or(Error::RankDeficientRegressors)?;
    let sigma = cross.scale(T::one() / T::count(dof));
    let log_det = log_det_spd(&sigma_ml).map_err(|_| Error::RankDeficientRegressors)?;
    cholesky(&sigma).map_err(|_| Error::RankDeficientRegressors)?;

    // B is k × v with rows (1, X_{t−1}, …); Φ_i[a][c] = B[1 + (i−1)v + c][a]
    let intercept: Vec<T> = (0..v).map(|a| b[(0, a)]).collect();
    let phis: Vec<Matrix<T>> = (0..p)
        .map(|i| Matrix::from_fn(v, v, |a, c| b[(1 + i * v + c, a)]))
        .collect();

    let provisional = VarModel::new(vec![T::zero(); v], phis.clone(), sigma.clone())?;
    let st = provisional.stationarity()?;
    let (mu, mean_from_sample) = if st.stationary {
        let lhs = &Matrix::identity(v) - &provisional.phi_sum();
        (solve(&lhs, &Matrix::column(&intercept))?.as_slice().to_vec(), false)
    } else {
        (crate::charts::column_means(&data.rows), true)
    };
    Ok(VarFit {
        model: VarModel::new(mu, phis, sigma)?,
        intercept,
        residual_rows: resid,
        log_det_sigma: log_det,
        effective_t: m,
        stationary: st.stationary,
        max_modulus: st.max_modulus,
        mean_from_sample,
    })
}

/// `ln det Σ̃_ε + 2(p·v² + v)/T_eff`.
pub fn aic<T: Real>(fit: &VarFit<T>) -> T {
    let v = fit.model.v();
    let k = fit.p() * v * v + v;
    fit.log_det_sigma + T::lit(2.0) * T::count(k) / T::count(fit.effective_t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AicRow {
    pub p: usize,
    pub aic: f64,
    pub stationary: bool,
    pub max_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSelection {
    pub order: usize,
    pub table: Vec<AicRow>,
}

/// Fits `p = 1..=p_max` on the common sample `X_{p_max} … X_{T−1}` and picks
/// the smallest AIC. Non-stationary candidates stay in the table, flagged.
pub fn select_order<T: Real>(data: &TimeSeriesData<T>, p_max: usize) -> Result<OrderSelection> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be at least 1".into()));
    }
    let mut table = Vec::with_capacity(p_max);
    for p in 1..=p_max {
        let fit = fit_from(data, p, p_max)?;
        table.push(AicRow {
            p,
            aic: aic(&fit).as_f64(),
            stationary: fit.stationary,
            max_modulus: fit.max_modulus.as_f64(),
        });
    }
    let order = table
        .iter()
        .min_by(|a, b| a.aic.total_cmp(&b.aic))
        .map(|r| r.p)
        .unwrap_or(1);
    Ok(OrderSelection { order, table })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Acf {
    /// `r(0) … r(K)`.
    pub r: Vec<f64>,
    /// Half-width `1.96/√T` of the white-noise band.
    pub band: f64,
}

pub fn sample_acf<T: Real>(series: &[T], max_lag: usize) -> Result<Acf> {
    let n = series.len();
    if n < max_lag + 2 {
        return Err(Error::InvalidArgument(format!(
            "{n} values are too few for {max_lag} lags"
        )));
    }
    let x: Vec<f64> = series.iter().map(|v| v.as_f64()).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let r = (0..=max_lag)
        .map(|k| dev.iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect();
    Ok(Acf {
        r,
        band: 1.96 / (n as f64).sqrt(),
    })
}

/// Everything `fit` reports next to the model file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub order: usize,
    pub aic_table: Vec<AicRow>,
    pub effective_t: usize,
    pub stationary: bool,
    pub stationarity_margin: f64,
    pub mean_from_sample: bool,
    pub intercept: Vec<f64>,
    pub model: ModelDoc,
    /// Per variable: residual autocorrelations at lags 1..K.
    pub residual_acf: Vec<Acf>,
}

pub fn fit_report<T: Real>(selection: &OrderSelection, fit: &VarFit<T>) -> Result<FitReport> {
    let res = &fit.residual_rows;
    let max_lag = 20.min(res.rows().saturating_sub(2) / 4).max(1);
    let residual_acf = (0..res.cols())
        .map(|j| {
            let col: Vec<T> = (0..res.rows()).map(|i| res[(i, j)]).collect();
            sample_acf(&col, max_lag)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitReport {
        order: fit.p(),
        aic_table: selection.table.clone(),
        effective_t: fit.effective_t,
        stationary: fit.stationary,
        stationarity_margin: 1.0 - fit.max_modulus.as_f64(),
        mean_from_sample: fit.mean_from_sample,
        intercept: fit.intercept.iter().map(|x| x.as_f64()).collect(),
        model: fit.model.to_doc(),
        residual_acf,
    })
}
