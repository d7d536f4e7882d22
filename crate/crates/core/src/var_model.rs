//! Second-moment algebra of stationary VAR(p) processes.
//!
//! `X_t = C + Φ₁X_{t−1} + … + Φ_pX_{t−p} + ε_t`, `ε_t ~ N(0, Σ_ε)`.
//!
//! Everything here is exact given the parameters: the companion embedding,
//! the stationary covariance `Σ_Z` of the stacked state, lag covariances
//! `Γ(k)`, and the covariance of a sample mean of `n` consecutive
//! observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, kron, solve, spectral_radius, unvec, vec, Matrix};
use crate::scalar::Real;

/// Models with companion spectral radius in `[1 − STATIONARITY_MARGIN, ∞)` are
/// treated as non-stationary.
pub const STATIONARITY_MARGIN: f64 = 1e-8;

#[derive(Clone, PartialEq)]
pub struct VarModel<T: Real> {
    v: usize,
    mu: Vec<T>,
    phis: Vec<Matrix<T>>,
    sigma_eps: Matrix<T>,
}

/// VAR(1) embedding of the stacked state `Z_t = (X_t, …, X_{t−p+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionForm<T: Real> {
    pub psi: Matrix<T>,
    pub sigma_b: Matrix<T>,
    pub v: usize,
    pub p: usize,
}

/// `Γ(0) … Γ(K)`; negative lags are transposes.
#[derive(Debug, Clone, PartialEq)]
pub struct LagCovariances<T: Real> {
    pub max_lag: usize,
    pub gammas: Vec<Matrix<T>>,
}

impl<T: Real> LagCovariances<T> {
    /// `Γ(k)` for any integer lag within range.
    pub fn get(&self, k: isize) -> Option<Matrix<T>> {
        let idx = k.unsigned_abs();
        let g = self.gammas.get(idx)?;
        Some(if k < 0 { g.transpose() } else { g.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity<T> {
    pub stationary: bool,
    /// Largest companion eigenvalue modulus.
    pub max_modulus: T,
}

impl<T: Real> VarModel<T> {
    /// Validates shapes, finiteness and positive definiteness of `Σ_ε`.
    ///
    /// For `p > 1` the last coefficient matrix must be non-zero so the order is
    /// exact. A VAR(1) with `Φ₁ = 0` is accepted: it is the white-noise model.
    pub fn new(mu: Vec<T>, phis: Vec<Matrix<T>>, sigma_eps: Matrix<T>) -> Result<Self> {
        let v = mu.len();
        if v == 0 {
            return Err(Error::InvalidModel("dimension v must be at least 1".into()));
        }
        if phis.is_empty() {
            return Err(Error::InvalidModel("order p must be at least 1".into()));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("mean vector has non-finite entries".into()));
        }
        for (i, phi) in phis.iter().enumerate() {
            if phi.shape() != (v, v) {
                return Err(Error::DimensionMismatch {
                    expected: format!("Φ{} of shape ({v}, {v})", i + 1),
                    found: format!("{:?}", phi.shape()),
                });
            }
        }
        if sigma_eps.shape() != (v, v) {
            return Err(Error::DimensionMismatch {
                expected: format!("Σ_ε of shape ({v}, {v})"),
                found: format!("{:?}", sigma_eps.shape()),
            });
        }
        if phis.len() > 1 && phis.last().is_some_and(Matrix::is_zero) {
            return Err(Error::InvalidModel(format!(
                "Φ{} is zero; the order is not exact",
                phis.len()
            )));
        }
        cholesky(&sigma_eps).map_err(|e| Error::InvalidModel(format!("Σ_ε: {e}")))?;
        Ok(Self {
            v,
            mu,
            phis,
            sigma_eps,
        })
    }

    /// VAR(1) convenience constructor.
    pub fn var1(mu: Vec<T>, phi: Matrix<T>, sigma_eps: Matrix<T>) -> Result<Self> {
        Self::new(mu, vec![phi], sigma_eps)
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn p(&self) -> usize {
        self.phis.len()
    }

    pub fn mu(&self) -> &[T] {
        &self.mu
    }

    pub fn phis(&self) -> &[Matrix<T>] {
        &self.phis
    }

    pub fn sigma_eps(&self) -> &Matrix<T> {
        &self.sigma_eps
    }

    /// Same dynamics around a different mean.
    pub fn with_mu(&self, mu: Vec<T>) -> Result<Self> {
        Self::new(mu, self.phis.clone(), self.sigma_eps.clone())
    }

    /// `Σ Φ_i`.
    pub fn phi_sum(&self) -> Matrix<T> {
        self.phis
            .iter()
            .fold(Matrix::zeros(self.v, self.v), |acc, phi| &acc + phi)
    }

    /// Intercept `C = (I − ΣΦ_i)·μ`.
    pub fn intercept(&self) -> Vec<T> {
        (&Matrix::identity(self.v) - &self.phi_sum()).mul_vec(&self.mu)
    }

    pub fn companion(&self) -> CompanionForm<T> {
        let (v, p) = (self.v, self.p());
        let k = v * p;
        let mut psi = Matrix::zeros(k, k);
        for (i, phi) in self.phis.iter().enumerate() {
            psi.set_block(0, i * v, phi);
        }
        for i in 1..p {
            psi.set_block(i * v, (i - 1) * v, &Matrix::identity(v));
        }
        let mut sigma_b = Matrix::zeros(k, k);
        sigma_b.set_block(0, 0, &self.sigma_eps);
        CompanionForm { psi, sigma_b, v, p }
    }

    pub fn stationarity(&self) -> Result<Stationarity<T>> {
        let max_modulus = spectral_radius(&self.companion().psi)?;
        Ok(Stationarity {
            stationary: max_modulus < T::one() - T::lit(STATIONARITY_MARGIN),
            max_modulus,
        })
    }

    pub fn is_stationary(&self) -> bool {
        self.stationarity().is_ok_and(|s| s.stationary)
    }

    /// `Ok(())` for stationary models, [`Error::NotStationary`] otherwise.
    pub fn require_stationary(&self) -> Result<()> {
        let s = self.stationarity()?;
        if s.stationary {
            Ok(())
        } else {
            Err(Error::NotStationary {
                max_modulus: s.max_modulus.as_f64(),
            })
        }
    }

    /// Stationary covariance of the stacked state: `vec Σ_Z = (I − Ψ⊗Ψ)⁻¹ vec Σ_b`.
    pub fn sigma_z(&self) -> Result<Matrix<T>> {
        self.require_stationary()?;
        let c = self.companion();
        lyapunov(&c.psi, &c.sigma_b)
    }

    /// `Σ_X = Γ(0)`.
    pub fn sigma_x(&self) -> Result<Matrix<T>> {
        Ok(self.sigma_z()?.block(0, 0, self.v, self.v))
    }

    pub fn lag_covariances(&self, max_lag: usize) -> Result<LagCovariances<T>> {
        let sz = self.sigma_z()?;
        Ok(self.lags_from_sigma_z(&sz, max_lag))
    }

    fn lags_from_sigma_z(&self, sz: &Matrix<T>, max_lag: usize) -> LagCovariances<T> {
        let (v, p) = (self.v, self.p());
        let mut gammas: Vec<Matrix<T>> = Vec::with_capacity(max_lag + 1);
        for k in 0..=max_lag {
            let g = if k < p {
                sz.block(0, k * v, v, v)
            } else {
                self.phis
                    .iter()
                    .enumerate()
                    .fold(Matrix::zeros(v, v), |acc, (i, phi)| &acc + &(phi * &gammas[k - i - 1]))
            };
            gammas.push(if k == 0 { g.symmetrized() } else { g });
        }
        LagCovariances { max_lag, gammas }
    }

    /// `ρ(k) = D⁻¹Γ(k)D⁻¹` with `D = diag(√Γ(0)_jj)`.
    pub fn cross_correlation(&self, k: usize) -> Result<Matrix<T>> {
        let lags = self.lag_covariances(k)?;
        let d: Vec<T> = lags.gammas[0].diag().into_iter().map(|x| x.sqrt()).collect();
        let g = &lags.gammas[k];
        Ok(Matrix::from_fn(self.v, self.v, |i, j| g[(i, j)] / (d[i] * d[j])))
    }

    /// Closed-form Σ_X̄ for a VAR(1).
    pub fn sigma_xbar_var1(&self, n: usize) -> Result<Matrix<T>> {
        if self.p() != 1 {
            return Err(Error::InvalidArgument(format!(
                "closed form needs p = 1, model has p = {}",
                self.p()
            )));
        }
        self.sigma_xbar(n)
    }

    /// Covariance of the mean of `n` consecutive observations.
    ///
    /// The VAR(1) closed form is applied to the companion process `(Ψ, Σ_Z)`
    /// and the leading `v×v` block kept; for `p = 1` that is the model itself.
    pub fn sigma_xbar(&self, n: usize) -> Result<Matrix<T>> {
        check_n(n)?;
        let sz = self.sigma_z()?;
        let psi = self.companion().psi;
        let full = var1_mean_covariance(&psi, &sz, n);
        let out = full.block(0, 0, self.v, self.v).symmetrized();
        cholesky(&out)?;
        Ok(out)
    }

    /// `(1/n²) Σ_{|k|<n} (n − |k|) Γ(k)` — brute force, used as an oracle.
    pub fn sigma_xbar_direct(&self, n: usize) -> Result<Matrix<T>> {
        check_n(n)?;
        let lags = self.lag_covariances(n - 1)?;
        let nn = T::count(n);
        let mut acc = lags.gammas[0].scale(nn);
        for k in 1..n {
            let w = nn - T::count(k);
            let g = &lags.gammas[k];
            acc = &acc + &(&g.scale(w) + &g.transpose().scale(w));
        }
        Ok(acc.scale(T::one() / (nn * nn)).symmetrized())
    }

    pub fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            v: self.v,
            p: self.p(),
            mu: self.mu.iter().map(|x| x.as_f64()).collect(),
            phi: self.phis.iter().map(|m| m.to_f64().as_slice().to_vec()).collect(),
            sigma_eps: self.sigma_eps.to_f64().as_slice().to_vec(),
        }
    }

    pub fn from_doc(doc: &ModelDoc) -> Result<Self> {
        let v = doc.v;
        if doc.mu.len() != v {
            return Err(Error::Parse(format!("mu has {} entries, v = {v}", doc.mu.len())));
        }
        if doc.phi.len() != doc.p {
            return Err(Error::Parse(format!(
                "phi lists {} matrices, p = {}",
                doc.phi.len(),
                doc.p
            )));
        }
        let mat = |data: &[f64], what: &str| -> Result<Matrix<T>> {
            if data.len() != v * v {
                return Err(Error::Parse(format!("{what} has {} entries, expected {}", data.len(), v * v)));
            }
            Matrix::new(v, v, data.iter().map(|&x| T::lit(x)).collect())
        };
        let phis = doc
            .phi
            .iter()
            .enumerate()
            .map(|(i, d)| mat(d, &format!("phi[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let sigma = mat(&doc.sigma_eps, "sigma_eps")?;
        Self::new(doc.mu.iter().map(|&x| T::lit(x)).collect(), phis, sigma)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }
}

impl<T: Real> std::fmt::Debug for VarModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VarModel")
            .field("v", &self.v)
            .field("p", &self.p())
            .field("mu", &self.mu)
            .field("phis", &self.phis)
            .field("sigma_eps", &self.sigma_eps)
            .finish()
    }
}

/// On-disk model format; all matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub v: usize,
    pub p: usize,
    pub mu: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub sigma_eps: Vec<f64>,
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size n must be at least 1".into()));
    }
    Ok(())
}

/// Solves `S = A·S·Aᵀ + Q` for `S` through the Kronecker system.
fn lyapunov<T: Real>(a: &Matrix<T>, q: &Matrix<T>) -> Result<Matrix<T>> {
    let k = a.rows();
    let lhs = &Matrix::identity(k * k) - &kron(a, a);
    let s = solve(&lhs, &vec(q))?;
    Ok(unvec(&s, k, k)?.symmetrized())
}

/// `Λ(Φ) = Σ_{k=1}^{n−1} Φᵏ`, `Π(Φ) = Σ_{k=1}^{n−1} k·Φᵏ` by direct summation.
pub fn lambda_pi<T: Real>(phi: &Matrix<T>, n: usize) -> (Matrix<T>, Matrix<T>) {
    let k = phi.rows();
    let mut lambda = Matrix::zeros(k, k);
    let mut pi = Matrix::zeros(k, k);
    let mut power = Matrix::identity(k);
    for j in 1..n {
        power = &power * phi;
        lambda = &lambda + &power;
        pi = &pi + &power.scale(T::count(j));
    }
    (lambda, pi)
}

/// `(1/n)[Σ(I + Λ(Φᵀ) − Π(Φᵀ)/n) + (Λ(Φ) − Π(Φ)/n)Σ]`, symmetrized.
fn var1_mean_covariance<T: Real>(phi: &Matrix<T>, sigma: &Matrix<T>, n: usize) -> Matrix<T> {
    let k = phi.rows();
    let nn = T::count(n);
    let (lam, pi) = lambda_pi(phi, n);
    let inv_n = T::one() / nn;
    let right = &(&Matrix::identity(k) + &lam.transpose()) - &pi.transpose().scale(inv_n);
    let left = &lam - &pi.scale(inv_n);
    (&(sigma * &right) + &(&left * sigma)).scale(inv_n).symmetrized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::inverse;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn white(v: usize) -> VarModel<f64> {
        VarModel::var1(vec![0.0; v], Matrix::zeros(v, v), Matrix::identity(v)).unwrap()
    }

    #[test]
    fn rejects_bad_models() {
        let s = Matrix::identity(2);
        assert!(VarModel::var1(vec![0.0; 2], Matrix::zeros(3, 3), s.clone()).is_err());
        let bad = m(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            VarModel::var1(vec![0.0; 2], Matrix::zeros(2, 2), bad),
            Err(Error::InvalidModel(_))
        ));
        let r = VarModel::new(vec![0.0; 2], vec![Matrix::identity(2).scale(0.5), Matrix::zeros(2, 2)], s);
        assert!(matches!(r, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn var1_companion_is_itself() {
        let phi = m(&[&[0.5, 0.1], &[0.0, 0.3]]);
        let model = VarModel::var1(vec![1.0, 2.0], phi.clone(), Matrix::identity(2)).unwrap();
        let c = model.companion();
        assert_eq!(c.psi, phi);
        assert_eq!(c.sigma_b, Matrix::identity(2));
    }

    #[test]
    fn companion_block_layout() {
        let p1 = m(&[&[0.2, 0.1], &[0.0, 0.3]]);
        let p2 = m(&[&[-0.1, 0.05], &[0.02, 0.1]]);
        let s = m(&[&[1.0, 0.3], &[0.3, 2.0]]);
        let model = VarModel::new(vec![0.0; 2], vec![p1.clone(), p2.clone()], s.clone()).unwrap();
        let c = model.companion();
        assert_eq!(c.psi.block(0, 0, 2, 2), p1);
        assert_eq!(c.psi.block(0, 2, 2, 2), p2);
        assert_eq!(c.psi.block(2, 0, 2, 2), Matrix::identity(2));
        assert!(c.psi.block(2, 2, 2, 2).is_zero());
        assert_eq!(c.sigma_b.block(0, 0, 2, 2), s);
        assert!(c.sigma_b.block(2, 0, 2, 4).is_zero());
    }

    #[test]
    fn stationarity_checks() {
        let s = white(2).stationarity().unwrap();
        assert!(s.stationary && s.max_modulus == 0.0);
        let explosive = VarModel::var1(vec![0.0; 2], Matrix::identity(2).scale(1.1), Matrix::identity(2)).unwrap();
        assert!(!explosive.is_stationary());
        assert!(matches!(explosive.sigma_z(), Err(Error::NotStationary { .. })));
        let unit = VarModel::var1(vec![0.0], Matrix::identity(1), Matrix::identity(1)).unwrap();
        assert!(!unit.is_stationary());
    }

    #[test]
    fn white_noise_moments() {
        let s = m(&[&[2.0, 0.5], &[0.5, 1.0]]);
        let model = VarModel::var1(vec![0.0; 2], Matrix::zeros(2, 2), s.clone()).unwrap();
        assert!(model.sigma_z().unwrap().max_abs_diff(&s) < 1e-15);
        let lags = model.lag_covariances(3).unwrap();
        assert!(lags.gammas[1..].iter().all(Matrix::is_zero));
        assert!(model.sigma_xbar(5).unwrap().max_abs_diff(&s.scale(0.2)) < 1e-15);
        assert!(model.sigma_xbar_direct(5).unwrap().max_abs_diff(&s.scale(0.2)) < 1e-15);
    }

    #[test]
    fn var1_lags_are_powers() {
        let phi = m(&[&[0.5, 0.2], &[-0.1, 0.4]]);
        let model = VarModel::var1(vec![0.0; 2], phi.clone(), m(&[&[1.0, 0.4], &[0.4, 1.5]])).unwrap();
        let lags = model.lag_covariances(6).unwrap();
        let sx = &lags.gammas[0];
        for k in 0..=6 {
            let want = &phi.powi(k as u32) * sx;
            assert!(lags.gammas[k].max_abs_diff(&want) < 1e-10, "k = {k}");
        }
        // Σ_X = ΦΣ_XΦᵀ + Σ_ε
        let resid = &(&(&phi * sx) * &phi.transpose()) + model.sigma_eps();
        assert!(resid.max_abs_diff(sx) < 1e-12);
        assert_eq!(lags.get(-2).unwrap(), lags.gammas[2].transpose());
    }

    #[test]
    fn lambda_pi_matches_closed_forms() {
        let phi = m(&[&[0.5, 0.2, 0.0], &[-0.1, 0.4, 0.1], &[0.05, 0.0, -0.3]]);
        let n = 7;
        let (lam, pi) = lambda_pi(&phi, n);
        let i = Matrix::identity(3);
        let inv = inverse(&(&i - &phi)).unwrap();
        let phi_n = phi.powi(n as u32);
        let lam_cf = &inv * &(&phi - &phi_n);
        let inner = &(&i - &phi.powi(n as u32 - 1).scale(n as f64)) + &phi_n.scale((n - 1) as f64);
        let pi_cf = &(&(&phi * &inv) * &inv) * &inner;
        assert!(lam.max_abs_diff(&lam_cf) < 1e-10);
        assert!(pi.max_abs_diff(&pi_cf) < 1e-10);
        let (l1, p1) = lambda_pi(&phi, 1);
        assert!(l1.is_zero() && p1.is_zero());
    }

    #[test]
    fn mean_covariance_single_observation() {
        let phi = m(&[&[0.6, 0.1], &[0.1, 0.6]]);
        let model = VarModel::var1(vec![0.0; 2], phi, Matrix::identity(2)).unwrap();
        assert!(model.sigma_xbar(1).unwrap().max_abs_diff(&model.sigma_x().unwrap()) < 1e-14);
        let a = model.sigma_xbar_var1(4).unwrap();
        let b = model.sigma_xbar_direct(4).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn json_round_trip() {
        let p1 = m(&[&[0.2, 0.1], &[0.0, 0.3]]);
        let p2 = m(&[&[-0.1, 0.05], &[0.02, 0.1]]);
        let model = VarModel::new(vec![1.5, -2.0], vec![p1, p2], m(&[&[1.0, 0.3], &[0.3, 2.0]])).unwrap();
        let back: VarModel<f64> = VarModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
        assert!(VarModel::<f64>::from_json(r#"{"v":2,"p":1,"mu":[0],"phi":[[0,0,0,0]],"sigma_eps":[1,0,0,1]}"#).is_err());
    }

    #[test]
    fn single_precision_mean_covariance() {
        let model = VarModel::<f32>::var1(vec![0.0; 2], Matrix::identity(2).scale(0.3), Matrix::identity(2)).unwrap();
        let a = model.sigma_xbar(4).unwrap();
        let b = model.sigma_xbar_direct(4).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-5);
    }
}
