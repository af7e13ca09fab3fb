//! Least-squares estimators: saturable Kerr curve, n₂ from slope and
//! transmission, and the I_sat(n) power law.

use serde::Serialize;

use crate::config::{exciton_energy, ExcitonSeriesConfig};
use crate::error::{Error, Result};
use crate::interferometry::PhaseShiftCurve;
use crate::scalar::{lit, Real};

/// Parameter estimates with standard errors.
///
/// A parameter that the data cannot identify has an infinite sigma, which
/// JSON output renders as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct FitResult<T> {
    pub names: Vec<String>,
    pub params: Vec<T>,
    pub sigmas: Vec<T>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: T,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl<T: Real> FitResult<T> {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn param(&self, name: &str) -> Option<T> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn sigma(&self, name: &str) -> Option<T> {
        self.index(name).map(|i| self.sigmas[i])
    }

    /// JSON report `{params, sigmas, residual_norm, converged, iterations, warnings}`
    /// with parameters keyed by name.
    pub fn to_json(&self) -> serde_json::Value {
        let obj = |vals: &[T]| {
            serde_json::Value::Object(
                self.names
                    .iter()
                    .zip(vals)
                    .map(|(n, v)| (n.clone(), json_number(v.as_f64())))
                    .collect(),
            )
        };
        serde_json::json!({
            "params": obj(&self.params),
            "sigmas": obj(&self.sigmas),
            "residual_norm": json_number(self.residual_norm.as_f64()),
            "converged": self.converged,
            "iterations": self.iterations,
            "warnings": self.warnings,
        })
    }
}

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

/// Damping and stopping rules of the Levenberg-Marquardt solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Converged when every relative parameter change falls below this.
    pub relative_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            initial_lambda: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_iterations: 200,
            relative_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub params: Vec<T>,
    pub residuals: Vec<T>,
    /// Row-major m×p Jacobian at `params`.
    pub jacobian: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
}

/// Minimises Σ rᵢ(p)² with damped Gauss-Newton steps
/// (JᵀJ + λ·diag(JᵀJ))δ = −Jᵀr. `model` returns the residuals and the
/// row-major Jacobian ∂rᵢ/∂pⱼ.
pub fn levenberg_marquardt<T: Real>(
    mut model: impl FnMut(&[T]) -> (Vec<T>, Vec<T>),
    initial: &[T],
    options: &LmOptions,
) -> LmOutcome<T> {
    let p = initial.len();
    let mut params = initial.to_vec();
    let (mut r, mut j) = model(&params);
    let mut cost = sum_squares(&r);
    let mut lambda = lit::<T>(options.initial_lambda);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        if cost == T::zero() {
            converged = true;
            break;
        }
        let m = r.len();
        let mut jtj = vec![T::zero(); p * p];
        let mut jtr = vec![T::zero(); p];
        for i in 0..m {
            for a in 0..p {
                let ja = j[i * p + a];
                jtr[a] += ja * r[i];
                for b in 0..p {
                    jtj[a * p + b] += ja * j[i * p + b];
                }
            }
        }
        let mut a = jtj.clone();
        for k in 0..p {
            let d = jtj[k * p + k];
            a[k * p + k] += lambda * if d > T::zero() { d } else { T::one() };
        }
        let rhs: Vec<T> = jtr.iter().map(|v| -*v).collect();
        let Some(step) = solve_dense(a, rhs, p) else {
            lambda *= lit(options.lambda_up);
            continue;
        };
        let trial: Vec<T> = params.iter().zip(&step).map(|(x, d)| *x + *d).collect();
        let (r_new, j_new) = model(&trial);
        let new_cost = sum_squares(&r_new);
        let small = step
            .iter()
            .zip(&params)
            .all(|(d, x)| d.abs() <= lit::<T>(options.relative_tolerance) * (x.abs() + lit(1e-300)));
        if new_cost.is_finite() && new_cost <= cost {
            params = trial;
            r = r_new;
            j = j_new;
            cost = new_cost;
            lambda *= lit(options.lambda_down);
            if small {
                converged = true;
                break;
            }
        } else {
            lambda *= lit(options.lambda_up);
            if small || !lambda.is_finite() {
                converged = small;
                break;
            }
        }
    }
    LmOutcome {
        params,
        residuals: r,
        jacobian: j,
        converged,
        iterations,
    }
}

fn sum_squares<T: Real>(r: &[T]) -> T {
    r.iter().map(|v| *v * *v).sum()
}

/// Gaussian elimination with partial pivoting; `None` for a singular matrix.
fn solve_dense<T: Real>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Option<Vec<T>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| {
            a[x * n + col]
                .abs()
                .partial_cmp(&a[y * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[pivot * n + col].abs() > T::zero()) {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row * n + k] * x[k];
        }
        x[row] = s / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn invert<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let mut inv = vec![T::zero(); n * n];
    for c in 0..n {
        let mut e = vec![T::zero(); n];
        e[c] = T::one();
        let col = solve_dense(a.to_vec(), e, n)?;
        for r in 0..n {
            inv[r * n + c] = col[r];
        }
    }
    Some(inv)
}

/// Standard errors from (JᵀJ)⁻¹ scaled by the reduced chi-square.
fn standard_errors<T: Real>(jacobian: &[T], residuals: &[T], p: usize) -> Vec<T> {
    let m = residuals.len();
    let mut jtj = vec![T::zero(); p * p];
    for i in 0..m {
        for a in 0..p {
            for b in 0..p {
                jtj[a * p + b] += jacobian[i * p + a] * jacobian[i * p + b];
            }
        }
    }
    let dof = m.saturating_sub(p).max(1);
    let s2 = sum_squares(residuals) / T::from_usize_lossy(dof);
    match invert(&jtj, p) {
        Some(inv) => (0..p)
            .map(|k| {
                let v = inv[k * p + k] * s2;
                if v >= T::zero() {
                    v.sqrt()
                } else {
                    T::infinity()
                }
            })
            .collect(),
        None => vec![T::infinity(); p],
    }
}

/// How bin spreads enter the saturable fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Inverse-variance weights when every bin has a positive spread, otherwise none.
    #[default]
    InverseVariance,
    Unweighted,
}

/// f(I) = αI/(1 + I/I_sat).
pub fn saturable<T: Real>(intensity: T, alpha: T, isat: T) -> T {
    alpha * intensity / (T::one() + intensity / isat)
}

/// Fits f(I) = αI/(1 + I/I_sat) to a phase-shift curve. Parameters are
/// named `alpha` [rad·mm²/mW] and `isat` [mW/mm²].
pub fn fit_saturable<T: Real>(curve: &PhaseShiftCurve<T>, weighting: Weighting) -> Result<FitResult<T>> {
    curve.validate()?;
    let xs = &curve.intensities;
    let ys = &curve.mean_phase;
    let mut distinct = xs.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    let mut warnings = Vec::new();
    let names = vec!["alpha".to_string(), "isat".to_string()];
    let i_last = *xs.last().unwrap();

    if ys.iter().all(|y| *y == T::zero()) {
        warnings.push("phase curve is identically zero; saturation intensity is unidentifiable".into());
        return Ok(FitResult {
            names,
            params: vec![T::zero(), i_last],
            sigmas: vec![T::zero(), T::infinity()],
            residual_norm: T::zero(),
            converged: true,
            iterations: 0,
            warnings,
        });
    }

    let weights: Vec<T> = match weighting {
        Weighting::InverseVariance if curve.std_phase.iter().all(|s| *s > T::zero()) => {
            curve.std_phase.iter().map(|s| T::one() / *s).collect()
        }
        Weighting::InverseVariance => {
            if curve.std_phase.iter().any(|s| *s > T::zero()) {
                warnings.push("some bins have zero spread; fitting unweighted".into());
            }
            vec![T::one(); xs.len()]
        }
        Weighting::Unweighted => vec![T::one(); xs.len()],
    };

    let (alpha0, isat0) = saturable_initial_guess(xs, ys);
    let model = |p: &[T]| {
        let (alpha, isat) = (p[0], p[1].exp());
        let mut r = Vec::with_capacity(xs.len());
        let mut jac = Vec::with_capacity(2 * xs.len());
        for ((&x, &y), &w) in xs.iter().zip(ys).zip(&weights) {
            let denom = T::one() + x / isat;
            r.push(w * (alpha * x / denom - y));
            jac.push(w * x / denom);
            jac.push(w * alpha * x * x / (isat * denom * denom));
        }
        (r, jac)
    };
    let out = levenberg_marquardt(model, &[alpha0, isat0.ln()], &LmOptions::default());
    let sig = standard_errors(&out.jacobian, &out.residuals, 2);
    let isat = out.params[1].exp();
    if !out.converged {
        warnings.push(format!("no convergence after {} iterations", out.iterations));
    }
    if isat > lit::<T>(1e3) * i_last {
        warnings.push("fitted saturation intensity far exceeds the measured range".into());
    }
    Ok(FitResult {
        names,
        params: vec![out.params[0], isat],
        sigmas: vec![sig[0], isat * sig[1]],
        residual_norm: sum_squares(&out.residuals).sqrt(),
        converged: out.converged,
        iterations: out.iterations,
        warnings,
    })
}

/// α from the two lowest bins, I_sat from where φ/I falls to half of α.
fn saturable_initial_guess<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = xs.len();
    let (x0, x1, y0, y1) = (xs[0], xs[1], ys[0], ys[1]);
    let mut alpha = if x1 > x0 { (y1 - y0) / (x1 - x0) } else { y1 / x1 };
    if alpha == T::zero() || !alpha.is_finite() {
        alpha = ys[n - 1] / xs[n - 1];
    }
    let i_last = xs[n - 1];
    let half = alpha / lit(2.0);
    for (&x, &y) in xs.iter().zip(ys) {
        if x > T::zero() && (y / x) / half <= T::one() && (y / x) * alpha > T::zero() {
            return (alpha, x);
        }
    }
    let ratio = alpha * i_last / ys[n - 1];
    let isat = if ratio > T::one() && ratio.is_finite() {
        i_last / (ratio - T::one())
    } else {
        lit::<T>(10.0) * i_last
    };
    (alpha, isat)
}

/// n₂ estimate with the effective length used.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct N2Estimate<T> {
    /// [mm²/mW]
    pub n2: T,
    /// Effective interaction length [µm].
    pub effective_length: T,
    /// True when z₀ = −L/ln T exceeded L and was replaced by L.
    pub clamped: bool,
    pub warnings: Vec<String>,
}

/// n₂ = α/(k·z₀) with z₀ = −L/ln T limited to L and k = 2π/λ.
pub fn extract_n2<T: Real>(alpha: T, transmission: T, length_um: T, wavelength_nm: T) -> Result<N2Estimate<T>> {
    if !(transmission > T::zero()) {
        return Err(Error::Domain(format!("transmission must be > 0, got {transmission}")));
    }
    if !(length_um > T::zero()) || !(wavelength_nm > T::zero()) {
        return Err(Error::Domain("crystal length and wavelength must be > 0".into()));
    }
    let mut warnings = Vec::new();
    let z0 = if transmission < T::one() {
        -length_um / transmission.ln()
    } else {
        T::infinity()
    };
    let clamped = z0 > length_um;
    let effective_length = if clamped {
        warnings.push(format!(
            "absorption length {} µm exceeds the crystal length; using L = {} µm",
            z0, length_um
        ));
        length_um
    } else {
        z0
    };
    let k = T::TAU() / (wavelength_nm * lit(1e-3));
    Ok(N2Estimate {
        n2: alpha / (k * effective_length),
        effective_length,
        clamped,
        warnings,
    })
}

/// Fits I_sat = A·(n − δ)^b by linear regression of ln I_sat on ln(n − δ).
/// Parameters are named `A` and `b`.
pub fn fit_powerlaw<T: Real>(ns: &[u32], isats: &[T], delta: T) -> Result<FitResult<T>> {
    if ns.len() != isats.len() {
        return Err(Error::Domain("level and saturation-intensity lists differ in length".into()));
    }
    let mut distinct = ns.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: distinct.len(),
        });
    }
    if let Some(bad) = isats.iter().find(|v| !(**v > T::zero())) {
        return Err(Error::Domain(format!("saturation intensities must be > 0, got {bad}")));
    }
    let mut xs = Vec::with_capacity(ns.len());
    for &n in ns {
        let eff = T::from_u32(n).unwrap() - delta;
        if !(eff > T::zero()) {
            return Err(Error::Domain(format!("n − δ must be positive for n = {n}")));
        }
        xs.push(eff.ln());
    }
    let ys: Vec<T> = isats.iter().map(|v| v.ln()).collect();
    let m = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / m;
    let my = ys.iter().copied().sum::<T>() / m;
    let sxx: T = xs.iter().map(|x| (*x - mx) * (*x - mx)).sum();
    let sxy: T = xs.iter().zip(&ys).map(|(x, y)| (*x - mx) * (*y - my)).sum();
    let b = sxy / sxx;
    let ln_a = my - b * mx;
    let resid: Vec<T> = xs.iter().zip(&ys).map(|(x, y)| *y - (ln_a + b * *x)).collect();
    let rss = sum_squares(&resid);
    let s2 = rss / T::from_usize_lossy(xs.len() - 2);
    let sigma_b = (s2 / sxx).sqrt();
    let sigma_ln_a = (s2 * (T::one() / m + mx * mx / sxx)).sqrt();
    let a = ln_a.exp();
    Ok(FitResult {
        names: vec!["A".into(), "b".into()],
        params: vec![a, b],
        sigmas: vec![a * sigma_ln_a, sigma_b],
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 1,
        warnings: vec![],
    })
}

/// Energy interval between the half-maximum crossings of the absorption peak
/// nearest to the level-n resonance.
pub fn fwhm_window<T: Real>(
    energies: &[T],
    absorption: &[T],
    n: u32,
    cfg: &ExcitonSeriesConfig<T>,
) -> Result<(T, T)> {
    if energies.len() != absorption.len() || energies.len() < 3 {
        return Err(Error::UnresolvedPeak(n));
    }
    let et = exciton_energy(n, cfg)?;
    let mut i = energies
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (*a.1 - et)
                .abs()
                .partial_cmp(&(*b.1 - et).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(k, _)| k)
        .unwrap();
    // Climb to the local maximum.
    loop {
        if i + 1 < absorption.len() && absorption[i + 1] > absorption[i] {
            i += 1;
        } else if i > 0 && absorption[i - 1] > absorption[i] {
            i -= 1;
        } else {
            break;
        }
    }
    if i == 0 || i + 1 == absorption.len() {
        return Err(Error::UnresolvedPeak(n));
    }
    let half = absorption[i] / lit(2.0);
    let crossing = |dir: isize| -> Option<T> {
        let mut k = i as isize;
        loop {
            let next = k + dir;
            if next < 0 || next as usize >= absorption.len() {
                return None;
            }
            let (a, b) = (absorption[k as usize], absorption[next as usize]);
            if b > a {
                // Rising again before reaching half height: overlapping peak.
                return None;
            }
            if b <= half {
                let (ea, eb) = (energies[k as usize], energies[next as usize]);
                let t = if a > b { (a - half) / (a - b) } else { T::zero() };
                return Some(ea + (eb - ea) * t);
            }
            k = next;
        }
    };
    match (crossing(-1), crossing(1)) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(Error::UnresolvedPeak(n)),
    }
}

/// Mean of the I_sat samples whose energies lie inside the FWHM window of the
/// level-n absorption peak.
pub fn isat_near_resonance<T: Real>(
    isat: (&[T], &[T]),
    absorption: (&[T], &[T]),
    n: u32,
    cfg: &ExcitonSeriesConfig<T>,
) -> Result<T> {
    if isat.0.len() != isat.1.len() {
        return Err(Error::Domain("I_sat energies and values differ in length".into()));
    }
    let (lo, hi) = fwhm_window(absorption.0, absorption.1, n, cfg)?;
    let inside: Vec<T> = isat
        .0
        .iter()
        .zip(isat.1)
        .filter(|(e, _)| **e >= lo && **e <= hi)
        .map(|(_, v)| *v)
        .collect();
    if inside.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(inside.iter().copied().sum::<T>() / T::from_usize_lossy(inside.len()))
}
