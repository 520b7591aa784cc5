//! Least-squares fits of the log-λ scaling laws over a sweep.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{kelvin_hicks_check, r_star, DiagnosticsRecord};
use crate::domain::MeridionalDomain;
use crate::error::{Result, RingError};
use crate::rearrangement::BackgroundMode;

/// Diagnostics of every successful point of a λ sweep, plus the failed ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub domain: MeridionalDomain,
    pub w: f64,
    pub background: BackgroundMode,
    pub records: Vec<DiagnosticsRecord>,
    /// `(λ, error message)` of points that did not converge
    #[serde(default)]
    pub failures: Vec<(f64, String)>,
}

/// `y = slope x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residuals: Vec<f64>,
}

/// Ordinary least squares with the standard error of the slope.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    assert_eq!(x.len(), y.len(), "x and y must have equal length");
    let n = x.len();
    if n < 2 {
        return Err(RingError::InsufficientSweep(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(RingError::InvalidParameter("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (slope * a + intercept)).collect();
    let slope_stderr = if n > 2 {
        (residuals.iter().map(|r| r * r).sum::<f64>() / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        residuals,
    })
}

/// A fitted slope compared with its predicted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeCheck {
    pub fit: LineFit,
    pub target: Option<f64>,
    /// allowed deviation from the target
    pub tolerance: f64,
    /// whether the tolerance is relative to the target
    pub relative: bool,
    pub pass: Option<bool>,
}

impl SlopeCheck {
    fn new(fit: LineFit, target: Option<f64>, tolerance: f64, relative: bool) -> Self {
        let pass = target.map(|t| {
            let allowed = if relative { tolerance * t.abs() } else { tolerance };
            (fit.slope - t).abs() <= allowed
        });
        Self {
            fit,
            target,
            tolerance,
            relative,
            pass,
        }
    }
}

/// Per-point values entering the fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub lambda: f64,
    pub log_lambda: f64,
    pub diameter: f64,
    pub mu: f64,
    pub e_lambda: f64,
    pub dist_to_rstar: Option<f64>,
    pub kelvin_hicks_ratio: Option<f64>,
    /// passed the resolution gate and entered the fits
    pub used: bool,
}

/// Fitted scaling laws of a sweep against their predicted values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub domain: String,
    pub w: f64,
    pub r_star: Option<f64>,
    /// `log diam` against `log λ^{-1/2}`
    pub diameter_exponent: SlopeCheck,
    /// `μ` against `log λ`
    pub mu_slope: SlopeCheck,
    /// `E` against `log λ`
    pub energy_slope: SlopeCheck,
    /// distance of the core to the circle of radius r*, in sweep order
    pub dist_trend: Vec<f64>,
    pub dist_decreasing: Option<bool>,
    pub points: Vec<FitPoint>,
    pub failures: Vec<(f64, String)>,
}

/// Predicted slopes `(dμ/d log λ, dE/d log λ)` for a scaled background, if known.
pub fn predicted_slopes(domain: &MeridionalDomain, w: f64, mode: BackgroundMode) -> Option<(f64, f64)> {
    let rs = r_star(domain, w).ok()?;
    let base = w * rs * rs / 2.0;
    let extra = match (*domain, mode) {
        (MeridionalDomain::HalfPlane | MeridionalDomain::Pipe { .. }, BackgroundMode::ScaledUniform) => 0.0,
        (MeridionalDomain::ExteriorBall { d }, BackgroundMode::ExteriorBallScaled) => w * d.powi(3) / (2.0 * rs),
        _ => return None,
    };
    Some((rs / (8.0 * PI * PI) - base + extra, rs / (16.0 * PI * PI) - base + extra))
}

/// Fits the diameter exponent and the μ and E slopes on the resolved points.
pub fn fit_scalings(sweep: &SweepResult, domain: &MeridionalDomain, w: f64) -> Result<FitReport> {
    if sweep.records.iter().any(|r| r.domain != domain.kind().name()) {
        return Err(RingError::InvalidParameter("sweep mixes domain kinds".into()));
    }
    let mut records = sweep.records.clone();
    records.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let points: Vec<FitPoint> = records
        .iter()
        .map(|r| FitPoint {
            lambda: r.lambda,
            log_lambda: r.log_lambda,
            diameter: r.diameter,
            mu: r.mu,
            e_lambda: r.e_lambda,
            dist_to_rstar: r.dist_to_rstar,
            kelvin_hicks_ratio: if r.w > 0.0 { kelvin_hicks_check(r).ok() } else { None },
            used: r.resolved && r.converged,
        })
        .collect();
    let used: Vec<&FitPoint> = points.iter().filter(|p| p.used).collect();
    if used.len() < 4 {
        return Err(RingError::InsufficientSweep(used.len()));
    }
    let logl: Vec<f64> = used.iter().map(|p| p.log_lambda).collect();
    let x_diam: Vec<f64> = logl.iter().map(|l| -0.5 * l).collect();
    let y_diam: Vec<f64> = used.iter().map(|p| p.diameter.ln()).collect();
    let mus: Vec<f64> = used.iter().map(|p| p.mu).collect();
    let es: Vec<f64> = used.iter().map(|p| p.e_lambda).collect();
    let slopes = predicted_slopes(domain, w, sweep.background);
    let dist_trend: Vec<f64> = used.iter().filter_map(|p| p.dist_to_rstar).collect();
    let dist_decreasing = (dist_trend.len() == used.len()).then(|| dist_trend.windows(2).all(|p| p[1] < p[0]));
    Ok(FitReport {
        domain: domain.kind().name().to_string(),
        w,
        r_star: r_star(domain, w).ok(),
        diameter_exponent: SlopeCheck::new(fit_line(&x_diam, &y_diam)?, Some(1.0), 0.15, false),
        mu_slope: SlopeCheck::new(fit_line(&logl, &mus)?, slopes.map(|s| s.0), 0.10, true),
        energy_slope: SlopeCheck::new(fit_line(&logl, &es)?, slopes.map(|s| s.1), 0.10, true),
        dist_trend,
        dist_decreasing,
        points,
        failures: sweep.failures.clone(),
    })
}
