//! Fit of the logistic sensitivity table to measured hotspot probabilities.

use super::params::{validate_table, SensAnchor};
use super::sensitivity::logistic;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// One measured point: at `delay`, a pulse of `energy` formed a hotspot with
/// probability `probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationAnchor<T> {
    pub delay: T,
    pub energy: T,
    pub probability: T,
}

/// Largest tolerated probability residual at any anchor after fitting.
pub const MAX_RESIDUAL: f64 = 0.05;

/// Least-squares fit of `(e50, slope)` per distinct delay.
///
/// Each delay group is first fitted by linear regression of logit(p) against
/// log10(E), then refined by damped Gauss-Newton on the probability residuals.
pub fn calibrate_from_anchors<T: Real>(anchors: &[CalibrationAnchor<T>]) -> Result<Vec<SensAnchor<T>>> {
    let mut delays: Vec<T> = anchors.iter().map(|a| a.delay).collect();
    delays.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    delays.dedup();
    if delays.is_empty() {
        return Err(Error::DegenerateAnchors("no anchors".into()));
    }
    let mut table = Vec::with_capacity(delays.len());
    for d in delays {
        let group: Vec<(f64, f64)> = anchors
            .iter()
            .filter(|a| a.delay == d)
            .map(|a| (a.energy.as_f64(), a.probability.as_f64()))
            .collect();
        let (e50, slope) = fit_group(d.as_f64(), &group)?;
        table.push(SensAnchor {
            delay: d,
            e50: T::lit(e50),
            slope: T::lit(slope),
        });
    }
    validate_table(&table).map_err(|e| Error::DegenerateAnchors(format!("fitted table is not monotone: {e}")))?;
    Ok(table)
}

fn fit_group(delay: f64, group: &[(f64, f64)]) -> Result<(f64, f64)> {
    if group.len() < 2 {
        return Err(Error::DegenerateAnchors(format!("delay {delay:e} s needs at least two anchors")));
    }
    for &(e, p) in group {
        if !(e > 0.0 && p > 0.0 && p < 1.0) {
            return Err(Error::DegenerateAnchors(format!(
                "anchor ({e:e} J, {p}) needs positive energy and probability in (0, 1)"
            )));
        }
    }
    let xs: Vec<f64> = group.iter().map(|(e, _)| e.log10()).collect();
    let ys: Vec<f64> = group.iter().map(|(_, p)| (p / (1.0 - p)).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx < 1e-18 {
        return Err(Error::DegenerateAnchors(format!("all anchors at delay {delay:e} s share one energy")));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let mut slope = sxy / sxx;
    if slope <= 0.0 {
        return Err(Error::DegenerateAnchors(format!(
            "probabilities at delay {delay:e} s do not increase with energy"
        )));
    }
    let mut centre = mx - my / slope; // log10 e50

    let cost = |c: f64, s: f64| -> f64 {
        xs.iter()
            .zip(group)
            .map(|(x, (_, p))| (sigmoid(s * (x - c)) - p).powi(2))
            .sum()
    };
    let mut lambda = 1e-3;
    let mut current = cost(centre, slope);
    for _ in 0..200 {
        // normal equations of the 2x2 Gauss-Newton step
        let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (x, (_, p)) in xs.iter().zip(group) {
            let q = sigmoid(slope * (x - centre));
            let w = q * (1.0 - q);
            let jc = -w * slope;
            let js = w * (x - centre);
            let r = q - p;
            a11 += jc * jc;
            a12 += jc * js;
            a22 += js * js;
            g1 += jc * r;
            g2 += js * r;
        }
        let (b11, b22) = (a11 * (1.0 + lambda), a22 * (1.0 + lambda));
        let det = b11 * b22 - a12 * a12;
        if det.abs() < 1e-300 {
            break;
        }
        let dc = -(b22 * g1 - a12 * g2) / det;
        let ds = -(b11 * g2 - a12 * g1) / det;
        let (nc, ns) = (centre + dc, slope + ds);
        let next = if ns > 0.0 { cost(nc, ns) } else { f64::INFINITY };
        if next < current {
            centre = nc;
            slope = ns;
            let converged = current - next < 1e-30;
            current = next;
            lambda *= 0.3;
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    let e50 = 10f64.powf(centre);
    let worst = group
        .iter()
        .map(|&(e, p)| (logistic(e, e50, slope) - p).abs())
        .fold(0.0, f64::max);
    if worst > MAX_RESIDUAL {
        return Err(Error::DegenerateAnchors(format!(
            "logistic fit at delay {delay:e} s leaves a residual of {worst:.3}"
        )));
    }
    Ok((e50, slope))
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}
