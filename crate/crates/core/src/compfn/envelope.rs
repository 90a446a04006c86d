use super::{CompFnError, ComparisonFunction, KlBound, Result, Tail, EPS_REG, EPS_STRICT};

/// Collapse samples sharing an abscissa to their maximum, sorted by abscissa.
fn upper_points(samples: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if samples.is_empty() {
        return Err(CompFnError::Empty);
    }
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    for &(s, v) in &pts {
        if !(s >= 0.0) || !v.is_finite() {
            return Err(CompFnError::Invalid(format!("bad sample ({s}, {v})")));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (s, v) in pts {
        match out.last_mut() {
            Some(last) if last.0 == s => last.1 = last.1.max(v),
            _ => out.push((s, v)),
        }
    }
    Ok(out)
}

/// Smallest strictly increasing grid K-function through the origin that
/// dominates every sample.
///
/// Values are the running maximum of the sample upper envelope, lifted to at
/// least `EPS_REG * s` and nudged by `EPS_STRICT * (1 + s)` wherever they would
/// otherwise tie. Extrapolation continues the last segment's slope.
pub fn fit_k_envelope(samples: &[(f64, f64)]) -> Result<ComparisonFunction> {
    let pts = upper_points(samples)?;
    let mut grid = vec![(0.0, 0.0)];
    let mut prev = 0.0;
    for (s, v) in pts {
        if s == 0.0 {
            if v > 0.0 {
                return Err(CompFnError::StabilityAtZero(v));
            }
            continue;
        }
        let mut val = v.max(prev).max(EPS_REG * s);
        if val <= prev {
            // The nudge is below float resolution once `prev` is large.
            val = (prev + EPS_STRICT * (1.0 + s)).max(prev.next_up());
        }
        grid.push((s, val));
        prev = val;
    }
    if grid.len() == 1 {
        return ComparisonFunction::grid_k(vec![(0.0, 0.0), (1.0, EPS_REG)], Some(EPS_REG));
    }
    let n = grid.len();
    let (sa, va) = grid[n - 2];
    let (sb, vb) = grid[n - 1];
    let slope = (vb - va) / (sb - sa);
    ComparisonFunction::grid_k(grid, Some(slope))
}

/// Smallest non-increasing grid dominating every `(t, value)` sample.
///
/// The tail decays exponentially at the rate matching the last two
/// breakpoints; a flat tail keeps its value so callers can see that the
/// samples never decayed.
pub fn fit_l_envelope(samples: &[(f64, f64)]) -> Result<ComparisonFunction> {
    let mut pts = upper_points(samples)?;
    let mut run = 0.0f64;
    for p in pts.iter_mut().rev() {
        run = run.max(p.1.max(0.0));
        p.1 = run;
    }
    let tail = match pts.len() {
        1 => Tail::Exponential(0.0),
        n => {
            let (ta, va) = pts[n - 2];
            let (tb, vb) = pts[n - 1];
            if vb == 0.0 || va == vb {
                Tail::Exponential(0.0)
            } else {
                Tail::Exponential((va / vb).ln() / (tb - ta))
            }
        }
    };
    ComparisonFunction::grid_l(pts, tail)
}

/// KL bound `min{eta(s), sigma(t)} + EPS_REG * min(s, 1) * exp(-t)`.
pub fn kl_from_us_ua(eta: ComparisonFunction, sigma: ComparisonFunction) -> KlBound {
    KlBound::MinEnvelope { eta, sigma, eps: EPS_REG }
}
