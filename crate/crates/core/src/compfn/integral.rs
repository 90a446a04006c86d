use serde::{Deserialize, Serialize};

use super::{CompFnError, ComparisonFunction, Result};

const SIMPSON_MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if !diff.is_finite() {
        return Err(CompFnError::Invalid("quadrature produced a non-finite value".into()));
    }
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return Ok(left + right + diff / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// `rho(s) = exp(∫_1^s k / a(q) dq)` for a positive rate function `a`.
///
/// The log of `rho` is tabulated on log-spaced nodes spanning `[q_lo, q_hi]`;
/// evaluation integrates from the nearest node below `s`, so values stay
/// accurate to the quadrature tolerance anywhere above `q_lo`. Below `q_lo`
/// the function is continued linearly to the origin to keep it class K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpIntegral {
    pub rate: ComparisonFunction,
    pub k: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    /// `(q, ln rho(q))` pairs, strictly increasing in `q`.
    pub nodes: Vec<(f64, f64)>,
    pub rel_tol: f64,
}

impl ExpIntegral {
    pub fn new(rate: ComparisonFunction, k: f64, q_lo: f64, q_hi: f64, rel_tol: f64) -> Result<Self> {
        if !(k > 0.0) || !(q_lo > 0.0) || !(q_hi > q_lo) {
            return Err(CompFnError::Invalid(format!("need k > 0 and 0 < q_lo < q_hi (k = {k}, q_lo = {q_lo}, q_hi = {q_hi})")));
        }
        let mut me = Self { rate, k, q_lo, q_hi, nodes: Vec::new(), rel_tol };
        let decades = (q_hi / q_lo).log10().ceil().max(1.0);
        let count = (8.0 * decades) as usize + 1;
        let (u_lo, u_hi) = (q_lo.ln(), q_hi.ln());
        let mut qs: Vec<f64> = (0..count).map(|i| (u_lo + (u_hi - u_lo) * i as f64 / (count - 1) as f64).exp()).collect();
        // Anchor the table at q = 1 where ln rho vanishes by definition.
        if q_lo < 1.0 && q_hi > 1.0 {
            qs.push(1.0);
            qs.sort_by(|a, b| a.total_cmp(b));
            qs.dedup();
        }
        let anchor = qs
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.ln().abs().total_cmp(&b.1.ln().abs()))
            .map(|(i, _)| i)
            .expect("at least two nodes");
        let mut logs = vec![0.0; qs.len()];
        logs[anchor] = me.log_integral(1.0, qs[anchor])?;
        for i in anchor + 1..qs.len() {
            logs[i] = logs[i - 1] + me.log_integral(qs[i - 1], qs[i])?;
        }
        for i in (0..anchor).rev() {
            logs[i] = logs[i + 1] - me.log_integral(qs[i], qs[i + 1])?;
        }
        me.nodes = qs.into_iter().zip(logs).collect();
        Ok(me)
    }

    /// `∫_from^to k / a(q) dq`, integrated in the variable `u = ln q`.
    fn log_integral(&self, from: f64, to: f64) -> Result<f64> {
        if from == to {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if from < to { (from, to, 1.0) } else { (to, from, -1.0) };
        let integrand = |u: f64| -> Result<f64> {
            let q = u.exp();
            let a = self.rate.eval(q)?;
            if !(a > 0.0) {
                return Err(CompFnError::Invalid(format!("rate function vanishes at q = {q}")));
            }
            Ok(self.k * q / a)
        };
        let (ul, uh) = (lo.ln(), hi.ln());
        // Scale the tolerance by a coarse estimate of the integral.
        let coarse = (uh - ul) * integrand(0.5 * (ul + uh))?.abs();
        let tol = (self.rel_tol * coarse.max(1e-300)).max(1e-15);
        Ok(sign * adaptive_simpson(&integrand, ul, uh, tol)?)
    }

    /// Multiply `rho` by `e^by`.
    pub fn shift_log(&mut self, by: f64) {
        for node in &mut self.nodes {
            node.1 += by;
        }
    }

    pub fn ln_eval(&self, s: f64) -> Result<f64> {
        if s < self.q_lo {
            let (q0, l0) = self.nodes[0];
            return Ok(l0 + (s / q0).ln());
        }
        let idx = self.nodes.partition_point(|n| n.0 <= s).saturating_sub(1);
        let (q, l) = self.nodes[idx];
        Ok(l + self.log_integral(q, s)?)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(self.ln_eval(s)?.exp())
    }

    /// `rho'(s) = k rho(s) / a(s)` above the tabulated range's lower end.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        if s < self.q_lo {
            let (q0, l0) = self.nodes[0];
            return Ok(l0.exp() / q0);
        }
        Ok(self.k * self.eval(s)? / self.rate.eval(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomial_exact() {
        let f = |x: f64| Ok(x * x * x);
        assert_relative_eq!(adaptive_simpson(&f, 0.0, 2.0, 1e-12).unwrap(), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn linear_rate_gives_power() {
        // a(q) = 2q, k = 2 → rho(s) = s
        let rho = ExpIntegral::new(ComparisonFunction::linear(2.0), 2.0, 1e-4, 100.0, 1e-10).unwrap();
        for s in [1e-4, 0.3, 1.0, 7.0, 100.0, 250.0] {
            assert_relative_eq!(rho.eval(s).unwrap(), s, max_relative = 1e-9);
        }
        // k = 1 → rho(s) = sqrt(s)
        let rho = ExpIntegral::new(ComparisonFunction::linear(2.0), 1.0, 1e-3, 10.0, 1e-10).unwrap();
        assert_relative_eq!(rho.eval(4.0).unwrap(), 2.0, max_relative = 1e-9);
        assert_relative_eq!(rho.derivative(4.0).unwrap(), 0.25, max_relative = 1e-9);
    }

    #[test]
    fn continued_linearly_below_range() {
        let rho = ExpIntegral::new(ComparisonFunction::linear(1.0), 1.0, 0.5, 10.0, 1e-10).unwrap();
        assert_eq!(rho.eval(0.0).unwrap(), 0.0);
        assert_relative_eq!(rho.eval(0.25).unwrap(), 0.25, max_relative = 1e-9);
    }
}
