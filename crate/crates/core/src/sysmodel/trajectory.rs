use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Method;

/// A sampled solution `x(t, t0, x0, theta)`.
///
/// Output times are stored as offsets from `t0` so that elapsed time is exact
/// even when `t0` is large.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t0: f64,
    pub dim: usize,
    pub elapsed: Vec<f64>,
    /// Row-major `elapsed.len() x dim` state table.
    pub states: Vec<f64>,
    pub theta: Vec<f64>,
    pub method: Method,
    /// Integration stopped before the horizon because a stop rule fired.
    pub stopped_early: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.elapsed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elapsed.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + self.elapsed[i]
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.elapsed.iter().copied().zip(self.states.chunks_exact(self.dim))
    }

    /// Euclidean norm of each state restricted to `components`.
    pub fn norms(&self, components: std::ops::Range<usize>) -> Vec<f64> {
        self.states.chunks_exact(self.dim).map(|x| x[components.clone()].iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// Write `t,x1,...,xn` rows using shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.time(i).to_string()];
            row.extend(self.state(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let tr = Trajectory {
            t0: 1.0,
            dim: 2,
            elapsed: vec![0.0, 0.5],
            states: vec![1.0, 2.0, 0.1, 1.0 / 3.0],
            theta: vec![],
            method: Method::Rk4 { step: 0.1 },
            stopped_early: false,
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2");
        assert_eq!(lines[1], "1,1,2");
        assert_eq!(lines[2], "1.5,0.1,0.3333333333333333");
        let parsed: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }
}
