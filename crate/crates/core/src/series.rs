//! Time series of Bloch-vector observables and their CSV forms.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Observables on a time grid. Standard errors are present only for
/// ensemble (trajectory-averaged) series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub t: Vec<f64>,
    pub s_x: Vec<f64>,
    pub s_y: Vec<f64>,
    pub s_z: Vec<f64>,
    pub n: Vec<f64>,
    pub alpha: Vec<f64>,
    pub purity: Vec<f64>,
    pub errors: Option<StandardErrors>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub s_x: Vec<f64>,
    pub s_y: Vec<f64>,
    pub s_z: Vec<f64>,
    pub n: Vec<f64>,
    pub alpha: Vec<f64>,
    pub purity: Vec<f64>,
}

/// Contrast and purity of a Bloch vector; NaN when `n` is not positive.
pub fn alpha_and_purity(s: [f64; 3], n: f64) -> (f64, f64) {
    if n > 0.0 {
        (
            s[0].hypot(s[1]) / n,
            (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]) / (n * n),
        )
    } else {
        (f64::NAN, f64::NAN)
    }
}

impl ObservableSeries {
    pub fn with_capacity(len: usize) -> Self {
        ObservableSeries {
            t: Vec::with_capacity(len),
            s_x: Vec::with_capacity(len),
            s_y: Vec::with_capacity(len),
            s_z: Vec::with_capacity(len),
            n: Vec::with_capacity(len),
            alpha: Vec::with_capacity(len),
            purity: Vec::with_capacity(len),
            errors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Append a sample; contrast and purity are derived from `s` and `n`.
    pub fn push(&mut self, t: f64, s: [f64; 3], n: f64) {
        let (alpha, purity) = alpha_and_purity(s, n);
        self.t.push(t);
        self.s_x.push(s[0]);
        self.s_y.push(s[1]);
        self.s_z.push(s[2]);
        self.n.push(n);
        self.alpha.push(alpha);
        self.purity.push(purity);
    }

    pub fn bloch(&self, i: usize) -> ([f64; 3], f64) {
        ([self.s_x[i], self.s_y[i], self.s_z[i]], self.n[i])
    }

    pub fn last(&self) -> Option<([f64; 3], f64)> {
        (!self.is_empty()).then(|| self.bloch(self.len() - 1))
    }

    /// CSV with header `t,s_x,s_y,s_z,n,alpha,purity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,s_x,s_y,s_z,n,alpha,purity")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.t[i],
                self.s_x[i],
                self.s_y[i],
                self.s_z[i],
                self.n[i],
                self.alpha[i],
                self.purity[i]
            )?;
        }
        Ok(())
    }

    /// Ensemble CSV with header
    /// `t,alpha_mean,alpha_se,purity_mean,purity_se,n_mean,n_se,sx,sy,sz`;
    /// the Bloch columns hold `s/n`.
    pub fn write_ensemble_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,alpha_mean,alpha_se,purity_mean,purity_se,n_mean,n_se,sx,sy,sz")?;
        let nan = vec![f64::NAN; self.len()];
        let (a_se, p_se, n_se) = match &self.errors {
            Some(e) => (&e.alpha, &e.purity, &e.n),
            None => (&nan, &nan, &nan),
        };
        for i in 0..self.len() {
            let n = self.n[i];
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                self.t[i],
                self.alpha[i],
                a_se[i],
                self.purity[i],
                p_se[i],
                n,
                n_se[i],
                self.s_x[i] / n,
                self.s_y[i] / n,
                self.s_z[i] / n
            )?;
        }
        Ok(())
    }
}

/// Evenly spaced grid `start..=end` with `points` samples.
pub fn linspace(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}
