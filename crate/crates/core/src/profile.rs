//! Closed-form spatial profiles and the external force field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of uniform samples used when checking profile bounds on [0, 1].
pub const BOUND_SAMPLES: usize = 4097;

/// A scalar profile on [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `offset + amplitude * sin(2 pi frequency x)`
    Sinusoid {
        offset: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// `base + amplitude * exp(-(x - center)^2 / (2 width^2))`
    GaussianBump {
        base: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Piecewise-linear interpolation of `(x, values)`; `x` strictly increasing.
    Tabulated {
        x: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn sine(amplitude: f64) -> Self {
        Profile::Sinusoid {
            offset: 0.0,
            amplitude,
            frequency: 1.0,
        }
    }

    pub fn gaussian(base: f64, amplitude: f64, center: f64, width: f64) -> Self {
        Profile::GaussianBump {
            base,
            amplitude,
            center,
            width,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Sinusoid {
                offset,
                amplitude,
                frequency,
            } => offset + amplitude * (2.0 * std::f64::consts::PI * frequency * x).sin(),
            Profile::GaussianBump {
                base,
                amplitude,
                center,
                width,
            } => {
                let z = (x - center) / width;
                base + amplitude * (-0.5 * z * z).exp()
            }
            Profile::Tabulated { x: xs, values } => interp_linear(xs, values, x),
        }
    }

    /// Upper bound on the Lipschitz constant over [0, 1].
    pub fn lipschitz(&self) -> f64 {
        match self {
            Profile::Constant { .. } => 0.0,
            Profile::Sinusoid {
                amplitude, frequency, ..
            } => (amplitude * 2.0 * std::f64::consts::PI * frequency).abs(),
            // max |d/dx exp(-z^2/2)| = exp(-1/2) / width
            Profile::GaussianBump { amplitude, width, .. } => (amplitude / width).abs() * (-0.5f64).exp(),
            Profile::Tabulated { x, values } => x
                .windows(2)
                .zip(values.windows(2))
                .map(|(xw, vw)| ((vw[1] - vw[0]) / (xw[1] - xw[0])).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Minimum and maximum over a dense sample of [0, 1] (plus table nodes).
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        for k in 0..BOUND_SAMPLES {
            visit(self.eval(k as f64 / (BOUND_SAMPLES - 1) as f64));
        }
        if let Profile::Tabulated { x, values } = self {
            for (xi, vi) in x.iter().zip(values) {
                if (0.0..=1.0).contains(xi) {
                    visit(*vi);
                }
            }
        }
        (lo, hi)
    }

    /// Structural checks (finite parameters, well-formed tables covering [0, 1]).
    pub fn check(&self, name: &str) -> Result<()> {
        match self {
            Profile::Tabulated { x, values } => {
                if x.len() < 2 || x.len() != values.len() {
                    return Err(Error::config(format!("{name} table malformed")));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config(format!("{name} table x not increasing")));
                }
                if x[0] > 0.0 || x[x.len() - 1] < 1.0 {
                    return Err(Error::config(format!("{name} table does not cover [0,1]")));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config(format!("{name} table not finite")));
                }
            }
            Profile::GaussianBump { width, .. } if !(*width > 0.0) => {
                return Err(Error::config(format!("{name} width <= 0")));
            }
            _ => {}
        }
        let (lo, hi) = self.range();
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::config(format!("{name} not finite")));
        }
        Ok(())
    }
}

/// Piecewise-linear interpolation, constant extrapolation outside the table.
pub fn interp_linear(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return vs[0];
    }
    if x >= xs[n - 1] {
        return vs[n - 1];
    }
    let k = xs.partition_point(|&xi| xi <= x) - 1;
    let s = (x - xs[k]) / (xs[k + 1] - xs[k]);
    vs[k] + s * (vs[k + 1] - vs[k])
}

/// External force density f(t, x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// Bilinear interpolation of `values[time][space]` on the tensor grid
    /// `times x x`.
    Tabulated {
        times: Vec<f64>,
        x: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl ForceSpec {
    pub fn is_zero(&self) -> bool {
        matches!(self, ForceSpec::Zero)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Constant { value } => *value,
            ForceSpec::Tabulated { .. } => {
                let (xs, row) = self.slice_at(t);
                interp_linear(xs, &row, x)
            }
        }
    }

    /// Table row interpolated linearly in time.
    fn slice_at(&self, t: f64) -> (&[f64], Vec<f64>) {
        let ForceSpec::Tabulated { times, x, values } = self else {
            unreachable!("slice_at on a closed-form force")
        };
        let nt = times.len();
        let row = if nt == 1 || t <= times[0] {
            values[0].clone()
        } else if t >= times[nt - 1] {
            values[nt - 1].clone()
        } else {
            let k = times.partition_point(|&ti| ti <= t) - 1;
            let s = (t - times[k]) / (times[k + 1] - times[k]);
            values[k]
                .iter()
                .zip(&values[k + 1])
                .map(|(a, b)| a + s * (b - a))
                .collect()
        };
        (x.as_slice(), row)
    }

    /// `||f(t, .)||_{L^1(0,1)}`, exact for the piecewise-linear slice.
    pub fn l1_norm(&self, t: f64) -> f64 {
        match self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Constant { value } => value.abs(),
            ForceSpec::Tabulated { .. } => {
                let (xs, row) = self.slice_at(t);
                let mut acc = 0.0;
                // clip the table to [0, 1]
                let mut nodes: Vec<(f64, f64)> = vec![(0.0, interp_linear(xs, &row, 0.0))];
                for (xi, vi) in xs.iter().zip(&row) {
                    if *xi > 0.0 && *xi < 1.0 {
                        nodes.push((*xi, *vi));
                    }
                }
                nodes.push((1.0, interp_linear(xs, &row, 1.0)));
                for w in nodes.windows(2) {
                    acc += abs_linear_integral(w[1].0 - w[0].0, w[0].1, w[1].1);
                }
                acc
            }
        }
    }

    /// `||f(t, .)||_{L^inf(0,1)}`.
    pub fn sup_norm(&self, t: f64) -> f64 {
        match self {
            ForceSpec::Zero => 0.0,
            ForceSpec::Constant { value } => value.abs(),
            ForceSpec::Tabulated { .. } => {
                let (xs, row) = self.slice_at(t);
                let mut m = interp_linear(xs, &row, 0.0)
                    .abs()
                    .max(interp_linear(xs, &row, 1.0).abs());
                for (xi, vi) in xs.iter().zip(&row) {
                    if *xi > 0.0 && *xi < 1.0 {
                        m = m.max(vi.abs());
                    }
                }
                m
            }
        }
    }

    pub fn check(&self, horizon: f64) -> Result<()> {
        match self {
            ForceSpec::Zero => Ok(()),
            ForceSpec::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::config("force not finite"))
                }
            }
            ForceSpec::Tabulated { times, x, values } => {
                let increasing = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
                if times.is_empty()
                    || x.len() < 2
                    || values.len() != times.len()
                    || values.iter().any(|r| r.len() != x.len())
                    || !increasing(times)
                    || !increasing(x)
                {
                    return Err(Error::config("force table malformed"));
                }
                if times[0] > 0.0 || times[times.len() - 1] < horizon || x[0] > 0.0 || x[x.len() - 1] < 1.0 {
                    return Err(Error::config("force table does not cover [0,T]x[0,1]"));
                }
                if values.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::config("force not finite"));
                }
                Ok(())
            }
        }
    }
}

/// Integral of |g| over an interval of length h on which g is linear from a to b.
pub fn abs_linear_integral(h: f64, a: f64, b: f64) -> f64 {
    if a * b >= 0.0 {
        0.5 * h * (a.abs() + b.abs())
    } else {
        0.5 * h * (a * a + b * b) / (a.abs() + b.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_values_at_quarter_points() {
        let p = Profile::sine(0.5);
        assert!((p.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((p.eval(0.75) + 0.5).abs() < 1e-15);
        assert!(p.eval(1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_lipschitz_bounds_finite_difference() {
        let p = Profile::gaussian(0.6, 0.2, 0.5, 0.1);
        let l = p.lipschitz();
        let h = 1e-6;
        let fd_max = (0..10_000)
            .map(|k| k as f64 / 10_000.0)
            .map(|x| ((p.eval(x + h) - p.eval(x)) / h).abs())
            .fold(0.0, f64::max);
        assert!(fd_max <= l * (1.0 + 1e-4));
        assert!(fd_max >= 0.99 * l);
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let p = Profile::Tabulated {
            x: vec![0.0, 0.5, 1.0],
            values: vec![0.5, 0.7, 0.5],
        };
        assert!((p.eval(0.25) - 0.6).abs() < 1e-15);
        assert!((p.lipschitz() - 0.4).abs() < 1e-15);
        assert_eq!(p.range(), (0.5, 0.7));
    }

    #[test]
    fn table_must_cover_domain() {
        let p = Profile::Tabulated {
            x: vec![0.1, 1.0],
            values: vec![0.5, 0.5],
        };
        assert!(p.check("rho0").is_err());
    }

    #[test]
    fn force_norms() {
        let f = ForceSpec::Constant { value: -2.0 };
        assert_eq!(f.l1_norm(0.3), 2.0);
        assert_eq!(f.sup_norm(0.3), 2.0);
        // f(t, x) = x - 0.5 at every time: L1 = 1/4
        let g = ForceSpec::Tabulated {
            times: vec![0.0, 1.0],
            x: vec![0.0, 1.0],
            values: vec![vec![-0.5, 0.5], vec![-0.5, 0.5]],
        };
        assert!((g.l1_norm(0.5) - 0.25).abs() < 1e-15);
        assert!((g.eval(0.5, 0.75) - 0.25).abs() < 1e-15);
        assert_eq!(g.sup_norm(0.2), 0.5);
        assert!(g.check(1.0).is_ok());
        assert!(g.check(2.0).is_err());
    }
}
