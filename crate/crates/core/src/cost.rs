//! Parametric arc cost families.
//!
//! Every family is continuous, non-decreasing and non-negative on `[0, ∞)`
//! by construction; `validate` rejects parameters that would break this.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{horner, integrate, quadratic_roots};

/// Default number of grid points used for sup-norm distances.
pub const DEFAULT_GRID: usize = 4097;

const INTEGRAL_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum CostFunction {
    Constant {
        c: f64,
    },
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// `Σ_i coefficients[i]·x^i`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `q·x^β + p`.
    Bpr {
        q: f64,
        beta: f64,
        p: f64,
    },
    /// `ζ·x^β·ln^α(x+1)`.
    MonomialLog {
        zeta: f64,
        beta: f64,
        alpha: f64,
    },
    /// Linear interpolation through `(breakpoints[i], values[i])`, constant
    /// beyond the last breakpoint. The first breakpoint must be 0.
    PiecewiseLinear {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// `value_scale·inner(arg_scale·x)`.
    Scaled {
        inner: Box<CostFunction>,
        arg_scale: f64,
        value_scale: f64,
    },
    /// `inner(min(x, at))`.
    Truncated {
        inner: Box<CostFunction>,
        at: f64,
    },
    /// `inner` up to `at`, its tangent line beyond.
    Tangent {
        inner: Box<CostFunction>,
        at: f64,
    },
}

/// Derivative information of a cost function on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalBound {
    pub lo: f64,
    pub hi: f64,
    /// Upper bound on the derivative (a Lipschitz constant).
    pub lipschitz: f64,
    /// Lower bound on the derivative.
    pub deriv_min: f64,
}

/// Sup-norm distance estimate with a certified error bound:
/// `estimate ≤ true sup ≤ estimate + error_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupDistance {
    pub estimate: f64,
    pub error_bound: f64,
    pub exact: bool,
}

fn finite_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost(format!(
            "{name} must be finite and non-negative, got {v}"
        )))
    }
}

fn finite_pos(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidCost(format!(
            "{name} must be finite and positive, got {v}"
        )))
    }
}

fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else {
        x.powf(e)
    }
}

impl CostFunction {
    pub fn constant(c: f64) -> Self {
        CostFunction::Constant { c }
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        CostFunction::Affine { slope, intercept }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        CostFunction::Polynomial { coefficients }
    }

    pub fn bpr(q: f64, beta: f64, p: f64) -> Self {
        CostFunction::Bpr { q, beta, p }
    }

    pub fn monomial_log(zeta: f64, beta: f64, alpha: f64) -> Self {
        CostFunction::MonomialLog { zeta, beta, alpha }
    }

    pub fn piecewise_linear(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        CostFunction::PiecewiseLinear {
            breakpoints,
            values,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use CostFunction::*;
        match self {
            Constant { c } => finite_nonneg("c", *c),
            Affine { slope, intercept } => {
                finite_nonneg("slope", *slope)?;
                finite_nonneg("intercept", *intercept)
            }
            Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidCost(
                        "polynomial needs at least one coefficient".into(),
                    ));
                }
                coefficients
                    .iter()
                    .try_for_each(|c| finite_nonneg("coefficient", *c))
            }
            Bpr { q, beta, p } => {
                finite_nonneg("q", *q)?;
                finite_nonneg("beta", *beta)?;
                finite_nonneg("p", *p)
            }
            MonomialLog { zeta, beta, alpha } => {
                finite_nonneg("zeta", *zeta)?;
                finite_nonneg("beta", *beta)?;
                finite_nonneg("alpha", *alpha)
            }
            PiecewiseLinear {
                breakpoints,
                values,
            } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::InvalidCost(
                        "piecewise linear needs equally many (≥1) breakpoints and values".into(),
                    ));
                }
                if breakpoints[0] != 0.0 {
                    return Err(Error::InvalidCost("first breakpoint must be 0".into()));
                }
                for w in breakpoints.windows(2) {
                    if !(w[1] > w[0]) || !w[1].is_finite() {
                        return Err(Error::InvalidCost(
                            "breakpoints must be strictly increasing".into(),
                        ));
                    }
                }
                values.iter().try_for_each(|v| finite_nonneg("value", *v))?;
                if values.windows(2).any(|w| w[1] < w[0]) {
                    return Err(Error::InvalidCost("values must be non-decreasing".into()));
                }
                Ok(())
            }
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => {
                finite_pos("arg_scale", *arg_scale)?;
                finite_pos("value_scale", *value_scale)?;
                inner.validate()
            }
            Truncated { inner, at } => {
                finite_nonneg("at", *at)?;
                inner.validate()
            }
            Tangent { inner, at } => {
                finite_nonneg("at", *at)?;
                inner.validate()?;
                if !inner.derivative_value(*at).is_finite() {
                    return Err(Error::InvalidCost(format!(
                        "tangent point {at} has no finite derivative"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Checked evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeArgument(x));
        }
        Ok(self.value(x))
    }

    /// Unchecked evaluation; negative arguments are clamped to 0.
    pub fn value(&self, x: f64) -> f64 {
        use CostFunction::*;
        let x = x.max(0.0);
        match self {
            Constant { c } => *c,
            Affine { slope, intercept } => slope * x + intercept,
            Polynomial { coefficients } => horner(coefficients, x),
            Bpr { q, beta, p } => q * pow(x, *beta) + p,
            MonomialLog { zeta, beta, alpha } => zeta * pow(x, *beta) * pow(x.ln_1p(), *alpha),
            PiecewiseLinear {
                breakpoints,
                values,
            } => pwl_value(breakpoints, values, x),
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => value_scale * inner.value(arg_scale * x),
            Truncated { inner, at } => inner.value(x.min(*at)),
            Tangent { inner, at } => {
                if x <= *at {
                    inner.value(x)
                } else {
                    inner.value(*at) + inner.derivative_value(*at) * (x - at)
                }
            }
        }
    }

    /// Checked right-derivative.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeArgument(x));
        }
        Ok(self.derivative_value(x))
    }

    /// Right-derivative; may be `+∞` at 0 for sublinear power laws.
    pub fn derivative_value(&self, x: f64) -> f64 {
        use CostFunction::*;
        let x = x.max(0.0);
        match self {
            Constant { .. } => 0.0,
            Affine { slope, .. } => *slope,
            Polynomial { coefficients } => {
                let d: Vec<f64> = coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(i, c)| i as f64 * c)
                    .collect();
                horner(&d, x)
            }
            Bpr { q, beta, .. } => power_derivative(*q, *beta, x),
            MonomialLog { zeta, beta, alpha } => monolog_derivative(*zeta, *beta, *alpha, x),
            PiecewiseLinear {
                breakpoints,
                values,
            } => pwl_slope(breakpoints, values, x),
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => value_scale * arg_scale * inner.derivative_value(arg_scale * x),
            Truncated { inner, at } => {
                if x < *at {
                    inner.derivative_value(x)
                } else {
                    0.0
                }
            }
            Tangent { inner, at } => {
                if x < *at {
                    inner.derivative_value(x)
                } else {
                    inner.derivative_value(*at)
                }
            }
        }
    }

    /// Left-derivative for `x > 0`; the right-derivative at 0.
    pub fn left_derivative_value(&self, x: f64) -> f64 {
        use CostFunction::*;
        if x <= 0.0 {
            return self.derivative_value(0.0);
        }
        match self {
            PiecewiseLinear {
                breakpoints,
                values,
            } => {
                let n = breakpoints.len();
                if x > breakpoints[n - 1] {
                    return 0.0;
                }
                let i = breakpoints
                    .iter()
                    .rposition(|b| *b < x)
                    .unwrap_or(0)
                    .min(n - 2);
                (values[i + 1] - values[i]) / (breakpoints[i + 1] - breakpoints[i])
            }
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => value_scale * arg_scale * inner.left_derivative_value(arg_scale * x),
            Truncated { inner, at } => {
                if x <= *at {
                    inner.left_derivative_value(x)
                } else {
                    0.0
                }
            }
            Tangent { inner, at } => {
                if x <= *at {
                    inner.left_derivative_value(x)
                } else {
                    inner.derivative_value(*at)
                }
            }
            _ => self.derivative_value(x),
        }
    }

    /// A possible derivative kink `b` with `|x − b| ≤ rel·max(1, b)`.
    pub fn kink_near(&self, x: f64, rel: f64) -> Option<f64> {
        use CostFunction::*;
        let near = |b: f64| (x - b).abs() <= rel * b.max(1.0);
        match self {
            PiecewiseLinear { breakpoints, .. } => {
                breakpoints.iter().copied().find(|b| *b > 0.0 && near(*b))
            }
            Scaled {
                inner, arg_scale, ..
            } => inner.kink_near(arg_scale * x, rel).map(|b| b / arg_scale),
            Truncated { inner, at } | Tangent { inner, at } => {
                if near(*at) {
                    Some(*at)
                } else {
                    inner.kink_near(x, rel)
                }
            }
            _ => None,
        }
    }

    /// Whether the function is continuously differentiable at `x` with a
    /// finite derivative.
    pub fn differentiable_at(&self, x: f64) -> bool {
        use CostFunction::*;
        if !self.derivative_value(x).is_finite() {
            return false;
        }
        match self {
            PiecewiseLinear {
                breakpoints,
                values,
            } => match breakpoints.iter().position(|b| *b == x) {
                None | Some(0) => true,
                Some(i) => {
                    let left = pwl_slope(breakpoints, values, breakpoints[i - 1]);
                    left == pwl_slope(breakpoints, values, x)
                }
            },
            Scaled {
                inner, arg_scale, ..
            } => inner.differentiable_at(arg_scale * x),
            Truncated { inner, at } => {
                if x < *at {
                    inner.differentiable_at(x)
                } else {
                    x > *at || x == 0.0 || inner.derivative_value(x) == 0.0
                }
            }
            Tangent { inner, at } => x >= *at || inner.differentiable_at(x),
            _ => true,
        }
    }

    /// Checked `∫_0^x f`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeArgument(x));
        }
        Ok(self.integral_value(x))
    }

    pub fn integral_value(&self, x: f64) -> f64 {
        use CostFunction::*;
        let x = x.max(0.0);
        match self {
            Constant { c } => c * x,
            Affine { slope, intercept } => 0.5 * slope * x * x + intercept * x,
            Polynomial { coefficients } => {
                let anti: Vec<f64> = std::iter::once(0.0)
                    .chain(
                        coefficients
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c / (i as f64 + 1.0)),
                    )
                    .collect();
                horner(&anti, x)
            }
            Bpr { q, beta, p } => q * x * pow(x, *beta) / (beta + 1.0) + p * x,
            MonomialLog { zeta, beta, alpha } => {
                if *alpha == 0.0 {
                    zeta * x * pow(x, *beta) / (beta + 1.0)
                } else {
                    let f = |t: f64| zeta * pow(t, *beta) * pow(t.ln_1p(), *alpha);
                    integrate(f, 0.0, x, INTEGRAL_RTOL)
                }
            }
            PiecewiseLinear {
                breakpoints,
                values,
            } => pwl_integral(breakpoints, values, x),
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => value_scale / arg_scale * inner.integral_value(arg_scale * x),
            Truncated { inner, at } => {
                if x <= *at {
                    inner.integral_value(x)
                } else {
                    inner.integral_value(*at) + inner.value(*at) * (x - at)
                }
            }
            Tangent { inner, at } => {
                if x <= *at {
                    inner.integral_value(x)
                } else {
                    let h = x - at;
                    inner.integral_value(*at)
                        + inner.value(*at) * h
                        + 0.5 * inner.derivative_value(*at) * h * h
                }
            }
        }
    }

    /// Lower and upper bounds on the (right-)derivative over `[lo, hi]`.
    pub fn derivative_range(&self, lo: f64, hi: f64) -> (f64, f64) {
        use CostFunction::*;
        let lo = lo.max(0.0);
        let hi = hi.max(lo);
        match self {
            Constant { .. } => (0.0, 0.0),
            Affine { slope, .. } => (*slope, *slope),
            Polynomial { .. } => (self.derivative_value(lo), self.derivative_value(hi)),
            Bpr { q, beta, .. } => {
                if *q == 0.0 || *beta == 0.0 {
                    (0.0, 0.0)
                } else if *beta >= 1.0 {
                    (self.derivative_value(lo), self.derivative_value(hi))
                } else {
                    (self.derivative_value(hi), self.derivative_value(lo))
                }
            }
            MonomialLog { zeta, beta, alpha } => {
                monolog_derivative_range(*zeta, *beta, *alpha, lo, hi)
            }
            PiecewiseLinear {
                breakpoints,
                values,
            } => {
                let mut mn = f64::INFINITY;
                let mut mx = 0.0f64;
                let n = breakpoints.len();
                for i in 0..n {
                    let start = breakpoints[i];
                    let end = if i + 1 < n {
                        breakpoints[i + 1]
                    } else {
                        f64::INFINITY
                    };
                    let overlaps = if lo == hi {
                        start <= lo && lo < end
                    } else {
                        start < hi && end > lo
                    };
                    if overlaps {
                        let s = if i + 1 < n {
                            (values[i + 1] - values[i]) / (end - start)
                        } else {
                            0.0
                        };
                        mn = mn.min(s);
                        mx = mx.max(s);
                    }
                }
                (if mn.is_finite() { mn } else { 0.0 }, mx)
            }
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => {
                let (a, b) = inner.derivative_range(arg_scale * lo, arg_scale * hi);
                let k = value_scale * arg_scale;
                (k * a, k * b)
            }
            Truncated { inner, at } => {
                if lo >= *at {
                    (0.0, 0.0)
                } else {
                    let (a, b) = inner.derivative_range(lo, hi.min(*at));
                    if hi > *at {
                        (0.0, b)
                    } else {
                        (a, b)
                    }
                }
            }
            Tangent { inner, at } => {
                let s = inner.derivative_value(*at);
                if hi <= *at {
                    inner.derivative_range(lo, hi)
                } else if lo >= *at {
                    (s, s)
                } else {
                    let (a, b) = inner.derivative_range(lo, *at);
                    (a.min(s), b.max(s))
                }
            }
        }
    }

    pub fn interval_bound(&self, lo: f64, hi: f64) -> IntervalBound {
        let (deriv_min, lipschitz) = self.derivative_range(lo, hi);
        IntervalBound {
            lo,
            hi,
            lipschitz,
            deriv_min,
        }
    }

    /// A Lipschitz constant on `[0, t]` (never an underestimate).
    pub fn lipschitz_on(&self, t: f64) -> f64 {
        self.derivative_range(0.0, t).1
    }

    pub fn marginal(&self) -> Marginal<'_> {
        Marginal { f: self }
    }

    /// The function multiplied by `k > 0`.
    pub fn scale_value(&self, k: f64) -> CostFunction {
        use CostFunction::*;
        match self {
            Constant { c } => Constant { c: c * k },
            Affine { slope, intercept } => Affine {
                slope: slope * k,
                intercept: intercept * k,
            },
            Polynomial { coefficients } => Polynomial {
                coefficients: coefficients.iter().map(|c| c * k).collect(),
            },
            Bpr { q, beta, p } => Bpr {
                q: q * k,
                beta: *beta,
                p: p * k,
            },
            MonomialLog { zeta, beta, alpha } => MonomialLog {
                zeta: zeta * k,
                beta: *beta,
                alpha: *alpha,
            },
            PiecewiseLinear {
                breakpoints,
                values,
            } => PiecewiseLinear {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(|v| v * k).collect(),
            },
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => Scaled {
                inner: inner.clone(),
                arg_scale: *arg_scale,
                value_scale: value_scale * k,
            },
            Truncated { inner, at } => Truncated {
                inner: Box::new(inner.scale_value(k)),
                at: *at,
            },
            Tangent { inner, at } => Tangent {
                inner: Box::new(inner.scale_value(k)),
                at: *at,
            },
        }
    }

    /// The function `x ↦ self(u·x)` for `u > 0`.
    pub fn scale_argument(&self, u: f64) -> CostFunction {
        use CostFunction::*;
        match self {
            Constant { c } => Constant { c: *c },
            Affine { slope, intercept } => Affine {
                slope: slope * u,
                intercept: *intercept,
            },
            Polynomial { coefficients } => {
                let mut f = 1.0;
                let coefficients = coefficients
                    .iter()
                    .map(|c| {
                        let v = c * f;
                        f *= u;
                        v
                    })
                    .collect();
                Polynomial { coefficients }
            }
            Bpr { q, beta, p } => Bpr {
                q: q * pow(u, *beta),
                beta: *beta,
                p: *p,
            },
            MonomialLog { .. } => Scaled {
                inner: Box::new(self.clone()),
                arg_scale: u,
                value_scale: 1.0,
            },
            PiecewiseLinear {
                breakpoints,
                values,
            } => PiecewiseLinear {
                breakpoints: breakpoints.iter().map(|b| b / u).collect(),
                values: values.clone(),
            },
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => Scaled {
                inner: inner.clone(),
                arg_scale: arg_scale * u,
                value_scale: *value_scale,
            },
            Truncated { inner, at } => Truncated {
                inner: Box::new(inner.scale_argument(u)),
                at: at / u,
            },
            Tangent { inner, at } => Tangent {
                inner: Box::new(inner.scale_argument(u)),
                at: at / u,
            },
        }
    }

    /// Polynomial coefficients if the function is a polynomial on `[0, t]`.
    pub fn as_polynomial_on(&self, t: f64) -> Option<Vec<f64>> {
        use CostFunction::*;
        match self {
            Constant { c } => Some(vec![*c]),
            Affine { slope, intercept } => Some(vec![*intercept, *slope]),
            Polynomial { coefficients } => Some(coefficients.clone()),
            Bpr { q, beta, p } => {
                if *q == 0.0 {
                    Some(vec![*p])
                } else if beta.fract() == 0.0 && *beta <= 8.0 {
                    let mut c = vec![0.0; *beta as usize + 1];
                    c[0] += p;
                    c[*beta as usize] += q;
                    Some(c)
                } else {
                    None
                }
            }
            MonomialLog { zeta, alpha, beta } => {
                if *zeta == 0.0 {
                    Some(vec![0.0])
                } else if *alpha == 0.0 && beta.fract() == 0.0 && *beta <= 8.0 {
                    let mut c = vec![0.0; *beta as usize + 1];
                    c[*beta as usize] = *zeta;
                    Some(c)
                } else {
                    None
                }
            }
            PiecewiseLinear {
                breakpoints,
                values,
            } => {
                let i = breakpoints
                    .iter()
                    .position(|b| *b >= t)
                    .unwrap_or(breakpoints.len());
                if i <= 1 {
                    let v0 = values[0];
                    let slope = if breakpoints.len() > 1 {
                        pwl_slope(breakpoints, values, 0.0)
                    } else {
                        0.0
                    };
                    Some(vec![v0, slope])
                } else {
                    None
                }
            }
            Scaled {
                inner,
                arg_scale,
                value_scale,
            } => {
                let mut f = *value_scale;
                inner.as_polynomial_on(t * arg_scale).map(|c| {
                    c.iter()
                        .map(|ci| {
                            let v = ci * f;
                            f *= arg_scale;
                            v
                        })
                        .collect()
                })
            }
            Truncated { inner, at } | Tangent { inner, at } => {
                if *at >= t {
                    inner.as_polynomial_on(t)
                } else {
                    None
                }
            }
        }
    }

    /// Kink locations if the function is piecewise linear on `[0, t]`.
    pub fn linear_kinks_on(&self, t: f64) -> Option<Vec<f64>> {
        use CostFunction::*;
        match self {
            PiecewiseLinear { breakpoints, .. } => Some(
                breakpoints
                    .iter()
                    .copied()
                    .filter(|b| *b > 0.0 && *b < t)
                    .collect(),
            ),
            Scaled {
                inner, arg_scale, ..
            } => inner
                .linear_kinks_on(t * arg_scale)
                .map(|k| k.iter().map(|b| b / arg_scale).collect()),
            Truncated { inner, at } | Tangent { inner, at } => {
                let mut k = inner.linear_kinks_on(t.min(*at))?;
                if *at > 0.0 && *at < t {
                    k.push(*at);
                }
                Some(k)
            }
            _ => match self.as_polynomial_on(t) {
                Some(c) if trimmed_degree(&c) <= 1 => Some(Vec::new()),
                _ => None,
            },
        }
    }
}

fn power_derivative(q: f64, beta: f64, x: f64) -> f64 {
    if q == 0.0 || beta == 0.0 {
        0.0
    } else if x == 0.0 {
        if beta < 1.0 {
            f64::INFINITY
        } else if beta == 1.0 {
            q
        } else {
            0.0
        }
    } else {
        q * beta * pow(x, beta - 1.0)
    }
}

fn monolog_derivative(zeta: f64, beta: f64, alpha: f64, x: f64) -> f64 {
    if zeta == 0.0 {
        return 0.0;
    }
    if x == 0.0 {
        // f(x) ~ ζ·x^(β+α) near 0.
        let s = beta + alpha;
        return if s == 0.0 {
            0.0
        } else if s < 1.0 {
            f64::INFINITY
        } else if s == 1.0 {
            zeta
        } else {
            0.0
        };
    }
    let l = x.ln_1p();
    let t1 = if beta == 0.0 {
        0.0
    } else {
        beta * pow(x, beta - 1.0) * pow(l, alpha)
    };
    let t2 = if alpha == 0.0 {
        0.0
    } else {
        alpha * pow(x, beta) * pow(l, alpha - 1.0) / (1.0 + x)
    };
    zeta * (t1 + t2)
}

fn monolog_derivative_range(zeta: f64, beta: f64, alpha: f64, lo: f64, hi: f64) -> (f64, f64) {
    if zeta == 0.0 || (beta == 0.0 && alpha == 0.0) {
        return (0.0, 0.0);
    }
    if beta >= 1.0 && (alpha == 0.0 || alpha >= 1.0) {
        // Both derivative terms are products of non-decreasing factors.
        return (
            monolog_derivative(zeta, beta, alpha, lo),
            monolog_derivative(zeta, beta, alpha, hi),
        );
    }
    if beta >= 1.0 {
        // 0 < α < 1: ln(1+x) ≥ x/(1+x) bounds the second term by
        // α·x^(β+α−1)·(1+x)^(−α), which is increasing for β ≥ 1.
        let l = hi.ln_1p();
        let t1 = beta * pow(hi, beta - 1.0) * pow(l, alpha);
        let t2 = alpha * pow(hi, beta + alpha - 1.0) * pow(1.0 + hi, -alpha);
        let t1_lo = beta * pow(lo, beta - 1.0) * pow(lo.ln_1p(), alpha);
        return (zeta * t1_lo, zeta * (t1 + t2));
    }
    if lo == 0.0 {
        return (0.0, f64::INFINITY);
    }
    let (llo, lhi) = (lo.ln_1p(), hi.ln_1p());
    let t1 = beta * pow(lo, beta - 1.0) * pow(lhi, alpha);
    let t2 = if alpha == 0.0 {
        0.0
    } else if alpha >= 1.0 {
        alpha * pow(hi, beta) * pow(lhi, alpha - 1.0) / (1.0 + lo)
    } else {
        alpha * pow(hi, beta) * pow(llo, alpha - 1.0) / (1.0 + lo)
    };
    (0.0, zeta * (t1 + t2))
}

fn pwl_segment(breakpoints: &[f64], x: f64) -> usize {
    // Index i with breakpoints[i] ≤ x < breakpoints[i+1].
    breakpoints.partition_point(|b| *b <= x).saturating_sub(1)
}

fn pwl_value(breakpoints: &[f64], values: &[f64], x: f64) -> f64 {
    let n = breakpoints.len();
    if x >= breakpoints[n - 1] {
        return values[n - 1];
    }
    let i = pwl_segment(breakpoints, x);
    let w = (x - breakpoints[i]) / (breakpoints[i + 1] - breakpoints[i]);
    values[i] + w * (values[i + 1] - values[i])
}

fn pwl_slope(breakpoints: &[f64], values: &[f64], x: f64) -> f64 {
    let n = breakpoints.len();
    if x >= breakpoints[n - 1] {
        return 0.0;
    }
    let i = pwl_segment(breakpoints, x);
    (values[i + 1] - values[i]) / (breakpoints[i + 1] - breakpoints[i])
}

fn pwl_integral(breakpoints: &[f64], values: &[f64], x: f64) -> f64 {
    let n = breakpoints.len();
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let (a, b) = (breakpoints[i], breakpoints[i + 1]);
        if x <= a {
            return acc;
        }
        let end = x.min(b);
        acc += 0.5 * (values[i] + pwl_value(breakpoints, values, end)) * (end - a);
        if x <= b {
            return acc;
        }
    }
    acc + values[n - 1] * (x - breakpoints[n - 1])
}

fn trimmed_degree(c: &[f64]) -> usize {
    c.iter().rposition(|v| *v != 0.0).unwrap_or(0)
}

/// The marginal cost `x ↦ f(x) + x·f'(x)`.
#[derive(Debug, Clone, Copy)]
pub struct Marginal<'a> {
    f: &'a CostFunction,
}

impl Marginal<'_> {
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.f.value(0.0)
        } else {
            self.f.value(x) + x * self.f.derivative_value(x)
        }
    }

    /// `f(x) + x·f'(x⁻)`.
    pub fn left_value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.f.value(0.0)
        } else {
            self.f.value(x) + x * self.f.left_derivative_value(x)
        }
    }

    /// Sampled check that the marginal is non-decreasing on `[0, t]`,
    /// i.e. that `x·f(x)` is convex there.
    pub fn is_nondecreasing_on(&self, t: f64, samples: usize) -> bool {
        let n = samples.max(2);
        let mut prev = self.value(0.0);
        for i in 1..n {
            let x = t * i as f64 / (n - 1) as f64;
            let v = self.value(x);
            if v < prev - 1e-12 * prev.abs().max(1.0) {
                return false;
            }
            prev = v;
        }
        true
    }
}

/// `|f(x) − g(x)|`, evaluated through the coefficient difference when both
/// are polynomials on `[0, x]` so that e.g. `(x+ε) − x` gives `ε` exactly.
pub fn point_difference(f: &CostFunction, g: &CostFunction, x: f64) -> f64 {
    if f == g {
        return 0.0;
    }
    if let (Some(pf), Some(pg)) = (f.as_polynomial_on(x), g.as_polynomial_on(x)) {
        let n = pf.len().max(pg.len());
        let mut diff: Vec<f64> = (0..n)
            .map(|i| pf.get(i).copied().unwrap_or(0.0) - pg.get(i).copied().unwrap_or(0.0))
            .collect();
        let deg = trimmed_degree(&diff);
        diff.truncate(deg + 1);
        if diff[deg] < 0.0 {
            diff.iter_mut().for_each(|c| *c = -*c);
        }
        return horner(&diff, x).abs();
    }
    (f.value(x) - g.value(x)).abs()
}

/// Sup of `|f − g|` over `[0, t]` with a certified error bound.
pub fn sup_distance(f: &CostFunction, g: &CostFunction, t: f64, grid_n: usize) -> SupDistance {
    if f == g {
        return SupDistance {
            estimate: 0.0,
            error_bound: 0.0,
            exact: true,
        };
    }
    if t <= 0.0 {
        return SupDistance {
            estimate: (f.value(0.0) - g.value(0.0)).abs(),
            error_bound: 0.0,
            exact: true,
        };
    }
    if let (Some(pf), Some(pg)) = (f.as_polynomial_on(t), g.as_polynomial_on(t)) {
        let n = pf.len().max(pg.len());
        let mut diff: Vec<f64> = (0..n)
            .map(|i| pf.get(i).copied().unwrap_or(0.0) - pg.get(i).copied().unwrap_or(0.0))
            .collect();
        let deg = trimmed_degree(&diff);
        if deg <= 3 {
            diff.truncate(deg + 1);
            if diff[deg] < 0.0 {
                diff.iter_mut().for_each(|c| *c = -*c);
            }
            let mut candidates = vec![0.0, t];
            if deg >= 2 {
                let d1 = diff[1];
                let d2 = 2.0 * diff[2];
                let d3 = if deg == 3 { 3.0 * diff[3] } else { 0.0 };
                candidates.extend(
                    quadratic_roots(d1, d2, d3)
                        .into_iter()
                        .filter(|r| *r > 0.0 && *r < t),
                );
            }
            let estimate = candidates
                .iter()
                .map(|x| horner(&diff, *x).abs())
                .fold(0.0, f64::max);
            return SupDistance {
                estimate,
                error_bound: 0.0,
                exact: true,
            };
        }
    }
    if let (Some(kf), Some(kg)) = (f.linear_kinks_on(t), g.linear_kinks_on(t)) {
        let mut candidates: Vec<f64> = kf.into_iter().chain(kg).chain([0.0, t]).collect();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        let estimate = candidates
            .iter()
            .map(|x| (f.value(*x) - g.value(*x)).abs())
            .fold(0.0, f64::max);
        return SupDistance {
            estimate,
            error_bound: 0.0,
            exact: true,
        };
    }
    let n = grid_n.max(2);
    let mut estimate = 0.0f64;
    for i in 0..n {
        let x = t * i as f64 / (n - 1) as f64;
        estimate = estimate.max((f.value(x) - g.value(x)).abs());
    }
    let m = f.lipschitz_on(t) + g.lipschitz_on(t);
    SupDistance {
        estimate,
        error_bound: m * t / (2.0 * (n - 1) as f64),
        exact: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_evaluations() {
        assert_eq!(CostFunction::bpr(1.0, 1.0, 0.0).eval(0.7).unwrap(), 0.7);
        assert_eq!(
            CostFunction::monomial_log(1.0, 1.0, 1.0).eval(0.0).unwrap(),
            0.0
        );
        let eps = 0.01;
        assert_eq!(CostFunction::affine(1.0, eps).eval(0.3).unwrap(), 0.3 + eps);
        assert!(CostFunction::constant(1.0).eval(-1.0).is_err());
    }

    #[test]
    fn spec_integrals_and_derivatives() {
        assert_eq!(CostFunction::bpr(1.0, 1.0, 0.0).integral(1.0).unwrap(), 0.5);
        assert_eq!(CostFunction::constant(1.0).integral(2.5).unwrap(), 2.5);
        assert_eq!(
            CostFunction::polynomial(vec![0.0, 0.0, 1.0])
                .derivative(2.0)
                .unwrap(),
            4.0
        );
    }

    #[test]
    fn spec_lipschitz() {
        assert_eq!(CostFunction::bpr(1.0, 2.0, 0.0).lipschitz_on(1.0), 2.0);
        assert_eq!(CostFunction::constant(3.0).lipschitz_on(5.0), 0.0);
        let pwl = CostFunction::piecewise_linear(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 4.0]);
        assert_eq!(pwl.lipschitz_on(3.0), 3.0);
        assert_eq!(pwl.derivative_range(0.0, 3.0).0, 0.0);
        assert_eq!(pwl.derivative_range(0.0, 1.5), (1.0, 3.0));
    }

    #[test]
    fn spec_marginals() {
        let c = CostFunction::constant(2.0);
        assert_eq!(c.marginal().value(0.7), 2.0);
        let a = CostFunction::affine(3.0, 0.5);
        assert!((a.marginal().value(0.7) - (2.0 * 3.0 * 0.7 + 0.5)).abs() < 1e-15);
        let b = CostFunction::bpr(1.5, 2.5, 0.25);
        let x: f64 = 1.3;
        let expected = 3.5 * 1.5 * x.powf(2.5) + 0.25;
        assert!((b.marginal().value(x) - expected).abs() < 1e-12);
    }

    #[test]
    fn spec_sup_distances() {
        let eps = 0.01;
        let d = sup_distance(
            &CostFunction::affine(1.0, 0.0),
            &CostFunction::affine(1.0, eps),
            1.0,
            DEFAULT_GRID,
        );
        assert!(d.exact);
        assert_eq!(d.estimate, eps);
        let f = CostFunction::bpr(2.0, 1.5, 1.0);
        assert_eq!(sup_distance(&f, &f, 1.0, DEFAULT_GRID).estimate, 0.0);
        let sq = CostFunction::polynomial(vec![0.0, 0.0, 1.0]);
        let lin = CostFunction::bpr(1.0, 1.0, 0.0);
        let d = sup_distance(&sq, &lin, 1.0, DEFAULT_GRID);
        assert!(d.exact);
        assert!((d.estimate - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sup_distance_is_exactly_symmetric() {
        let f = CostFunction::polynomial(vec![0.3, 0.1, 0.7, 0.2]);
        let g = CostFunction::bpr(0.9, 2.0, 0.1);
        assert_eq!(sup_distance(&f, &g, 1.7, 33), sup_distance(&g, &f, 1.7, 33));
        let h = CostFunction::monomial_log(1.0, 1.0, 0.5);
        assert_eq!(sup_distance(&f, &h, 1.7, 33), sup_distance(&h, &f, 1.7, 33));
    }

    #[test]
    fn truncated_and_tangent() {
        let sq = CostFunction::polynomial(vec![0.0, 0.0, 1.0]);
        let tan = CostFunction::Tangent {
            inner: Box::new(sq.clone()),
            at: 1.0,
        };
        assert_eq!(tan.value(1.5), 2.0);
        let tr = CostFunction::Truncated {
            inner: Box::new(sq.clone()),
            at: 1.0,
        };
        assert_eq!(tr.value(2.0), tr.value(1.0));
        assert!((tr.integral_value(2.0) - (1.0 / 3.0 + 1.0)).abs() < 1e-15);
        assert!((tan.integral_value(2.0) - (1.0 / 3.0 + 1.0 + 1.0)).abs() < 1e-15);
        assert_eq!(tr.linear_kinks_on(2.0), None);
        let lin = CostFunction::Truncated {
            inner: Box::new(CostFunction::affine(1.0, 0.0)),
            at: 1.0,
        };
        assert_eq!(lin.linear_kinks_on(2.0), Some(vec![1.0]));
    }

    #[test]
    fn scale_argument_matches_composition() {
        let fams = [
            CostFunction::affine(2.0, 1.0),
            CostFunction::polynomial(vec![1.0, 0.5, 0.25]),
            CostFunction::bpr(1.0, 2.5, 0.3),
            CostFunction::monomial_log(1.0, 1.0, 1.0),
            CostFunction::piecewise_linear(vec![0.0, 1.0], vec![1.0, 3.0]),
        ];
        for f in &fams {
            let g = f.scale_argument(3.0);
            let h = f.scale_value(0.5);
            for x in [0.0, 0.2, 0.9, 4.0] {
                assert!((g.value(x) - f.value(3.0 * x)).abs() < 1e-12 * f.value(3.0 * x).max(1.0));
                assert!((h.value(x) - 0.5 * f.value(x)).abs() < 1e-14 * f.value(x).max(1.0));
            }
        }
    }

    #[test]
    fn rejects_non_monotone_parameters() {
        assert!(CostFunction::affine(-1.0, 0.0).validate().is_err());
        assert!(CostFunction::polynomial(vec![1.0, -0.1])
            .validate()
            .is_err());
        assert!(
            CostFunction::piecewise_linear(vec![0.0, 1.0], vec![2.0, 1.0])
                .validate()
                .is_err()
        );
        assert!(
            CostFunction::piecewise_linear(vec![0.5, 1.0], vec![1.0, 2.0])
                .validate()
                .is_err()
        );
        assert!(CostFunction::bpr(1.0, -0.5, 0.0).validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = CostFunction::Scaled {
            inner: Box::new(CostFunction::monomial_log(2.0, 1.0, 0.5)),
            arg_scale: 10.0,
            value_scale: 0.1,
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"family\":\"scaled\""));
        let g: CostFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
        let bpr: CostFunction =
            serde_json::from_str(r#"{"family":"bpr","params":{"q":1,"beta":4,"p":0.15}}"#).unwrap();
        assert_eq!(bpr, CostFunction::bpr(1.0, 4.0, 0.15));
    }
}
