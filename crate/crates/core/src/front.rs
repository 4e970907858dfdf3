//! Traveling-wave profile of the intricacy front.
//!
//! In the frame moving with the sound-speed front, the transport equation
//! reduces to the second-order ODE
//!
//! `-3^{-1/2} g'(x) = g(x)(1 - g(x)) + g''(x)/6`
//!
//! with `g(0) = 0` at the front and `g(-∞) = 1` deep behind it. Linearizing
//! around `g = 1` gives a tail `1 - g ≈ C e^{q x}` whose admissible exponent
//! is the positive root of `q² + 2√3 q - 6 = 0`, i.e. `q = 3 - √3`.
//!
//! The profile is computed by shooting from deep in the tail: start at
//! `x = -x0` on the asymptotic solution, integrate forward with an adaptive
//! Dormand–Prince 5(4) scheme, locate the `g = 0` crossing on the dense
//! output, and shift coordinates so the crossing sits at `x = 0`.

use crate::error::{Error, Result};

/// Front speed in the traveling-wave frame (the sound speed), `3^{-1/2}`.
pub const FRONT_SPEED: f64 = 0.5773502691896258;

/// Tail exponent of the profile: the positive root of `q² + 2√3 q - 6 = 0`,
/// which is `3 - √3`. The negative root `-3 - √3` gives an unbounded tail
/// and is rejected.
pub fn tail_exponent() -> f64 {
    let half_b = 3f64.sqrt();
    // q = -√3 + √(3 + 6)
    -half_b + (half_b * half_b + 6.0).sqrt()
}

/// Residual of the tail characteristic polynomial `q²/6 + q/√3 - 1` at `q`.
pub fn tail_characteristic_residual(q: f64) -> f64 {
    q * q / 6.0 + q / 3f64.sqrt() - 1.0
}

/// Sampled traveling-wave solution on `[-span, 0]`, front at `x = 0`.
#[derive(Debug, Clone)]
pub struct FrontProfile {
    /// Sample coordinates, uniformly spaced, ending at 0.
    pub x: Vec<f64>,
    /// Profile values `g(x)`.
    pub g: Vec<f64>,
    /// Profile slope `g'(x)` from the integrator (not finite differences).
    pub dg: Vec<f64>,
    /// Tail amplitude requested at the start point.
    pub tail_amplitude: f64,
    /// Effective tail amplitude in the shifted frame: `1 - g ≈ C_eff e^{q x}`.
    pub effective_amplitude: f64,
    /// Tail exponent `q = 3 - √3`.
    pub exponent: f64,
    /// Slope at the front, `g'(0)`.
    pub slope_at_front: f64,
}

impl FrontProfile {
    /// Distance behind the front at which `g` first exceeds `level`,
    /// scanning from the front backwards.
    pub fn rise_distance(&self, level: f64) -> Option<f64> {
        for (x, g) in self.x.iter().zip(self.g.iter()).rev() {
            if *g >= level {
                return Some(-x);
            }
        }
        None
    }
}

/// g'' from the profile ODE.
fn second_derivative(g: f64, dg: f64) -> f64 {
    6.0 * (-FRONT_SPEED * dg - g * (1.0 - g))
}

fn rhs(y: [f64; 2]) -> [f64; 2] {
    [y[1], second_derivative(y[0], y[1])]
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct DenseStep {
    x0: f64,
    h: f64,
    y0: [f64; 2],
    y1: [f64; 2],
    f0: [f64; 2],
    f1: [f64; 2],
}

impl DenseStep {
    /// Cubic Hermite evaluation of (g, g') at `x` inside the step.
    fn eval(&self, x: f64) -> [f64; 2] {
        let s = (x - self.x0) / self.h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = h00 * self.y0[i]
                + h10 * self.h * self.f0[i]
                + h01 * self.y1[i]
                + h11 * self.h * self.f1[i];
        }
        out
    }

    /// Derivative of the Hermite interpolant (used for g' at the crossing).
    fn eval_derivative_of_g(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.h;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -6.0 * s * (s - 1.0);
        let dh11 = s * (3.0 * s - 2.0);
        (dh00 * self.y0[0]
            + dh10 * self.h * self.f0[0]
            + dh01 * self.y1[0]
            + dh11 * self.h * self.f1[0])
            / self.h
    }
}

fn rk4_classic(y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = rhs(y);
    let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

fn rk45_step(x: f64, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let _ = x;
    let mut k = [[0.0f64; 2]; 7];
    k[0] = rhs(y);
    for stage in 0..6 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(stage + 1) {
            yi[0] += h * A[stage][j] * kj[0];
            yi[1] += h * A[stage][j] * kj[1];
        }
        k[stage + 1] = rhs(yi);
    }
    let mut y5 = y;
    let mut y4 = y;
    for (j, kj) in k.iter().enumerate() {
        y5[0] += h * B5[j] * kj[0];
        y5[1] += h * B5[j] * kj[1];
        y4[0] += h * B4[j] * kj[0];
        y4[1] += h * B4[j] * kj[1];
    }
    let err = ((y5[0] - y4[0]).powi(2) + (y5[1] - y4[1]).powi(2)).sqrt();
    (y5, err)
}

/// Integrates the profile ODE from the asymptotic tail and returns the
/// profile sampled at spacing `dx` on `[-span, 0]` with the front at 0.
///
/// `tail_amplitude` is the constant C of the tail `1 - g = C e^{q x}`;
/// `start_depth` is the depth `x0` at which the asymptotic start values are
/// imposed (`None` picks `x0` so that `C e^{-q x0} = 1e-4`). The start value
/// `C e^{-q x0}` must not exceed 0.1 for the linearization to hold.
pub fn integrate_front(
    tail_amplitude: f64,
    start_depth: Option<f64>,
    dx: f64,
) -> Result<FrontProfile> {
    if !(tail_amplitude > 0.0 && tail_amplitude <= 0.2) {
        return Err(Error::config(format!(
            "tail amplitude must be in (0, 0.2], got {tail_amplitude}"
        )));
    }
    if !(dx > 0.0) {
        return Err(Error::config("sample spacing must be positive"));
    }
    let q = tail_exponent();
    let x0 = match start_depth {
        Some(x0) => x0,
        None => (tail_amplitude / 1e-4).ln() / q,
    };
    let u_start = tail_amplitude * (-q * x0).exp();
    if u_start > 0.1 {
        return Err(Error::config(format!(
            "start depth too shallow: tail value {u_start:.3} exceeds 0.1"
        )));
    }

    // Start on the linearized tail solution.
    let mut x = -x0;
    let mut y = [1.0 - u_start, -q * u_start];
    let mut h = 1e-3;
    let tol = 1e-12;
    let max_span = x0 + 60.0;
    let mut steps: Vec<DenseStep> = Vec::new();

    let crossing = loop {
        if x > -x0 + max_span {
            return Err(Error::numeric(format!(
                "no g = 0 crossing within {max_span} mean free paths; inconsistent parameters"
            )));
        }
        let (y_new, err) = rk45_step(x, y, h);
        let scale = tol * (1.0 + y[0].abs().max(y[1].abs()));
        if err > scale && h > 1e-12 {
            h *= 0.5 * (scale / err).powf(0.2).clamp(0.1, 1.0).max(0.1);
            continue;
        }
        let step = DenseStep {
            x0: x,
            h,
            y0: y,
            y1: y_new,
            f0: rhs(y),
            f1: rhs(y_new),
        };
        let crossed = y[0] > 0.0 && y_new[0] <= 0.0;
        steps.push(step);
        x += h;
        y = y_new;
        if crossed {
            break refine_crossing(steps.last().unwrap())?;
        }
        // Grow the step gently within the accuracy budget. The cap keeps the
        // dense output accurate enough for finite-difference residual checks.
        if err < 0.1 * scale {
            h = (h * 1.5).min(0.01);
        }
    };

    // Second pass: fixed-step classical RK4 on a grid aligned to the
    // crossing, so every sample is integrator-accurate rather than
    // interpolated. The deepest grid point still lies on the asymptotic
    // tail, where the start values are known in closed form.
    let span = crossing + x0;
    let n = (span / dx).floor() as usize;
    let x_deep = crossing - n as f64 * dx;
    let u_deep = tail_amplitude * (q * x_deep).exp();
    let mut xs = Vec::with_capacity(n + 1);
    let mut gs = Vec::with_capacity(n + 1);
    let mut dgs = Vec::with_capacity(n + 1);
    let mut y = [1.0 - u_deep, -q * u_deep];
    let substeps = 4usize;
    let h_sub = dx / substeps as f64;
    for k in 0..=n {
        xs.push((k as f64 - n as f64) * dx);
        gs.push(y[0]);
        dgs.push(y[1]);
        if k < n {
            for _ in 0..substeps {
                y = rk4_classic(y, h_sub);
            }
        }
    }

    let slope_at_front = steps.last().unwrap().eval_derivative_of_g(crossing);
    let effective_amplitude = tail_amplitude * (q * crossing).exp();
    Ok(FrontProfile {
        x: xs,
        g: gs,
        dg: dgs,
        tail_amplitude,
        effective_amplitude,
        exponent: q,
        slope_at_front,
    })
}

/// Locates the `g = 0` root inside the final step by bisection on the cubic
/// dense output, to 1e-9 in x.
fn refine_crossing(step: &DenseStep) -> Result<f64> {
    let mut lo = step.x0;
    let mut hi = step.x0 + step.h;
    let g_lo = step.eval(lo)[0];
    if g_lo <= 0.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if step.eval(mid)[0] > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::numeric("crossing refinement did not converge"))
}
