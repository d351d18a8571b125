//! Fixed-step trajectory simulation and energy-balance audits.
//!
//! `ż = Az + Bu`, `y = Cz + Du` is integrated with the classical fourth-order
//! Runge–Kutta scheme on a uniform grid. Audits integrate supply rates with
//! the trapezoid rule on the same grid.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{matrix_from_raw, RawMatrix};
use crate::linalg::{self, c64, CMat, CVec};
use crate::node::StateSpaceNode;
use crate::passivity::{PassivityCertificate, PassivityKind};

/// Absolute audit slack before scaling by trajectory energy.
pub const AUDIT_TOL: f64 = 1e-6;

/// Sampled state, input and output on a uniform grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVec>,
    pub inputs: Vec<CVec>,
    pub outputs: Vec<CVec>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn final_state(&self) -> &CVec {
        self.states.last().expect("trajectory has at least two samples")
    }
}

/// `z(t)` for `t ∈ [0, t_final]` on `steps` uniform intervals.
pub fn simulate<F>(
    node: &StateSpaceNode,
    z0: &CVec,
    u: F,
    t_final: f64,
    steps: usize,
) -> Result<Trajectory>
where
    F: Fn(f64) -> CVec,
{
    if steps < 2 {
        return Err(Error::InvalidArgument("steps must be at least 2".into()));
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument("t_final must be positive".into()));
    }
    if z0.len() != node.states() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, expected {}",
            z0.len(),
            node.states()
        )));
    }
    let (a, b, c, d) = (node.a(), node.b(), node.c(), node.d());
    let h = t_final / steps as f64;
    let hc = c64(h, 0.0);
    let input = |t: f64| -> Result<CVec> {
        let v = u(t);
        if v.len() != node.inputs() {
            return Err(Error::DimensionMismatch(format!(
                "input has length {}, expected {}",
                v.len(),
                node.inputs()
            )));
        }
        Ok(v)
    };
    let rhs = |z: &CVec, v: &CVec| a * z + b * v;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut z = z0.clone();
    let mut u_now = input(0.0)?;
    for k in 0..=steps {
        let t = k as f64 * h;
        outputs.push(c * &z + d * &u_now);
        times.push(t);
        states.push(z.clone());
        inputs.push(u_now.clone());
        if k == steps {
            break;
        }
        let u_mid = input(t + 0.5 * h)?;
        let u_next = input(t + h)?;
        let k1 = rhs(&z, &u_now);
        let k2 = rhs(&(&z + &k1 * (hc * 0.5)), &u_mid);
        let k3 = rhs(&(&z + &k2 * (hc * 0.5)), &u_mid);
        let k4 = rhs(&(&z + &k3 * hc), &u_next);
        z += (k1 + (k2 + k3) * c64(2.0, 0.0) + k4) * (hc / 6.0);
        if z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFiniteState(t + h));
        }
        u_now = u_next;
    }
    Ok(Trajectory {
        times,
        states,
        inputs,
        outputs,
    })
}

/// Running energy balance of an impedance or scattering supply.
#[derive(Debug, Clone)]
pub struct EnergyAudit {
    pub defect: Vec<f64>,
    pub min_defect: f64,
    /// Scale used to widen the slack: `max(1, max ‖z‖²_W, supplied energy)`.
    pub scale: f64,
    pub tolerance: f64,
}

impl EnergyAudit {
    pub fn passed(&self) -> bool {
        self.min_defect >= -self.tolerance
    }

    pub fn to_value(&self) -> Value {
        json!({
            "min_defect": self.min_defect,
            "scale": self.scale,
            "tolerance": self.tolerance,
            "passed": self.passed(),
        })
    }
}

fn w_energy(w: &CMat, z: &CVec) -> f64 {
    (z.adjoint() * w * z)[(0, 0)].re
}

fn audit_from_rates(traj: &Trajectory, w: &CMat, rates: &[f64], supplied: f64) -> EnergyAudit {
    let h = traj.step();
    let e0 = w_energy(w, &traj.states[0]);
    let mut integral = 0.0;
    let mut defect = Vec::with_capacity(traj.len());
    let mut max_energy = e0;
    for k in 0..traj.len() {
        if k > 0 {
            integral += 0.5 * h * (rates[k - 1] + rates[k]);
        }
        let ek = w_energy(w, &traj.states[k]);
        max_energy = max_energy.max(ek);
        defect.push(integral - (ek - e0));
    }
    let min_defect = defect.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0_f64.max(max_energy).max(supplied);
    EnergyAudit {
        defect,
        min_defect,
        scale,
        tolerance: AUDIT_TOL * scale,
    }
}

/// `defect(τ) = 2∫Re⟨u,y⟩ + 2∫⟨Eu,u⟩ − (‖z(τ)‖²_W − ‖z₀‖²_W)`.
pub fn energy_audit(traj: &Trajectory, w: &CMat, e: Option<&CMat>) -> EnergyAudit {
    let mut supplied = 0.0;
    let rates: Vec<f64> = traj
        .inputs
        .iter()
        .zip(&traj.outputs)
        .map(|(u, y)| {
            supplied = f64::max(supplied, u.norm_squared().max(y.norm_squared()));
            let mut r = 2.0 * u.dotc(y).re;
            if let Some(e) = e {
                r += 2.0 * u.dotc(&(e * u)).re;
            }
            r
        })
        .collect();
    let span = traj.times.last().copied().unwrap_or(0.0);
    audit_from_rates(traj, w, &rates, supplied * span)
}

/// `defect(τ) = ∫‖u‖² − ∫‖y‖² − (‖z(τ)‖²_W − ‖z₀‖²_W)`.
pub fn scattering_audit(traj: &Trajectory, w: &CMat) -> EnergyAudit {
    let mut supplied = 0.0;
    let rates: Vec<f64> = traj
        .inputs
        .iter()
        .zip(&traj.outputs)
        .map(|(u, y)| {
            supplied = f64::max(supplied, u.norm_squared().max(y.norm_squared()));
            u.norm_squared() - y.norm_squared()
        })
        .collect();
    let span = traj.times.last().copied().unwrap_or(0.0);
    audit_from_rates(traj, w, &rates, supplied * span)
}

/// Instantaneous defect rate at `(z, u)` for the given supply.
pub fn supply_defect_rate(node: &StateSpaceNode, kind: PassivityKind, z: &CVec, u: &CVec) -> f64 {
    let y = node.c() * z + node.d() * u;
    let dz = node.a() * z + node.b() * u;
    let storage = 2.0 * (z.adjoint() * node.weight() * dz)[(0, 0)].re;
    let supply = match kind {
        PassivityKind::Impedance => 2.0 * u.dotc(&y).re,
        PassivityKind::Scattering => u.norm_squared() - y.norm_squared(),
    };
    supply - storage
}

/// Initial state, constant input and horizon that drive the audit defect to
/// about `−1` from a certificate's violating vector.
#[derive(Debug, Clone)]
pub struct WitnessExperiment {
    pub z0: CVec,
    pub u: CVec,
    pub t_final: f64,
    pub steps: usize,
}

impl WitnessExperiment {
    pub fn run(&self, node: &StateSpaceNode) -> Result<Trajectory> {
        let u = self.u.clone();
        simulate(node, &self.z0, move |_| u.clone(), self.t_final, self.steps)
    }

    /// Runs the experiment and audits it with the certificate's supply.
    pub fn audit(&self, node: &StateSpaceNode, kind: PassivityKind) -> Result<EnergyAudit> {
        let traj = self.run(node)?;
        Ok(match kind {
            PassivityKind::Impedance => energy_audit(&traj, node.weight(), None),
            PassivityKind::Scattering => scattering_audit(&traj, node.weight()),
        })
    }
}

/// `None` when the certificate carries no witness or its rate is not negative.
pub fn witness_experiment(
    node: &StateSpaceNode,
    cert: &PassivityCertificate,
) -> Option<WitnessExperiment> {
    let v = cert.witness.as_ref()?;
    let n = node.states();
    let z = v.rows(0, n).into_owned();
    let u = v.rows(n, node.inputs()).into_owned();
    let rate = supply_defect_rate(node, cert.kind, &z, &u);
    if rate.is_nan() || rate >= 0.0 {
        return None;
    }
    let a_norm = linalg::spectral_norm(node.a());
    let f_norm = 1.0 + linalg::spectral_norm(node.b()) + linalg::spectral_norm(node.c())
        + linalg::spectral_norm(node.d());
    // second-order drift must stay small against the first-order rate
    let tau = (0.01_f64).min(0.05 * rate.abs() / ((1.0 + a_norm) * f_norm * f_norm));
    let amplitude = (1.0 / (tau * rate.abs())).sqrt();
    let amp = c64(amplitude, 0.0);
    Some(WitnessExperiment {
        z0: z * amp,
        u: u * amp,
        t_final: tau,
        steps: 200,
    })
}

/// Uniformly sampled signal, interpolated by a natural cubic spline.
#[derive(Debug, Clone)]
pub struct SampledSignal {
    pub dt: f64,
    pub values: Vec<CVec>,
    second: Vec<CVec>,
}

impl SampledSignal {
    pub fn new(dt: f64, values: Vec<CVec>) -> Result<Self> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(Error::InvalidArgument("sample spacing must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::InvalidArgument("signal has no samples".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch("samples have different lengths".into()));
        }
        let second = natural_spline_second_derivatives(dt, &values);
        Ok(Self { dt, values, second })
    }

    /// Samples `f` at `k·dt` for `k = 0..=steps`.
    pub fn from_fn<F: Fn(f64) -> CVec>(f: F, t_final: f64, steps: usize) -> Result<Self> {
        let dt = t_final / steps as f64;
        Self::new(dt, (0..=steps).map(|k| f(k as f64 * dt)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn t_final(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| k as f64 * self.dt).collect()
    }

    /// Spline value; zero outside `[0, t_final]`.
    pub fn eval(&self, t: f64) -> CVec {
        let n = self.values.len();
        if t < 0.0 || t > self.t_final() * (1.0 + 1e-12) || n == 1 {
            return if n == 1 && t == 0.0 {
                self.values[0].clone()
            } else {
                CVec::zeros(self.dim())
            };
        }
        let k = ((t / self.dt).floor() as usize).min(n - 2);
        let h = self.dt;
        let a = ((k + 1) as f64 * h - t) / h;
        let b = 1.0 - a;
        let ca = c64((a * a * a - a) * h * h / 6.0, 0.0);
        let cb = c64((b * b * b - b) * h * h / 6.0, 0.0);
        &self.values[k] * c64(a, 0.0)
            + &self.values[k + 1] * c64(b, 0.0)
            + &self.second[k] * ca
            + &self.second[k + 1] * cb
    }

    /// Reads `{"dt": …, "samples": [[entry, …], …]}`.
    pub fn from_value(v: &Value) -> Result<Self> {
        let dt = v
            .get("dt")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Schema("input signal needs a numeric \"dt\"".into()))?;
        let raw: RawMatrix = serde_json::from_value(
            v.get("samples")
                .cloned()
                .ok_or_else(|| Error::Schema("input signal needs \"samples\"".into()))?,
        )
        .map_err(|e| Error::Schema(e.to_string()))?;
        let m = matrix_from_raw("samples", &raw, None)?;
        let values = m.row_iter().map(|r| r.transpose().into_owned()).collect();
        Self::new(dt, values)
    }
}

fn natural_spline_second_derivatives(h: f64, y: &[CVec]) -> Vec<CVec> {
    let n = y.len();
    let m = y[0].len();
    let mut out = vec![CVec::zeros(m); n];
    if n < 3 {
        return out;
    }
    // tridiagonal system (h/6, 2h/3, h/6) on interior nodes, Thomas algorithm
    let inner = n - 2;
    let diag = 2.0 * h / 3.0;
    let off = h / 6.0;
    let mut c_prime = vec![0.0; inner];
    let mut d_prime = vec![CVec::zeros(m); inner];
    for i in 0..inner {
        let rhs = (&y[i + 2] - &y[i + 1] * c64(2.0, 0.0) + &y[i]) / c64(h, 0.0);
        if i == 0 {
            c_prime[0] = off / diag;
            d_prime[0] = rhs / c64(diag, 0.0);
        } else {
            let denom = diag - off * c_prime[i - 1];
            c_prime[i] = off / denom;
            d_prime[i] = (rhs - &d_prime[i - 1] * c64(off, 0.0)) / c64(denom, 0.0);
        }
    }
    for i in (0..inner).rev() {
        let next = if i + 1 < inner {
            out[i + 2].clone() * c64(c_prime[i], 0.0)
        } else {
            CVec::zeros(m)
        };
        out[i + 1] = &d_prime[i] - next;
    }
    out
}

/// Composite quadrature weights on `points` uniform samples: Simpson's rule,
/// closed with a 3/8 panel when the interval count is odd.
pub fn quadrature_weights(points: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; points];
    if points < 2 {
        return w;
    }
    let intervals = points - 1;
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    let mut k = 0;
    while k + 2 <= simpson_end {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if simpson_end < intervals {
        let s = simpson_end;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}

/// CSV with columns `t`, state, input and output as `re,im` pairs, then the
/// running defect when supplied.
pub fn trajectory_csv(traj: &Trajectory, defect: Option<&[f64]>) -> String {
    let mut out = String::from("t");
    let header = |out: &mut String, prefix: &str, len: usize| {
        for i in 0..len {
            write!(out, ",{prefix}{i}_re,{prefix}{i}_im").unwrap();
        }
    };
    header(&mut out, "z", traj.states.first().map_or(0, |v| v.len()));
    header(&mut out, "u", traj.inputs.first().map_or(0, |v| v.len()));
    header(&mut out, "y", traj.outputs.first().map_or(0, |v| v.len()));
    if defect.is_some() {
        out.push_str(",defect");
    }
    out.push('\n');
    for k in 0..traj.len() {
        write!(out, "{:.16e}", traj.times[k]).unwrap();
        for v in [&traj.states[k], &traj.inputs[k], &traj.outputs[k]] {
            for z in v.iter() {
                write!(out, ",{:.16e},{:.16e}", z.re, z.im).unwrap();
            }
        }
        if let Some(d) = defect {
            write!(out, ",{:.16e}", d[k]).unwrap();
        }
        out.push('\n');
    }
    out
}
