//! Geodesic integration, parallel transport, and the leaf-confinement /
//! extendability probes.
//!
//! The integrator is an adaptive embedded Dormand–Prince 5(4) pair with
//! cubic-Hermite dense output. Geodesics solve ẍⁱ + 2Gⁱ(x, ẋ) = 0; frames
//! are transported with the Cartan horizontal coefficients along the
//! canonical lift, Ė ⁱ + Γ*ⁱ_jk Eʲ ẋᵏ = 0, which preserves g-inner products.

use crate::connection::{geodesic_spray, pipe_f64};
use crate::error::{FinslerError, Result};
use crate::jet::SupportElement;
use crate::metric::FinslerMetric;
use crate::nullity::{nullity_kernel_space, SubspaceBasis, RANK_TOL_DEFAULT};
use crate::tensor::TensorBlock;
use serde::Serialize;
use std::io::Write;

// Dormand–Prince 5(4) tableau
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
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

/// A geodesic (optionally with a transported frame) sampled at the
/// integrator's accepted steps.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// per-time (x, v = ẋ)
    pub states: Vec<(Vec<f64>, Vec<f64>)>,
    /// F(x(t), v(t)) per accepted step
    pub f_values: Vec<f64>,
    /// local error estimate of each accepted step
    pub step_errors: Vec<f64>,
    /// time of the last in-domain state, when the run left the domain
    pub domain_exit: Option<f64>,
}

impl Trajectory {
    pub fn last_state(&self) -> (&[f64], &[f64]) {
        let (x, v) = self.states.last().expect("non-empty trajectory");
        (x, v)
    }

    /// Relative drift of F along the run.
    pub fn energy_drift(&self) -> f64 {
        let f0 = self.f_values[0];
        self.f_values
            .iter()
            .fold(0.0f64, |m, &f| m.max((f - f0).abs()))
            / f0.abs().max(1e-300)
    }
}

struct System<'a> {
    metric: &'a FinslerMetric,
    n: usize,
    /// number of transported frame columns appended to the state
    frame_cols: usize,
}

impl<'a> System<'a> {
    fn state_len(&self) -> usize {
        2 * self.n + self.n * self.frame_cols
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let (x, v) = (&y[..n], &y[n..2 * n]);
        if !self.metric.in_domain(x) {
            return Err(FinslerError::Domain("left the metric domain".into()));
        }
        let z = SupportElement::new(x.to_vec(), v.to_vec())?;
        if self.frame_cols == 0 {
            let spray = geodesic_spray(self.metric, &z)?;
            for i in 0..n {
                out[i] = v[i];
                out[n + i] = -2.0 * spray[i];
            }
        } else {
            // one pass for both the spray and the transport coefficients
            let pipe = pipe_f64(self.metric, &z, false)?;
            for i in 0..n {
                out[i] = v[i];
                out[n + i] = -2.0 * pipe.spray[i];
            }
            for col in 0..self.frame_cols {
                let base = 2 * n + col * n;
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        for k in 0..n {
                            acc += pipe.gamma.at(&[i, j, k]) * y[base + j] * v[k];
                        }
                    }
                    out[base + i] = -acc;
                }
            }
        }
        Ok(())
    }
}

struct Accepted {
    t: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
    err: f64,
}

/// Core adaptive loop. Returns the accepted steps; stops early (without an
/// error) if the trajectory leaves the metric domain.
fn dp45(
    system: &System,
    y0: Vec<f64>,
    t_end: f64,
    rel_tol: f64,
) -> Result<(Vec<Accepted>, Option<f64>)> {
    let dim = system.state_len();
    let atol = rel_tol;
    let mut t = 0.0;
    let mut y = y0;
    let mut dy = vec![0.0; dim];
    system.rhs(&y, &mut dy)?;
    let mut accepted = vec![Accepted {
        t,
        y: y.clone(),
        dy: dy.clone(),
        err: 0.0,
    }];
    let mut h = (t_end / 100.0).min(1e-2).max(1e-6);
    let mut domain_exit = None;
    let mut k = vec![vec![0.0; dim]; 7];
    k[0].copy_from_slice(&dy);

    'outer: while t < t_end {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(FinslerError::StepUnderflow(t));
        }
        h = h.min(t_end - t);
        // stages 2..7 (k[0] is FSAL from the previous step)
        let mut stage_failed = false;
        for s in 0..6 {
            let mut ys = y.clone();
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, kr) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][r] * kr[i];
                }
                *yi += h * acc;
            }
            let _ = C; // stage times unused: the system is autonomous
            let mut ks = vec![0.0; dim];
            match system.rhs(&ys, &mut ks) {
                Ok(()) => k[s + 1] = ks,
                Err(FinslerError::Domain(_)) => {
                    stage_failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if stage_failed {
            // a stage left the domain: try smaller steps, then report exit
            if h > 1e-12 {
                h *= 0.25;
                continue 'outer;
            }
            domain_exit = Some(t);
            break 'outer;
        }

        let mut y5 = y.clone();
        let mut err_acc = 0.0;
        for i in 0..dim {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for r in 0..7 {
                s5 += B5[r] * k[r][i];
                s4 += B4[r] * k[r][i];
            }
            y5[i] += h * s5;
            let e = h * (s5 - s4) / (atol + rel_tol * y[i].abs().max(y5[i].abs()));
            err_acc += e * e;
        }
        let err = (err_acc / dim as f64).sqrt();

        if err <= 1.0 {
            t += h;
            // domain check at the accepted point
            if !system.metric.in_domain(&y5[..system.n]) {
                domain_exit = Some(accepted.last().unwrap().t);
                break 'outer;
            }
            y = y5;
            dy = k[6].clone(); // FSAL: stage 7 is the derivative at the new point
            accepted.push(Accepted {
                t,
                y: y.clone(),
                dy: dy.clone(),
                err,
            });
            k[0].copy_from_slice(&dy);
            if accepted.len() > 4_000_000 {
                return Err(FinslerError::Precondition(
                    "step count exceeded the safety limit".into(),
                ));
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok((accepted, domain_exit))
}

/// Cubic Hermite interpolation of the state at `t` between accepted steps.
fn hermite(acc: &[Accepted], t: f64) -> Vec<f64> {
    let idx = match acc.binary_search_by(|a| a.t.partial_cmp(&t).unwrap()) {
        Ok(i) => return acc[i].y.clone(),
        Err(i) => i.clamp(1, acc.len() - 1),
    };
    let (a, b) = (&acc[idx - 1], &acc[idx]);
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    let (s2, s3) = (s * s, s * s * s);
    let (h00, h10, h01, h11) = (
        2.0 * s3 - 3.0 * s2 + 1.0,
        s3 - 2.0 * s2 + s,
        -2.0 * s3 + 3.0 * s2,
        s3 - s2,
    );
    (0..a.y.len())
        .map(|i| h00 * a.y[i] + h10 * h * a.dy[i] + h01 * b.y[i] + h11 * h * b.dy[i])
        .collect()
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(1e-12..=1e-4).contains(&rel_tol) {
        return Err(FinslerError::Precondition(format!(
            "rel_tol {rel_tol:e} outside [1e-12, 1e-4]"
        )));
    }
    Ok(())
}

/// Integrates the geodesic through z0 up to t_end.
pub fn integrate_geodesic(
    metric: &FinslerMetric,
    z0: &SupportElement,
    t_end: f64,
    rel_tol: f64,
) -> Result<Trajectory> {
    check_rel_tol(rel_tol)?;
    metric.check_support(z0)?;
    let n = metric.dim();
    let system = System {
        metric,
        n,
        frame_cols: 0,
    };
    let mut y0 = z0.x.clone();
    y0.extend_from_slice(&z0.v);
    let (accepted, domain_exit) = dp45(&system, y0, t_end, rel_tol)?;
    let mut traj = Trajectory {
        times: Vec::with_capacity(accepted.len()),
        states: Vec::with_capacity(accepted.len()),
        f_values: Vec::with_capacity(accepted.len()),
        step_errors: Vec::with_capacity(accepted.len()),
        domain_exit,
    };
    for a in &accepted {
        let x = a.y[..n].to_vec();
        let v = a.y[n..2 * n].to_vec();
        let f = metric.f(&SupportElement::new(x.clone(), v.clone())?)?;
        traj.times.push(a.t);
        traj.states.push((x, v));
        traj.f_values.push(f);
        traj.step_errors.push(a.err);
    }
    Ok(traj)
}

/// Parallel-transports the given vectors along the trajectory (re-integrating
/// the joint system) and returns the frame at each trajectory time.
pub fn parallel_transport(
    metric: &FinslerMetric,
    trajectory: &Trajectory,
    frame0: &[Vec<f64>],
    rel_tol: f64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    check_rel_tol(rel_tol)?;
    let n = metric.dim();
    if frame0.is_empty() || frame0.iter().any(|c| c.iter().all(|&x| x == 0.0)) {
        return Err(FinslerError::Precondition(
            "transport requires at least one nonzero vector".into(),
        ));
    }
    let (x0, v0) = (&trajectory.states[0].0, &trajectory.states[0].1);
    let system = System {
        metric,
        n,
        frame_cols: frame0.len(),
    };
    let mut y0 = x0.clone();
    y0.extend_from_slice(v0);
    for col in frame0 {
        y0.extend_from_slice(col);
    }
    let t_end = *trajectory.times.last().unwrap();
    let (accepted, exit) = dp45(&system, y0, t_end, rel_tol)?;
    if exit.is_some() {
        return Err(FinslerError::Domain(
            "transport run left the metric domain".into(),
        ));
    }
    let mut out = Vec::with_capacity(trajectory.times.len());
    for &t in &trajectory.times {
        let y = hermite(&accepted, t);
        let frame: Vec<Vec<f64>> = (0..frame0.len())
            .map(|c| y[2 * n + c * n..2 * n + (c + 1) * n].to_vec())
            .collect();
        out.push(frame);
    }
    Ok(out)
}

/// Outcome of the leaf-confinement run.
#[derive(Clone, Debug, Serialize)]
pub struct ConfinementReport {
    /// max over sampled t of ‖component of ẋ g-orthogonal to the nullity
    /// space at (x(t), ẋ(t))‖ / ‖ẋ‖
    pub max_deviation: f64,
    pub mu: usize,
    /// first time the nullity index changed, with the new value
    pub mu_change: Option<(f64, usize)>,
    pub samples: usize,
    pub domain_exit: Option<f64>,
}

fn deviation_at(
    metric: &FinslerMetric,
    z: &SupportElement,
    k: f64,
    rank_tol: f64,
) -> Result<(usize, f64)> {
    let ker = nullity_kernel_space(metric, z, k, rank_tol)?;
    let (_, g) = crate::curvature::related_hh_point(metric, z, k)?;
    Ok((ker.dim(), orth_fraction(&g, &ker, &z.v)))
}

fn orth_fraction(g: &TensorBlock, basis: &SubspaceBasis, v: &[f64]) -> f64 {
    let n = g.dim;
    let gd = |a: &[f64], b: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += g.get(&[i, j]) * a[i] * b[j];
            }
        }
        acc
    };
    let mut proj = vec![0.0; n];
    for b in &basis.vectors {
        let c = gd(v, b);
        for i in 0..n {
            proj[i] += c * b[i];
        }
    }
    let orth: Vec<f64> = v.iter().zip(&proj).map(|(a, p)| a - p).collect();
    (gd(&orth, &orth).sqrt()) / gd(v, v).sqrt().max(1e-300)
}

/// Integrates a geodesic whose initial velocity lies in the k-nullity space
/// and measures how far the velocity ever leaves the (pointwise recomputed)
/// nullity distribution. `diagnostic` skips the initial-membership
/// precondition (negative controls).
pub fn geodesic_confinement_check(
    metric: &FinslerMetric,
    z0: &SupportElement,
    k: f64,
    t_end: f64,
    diagnostic: bool,
) -> Result<ConfinementReport> {
    let (mu0, dev0) = deviation_at(metric, z0, k, RANK_TOL_DEFAULT)?;
    if !diagnostic && dev0 > 1e-8 {
        return Err(FinslerError::Precondition(format!(
            "initial velocity is not in the k-nullity space (orthogonal fraction {dev0:.3e})"
        )));
    }
    let traj = integrate_geodesic(metric, z0, t_end, 1e-9)?;
    let samples = 120.min(traj.times.len().max(2));
    let t_last = *traj.times.last().unwrap();
    let mut max_deviation = dev0;
    let mut mu_change = None;
    for s in 0..samples {
        let t = t_last * s as f64 / (samples - 1) as f64;
        let idx = traj
            .times
            .iter()
            .position(|&tt| tt >= t)
            .unwrap_or(traj.times.len() - 1);
        let (x, v) = &traj.states[idx];
        let z = SupportElement::new(x.clone(), v.clone())?;
        let (mu, dev) = deviation_at(metric, &z, k, RANK_TOL_DEFAULT)?;
        if mu != mu0 && mu_change.is_none() {
            mu_change = Some((traj.times[idx], mu));
        }
        max_deviation = max_deviation.max(dev);
    }
    Ok(ConfinementReport {
        max_deviation,
        mu: mu0,
        mu_change,
        samples,
        domain_exit: traj.domain_exit,
    })
}

/// Long-horizon extendability probe along a nullity leaf.
#[derive(Clone, Debug, Serialize)]
pub struct ExtendabilityReport {
    pub pass: bool,
    pub t_reached: f64,
    pub energy_drift: f64,
    pub max_confinement: f64,
    pub mu_change: Option<(f64, usize)>,
    pub domain_exit: Option<f64>,
}

/// Integrates to t_max on a declared-complete metric, monitoring domain
/// exits, nullity-index drops, confinement, and energy drift. A desk-scale
/// proxy for extendability, not a proof.
pub fn extendability_probe(
    metric: &FinslerMetric,
    z0: &SupportElement,
    k: f64,
    t_max: f64,
) -> Result<ExtendabilityReport> {
    if !metric.is_complete() {
        return Err(FinslerError::Precondition(
            "metric not declared complete".into(),
        ));
    }
    let report = geodesic_confinement_check(metric, z0, k, t_max, false)?;
    let traj = integrate_geodesic(metric, z0, t_max, 1e-9)?;
    let t_reached = *traj.times.last().unwrap();
    let energy_drift = traj.energy_drift();
    let pass = report.domain_exit.is_none()
        && report.mu_change.is_none()
        && report.max_deviation < 1e-5
        && (t_reached - t_max).abs() < 1e-9;
    Ok(ExtendabilityReport {
        pass,
        t_reached,
        energy_drift,
        max_confinement: report.max_deviation,
        mu_change: report.mu_change,
        domain_exit: report.domain_exit,
    })
}

/// Writes the trajectory in CSV form: header `t,x1..xn,v1..vn,F`, one row
/// per accepted step, 17 significant digits; a domain exit appends a
/// trailing comment row.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, n: usize, mut w: W) -> std::io::Result<()> {
    let mut header = String::from("t");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        header.push_str(&format!(",v{i}"));
    }
    header.push_str(",F");
    writeln!(w, "{header}")?;
    for (idx, &t) in traj.times.iter().enumerate() {
        let (x, v) = &traj.states[idx];
        let mut row = format!("{:.16e}", t);
        for c in x.iter().chain(v.iter()) {
            row.push_str(&format!(",{:.16e}", c));
        }
        row.push_str(&format!(",{:.16e}", traj.f_values[idx]));
        writeln!(w, "{row}")?;
    }
    if let Some(t) = traj.domain_exit {
        writeln!(w, "# domain_exit t={:.16e}", t)?;
    }
    Ok(())
}
