//! Adaptive Dormand–Prince 5(4) integration with output stations and event
//! location.
//!
//! Systems are written against plain slices so that the geodesic, Jacobi and
//! transport equations can share one stepper. Integration runs forward or
//! backward depending on the sign of `t1 - t0`.

use crate::error::{Error, Result};

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

/// Step-size control parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    /// Same tolerances scaled by `factor` (e.g. 0.1 for a ten times tighter run).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
            max_steps: self.max_steps,
        }
    }
}

// Dormand–Prince coefficients.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Workspace {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    err: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            err: vec![0.0; n],
        }
    }
}

/// One Dormand–Prince step of size `h` from `(t, y)` with `k[0] = f(t, y)`
/// already filled. Writes the 5th-order solution to `ws.y_new`, its slope to
/// `ws.k[6]` and the embedded error estimate to `ws.err`.
fn dp_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t: f64,
    y: &[f64],
    h: f64,
    ws: &mut Workspace,
) -> Result<()> {
    let n = y.len();
    let stages: [(f64, &[f64]); 5] = [
        (C2, &[A21]),
        (C3, &[A31, A32]),
        (C4, &[A41, A42, A43]),
        (C5, &[A51, A52, A53, A54]),
        (1.0, &[A61, A62, A63, A64, A65]),
    ];
    for (s, (c, a)) in stages.iter().enumerate() {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, aj) in a.iter().enumerate() {
                acc += aj * ws.k[j][i];
            }
            ws.tmp[i] = y[i] + h * acc;
        }
        let (head, tail) = ws.k.split_at_mut(s + 1);
        let _ = head;
        sys.rhs(t + c * h, &ws.tmp, &mut tail[0])?;
    }
    for i in 0..n {
        ws.y_new[i] = y[i]
            + h * (B1 * ws.k[0][i]
                + B3 * ws.k[2][i]
                + B4 * ws.k[3][i]
                + B5 * ws.k[4][i]
                + B6 * ws.k[5][i]);
    }
    let (head, tail) = ws.k.split_at_mut(6);
    let _ = head;
    sys.rhs(t + h, &ws.y_new, &mut tail[0])?;
    for i in 0..n {
        ws.err[i] = h
            * (E1 * ws.k[0][i]
                + E3 * ws.k[2][i]
                + E4 * ws.k[3][i]
                + E5 * ws.k[4][i]
                + E6 * ws.k[5][i]
                + E7 * ws.k[6][i]);
    }
    Ok(())
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / y.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    dir: f64,
    span: f64,
    tol: &Tolerances,
) -> Result<f64> {
    let n = y0.len();
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..n {
        let sc = tol.atol + tol.rtol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    d0 = (d0 / n as f64).sqrt();
    d1 = (d1 / n as f64).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + dir * h0, &y1, &mut f1)?;
    let mut d2 = 0.0;
    for i in 0..n {
        let sc = tol.atol + tol.rtol * y0[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    d2 = (d2 / n as f64).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

/// Stepper state shared by the public drivers.
struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    tol: Tolerances,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    dir: f64,
    ws: Workspace,
    steps: usize,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S, t0: f64, y0: &[f64], t_end: f64, tol: Tolerances) -> Result<Self> {
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        if y0.len() != sys.dim() {
            return Err(Error::Dimension {
                expected: sys.dim(),
                got: y0.len(),
            });
        }
        let mut f = vec![0.0; y0.len()];
        sys.rhs(t0, y0, &mut f)?;
        let h = initial_step(sys, t0, y0, &f, dir, (t_end - t0).abs(), &tol)?;
        Ok(Self {
            sys,
            tol,
            t: t0,
            y: y0.to_vec(),
            f,
            h,
            dir,
            ws: Workspace::new(y0.len()),
            steps: 0,
        })
    }

    /// Advances by one accepted step, never passing `t_stop`. Returns the step
    /// actually taken.
    fn advance(&mut self, t_stop: f64) -> Result<f64> {
        loop {
            self.steps += 1;
            if self.steps > self.tol.max_steps {
                return Err(Error::StepFailure {
                    t: self.t,
                    reason: format!("exceeded {} steps", self.tol.max_steps),
                });
            }
            let remaining = (t_stop - self.t) * self.dir;
            let mut h = self.h.min(remaining);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = h * self.dir;
            self.ws.k[0].copy_from_slice(&self.f);
            let trial = dp_step(self.sys, self.t, &self.y, hs, &mut self.ws);
            let err = match trial {
                Ok(()) => error_norm(&self.y, &self.ws.y_new, &self.ws.err, &self.tol),
                // A stage outside the domain: shrink and retry unless the step is tiny.
                Err(e) => {
                    if h < 1e-12 * (1.0 + self.t.abs()) {
                        return Err(e);
                    }
                    self.h = 0.25 * h;
                    continue;
                }
            };
            if !err.is_finite() {
                self.h = 0.25 * h;
                if self.h < 1e-14 * (1.0 + self.t.abs()) {
                    return Err(Error::StepFailure {
                        t: self.t,
                        reason: "non-finite error estimate".into(),
                    });
                }
                continue;
            }
            if err <= 1.0 {
                let t_new = if last { t_stop } else { self.t + hs };
                self.t = t_new;
                std::mem::swap(&mut self.y, &mut self.ws.y_new);
                self.f.copy_from_slice(&self.ws.k[6]);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || fac < 1.0 {
                    self.h = h * fac;
                }
                return Ok(hs);
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            self.h = h * fac;
            if self.h < 1e-14 * (1.0 + self.t.abs()) {
                return Err(Error::StepFailure {
                    t: self.t,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
}

/// Integrates from `t0` to `t1` and returns the final state.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    if t1 == t0 {
        return Ok(y0.to_vec());
    }
    let dir = (t1 - t0).signum();
    let mut st = Stepper::new(sys, t0, y0, t1, *tol)?;
    while (t1 - st.t) * dir > 0.0 {
        st.advance(t1)?;
    }
    Ok(st.y)
}

/// Integrates through the monotone list of output `stations`, returning the
/// state at each one. Stations equal to `t0` return the initial state.
pub fn integrate_stations<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    stations: &[f64],
    tol: &Tolerances,
) -> Result<Vec<Vec<f64>>> {
    let Some(&last) = stations.last() else {
        return Ok(Vec::new());
    };
    let dir = if last >= t0 { 1.0 } else { -1.0 };
    if stations
        .windows(2)
        .any(|w| (w[1] - w[0]) * dir < 0.0)
        || (stations[0] - t0) * dir < 0.0
    {
        return Err(Error::InvalidArgument(
            "output stations must be monotone in the integration direction".into(),
        ));
    }
    let mut out = Vec::with_capacity(stations.len());
    if last == t0 {
        return Ok(vec![y0.to_vec(); stations.len()]);
    }
    let mut st = Stepper::new(sys, t0, y0, last, *tol)?;
    for &ts in stations {
        while (ts - st.t) * dir > 0.0 {
            st.advance(ts)?;
        }
        out.push(st.y.clone());
    }
    Ok(out)
}

/// Outcome of an event-located integration.
#[derive(Debug, Clone, PartialEq)]
pub enum EventOutcome {
    /// The event function changed sign; state at the located root.
    Found { t: f64, y: Vec<f64> },
    /// Reached the end of the span without a sign change.
    NotFound { y: Vec<f64> },
}

/// Integrates from `t0` towards `t_end` and stops at the first sign change of
/// `event(t, y)`, refining the crossing inside the accepted step with the
/// Illinois variant of regula falsi on sub-steps.
pub fn integrate_to_event<S, F>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    tol: &Tolerances,
    event: F,
) -> Result<EventOutcome>
where
    S: OdeSystem + ?Sized,
    F: Fn(f64, &[f64]) -> f64,
{
    let g0 = event(t0, y0);
    if g0 == 0.0 {
        return Ok(EventOutcome::Found {
            t: t0,
            y: y0.to_vec(),
        });
    }
    if t_end == t0 {
        return Ok(EventOutcome::NotFound { y: y0.to_vec() });
    }
    let dir = (t_end - t0).signum();
    let mut st = Stepper::new(sys, t0, y0, t_end, *tol)?;
    let mut g_prev = g0;
    while (t_end - st.t) * dir > 0.0 {
        let t_a = st.t;
        let y_a = st.y.clone();
        let f_a = st.f.clone();
        let hs = st.advance(t_end)?;
        let g_b = event(st.t, &st.y);
        if g_b == 0.0 {
            return Ok(EventOutcome::Found {
                t: st.t,
                y: st.y.clone(),
            });
        }
        if g_b.signum() != g_prev.signum() {
            let (t, y) = refine_event(sys, t_a, &y_a, &f_a, hs, g_prev, g_b, &event)?;
            return Ok(EventOutcome::Found { t, y });
        }
        g_prev = g_b;
    }
    Ok(EventOutcome::NotFound { y: st.y })
}

#[allow(clippy::too_many_arguments)]
fn refine_event<S, F>(
    sys: &S,
    t_a: f64,
    y_a: &[f64],
    f_a: &[f64],
    h: f64,
    g_a: f64,
    g_b: f64,
    event: &F,
) -> Result<(f64, Vec<f64>)>
where
    S: OdeSystem + ?Sized,
    F: Fn(f64, &[f64]) -> f64,
{
    let mut ws = Workspace::new(y_a.len());
    let sub = |tau: f64, ws: &mut Workspace| -> Result<Vec<f64>> {
        ws.k[0].copy_from_slice(f_a);
        dp_step(sys, t_a, y_a, tau, ws)?;
        Ok(ws.y_new.clone())
    };
    // Bracket in the fraction of the step: [lo, hi] with g(lo) = ga, g(hi) = gb.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (mut glo, mut ghi) = (g_a, g_b);
    let mut side = 0i8;
    let mut best = (1.0, None::<Vec<f64>>);
    for _ in 0..100 {
        let x = (lo * ghi - hi * glo) / (ghi - glo);
        let x = if x.is_finite() && x > lo && x < hi {
            x
        } else {
            0.5 * (lo + hi)
        };
        let y = sub(x * h, &mut ws)?;
        let g = event(t_a + x * h, &y);
        best = (x, Some(y));
        if g == 0.0 || (hi - lo) * h.abs() < 1e-15 * (1.0 + t_a.abs()) {
            break;
        }
        if g.signum() == glo.signum() {
            lo = x;
            glo = g;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            ghi = g;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
    }
    let (x, y) = best;
    let y = match y {
        Some(y) => y,
        None => sub(x * h, &mut ws)?,
    };
    Ok((t_a + x * h, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Harmonic;
    impl OdeSystem for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    /// Nearly constant solution whose right-hand side fails outside `[0, 1]`.
    struct Fenced;
    impl OdeSystem for Fenced {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, _y: &[f64], dy: &mut [f64]) -> Result<()> {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidArgument(format!("t = {t}")));
            }
            dy[0] = 1e-9;
            Ok(())
        }
    }

    #[test]
    fn first_step_stays_inside_the_span() {
        let y = integrate(&Fenced, 0.0, &[0.5], 1.0, &Tolerances::default()).unwrap();
        assert!((y[0] - 0.5 - 1e-9).abs() < 1e-15);
    }

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        let tol = Tolerances::default();
        let y = integrate(&Harmonic, 0.0, &[0.0, 1.0], 10.0, &tol).unwrap();
        assert!((y[0] - 10f64.sin()).abs() < 1e-8);
        assert!((y[1] - 10f64.cos()).abs() < 1e-8);
        let back = integrate(&Harmonic, 10.0, &y, 0.0, &tol).unwrap();
        assert!(back[0].abs() < 1e-8 && (back[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn stations_hit_requested_times() {
        let tol = Tolerances::default();
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let ys = integrate_stations(&Harmonic, 0.0, &[0.0, 1.0], &ts, &tol).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y[0] - t.sin()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn event_locates_first_zero_of_sine() {
        let tol = Tolerances::default();
        let out =
            integrate_to_event(&Harmonic, 0.1, &[0.1f64.sin(), 0.1f64.cos()], 10.0, &tol, |_, y| {
                y[0]
            })
            .unwrap();
        match out {
            EventOutcome::Found { t, .. } => assert!((t - std::f64::consts::PI).abs() < 1e-9),
            other => panic!("no event: {other:?}"),
        }
    }

    #[test]
    fn event_absent_reports_end_state() {
        let tol = Tolerances::default();
        let out = integrate_to_event(&Harmonic, 0.0, &[0.0, 1.0], 1.0, &tol, |_, y| y[1] + 2.0)
            .unwrap();
        assert!(matches!(out, EventOutcome::NotFound { .. }));
    }
}
