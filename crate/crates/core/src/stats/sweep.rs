//! Left-to-right sweep over the mesh formed by covariate boundaries, event
//! times and kernel expiry times.
//!
//! On each cell the covariates are constant and every excitation path is a
//! single exponential `w_j(τ+u) = W_j e^{−γu}`. The γ-derivative paths
//! `m_j = Σ age·e^{−γ·age}` and `q_j = Σ age²·e^{−γ·age}` are polynomial
//! times the same exponential, so all cell integrals are closed form.

use crate::model::{CovariateField, EventLog, KernelSpec};

/// Excitation state at a mesh point.
pub struct SweepState {
    pub w: Vec<f64>,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    active: Vec<usize>,
}

/// Which γ-derivative paths to track.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Order {
    Value,
    First,
    Second,
}

pub trait Visitor {
    /// Cell `[τ, τ+h)` in covariate segment `seg`; `state` holds right limits at τ.
    fn cell(&mut self, seg: usize, h: f64, state: &SweepState);
    /// Event of `node` inside the window; `state` holds left limits.
    fn event(&mut self, node: usize, seg: usize, state: &SweepState);
}

#[derive(Clone, Copy)]
struct Point {
    time: f64,
    node: usize,
    /// Time of the event whose support ends here, or NaN for an event.
    expiry_of: f64,
}

/// Sweep `[0, end]`, reporting cells inside `[start, end]` and events in
/// `(start, end]` (`[0, end]` when `start = 0`). Events before `start` enter
/// the excitation history.
pub fn sweep<V: Visitor>(
    events: &EventLog,
    cov: &CovariateField,
    kernel: &KernelSpec,
    start: f64,
    end: f64,
    order: Order,
    visitor: &mut V,
) {
    let n = events.n();
    let gamma = kernel.gamma();
    let horizon = kernel.horizon();
    let mut points: Vec<Point> = Vec::with_capacity(2 * events.total());
    for (j, node) in events.nodes().iter().enumerate() {
        for &t in node {
            if t > end {
                break;
            }
            points.push(Point { time: t, node: j, expiry_of: f64::NAN });
            let x = t + horizon;
            if x < end {
                points.push(Point { time: x, node: j, expiry_of: t });
            }
        }
    }
    points.sort_by(|a, b| a.time.total_cmp(&b.time));

    let bounds = cov.boundaries();
    let last_seg = cov.n_segments() - 1;
    let mut st = SweepState { w: vec![0.0; n], m: vec![0.0; n], q: vec![0.0; n], active: vec![0; n] };
    let mut tau = 0.0;
    let mut seg = 0usize;
    let mut p = 0usize;
    let include = |t: f64| t > start || (start == 0.0 && t >= 0.0);

    loop {
        while seg < last_seg && bounds[seg + 1] <= tau {
            seg += 1;
        }
        // all points at tau: visits, then expiries and jumps
        let mut k = p;
        while k < points.len() && points[k].time <= tau {
            let pt = points[k];
            if pt.expiry_of.is_nan() && include(pt.time) {
                visitor.event(pt.node, seg, &st);
            }
            k += 1;
        }
        for pt in &points[p..k] {
            let j = pt.node;
            if pt.expiry_of.is_nan() {
                st.w[j] += 1.0;
                st.active[j] += 1;
            } else {
                st.active[j] -= 1;
                if st.active[j] == 0 {
                    st.w[j] = 0.0;
                    st.m[j] = 0.0;
                    st.q[j] = 0.0;
                } else {
                    let age = tau - pt.expiry_of;
                    let e = (-gamma * age).exp();
                    st.w[j] = (st.w[j] - e).max(0.0);
                    if order >= Order::First {
                        st.m[j] = (st.m[j] - age * e).max(0.0);
                    }
                    if order >= Order::Second {
                        st.q[j] = (st.q[j] - age * age * e).max(0.0);
                    }
                }
            }
        }
        p = k;
        if tau >= end {
            break;
        }
        let mut stop = end;
        if seg < last_seg {
            stop = stop.min(bounds[seg + 1]);
        }
        if p < points.len() {
            stop = stop.min(points[p].time);
        }
        if tau < start {
            stop = stop.min(start);
        }
        let h = stop - tau;
        if h > 0.0 {
            if tau >= start {
                visitor.cell(seg, h, &st);
            }
            let e = (-gamma * h).exp();
            for j in 0..n {
                if st.active[j] == 0 {
                    continue;
                }
                let (w, m) = (st.w[j], st.m[j]);
                if order >= Order::Second {
                    st.q[j] = (st.q[j] + 2.0 * m * h + w * h * h) * e;
                }
                if order >= Order::First {
                    st.m[j] = (m + w * h) * e;
                }
                st.w[j] = w * e;
            }
        }
        tau = stop;
    }
}
