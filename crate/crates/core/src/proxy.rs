//! Proxy resolution and spring force, one haptic tick at a time.
//!
//! The proxy is a second point that follows the haptic interface point (HIP)
//! but is never allowed below the surface. In free space it coincides with
//! the HIP. Once the HIP penetrates, the proxy is walked along the surface by
//! successive approximation: lift it `delta_n` along the surface normal, cast
//! a segment from the lifted point to the HIP, and take the first surface
//! crossing as the new proxy. Repeating this drives the proxy towards the
//! surface point closest to the HIP, and the rendered force is a spring
//! stretched between the two.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::surface::DepthField;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams<S> {
    /// Spring stiffness in N/mm.
    pub stiffness_k: S,
    /// Length of one proxy step, mm.
    pub delta_n: S,
    /// How far from the surface a contact proxy may sit, mm.
    pub eps_surface: S,
    /// Proxy displacement below which an iteration counts as stationary, mm.
    pub eps_converge: S,
    /// Iteration cap per tick.
    pub max_iters: u32,
    /// Wall-clock budget per tick.
    pub tick_budget: Duration,
}

impl<S: Scalar> Default for RenderParams<S> {
    fn default() -> Self {
        Self {
            stiffness_k: S::lit(0.5),
            delta_n: S::lit(0.1),
            eps_surface: S::lit(1e-3),
            eps_converge: S::lit(1e-3),
            max_iters: 50,
            tick_budget: Duration::from_micros(1000),
        }
    }
}

impl<S: Scalar> RenderParams<S> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: S| {
            if v > S::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Params(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("delta_n", self.delta_n)?;
        positive("eps_surface", self.eps_surface)?;
        positive("eps_converge", self.eps_converge)?;
        if !(self.stiffness_k >= S::zero()) || !self.stiffness_k.is_finite() {
            return Err(Error::Params(format!("stiffness_k must be non-negative, got {}", self.stiffness_k)));
        }
        if self.max_iters == 0 {
            return Err(Error::Params("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-tick state of the rendering loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HapticState<S> {
    pub hip: Vec3<S>,
    pub proxy: Vec3<S>,
    pub in_contact: bool,
    /// Force on the device, N.
    pub force: Vec3<S>,
    /// False when the last resolve hit `max_iters` before the proxy settled.
    pub converged: bool,
    /// The proxy had to be clamped into the lateral extent.
    pub clamped: bool,
    /// Iterations spent by the last resolve.
    pub iterations: u32,
}

impl<S: Scalar> HapticState<S> {
    /// HIP and proxy collocated in free space.
    pub fn at(p: Vec3<S>) -> Self {
        Self {
            hip: p,
            proxy: p,
            in_contact: false,
            force: Vec3::zero(),
            converged: true,
            clamped: false,
            iterations: 0,
        }
    }
}

/// Result of one timed tick.
#[derive(Debug, Clone, Copy)]
pub struct Tick<S> {
    pub state: HapticState<S>,
    pub elapsed: Duration,
    pub over_budget: bool,
}

/// Moves a point into the extent and, if that left it below the surface,
/// onto the surface.
fn settle_into<S: Scalar>(field: &DepthField<S>, p: Vec3<S>) -> (Vec3<S>, bool) {
    let (mut q, moved) = field.clamp_lateral(p);
    if moved {
        let h = field.height_at(q.x, q.y);
        if q.z < h {
            q.z = h;
        }
    }
    (q, moved)
}

/// Lifts `p` along the surface normal in `delta_n` steps until it is no
/// longer penetrating. Falls back to a vertical projection if the lift
/// stalls against steep walls.
fn lift<S: Scalar>(field: &DepthField<S>, mut p: Vec3<S>, params: &RenderParams<S>) -> Vec3<S> {
    for _ in 0..params.max_iters {
        let n = field.normal_at(p.x, p.y);
        p = field.clamp_lateral(p + n * params.delta_n).0;
        if field.gap(p) >= S::zero() {
            return p;
        }
    }
    let h = field.height_at(p.x, p.y);
    if p.z < h {
        p.z = h;
    }
    p
}

/// Finishes a contact resolve by projecting the HIP onto the tangent plane at
/// the proxy and dropping the foot onto the surface. Accepted only while it
/// stays within one `delta_n` laterally and brings the proxy closer to the
/// HIP, so it can only sharpen the fixed point the iteration was heading for.
/// On a planar patch the first step lands on the exact closest point.
fn polish<S: Scalar>(field: &DepthField<S>, mut proxy: Vec3<S>, hip: Vec3<S>, params: &RenderParams<S>) -> Vec3<S> {
    let mut best = proxy.distance(hip);
    for _ in 0..4 {
        let n = field.normal_at(proxy.x, proxy.y);
        let foot = hip + n * n.dot(proxy - hip);
        let (mut cand, _) = field.clamp_lateral(foot);
        let lateral = ((cand.x - proxy.x).powi(2) + (cand.y - proxy.y).powi(2)).sqrt();
        if lateral > params.delta_n {
            break;
        }
        cand.z = field.height_at(cand.x, cand.y);
        let d = cand.distance(hip);
        if !(d < best) {
            break;
        }
        best = d;
        proxy = cand;
    }
    proxy
}

/// One application of the two-branch proxy update.
///
/// A penetrating proxy moves `delta_n` along the surface normal. Otherwise it
/// moves `delta_n` towards the HIP; when the HIP is within one step the proxy
/// lands on it, or on the surface if that last hop would cross it.
pub fn step_proxy<S: Scalar>(
    state: &HapticState<S>,
    field: &DepthField<S>,
    params: &RenderParams<S>,
) -> Result<HapticState<S>> {
    params.validate()?;
    let mut next = *state;
    let (p, clamped) = field.clamp_lateral(state.proxy);
    next.clamped = clamped;

    let moved = if field.gap(p) < S::zero() {
        p + field.normal_at(p.x, p.y) * params.delta_n
    } else {
        let d = state.hip - p;
        let dist = d.norm();
        if dist <= params.delta_n {
            let (target, _) = field.clamp_lateral(state.hip);
            let hit = if dist > S::zero() { field.first_crossing(p, target, dist, params.delta_n) } else { None };
            match hit {
                Some(h) => {
                    next.in_contact = true;
                    h
                }
                None => {
                    next.in_contact = false;
                    state.hip
                }
            }
        } else {
            p + d * (params.delta_n / dist)
        }
    };
    let (q, out) = field.clamp_lateral(moved);
    next.proxy = q;
    next.clamped |= out;
    Ok(next)
}

/// Successive approximation of the proxy for the current HIP.
///
/// A HIP outside the lateral extent is pursued at its clamped position. The
/// returned proxy is never below the surface; when `max_iters` runs out the
/// best proxy so far is returned with `converged = false`.
pub fn resolve_proxy<S: Scalar>(
    state: &HapticState<S>,
    field: &DepthField<S>,
    params: &RenderParams<S>,
) -> Result<HapticState<S>> {
    if !field.is_filled() {
        return Err(Error::UnfilledHoles);
    }
    Ok(resolve_unchecked(state, field, params))
}

fn resolve_unchecked<S: Scalar>(
    state: &HapticState<S>,
    field: &DepthField<S>,
    params: &RenderParams<S>,
) -> HapticState<S> {
    let (target, _) = field.clamp_lateral(state.hip);
    let (mut proxy, clamped) = settle_into(field, state.proxy);
    let mut in_contact = state.in_contact;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        let prev = proxy;
        let gap = field.gap(proxy);
        let origin = if gap <= params.eps_surface { lift(field, proxy, params) } else { proxy };

        let len = (target - origin).norm();
        let hit = if len > S::zero() { field.first_crossing(origin, target, len, params.delta_n) } else { None };
        match hit {
            Some(p) => {
                proxy = p;
                in_contact = true;
            }
            None => {
                // The last march sample is the target itself, so a miss means
                // the HIP is in free space.
                proxy = target;
                in_contact = false;
                converged = true;
                break;
            }
        }
        if proxy.distance(prev) < params.eps_converge {
            converged = true;
            break;
        }
    }

    if in_contact {
        proxy = polish(field, proxy, target, params);
    }

    let mut next =
        HapticState { hip: state.hip, proxy, in_contact, force: Vec3::zero(), converged, clamped, iterations };
    next.force = compute_force(&next, params);
    next
}

/// Spring force `k (proxy - hip)` while in contact, zero otherwise.
pub fn compute_force<S: Scalar>(state: &HapticState<S>, params: &RenderParams<S>) -> Vec3<S> {
    if state.in_contact {
        (state.proxy - state.hip) * params.stiffness_k
    } else {
        Vec3::zero()
    }
}

/// Feeds a new HIP sample through resolve and force, timing the call.
pub fn tick<S: Scalar>(
    state: &HapticState<S>,
    new_hip: Vec3<S>,
    field: &DepthField<S>,
    params: &RenderParams<S>,
) -> Result<Tick<S>> {
    if !field.is_filled() {
        return Err(Error::UnfilledHoles);
    }
    let start = Instant::now();
    let mut s = *state;
    s.hip = new_hip;
    let state = resolve_unchecked(&s, field, params);
    let elapsed = start.elapsed();
    Ok(Tick { state, elapsed, over_budget: elapsed > params.tick_budget })
}
