//! Polygonal paths in the complex plane and the deterministic loop
//! construction used for monodromy computations.

use serde::{Deserialize, Serialize};

use crate::connection::RationalConnection;
use crate::error::{Error, Result};
use crate::schema::ComplexPair;
use crate::C64;

/// A polygonal path. When `closed`, a final segment connects the last
/// waypoint back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPath {
    pub waypoints: Vec<C64>,
    pub closed: bool,
}

impl ComplexPath {
    pub fn open(waypoints: Vec<C64>) -> Self {
        Self { waypoints, closed: false }
    }

    pub fn closed(waypoints: Vec<C64>) -> Self {
        Self { waypoints, closed: true }
    }

    /// Segments as (start, end) pairs, including the closing one.
    pub fn segments(&self) -> Vec<(C64, C64)> {
        let mut segs: Vec<(C64, C64)> =
            self.waypoints.windows(2).map(|w| (w[0], w[1])).collect();
        if self.closed && self.waypoints.len() >= 2 {
            segs.push((*self.waypoints.last().unwrap(), self.waypoints[0]));
        }
        segs
    }

    pub fn reversed(&self) -> Self {
        let mut waypoints = self.waypoints.clone();
        waypoints.reverse();
        Self { waypoints, closed: self.closed }
    }

    /// Joins `self` and `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &ComplexPath) -> Result<ComplexPath> {
        let end = *self
            .waypoints
            .last()
            .ok_or_else(|| Error::InvalidParameter("empty path".into()))?;
        let start = *other
            .waypoints
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty path".into()))?;
        if (end - start).norm() > 0.0 {
            return Err(Error::InvalidParameter(
                "paths do not share an endpoint; cannot concatenate".into(),
            ));
        }
        let mut waypoints = self.waypoints.clone();
        waypoints.extend_from_slice(&other.waypoints[1..]);
        Ok(ComplexPath { waypoints, closed: false })
    }

    /// Checks that consecutive waypoints are distinct and every segment
    /// stays beyond the guard distance from every pole.
    pub fn validate_against(&self, c: &RationalConnection, guard: f64) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidParameter("a path needs at least two waypoints".into()));
        }
        for (i, w) in self.waypoints.windows(2).enumerate() {
            if (w[0] - w[1]).norm() == 0.0 {
                return Err(Error::DegeneratePathSegment(i, i + 1));
            }
        }
        for (si, (a, b)) in self.segments().iter().enumerate() {
            if (a - b).norm() == 0.0 {
                continue; // closing segment of a loop that ends at its start
            }
            for (pi, p) in c.poles.iter().enumerate() {
                let d = segment_distance(*a, *b, p.position);
                if d <= guard {
                    return Err(Error::PathNearPole { segment: si, pole: pi, dist: d, guard });
                }
            }
        }
        Ok(())
    }
}

/// Serializable form of a path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub waypoints: Vec<ComplexPair>,
    pub closed: bool,
}

impl From<&ComplexPath> for PathDoc {
    fn from(p: &ComplexPath) -> Self {
        PathDoc { waypoints: p.waypoints.iter().map(|&z| z.into()).collect(), closed: p.closed }
    }
}

impl From<&PathDoc> for ComplexPath {
    fn from(d: &PathDoc) -> Self {
        ComplexPath {
            waypoints: d.waypoints.iter().map(|&z| z.into()).collect(),
            closed: d.closed,
        }
    }
}

/// Distance from point `p` to the segment `[a, b]`.
pub fn segment_distance(a: C64, b: C64, p: C64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    // projection parameter of p onto the segment, clamped
    let t = ((p - a).re * ab.re + (p - a).im * ab.im) / len2;
    let t = t.clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Number of polygon vertices used to approximate monodromy circles.
pub const LOOP_CIRCLE_POINTS: usize = 24;

/// Builds the counterclockwise monodromy loop around pole `target`:
/// a circle of radius `min(half the distance to the nearest other pole, 0.5)`
/// reached from `base` by a straight approach, with a midpoint pushed off
/// perpendicularly whenever the straight approach passes too close to a
/// pole. Deterministic for a given configuration.
pub fn monodromy_loop(
    c: &RationalConnection,
    target: usize,
    base: C64,
    guard: f64,
) -> Result<ComplexPath> {
    let center = c.poles[target].position;
    let mut nearest = f64::INFINITY;
    for (i, p) in c.poles.iter().enumerate() {
        if i != target {
            nearest = nearest.min((p.position - center).norm());
        }
    }
    let radius = (nearest * 0.5).min(0.5);
    if !radius.is_finite() {
        // single pole: any bounded circle works
        return build_loop(c, center, 0.5f64.min((base - center).norm() * 0.5), base, guard);
    }
    if radius <= guard * 4.0 {
        return Err(Error::LoopConstruction { pole: target, dist: nearest });
    }
    build_loop(c, center, radius, base, guard)
}

fn build_loop(
    c: &RationalConnection,
    center: C64,
    radius: f64,
    base: C64,
    guard: f64,
) -> Result<ComplexPath> {
    let to_base = base - center;
    if to_base.norm() <= radius {
        return Err(Error::InvalidParameter(
            "base point lies inside the monodromy circle".into(),
        ));
    }
    let dir = to_base / to_base.norm();
    let entry = center + dir * radius;
    let start_angle = dir.im.atan2(dir.re);

    let mut waypoints = vec![base];
    waypoints.extend(approach(c, base, entry, center, guard)?);
    // counterclockwise polygon inscribed in the circle
    for k in 1..=LOOP_CIRCLE_POINTS {
        let theta = start_angle + std::f64::consts::TAU * (k as f64) / (LOOP_CIRCLE_POINTS as f64);
        waypoints.push(center + C64::new(theta.cos(), theta.sin()) * radius);
    }
    // the polygon ends back at `entry`; return to base along the approach
    let mut back = approach(c, base, entry, center, guard)?;
    back.pop(); // drop `entry`, already present as the polygon end
    back.reverse();
    waypoints.extend(back);
    let path = ComplexPath::closed(waypoints);
    path.validate_against(c, guard)?;
    Ok(path)
}

/// Straight approach from `base` to `entry`, replaced by two segments via a
/// perpendicularly offset midpoint when any pole other than the loop target
/// sits too close. The offset doubles until the detour clears every pole.
fn approach(
    c: &RationalConnection,
    base: C64,
    entry: C64,
    loop_center: C64,
    guard: f64,
) -> Result<Vec<C64>> {
    let clearance = guard * 16.0;
    let blocked = |a: C64, b: C64| {
        c.poles.iter().any(|p| {
            p.position != loop_center && segment_distance(a, b, p.position) <= clearance
        })
    };
    if !blocked(base, entry) {
        return Ok(vec![entry]);
    }
    let mid = (base + entry) * 0.5;
    let dir = (entry - base) / (entry - base).norm();
    let perp = C64::new(-dir.im, dir.re);
    let mut offset = clearance * 4.0;
    for _ in 0..40 {
        for side in [1.0, -1.0] {
            let w = mid + perp * (offset * side);
            if !blocked(base, w) && !blocked(w, entry) {
                return Ok(vec![w, entry]);
            }
        }
        offset *= 2.0;
    }
    Err(Error::InvalidParameter(
        "could not route the loop approach around the poles".into(),
    ))
}
