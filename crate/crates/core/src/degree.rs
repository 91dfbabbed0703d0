//! Planar Brouwer degree by winding-number accumulation along oriented
//! boundary curves.
//!
//! The argument of `map ∘ param` is accumulated segment by segment with the
//! two-argument arctangent. A segment whose angle increment exceeds `π/2` is
//! bisected (up to 20 levels), so a true crossing of the origin's direction
//! can never be skipped silently.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub type Point<S> = [S; 2];

pub const DEFAULT_SAMPLES: usize = 256;
const MAX_REFINEMENT_DEPTH: u32 = 20;
const ZERO_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Counter-clockwise; outer boundaries.
    Ccw,
    /// Clockwise; holes.
    Cw,
}

type ParamFn<S> = dyn Fn(S) -> Point<S> + Send + Sync;

/// Closed curve, parametrized counter-clockwise over `θ ∈ [0, 1)`.
#[derive(Clone)]
pub enum CurveGeometry<S> {
    Circle { center: Point<S>, radius: S },
    /// Vertices in counter-clockwise order; the closing edge is implicit.
    Polygon(Vec<Point<S>>),
    Parametric(Arc<ParamFn<S>>),
}

impl<S: fmt::Debug> fmt::Debug for CurveGeometry<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Circle { center, radius } => f.debug_struct("Circle").field("center", center).field("radius", radius).finish(),
            Self::Polygon(v) => f.debug_tuple("Polygon").field(&v.len()).finish(),
            Self::Parametric(_) => f.write_str("Parametric"),
        }
    }
}

fn signed_area<S: Scalar>(pts: &[Point<S>]) -> S {
    let m = pts.len();
    (0..m)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<S>()
        * lit(0.5)
}

impl<S: Scalar> CurveGeometry<S> {
    /// Polygon from vertices in either order; stored counter-clockwise.
    pub fn polygon(mut vertices: Vec<Point<S>>) -> Result<Self> {
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidInput("polygon needs at least three vertices".into()));
        }
        let area = signed_area(&vertices);
        if area == S::zero() || !area.is_finite() {
            return Err(Error::InvalidInput("degenerate polygon".into()));
        }
        if area < S::zero() {
            vertices.reverse();
        }
        Ok(Self::Polygon(vertices))
    }

    pub fn parametric(f: impl Fn(S) -> Point<S> + Send + Sync + 'static) -> Self {
        Self::Parametric(Arc::new(f))
    }

    pub fn point(&self, theta: S) -> Point<S> {
        match self {
            Self::Circle { center, radius } => {
                let a = (S::PI() + S::PI()) * theta;
                [center[0] + *radius * a.cos(), center[1] + *radius * a.sin()]
            }
            Self::Polygon(v) => {
                let m = v.len();
                let u = theta * lit(m as f64);
                let fl = u.floor();
                let frac = u - fl;
                let i = (fl.to_usize().unwrap_or(0)) % m;
                let (a, b) = (v[i], v[(i + 1) % m]);
                [a[0] + frac * (b[0] - a[0]), a[1] + frac * (b[1] - a[1])]
            }
            Self::Parametric(f) => f(theta),
        }
    }

    /// Pointwise scaling about the origin.
    pub fn scaled(&self, factor: S) -> Self {
        match self {
            Self::Circle { center, radius } => Self::Circle { center: [center[0] * factor, center[1] * factor], radius: *radius * factor },
            Self::Polygon(v) => Self::Polygon(v.iter().map(|p| [p[0] * factor, p[1] * factor]).collect()),
            Self::Parametric(f) => {
                let f = f.clone();
                Self::parametric(move |t| {
                    let p = f(t);
                    [p[0] * factor, p[1] * factor]
                })
            }
        }
    }
}

/// Oriented closed curve with a base sample count.
#[derive(Debug, Clone)]
pub struct BoundaryCurve<S> {
    pub geometry: CurveGeometry<S>,
    pub orientation: Orientation,
    pub samples: usize,
}

fn segments_cross<S: Scalar>(p1: Point<S>, p2: Point<S>, q1: Point<S>, q2: Point<S>) -> bool {
    let orient = |a: Point<S>, b: Point<S>, c: Point<S>| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    ((d1 > S::zero() && d2 < S::zero()) || (d1 < S::zero() && d2 > S::zero()))
        && ((d3 > S::zero() && d4 < S::zero()) || (d3 < S::zero() && d4 > S::zero()))
}

fn check_simple<S: Scalar>(pts: &[Point<S>]) -> Result<()> {
    let m = pts.len();
    for i in 0..m {
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % m], pts[j], pts[(j + 1) % m]) {
                return Err(Error::InvalidInput(format!("curve self-intersects between segments {i} and {j}")));
            }
        }
    }
    Ok(())
}

impl<S: Scalar> BoundaryCurve<S> {
    pub fn new(geometry: CurveGeometry<S>, orientation: Orientation, samples: usize) -> Self {
        Self { geometry, orientation, samples }
    }

    /// Point at `θ ∈ [0, 1]`, traversed in the curve's orientation.
    pub fn param(&self, theta: S) -> Point<S> {
        match self.orientation {
            Orientation::Ccw => self.geometry.point(theta),
            Orientation::Cw => self.geometry.point(S::one() - theta),
        }
    }

    /// Base sample parameters `k / m`, `k = 0..m`.
    pub fn sample_params(&self) -> impl Iterator<Item = S> + '_ {
        let m = self.samples;
        (0..m).map(move |k| lit::<S>(k as f64) / lit(m as f64))
    }

    pub fn sample_points(&self) -> Vec<Point<S>> {
        self.sample_params().map(|t| self.param(t)).collect()
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn scaled(&self, factor: S) -> Self {
        Self { geometry: self.geometry.scaled(factor), orientation: self.orientation, samples: self.samples }
    }

    /// Closure and sampled simplicity.
    pub fn validate(&self) -> Result<()> {
        if self.samples < 3 {
            return Err(Error::InvalidInput(format!("curve needs at least 3 samples, got {}", self.samples)));
        }
        let pts = self.sample_points();
        if pts.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidInput("curve has non-finite samples".into()));
        }
        let scale = pts.iter().fold(S::one(), |m, p| m.max(p[0].abs()).max(p[1].abs()));
        let a = self.param(S::zero());
        let b = self.param(S::one());
        if ((a[0] - b[0]).abs()).max((a[1] - b[1]).abs()) > lit::<S>(1e-6) * scale {
            return Err(Error::InvalidInput("curve is not closed".into()));
        }
        if let CurveGeometry::Polygon(v) = &self.geometry {
            check_simple(v)?;
        }
        check_simple(&pts)
    }
}

/// Open region bounded by one counter-clockwise outer curve and clockwise holes.
#[derive(Debug, Clone)]
pub struct PlanarRegion<S> {
    outer: BoundaryCurve<S>,
    holes: Vec<BoundaryCurve<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Outside,
    OnBoundary,
}

impl<S: Scalar> PlanarRegion<S> {
    pub fn disc(center: Point<S>, radius: S) -> Result<Self> {
        if !(radius > S::zero() && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("disc radius must be positive, got {radius}")));
        }
        Ok(Self {
            outer: BoundaryCurve::new(CurveGeometry::Circle { center, radius }, Orientation::Ccw, DEFAULT_SAMPLES),
            holes: Vec::new(),
        })
    }

    pub fn annulus(center: Point<S>, inner: S, outer: S) -> Result<Self> {
        if !(inner > S::zero() && inner < outer && outer.is_finite()) {
            return Err(Error::InvalidInput(format!("annulus needs 0 < r_in < r_out, got ({inner}, {outer})")));
        }
        Ok(Self {
            outer: BoundaryCurve::new(CurveGeometry::Circle { center, radius: outer }, Orientation::Ccw, DEFAULT_SAMPLES),
            holes: vec![BoundaryCurve::new(CurveGeometry::Circle { center, radius: inner }, Orientation::Cw, DEFAULT_SAMPLES)],
        })
    }

    /// General region; validates every curve and that hole samples lie strictly inside the outer curve.
    pub fn from_curves(outer: CurveGeometry<S>, holes: Vec<CurveGeometry<S>>, samples: usize) -> Result<Self> {
        let region = Self {
            outer: BoundaryCurve::new(outer, Orientation::Ccw, samples),
            holes: holes.into_iter().map(|g| BoundaryCurve::new(g, Orientation::Cw, samples)).collect(),
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        self.outer.validate()?;
        for hole in &self.holes {
            hole.validate()?;
            for p in hole.sample_points() {
                if winding_around(&self.outer, p)? != 1 {
                    return Err(Error::InvalidInput("hole is not strictly inside the outer curve".into()));
                }
            }
        }
        Ok(())
    }

    pub fn outer(&self) -> &BoundaryCurve<S> {
        &self.outer
    }

    pub fn holes(&self) -> &[BoundaryCurve<S>] {
        &self.holes
    }

    pub fn curves(&self) -> impl Iterator<Item = &BoundaryCurve<S>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.outer.samples = samples;
        for h in &mut self.holes {
            h.samples = samples;
        }
        self
    }

    pub fn samples(&self) -> usize {
        self.outer.samples
    }

    /// Pointwise scaling of every boundary about the origin.
    pub fn scaled(&self, factor: S) -> Self {
        Self { outer: self.outer.scaled(factor), holes: self.holes.iter().map(|h| h.scaled(factor)).collect() }
    }

    /// Winding-based point location against the true boundary curves.
    pub fn contains(&self, p: Point<S>) -> Containment {
        let mut total = 0i64;
        for curve in self.curves() {
            match winding_around(curve, p) {
                Ok(w) => total += w,
                Err(_) => return Containment::OnBoundary,
            }
        }
        if total != 0 {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }
}

/// Winding number of `curve` around `p`, traversed in its orientation.
pub fn winding_around<S: Scalar>(curve: &BoundaryCurve<S>, p: Point<S>) -> Result<i64> {
    let map = |q: Point<S>| -> Result<Point<S>> { Ok([q[0] - p[0], q[1] - p[1]]) };
    Ok(accumulate(&map, curve, false)?.winding)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindingResult<S> {
    pub winding: i64,
    /// Minimum of `‖map‖` over every evaluated boundary point.
    pub margin: S,
    pub samples_used: usize,
    pub refinements: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeResult<S> {
    pub degree: i64,
    pub boundary_margin: S,
    pub samples_used: usize,
    pub refinements: usize,
}

fn angle_between<S: Scalar>(a: Point<S>, b: Point<S>) -> S {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

fn magnitude<S: Scalar>(v: Point<S>) -> S {
    v[0].hypot(v[1])
}

fn accumulate<S, F>(map: &F, curve: &BoundaryCurve<S>, parallel: bool) -> Result<WindingResult<S>>
where
    S: Scalar,
    F: Fn(Point<S>) -> Result<Point<S>> + Sync,
{
    let m = curve.samples;
    if m < 3 {
        return Err(Error::InvalidInput(format!("curve needs at least 3 samples, got {m}")));
    }
    let params: Vec<S> = curve.sample_params().collect();
    let eval = |theta: &S| map(curve.param(*theta));
    let values: Vec<Point<S>> = if parallel {
        params.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        params.iter().map(eval).collect::<Result<_>>()?
    };

    let zero_margin = lit::<S>(ZERO_MARGIN);
    let half_pi = S::FRAC_PI_2();
    let mut margin = S::infinity();
    for v in &values {
        let r = magnitude(*v);
        if !r.is_finite() {
            return Err(Error::InvalidInput("map produced a non-finite value on the boundary".into()));
        }
        margin = margin.min(r);
    }
    if margin < zero_margin {
        return Err(Error::ZeroOnBoundary { margin: margin.as_f64() });
    }

    let mut total = S::zero();
    let mut evaluations = m;
    let mut refinements = 0usize;
    let mut stack: Vec<(S, Point<S>, S, Point<S>, u32)> = Vec::new();
    for k in 0..m {
        let (ta, va) = (params[k], values[k]);
        let (tb, vb) = if k + 1 < m { (params[k + 1], values[k + 1]) } else { (S::one(), values[0]) };
        stack.push((ta, va, tb, vb, 0));
        while let Some((ta, va, tb, vb, depth)) = stack.pop() {
            let d = angle_between(va, vb);
            if d.abs() < half_pi {
                total = total + d;
                continue;
            }
            if depth >= MAX_REFINEMENT_DEPTH {
                return Err(Error::RefinementExhausted { theta: ta.as_f64() });
            }
            let tm = (ta + tb) * lit(0.5);
            let vm = map(curve.param(tm))?;
            evaluations += 1;
            refinements += 1;
            let r = magnitude(vm);
            margin = margin.min(r);
            if !(r >= zero_margin) {
                return Err(Error::ZeroOnBoundary { margin: r.as_f64() });
            }
            // right half first so the left half is processed next
            stack.push((tm, vm, tb, vb, depth + 1));
            stack.push((ta, va, tm, vm, depth + 1));
        }
    }
    let turns = total / (S::PI() + S::PI());
    let winding = turns.round();
    Ok(WindingResult { winding: winding.to_i64().unwrap_or(0), margin, samples_used: evaluations, refinements })
}

/// Winding number of `map ∘ param` around the origin along `curve`.
///
/// Base samples are evaluated concurrently; refinement is sequential per segment.
pub fn boundary_winding<S, F>(map: &F, curve: &BoundaryCurve<S>) -> Result<WindingResult<S>>
where
    S: Scalar,
    F: Fn(Point<S>) -> Result<Point<S>> + Sync,
{
    accumulate(map, curve, true)
}

/// Degree of `map` over `region`: the sum of oriented boundary windings.
pub fn region_degree<S, F>(map: &F, region: &PlanarRegion<S>) -> Result<DegreeResult<S>>
where
    S: Scalar,
    F: Fn(Point<S>) -> Result<Point<S>> + Sync,
{
    let mut out = DegreeResult { degree: 0, boundary_margin: S::infinity(), samples_used: 0, refinements: 0 };
    for curve in region.curves() {
        let w = boundary_winding(map, curve)?;
        out.degree += w.winding;
        out.boundary_margin = out.boundary_margin.min(w.margin);
        out.samples_used += w.samples_used;
        out.refinements += w.refinements;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ok(f: impl Fn(Point<f64>) -> Point<f64> + Sync) -> impl Fn(Point<f64>) -> Result<Point<f64>> + Sync {
        move |p| Ok(f(p))
    }

    fn unit_circle() -> BoundaryCurve<f64> {
        BoundaryCurve::new(CurveGeometry::Circle { center: [0.0, 0.0], radius: 1.0 }, Orientation::Ccw, DEFAULT_SAMPLES)
    }

    #[test]
    fn identity_and_antipodal_wind_once() {
        assert_eq!(boundary_winding(&ok(|p| p), &unit_circle()).unwrap().winding, 1);
        assert_eq!(boundary_winding(&ok(|p| [-p[0], -p[1]]), &unit_circle()).unwrap().winding, 1);
    }

    #[test]
    fn constant_map_winds_zero() {
        let c = BoundaryCurve::new(CurveGeometry::Circle { center: [0.0, 0.0], radius: 2.0 }, Orientation::Ccw, DEFAULT_SAMPLES);
        assert_eq!(boundary_winding(&ok(|_| [0.0, -3.0 * PI / 4.0]), &c).unwrap().winding, 0);
    }

    #[test]
    fn conjugate_and_power_maps() {
        let conj = ok(|p| [p[0], -p[1]]);
        assert_eq!(boundary_winding(&conj, &unit_circle()).unwrap().winding, -1);
        // z^3 needs refinement from 5 base samples
        let cube = ok(|p| {
            let (x, y) = (p[0], p[1]);
            [x * x * x - 3.0 * x * y * y, 3.0 * x * x * y - y * y * y]
        });
        let coarse = unit_circle().with_samples(5);
        let w = boundary_winding(&cube, &coarse).unwrap();
        assert_eq!(w.winding, 3);
        assert!(w.refinements > 0);
    }

    #[test]
    fn zero_on_boundary_is_an_error() {
        let err = boundary_winding(&ok(|p| [p[0] - 1.0, p[1]]), &unit_circle()).unwrap_err();
        assert!(matches!(err, Error::ZeroOnBoundary { .. }), "{err:?}");
    }

    #[test]
    fn refinement_exhaustion() {
        // a zero just off a sample point, closer than 20 bisection levels can resolve
        let eps = 1e-11;
        let map = ok(move |p| [p[0] - (1.0 + eps) * (2.0 * PI * 0.5 / 256.0).cos(), p[1] - (2.0 * PI * 0.5 / 256.0).sin()]);
        let err = boundary_winding(&map, &unit_circle()).unwrap_err();
        assert!(matches!(err, Error::RefinementExhausted { .. } | Error::ZeroOnBoundary { .. }), "{err:?}");
    }

    #[test]
    fn annulus_of_identity_has_degree_zero() {
        let a = PlanarRegion::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        let d = region_degree(&ok(|p| p), &a).unwrap();
        assert_eq!(d.degree, 0);
        assert!((d.boundary_margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vdp_radial_map_degrees() {
        let f = ok(|p| {
            let k = PI - PI / 4.0 * (p[0] * p[0] + p[1] * p[1]);
            [k * p[0], k * p[1]]
        });
        assert_eq!(region_degree(&f, &PlanarRegion::disc([0.0, 0.0], 3.0).unwrap()).unwrap().degree, 1);
        assert_eq!(region_degree(&f, &PlanarRegion::annulus([0.0, 0.0], 1.0, 3.0).unwrap()).unwrap().degree, 0);
    }

    #[test]
    fn containment() {
        let a = PlanarRegion::annulus([0.0, 0.0], 1.0, 2.0).unwrap();
        assert_eq!(a.contains([1.5, 0.0]), Containment::Inside);
        assert_eq!(a.contains([0.5, 0.0]), Containment::Outside);
        assert_eq!(a.contains([3.0, 0.0]), Containment::Outside);
        assert_eq!(a.contains([1.0, 0.0]), Containment::OnBoundary);
    }

    #[test]
    fn polygon_orientation_is_normalized() {
        let cw = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let region = PlanarRegion::from_curves(CurveGeometry::polygon(cw).unwrap(), vec![], 64).unwrap();
        assert_eq!(region.contains([0.5, 0.5]), Containment::Inside);
        let d = region_degree(&ok(|p| [p[0] - 0.5, p[1] - 0.5]), &region).unwrap();
        assert_eq!(d.degree, 1);
    }

    #[test]
    fn self_intersecting_curve_rejected() {
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [-0.5, 0.5]];
        let g = CurveGeometry::polygon(bow).unwrap();
        assert!(PlanarRegion::from_curves(g, vec![], 32).is_err());
    }

    #[test]
    fn hole_outside_rejected() {
        let outer = CurveGeometry::Circle { center: [0.0, 0.0], radius: 1.0 };
        let hole = CurveGeometry::Circle { center: [3.0, 0.0], radius: 0.5 };
        assert!(PlanarRegion::from_curves(outer, vec![hole], 64).is_err());
        assert!(PlanarRegion::annulus([0.0, 0.0], 2.0, 1.0).is_err());
    }

    #[test]
    fn scaled_region() {
        let d = PlanarRegion::disc([0.0, 0.0], 2.0).unwrap().scaled(1.5);
        assert_eq!(d.contains([2.9, 0.0]), Containment::Inside);
        assert_eq!(d.contains([3.1, 0.0]), Containment::Outside);
    }
}
