//! Farm geometry, buoy layouts and the constraint/penalty system shared by
//! every optimizer.
//!
//! Coordinates are in meters with the origin at the farm's lower-left corner,
//! x rightward, y upward. The square boundary is inclusive on all four edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum inter-buoy distance in meters.
pub const DEFAULT_MIN_DISTANCE: f64 = 50.0;
/// Default farm area allocated per buoy, in square meters.
pub const DEFAULT_AREA_PER_BUOY: f64 = 20_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Ordered buoy positions. Order is significant: it is the placement order
/// for sequential methods and the input order for the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    n: usize,
    positions: Vec<Point>,
}

/// Serialized form of [`Layout`]: `{"n": int, "positions": [[x,y],...]}`.
#[derive(Serialize, Deserialize)]
struct LayoutFile {
    n: usize,
    positions: Vec<[f64; 2]>,
}

impl Layout {
    /// A layout targeting `n` buoys with the given (possibly partial) prefix.
    pub fn new(n: usize, positions: Vec<Point>) -> Result<Self> {
        if positions.len() > n {
            return Err(Error::invalid(format!(
                "layout holds {} positions but targets {} buoys",
                positions.len(),
                n
            )));
        }
        if let Some(p) = positions.iter().find(|p| !p.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        Ok(Layout { n, positions })
    }

    pub fn empty(n: usize) -> Self {
        Layout {
            n,
            positions: Vec::with_capacity(n),
        }
    }

    /// Builds a full layout from a flat `[x1, y1, x2, y2, ...]` genome.
    pub fn from_flat(genome: &[f64]) -> Result<Self> {
        if genome.len() % 2 != 0 {
            return Err(Error::invalid("flat genome length must be even"));
        }
        let positions: Vec<Point> = genome
            .chunks_exact(2)
            .map(|c| Point::new(c[0], c[1]))
            .collect();
        Layout::new(positions.len(), positions)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.positions.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn target_n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.positions.len() == self.n
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn last(&self) -> Option<&Point> {
        self.positions.last()
    }

    pub fn push(&mut self, p: Point) -> Result<()> {
        if !p.is_finite() {
            return Err(Error::invalid("non-finite coordinate"));
        }
        if self.positions.len() == self.n {
            return Err(Error::invalid("layout already complete"));
        }
        self.positions.push(p);
        Ok(())
    }

    /// Layout with position `index` replaced; used by mutation operators.
    pub fn with_position(&self, index: usize, p: Point) -> Layout {
        let mut out = self.clone();
        out.positions[index] = p;
        out
    }

    pub fn to_json(&self) -> String {
        let file = LayoutFile {
            n: self.n,
            positions: self.positions.iter().map(|p| [p.x, p.y]).collect(),
        };
        serde_json::to_string_pretty(&file).expect("layout serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("layout json: {e}")))?;
        let positions = file
            .positions
            .iter()
            .map(|c| Point::new(c[0], c[1]))
            .collect();
        Layout::new(file.n, positions)
    }
}

/// Square farm geometry. The side is always recomputed from the buoy count
/// and per-buoy area so it can never go stale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarmGeometry {
    n: usize,
    area_per_buoy: f64,
    min_distance: f64,
}

impl FarmGeometry {
    pub fn new(n: usize, area_per_buoy: f64, min_distance: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("buoy count must be at least 1"));
        }
        if area_per_buoy <= 0.0 {
            return Err(Error::invalid("area per buoy must be positive"));
        }
        if min_distance <= 0.0 {
            return Err(Error::invalid("minimum distance must be positive"));
        }
        Ok(FarmGeometry {
            n,
            area_per_buoy,
            min_distance,
        })
    }

    /// Paper configuration: `n` buoys, 20 000 m² each, 50 m safety distance.
    pub fn standard(n: usize) -> Result<Self> {
        FarmGeometry::new(n, DEFAULT_AREA_PER_BUOY, DEFAULT_MIN_DISTANCE)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        (self.n as f64 * self.area_per_buoy).sqrt()
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn area_per_buoy(&self) -> f64 {
        self.area_per_buoy
    }
}

/// One simulator evaluation of a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationResult {
    /// Farm power in watts, before any penalty.
    pub raw_power: f64,
    /// Total inter-buoy distance violation in meters.
    pub violation_sum: f64,
    /// Penalty in watts; zero exactly when the layout is feasible.
    pub penalty: f64,
    /// `raw_power - penalty`.
    pub objective: f64,
    /// Simulator-call ledger reading after this evaluation.
    pub simulator_calls: u64,
}

/// Side of the square farm: `sqrt(n * area_per_buoy)`.
pub fn farm_side(n: usize, area_per_buoy: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("buoy count must be at least 1"));
    }
    if area_per_buoy <= 0.0 {
        return Err(Error::invalid("area per buoy must be positive"));
    }
    Ok((n as f64 * area_per_buoy).sqrt())
}

/// Sum over unordered buoy pairs of `max(0, min_distance - distance)`.
pub fn violation_sum(layout: &Layout, min_distance: f64) -> f64 {
    let pts = layout.positions();
    let mut sum = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = pts[i].distance(&pts[j]);
            if d < min_distance {
                sum += min_distance - d;
            }
        }
    }
    sum
}

/// Steep constraint penalty in watts: `(violation_sum + 1)^20`, except that a
/// feasible layout (violation_sum = 0) pays exactly nothing, so feasibility
/// never costs power.
pub fn penalty(violation_sum: f64) -> Result<f64> {
    if violation_sum < 0.0 || !violation_sum.is_finite() {
        return Err(Error::invalid(format!(
            "violation sum must be finite and non-negative, got {violation_sum}"
        )));
    }
    if violation_sum == 0.0 {
        Ok(0.0)
    } else {
        Ok((violation_sum + 1.0).powi(20))
    }
}

/// Inclusive square-boundary check.
pub fn in_bounds(p: &Point, geometry: &FarmGeometry) -> bool {
    let side = geometry.side();
    p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side
}

/// True when `p` is in bounds and at least `min_distance` from every placed buoy.
pub fn feasible_against(p: &Point, placed: &[Point], geometry: &FarmGeometry) -> bool {
    in_bounds(p, geometry)
        && placed
            .iter()
            .all(|q| p.distance(q) >= geometry.min_distance())
}

/// Draws points from `sampler` until `accept` holds, up to `max_attempts`.
/// RNG consumption is deterministic: exactly one draw per attempt.
pub fn resample_until_feasible<F, A>(
    mut sampler: F,
    accept: A,
    max_attempts: usize,
) -> Result<Point>
where
    F: FnMut() -> Point,
    A: Fn(&Point) -> bool,
{
    if max_attempts == 0 {
        return Err(Error::invalid("max_attempts must be at least 1"));
    }
    for _ in 0..max_attempts {
        let p = sampler();
        if accept(&p) {
            return Ok(p);
        }
    }
    Err(Error::PlacementFailure {
        attempts: max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn layout_of(pts: &[(f64, f64)]) -> Layout {
        Layout::new(pts.len(), pts.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap()
    }

    #[test]
    fn farm_side_matches_paper_setting() {
        assert_relative_eq!(farm_side(16, 20_000.0).unwrap(), 565.685424949238, epsilon = 1e-9);
        assert_relative_eq!(farm_side(1, 20_000.0).unwrap(), 141.4213562373095, epsilon = 1e-9);
        assert_relative_eq!(farm_side(4, 20_000.0).unwrap(), 282.842712474619, epsilon = 1e-9);
    }

    #[test]
    fn farm_side_rejects_zero_buoys() {
        assert!(matches!(farm_side(0, 20_000.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn violation_sum_examples() {
        let ok = layout_of(&[(0.0, 0.0), (60.0, 0.0)]);
        assert_eq!(violation_sum(&ok, 50.0), 0.0);

        let close = layout_of(&[(0.0, 0.0), (40.0, 0.0)]);
        assert_relative_eq!(violation_sum(&close, 50.0), 10.0, epsilon = 1e-12);

        // three buoys pairwise 45 m apart: equilateral triangle, brute force
        // over the 3 pairs gives 3 * 5 = 15.
        let tri = layout_of(&[
            (0.0, 0.0),
            (45.0, 0.0),
            (22.5, 45.0 * (3.0f64).sqrt() / 2.0),
        ]);
        assert_relative_eq!(violation_sum(&tri, 50.0), 15.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_and_singleton_layouts_have_no_violation() {
        assert_eq!(violation_sum(&Layout::empty(16), 50.0), 0.0);
        assert_eq!(violation_sum(&layout_of(&[(3.0, 4.0)]), 50.0), 0.0);
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(0.0).unwrap(), 0.0);
        assert_eq!(penalty(1.0).unwrap(), 1_048_576.0);
        assert_relative_eq!(penalty(0.5).unwrap(), 1.5f64.powi(20), epsilon = 1e-9);
        assert_relative_eq!(penalty(0.5).unwrap(), 3325.256730079651, epsilon = 1e-6);
        assert!(penalty(-0.1).is_err());
    }

    #[test]
    fn penalty_jumps_at_zero_and_increases() {
        // designed discontinuity: 0 at feasibility, > 1 for any violation
        assert!(penalty(1e-12).unwrap() > 1.0);
        let mut prev = penalty(1e-12).unwrap();
        for v in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let p = penalty(v).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn bounds_are_inclusive() {
        let g = FarmGeometry::standard(16).unwrap();
        let side = g.side();
        assert!(in_bounds(&Point::new(0.0, 0.0), &g));
        assert!(in_bounds(&Point::new(side, side), &g));
        assert!(in_bounds(&Point::new(side, 0.0), &g));
        assert!(!in_bounds(&Point::new(566.0, 10.0), &g));
        assert!(!in_bounds(&Point::new(-1e-9, 10.0), &g));
    }

    #[test]
    fn resample_contract() {
        let g = FarmGeometry::standard(16).unwrap();
        // always in bounds: first sample returned
        let p = resample_until_feasible(|| Point::new(1.0, 1.0), |p| in_bounds(p, &g), 10).unwrap();
        assert_eq!(p, Point::new(1.0, 1.0));

        // alternating out/in: second sample, two attempts consumed
        let mut calls = 0;
        let p = resample_until_feasible(
            || {
                calls += 1;
                if calls == 1 {
                    Point::new(-5.0, 0.0)
                } else {
                    Point::new(2.0, 2.0)
                }
            },
            |p| in_bounds(p, &g),
            10,
        )
        .unwrap();
        assert_eq!(p, Point::new(2.0, 2.0));
        assert_eq!(calls, 2);

        // never feasible: placement failure carrying the attempt count
        let err = resample_until_feasible(|| Point::new(-1.0, -1.0), |p| in_bounds(p, &g), 100);
        match err {
            Err(Error::PlacementFailure { attempts }) => assert_eq!(attempts, 100),
            other => panic!("expected placement failure, got {other:?}"),
        }
    }

    #[test]
    fn layout_json_round_trip() {
        let l = layout_of(&[(1.5, 2.25), (100.0, 200.0)]);
        let back = Layout::from_json(&l.to_json()).unwrap();
        assert_eq!(l, back);
    }

    #[test]
    fn layout_rejects_non_finite() {
        assert!(Layout::new(2, vec![Point::new(f64::NAN, 0.0)]).is_err());
        assert!(Layout::new(2, vec![Point::new(0.0, f64::INFINITY)]).is_err());
    }

    proptest! {
        #[test]
        fn violation_is_permutation_invariant(
            pts in proptest::collection::vec((0.0..500.0f64, 0.0..500.0f64), 2..8),
            swap_a in 0usize..8,
            swap_b in 0usize..8,
        ) {
            let a = swap_a % pts.len();
            let b = swap_b % pts.len();
            let layout = layout_of(&pts);
            let mut permuted = pts.clone();
            permuted.swap(a, b);
            let layout_p = layout_of(&permuted);
            let v0 = violation_sum(&layout, 50.0);
            let v1 = violation_sum(&layout_p, 50.0);
            prop_assert!((v0 - v1).abs() <= 1e-9);
        }

        #[test]
        fn violation_is_rigid_motion_invariant(
            pts in proptest::collection::vec((0.0..500.0f64, 0.0..500.0f64), 2..8),
            dx in -100.0..100.0f64,
            dy in -100.0..100.0f64,
            theta in 0.0..std::f64::consts::TAU,
        ) {
            let layout = layout_of(&pts);
            let (s, c) = theta.sin_cos();
            let moved: Vec<(f64, f64)> = pts
                .iter()
                .map(|&(x, y)| (c * x - s * y + dx, s * x + c * y + dy))
                .collect();
            let layout_m = layout_of(&moved);
            let v0 = violation_sum(&layout, 50.0);
            let v1 = violation_sum(&layout_m, 50.0);
            prop_assert!((v0 - v1).abs() <= 1e-6, "v0={v0} v1={v1}");
        }
    }
}
