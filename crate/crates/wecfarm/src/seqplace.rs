//! Sequential single-buoy placement primitives: Nelder-Mead simplex, the
//! LS-NM hybrid, and the symmetric annular sampling geometry used by the
//! neuro-surrogate placement loop.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::ea::RunTrace;
use crate::error::{Error, Result};
use crate::farm::{feasible_against, FarmGeometry, Layout, Point};
use crate::hydro::Simulator;
use crate::rng;

/// Per-sector attempts before a sector is declared infeasible.
pub const SECTOR_ATTEMPTS: usize = 64;

/// Symmetric local search geometry: sectors of `res` degrees around the
/// anchor, radius ring `[safe + r1, safe + r2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlsConfig {
    pub res: u32,
    pub r1: f64,
    pub r2: f64,
    pub safe: f64,
}

impl Default for SlsConfig {
    fn default() -> Self {
        SlsConfig {
            res: 3,
            r1: 0.0,
            r2: 20.0,
            safe: 50.0,
        }
    }
}

impl SlsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.res == 0 || 360 % self.res != 0 {
            return Err(Error::invalid(format!(
                "sector resolution {} must divide 360",
                self.res
            )));
        }
        if !(self.r2 > self.r1 && self.r1 >= 0.0) {
            return Err(Error::invalid("ring radii must satisfy r2 > r1 >= 0"));
        }
        if self.safe <= 0.0 {
            return Err(Error::invalid("safe distance must be positive"));
        }
        Ok(())
    }
}

/// Where a sample's value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleOrigin {
    Simulator,
    Surrogate,
}

/// One scored local sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOutcome {
    pub angle_index: usize,
    pub position: Point,
    pub value: f64,
    pub origin: SampleOrigin,
}

/// Sector start angles `{0, res, ..., 360 - res}` in degrees.
pub fn sector_angles(res: u32) -> Result<Vec<f64>> {
    if res == 0 || 360 % res != 0 {
        return Err(Error::invalid(format!("resolution {res} must divide 360")));
    }
    Ok((0..360 / res).map(|i| f64::from(i * res)).collect())
}

/// A raw annulus-sector draw around `anchor`, before any feasibility check.
fn draw_in_sector(anchor: &Point, angle_deg: f64, cfg: &SlsConfig, rng: &mut impl Rng) -> Point {
    let radius = rng.random_range((cfg.safe + cfg.r1)..=(cfg.safe + cfg.r2));
    let theta = rng
        .random_range(angle_deg..(angle_deg + f64::from(cfg.res)))
        .to_radians();
    Point::new(anchor.x + radius * theta.cos(), anchor.y + radius * theta.sin())
}

/// Result of a bounded feasible-sample search within one sector.
#[derive(Debug, Clone, Copy)]
pub struct SectorDraw {
    pub point: Point,
    pub feasible: bool,
    pub attempts: usize,
}

/// Tries up to [`SECTOR_ATTEMPTS`] draws for a feasible point inside the
/// sector; when the sector holds none, the last draw is returned so the
/// caller can still spend its evaluation on it.
pub fn sector_draw(
    anchor: &Point,
    angle_deg: f64,
    cfg: &SlsConfig,
    placed: &[Point],
    geometry: &FarmGeometry,
    rng: &mut impl Rng,
) -> SectorDraw {
    let mut last = draw_in_sector(anchor, angle_deg, cfg, rng);
    for attempt in 1..=SECTOR_ATTEMPTS {
        if feasible_against(&last, placed, geometry) {
            return SectorDraw {
                point: last,
                feasible: true,
                attempts: attempt,
            };
        }
        if attempt < SECTOR_ATTEMPTS {
            last = draw_in_sector(anchor, angle_deg, cfg, rng);
        }
    }
    SectorDraw {
        point: last,
        feasible: false,
        attempts: SECTOR_ATTEMPTS,
    }
}

/// Feasible point at radius `[safe + r1, safe + r2]` and angle
/// `[angle, angle + res)` from the anchor, retried against the farm bounds
/// and the safety distance to every placed buoy.
pub fn symmetric_sample(
    anchor: &Point,
    angle_deg: f64,
    cfg: &SlsConfig,
    placed: &[Point],
    geometry: &FarmGeometry,
    rng: &mut impl Rng,
) -> Result<Point> {
    cfg.validate()?;
    let draw = sector_draw(anchor, angle_deg, cfg, placed, geometry, rng);
    if draw.feasible {
        Ok(draw.point)
    } else {
        Err(Error::PlacementFailure {
            attempts: draw.attempts,
        })
    }
}

/// Nelder-Mead simplex minimization in two dimensions.
///
/// Coefficients 1 / 2 / 0.5 / 0.5 (reflect, expand, contract, shrink); runs
/// exactly `iterations` simplex iterations from a right-angle simplex of leg
/// `scale` at `start`. A simplex collapsing below area 1e-12 is re-inflated
/// around the best vertex at the same leg. Returns the best point ever
/// evaluated, which is never worse than the start.
pub fn nelder_mead<F>(mut f: F, start: Point, iterations: usize, scale: f64) -> (Point, f64)
where
    F: FnMut(Point) -> f64,
{
    let mut simplex = [
        (start, f(start)),
        {
            let p = Point::new(start.x + scale, start.y);
            (p, f(p))
        },
        {
            let p = Point::new(start.x, start.y + scale);
            (p, f(p))
        },
    ];
    // best-ever tracking; strict improvement keeps the start on constant f
    let mut best = simplex[0];
    for v in &simplex[1..] {
        if v.1 < best.1 {
            best = *v;
        }
    }

    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));

        let area = {
            let (a, b, c) = (simplex[0].0, simplex[1].0, simplex[2].0);
            0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
        };
        if area < 1e-12 {
            let a = simplex[0].0;
            let p1 = Point::new(a.x + scale.max(1e-6), a.y);
            let p2 = Point::new(a.x, a.y + scale.max(1e-6));
            simplex[1] = (p1, f(p1));
            simplex[2] = (p2, f(p2));
            for v in &simplex[1..] {
                if v.1 < best.1 {
                    best = *v;
                }
            }
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        }

        let centroid = Point::new(
            0.5 * (simplex[0].0.x + simplex[1].0.x),
            0.5 * (simplex[0].0.y + simplex[1].0.y),
        );
        let worst = simplex[2];
        let reflect = Point::new(
            centroid.x + (centroid.x - worst.0.x),
            centroid.y + (centroid.y - worst.0.y),
        );
        let f_reflect = f(reflect);
        if f_reflect < best.1 {
            best = (reflect, f_reflect);
        }

        if f_reflect < simplex[0].1 {
            let expand = Point::new(
                centroid.x + 2.0 * (reflect.x - centroid.x),
                centroid.y + 2.0 * (reflect.y - centroid.y),
            );
            let f_expand = f(expand);
            if f_expand < best.1 {
                best = (expand, f_expand);
            }
            simplex[2] = if f_expand < f_reflect {
                (expand, f_expand)
            } else {
                (reflect, f_reflect)
            };
        } else if f_reflect < simplex[1].1 {
            simplex[2] = (reflect, f_reflect);
        } else {
            // contraction toward the better of worst/reflected
            let (toward, f_toward) = if f_reflect < worst.1 {
                (reflect, f_reflect)
            } else {
                (worst.0, worst.1)
            };
            let contract = Point::new(
                centroid.x + 0.5 * (toward.x - centroid.x),
                centroid.y + 0.5 * (toward.y - centroid.y),
            );
            let f_contract = f(contract);
            if f_contract < best.1 {
                best = (contract, f_contract);
            }
            if f_contract < f_toward {
                simplex[2] = (contract, f_contract);
            } else {
                // shrink toward the best vertex
                for i in 1..3 {
                    let p = Point::new(
                        simplex[0].0.x + 0.5 * (simplex[i].0.x - simplex[0].0.x),
                        simplex[0].0.y + 0.5 * (simplex[i].0.y - simplex[0].0.y),
                    );
                    let fp = f(p);
                    if fp < best.1 {
                        best = (p, fp);
                    }
                    simplex[i] = (p, fp);
                }
            }
        }
    }
    best
}

/// LS-NM configuration; sigma is the Gaussian sampling spread around the
/// previously placed buoy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsnmConfig {
    pub sigma: f64,
    pub samples: usize,
    pub nm_iterations: usize,
}

impl Default for LsnmConfig {
    fn default() -> Self {
        LsnmConfig {
            sigma: 70.0,
            samples: 8,
            nm_iterations: 25,
        }
    }
}

/// Places the next buoy by Gaussian sampling around the previous one plus
/// Nelder-Mead refinement with all other buoys frozen.
///
/// Every drawn sample is simulator-evaluated on the penalized objective; the
/// best feasible sample seeds the simplex. Refinement vertices are clamped
/// into the farm before evaluation, and the appended position is the best
/// feasible point seen anywhere in the process.
pub fn lsnm_place_next(
    partial: &Layout,
    sim: &Simulator,
    cfg: &LsnmConfig,
    rng: &mut impl Rng,
) -> Result<(Layout, f64)> {
    let anchor = *partial
        .last()
        .ok_or_else(|| Error::invalid("partial layout is empty"))?;
    let geometry = sim.geometry;
    let side = geometry.side();
    let normal = Normal::new(0.0, cfg.sigma).expect("sigma > 0");

    let with_candidate = |p: Point| -> Result<Layout> {
        let mut l = Layout::new(partial.len() + 1, partial.positions().to_vec())?;
        l.push(p)?;
        Ok(l)
    };

    let mut best_feasible: Option<(Point, f64)> = None;
    for _ in 0..cfg.samples.max(1) {
        let p = Point::new(anchor.x + normal.sample(rng), anchor.y + normal.sample(rng));
        let value = sim.evaluate(&with_candidate(p)?)?.objective;
        if feasible_against(&p, partial.positions(), &geometry)
            && best_feasible.is_none_or(|(_, v)| value > v)
        {
            best_feasible = Some((p, value));
        }
    }

    let (start, start_value) = match best_feasible {
        Some(found) => found,
        None => {
            // uniform in-bounds fallback, still honoring the safety distance
            let p = crate::farm::resample_until_feasible(
                || Point::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side)),
                |p| feasible_against(p, partial.positions(), &geometry),
                10_000,
            )?;
            let value = sim.evaluate(&with_candidate(p)?)?.objective;
            (p, value)
        }
    };

    let mut refined = (start, start_value);
    if cfg.nm_iterations > 0 {
        let refined_cell = std::cell::RefCell::new(&mut refined);
        let objective = |p: Point| -> f64 {
            let clamped = Point::new(p.x.clamp(0.0, side), p.y.clamp(0.0, side));
            let value = sim
                .evaluate(&with_candidate(clamped).expect("clamped point is finite"))
                .map(|r| r.objective)
                .unwrap_or(f64::NEG_INFINITY);
            if feasible_against(&clamped, partial.positions(), &geometry) {
                let mut tracked = refined_cell.borrow_mut();
                if value > tracked.1 {
                    **tracked = (clamped, value);
                }
            }
            -value
        };
        nelder_mead(objective, start, cfg.nm_iterations, 0.01 * side);
    }

    let mut layout = Layout::new(partial.len() + 1, partial.positions().to_vec())?;
    layout.push(refined.0)?;
    debug_assert!(feasible_against(&refined.0, partial.positions(), &geometry));
    Ok((layout, refined.1))
}

/// Full LS-NM run: first buoy at the bottom corner, then sequential
/// placements until the layout is complete or the remaining budget cannot
/// cover a placement's worst case.
pub fn run_lsnm(
    sim: &Simulator,
    cfg: &LsnmConfig,
    budget: u64,
    seed: u64,
) -> Result<(RunTrace, Layout, bool)> {
    let started = Instant::now();
    let geometry = sim.geometry;
    let n = geometry.n();
    let mut trace = RunTrace::new();

    let mut layout = Layout::empty(n);
    layout.push(Point::new(geometry.side(), 0.0))?;
    let first = sim.evaluate(&layout)?;
    trace.offer(&layout.to_flat(), first.objective);
    trace.record(sim.calls(), started);

    // worst case per placement: samples (+1 fallback) + simplex of 3 + 4 per iteration
    let worst_case = (cfg.samples + 4 + 4 * cfg.nm_iterations) as u64;
    let mut partial = false;
    for i in 2..=n {
        if sim.calls() + worst_case > budget {
            partial = true;
            break;
        }
        let mut rng = rng::substream(seed, "lsnm-placement", i as u64);
        let (next, value) = lsnm_place_next(&layout, sim, cfg, &mut rng)?;
        layout = next;
        trace.offer(&layout.to_flat(), value);
        trace.record(sim.calls(), started);
    }
    Ok((trace, layout, partial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::WaveScenario;
    use approx::assert_relative_eq;

    #[test]
    fn sector_angles_examples() {
        assert_eq!(sector_angles(3).unwrap().len(), 120);
        assert_eq!(sector_angles(90).unwrap(), vec![0.0, 90.0, 180.0, 270.0]);
        assert_eq!(sector_angles(120).unwrap(), vec![0.0, 120.0, 240.0]);
        assert!(sector_angles(7).is_err());
        assert!(sector_angles(0).is_err());
    }

    #[test]
    fn sector_angles_tile_the_circle() {
        for res in [1u32, 2, 3, 4, 5, 6, 8, 9, 10, 12, 15, 30, 45, 60] {
            let angles = sector_angles(res).unwrap();
            assert_eq!(angles.len(), (360 / res) as usize);
            for (i, a) in angles.iter().enumerate() {
                assert_eq!(*a, (i as u32 * res) as f64);
            }
            assert_eq!(*angles.last().unwrap(), f64::from(360 - res));
        }
    }

    #[test]
    fn symmetric_sample_stays_in_ring() {
        let g = FarmGeometry::standard(16).unwrap();
        let cfg = SlsConfig::default();
        let anchor = Point::new(250.0, 250.0);
        let mut rng = crate::rng::stream(2, "sls");
        for angle in sector_angles(30).unwrap() {
            let p = symmetric_sample(&anchor, angle, &cfg, &[], &g, &mut rng).unwrap();
            let d = anchor.distance(&p);
            assert!((50.0..=70.0).contains(&d), "distance {d}");
        }
    }

    #[test]
    fn degenerate_ring_gives_exact_distance() {
        let g = FarmGeometry::standard(16).unwrap();
        let cfg = SlsConfig {
            r1: 0.0,
            r2: 1e-12,
            ..SlsConfig::default()
        };
        let anchor = Point::new(100.0, 100.0);
        let mut rng = crate::rng::stream(3, "sls");
        let p = symmetric_sample(&anchor, 0.0, &cfg, &[], &g, &mut rng).unwrap();
        assert_relative_eq!(anchor.distance(&p), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_sample_is_reproducible() {
        let g = FarmGeometry::standard(16).unwrap();
        let cfg = SlsConfig::default();
        let anchor = Point::new(250.0, 250.0);
        let a = symmetric_sample(&anchor, 45.0, &cfg, &[], &g, &mut crate::rng::stream(9, "s"))
            .unwrap();
        let b = symmetric_sample(&anchor, 45.0, &cfg, &[], &g, &mut crate::rng::stream(9, "s"))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blocked_sector_reports_placement_failure() {
        let g = FarmGeometry::standard(16).unwrap();
        let cfg = SlsConfig::default();
        // anchor at the bottom-right corner; a sector pointing down leaves
        // the farm entirely
        let anchor = Point::new(g.side(), 0.0);
        let mut rng = crate::rng::stream(4, "sls");
        let r = symmetric_sample(&anchor, 280.0, &cfg, &[], &g, &mut rng);
        assert!(matches!(r, Err(Error::PlacementFailure { .. })));
        let draw = sector_draw(&anchor, 280.0, &cfg, &[], &g, &mut rng);
        assert!(!draw.feasible);
        assert_eq!(draw.attempts, SECTOR_ATTEMPTS);
    }

    #[test]
    fn nelder_mead_quadratic_oracle() {
        let f = |p: Point| (p.x - 3.0).powi(2) + (p.y - 4.0).powi(2);
        let (best, value) = nelder_mead(f, Point::new(0.0, 0.0), 200, 1.0);
        assert!(value < 1e-12);
        assert!((best.x - 3.0).abs() < 1e-6 && (best.y - 4.0).abs() < 1e-6);
    }

    #[test]
    fn nelder_mead_constant_returns_start() {
        let (best, value) = nelder_mead(|_| 7.5, Point::new(2.0, 1.0), 10, 1.0);
        assert_eq!(best, Point::new(2.0, 1.0));
        assert_eq!(value, 7.5);
    }

    #[test]
    fn nelder_mead_recovers_from_degenerate_simplex() {
        // zero scale collapses the simplex immediately; re-inflation keeps
        // the search alive and the result no worse than the start
        let f = |p: Point| (p.x - 1.0).powi(2) + (p.y + 2.0).powi(2);
        let (_best, value) = nelder_mead(f, Point::new(0.0, 0.0), 1, 0.0);
        assert!(value <= f(Point::new(0.0, 0.0)));
    }

    #[test]
    fn nelder_mead_never_worse_than_start() {
        let mut rng = crate::rng::stream(5, "nm");
        for _ in 0..20 {
            let start = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let a = rng.random_range(0.5..3.0);
            let f = move |p: Point| a * (p.x.sin() + p.y.cos()) + 0.1 * (p.x * p.x + p.y * p.y);
            let start_value = f(start);
            let (_, value) = nelder_mead(f, start, 5, 0.7);
            assert!(value <= start_value);
        }
    }

    fn small_simulator() -> Simulator {
        let mut scenario = WaveScenario::bundled("perth-like").unwrap();
        // single direction, three frequencies: fast unit-test objective
        scenario.components.truncate(3);
        for c in &mut scenario.components {
            c.probability = 1.0;
        }
        Simulator::new(scenario, FarmGeometry::standard(4).unwrap())
    }

    #[test]
    fn lsnm_placement_respects_constraints_and_counting() {
        let sim = small_simulator();
        let mut layout = Layout::empty(4);
        layout.push(Point::new(sim.geometry.side(), 0.0)).unwrap();
        sim.evaluate(&layout).unwrap();
        let calls_before = sim.calls();

        let cfg = LsnmConfig::default();
        let mut rng = crate::rng::stream(11, "lsnm");
        let (next, value) = lsnm_place_next(&layout, &sim, &cfg, &mut rng).unwrap();
        assert_eq!(next.len(), 2);
        let p = next.positions()[1];
        assert!(feasible_against(&p, &next.positions()[..1], &sim.geometry));

        // call accounting: samples + simplex(3) + iterations in [1,4] each
        let used = sim.calls() - calls_before;
        assert!(used >= (cfg.samples + 3 + cfg.nm_iterations) as u64);
        assert!(used <= (cfg.samples + 4 + 4 * cfg.nm_iterations) as u64);

        // no stale caching: the returned value matches a fresh evaluation
        let oracle = Simulator::new(sim.scenario.clone(), sim.geometry);
        let fresh = oracle.evaluate(&next).unwrap().objective;
        assert_relative_eq!(value, fresh, max_relative = 1e-12);
    }

    #[test]
    fn run_lsnm_completes_and_is_monotone() {
        let sim = small_simulator();
        let cfg = LsnmConfig {
            samples: 4,
            nm_iterations: 5,
            ..LsnmConfig::default()
        };
        let (trace, layout, partial) = run_lsnm(&sim, &cfg, 10_000, 21).unwrap();
        assert!(!partial);
        assert!(layout.is_complete());
        assert!(trace.is_monotone());
        assert_eq!(trace.points.len(), 4);
        for (i, p) in layout.positions().iter().enumerate() {
            let others: Vec<Point> = layout
                .positions()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| *q)
                .collect();
            assert!(feasible_against(p, &others, &sim.geometry));
        }
    }

    #[test]
    fn run_lsnm_budget_stop_flags_partial() {
        let sim = small_simulator();
        let cfg = LsnmConfig::default();
        let (_, layout, partial) = run_lsnm(&sim, &cfg, 40, 21).unwrap();
        assert!(partial);
        assert!(layout.len() < 4);
    }
}
