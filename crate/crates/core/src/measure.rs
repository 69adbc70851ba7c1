//! Discrete measures with positive atoms: evaluation on sets, extension by
//! zero across exhaustion levels, the signed-difference algebra, and the
//! finite-volume variation predicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exhaustion::OpenRegion;
use crate::linalg::pairwise_sum;
use crate::space::{distance, Ball, Point, TestSet};

/// Atoms closer than this are merged on construction; guards against
/// duplicate atoms from numerical drift.
pub const MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub weight: f64,
}

/// A finite positive atomic measure at a declared exhaustion level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
    level: u32,
}

/// Sets a measure can be evaluated on.
pub trait Region {
    fn contains_point(&self, p: &Point) -> Result<bool>;
}

impl Region for TestSet {
    fn contains_point(&self, p: &Point) -> Result<bool> {
        self.contains(p)
    }
}

impl Region for OpenRegion {
    fn contains_point(&self, p: &Point) -> Result<bool> {
        for (c, r) in &self.balls {
            if distance(c, p)? < *r {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl DiscreteMeasure {
    /// Builds a measure, dropping zero-weight atoms, rejecting negative
    /// weights, and merging atoms within the merge tolerance.
    pub fn new(atoms: Vec<Atom>, level: u32) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidMeasure("level must be positive".into()));
        }
        let mut merged: Vec<Atom> = Vec::new();
        for a in atoms {
            if !a.weight.is_finite() || a.weight < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom weight {} is not a finite nonnegative number",
                    a.weight
                )));
            }
            if a.point.level() > level {
                return Err(Error::InvalidMeasure(format!(
                    "atom at level {} exceeds measure level {}",
                    a.point.level(),
                    level
                )));
            }
            if a.weight == 0.0 {
                continue;
            }
            let mut absorbed = false;
            for m in &mut merged {
                if distance(&m.point, &a.point)? <= MERGE_TOL {
                    m.weight += a.weight;
                    absorbed = true;
                    break;
                }
            }
            if !absorbed {
                merged.push(a);
            }
        }
        Ok(Self {
            atoms: merged,
            level,
        })
    }

    pub fn empty(level: u32) -> Self {
        Self {
            atoms: Vec::new(),
            level,
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn total_volume(&self) -> f64 {
        pairwise_sum(&self.atoms.iter().map(|a| a.weight).collect::<Vec<_>>())
    }

    /// The support: exactly the atom points.
    pub fn support(&self) -> Vec<Point> {
        self.atoms.iter().map(|a| a.point.clone()).collect()
    }
}

/// Total weight of the atoms lying in the region.
pub fn measure_of<R: Region>(m: &DiscreteMeasure, s: &R) -> Result<f64> {
    let mut inside = Vec::new();
    for a in m.atoms() {
        if s.contains_point(&a.point)? {
            inside.push(a.weight);
        }
    }
    Ok(pairwise_sum(&inside))
}

/// Extension by zero to a higher level: atoms unchanged, only the declared
/// level rises. Exact for atomic measures.
pub fn extend_by_zero(mn: &DiscreteMeasure, target_level: u32) -> Result<DiscreteMeasure> {
    if target_level < mn.level {
        return Err(Error::LevelDowncast {
            from: mn.level,
            to: target_level,
        });
    }
    Ok(DiscreteMeasure {
        atoms: mn.atoms.clone(),
        level: target_level,
    })
}

/// The signed difference of two measures after cancelling shared atoms, with
/// a bounding region outside which the two measures agree.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SignedDifference {
    pub plus: DiscreteMeasure,
    pub minus: DiscreteMeasure,
    pub support_region: TestSet,
}

impl SignedDifference {
    pub fn net_volume_change(&self) -> f64 {
        self.plus.total_volume() - self.minus.total_volume()
    }

    pub fn total_variation(&self) -> f64 {
        self.plus.total_volume() + self.minus.total_volume()
    }

    /// Atom list with signed weights (plus positive, minus negative).
    pub fn signed_atoms(&self) -> Vec<(Point, f64)> {
        let mut out: Vec<(Point, f64)> = self
            .plus
            .atoms()
            .iter()
            .map(|a| (a.point.clone(), a.weight))
            .collect();
        out.extend(self.minus.atoms().iter().map(|a| (a.point.clone(), -a.weight)));
        out
    }
}

/// Cancels shared atoms weight-wise and returns the plus/minus parts of
/// rho_tilde - rho together with a minimal bounding region of the surviving
/// atoms.
pub fn difference(rho_tilde: &DiscreteMeasure, rho: &DiscreteMeasure) -> Result<SignedDifference> {
    let level = rho_tilde.level.max(rho.level);
    let mut plus: Vec<Atom> = Vec::new();
    let mut minus: Vec<Atom> = Vec::new();
    let mut matched = vec![false; rho.atoms.len()];
    for a in &rho_tilde.atoms {
        let mut partner: Option<usize> = None;
        for (i, b) in rho.atoms.iter().enumerate() {
            if !matched[i] && distance(&a.point, &b.point)? <= MERGE_TOL {
                partner = Some(i);
                break;
            }
        }
        match partner {
            Some(i) => {
                matched[i] = true;
                let delta = a.weight - rho.atoms[i].weight;
                if delta > 0.0 {
                    plus.push(Atom {
                        point: a.point.clone(),
                        weight: delta,
                    });
                } else if delta < 0.0 {
                    minus.push(Atom {
                        point: a.point.clone(),
                        weight: -delta,
                    });
                }
            }
            None => plus.push(a.clone()),
        }
    }
    for (i, b) in rho.atoms.iter().enumerate() {
        if !matched[i] {
            minus.push(b.clone());
        }
    }
    let region_balls: Vec<Ball> = plus
        .iter()
        .chain(minus.iter())
        .map(|a| Ball {
            center: a.point.clone(),
            radius: MERGE_TOL,
            level,
        })
        .collect();
    Ok(SignedDifference {
        plus: DiscreteMeasure {
            atoms: plus,
            level,
        },
        minus: DiscreteMeasure {
            atoms: minus,
            level,
        },
        support_region: TestSet {
            id: -1,
            balls: region_balls,
        },
    })
}

/// True iff the net volume change is within tol; finite total variation is
/// automatic for atomic measures.
pub fn is_variation_of_finite_volume(
    rho_tilde: &DiscreteMeasure,
    rho: &DiscreteMeasure,
    tol: f64,
) -> Result<bool> {
    Ok(difference(rho_tilde, rho)?.net_volume_change().abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64) -> Point {
        Point::euclidean(1, vec![x]).unwrap()
    }

    fn pt_at(level: u32, coords: Vec<f64>) -> Point {
        Point::euclidean(level, coords).unwrap()
    }

    fn atom(x: f64, w: f64) -> Atom {
        Atom {
            point: pt(x),
            weight: w,
        }
    }

    fn ball(x: f64, r: f64, level: u32) -> TestSet {
        TestSet {
            id: 0,
            balls: vec![Ball {
                center: pt(x),
                radius: r,
                level,
            }],
        }
    }

    #[test]
    fn construction_merges_and_drops() {
        let m = DiscreteMeasure::new(
            vec![atom(0.0, 1.0), atom(1e-12, 2.0), atom(5.0, 0.0), atom(3.0, 1.5)],
            1,
        )
        .unwrap();
        assert_eq!(m.atoms().len(), 2);
        assert!((m.total_volume() - 4.5).abs() < 1e-12);
        assert!(DiscreteMeasure::new(vec![atom(0.0, -1.0)], 1).is_err());
        assert!(DiscreteMeasure::new(vec![Atom { point: pt_at(2, vec![0.0, 0.0]), weight: 1.0 }], 1).is_err());
    }

    #[test]
    fn measure_of_basics() {
        let empty = DiscreteMeasure::empty(1);
        assert_eq!(measure_of(&empty, &ball(0.0, 1.0, 1)).unwrap(), 0.0);
        let m = DiscreteMeasure::new(vec![atom(0.0, 2.0)], 1).unwrap();
        assert_eq!(measure_of(&m, &ball(0.0, 0.5, 1)).unwrap(), 2.0);
    }

    #[test]
    fn measure_of_matches_membership_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let atoms: Vec<Atom> = (0..20)
                .map(|_| atom(rng.gen_range(-5.0..5.0), rng.gen_range(0.01..1.0)))
                .collect();
            let m = DiscreteMeasure::new(atoms, 1).unwrap();
            let set = TestSet {
                id: 0,
                balls: (0..3)
                    .map(|_| Ball {
                        center: pt(rng.gen_range(-5.0..5.0)),
                        radius: rng.gen_range(0.5..3.0),
                        level: 1,
                    })
                    .collect(),
            };
            let oracle: f64 = m
                .atoms()
                .iter()
                .filter(|a| set.contains(&a.point).unwrap())
                .map(|a| a.weight)
                .sum();
            assert!((measure_of(&m, &set).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn extend_by_zero_identity() {
        let m = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(2.0, 0.5)], 1).unwrap();
        let same = extend_by_zero(&m, 1).unwrap();
        assert_eq!(same.atoms().len(), 2);
        assert_eq!(same.level(), 1);
        let up = extend_by_zero(&m, 3).unwrap();
        assert_eq!(up.level(), 3);
        // a ball centered strictly outside the level-1 slice carries no mass
        let outside = TestSet {
            id: 0,
            balls: vec![Ball {
                center: pt_at(3, vec![0.0, 0.0, 7.0]),
                radius: 1.0,
                level: 3,
            }],
        };
        assert_eq!(measure_of(&up, &outside).unwrap(), 0.0);
        assert!(extend_by_zero(&up, 1).is_err());
    }

    #[test]
    fn extension_identity_holds_on_random_sets() {
        // rho^[n](A) = rho_n(A intersect level-n slice), checked per atom
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let atoms: Vec<Atom> = (0..10)
                .map(|_| atom(rng.gen_range(-3.0..3.0), rng.gen_range(0.01..1.0)))
                .collect();
            let m = DiscreteMeasure::new(atoms, 1).unwrap();
            let ext = extend_by_zero(&m, 2).unwrap();
            let set = TestSet {
                id: 0,
                balls: vec![Ball {
                    center: pt_at(2, vec![rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)]),
                    radius: rng.gen_range(0.2..2.0),
                    level: 2,
                }],
            };
            // intersection with the level-1 slice: atoms are all level 1, so
            // membership in the set decides both sides
            assert_eq!(
                measure_of(&ext, &set).unwrap(),
                measure_of(&m, &set).unwrap()
            );
        }
    }

    #[test]
    fn difference_identity_and_transport() {
        let m = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(1.0, 2.0)], 1).unwrap();
        let d = difference(&m, &m).unwrap();
        assert_eq!(d.total_variation(), 0.0);
        assert!(d.plus.atoms().is_empty() && d.minus.atoms().is_empty());

        let moved = DiscreteMeasure::new(vec![atom(0.5, 1.0), atom(1.0, 2.0)], 1).unwrap();
        let d = difference(&moved, &m).unwrap();
        assert_eq!(d.plus.atoms().len(), 1);
        assert_eq!(d.minus.atoms().len(), 1);
        assert!(d.net_volume_change().abs() < 1e-12);
        assert!(is_variation_of_finite_volume(&moved, &m, 1e-9).unwrap());
    }

    #[test]
    fn difference_matches_bookkeeping_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..30 {
            let base: Vec<Atom> = (0..8)
                .map(|i| atom(i as f64, rng.gen_range(0.1..1.0)))
                .collect();
            let tweaked: Vec<Atom> = base
                .iter()
                .map(|a| Atom {
                    point: a.point.clone(),
                    weight: a.weight + rng.gen_range(-0.05..0.05),
                })
                .collect();
            let rho = DiscreteMeasure::new(base.clone(), 1).unwrap();
            let rho_t = DiscreteMeasure::new(tweaked.clone(), 1).unwrap();
            let d = difference(&rho_t, &rho).unwrap();
            let oracle_tv: f64 = base
                .iter()
                .zip(&tweaked)
                .map(|(a, b)| (b.weight - a.weight).abs())
                .sum();
            assert!((d.total_variation() - oracle_tv).abs() < 1e-12);
            // reapply: rho + plus - minus reproduces rho_tilde
            for a in &tweaked {
                let base_w = base
                    .iter()
                    .find(|b| distance(&b.point, &a.point).unwrap() <= MERGE_TOL)
                    .unwrap()
                    .weight;
                let plus_w: f64 = d
                    .plus
                    .atoms()
                    .iter()
                    .filter(|p| distance(&p.point, &a.point).unwrap() <= MERGE_TOL)
                    .map(|p| p.weight)
                    .sum();
                let minus_w: f64 = d
                    .minus
                    .atoms()
                    .iter()
                    .filter(|p| distance(&p.point, &a.point).unwrap() <= MERGE_TOL)
                    .map(|p| p.weight)
                    .sum();
                assert!((base_w + plus_w - minus_w - a.weight).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variation_predicate() {
        let m = DiscreteMeasure::new(vec![atom(0.0, 1.0)], 1).unwrap();
        assert!(is_variation_of_finite_volume(&m, &m, 0.0).unwrap());
        let grown = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(2.0, 0.1)], 1).unwrap();
        assert!(!is_variation_of_finite_volume(&grown, &m, 1e-9).unwrap());
    }

    #[test]
    fn measures_agree_outside_reported_region() {
        let rho = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(1.0, 1.0)], 1).unwrap();
        let rho_t = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(2.0, 1.0)], 1).unwrap();
        let d = difference(&rho_t, &rho).unwrap();
        // every point outside support_region gets the same mass from both
        for x in [-1.0, 0.0, 0.5, 3.0] {
            let probe = ball(x, 0.4, 1);
            let in_region = d
                .support_region
                .balls
                .iter()
                .any(|b| distance(&b.center, &pt(x)).unwrap() <= b.radius + 0.4);
            if !in_region {
                assert_eq!(
                    measure_of(&rho, &probe).unwrap(),
                    measure_of(&rho_t, &probe).unwrap()
                );
            }
        }
    }

    #[test]
    fn support_is_atom_set() {
        assert!(DiscreteMeasure::empty(1).support().is_empty());
        let m = DiscreteMeasure::new(vec![atom(0.0, 1.0), atom(0.0, 2.0), atom(1.0, 1.0)], 1).unwrap();
        assert_eq!(m.support().len(), 2);
    }
}
