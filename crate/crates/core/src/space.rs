//! The ambient space at finite resolution: level-tagged points in either the
//! Euclidean or the operator realization, the metric, inclusion maps between
//! exhaustion levels, and the finite family of compact test sets built from a
//! dense sample.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exhaustion::OpenRegion;
use crate::linalg::{hermitian_operator_norm, orthonormalize_columns, CMat};

/// A self-adjoint operator of rank at most 2s in factored form
/// `frame * diag(eigenvalues) * frame^H`, with at most s positive and at most
/// s negative eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorPointRepr", into = "OperatorPointRepr")]
pub struct OperatorPoint {
    eigenvalues: Vec<f64>,
    frame: CMat,
    spin_dimension: usize,
    hilbert_trunc: usize,
}

impl OperatorPoint {
    pub fn new(
        eigenvalues: Vec<f64>,
        frame: CMat,
        spin_dimension: usize,
        hilbert_trunc: usize,
    ) -> Result<Self> {
        if spin_dimension == 0 || hilbert_trunc == 0 {
            return Err(Error::DimensionMismatch(
                "spin dimension and Hilbert truncation must be positive".into(),
            ));
        }
        let r = eigenvalues.len();
        if frame.nrows() != hilbert_trunc || frame.ncols() != r {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, expected {}x{}",
                frame.nrows(),
                frame.ncols(),
                hilbert_trunc,
                r
            )));
        }
        if eigenvalues.iter().any(|l| *l == 0.0 || !l.is_finite()) {
            return Err(Error::DimensionMismatch(
                "eigenvalue list may only contain nonzero finite entries".into(),
            ));
        }
        let n_pos = eigenvalues.iter().filter(|l| **l > 0.0).count();
        let n_neg = eigenvalues.iter().filter(|l| **l < 0.0).count();
        if n_pos > spin_dimension || n_neg > spin_dimension {
            return Err(Error::DimensionMismatch(format!(
                "signature ({n_pos},{n_neg}) exceeds spin dimension {spin_dimension}"
            )));
        }
        let gram = frame.adjoint() * &frame;
        for i in 0..r {
            for j in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - Complex64::new(want, 0.0)).norm() > 1e-10 {
                    return Err(Error::DimensionMismatch(
                        "frame columns are not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Self {
            eigenvalues,
            frame,
            spin_dimension,
            hilbert_trunc,
        })
    }

    pub fn zero(spin_dimension: usize, hilbert_trunc: usize) -> Self {
        Self {
            eigenvalues: Vec::new(),
            frame: CMat::zeros(hilbert_trunc, 0),
            spin_dimension,
            hilbert_trunc,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    pub fn spin_dimension(&self) -> usize {
        self.spin_dimension
    }

    pub fn hilbert_trunc(&self) -> usize {
        self.hilbert_trunc
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Materializes the dense N x N matrix. Intended for oracles and small N.
    pub fn dense(&self) -> CMat {
        let n = self.hilbert_trunc;
        let mut out = CMat::zeros(n, n);
        for (k, l) in self.eigenvalues.iter().enumerate() {
            let col = self.frame.column(k);
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += col[i] * col[j].conj() * Complex64::new(*l, 0.0);
                }
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorPointRepr {
    eigenvalues: Vec<f64>,
    /// Row-major, one (re, im) pair per entry.
    frame: Vec<Vec<(f64, f64)>>,
    spin_dimension: usize,
    hilbert_trunc: usize,
}

impl TryFrom<OperatorPointRepr> for OperatorPoint {
    type Error = Error;

    fn try_from(repr: OperatorPointRepr) -> Result<Self> {
        let r = repr.eigenvalues.len();
        if repr.frame.len() != repr.hilbert_trunc
            || repr.frame.iter().any(|row| row.len() != r)
        {
            return Err(Error::DimensionMismatch(
                "serialized frame shape does not match eigenvalue count".into(),
            ));
        }
        let frame = CMat::from_fn(repr.hilbert_trunc, r, |i, j| {
            Complex64::new(repr.frame[i][j].0, repr.frame[i][j].1)
        });
        OperatorPoint::new(repr.eigenvalues, frame, repr.spin_dimension, repr.hilbert_trunc)
    }
}

impl From<OperatorPoint> for OperatorPointRepr {
    fn from(op: OperatorPoint) -> Self {
        let frame = (0..op.frame.nrows())
            .map(|i| {
                (0..op.frame.ncols())
                    .map(|j| (op.frame[(i, j)].re, op.frame[(i, j)].im))
                    .collect()
            })
            .collect();
        OperatorPointRepr {
            eigenvalues: op.eigenvalues,
            frame,
            spin_dimension: op.spin_dimension,
            hilbert_trunc: op.hilbert_trunc,
        }
    }
}

/// An element of the space, tagged with the smallest exhaustion level whose
/// slice contains it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Point {
    Euclidean {
        level: u32,
        coords: Vec<f64>,
    },
    Operator {
        level: u32,
        #[serde(flatten)]
        op: OperatorPoint,
    },
}

impl Point {
    pub fn euclidean(level: u32, coords: Vec<f64>) -> Result<Self> {
        if level == 0 {
            return Err(Error::DimensionMismatch("level must be positive".into()));
        }
        if coords.is_empty() || coords.len() % level as usize != 0 {
            return Err(Error::DimensionMismatch(format!(
                "coordinate length {} is not a positive multiple of level {}",
                coords.len(),
                level
            )));
        }
        Ok(Point::Euclidean { level, coords })
    }

    pub fn operator(level: u32, op: OperatorPoint) -> Result<Self> {
        if level == 0 {
            return Err(Error::DimensionMismatch("level must be positive".into()));
        }
        Ok(Point::Operator { level, op })
    }

    pub fn level(&self) -> u32 {
        match self {
            Point::Euclidean { level, .. } | Point::Operator { level, .. } => *level,
        }
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Euclidean { coords, .. } => Some(coords),
            Point::Operator { .. } => None,
        }
    }

    pub fn as_operator(&self) -> Option<&OperatorPoint> {
        match self {
            Point::Operator { op, .. } => Some(op),
            Point::Euclidean { .. } => None,
        }
    }

    pub fn dims_per_level(&self) -> Option<usize> {
        match self {
            Point::Euclidean { level, coords } => Some(coords.len() / *level as usize),
            Point::Operator { .. } => None,
        }
    }

    /// Total-order key over the raw representation; used to canonicalize
    /// argument order so symmetric evaluations are bitwise reproducible, and
    /// to deduplicate sets of balls.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::new();
        match self {
            Point::Euclidean { level, coords } => {
                k.push(0);
                k.push(*level as u64);
                k.extend(coords.iter().map(|c| c.to_bits()));
            }
            Point::Operator { level, op } => {
                k.push(1);
                k.push(*level as u64);
                k.push(op.spin_dimension as u64);
                k.push(op.hilbert_trunc as u64);
                k.extend(op.eigenvalues.iter().map(|l| l.to_bits()));
                for i in 0..op.frame.nrows() {
                    for j in 0..op.frame.ncols() {
                        k.push(op.frame[(i, j)].re.to_bits());
                        k.push(op.frame[(i, j)].im.to_bits());
                    }
                }
            }
        }
        k
    }
}

/// Metric of the space: Euclidean norm of the coordinate difference, or the
/// operator norm of the difference computed on the joint column span of the
/// two frames (an eigenproblem of size at most 4s).
pub fn distance(x: &Point, y: &Point) -> Result<f64> {
    match (x, y) {
        (Point::Euclidean { coords: a, .. }, Point::Euclidean { coords: b, .. }) => {
            let da = x.dims_per_level().unwrap();
            let db = y.dims_per_level().unwrap();
            if da != db {
                return Err(Error::DimensionMismatch(format!(
                    "points declare {da} and {db} dimensions per level"
                )));
            }
            let n = a.len().max(b.len());
            let mut acc = 0.0;
            for i in 0..n {
                let ai = a.get(i).copied().unwrap_or(0.0);
                let bi = b.get(i).copied().unwrap_or(0.0);
                acc += (ai - bi) * (ai - bi);
            }
            Ok(acc.sqrt())
        }
        (Point::Operator { op: a, .. }, Point::Operator { op: b, .. }) => operator_distance(a, b),
        _ => Err(Error::DimensionMismatch(
            "cannot mix Euclidean and operator points".into(),
        )),
    }
}

fn operator_distance(a: &OperatorPoint, b: &OperatorPoint) -> Result<f64> {
    if a.hilbert_trunc != b.hilbert_trunc || a.spin_dimension != b.spin_dimension {
        return Err(Error::DimensionMismatch(format!(
            "operator points live in different spaces: (s={}, N={}) vs (s={}, N={})",
            a.spin_dimension, a.hilbert_trunc, b.spin_dimension, b.hilbert_trunc
        )));
    }
    let n = a.hilbert_trunc;
    let ra = a.rank();
    let rb = b.rank();
    if ra + rb == 0 {
        return Ok(0.0);
    }
    let mut stacked = CMat::zeros(n, ra + rb);
    stacked.view_mut((0, 0), (n, ra)).copy_from(&a.frame);
    stacked.view_mut((0, ra), (n, rb)).copy_from(&b.frame);
    let q = orthonormalize_columns(&stacked, 1e-12);
    let compress = |op: &OperatorPoint| -> CMat {
        let qf = q.adjoint() * &op.frame;
        let m = q.ncols();
        let mut out = CMat::zeros(m, m);
        for (k, l) in op.eigenvalues.iter().enumerate() {
            let col = qf.column(k);
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] += col[i] * col[j].conj() * Complex64::new(*l, 0.0);
                }
            }
        }
        out
    };
    let diff = compress(a) - compress(b);
    Ok(hermitian_operator_norm(&diff))
}

/// Inclusion map into a higher exhaustion level; the represented element is
/// unchanged.
pub fn lift(x: &Point, target_level: u32) -> Result<Point> {
    if target_level < x.level() {
        return Err(Error::LevelDowncast {
            from: x.level(),
            to: target_level,
        });
    }
    Ok(match x {
        Point::Euclidean { level, coords } => {
            let d = coords.len() / *level as usize;
            let mut out = coords.clone();
            out.resize(target_level as usize * d, 0.0);
            Point::Euclidean {
                level: target_level,
                coords: out,
            }
        }
        Point::Operator { op, .. } => Point::Operator {
            level: target_level,
            op: op.clone(),
        },
    })
}

/// A closed metric ball intersected with the slice at `level`; the basic
/// compact piece of a test set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
    pub level: u32,
}

impl Ball {
    fn key(&self) -> Vec<u64> {
        let mut k = vec![self.level as u64, self.radius.to_bits()];
        k.extend(self.center.key());
        k
    }

    pub fn contains(&self, p: &Point) -> Result<bool> {
        if p.level() > self.level {
            return Ok(false);
        }
        Ok(distance(&self.center, p)? <= self.radius)
    }
}

/// A finite union of level-tagged closed balls; compact because each ball
/// meets a finite-dimensional slice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestSet {
    pub id: i64,
    pub balls: Vec<Ball>,
}

impl TestSet {
    pub fn contains(&self, p: &Point) -> Result<bool> {
        for b in &self.balls {
            if b.contains(p)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Deduplicated, order-independent identity of the represented ball set.
    pub fn ball_keys(&self) -> Vec<Vec<u64>> {
        let mut keys: Vec<Vec<u64>> = self.balls.iter().map(|b| b.key()).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Conservative subset test: d is a subset of d2 if every ball of d sits
    /// inside some ball of d2 by the triangle inequality.
    pub fn subset_of_set(&self, other: &TestSet) -> bool {
        self.balls.iter().all(|b| {
            other.balls.iter().any(|b2| {
                b.level <= b2.level
                    && matches!(distance(&b.center, &b2.center), Ok(d) if d + b.radius <= b2.radius)
            })
        })
    }

    /// Conservative disjointness test by pairwise ball separation.
    pub fn disjoint_from(&self, other: &TestSet) -> bool {
        self.balls.iter().all(|b| {
            other.balls.iter().all(|b2| {
                matches!(distance(&b.center, &b2.center), Ok(d) if d > b.radius + b2.radius)
            })
        })
    }
}

/// Conservative test that the closed set d lies inside the open region u:
/// every ball (c, r) must satisfy distance(c, c') + r < r' for some open ball
/// (c', r') of u. Sound but incomplete; incompleteness only lowers reported
/// suprema.
pub fn subset_of(d: &TestSet, u: &OpenRegion) -> bool {
    d.balls.iter().all(|b| {
        u.balls.iter().any(|(c, r)| {
            matches!(distance(&b.center, c), Ok(dist) if dist + b.radius < *r)
        })
    })
}

/// The finite realization of the countable family of compact test sets:
/// one ball per (dense sample point, radius) pair, closed under pairwise
/// unions to the stated depth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestSetFamily {
    pub members: Vec<TestSet>,
    pub dense_sample: Vec<Point>,
    pub radii: Vec<f64>,
    pub union_depth: u32,
}

impl TestSetFamily {
    pub fn member_by_keys(&self, keys: &[Vec<u64>]) -> Option<&TestSet> {
        self.members.iter().find(|m| m.ball_keys() == keys)
    }
}

/// Draws a random rank-deficient self-adjoint operator with admissible
/// signature: between 1 and 2s nonzero eigenvalues, at most s of each sign,
/// and a Haar-ish random orthonormal frame.
pub fn random_operator_point(s: usize, n: usize, rng: &mut impl rand::Rng) -> OperatorPoint {
    let n_pos = rng.gen_range(0..=s);
    let n_neg = rng.gen_range(if n_pos == 0 { 1 } else { 0 }..=s);
    let mut eigs: Vec<f64> = (0..n_pos).map(|_| rng.gen_range(0.1..2.0)).collect();
    eigs.extend((0..n_neg).map(|_| -rng.gen_range(0.1..2.0)));
    let r = eigs.len();
    let raw = CMat::from_fn(n, r, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let q = orthonormalize_columns(&raw, 1e-12);
    assert_eq!(q.ncols(), r, "random frame lost rank");
    OperatorPoint::new(eigs, q, s, n).expect("random operator point is valid by construction")
}

pub fn build_test_family(
    dense_sample: &[Point],
    radii: &[f64],
    union_depth: u32,
    cap: usize,
    level: u32,
) -> Result<TestSetFamily> {
    if dense_sample.is_empty() {
        return Err(Error::InvalidFamily("dense sample is empty".into()));
    }
    if radii.is_empty() {
        return Err(Error::InvalidFamily("radius list is empty".into()));
    }
    if let Some(r) = radii.iter().find(|r| **r <= 0.0 || !r.is_finite()) {
        return Err(Error::InvalidFamily(format!("radius {r} is not positive")));
    }
    let mut members: Vec<TestSet> = Vec::new();
    let mut seen: HashMap<Vec<Vec<u64>>, usize> = HashMap::new();
    let push = |members: &mut Vec<TestSet>,
                    seen: &mut HashMap<Vec<Vec<u64>>, usize>,
                    balls: Vec<Ball>|
     -> Result<()> {
        let candidate = TestSet {
            id: members.len() as i64,
            balls,
        };
        let keys = candidate.ball_keys();
        if !seen.contains_key(&keys) {
            if members.len() >= cap {
                return Err(Error::FamilyTooLarge { cap });
            }
            seen.insert(keys, members.len());
            members.push(candidate);
        }
        Ok(())
    };
    for p in dense_sample {
        for r in radii {
            push(
                &mut members,
                &mut seen,
                vec![Ball {
                    center: p.clone(),
                    radius: *r,
                    // members live in the top slice so that extended
                    // higher-level atoms near the center are counted
                    level: level.max(p.level()),
                }],
            )?;
        }
    }
    for _ in 0..union_depth {
        let generation = members.len();
        for i in 0..generation {
            for j in (i + 1)..generation {
                let mut balls = members[i].balls.clone();
                balls.extend(members[j].balls.iter().cloned());
                // deduplicate identical balls within the union
                let mut dedup: Vec<Ball> = Vec::new();
                let mut keys_seen: Vec<Vec<u64>> = Vec::new();
                for b in balls {
                    let k = b.key();
                    if !keys_seen.contains(&k) {
                        keys_seen.push(k);
                        dedup.push(b);
                    }
                }
                push(&mut members, &mut seen, dedup)?;
            }
        }
    }
    Ok(TestSetFamily {
        members,
        dense_sample: dense_sample.to_vec(),
        radii: radii.to_vec(),
        union_depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(coords: &[f64]) -> Point {
        Point::euclidean(1, coords.to_vec()).unwrap()
    }

    #[test]
    fn distance_identity_and_pythagorean() {
        let x = pt(&[0.0, 0.0]);
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
        let y = pt(&[3.0, 4.0]);
        assert_eq!(distance(&x, &y).unwrap(), 5.0);
    }

    #[test]
    fn operator_distance_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_operator_point(1, 8, &mut rng);
            let b = random_operator_point(1, 8, &mut rng);
            let fast = operator_distance(&a, &b).unwrap();
            let dense = hermitian_operator_norm(&(a.dense() - b.dense()));
            assert!((fast - dense).abs() < 1e-10, "fast {fast} dense {dense}");
        }
    }

    #[test]
    fn operator_distance_zero_for_equal_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_operator_point(2, 8, &mut rng);
        assert!(operator_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn mixed_realizations_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = pt(&[0.0]);
        let b = Point::operator(1, random_operator_point(1, 4, &mut rng)).unwrap();
        assert!(matches!(distance(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn lift_identity_and_padding() {
        let x = Point::euclidean(1, vec![1.0, 2.0]).unwrap();
        assert_eq!(lift(&x, 1).unwrap(), x);
        let lifted = lift(&x, 2).unwrap();
        assert_eq!(lifted.coords().unwrap(), &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(distance(&x, &lifted).unwrap(), 0.0);
        assert!(matches!(
            lift(&lifted, 1),
            Err(Error::LevelDowncast { from: 2, to: 1 })
        ));
    }

    #[test]
    fn lift_operator_same_dense_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let op = random_operator_point(1, 8, &mut rng);
        let x = Point::operator(1, op.clone()).unwrap();
        let lifted = lift(&x, 3).unwrap();
        let y = lifted.as_operator().unwrap();
        assert_eq!(op.dense(), y.dense());
        assert_eq!(distance(&x, &lifted).unwrap(), 0.0);
    }

    #[test]
    fn family_counts() {
        let f = build_test_family(&[pt(&[0.0])], &[1.0], 0, 100, 1).unwrap();
        assert_eq!(f.members.len(), 1);
        let f = build_test_family(&[pt(&[0.0]), pt(&[5.0])], &[1.0], 1, 100, 1).unwrap();
        assert_eq!(f.members.len(), 3);
    }

    #[test]
    fn family_matches_exhaustive_enumeration() {
        let sample = [pt(&[0.0]), pt(&[1.0]), pt(&[2.0])];
        let radii = [0.25, 0.5];
        let f = build_test_family(&sample, &radii, 1, 10_000, 1).unwrap();
        // oracle: all singletons plus all 2-subsets of the 6 distinct balls
        let singles = 6;
        let pairs = 6 * 5 / 2;
        assert_eq!(f.members.len(), singles + pairs);
        // closure property: union of any two depth-0 members is present
        for i in 0..singles {
            for j in (i + 1)..singles {
                let mut balls = f.members[i].balls.clone();
                balls.extend(f.members[j].balls.iter().cloned());
                let u = TestSet { id: -1, balls };
                assert!(f.member_by_keys(&u.ball_keys()).is_some());
            }
        }
    }

    #[test]
    fn family_cap_enforced() {
        let sample = [pt(&[0.0]), pt(&[1.0]), pt(&[2.0])];
        assert!(matches!(
            build_test_family(&sample, &[0.25, 0.5], 1, 10, 1),
            Err(Error::FamilyTooLarge { cap: 10 })
        ));
    }

    #[test]
    fn family_input_validation() {
        assert!(build_test_family(&[], &[1.0], 0, 10, 1).is_err());
        assert!(build_test_family(&[pt(&[0.0])], &[], 0, 10, 1).is_err());
        assert!(build_test_family(&[pt(&[0.0])], &[-1.0], 0, 10, 1).is_err());
    }

    #[test]
    fn subset_of_boundary_cases() {
        let c = pt(&[0.0]);
        let d = TestSet {
            id: 0,
            balls: vec![Ball {
                center: c.clone(),
                radius: 1.0,
                level: 1,
            }],
        };
        let big = OpenRegion {
            balls: vec![(c.clone(), 2.0)],
        };
        let equal = OpenRegion {
            balls: vec![(c.clone(), 1.0)],
        };
        assert!(subset_of(&d, &big));
        assert!(!subset_of(&d, &equal));
        let two = TestSet {
            id: 1,
            balls: vec![
                Ball {
                    center: pt(&[0.0]),
                    radius: 0.5,
                    level: 1,
                },
                Ball {
                    center: pt(&[10.0]),
                    radius: 0.5,
                    level: 1,
                },
            ],
        };
        let covers_one = OpenRegion {
            balls: vec![(pt(&[0.0]), 2.0)],
        };
        assert!(!subset_of(&two, &covers_one));
    }

    #[test]
    fn point_roundtrips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = pt(&[1.5, -2.5]);
        let s = serde_json::to_string(&x).unwrap();
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(x, back);
        let y = Point::operator(2, random_operator_point(2, 6, &mut rng)).unwrap();
        let s = serde_json::to_string(&y).unwrap();
        let back: Point = serde_json::from_str(&s).unwrap();
        assert_eq!(y, back);
    }

    proptest! {
        #[test]
        fn metric_properties(
            a in proptest::collection::vec(-10.0f64..10.0, 3),
            b in proptest::collection::vec(-10.0f64..10.0, 3),
            c in proptest::collection::vec(-10.0f64..10.0, 3),
        ) {
            let x = Point::euclidean(1, a).unwrap();
            let y = Point::euclidean(1, b).unwrap();
            let z = Point::euclidean(1, c).unwrap();
            let dxy = distance(&x, &y).unwrap();
            let dyx = distance(&y, &x).unwrap();
            prop_assert_eq!(dxy, dyx);
            let dxz = distance(&x, &z).unwrap();
            let dzy = distance(&z, &y).unwrap();
            prop_assert!(dxy <= dxz + dzy + 1e-10);
        }

        #[test]
        fn lift_preserves_distance(
            a in proptest::collection::vec(-10.0f64..10.0, 2),
            b in proptest::collection::vec(-10.0f64..10.0, 2),
            m in 1u32..5,
        ) {
            let x = Point::euclidean(1, a).unwrap();
            let y = Point::euclidean(1, b).unwrap();
            let d0 = distance(&x, &y).unwrap();
            let d1 = distance(&lift(&x, m).unwrap(), &lift(&y, m).unwrap()).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }
    }
}
