//! The construction pipeline across exhaustion levels: per-level solves,
//! extension by zero, the set function phi on the test family, the derived
//! mu/eta values, the set-function law checks, conditions (B) and (iv)
//! bookkeeping, the non-triviality search, and convergence traces. No
//! subsequence extraction happens anywhere; the full level sequence is
//! reported together with a stabilization statistic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::LagrangianKernel;
use crate::measure::{extend_by_zero, measure_of, DiscreteMeasure};
use crate::solver::{solve_level, LevelSolution, SolverConfig};
use crate::space::{distance, subset_of, Point, TestSet, TestSetFamily};

/// A finite union of open metric balls of the full space (no level tag).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpenRegion {
    pub balls: Vec<(Point, f64)>,
}

/// Per-test-set level sequence of the extended measures, with the final
/// value, a tail-oscillation stabilization statistic, and the empirical
/// uniform bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiEntry {
    pub set_id: i64,
    pub per_level: Vec<f64>,
    pub phi_hat: f64,
    pub tail_osc: f64,
    pub c_k_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiTable {
    /// Levels of the successful solves, in the order of the sequences.
    pub levels: Vec<u32>,
    pub tail_window: usize,
    /// One entry per family member, in family order.
    pub entries: Vec<PhiEntry>,
}

impl PhiTable {
    pub fn phi_hat(&self, member_index: usize) -> f64 {
        self.entries[member_index].phi_hat
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum LevelOutcome {
    Solved(LevelSolution),
    Failed { level: u32, error: String },
}

impl LevelOutcome {
    pub fn solution(&self) -> Option<&LevelSolution> {
        match self {
            LevelOutcome::Solved(s) => Some(s),
            LevelOutcome::Failed { .. } => None,
        }
    }
}

/// Evaluates the level measures (already extended to a common level) on
/// every family member and assembles the phi table.
pub fn phi_from_measures(
    measures: &[(u32, DiscreteMeasure)],
    family: &TestSetFamily,
    tail_window: usize,
) -> Result<PhiTable> {
    if measures.is_empty() {
        return Err(Error::ConstructionFailed { successes: 0 });
    }
    let levels: Vec<u32> = measures.iter().map(|(l, _)| *l).collect();
    let mut entries = Vec::with_capacity(family.members.len());
    for d in &family.members {
        let mut per_level = Vec::with_capacity(measures.len());
        for (_, m) in measures {
            per_level.push(measure_of(m, d)?);
        }
        let phi_hat = *per_level.last().unwrap();
        let t = tail_window.max(1).min(per_level.len());
        let tail_osc = per_level[per_level.len() - t..]
            .iter()
            .map(|v| (v - phi_hat).abs())
            .fold(0.0f64, f64::max);
        let c_k_bound = per_level.iter().copied().fold(0.0f64, f64::max);
        entries.push(PhiEntry {
            set_id: d.id,
            per_level,
            phi_hat,
            tail_osc,
            c_k_bound,
        });
    }
    Ok(PhiTable {
        levels,
        tail_window,
        entries,
    })
}

/// Solves all levels in order, extends each solution by zero to the top
/// level, and tabulates phi on the family. Failed levels are recorded and
/// skipped; the construction fails only if fewer than two levels succeed
/// (or the single requested level fails).
pub fn run_construction(
    k: &LagrangianKernel,
    per_level_cfgs: &[SolverConfig],
    family: &TestSetFamily,
    tail_window: usize,
) -> Result<(Vec<LevelOutcome>, PhiTable)> {
    if per_level_cfgs.is_empty() {
        return Err(Error::Config("no per-level solver configs given".into()));
    }
    if family.members.is_empty() {
        return Err(Error::InvalidFamily("family has no members".into()));
    }
    for w in per_level_cfgs.windows(2) {
        if w[1].level <= w[0].level {
            return Err(Error::Config(
                "per-level configs must have strictly increasing levels".into(),
            ));
        }
    }
    let top = per_level_cfgs.last().unwrap().level;
    let mut outcomes = Vec::with_capacity(per_level_cfgs.len());
    let mut extended: Vec<(u32, DiscreteMeasure)> = Vec::new();
    for cfg in per_level_cfgs {
        match solve_level(k, cfg) {
            Ok(sol) => {
                extended.push((cfg.level, extend_by_zero(&sol.measure, top)?));
                outcomes.push(LevelOutcome::Solved(sol));
            }
            Err(e) => outcomes.push(LevelOutcome::Failed {
                level: cfg.level,
                error: e.to_string(),
            }),
        }
    }
    let needed = 2.min(per_level_cfgs.len());
    if extended.len() < needed {
        return Err(Error::ConstructionFailed {
            successes: extended.len(),
        });
    }
    let phi = phi_from_measures(&extended, family, tail_window)?;
    Ok((outcomes, phi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiViolation {
    pub law: String,
    pub first: i64,
    pub second: i64,
    pub union_member: Option<i64>,
    pub excess: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiCheck {
    pub violations: Vec<PhiViolation>,
    pub subset_pairs: usize,
    pub disjoint_pairs: usize,
    pub union_pairs: usize,
    /// Pairs whose subset/disjointness relation the conservative ball tests
    /// could not decide; skipped, never guessed.
    pub undecided_pairs: usize,
}

/// Checks monotonicity, subadditivity and disjoint additivity of phi over
/// every pair whose relation the conservative ball tests decide.
pub fn check_phi_properties(phi: &PhiTable, family: &TestSetFamily) -> PhiCheck {
    let tol = 1e-9;
    let n = family.members.len();
    let mut out = PhiCheck {
        violations: Vec::new(),
        subset_pairs: 0,
        disjoint_pairs: 0,
        union_pairs: 0,
        undecided_pairs: 0,
    };
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if family.members[i].subset_of_set(&family.members[j]) {
                out.subset_pairs += 1;
                let excess = phi.phi_hat(i) - phi.phi_hat(j);
                if excess > tol {
                    out.violations.push(PhiViolation {
                        law: "monotonicity".into(),
                        first: family.members[i].id,
                        second: family.members[j].id,
                        union_member: None,
                        excess,
                    });
                }
            }
        }
    }
    let key_index: std::collections::HashMap<Vec<Vec<u64>>, usize> = family
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.ball_keys(), i))
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut balls = family.members[i].balls.clone();
            balls.extend(family.members[j].balls.iter().cloned());
            let union = TestSet { id: -1, balls };
            let union_idx = key_index.get(&union.ball_keys()).copied();
            let disjoint = family.members[i].disjoint_from(&family.members[j]);
            match union_idx {
                Some(u) => {
                    out.union_pairs += 1;
                    let excess = phi.phi_hat(u) - phi.phi_hat(i) - phi.phi_hat(j);
                    if excess > tol {
                        out.violations.push(PhiViolation {
                            law: "subadditivity".into(),
                            first: family.members[i].id,
                            second: family.members[j].id,
                            union_member: Some(family.members[u].id),
                            excess,
                        });
                    }
                    if disjoint {
                        out.disjoint_pairs += 1;
                        let gap =
                            (phi.phi_hat(u) - phi.phi_hat(i) - phi.phi_hat(j)).abs();
                        if gap > tol {
                            out.violations.push(PhiViolation {
                                law: "disjoint_additivity".into(),
                                first: family.members[i].id,
                                second: family.members[j].id,
                                union_member: Some(family.members[u].id),
                                excess: gap,
                            });
                        }
                    }
                }
                None => out.undecided_pairs += 1,
            }
        }
    }
    out
}

/// mu(U) realized at finite resolution: the largest phi value among family
/// members certified to lie inside the open region. A lower bound.
pub fn mu_hat(phi: &PhiTable, family: &TestSetFamily, u: &OpenRegion) -> f64 {
    let mut best = 0.0f64;
    for (i, d) in family.members.iter().enumerate() {
        if subset_of(d, u) {
            best = best.max(phi.phi_hat(i));
        }
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaResult {
    /// Minimum of mu over containing candidates; infinity when no candidate
    /// contains the set.
    pub value: f64,
    pub candidate: Option<usize>,
}

/// eta(A) against a user-supplied list of candidate open supersets.
pub fn eta_hat(
    phi: &PhiTable,
    family: &TestSetFamily,
    a: &TestSet,
    candidate_opens: &[OpenRegion],
) -> EtaResult {
    let mut best = EtaResult {
        value: f64::INFINITY,
        candidate: None,
    };
    for (i, u) in candidate_opens.iter().enumerate() {
        if subset_of(a, u) {
            let v = mu_hat(phi, family, u);
            if v < best.value {
                best = EtaResult {
                    value: v,
                    candidate: Some(i),
                };
            }
        }
    }
    best
}

/// Condition (B): the least n <= max_level such that the mass of atoms of
/// rho inside b that live above level n falls below eps; None when mass at
/// least eps still sits above every level searched (it escapes the
/// exhaustion within the searched range).
pub fn check_condition_b(
    rho: &DiscreteMeasure,
    b: &TestSet,
    eps: f64,
    max_level: u32,
) -> Result<Option<u32>> {
    if eps <= 0.0 {
        return Err(Error::Config("condition (B) needs eps > 0".into()));
    }
    for n in 1..=max_level {
        let mut escaping = 0.0;
        for a in rho.atoms() {
            if a.point.level() > n && b.contains(&a.point)? {
                escaping += a.weight;
            }
        }
        if escaping < eps {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NontrivialityWitness {
    pub set_id: i64,
    /// 1-based position in the level sequence from which the member's mass
    /// stays at or above the floor.
    pub stable_from: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NontrivialityVerdict {
    pub witnesses: Vec<NontrivialityWitness>,
    /// Set when several pairwise-disjoint witnesses exist, evidence that the
    /// limit measure may have infinite total volume.
    pub disjoint_witnesses: bool,
}

/// Searches the family for members whose mass stays at or above c_floor from
/// some level on.
pub fn check_nontriviality(
    phi: &PhiTable,
    family: &TestSetFamily,
    c_floor: f64,
) -> Result<NontrivialityVerdict> {
    if c_floor <= 0.0 {
        return Err(Error::Config("non-triviality floor must be positive".into()));
    }
    let mut witnesses = Vec::new();
    let mut witness_indices = Vec::new();
    for (i, entry) in phi.entries.iter().enumerate() {
        if entry.per_level.is_empty() {
            continue;
        }
        // first index of the trailing run of values >= c_floor
        let mut k0 = None;
        for (pos, v) in entry.per_level.iter().enumerate().rev() {
            if *v >= c_floor {
                k0 = Some(pos + 1);
            } else {
                break;
            }
        }
        if let Some(k0) = k0 {
            witnesses.push(NontrivialityWitness {
                set_id: entry.set_id,
                stable_from: k0,
            });
            witness_indices.push(i);
        }
    }
    let mut disjoint_witnesses = false;
    for (a, &i) in witness_indices.iter().enumerate() {
        for &j in &witness_indices[a + 1..] {
            if family.members[i].disjoint_from(&family.members[j]) {
                disjoint_witnesses = true;
            }
        }
    }
    Ok(NontrivialityVerdict {
        witnesses,
        disjoint_witnesses,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub set_id: i64,
    /// Bounded-Lipschitz discrepancy lower bound between consecutive level
    /// measures restricted to the set, one value per level step.
    pub per_step: Vec<f64>,
}

/// Convergence diagnostics: for each member with nonzero final mass, the
/// discrepancy of consecutive restricted level measures against a dictionary
/// of 1-Lipschitz hat functions centered at the member's balls, plus the
/// constant function (total-mass difference).
pub fn convergence_traces(
    measures: &[(u32, DiscreteMeasure)],
    family: &TestSetFamily,
    phi: &PhiTable,
) -> Result<Vec<ConvergenceTrace>> {
    let mut traces = Vec::new();
    for (i, d) in family.members.iter().enumerate() {
        if phi.phi_hat(i) == 0.0 {
            continue;
        }
        let mut dictionary: Vec<&Point> = d.balls.iter().map(|b| &b.center).collect();
        dictionary.dedup_by(|a, b| a.key() == b.key());
        let mut per_step = Vec::new();
        for w in measures.windows(2) {
            let mut disc = restricted_mass_gap(&w[0].1, &w[1].1, d, None)?;
            for p in &dictionary {
                disc = disc.max(restricted_mass_gap(&w[0].1, &w[1].1, d, Some(p))?);
            }
            per_step.push(disc);
        }
        traces.push(ConvergenceTrace {
            set_id: d.id,
            per_step,
        });
    }
    Ok(traces)
}

fn restricted_mass_gap(
    m1: &DiscreteMeasure,
    m2: &DiscreteMeasure,
    d: &TestSet,
    hat_center: Option<&Point>,
) -> Result<f64> {
    let mut acc = 0.0;
    for (m, sign) in [(m1, 1.0), (m2, -1.0)] {
        for a in m.atoms() {
            if d.contains(&a.point)? {
                let f = match hat_center {
                    Some(p) => (1.0 - distance(p, &a.point)?).max(0.0),
                    None => 1.0,
                };
                acc += sign * a.weight * f;
            }
        }
    }
    Ok(acc.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::LagrangianKernel;
    use crate::measure::Atom;
    use crate::space::{build_test_family, Ball};

    fn pt(x: f64) -> Point {
        Point::euclidean(1, vec![x]).unwrap()
    }

    fn measure(atoms: &[(f64, f64)], level: u32) -> DiscreteMeasure {
        DiscreteMeasure::new(
            atoms
                .iter()
                .map(|(x, w)| Atom {
                    point: pt(*x),
                    weight: *w,
                })
                .collect(),
            level,
        )
        .unwrap()
    }

    fn small_family() -> TestSetFamily {
        build_test_family(&[pt(0.0), pt(1.0), pt(3.0)], &[0.4], 2, 1000, 2).unwrap()
    }

    #[test]
    fn phi_single_level_and_constant_sequence() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (1.0, 0.5)], 1);
        let phi = phi_from_measures(&[(1, m.clone())], &family, 3).unwrap();
        for e in &phi.entries {
            assert_eq!(e.per_level.len(), 1);
            assert_eq!(e.tail_osc, 0.0);
            assert_eq!(e.phi_hat, e.per_level[0]);
        }
        let phi3 =
            phi_from_measures(&[(1, m.clone()), (2, m.clone()), (3, m)], &family, 3).unwrap();
        for e in &phi3.entries {
            assert_eq!(e.tail_osc, 0.0);
        }
    }

    #[test]
    fn phi_matches_reevaluation_oracle() {
        let family = small_family();
        let m1 = measure(&[(0.0, 1.0)], 1);
        let m2 = measure(&[(0.0, 0.7), (1.0, 0.3)], 2);
        let phi = phi_from_measures(&[(1, m1.clone()), (2, m2.clone())], &family, 2).unwrap();
        for (i, d) in family.members.iter().enumerate() {
            assert_eq!(phi.entries[i].per_level[0], measure_of(&m1, d).unwrap());
            assert_eq!(phi.entries[i].per_level[1], measure_of(&m2, d).unwrap());
            assert_eq!(
                phi.entries[i].c_k_bound,
                phi.entries[i].per_level.iter().copied().fold(0.0, f64::max)
            );
        }
    }

    #[test]
    fn phi_laws_clean_and_corrupted() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (1.0, 0.5), (3.0, 0.25)], 1);
        let phi = phi_from_measures(&[(1, m)], &family, 1).unwrap();
        let check = check_phi_properties(&phi, &family);
        assert!(check.violations.is_empty(), "{:?}", check.violations);
        assert!(check.subset_pairs > 0);
        assert!(check.disjoint_pairs > 0);

        let mut corrupted = phi.clone();
        // inflate a singleton above its union with a disjoint partner
        corrupted.entries[0].phi_hat += 1.0;
        let check = check_phi_properties(&corrupted, &family);
        assert!(!check.violations.is_empty());
    }

    #[test]
    fn mu_hat_faithful_for_separating_family() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (1.0, 0.5), (3.0, 0.25)], 1);
        let phi = phi_from_measures(&[(1, m.clone())], &family, 1).unwrap();
        let regions = [
            OpenRegion {
                balls: vec![(pt(0.0), 1.5)],
            },
            OpenRegion {
                balls: vec![(pt(0.0), 10.0)],
            },
            OpenRegion {
                balls: vec![(pt(2.0), 0.5)],
            },
        ];
        for u in &regions {
            assert_eq!(mu_hat(&phi, &family, u), measure_of(&m, u).unwrap());
        }
    }

    #[test]
    fn mu_hat_monotone_in_region() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (3.0, 0.5)], 1);
        let phi = phi_from_measures(&[(1, m)], &family, 1).unwrap();
        let small = OpenRegion {
            balls: vec![(pt(0.0), 1.0)],
        };
        let big = OpenRegion {
            balls: vec![(pt(0.0), 1.0), (pt(3.0), 1.0)],
        };
        assert!(mu_hat(&phi, &family, &small) <= mu_hat(&phi, &family, &big));
    }

    #[test]
    fn eta_hat_enumeration() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (3.0, 0.5)], 1);
        let phi = phi_from_measures(&[(1, m)], &family, 1).unwrap();
        let a = TestSet {
            id: 99,
            balls: vec![Ball {
                center: pt(0.0),
                radius: 0.4,
                level: 1,
            }],
        };
        let candidates = [
            OpenRegion {
                balls: vec![(pt(0.0), 10.0)],
            },
            OpenRegion {
                balls: vec![(pt(0.0), 1.0)],
            },
            OpenRegion {
                balls: vec![(pt(3.0), 0.5)],
            },
        ];
        let r = eta_hat(&phi, &family, &a, &candidates);
        // the tightest containing candidate wins
        assert_eq!(r.candidate, Some(1));
        assert_eq!(r.value, 1.0);
        let r = eta_hat(&phi, &family, &a, &candidates[2..]);
        assert!(r.value.is_infinite() && r.candidate.is_none());
    }

    #[test]
    fn condition_b_cases() {
        let b = TestSet {
            id: 0,
            balls: vec![Ball {
                center: pt(0.0),
                radius: 10.0,
                level: 5,
            }],
        };
        let all_level_1 = measure(&[(0.0, 1.0), (1.0, 1.0)], 3);
        assert_eq!(check_condition_b(&all_level_1, &b, 1e-6, 3).unwrap(), Some(1));

        // single atom of weight 0.5 at level 3
        let deep = DiscreteMeasure::new(
            vec![Atom {
                point: Point::euclidean(3, vec![0.0, 0.0, 0.2]).unwrap(),
                weight: 0.5,
            }],
            3,
        )
        .unwrap();
        assert_eq!(check_condition_b(&deep, &b, 0.1, 3).unwrap(), Some(3));
        assert_eq!(check_condition_b(&deep, &b, 0.6, 3).unwrap(), Some(1));
        assert!(check_condition_b(&deep, &b, 0.0, 3).is_err());

        // mass stuck above every searched level: unsatisfied
        assert_eq!(check_condition_b(&deep, &b, 0.1, 2).unwrap(), None);
    }

    #[test]
    fn condition_b_monotone_in_eps() {
        let deep = DiscreteMeasure::new(
            vec![
                Atom {
                    point: pt(0.0),
                    weight: 0.2,
                },
                Atom {
                    point: Point::euclidean(2, vec![0.0, 0.3]).unwrap(),
                    weight: 0.3,
                },
                Atom {
                    point: Point::euclidean(3, vec![0.0, 0.0, 0.4]).unwrap(),
                    weight: 0.4,
                },
            ],
            3,
        )
        .unwrap();
        let b = TestSet {
            id: 0,
            balls: vec![Ball {
                center: pt(0.0),
                radius: 10.0,
                level: 5,
            }],
        };
        let mut prev = u32::MAX;
        for eps in [0.05, 0.35, 0.45, 0.8] {
            let got = check_condition_b(&deep, &b, eps, 3)
                .unwrap()
                .unwrap_or(u32::MAX);
            assert!(got <= prev, "eps {eps}");
            prev = got;
        }
    }

    #[test]
    fn nontriviality_witness_and_escape() {
        let family = small_family();
        let stable = measure(&[(0.0, 1.0)], 1);
        let phi = phi_from_measures(&[(1, stable.clone()), (2, stable)], &family, 2).unwrap();
        let v = check_nontriviality(&phi, &family, 0.5).unwrap();
        assert!(!v.witnesses.is_empty());

        // mass escaping outward: no member holds on to it
        let m1 = measure(&[(0.0, 1.0)], 1);
        let m2 = measure(&[(10.0, 1.0)], 2);
        let phi = phi_from_measures(&[(1, m1), (2, m2)], &family, 2).unwrap();
        let v = check_nontriviality(&phi, &family, 0.5).unwrap();
        assert!(v.witnesses.is_empty());
    }

    #[test]
    fn nontriviality_flags_disjoint_witnesses() {
        let family = small_family();
        let m = measure(&[(0.0, 1.0), (3.0, 1.0)], 1);
        let phi = phi_from_measures(&[(1, m.clone()), (2, m)], &family, 2).unwrap();
        let v = check_nontriviality(&phi, &family, 0.5).unwrap();
        assert!(v.disjoint_witnesses);
    }

    #[test]
    fn construction_end_to_end() {
        let k = LagrangianKernel::bounded_range(1.0, 0.7, 1.0).unwrap();
        let cfgs: Vec<SolverConfig> = (1..=2u32)
            .map(|level| SolverConfig {
                level,
                candidate_grid: (0..6)
                    .map(|i| {
                        let mut coords = vec![0.0; level as usize];
                        coords[0] = i as f64 * 0.4;
                        Point::euclidean(level, coords).unwrap()
                    })
                    .collect(),
                initial_volume: 1.0,
                max_outer_iters: 50,
                qp_tolerance: 1e-12,
                insertion_tolerance: 1e-10,
                weight_floor: 1e-12,
                seed: 1,
                normalize_to_one: true,
            })
            .collect();
        let family = small_family();
        let (outcomes, phi) = run_construction(&k, &cfgs, &family, 2).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert!(outcomes.iter().all(|o| o.solution().is_some()));
        assert_eq!(phi.levels, vec![1, 2]);
        // re-evaluation oracle on the stored level measures
        let extended: Vec<(u32, DiscreteMeasure)> = outcomes
            .iter()
            .map(|o| {
                let s = o.solution().unwrap();
                (
                    s.measure.level(),
                    extend_by_zero(&s.measure, 2).unwrap(),
                )
            })
            .collect();
        for (i, d) in family.members.iter().enumerate() {
            for (j, (_, m)) in extended.iter().enumerate() {
                assert_eq!(phi.entries[i].per_level[j], measure_of(m, d).unwrap());
            }
        }
        let traces = convergence_traces(&extended, &family, &phi).unwrap();
        assert!(!traces.is_empty());
    }
}
