//! Lagrangian kernel families: bounded range, vanishing in entropy, the
//! causal fermion kernel built from spectral weights of operator products,
//! and tabulated user kernels. Also the greedy covering-number (entropy)
//! estimator and sampling-based verification of each class's defining
//! conditions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_eigenvalues, CMat};
use crate::space::{distance, lift, OperatorPoint, Point, TestSet};

/// Nonincreasing tabulated envelope of a distance; piecewise linear between
/// knots, constant before the first knot, zero beyond the last.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeTable {
    knots: Vec<(f64, f64)>,
}

impl EnvelopeTable {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Config("envelope table needs at least one knot".into()));
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config(
                    "envelope knot distances must strictly increase".into(),
                ));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::Config("envelope values must be nonincreasing".into()));
            }
        }
        if knots.iter().any(|(d, v)| *d < 0.0 || *v < 0.0) {
            return Err(Error::Config("envelope entries must be nonnegative".into()));
        }
        Ok(Self { knots })
    }

    pub fn eval(&self, d: f64) -> f64 {
        let first = self.knots[0];
        if d <= first.0 {
            return first.1;
        }
        for w in self.knots.windows(2) {
            if d <= w[1].0 {
                let t = (d - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        0.0
    }

    pub fn last_knot(&self) -> f64 {
        self.knots[self.knots.len() - 1].0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntropyVanishingParams {
    pub plateau: f64,
    pub delta: f64,
    pub envelope: EnvelopeTable,
    /// Nested compact exhaustion; member m is the paper-style K_{m+1}
    /// (1-based in the formulas below).
    pub exhaustion: Vec<TestSet>,
    /// 1 + 2/plateau, fixed by the class definition.
    pub normalizer: f64,
    /// Precomputed covering-number estimates of each exhaustion member at
    /// radius delta.
    pub entropies: Vec<usize>,
    pub sample_budget: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum KernelKind {
    BoundedRange {
        plateau: f64,
        cutoff: f64,
        shape: f64,
    },
    EntropyVanishing(EntropyVanishingParams),
    CausalFermion {
        spin_dimension: usize,
        hilbert_trunc: usize,
    },
    UserTable {
        table: EnvelopeTable,
    },
}

/// A symmetric nonnegative pair function with class metadata. Evaluation
/// canonicalizes argument order, so swapped arguments give bitwise-identical
/// results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LagrangianKernel {
    pub kind: KernelKind,
    /// Claimed infimum of L(x,x), the diagonal lower bound c.
    pub diagonal_bound: f64,
    /// Radius beyond which the kernel vanishes, when of bounded range.
    pub range_radius: Option<f64>,
    /// Claimed supremum of L, when available.
    pub bound: Option<f64>,
}

impl LagrangianKernel {
    pub fn bounded_range(plateau: f64, cutoff: f64, shape: f64) -> Result<Self> {
        if plateau <= 0.0 || cutoff <= 0.0 || shape < 1.0 {
            return Err(Error::Config(
                "bounded-range kernel needs plateau > 0, cutoff > 0, shape >= 1".into(),
            ));
        }
        Ok(Self {
            kind: KernelKind::BoundedRange {
                plateau,
                cutoff,
                shape,
            },
            diagonal_bound: plateau,
            range_radius: Some(cutoff),
            bound: Some(plateau),
        })
    }

    pub fn entropy_vanishing(
        plateau: f64,
        delta: f64,
        envelope: EnvelopeTable,
        exhaustion: Vec<TestSet>,
        sample_budget: usize,
        seed: u64,
    ) -> Result<Self> {
        if plateau <= 0.0 || delta <= 0.0 {
            return Err(Error::Config(
                "entropy-vanishing kernel needs plateau > 0 and delta > 0".into(),
            ));
        }
        if exhaustion.is_empty() {
            return Err(Error::Config("exhaustion list is empty".into()));
        }
        let mut entropies = Vec::with_capacity(exhaustion.len());
        for k in &exhaustion {
            entropies.push(entropy_estimate(k, delta, sample_budget, seed)?);
        }
        Ok(Self {
            kind: KernelKind::EntropyVanishing(EntropyVanishingParams {
                plateau,
                delta,
                envelope,
                exhaustion,
                normalizer: 1.0 + 2.0 / plateau,
                entropies,
                sample_budget,
                seed,
            }),
            diagonal_bound: plateau,
            range_radius: None,
            bound: Some(plateau),
        })
    }

    pub fn causal_fermion(
        spin_dimension: usize,
        hilbert_trunc: usize,
        diagonal_bound: f64,
    ) -> Result<Self> {
        if spin_dimension == 0 || hilbert_trunc == 0 || diagonal_bound <= 0.0 {
            return Err(Error::Config(
                "causal fermion kernel needs positive s, N and diagonal bound".into(),
            ));
        }
        Ok(Self {
            kind: KernelKind::CausalFermion {
                spin_dimension,
                hilbert_trunc,
            },
            diagonal_bound,
            range_radius: None,
            bound: None,
        })
    }

    pub fn user_table(table: EnvelopeTable, diagonal_bound: f64) -> Result<Self> {
        if diagonal_bound <= 0.0 {
            return Err(Error::Config("diagonal bound must be positive".into()));
        }
        let last = table.last_knot();
        Ok(Self {
            kind: KernelKind::UserTable { table },
            diagonal_bound,
            range_radius: Some(last),
            bound: None,
        })
    }

    /// Evaluates L(x, y). Arguments are canonicalized by their representation
    /// key first, so the result is exactly symmetric.
    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        if y.key() < x.key() {
            self.eval_ordered(y, x)
        } else {
            self.eval_ordered(x, y)
        }
    }

    fn eval_ordered(&self, x: &Point, y: &Point) -> Result<f64> {
        match &self.kind {
            KernelKind::BoundedRange {
                plateau,
                cutoff,
                shape,
            } => {
                let d = distance(x, y)?;
                if d >= *cutoff {
                    Ok(0.0)
                } else {
                    Ok(plateau * (1.0 - d / cutoff).powf(*shape))
                }
            }
            KernelKind::EntropyVanishing(p) => {
                let d = distance(x, y)?;
                if d <= p.delta {
                    return Ok(p.plateau);
                }
                let f = p.envelope.eval(d);
                if f == 0.0 {
                    return Ok(0.0);
                }
                let m_xy = p.relative_index(x, y)?;
                let c_hat = p.c_hat(x, m_xy)?;
                Ok(p.plateau.min(f / c_hat))
            }
            KernelKind::CausalFermion {
                spin_dimension,
                hilbert_trunc,
            } => {
                let a = require_operator(x, *spin_dimension, *hilbert_trunc)?;
                let b = require_operator(y, *spin_dimension, *hilbert_trunc)?;
                causal_fermion_eval(a, b, *spin_dimension)
            }
            KernelKind::UserTable { table } => Ok(table.eval(distance(x, y)?)),
        }
    }
}

impl EntropyVanishingParams {
    /// 1-based index of the smallest exhaustion member containing p; one past
    /// the end if none does.
    fn absolute_index(&self, p: &Point) -> Result<usize> {
        for (i, k) in self.exhaustion.iter().enumerate() {
            if k.contains(p)? {
                return Ok(i + 1);
            }
        }
        Ok(self.exhaustion.len() + 1)
    }

    /// The index m with y in K_m(x) \ K_{m-1}(x), after the re-centering
    /// K_m(x) = K_{m + N(x) - 1}; at least 1.
    pub fn relative_index(&self, x: &Point, y: &Point) -> Result<usize> {
        let n_x = self.absolute_index(x)?.min(self.exhaustion.len());
        let i_y = self.absolute_index(y)?.min(self.exhaustion.len());
        Ok((i_y + 1).saturating_sub(n_x).max(1))
    }

    /// C_x(m, delta) = C * E(K_{m+2}(x), delta), with the exhaustion index
    /// clamped to the last available member.
    pub fn c_hat(&self, x: &Point, m: usize) -> Result<f64> {
        let n_x = self.absolute_index(x)?.min(self.exhaustion.len());
        let idx = (m + 1 + n_x).min(self.exhaustion.len()) - 1;
        Ok(self.normalizer * self.entropies[idx] as f64)
    }
}

fn require_operator<'a>(p: &'a Point, s: usize, n: usize) -> Result<&'a OperatorPoint> {
    let op = p.as_operator().ok_or_else(|| {
        Error::KindMismatch("causal fermion kernel needs operator points".into())
    })?;
    if op.spin_dimension() != s || op.hilbert_trunc() != n {
        return Err(Error::KindMismatch(format!(
            "operator point has (s={}, N={}), kernel expects (s={s}, N={n})",
            op.spin_dimension(),
            op.hilbert_trunc()
        )));
    }
    Ok(op)
}

/// Reduced product matrix D_x (U_x^H U_y) D_y (U_y^H U_x): its spectrum is
/// the nonzero spectrum of the operator product xy.
pub fn reduced_product(a: &OperatorPoint, b: &OperatorPoint) -> CMat {
    let ra = a.rank();
    let rb = b.rank();
    if ra == 0 || rb == 0 {
        return CMat::zeros(ra, ra);
    }
    let m1 = a.frame().adjoint() * b.frame();
    let m2 = b.frame().adjoint() * a.frame();
    let da = DMatrix::from_fn(ra, ra, |i, j| {
        if i == j {
            Complex64::new(a.eigenvalues()[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let db = DMatrix::from_fn(rb, rb, |i, j| {
        if i == j {
            Complex64::new(b.eigenvalues()[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    da * m1 * db * m2
}

fn causal_fermion_eval(a: &OperatorPoint, b: &OperatorPoint, s: usize) -> Result<f64> {
    let prod = reduced_product(a, b);
    if prod.nrows() == 0 {
        return Ok(0.0);
    }
    let eigs = complex_eigenvalues(&prod)?;
    // remaining eigenvalues up to 2s are zero and contribute nothing
    let sw1: f64 = eigs.iter().map(|l| l.norm()).sum();
    let sw2: f64 = eigs.iter().map(|l| l.norm_sqr()).sum();
    let v = sw2 - sw1 * sw1 / (2.0 * s as f64);
    if !v.is_finite() {
        return Err(Error::NumericalFailure(
            "causal fermion kernel produced a non-finite value".into(),
        ));
    }
    if v < 0.0 && v >= -1e-10 {
        return Ok(0.0);
    }
    Ok(v)
}

/// Spectral weight of a square complex matrix: sum of the absolute values of
/// its eigenvalues with algebraic multiplicity.
pub fn spectral_weight(a: &CMat) -> Result<f64> {
    Ok(complex_eigenvalues(a)?.iter().map(|l| l.norm()).sum())
}

/// Spectral weight of an operator point, read off its factored form.
pub fn spectral_weight_op(a: &OperatorPoint) -> f64 {
    a.eigenvalues().iter().map(|l| l.abs()).sum()
}

/// Upper bound on the delta-covering number of K by greedy covering of a
/// deterministic sample (sample_budget points per ball, ball centers first,
/// lowest-index tie-break). Every sample point ends up within delta of a
/// returned center, so the result is a valid cover of the sample by
/// construction.
pub fn entropy_estimate(
    k: &TestSet,
    delta: f64,
    sample_budget: usize,
    seed: u64,
) -> Result<usize> {
    if sample_budget < 1 {
        return Err(Error::InvalidBudget(sample_budget as i64));
    }
    if delta <= 0.0 {
        return Err(Error::Config("covering radius must be positive".into()));
    }
    let samples = sample_test_set(k, sample_budget, seed)?;
    greedy_cover_count(&samples, delta)
}

/// The greedy cover itself, exposed so callers can verify validity.
pub fn greedy_cover(samples: &[Point], delta: f64) -> Result<Vec<usize>> {
    let n = samples.len();
    let mut covered = vec![false; n];
    let mut centers = Vec::new();
    loop {
        let next = match covered.iter().position(|c| !c) {
            Some(i) => i,
            None => break,
        };
        centers.push(next);
        for j in 0..n {
            if !covered[j] && distance(&samples[next], &samples[j])? <= delta {
                covered[j] = true;
            }
        }
    }
    Ok(centers)
}

fn greedy_cover_count(samples: &[Point], delta: f64) -> Result<usize> {
    Ok(greedy_cover(samples, delta)?.len().max(1))
}

/// Deterministic sample of a test set: for each ball, the center first, then
/// sample_budget - 1 draws from a stream seeded by (seed, ball index).
pub fn sample_test_set(k: &TestSet, sample_budget: usize, seed: u64) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for (idx, ball) in k.balls.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::named_seed(seed, &format!("ball-{idx}")));
        let center = lift(&ball.center, ball.level)?;
        out.push(center.clone());
        for _ in 1..sample_budget {
            out.push(sample_in_ball(&center, ball.radius, &mut rng)?);
        }
    }
    Ok(out)
}

/// A random point within the given metric radius of p; used for variation
/// transport and ball sampling.
pub fn perturb_point(p: &Point, radius: f64, rng: &mut ChaCha8Rng) -> Result<Point> {
    sample_in_ball(p, radius, rng)
}

fn sample_in_ball(center: &Point, radius: f64, rng: &mut ChaCha8Rng) -> Result<Point> {
    match center {
        Point::Euclidean { level, coords } => {
            let dim = coords.len();
            let mut dir: Vec<f64> = (0..dim).map(|_| normal_draw(rng)).collect();
            let norm: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Ok(center.clone());
            }
            let u: f64 = rng.gen_range(0.0f64..1.0);
            let scale = radius * u.powf(1.0 / dim as f64) / norm;
            for d in dir.iter_mut() {
                *d *= scale;
            }
            let coords = coords.iter().zip(&dir).map(|(c, d)| c + d).collect();
            Point::euclidean(*level, coords)
        }
        Point::Operator { level, op } => {
            // perturb eigenvalues multiplicatively: signs survive and the
            // operator-norm displacement stays within the radius
            let max_abs = op
                .eigenvalues()
                .iter()
                .fold(0.0f64, |m, l| m.max(l.abs()));
            if max_abs == 0.0 {
                return Ok(center.clone());
            }
            let t = (radius / max_abs).min(0.9);
            let eigs: Vec<f64> = op
                .eigenvalues()
                .iter()
                .map(|l| l * (1.0 + rng.gen_range(-t..t)))
                .collect();
            let perturbed = OperatorPoint::new(
                eigs,
                op.frame().clone(),
                op.spin_dimension(),
                op.hilbert_trunc(),
            )?;
            Point::operator(*level, perturbed)
        }
    }
}

fn normal_draw(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0f64..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sampling-based verdicts on the class-defining conditions of a kernel.
/// Verdicts are statements about the checked samples, never proofs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassReport {
    pub kind: String,
    pub samples: usize,
    pub pairs_checked: usize,
    pub declared_diagonal_bound: f64,
    pub diagonal_min: f64,
    /// Sample indices where eval(x,x) falls below the declared bound.
    pub condition_a_violations: Vec<usize>,
    /// Empirical plateau radius: the largest tested radius below which every
    /// sampled pair keeps eval >= c/2, minimized over base points.
    pub delta_hat: Option<f64>,
    pub decay_violations: usize,
    pub max_decay_margin: f64,
    pub note: String,
}

pub fn check_kernel_class(k: &LagrangianKernel, sample: &[Point]) -> Result<ClassReport> {
    if sample.is_empty() {
        return Err(Error::Config("kernel class check needs a nonempty sample".into()));
    }
    let c = k.diagonal_bound;
    let mut diagonal_min = f64::INFINITY;
    let mut condition_a_violations = Vec::new();
    for (i, x) in sample.iter().enumerate() {
        let v = k.eval(x, x)?;
        diagonal_min = diagonal_min.min(v);
        if v < c - 1e-10 {
            condition_a_violations.push(i);
        }
    }

    let n = sample.len();
    let mut pairs_checked = 0;
    let mut delta_hat: Option<f64> = None;
    let mut decay_violations = 0usize;
    let mut max_decay_margin = 0.0f64;
    for i in 0..n {
        // plateau radius at sample i: walk pairs by increasing distance
        let mut by_dist: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if i != j {
                by_dist.push((distance(&sample[i], &sample[j])?, j));
            }
        }
        by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut plateau_i = 0.0f64;
        for (d, j) in &by_dist {
            if k.eval(&sample[i], &sample[*j])? >= c / 2.0 {
                plateau_i = *d;
            } else {
                break;
            }
        }
        if !by_dist.is_empty() {
            delta_hat = Some(match delta_hat {
                Some(cur) => cur.min(plateau_i),
                None => plateau_i,
            });
        }
        for j in (i + 1)..n {
            pairs_checked += 1;
            let v = k.eval(&sample[i], &sample[j])?;
            let margin = decay_margin(k, &sample[i], &sample[j], v)?;
            if let Some(m) = margin {
                if m > 1e-12 {
                    decay_violations += 1;
                    max_decay_margin = max_decay_margin.max(m);
                }
            }
        }
    }

    let note = format!(
        "no-violation verdicts are statements about {pairs_checked} sampled pairs, not proofs"
    );
    Ok(ClassReport {
        kind: match &k.kind {
            KernelKind::BoundedRange { .. } => "bounded_range".into(),
            KernelKind::EntropyVanishing(_) => "entropy_vanishing".into(),
            KernelKind::CausalFermion { .. } => "causal_fermion".into(),
            KernelKind::UserTable { .. } => "user_table".into(),
        },
        samples: n,
        pairs_checked,
        declared_diagonal_bound: c,
        diagonal_min,
        condition_a_violations,
        delta_hat,
        decay_violations,
        max_decay_margin,
        note,
    })
}

/// How far eval exceeds the class decay bound at this pair, when the class
/// claims one: 0 beyond the cutoff for bounded range; 2^{-m} f / C_x(m,
/// delta) on the annulus index m for entropy-vanishing kernels.
fn decay_margin(
    k: &LagrangianKernel,
    x: &Point,
    y: &Point,
    value: f64,
) -> Result<Option<f64>> {
    match &k.kind {
        KernelKind::BoundedRange { cutoff, .. } => {
            if distance(x, y)? >= *cutoff {
                Ok(Some(value))
            } else {
                Ok(None)
            }
        }
        KernelKind::EntropyVanishing(p) => {
            // the decay property at the smallest index containing y; this is
            // the strongest instance decidable from the truncated exhaustion
            let m_xy = p.relative_index(x, y)?;
            let f = p.envelope.eval(distance(x, y)?);
            let bound = 0.5f64.powi(m_xy as i32) * f / p.c_hat(x, m_xy)?;
            Ok(Some(value - bound))
        }
        _ => Ok(None),
    }
}
