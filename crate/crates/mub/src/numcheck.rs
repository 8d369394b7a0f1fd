//! Independent numerical oracle: multistart damped Newton over an MU system.
//!
//! Starts are seeded on the modulus-one manifold (uniform phases), iterated
//! with a damped Newton step and halving line search, deduplicated, and
//! returned as an uncertified `SolutionSet`. Everything is deterministic
//! given the seed — each start derives its own generator from (seed, start
//! index) — so a run is reproducible regardless of thread count, and a longer
//! run extends a shorter one instead of reshuffling it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::polysys::{MultiPoly, PolynomialSystem};
use crate::rat::Rat;
use crate::realroots::{SolutionPoint, SolutionSet};

#[derive(Error, Debug)]
pub enum NumError {
    #[error("no start converged")]
    NoConvergence,
    #[error("bad configuration: {0}")]
    BadConfig(String),
}

#[derive(Clone, Copy, Debug)]
pub struct SearchConfig {
    pub starts: u64,
    pub seed: u64,
    /// Newton stops when the damped step is smaller than this.
    pub step_tol: f64,
    /// Max-norm residual below which a start counts as converged.
    pub residual_target: f64,
    /// Points closer than this (max-norm) are the same solution.
    pub dedupe_radius: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            starts: 1_000,
            seed: 42,
            step_tol: 1e-13,
            residual_target: 1e-12,
            dedupe_radius: 1e-6,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<(), NumError> {
        if self.residual_target < 1e-14 {
            return Err(NumError::BadConfig(format!(
                "residual target {} below the 1e-14 floor",
                self.residual_target
            )));
        }
        if self.dedupe_radius <= 10.0 * self.residual_target {
            return Err(NumError::BadConfig(format!(
                "dedupe radius {} not above 10x residual target {}",
                self.dedupe_radius, self.residual_target
            )));
        }
        if self.starts == 0 {
            return Err(NumError::BadConfig("zero starts".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Compiled float form

/// Sparse float polynomial: (coefficient, [(var, exp)…]) per term, with
/// a + b√3 coefficients collapsed to f64.
struct CPoly {
    terms: Vec<(f64, Vec<(usize, u16)>)>,
}

const SQRT3: f64 = 1.732_050_807_568_877_3;

impl CPoly {
    fn compile(p: &MultiPoly) -> CPoly {
        let terms = p
            .terms
            .iter()
            .map(|(m, c)| {
                let coeff = c.a.to_f64() + c.b.to_f64() * SQRT3;
                let exps: Vec<(usize, u16)> = m.0[..p.nvars]
                    .iter()
                    .enumerate()
                    .filter(|&(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e))
                    .collect();
                (coeff, exps)
            })
            .collect();
        CPoly { terms }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, es)| {
                c * es
                    .iter()
                    .map(|&(v, e)| x[v].powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    fn grad_into(&self, x: &[f64], row: &mut [f64]) {
        row.fill(0.0);
        for (c, es) in &self.terms {
            for (k, &(v, e)) in es.iter().enumerate() {
                let mut t = c * e as f64 * x[v].powi(e as i32 - 1);
                for (k2, &(v2, e2)) in es.iter().enumerate() {
                    if k2 != k {
                        t *= x[v2].powi(e2 as i32);
                    }
                }
                row[v] += t;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Newton

/// In-place solve of A·x = b with partial pivoting; None when a pivot
/// degenerates (the caller abandons the start rather than regularizing).
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Some(x)
}

struct Compiled {
    polys: Vec<CPoly>,
    nvars: usize,
}

impl Compiled {
    fn residual_vec(&self, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(self.polys.iter()) {
            *o = p.eval(x);
        }
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn norm_sq(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum()
    }

    /// One damped-Newton run from `x0`; Some(root) when the residual target
    /// is met.
    fn newton(&self, mut x: Vec<f64>, cfg: &SearchConfig) -> Option<Vec<f64>> {
        let n = self.nvars;
        let mut f = vec![0.0; n];
        let mut ftrial = vec![0.0; n];
        for _ in 0..200 {
            self.residual_vec(&x, &mut f);
            if Compiled::max_abs(&f) < cfg.residual_target {
                return Some(x);
            }
            let mut jac: Vec<Vec<f64>> = vec![vec![0.0; n]; n];
            for (i, p) in self.polys.iter().enumerate() {
                p.grad_into(&x, &mut jac[i]);
            }
            let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = solve_linear(&mut jac, &mut rhs)?;
            let f0 = Compiled::norm_sq(&f);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(delta.iter())
                    .map(|(xi, di)| xi + lambda * di)
                    .collect();
                self.residual_vec(&trial, &mut ftrial);
                if Compiled::norm_sq(&ftrial) < (1.0 - 0.25 * lambda) * f0 {
                    x = trial;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return None;
            }
            if lambda * Compiled::max_abs(&delta) < cfg.step_tol {
                self.residual_vec(&x, &mut f);
                return if Compiled::max_abs(&f) < cfg.residual_target {
                    Some(x)
                } else {
                    None
                };
            }
        }
        self.residual_vec(&x, &mut f);
        if Compiled::max_abs(&f) < cfg.residual_target {
            Some(x)
        } else {
            None
        }
    }
}

fn start_rng(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&idx.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Multistart Newton search over an MU system. Starts sit on the modulus
/// manifold — x_j = cos φ_j, y_j = sin φ_j with uniform phases — which is
/// where every solution lives. Returns the deduplicated converged points as
/// an uncertified solution set, sorted by coordinates; the error field is
/// a heuristic double-precision estimate, not a certificate.
pub fn multistart_solve(
    p: &PolynomialSystem,
    cfg: &SearchConfig,
) -> Result<SolutionSet, NumError> {
    cfg.validate()?;
    let nvars = p.nvars();
    let m = p.dim - 1;
    let compiled = Compiled {
        polys: p.polys.iter().map(CPoly::compile).collect(),
        nvars,
    };

    let converged: Vec<Option<Vec<f64>>> = (0..cfg.starts)
        .into_par_iter()
        .map(|idx| {
            let mut rng = start_rng(cfg.seed, idx);
            let mut x = vec![0.0; nvars];
            for j in 0..m {
                let phi: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                x[j] = phi.cos();
                x[m + j] = phi.sin();
            }
            compiled.newton(x, cfg)
        })
        .collect();

    // keep the first representative of each solution, in start order, so a
    // longer run is a superset of a shorter one
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    for point in converged.into_iter().flatten() {
        let dup = distinct.iter().any(|q| {
            q.iter()
                .zip(point.iter())
                .all(|(a, b)| (a - b).abs() <= cfg.dedupe_radius)
        });
        if !dup {
            distinct.push(point);
        }
    }
    if distinct.is_empty() {
        return Err(NumError::NoConvergence);
    }

    let err_claim = 10.0 * cfg.residual_target;
    let mut points: Vec<SolutionPoint> = distinct
        .into_iter()
        .map(|coords| {
            let (coords, residual) = exactify(&compiled, coords);
            SolutionPoint {
                coords,
                err: Rat::from_f64(err_claim).expect("finite error bound"),
                residual,
            }
        })
        .collect();
    points.sort_by(|a, b| a.coords.cmp(&b.coords));

    let digits = (-cfg.residual_target.log10()).floor() as u32;
    let rejected = cfg.starts - points.len() as u64;
    Ok(SolutionSet {
        dim: p.dim,
        digits,
        mode: p.mode,
        points,
        explored: cfg.starts,
        rejected,
        precision_doublings: 0,
        certified: false,
    })
}

fn exactify(compiled: &Compiled, coords: Vec<f64>) -> (Vec<Rat>, Rat) {
    let mut f = vec![0.0; compiled.nvars];
    compiled.residual_vec(&coords, &mut f);
    let res = Compiled::max_abs(&f);
    let coords = coords
        .into_iter()
        .map(|c| Rat::from_f64(c).expect("finite coordinate"))
        .collect();
    (coords, Rat::from_f64(res.max(f64::MIN_POSITIVE)).unwrap())
}

// ---------------------------------------------------------------------------
// Crosscheck

#[derive(Clone, Debug)]
pub struct MatchReport {
    /// (exact index, approx index) pairs within the radius.
    pub matched: Vec<(usize, usize)>,
    pub unmatched_exact: Vec<usize>,
    pub unmatched_approx: Vec<usize>,
    pub bijective: bool,
}

/// Greedy nearest-neighbor matching of two solution sets at the given
/// max-norm radius; with well-separated solutions (radius far below the
/// pairwise separation) the outcome is the unique bijection when one exists.
pub fn crosscheck(exact: &SolutionSet, approx: &SolutionSet, radius: f64) -> MatchReport {
    assert_eq!(exact.dim, approx.dim, "crosscheck requires equal dimensions");
    let coords_f64 = |s: &SolutionSet| -> Vec<Vec<f64>> {
        s.points
            .iter()
            .map(|p| p.coords.iter().map(|c| c.to_f64()).collect())
            .collect()
    };
    let e = coords_f64(exact);
    let a = coords_f64(approx);
    let dist = |p: &[f64], q: &[f64]| -> f64 {
        p.iter()
            .zip(q.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let mut taken = vec![false; a.len()];
    let mut matched = Vec::new();
    let mut unmatched_exact = Vec::new();
    for (i, pe) in e.iter().enumerate() {
        let best = a
            .iter()
            .enumerate()
            .filter(|&(j, pa)| !taken[j] && dist(pe, pa) <= radius)
            .min_by(|(_, pa), (_, pb)| dist(pe, pa).total_cmp(&dist(pe, pb)));
        match best {
            Some((j, _)) => {
                taken[j] = true;
                matched.push((i, j));
            }
            None => unmatched_exact.push(i),
        }
    }
    let unmatched_approx: Vec<usize> =
        (0..a.len()).filter(|&j| !taken[j]).collect();
    let bijective = unmatched_exact.is_empty() && unmatched_approx.is_empty();
    MatchReport { matched, unmatched_exact, unmatched_approx, bijective }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{self, Family};
    use crate::groebner::buchberger;
    use crate::polysys::{evaluate_residual, mu_system, CoeffMode, MonomialOrder};
    use crate::rat::pow10_neg;
    use crate::realroots::solve_triangular;

    fn fourier_system(d: usize) -> PolynomialSystem {
        let h = catalog::build(Family::Fourier, d, &[], None, 40).unwrap();
        mu_system(&h, CoeffMode::Exact).unwrap()
    }

    #[test]
    fn config_invariants_enforced() {
        let bad_target = SearchConfig { residual_target: 1e-15, ..Default::default() };
        assert!(matches!(
            multistart_solve(&fourier_system(2), &bad_target),
            Err(NumError::BadConfig(_))
        ));
        let bad_radius = SearchConfig {
            residual_target: 1e-8,
            dedupe_radius: 5e-8,
            ..Default::default()
        };
        assert!(matches!(
            multistart_solve(&fourier_system(2), &bad_radius),
            Err(NumError::BadConfig(_))
        ));
    }

    #[test]
    fn dim2_ten_starts_find_the_forced_pair() {
        let cfg = SearchConfig { starts: 10, seed: 7, ..Default::default() };
        let sol = multistart_solve(&fourier_system(2), &cfg).unwrap();
        assert_eq!(sol.points.len(), 2);
        assert!(!sol.certified);
        for p in &sol.points {
            assert!(p.coords[0].to_f64().abs() < 1e-10);
            assert!((p.coords[1].to_f64().abs() - 1.0).abs() < 1e-10);
        }
        assert!(sol.points[0].coords[1].to_f64() < 0.0);
        assert!(sol.points[1].coords[1].to_f64() > 0.0);
    }

    fn f3_expected() -> Vec<[f64; 4]> {
        let s = 3f64.sqrt() / 2.0;
        vec![
            [-0.5, -0.5, s, s],
            [-0.5, 1.0, -s, 0.0],
            [1.0, -0.5, 0.0, -s],
            [-0.5, -0.5, -s, -s],
            [1.0, -0.5, 0.0, s],
            [-0.5, 1.0, s, 0.0],
        ]
    }

    #[test]
    fn dim3_thousand_starts_find_all_six() {
        let cfg = SearchConfig { starts: 1_000, ..Default::default() };
        let sol = multistart_solve(&fourier_system(3), &cfg).unwrap();
        assert_eq!(sol.points.len(), 6);
        let mut used = vec![false; 6];
        for want in f3_expected() {
            let i = sol
                .points
                .iter()
                .position(|p| {
                    p.coords
                        .iter()
                        .zip(want.iter())
                        .all(|(c, w)| (c.to_f64() - w).abs() < 1e-10)
                })
                .expect("known solution missing");
            assert!(!used[i]);
            used[i] = true;
        }
    }

    #[test]
    fn residuals_hold_on_the_exact_system() {
        let sys = fourier_system(3);
        let cfg = SearchConfig { starts: 200, ..Default::default() };
        let sol = multistart_solve(&sys, &cfg).unwrap();
        let bound = pow10_neg(11); // 10x the 1e-12 residual target
        for p in &sol.points {
            let r = evaluate_residual(&sys, &p.coords).unwrap();
            assert!(r < bound, "residual {} too large", r.to_f64());
        }
    }

    #[test]
    fn distinct_count_is_monotone_in_starts() {
        let sys = fourier_system(3);
        let mut last = 0;
        for starts in [50, 100, 200, 400] {
            let cfg = SearchConfig { starts, ..Default::default() };
            let n = multistart_solve(&sys, &cfg).unwrap().points.len();
            assert!(n >= last, "count dropped from {last} to {n} at {starts} starts");
            last = n;
        }
        assert!(last >= 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let sys = fourier_system(3);
        let cfg = SearchConfig { starts: 300, seed: 9, ..Default::default() };
        let a = multistart_solve(&sys, &cfg).unwrap();
        let b = multistart_solve(&sys, &cfg).unwrap();
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
    }

    #[test]
    fn crosscheck_exact_vs_approx() {
        let sys = fourier_system(3);
        let gb = buchberger(&sys, &MonomialOrder::lex_default(4)).unwrap();
        let exact = solve_triangular(&gb, &sys, 20).unwrap();
        let cfg = SearchConfig { starts: 1_000, ..Default::default() };
        let approx = multistart_solve(&sys, &cfg).unwrap();

        let report = crosscheck(&exact, &approx, 1e-8);
        assert!(report.bijective);
        assert_eq!(report.matched.len(), 6);
        assert!(report.unmatched_exact.is_empty());
        assert!(report.unmatched_approx.is_empty());

        // drop one exact point: exactly one approx point goes unmatched
        let mut truncated = exact.clone();
        truncated.points.pop();
        let report = crosscheck(&truncated, &approx, 1e-8);
        assert!(!report.bijective);
        assert_eq!(report.matched.len(), 5);
        assert_eq!(report.unmatched_approx.len(), 1);
        assert!(report.unmatched_exact.is_empty());
    }

    #[test]
    fn crosscheck_empty_sets_is_vacuous() {
        let empty = SolutionSet {
            dim: 3,
            digits: 12,
            mode: CoeffMode::Exact,
            points: vec![],
            explored: 0,
            rejected: 0,
            precision_doublings: 0,
            certified: false,
        };
        let report = crosscheck(&empty, &empty.clone(), 1e-8);
        assert!(report.bijective);
        assert!(report.matched.is_empty());
    }

    #[test]
    #[ignore = "expensive: 100k starts on the d=6 Fourier system"]
    fn dim6_hundred_thousand_starts_find_48() {
        let sys = fourier_system(6);
        let cfg = SearchConfig { starts: 100_000, ..Default::default() };
        let sol = multistart_solve(&sys, &cfg).unwrap();
        assert_eq!(sol.points.len(), 48);
    }
}
