//! Multistart derivative-free minimization over angle parameters.
//!
//! Every run is a Nelder-Mead descent on the unconstrained parameter vector;
//! the objectives here are 2*pi periodic in each coordinate so no bounds are
//! needed, and parameters are wrapped into `[0, 2*pi)` when reported.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Above this many points the full qubit grid is thinned and the result is no
/// longer reported as certified.
pub const GRID_BUDGET: usize = 50_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub grid_points_per_angle: usize,
    pub max_iters: usize,
    pub f_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 24,
            grid_points_per_angle: 13,
            max_iters: 2000,
            f_tol: 1e-7,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid_arg("restarts must be at least 1"));
        }
        if !(self.f_tol > 0.0 && self.f_tol.is_finite()) {
            return Err(invalid_arg(format!("f_tol must be positive, got {}", self.f_tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid_arg("max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub value: f64,
    pub params: Vec<f64>,
    /// Simplex iterations of the winning run.
    pub iterations: usize,
    /// Index of the winning run: seeded runs come first, then random ones.
    pub restart: usize,
    /// Max minus min over the per-run optima.
    pub spread: f64,
    pub evaluations: usize,
    pub grid_points: usize,
    /// Points per angle actually used by the pre-grid (0 if none).
    pub grid_resolution: usize,
    /// True when a full qubit grid at the configured resolution was searched.
    pub certified: bool,
    /// Set when a slightly negative value was clamped to zero.
    pub clamped: bool,
}

/// Outcome of an exhaustive pre-search supplied by the caller.
#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub params: Vec<f64>,
    pub value: f64,
    pub points: usize,
    pub resolution: usize,
    pub certified: bool,
}

/// Angle values per axis for a qubit basis: theta in [0, pi/2] including both
/// ends, phi on `p` equally spaced points of the circle.
pub fn qubit_axes(p: usize) -> (Vec<f64>, Vec<f64>) {
    let p = p.max(1);
    let thetas = if p == 1 {
        vec![0.0]
    } else {
        (0..p).map(|i| FRAC_PI_2 * i as f64 / (p - 1) as f64).collect()
    };
    let phis = (0..p).map(|i| TAU * i as f64 / p as f64).collect();
    (thetas, phis)
}

/// Largest per-angle resolution `<= p` whose full grid over `dim` angles fits
/// the budget.
pub fn budgeted_resolution(p: usize, dim: usize) -> usize {
    let mut q = p;
    while q > 2 && (q as f64).powi(dim as i32) > GRID_BUDGET as f64 {
        q -= 1;
    }
    q
}

/// Full product grid over `dim / 2` qubit bases, each `(theta, phi)`.
pub fn qubit_grid_search<F>(f: &F, dim: usize, p: usize) -> GridOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(dim % 2 == 0, "qubit grids need (theta, phi) pairs");
    let q = budgeted_resolution(p, dim);
    let (thetas, phis) = qubit_axes(q);
    let total = q.pow(dim as u32);
    let point = |mut k: usize| {
        let mut x = vec![0.0; dim];
        for i in (0..dim).rev() {
            let axis = if i % 2 == 0 { &thetas } else { &phis };
            x[i] = axis[k % q];
            k /= q;
        }
        x
    };
    let (idx, value) = (0..total)
        .into_par_iter()
        .map(|k| (k, sanitize(f(&point(k)))))
        .reduce(
            || (usize::MAX, f64::INFINITY),
            |a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
        );
    GridOutcome {
        params: point(if idx == usize::MAX { 0 } else { idx }),
        value,
        points: total,
        resolution: q,
        certified: q == p,
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

struct RunResult {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    evaluations: usize,
}

fn nelder_mead<F>(f: &F, x0: &[f64], step: f64, cfg: &OptimizerConfig) -> RunResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        sanitize(f(x))
    };
    if n == 0 {
        let v = eval(x0);
        return RunResult {
            x: Vec::new(),
            f: v,
            iterations: 0,
            evaluations: evals,
        };
    }
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let fspread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (fspread <= cfg.f_tol && diameter <= 1e-5) || diameter <= 1e-10 {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(-0.5);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=n {
            let x: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            values[i] = eval(&x);
            simplex[i] = x;
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    RunResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        evaluations: evals,
    }
}

/// One descent plus up to three restarts from its optimum with a smaller step,
/// which shakes off premature simplex collapse.
fn polished_run<F>(f: &F, x0: &[f64], cfg: &OptimizerConfig) -> RunResult
where
    F: Fn(&[f64]) -> f64,
{
    let mut best = nelder_mead(f, x0, 0.5, cfg);
    let mut step = 0.05;
    for _ in 0..3 {
        let next = nelder_mead(f, &best.x, step, cfg);
        let improved = best.f - next.f;
        let evaluations = best.evaluations + next.evaluations;
        let iterations = best.iterations + next.iterations;
        if next.f < best.f {
            best = RunResult { evaluations, iterations, ..next };
        } else {
            best.evaluations = evaluations;
            best.iterations = iterations;
        }
        if improved <= cfg.f_tol {
            break;
        }
        step *= 0.2;
    }
    best
}

fn wrap(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.rem_euclid(TAU)).collect()
}

/// Builder for a single minimization problem.
pub struct Minimizer<'a, F> {
    f: &'a F,
    dim: usize,
    cfg: &'a OptimizerConfig,
    qubit_grid: bool,
    grid: Option<GridOutcome>,
    starts: Vec<Vec<f64>>,
}

impl<'a, F> Minimizer<'a, F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(f: &'a F, dim: usize, cfg: &'a OptimizerConfig) -> Self {
        Self {
            f,
            dim,
            cfg,
            qubit_grid: false,
            grid: None,
            starts: Vec::new(),
        }
    }

    /// Treat the parameters as `(theta, phi)` pairs of qubit bases and run the
    /// full product grid first.
    pub fn qubit_grid(mut self, on: bool) -> Self {
        self.qubit_grid = on;
        self
    }

    /// Use a pre-search done by the caller instead of the generic grid.
    pub fn grid_outcome(mut self, grid: GridOutcome) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn start(mut self, x: Vec<f64>) -> Self {
        self.starts.push(x);
        self
    }

    pub fn starts(mut self, xs: impl IntoIterator<Item = Vec<f64>>) -> Self {
        self.starts.extend(xs);
        self
    }

    pub fn run(self) -> Result<OptResult> {
        self.cfg.validate()?;
        let dim = self.dim;
        if let Some(bad) = self.starts.iter().find(|s| s.len() != dim) {
            return Err(invalid_arg(format!(
                "start point has {} parameters, expected {dim}",
                bad.len()
            )));
        }
        let f = self.f;
        let grid = match self.grid {
            Some(g) => Some(g),
            None if self.qubit_grid && dim > 0 && self.cfg.grid_points_per_angle > 0 => {
                Some(qubit_grid_search(f, dim, self.cfg.grid_points_per_angle))
            }
            None => None,
        };

        let mut seeds: Vec<Vec<f64>> = Vec::new();
        if let Some(g) = &grid {
            seeds.push(g.params.clone());
        }
        seeds.extend(self.starts);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        for _ in 0..self.cfg.restarts {
            seeds.push((0..dim).map(|_| rng.random_range(0.0..TAU)).collect());
        }

        let runs: Vec<RunResult> = seeds
            .par_iter()
            .map(|x0| polished_run(f, x0, self.cfg))
            .collect();

        let mut best = 0;
        for (i, r) in runs.iter().enumerate() {
            if r.f < runs[best].f {
                best = i;
            }
        }
        let finite: Vec<f64> = runs.iter().map(|r| r.f).filter(|v| v.is_finite()).collect();
        let spread = if finite.is_empty() {
            0.0
        } else {
            finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - finite.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let evaluations = runs.iter().map(|r| r.evaluations).sum::<usize>() + grid.as_ref().map_or(0, |g| g.points);

        let mut params = wrap(&runs[best].x);
        let mut value = sanitize(f(&params));
        let mut iterations = runs[best].iterations;
        let mut restart = best;
        // the grid point itself is a candidate too (a descent never ends above
        // its start, but wrapping could in principle nudge the value)
        if let Some(g) = &grid {
            if g.value < value {
                params = wrap(&g.params);
                value = sanitize(f(&params));
                iterations = 0;
                restart = 0;
            }
        }
        Ok(OptResult {
            value,
            params,
            iterations,
            restart,
            spread,
            evaluations: evaluations + 1,
            grid_points: grid.as_ref().map_or(0, |g| g.points),
            grid_resolution: grid.as_ref().map_or(0, |g| g.resolution),
            certified: grid.as_ref().is_some_and(|g| g.certified),
            clamped: false,
        })
    }
}

/// Plain multistart minimization without a grid.
pub fn minimize<F>(f: &F, dim: usize, cfg: &OptimizerConfig) -> Result<OptResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Minimizer::new(f, dim, cfg).run()
}

/// Clamps small negative discord values to zero; anything below
/// `-10 * f_tol` means the objective is broken.
pub fn clamp_nonnegative(res: &mut OptResult, f_tol: f64) -> Result<()> {
    if res.value >= 0.0 {
        return Ok(());
    }
    if res.value >= -10.0 * f_tol {
        res.value = 0.0;
        res.clamped = true;
        return Ok(());
    }
    Err(Error::Consistency(format!(
        "minimized discord objective is negative ({:e})",
        res.value
    )))
}
