//! Two-dimensional optimisation benchmarks and a multistart coordinate
//! descent harness.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;

const START_STREAM: u64 = 0x4245_4e43;

pub const DEFAULT_BUDGET: usize = 10_000;

/// Location of the cross-in-tray minima, refined from a 1e-3 grid.
pub const CROSS_IN_TRAY_ARGMIN: f64 = 1.349_406_608_602_084;
pub const CROSS_IN_TRAY_MIN: f64 = -2.062_611_870_822_739;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    Himmelblau,
    Rastrigin,
    Salomon,
    Bukin,
    YangN3,
    CrossInTray,
}

impl Objective {
    pub const ALL: [Objective; 6] = [
        Objective::Himmelblau,
        Objective::Rastrigin,
        Objective::Salomon,
        Objective::Bukin,
        Objective::YangN3,
        Objective::CrossInTray,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Himmelblau => "himmelblau",
            Objective::Rastrigin => "rastrigin",
            Objective::Salomon => "salomon",
            Objective::Bukin => "bukin",
            Objective::YangN3 => "yang-n3",
            Objective::CrossInTray => "cross-in-tray",
        }
    }

    /// Per-coordinate bounds for a point of dimension `dim`.
    pub fn domain(self, dim: usize) -> Vec<(f64, f64)> {
        match self {
            Objective::Bukin => vec![(-15.0, -5.0), (-3.0, 3.0)],
            _ => vec![(-10.0, 10.0); dim],
        }
    }

    fn check(self, x: &[f64]) -> Result<()> {
        let ok_dim = match self {
            Objective::YangN3 => !x.is_empty(),
            _ => x.len() == 2,
        };
        if !ok_dim {
            return Err(Error::Config(format!("{} does not take a {}-dimensional point", self.name(), x.len())));
        }
        let inside = self
            .domain(x.len())
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| (lo..=hi).contains(&v));
        if inside {
            Ok(())
        } else {
            Err(Error::Domain {
                name: self.name(),
                point: x.to_vec(),
            })
        }
    }

    /// Formula value without the domain check.
    pub fn value_unchecked(self, p: &[f64]) -> f64 {
        match self {
            Objective::Himmelblau => {
                let (x, y) = (p[0], p[1]);
                (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2)
            }
            Objective::Rastrigin => {
                let (x, y) = (p[0], p[1]);
                20.0 + x * x + y * y - 10.0 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())
            }
            Objective::Salomon => {
                let r = p[0].hypot(p[1]);
                1.0 - (2.0 * PI * r).cos() + 0.1 * r
            }
            Objective::Bukin => {
                let (x, y) = (p[0], p[1]);
                100.0 * (y - 0.01 * x * x).abs().sqrt() + 0.01 * (x + 10.0).abs()
            }
            Objective::YangN3 => {
                let l1: f64 = p.iter().map(|v| v.abs()).sum();
                let s: f64 = p.iter().map(|v| (v * v).sin()).sum();
                l1 * (-s).exp()
            }
            Objective::CrossInTray => {
                let (x, y) = (p[0], p[1]);
                let e = (100.0 - x.hypot(y) / PI).abs().exp();
                -0.0001 * ((x.sin() * y.sin() * e).abs() + 1.0).powf(0.1)
            }
        }
    }

    pub fn evaluate(self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn known_minima(self) -> Vec<KnownMinimum> {
        use Source::*;
        let m = |x: f64, y: f64, value: f64, source: Source| KnownMinimum {
            point: vec![x, y],
            value,
            source,
        };
        let c = CROSS_IN_TRAY_ARGMIN;
        match self {
            Objective::Himmelblau => vec![
                m(3.0, 2.0, 0.0, Analytic),
                m(-3.7793, -3.2832, 0.0, Rounded),
                m(-2.805118, 3.131312, 0.0, Numerical),
                m(3.584428, -1.848126, 0.0, Numerical),
            ],
            Objective::Rastrigin => vec![m(0.0, 0.0, 0.0, Analytic)],
            Objective::Salomon => vec![m(0.0, 0.0, 0.0, Analytic)],
            Objective::Bukin => vec![m(-10.0, 1.0, 0.0, Analytic)],
            Objective::YangN3 => vec![m(0.0, 0.0, 0.0, Analytic)],
            Objective::CrossInTray => [(c, c), (-c, c), (c, -c), (-c, -c)]
                .into_iter()
                .map(|(x, y)| m(x, y, CROSS_IN_TRAY_MIN, Numerical))
                .collect(),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark function `{s}`")))
    }
}

/// How a catalogued minimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Exact closed form.
    Analytic,
    /// Published to four decimals.
    Rounded,
    /// Located numerically.
    Numerical,
}

impl Source {
    pub fn tolerance(self) -> f64 {
        match self {
            Source::Analytic => 1e-9,
            Source::Rounded => 1e-3,
            Source::Numerical => 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnownMinimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimumCheck {
    pub minimum: KnownMinimum,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates every catalogued minimum; `tol` overrides the per-source tolerance.
pub fn verify_minima(obj: Objective, tol: Option<f64>) -> Result<Vec<MinimumCheck>> {
    obj.known_minima()
        .into_iter()
        .map(|minimum| {
            let actual = obj.evaluate(&minimum.point)?;
            let tolerance = tol.unwrap_or(minimum.source.tolerance());
            Ok(MinimumCheck {
                pass: (actual - minimum.value).abs() <= tolerance,
                minimum,
                actual,
                tolerance,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Coordinate descent inside the domain. Each pass tries `x ± step` along
/// every axis and takes the first improvement; a pass without one halves the
/// step.
pub fn local_search(obj: Objective, start: &[f64], budget: usize) -> Result<SearchResult> {
    let mut x = start.to_vec();
    let mut fx = obj.evaluate(&x)?;
    let dom = obj.domain(x.len());
    let mut step: Vec<f64> = dom.iter().map(|(lo, hi)| (hi - lo) / 4.0).collect();
    let floor: Vec<f64> = dom.iter().map(|(lo, hi)| (hi - lo) * 1e-13).collect();
    let mut evals = 1;
    while evals < budget && step.iter().zip(&floor).any(|(s, f)| s > f) {
        let mut improved = false;
        'axes: for d in 0..x.len() {
            for sign in [1.0, -1.0] {
                let v = (x[d] + sign * step[d]).clamp(dom[d].0, dom[d].1);
                if v == x[d] {
                    continue;
                }
                let old = x[d];
                x[d] = v;
                let fc = obj.value_unchecked(&x);
                evals += 1;
                if fc < fx {
                    fx = fc;
                    improved = true;
                    break 'axes;
                }
                x[d] = old;
                if evals >= budget {
                    break 'axes;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok(SearchResult { point: x, value: fx, evals })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultistartResult {
    pub objective: Objective,
    pub best: SearchResult,
    /// Evaluations over all restarts.
    pub evals: usize,
}

impl MultistartResult {
    /// `name,best_value,best_point,evals` with the point as `x;y`.
    pub fn csv_line(&self) -> String {
        let point: Vec<String> = self.best.point.iter().map(|v| format!("{v:.12}")).collect();
        format!("{},{:.12e},{},{}", self.objective, self.best.value, point.join(";"), self.evals)
    }
}

pub const CSV_HEADER: &str = "name,best_value,best_point,evals";

/// Best of `restarts` local searches from seeded uniform starts; ties go to
/// the lexicographically smaller point.
pub fn multistart_optimize(
    obj: Objective,
    dim: usize,
    restarts: usize,
    budget: usize,
    seed: u64,
) -> Result<MultistartResult> {
    if restarts < 1 {
        return Err(Error::Config("restarts must be at least 1".into()));
    }
    if budget < 1 {
        return Err(Error::Config("evaluation budget must be at least 1".into()));
    }
    let dom = obj.domain(dim);
    obj.check(&dom.iter().map(|(lo, _)| *lo).collect::<Vec<_>>())?;
    let runs: Vec<SearchResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, &[START_STREAM, r as u64]);
            let start: Vec<f64> = dom.iter().map(|&(lo, hi)| g.gen_range(lo..=hi)).collect();
            local_search(obj, &start, budget)
        })
        .collect::<Result<_>>()?;
    let evals = runs.iter().map(|r| r.evals).sum();
    let best = runs
        .into_iter()
        .min_by(|a, b| {
            a.value.total_cmp(&b.value).then_with(|| {
                a.point
                    .iter()
                    .zip(&b.point)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        })
        .expect("at least one restart");
    Ok(MultistartResult {
        objective: obj,
        best,
        evals,
    })
}
