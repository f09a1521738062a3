//! The six experiments behind `fracap run`.

use std::f64::consts::{LN_2, PI};

use anyhow::{anyhow, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use fracap::cantor::AtomPlacement;
use fracap::capacity::{assemble_cantor, content_capacity_report, solve_capacity, Resolution, DEFAULT_LP_TOL};
use fracap::kernels::{dt_frac_ps_kernel, grad_ps_kernel, phi_profile, profile_quadrature, ps_kernel, Kernel, KernelFamily, KernelSpec, QuadratureConfig};
use fracap::measures::audit::{audit_cubes, uniform_grid_measure, BallFamily};
use fracap::measures::{growth_audit, AuditFamily, CubeNormalization};
use fracap::potentials::{cantor_restricted_maximal, chain_refined_measure, segment_potential_shells, upper_left_corner, upper_left_index};
use fracap::psgeo::{dilate, PsCube, PsPoint};
use fracap::quad::{integrate_to_infinity, integrate_with_breaks, QuadTol};
use fracap::special::sphere_area;

use crate::config::{Experiment, RunConfig};
use crate::output::{Cell, Check, Table};

pub struct RunResult {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    /// Derived quantities echoed into the summary.
    pub metrics: Value,
}

/// Threshold lookup for one experiment.
pub struct Thresholds<'a> {
    section: &'a Value,
    experiment: Experiment,
}

impl<'a> Thresholds<'a> {
    pub fn new(all: &'a Value, experiment: Experiment) -> Result<Self> {
        let section = all.get(experiment.name()).ok_or_else(|| anyhow!("thresholds have no section `{}`", experiment.name()))?;
        Ok(Self { section, experiment })
    }

    pub fn num(&self, key: &str) -> Result<f64> {
        self.section.get(key).and_then(Value::as_f64).ok_or_else(|| anyhow!("thresholds `{}.{key}` missing or not a number", self.experiment.name()))
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        self.section.get(key).and_then(Value::as_bool).ok_or_else(|| anyhow!("thresholds `{}.{key}` missing or not a boolean", self.experiment.name()))
    }

    /// Reports every missing key before any work is done.
    pub fn validate(&self) -> Result<()> {
        match self.experiment {
            Experiment::KernelValidate => ["max_profile_error", "max_table_error", "max_mass_error", "max_scaling_error"].iter().try_for_each(|k| self.num(k).map(drop)),
            Experiment::CantorGrowth => self.num("max_constant_over_bound").map(drop),
            Experiment::CantorBlowup => ["min_shell", "min_slope"].iter().try_for_each(|k| self.num(k).map(drop)),
            Experiment::SegmentBlowup => ["max_shell_error", "slope_relative_tolerance", "min_r2"].iter().try_for_each(|k| self.num(k).map(drop)),
            Experiment::CapacitySweep => {
                ["max_duality_gap", "max_growth_ratio", "monotone_tolerance"].iter().try_for_each(|k| self.num(k).map(drop))?;
                self.flag("require_monotone").map(drop)
            }
            Experiment::ContentVsCapacity => self.num("max_ratio_spread_factor").map(drop),
        }
    }
}

pub fn run(cfg: &RunConfig, thresholds: &Thresholds) -> Result<RunResult> {
    match cfg.experiment {
        Experiment::KernelValidate => kernel_validate(cfg, thresholds),
        Experiment::CantorGrowth => cantor_growth(cfg, thresholds),
        Experiment::CantorBlowup => cantor_blowup(cfg, thresholds),
        Experiment::SegmentBlowup => segment_blowup(cfg, thresholds),
        Experiment::CapacitySweep => capacity_sweep(cfg, thresholds),
        Experiment::ContentVsCapacity => content_vs_capacity(cfg, thresholds),
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Least-squares `(slope, intercept, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
}

/// `∫ P_s(x, t) dx` in polar coordinates.
fn radial_mass(spec: &KernelSpec, t: f64) -> Result<f64> {
    let n = spec.n;
    let scale = t.powf(0.5 / spec.s);
    let mut failure = None;
    let mut f = |r: f64| {
        let mut x = vec![0.0; n];
        x[0] = r;
        match ps_kernel(&PsPoint::new(x, t), spec) {
            Ok(v) => v * r.powi(n as i32 - 1),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let tol = QuadTol::new(1e-13, 1e-11).with_max_intervals(20_000);
    let breaks: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|b| b * scale).collect();
    let head = integrate_with_breaks(&mut f, &breaks, tol)?.value;
    let tail = integrate_to_infinity(&mut f, 32.0 * scale, 32.0 * scale, tol)?.value;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(sphere_area(n) * (head + tail))
}

fn kernel_validate(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let (n, s) = (cfg.n, cfg.s);
    let quad = QuadratureConfig::default();
    let exact = s == 1.0;
    let mut checks = Vec::new();

    let mut profile = Table::new("profile", &["rho", "phi", "phi_quadrature", "error"]);
    let phi0 = phi_profile(0.0, n, s, &quad)?;
    let mut rho = vec![0.0];
    rho.extend(log_spaced(1e-3, 50.0, 59));
    let mut worst_profile = 0.0f64;
    for &r in &rho {
        let a = phi_profile(r, n, s, &quad)?;
        let b = profile_quadrature(r, n, s, &quad)?;
        // closed forms are compared in normalized absolute error, tables in relative error
        let err = if exact { (a - b).abs() / phi0 } else { rel_err(a, b) };
        worst_profile = worst_profile.max(err);
        profile.push(vec![r.into(), a.into(), b.into(), err.into()]);
    }
    if exact {
        checks.push(Check::at_most("max_profile_error", worst_profile, thr.num("max_profile_error")?));
    } else {
        checks.push(Check::at_most("max_table_error", worst_profile, thr.num("max_table_error")?));
    }

    let ps = KernelSpec::new(KernelFamily::Ps, n, s);
    let mut mass = Table::new("mass", &["t", "mass", "error"]);
    let mut worst_mass = 0.0f64;
    for &t in &[0.1, 1.0, 10.0] {
        let m = radial_mass(&ps, t)?;
        worst_mass = worst_mass.max((m - 1.0).abs());
        mass.push(vec![t.into(), m.into(), (m - 1.0).abs().into()]);
    }
    checks.push(Check::at_most("max_mass_error", worst_mass, thr.num("max_mass_error")?));

    let gs = KernelSpec::new(KernelFamily::GradPs, n, s);
    let ds = KernelSpec::new(KernelFamily::DtFracPs, n, s);
    let mut columns: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    columns.extend(["t", "lambda", "err_ps", "err_grad_ps", "err_dt_frac_ps"].map(String::from));
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let mut scaling = Table::new("scaling", &column_refs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst_p, mut worst_g, mut worst_d) = (0.0f64, 0.0f64, 0.0f64);
    let nf = n as f64;
    for _ in 0..cfg.samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let t = rng.gen_range(0.05..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let lambda = rng.gen_range(0.3..3.0);
        let p = PsPoint::new(x.clone(), t);
        let q = dilate(&p, lambda, s);
        let (mut ep, mut eg) = (0.0, 0.0);
        if t > 0.0 {
            ep = rel_err(ps_kernel(&q, &ps)?, ps_kernel(&p, &ps)? * lambda.powf(-nf));
            let ga = grad_ps_kernel(&q, &gs)?;
            let gb = grad_ps_kernel(&p, &gs)?;
            let c = lambda.powf(-nf - 1.0);
            let norm = gb.iter().map(|v| v * v).sum::<f64>().sqrt() * c;
            let diff = ga.iter().zip(&gb).map(|(u, v)| (u - v * c).powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                eg = diff / norm;
            }
        }
        let ed = rel_err(dt_frac_ps_kernel(&q, &ds)?, dt_frac_ps_kernel(&p, &ds)? * lambda.powf(-nf - 1.0));
        worst_p = worst_p.max(ep);
        worst_g = worst_g.max(eg);
        worst_d = worst_d.max(ed);
        let mut row: Vec<Cell> = x.into_iter().map(Cell::from).collect();
        row.extend([t.into(), lambda.into(), ep.into(), eg.into(), ed.into()]);
        scaling.push(row);
    }
    let max_scaling = thr.num("max_scaling_error")?;
    checks.push(Check::at_most("max_scaling_error_ps", worst_p, max_scaling));
    checks.push(Check::at_most("max_scaling_error_grad_ps", worst_g, max_scaling));
    checks.push(Check::at_most("max_scaling_error_dt_frac_ps", worst_d, max_scaling));

    let metrics = json!({
        "profile_route": if exact { "closed form vs quadrature" } else { "table vs quadrature" },
        "phi_at_origin": phi0,
    });
    Ok(RunResult { tables: vec![profile, mass, scaling], checks, metrics })
}

fn cantor_growth(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let spec = cfg.cantor(cfg.depth)?;
    let bound = (spec.children() as f64).powi(2);
    let root = PsCube::unit(cfg.n, cfg.s)?;
    let mut table = Table::new("growth", &["k", "atoms", "r_floor", "ball_constant", "ball_upper_bound", "cube_constant", "constant", "bound"]);
    let mut worst = 0.0f64;
    for k in 1..=cfg.depth {
        let mu = spec.natural_measure(k, AtomPlacement::Center)?;
        let family = AuditFamily {
            r_floor: Some(spec.side(k)),
            balls: BallFamily::Auto { pairwise_limit: 3000 },
            dyadic_levels: Some(12),
            root: Some(root.clone()),
            shifted_grids: true,
            ..AuditFamily::default()
        };
        let report = growth_audit(&mu, cfg.n as f64 + 1.0, &family)?;
        let constant = report.ball_upper_bound.max(report.cube_constant);
        worst = worst.max(constant / bound);
        table.push(vec![
            k.into(),
            mu.len().into(),
            report.r_floor.into(),
            report.ball_constant.into(),
            report.ball_upper_bound.into(),
            report.cube_constant.into(),
            constant.into(),
            bound.into(),
        ]);
    }
    let checks = vec![Check::at_most("max_constant_over_bound", worst, thr.num("max_constant_over_bound")?)];
    let metrics = json!({ "delta": spec.delta, "children": spec.children(), "bound": bound });
    Ok(RunResult { tables: vec![table], checks, metrics })
}

fn cantor_blowup(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let (n, s, k) = (cfg.n, cfg.s, cfg.k);
    let top = k + cfg.depth;
    let extra = 2;
    let spec = cfg.cantor(top + extra)?;
    let x = upper_left_corner(&spec, top, upper_left_index(&spec, top))?;
    let nu = chain_refined_measure(&spec, &x, top, extra)?;
    let kernel = Kernel::build(&KernelSpec::new(KernelFamily::GradPs, n, s))?;
    let mut blowup = Table::new("blowup", &["m", "value", "last_shell_first"]);
    let mut shells = Table::new("shells", &["h", "shell_first"]);
    let (mut ms, mut values) = (Vec::new(), Vec::new());
    let mut min_shell = f64::INFINITY;
    for m in 1..=cfg.depth {
        let r = cantor_restricted_maximal(&spec, &nu, &x, k, m, &kernel)?;
        min_shell = r.shell_first.iter().fold(min_shell, |a, &b| a.min(b));
        let last = *r.shell_first.last().context("no shells")?;
        blowup.push(vec![m.into(), r.value.into(), last.into()]);
        ms.push(m as f64);
        values.push(r.value);
        if m == cfg.depth {
            for (i, v) in r.shell_first.iter().enumerate() {
                shells.push(vec![(k + i).into(), (*v).into()]);
            }
        }
    }
    let (slope, intercept, r2) = linear_fit(&ms, &values);
    let checks = vec![Check::at_least("min_shell", min_shell, thr.num("min_shell")?), Check::at_least("slope", slope, thr.num("min_slope")?)];
    let metrics = json!({
        "point": { "x": x.x, "t": x.t },
        "top_generation": top,
        "refinement": extra,
        "atoms": nu.len(),
        "fit": { "slope": slope, "intercept": intercept, "r2": r2 },
    });
    Ok(RunResult { tables: vec![blowup, shells], checks, metrics })
}

fn segment_blowup(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let quad = QuadratureConfig::default();
    let t0 = 0.5;
    let k = cfg.k as u32;
    let mut blowup = Table::new("blowup", &["m", "total", "analytic_total"]);
    let mut shells = Table::new("shells", &["h", "value", "analytic", "error"]);
    let (mut ms, mut totals) = (Vec::new(), Vec::new());
    let mut worst = 0.0f64;
    let mut analytic = 0.0;
    for m in 1..=cfg.depth as u32 {
        let r = segment_potential_shells(t0, k, m, &quad)?;
        analytic = r.analytic;
        worst = r.shells.iter().fold(worst, |a, v| a.max((v - r.analytic).abs()));
        blowup.push(vec![m.into(), r.total.into(), (r.analytic * r.shells.len() as f64).into()]);
        ms.push(f64::from(m));
        totals.push(r.total);
        if m as usize == cfg.depth {
            for (h, v) in r.shells.iter().enumerate() {
                shells.push(vec![h.into(), (*v).into(), r.analytic.into(), (v - r.analytic).abs().into()]);
            }
        }
    }
    let (slope, intercept, r2) = linear_fit(&ms, &totals);
    let expected = 2.0 * LN_2 * PI.sqrt();
    let checks = vec![
        Check::at_most("max_shell_error", worst, thr.num("max_shell_error")?),
        Check::at_most("slope_relative_error", rel_err(slope, expected), thr.num("slope_relative_tolerance")?),
        Check::at_least("r2", r2, thr.num("min_r2")?),
    ];
    let metrics = json!({
        "t0": t0,
        "shell_value": analytic,
        "expected_slope": expected,
        "fit": { "slope": slope, "intercept": intercept, "r2": r2 },
    });
    Ok(RunResult { tables: vec![blowup, shells], checks, metrics })
}

fn capacity_sweep(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let spec = cfg.cantor(cfg.depth)?;
    let res = Resolution { max_eval_points: Some(4000), ..Resolution::default() };
    let tol = thr.num("monotone_tolerance")?;
    let mut table = Table::new("sweep", &["k", "atoms", "cubes", "evals", "rows", "iterations", "value", "duality_gap", "primal_residual", "growth_ratio", "nonincreasing"]);
    let (mut worst_gap, mut worst_growth) = (0.0f64, 0.0f64);
    let mut monotone = true;
    let mut previous: Option<f64> = None;
    for k in cfg.k..=cfg.depth {
        let p = assemble_cantor(&spec, k, KernelSpec::new(KernelFamily::GradPs, cfg.n, cfg.s), true, &res)?;
        let est = solve_capacity(&p, DEFAULT_LP_TOL)?;
        let mu = est.measure(&p)?;
        let growth = audit_cubes(&mu, p.growth_exponent, &p.growth_cubes, CubeNormalization::Diam)?.constant;
        let step_ok = previous.is_none_or(|prev| est.value <= prev + tol * (1.0 + prev.abs()));
        monotone &= step_ok;
        previous = Some(est.value);
        worst_gap = worst_gap.max(est.duality_gap.abs());
        worst_growth = worst_growth.max(growth);
        table.push(vec![
            k.into(),
            est.atoms.into(),
            est.cubes.into(),
            est.evals.into(),
            est.rows.into(),
            est.iterations.into(),
            est.value.into(),
            est.duality_gap.into(),
            est.primal_residual.into(),
            growth.into(),
            step_ok.into(),
        ]);
    }
    let mut checks = vec![
        Check::at_most("max_duality_gap", worst_gap, thr.num("max_duality_gap")?),
        Check::at_most("max_growth_ratio", worst_growth, thr.num("max_growth_ratio")?),
    ];
    if thr.flag("require_monotone")? {
        checks.push(Check::holds("nonincreasing", monotone));
    }
    let metrics = json!({ "monotone": monotone, "max_eval_points": 4000 });
    Ok(RunResult { tables: vec![table], checks, metrics })
}

fn content_vs_capacity(cfg: &RunConfig, thr: &Thresholds) -> Result<RunResult> {
    let (n, s) = (cfg.n, cfg.s);
    let unit = PsCube::unit(n, s)?;
    let spec = cfg.cantor(cfg.k)?;
    let centre = PsPoint::new(vec![0.3; n], 0.4);
    let sets: Vec<(&str, Vec<PsPoint>)> = vec![
        ("point", vec![centre]),
        ("cantor", spec.natural_measure(cfg.k, AtomPlacement::Center)?.atoms()),
        ("lattice", uniform_grid_measure(n, s, 8)?.atoms()),
    ];
    let levels = [cfg.depth as u32 - 1, cfg.depth as u32];
    let factor = thr.num("max_ratio_spread_factor")?;
    let mut table = Table::new("ratios", &["set", "level", "atoms", "evals", "estimate", "content", "ratio"]);
    let mut c_run = 0.0f64;
    let mut worst_spread = 1.0f64;
    for (name, atoms) in &sets {
        let mut ratios = Vec::new();
        for &level in &levels {
            let res = Resolution { root: Some(unit.clone()), merge_atoms: true, max_eval_points: Some(4000), ..Resolution::at_level(level) };
            let r = content_capacity_report(atoms, n, s, &res)?;
            c_run = c_run.max(r.ratio);
            ratios.push(r.ratio);
            table.push(vec![(*name).into(), level.into(), r.atoms.into(), r.evals.into(), r.estimate.into(), r.content.into(), r.ratio.into()]);
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        worst_spread = worst_spread.max(if lo > 0.0 { hi / lo } else { f64::INFINITY });
    }
    let checks = vec![Check::at_most("ratio_spread_factor", worst_spread, factor), Check::holds("constant_finite", c_run.is_finite())];
    let metrics = json!({ "constant": c_run, "levels": levels, "cantor_generation": cfg.k });
    Ok(RunResult { tables: vec![table], checks, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (slope, intercept, r2) = linear_fit(&x, &y);
        assert!((slope - 2.5).abs() < 1e-12 && (intercept + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_thresholds_are_complete() {
        let all: Value = serde_json::from_str(crate::DEFAULT_THRESHOLDS).unwrap();
        for e in Experiment::ALL {
            Thresholds::new(&all, e).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn missing_threshold_is_reported() {
        let all = json!({ "cantor-growth": {} });
        let err = Thresholds::new(&all, Experiment::CantorGrowth).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("max_constant_over_bound"));
    }
}
