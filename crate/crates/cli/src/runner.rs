use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ddform::analysis::{
    attach_solution, corollary_criterion, decompose, envelope_bounds, factorization_check, fit_envelope, leading_term_at,
    standard_battery, weak_residual, z_infinity, zeta_bound_ratio, Behavior, ClassifyOptions, ResidualRow,
};
use ddform::coeff::CoefficientField;
use ddform::export::{self, CheckRecord, Summary};
use ddform::meshmeans::{mp_profile, sphere_area, FieldInterpolator, Mesh, MeshRef};
use ddform::modulus::log_check_grid;
use ddform::ops::OpContext;
use ddform::zsolver::{build_z, context, omega_report, oracle_deviation, radial_oracle, solve_with_seed, SolutionBundle};
use ddform::{Cx, Error, Result};
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig};

pub const ENVELOPE_COLUMNS: [&str; 4] = ["r", "Mp_Z", "lower_env", "upper_env"];
const ZETA_FLOOR: f64 = 1e-12;

pub const ORACLE_COLUMNS: [&str; 2] = ["r", "relative_deviation"];

/// A finished suite: the summary and, if a step failed, the error that stopped it.
pub struct Outcome {
    pub summary: Summary,
    pub error: Option<Error>,
}

struct Suite<'a> {
    cfg: &'a ExperimentConfig,
    dir: &'a Path,
    a: CoefficientField<f64>,
    summary: Summary,
}

impl Suite<'_> {
    fn check(&mut self, c: CheckRecord) {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        if c.tolerance.is_nan() {
            println!("{verdict} {}: value {:.6e}", c.name, c.value);
        } else {
            println!("{verdict} {}: value {:.6e}, tolerance {:.6e}", c.name, c.value, c.tolerance);
        }
        self.summary.checks.push(c);
    }

    fn table(&mut self, key: &str, file: &str) -> std::path::PathBuf {
        self.summary.tables.insert(key.into(), file.into());
        self.dir.join(file)
    }

    fn p(&self) -> f64 {
        self.cfg.solver.p
    }

    fn check_omega(&mut self) -> Result<()> {
        let rep = omega_report(&self.a, &self.cfg.solver)?;
        let grid = log_check_grid(self.cfg.solver.mesh.r_min.min(1e-4), 400);
        export::write_omega(&self.table("omega", "omega.csv"), self.a.envelope(), &grid)?;
        self.check(CheckRecord { name: "omega.admissible".into(), pass: rep.admissible, value: rep.dini_delta, tolerance: rep.delta_threshold });
        self.check(CheckRecord { name: "omega.om2".into(), pass: rep.om2_holds, value: rep.sup_omega, tolerance: 1.0 });
        self.check(CheckRecord { name: "omega.om3".into(), pass: rep.om3_holds, value: rep.sup_omega, tolerance: 1.0 });
        self.check(CheckRecord {
            name: "omega.sqrt_delta_bound".into(),
            pass: rep.sqrt_delta_bound_ok,
            value: rep.sup_omega,
            tolerance: rep.c_chk * rep.dini_delta.sqrt(),
        });
        self.summary.result("omega", &rep);
        if !rep.admissible && self.cfg.solver.require_admissible {
            return Err(Error::Inadmissible(rep.reasons.join("; ")));
        }
        Ok(())
    }

    fn build_z(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        export::write_z_field(&self.table("z_field", "z_field.csv"), &b.z)?;
        export::write_profiles(&self.table("profiles", "profiles.csv"), b, self.p())?;
        let zeta = zeta_bound_ratio(b, ctx.modulus(), self.p());
        export::write_zeta_table(&self.table("zeta_table", "zeta_table.csv"), &zeta)?;
        let d = &b.diagnostics;
        let last = d.steps.last().map(|s| s.increment).unwrap_or(0.0);
        self.check(CheckRecord { name: "solve.converged".into(), pass: d.converged, value: last, tolerance: self.cfg.solver.tol_fixedpoint });
        self.check(CheckRecord::at_most("solve.max_ratio", d.max_ratio.unwrap_or(0.0), 1.0));
        // where the bound vanishes (constant coefficients) ζ itself must be at roundoff level
        let ratio = |m: f64, w: f64| if w > 0.0 { m / w } else if m <= ZETA_FLOOR { 0.0 } else { f64::INFINITY };
        let sup = zeta.iter().map(|&(_, m, w)| ratio(m, w)).fold(0.0, f64::max);
        self.check(CheckRecord::at_most("zeta.bound_ratio", sup, f64::MAX));
        self.summary.result("c_star", [b.c_star.re, b.c_star.im]);
        self.summary.result("solve", d);
        self.summary.result("error_budget", &b.budget);
        Ok(())
    }

    fn compare_asymptotic(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        let mesh = ctx.mesh();
        if self.a.equivariant_parts().is_some() {
            let oracle = radial_oracle(&self.a, mesh, self.cfg.solver.y0)?;
            let lo = mesh.radial.r_min().max(1e-3);
            let dev = oracle_deviation(&b.z, &oracle, self.p(), lo, 1.0);
            let rows: Vec<(f64, f64)> = dev.clone();
            export::write_table(&self.table("oracle", "oracle.csv"), &ORACLE_COLUMNS, rows.iter().map(|&(r, d)| vec![export::fmt(r), export::fmt(d)]))?;
            let worst = dev.iter().map(|x| x.1).fold(0.0, f64::max);
            self.check(CheckRecord::at_most("asymptotic.oracle_deviation", worst, self.cfg.tolerances.oracle));
        } else {
            println!("note: the radial oracle applies to equivariant families only; skipped");
        }
        let fact = factorization_check(b, ctx.modulus());
        self.summary.result("factorization", serde_json::json!({
            "c_star": [fact.c_star_re, fact.c_star_im],
            "max_ratio": fact.max_ratio,
            "max_deviation": fact.max_deviation,
        }));
        let (w0, w1) = self.cfg.far_window;
        if mesh.radial.r_max() >= 2.0 * w1 {
            let far = z_infinity(&b.z, (w0, w1))?;
            let tol = -(self.cfg.n as f64) + self.cfg.tolerances.far_field_margin;
            self.check(CheckRecord::at_most("asymptotic.far_field_exponent", far.exponent, tol));
            self.summary.result("z_infinity", [far.z_inf_re, far.z_inf_im]);
        } else {
            println!("note: r_max < {} leaves no room for the far-field window; skipped", 2.0 * w1);
        }
        Ok(())
    }

    fn criterion_radii(&self, mesh: &MeshRef<f64>) -> Vec<f64> {
        let per = self.cfg.criterion_per_decade as f64;
        let r0 = mesh.radial.r_min();
        (0..).map(|j| r0 * 10f64.powf(j as f64 / per)).take_while(|&r| r < 1.0 - 1e-12).collect()
    }

    fn corollary_scan(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        let mesh = ctx.mesh();
        let radii = self.criterion_radii(mesh);
        let rule = &mesh.sphere;
        let mut rep = corollary_criterion(&self.a, &radii, rule, ClassifyOptions::default())?;
        attach_solution(&mut rep, b, ctx.modulus(), self.p(), rule, &self.a)?;
        export::write_criterion(&self.table("criterion", "criterion.csv"), &rep.rows)?;
        self.check(CheckRecord {
            name: "corollary.classified".into(),
            pass: rep.classification != Behavior::Indeterminate,
            value: rep.sigma,
            tolerance: f64::NAN,
        });
        // the criterion is the real part of the exponent of L, so the two agree in modulus
        let area = sphere_area(3);
        let mut worst = 0.0f64;
        for row in &rep.rows {
            let l = leading_term_at(&self.a, row.r, rule)?.norm();
            worst = worst.max(((-row.criterion / area).exp() - l).abs() / l);
        }
        self.check(CheckRecord::at_most("corollary.leading_term_consistency", worst, self.cfg.tolerances.consistency));
        println!("classification: {}", rep.classification.as_str());
        self.summary.result("classification", rep.classification);
        self.summary.result("sigma", rep.sigma);
        self.summary.result("extrapolated_limit", rep.extrapolated_limit);
        Ok(())
    }

    fn weak_residual(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        let mesh = ctx.mesh();
        let interp = FieldInterpolator::new(&b.z);
        let z_sup = b.z.max_abs();
        let (bumps, ann) = standard_battery::<f64>(self.cfg.battery_size, self.cfg.seed);
        let mut rows: Vec<ResidualRow> = Vec::with_capacity(bumps.len() + 1);
        for e in &bumps {
            rows.push(weak_residual(&interp, z_sup, &self.a, e, mesh, 16)?);
        }
        rows.push(weak_residual(&interp, z_sup, &self.a, &ann, mesh, 16)?);
        export::write_residuals(&self.table("residuals", "residuals.csv"), &rows)?;
        let worst = rows.iter().map(|r| r.normalized).fold(0.0, f64::max);
        self.check(CheckRecord::at_most("residual.worst_normalized", worst, self.cfg.tolerances.residual));
        Ok(())
    }

    fn decompose(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        let spec = self.cfg.decompose.clone();
        let aux = solve_with_seed(ctx, &b.z, &self.cfg.solver)?;
        let u = b.z.add(&aux.u.scale(Cx::new(spec.aux_weight, 0.0)));
        let (d, _) = decompose(&u, &b.z, spec.window, spec.eps1, spec.slope_tol, self.p())?;
        export::write_decompose(&self.table("decompose", "decompose.csv"), &d.rows)?;
        let dc = Cx::new(d.c_re - 1.0, d.c_im).norm();
        self.check(CheckRecord::at_most("decompose.c_deviation", dc, spec.c_tol));
        self.check(CheckRecord::at_least("decompose.slope", d.slope, 1.0 - spec.eps1 - spec.slope_tol));
        self.summary.result("decompose", serde_json::json!({
            "c": [d.c_re, d.c_im],
            "slope": d.slope,
            "z_component_removed": [aux.z_component.re, aux.z_component.im],
            "aux_converged": aux.converged,
        }));
        Ok(())
    }

    fn envelope(&mut self, ctx: &OpContext<f64>, b: &SolutionBundle<f64>) -> Result<()> {
        let mesh = ctx.mesh();
        let g = &mesh.radial;
        let mp = mp_profile(&b.z, self.p());
        let pts: Vec<(f64, f64)> = (0..g.inner_break()).filter_map(|i| mp[i].map(|m| (g.r(i), m))).collect();
        let radii: Vec<f64> = pts.iter().map(|x| x.0).collect();
        let values: Vec<f64> = pts.iter().map(|x| x.1).collect();
        let bounds = envelope_bounds(ctx.modulus(), &radii, 3);
        let fit = fit_envelope(&values, &bounds, b.omega.sup_omega, 3);
        let rows = pts.iter().zip(&bounds).map(|(&(r, m), &(lo, hi))| vec![export::fmt(r), export::fmt(m), export::fmt(lo), export::fmt(hi)]);
        export::write_table(&self.table("envelope", "envelope.csv"), &ENVELOPE_COLUMNS, rows)?;
        self.check(CheckRecord { name: "envelope.holds".into(), pass: fit.holds, value: fit.c2 / fit.c1, tolerance: f64::NAN });
        self.summary.result("envelope", &fit);
        Ok(())
    }
}

fn grid_hash(mesh: &MeshRef<f64>) -> String {
    let digest = Sha256::digest(mesh.describe().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the requested experiments and writes `summary.json`, also when a step fails.
pub fn run(cfg: &ExperimentConfig, command: &str) -> Result<Outcome> {
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let a = cfg.family.build()?;
    let mut summary = Summary::new(command, serde_json::to_value(cfg)?);
    let repro = &mut summary.reproducibility;
    repro.grid_hash = grid_hash(&Mesh::new(cfg.solver.mesh)?);
    repro.seed = Some(cfg.seed);
    let t = &cfg.tolerances;
    for (k, v) in [
        ("tol_fixedpoint", cfg.solver.tol_fixedpoint),
        ("delta_threshold", cfg.solver.delta_threshold),
        ("oracle", t.oracle),
        ("residual", t.residual),
        ("consistency", t.consistency),
        ("far_field_margin", t.far_field_margin),
        ("decompose_c", cfg.decompose.c_tol),
        ("decompose_slope", 1.0 - cfg.decompose.eps1 - cfg.decompose.slope_tol),
    ] {
        repro.tolerances.insert(k.into(), v);
    }
    summary.result("family", a.label());
    let mut suite = Suite { cfg, dir, a, summary };
    let error = run_experiments(&mut suite).err();
    if let Some(e) = &error {
        suite.summary.result("error", e.to_string());
    }
    suite.summary.write(&dir.join("summary.json"))?;
    Ok(Outcome { summary: suite.summary, error })
}

fn run_experiments(s: &mut Suite<'_>) -> Result<()> {
    let todo: BTreeSet<Experiment> = s.cfg.experiments.iter().copied().collect();
    if todo.contains(&Experiment::CheckOmega) {
        s.check_omega()?;
    }
    if !todo.iter().any(|e| e.needs_solution()) {
        return Ok(());
    }
    let ctx = context(&s.a, &s.cfg.solver)?;
    let b = build_z(&ctx, &s.cfg.solver)?;
    for e in todo {
        match e {
            Experiment::CheckOmega => {}
            Experiment::BuildZ => s.build_z(&ctx, &b)?,
            Experiment::CompareAsymptotic => s.compare_asymptotic(&ctx, &b)?,
            Experiment::CorollaryScan => s.corollary_scan(&ctx, &b)?,
            Experiment::WeakResidual => s.weak_residual(&ctx, &b)?,
            Experiment::Decompose => s.decompose(&ctx, &b)?,
            Experiment::Envelope => s.envelope(&ctx, &b)?,
        }
    }
    Ok(())
}
