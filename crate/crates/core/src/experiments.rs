//! Run, criteria and summary plumbing shared by the command line tool, the
//! sweep runner and the FFI layer.

use std::path::Path;

use crate::config::{scenario_to_config, KeyValues};
use crate::criteria::{
    check_liu, check_pressureless, energy_upper_bound, isothermal_report, EnergyBoundReport,
    IsothermalCriterionReport, LiuReport, PressurelessCriterionReport,
};
use crate::error::Result;
use crate::eulerian::{run, RunResult};
use crate::lagrangian::{run_lagrangian, LagrangianRun};
use crate::output::{self, fmt_num};
use crate::scenario::Scenario;

/// All criteria evaluated on the initial data.
#[derive(Clone, Debug, PartialEq)]
pub struct CriteriaReport {
    pub pressureless: PressurelessCriterionReport,
    pub liu: LiuReport,
    pub energy_bound: EnergyBoundReport,
    /// Present only for `K > 0`.
    pub isothermal: Option<IsothermalCriterionReport>,
}

pub fn criteria_report(sc: &Scenario) -> Result<CriteriaReport> {
    sc.validate()?;
    let grid = sc.grid()?;
    let rho0 = sc.rho0.sample(&grid)?;
    let u0 = sc.u0.sample(&grid)?;
    let isothermal = if sc.k > 0.0 {
        let c = &sc.criteria;
        Some(isothermal_report(&rho0, &u0, &grid, sc.k, c.t0, c.eps, c.delta0)?)
    } else {
        None
    };
    Ok(CriteriaReport {
        pressureless: check_pressureless(&rho0, &u0, &grid)?,
        liu: check_liu(&rho0, &u0, &grid)?,
        energy_bound: energy_upper_bound(&rho0, &u0, &grid, sc.k)?,
        isothermal,
    })
}

fn verdict(b: bool) -> &'static str {
    if b {
        "hold"
    } else {
        "not_hold"
    }
}

impl CriteriaReport {
    pub fn write_into(&self, kv: &mut KeyValues) {
        let p = &self.pressureless;
        kv.set("criteria.pressureless.H0", &fmt_num(p.h0));
        kv.set("criteria.pressureless.v_minus_inv_H0", &fmt_num(p.v_minus_inv_h0));
        kv.set("criteria.pressureless.exp_v_minus_inv_H0", &fmt_num(p.lhs));
        kv.set("criteria.pressureless.two_rho0_min", &fmt_num(p.rhs));
        kv.set("criteria.pressureless.witness_x", &fmt_num(p.witness_x));
        kv.set("criteria.pressureless.margin", &fmt_num(p.margin));
        kv.set("criteria.pressureless.verdict", verdict(p.holds));
        let l = &self.liu;
        kv.set("criteria.liu.min_value", &fmt_num(l.min_value));
        kv.set("criteria.liu.witness_x", &fmt_num(l.witness_x));
        kv.set("criteria.liu.verdict", verdict(l.holds));
        let e = &self.energy_bound;
        kv.set("criteria.energy_bound.kappa0", &fmt_num(e.kappa0));
        kv.set("criteria.energy_bound.bound", &fmt_num(e.bound));
        kv.set("criteria.energy_bound.H0", &fmt_num(e.h0));
        kv.set("criteria.energy_bound.H0_pressureless", &fmt_num(e.h0_pressureless));
        kv.set("criteria.energy_bound.pass", &e.pass.to_string());
        kv.set(
            "criteria.energy_bound.isothermal_term_checkable",
            &e.isothermal_term_checkable.to_string(),
        );
        if let Some(i) = &self.isothermal {
            kv.set("criteria.isothermal.H0", &fmt_num(i.h0));
            kv.set("criteria.isothermal.delta_eff", &fmt_num(i.delta_eff));
            kv.set("criteria.isothermal.steepness", &fmt_num(i.steepness));
            kv.set("criteria.isothermal.steepness_x", &fmt_num(i.steepness_x));
            kv.set("criteria.isothermal.T0", &fmt_num(i.t0));
            kv.set("criteria.isothermal.eps", &fmt_num(i.eps));
            kv.set("criteria.isothermal.delta0", &fmt_num(i.delta0));
            kv.set("criteria.isothermal.alpha", &fmt_num(i.constants.alpha));
            kv.set("criteria.isothermal.beta", &fmt_num(i.constants.beta));
            kv.set("criteria.isothermal.C2", &fmt_num(i.constants.c2));
            kv.set("criteria.isothermal.gamma", &fmt_num(i.constants.gamma));
            kv.set("criteria.isothermal.M_required", &fmt_num(i.constants.m_required));
            kv.set("criteria.isothermal.small", &i.small.to_string());
            kv.set("criteria.isothermal.steep", &i.steep.to_string());
            kv.set("criteria.isothermal.verdict", verdict(i.satisfied));
            kv.set("criteria.isothermal.Tm_lower", &fmt_num(i.tm_lower));
        }
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        self.write_into(&mut kv);
        kv
    }
}

/// Everything a `run` produces.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub result: RunResult,
    pub lagrangian: Option<LagrangianRun>,
    pub criteria: CriteriaReport,
}

/// Runs the Eulerian solver and, for `K = 0` with the cross-check enabled, the
/// Lagrangian solver.
pub fn execute(sc: &Scenario) -> Result<RunOutcome> {
    let criteria = criteria_report(sc)?;
    let result = run(sc)?;
    let lagrangian = if sc.k == 0.0 && sc.lagrangian.enabled {
        Some(run_lagrangian(sc, |_, _| {})?)
    } else {
        None
    };
    Ok(RunOutcome {
        scenario: sc.clone(),
        result,
        lagrangian,
        criteria,
    })
}

impl RunOutcome {
    pub fn t_star(&self) -> Option<f64> {
        self.result.blowup.as_ref().map(|b| b.t_star)
    }

    pub fn summary(&self) -> KeyValues {
        let sc = &self.scenario;
        let r = &self.result;
        let mut kv = KeyValues::default();
        for (k, v) in scenario_to_config(sc).pairs() {
            kv.set(&format!("scenario.{k}"), v);
        }
        kv.set("termination", r.termination.as_str());
        kv.set("final_time", &fmt_num(r.final_state.time));
        kv.set("steps", &r.steps.to_string());
        match &r.blowup {
            Some(b) => {
                kv.set("T_star", &fmt_num(b.t_star));
                kv.set(
                    "blowup.rate_constant",
                    &b.rate_constant.map_or_else(|| "none".to_string(), fmt_num),
                );
                kv.set("blowup.trigger", &b.trigger);
            }
            None => kv.set("T_star", "none"),
        }
        kv.set("failure", r.failure.as_deref().unwrap_or("none"));
        kv.set("H0", &fmt_num(r.h0));
        kv.set("phi_min_bound", &fmt_num(r.phi_window.0));
        kv.set("phi_max_bound", &fmt_num(r.phi_window.1));
        kv.set("mass0", &fmt_num(r.mass0));
        kv.set("mass_drift", &fmt_num(r.mass_drift));
        kv.set("energy_drift_smooth", &fmt_num(r.energy_drift_smooth));
        kv.set("lemma_checks_pass", &r.lemma_checks_pass.to_string());
        let f = &r.final_state;
        let dev = f.rho.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
        kv.set("final.max_abs_rho_minus_1", &fmt_num(dev));
        kv.set("final.max_abs_u", &fmt_num(f.u.max_abs()));
        if let Some(s) = r.samples.last() {
            kv.set("final.max_abs_ux", &fmt_num(s.max_abs_ux));
            kv.set("final.max_abs_rhox", &fmt_num(s.max_abs_rhox));
        }
        kv.set("solver.nonlinear_iterations", &r.stats.nonlinear.to_string());
        kv.set("solver.krylov_iterations", &r.stats.krylov.to_string());
        if let Ok(grid) = sc.grid() {
            kv.set("truncation.rho0_edge_tail", &fmt_num(sc.rho0.edge_tail(&grid)));
            kv.set("truncation.u0_edge_tail", &fmt_num(sc.u0.edge_tail(&grid)));
            kv.set("truncation.final_rho_spectral_tail", &fmt_num(grid.tail_energy_fraction(&f.rho)));
            kv.set("truncation.final_u_spectral_tail", &fmt_num(grid.tail_energy_fraction(&f.u)));
        }
        kv.set("truncation.under_resolved_steps", &r
            .records
            .iter()
            .filter(|x| x.has(crate::diagnostics::flags::UNDER_RESOLVED))
            .count()
            .to_string());
        self.criteria.write_into(&mut kv);
        if let Some(l) = &self.lagrangian {
            kv.set("lagrangian.termination", l.termination.as_str());
            kv.set("lagrangian.min_w", &fmt_num(l.final_ensemble.min_w().1));
            match &l.vanishing {
                Some(v) => {
                    kv.set("lagrangian.T_star", &fmt_num(v.t_star));
                    kv.set("lagrangian.wdot_sign", v.sign.as_str());
                }
                None => kv.set("lagrangian.T_star", "none"),
            }
            if let Some(rate) = &l.rate {
                kv.set("lagrangian.rate.lower", &fmt_num(rate.lower));
                kv.set("lagrangian.rate.upper", &fmt_num(rate.upper));
                kv.set("lagrangian.rate.min_product", &fmt_num(rate.min_product));
                kv.set("lagrangian.rate.max_product", &fmt_num(rate.max_product));
                kv.set("lagrangian.rate.inside", &rate.inside.to_string());
            }
            let (rw, wd) = l.resolved_defects();
            kv.set("lagrangian.rho_w_defect", &fmt_num(rw));
            kv.set("lagrangian.wdot_defect", &fmt_num(wd));
            kv.set("lagrangian.phi_bounds_pass", &l.phi_bounds_pass.to_string());
            kv.set("lagrangian.failure", l.failure.as_deref().unwrap_or("none"));
        }
        kv
    }

    /// Writes diagnostics, probe series, snapshots and the summary under `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let grid = self.scenario.grid()?;
        output::write_diagnostics(&dir.join(output::DIAGNOSTICS_FILE), &self.result.records)?;
        output::write_probe(&dir.join(output::PROBE_FILE), &self.result.samples)?;
        output::write_snapshots(&dir.join(output::SNAPSHOT_DIR), &grid, &self.result.snapshots)?;
        output::write_summary(&dir.join(output::SUMMARY_FILE), &self.summary())
    }
}
