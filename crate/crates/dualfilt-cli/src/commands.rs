//! Subcommand drivers: wire resolved plans to the library and print
//! records.
//!
//! Every float in the record streams goes through [`obs_io::sig17`], so a
//! rerun with the same config, input, and seed produces byte-identical
//! output and the files work as golden references.

use std::io::Write;

use dualfilt::filter::{self, FilterTrace};
use dualfilt::models::DualParameter;
use dualfilt::oracle::{particle_filter, simulate_hmm, ParticleConfig};
use dualfilt::{FilterOptions, MixtureState, ModelSpec};

use crate::config::{
    self, Cli, CliError, Command, FilterPlan, SimulatePlan, ValidatePlan,
};
use crate::obs_io::{self, sig17, write_err};

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(config::resolve_simulate(args)?),
        Command::Filter(args) => run_filter(config::resolve_filter(args)?),
        Command::Validate(args) => validate(config::resolve_validate(args)?),
    }
}

fn simulate(plan: SimulatePlan) -> Result<(), CliError> {
    let sample = simulate_hmm(&plan.sim)?;
    let mut out = obs_io::open_out(plan.out.as_deref())?;
    obs_io::write_observations(&mut out, &plan.sim.model, &sample.observations)
        .map_err(write_err)?;
    out.flush().map_err(write_err)?;
    if let Some(path) = &plan.state_out {
        let mut w = obs_io::open_out(Some(path))?;
        obs_io::write_states(&mut w, &sample.times, &sample.states).map_err(write_err)?;
        w.flush().map_err(write_err)?;
    }
    Ok(())
}

fn run_filter(plan: FilterPlan) -> Result<(), CliError> {
    let obs = obs_io::read_observations(&plan.obs, &plan.model)?;
    let trace = filter::run(
        &plan.model,
        &obs,
        &FilterOptions {
            prune_eps: plan.prune_eps,
        },
    )?;
    let mut out = obs_io::open_out(plan.out.as_deref())?;
    write_filter_records(&mut out, &plan, &trace)?;
    out.flush().map_err(write_err)
}

fn write_filter_records(
    w: &mut dyn Write,
    plan: &FilterPlan,
    trace: &FilterTrace,
) -> Result<(), CliError> {
    let dim = plan.model.signal_dim();
    let mut header = String::from("time");
    match plan.model {
        ModelSpec::Cir(_) => header.push_str(",theta"),
        ModelSpec::Ou(_) => header.push_str(",theta_mean,theta_var"),
        ModelSpec::WrightFisher(_) => {}
    }
    header.push_str(",support_size,pruned_mass");
    if dim == 1 {
        header.push_str(",mean,var");
    } else {
        for j in 1..=dim {
            header.push_str(&format!(",mean_{j}"));
        }
        for j in 1..=dim {
            header.push_str(&format!(",var_{j}"));
        }
    }
    header.push_str(",log_predictive,cum_loglik");
    if plan.full_mixture {
        header.push_str(",mixture");
    }
    writeln!(w, "{header}").map_err(write_err)?;

    let mut cum_loglik = 0.0;
    for step in &trace.steps {
        cum_loglik += step.log_predictive;
        let state = &step.state;
        let (mean, var) = state.moments()?;
        // The size of the downward closure of the current support, the
        // support the next prediction will live on.
        let support = state.predictive_support()?;

        let mut line = sig17(step.time);
        match state.theta() {
            DualParameter::Cir { theta } => {
                line.push(',');
                line.push_str(&sig17(*theta));
            }
            DualParameter::Ou { mean, var } => {
                line.push(',');
                line.push_str(&sig17(*mean));
                line.push(',');
                line.push_str(&sig17(*var));
            }
            DualParameter::WrightFisher => {}
        }
        line.push_str(&format!(",{support},{}", sig17(step.pruned_mass)));
        for v in mean.iter().chain(var.iter()) {
            line.push(',');
            line.push_str(&sig17(*v));
        }
        line.push_str(&format!(
            ",{},{}",
            sig17(step.log_predictive),
            sig17(cum_loglik)
        ));
        if plan.full_mixture {
            line.push(',');
            line.push_str(&mixture_field(state));
        }
        writeln!(w, "{line}").map_err(write_err)?;
    }
    Ok(())
}

/// Renders the mixture as space-separated index=weight pairs; coordinates
/// are joined with ':' to stay clear of the CSV comma. Iteration over the
/// component map is already lexicographic. Empty for OU, whose filtering
/// law has no multi-index component.
fn mixture_field(state: &MixtureState) -> String {
    match state.components() {
        None => String::new(),
        Some(map) => map
            .iter()
            .map(|(m, w)| {
                let coords = m
                    .coords()
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(":");
                format!("{coords}={}", sig17(*w))
            })
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn validate(plan: ValidatePlan) -> Result<(), CliError> {
    let obs = obs_io::read_observations(&plan.obs, &plan.model)?;
    let trace = filter::run(
        &plan.exact_model,
        &obs,
        &FilterOptions {
            prune_eps: plan.prune_eps,
        },
    )?;
    let summary = particle_filter(
        &plan.model,
        &obs,
        &ParticleConfig {
            particles: plan.particles,
            replicates: plan.replicates,
            seed: plan.seed,
            euler_step: plan.euler_step,
        },
    )?;

    let dim = plan.model.signal_dim();
    let mut out = obs_io::open_out(None)?;
    let mut header = String::from("time");
    if dim == 1 {
        header.push_str(",z_mean,z_var");
    } else {
        for j in 1..=dim {
            header.push_str(&format!(",z_mean_{j}"));
        }
        for j in 1..=dim {
            header.push_str(&format!(",z_var_{j}"));
        }
    }
    writeln!(out, "{header}").map_err(write_err)?;

    let mut all_ok = true;
    for (i, step) in trace.steps.iter().enumerate() {
        let (mean, var) = step.state.moments()?;
        let mut line = sig17(step.time);
        let mut push_z = |line: &mut String, exact: f64, approx: f64, se: f64| {
            let z = zscore(exact, approx, se);
            // NaN must fail, so test the acceptance region directly.
            if !(z.abs() < 3.0) {
                all_ok = false;
            }
            line.push_str(&format!(",{z:.2}"));
        };
        for j in 0..dim {
            push_z(&mut line, mean[j], summary.mean[i][j], summary.mean_se[i][j]);
        }
        for j in 0..dim {
            push_z(&mut line, var[j], summary.var[i][j], summary.var_se[i][j]);
        }
        writeln!(out, "{line}").map_err(write_err)?;
    }
    writeln!(out, "verdict: {}", if all_ok { "pass" } else { "fail" }).map_err(write_err)?;
    out.flush().map_err(write_err)?;
    if all_ok {
        Ok(())
    } else {
        Err(CliError::VerdictFail)
    }
}

/// Replicate noise can hit zero spread when every replicate agrees, which
/// for an exact match is a perfect score and otherwise an unambiguous miss.
fn zscore(exact: f64, approx: f64, se: f64) -> f64 {
    let diff = exact - approx;
    if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY * diff.signum()
    }
}
