//! Command-line driver: case validation, market clearings, best responses,
//! equilibrium search, equilibrium verification and MPS export.
//!
//! Exit codes: 0 success, 1 domain failure (infeasible market, bad data,
//! non-convergence), 2 usage errors.

mod profiles;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tsodso::clearing::{clear_all, clear_dam};
use tsodso::equilibrium::{
    certify, find_equilibrium, is_nash, EngineConfig, Responder, Termination,
};
use tsodso::io::{load_case, write_case, write_results, ResultBundle};
use tsodso::milp::{export_mps, MilpConfig};
use tsodso::model::{MarketCase, Scheme};
use tsodso::mpec::build_mpec;

#[derive(Parser)]
#[command(
    name = "tsodso",
    about = "Strategic bidding equilibria in sequentially-cleared energy and ancillary-services markets",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArg {
    /// Path to a JSON case document.
    case: PathBuf,
    /// Replace the unit ladders by the uniform mark-up rules
    /// (+10/20/30% day-ahead, +10/30/50% up, -10/-30/-50% down).
    #[arg(long)]
    corrected_ladders: bool,
}

impl CaseArg {
    fn load(&self) -> Result<MarketCase, String> {
        let mut case = load_case(&self.case).map_err(|e| e.to_string())?;
        if self.corrected_ladders {
            tsodso::data::apply_corrected_ladders(&mut case);
        }
        Ok(case)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a case document and report every violation found.
    Validate(CaseArg),
    /// Clear the day-ahead market at the given bid prices.
    ClearDam {
        #[command(flatten)]
        case: CaseArg,
        /// JSON object mapping unit id to bid price.
        #[arg(long)]
        bids: PathBuf,
    },
    /// Clear the ancillary-services markets of one scenario.
    ClearAsm {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scheme: Scheme,
        /// Scenario id (e.g. s1).
        #[arg(long)]
        scenario: String,
        /// JSON bid profile (resource id -> slot -> price).
        #[arg(long)]
        profile: PathBuf,
    },
    /// Best response of one aggregator with rivals fixed.
    BestResponse {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scheme: Scheme,
        /// Aggregator id.
        #[arg(long)]
        aggregator: String,
        #[arg(long)]
        profile: PathBuf,
        /// Verify the single-level optimum against exhaustive enumeration.
        #[arg(long)]
        oracle: bool,
    },
    /// Iterative best-response equilibrium search.
    Equilibrium {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scheme: Scheme,
        /// Maximum sweeps.
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Compute best responses by enumeration instead of the MILP.
        #[arg(long)]
        oracle: bool,
        /// Re-check the fixed point before reporting.
        #[arg(long)]
        certify: bool,
        /// Output directory for the result tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify that a profile is an equilibrium.
    VerifyNash {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        profile: PathBuf,
        /// Check deviations by enumeration instead of the MILP.
        #[arg(long)]
        oracle: bool,
    },
    /// Write one aggregator's single-level MILP in MPS format.
    ExportMps {
        #[command(flatten)]
        case: CaseArg,
        #[arg(long)]
        scheme: Scheme,
        #[arg(long)]
        aggregator: String,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a bundled dataset to a case document.
    ExportCase {
        /// Dataset name (available: cigre).
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Solver limits, overridable through the environment.
fn milp_config() -> MilpConfig {
    let mut cfg = MilpConfig::default();
    if let Ok(v) = std::env::var("TSODSO_NODE_LIMIT") {
        if let Ok(n) = v.parse() {
            cfg.node_limit = n;
        }
    }
    if let Ok(v) = std::env::var("TSODSO_TIME_LIMIT") {
        if let Ok(t) = v.parse() {
            cfg.time_limit_secs = t;
        }
    }
    if let Ok(v) = std::env::var("TSODSO_GAP") {
        if let Ok(g) = v.parse() {
            cfg.gap_rel = g;
        }
    }
    cfg
}

fn engine_config(oracle: bool, max_iterations: usize) -> EngineConfig {
    EngineConfig {
        max_iterations,
        responder: if oracle { Responder::Oracle } else { Responder::Mpec },
        milp: milp_config(),
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Validate(case_arg) => {
            let case = load_case(&case_arg.case).map_err(|e| e.to_string())?;
            let report = tsodso::model::validate_case(&case);
            for w in &report.warnings {
                println!("warning: {w}");
            }
            println!(
                "ok: {} units, {} flexible loads, {} scenarios, {} aggregators",
                case.units.len(),
                case.loads.iter().filter(|l| l.is_flexible()).count(),
                case.scenarios.len(),
                case.aggregators.len()
            );
            Ok(())
        }
        Command::ClearDam { case, bids } => {
            let case = case.load()?;
            let bid_vec = profiles::read_dam_bids(&case, &bids)?;
            let dam = clear_dam(&case, &bid_vec).map_err(|e| e.to_string())?;
            println!("unit,bid,quantity,capacity_dual");
            for (u, unit) in case.units.iter().enumerate() {
                println!(
                    "{},{},{},{}",
                    unit.id,
                    fmt(dam.bids[u]),
                    fmt(dam.quantities[u]),
                    fmt(dam.capacity_duals[u])
                );
            }
            println!("clearing_price,{}", fmt(dam.price));
            println!("objective,{}", fmt(dam.objective));
            Ok(())
        }
        Command::ClearAsm {
            case,
            scheme,
            scenario,
            profile,
        } => {
            let case = case.load()?;
            let prof = profiles::read_profile(&case, scheme, &profile)?;
            let s = case
                .scenarios
                .index(&scenario)
                .ok_or_else(|| format!("unknown scenario id '{scenario}'"))?;
            let (dam, _) = clear_all(&case, scheme, &prof).map_err(|e| e.to_string())?;
            let markets =
                tsodso::clearing::clear_scenario(&case, scheme, &dam, &prof, s)
                    .map_err(|e| e.to_string())?;
            print!("{}", tsodso::io::dispatch_csv(&case, &markets));
            for m in &markets {
                println!(
                    "objective,{},{}",
                    m.scope.label(),
                    fmt(m.objective)
                );
            }
            Ok(())
        }
        Command::BestResponse {
            case,
            scheme,
            aggregator,
            profile,
            oracle,
        } => {
            let case = case.load()?;
            let prof = profiles::read_profile(&case, scheme, &profile)?;
            let agg = case
                .aggregator_index(&aggregator)
                .ok_or_else(|| format!("unknown aggregator '{aggregator}'"))?;
            let cfg = engine_config(false, 1);
            let (br, profit) =
                tsodso::equilibrium::best_response(&case, scheme, agg, &prof, &cfg)
                    .map_err(|e| e.to_string())?;
            println!("{}", profiles::profile_to_json(&case, &br)?);
            println!("profit,{}", fmt(profit));
            if oracle {
                let (br_o, profit_o) = tsodso::oracle::enumerate_best_response(
                    &case,
                    scheme,
                    agg,
                    &prof,
                    tsodso::oracle::BR_CAP,
                )
                .map_err(|e| e.to_string())?;
                let agree = (profit - profit_o).abs() <= 1e-4 && br == br_o;
                println!("oracle_profit,{}", fmt(profit_o));
                println!("oracle_agrees,{agree}");
            }
            Ok(())
        }
        Command::Equilibrium {
            case,
            scheme,
            max_iter,
            oracle,
            certify: do_certify,
            out,
        } => {
            let case = case.load()?;
            let cfg = engine_config(oracle, max_iter);
            let mut report =
                find_equilibrium(&case, scheme, &cfg).map_err(|e| e.to_string())?;
            if do_certify {
                certify(&case, &mut report, &cfg).map_err(|e| e.to_string())?;
            }
            println!(
                "termination,{}",
                match report.termination {
                    Termination::Converged => "converged",
                    Termination::IterationLimit => "iteration-limit",
                    Termination::Cycling => "cycling",
                }
            );
            println!("iterations,{}", report.iterations);
            println!("expected_cost,{}", fmt(report.costs.expected));
            if do_certify {
                println!("nash_certified,{}", report.nash_certified);
            }
            if let Some(dir) = out {
                let bundle =
                    ResultBundle::build(&case, report.clone()).map_err(|e| e.to_string())?;
                let manifest = write_results(&case, &bundle, &dir).map_err(|e| e.to_string())?;
                println!("written,{}", manifest.files.len() + 1);
            }
            if report.termination != Termination::Converged {
                return Err(format!(
                    "no equilibrium within {} sweeps ({:?})",
                    max_iter, report.termination
                ));
            }
            Ok(())
        }
        Command::VerifyNash {
            case,
            scheme,
            profile,
            oracle,
        } => {
            let case = case.load()?;
            let prof = profiles::read_profile(&case, scheme, &profile)?;
            let cfg = engine_config(oracle, 1);
            let (ok, improvements) =
                is_nash(&case, scheme, &prof, &cfg).map_err(|e| e.to_string())?;
            println!("aggregator,improvement");
            for (id, imp) in &improvements {
                println!("{id},{}", fmt(*imp));
            }
            println!("nash,{ok}");
            if !ok {
                return Err("profile is not an equilibrium".to_string());
            }
            Ok(())
        }
        Command::ExportMps {
            case,
            scheme,
            aggregator,
            profile,
            out,
        } => {
            let case = case.load()?;
            let prof = profiles::read_profile(&case, scheme, &profile)?;
            let agg = case
                .aggregator_index(&aggregator)
                .ok_or_else(|| format!("unknown aggregator '{aggregator}'"))?;
            let instance = build_mpec(&case, scheme, agg, &prof).map_err(|e| e.to_string())?;
            let text = export_mps(&instance.model);
            std::fs::write(&out, text).map_err(|e| e.to_string())?;
            println!(
                "written,{},{} vars,{} rows,{} sos1",
                out.display(),
                instance.model.num_vars(),
                instance.model.num_rows(),
                instance.model.sos1.len()
            );
            Ok(())
        }
        Command::ExportCase { name, out } => {
            if name != "cigre" {
                return Err(format!("unknown bundled dataset '{name}' (available: cigre)"));
            }
            let case = tsodso::data::cigre_case();
            write_case(&case, tsodso::data::cigre_provenance(), &out)
                .map_err(|e| e.to_string())?;
            println!("written,{}", out.display());
            Ok(())
        }
    }
}

fn fmt(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
