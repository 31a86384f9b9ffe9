use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command as ClapCommand};

use patchbench::config::RunConfig;
use patchbench::pipeline::{self, Command};
use patchbench::{Error, Result};

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

fn help_for(key: &str) -> &'static str {
    match key {
        "seed" => "Master seed (falls back to PATCHBENCH_SEED)",
        "scenes" => "Number of synthetic sequences",
        "illum_fraction" => "Fraction of illumination sequences",
        "image_size" => "Side of the synthetic images in pixels",
        "regions" => "Region cap per reference image",
        "rho" => "Measurement-region scale relative to the detection scale",
        "noise_easy" => "Easy detector noise: theta_max,t_max,s_max,a_max",
        "noise_hard" => "Hard detector noise: theta_max,t_max,s_max,a_max",
        "noise_tough" => "Tough detector noise: theta_max,t_max,s_max,a_max",
        "descriptors" => "Descriptors to evaluate; a leading + adds whitening and normalization",
        "tasks" => "Tasks to run",
        "scale" => "Size preset: desk or paper",
        "verification_positives" => "Positive verification pairs per set",
        "verification_negatives" => "Negative verification pairs per set",
        "retrieval_queries" => "Retrieval queries",
        "retrieval_distractors" => "Distractors per retrieval query",
        "clip_candidates" => "Eigenvalue clip fractions tried when fitting whitening",
        "alpha" => "Power-law exponent applied after whitening",
        "brief_seed" => "Seed of the BRIEF sampling pattern",
        "rho_list" => "Scales evaluated by rho-sweep",
        "sweep_variant" => "Noise variant used by rho-sweep",
        "sweep_descriptor" => "Descriptor used by rho-sweep",
        "threads" => "Worker threads (0 = all cores); results do not depend on it",
        "export_descriptors" => "Also write descriptor tables next to the results",
        _ => "",
    }
}

fn leak(s: String) -> &'static str {
    Box::leak(s.into_boxed_str())
}

fn settings() -> Vec<Arg> {
    let defaults = RunConfig::default();
    let mut args: Vec<Arg> = RunConfig::KEYS
        .iter()
        .map(|&key| {
            let mut arg = Arg::new(key)
                .long(leak(flag(key)))
                .value_name("VALUE")
                .help(help_for(key))
                .default_value(leak(defaults.get(key).expect("known key")));
            match key {
                "descriptors" => arg = arg.alias("desc"),
                "scale" => arg = arg.value_parser(["desk", "paper"]),
                _ => {}
            }
            arg
        })
        .collect();
    args.push(
        Arg::new("out")
            .long("out")
            .value_name("DIR")
            .help("Output directory")
            .default_value(leak(defaults.out.display().to_string())),
    );
    args.push(
        Arg::new("corpus")
            .long("corpus")
            .value_name("DIR")
            .help("Corpus to read [default: <out>/corpus]"),
    );
    args.push(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("Configuration file of key = value lines"),
    );
    args.push(
        Arg::new("paper_scale")
            .long("paper-scale")
            .action(ArgAction::SetTrue)
            .help("Shorthand for --scale paper"),
    );
    args
}

fn cli() -> ClapCommand {
    let sub = |name: &'static str, about: &'static str| ClapCommand::new(name).about(about).args(settings());
    ClapCommand::new("patchbench")
        .about("Synthetic local-descriptor benchmark")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(sub("synth", "Generate a ground-truthed patch corpus"))
        .subcommand(sub("eval", "Evaluate descriptors on verification, matching and retrieval"))
        .subcommand(sub("rho-sweep", "Matching mAP as a function of the measurement-region scale"))
        .subcommand(sub("report", "Print the summary table of an evaluation"))
}

fn explicit<'a>(m: &'a ArgMatches, id: &str) -> Option<&'a str> {
    match m.value_source(id) {
        Some(ValueSource::CommandLine) => m.get_one::<String>(id).map(String::as_str),
        _ => None,
    }
}

/// Defaults, then the seed environment variable, then the config file, then
/// flags given on the command line.
fn build_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_env()?;
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(&PathBuf::from(path))?;
    }
    if m.get_flag("paper_scale") {
        cfg.set("scale", "paper")?;
    }
    if let Some(v) = explicit(m, "scale") {
        cfg.set("scale", v)?;
    }
    for key in RunConfig::KEYS.iter().copied().filter(|&k| k != "scale").chain(["out", "corpus"]) {
        if let Some(v) = explicit(m, key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: Command, cfg: &RunConfig) -> Result<String> {
    pipeline::with_threads(cfg.threads, || match cmd {
        Command::Synth => pipeline::cmd_synth(cfg).map(|c| {
            format!(
                "wrote {} sequences with {} regions to {}\n",
                c.len(),
                c.total_regions(),
                cfg.corpus_dir().display()
            )
        }),
        Command::Eval => pipeline::cmd_eval(cfg).and_then(|_| pipeline::cmd_report(cfg)),
        Command::RhoSweep => pipeline::cmd_rho_sweep(cfg).map(|t| t.to_csv()),
        Command::Report => pipeline::cmd_report(cfg),
    })?
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not errors; bad arguments are
            // configuration errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cmd = match name {
        "synth" => Command::Synth,
        "eval" => Command::Eval,
        "rho-sweep" => Command::RhoSweep,
        _ => Command::Report,
    };
    let cfg = match build_config(sub) {
        Ok(c) => c,
        Err(e) => return fail(cmd, &e),
    };
    let result = run(cmd, &cfg);
    if cmd != Command::Report {
        pipeline::record_outcome(&cfg.out, &result);
    }
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(cmd, &e),
    }
}

fn fail(cmd: Command, e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(pipeline::exit_code(cmd, e) as u8)
}
