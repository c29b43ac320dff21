use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lieinfty::poly::MonomialOrder;
use lieinfty_cli::parse::{parse_builtin, parse_point, FoliationSpec, Source};
use lieinfty_cli::{cli_parse, cli_run, to_json, to_text, Stage};

#[derive(Parser)]
#[command(name = "lieinfty", version, about = "Universal Lie infinity-algebroids of polynomial singular foliations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Involutivity and a verified geometric resolution
    Resolve(Opts),
    /// Construct the universal structure
    Build(Opts),
    /// Check [Q,Q] = 0 arity by arity
    Verify(Opts),
    /// Isotropy Lie infinity-algebra at --point
    Isotropy(Opts),
    /// Chevalley-Eilenberg class and minimal-rank verdict at --point
    Nmrla(Opts),
    /// Full pipeline
    Run(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Degrevlex,
    Lex,
}

#[derive(Args)]
struct Opts {
    /// Specification file
    #[arg(long)]
    input: Option<PathBuf>,
    /// sl2, origin(n), order2 or koszul(phi)
    #[arg(long)]
    builtin: Option<String>,
    /// Rational point such as "0,0" or "(1/2, 0)"
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long)]
    max_arity: Option<i64>,
    /// Also write the JSON report here ("-" for stdout instead of text)
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long, value_enum)]
    order: Option<Order>,
}

fn load(opts: &Opts) -> Result<FoliationSpec, String> {
    let mut spec = match (&opts.input, &opts.builtin) {
        (Some(_), Some(_)) => return Err("--input and --builtin are exclusive".into()),
        (None, None) => return Err("one of --input or --builtin is required".into()),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            cli_parse(&text).map_err(|e| format!("{}:{e}", path.display()))?
        }
        (None, Some(b)) => FoliationSpec {
            source: Source::Builtin(parse_builtin(b, None).map_err(|e| format!("--builtin {e}"))?),
            point: None,
            max_arity: None,
            order: MonomialOrder::DegRevLex,
        },
    };
    if let Some(p) = &opts.point {
        spec.point = Some(parse_point(p, Some(spec.nvars())).map_err(|e| format!("--point {e}"))?);
    }
    if let Some(k) = opts.max_arity {
        spec.max_arity = Some(k);
    }
    if let Some(o) = opts.order {
        spec.order = match o {
            Order::Degrevlex => MonomialOrder::DegRevLex,
            Order::Lex => MonomialOrder::Lex,
        };
    }
    Ok(spec)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let (stage, opts) = match &cli.command {
        Command::Resolve(o) => (Stage::Resolve, o),
        Command::Build(o) => (Stage::Build, o),
        Command::Verify(o) => (Stage::Verify, o),
        Command::Isotropy(o) => (Stage::Isotropy, o),
        Command::Nmrla(o) => (Stage::Nmrla, o),
        Command::Run(o) => (Stage::Nmrla, o),
    };
    let spec = match load(opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if stage >= Stage::Isotropy && spec.point.is_none() && !matches!(cli.command, Command::Run(_)) {
        eprintln!("error: this subcommand needs a point (--point or 'point =' in the input)");
        return ExitCode::from(2);
    }
    let report = cli_run(&spec, stage);
    let json = to_json(&report);
    match &opts.json {
        Some(p) if p.as_os_str() == "-" => print!("{json}"),
        Some(p) => {
            print!("{}", to_text(&report));
            if let Err(e) = std::fs::write(p, &json) {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{}", to_text(&report)),
    }
    ExitCode::SUCCESS
}
