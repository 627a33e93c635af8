use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ued_core::decision::{GameMatrix, SuccessBands};
use ued_core::harness::config::{CliOverrides, ExperimentFile};
use ued_core::harness::eval::{evaluate, format_table};
use ued_core::harness::maps::load_suite;
use ued_core::harness::train::{load_protagonist, train, Manifest};
use ued_core::harness::{self, decide_report, DecideOptions, Rule};
use ued_core::{Error, Result};

/// Regret-driven environment design for grid navigation.
#[derive(Parser)]
#[command(name = "ued", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy for every configured seed.
    Train(TrainArgs),
    /// Zero-shot success rates of a frozen protagonist on a map suite.
    Eval(EvalArgs),
    /// Apply a decision rule to a payoff matrix.
    Decide(DecideArgs),
    /// Render learning curves of a run as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint holding the protagonist.
    #[arg(long, conflicts_with = "run", required_unless_present = "run")]
    checkpoint: Option<PathBuf>,
    /// Experiment config the checkpoint must match.
    #[arg(long, requires = "checkpoint")]
    config: Option<PathBuf>,
    /// Run directory; evaluates every seed's final checkpoint with the recorded settings.
    #[arg(long)]
    run: Option<PathBuf>,
    /// `desk`, `paper`, or a directory of .map files.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    eval_seed: Option<u64>,
    /// Also write the table as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct DecideArgs {
    /// CSV payoff matrix, or `small_game` / `big_game` for the bundled examples.
    #[arg(long)]
    game: String,
    /// maximin, insufficient_reason, or minimax_regret.
    #[arg(long)]
    rule: String,
    /// Print the regret matrix.
    #[arg(long)]
    regret: bool,
    /// Print the regret-seeking environment distributions.
    #[arg(long)]
    lambda: bool,
    /// Success and failure bands as `s_min,s_max,f_min,f_max`.
    #[arg(long)]
    bands: Option<String>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    run: PathBuf,
    /// Output directory; defaults to `<run>/plots`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut file = ExperimentFile::load(&a.config)?;
    file.apply(&CliOverrides {
        seed: a.seed,
        strategy: a.strategy,
        out_dir: a.out,
        iterations: a.iterations,
    });
    let exp = file.resolve()?;
    eprintln!(
        "training {} for {} iterations on seeds {:?} -> {}",
        exp.ued.strategy.name(),
        exp.iterations,
        exp.seeds,
        exp.out_dir.display()
    );
    let manifest = train(&exp, harness::workers())?;
    println!("{}", exp.out_dir.join(harness::train::MANIFEST_FILE).display());
    for c in &manifest.final_checkpoints {
        println!("{}", exp.out_dir.join(c).display());
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let (policies, mut settings) = if let Some(run) = &a.run {
        let manifest = Manifest::load(run)?;
        let spec = &manifest.experiment.ued.agent_spec;
        let policies = manifest
            .final_checkpoints
            .iter()
            .map(|c| load_protagonist(&run.join(c), Some(spec)))
            .collect::<Result<Vec<_>>>()?;
        (policies, manifest.experiment.eval.clone())
    } else {
        let path = a.checkpoint.as_deref().expect("clap enforces --checkpoint or --run");
        let (expected, settings) = match &a.config {
            Some(c) => {
                let exp = ExperimentFile::load(c)?.resolve()?;
                (Some(exp.ued.agent_spec.clone()), exp.eval)
            }
            None => (None, Default::default()),
        };
        (vec![load_protagonist(path, expected.as_ref())?], settings)
    };
    if let Some(s) = a.suite {
        settings.suite = s;
    }
    settings.trials_per_map = a.trials.unwrap_or(settings.trials_per_map);
    settings.seeds = a.seeds.unwrap_or(settings.seeds);
    settings.seed = a.eval_seed.unwrap_or(settings.seed);
    if settings.trials_per_map == 0 || settings.seeds == 0 {
        return Err(Error::config("eval", "trials and seeds must be >= 1"));
    }
    let maps = load_suite(&settings.suite)?;
    let results = evaluate(
        &policies,
        &maps,
        settings.trials_per_map,
        settings.seeds,
        settings.seed,
        harness::workers(),
    )?;
    print!("{}", format_table(&results));
    if let Some(p) = a.json {
        let text = serde_json::to_string_pretty(&results).expect("results serialize");
        std::fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

fn parse_bands(s: &str) -> Result<SuccessBands> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::config("bands", format!("`{s}` is not four comma-separated numbers")))?;
    let [s_min, s_max, f_min, f_max] = v[..] else {
        return Err(Error::config("bands", "expected s_min,s_max,f_min,f_max"));
    };
    Ok(SuccessBands {
        s_min,
        s_max,
        f_min,
        f_max,
    })
}

fn cmd_decide(a: DecideArgs) -> Result<()> {
    let text = match a.game.as_str() {
        "small_game" if !Path::new(&a.game).exists() => harness::SMALL_GAME.to_string(),
        "big_game" if !Path::new(&a.game).exists() => harness::BIG_GAME.to_string(),
        path => std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
    };
    let game = GameMatrix::from_csv(&text)?;
    let rule = Rule::parse(&a.rule).ok_or_else(|| {
        let names: Vec<_> = Rule::ALL.iter().map(|r| r.name()).collect();
        Error::config(
            "rule",
            format!("unknown rule `{}`; expected one of {}", a.rule, names.join(", ")),
        )
    })?;
    let opts = DecideOptions {
        show_regret: a.regret,
        show_lambda: a.lambda,
        bands: a.bands.as_deref().map(parse_bands).transpose()?,
    };
    print!("{}", decide_report(&game, rule, &opts));
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let out = a.out.unwrap_or_else(|| a.run.join("plots"));
    for p in harness::plot::plot_run(&a.run, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Decide(a) => cmd_decide(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::from(harness::EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
