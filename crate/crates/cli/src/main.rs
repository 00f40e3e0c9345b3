//! Command-line front end: runs scenario files and exposes each attack as a
//! subcommand.
//!
//! Exit status: 0 on success, 2 when an attack or a scenario expectation
//! fails, 1 on usage, parse or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use touchlink_lab::crypto::Key128;
use touchlink_lab::scenario::{parse, Action, ActionOutcome, NodeKind, Runner, Scenario, Step};
use touchlink_lab::wire::{is_valid_channel, ClusterCommand, ExtendedAddr};

#[derive(Parser)]
#[command(
    name = "touchlink-lab",
    version,
    about = "Touchlink commissioning simulator and attack toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file describing the deployment and script.
    #[arg(long)]
    scenario: PathBuf,
    /// Directory for events.log, states.txt and report.txt.
    #[arg(long, env = "TOUCHLINK_LAB_OUT")]
    out: Option<PathBuf>,
    /// Overrides the seed given in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AttackArgs {
    #[command(flatten)]
    common: Common,
    /// Attacker node to use; defaults to the first attacker in the scenario.
    #[arg(long)]
    attacker: Option<String>,
}

#[derive(Args)]
struct Targeted {
    #[command(flatten)]
    attack: AttackArgs,
    /// Target node name or extended address (e.g. 0x00124b0000000002).
    #[arg(long)]
    target: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and check its expectations.
    Run(Common),
    /// Active scan on the primary channels.
    Scan(AttackArgs),
    /// Make the target blink.
    Blink {
        #[command(flatten)]
        t: Targeted,
        /// Identify duration in seconds; 0 aborts a running blink.
        #[arg(long, default_value = "0xfffe", value_parser = parse_u16)]
        duration: u16,
    },
    /// Reset the target to factory-new.
    Reset(Targeted),
    /// Move the target to another channel.
    DosChannel {
        #[command(flatten)]
        t: Targeted,
        #[arg(long, value_parser = parse_channel)]
        channel: u8,
        /// Network update identifier; defaults to one above the target's.
        #[arg(long, value_parser = parse_u8)]
        update_id: Option<u8>,
    },
    /// Join the target to a phantom network.
    DosJoin(Targeted),
    /// Take over the target with a key of the attacker's choice.
    Hijack {
        #[command(flatten)]
        t: Targeted,
        /// Network key for the attacker network; random when omitted.
        #[arg(long)]
        key: Option<Key128>,
    },
    /// Recover network keys from the attacker's capture.
    ExtractKey(AttackArgs),
    /// Send an encrypted application command.
    Inject {
        #[command(flatten)]
        attack: AttackArgs,
        /// `on`, `off`, `level:<n>` or `color:<hue>`.
        #[arg(long)]
        cmd: ClusterCommand,
        #[arg(long, default_value = "0xffff", value_parser = parse_u16)]
        dst: u16,
        /// Network key; defaults to one learned earlier in the run.
        #[arg(long)]
        key: Option<Key128>,
        #[arg(long, value_parser = parse_u16)]
        pan: Option<u16>,
        #[arg(long, value_parser = parse_channel)]
        channel: Option<u8>,
    },
}

fn parse_int(s: &str) -> Result<u64, String> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("`{s}`: {e}"))
}

fn parse_u16(s: &str) -> Result<u16, String> {
    u16::try_from(parse_int(s)?).map_err(|_| format!("`{s}` does not fit in 16 bits"))
}

fn parse_channel(s: &str) -> Result<u8, String> {
    let ch = parse_u8(s)?;
    if is_valid_channel(ch) {
        Ok(ch)
    } else {
        Err(format!("channel {ch} is outside 11..=26"))
    }
}

fn parse_u8(s: &str) -> Result<u8, String> {
    u8::try_from(parse_int(s)?).map_err(|_| format!("`{s}` does not fit in 8 bits"))
}

/// Failure of the command, mapped onto the exit status.
enum Failure {
    Usage(anyhow::Error),
    Attack,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn load(common: &Common) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(&common.scenario)
        .with_context(|| format!("reading {}", common.scenario.display()))?;
    let mut scenario = parse(&text).with_context(|| format!("in {}", common.scenario.display()))?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

fn write_out(runner: &Runner, out: Option<&Path>) -> anyhow::Result<()> {
    if let Some(dir) = out {
        runner
            .output()
            .write_to(dir)
            .with_context(|| format!("writing to {}", dir.display()))?;
    }
    Ok(())
}

fn run(common: &Common) -> Result<(), Failure> {
    let scenario = load(common)?;
    let mut runner = Runner::new(&scenario);
    runner.run_script();
    write_out(&runner, common.out.as_deref())?;
    let output = runner.output();
    print!("{}", output.report);
    if output.passed() {
        Ok(())
    } else {
        Err(Failure::Attack)
    }
}

fn attacker_name(scenario: &Scenario, requested: Option<&str>) -> anyhow::Result<String> {
    match requested {
        Some(name) => match scenario.node(name) {
            Some(n) if n.kind == NodeKind::Attacker => Ok(name.to_string()),
            _ => bail!("`{name}` is not an attacker node of the scenario"),
        },
        None => scenario
            .attacker()
            .map(|n| n.name.clone())
            .ok_or_else(|| anyhow!("the scenario has no attacker node")),
    }
}

fn target_name(scenario: &Scenario, runner: &Runner, target: &str) -> anyhow::Result<String> {
    if let Some(n) = scenario.node(target) {
        if n.kind == NodeKind::Attacker {
            bail!("`{target}` is an attacker, not a device");
        }
        return Ok(target.to_string());
    }
    let ext = parse_int(target)
        .map(ExtendedAddr)
        .map_err(|_| anyhow!("unknown target `{target}`"))?;
    scenario
        .nodes
        .iter()
        .filter(|n| n.kind != NodeKind::Attacker)
        .find(|n| {
            runner
                .node_id(&n.name)
                .is_some_and(|id| runner.sim.node(id).extended_addr == ext)
        })
        .map(|n| n.name.clone())
        .ok_or_else(|| anyhow!("no device with extended address {ext}"))
}

/// Runs the scenario's setup steps, then the single requested attack.
fn attack(
    args: &AttackArgs,
    target: Option<&str>,
    build: impl FnOnce(String, Option<String>) -> Action,
) -> Result<(), Failure> {
    let scenario = load(&args.common)?;
    let node = attacker_name(&scenario, args.attacker.as_deref())?;
    let mut runner = Runner::new(&scenario);
    let target = target
        .map(|t| target_name(&scenario, &runner, t))
        .transpose()?;
    let action = build(node, target);
    if matches!(action, Action::Hijack { .. } | Action::ExtractKey { .. })
        && scenario.master_key.is_none()
    {
        return Err(Failure::Usage(anyhow!(
            "`{}` needs the light-link master key; the scenario defines none",
            action.keyword()
        )));
    }
    runner.run_setup();
    let step = Step {
        at: runner.sim.now(),
        action,
        expect: None,
    };
    let outcome = runner.execute(&step).outcome.clone();
    write_out(&runner, args.common.out.as_deref())?;
    match &outcome {
        ActionOutcome::Attack(report) => print!("{report}"),
        ActionOutcome::Done { text, .. } => println!("{text}"),
        ActionOutcome::Failed { kind, message } => {
            if matches!(*kind, "master-key-required" | "no-network-key") {
                return Err(Failure::Usage(anyhow!("{message}")));
            }
            println!("verdict=failed ({kind})");
            println!("detail: {message}");
        }
    }
    if outcome.kind() == "success" {
        Ok(())
    } else {
        Err(Failure::Attack)
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => run(&common),
        Command::Scan(a) => attack(&a, None, |node, _| Action::Scan { node }),
        Command::ExtractKey(a) => attack(&a, None, |node, _| Action::ExtractKey { node }),
        Command::Blink { t, duration } => {
            attack(&t.attack, Some(&t.target), |node, target| Action::Blink {
                node,
                target: target.expect("target"),
                duration,
            })
        }
        Command::Reset(t) => attack(&t.attack, Some(&t.target), |node, target| Action::Reset {
            node,
            target: target.expect("target"),
        }),
        Command::DosChannel {
            t,
            channel,
            update_id,
        } => attack(&t.attack, Some(&t.target), |node, target| {
            Action::DosChannel {
                node,
                target: target.expect("target"),
                channel,
                update_id,
            }
        }),
        Command::DosJoin(t) => attack(&t.attack, Some(&t.target), |node, target| Action::DosJoin {
            node,
            target: target.expect("target"),
        }),
        Command::Hijack { t, key } => {
            attack(&t.attack, Some(&t.target), |node, target| Action::Hijack {
                node,
                target: target.expect("target"),
                key,
            })
        }
        Command::Inject {
            attack: a,
            cmd,
            dst,
            key,
            pan,
            channel,
        } => attack(&a, None, |node, _| Action::Inject {
            node,
            dst,
            command: cmd,
            key,
            pan,
            channel,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Attack) => ExitCode::from(2),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
