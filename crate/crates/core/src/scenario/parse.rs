use std::collections::BTreeSet;
use std::fmt;

use super::*;
use crate::wire::{is_valid_channel, CHANNEL_MAX, CHANNEL_MIN};

/// A whitespace-separated word and its 1-based column.
#[derive(Copy, Clone)]
struct Token<'a> {
    column: usize,
    text: &'a str,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    column: s + 1,
                    text: &line[s..i],
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token {
            column: s + 1,
            text: &line[s..],
        });
    }
    out
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code)
}

#[derive(Copy, Clone, PartialEq)]
enum Section {
    Top,
    PathLoss,
    Networks,
    Nodes,
    Script,
}

struct Parser {
    line: usize,
}

impl Parser {
    fn syntax(&self, column: usize, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn invalid(&self, field: &str, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Validation {
            line: self.line,
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn int<T: TryFrom<u64>>(&self, tok: Token<'_>, value: &str) -> Result<T, ScenarioError> {
        let raw = match value
            .strip_prefix("0x")
            .or_else(|| value.strip_prefix("0X"))
        {
            Some(hex) => u64::from_str_radix(hex, 16),
            None => value.parse::<u64>(),
        }
        .map_err(|_| self.syntax(tok.column, format!("expected an integer, found `{value}`")))?;
        T::try_from(raw)
            .map_err(|_| self.syntax(tok.column, format!("integer `{value}` is out of range")))
    }

    fn float(&self, tok: Token<'_>, value: &str) -> Result<f64, ScenarioError> {
        value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.syntax(tok.column, format!("expected a number, found `{value}`")))
    }

    fn key(&self, tok: Token<'_>, value: &str) -> Result<Key128, ScenarioError> {
        value.parse().map_err(|_| {
            self.syntax(
                tok.column,
                format!("expected 32 hex digits, found `{value}`"),
            )
        })
    }

    fn channel(&self, tok: Token<'_>, field: &str, value: &str) -> Result<u8, ScenarioError> {
        let ch: u8 = self.int(tok, value)?;
        if !is_valid_channel(ch) {
            return Err(self.invalid(
                field,
                format!("channel {ch} is outside {CHANNEL_MIN}..={CHANNEL_MAX}"),
            ));
        }
        Ok(ch)
    }

    fn time(&self, tok: Token<'_>) -> Result<SimTime, ScenarioError> {
        let t = tok.text;
        let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
        let (digits, unit) = t.split_at(split);
        let scale = match unit {
            "s" => 1_000_000,
            "ms" => 1_000,
            "us" => 1,
            _ => {
                return Err(self.syntax(
                    tok.column,
                    format!("expected a time like 5s, 20ms or 7us, found `{t}`"),
                ))
            }
        };
        let n: u64 = digits
            .parse()
            .map_err(|_| self.syntax(tok.column, format!("bad time `{t}`")))?;
        n.checked_mul(scale)
            .ok_or_else(|| self.syntax(tok.column, format!("time `{t}` overflows")))
    }

    fn pair<'a>(&self, tok: Token<'a>) -> Result<(&'a str, &'a str), ScenarioError> {
        tok.text
            .split_once('=')
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| {
                self.syntax(
                    tok.column,
                    format!("expected key=value, found `{}`", tok.text),
                )
            })
    }

    fn name<'a>(
        &self,
        tok: Option<Token<'a>>,
        what: &str,
        column: usize,
    ) -> Result<Token<'a>, ScenarioError> {
        let tok = tok.ok_or_else(|| self.syntax(column, format!("missing {what}")))?;
        if tok.text.contains('=')
            || !tok
                .text
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(self.syntax(tok.column, format!("bad {what} `{}`", tok.text)));
        }
        Ok(tok)
    }
}

/// Parses and validates a scenario.
pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
    let mut p = Parser { line: 0 };
    let mut section = Section::Top;
    let mut seed = None;
    let mut master_key = None;
    let mut path_loss = PathLossModel::default();
    let mut networks: Vec<NetworkDef> = Vec::new();
    let mut nodes: Vec<NodeDef> = Vec::new();
    let mut script = Vec::new();
    let mut last_at = 0;
    // Line of each step's node reference for late validation.
    let mut step_lines = Vec::new();
    let mut node_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        p.line = idx + 1;
        let line = strip_comment(raw);
        let toks = tokens(line);
        let Some(&first) = toks.first() else {
            continue;
        };
        if first.text.starts_with('[') {
            if toks.len() > 1 || !first.text.ends_with(']') {
                return Err(p.syntax(first.column, "malformed section header"));
            }
            section = match first.text {
                "[path_loss]" => Section::PathLoss,
                "[networks]" => Section::Networks,
                "[nodes]" => Section::Nodes,
                "[script]" => Section::Script,
                other => return Err(p.syntax(first.column, format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::Top | Section::PathLoss => {
                let (key, value) = line
                    .split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .filter(|(k, v)| {
                        !k.is_empty() && !v.is_empty() && !v.contains(char::is_whitespace)
                    })
                    .ok_or_else(|| p.syntax(first.column, "expected `key = value`"))?;
                let vt = Token {
                    // `value` is a subslice of `line`.
                    column: value.as_ptr() as usize - line.as_ptr() as usize + 1,
                    text: value,
                };
                match (section, key) {
                    (Section::Top, "seed") => seed = Some(p.int(vt, value)?),
                    (Section::Top, "master_key") => master_key = Some(p.key(vt, value)?),
                    (Section::PathLoss, "reference_loss_db") => {
                        path_loss.reference_loss_db = p.float(vt, value)?
                    }
                    (Section::PathLoss, "exponent") => path_loss.exponent = p.float(vt, value)?,
                    (Section::PathLoss, "noise_floor_dbm") => {
                        path_loss.noise_floor_dbm = p.float(vt, value)?
                    }
                    _ => return Err(p.syntax(first.column, format!("unknown key `{key}`"))),
                }
                if section == Section::PathLoss {
                    path_loss.validate().map_err(|m| p.invalid(key, m))?;
                }
            }
            Section::Networks => {
                let name = p.name(Some(first), "network name", 1)?;
                if networks.iter().any(|n| n.name == name.text) {
                    return Err(p.invalid("name", format!("duplicate network `{}`", name.text)));
                }
                let (mut channel, mut pan_id, mut extended_pan_id, mut key, mut update_id) =
                    (None, None, None, None, 0);
                for &tok in &toks[1..] {
                    let (k, v) = p.pair(tok)?;
                    match k {
                        "channel" => channel = Some(p.channel(tok, k, v)?),
                        "pan" => pan_id = Some(p.int(tok, v)?),
                        "epan" => extended_pan_id = Some(p.int(tok, v)?),
                        "key" => key = Some(p.key(tok, v)?),
                        "update_id" => update_id = p.int(tok, v)?,
                        _ => return Err(p.syntax(tok.column, format!("unknown network key `{k}`"))),
                    }
                }
                let missing = |f: &str| p.invalid(f, "required");
                let pan_id: u16 = pan_id.ok_or_else(|| missing("pan"))?;
                if pan_id == 0xFFFF {
                    return Err(p.invalid("pan", "0xffff is the broadcast PAN"));
                }
                networks.push(NetworkDef {
                    name: name.text.to_string(),
                    channel: channel.ok_or_else(|| missing("channel"))?,
                    pan_id,
                    extended_pan_id: extended_pan_id.ok_or_else(|| missing("epan"))?,
                    key: key.ok_or_else(|| missing("key"))?,
                    update_id,
                });
            }
            Section::Nodes => {
                let name = p.name(Some(first), "node name", 1)?;
                if nodes.iter().any(|n| n.name == name.text) {
                    return Err(p.invalid("name", format!("duplicate node `{}`", name.text)));
                }
                let kind_tok = p.name(toks.get(1).copied(), "node kind", line.len() + 1)?;
                let kind = match kind_tok.text {
                    "attacker" => NodeKind::Attacker,
                    other => NodeKind::Device(other.parse().map_err(|_| {
                        p.syntax(kind_tok.column, format!("unknown node kind `{other}`"))
                    })?),
                };
                let mut node = NodeDef::new(name.text, kind);
                let is_attacker = kind == NodeKind::Attacker;
                let is_initiator = matches!(kind, NodeKind::Device(k) if !k.is_bulb());
                for &tok in &toks[2..] {
                    let (k, v) = p.pair(tok)?;
                    let only = |ok: bool, who: &str| {
                        if ok {
                            Ok(())
                        } else {
                            Err(p.invalid(k, format!("only {who} accept `{k}`")))
                        }
                    };
                    match k {
                        "pos" => {
                            let (x, y) = v
                                .split_once(',')
                                .ok_or_else(|| p.syntax(tok.column, "expected pos=x,y"))?;
                            node.position = Position::new(p.float(tok, x)?, p.float(tok, y)?);
                        }
                        "tx" => node.tx_power_dbm = p.float(tok, v)?,
                        "network" => {
                            only(!is_attacker, "devices")?;
                            node.network = Some(v.to_string());
                        }
                        "short" => {
                            only(!is_attacker, "devices")?;
                            let s: u16 = p.int(tok, v)?;
                            if s >= 0xFFF8 {
                                return Err(p.invalid(k, format!("0x{s:04x} is reserved")));
                            }
                            node.short_addr = Some(s);
                        }
                        "auto_ack" => {
                            only(is_initiator, "initiators")?;
                            node.auto_ack = match v {
                                "true" => true,
                                "false" => false,
                                _ => return Err(p.syntax(tok.column, "expected true or false")),
                            };
                        }
                        "spoof" => {
                            only(is_attacker, "attackers")?;
                            node.spoof = Some(v.to_string());
                        }
                        "ack_latency" => {
                            only(is_attacker, "attackers")?;
                            node.ack_latency_us = Some(p.int(tok, v)?);
                        }
                        "network_channel" => {
                            only(is_attacker, "attackers")?;
                            node.network_channel = Some(p.channel(tok, k, v)?);
                        }
                        _ => return Err(p.syntax(tok.column, format!("unknown node key `{k}`"))),
                    }
                }
                if node.short_addr.is_some() && node.network.is_none() {
                    return Err(p.invalid("short", "a short address needs a network"));
                }
                node_lines.push(p.line);
                nodes.push(node);
            }
            Section::Script => {
                if first.text != "at" {
                    return Err(p.syntax(first.column, "script lines start with `at <time>`"));
                }
                let time_tok = toks
                    .get(1)
                    .copied()
                    .ok_or_else(|| p.syntax(line.len() + 1, "missing time"))?;
                let at = p.time(time_tok)?;
                if at < last_at {
                    return Err(p.invalid("at", "script times must not decrease"));
                }
                last_at = at;
                let step = parse_step(&p, at, &toks[2..], line.len() + 1)?;
                step_lines.push(p.line);
                script.push(step);
            }
        }
    }

    let scenario = Scenario {
        seed: seed.unwrap_or(0),
        master_key,
        path_loss,
        networks,
        nodes,
        script,
    };
    validate(&scenario, &node_lines, &step_lines)?;
    Ok(scenario)
}

fn parse_step(
    p: &Parser,
    at: SimTime,
    toks: &[Token<'_>],
    eol: usize,
) -> Result<Step, ScenarioError> {
    let verb = toks
        .first()
        .copied()
        .ok_or_else(|| p.syntax(eol, "missing action"))?;
    let node = p
        .name(toks.get(1).copied(), "node name", eol)?
        .text
        .to_string();
    let mut expect = None;
    let mut args: Vec<(Token<'_>, &str, &str)> = Vec::new();
    for &tok in &toks[2..] {
        let (k, v) = p.pair(tok)?;
        if k == "expect" && verb.text != "expect" {
            if !OUTCOME_KINDS.contains(&v) {
                return Err(p.invalid("expect", format!("unknown outcome `{v}`")));
            }
            expect = Some(v.to_string());
        } else {
            args.push((tok, k, v));
        }
    }

    let allowed: &[&str] = match verb.text {
        "press_button" | "physical_reset" | "scan" | "extract_key" => &[],
        "touchlink_join" | "recover" => &["target"],
        "user_command" => &["cmd", "dst"],
        "listen" => &["channel"],
        "blink" => &["target", "duration"],
        "reset" | "dos_join" => &["target"],
        "dos_channel" => &["target", "channel", "update_id"],
        "hijack" => &["target", "key"],
        "inject" => &["cmd", "dst", "key", "pan", "channel"],
        "expect" => SNAPSHOT_KEYS,
        other => return Err(p.syntax(verb.column, format!("unknown action `{other}`"))),
    };
    for (tok, k, _) in &args {
        if !allowed.contains(k) {
            return Err(p.syntax(tok.column, format!("`{}` does not take `{k}`", verb.text)));
        }
        if args.iter().filter(|(_, k2, _)| k2 == k).count() > 1 {
            return Err(p.syntax(tok.column, format!("`{k}` given twice")));
        }
    }
    let get = |key: &str| {
        args.iter()
            .find(|(_, k, _)| *k == key)
            .map(|(t, _, v)| (*t, *v))
    };
    let required = |key: &str| {
        get(key).ok_or_else(|| p.invalid(key, format!("`{}` requires {key}=", verb.text)))
    };
    let target_spec = || match get("target") {
        None | Some((_, "any")) => TargetSpec::Any,
        Some((_, "factory-new")) => TargetSpec::FactoryNew,
        Some((_, name)) => TargetSpec::Node(name.to_string()),
    };
    let target = || required("target").map(|(_, v)| v.to_string());
    let command = || -> Result<ClusterCommand, ScenarioError> {
        let (tok, v) = required("cmd")?;
        v.parse().map_err(|e: String| p.syntax(tok.column, e))
    };
    let dst = || -> Result<u16, ScenarioError> {
        get("dst").map_or(Ok(0xFFFF), |(tok, v)| p.int(tok, v))
    };
    let opt_key = || get("key").map(|(tok, v)| p.key(tok, v)).transpose();

    let action = match verb.text {
        "press_button" => Action::PressButton { node },
        "physical_reset" => Action::PhysicalReset { node },
        "scan" => Action::Scan { node },
        "extract_key" => Action::ExtractKey { node },
        "touchlink_join" => Action::TouchlinkJoin {
            node,
            target: target_spec(),
        },
        "recover" => Action::Recover {
            node,
            target: target_spec(),
        },
        "user_command" => Action::UserCommand {
            node,
            dst: dst()?,
            command: command()?,
        },
        "listen" => {
            let (tok, v) = required("channel")?;
            Action::Listen {
                node,
                channel: p.channel(tok, "channel", v)?,
            }
        }
        "blink" => Action::Blink {
            node,
            target: target()?,
            duration: get("duration").map_or(Ok(0xFFFE), |(tok, v)| p.int(tok, v))?,
        },
        "reset" => Action::Reset {
            node,
            target: target()?,
        },
        "dos_join" => Action::DosJoin {
            node,
            target: target()?,
        },
        "dos_channel" => {
            let (tok, v) = required("channel")?;
            Action::DosChannel {
                node,
                target: target()?,
                channel: p.channel(tok, "channel", v)?,
                update_id: get("update_id").map(|(tok, v)| p.int(tok, v)).transpose()?,
            }
        }
        "hijack" => Action::Hijack {
            node,
            target: target()?,
            key: opt_key()?,
        },
        "inject" => Action::Inject {
            node,
            dst: dst()?,
            command: command()?,
            key: opt_key()?,
            pan: get("pan").map(|(tok, v)| p.int(tok, v)).transpose()?,
            channel: get("channel")
                .map(|(tok, v)| p.channel(tok, "channel", v))
                .transpose()?,
        },
        "expect" => {
            if args.is_empty() {
                return Err(p.syntax(eol, "expect needs at least one key=value"));
            }
            Action::Expect {
                node,
                fields: args
                    .iter()
                    .map(|(_, k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            }
        }
        _ => unreachable!("verb checked above"),
    };
    Ok(Step { at, action, expect })
}

fn validate(s: &Scenario, node_lines: &[usize], step_lines: &[usize]) -> Result<(), ScenarioError> {
    let err = |line: usize, field: &str, message: String| ScenarioError::Validation {
        line,
        field: field.to_string(),
        message,
    };
    let mut shorts = BTreeSet::new();
    for (node, &line) in s.nodes.iter().zip(node_lines) {
        if let Some(net) = &node.network {
            if s.network(net).is_none() {
                return Err(err(line, "network", format!("unknown network `{net}`")));
            }
            if let Some(short) = node.short_addr {
                if !shorts.insert((net.clone(), short)) {
                    return Err(err(
                        line,
                        "short",
                        format!("0x{short:04x} used twice in `{net}`"),
                    ));
                }
            }
        }
        if let Some(spoof) = &node.spoof {
            if !matches!(s.node(spoof), Some(n) if n.kind != NodeKind::Attacker) {
                return Err(err(
                    line,
                    "spoof",
                    format!("`{spoof}` is not a device node"),
                ));
            }
        }
    }

    #[derive(PartialEq)]
    enum Need {
        Initiator,
        Bulb,
        Attacker,
        Device,
    }
    for (step, &line) in s.script.iter().zip(step_lines) {
        let name = step.action.node();
        let node = s
            .node(name)
            .ok_or_else(|| err(line, "node", format!("unknown node `{name}`")))?;
        let need = match &step.action {
            Action::PressButton { .. }
            | Action::TouchlinkJoin { .. }
            | Action::UserCommand { .. }
            | Action::Recover { .. } => Need::Initiator,
            Action::PhysicalReset { .. } => Need::Bulb,
            Action::Expect { .. } => Need::Device,
            _ => Need::Attacker,
        };
        let ok = match (need, node.kind) {
            (Need::Attacker, k) => k == NodeKind::Attacker,
            (Need::Initiator, NodeKind::Device(k)) => !k.is_bulb(),
            (Need::Bulb, NodeKind::Device(k)) => k.is_bulb(),
            (Need::Device, NodeKind::Device(_)) => true,
            _ => false,
        };
        if !ok {
            return Err(err(
                line,
                "node",
                format!(
                    "`{}` cannot run on {} node `{name}`",
                    step.action.keyword(),
                    node.kind
                ),
            ));
        }
        let target = match &step.action {
            Action::TouchlinkJoin {
                target: TargetSpec::Node(t),
                ..
            }
            | Action::Recover {
                target: TargetSpec::Node(t),
                ..
            }
            | Action::Blink { target: t, .. }
            | Action::Reset { target: t, .. }
            | Action::DosChannel { target: t, .. }
            | Action::DosJoin { target: t, .. }
            | Action::Hijack { target: t, .. } => Some(t),
            _ => None,
        };
        if let Some(t) = target {
            if !matches!(s.node(t), Some(n) if n.kind != NodeKind::Attacker) {
                return Err(err(line, "target", format!("`{t}` is not a device node")));
            }
        }
        if let Action::Expect { node: n, fields } = &step.action {
            let bulb =
                matches!(s.node(n).map(|d| d.kind), Some(NodeKind::Device(k)) if k.is_bulb());
            for (k, _) in fields {
                if !bulb && ["lamp", "hue", "brightness", "identify_until"].contains(&k.as_str()) {
                    return Err(err(line, k, format!("`{n}` has no light")));
                }
            }
        }
    }
    Ok(())
}

fn opt<T: fmt::Display>(f: &mut fmt::Formatter<'_>, key: &str, value: &Option<T>) -> fmt::Result {
    match value {
        Some(v) => write!(f, " {key}={v}"),
        None => Ok(()),
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {} ", format_time(self.at))?;
        self.action.fmt(f)?;
        opt(f, "expect", &self.expect)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.keyword(), self.node())?;
        match self {
            Action::PressButton { .. }
            | Action::PhysicalReset { .. }
            | Action::Scan { .. }
            | Action::ExtractKey { .. } => Ok(()),
            Action::TouchlinkJoin { target, .. } | Action::Recover { target, .. } => {
                write!(f, " target={target}")
            }
            Action::UserCommand { dst, command, .. } => write!(f, " cmd={command} dst=0x{dst:04x}"),
            Action::Listen { channel, .. } => write!(f, " channel={channel}"),
            Action::Blink {
                target, duration, ..
            } => write!(f, " target={target} duration=0x{duration:04x}"),
            Action::Reset { target, .. } | Action::DosJoin { target, .. } => {
                write!(f, " target={target}")
            }
            Action::DosChannel {
                target,
                channel,
                update_id,
                ..
            } => {
                write!(f, " target={target} channel={channel}")?;
                opt(f, "update_id", update_id)
            }
            Action::Hijack { target, key, .. } => {
                write!(f, " target={target}")?;
                opt(f, "key", key)
            }
            Action::Inject {
                dst,
                command,
                key,
                pan,
                channel,
                ..
            } => {
                write!(f, " cmd={command} dst=0x{dst:04x}")?;
                opt(f, "key", key)?;
                opt(f, "pan", &pan.map(|p| format!("0x{p:04x}")))?;
                opt(f, "channel", channel)
            }
            Action::Expect { fields, .. } => {
                for (k, v) in fields {
                    write!(f, " {k}={v}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Scenario {
    /// Canonical text form; parsing it yields an equal scenario.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed = {}", self.seed)?;
        if let Some(k) = &self.master_key {
            writeln!(f, "master_key = {k}")?;
        }
        writeln!(f, "\n[path_loss]")?;
        writeln!(
            f,
            "reference_loss_db = {}",
            self.path_loss.reference_loss_db
        )?;
        writeln!(f, "exponent = {}", self.path_loss.exponent)?;
        writeln!(f, "noise_floor_dbm = {}", self.path_loss.noise_floor_dbm)?;
        writeln!(f, "\n[networks]")?;
        for n in &self.networks {
            writeln!(
                f,
                "{} channel={} pan=0x{:04x} epan=0x{:016x} key={} update_id={}",
                n.name, n.channel, n.pan_id, n.extended_pan_id, n.key, n.update_id
            )?;
        }
        writeln!(f, "\n[nodes]")?;
        for n in &self.nodes {
            write!(
                f,
                "{} {} pos={},{} tx={}",
                n.name, n.kind, n.position.x, n.position.y, n.tx_power_dbm
            )?;
            opt(f, "network", &n.network)?;
            opt(f, "short", &n.short_addr.map(|s| format!("0x{s:04x}")))?;
            if !n.auto_ack {
                write!(f, " auto_ack=false")?;
            }
            opt(f, "spoof", &n.spoof)?;
            opt(f, "ack_latency", &n.ack_latency_us)?;
            opt(f, "network_channel", &n.network_channel)?;
            writeln!(f)?;
        }
        writeln!(f, "\n[script]")?;
        for step in &self.script {
            writeln!(f, "{step}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
seed = 9
master_key = 000102030405060708090a0b0c0d0e0f

[networks]
home channel=15 pan=0x1234 epan=0x1122334455667788 key=ffeeddccbbaa99887766554433221100

[nodes]
bridge hue-bridge network=home pos=0,0
bulb hue-bulb network=home short=0x0002 pos=1.5,0  # joined
fresh lightify-bulb pos=1,1
attacker attacker pos=20,0 tx=26 spoof=bridge

[script]
at 0s press_button bridge
at 1s touchlink_join bridge target=factory-new expect=success
at 2500ms blink attacker target=bulb duration=0xfffe
at 3s expect bulb lamp=on
";

    #[test]
    fn parses_sample() {
        let s = parse(SAMPLE).unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.nodes.len(), 4);
        assert_eq!(s.nodes[1].short_addr, Some(2));
        assert_eq!(s.nodes[1].position, Position::new(1.5, 0.0));
        assert_eq!(s.script[2].at, 2_500_000);
        assert_eq!(s.script[1].expect.as_deref(), Some("success"));
        assert_eq!(
            s.script[1].action,
            Action::TouchlinkJoin {
                node: "bridge".into(),
                target: TargetSpec::FactoryNew
            }
        );
    }

    #[test]
    fn canonical_form_round_trips() {
        let s = parse(SAMPLE).unwrap();
        let text = s.to_string();
        assert_eq!(parse(&text).unwrap(), s);
        assert_eq!(parse(&text).unwrap().to_string(), text);
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = parse("[nodes]\nbulb hue-bulb pos=1,1 colour=red\n").unwrap_err();
        match err {
            ScenarioError::Parse { line, column, .. } => assert_eq!((line, column), (2, 23)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn channel_out_of_range_names_the_field() {
        let err =
            parse("[networks]\nn channel=27 pan=1 epan=1 key=00000000000000000000000000000000\n")
                .unwrap_err();
        assert_eq!(err.field(), Some("channel"));
    }

    #[test]
    fn rejects_actions_on_wrong_node_kind() {
        let err = parse("[nodes]\nb hue-bulb\n[script]\nat 0s press_button b\n").unwrap_err();
        assert_eq!(err.field(), Some("node"));
    }
}
