use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::*;
use crate::airsim::{NodeId, Role, Simulation};
use crate::attacks::{
    extract_all_network_keys, extract_network_key, AttackError, AttackReport, Attacker,
    AttackerConfig,
};
use crate::devices::touchlink::{
    bridge_touchlink_recovery, run_touchlink_join, send_user_command, CommissioningError,
    TargetFilter,
};
use crate::devices::{EndDevice, Initiator, NetworkParams};
use crate::wire::{ShortAddr, PRIMARY_CHANNELS};

/// Result of one executed step.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionOutcome {
    /// A non-attack action ran; `effect` is false when it changed nothing
    /// (e.g. a user command no device applied).
    Done {
        effect: bool,
        text: String,
    },
    Attack(AttackReport),
    Failed {
        kind: &'static str,
        message: String,
    },
}

impl ActionOutcome {
    /// One of [`OUTCOME_KINDS`].
    pub fn kind(&self) -> &'static str {
        match self {
            ActionOutcome::Done { effect: true, .. } => "success",
            ActionOutcome::Done { effect: false, .. } => "no-effect",
            ActionOutcome::Attack(r) if r.succeeded() => "success",
            ActionOutcome::Attack(_) => "no-effect",
            ActionOutcome::Failed { kind, .. } => kind,
        }
    }

    fn failed(kind: &'static str, message: impl ToString) -> Self {
        ActionOutcome::Failed {
            kind,
            message: message.to_string(),
        }
    }

    fn done(text: impl Into<String>) -> Self {
        ActionOutcome::Done {
            effect: true,
            text: text.into(),
        }
    }
}

impl From<AttackError> for ActionOutcome {
    fn from(e: AttackError) -> Self {
        let kind = match &e {
            AttackError::AckTimeout => "ack-timeout",
            AttackError::Rejected => "rejected",
            AttackError::MasterKeyRequired => "master-key-required",
            AttackError::UnknownTarget(_) | AttackError::TargetNotFound(_) => "target-not-found",
            AttackError::IncompleteCapture => "incomplete-capture",
            AttackError::MixedTransactions => "mixed-transactions",
            AttackError::Sim(_) => "error",
        };
        ActionOutcome::failed(kind, e)
    }
}

impl From<CommissioningError> for ActionOutcome {
    fn from(e: CommissioningError) -> Self {
        let kind = match &e {
            CommissioningError::NoDeviceFound => "no-device-found",
            CommissioningError::AckTimeout => "ack-timeout",
            CommissioningError::JoinRefused { .. } => "join-refused",
            CommissioningError::NotJoined => "not-joined",
            CommissioningError::NotInitiator | CommissioningError::Sim(_) => "error",
        };
        ActionOutcome::failed(kind, e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: Step,
    pub started_at: SimTime,
    pub outcome: ActionOutcome,
    /// Unmet expectations of this step.
    pub failures: Vec<String>,
}

/// The three artifacts of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub events_log: String,
    pub states: String,
    pub report: String,
    pub failures: Vec<String>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Writes `events.log`, `states.txt` and `report.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("events.log"), &self.events_log)?;
        std::fs::write(dir.join("states.txt"), &self.states)?;
        std::fs::write(dir.join("report.txt"), &self.report)
    }
}

/// A network key the attacker can use for injection.
#[derive(Clone, Debug)]
struct KnownNetwork {
    key: Key128,
    pan_id: u16,
    channel: u8,
}

/// Builds the simulation for a scenario and executes its steps.
pub struct Runner {
    pub sim: Simulation,
    scenario: Scenario,
    ids: BTreeMap<String, NodeId>,
    attackers: BTreeMap<String, Attacker>,
    known: BTreeMap<String, Vec<KnownNetwork>>,
    states: String,
    records: Vec<StepRecord>,
}

impl Runner {
    pub fn new(scenario: &Scenario) -> Self {
        let mut sim = Simulation::new(scenario.path_loss, scenario.seed);
        let master = scenario
            .master_key
            .unwrap_or_else(|| Key128::random(sim.rng()));

        let mut used_shorts: BTreeMap<&str, Vec<u16>> = BTreeMap::new();
        for n in &scenario.nodes {
            if let (Some(net), Some(s)) = (&n.network, n.short_addr) {
                used_shorts.entry(net).or_default().push(s);
            }
        }
        let mut ids = BTreeMap::new();
        let mut attackers = BTreeMap::new();
        for def in &scenario.nodes {
            let kind = match def.kind {
                NodeKind::Device(k) => k,
                NodeKind::Attacker => {
                    let config = AttackerConfig {
                        tx_power_dbm: def.tx_power_dbm,
                        spoof_extended_src: None,
                        master_key: scenario.master_key,
                        position: def.position,
                        ack_latency_us: def.ack_latency_us,
                        network_channel: def.network_channel,
                    };
                    let attacker = Attacker::deploy(&mut sim, &def.name, config);
                    ids.insert(def.name.clone(), attacker.node);
                    attackers.insert(def.name.clone(), attacker);
                    continue;
                }
            };
            let net = def.network.as_deref().map(|name| {
                let n = scenario.network(name).expect("validated network");
                let used = used_shorts.entry(name).or_default();
                let short = def.short_addr.unwrap_or_else(|| {
                    let s = if kind.is_bulb() {
                        (1..0xFFF8)
                            .find(|s| !used.contains(s))
                            .expect("free short address")
                    } else {
                        0
                    };
                    used.push(s);
                    s
                });
                NetworkParams {
                    pan_id: n.pan_id,
                    extended_pan_id: n.extended_pan_id,
                    channel: n.channel,
                    network_key: n.key,
                    network_update_id: n.update_id,
                    short_addr: ShortAddr(short),
                }
            });
            let role = if kind.is_bulb() {
                Role::EndDevice(match net {
                    Some(net) => EndDevice::joined(kind, master, net),
                    None => EndDevice::new(kind, master),
                })
            } else {
                let mut initiator = Initiator::new(kind, master, net.clone());
                if let Some(net_name) = &def.network {
                    let highest = used_shorts[net_name.as_str()]
                        .iter()
                        .max()
                        .copied()
                        .unwrap_or(0);
                    initiator.next_short_addr = highest + 1;
                }
                Role::Initiator(initiator)
            };
            let id = sim.add_node(&def.name, def.position, def.tx_power_dbm, role);
            sim.node_mut(id).auto_ack = def.auto_ack;
            ids.insert(def.name.clone(), id);
        }
        for def in &scenario.nodes {
            if let Some(spoof) = &def.spoof {
                let ext = sim.node(ids[spoof]).extended_addr;
                attackers
                    .get_mut(&def.name)
                    .expect("attacker")
                    .config
                    .spoof_extended_src = Some(ext);
            }
        }
        let mut runner = Runner {
            sim,
            scenario: scenario.clone(),
            ids,
            attackers,
            known: BTreeMap::new(),
            states: String::new(),
            records: Vec::new(),
        };
        runner.states.push_str("== initial\n");
        runner.write_states();
        runner
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.ids.get(name).copied()
    }

    pub fn attacker(&self, name: &str) -> Option<&Attacker> {
        self.attackers.get(name)
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Executes every script step in order.
    pub fn run_script(&mut self) {
        for step in self.scenario.script.clone() {
            self.execute(&step);
        }
    }

    /// Executes the deployment part of the script: everything except
    /// attacks and expectations.
    pub fn run_setup(&mut self) {
        for step in self.scenario.script.clone() {
            if !step.action.is_attack() && !matches!(step.action, Action::Expect { .. }) {
                self.execute(&step);
            }
        }
    }

    fn write_states(&mut self) {
        let snapshots: Vec<String> = self
            .sim
            .nodes()
            .filter_map(|(id, _)| self.sim.snapshot(id))
            .map(|s| s.to_string())
            .collect();
        for s in snapshots {
            let _ = writeln!(self.states, "{s}");
        }
    }

    /// Runs the simulation up to the step's time (never backwards) and
    /// executes it.
    pub fn execute(&mut self, step: &Step) -> &StepRecord {
        if step.at > self.sim.now() {
            self.sim.run_until(step.at);
        }
        let started_at = self.sim.now();
        let index = self.records.len() + 1;
        let _ = writeln!(
            self.states,
            "== step {index} t={started_at} {}",
            step.action
        );
        self.states.push_str("-- before\n");
        self.write_states();
        self.sim.note(format!("step {index}: {}", step.action));

        let mut failures = Vec::new();
        let outcome = self.perform(&step.action, &mut failures);
        self.states.push_str("-- after\n");
        self.write_states();

        if let Some(want) = &step.expect {
            if outcome.kind() != want {
                failures.push(format!("expected {want}, got {}", outcome.kind()));
            }
        }
        for f in &mut failures {
            *f = format!("step {index} ({}): {f}", step.action);
        }
        self.records.push(StepRecord {
            step: step.clone(),
            started_at,
            outcome,
            failures,
        });
        self.records.last().expect("just pushed")
    }

    // Failures short-circuit with `?` as the step's final outcome.
    #[allow(clippy::result_large_err)]
    fn target_ext(&self, name: &str) -> Result<crate::wire::ExtendedAddr, ActionOutcome> {
        self.ids
            .get(name)
            .map(|&id| self.sim.node(id).extended_addr)
            .ok_or_else(|| ActionOutcome::failed("target-not-found", format!("no node `{name}`")))
    }

    // Failures short-circuit with `?` as the step's final outcome.
    #[allow(clippy::result_large_err)]
    fn filter(&self, target: &TargetSpec) -> Result<TargetFilter, ActionOutcome> {
        Ok(match target {
            TargetSpec::Any => TargetFilter::Any,
            TargetSpec::FactoryNew => TargetFilter::FactoryNew,
            TargetSpec::Node(n) => TargetFilter::Extended(self.target_ext(n)?),
        })
    }

    fn name_of(&self, ext: crate::wire::ExtendedAddr) -> String {
        self.sim
            .find_by_extended(ext)
            .map_or_else(|| ext.to_string(), |id| self.sim.node(id).name.clone())
    }

    fn perform(&mut self, action: &Action, failures: &mut Vec<String>) -> ActionOutcome {
        match self.try_perform(action, failures) {
            Ok(o) | Err(o) => o,
        }
    }

    // Failures short-circuit with `?` as the step's final outcome.
    #[allow(clippy::result_large_err)]
    fn try_perform(
        &mut self,
        action: &Action,
        failures: &mut Vec<String>,
    ) -> Result<ActionOutcome, ActionOutcome> {
        let node = self.ids[action.node()];
        let now = self.sim.now();
        Ok(match action {
            Action::PressButton { .. } => {
                let initiator = self.sim.initiator_mut(node).expect("validated initiator");
                initiator
                    .press_button(now)
                    .map_err(|e| ActionOutcome::failed("unsupported", e))?;
                ActionOutcome::done("button pressed")
            }
            Action::TouchlinkJoin { target, .. } => {
                let filter = self.filter(target)?;
                let join = run_touchlink_join(&mut self.sim, node, filter)?;
                ActionOutcome::done(format!(
                    "joined {} short={} transaction=0x{:08x} frames={}",
                    self.name_of(join.target),
                    join.short_addr,
                    join.transaction_id,
                    join.frames.len()
                ))
            }
            Action::UserCommand { dst, command, .. } => {
                let delivery = send_user_command(&mut self.sim, node, ShortAddr(*dst), *command)?;
                let names = |ids: &mut dyn Iterator<Item = NodeId>| {
                    ids.map(|id| self.sim.node(id).name.clone())
                        .collect::<Vec<_>>()
                        .join(",")
                };
                let applied = names(&mut delivery.applied_by.iter().copied());
                let dropped = delivery
                    .drops
                    .iter()
                    .map(|(id, r)| format!("{}:{r}", self.sim.node(*id).name))
                    .collect::<Vec<_>>()
                    .join(",");
                ActionOutcome::Done {
                    effect: !delivery.applied_by.is_empty(),
                    text: format!("{command} applied_by=[{applied}] dropped=[{dropped}]"),
                }
            }
            Action::Recover { target, .. } => {
                let filter = self.filter(target)?;
                let r = bridge_touchlink_recovery(&mut self.sim, node, filter)?;
                ActionOutcome::done(format!(
                    "recovered {} adopted_target_settings={} channel {} -> {} update_id {} -> {}",
                    self.name_of(r.target),
                    r.adopted_target_settings,
                    r.before.channel,
                    r.after.channel,
                    r.before.network_update_id,
                    r.after.network_update_id
                ))
            }
            Action::PhysicalReset { .. } => {
                let device = self.sim.end_device_mut(node).expect("validated bulb");
                device
                    .physical_reset()
                    .map_err(|e| ActionOutcome::failed("unsupported", e))?;
                self.sim.sync_channel(node);
                ActionOutcome::done("reset to factory-new by hand")
            }
            Action::Listen {
                node: name,
                channel,
            } => {
                self.attackers[name].listen(&mut self.sim, *channel);
                ActionOutcome::done(format!("listening on channel {channel}"))
            }
            Action::Scan { node: name } => {
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let found = attacker
                    .active_scan(&mut self.sim, &PRIMARY_CHANNELS)
                    .map_err(ActionOutcome::from)?;
                let list = found
                    .iter()
                    .map(|d| format!("{}@{}", self.name_of(d.extended_addr), d.channel))
                    .collect::<Vec<_>>()
                    .join(",");
                ActionOutcome::Done {
                    effect: !found.is_empty(),
                    text: format!("found {} [{list}]", found.len()),
                }
            }
            Action::Blink {
                node: name,
                target,
                duration,
            } => {
                let ext = self.target_ext(target)?;
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let found = attacker.locate(&mut self.sim, ext)?;
                ActionOutcome::Attack(attacker.blink_attack(&mut self.sim, &found, *duration)?)
            }
            Action::Reset { node: name, target } => {
                let ext = self.target_ext(target)?;
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let found = attacker.locate(&mut self.sim, ext)?;
                let report = attacker.reset_attack(&mut self.sim, &found)?;
                ActionOutcome::Attack(report)
            }
            Action::DosChannel {
                node: name,
                target,
                channel,
                update_id,
            } => {
                let ext = self.target_ext(target)?;
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let found = attacker.locate(&mut self.sim, ext)?;
                let report = match update_id {
                    Some(u) => attacker.dos_channel_change_with_update_id(
                        &mut self.sim,
                        &found,
                        *channel,
                        *u,
                    ),
                    None => attacker.dos_channel_change(&mut self.sim, &found, *channel),
                }?;
                ActionOutcome::Attack(report)
            }
            Action::DosJoin { node: name, target } => {
                let ext = self.target_ext(target)?;
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let found = attacker.locate(&mut self.sim, ext)?;
                ActionOutcome::Attack(attacker.dos_join_phantom(&mut self.sim, &found)?)
            }
            Action::Hijack {
                node: name,
                target,
                key,
            } => {
                let ext = self.target_ext(target)?;
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                if attacker.config.master_key.is_none() {
                    return Err(AttackError::MasterKeyRequired.into());
                }
                let key = key.unwrap_or_else(|| Key128::random(self.sim.rng()));
                let found = attacker.locate(&mut self.sim, ext)?;
                let report = attacker.hijack(&mut self.sim, &found, key)?;
                if report.succeeded() {
                    let network = KnownNetwork {
                        key,
                        pan_id: attacker.network.pan_id,
                        channel: attacker.network.channel.unwrap_or(found.channel),
                    };
                    self.known.entry(name.clone()).or_default().push(network);
                }
                ActionOutcome::Attack(report)
            }
            Action::ExtractKey { node: name } => {
                let attacker = &self.attackers[name];
                let master = attacker
                    .config
                    .master_key
                    .ok_or(AttackError::MasterKeyRequired)?;
                let capture = attacker.capture(&self.sim);
                let keys = extract_all_network_keys(capture, &master);
                if keys.is_empty() {
                    return Err(extract_network_key(capture, &master)
                        .expect_err("no complete transaction")
                        .into());
                }
                let frames_received = capture.len();
                let detail = keys
                    .iter()
                    .map(|k| {
                        format!(
                            "transaction=0x{:08x} target={} key={} pan=0x{:04x} channel={}",
                            k.transaction_id,
                            self.name_of(k.target),
                            k.key,
                            k.pan_id,
                            k.channel
                        )
                    })
                    .collect::<Vec<_>>()
                    .join("; ");
                let last = keys.last().expect("non-empty");
                let report = AttackReport {
                    attack: "extract-key",
                    target: self.name_of(last.target),
                    frames_sent: 0,
                    frames_received,
                    verdict: crate::attacks::Verdict::Success,
                    detail,
                    delta: Vec::new(),
                    effective_identify_s: None,
                    key: Some(last.key),
                };
                let known = self.known.entry(name.clone()).or_default();
                known.extend(keys.iter().map(|k| KnownNetwork {
                    key: k.key,
                    pan_id: k.pan_id,
                    channel: k.channel,
                }));
                ActionOutcome::Attack(report)
            }
            Action::Inject {
                node: name,
                dst,
                command,
                key,
                pan,
                channel,
            } => {
                let known = self.known.get(name).and_then(|k| k.last()).cloned();
                let key = key.or(known.as_ref().map(|k| k.key)).ok_or_else(|| {
                    ActionOutcome::failed("no-network-key", "no network key known or given")
                })?;
                let pan = pan.or(known.as_ref().map(|k| k.pan_id)).ok_or_else(|| {
                    ActionOutcome::failed("no-network-key", "PAN of the network unknown")
                })?;
                let channel = channel
                    .or(known.as_ref().map(|k| k.channel))
                    .unwrap_or(self.sim.node(node).channel);
                let attacker = self.attackers.get_mut(name).expect("validated attacker");
                let report = attacker.inject_command(
                    &mut self.sim,
                    &key,
                    pan,
                    channel,
                    *command,
                    ShortAddr(*dst),
                )?;
                ActionOutcome::Attack(report)
            }
            Action::Expect { fields, .. } => {
                let snapshot = self.sim.snapshot(node).expect("validated device");
                for (k, want) in fields {
                    let got = snapshot.get(k).unwrap_or("-");
                    if got != want {
                        failures.push(format!("{k}: expected {want}, found {got}"));
                    }
                }
                ActionOutcome::Done {
                    effect: failures.is_empty(),
                    text: format!("checked {} field(s)", fields.len()),
                }
            }
        })
    }

    /// Renders all artifacts produced so far.
    pub fn output(&self) -> RunOutput {
        let mut report = String::new();
        let mut failures = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            let _ = writeln!(
                report,
                "[step {}] t={} {}",
                i + 1,
                r.started_at,
                r.step.action
            );
            let _ = writeln!(report, "outcome: {}", r.outcome.kind());
            match &r.outcome {
                ActionOutcome::Done { text, .. } => {
                    let _ = writeln!(report, "detail: {text}");
                }
                ActionOutcome::Attack(a) => report.push_str(&a.to_string()),
                ActionOutcome::Failed { message, .. } => {
                    let _ = writeln!(report, "error: {message}");
                }
            }
            for f in &r.failures {
                let _ = writeln!(report, "FAILED: {f}");
            }
            report.push('\n');
            failures.extend(r.failures.iter().cloned());
        }
        let _ = writeln!(
            report,
            "result: {} ({} step(s), {} failure(s))",
            if failures.is_empty() { "pass" } else { "fail" },
            self.records.len(),
            failures.len()
        );
        RunOutput {
            events_log: self.sim.log_text(),
            states: self.states.clone(),
            report,
            failures,
        }
    }
}

/// Parses, runs and renders a scenario in one go.
pub fn run_scenario(scenario: &Scenario) -> RunOutput {
    let mut runner = Runner::new(scenario);
    runner.run_script();
    runner.output()
}
