//! Simulation of ZigBee Light Link touchlink commissioning with
//! vendor-specific device models and an attack toolkit.
//!
//! * [`wire`]: frame types and the canonical byte layout.
//! * [`crypto`]: touchlink key transport and network-layer AES-CCM*.
//! * [`devices`]: bulb and bridge state machines plus initiator procedures.
//! * [`airsim`]: the discrete-event radio simulator.
//! * [`attacks`]: the attacker node and its procedures.
//! * [`scenario`]: scenario files, the script runner and report output.

pub mod airsim;
pub mod attacks;
pub mod crypto;
pub mod devices;
pub mod scenario;
pub mod wire;
