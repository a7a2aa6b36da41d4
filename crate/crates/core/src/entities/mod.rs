//! Registry, datacenter and broker entities and the messages they exchange.
//!
//! Protocol: every datacenter registers with the registry at start-up; the
//! broker queries the registry, picks the first suggested datacenter, sends
//! one `CreateVm` per requested VM (each answered by a `VmAck`), submits task
//! groups at their due times and receives one `TaskDone` per task. With
//! `destroy_on_completion`, a VM is destroyed once all tasks bound to it are
//! resolved.

mod broker;
mod cis;
mod datacenter;
mod message;

pub use broker::{
    Binding, Broker, BrokerPlan, CompletionRecord, PlanError, TaskGroup, TaskOutcome,
};
pub use cis::{summarize, CisEntry, CisRegistry};
pub use datacenter::Datacenter;
pub use message::{
    AckOutcome, CisCandidate, DatacenterSummary, HostShape, Message, TaskReport, Timer,
    VmRequirement,
};

use thiserror::Error;

use crate::accounting::AccountingError;
use crate::kernel::{Context, Entity, Event, Payload, SimError, Tag};
use crate::model::ModelError;
use crate::scheduling::SchedError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EntityFault {
    #[error("datacenter {0} is already registered")]
    DuplicateDatacenter(u32),
    #[error("no registered datacenter can host the requested vms")]
    NoSuitableProvider,
    #[error("{entity} cannot handle {tag:?}")]
    UnexpectedMessage { entity: &'static str, tag: Tag },
    #[error("invalid inventory: {0}")]
    InvalidInventory(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(PlanError),
    #[error(transparent)]
    Kernel(#[from] SimError),
    #[error(transparent)]
    Scheduling(#[from] SchedError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Accounting(#[from] AccountingError),
}

/// Every kind of entity that takes part in a run.
#[derive(Debug)]
pub enum Actor {
    Cis(CisRegistry),
    Datacenter(Box<Datacenter>),
    Broker(Box<Broker>),
}

impl Entity for Actor {
    type Message = Message;
    type Fault = EntityFault;

    fn start(&mut self, ctx: &mut Context<'_, Message>) -> Result<(), EntityFault> {
        match self {
            Actor::Cis(_) => Ok(()),
            Actor::Datacenter(dc) => dc.start(ctx),
            Actor::Broker(broker) => broker.start(ctx),
        }
    }

    fn handle(
        &mut self,
        event: Event<Message>,
        ctx: &mut Context<'_, Message>,
    ) -> Result<(), EntityFault> {
        match self {
            Actor::Cis(registry) => match event.payload {
                Message::RegisterDatacenter(summary) => registry.register(event.source, summary),
                Message::QueryCis(req) => {
                    ctx.send(event.source, 0.0, Message::CisReply(registry.query(&req)))?;
                    Ok(())
                }
                other => Err(EntityFault::UnexpectedMessage {
                    entity: "cis",
                    tag: other.tag(),
                }),
            },
            Actor::Datacenter(dc) => dc.handle(event, ctx),
            Actor::Broker(broker) => broker.handle(event, ctx),
        }
    }
}
