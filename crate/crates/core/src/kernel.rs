//! Deterministic future-event-list engine.
//!
//! All entities are dispatched cooperatively from one event loop. Events are
//! ordered by `(fire_at, seq)`, where `seq` is a monotone counter assigned at
//! scheduling time, so events sharing a timestamp are delivered in the order
//! they were scheduled.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Simulated time in seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Panics on negative or non-finite input.
    pub fn new(seconds: f64) -> Self {
        Self::try_new(seconds).unwrap_or_else(|| panic!("invalid simulation time {seconds}"))
    }

    pub fn try_new(seconds: f64) -> Option<Self> {
        (seconds.is_finite() && seconds >= 0.0).then_some(SimTime(seconds))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }

    pub fn after(self, delay: f64) -> SimTime {
        SimTime::new(self.0 + delay)
    }
}

impl Eq for SimTime {}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Message kinds exchanged between entities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tag {
    RegisterDatacenter,
    QueryCis,
    CisReply,
    CreateVm,
    VmAck,
    SubmitTask,
    TaskDone,
    InternalUpdate,
    DestroyVm,
}

/// A message body that knows its own tag.
pub trait Payload: fmt::Debug {
    fn tag(&self) -> Tag;
}

#[derive(Clone, Debug)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub source: EntityId,
    pub target: EntityId,
    pub tag: Tag,
    pub payload: P,
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.fire_at
            .cmp(&other.fire_at)
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("entities cannot be registered once the run has started")]
    RunAlreadyStarted,
    #[error("event at t={fire_at} scheduled behind the clock (t={clock})")]
    CausalityViolation { fire_at: f64, clock: f64 },
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("negative or non-finite delay {0}")]
    InvalidDelay(f64),
    #[error("no entities registered")]
    NoEntities,
}

/// Failure of a run: either a kernel error or an entity fault raised while
/// handling `event`.
#[derive(Debug, Error)]
pub enum RunError<F: fmt::Debug + fmt::Display> {
    #[error(transparent)]
    Kernel(#[from] SimError),
    #[error("entity fault at t={at} while handling {event}: {fault}")]
    Fault {
        at: SimTime,
        event: String,
        fault: F,
    },
}

/// Behaviour attached to a registered entity.
pub trait Entity {
    type Message: Payload;
    type Fault: fmt::Debug + fmt::Display;

    /// Called once, in id order, when the run starts.
    fn start(&mut self, _ctx: &mut Context<'_, Self::Message>) -> Result<(), Self::Fault> {
        Ok(())
    }

    fn handle(
        &mut self,
        event: Event<Self::Message>,
        ctx: &mut Context<'_, Self::Message>,
    ) -> Result<(), Self::Fault>;
}

/// Future-event list plus the simulation clock.
pub struct EventQueue<P> {
    heap: BinaryHeap<Reverse<Event<P>>>,
    clock: SimTime,
    next_seq: u64,
    entity_count: u32,
}

impl<P: Payload> EventQueue<P> {
    fn new() -> Self {
        Self {
            heap: BinaryHeap::new(),
            clock: SimTime::ZERO,
            next_seq: 0,
            entity_count: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    fn check_entity(&self, id: EntityId) -> Result<(), SimError> {
        if id.0 < self.entity_count {
            Ok(())
        } else {
            Err(SimError::UnknownEntity(id))
        }
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        source: EntityId,
        target: EntityId,
        payload: P,
    ) -> Result<u64, SimError> {
        if fire_at < self.clock {
            return Err(SimError::CausalityViolation {
                fire_at: fire_at.seconds(),
                clock: self.clock.seconds(),
            });
        }
        self.check_entity(source)?;
        self.check_entity(target)?;
        let seq = self.next_seq;
        self.next_seq += 1;
        let tag = payload.tag();
        self.heap.push(Reverse(Event {
            fire_at,
            seq,
            source,
            target,
            tag,
            payload,
        }));
        Ok(seq)
    }

    pub fn send(
        &mut self,
        source: EntityId,
        target: EntityId,
        delay: f64,
        payload: P,
    ) -> Result<u64, SimError> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(SimError::InvalidDelay(delay));
        }
        let fire_at = self.clock.after(delay);
        self.schedule(fire_at, source, target, payload)
    }

    fn pop(&mut self) -> Option<Event<P>> {
        let Reverse(event) = self.heap.pop()?;
        debug_assert!(event.fire_at >= self.clock);
        self.clock = event.fire_at;
        Some(event)
    }
}

/// Handle given to an entity while it is being dispatched.
pub struct Context<'a, P> {
    queue: &'a mut EventQueue<P>,
    me: EntityId,
}

impl<P: Payload> Context<'_, P> {
    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn me(&self) -> EntityId {
        self.me
    }

    pub fn send(&mut self, target: EntityId, delay: f64, payload: P) -> Result<u64, SimError> {
        self.queue.send(self.me, target, delay, payload)
    }

    /// Schedules a message to this entity at an absolute time.
    pub fn schedule_self(&mut self, fire_at: SimTime, payload: P) -> Result<u64, SimError> {
        self.queue.schedule(fire_at, self.me, self.me, payload)
    }
}

/// Line-oriented record of every dispatched event.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    lines: Vec<String>,
}

impl Trace {
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// SHA-256 over the newline-terminated lines, hex encoded.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for line in &self.lines {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn record<P: fmt::Debug>(&mut self, event: &Event<P>) {
        self.lines.push(format_event(event));
    }
}

fn format_event<P: fmt::Debug>(event: &Event<P>) -> String {
    format!(
        "{:?} #{} {}->{} {:?} {:?}",
        event.fire_at.seconds(),
        event.seq,
        event.source,
        event.target,
        event.tag,
        event.payload
    )
}

pub struct Simulation<E: Entity> {
    entities: Vec<E>,
    queue: EventQueue<E::Message>,
    started: bool,
    trace: Option<Trace>,
    dispatched: BTreeMap<Tag, u64>,
}

impl<E: Entity> Default for Simulation<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Entity> Simulation<E> {
    pub fn new() -> Self {
        Self {
            entities: Vec::new(),
            queue: EventQueue::new(),
            started: false,
            trace: None,
            dispatched: BTreeMap::new(),
        }
    }

    /// Enables recording of every dispatched event.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Trace::default());
        self
    }

    pub fn register_entity(&mut self, entity: E) -> Result<EntityId, SimError> {
        if self.started {
            return Err(SimError::RunAlreadyStarted);
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(entity);
        self.queue.entity_count += 1;
        Ok(id)
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn schedule(
        &mut self,
        fire_at: SimTime,
        source: EntityId,
        target: EntityId,
        payload: E::Message,
    ) -> Result<u64, SimError> {
        self.queue.schedule(fire_at, source, target, payload)
    }

    pub fn send(
        &mut self,
        source: EntityId,
        target: EntityId,
        delay: f64,
        payload: E::Message,
    ) -> Result<u64, SimError> {
        self.queue.send(source, target, delay, payload)
    }

    pub fn entity(&self, id: EntityId) -> Option<&E> {
        self.entities.get(id.0 as usize)
    }

    pub fn entities(&self) -> &[E] {
        &self.entities
    }

    pub fn into_entities(self) -> Vec<E> {
        self.entities
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.trace.as_ref()
    }

    pub fn take_trace(&mut self) -> Option<Trace> {
        self.trace.take()
    }

    /// Number of dispatched events per tag.
    pub fn dispatch_counts(&self) -> &BTreeMap<Tag, u64> {
        &self.dispatched
    }

    /// Runs until the future-event list is empty and returns the final clock.
    pub fn run(&mut self) -> Result<SimTime, RunError<E::Fault>> {
        if self.entities.is_empty() {
            return Err(SimError::NoEntities.into());
        }
        self.started = true;
        for (idx, entity) in self.entities.iter_mut().enumerate() {
            let mut ctx = Context {
                queue: &mut self.queue,
                me: EntityId(idx as u32),
            };
            entity.start(&mut ctx).map_err(|fault| RunError::Fault {
                at: SimTime::ZERO,
                event: "start".to_string(),
                fault,
            })?;
        }
        while let Some(event) = self.queue.pop() {
            if let Some(trace) = self.trace.as_mut() {
                trace.record(&event);
            }
            *self.dispatched.entry(event.tag).or_insert(0) += 1;
            let (target, at, seq, source, tag) = (
                event.target,
                event.fire_at,
                event.seq,
                event.source,
                event.tag,
            );
            let mut ctx = Context {
                queue: &mut self.queue,
                me: target,
            };
            let entity = &mut self.entities[target.0 as usize];
            if let Err(fault) = entity.handle(event, &mut ctx) {
                let event = format!("{at} #{seq} {source}->{target} {tag:?}");
                return Err(RunError::Fault { at, event, fault });
            }
        }
        Ok(self.queue.now())
    }
}
