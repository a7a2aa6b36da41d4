//! Fixtures shared by the benchmarks.

use std::fmt;

use dcsim::kernel::{Context, Entity, Event, Payload, SimError, Simulation, Tag};
use dcsim::EntityId;

#[derive(Debug, Clone, Copy)]
pub struct Token(pub u64);

impl Payload for Token {
    fn tag(&self) -> Tag {
        Tag::InternalUpdate
    }
}

#[derive(Debug)]
pub struct Never;

impl fmt::Display for Never {
    fn fmt(&self, _: &mut fmt::Formatter<'_>) -> fmt::Result {
        Ok(())
    }
}

impl From<SimError> for Never {
    fn from(e: SimError) -> Self {
        panic!("kernel error in benchmark: {e}")
    }
}

/// Passes a token to the next member of the ring until it has made `hops`
/// hops in total.
#[derive(Debug)]
pub struct RingNode {
    next: EntityId,
    hops: u64,
}

impl Entity for RingNode {
    type Message = Token;
    type Fault = Never;

    fn start(&mut self, _: &mut Context<'_, Token>) -> Result<(), Never> {
        Ok(())
    }

    fn handle(&mut self, event: Event<Token>, ctx: &mut Context<'_, Token>) -> Result<(), Never> {
        let Token(n) = event.payload;
        if n < self.hops {
            ctx.send(self.next, 0.001, Token(n + 1))?;
        }
        Ok(())
    }
}

/// A ring of `members` entities with `tokens` tokens in flight, each making
/// `hops` hops.
pub fn ring(members: u32, tokens: u32, hops: u64) -> Simulation<RingNode> {
    let mut sim = Simulation::new();
    for i in 0..members {
        sim.register_entity(RingNode {
            next: EntityId((i + 1) % members),
            hops,
        })
        .unwrap();
    }
    for t in 0..tokens {
        let at = EntityId(t % members);
        sim.send(at, at, 0.0, Token(0)).unwrap();
    }
    sim
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_dispatches_every_hop() {
        let mut sim = ring(4, 3, 10);
        let end = sim.run().unwrap();
        assert_eq!(sim.dispatch_counts()[&Tag::InternalUpdate], 3 * 11);
        assert!((end.seconds() - 0.010).abs() < 1e-12);
    }
}
