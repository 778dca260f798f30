//! Discrete-event scheduler.
//!
//! A binary heap ordered by `(fire_at, seq)`. `seq` is the insertion counter,
//! so events scheduled for the same instant are delivered in the order they
//! were scheduled. The payload type carries the target component.

use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;

use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle(u64);

#[derive(Debug)]
pub struct Event<E> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub payload: E,
}

impl<E> PartialEq for Event<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Event<E> {}

impl<E> PartialOrd for Event<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Event<E> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.fire_at.cmp(&self.fire_at).then_with(|| other.seq.cmp(&self.seq))
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv_feed(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

#[derive(Debug)]
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Event<E>>,
    cancelled: BTreeSet<u64>,
    dispatched: u64,
    dispatch_hash: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: BTreeSet::new(),
            dispatched: 0,
            dispatch_hash: FNV_OFFSET,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Schedules `payload` at `fire_at`.
    ///
    /// Panics if `fire_at` is before the current clock: that is a logic error
    /// in the model and the run cannot continue meaningfully.
    pub fn schedule(&mut self, fire_at: SimTime, payload: E) -> EventHandle {
        assert!(
            fire_at >= self.now,
            "event scheduled in the past: {} < {}",
            fire_at,
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { fire_at, seq, payload });
        EventHandle(seq)
    }

    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Cancels a pending event. Cancelling an already-dispatched event is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_seq {
            self.cancelled.insert(handle.0);
        }
    }

    pub fn pending(&self) -> usize {
        self.heap.iter().filter(|e| !self.cancelled.contains(&e.seq)).count()
    }

    pub fn is_idle(&self) -> bool {
        self.heap.iter().all(|e| self.cancelled.contains(&e.seq))
    }

    /// Fire time of the earliest live event.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.drop_cancelled_head();
        self.heap.peek().map(|e| e.fire_at)
    }

    /// Iterates over live pending payloads in no particular order.
    pub fn pending_payloads(&self) -> impl Iterator<Item = &E> {
        self.heap
            .iter()
            .filter(|e| !self.cancelled.contains(&e.seq))
            .map(|e| &e.payload)
    }

    fn drop_cancelled_head(&mut self) {
        while let Some(head) = self.heap.peek() {
            if self.cancelled.remove(&head.seq) {
                self.heap.pop();
            } else {
                break;
            }
        }
    }

    /// Removes and returns the next event firing at or before `until`,
    /// advancing the clock to its fire time.
    pub fn pop_until(&mut self, until: SimTime) -> Option<Event<E>> {
        self.drop_cancelled_head();
        match self.heap.peek() {
            Some(head) if head.fire_at <= until => {}
            _ => return None,
        }
        let ev = self.heap.pop()?;
        debug_assert!(ev.fire_at >= self.now);
        self.now = ev.fire_at;
        self.dispatched += 1;
        self.dispatch_hash = fnv_feed(fnv_feed(self.dispatch_hash, ev.fire_at.0), ev.seq);
        Some(ev)
    }

    /// Dispatches every event with `fire_at <= t`, including events the
    /// handler schedules during the drain, then sets the clock to `t`.
    pub fn run_until<F>(&mut self, t: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Scheduler<E>, Event<E>),
    {
        assert!(t >= self.now, "run_until into the past");
        let mut count = 0;
        while let Some(ev) = self.pop_until(t) {
            handler(self, ev);
            count += 1;
        }
        self.now = t;
        count
    }

    /// Mixes a caller-supplied tag into the dispatch hash, e.g. an event kind.
    pub fn note_dispatch(&mut self, tag: u64) {
        self.dispatch_hash = fnv_feed(self.dispatch_hash, tag);
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// FNV-1a over `(fire_at, seq)` of every dispatched event plus any tags.
    pub fn dispatch_hash(&self) -> u64 {
        self.dispatch_hash
    }
}
