use rand::Rng;
use rand_distr::Exp1;

use super::trace::EventKind;
use super::DropPolicy;
use crate::distributions::TransferDistribution;

pub(crate) trait Sink {
    /// Whether individual drop events must be generated.
    const TRACE: bool;
    fn push(&mut self, t: f64, kind: EventKind, age_after: f64);
}

pub(crate) struct NoEvents;

impl Sink for NoEvents {
    const TRACE: bool = false;
    fn push(&mut self, _: f64, _: EventKind, _: f64) {}
}

/// One delivery-to-delivery cycle as seen by the age process.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cycle {
    pub start: f64,
    pub age_at_start: f64,
    pub end: f64,
}

/// Single source, single server, at most one packet in the system, Poisson
/// arrivals. Time starts at a delivery epoch whose age is one fresh transfer.
pub(crate) struct Engine<'a, R: Rng> {
    dist: &'a TransferDistribution,
    lambda: f64,
    policy: &'a DropPolicy,
    rng: R,
    now: f64,
    age: f64,
    next_arrival: f64,
}

impl<'a, R: Rng> Engine<'a, R> {
    pub fn new(dist: &'a TransferDistribution, lambda: f64, policy: &'a DropPolicy, mut rng: R) -> Self {
        let age = dist.sample(&mut rng);
        let next_arrival = rng.sample::<f64, _>(Exp1) / lambda;
        Engine { dist, lambda, policy, rng, now: 0.0, age, next_arrival }
    }

    fn gap(&mut self) -> f64 {
        self.rng.sample::<f64, _>(Exp1) / self.lambda
    }

    fn use_dnp(&mut self) -> bool {
        match self.policy {
            DropPolicy::Dnp => true,
            DropPolicy::Dop => false,
            DropPolicy::Threshold(theta) => self.age >= theta.value(),
            DropPolicy::Randomized(alpha) => {
                let p = alpha.prob_dnp(self.age);
                self.rng.random::<f64>() < p
            }
        }
    }

    pub fn cycle<S: Sink>(&mut self, sink: &mut S) -> Cycle {
        let start = self.now;
        let age_at_start = self.age;
        let dnp = self.use_dnp();
        let mut begin = self.next_arrival;
        if S::TRACE {
            sink.push(begin, EventKind::Arrival, age_at_start + begin - start);
        }
        self.next_arrival = begin + self.gap();
        let (end, delivered) = loop {
            let t = self.dist.sample(&mut self.rng);
            let done = begin + t;
            if dnp {
                if S::TRACE {
                    while self.next_arrival < done {
                        sink.push(self.next_arrival, EventKind::DropNew, age_at_start + self.next_arrival - start);
                        self.next_arrival += self.gap();
                    }
                } else if self.next_arrival < done {
                    self.next_arrival = done + self.gap();
                }
                break (done, t);
            }
            if self.next_arrival < done {
                begin = self.next_arrival;
                if S::TRACE {
                    sink.push(begin, EventKind::DropOld, age_at_start + begin - start);
                }
                self.next_arrival = begin + self.gap();
            } else {
                break (done, t);
            }
        };
        if S::TRACE {
            sink.push(end, EventKind::TransferComplete, delivered);
        }
        self.now = end;
        self.age = delivered;
        Cycle { start, age_at_start, end }
    }
}

/// Area under the age sawtooth on `[a, b]` when the age at `a` is `g`.
pub(crate) fn segment_area(g: f64, a: f64, b: f64) -> f64 {
    let w = b - a;
    w * (g + 0.5 * w)
}
