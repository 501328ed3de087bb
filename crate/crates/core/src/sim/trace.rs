use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A packet arrives to an idle server and enters service.
    Arrival,
    TransferComplete,
    /// A new arrival preempts the packet in service.
    DropOld,
    /// An arrival is discarded because the server is busy.
    DropNew,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Arrival => "arrival",
            EventKind::TransferComplete => "transfer_complete",
            EventKind::DropOld => "drop_old",
            EventKind::DropNew => "drop_new",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub event: EventKind,
    /// Age of information right after the event.
    pub age_after: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventTrace {
    pub events: Vec<TraceEvent>,
}

impl EventTrace {
    /// Writes `t,event,age_after` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,event,age_after")?;
        for e in &self.events {
            writeln!(w, "{:.9e},{},{:.9e}", e.t, e.event, e.age_after)?;
        }
        Ok(())
    }
}

impl super::engine::Sink for EventTrace {
    const TRACE: bool = true;
    fn push(&mut self, t: f64, event: EventKind, age_after: f64) {
        self.events.push(TraceEvent { t, event, age_after });
    }
}
