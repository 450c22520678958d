//! DVS events, time-window accumulation and suppression accounting.

mod io;

pub use self::io::{
    read_csv, read_events, read_evst, write_csv, write_evst, EventFile, EVST_HEADER_LEN,
    EVST_MAGIC, EVST_RECORD_LEN, EVST_VERSION,
};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Off,
    On,
}

impl Polarity {
    pub fn flipped(self) -> Self {
        match self {
            Polarity::Off => Polarity::On,
            Polarity::On => Polarity::Off,
        }
    }
}

/// One sensor event. `t` is in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t, x, y, polarity }
    }

    pub fn on(t: u64, x: u16, y: u16) -> Self {
        Self::new(t, x, y, Polarity::On)
    }

    pub fn off(t: u64, x: u16, y: u16) -> Self {
        Self::new(t, x, y, Polarity::Off)
    }
}

/// Per-polarity event counts over one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSlice {
    pub window_start: u64,
    pub window_end: u64,
    pub pos: Grid<u32>,
    pub neg: Grid<u32>,
}

impl EventSlice {
    pub fn empty(geometry: Geometry, window_start: u64, window_end: u64) -> Self {
        Self {
            window_start,
            window_end,
            pos: Grid::new(geometry),
            neg: Grid::new(geometry),
        }
    }

    /// Builds a slice from a binary map, one ON event per set pixel.
    pub fn from_mask(mask: &Mask, window_start: u64, window_end: u64) -> Self {
        let pos = mask.map(|b| u32::from(*b));
        let neg = Grid::new(mask.geometry());
        Self {
            window_start,
            window_end,
            pos,
            neg,
        }
    }

    pub fn geometry(&self) -> Geometry {
        self.pos.geometry()
    }

    pub fn width(&self) -> usize {
        self.pos.width()
    }

    pub fn height(&self) -> usize {
        self.pos.height()
    }

    pub fn add(&mut self, e: &Event) {
        let idx = (e.x as usize, e.y as usize);
        match e.polarity {
            Polarity::On => self.pos[idx] += 1,
            Polarity::Off => self.neg[idx] += 1,
        }
    }

    pub fn event_count(&self) -> u64 {
        self.pos
            .iter()
            .zip(self.neg.iter())
            .map(|(p, n)| u64::from(*p) + u64::from(*n))
            .sum()
    }

    /// `V`: 1 where any event occurred.
    pub fn binary_view(&self) -> Mask {
        self.pos
            .zip_map(&self.neg, |p, n| p + n > 0)
            .expect("pos and neg share geometry")
    }

    /// `V+`: 1 where an ON event occurred.
    pub fn on_view(&self) -> Mask {
        self.pos.map(|c| *c > 0)
    }

    /// `V-`: 1 where an OFF event occurred.
    pub fn off_view(&self) -> Mask {
        self.neg.map(|c| *c > 0)
    }

    pub fn swap_polarity(&self) -> Self {
        Self {
            window_start: self.window_start,
            window_end: self.window_end,
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }

    pub fn duration_us(&self) -> u64 {
        self.window_end - self.window_start
    }
}

/// Counts before and after the OMS mask for one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuppressionStats {
    pub input_events: u64,
    pub output_events: u64,
    pub suppression_fraction: f64,
}

impl SuppressionStats {
    pub fn new(input_events: u64, output_events: u64) -> Self {
        let suppression_fraction = if input_events == 0 {
            0.0
        } else {
            1.0 - output_events as f64 / input_events as f64
        };
        Self {
            input_events,
            output_events,
            suppression_fraction,
        }
    }
}

/// Events of `input` that survive `mask`, compared with the total.
pub fn suppression_stats(input: &EventSlice, mask: &Mask) -> Result<SuppressionStats> {
    input.geometry().ensure_same(mask.geometry())?;
    let output = input
        .pos
        .iter()
        .zip(input.neg.iter())
        .zip(mask.iter())
        .filter(|(_, m)| **m)
        .map(|((p, n), _)| u64::from(*p) + u64::from(*n))
        .sum();
    Ok(SuppressionStats::new(input.event_count(), output))
}

/// Push-based binning of a time-ordered stream into fixed windows anchored
/// at the first event's timestamp.
///
/// Out-of-bounds events are dropped and counted in [`SliceBuilder::rejected`].
#[derive(Debug, Clone)]
pub struct SliceBuilder {
    geometry: Geometry,
    window: u64,
    origin: Option<u64>,
    current: Option<EventSlice>,
    last_t: Option<u64>,
    rejected: u64,
}

impl SliceBuilder {
    pub fn new(window_us: u64, geometry: Geometry) -> Result<Self> {
        if window_us == 0 {
            return Err(Error::invalid("window", "must be > 0 us"));
        }
        Ok(Self {
            geometry,
            window: window_us,
            origin: None,
            current: None,
            last_t: None,
            rejected: 0,
        })
    }

    /// Events dropped so far for falling outside the geometry.
    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    fn open(&self, k: u64) -> EventSlice {
        let start = self.origin.unwrap_or(0) + k * self.window;
        EventSlice::empty(self.geometry, start, start + self.window)
    }

    /// Closes the open window if `t` lies past its end and returns it. Call
    /// repeatedly until it yields `None` before [`SliceBuilder::insert`];
    /// empty windows in a gap come out one at a time.
    pub fn close_before(&mut self, t: u64) -> Result<Option<EventSlice>> {
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(Error::NonMonotonicTimestamp { prev, next: t });
            }
        }
        let (Some(origin), Some(current)) = (self.origin, self.current.as_ref()) else {
            return Ok(None);
        };
        if t < current.window_end {
            return Ok(None);
        }
        let next_k = (current.window_start - origin) / self.window + 1;
        Ok(self.current.replace(self.open(next_k)))
    }

    /// Adds an event to the open window. The caller must have drained
    /// [`SliceBuilder::close_before`] for its timestamp.
    pub fn insert(&mut self, event: &Event) {
        self.last_t = Some(event.t);
        if self.origin.is_none() {
            self.origin = Some(event.t);
            self.current = Some(self.open(0));
        }
        if !self.geometry.contains(i64::from(event.x), i64::from(event.y)) {
            self.rejected += 1;
            return;
        }
        self.current.as_mut().expect("window opened").add(event);
    }

    /// Adds an event, handing every window it closes to `emit`.
    pub fn push(&mut self, event: &Event, mut emit: impl FnMut(EventSlice)) -> Result<()> {
        while let Some(done) = self.close_before(event.t)? {
            emit(done);
        }
        self.insert(event);
        Ok(())
    }

    /// Takes the open window, if any.
    pub fn finish(&mut self) -> Option<EventSlice> {
        self.current.take()
    }
}

/// Iterator adapter over [`SliceBuilder`].
///
/// A timestamp that goes backwards yields one `Err` and ends the stream.
pub struct Accumulator<I> {
    events: I,
    builder: SliceBuilder,
    pending: Option<Event>,
    done: bool,
}

/// Accumulates `stream` into slices of `window_us` microseconds.
pub fn accumulate<I>(stream: I, window_us: u64, geometry: Geometry) -> Result<Accumulator<I::IntoIter>>
where
    I: IntoIterator<Item = Event>,
{
    Ok(Accumulator {
        events: stream.into_iter(),
        builder: SliceBuilder::new(window_us, geometry)?,
        pending: None,
        done: false,
    })
}

impl<I> Accumulator<I> {
    /// Events dropped so far for falling outside the geometry.
    pub fn rejected(&self) -> u64 {
        self.builder.rejected()
    }
}

impl<I: Iterator<Item = Event>> Iterator for Accumulator<I> {
    type Item = Result<EventSlice>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let Some(event) = self.pending.take().or_else(|| self.events.next()) else {
                self.done = true;
                return self.builder.finish().map(Ok);
            };
            match self.builder.close_before(event.t) {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Ok(Some(slice)) => {
                    self.pending = Some(event);
                    return Some(Ok(slice));
                }
                Ok(None) => self.builder.insert(&event),
            }
        }
    }
}
