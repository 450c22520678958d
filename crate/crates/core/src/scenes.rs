//! Synthetic scenes for the saliency and closed-loop experiments.
//!
//! A [`World`] is an intensity function over continuous coordinates, larger
//! than the sensor if needed. A [`Viewport`] samples a sensor-sized window of
//! it at a (sub-pixel) offset, so gaze shifts and fixational jitter turn a
//! static world into events.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::FlatConfig;
use crate::error::{Error, Result};
use crate::events::{Event, EventSlice, SliceBuilder};
use crate::grid::{Geometry, Grid};
use crate::stimgen::{EventSensor, SensorModel};

/// A primitive drawn dark on a bright background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Filled disk.
    Disk { cx: f64, cy: f64, radius: f64 },
    /// Filled axis-aligned rectangle, `[x0, x0 + w) x [y0, y0 + h)`.
    Rect { x0: f64, y0: f64, w: f64, h: f64 },
    /// Solid line segment of the given thickness.
    Segment { x0: f64, y0: f64, x1: f64, y1: f64, thickness: f64 },
}

impl Shape {
    /// Coverage of the pixel centered at `(x, y)` in `[0, 1]`, supersampled.
    fn coverage(&self, x: f64, y: f64) -> f64 {
        const N: usize = 4;
        let mut hit = 0;
        for i in 0..N {
            for j in 0..N {
                let px = x - 0.5 + (i as f64 + 0.5) / N as f64;
                let py = y - 0.5 + (j as f64 + 0.5) / N as f64;
                if self.contains(px, py) {
                    hit += 1;
                }
            }
        }
        hit as f64 / (N * N) as f64
    }

    fn contains(&self, px: f64, py: f64) -> bool {
        match *self {
            Shape::Disk { cx, cy, radius } => (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius,
            Shape::Rect { x0, y0, w, h } => px >= x0 && px < x0 + w && py >= y0 && py < y0 + h,
            Shape::Segment { x0, y0, x1, y1, thickness } => {
                let (dx, dy) = (x1 - x0, y1 - y0);
                let len2 = dx * dx + dy * dy;
                let t = if len2 > 0.0 { (((px - x0) * dx + (py - y0) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let (qx, qy) = (x0 + t * dx, y0 + t * dy);
                (px - qx).powi(2) + (py - qy).powi(2) <= (thickness / 2.0).powi(2)
            }
        }
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Shape::Disk { cx, cy, radius } => (cx - radius, cy - radius, cx + radius, cy + radius),
            Shape::Rect { x0, y0, w, h } => (x0, y0, x0 + w, y0 + h),
            Shape::Segment { x0, y0, x1, y1, thickness } => {
                let t = thickness / 2.0;
                (x0.min(x1) - t, y0.min(y1) - t, x0.max(x1) + t, y0.max(y1) + t)
            }
        }
    }

    /// Geometric center.
    pub fn center(&self) -> (f64, f64) {
        let (a, b, c, d) = self.bounds();
        ((a + c) / 2.0, (b + d) / 2.0)
    }
}

/// A shape that can switch on and off over time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    /// Full on/off period in seconds; `None` means always visible.
    pub blink_period: Option<f64>,
}

/// Static or blinking dark shapes on a uniform background.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub width: f64,
    pub height: f64,
    pub background: f64,
    pub foreground: f64,
    pub objects: Vec<SceneObject>,
}

impl World {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            background: 0.8,
            foreground: 0.2,
            objects: Vec::new(),
        }
    }

    pub fn with(mut self, shape: Shape) -> Self {
        self.objects.push(SceneObject { shape, blink_period: None });
        self
    }

    pub fn with_blinking(mut self, shape: Shape, period: f64) -> Self {
        self.objects.push(SceneObject {
            shape,
            blink_period: Some(period),
        });
        self
    }

    /// Intensity at world position `(x, y)` and time `t` seconds.
    pub fn intensity(&self, x: f64, y: f64, t: f64) -> f64 {
        let mut cover: f64 = 0.0;
        for o in &self.objects {
            if let Some(p) = o.blink_period {
                if (t / p).rem_euclid(1.0) >= 0.5 {
                    continue;
                }
            }
            let (a, b, c, d) = o.shape.bounds();
            if x + 1.0 < a || x - 1.0 > c || y + 1.0 < b || y - 1.0 > d {
                continue;
            }
            cover = cover.max(o.shape.coverage(x, y));
        }
        self.background + (self.foreground - self.background) * cover
    }

    /// Reads a world from flat config keys: `width`, `height`, `background`,
    /// `foreground`, and numbered objects `object.N = kind args... [blink=P]`
    /// with kinds `disk cx cy r`, `rect x0 y0 w h`, `segment x0 y0 x1 y1 thickness`.
    pub fn from_config(cfg: &mut FlatConfig) -> Result<Self> {
        let mut world = World::new(cfg.take_or("width", 256.0)?, cfg.take_or("height", 256.0)?);
        world.background = cfg.take_or("background", world.background)?;
        world.foreground = cfg.take_or("foreground", world.foreground)?;
        for i in 0.. {
            let Some(spec) = cfg.take_opt::<String>(&format!("object.{i}"))? else { break };
            world.objects.push(parse_object(&spec)?);
        }
        Ok(world)
    }
}

fn parse_object(spec: &str) -> Result<SceneObject> {
    let mut words: Vec<&str> = spec.split_whitespace().collect();
    let mut blink_period = None;
    if let Some(last) = words.last() {
        if let Some(p) = last.strip_prefix("blink=") {
            blink_period = Some(p.parse().map_err(|_| Error::Config(format!("bad blink period in {spec:?}")))?);
            words.pop();
        }
    }
    let (kind, args) = words.split_first().ok_or_else(|| Error::Config("empty object".into()))?;
    let nums: Vec<f64> = args
        .iter()
        .map(|a| a.parse().map_err(|_| Error::Config(format!("bad number {a:?} in {spec:?}"))))
        .collect::<Result<_>>()?;
    let shape = match (*kind, nums.as_slice()) {
        ("disk", [cx, cy, r]) => Shape::Disk { cx: *cx, cy: *cy, radius: *r },
        ("rect", [x0, y0, w, h]) => Shape::Rect { x0: *x0, y0: *y0, w: *w, h: *h },
        ("segment", [x0, y0, x1, y1, t]) => Shape::Segment {
            x0: *x0,
            y0: *y0,
            x1: *x1,
            y1: *y1,
            thickness: *t,
        },
        _ => return Err(Error::Config(format!("cannot parse object {spec:?}"))),
    };
    Ok(SceneObject { shape, blink_period })
}

/// A sensor-sized window onto a world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewport {
    pub geometry: Geometry,
    /// World coordinates of the window's top-left pixel center.
    pub origin: (f64, f64),
}

impl Viewport {
    pub fn new(geometry: Geometry, origin: (f64, f64)) -> Self {
        Self { geometry, origin }
    }

    /// Viewport whose center pixel `(w/2, h/2)` looks at world point `(cx, cy)`.
    pub fn centered_on(geometry: Geometry, cx: f64, cy: f64) -> Self {
        Self::new(geometry, (cx - (geometry.width / 2) as f64, cy - (geometry.height / 2) as f64))
    }

    pub fn render(&self, world: &World, t: f64) -> Grid<f64> {
        let (ox, oy) = self.origin;
        Grid::from_fn(self.geometry, |x, y| world.intensity(ox + x as f64, oy + y as f64, t))
    }

    /// World point seen at sensor pixel `(x, y)`.
    pub fn to_world(&self, x: f64, y: f64) -> (f64, f64) {
        (self.origin.0 + x, self.origin.1 + y)
    }

    /// Sensor position of world point `(wx, wy)`.
    pub fn to_sensor(&self, wx: f64, wy: f64) -> (f64, f64) {
        (wx - self.origin.0, wy - self.origin.1)
    }
}

/// Events produced by jittering a fixed viewport: `steps` random sub-pixel
/// displacements of at most `amplitude` pixels per axis, one every
/// `step_us`, all accumulated into one slice.
pub fn jitter_slice(
    world: &World,
    view: Viewport,
    amplitude: f64,
    steps: usize,
    step_us: u64,
    sensor: &SensorModel,
) -> Result<EventSlice> {
    if step_us == 0 {
        return Err(Error::invalid("step_us", "must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sensor.seed ^ 0x5EED_u64);
    let mut es = EventSensor::new(*sensor, &view.render(world, 0.0), 0.0)?;
    let mut slice = EventSlice::empty(view.geometry, 0, steps as u64 * step_us + 1);
    for k in 1..=steps {
        let dx = rng.random_range(-amplitude..=amplitude);
        let dy = rng.random_range(-amplitude..=amplitude);
        let v = Viewport::new(view.geometry, (view.origin.0 + dx, view.origin.1 + dy));
        let t = k as u64 * step_us;
        for e in es.push_frame(&v.render(world, t as f64 * 1e-6), t as f64)? {
            slice.add(&e);
        }
    }
    Ok(slice)
}

/// Six dark disks with radii 12 to 25 px on a 304x240 field, the
/// calibration-circle layout. Returns the world and the disk centers.
pub fn calibration_circles() -> (World, Vec<(f64, f64)>) {
    let radii = [12.0, 14.5, 17.0, 19.5, 22.0, 25.0];
    let centers = [(50.0, 60.0), (152.0, 60.0), (254.0, 60.0), (50.0, 175.0), (152.0, 175.0), (254.0, 175.0)];
    let mut world = World::new(304.0, 240.0);
    for (&(cx, cy), &radius) in centers.iter().zip(&radii) {
        world = world.with(Shape::Disk { cx, cy, radius });
    }
    (world, centers.to_vec())
}

/// Sensor geometry of the calibration-circle layout.
pub const CALIBRATION_GEOMETRY: Geometry = Geometry::new(304, 240);

/// Draws a pattern straight into an event slice: every pixel of `mask` gets
/// one ON event.
pub fn slice_from_pixels(geometry: Geometry, pixels: impl IntoIterator<Item = (usize, usize)>) -> EventSlice {
    let mut s = EventSlice::empty(geometry, 0, 1);
    for (x, y) in pixels {
        if x < geometry.width && y < geometry.height {
            s.add(&Event::on(0, x as u16, y as u16));
        }
    }
    s
}

/// Pixels of a one-pixel square outline with top-left `(x0, y0)`.
pub fn square_outline(x0: usize, y0: usize, side: usize) -> Vec<(usize, usize)> {
    let mut px = Vec::new();
    for i in 0..side {
        px.push((x0 + i, y0));
        px.push((x0 + i, y0 + side - 1));
        if i > 0 && i + 1 < side {
            px.push((x0, y0 + i));
            px.push((x0 + side - 1, y0 + i));
        }
    }
    px
}

/// Pixels of a horizontal one-pixel line.
pub fn line_segment(x0: usize, y0: usize, len: usize) -> Vec<(usize, usize)> {
    (0..len).map(|i| (x0 + i, y0)).collect()
}

/// Accumulates a time-sorted event batch into consecutive slices.
pub fn slices_of(events: &[Event], window_us: u64, geometry: Geometry) -> Result<Vec<EventSlice>> {
    let mut b = SliceBuilder::new(window_us, geometry)?;
    let mut out = Vec::new();
    for e in events {
        b.push(e, |s| out.push(s))?;
    }
    out.extend(b.finish());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_coverage() {
        let w = World::new(64.0, 64.0).with(Shape::Disk { cx: 32.0, cy: 32.0, radius: 10.0 });
        assert!((w.intensity(32.0, 32.0, 0.0) - w.foreground).abs() < 1e-12);
        assert_eq!(w.intensity(5.0, 5.0, 0.0), w.background);
        let edge = w.intensity(42.0, 32.0, 0.0);
        assert!(edge > w.foreground && edge < w.background);
    }

    #[test]
    fn blinking_object() {
        let w = World::new(16.0, 16.0).with_blinking(Shape::Rect { x0: 4.0, y0: 4.0, w: 4.0, h: 4.0 }, 0.2);
        assert!((w.intensity(5.5, 5.5, 0.05) - w.foreground).abs() < 1e-12);
        assert_eq!(w.intensity(5.5, 5.5, 0.15), w.background);
    }

    #[test]
    fn viewport_mapping() {
        let v = Viewport::centered_on(Geometry::new(128, 128), 100.0, 50.0);
        assert_eq!(v.to_world(64.0, 64.0), (100.0, 50.0));
        assert_eq!(v.to_sensor(100.0, 50.0), (64.0, 64.0));
    }

    #[test]
    fn jitter_makes_edge_events_only() {
        let w = World::new(64.0, 64.0).with(Shape::Disk { cx: 32.0, cy: 32.0, radius: 12.0 });
        let s = jitter_slice(&w, Viewport::new(Geometry::new(64, 64), (0.0, 0.0)), 1.0, 10, 1000, &SensorModel::noiseless()).unwrap();
        assert!(s.event_count() > 0);
        for (x, y, v) in s.binary_view().indexed_iter() {
            if *v {
                let r = ((x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2)).sqrt();
                assert!((r - 12.0).abs() < 3.0, "event at r = {r}");
            }
        }
    }

    #[test]
    fn world_from_config() {
        let mut c = FlatConfig::parse("width = 300\nobject.0 = disk 10 20 5\nobject.1 = rect 1 2 3 4 blink=0.5\n").unwrap();
        let w = World::from_config(&mut c).unwrap();
        c.finish().unwrap();
        assert_eq!(w.width, 300.0);
        assert_eq!(w.objects.len(), 2);
        assert_eq!(w.objects[1].blink_period, Some(0.5));
        let mut bad = FlatConfig::parse("object.0 = hexagon 1").unwrap();
        assert!(World::from_config(&mut bad).is_err());
    }

    #[test]
    fn outline_pixel_count() {
        assert_eq!(square_outline(0, 0, 5).len(), 16);
        assert_eq!(line_segment(0, 0, 16).len(), 16);
    }
}
