//! The canonical `EVST` binary event format and its CSV fixture variant.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! header (16 bytes): b"EVST" | version u16 | width u16 | height u16 | 6 reserved bytes
//! record (16 bytes): t u64 (us) | x u16 | y u16 | polarity u8 (0 = OFF, 1 = ON) | 3 pad bytes
//! ```
//!
//! The CSV variant is a `t,x,y,p` header line followed by one event per line.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Event, Polarity};
use crate::error::{Error, Result};
use crate::grid::Geometry;

pub const EVST_MAGIC: &[u8; 4] = b"EVST";
pub const EVST_VERSION: u16 = 1;
pub const EVST_HEADER_LEN: usize = 16;
pub const EVST_RECORD_LEN: usize = 16;

/// A decoded event file.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFile {
    pub geometry: Geometry,
    pub events: Vec<Event>,
}

pub fn write_evst<W: Write>(mut out: W, geometry: Geometry, events: &[Event]) -> Result<()> {
    let (w, h) = (to_u16(geometry.width, "width")?, to_u16(geometry.height, "height")?);
    let mut header = [0u8; EVST_HEADER_LEN];
    header[0..4].copy_from_slice(EVST_MAGIC);
    header[4..6].copy_from_slice(&EVST_VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&w.to_le_bytes());
    header[8..10].copy_from_slice(&h.to_le_bytes());
    out.write_all(&header)?;

    let mut buf = Vec::with_capacity(events.len() * EVST_RECORD_LEN);
    for e in events {
        buf.extend_from_slice(&e.t.to_le_bytes());
        buf.extend_from_slice(&e.x.to_le_bytes());
        buf.extend_from_slice(&e.y.to_le_bytes());
        buf.push(match e.polarity {
            Polarity::Off => 0,
            Polarity::On => 1,
        });
        buf.extend_from_slice(&[0, 0, 0]);
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_evst<R: Read>(mut input: R) -> Result<EventFile> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < EVST_HEADER_LEN {
        return Err(Error::Format(format!(
            "EVST header needs {EVST_HEADER_LEN} bytes, file has {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != EVST_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected \"EVST\"", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != EVST_VERSION {
        return Err(Error::Format(format!("unsupported EVST version {version}")));
    }
    let width = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let height = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let body = &bytes[EVST_HEADER_LEN..];
    if body.len() % EVST_RECORD_LEN != 0 {
        return Err(Error::Format(format!(
            "truncated record: {} trailing bytes",
            body.len() % EVST_RECORD_LEN
        )));
    }
    let events = body
        .chunks_exact(EVST_RECORD_LEN)
        .enumerate()
        .map(|(i, r)| {
            let t = u64::from_le_bytes(r[0..8].try_into().expect("8 bytes"));
            let x = u16::from_le_bytes([r[8], r[9]]);
            let y = u16::from_le_bytes([r[10], r[11]]);
            let polarity = match r[12] {
                0 => Polarity::Off,
                1 => Polarity::On,
                p => return Err(Error::Format(format!("record {i}: polarity byte {p}"))),
            };
            Ok(Event { t, x, y, polarity })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventFile {
        geometry: Geometry::new(width, height),
        events,
    })
}

#[derive(Debug, serde::Deserialize, serde::Serialize)]
struct CsvRow {
    t: u64,
    x: u16,
    y: u16,
    p: u8,
}

/// Reads the `t,x,y,p` variant. Without an explicit geometry the bounding
/// box of the events is used.
pub fn read_csv<R: Read>(input: R, geometry: Option<Geometry>) -> Result<EventFile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut events = Vec::new();
    for row in reader.deserialize() {
        let row: CsvRow = row?;
        let polarity = match row.p {
            0 => Polarity::Off,
            1 => Polarity::On,
            p => return Err(Error::Format(format!("polarity {p} in CSV, expected 0 or 1"))),
        };
        events.push(Event::new(row.t, row.x, row.y, polarity));
    }
    let geometry = geometry.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as usize + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as usize + 1).max().unwrap_or(0);
        Geometry::new(w, h)
    });
    Ok(EventFile { geometry, events })
}

pub fn write_csv<W: Write>(out: W, events: &[Event]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for e in events {
        writer.serialize(CsvRow {
            t: e.t,
            x: e.x,
            y: e.y,
            p: u8::from(e.polarity == Polarity::On),
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Loads either format, dispatching on the `.csv` extension.
pub fn read_events(path: &Path, geometry: Option<Geometry>) -> Result<EventFile> {
    let file = fs::File::open(path)?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_csv(std::io::BufReader::new(file), geometry)
    } else {
        read_evst(std::io::BufReader::new(file))
    }
}

fn to_u16(v: usize, what: &'static str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::invalid(what, format!("{v} does not fit in u16")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_bit_exact() {
        let mut buf = Vec::new();
        write_evst(&mut buf, Geometry::new(128, 96), &[Event::on(0x0102_0304_0506_0708, 3, 513)]).unwrap();
        assert_eq!(
            &buf[..16],
            &[b'E', b'V', b'S', b'T', 1, 0, 128, 0, 96, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            &buf[16..],
            &[8, 7, 6, 5, 4, 3, 2, 1, 3, 0, 1, 2, 1, 0, 0, 0]
        );
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let mut buf = Vec::new();
        write_evst(&mut buf, Geometry::new(4, 4), &[]).unwrap();
        buf[0] = b'X';
        assert!(matches!(read_evst(&buf[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_record_is_rejected() {
        let mut buf = Vec::new();
        write_evst(&mut buf, Geometry::new(4, 4), &[Event::off(1, 1, 1)]).unwrap();
        buf.pop();
        assert!(read_evst(&buf[..]).is_err());
    }

    #[test]
    fn csv_fixture_parses() {
        let text = "t,x,y,p\n0,1,2,1\n15, 3, 0, 0\n";
        let f = read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(f.events, vec![Event::on(0, 1, 2), Event::off(15, 3, 0)]);
        assert_eq!(f.geometry, Geometry::new(4, 3));
    }

    proptest! {
        #[test]
        fn evst_roundtrip(raw in prop::collection::vec((any::<u64>(), any::<u16>(), any::<u16>(), any::<bool>()), 0..64)) {
            let events: Vec<Event> = raw
                .into_iter()
                .map(|(t, x, y, on)| Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off }))
                .collect();
            let mut buf = Vec::new();
            write_evst(&mut buf, Geometry::new(640, 480), &events).unwrap();
            prop_assert_eq!(buf.len(), EVST_HEADER_LEN + EVST_RECORD_LEN * events.len());
            let back = read_evst(&buf[..]).unwrap();
            prop_assert_eq!(back.events, events);
            prop_assert_eq!(back.geometry, Geometry::new(640, 480));
        }
    }
}
