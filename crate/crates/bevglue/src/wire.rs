//! Compact box messages, replay-log framing, and bandwidth accounting.
//!
//! One message carries everything alignment needs from a peer: who sent it,
//! which frame it belongs to, and the tracked boxes in the sender's local
//! frame. Layout is little-endian and fixed-width with a leading magic
//! word; floats travel as f32, so encoding quantizes the f64 fields once.
//! A replay log is just a sequence of messages, each prefixed with its
//! 32-bit byte length.
//!
//! Decoding is meant for untrusted input: every length is checked against
//! the actual buffer before anything is parsed or allocated, and decoded
//! boxes pass the same validation as locally built ones.

use thiserror::Error;

use crate::graph::{GraphError, TrackedBox};

/// Message magic, "ULGB" when read as little-endian bytes.
pub const MAGIC: u32 = 0x4247_4C55;
/// Magic + sender id + timestep + box count.
pub const HEADER_LEN: usize = 4 + 4 + 4 + 2;
/// Five f32 fields plus the track id.
pub const BOX_LEN: usize = 5 * 4 + 4;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("bad magic {found:#010x}, expected {MAGIC:#010x}")]
    BadMagic { found: u32 },
    #[error("message truncated: needed {needed} bytes, got {got}")]
    Truncated { needed: usize, got: usize },
    #[error("{extra} trailing bytes after a complete message")]
    TrailingBytes { extra: usize },
    #[error("{0} boxes exceed the 16-bit count field")]
    CountOverflow(usize),
    #[error("invalid box payload: {0}")]
    InvalidBox(#[from] GraphError),
}

/// One agent's boxes for one frame, as shared with peers.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMessage {
    pub sender_id: u32,
    pub timestep: u32,
    pub boxes: Vec<TrackedBox>,
}

/// Exact encoded size of a message, without encoding it.
pub fn encoded_len(msg: &AlignmentMessage) -> usize {
    HEADER_LEN + BOX_LEN * msg.boxes.len()
}

pub fn encode(msg: &AlignmentMessage) -> Result<Vec<u8>, WireError> {
    let count = u16::try_from(msg.boxes.len()).map_err(|_| WireError::CountOverflow(msg.boxes.len()))?;
    let mut out = Vec::with_capacity(encoded_len(msg));
    out.extend_from_slice(&MAGIC.to_le_bytes());
    out.extend_from_slice(&msg.sender_id.to_le_bytes());
    out.extend_from_slice(&msg.timestep.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for b in &msg.boxes {
        for field in [b.x(), b.y(), b.length(), b.width(), b.yaw()] {
            out.extend_from_slice(&(field as f32).to_le_bytes());
        }
        out.extend_from_slice(&b.track_id().to_le_bytes());
    }
    Ok(out)
}

/// Decodes exactly one message; the buffer must contain nothing else.
pub fn decode(buf: &[u8]) -> Result<AlignmentMessage, WireError> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.u32()?;
    if magic != MAGIC {
        return Err(WireError::BadMagic { found: magic });
    }
    let sender_id = r.u32()?;
    let timestep = r.u32()?;
    let count = r.u16()? as usize;

    // Settle the full length question before touching any box payload.
    let needed = HEADER_LEN + BOX_LEN * count;
    if buf.len() < needed {
        return Err(WireError::Truncated {
            needed,
            got: buf.len(),
        });
    }
    if buf.len() > needed {
        return Err(WireError::TrailingBytes {
            extra: buf.len() - needed,
        });
    }

    let mut boxes = Vec::with_capacity(count);
    for _ in 0..count {
        let x = r.f32()?;
        let y = r.f32()?;
        let length = r.f32()?;
        let width = r.f32()?;
        let yaw = r.f32()?;
        let track_id = r.u32()?;
        boxes.push(TrackedBox::from_decoded(x, y, length, width, yaw, track_id)?);
    }
    Ok(AlignmentMessage {
        sender_id,
        timestep,
        boxes,
    })
}

/// Frames each message with a little-endian u32 length.
pub fn encode_replay(msgs: &[AlignmentMessage]) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    for msg in msgs {
        let body = encode(msg)?;
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
    }
    Ok(out)
}

/// Inverse of `encode_replay`; an empty buffer is an empty log.
pub fn decode_replay(buf: &[u8]) -> Result<Vec<AlignmentMessage>, WireError> {
    let mut msgs = Vec::new();
    let mut rest = buf;
    while !rest.is_empty() {
        if rest.len() < 4 {
            return Err(WireError::Truncated {
                needed: 4,
                got: rest.len(),
            });
        }
        let (prefix, tail) = rest.split_at(4);
        let len = u32::from_le_bytes(prefix.try_into().expect("4-byte split")) as usize;
        if tail.len() < len {
            return Err(WireError::Truncated {
                needed: len,
                got: tail.len(),
            });
        }
        let (body, tail) = tail.split_at(len);
        msgs.push(decode(body)?);
        rest = tail;
    }
    Ok(msgs)
}

/// Communication volume of a message batch. Byte counts come from the wire
/// layout, so nothing has to be encoded to account for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandwidthReport {
    pub total_bytes: u64,
    /// log2 of the byte count; an empty batch reports negative infinity.
    pub log2_bytes: f64,
}

pub fn bandwidth_report(msgs: &[AlignmentMessage]) -> BandwidthReport {
    let total: u64 = msgs.iter().map(|m| encoded_len(m) as u64).sum();
    BandwidthReport {
        total_bytes: total,
        log2_bytes: log2_bytes(total),
    }
}

/// log2 of a byte count with the zero sentinel.
pub fn log2_bytes(total: u64) -> f64 {
    if total == 0 {
        f64::NEG_INFINITY
    } else {
        (total as f64).log2()
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WireError> {
        let end = self.pos.checked_add(n).ok_or(WireError::Truncated {
            needed: usize::MAX,
            got: self.buf.len(),
        })?;
        if end > self.buf.len() {
            return Err(WireError::Truncated {
                needed: end,
                got: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn f32(&mut self) -> Result<f64, WireError> {
        Ok(f64::from(f32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Box whose fields are exactly representable at single precision, so a
    /// round trip reproduces them bit for bit.
    fn clean_box(rng: &mut ChaCha12Rng, track_id: u32) -> TrackedBox {
        let f = |r: &mut ChaCha12Rng, lo: f32, hi: f32| f64::from(r.random_range(lo..hi));
        TrackedBox::new(
            f(rng, -100.0, 100.0),
            f(rng, -100.0, 100.0),
            f(rng, 0.5, 12.0),
            f(rng, 0.5, 4.0),
            f(rng, -3.141_5, 3.141_5),
            track_id,
        )
        .unwrap()
    }

    fn sample_msg(seed: u64, count: usize) -> AlignmentMessage {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        AlignmentMessage {
            sender_id: rng.random(),
            timestep: rng.random_range(0..10_000),
            boxes: (0..count).map(|i| clean_box(&mut rng, i as u32)).collect(),
        }
    }

    #[test]
    fn encoded_sizes() {
        assert_eq!(encoded_len(&sample_msg(1, 0)), 14);
        assert_eq!(encoded_len(&sample_msg(1, 1)), 38);
        let thirty = sample_msg(1, 30);
        assert_eq!(encoded_len(&thirty), 734);
        assert_eq!(encode(&thirty).unwrap().len(), 734);
        assert_abs_diff_eq!(
            bandwidth_report(&[thirty]).log2_bytes,
            9.5196,
            epsilon = 1e-3
        );
    }

    #[test]
    fn round_trip_preserves_every_field() {
        for seed in 0..200u64 {
            let msg = sample_msg(seed, (seed % 7) as usize);
            let back = decode(&encode(&msg).unwrap()).unwrap();
            assert_eq!(back, msg, "seed {seed}");
        }
    }

    #[test]
    fn empty_message_round_trips() {
        let msg = AlignmentMessage {
            sender_id: 3,
            timestep: 99,
            boxes: Vec::new(),
        };
        assert_eq!(decode(&encode(&msg).unwrap()).unwrap(), msg);
    }

    #[test]
    fn bad_magic_detected() {
        let mut bytes = encode(&sample_msg(5, 2)).unwrap();
        bytes[0] ^= 0xFF;
        assert!(matches!(decode(&bytes), Err(WireError::BadMagic { .. })));
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode(&sample_msg(6, 2)).unwrap();
        for cut in [1usize, 10, 20, bytes.len() - 1] {
            assert!(
                matches!(decode(&bytes[..cut]), Err(WireError::Truncated { .. })),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn trailing_bytes_detected() {
        let mut bytes = encode(&sample_msg(7, 1)).unwrap();
        bytes.push(0);
        assert_eq!(decode(&bytes).unwrap_err(), WireError::TrailingBytes { extra: 1 });
    }

    #[test]
    fn count_overflow_rejected() {
        let b = clean_box(&mut ChaCha12Rng::seed_from_u64(0), 0);
        let msg = AlignmentMessage {
            sender_id: 0,
            timestep: 0,
            boxes: vec![b; 65_536],
        };
        assert_eq!(encode(&msg).unwrap_err(), WireError::CountOverflow(65_536));
    }

    #[test]
    fn corrupt_box_fields_rejected() {
        let msg = sample_msg(8, 1);
        let mut bytes = encode(&msg).unwrap();
        // Box length field starts after the header and two f32 coordinates.
        let off = HEADER_LEN + 8;
        bytes[off..off + 4].copy_from_slice(&(-1.0f32).to_le_bytes());
        assert!(matches!(decode(&bytes), Err(WireError::InvalidBox(_))));

        let mut nan = encode(&msg).unwrap();
        nan[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&nan), Err(WireError::InvalidBox(_))));

        let mut wild_yaw = encode(&msg).unwrap();
        let yaw_off = HEADER_LEN + 16;
        wild_yaw[yaw_off..yaw_off + 4].copy_from_slice(&100.0f32.to_le_bytes());
        assert!(matches!(decode(&wild_yaw), Err(WireError::InvalidBox(_))));
    }

    #[test]
    fn replay_round_trip() {
        let log: Vec<AlignmentMessage> = (0..3).map(|s| sample_msg(s, 2 + s as usize)).collect();
        let bytes = encode_replay(&log).unwrap();
        assert_eq!(decode_replay(&bytes).unwrap(), log);
        assert!(decode_replay(&[]).unwrap().is_empty());
    }

    #[test]
    fn replay_truncation_detected() {
        let bytes = encode_replay(&[sample_msg(1, 1), sample_msg(2, 1)]).unwrap();
        assert!(matches!(
            decode_replay(&bytes[..bytes.len() - 3]),
            Err(WireError::Truncated { .. })
        ));
        // A lone partial length prefix is truncation too.
        assert!(matches!(
            decode_replay(&bytes[..2]),
            Err(WireError::Truncated { .. })
        ));
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(
            bandwidth_report(&[]),
            BandwidthReport {
                total_bytes: 0,
                log2_bytes: f64::NEG_INFINITY,
            }
        );
        // 8 headers and 38 boxes land exactly on a power of two.
        let counts = [5usize, 5, 5, 5, 5, 5, 5, 3];
        let msgs: Vec<AlignmentMessage> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| sample_msg(i as u64, c))
            .collect();
        let report = bandwidth_report(&msgs);
        assert_eq!(report.total_bytes, 1024);
        assert_eq!(report.log2_bytes, 10.0);
    }
}
