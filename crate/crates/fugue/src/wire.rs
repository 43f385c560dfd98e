//! Canonical byte encoding for [`OpMessage`]s.
//!
//! The format is a custom deterministic binary layout rather than a schema
//! toolchain: equal messages encode to identical bytes on every platform,
//! which the simulator's determinism checks and the benchmark's bytes/op
//! metric both rely on.
//!
//! All integers are LEB128 varints (little-endian base-128, 7 data bits per
//! byte, high bit = continuation). An element id is encoded as the replica
//! name's byte length, the name's UTF-8 bytes, then the counter. Layout:
//!
//! ```text
//! insert:  0x00  id  value  parent  side  right-origin
//! delete:  0x01  id
//!
//! id:           varint name-length, name bytes, varint counter
//! value:        varint Unicode scalar
//! parent:       0x00 (root)   | 0x01 id
//! side:         0x00 (left)   | 0x01 (right)
//! right-origin: 0x00 (absent) | 0x01 id | 0x02 (end sentinel)
//! ```
//!
//! The encoding is injective and prefix-free: every field is either a fixed
//! tag or length-prefixed, so a message has exactly one parse. [`decode_op`]
//! consumes the entire buffer and rejects trailing bytes, and every decode
//! error reports the byte offset it arose at.

use thiserror::Error;

use crate::engine::OpMessage;
use crate::id::{ElementId, IdError, Parent, ReplicaId, RightOrigin, Side};

/// A malformed byte buffer, with the offset where decoding failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("unexpected end of input at byte {offset}")]
    UnexpectedEof { offset: usize },
    #[error("varint starting at byte {offset} exceeds 64 bits")]
    VarintOverflow { offset: usize },
    #[error("invalid {field} tag 0x{byte:02x} at byte {offset}")]
    InvalidTag {
        field: &'static str,
        byte: u8,
        offset: usize,
    },
    #[error("replica name at byte {offset} is not valid UTF-8")]
    InvalidUtf8 { offset: usize },
    #[error("replica name at byte {offset} is invalid")]
    InvalidReplicaName {
        offset: usize,
        source: IdError,
    },
    #[error("value {value:#x} at byte {offset} is not a Unicode scalar")]
    InvalidChar { value: u64, offset: usize },
    #[error("{remaining} trailing byte(s) after a complete value at byte {offset}")]
    TrailingBytes { offset: usize, remaining: usize },
}

// Field tags. Kept as constants so the save format can reuse the id and
// right-origin encodings without re-stating magic numbers.
const KIND_INSERT: u8 = 0x00;
const KIND_DELETE: u8 = 0x01;
const PARENT_ROOT: u8 = 0x00;
const PARENT_ELEMENT: u8 = 0x01;
const SIDE_LEFT: u8 = 0x00;
const SIDE_RIGHT: u8 = 0x01;
const ORIGIN_ABSENT: u8 = 0x00;
const ORIGIN_ELEMENT: u8 = 0x01;
const ORIGIN_END: u8 = 0x02;

/// Appends `value` as a LEB128 varint.
pub(crate) fn put_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let mut byte = (value & 0x7f) as u8;
        value >>= 7;
        if value != 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if value == 0 {
            return;
        }
    }
}

pub(crate) fn put_id(out: &mut Vec<u8>, id: &ElementId) {
    let name = id.replica.bytes();
    put_varint(out, name.len() as u64);
    out.extend_from_slice(name);
    put_varint(out, id.counter);
}

pub(crate) fn put_char(out: &mut Vec<u8>, value: char) {
    put_varint(out, value as u64);
}

/// A cursor over an input buffer that tracks its byte offset for error
/// reporting. Shared by the message and saved-document decoders.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, offset: 0 }
    }

    pub(crate) fn offset(&self) -> usize {
        self.offset
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }

    pub(crate) fn byte(&mut self) -> Result<u8, WireError> {
        let byte = *self
            .bytes
            .get(self.offset)
            .ok_or(WireError::UnexpectedEof { offset: self.offset })?;
        self.offset += 1;
        Ok(byte)
    }

    pub(crate) fn take(&mut self, len: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < len {
            return Err(WireError::UnexpectedEof {
                offset: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }

    pub(crate) fn varint(&mut self) -> Result<u64, WireError> {
        let start = self.offset;
        let mut value: u64 = 0;
        for shift in (0..64).step_by(7) {
            let byte = self.byte()?;
            let data = (byte & 0x7f) as u64;
            // The final group (shift 63) has one usable bit; anything larger
            // overflows.
            if shift == 63 && data > 1 {
                return Err(WireError::VarintOverflow { offset: start });
            }
            value |= data << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(WireError::VarintOverflow { offset: start })
    }

    pub(crate) fn id(&mut self) -> Result<ElementId, WireError> {
        let len = self.varint()? as usize;
        let name_offset = self.offset;
        let name_bytes = self.take(len)?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| WireError::InvalidUtf8 { offset: name_offset })?;
        let replica = ReplicaId::new(name).map_err(|source| WireError::InvalidReplicaName {
            offset: name_offset,
            source,
        })?;
        let counter = self.varint()?;
        Ok(ElementId::new(replica, counter))
    }

    pub(crate) fn char_value(&mut self) -> Result<char, WireError> {
        let offset = self.offset;
        let value = self.varint()?;
        u32::try_from(value)
            .ok()
            .and_then(char::from_u32)
            .ok_or(WireError::InvalidChar { value, offset })
    }

    /// Fails unless the whole buffer has been consumed.
    pub(crate) fn expect_end(&self) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::TrailingBytes {
                offset: self.offset,
                remaining: self.remaining(),
            });
        }
        Ok(())
    }
}

/// Encodes a message into its canonical bytes.
pub fn encode_op(msg: &OpMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(16);
    match msg {
        OpMessage::Insert {
            id,
            value,
            parent,
            side,
            right_origin,
        } => {
            out.push(KIND_INSERT);
            put_id(&mut out, id);
            put_char(&mut out, *value);
            match parent {
                Parent::Root => out.push(PARENT_ROOT),
                Parent::Element(p) => {
                    out.push(PARENT_ELEMENT);
                    put_id(&mut out, p);
                }
            }
            out.push(match side {
                Side::Left => SIDE_LEFT,
                Side::Right => SIDE_RIGHT,
            });
            match right_origin {
                None => out.push(ORIGIN_ABSENT),
                Some(RightOrigin::Element(o)) => {
                    out.push(ORIGIN_ELEMENT);
                    put_id(&mut out, o);
                }
                Some(RightOrigin::End) => out.push(ORIGIN_END),
            }
        }
        OpMessage::Delete { id } => {
            out.push(KIND_DELETE);
            put_id(&mut out, id);
        }
    }
    out
}

/// Decodes one message, consuming the entire buffer.
pub fn decode_op(bytes: &[u8]) -> Result<OpMessage, WireError> {
    let mut reader = Reader::new(bytes);
    let msg = decode_op_from(&mut reader)?;
    reader.expect_end()?;
    Ok(msg)
}

/// Decodes one message from the reader's current position (the saved-format
/// loader and stream decoders build on this).
pub(crate) fn decode_op_from(reader: &mut Reader<'_>) -> Result<OpMessage, WireError> {
    let kind_offset = reader.offset();
    match reader.byte()? {
        b if b == KIND_INSERT => {
            let id = reader.id()?;
            let value = reader.char_value()?;
            let parent_offset = reader.offset();
            let parent = match reader.byte()? {
                b if b == PARENT_ROOT => Parent::Root,
                b if b == PARENT_ELEMENT => Parent::Element(reader.id()?),
                byte => {
                    return Err(WireError::InvalidTag {
                        field: "parent",
                        byte,
                        offset: parent_offset,
                    })
                }
            };
            let side_offset = reader.offset();
            let side = match reader.byte()? {
                b if b == SIDE_LEFT => Side::Left,
                b if b == SIDE_RIGHT => Side::Right,
                byte => {
                    return Err(WireError::InvalidTag {
                        field: "side",
                        byte,
                        offset: side_offset,
                    })
                }
            };
            let origin_offset = reader.offset();
            let right_origin = match reader.byte()? {
                b if b == ORIGIN_ABSENT => None,
                b if b == ORIGIN_ELEMENT => Some(RightOrigin::Element(reader.id()?)),
                b if b == ORIGIN_END => Some(RightOrigin::End),
                byte => {
                    return Err(WireError::InvalidTag {
                        field: "right-origin",
                        byte,
                        offset: origin_offset,
                    })
                }
            };
            Ok(OpMessage::Insert {
                id,
                value,
                parent,
                side,
                right_origin,
            })
        }
        b if b == KIND_DELETE => Ok(OpMessage::Delete { id: reader.id()? }),
        byte => Err(WireError::InvalidTag {
            field: "kind",
            byte,
            offset: kind_offset,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rid(name: &str) -> ReplicaId {
        ReplicaId::new(name).unwrap()
    }

    fn eid(name: &str, counter: u64) -> ElementId {
        ElementId::new(rid(name), counter)
    }

    /// Draws a structurally arbitrary message (not necessarily one a replica
    /// would generate — the codec must handle the whole message space).
    fn fuzz_message(rng: &mut ChaCha8Rng) -> OpMessage {
        let name_pool = ["a", "B", "replica-7", "仮名", "x y z", "!"];
        let any_id = |rng: &mut ChaCha8Rng| {
            eid(
                name_pool[rng.gen_range(0..name_pool.len())],
                rng.gen_range(0..u64::MAX),
            )
        };
        if rng.gen_bool(0.2) {
            return OpMessage::Delete { id: any_id(rng) };
        }
        let parent = if rng.gen_bool(0.3) {
            Parent::Root
        } else {
            Parent::Element(any_id(rng))
        };
        let right_origin = match rng.gen_range(0..3) {
            0 => None,
            1 => Some(RightOrigin::End),
            _ => Some(RightOrigin::Element(any_id(rng))),
        };
        OpMessage::Insert {
            id: any_id(rng),
            value: char::from_u32(rng.gen_range(0..0x110000)).unwrap_or('\u{fffd}'),
            parent,
            side: if rng.gen_bool(0.5) { Side::Left } else { Side::Right },
            right_origin,
        }
    }

    #[test]
    fn fuzzed_messages_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0e11c0de);
        for _ in 0..10_000 {
            let msg = fuzz_message(&mut rng);
            let bytes = encode_op(&msg);
            assert_eq!(decode_op(&bytes).unwrap(), msg, "bytes {bytes:02x?}");
        }
    }

    #[test]
    fn equal_messages_encode_identically() {
        // Build the same message along two construction paths.
        let direct = OpMessage::Insert {
            id: eid("editor", 41),
            value: '√',
            parent: Parent::Element(eid("editor", 40)),
            side: Side::Right,
            right_origin: Some(RightOrigin::End),
        };
        let via_parts = {
            let replica = rid(&format!("edi{}", "tor"));
            OpMessage::Insert {
                id: ElementId::new(replica.clone(), 40 + 1),
                value: char::from_u32(0x221a).unwrap(),
                parent: Parent::Element(ElementId::new(replica, 40)),
                side: Side::Right,
                right_origin: Some(RightOrigin::End),
            }
        };
        assert_eq!(direct, via_parts);
        assert_eq!(encode_op(&direct), encode_op(&via_parts));
    }

    #[test]
    fn truncated_buffers_error_without_partial_messages() {
        let msg = OpMessage::Insert {
            id: eid("r", 3),
            value: 'q',
            parent: Parent::Root,
            side: Side::Right,
            right_origin: Some(RightOrigin::Element(eid("r", 2))),
        };
        let bytes = encode_op(&msg);
        for len in 0..bytes.len() {
            let err = decode_op(&bytes[..len]).unwrap_err();
            assert!(
                matches!(err, WireError::UnexpectedEof { .. }),
                "prefix of {len} bytes: {err}"
            );
        }
    }

    #[test]
    fn trailing_bytes_are_rejected_with_the_offset() {
        let mut bytes = encode_op(&OpMessage::Delete { id: eid("r", 0) });
        let end = bytes.len();
        bytes.extend_from_slice(&[0xAA, 0xBB]);
        assert_eq!(
            decode_op(&bytes).unwrap_err(),
            WireError::TrailingBytes {
                offset: end,
                remaining: 2
            }
        );
    }

    #[test]
    fn malformed_fields_report_their_offsets() {
        // Kind tag.
        assert_eq!(
            decode_op(&[0x7f]).unwrap_err(),
            WireError::InvalidTag { field: "kind", byte: 0x7f, offset: 0 }
        );

        // Varint that never terminates within 64 bits.
        let mut bytes = vec![KIND_DELETE];
        bytes.extend_from_slice(&[0x80; 10]);
        assert_eq!(bytes.len(), 11);
        assert_eq!(
            decode_op(&bytes).unwrap_err(),
            WireError::VarintOverflow { offset: 1 }
        );

        // Name that is not UTF-8.
        let bytes = vec![KIND_DELETE, 0x01, 0xff, 0x00];
        assert_eq!(
            decode_op(&bytes).unwrap_err(),
            WireError::InvalidUtf8 { offset: 2 }
        );

        // Empty replica name.
        let bytes = vec![KIND_DELETE, 0x00, 0x00];
        assert!(matches!(
            decode_op(&bytes).unwrap_err(),
            WireError::InvalidReplicaName { offset: 2, .. }
        ));

        // Surrogate code point as the value.
        let mut bytes = vec![KIND_INSERT];
        put_id(&mut bytes, &eid("r", 0));
        let value_offset = bytes.len();
        put_varint(&mut bytes, 0xd800);
        let err = decode_op(&bytes).unwrap_err();
        assert_eq!(
            err,
            WireError::InvalidChar { value: 0xd800, offset: value_offset }
        );
    }

    #[test]
    fn varints_use_the_minimal_leb128_bytes() {
        let mut out = Vec::new();
        put_varint(&mut out, 0);
        put_varint(&mut out, 127);
        put_varint(&mut out, 128);
        put_varint(&mut out, 300);
        assert_eq!(out, [0x00, 0x7f, 0x80, 0x01, 0xac, 0x02]);

        let mut reader = Reader::new(&out);
        assert_eq!(reader.varint().unwrap(), 0);
        assert_eq!(reader.varint().unwrap(), 127);
        assert_eq!(reader.varint().unwrap(), 128);
        assert_eq!(reader.varint().unwrap(), 300);
        reader.expect_end().unwrap();

        let mut max = Vec::new();
        put_varint(&mut max, u64::MAX);
        assert_eq!(max.len(), 10);
        assert_eq!(Reader::new(&max).varint().unwrap(), u64::MAX);
    }
}
