//! The `.gzc` container: the complete transmitted artifact.
//!
//! Layout (all multi-octet integers big-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GZC1" (0x47 0x5A 0x43 0x31)
//! 4       1     version = 1
//! 5       1     flags: bit0 TEXT_PRESENT, bit1 VISUAL_PRESENT, bits 2-7 zero
//! 6       2     width of the original image
//! 8       2     height of the original image
//! 10      ...   if TEXT_PRESENT:   LEB128 length, text payload (raw DEFLATE)
//!         ...   if VISUAL_PRESENT: codec id octet, LEB128 length, visual payload
//! ```
//!
//! Lengths are unsigned LEB128 limited to 32 bits. Nothing may follow the last
//! declared payload.

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"GZC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;

pub const FLAG_TEXT_PRESENT: u8 = 0b0000_0001;
pub const FLAG_VISUAL_PRESENT: u8 = 0b0000_0010;
const RESERVED_FLAGS: u8 = !(FLAG_TEXT_PRESENT | FLAG_VISUAL_PRESENT);

/// Codec id of the built-in block-transform codec.
pub const CODEC_BUILTIN: u8 = 0;
/// Codec id of an external, opaque codec service.
pub const CODEC_EXTERNAL: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid container field `{field}`: {reason}")]
pub struct ValidationError {
    pub field: &'static str,
    pub reason: String,
}

impl ValidationError {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        Self {
            field,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainerError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("reserved flag bits set: {0:#04x}")]
    ReservedFlags(u8),
    #[error("truncated container while reading {0}")]
    Truncated(&'static str),
    #[error("invalid length prefix for {0}: overlong or exceeds 32 bits")]
    BadLength(&'static str),
    #[error("{0} trailing octet(s) after the last payload")]
    TrailingGarbage(usize),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub flags: u8,
    pub width: u16,
    pub height: u16,
}

impl ContainerHeader {
    pub fn new(width: u16, height: u16, text: bool, visual: bool) -> Self {
        let mut flags = 0;
        if text {
            flags |= FLAG_TEXT_PRESENT;
        }
        if visual {
            flags |= FLAG_VISUAL_PRESENT;
        }
        Self {
            flags,
            width,
            height,
        }
    }

    pub fn text_present(&self) -> bool {
        self.flags & FLAG_TEXT_PRESENT != 0
    }

    pub fn visual_present(&self) -> bool {
        self.flags & FLAG_VISUAL_PRESENT != 0
    }

    pub fn pixel_count(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.flags & RESERVED_FLAGS != 0 {
            return Err(ValidationError::new(
                "flags",
                format!("reserved bits set ({:#04x})", self.flags),
            ));
        }
        if !self.text_present() && !self.visual_present() {
            return Err(ValidationError::new(
                "flags",
                "neither TEXT_PRESENT nor VISUAL_PRESENT is set",
            ));
        }
        if self.width == 0 {
            return Err(ValidationError::new("width", "must be at least 1"));
        }
        if self.height == 0 {
            return Err(ValidationError::new("height", "must be at least 1"));
        }
        Ok(())
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.flags);
        out.extend_from_slice(&self.width.to_be_bytes());
        out.extend_from_slice(&self.height.to_be_bytes());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisualPayload {
    pub codec_id: u8,
    pub data: Vec<u8>,
}

impl VisualPayload {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.codec_id != CODEC_BUILTIN && self.codec_id != CODEC_EXTERNAL {
            return Err(ValidationError::new(
                "visual_payload.codec_id",
                format!("unknown codec id {}", self.codec_id),
            ));
        }
        if self.data.is_empty() {
            return Err(ValidationError::new("visual_payload.data", "empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub header: ContainerHeader,
    pub text_payload: Option<Vec<u8>>,
    pub visual_payload: Option<VisualPayload>,
}

impl Container {
    /// Builds a container whose flags follow the supplied payloads.
    pub fn new(
        width: u16,
        height: u16,
        text_payload: Option<Vec<u8>>,
        visual_payload: Option<VisualPayload>,
    ) -> Result<Self, ValidationError> {
        let container = Self {
            header: ContainerHeader::new(
                width,
                height,
                text_payload.is_some(),
                visual_payload.is_some(),
            ),
            text_payload,
            visual_payload,
        };
        container.validate()?;
        Ok(container)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        self.header.validate()?;
        if self.header.text_present() != self.text_payload.is_some() {
            return Err(ValidationError::new(
                "text_payload",
                "presence does not match TEXT_PRESENT",
            ));
        }
        if self.header.visual_present() != self.visual_payload.is_some() {
            return Err(ValidationError::new(
                "visual_payload",
                "presence does not match VISUAL_PRESENT",
            ));
        }
        if let Some(text) = &self.text_payload {
            check_len("text_payload", text.len())?;
        }
        if let Some(visual) = &self.visual_payload {
            visual.validate()?;
            check_len("visual_payload.data", visual.data.len())?;
        }
        Ok(())
    }

    /// Length in octets of the serialized form.
    pub fn serialized_len(&self) -> usize {
        let mut len = HEADER_LEN;
        if let Some(text) = &self.text_payload {
            len += leb128_len(text.len() as u32) + text.len();
        }
        if let Some(visual) = &self.visual_payload {
            len += 1 + leb128_len(visual.data.len() as u32) + visual.data.len();
        }
        len
    }
}

fn check_len(field: &'static str, len: usize) -> Result<(), ValidationError> {
    if u32::try_from(len).is_err() {
        return Err(ValidationError::new(field, "longer than 2^32 - 1 octets"));
    }
    Ok(())
}

pub fn serialize(container: &Container) -> Result<Vec<u8>, ValidationError> {
    container.validate()?;
    let mut out = Vec::with_capacity(container.serialized_len());
    container.header.write(&mut out);
    if let Some(text) = &container.text_payload {
        write_leb128(&mut out, text.len() as u32);
        out.extend_from_slice(text);
    }
    if let Some(visual) = &container.visual_payload {
        out.push(visual.codec_id);
        write_leb128(&mut out, visual.data.len() as u32);
        out.extend_from_slice(&visual.data);
    }
    debug_assert_eq!(out.len(), container.serialized_len());
    Ok(out)
}

pub fn deserialize(bytes: &[u8]) -> Result<Container, ContainerError> {
    let mut reader = Reader { bytes, pos: 0 };

    let magic: [u8; 4] = reader
        .take(4, "magic")?
        .try_into()
        .expect("take returned 4 octets");
    if magic != MAGIC {
        return Err(ContainerError::BadMagic(magic));
    }
    let version = reader.byte("version")?;
    if version != VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let flags = reader.byte("flags")?;
    if flags & RESERVED_FLAGS != 0 {
        return Err(ContainerError::ReservedFlags(flags));
    }
    let width = reader.u16_be("width")?;
    let height = reader.u16_be("height")?;
    let header = ContainerHeader {
        flags,
        width,
        height,
    };
    header.validate()?;

    let text_payload = if header.text_present() {
        let len = reader.leb128("text length")?;
        Some(reader.take(len as usize, "text payload")?.to_vec())
    } else {
        None
    };
    let visual_payload = if header.visual_present() {
        let codec_id = reader.byte("codec id")?;
        let len = reader.leb128("visual length")?;
        let data = reader.take(len as usize, "visual payload")?.to_vec();
        let payload = VisualPayload { codec_id, data };
        payload.validate()?;
        Some(payload)
    } else {
        None
    };

    let rest = bytes.len() - reader.pos;
    if rest != 0 {
        return Err(ContainerError::TrailingGarbage(rest));
    }
    Ok(Container {
        header,
        text_payload,
        visual_payload,
    })
}

/// Total transmitted bits: eight times the serialized length, overhead included.
pub fn container_bits(container: &Container) -> u64 {
    8 * container.serialized_len() as u64
}

/// Number of octets the unsigned LEB128 encoding of `value` occupies.
pub fn leb128_len(value: u32) -> usize {
    let bits = 32 - value.leading_zeros() as usize;
    bits.div_ceil(7).max(1)
}

pub fn write_leb128(out: &mut Vec<u8>, mut value: u32) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(ContainerError::Truncated(what))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn byte(&mut self, what: &'static str) -> Result<u8, ContainerError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16_be(&mut self, what: &'static str) -> Result<u16, ContainerError> {
        let b = self.take(2, what)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    /// Canonical unsigned LEB128, at most 5 octets and 32 bits of value.
    /// Redundant trailing zero groups are rejected as overlong.
    fn leb128(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        let mut value: u64 = 0;
        for i in 0..5 {
            let byte = self.byte(what)?;
            value |= u64::from(byte & 0x7f) << (7 * i);
            if byte & 0x80 == 0 {
                if i > 0 && byte == 0 {
                    return Err(ContainerError::BadLength(what));
                }
                return u32::try_from(value).map_err(|_| ContainerError::BadLength(what));
            }
        }
        Err(ContainerError::BadLength(what))
    }
}
