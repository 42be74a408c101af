//! Four-byte guidance option carried on uplink ACKs.
//!
//! Wire layout, big endian:
//!
//! ```text
//!  0               1               2               3
//! +-------------------------------+---------------+---------------+
//! |           mantissa            |   unit_exp    |     flags     |
//! +-------------------------------+---------------+---------------+
//! ```
//!
//! The rate is `mantissa * 2^unit_exp` bits/s. Flag bit 0 marks the value as
//! valid; the remaining bits are reserved and must be zero. The encoder picks
//! the smallest exponent whose rounded mantissa fits in 16 bits, so every
//! encoder output with a non-zero exponent has a mantissa of at least 2^15
//! and the relative quantization error stays below 2^-16.

use crate::Micros;

pub const FLAG_VALID: u8 = 0x01;
pub const WIRE_LEN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GuidanceFeedback {
    pub mantissa: u16,
    pub unit_exp: u8,
    pub flags: u8,
    /// When the base station stamped the value. Not part of the 4-byte
    /// option; it travels with the ACK record.
    pub stamped_ts: Micros,
}

impl GuidanceFeedback {
    pub fn invalid(stamped_ts: Micros) -> Self {
        GuidanceFeedback {
            mantissa: 0,
            unit_exp: 0,
            flags: 0,
            stamped_ts,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.flags & FLAG_VALID != 0
    }

    pub fn to_bytes(&self) -> [u8; WIRE_LEN] {
        let [hi, lo] = self.mantissa.to_be_bytes();
        [hi, lo, self.unit_exp, self.flags]
    }

    pub fn from_bytes(bytes: [u8; WIRE_LEN], stamped_ts: Micros) -> Self {
        GuidanceFeedback {
            mantissa: u16::from_be_bytes([bytes[0], bytes[1]]),
            unit_exp: bytes[2],
            flags: bytes[3],
            stamped_ts,
        }
    }
}

/// Encodes a rate in bits/s. Negative, NaN and infinite rates produce a
/// feedback with the valid flag cleared.
pub fn encode_rate(rate_bps: f64, stamped_ts: Micros) -> GuidanceFeedback {
    if !rate_bps.is_finite() || rate_bps < 0.0 {
        return GuidanceFeedback::invalid(stamped_ts);
    }
    let mut exp = 0u8;
    loop {
        let m = (rate_bps / 2f64.powi(exp as i32)).round();
        if m <= u16::MAX as f64 {
            return GuidanceFeedback {
                mantissa: m as u16,
                unit_exp: exp,
                flags: FLAG_VALID,
                stamped_ts,
            };
        }
        if exp == u8::MAX {
            return GuidanceFeedback::invalid(stamped_ts);
        }
        exp += 1;
    }
}

/// Decodes to bits/s; `None` when the valid flag is clear.
pub fn decode_rate(fb: &GuidanceFeedback) -> Option<f64> {
    if !fb.is_valid() {
        return None;
    }
    Some(fb.mantissa as f64 * 2f64.powi(fb.unit_exp as i32))
}

/// Value a rate takes after one trip through the codec.
pub fn quantize(rate_bps: f64) -> Option<f64> {
    decode_rate(&encode_rate(rate_bps, 0))
}
