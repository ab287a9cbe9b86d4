//! Crockford base32 as used by TypeID suffixes.
//!
//! A 128-bit value is written as 26 symbols (130 bits), most significant
//! first, so the leading symbol only ever carries three bits.

pub const ALPHABET: &[u8; 32] = b"0123456789abcdefghjkmnpqrstvwxyz";

/// Number of symbols in an encoded 128-bit value.
pub const ENCODED_LEN: usize = 26;

const INVALID: u8 = 0xff;

const DECODE: [u8; 256] = {
    let mut table = [INVALID; 256];
    let mut i = 0;
    while i < 32 {
        let c = ALPHABET[i];
        table[c as usize] = i as u8;
        table[c.to_ascii_uppercase() as usize] = i as u8;
        i += 1;
    }
    table
};

pub fn encode(value: u128) -> String {
    let mut out = [0u8; ENCODED_LEN];
    for (i, slot) in out.iter_mut().enumerate() {
        let shift = 5 * (ENCODED_LEN - 1 - i);
        *slot = ALPHABET[((value >> shift) & 0x1f) as usize];
    }
    // ALPHABET is ASCII.
    String::from_utf8(out.to_vec()).expect("ascii")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeError {
    Length(usize),
    Symbol(char),
    Overflow,
}

/// Decodes 26 symbols (either case) back into the 128-bit value.
pub fn decode(text: &str) -> Result<u128, DecodeError> {
    if text.len() != ENCODED_LEN {
        return Err(DecodeError::Length(text.chars().count()));
    }
    let mut value: u128 = 0;
    for (i, c) in text.chars().enumerate() {
        let digit = if c.is_ascii() { DECODE[c as usize] } else { INVALID };
        if digit == INVALID {
            return Err(DecodeError::Symbol(c));
        }
        if i == 0 && digit > 7 {
            return Err(DecodeError::Overflow);
        }
        value = (value << 5) | u128::from(digit);
    }
    Ok(value)
}
