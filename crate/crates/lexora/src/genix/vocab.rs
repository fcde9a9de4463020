//! Character vocabulary: three specials, ten sentinels for span
//! corruption, then printable ASCII.

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
/// Sentinel ids start right after the specials.
pub const N_SENTINELS: usize = 10;
const FIRST_SENTINEL: u32 = 3;
const FIRST_CHAR: u32 = FIRST_SENTINEL + N_SENTINELS as u32;
const CHAR_LO: u32 = 0x20;
const CHAR_HI: u32 = 0x7e;

/// Fixed mapping between printable-ASCII text and token ids.
#[derive(Clone, Copy, Debug, Default)]
pub struct Vocab;

impl Vocab {
    pub fn new() -> Vocab {
        Vocab
    }

    pub fn size(&self) -> usize {
        (FIRST_CHAR + (CHAR_HI - CHAR_LO) + 1) as usize
    }

    pub fn sentinel(&self, k: usize) -> u32 {
        assert!(k < N_SENTINELS, "sentinel {k} out of range");
        FIRST_SENTINEL + k as u32
    }

    pub fn is_sentinel(&self, id: u32) -> bool {
        (FIRST_SENTINEL..FIRST_CHAR).contains(&id)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.chars()
            .map(|c| {
                let cp = c as u32;
                if (CHAR_LO..=CHAR_HI).contains(&cp) {
                    Ok(FIRST_CHAR + (cp - CHAR_LO))
                } else {
                    Err(Error::Invalid(format!("character {c:?} is outside the model vocabulary")))
                }
            })
            .collect()
    }

    /// Render ids back to text. Specials render as nothing; sentinels
    /// render as visible `<s0>`..`<s9>` markers (they never appear in
    /// well-formed task output).
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::with_capacity(ids.len());
        for &id in ids {
            if id < FIRST_SENTINEL {
                continue;
            }
            if id < FIRST_CHAR {
                out.push_str(&format!("<s{}>", id - FIRST_SENTINEL));
            } else if id - FIRST_CHAR <= CHAR_HI - CHAR_LO {
                out.push(char::from_u32(CHAR_LO + (id - FIRST_CHAR)).unwrap());
            } else {
                out.push('\u{fffd}');
            }
        }
        out
    }
}
