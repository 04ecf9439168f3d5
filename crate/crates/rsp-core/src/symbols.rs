//! Classification of pictorial/symbol characters.
//!
//! IPTs decorate contact segments with emoji and other symbol characters;
//! several features and the segmenter need a shared definition of "symbol".

use crate::symbols_table::SYMBOL_RANGES;

// Emoji codepoints outside the S* general categories (keycap digits stay in
// their own categories; these ranges cover pictographs assigned after the
// embedded table's Unicode version).
const EXTRA_EMOJI_RANGES: &[(u32, u32)] = &[
    (0x1F900, 0x1F9FF), // supplemental symbols and pictographs
    (0x1FA70, 0x1FAFF), // symbols and pictographs extended-A
];

/// True when `c` has Unicode general category Sm/Sc/Sk/So or sits in an
/// emoji presentation range.
pub fn is_symbol_char(c: char) -> bool {
    let cp = c as u32;
    in_ranges(SYMBOL_RANGES, cp) || in_ranges(EXTRA_EMOJI_RANGES, cp)
}

fn in_ranges(ranges: &[(u32, u32)], cp: u32) -> bool {
    ranges
        .binary_search_by(|&(lo, hi)| {
            if cp < lo {
                std::cmp::Ordering::Greater
            } else if cp > hi {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        })
        .is_ok()
}
