//! Insertion-ordered open-addressing index shared by join and group tables.
//!
//! Entries live in a dense vector in insertion order; the slot array holds
//! entry numbers and is probed linearly from the top bits of the hash.
//! Capacity is a power of two, starting at 16 and doubling past 70% load.
//! The native backend emits the same scheme.

pub const HASH_MUL: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
pub const NULL_HASH: u64 = 0x2545_F491_4F6C_DD1D;
const EMPTY: u32 = u32::MAX;

#[inline]
pub fn hash_i64(x: i64) -> u64 {
    (x as u64).wrapping_mul(HASH_MUL)
}

#[inline]
pub fn hash_bytes(b: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &c in b {
        h ^= c as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Bits of a float key: -0.0 folds into +0.0 and every NaN into one.
#[inline]
pub fn canonical_f64_bits(x: f64) -> u64 {
    if x.is_nan() {
        f64::NAN.to_bits()
    } else if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

#[inline]
pub fn hash_f64(x: f64) -> u64 {
    hash_i64(canonical_f64_bits(x) as i64)
}

#[inline]
pub fn combine(h: u64, k: u64) -> u64 {
    (h.rotate_left(26) ^ k).wrapping_mul(HASH_MUL)
}

#[derive(Clone, Debug)]
pub struct RawIndex {
    slots: Vec<u32>,
    bits: u32,
    hashes: Vec<u64>,
}

impl Default for RawIndex {
    fn default() -> Self {
        RawIndex::new()
    }
}

impl RawIndex {
    pub fn new() -> Self {
        RawIndex { slots: vec![EMPTY; 16], bits: 4, hashes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    #[inline]
    fn home(&self, hash: u64) -> usize {
        (hash >> (64 - self.bits)) as usize
    }

    /// Entry whose hash equals `hash` and for which `eq` holds.
    #[inline]
    pub fn find(&self, hash: u64, mut eq: impl FnMut(usize) -> bool) -> Option<usize> {
        let mask = self.slots.len() - 1;
        let mut i = self.home(hash);
        loop {
            let e = self.slots[i];
            if e == EMPTY {
                return None;
            }
            let e = e as usize;
            if self.hashes[e] == hash && eq(e) {
                return Some(e);
            }
            i = (i + 1) & mask;
        }
    }

    /// Appends a new entry (the caller checked it is absent) and returns
    /// its number.
    pub fn insert(&mut self, hash: u64) -> usize {
        if (self.hashes.len() + 1) * 10 > self.slots.len() * 7 {
            self.grow();
        }
        let e = self.hashes.len();
        self.hashes.push(hash);
        self.place(hash, e as u32);
        e
    }

    fn place(&mut self, hash: u64, e: u32) {
        let mask = self.slots.len() - 1;
        let mut i = self.home(hash);
        while self.slots[i] != EMPTY {
            i = (i + 1) & mask;
        }
        self.slots[i] = e;
    }

    fn grow(&mut self) {
        self.bits += 1;
        self.slots = vec![EMPTY; 1 << self.bits];
        for e in 0..self.hashes.len() {
            self.place(self.hashes[e], e as u32);
        }
    }
}
