/// SplitMix64 (Steele, Lea & Flood), the stream behind randomized sequences.
///
/// Bit-exact definition, all arithmetic wrapping modulo 2^64:
///
/// ```text
/// state = state + 0x9E3779B97F4A7C15
/// z = state
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// output z ^ (z >> 31)
/// ```
///
/// The initial state is the seed itself.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Most significant bit of the next output.
    pub fn next_bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}
