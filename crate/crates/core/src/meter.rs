/// Counts elements of intermediate buffers allocated by a follow call.
///
/// `peak` is the largest number of simultaneously live intermediate elements;
/// `total` is the cumulative number allocated.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Meter {
    live: usize,
    peak: usize,
    total: usize,
}

impl Meter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alloc(&mut self, elems: usize) {
        self.live += elems;
        self.total += elems;
        self.peak = self.peak.max(self.live);
    }

    pub fn free(&mut self, elems: usize) {
        self.live = self.live.saturating_sub(elems);
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::Meter;

    #[test]
    fn tracks_peak_and_total() {
        let mut m = Meter::new();
        m.alloc(10);
        m.alloc(5);
        m.free(10);
        m.alloc(3);
        assert_eq!((m.live(), m.peak(), m.total()), (8, 15, 18));
    }
}
