//! Compensated summation.

/// Running Kahan sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline(always)]
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<KahanSum>().value()
}

/// Kahan dot product of two equally long slices.
pub fn kahan_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect::<KahanSum>().value()
}

/// Adds `scale * row[j]` to the lanes `sums[j]`, one independent Kahan
/// accumulator per lane. Lanes never mix, so the result for each lane is
/// identical to a scalar Kahan loop over the same sequence of terms.
#[inline]
pub(crate) fn kahan_lanes(sums: &mut [f64], comps: &mut [f64], scale: f64, row: &[f64]) {
    let n = sums.len();
    let (sums, comps, row) = (&mut sums[..n], &mut comps[..n], &row[..n]);
    for j in 0..n {
        let y = scale * row[j] - comps[j];
        let t = sums[j] + y;
        comps[j] = (t - sums[j]) - y;
        sums[j] = t;
    }
}
