use std::time::Instant;

/// Wall-clock seconds spent per kernel category. Categories that an
/// algorithm does not use stay at zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Breakdown {
    pub matmul: f64,
    pub krp_full: f64,
    pub krp_partial: f64,
    pub matvec: f64,
    pub reduce: f64,
    pub reorder: f64,
    pub other: f64,
    pub total: f64,
}

impl Breakdown {
    pub const CATEGORY_NAMES: [&'static str; 7] =
        ["matmul", "krp_full", "krp_partial", "matvec", "reduce", "reorder", "other"];

    pub fn categories(&self) -> [f64; 7] {
        [
            self.matmul,
            self.krp_full,
            self.krp_partial,
            self.matvec,
            self.reduce,
            self.reorder,
            self.other,
        ]
    }

    fn from_categories(c: [f64; 7], total: f64) -> Self {
        Breakdown {
            matmul: c[0],
            krp_full: c[1],
            krp_partial: c[2],
            matvec: c[3],
            reduce: c[4],
            reorder: c[5],
            other: c[6],
            total,
        }
    }

    pub fn category_sum(&self) -> f64 {
        self.categories().iter().sum()
    }

    /// Elementwise sum, including totals.
    pub fn add(&self, other: &Breakdown) -> Breakdown {
        let (a, b) = (self.categories(), other.categories());
        Breakdown::from_categories(std::array::from_fn(|i| a[i] + b[i]), self.total + other.total)
    }

    /// Mean of per-worker breakdowns, so that overlapping parallel work is
    /// not counted once per thread.
    pub fn mean(parts: &[Breakdown]) -> Breakdown {
        if parts.is_empty() {
            return Breakdown::default();
        }
        let sum = parts.iter().fold(Breakdown::default(), |acc, p| acc.add(p));
        let k = parts.len() as f64;
        let c = sum.categories();
        Breakdown::from_categories(std::array::from_fn(|i| c[i] / k), sum.total / k)
    }

    /// Closes the record: sets `total` from `start` and books whatever the
    /// categories did not cover as `other`.
    pub(crate) fn finish(mut self, start: Instant) -> Breakdown {
        self.total = start.elapsed().as_secs_f64();
        self.other = (self.total - self.category_sum()).max(0.0);
        self
    }
}

/// Runs `f` and adds its wall time to `slot`.
#[inline]
pub(crate) fn timed<R>(slot: &mut f64, f: impl FnOnce() -> R) -> R {
    let t = Instant::now();
    let r = f();
    *slot += t.elapsed().as_secs_f64();
    r
}

/// Per-category median (or any order statistic) across repeated runs.
pub fn median(parts: &[Breakdown]) -> Breakdown {
    fn med(mut v: Vec<f64>) -> f64 {
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
    let cats: [f64; 7] = std::array::from_fn(|i| med(parts.iter().map(|p| p.categories()[i]).collect()));
    Breakdown::from_categories(cats, med(parts.iter().map(|p| p.total).collect()))
}
