use serde::{Deserialize, Serialize};

use super::{Keypoint, KeypointSet};

/// Lowe's nearest/second-nearest distance ratio.
pub const RATIO_TEST: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchStats {
    /// Accepted matches (`M`).
    pub matches: usize,
    pub keypoints_a: usize,
    pub keypoints_b: usize,
}

#[derive(Clone, Copy)]
struct Nearest {
    index: usize,
    best: f64,
    second: f64,
}

impl Nearest {
    fn new() -> Self {
        Self {
            index: usize::MAX,
            best: f64::INFINITY,
            second: f64::INFINITY,
        }
    }

    fn offer(&mut self, index: usize, d: f64) {
        if d < self.best {
            self.second = self.best;
            self.best = d;
            self.index = index;
        } else if d < self.second {
            self.second = d;
        }
    }

    /// Ratio test; passes trivially when there is no second candidate.
    fn distinctive(&self) -> bool {
        self.second.is_infinite() || self.best < RATIO_TEST * self.second
    }
}

fn distance(a: &Keypoint, b: &Keypoint) -> f64 {
    a.descriptor
        .iter()
        .zip(&b.descriptor)
        .map(|(x, y)| {
            let d = (x - y) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Counts mutual nearest-neighbor descriptor pairs that pass the ratio test
/// in both directions, which makes `M` symmetric in its arguments.
pub fn sift_match(a: &KeypointSet, b: &KeypointSet) -> MatchStats {
    let (ka, kb) = (a.keypoints.len(), b.keypoints.len());
    let mut stats = MatchStats {
        matches: 0,
        keypoints_a: ka,
        keypoints_b: kb,
    };
    if ka == 0 || kb == 0 {
        return stats;
    }
    let mut from_a = vec![Nearest::new(); ka];
    let mut from_b = vec![Nearest::new(); kb];
    for (i, pa) in a.keypoints.iter().enumerate() {
        for (j, pb) in b.keypoints.iter().enumerate() {
            let d = distance(pa, pb);
            from_a[i].offer(j, d);
            from_b[j].offer(i, d);
        }
    }
    stats.matches = from_a
        .iter()
        .enumerate()
        .filter(|(i, na)| {
            let nb = &from_b[na.index];
            nb.index == *i && na.distinctive() && nb.distinctive()
        })
        .count();
    stats
}
