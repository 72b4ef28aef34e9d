//! Oracles shared by the integration tests. They are written from the metric
//! definitions and do not call into the crate.

#![allow(dead_code)]

/// All-threshold scan: counts FAR/FRR at every distinct score with binary
/// search over sorted copies, takes the first threshold where FAR - FRR is no
/// longer positive and interpolates linearly from the previous one.
pub fn brute_force_eer(genuine: &[f64], impostor: &[f64]) -> f64 {
    let mut g = genuine.to_vec();
    let mut i = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    i.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let rates = |t: f64| {
        let far = (i.len() - i.partition_point(|&s| s < t)) as f64 / i.len() as f64;
        let frr = g.partition_point(|&s| s < t) as f64 / g.len() as f64;
        (far, frr)
    };
    let mut prev: Option<(f64, f64)> = None;
    for &t in &thresholds {
        let (far, frr) = rates(t);
        let d = far - frr;
        if d <= 0.0 {
            return match prev {
                Some((pfar, pfrr)) if d < 0.0 => {
                    let pd = pfar - pfrr;
                    let a = pd / (pd - d);
                    pfar + a * (far - pfar)
                }
                _ => far,
            };
        }
        prev = Some((far, frr));
    }
    unreachable!("FAR - FRR is never positive at the top score")
}

/// Cosine similarity with plain f64 sums.
pub fn cosine(x: &[f32], y: &[f32]) -> f64 {
    let (mut d, mut nx, mut ny) = (0f64, 0f64, 0f64);
    for (&a, &b) in x.iter().zip(y) {
        d += a as f64 * b as f64;
        nx += a as f64 * a as f64;
        ny += b as f64 * b as f64;
    }
    d / (nx.sqrt() * ny.sqrt())
}
