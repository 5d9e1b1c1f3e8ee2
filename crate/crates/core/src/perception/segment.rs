//! Breadth-first segmentation over neighbouring beams of a range image.
//!
//! Two neighbouring returns `p`, `k` belong to the same object when
//! `atan(d₂ sin α / (d₁ − d₂ cos α)) > θ`, where `d₁`/`d₂` are the larger and
//! smaller range and `α` the angle between the beams.

use super::scan::Scan;
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Beam indices, in visiting order.
    pub members: Vec<usize>,
    pub centroid: Vec2,
    /// Largest point-to-centroid distance.
    pub radius: f64,
}

pub fn merge_angle(range_a: f64, range_b: f64, alpha: f64) -> f64 {
    let d1 = range_a.max(range_b);
    let d2 = range_a.min(range_b);
    (d2 * alpha.sin()).atan2(d1 - d2 * alpha.cos())
}

pub fn should_merge(range_a: f64, range_b: f64, alpha: f64, theta: f64) -> bool {
    merge_angle(range_a, range_b, alpha) > theta
}

pub(crate) fn neighbours(scan: &Scan, i: usize) -> impl Iterator<Item = usize> {
    let n = scan.ranges.len();
    let wrap = scan.is_full_circle();
    let prev = if i > 0 {
        Some(i - 1)
    } else if wrap && n > 2 {
        Some(n - 1)
    } else {
        None
    };
    let next = if i + 1 < n {
        Some(i + 1)
    } else if wrap && n > 2 {
        Some(0)
    } else {
        None
    };
    prev.into_iter().chain(next)
}

pub fn segment(scan: &Scan, theta: f64) -> Vec<Cluster> {
    let n = scan.ranges.len();
    let alpha = scan.angular_resolution;
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters = Vec::new();

    for seed in 0..n {
        if scan.ranges[seed].is_none() || label[seed].is_some() {
            continue;
        }
        let id = clusters.len();
        let mut members = Vec::new();
        let mut centroid = Vec2::zeros();
        let mut queue = VecDeque::from([seed]);
        label[seed] = Some(id);
        while let Some(k) = queue.pop_front() {
            members.push(k);
            let pk = scan.point(k).expect("queued beams have returns");
            centroid += (pk - centroid) / members.len() as f64;
            let rk = scan.ranges[k].expect("queued beams have returns");
            for p in neighbours(scan, k) {
                let Some(rp) = scan.ranges[p] else { continue };
                if label[p].is_none() && should_merge(rp, rk, alpha, theta) {
                    label[p] = Some(id);
                    queue.push_back(p);
                }
            }
        }
        let radius =
            members.iter().map(|&m| (scan.point(m).expect("member has return") - centroid).norm()).fold(0.0, f64::max);
        clusters.push(Cluster { members, centroid, radius });
    }
    clusters
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn scan(ranges: Vec<Option<f64>>, alpha: f64) -> Scan {
        Scan { ranges, angular_resolution: alpha, start_angle: 0.0, max_range: 20.0, timestamp: 0.0 }
    }

    #[test]
    fn equal_ranges_merge_at_right_angle_identity() {
        let alpha = 0.01;
        assert!((merge_angle(7.0, 7.0, alpha) - (FRAC_PI_2 - alpha / 2.0)).abs() < 1e-12);
        let s = scan(vec![Some(7.0), Some(7.0)], alpha);
        assert_eq!(segment(&s, 0.17).len(), 1);
    }

    #[test]
    fn range_jump_splits() {
        let angle = merge_angle(5.0, 20.0, 0.006);
        assert!((angle - (5.0 * 0.006f64.sin()).atan2(20.0 - 5.0 * 0.006f64.cos())).abs() < 1e-15);
        assert!(angle < 0.17);
        let s = scan(vec![Some(5.0), Some(20.0)], 0.006);
        assert_eq!(segment(&s, 0.17).len(), 2);
    }

    #[test]
    fn merge_is_symmetric() {
        assert_eq!(merge_angle(3.0, 9.0, 0.02), merge_angle(9.0, 3.0, 0.02));
    }

    #[test]
    fn gaps_break_clusters_and_wrap_joins() {
        let n = 8;
        let alpha = 2.0 * PI / n as f64;
        let mut r = vec![None; n];
        r[0] = Some(4.0);
        r[7] = Some(4.0);
        r[3] = Some(4.0);
        let c = segment(&scan(r, alpha), 0.1);
        assert_eq!(c.len(), 2);
        let mut sizes: Vec<_> = c.iter().map(|c| c.members.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 2]);
    }

    #[test]
    fn centroid_and_radius_of_arc() {
        let alpha = 0.01;
        let s = scan(vec![Some(10.0); 3], alpha);
        let c = &segment(&s, 0.1)[0];
        let pts: Vec<Vec2> = (0..3).map(|i| s.point(i).unwrap()).collect();
        let mean = (pts[0] + pts[1] + pts[2]) / 3.0;
        assert!((c.centroid - mean).norm() < 1e-12);
        let rad = pts.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
        assert!((c.radius - rad).abs() < 1e-12);
    }
}
