use rand::Rng;

use super::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::seed::stage_rng;

/// Greedy max-min sampling of `m` centers.
///
/// Seed 0 starts from the point nearest the cloud centroid; any other seed
/// draws the start uniformly from a stream derived from the seed. Ties in
/// the max-min step go to the lowest id.
pub fn farthest_point_sample(cloud: &PointCloud, m: usize, seed: u64) -> Result<Vec<usize>> {
    check(cloud, m)?;
    let start = if seed == 0 {
        let c = cloud.centroid();
        cloud
            .positions()
            .iter()
            .enumerate()
            .min_by(|(ia, a), (ib, b)| {
                (*a - c)
                    .norm_squared()
                    .total_cmp(&(*b - c).norm_squared())
                    .then(ia.cmp(ib))
            })
            .map(|(i, _)| i)
            .expect("non-empty")
    } else {
        stage_rng(seed, "fps").gen_range(0..cloud.len())
    };
    farthest_point_sample_from(cloud, m, start)
}

/// Farthest point sampling from an explicit start point.
pub fn farthest_point_sample_from(cloud: &PointCloud, m: usize, start: usize) -> Result<Vec<usize>> {
    check(cloud, m)?;
    if start >= cloud.len() {
        return Err(Error::IdOutOfRange {
            id: start,
            n: cloud.len(),
        });
    }
    let pts = cloud.positions();
    let mut min_dist = vec![f64::INFINITY; pts.len()];
    let mut centers = Vec::with_capacity(m);
    let mut current = start;
    for _ in 0..m {
        centers.push(current);
        let c = pts[current];
        min_dist[current] = -1.0;
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, (p, d)) in pts.iter().zip(min_dist.iter_mut()).enumerate() {
            if *d < 0.0 {
                continue;
            }
            let dist = (p - c).norm_squared();
            if dist < *d {
                *d = dist;
            }
            if *d > best.0 {
                best = (*d, i);
            }
        }
        current = best.1;
    }
    Ok(centers)
}

fn check(cloud: &PointCloud, m: usize) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if m == 0 || m > cloud.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {m} centers from {} points",
            cloud.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn line(n: usize) -> PointCloud {
        PointCloud::new((0..n).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect()).unwrap()
    }

    /// Brute-force greedy max-min: recompute every min-distance from scratch.
    fn oracle(cloud: &PointCloud, m: usize, start: usize) -> Vec<usize> {
        let pts = cloud.positions();
        let mut chosen = vec![start];
        while chosen.len() < m {
            let mut best = (f64::NEG_INFINITY, 0);
            for i in 0..pts.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let d = chosen
                    .iter()
                    .map(|&c| (pts[i] - pts[c]).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                if d > best.0 {
                    best = (d, i);
                }
            }
            chosen.push(best.1);
        }
        chosen
    }

    #[test]
    fn m_equal_n_is_a_permutation() {
        let cloud = line(37);
        let mut ids = farthest_point_sample(&cloud, 37, 5).unwrap();
        ids.sort_unstable();
        assert_eq!(ids, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn m_one_is_start_only() {
        let cloud = line(10);
        // centroid is 4.5; ids 4 and 5 tie, lowest wins
        assert_eq!(farthest_point_sample(&cloud, 1, 0).unwrap(), vec![4]);
        let seeded = farthest_point_sample(&cloud, 1, 99).unwrap();
        assert_eq!(seeded.len(), 1);
        assert_eq!(seeded, farthest_point_sample(&cloud, 1, 99).unwrap());
    }

    #[test]
    fn line_from_endpoint_picks_ends_and_middle() {
        let cloud = line(100);
        let got = farthest_point_sample_from(&cloud, 3, 0).unwrap();
        assert_eq!(got, oracle(&cloud, 3, 0));
        assert_eq!(got[0], 0);
        assert_eq!(got[1], 99);
        assert!((got[2] as i64 - 49).abs() <= 1);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let mut rng = crate::seed::stage_rng(3, "test");
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        assert_eq!(
            farthest_point_sample_from(&cloud, 25, 17).unwrap(),
            oracle(&cloud, 25, 17)
        );
    }

    #[test]
    fn too_many_centers() {
        assert!(farthest_point_sample(&line(5), 6, 0).is_err());
        assert!(farthest_point_sample(&line(5), 0, 0).is_err());
    }
}
