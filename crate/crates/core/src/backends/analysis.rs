//! In-process feature encoder and point tracker feeding the filters.
//!
//! These stand in for a visual encoder and a dense point tracker at desk scale. The
//! encoder summarizes coarse luma layout; the tracker follows grid points by block
//! matching between consecutive frames.

use crate::filtering::Trajectory;
use crate::media_io::{grid_points, luma, GridSpec, MediaError, Video};

pub const PATCH_RADIUS: i64 = 2;
pub const DEFAULT_SEARCH_RADIUS: u32 = 3;

/// Splits `dim` into a rows x cols cell layout with rows <= cols.
fn cell_layout(dim: usize) -> (usize, usize) {
    let rows = (1..=dim)
        .take_while(|r| r * r <= dim)
        .filter(|r| dim % r == 0)
        .last()
        .unwrap_or(1);
    (rows, dim / rows)
}

fn luma_plane(frame: &[u8]) -> Vec<u8> {
    frame
        .chunks_exact(3)
        .map(|p| luma([p[0], p[1], p[2]]))
        .collect()
}

/// Mean-centred cell luma averaged over the first, middle and last frames.
///
/// A featureless video centres to the zero vector; it is mapped to the first unit
/// vector instead, so all blank videos count as duplicates of each other.
pub fn encode_features(video: &Video, dim: usize) -> Result<Vec<f64>, MediaError> {
    let h = video.header();
    let (rows, cols) = cell_layout(dim.max(1));
    if (h.width as usize) < cols || (h.height as usize) < rows {
        return Err(MediaError::GridTooDense {
            rows: rows as u32,
            cols: cols as u32,
            width: h.width,
            height: h.height,
        });
    }
    let (w, ht) = (h.width as usize, h.height as usize);
    let n = h.frame_count;
    let mut picks = vec![0, n / 2, n - 1];
    picks.dedup();

    let mut sums = vec![0.0f64; rows * cols];
    let mut counts = vec![0usize; rows * cols];
    for &f in &picks {
        let plane = luma_plane(video.frame(f)?);
        for y in 0..ht {
            let r = y * rows / ht;
            for x in 0..w {
                let c = x * cols / w;
                sums[r * cols + c] += plane[y * w + x] as f64;
                counts[r * cols + c] += 1;
            }
        }
    }
    let mut v: Vec<f64> = sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= mean;
    }
    if v.iter().all(|x| x.abs() < 1e-9) {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    }
    Ok(v)
}

fn search_offsets(radius: i64) -> Vec<(i64, i64)> {
    let mut offs: Vec<(i64, i64)> = (-radius..=radius)
        .flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy)))
        .collect();
    offs.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    offs
}

/// Tracks the cell centres of `grid` through the video.
///
/// Between consecutive frames, each point moves by the offset within
/// `search_radius` that minimizes the sum of absolute luma differences over a 5x5
/// patch around the point's grid location; ties prefer the smaller offset. The
/// trajectory accumulates those per-frame displacements.
pub fn track_grid(video: &Video, grid: GridSpec, search_radius: u32) -> Result<Vec<Trajectory>, MediaError> {
    let h = video.header();
    let pts = grid_points(h.width, h.height, grid)?;
    let (w, ht) = (h.width as i64, h.height as i64);
    let planes: Vec<Vec<u8>> = video.frames().map(luma_plane).collect();

    let margin = PATCH_RADIUS + search_radius as i64;
    let searchable = w > 2 * margin && ht > 2 * margin;
    let offsets = if searchable {
        search_offsets(search_radius as i64)
    } else {
        vec![(0, 0)]
    };

    let sad = |a: &[u8], b: &[u8], cx: i64, cy: i64, dx: i64, dy: i64| -> u32 {
        let mut total = 0u32;
        for py in -PATCH_RADIUS..=PATCH_RADIUS {
            let ra = ((cy + py) * w) as usize;
            let rb = ((cy + py + dy) * w) as usize;
            for px in -PATCH_RADIUS..=PATCH_RADIUS {
                let va = a[ra + (cx + px) as usize];
                let vb = b[rb + (cx + px + dx) as usize];
                total += va.abs_diff(vb) as u32;
            }
        }
        total
    };

    let mut out = Vec::with_capacity(pts.len());
    for (id, &(gx, gy)) in pts.iter().enumerate() {
        let (cx, cy) = if searchable {
            (
                (gx.floor() as i64).clamp(margin, w - 1 - margin),
                (gy.floor() as i64).clamp(margin, ht - 1 - margin),
            )
        } else {
            (0, 0)
        };
        let mut pos = (gx, gy);
        let mut positions = Vec::with_capacity(planes.len());
        positions.push(pos);
        for pair in planes.windows(2) {
            let (mut best, mut best_cost) = ((0i64, 0i64), u32::MAX);
            if searchable {
                for &(dx, dy) in &offsets {
                    let cost = sad(&pair[0], &pair[1], cx, cy, dx, dy);
                    if cost < best_cost {
                        best_cost = cost;
                        best = (dx, dy);
                    }
                }
            }
            pos = (pos.0 + best.0 as f64, pos.1 + best.1 as f64);
            positions.push(pos);
        }
        out.push(Trajectory {
            point_id: id as u32,
            positions,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::motion_score;
    use crate::media_io::VideoHeader;

    /// A pseudo-random texture panned by (vx, vy) pixels per frame.
    fn panning(w: u32, h: u32, n: u32, vx: i64, vy: i64) -> Video {
        let header = VideoHeader::new(w, h, 10, n).unwrap();
        let tex = |x: i64, y: i64| -> u8 {
            let v = (x.rem_euclid(97) * 131 + y.rem_euclid(89) * 71) as u64;
            (v.wrapping_mul(2654435761) >> 7) as u8
        };
        let mut data = Vec::with_capacity(header.payload_len());
        for k in 0..n as i64 {
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let t = tex(x + vx * k, y + vy * k);
                    data.extend_from_slice(&[t, t.wrapping_mul(3), t ^ 0x5a]);
                }
            }
        }
        Video::new(header, data).unwrap()
    }

    #[test]
    fn layout_factors() {
        assert_eq!(cell_layout(32), (4, 8));
        assert_eq!(cell_layout(16), (4, 4));
        assert_eq!(cell_layout(7), (1, 7));
    }

    #[test]
    fn static_video_has_zero_motion() {
        let v = panning(40, 24, 6, 0, 0);
        let ts = track_grid(&v, GridSpec { rows: 4, cols: 4 }, 3).unwrap();
        assert_eq!(motion_score(&ts).unwrap(), 0.0);
    }

    #[test]
    fn panning_motion_is_recovered() {
        let v = panning(40, 24, 6, 1, 0);
        let ts = track_grid(&v, GridSpec { rows: 4, cols: 4 }, 3).unwrap();
        // Five steps of one pixel each.
        assert_eq!(motion_score(&ts).unwrap(), 5.0);
        let v = panning(40, 24, 5, 2, 1);
        let ts = track_grid(&v, GridSpec { rows: 3, cols: 5 }, 3).unwrap();
        let expected = 4.0 * (5.0f64).sqrt();
        assert!((motion_score(&ts).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn tiny_frames_do_not_panic() {
        let v = panning(3, 3, 4, 1, 0);
        let ts = track_grid(&v, GridSpec { rows: 2, cols: 2 }, 3).unwrap();
        assert_eq!(ts.len(), 4);
    }

    #[test]
    fn features_separate_content() {
        let a = encode_features(&panning(48, 27, 5, 1, 0), 32).unwrap();
        let b = encode_features(&panning(48, 27, 5, 0, 1), 32).unwrap();
        assert_eq!(a.len(), 32);
        assert_ne!(a, b);
        let blank = Video::solid(VideoHeader::new(8, 8, 10, 2).unwrap(), [9, 9, 9]).unwrap();
        let f = encode_features(&blank, 32);
        assert!(f.is_ok() || matches!(f, Err(MediaError::GridTooDense { .. })));
        let f = encode_features(&blank, 16).unwrap();
        assert_eq!(f[0], 1.0);
        assert!(f[1..].iter().all(|&x| x == 0.0));
    }
}
