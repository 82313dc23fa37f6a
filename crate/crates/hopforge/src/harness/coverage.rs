//! Coverage range: how far each scheme sustains a throughput threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sweep::SweepCell;

/// Per-scheme coverage against a throughput threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub scheme: String,
    pub threshold_bps: f64,
    /// Largest grid distance whose mean throughput meets the threshold;
    /// 0 when the threshold is never met.
    pub max_distance_m: f64,
    /// Linear interpolation of the crossing point between the last
    /// qualifying grid distance and the next one; equals `max_distance_m`
    /// when no further grid point exists.
    pub interpolated_distance_m: f64,
    pub threshold_met: bool,
}

/// Computes the coverage range of every scheme present in the sweep.
///
/// For each scheme, grid distances are averaged over draws; the report
/// carries both the largest qualifying grid distance and the interpolated
/// crossing toward the next grid point.
pub fn coverage_range(cells: &[SweepCell], threshold_bps: f64) -> Vec<CoverageReport> {
    // scheme -> distance -> (sum, count), keyed with ordered distances.
    let mut schemes: Vec<String> = Vec::new();
    let mut by_scheme: BTreeMap<String, BTreeMap<u64, (f64, f64, usize)>> = BTreeMap::new();
    for cell in cells {
        if !schemes.contains(&cell.scheme) {
            schemes.push(cell.scheme.clone());
        }
        let entry = by_scheme
            .entry(cell.scheme.clone())
            .or_default()
            .entry(cell.distance_m.to_bits())
            .or_insert((cell.distance_m, 0.0, 0));
        entry.1 += cell.throughput_bps;
        entry.2 += 1;
    }

    let mut reports = Vec::new();
    for scheme in schemes {
        let mut grid: Vec<(f64, f64)> = by_scheme[&scheme]
            .values()
            .map(|&(d, sum, n)| (d, sum / n as f64))
            .collect();
        grid.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));

        let last_meeting = grid.iter().rposition(|&(_, mean)| mean >= threshold_bps);
        let report = match last_meeting {
            None => CoverageReport {
                scheme,
                threshold_bps,
                max_distance_m: 0.0,
                interpolated_distance_m: 0.0,
                threshold_met: false,
            },
            Some(i) => {
                let (d_i, mean_i) = grid[i];
                let interpolated = if i + 1 < grid.len() {
                    let (d_next, mean_next) = grid[i + 1];
                    // mean_next < threshold <= mean_i: linear crossing.
                    d_i + (d_next - d_i) * (mean_i - threshold_bps) / (mean_i - mean_next)
                } else {
                    d_i
                };
                CoverageReport {
                    scheme,
                    threshold_bps,
                    max_distance_m: d_i,
                    interpolated_distance_m: interpolated,
                    threshold_met: true,
                }
            }
        };
        reports.push(report);
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(scheme: &str, d: f64, draw: usize, tp: f64) -> SweepCell {
        SweepCell {
            distance_m: d,
            scheme: scheme.to_string(),
            draw,
            seed: 0,
            sum_rate_bps_hz: tp / 1e9,
            throughput_bps: tp,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn interpolates_between_bracketing_grid_points() {
        // Means: 4.0 at d=2 and 1.0 at d=4; threshold 2.5 crosses at d=3.
        let cells = vec![
            cell("s", 2.0, 0, 3.0),
            cell("s", 2.0, 1, 5.0),
            cell("s", 4.0, 0, 1.0),
            cell("s", 4.0, 1, 1.0),
        ];
        let reports = coverage_range(&cells, 2.5);
        assert_eq!(reports.len(), 1);
        let r = &reports[0];
        assert!(r.threshold_met);
        assert_eq!(r.max_distance_m, 2.0);
        assert!((r.interpolated_distance_m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_above_everything_is_flagged_zero() {
        let cells = vec![cell("s", 2.0, 0, 1.0), cell("s", 4.0, 0, 0.5)];
        let r = &coverage_range(&cells, 10.0)[0];
        assert!(!r.threshold_met);
        assert_eq!(r.max_distance_m, 0.0);
        assert_eq!(r.interpolated_distance_m, 0.0);
    }

    #[test]
    fn threshold_met_at_last_point_reports_that_point() {
        let cells = vec![cell("s", 2.0, 0, 5.0), cell("s", 4.0, 0, 3.0)];
        let r = &coverage_range(&cells, 2.0)[0];
        assert!(r.threshold_met);
        assert_eq!(r.max_distance_m, 4.0);
        assert_eq!(r.interpolated_distance_m, 4.0);
    }

    #[test]
    fn schemes_are_reported_separately() {
        let cells = vec![
            cell("a", 2.0, 0, 5.0),
            cell("b", 2.0, 0, 1.0),
            cell("a", 4.0, 0, 3.0),
            cell("b", 4.0, 0, 0.5),
        ];
        let reports = coverage_range(&cells, 2.0);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].scheme, "a");
        assert!(reports[0].threshold_met);
        assert!(!reports[1].threshold_met);
    }
}
