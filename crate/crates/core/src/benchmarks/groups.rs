//! Wave groups: Gaussian bumps fitted to the envelope between its local
//! minima.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::waves::WaveField;
use crate::error::{Error, Result};

/// One group. Sample indices `[start, end)` delimit its window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveGroup {
    pub t_c: f64,
    pub amplitude: f64,
    pub length: f64,
    pub start: usize,
    pub end: usize,
}

impl WaveGroup {
    /// `(t_start, t_end)` in seconds.
    pub fn window(&self, dt: f64) -> (f64, f64) {
        (self.start as f64 * dt, self.end as f64 * dt)
    }
}

/// Groups of one record, ordered in time with disjoint windows.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCatalog {
    pub dt: f64,
    pub groups: Vec<WaveGroup>,
}

#[derive(Serialize, Deserialize)]
struct CatalogRow {
    t_c: f64,
    amplitude: f64,
    length: f64,
    t_start: f64,
    t_end: f64,
    start: usize,
    end: usize,
}

impl GroupCatalog {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `(L, A)` of every group.
    pub fn coords(&self) -> Vec<[f64; 2]> {
        self.groups.iter().map(|g| [g.length, g.amplitude]).collect()
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for g in &self.groups {
            let (t_start, t_end) = g.window(self.dt);
            w.serialize(CatalogRow {
                t_c: g.t_c,
                amplitude: g.amplitude,
                length: g.length,
                t_start,
                t_end,
                start: g.start,
                end: g.end,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_csv(path: &Path, dt: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut groups = Vec::new();
        for row in r.deserialize() {
            let row: CatalogRow = row?;
            groups.push(WaveGroup {
                t_c: row.t_c,
                amplitude: row.amplitude,
                length: row.length,
                start: row.start,
                end: row.end,
            });
        }
        Ok(GroupCatalog { dt, groups })
    }
}

/// Least-squares `L` of `A exp(−(t − t_c)² / 2L²)` against `rho` with `A` and
/// `t_c` held at the window maximum.
fn fit_length(rho: &[f64], peak: usize, dt: f64) -> f64 {
    let a = rho[peak];
    let sse = |l: f64| -> f64 {
        rho.iter()
            .enumerate()
            .map(|(i, r)| {
                let t = (i as f64 - peak as f64) * dt;
                (r - a * (-0.5 * t * t / (l * l)).exp()).powi(2)
            })
            .sum()
    };
    // coarse log grid, then golden-section refinement around the best cell
    let (lo, hi) = (0.25 * dt, (rho.len() as f64 * dt).max(dt) * 4.0);
    let steps: usize = 200;
    let ratio = (hi / lo).powf(1.0 / steps as f64);
    let grid: Vec<f64> = (0..=steps).map(|i| lo * ratio.powi(i as i32)).collect();
    let best = (0..grid.len())
        .min_by(|&i, &j| sse(grid[i]).total_cmp(&sse(grid[j])))
        .expect("nonempty grid");
    let (mut a0, mut b0) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps)]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b0 - g * (b0 - a0);
    let mut d = a0 + g * (b0 - a0);
    for _ in 0..100 {
        if sse(c) < sse(d) {
            b0 = d;
        } else {
            a0 = c;
        }
        c = b0 - g * (b0 - a0);
        d = a0 + g * (b0 - a0);
        if (b0 - a0) < 1e-10 * b0 {
            break;
        }
    }
    0.5 * (a0 + b0)
}

/// Splits the record at local minima of the envelope, merges windows whose
/// peak is below `min_amplitude` into the preceding window (or the next one
/// at the record start), and fits one group to each remaining window.
pub fn extract_groups(w: &WaveField, min_amplitude: f64) -> Result<GroupCatalog> {
    let rho = &w.rho;
    let n = rho.len();
    if n < 3 {
        return Ok(GroupCatalog { dt: w.dt, groups: vec![] });
    }
    if !min_amplitude.is_finite() || min_amplitude < 0.0 {
        return Err(Error::InvalidArgument("group threshold must be nonnegative".into()));
    }
    let mut cuts = vec![0];
    for i in 1..n - 1 {
        if rho[i] < rho[i - 1] && rho[i] <= rho[i + 1] {
            cuts.push(i);
        }
    }
    cuts.push(n);
    let peak_of = |s: usize, e: usize| rho[s..e].iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let mut windows: Vec<(usize, usize, f64)> = Vec::new();
    for c in cuts.windows(2) {
        let (s, e) = (c[0], c[1]);
        let peak = peak_of(s, e);
        match windows.last_mut() {
            Some(last) if peak < min_amplitude || last.2 < min_amplitude => {
                last.1 = e;
                last.2 = last.2.max(peak);
            }
            _ => windows.push((s, e, peak)),
        }
    }

    let groups = windows
        .into_iter()
        .filter(|w| w.2 >= min_amplitude && w.2 > 0.0)
        .map(|(s, e, _)| {
            let seg = &rho[s..e];
            let peak = seg
                .iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > seg[best] { i } else { best });
            WaveGroup {
                t_c: (s + peak) as f64 * w.dt,
                amplitude: seg[peak],
                length: fit_length(seg, peak, w.dt),
                start: s,
                end: e,
            }
        })
        .collect();
    Ok(GroupCatalog { dt: w.dt, groups })
}
