//! Ship roll in irregular waves as a problem over wave-group parameters
//! `(L, A)`. The response to a group depends on the ship state when the
//! group arrives, which is the source of heteroscedastic randomness.

use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::groups::{extract_groups, GroupCatalog};
use super::kde::GroupDensity;
use super::roll::{substeps, RollParams, RollRhs, RollState};
use super::waves::{synth_wave_field, SpectrumConfig, WaveField};
use crate::error::{Error, Result};
use crate::gp::InputPoint;
use crate::problem::{check_dim, check_unit, ProblemSpec};
use crate::quadrature::WeightedRule;
use crate::rng::{seeded, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShipConfig {
    pub spectrum: SpectrumConfig,
    pub field_seed: u64,
    pub roll: RollParams,
    /// Exceedance threshold on the group's maximum roll (rad).
    pub threshold: f64,
    /// Group detection threshold as a fraction of `Hs`.
    pub group_threshold: f64,
    /// Candidate groups for one query.
    pub neighbours: usize,
    /// Largest admissible distance to the nearest group, in standardized
    /// coordinates.
    pub tolerance: f64,
    /// Windows simulated ahead of the target group.
    pub upstream: usize,
    /// Roll beyond which the ship is taken to capsize; the response is
    /// capped here and the state reset at the next window.
    pub capsize_angle: f64,
    /// Use max |ξ| instead of max ξ.
    pub absolute: bool,
    /// Largest RK4 step as a fraction of the peak period.
    pub step_fraction: f64,
}

impl Default for ShipConfig {
    fn default() -> Self {
        ShipConfig {
            spectrum: SpectrumConfig::default(),
            field_seed: 1,
            roll: RollParams::default(),
            threshold: 0.3,
            group_threshold: 0.25,
            neighbours: 10,
            tolerance: 1.0,
            upstream: 5,
            capsize_angle: 1.0,
            absolute: false,
            step_fraction: 0.01,
        }
    }
}

impl ShipConfig {
    pub fn hours(&self) -> f64 {
        self.spectrum.duration / 3600.0
    }

    fn substeps(&self, dt: f64) -> usize {
        substeps(dt, self.step_fraction * self.spectrum.peak_period())
    }
}

/// Integrates the roll equation over windows `[first, last]` of the catalog
/// from rest, applying the capsize rule, and calls `record` with each
/// window's response.
pub(crate) fn simulate_windows(
    field: &WaveField,
    catalog: &GroupCatalog,
    cfg: &ShipConfig,
    first: usize,
    last: usize,
    mut record: impl FnMut(usize, f64),
) {
    let rhs = RollRhs::new(&cfg.roll);
    let sub = cfg.substeps(field.dt);
    let eta = &field.eta;
    let mut state: RollState = (0.0, 0.0);
    let cap = cfg.capsize_angle;
    let measure = |x: f64| if cfg.absolute { x.abs() } else { x };
    let mut pos = catalog.groups[first].start;
    for w in first..=last {
        let g = &catalog.groups[w];
        // gaps between windows (below-threshold stretches at the record
        // start) are integrated without recording
        while pos < g.start {
            state = rhs.advance(state, eta[pos], eta[pos + 1], field.dt, sub);
            pos += 1;
        }
        let mut best = measure(state.0);
        let mut capsized = false;
        let end = g.end.min(eta.len() - 1);
        while pos < end {
            state = rhs.advance(state, eta[pos], eta[pos + 1], field.dt, sub);
            pos += 1;
            if !(state.0.abs() <= cap) {
                capsized = true;
                break;
            }
            best = best.max(measure(state.0));
        }
        if capsized {
            record(w, cap);
            state = (0.0, 0.0);
            pos = g.end;
        } else {
            record(w, best);
        }
    }
}

/// The `k` catalog groups closest to `(L, A)` in coordinates scaled by
/// `scale`, nearest first.
fn nearest_groups(coords: &[[f64; 2]], scale: [f64; 2], la: [f64; 2], k: usize) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let a = (c[0] - la[0]) / scale[0];
            let b = (c[1] - la[1]) / scale[1];
            ((a * a + b * b).sqrt(), i)
        })
        .collect();
    let k = k.clamp(1, d.len());
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.truncate(k);
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d
}

/// Maximum roll through a group resembling `(L, A)`: picks one of the
/// nearest catalog groups at random and simulates from rest, starting
/// `upstream` windows ahead of it.
pub fn ship_itr_sample(l: f64, a: f64, catalog: &GroupCatalog, field: &WaveField, cfg: &ShipConfig, rng: &mut Rng) -> Result<f64> {
    if catalog.is_empty() {
        return Err(Error::InvalidArgument("empty group catalog".into()));
    }
    let coords = catalog.coords();
    let scale = coord_std(&coords);
    let near = nearest_groups(&coords, scale, [l, a], cfg.neighbours);
    if near[0].0 > cfg.tolerance {
        return Err(Error::NoNearbyGroup { nearest: near[0].0 });
    }
    let target = near[rng.random_range(0..near.len())].1;
    let first = target.saturating_sub(cfg.upstream);
    let mut out = 0.0;
    simulate_windows(field, catalog, cfg, first, target, |w, r| {
        if w == target {
            out = r;
        }
    });
    Ok(out)
}

fn coord_std(coords: &[[f64; 2]]) -> [f64; 2] {
    let n = coords.len() as f64;
    let mut s = [1.0; 2];
    for (j, sj) in s.iter_mut().enumerate() {
        let mean = coords.iter().map(|c| c[j]).sum::<f64>() / n;
        let var = coords.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            *sj = var.sqrt();
        }
    }
    s
}

/// The ship-roll problem over a fixed synthetic record.
#[derive(Clone, Debug)]
pub struct ShipRoll {
    pub cfg: ShipConfig,
    pub field: Arc<WaveField>,
    pub catalog: Arc<GroupCatalog>,
    density: GroupDensity,
    coords: Vec<[f64; 2]>,
    /// Catalog indices ordered by `L`.
    by_length: Vec<usize>,
}

impl ShipRoll {
    pub const ID: &'static str = "shiproll";

    /// Synthesizes the record and its catalog.
    pub fn build(cfg: ShipConfig) -> Result<Self> {
        let field = synth_wave_field(&cfg.spectrum, cfg.field_seed)?;
        let catalog = extract_groups(&field, cfg.group_threshold * cfg.spectrum.hs)?;
        Self::from_parts(cfg, field, catalog)
    }

    /// Like [`ShipRoll::build`] but reuses `field.bin` and `groups.csv` in
    /// `dir` when present, and writes them otherwise.
    pub fn load_or_build(cfg: ShipConfig, dir: &Path) -> Result<Self> {
        let tag = format!("{:016x}", crate::rng::mix(cfg.field_seed, fingerprint_hash(&cfg)));
        let field_path = dir.join(format!("field_{tag}.bin"));
        let groups_path = dir.join(format!("groups_{tag}.csv"));
        if field_path.exists() && groups_path.exists() {
            let field = WaveField::load(&field_path)?;
            let catalog = GroupCatalog::load_csv(&groups_path, field.dt)?;
            return Self::from_parts(cfg, field, catalog);
        }
        let s = Self::build(cfg)?;
        std::fs::create_dir_all(dir)?;
        s.field.save(&field_path)?;
        s.catalog.save_csv(&groups_path)?;
        Ok(s)
    }

    pub fn from_parts(cfg: ShipConfig, field: WaveField, catalog: GroupCatalog) -> Result<Self> {
        let coords = catalog.coords();
        let density = GroupDensity::new(&coords)?;
        let mut by_length: Vec<usize> = (0..coords.len()).collect();
        by_length.sort_by(|&i, &j| coords[i][0].total_cmp(&coords[j][0]).then(i.cmp(&j)));
        Ok(ShipRoll {
            cfg,
            field: Arc::new(field),
            catalog: Arc::new(catalog),
            density,
            coords,
            by_length,
        })
    }

    pub fn density_model(&self) -> &GroupDensity {
        &self.density
    }

    /// Response of every catalog group from one continuous simulation of
    /// the whole record.
    pub fn group_responses(&self) -> Vec<f64> {
        let n = self.catalog.len();
        let mut out = vec![0.0; n];
        if n > 0 {
            simulate_windows(&self.field, &self.catalog, &self.cfg, 0, n - 1, |w, r| out[w] = r);
        }
        out
    }
}

fn fingerprint_hash(cfg: &ShipConfig) -> u64 {
    let s = serde_json::to_string(&(&cfg.spectrum, cfg.group_threshold)).expect("plain data");
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

impl ProblemSpec for ShipRoll {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dim(&self) -> usize {
        2
    }

    fn threshold(&self) -> f64 {
        self.cfg.threshold
    }

    fn density(&self, x: &InputPoint) -> f64 {
        self.density.pdf(x)
    }

    fn sample_input(&self, rng: &mut Rng) -> InputPoint {
        InputPoint::from(self.density.sample(rng))
    }

    fn sample_response(&self, x: &InputPoint, seed: u64) -> Result<f64> {
        check_dim(x, 2)?;
        ship_itr_sample(x[0], x[1], &self.catalog, &self.field, &self.cfg, &mut seeded(seed))
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.density.support(0.0).to_vec()
    }

    /// Conditional empirical quantiles: `u0` picks a rank in `L`, `u1` a rank
    /// in `A` among the `√n` groups nearest in `L` rank. Returns catalog
    /// points.
    fn map_unit(&self, u: &[f64]) -> Result<InputPoint> {
        check_dim(u, 2)?;
        check_unit(u)?;
        let n = self.by_length.len();
        let i = ((u[0] * n as f64) as usize).min(n - 1);
        let half = ((n as f64).sqrt() as usize / 2).max(1);
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let mut hood: Vec<usize> = self.by_length[lo..hi].to_vec();
        hood.sort_by(|&a, &b| self.coords[a][1].total_cmp(&self.coords[b][1]).then(a.cmp(&b)));
        let j = ((u[1] * hood.len() as f64) as usize).min(hood.len() - 1);
        Ok(InputPoint::from(self.coords[hood[j]]))
    }

    /// Equal weights over the catalog groups.
    /// Designs follow the catalog: a box over `(L, A)` would put points
    /// where no group exists.
    fn design_point(&self, u: &[f64]) -> Result<InputPoint> {
        self.map_unit(u)
    }

    fn pe_rule(&self) -> Result<WeightedRule> {
        WeightedRule::monte_carlo(self.coords.iter().map(|c| InputPoint::from(*c)).collect())
    }

    fn fingerprint(&self) -> String {
        format!(
            "{};{}",
            Self::ID,
            serde_json::to_string(&self.cfg).expect("plain data")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ShipRoll {
        let mut cfg = ShipConfig::default();
        cfg.spectrum = SpectrumConfig::with_hours(20.0);
        ShipRoll::build(cfg).unwrap()
    }

    #[test]
    fn exact_group_with_one_neighbour_is_deterministic() {
        let mut s = small();
        s.cfg.neighbours = 1;
        let g = &s.catalog.groups[40];
        let x = InputPoint::from([g.length, g.amplitude]);
        let a = s.sample_response(&x, 1).unwrap();
        assert_eq!(a, s.sample_response(&x, 2).unwrap());
    }

    #[test]
    fn far_query_is_rejected() {
        let s = small();
        let r = s.sample_response(&InputPoint::from([1e4, 1e3]), 1);
        assert!(matches!(r, Err(Error::NoNearbyGroup { .. })));
    }

    #[test]
    fn tiny_waves_barely_roll() {
        let mut s = small();
        let field = Arc::make_mut(&mut s.field);
        for e in field.eta.iter_mut() {
            *e *= 1e-4;
        }
        let g = &s.catalog.groups[10];
        let y = s.sample_response(&InputPoint::from([g.length, g.amplitude]), 3).unwrap();
        assert!(y.abs() < 1e-3);
    }

    #[test]
    fn unit_map_returns_catalog_points() {
        let s = small();
        let mut rng = seeded(1);
        for _ in 0..100 {
            let u = [rng.random::<f64>(), rng.random::<f64>()];
            let x = s.map_unit(&u).unwrap();
            assert!(s.coords.iter().any(|c| c[0] == x[0] && c[1] == x[1]));
        }
    }
}
