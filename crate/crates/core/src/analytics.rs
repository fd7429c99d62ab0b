//! Per-layer observables over epochs, block averages, power-law and
//! width-scaling fits, saturation checks and CSV/JSON reports.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{binarize, binarize_pre_activation, linearity, BinaryMatrix};
use crate::datamodel::{LayerEntry, LayerObservables, Run, Which};
use crate::effdim::{explained_variance_ratios, subsample_rows};
use crate::entropy::{self, EstimatorConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[derive(Default)]
pub struct AnalysisConfig {
    pub estimator: EstimatorConfig,
    /// Row cap for the PCA; the entropy cap lives in `estimator.max_rows`.
    pub effdim_max_rows: Option<usize>,
    pub effdim_seed: u64,
}


/// Binary nonlinearity variables of a layer at an epoch, plus the real-valued
/// output used for PCA.
pub fn layer_bits(run: &Run, layer: &LayerEntry, epoch: u32) -> Result<(BinaryMatrix, ndarray::Array2<f64>)> {
    let post = run.load_tensor(layer, epoch, Which::Post)?;
    let post_m = post.to_matrix()?;
    let bits = if post.as_binary().is_some() {
        BinaryMatrix::from_tensor(&post)?
    } else if run.has_distinct_pre(layer) {
        let pre = run.load_tensor(layer, epoch, Which::Pre)?;
        match pre.as_binary() {
            Some(_) => BinaryMatrix::from_tensor(&pre)?,
            None => binarize_pre_activation(&pre.to_matrix()?)?,
        }
    } else {
        binarize(&post_m)?
    };
    if bits.rows() != post_m.nrows() {
        return Err(Error::Validation(format!(
            "layer '{}': pre and post dumps disagree on row count ({} vs {})",
            layer.name,
            bits.rows(),
            post_m.nrows()
        )));
    }
    Ok((bits, post_m))
}

fn observe(run: &Run, index: usize, epoch: u32, cfg: &AnalysisConfig) -> Result<LayerObservables> {
    let layer = &run.layers()[index];
    let (bits, post) = layer_bits(run, layer, epoch)?;
    let est = entropy::complexity(&bits, &cfg.estimator).map_err(|e| match e {
        Error::Limit(msg) => Error::Limit(format!("layer '{}': {msg}", layer.name)),
        other => other,
    })?;
    let sub = entropy::subsample(&bits, &cfg.estimator);
    let marginals = entropy::marginal_entropies(sub.as_ref().unwrap_or(&bits));
    let tc = entropy::total_correlation_from(&marginals, est.bits);
    let spectrum = explained_variance_ratios(&subsample_rows(&post, cfg.effdim_max_rows, cfg.effdim_seed))?;
    let c = bits.cols();
    Ok(LayerObservables {
        epoch,
        layer: layer.name.clone(),
        depth_index: index + 1,
        neuron_count: c,
        complexity_bits: est.bits,
        complexity_per_neuron: est.bits / c as f64,
        effective_dimension: spectrum.effective_dimension,
        linearity: linearity(&bits),
        total_correlation_norm: tc.value,
        estimator: est.method.tag().to_string(),
        sample_rows: est.rows_used,
    })
}

/// Observables of every layer at `epoch`, ordered by depth.
pub fn layer_observables(run: &Run, epoch: u32, cfg: &AnalysisConfig) -> Result<Vec<LayerObservables>> {
    (0..run.layers().len())
        .into_par_iter()
        .map(|i| observe(run, i, epoch, cfg))
        .collect()
}

/// Rows keyed by unique (epoch, layer).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryTable {
    rows: Vec<LayerObservables>,
}

impl TrajectoryTable {
    pub fn new(mut rows: Vec<LayerObservables>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert((r.epoch, r.layer.clone())) {
                return Err(Error::Validation(format!(
                    "duplicate trajectory row for epoch {} layer '{}'",
                    r.epoch, r.layer
                )));
            }
        }
        rows.sort_by_key(|a| (a.epoch, a.depth_index));
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[LayerObservables] {
        &self.rows
    }

    pub fn epochs(&self) -> Vec<u32> {
        let mut e: Vec<u32> = self.rows.iter().map(|r| r.epoch).collect();
        e.dedup();
        e
    }

    /// (epoch, value) series of one layer's observable.
    pub fn series(&self, layer: &str, pick: impl Fn(&LayerObservables) -> f64) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| (r.epoch, pick(r)))
            .collect()
    }
}

/// Observables for every captured epoch of a run (or the single snapshot of an
/// ingested run, reported as epoch 0).
pub fn analyze_run(run: &Run, cfg: &AnalysisConfig) -> Result<TrajectoryTable> {
    let epochs = if run.manifest().epochs_captured.is_empty() {
        vec![0]
    } else {
        run.manifest().epochs_captured.clone()
    };
    let mut rows = Vec::new();
    for e in epochs {
        rows.extend(layer_observables(run, e, cfg)?);
    }
    TrajectoryTable::new(rows)
}

/// Whole-network entropies at one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkObservables {
    pub epoch: u32,
    pub total_bits: usize,
    pub additive_complexity_bits: f64,
    pub network_complexity_bits: f64,
    pub normalized_network_complexity: f64,
}

/// Additive and joint complexity over all layers; layers must share rows
/// (non-convolutional runs).
pub fn network_observables(run: &Run, epoch: u32, cfg: &EstimatorConfig) -> Result<NetworkObservables> {
    let layers: Vec<BinaryMatrix> = run
        .layers()
        .iter()
        .map(|l| layer_bits(run, l, epoch).map(|(b, _)| b))
        .collect::<Result<_>>()?;
    let additive = entropy::additive_complexity(&layers, cfg)?;
    let joint = entropy::network_complexity(&layers, cfg)?;
    let total_bits = joint.per_bit.len();
    Ok(NetworkObservables {
        epoch,
        total_bits,
        additive_complexity_bits: additive,
        network_complexity_bits: joint.bits,
        normalized_network_complexity: joint.bits / total_bits as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockObservables {
    pub epoch: u32,
    pub block: String,
    pub layers: usize,
    pub neuron_count: f64,
    pub complexity_bits: f64,
    pub complexity_per_neuron: f64,
    pub effective_dimension: f64,
    pub linearity: f64,
    pub total_correlation_norm: f64,
}

/// Arithmetic mean of each observable over the layers of each block, per epoch.
/// Blocks appear in order of their shallowest layer.
pub fn block_average(rows: &[LayerObservables], blocks: &BTreeMap<String, String>) -> Result<Vec<BlockObservables>> {
    let mut order: Vec<(u32, usize, String)> = Vec::new();
    let mut acc: BTreeMap<(u32, String), (usize, [f64; 6])> = BTreeMap::new();
    for r in rows {
        let block = blocks
            .get(&r.layer)
            .ok_or_else(|| Error::Validation(format!("layer '{}' is not assigned to a block", r.layer)))?;
        let key = (r.epoch, block.clone());
        let entry = acc.entry(key).or_insert_with(|| {
            order.push((r.epoch, r.depth_index, block.clone()));
            (0, [0.0; 6])
        });
        entry.0 += 1;
        let vals = [
            r.neuron_count as f64,
            r.complexity_bits,
            r.complexity_per_neuron,
            r.effective_dimension,
            r.linearity,
            r.total_correlation_norm,
        ];
        for (s, v) in entry.1.iter_mut().zip(vals) {
            *s += v;
        }
    }
    // first-seen depth per block decides order; recompute as the minimum depth
    let mut min_depth: BTreeMap<(u32, String), usize> = BTreeMap::new();
    for r in rows {
        let k = (r.epoch, blocks[&r.layer].clone());
        let d = min_depth.entry(k).or_insert(r.depth_index);
        *d = (*d).min(r.depth_index);
    }
    order.sort_by_key(|(e, _, b)| (*e, min_depth[&(*e, b.clone())]));
    Ok(order
        .into_iter()
        .map(|(epoch, _, block)| {
            let (n, s) = acc[&(epoch, block.clone())];
            let m = |i: usize| s[i] / n as f64;
            BlockObservables {
                epoch,
                block,
                layers: n,
                neuron_count: m(0),
                complexity_bits: m(1),
                complexity_per_neuron: m(2),
                effective_dimension: m(3),
                linearity: m(4),
                total_correlation_norm: m(5),
            }
        })
        .collect())
}

/// Simple least squares y = intercept + slope·x, with r².
fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sst: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let sse: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    (intercept, slope, r_squared(sse, sst))
}

fn r_squared(sse: f64, sst: f64) -> f64 {
    if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// y ≈ A / n^α fitted in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub alpha: f64,
    pub r_squared: f64,
    pub epoch_range: (u32, u32),
}

/// Ordinary least squares of ln y on ln n over points with n in `range`
/// (inclusive, all points when `None`).
pub fn fit_power_law(series: &[(u32, f64)], range: Option<(u32, u32)>) -> Result<PowerLawFit> {
    let used: Vec<(u32, f64)> = series
        .iter()
        .copied()
        .filter(|&(n, _)| range.is_none_or(|(lo, hi)| n >= lo && n <= hi))
        .collect();
    if used.len() < 3 {
        return Err(Error::Validation(format!(
            "power-law fit needs at least 3 points, {} in range",
            used.len()
        )));
    }
    if let Some(&(n, _)) = used.iter().find(|p| p.0 == 0) {
        return Err(Error::Validation(format!("power-law abscissa must be ≥ 1, got {n}")));
    }
    if let Some(&(n, y)) = used.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::Numeric(format!("nonpositive value {y} at n = {n}")));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|&(n, y)| ((n as f64).ln(), y.ln())).collect();
    if logs.iter().all(|p| p.0 == logs[0].0) {
        return Err(Error::Validation("power-law fit needs at least two distinct n".into()));
    }
    let (intercept, slope, r2) = ols(&logs);
    Ok(PowerLawFit {
        amplitude: intercept.exp(),
        alpha: -slope,
        r_squared: r2,
        epoch_range: (used.iter().map(|p| p.0).min().unwrap(), used.iter().map(|p| p.0).max().unwrap()),
    })
}

/// y ≈ a / N^b + c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthScalingFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_squared: f64,
    #[serde(default)]
    pub degenerate: bool,
}

pub const WIDTH_GRID_MIN: f64 = 0.05;
pub const WIDTH_GRID_MAX: f64 = 5.0;
pub const WIDTH_GRID_STEPS: usize = 400;

/// For a fixed exponent, (a, c) by linear least squares and the residual sum of squares.
fn width_profile(points: &[(f64, f64)], b: f64) -> (f64, f64, f64) {
    let xs: Vec<(f64, f64)> = points.iter().map(|&(n, y)| (n.powf(-b), y)).collect();
    let (c, a, _) = ols(&xs);
    let sse = xs.iter().map(|&(x, y)| (y - a * x - c).powi(2)).sum();
    (a, c, sse)
}

/// Exponent by a geometric grid over [0.05, 5] (400 steps), then a bracketing
/// refinement between the best grid point's neighbours.
pub fn fit_width_scaling(points: &[(f64, f64)]) -> Result<WidthScalingFit> {
    if points.len() < 4 {
        return Err(Error::Validation(format!(
            "width-scaling fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    let mut widths: Vec<f64> = points.iter().map(|p| p.0).collect();
    widths.sort_by(f64::total_cmp);
    if widths.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Validation("width-scaling fit needs distinct widths".into()));
    }
    if widths[0] <= 0.0 {
        return Err(Error::Validation("widths must be positive".into()));
    }
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Numeric("non-finite value in width-scaling input".into()));
    }
    let y0 = points[0].1;
    if points.iter().all(|p| p.1 == y0) {
        return Ok(WidthScalingFit {
            a: 0.0,
            b: 0.0,
            c: y0,
            r_squared: 1.0,
            degenerate: true,
        });
    }
    let ratio = (WIDTH_GRID_MAX / WIDTH_GRID_MIN).powf(1.0 / (WIDTH_GRID_STEPS - 1) as f64);
    let grid: Vec<f64> = (0..WIDTH_GRID_STEPS)
        .map(|i| WIDTH_GRID_MIN * ratio.powi(i as i32))
        .collect();
    let sse: Vec<f64> = grid.iter().map(|&b| width_profile(points, b).2).collect();
    let best = (0..grid.len()).fold(0, |k, i| if sse[i] < sse[k] { i } else { k });
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    // golden-section narrowing of the bracket around the grid minimum
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if width_profile(points, m1).2 <= width_profile(points, m2).2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut b = 0.5 * (lo + hi);
    if width_profile(points, grid[best]).2 < width_profile(points, b).2 {
        b = grid[best];
    }
    let (a, c, sse_best) = width_profile(points, b);
    let my = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    Ok(WidthScalingFit {
        a,
        b,
        c,
        r_squared: r_squared(sse_best, sst),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub initial_slope: f64,
    pub final_slope: f64,
    pub saturated: bool,
    /// Initial slope was zero: a flat series, reported as saturated.
    pub degenerate: bool,
}

pub const SATURATION_WINDOW: usize = 10;
pub const SATURATION_RATIO: f64 = 0.1;

/// Least-squares slopes over the first and last 10 points; saturated iff
/// |final| < 0.1·|initial|.
pub fn saturation_check(series: &[(f64, f64)]) -> Result<Saturation> {
    if series.len() < 2 * SATURATION_WINDOW {
        return Err(Error::Validation(format!(
            "saturation check needs at least {} epochs, got {}",
            2 * SATURATION_WINDOW,
            series.len()
        )));
    }
    let initial_slope = ols(&series[..SATURATION_WINDOW]).1;
    let final_slope = ols(&series[series.len() - SATURATION_WINDOW..]).1;
    if initial_slope == 0.0 {
        return Ok(Saturation {
            initial_slope,
            final_slope,
            saturated: final_slope == 0.0,
            degenerate: true,
        });
    }
    Ok(Saturation {
        initial_slope,
        final_slope,
        saturated: final_slope.abs() < SATURATION_RATIO * initial_slope.abs(),
        degenerate: false,
    })
}

/// Real number with 9 significant digits, trailing zeros trimmed.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let fixed = format!("{:.*}", (8 - exp).max(0) as usize, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 11] = [
    "epoch",
    "layer",
    "depth_index",
    "neuron_count",
    "complexity_bits",
    "complexity_per_neuron",
    "effective_dimension",
    "linearity",
    "total_correlation_norm",
    "estimator",
    "sample_rows",
];

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Validation(format!("{}: {e}", path.display()))
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn trajectory_record(r: &LayerObservables) -> Vec<String> {
    vec![
        r.epoch.to_string(),
        r.layer.clone(),
        r.depth_index.to_string(),
        r.neuron_count.to_string(),
        format_real(r.complexity_bits),
        format_real(r.complexity_per_neuron),
        format_real(r.effective_dimension),
        format_real(r.linearity),
        format_real(r.total_correlation_norm),
        r.estimator.clone(),
        r.sample_rows.to_string(),
    ]
}

pub fn write_trajectory_csv(path: &Path, rows: &[LayerObservables]) -> Result<()> {
    write_rows(path, &TRAJECTORY_COLUMNS, rows.iter().map(trajectory_record))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<LayerObservables>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != TRAJECTORY_COLUMNS {
        return Err(Error::Validation(format!("{}: not a trajectory CSV", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Validation(format!("{}: bad number '{}'", path.display(), &rec[i])))
        };
        let int = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| Error::Validation(format!("{}: bad integer '{}'", path.display(), &rec[i])))
        };
        out.push(LayerObservables {
            epoch: int(0)? as u32,
            layer: rec[1].to_string(),
            depth_index: int(2)?,
            neuron_count: int(3)?,
            complexity_bits: num(4)?,
            complexity_per_neuron: num(5)?,
            effective_dimension: num(6)?,
            linearity: num(7)?,
            total_correlation_norm: num(8)?,
            estimator: rec[9].to_string(),
            sample_rows: int(10)?,
        });
    }
    Ok(out)
}

pub const BLOCK_COLUMNS: [&str; 9] = [
    "epoch",
    "block",
    "layers",
    "neuron_count",
    "complexity_bits",
    "complexity_per_neuron",
    "effective_dimension",
    "linearity",
    "total_correlation_norm",
];

pub const NETWORK_COLUMNS: [&str; 5] = [
    "epoch",
    "total_bits",
    "additive_complexity_bits",
    "network_complexity_bits",
    "normalized_network_complexity",
];

/// Everything `analyze` produces for one run.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub trajectory: TrajectoryTable,
    pub blocks: Option<Vec<BlockObservables>>,
    pub network: Option<Vec<NetworkObservables>>,
    pub power_laws: Vec<(String, PowerLawFit)>,
    pub width_scaling: Vec<(String, WidthScalingFit)>,
}

/// Write `trajectory.csv` (layer-major: one trajectory per layer),
/// `depth_profile.csv` (epoch-major: one depth profile per epoch), and when
/// present `blocks.csv`, `network.csv` and `fits.json`.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows = report.trajectory.rows();
    write_trajectory_csv(&out_dir.join("depth_profile.csv"), rows)?;
    let mut by_layer: Vec<&LayerObservables> = rows.iter().collect();
    by_layer.sort_by_key(|r| (r.depth_index, r.epoch));
    write_rows(
        &out_dir.join("trajectory.csv"),
        &TRAJECTORY_COLUMNS,
        by_layer.into_iter().map(trajectory_record),
    )?;
    if let Some(blocks) = &report.blocks {
        write_rows(
            &out_dir.join("blocks.csv"),
            &BLOCK_COLUMNS,
            blocks.iter().map(|b| {
                vec![
                    b.epoch.to_string(),
                    b.block.clone(),
                    b.layers.to_string(),
                    format_real(b.neuron_count),
                    format_real(b.complexity_bits),
                    format_real(b.complexity_per_neuron),
                    format_real(b.effective_dimension),
                    format_real(b.linearity),
                    format_real(b.total_correlation_norm),
                ]
            }),
        )?;
    }
    if let Some(net) = &report.network {
        write_rows(
            &out_dir.join("network.csv"),
            &NETWORK_COLUMNS,
            net.iter().map(|n| {
                vec![
                    n.epoch.to_string(),
                    n.total_bits.to_string(),
                    format_real(n.additive_complexity_bits),
                    format_real(n.network_complexity_bits),
                    format_real(n.normalized_network_complexity),
                ]
            }),
        )?;
    }
    if !report.power_laws.is_empty() || !report.width_scaling.is_empty() {
        write_fits_json(&out_dir.join("fits.json"), &report.power_laws, &report.width_scaling)?;
    }
    Ok(())
}

pub fn power_law_json(series: &str, fit: &PowerLawFit) -> serde_json::Value {
    serde_json::json!({
        "series": series,
        "epoch_range": [fit.epoch_range.0, fit.epoch_range.1],
        "A": fit.amplitude,
        "alpha": fit.alpha,
        "r_squared": fit.r_squared,
    })
}

pub fn width_scaling_json(series: &str, fit: &WidthScalingFit) -> serde_json::Value {
    serde_json::json!({
        "series": series,
        "a": fit.a,
        "b": fit.b,
        "c": fit.c,
        "r_squared": fit.r_squared,
        "degenerate": fit.degenerate,
    })
}

pub fn write_fits_json(path: &Path, power: &[(String, PowerLawFit)], width: &[(String, WidthScalingFit)]) -> Result<()> {
    let v = serde_json::json!({
        "power_law": power.iter().map(|(s, f)| power_law_json(s, f)).collect::<Vec<_>>(),
        "width_scaling": width.iter().map(|(s, f)| width_scaling_json(s, f)).collect::<Vec<_>>(),
    });
    std::fs::write(path, serde_json::to_string_pretty(&v).unwrap()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(epoch: u32, layer: &str, depth: usize, v: f64) -> LayerObservables {
        LayerObservables {
            epoch,
            layer: layer.into(),
            depth_index: depth,
            neuron_count: 4,
            complexity_bits: v,
            complexity_per_neuron: v / 4.0,
            effective_dimension: v,
            linearity: 0.5,
            total_correlation_norm: 0.1,
            estimator: "counts".into(),
            sample_rows: 10,
        }
    }

    #[test]
    fn format_nine_digits() {
        assert_eq!(format_real(0.0), "0");
        assert_eq!(format_real(1.0), "1");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(1.0 / 3.0), "0.333333333");
        assert_eq!(format_real(123456.789012), "123456.789");
        assert_eq!(format_real(9.9999999999), "10");
        assert_eq!(format_real(1.5e-7), "1.5e-7");
        assert_eq!(format_real(-2.0e12), "-2e12");
        let x = 0.811278124459;
        assert!((format_real(x).parse::<f64>().unwrap() - x).abs() < 1e-9);
    }

    #[test]
    fn block_average_means() {
        let rows = vec![obs(0, "a", 1, 1.0), obs(0, "b", 2, 3.0), obs(0, "c", 3, 5.0)];
        let mut blocks = BTreeMap::new();
        blocks.insert("a".to_string(), "low".to_string());
        blocks.insert("b".to_string(), "low".to_string());
        blocks.insert("c".to_string(), "top".to_string());
        let avg = block_average(&rows, &blocks).unwrap();
        assert_eq!(avg.len(), 2);
        assert_eq!(avg[0].block, "low");
        assert_eq!(avg[0].complexity_bits, 2.0);
        assert_eq!(avg[1].complexity_bits, 5.0);
        blocks.remove("c");
        assert!(block_average(&rows, &blocks).is_err());
    }

    #[test]
    fn block_average_identity_for_singletons() {
        let rows = vec![obs(0, "a", 1, 1.5), obs(0, "b", 2, 2.5)];
        let blocks: BTreeMap<String, String> = [("a", "a"), ("b", "b")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let avg = block_average(&rows, &blocks).unwrap();
        assert_eq!(avg[0].complexity_bits, 1.5);
        assert_eq!(avg[1].effective_dimension, 2.5);
    }

    #[test]
    fn power_law_exact_and_constant() {
        let s: Vec<(u32, f64)> = (1..=50).map(|n| (n, 3.0 / (n as f64).sqrt())).collect();
        let f = fit_power_law(&s, None).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-9);
        assert!((f.amplitude - 3.0).abs() < 1e-9 * 3.0);
        assert!((f.r_squared - 1.0).abs() < 1e-9);
        let c: Vec<(u32, f64)> = (1..=10).map(|n| (n, 0.7)).collect();
        let f = fit_power_law(&c, None).unwrap();
        assert!(f.alpha.abs() < 1e-12);
        assert!((f.amplitude - 0.7).abs() < 1e-12);
    }

    #[test]
    fn power_law_errors() {
        assert!(fit_power_law(&[(1, 1.0), (2, 0.5)], None).is_err());
        let bad = vec![(1, 1.0), (2, 0.0), (3, 0.3)];
        assert!(matches!(fit_power_law(&bad, None), Err(Error::Numeric(_))));
        let s: Vec<(u32, f64)> = (1..=10).map(|n| (n, 1.0)).collect();
        assert!(fit_power_law(&s, Some((40, 80))).is_err());
    }

    #[test]
    fn width_scaling_exact() {
        let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0, 64.0].iter().map(|&n| (n, 2.0 / n + 0.3)).collect();
        let f = fit_width_scaling(&pts).unwrap();
        assert!((f.a - 2.0).abs() < 1e-6, "{f:?}");
        assert!((f.b - 1.0).abs() < 1e-6);
        assert!((f.c - 0.3).abs() < 1e-6);
        assert!(f.r_squared > 1.0 - 1e-9);
    }

    #[test]
    fn width_scaling_sqrt_and_degenerate() {
        let pts: Vec<(f64, f64)> = [4.0f64, 8.0, 16.0, 32.0, 64.0].iter().map(|&n| (n, 5.0 / n.sqrt())).collect();
        let f = fit_width_scaling(&pts).unwrap();
        assert!((f.b - 0.5).abs() < 1e-3);
        let flat: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n| (n, 0.4)).collect();
        assert!(fit_width_scaling(&flat).unwrap().degenerate);
        assert!(fit_width_scaling(&flat[..3]).is_err());
        let dup = vec![(4.0, 1.0), (4.0, 2.0), (8.0, 1.0), (16.0, 0.5)];
        assert!(fit_width_scaling(&dup).is_err());
    }

    #[test]
    fn saturation_cases() {
        let flat: Vec<(f64, f64)> = (0..30).map(|e| (e as f64, 0.4)).collect();
        let s = saturation_check(&flat).unwrap();
        assert!(s.saturated && s.degenerate);
        let ramp: Vec<(f64, f64)> = (0..30).map(|e| (e as f64, 0.01 * e as f64)).collect();
        assert!(!saturation_check(&ramp).unwrap().saturated);
        let logistic: Vec<(f64, f64)> = (0..40).map(|e| (e as f64, 0.37 * (1.0 - (-(e as f64) / 5.0).exp()))).collect();
        assert!(saturation_check(&logistic).unwrap().saturated);
        assert!(saturation_check(&flat[..19]).is_err());
    }

    #[test]
    fn trajectory_rejects_duplicates() {
        assert!(TrajectoryTable::new(vec![obs(1, "a", 1, 1.0), obs(1, "a", 1, 2.0)]).is_err());
        let t = TrajectoryTable::new(vec![obs(2, "a", 1, 1.0), obs(1, "a", 1, 2.0)]).unwrap();
        assert_eq!(t.epochs(), vec![1, 2]);
        assert_eq!(t.series("a", |r| r.complexity_bits), vec![(1, 2.0), (2, 1.0)]);
    }

    #[test]
    fn csv_round_trip_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_trajectory_csv(&p, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim(), TRAJECTORY_COLUMNS.join(","));
        assert!(read_trajectory_csv(&p).unwrap().is_empty());
        let rows = vec![obs(0, "L1", 1, 1.25), obs(3, "L2", 2, 0.5)];
        write_trajectory_csv(&p, &rows).unwrap();
        assert_eq!(read_trajectory_csv(&p).unwrap(), rows);
    }
}
