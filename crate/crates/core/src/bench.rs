//! Desk-scale scaling measurements: attended-pair counts, forward/backward
//! wall time for the anchor-sparse and dense-quadratic paths, and the
//! k-sweep. Counts and sizes are bit-deterministic given the seed; timings
//! of course are not. All timed regions are single-threaded.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::anchor::select_anchors;
use crate::attention::{
    build_receptive_field, dense_pair_count, random_features, AttentionKind, TransformerStack,
};
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::graph::{erdos_renyi, Graph};

/// How edge probability scales with n.
#[derive(Debug, Clone, Copy)]
pub enum DensityRule {
    FixedP(f64),
    FixedAvgDegree(f64),
}

impl DensityRule {
    pub fn p_for(&self, n: usize) -> f64 {
        match *self {
            DensityRule::FixedP(p) => p,
            DensityRule::FixedAvgDegree(d) => {
                if n <= 1 {
                    0.0
                } else {
                    (d / (n as f64 - 1.0)).min(1.0)
                }
            }
        }
    }
}

/// Model shape shared by both timed paths.
#[derive(Debug, Clone, Copy)]
pub struct ModelDims {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_model: 32,
            heads: 2,
            layers: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub sizes: Vec<usize>,
    pub rule: DensityRule,
    pub k: u32,
    pub d_max: u32,
    pub dims: ModelDims,
    /// Timed forward+backward sweeps per graph.
    pub reps: usize,
    /// Untimed sweeps before measurement.
    pub warmup: usize,
    pub seed: u64,
    /// Dense sweeps are only timed for n at or below this; pair counts are
    /// still recorded for every size (they are analytic). `None` times the
    /// dense path everywhere.
    pub max_dense_timing_n: Option<usize>,
}

impl ScalingConfig {
    pub fn new(sizes: Vec<usize>, rule: DensityRule, k: u32, seed: u64) -> Result<Self> {
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sizes must be strictly ascending".into()));
        }
        Ok(ScalingConfig {
            sizes,
            rule,
            k,
            d_max: EncodingConfig::for_k(k)?.d_max(),
            dims: ModelDims::default(),
            reps: 2,
            warmup: 3,
            seed,
            max_dense_timing_n: None,
        })
    }

    /// The 500..3000 grid at p = 0.0001.
    pub fn paper_grid(k: u32, seed: u64) -> Result<Self> {
        ScalingConfig::new(
            vec![500, 1000, 1500, 2000, 2500, 3000],
            DensityRule::FixedP(0.0001),
            k,
            seed,
        )
    }

    /// Fixed average degree 10 over 1000..8000; dense timing capped at
    /// n = 4000 to keep the quadratic baseline affordable.
    pub fn fixed_degree(k: u32, seed: u64) -> Result<Self> {
        let mut cfg = ScalingConfig::new(
            vec![1000, 2000, 4000, 8000],
            DensityRule::FixedAvgDegree(10.0),
            k,
            seed,
        )?;
        cfg.max_dense_timing_n = Some(4000);
        Ok(cfg)
    }
}

/// One measured size.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub n: usize,
    pub p: f64,
    pub k: u32,
    pub seed: u64,
    pub anchors: usize,
    pub max_ball: usize,
    pub mean_ball: f64,
    pub attended_pairs: u64,
    pub dense_pairs: u64,
    pub forward_ms_anchor: f64,
    pub backward_ms_anchor: f64,
    pub forward_ms_dense: Option<f64>,
    pub backward_ms_dense: Option<f64>,
    /// Bytes of the arrays the anchor path allocates: parameters, saved
    /// activations, gradients, and the row structure.
    pub peak_bytes_anchor: u64,
    pub peak_bytes_dense: Option<u64>,
}

fn time_sweeps(
    stack: &TransformerStack,
    h: &crate::attention::NodeFeatures,
    kind: AttentionKind<'_>,
    warmup: usize,
    reps: usize,
) -> Result<(f64, f64, u64)> {
    let upstream = crate::attention::NodeFeatures::ones(h.dim());
    let mut bytes = 0u64;
    for _ in 0..warmup {
        let (_, acts) = stack.forward(h, kind)?;
        let _ = stack.backward(&upstream, kind, &acts)?;
    }
    let (mut fwd, mut bwd) = (0.0f64, 0.0f64);
    for rep in 0..reps {
        let t0 = Instant::now();
        let (_, acts) = stack.forward(h, kind)?;
        let t1 = Instant::now();
        let (_, grads) = stack.backward(&upstream, kind, &acts)?;
        let t2 = Instant::now();
        fwd += (t1 - t0).as_secs_f64();
        bwd += (t2 - t1).as_secs_f64();
        if rep == 0 {
            let acts_bytes: u64 = acts.iter().map(|a| a.bytes()).sum();
            let grad_bytes: u64 = grads.iter().map(|g| g.bytes()).sum();
            bytes = stack.param_bytes() + acts_bytes + grad_bytes + (h.len() * 8) as u64;
        }
    }
    Ok((fwd / reps as f64 * 1e3, bwd / reps as f64 * 1e3, bytes))
}

/// Generate, select, build, and time both attention paths per size.
pub fn run_scaling_suite(cfg: &ScalingConfig) -> Result<Vec<BenchRecord>> {
    if cfg.reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    let mut records = Vec::with_capacity(cfg.sizes.len());
    for (idx, &n) in cfg.sizes.iter().enumerate() {
        let p = cfg.rule.p_for(n);
        let graph_seed = cfg.seed.wrapping_add(idx as u64);
        let g = erdos_renyi(n, p, graph_seed)?;
        let s = select_anchors(&g, cfg.k, graph_seed);
        let rf = build_receptive_field(&g, &s, cfg.d_max)?;
        let max_ball = rf.ball_sizes().iter().copied().max().unwrap_or(0) as usize;
        let mean_ball =
            rf.ball_sizes().iter().map(|&b| b as f64).sum::<f64>() / n.max(1) as f64;

        let enc = EncodingConfig::new(cfg.k, cfg.d_max)?;
        let stack = TransformerStack::new_random(
            cfg.dims.d_model,
            cfg.dims.heads,
            cfg.dims.layers,
            &enc,
            cfg.seed.wrapping_add(0x5eed),
        );
        let h = random_features(n, cfg.dims.d_model, cfg.seed.wrapping_add(100 + idx as u64));

        log::info!("scaling n={n} p={p:.6} anchors={} pairs={}", s.len(), rf.attended_pairs());
        let (forward_ms_anchor, backward_ms_anchor, peak_bytes_anchor) = time_sweeps(
            &stack,
            &h,
            AttentionKind::Sparse(&rf),
            cfg.warmup,
            cfg.reps,
        )?;
        let mut record = BenchRecord {
            n,
            p,
            k: cfg.k,
            seed: cfg.seed,
            anchors: s.len(),
            max_ball,
            mean_ball,
            attended_pairs: rf.attended_pairs(),
            dense_pairs: dense_pair_count(n),
            forward_ms_anchor,
            backward_ms_anchor,
            forward_ms_dense: None,
            backward_ms_dense: None,
            peak_bytes_anchor: peak_bytes_anchor + rf.bytes(),
            peak_bytes_dense: None,
        };
        if cfg.max_dense_timing_n.map_or(true, |cap| n <= cap) {
            let (f, b, bytes) =
                time_sweeps(&stack, &h, AttentionKind::Dense, cfg.warmup, cfg.reps)?;
            record.forward_ms_dense = Some(f);
            record.backward_ms_dense = Some(b);
            record.peak_bytes_dense = Some(bytes);
        }
        records.push(record);
    }
    Ok(records)
}

/// Least-squares slope of log(metric) against log(n).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual in log space.
    pub residual: f64,
}

pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let mut xs: Vec<f64> = points.iter().map(|&(n, _)| n).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::Degenerate(
            "slope fit needs at least 3 distinct sizes".into(),
        ));
    }
    if points.iter().any(|&(n, m)| n <= 0.0 || m <= 0.0) {
        return Err(Error::Degenerate(
            "slope fit needs positive sizes and metrics".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, m)| (n.ln(), m.ln())).collect();
    let count = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum::<f64>()
        / count)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
    })
}

/// One row of the k-sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct KSweepRow {
    pub k: u32,
    pub anchors: usize,
    pub max_ball: usize,
    pub mean_ball: f64,
    pub attended_pairs: u64,
    /// Attended pairs relative to the k = 2 row (or the first row when 2
    /// is not swept).
    pub relative_pairs: f64,
}

/// Selection and receptive-field statistics per k on one graph.
pub fn k_sweep_report(g: &Graph, k_values: &[u32], seed: u64) -> Result<Vec<KSweepRow>> {
    if k_values.is_empty() || k_values.iter().any(|&k| !(1..=6).contains(&k)) {
        return Err(Error::InvalidConfig("k values must lie in 1..=6".into()));
    }
    let mut rows: Vec<KSweepRow> = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let s = select_anchors(g, k, seed);
        let rf = build_receptive_field(g, &s, EncodingConfig::for_k(k)?.d_max())?;
        let n = g.node_count().max(1);
        rows.push(KSweepRow {
            k,
            anchors: s.len(),
            max_ball: rf.ball_sizes().iter().copied().max().unwrap_or(0) as usize,
            mean_ball: rf.ball_sizes().iter().map(|&b| b as f64).sum::<f64>() / n as f64,
            attended_pairs: rf.attended_pairs(),
            relative_pairs: 0.0,
        });
    }
    let baseline = rows
        .iter()
        .find(|r| r.k == 2)
        .unwrap_or(&rows[0])
        .attended_pairs as f64;
    for row in &mut rows {
        row.relative_pairs = row.attended_pairs as f64 / baseline;
    }
    Ok(rows)
}

/// Fixed-column CSV, one row per record.
pub fn write_records_csv<W: Write>(records: &[BenchRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format CSV (`n,p,k,seed,variant,metric,value`) for plotting tools.
pub fn write_long_csv<W: Write>(records: &[BenchRecord], mut w: W) -> Result<()> {
    writeln!(w, "n,p,k,seed,variant,metric,value")?;
    for r in records {
        let mut row = |variant: &str, metric: &str, value: f64| -> std::io::Result<()> {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.n, r.p, r.k, r.seed, variant, metric, value
            )
        };
        row("anchor", "pairs", r.attended_pairs as f64)?;
        row("anchor", "forward_ms", r.forward_ms_anchor)?;
        row("anchor", "backward_ms", r.backward_ms_anchor)?;
        row("anchor", "peak_bytes", r.peak_bytes_anchor as f64)?;
        row("dense", "pairs", r.dense_pairs as f64)?;
        if let Some(f) = r.forward_ms_dense {
            row("dense", "forward_ms", f)?;
        }
        if let Some(b) = r.backward_ms_dense {
            row("dense", "backward_ms", b)?;
        }
        if let Some(bytes) = r.peak_bytes_dense {
            row("dense", "peak_bytes", bytes as f64)?;
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_powers() {
        let quad: Vec<(f64, f64)> = [100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&n| (n, n * n))
            .collect();
        let fit = fit_scaling_exponent(&quad).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!(fit.residual < 1e-9);

        let lin: Vec<(f64, f64)> = [100.0, 200.0, 400.0]
            .iter()
            .map(|&n| (n, 3.5 * n))
            .collect();
        let fit = fit_scaling_exponent(&lin).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slope_rejects_degenerate_input() {
        assert!(fit_scaling_exponent(&[(10.0, 5.0), (20.0, 9.0)]).is_err());
        assert!(fit_scaling_exponent(&[(10.0, 5.0), (10.0, 5.0), (10.0, 5.0)]).is_err());
        assert!(fit_scaling_exponent(&[(10.0, 5.0), (20.0, 0.0), (30.0, 2.0)]).is_err());
    }

    #[test]
    fn density_rules() {
        assert_eq!(DensityRule::FixedP(0.25).p_for(1000), 0.25);
        let p = DensityRule::FixedAvgDegree(10.0).p_for(101);
        assert!((p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn k_sweep_complete_graph_rows_identical() {
        let mut e = Vec::new();
        for u in 0..6u32 {
            for v in (u + 1)..6 {
                e.push((u, v));
            }
        }
        let k6 = Graph::from_edge_list(&e, 6).unwrap();
        let rows = k_sweep_report(&k6, &[1, 2, 3], 0).unwrap();
        for row in &rows {
            assert_eq!(row.anchors, rows[0].anchors);
            assert_eq!(row.attended_pairs, rows[0].attended_pairs);
            assert_eq!(row.max_ball, rows[0].max_ball);
        }
    }

    #[test]
    fn k_sweep_path_anchor_counts_drop() {
        let edges: Vec<(u32, u32)> = (0..99).map(|i| (i, i + 1)).collect();
        let p100 = Graph::from_edge_list(&edges, 100).unwrap();
        let rows = k_sweep_report(&p100, &[1, 2, 3], 1).unwrap();
        assert!(rows[0].anchors > rows[1].anchors);
        assert!(rows[1].anchors > rows[2].anchors);
    }

    #[test]
    fn k_sweep_rejects_bad_k() {
        let g = Graph::from_edge_list(&[(0, 1)], 2).unwrap();
        assert!(k_sweep_report(&g, &[0], 0).is_err());
        assert!(k_sweep_report(&g, &[7], 0).is_err());
        assert!(k_sweep_report(&g, &[], 0).is_err());
    }
}
