//! Command-line front end: graph generation, anchor selection, attention
//! runs, gradient checks, expressiveness reports, and scaling benchmarks.
//!
//! Exit codes: 0 on success, 1 when a verification or tolerance check
//! fails, 2 on usage or input parse errors.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use anchor_attention::anchor::{anchor_sweep, select_anchors, verify_dominating};
use anchor_attention::attention::{
    attention_forward, build_receptive_field, gradcheck, random_features, AttentionLayerParams,
    TransformerLayer,
};
use anchor_attention::bench::{
    fit_scaling_exponent, k_sweep_report, run_scaling_suite, write_long_csv, write_records_csv,
    BenchRecord, ScalingConfig, SlopeFit,
};
use anchor_attention::encoding::EncodingConfig;
use anchor_attention::expressiveness::{
    fact2_distribution, fact2_distribution_exhaustive, wl_refine, Fact2Config,
};
use anchor_attention::graph::erdos_renyi;
use anchor_attention::io::{read_edge_list_file, write_edge_list_file};
use anchor_attention::Error as CoreError;

const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "anchor-attn", version, about = "Sparse graph attention over k-dominating-set anchors", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an Erdős–Rényi random graph as an edge-list file.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select a k-dominating anchor set, verify it, print it as JSON.
    Anchors {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one sparse attention forward pass on random features.
    Forward {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the analytic backward pass against finite differences.
    Gradcheck {
        #[arg(long)]
        graph: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Check the full pre-norm transformer layer instead of bare attention.
        #[arg(long)]
        layer: bool,
    },
    /// Compare two graphs under 1-WL color refinement.
    Wl {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Run the anchor-mixture separation construction on two graphs.
    Fact2 {
        #[arg(long)]
        g1: PathBuf,
        #[arg(long)]
        g2: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// In-ball logit constant a.
        #[arg(long, default_value_t = 0.0)]
        bias_a: f64,
        /// Out-of-ball anchor logit constant b (default ln 2).
        #[arg(long, default_value_t = std::f64::consts::LN_2)]
        bias_b: f64,
        #[arg(long, default_value_t = 16)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Enumerate every minimum k-dominating set instead of seeded trials.
        #[arg(long)]
        exhaustive: bool,
    },
    /// Anchor-count statistics for several k on one graph.
    Sweep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        k_values: Vec<u32>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Receptive-field cost table over k on one graph.
    Ksweep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        k_values: Vec<u32>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scaling suite preset and write per-size records.
    Bench {
        #[arg(long, value_enum)]
        preset: Preset,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Timed forward+backward sweeps per size.
        #[arg(long, default_value_t = 2)]
        reps: usize,
        /// Untimed warm-up sweeps per size.
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also write a long-format CSV for plotting tools.
        #[arg(long)]
        long_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = EncodingConfig::DEFAULT_D_MAX)]
    d_max: u32,
    #[arg(long, default_value_t = 32)]
    d_model: usize,
    #[arg(long, default_value_t = 2)]
    heads: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 500..3000 nodes at p = 0.0001.
    PaperGrid,
    /// 1000..8000 nodes at average degree 10; dense timing capped at 4000.
    FixedDegree,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

struct Failure {
    code: i32,
    msg: String,
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match e {
            CoreError::NotDominating { .. } => 1,
            _ => 2,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 2,
            msg: e.to_string(),
        }
    }
}

fn check_failed(msg: String) -> Failure {
    Failure { code: 1, msg }
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(f) = run(cli.command) {
        eprintln!("error: {}", f.msg);
        std::process::exit(f.code);
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { n, p, seed, out } => {
            let g = erdos_renyi(n, p, seed)?;
            write_edge_list_file(&g, &out)?;
            println!(
                "wrote {} ({} nodes, {} edges, p = {p}, seed = {seed})",
                out.display(),
                g.node_count(),
                g.edge_count()
            );
            Ok(())
        }
        Command::Anchors {
            graph,
            k,
            seed,
            out,
        } => {
            if k < 1 {
                return Err(Failure {
                    code: 2,
                    msg: "k must be >= 1".into(),
                });
            }
            let g = read_edge_list_file(&graph)?;
            let s = select_anchors(&g, k, seed);
            let verdict = verify_dominating(&g, &s);
            let mut json: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
            json["verified"] = serde_json::Value::Bool(verdict.is_dominating());
            if let Some(w) = verdict.witness() {
                json["witness"] = serde_json::Value::from(w);
            }
            let text = serde_json::to_string_pretty(&json).unwrap();
            println!("{text}");
            if let Some(path) = out {
                fs::write(path, text)?;
            }
            match verdict.witness() {
                None => Ok(()),
                Some(w) => Err(check_failed(format!(
                    "selected set failed verification, witness node {w}"
                ))),
            }
        }
        Command::Forward { graph, model, out } => {
            let g = read_edge_list_file(&graph)?;
            let (rf, params) = build_model(&g, &model)?;
            let h = random_features(g.node_count(), model.d_model, model.seed ^ 0xfeed);
            let (y, acts) = attention_forward(&h, &rf, &params)?;
            for (head, dev) in acts.alpha_row_sum_deviation(&rf).iter().enumerate() {
                println!("head {head}: max |row sum - 1| = {dev:.3e}");
            }
            let dump: BTreeMap<u32, Vec<f64>> = y
                .rows()
                .into_iter()
                .enumerate()
                .map(|(v, row)| (v as u32, row.to_vec()))
                .collect();
            let text = serde_json::to_string_pretty(&dump).unwrap();
            match out {
                Some(path) => fs::write(path, text)?,
                None => println!("{text}"),
            }
            Ok(())
        }
        Command::Gradcheck {
            graph,
            model,
            layer,
        } => {
            let g = read_edge_list_file(&graph)?;
            let (rf, params) = build_model(&g, &model)?;
            let h = random_features(g.node_count(), model.d_model, model.seed ^ 0xfeed);
            let report = if layer {
                let enc = EncodingConfig::new(model.k, model.d_max)?;
                let layer =
                    TransformerLayer::new_random(model.d_model, model.heads, &enc, model.seed);
                gradcheck::check_transformer_layer(&h, &rf, &layer, model.seed)?
            } else {
                gradcheck::check_attention(&h, &rf, &params, model.seed)?
            };
            for (name, err) in &report.per_tensor {
                println!("{name}: rel. error {err:.3e}");
            }
            println!("max rel. error {:.3e}", report.max_rel_error);
            if report.max_rel_error < GRADCHECK_TOL {
                Ok(())
            } else {
                Err(check_failed(format!(
                    "gradient check failed: {:.3e} >= {GRADCHECK_TOL:.0e}",
                    report.max_rel_error
                )))
            }
        }
        Command::Wl { g1, g2, max_rounds } => {
            let a = read_edge_list_file(&g1)?;
            let b = read_edge_list_file(&g2)?;
            let rounds = max_rounds.unwrap_or(a.node_count() + b.node_count() + 1);
            let result = wl_refine(&a, &b, rounds);
            println!("{}", serde_json::to_string_pretty(&result).unwrap());
            println!(
                "{}",
                if result.distinguishable {
                    "distinguishable"
                } else {
                    "indistinguishable"
                }
            );
            Ok(())
        }
        Command::Fact2 {
            g1,
            g2,
            k,
            bias_a,
            bias_b,
            trials,
            seed,
            exhaustive,
        } => {
            let a = read_edge_list_file(&g1)?;
            let b = read_edge_list_file(&g2)?;
            let cfg = Fact2Config {
                a: bias_a,
                b: bias_b,
                k,
            };
            let wl = wl_refine(&a, &b, a.node_count() + b.node_count() + 1);
            let dist = if exhaustive {
                fact2_distribution_exhaustive(&a, &b, &cfg)?
            } else {
                fact2_distribution(&a, &b, &cfg, trials, seed)?
            };
            let report = serde_json::json!({
                "wl": wl,
                "multisets": dist.multisets,
                "separation": dist.separation,
                "verdict": if dist.distinguished { "distinguished" } else { "not-distinguished" },
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        Command::Sweep {
            graph,
            k_values,
            seed,
            out,
        } => {
            let g = read_edge_list_file(&graph)?;
            validate_ks(&k_values)?;
            let records = anchor_sweep(&g, &k_values, seed);
            let text = serde_json::to_string_pretty(&records).unwrap();
            println!("{text}");
            if let Some(path) = out {
                fs::write(path, text)?;
            }
            Ok(())
        }
        Command::Ksweep {
            graph,
            k_values,
            seed,
            out,
        } => {
            let g = read_edge_list_file(&graph)?;
            let rows = k_sweep_report(&g, &k_values, seed)?;
            let text = serde_json::to_string_pretty(&rows).unwrap();
            println!("{text}");
            if let Some(path) = out {
                fs::write(path, text)?;
            }
            Ok(())
        }
        Command::Bench {
            preset,
            k,
            seed,
            reps,
            warmup,
            out,
            format,
            long_out,
        } => {
            let mut cfg = match preset {
                Preset::PaperGrid => ScalingConfig::paper_grid(k, seed)?,
                Preset::FixedDegree => ScalingConfig::fixed_degree(k, seed)?,
            };
            cfg.reps = reps.max(1);
            cfg.warmup = warmup;
            let records = run_scaling_suite(&cfg)?;
            match format {
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_records_csv(&records, &mut buf)?;
                    fs::write(&out, buf)?;
                }
                Format::Json => {
                    fs::write(&out, serde_json::to_string_pretty(&records).unwrap())?;
                }
            }
            println!("wrote {} ({} sizes)", out.display(), records.len());
            if let Some(path) = long_out {
                let mut buf = Vec::new();
                write_long_csv(&records, &mut buf)?;
                fs::write(&path, buf)?;
            }
            if matches!(preset, Preset::FixedDegree) {
                let slope_path = slope_path(&out);
                let summary = slope_summary(&records)?;
                fs::write(&slope_path, serde_json::to_string_pretty(&summary).unwrap())?;
                println!(
                    "attended-pairs slope {:.3}, dense slope {:.3}; wrote {}",
                    summary.attended.slope,
                    summary.dense.slope,
                    slope_path.display()
                );
            }
            Ok(())
        }
    }
}

fn build_model(
    g: &anchor_attention::graph::Graph,
    model: &ModelArgs,
) -> Result<
    (
        anchor_attention::attention::ReceptiveField,
        AttentionLayerParams,
    ),
    Failure,
> {
    let enc = EncodingConfig::new(model.k, model.d_max)?;
    if model.heads == 0 || model.d_model == 0 || model.d_model % model.heads != 0 {
        return Err(Failure {
            code: 2,
            msg: "d_model must be a positive multiple of heads".into(),
        });
    }
    let s = select_anchors(g, model.k, model.seed);
    let rf = build_receptive_field(g, &s, enc.d_max())?;
    let params = AttentionLayerParams::new_random(model.d_model, model.heads, &enc, model.seed);
    Ok((rf, params))
}

fn validate_ks(ks: &[u32]) -> Result<(), Failure> {
    if ks.is_empty() || ks.iter().any(|&k| k < 1) {
        return Err(Failure {
            code: 2,
            msg: "k values must be >= 1".into(),
        });
    }
    Ok(())
}

fn slope_path(out: &PathBuf) -> PathBuf {
    let mut p = out.clone().into_os_string();
    p.push(".slope.json");
    PathBuf::from(p)
}

#[derive(serde::Serialize)]
struct SlopeSummary {
    attended: SlopeFit,
    dense: SlopeFit,
    /// anchor / dense forward+backward time at the largest dense-timed size.
    time_ratio: Option<TimeRatio>,
}

#[derive(serde::Serialize)]
struct TimeRatio {
    n: usize,
    anchor_over_dense: f64,
}

fn slope_summary(records: &[BenchRecord]) -> Result<SlopeSummary, Failure> {
    let attended: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.n as f64, r.attended_pairs as f64))
        .collect();
    let dense: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.n as f64, r.dense_pairs as f64))
        .collect();
    let time_ratio = records
        .iter()
        .filter(|r| r.forward_ms_dense.is_some())
        .next_back()
        .map(|r| TimeRatio {
            n: r.n,
            anchor_over_dense: (r.forward_ms_anchor + r.backward_ms_anchor)
                / (r.forward_ms_dense.unwrap() + r.backward_ms_dense.unwrap()),
        });
    Ok(SlopeSummary {
        attended: fit_scaling_exponent(&attended)?,
        dense: fit_scaling_exponent(&dense)?,
        time_ratio,
    })
}
