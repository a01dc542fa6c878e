use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use seg_core::augment::tune_tna;
use seg_core::graph::{generate_planted_partition, PerturbMode, PlantedPartitionSpec};
use seg_core::harness::{
    correlation_samelabel_curve, make_splits, noise_accuracy_sweep, reliability_curve, run_protocol,
    trainsize_accuracy_sweep, Method,
};
use seg_core::io::{load_graph, save_graph};
use seg_core::seeds::derive_seed;
use seg_core::theory::{check_addition, check_deletion, check_tna};
use seg_core::topology::{apply_decision, tune_tu_ensemble, TUThresholds};
use seg_core::{noise_ratio, predict, train, Error, Graph, Split};

use crate::output::{emit_json, write_json, write_rows};
use crate::settings::{self, ModelArgs, ProtocolArgs, Settings};
use crate::{Cli, Command, SplitArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoryCheck {
    Deletion,
    Addition,
    Tna,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Baseline,
    Tu,
    Tna,
    Seg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Noise,
    Trainsize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerturbArg {
    DeleteInter,
    AddIntra,
}

impl From<PerturbArg> for PerturbMode {
    fn from(p: PerturbArg) -> Self {
        match p {
            PerturbArg::DeleteInter => PerturbMode::DeleteInter,
            PerturbArg::AddIntra => PerturbMode::AddIntra,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Reliability,
    Correlation,
}

fn resolve(base: &Settings, model: &ModelArgs, protocol: &ProtocolArgs) -> Result<Settings> {
    let mut s = base.clone();
    model.apply(&mut s.model);
    protocol.apply(&mut s.protocol);
    s.model.validate()?;
    s.protocol.validate()?;
    Ok(s)
}

fn load(path: &Path) -> Result<Graph> {
    load_graph(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn resolve_split(graph: &Graph, settings: &Settings, args: &SplitArgs) -> Result<Split> {
    let split = match &args.split {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str::<Split>(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => {
            let mut splits = make_splits(graph, &settings.protocol)?;
            if args.split_index >= splits.len() {
                return Err(Error::InvalidConfig(format!(
                    "split index {} but only {} splits are generated",
                    args.split_index,
                    splits.len()
                ))
                .into());
            }
            splits.swap_remove(args.split_index)
        }
    };
    split.validate(graph.num_nodes())?;
    Ok(split)
}

fn split_source(args: &SplitArgs) -> Value {
    match &args.split {
        Some(p) => json!({ "file": p }),
        None => json!({ "index": args.split_index }),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => settings::load(p)?,
        None => Settings::default(),
    };
    match cli.command {
        Command::Synth {
            n,
            c,
            p_intra,
            p_inter,
            dim,
            signal,
            seed,
            out,
        } => {
            let g = generate_planted_partition(&PlantedPartitionSpec {
                n,
                c,
                p_intra,
                p_inter,
                feature_dim: dim,
                feature_signal: signal,
                seed,
            })?;
            save_graph(&g, &out)?;
            let r = noise_ratio(&g);
            println!(
                "wrote {} nodes, {} edges, α={:.4} to {}",
                g.num_nodes(),
                r.num_edges,
                r.noise_ratio,
                out.display()
            );
        }
        Command::Noise { graph, json } => {
            let g = load(&graph)?;
            let r = noise_ratio(&g);
            if json {
                emit_json(None, &r)?;
            } else {
                println!("α={:.4}", r.noise_ratio);
                println!("edges={} inter={} intra={}", r.num_edges, r.num_inter, r.num_intra);
            }
        }
        Command::Train {
            graph,
            model,
            protocol,
            split,
            out,
        } => {
            let s = resolve(&base, &model, &protocol)?;
            let g = load(&graph)?;
            let sp = resolve_split(&g, &s, &split)?;
            let trained = train(&g, &sp, &s.model)?;
            let preds = predict(&trained, &g)?;
            let val = preds.accuracy(g.labels(), &sp.val);
            let test = preds.accuracy(g.labels(), &sp.test);
            println!("val_accuracy={val:.4} test_accuracy={test:.4}");
            if let Some(out) = out {
                let text = trained.to_json()?;
                crate::output::write_atomic(&out, |w| Ok(w.write_all(text.as_bytes())?))?;
            }
        }
        Command::Tu {
            graph,
            mode,
            grid,
            models,
            model,
            protocol,
            split,
            report,
            out_graph,
        } => {
            let s = resolve(&base, &model, &protocol)?;
            let grid: Vec<TUThresholds> = match &grid {
                Some(p) => settings::load_json(p)?,
                None => s.search.grid(mode).to_vec(),
            };
            let g = load(&graph)?;
            let sp = resolve_split(&g, &s, &split)?;
            let tuning = tune_tu_ensemble(&g, &sp, &s.model, mode, &grid, models)?;
            let updated = apply_decision(&g, &tuning.decision)?;
            let before = noise_ratio(&g);
            let after = noise_ratio(&updated);
            println!(
                "mode={mode} tau_d={} tau_a={} val_accuracy={:.4} deleted={} added={} α={:.4}->{:.4}",
                tuning.best.tau_d,
                tuning.best.tau_a,
                tuning.val_accuracy,
                tuning.decision.deletions.len(),
                tuning.decision.additions.len(),
                before.noise_ratio,
                after.noise_ratio
            );
            if let Some(dir) = out_graph {
                save_graph(&updated, dir)?;
            }
            if let Some(path) = report {
                let mut s = s;
                s.search = with_grid(s.search, mode, grid);
                write_json(
                    &path,
                    &json!({
                        "settings": s,
                        "graph": graph,
                        "split": split_source(&split),
                        "num_models": models,
                        "noise_before": before,
                        "noise_after": after,
                        "tuning": tuning,
                    }),
                )?;
            }
        }
        Command::Tna {
            graph,
            num_models,
            tau_grid,
            model,
            protocol,
            split,
            report,
        } => {
            let mut s = resolve(&base, &model, &protocol)?;
            if let Some(l) = num_models {
                s.search.num_models = l;
            }
            if let Some(p) = &tau_grid {
                s.search.tau_grid = settings::load_json(p)?;
            }
            let g = load(&graph)?;
            let sp = resolve_split(&g, &s, &split)?;
            let tuning = tune_tna(&g, &sp, &s.model, s.search.num_models, &s.search.tau_grid, s.model.seed)?;
            println!(
                "tau_c={} val_accuracy={:.4} added={} pseudo_label_errors={}",
                tuning.best_tau,
                tuning.val_accuracy,
                tuning.augmented.len(),
                tuning.augmented.pseudo_label_errors(g.labels())
            );
            if let Some(path) = report {
                write_json(
                    &path,
                    &json!({
                        "settings": s,
                        "graph": graph,
                        "split": split_source(&split),
                        "num_added": tuning.augmented.len(),
                        "class_counts": tuning.augmented.class_counts(g.num_classes()),
                        "pseudo_label_errors": tuning.augmented.pseudo_label_errors(g.labels()),
                        "tuning": tuning,
                    }),
                )?;
            }
        }
        Command::Theory {
            check,
            p,
            c,
            alpha,
            beta,
            lambda,
            trials,
            n,
            m,
            seed,
            out,
        } => {
            let result = theory(check, p, c, alpha, beta, lambda, trials, n, m, seed)?;
            emit_json(out.as_deref(), &result)?;
        }
        Command::Protocol {
            graph,
            method,
            mode,
            model,
            protocol,
            out,
            csv,
        } => {
            let s = resolve(&base, &model, &protocol)?;
            let method = match method {
                MethodArg::Baseline => Method::Baseline,
                MethodArg::Tu => Method::Tu { mode },
                MethodArg::Tna => Method::Tna,
                MethodArg::Seg => Method::Seg,
            };
            let g = load(&graph)?;
            let report = run_protocol(&g, method, &s.model, &s.protocol, &s.search)?;
            print!("method={method} mean={:.4} std={:.4} split_std={:.4}", report.mean, report.std, report.split_std);
            if let Some(b) = &report.baseline {
                print!(" baseline={:.4} diff={:+.4}±{:.4}", b.mean, b.paired.mean_diff, b.paired.std_error);
            }
            println!();
            if let Some(path) = out {
                write_json(&path, &json!({ "settings": s, "graph": graph, "report": report }))?;
            }
            if let Some(path) = csv {
                crate::output::write_atomic(&path, |w| Ok(report.write_csv(w)?))?;
            }
        }
        Command::Sweep {
            graph,
            kind,
            perturb,
            fractions,
            sizes,
            model,
            protocol,
            out,
            csv,
        } => {
            let s = resolve(&base, &model, &protocol)?;
            let g = load(&graph)?;
            let rows = match kind {
                SweepKind::Noise => noise_accuracy_sweep(&g, &s.model, perturb.into(), &fractions, &s.protocol)?,
                SweepKind::Trainsize => trainsize_accuracy_sweep(&g, &s.model, &sizes, &s.protocol)?,
            };
            for r in &rows {
                println!("x={} α={:.4} edges={} mean={:.4} std={:.4}", r.x, r.noise_ratio, r.num_edges, r.mean, r.std);
            }
            if let Some(path) = out {
                let perturb = PerturbMode::from(perturb);
                write_json(
                    &path,
                    &json!({ "settings": s, "graph": graph, "kind": kind, "perturb": perturb, "rows": rows }),
                )?;
            }
            if let Some(path) = csv {
                write_rows(&path, &rows)?;
            }
        }
        Command::Curves {
            graph,
            kind,
            bins,
            pairs,
            model,
            protocol,
            split,
            out,
            csv,
        } => {
            let s = resolve(&base, &model, &protocol)?;
            let g = load(&graph)?;
            let sp = resolve_split(&g, &s, &split)?;
            let trained = train(&g, &sp, &s.model)?;
            let preds = predict(&trained, &g)?.select(&sp.test);
            let labels: Vec<usize> = sp.test.iter().map(|&v| g.label(v)).collect();
            let bins_json = match kind {
                CurveKind::Reliability => {
                    let curve = reliability_curve(&preds, &labels, bins)?;
                    if let Some(path) = &csv {
                        write_rows(path, &curve)?;
                    }
                    serde_json::to_value(curve)?
                }
                CurveKind::Correlation => {
                    let seed = derive_seed(s.model.seed, &[], "pairs");
                    let curve = correlation_samelabel_curve(&preds, &labels, pairs, bins, seed)?;
                    if let Some(path) = &csv {
                        write_rows(path, &curve)?;
                    }
                    serde_json::to_value(curve)?
                }
            };
            let doc = json!({
                "settings": s,
                "graph": graph,
                "split": split_source(&split),
                "kind": kind,
                "bins": bins_json,
            });
            emit_json(out.as_deref(), &doc)?;
        }
    }
    Ok(())
}

fn with_grid(
    mut search: seg_core::harness::SearchSpace,
    mode: seg_core::topology::TUMode,
    grid: Vec<TUThresholds>,
) -> seg_core::harness::SearchSpace {
    use seg_core::topology::TUMode;
    match mode {
        TUMode::Delete => search.delete_grid = grid,
        TUMode::Add => search.add_grid = grid,
        TUMode::Modify => search.modify_grid = grid,
    }
    search
}

#[allow(clippy::too_many_arguments)]
fn theory(
    check: TheoryCheck,
    p: f64,
    c: usize,
    alpha: f64,
    beta: f64,
    lambda: Option<f64>,
    trials: Option<usize>,
    n: Option<usize>,
    m: Option<usize>,
    seed: u64,
) -> Result<Value> {
    let mut doc = match check {
        TheoryCheck::Deletion => {
            let (n, m, trials) = (n.unwrap_or(1000), m.unwrap_or(5000), trials.unwrap_or(40));
            let r = check_deletion(alpha, p, c, n, m, trials, seed)?;
            let mut v = serde_json::to_value(r)?;
            merge(&mut v, json!({ "alpha": alpha, "n": n, "m": m, "trials": trials }));
            v
        }
        TheoryCheck::Addition => {
            let n = n.unwrap_or(300);
            let m = match (lambda, m) {
                (Some(l), _) => {
                    if l.is_nan() || l <= 0.0 {
                        return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")).into());
                    }
                    (l * (n * n) as f64).round() as usize
                }
                (None, Some(m)) => m,
                (None, None) => 3 * n,
            };
            let trials = trials.unwrap_or(400);
            let r = check_addition(alpha, p, c, n, m, trials, seed)?;
            let mut v = serde_json::to_value(r)?;
            merge(&mut v, json!({ "n": n, "m": m, "trials": trials }));
            v
        }
        TheoryCheck::Tna => {
            let samples = trials.unwrap_or(1_000_000);
            let r = check_tna(p, beta, c, samples, seed)?;
            let mut v = serde_json::to_value(r)?;
            merge(&mut v, json!({ "beta": beta, "samples": samples }));
            v
        }
    };
    merge(&mut doc, json!({ "check": check, "p": p, "c": c, "seed": seed }));
    Ok(doc)
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        for (k, v) in b {
            a.entry(k).or_insert(v);
        }
    }
}
