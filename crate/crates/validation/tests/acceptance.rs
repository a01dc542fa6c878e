//! Acceptance gate. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits non-zero when any gating criterion fails.
//!
//! Run a subset by id: `cargo test -p seg-validation --test acceptance -- 2a 5`.

use std::collections::HashSet;
use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

use seg_core::augment::{augment, proposal_predictions};
use seg_core::graph::{generate_planted_partition, noise_ratio, PlantedPartitionSpec};
use seg_core::harness::{error_reduction, make_splits, run_protocol, Method, ProtocolConfig, SearchSpace};
use seg_core::io::load_graph;
use seg_core::model::gradient_check;
use seg_core::seeds::derive_seed;
use seg_core::theory::{
    addition_threshold, check_addition, check_deletion, check_tna, deletion_improves, tna_accuracy_q,
};
use seg_core::topology::{add_edges, delete_edges, TUMode, TUThresholds};
use seg_core::{predict, train, Graph, ModelConfig, ModelKind, PredictionMatrix, Split};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    limit_secs: f64,
    gating: bool,
    run: fn() -> Outcome,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn planted(n: usize, c: usize, p_intra: f64, p_inter: f64, dim: usize, signal: f64, seed: u64) -> Graph {
    generate_planted_partition(&PlantedPartitionSpec {
        n,
        c,
        p_intra,
        p_inter,
        feature_dim: dim,
        feature_signal: signal,
        seed,
    })
    .expect("planted partition")
}

// 1. Analytic gradients against central differences.
fn gradients() -> Outcome {
    let (mut worst_sgc, mut worst_gcn) = (0.0f64, 0.0f64);
    let (mut compared, mut skipped) = (0, 0);
    for i in 0..20u64 {
        let c = 2 + (i % 3) as usize;
        let n = 24 + 3 * i as usize;
        let g = planted(n, c, 0.3, 0.05, 6, 0.8, i);
        let train_nodes: Vec<usize> = (0..n).step_by(3).collect();
        let split = Split::new(train_nodes, Vec::new(), Vec::new());
        for kind in [ModelKind::Sgc, ModelKind::Gcn] {
            let cfg = ModelConfig::new(kind).with_seed(100 + i);
            let report = match gradient_check(&g, &split, &cfg, 1e-5) {
                Ok(r) => r,
                Err(e) => return Outcome::Fail(format!("instance {i}: {e}")),
            };
            compared += report.compared;
            skipped += report.skipped_at_kinks;
            let err = report.max_rel_error;
            match kind {
                ModelKind::Sgc => worst_sgc = worst_sgc.max(err),
                ModelKind::Gcn => worst_gcn = worst_gcn.max(err),
            }
        }
    }
    verdict(
        worst_sgc < 1e-6 && worst_gcn < 1e-4,
        format!(
            "20 instances, max rel err SGC {worst_sgc:.2e} (< 1e-6), GCN {worst_gcn:.2e} (< 1e-4); \
             {compared} parameters compared, {skipped} straddling a ReLU kink left out"
        ),
    )
}

const DEL_C: [usize; 3] = [2, 5, 7];
const DEL_ALPHA: [f64; 3] = [0.1, 0.19, 0.3];
const DEL_P: [f64; 3] = [0.4, 0.6, 0.8];

fn deletion_cells() -> Vec<(usize, f64, f64, seg_core::theory::MonteCarloCheck)> {
    let mut cells = Vec::new();
    for (ci, &c) in DEL_C.iter().enumerate() {
        for (ai, &alpha) in DEL_ALPHA.iter().enumerate() {
            for (pi, &p) in DEL_P.iter().enumerate() {
                let seed = derive_seed(2, &[ci as u64, ai as u64, pi as u64], "acceptance");
                let r = check_deletion(alpha, p, c, 1000, 5000, 40, seed).expect("deletion check");
                cells.push((c, alpha, p, r));
            }
        }
    }
    cells
}

// 2a. Monte Carlo deletion matches the closed form.
fn deletion_monte_carlo() -> Outcome {
    let cells = deletion_cells();
    let bad: Vec<String> = cells
        .iter()
        .filter(|(.., r)| !r.pass)
        .map(|(c, a, p, r)| format!("c={c} α={a} p={p}: mc {:.5} vs {:.5} (σ {:.5})", r.monte_carlo, r.closed_form, r.sigma))
        .collect();
    let worst = cells
        .iter()
        .map(|(.., r)| (r.monte_carlo - r.closed_form).abs() / r.sigma.max(1e-300))
        .fold(0.0, f64::max);
    verdict(
        bad.is_empty(),
        format!("{} cells, n=1000 m=5000, 40 trials, worst |mc-cf| = {worst:.2}σ {}", cells.len(), bad.join("; ")),
    )
}

// 2b. Empirical improvement coincides with p > 2/(c+1).
fn deletion_iff() -> Outcome {
    let cells = deletion_cells();
    let mut mismatches = Vec::new();
    let mut excluded = 0;
    for (c, alpha, p, r) in &cells {
        if (r.monte_carlo - alpha).abs() < r.sigma {
            excluded += 1;
            continue;
        }
        let improved = r.monte_carlo < *alpha;
        if improved != deletion_improves(*p, *c) {
            mismatches.push(format!("c={c} α={alpha} p={p}: α_E={:.4}", r.monte_carlo));
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{} cells ({excluded} within 1σ of α excluded), {} disagree with p > 2/(c+1): {}",
            cells.len(),
            mismatches.len(),
            mismatches.join("; ")
        ),
    )
}

// 3. Two-model agreement accuracy.
fn tna_theory() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    let mut cells = 0;
    for c in [2usize, 7] {
        for p in [0.6, 0.8] {
            for beta in [p, 0.9, 1.0] {
                cells += 1;
                let seed = derive_seed(3, &[c as u64, (p * 10.0) as u64, (beta * 100.0) as u64], "acceptance");
                let r = match check_tna(p, beta, c, 1_000_000, seed) {
                    Ok(r) => r,
                    Err(e) => return Outcome::Fail(format!("c={c} p={p} β={beta}: {e}")),
                };
                worst = worst.max((r.monte_carlo - r.closed_form).abs() / r.sigma);
                let q = tna_accuracy_q(p, beta, c).unwrap();
                let q_ge_p = q >= p - 1e-12 && r.monte_carlo >= p - 3.0 * r.sigma;
                if !r.pass || !q_ge_p {
                    bad.push(format!("c={c} p={p} β={beta}: mc {:.5} cf {:.5} σ {:.5}", r.monte_carlo, r.closed_form, r.sigma));
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{cells} cells at 10^6 samples, worst {worst:.2}σ, q >= p everywhere {}", bad.join("; ")),
    )
}

// 4. Addition above the threshold lowers the noise ratio.
fn addition_direction() -> Outcome {
    let (n, m, trials) = (300usize, 900usize, 400usize);
    let lambda = m as f64 / (n * n) as f64;
    let mut bad = Vec::new();
    let mut cells = 0;
    let mut max_gap = f64::NEG_INFINITY;
    for c in [2usize, 3, 5] {
        for alpha in [0.1, 0.2, 0.3] {
            let bound = addition_threshold(alpha, c, lambda).unwrap().exact;
            for (k, margin) in [0.01, 0.03, 0.05].into_iter().enumerate() {
                let p = (bound + margin).min(1.0);
                cells += 1;
                let seed = derive_seed(4, &[c as u64, (alpha * 10.0) as u64, k as u64], "acceptance");
                let r = check_addition(alpha, p, c, n, m, trials, seed).expect("addition check");
                let upper = r.check.monte_carlo + 3.0 * r.check.sigma;
                max_gap = max_gap.max(upper - alpha);
                if !(r.above_threshold && r.reduces_noise) {
                    bad.push(format!("c={c} α={alpha} p={p:.4}: α_E={:.4} + 3σ = {upper:.4}", r.check.monte_carlo));
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!(
            "{cells} cells, n={n} λ={lambda}, {trials} trials, p = bound + {{0.01, 0.03, 0.05}}, max (α_E + 3σ - α) = {max_gap:.4} {}",
            bad.join("; ")
        ),
    )
}

// 5. Ground-truth predictions make topology update exact.
fn tu_oracle() -> Outcome {
    let g = planted(600, 3, 0.028, 0.006, 4, 0.5, 5);
    let alpha = noise_ratio(&g).noise_ratio;
    let oracle = PredictionMatrix::one_hot(g.labels(), g.num_classes());
    let (deleted, _) = delete_edges(&g, &oracle, &TUThresholds::new(1.0, 1.0)).unwrap();
    let after = noise_ratio(&deleted);
    let mut inter_added = 0;
    let mut added = 0;
    for tau_a in [0.0, 0.5, 0.99] {
        let (_, d) = add_edges(&g, &oracle, &TUThresholds::new(0.0, tau_a)).unwrap();
        added += d.additions.len();
        inter_added += d.additions.iter().filter(|e| g.is_inter_class(e.u, e.v)).count();
    }
    verdict(
        after.noise_ratio == 0.0 && after.num_intra == noise_ratio(&g).num_intra && inter_added == 0 && added > 0,
        format!(
            "α={alpha:.3}, after deletion α={} ({} inter left), {added} additions over τ_a ∈ {{0, 0.5, 0.99}} with {inter_added} inter-class",
            after.noise_ratio, after.num_inter
        ),
    )
}

/// Error rate of `preds` over `nodes`.
fn error_rate(preds: &PredictionMatrix, labels: &[usize], nodes: &[usize]) -> f64 {
    let wrong = nodes.iter().filter(|&&v| preds.argmax(v) != labels[v]).count();
    wrong as f64 / nodes.len().max(1) as f64
}

// 6. Agreement of swapped-split models beats one model at equal size.
fn tna_diversity() -> Outcome {
    let g = planted(600, 3, 0.03, 0.006, 16, 0.6, 6);
    let cfg = ModelConfig::new(ModelKind::Gcn);
    let mut diffs = Vec::new();
    let mut accs = Vec::new();
    let (mut single_err, mut pair_err, mut sizes) = (0.0, 0.0, 0usize);
    for seed in 0..24u64 {
        let protocol = ProtocolConfig {
            n_splits: 1,
            master_seed: seed,
            ..ProtocolConfig::default()
        };
        let split = make_splits(&g, &protocol).unwrap().remove(0);
        let one = predict(&train(&g, &split, &cfg.clone().with_seed(derive_seed(seed, &[], "single"))).unwrap(), &g).unwrap();
        accs.push(one.accuracy(g.labels(), &split.test));

        let pair = proposal_predictions(&g, &split, &cfg, 2, derive_seed(seed, &[], "swap")).unwrap();
        let agreed = augment(&pair, &split, 0.0).unwrap();
        let k = agreed.len();
        if k == 0 {
            return Outcome::Fail(format!("seed {seed}: the two models agree on no node"));
        }
        let e_pair = agreed.pseudo_label_errors(g.labels()) as f64 / k as f64;

        let visible: HashSet<usize> = split.visible().into_iter().collect();
        let mut ranked: Vec<usize> = (0..g.num_nodes()).filter(|v| !visible.contains(v)).collect();
        ranked.sort_by(|&a, &b| one.node(b).confidence.total_cmp(&one.node(a).confidence).then(a.cmp(&b)));
        ranked.truncate(k);
        let e_one = error_rate(&one, g.labels(), &ranked);

        single_err += e_one;
        pair_err += e_pair;
        sizes += k;
        diffs.push(e_one - e_pair);
    }
    let runs = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / runs;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (runs - 1.0)).sqrt();
    let t = mean / (sd / runs.sqrt());
    let p_value = 1.0 - StudentsT::new(0.0, 1.0, runs - 1.0).unwrap().cdf(t);
    let acc = accs.iter().sum::<f64>() / runs;
    verdict(
        (0.75..=0.85).contains(&acc) && mean > 0.0 && p_value < 0.05,
        format!(
            "{} seeds, single-model acc {acc:.3}, mean |T'| {:.0}, error single {:.4} vs pair {:.4}, one-sided paired t={t:.2} p={p_value:.2e}",
            diffs.len(),
            sizes as f64 / runs,
            single_err / runs,
            pair_err / runs
        ),
    )
}

// 7. Validation tuning with rejection in every grid never loses much.
fn never_degrade() -> Outcome {
    let search = SearchSpace::default();
    let methods = [
        Method::Tu { mode: TUMode::Delete },
        Method::Tu { mode: TUMode::Add },
        Method::Tu { mode: TUMode::Modify },
        Method::Tna,
    ];
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
    for run in 0..10u64 {
        let g = planted(300, 3, 0.04, 0.01, 12, 0.5, 70 + run);
        let protocol = ProtocolConfig {
            n_train_per_class: 10,
            n_val_per_class: 15,
            n_splits: 2,
            n_seeds: 2,
            master_seed: run,
        };
        for (k, &method) in methods.iter().enumerate() {
            let r = match run_protocol(&g, method, &ModelConfig::new(ModelKind::Gcn), &protocol, &search) {
                Ok(r) => r,
                Err(e) => return Outcome::Fail(format!("run {run} {method}: {e}")),
            };
            let base = r.baseline.expect("baseline comparison");
            diffs[k].push(r.mean - base.mean);
        }
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, method) in methods.iter().enumerate() {
        let d = &diffs[k];
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let se = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
        let pass = mean >= -2.0 * se;
        ok &= pass;
        parts.push(format!("{method} {mean:+.4} (2SE {:.4})", 2.0 * se));
    }
    verdict(ok, format!("10 runs, GCN, mean diff vs baseline: {}", parts.join(", ")))
}

// 8. Error-reduction arithmetic.
fn error_reduction_values() -> Outcome {
    let a = error_reduction(0.787, 0.823).unwrap();
    let b = error_reduction(0.652, 0.711).unwrap();
    let c = error_reduction(0.665, 0.711).unwrap();
    verdict(
        (a - 0.169).abs() <= 0.001 && (b - 0.1695).abs() <= 0.005 && (c - 0.1373).abs() <= 1e-4,
        format!("{a:.4}, {b:.4}, {c:.4}"),
    )
}

// 9. Optional reproduction on a real citation graph.
fn dataset_reproduction() -> Outcome {
    let Ok(dir) = std::env::var("SEG_CORA_DIR") else {
        return Outcome::Skip("set SEG_CORA_DIR to a dataset directory to run".into());
    };
    let g = match load_graph(&dir) {
        Ok(g) => g,
        Err(e) => return Outcome::Fail(format!("{dir}: {e}")),
    };
    let cfg = ModelConfig::new(ModelKind::Gcn);
    let protocol = ProtocolConfig::default();
    let r = match run_protocol(&g, Method::Seg, &cfg, &protocol, &SearchSpace::default()) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let base = r.baseline.expect("baseline comparison");
    verdict(
        (0.76..=0.81).contains(&base.mean) && r.mean >= base.mean,
        format!("baseline {:.4} ± {:.4}, SEG {:.4} ± {:.4}", base.mean, base.std, r.mean, r.std),
    )
}

fn main() {
    let criteria = [
        Criterion { id: "1", title: "gradient fidelity", limit_secs: 60.0, gating: true, run: gradients },
        Criterion { id: "2a", title: "deletion closed form vs Monte Carlo", limit_secs: 120.0, gating: true, run: deletion_monte_carlo },
        Criterion { id: "2b", title: "deletion improves exactly when p > 2/(c+1)", limit_secs: 120.0, gating: true, run: deletion_iff },
        Criterion { id: "3", title: "agreement accuracy closed form vs Monte Carlo", limit_secs: 60.0, gating: true, run: tna_theory },
        Criterion { id: "4", title: "addition above threshold lowers noise", limit_secs: 120.0, gating: true, run: addition_direction },
        Criterion { id: "5", title: "topology update with oracle predictions", limit_secs: 1.0, gating: true, run: tu_oracle },
        Criterion { id: "6", title: "swapped-split agreement beats one model", limit_secs: 300.0, gating: true, run: tna_diversity },
        Criterion { id: "7", title: "tuned enhancements never degrade", limit_secs: 600.0, gating: true, run: never_degrade },
        Criterion { id: "8", title: "error-reduction arithmetic", limit_secs: 1.0, gating: true, run: error_reduction_values },
        Criterion { id: "9", title: "dataset reproduction (optional)", limit_secs: 3600.0, gating: false, run: dataset_reproduction },
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.iter().any(|w| w == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) if secs <= c.limit_secs => ("PASS", d),
            Outcome::Pass(d) => ("FAIL", format!("{d} [over time limit of {}s]", c.limit_secs)),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:<2} {tag} {} ({secs:.1}s): {detail}", c.id, c.title);
        if tag == "FAIL" && c.gating {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
    } else {
        println!("acceptance: failed criteria {}", failed.join(", "));
        std::process::exit(1);
    }
}
