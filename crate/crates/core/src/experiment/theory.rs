//! Self-generating randomized checks of the selection, truncation, apportionment,
//! self-expression and gradient machinery. Each failing instance is kept verbatim so
//! it can be replayed.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, TheorySection};
use crate::condense::allocate_quotas;
use crate::error::Result;
use crate::evidence::{
    compute_evidence, selected_set, sparsemax, top_b_margin, verify_selection_stability, verify_truncation_bound,
    EvidenceConfig, EvidenceInputs, SelectionParams, SparseMap,
};
use crate::fed::tracking::budget_stats;
use crate::gnn::{backbone_view, gcn_forward, gcn_gradients, GcnParams, GraphContext};
use crate::graph::{generate_synthetic_tag, normalize_adjacency, SyntheticConfig};
use crate::linalg::CsrMatrix;
use crate::rng::{self, StreamRng};
use crate::text::{build_bank, EncoderConfig};
use crate::topo::{candidate_sets, fusion_loss, self_expression, FusionParams, IstaConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    pub failures: usize,
    /// Smallest `bound + tolerance − observed` over all instances, where the check has one.
    pub worst_slack: Option<f64>,
    pub detail: serde_json::Value,
    pub failing_instance: Option<serde_json::Value>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            instances: 0,
            failures: 0,
            worst_slack: None,
            detail: serde_json::Value::Null,
            failing_instance: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn record(&mut self, ok: bool, slack: Option<f64>, instance: impl FnOnce() -> serde_json::Value) {
        self.instances += 1;
        if let Some(s) = slack {
            self.worst_slack = Some(self.worst_slack.map_or(s, |w: f64| w.min(s)));
        }
        if !ok {
            self.failures += 1;
            if self.failing_instance.is_none() {
                self.failing_instance = Some(instance());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<CheckReport>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckReport::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Euclidean projection onto the simplex by enumerating every candidate support.
pub fn brute_force_simplex_projection(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u64..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let tau = (support.iter().map(|&i| z[i]).sum::<f64>() - 1.0) / support.len() as f64;
        if support.iter().any(|&i| z[i] - tau < 0.0) {
            continue;
        }
        let mut p = vec![0.0; n];
        for &i in &support {
            p[i] = z[i] - tau;
        }
        let dist: f64 = p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sparsemax_oracle_suite(vectors: usize, max_len: usize, seed: u64) -> CheckReport {
    let mut rep = CheckReport::new("sparsemax_oracle");
    let mut r = rng::stream(seed, "theory.sparsemax");
    let mut worst = 0.0f64;
    for i in 0..vectors {
        let n = 1 + i % max_len.max(1);
        let scale = [0.1, 1.0, 5.0][i % 3];
        let mut z: Vec<f64> = (0..n).map(|_| r.gen_range(-scale..scale)).collect();
        if i % 7 == 0 && n > 1 {
            z[1] = z[0];
        }
        let fast = sparsemax(&z);
        let oracle = brute_force_simplex_projection(&z);
        let err = max_abs_diff(&fast, &oracle);
        worst = worst.max(err);
        rep.record(err <= 1e-9, Some(1e-9 - err), || json!({ "z": z }));
    }
    rep.detail = json!({ "max_abs_error": worst });
    rep
}

fn random_simplex(r: &mut StreamRng, n: usize, sparse: bool) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| -r.gen_range(1e-12f64..1.0).ln()).collect();
    if sparse {
        for x in p.iter_mut() {
            if r.gen_bool(0.3) {
                *x = 0.0;
            }
        }
        if p.iter().all(|&x| x == 0.0) {
            p[0] = 1.0;
        }
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| x / s).collect()
}

fn random_ball_vector(r: &mut StreamRng, d: usize) -> Array1<f64> {
    let radius = r.gen_range(0.2..=1.0);
    let v: Array1<f64> = Array1::from_shape_fn(d, |_| r.gen_range(-1.0..1.0));
    let n = v.dot(&v).sqrt().max(1e-12);
    v * (radius / n)
}

/// Antipodal construction: top-B entries share `e`, the tail uses `−e`, so the
/// truncation error equals `2M·δ_B` exactly.
pub fn antipodal_instance(n: usize, b: usize, d: usize, tail: f64) -> (Vec<f64>, Vec<Array1<f64>>) {
    let mut e0 = Array1::zeros(d);
    e0[0] = 1.0;
    let head = (1.0 - tail) / b as f64;
    let rest = tail / (n - b) as f64;
    let p = (0..n).map(|i| if i < b { head } else { rest }).collect();
    let e = (0..n).map(|i| if i < b { e0.clone() } else { -&e0 }).collect();
    (p, e)
}

pub fn truncation_suite(instances: usize, dim: usize, seed: u64, renormalize: bool) -> Result<CheckReport> {
    let mut rep = CheckReport::new("truncation_bound");
    let mut r = rng::stream(seed, "theory.truncation");
    let mut tight = 0;
    let mut weight_sum_deviation = 0.0f64;
    for i in 0..instances {
        let n = r.gen_range(2..=12);
        let b = r.gen_range(1..n);
        let (p, e) = if i % 50 == 0 {
            // the tail must stay below (n−b)/n for the head to be the top-B
            antipodal_instance(n, b, dim, r.gen_range(0.1..0.9) * (n - b) as f64 / n as f64)
        } else {
            let p = random_simplex(&mut r, n, i % 2 == 0);
            let e = (0..n).map(|_| random_ball_vector(&mut r, dim)).collect();
            (p, e)
        };
        let chk = verify_truncation_bound(&p, &e, b, renormalize)?;
        weight_sum_deviation = weight_sum_deviation.max((chk.weight_sum - 1.0).abs());
        if chk.bound > 0.0 && chk.slack() < 0.05 * chk.bound {
            tight += 1;
        }
        rep.record(chk.holds, Some(chk.slack() + 1e-9), || {
            json!({ "p": p, "e": e.iter().map(|v| v.to_vec()).collect::<Vec<_>>(), "b": b })
        });
    }
    rep.detail = json!({ "near_tight_instances": tight, "max_weight_sum_deviation": weight_sum_deviation });
    Ok(rep)
}

/// The (B+1)-th score raised past the B-th: a perturbation of size just above
/// the margin that moves the selected set.
pub fn sharpness_witness(scores: &[f64], b: usize) -> Option<Vec<f64>> {
    if b >= scores.len() {
        return None;
    }
    let margin = top_b_margin(scores, b);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    let mut delta = vec![0.0; scores.len()];
    delta[order[b]] = margin * 1.05 + 1e-6;
    Some(delta)
}

pub fn stability_suite(vectors: usize, trials: usize, seed: u64, map: SparseMap) -> Result<CheckReport> {
    let mut rep = CheckReport::new("selection_stability");
    let mut r = rng::stream(seed, "theory.stability");
    let mut witnesses = 0;
    let mut witness_example = None;
    let mut generated = 0;
    while generated < vectors {
        let n = r.gen_range(2..=10);
        let b = r.gen_range(1..n);
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let margin = top_b_margin(&scores, b);
        if margin <= 0.1 {
            continue;
        }
        generated += 1;
        let eps = 0.5 * margin * (1.0 - 1e-9);
        let out = verify_selection_stability(&scores, b, eps, trials, rng::derive_seed(seed, &format!("v{generated}")), map)?;
        rep.record(out.holds(), Some(margin / 2.0 - eps), || {
            json!({ "scores": scores, "b": b, "delta": out.counterexample })
        });
        if let Some(delta) = sharpness_witness(&scores, b) {
            let moved: Vec<f64> = scores.iter().zip(&delta).map(|(s, d)| s + d).collect();
            if selected_set(&moved, b, map)? != selected_set(&scores, b, map)? {
                witnesses += 1;
                witness_example.get_or_insert_with(|| json!({ "scores": scores, "b": b, "delta": delta, "margin": margin }));
            }
        }
    }
    rep.detail = json!({ "sharpness_witnesses": witnesses, "witness": witness_example });
    if witnesses == 0 {
        rep.failures += 1;
    }
    Ok(rep)
}

/// Hamilton apportionment characterized as the L1-closest integer allocation to
/// the exact shares, ties resolved toward lower class indices; found by enumeration.
pub fn brute_force_quotas(counts: &[usize], k: usize) -> Option<Vec<usize>> {
    brute_force_quotas_all(counts).into_iter().nth(k)
}

/// The enumeration oracle for every budget `0..=Σ counts` in one pass over all
/// allocations `q ≤ counts`.
pub fn brute_force_quotas_all(counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = counts.iter().sum();
    let mut best: Vec<Option<(u128, Vec<usize>)>> = vec![None; total + 1];
    let mut q = vec![0usize; counts.len()];
    loop {
        let k: usize = q.iter().sum();
        // Σ |q_c·N − K·n_c| is N times the L1 distance to the exact shares.
        let dist: u128 = counts
            .iter()
            .zip(&q)
            .map(|(&n, &s)| ((s * total) as i128 - (k * n) as i128).unsigned_abs())
            .sum();
        let better = match &best[k] {
            None => true,
            Some((d, b)) => dist < *d || (dist == *d && q.as_slice() > b.as_slice()),
        };
        if better {
            best[k] = Some((dist, q.clone()));
        }
        // odometer increment
        let mut c = 0;
        while c < q.len() && q[c] == counts[c] {
            q[c] = 0;
            c += 1;
        }
        if c == q.len() {
            break;
        }
        q[c] += 1;
    }
    best.into_iter().map(|b| b.map(|x| x.1).unwrap_or_default()).collect()
}

pub fn quota_suite(max_classes: usize, max_count: usize) -> CheckReport {
    let mut rep = CheckReport::new("quota_apportionment");
    for classes in 1..=max_classes {
        let combos = (max_count + 1).pow(classes as u32);
        for code in 0..combos {
            let mut x = code;
            let counts: Vec<usize> = (0..classes)
                .map(|_| {
                    let v = x % (max_count + 1);
                    x /= max_count + 1;
                    v
                })
                .collect();
            let oracles = brute_force_quotas_all(&counts);
            for (k, oracle) in oracles.into_iter().enumerate() {
                let got = allocate_quotas(&counts, k);
                let ok = got.total() == k
                    && got.shortfall == 0
                    && got.per_class.iter().zip(&counts).all(|(q, n)| q <= n)
                    && got.per_class == oracle;
                rep.record(ok, None, || json!({ "counts": counts, "k": k, "got": got.per_class, "oracle": oracle }));
            }
        }
    }
    rep
}

pub fn ista_suite(instances: usize, seed: u64, cfg: &IstaConfig) -> Result<CheckReport> {
    let mut rep = CheckReport::new("ista_descent");
    let mut r = rng::stream(seed, "theory.ista");
    let mut worst_increase = f64::NEG_INFINITY;
    for _ in 0..instances {
        let k = r.gen_range(3..=14);
        let d = r.gen_range(2..=10);
        let x = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let mut s = Array2::from_shape_fn((k, k), |_| r.gen_range(0.0..1.0));
        s = (&s + &s.t()) * 0.5;
        let q = r.gen_range(1..k);
        let cands = candidate_sets(x.view(), &s, q);
        let icfg = IstaConfig { eta: None, ..*cfg };
        let out = self_expression(x.view(), &s, &cands, &icfg)?;
        let steps = out.objective.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        worst_increase = worst_increase.max(steps);
        let final_ok = out.objective.last().unwrap() <= &(out.objective[0] + 1e-9);
        let ok = steps <= 1e-9 && final_ok && out.descent_violations == 0;
        rep.record(ok, Some(1e-9 - steps), || json!({ "x": x.outer_iter().map(|r| r.to_vec()).collect::<Vec<_>>(), "q": q }));
    }
    rep.detail = json!({ "max_step_increase": worst_increase });
    Ok(rep)
}

fn relative_error(num: f64, an: f64) -> f64 {
    (num - an).abs() / num.abs().max(an.abs()).max(1e-6)
}

fn ring(n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if i != j {
            t.push((i, j, 1.0));
            t.push((j, i, 1.0));
        }
    }
    normalize_adjacency(&CsrMatrix::from_triplets(n, n, t))
}

/// Central differences against the analytic fusion and GCN gradients.
pub fn gradient_suite(instances: usize, seed: u64) -> CheckReport {
    let mut rep = CheckReport::new("gradient_check");
    let mut r = rng::stream(seed, "theory.gradients");
    let h = 1e-6;
    let mut worst_fusion = 0.0f64;
    let mut worst_gcn = 0.0f64;
    for inst in 0..instances {
        let d = r.gen_range(2..=8);
        let hid = r.gen_range(2..=6);
        let c = r.gen_range(2..=3);
        let k = r.gen_range(3..=6);
        let labels: Vec<Option<usize>> = (0..k).map(|i| if i % 3 == 1 { None } else { Some(r.gen_range(0..c)) }).collect();

        let mut fp = FusionParams::init(d, c, &mut r);
        fp.w = Array1::from_shape_fn(2 * d, |_| r.gen_range(-0.5..0.5));
        let g = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let t = Array2::from_shape_fn((k, d), |_| r.gen_range(-1.0..1.0));
        let lam = 0.5;
        let out = fusion_loss(g.view(), t.view(), &labels, &fp, lam);
        let floss = |p: &FusionParams, t: &Array2<f64>| fusion_loss(g.view(), t.view(), &labels, p, lam).loss;
        type Get = fn(&mut FusionParams) -> &mut [f64];
        let groups: [Get; 6] = [
            |p| p.w_g.as_slice_mut().unwrap(),
            |p| p.w_t.as_slice_mut().unwrap(),
            |p| p.w.as_slice_mut().unwrap(),
            |p| p.dec.as_slice_mut().unwrap(),
            |p| p.dec_g.as_slice_mut().unwrap(),
            |p| p.dec_t.as_slice_mut().unwrap(),
        ];
        let mut grads = out.grads.clone();
        let mut err = 0.0f64;
        for get in groups {
            for i in 0..get(&mut fp.clone()).len() {
                let (mut pp, mut pm) = (fp.clone(), fp.clone());
                get(&mut pp)[i] += h;
                get(&mut pm)[i] -= h;
                err = err.max(relative_error((floss(&pp, &t) - floss(&pm, &t)) / (2.0 * h), get(&mut grads)[i]));
            }
        }
        for i in 0..k * d {
            let (mut tp, mut tm) = (t.clone(), t.clone());
            tp.as_slice_mut().unwrap()[i] += h;
            tm.as_slice_mut().unwrap()[i] -= h;
            err = err.max(relative_error((floss(&fp, &tp) - floss(&fp, &tm)) / (2.0 * h), out.grad_t.as_slice().unwrap()[i]));
        }
        worst_fusion = worst_fusion.max(err);
        rep.record(err < 1e-4, Some(1e-4 - err), || json!({ "suite": "fusion", "instance": inst, "d": d, "c": c, "k": k }));

        let a = ring(k);
        let gp = GcnParams::init(d, hid, c, 0.0, &mut r);
        let wd = 5e-3;
        let gcn_loss = |p: &GcnParams| {
            let f = gcn_forward::<StreamRng>(&a, &g, p, None).unwrap();
            gcn_gradients(&a, &f, &labels, p, wd).loss
        };
        let f = gcn_forward::<StreamRng>(&a, &g, &gp, None).unwrap();
        let an = gcn_gradients(&a, &f, &labels, &gp, wd);
        let mut err = 0.0f64;
        for which in 0..2 {
            let n = if which == 0 { gp.w1.len() } else { gp.w2.len() };
            for i in 0..n {
                let (mut pp, mut pm) = (gp.clone(), gp.clone());
                let (sp, sm, ga) = if which == 0 {
                    (pp.w1.as_slice_mut().unwrap(), pm.w1.as_slice_mut().unwrap(), an.w1.as_slice().unwrap())
                } else {
                    (pp.w2.as_slice_mut().unwrap(), pm.w2.as_slice_mut().unwrap(), an.w2.as_slice().unwrap())
                };
                sp[i] += h;
                sm[i] -= h;
                let ga = ga[i];
                err = err.max(relative_error((gcn_loss(&pp) - gcn_loss(&pm)) / (2.0 * h), ga));
            }
        }
        worst_gcn = worst_gcn.max(err);
        rep.record(err < 1e-4, Some(1e-4 - err), || json!({ "suite": "gcn", "instance": inst, "d": d, "h": hid, "c": c }));
    }
    rep.detail = json!({ "max_relative_error_fusion": worst_fusion, "max_relative_error_gcn": worst_gcn });
    rep
}

/// Per-node hop and chunk budgets plus unit weight sums on a small synthetic graph.
pub fn budget_suite(cfg: &EvidenceConfig, seed: u64) -> Result<CheckReport> {
    let mut rep = CheckReport::new("budget_invariants");
    let tag = generate_synthetic_tag(
        &SyntheticConfig {
            classes: 3,
            nodes_per_class: 20,
            p_in: 0.2,
            ..SyntheticConfig::default()
        },
        seed,
    )?;
    let d = 16;
    let enc = EncoderConfig::Hash { dim: d }.build()?;
    let bank = build_bank(&tag, 8, &enc)?;
    let ctx = GraphContext::new(&tag, &bank);
    let mut r = rng::stream(seed, "theory.budget");
    let gcn = GcnParams::init(d, d, 3, 0.0, &mut r);
    let sel = SelectionParams::init(d, &mut r);
    let view = backbone_view(&ctx, &gcn)?;
    let inputs = EvidenceInputs {
        bank: &bank,
        g: &view.g,
        hops: &ctx.hops,
        difficulty: &view.difficulty,
    };
    let traces = (0..tag.node_count())
        .map(|v| compute_evidence(v, inputs, &sel, cfg))
        .collect::<Result<Vec<_>>>()?;
    for t in &traces {
        let s = budget_stats(std::slice::from_ref(t), &bank, &cfg.budgets);
        rep.record(s.budget_violations == 0 && s.weight_sum_violations == 0, None, || {
            json!({ "node": t.node, "chunk_weights": t.chunk_weights, "neighbors": t.neighbor_count() })
        });
    }
    let all = budget_stats(&traces, &bank, &cfg.budgets);
    let cap = traces.len() * cfg.budgets.b_tok;
    if all.chunk_nnz_total > cap {
        rep.failures += 1;
    }
    rep.detail = json!({
        "budget_violations": all.budget_violations,
        "weight_sum_violations": all.weight_sum_violations,
        "chunk_nnz_total": all.chunk_nnz_total,
        "chunk_nnz_cap": cap,
    });
    Ok(rep)
}

pub fn run_theory_checks(cfg: &ExperimentConfig) -> Result<TheoryReport> {
    let t: &TheorySection = &cfg.theory;
    let round = cfg.round_config();
    let renormalize = !round.faults.truncate_without_renormalize;
    let mut ecfg = cfg.evidence_config();
    ecfg.renormalize = renormalize;
    Ok(TheoryReport {
        checks: vec![
            sparsemax_oracle_suite(t.sparsemax_vectors, t.sparsemax_max_len, t.seed),
            truncation_suite(t.truncation_instances, t.truncation_dim, t.seed, renormalize)?,
            stability_suite(t.stability_vectors, t.stability_trials, t.seed, ecfg.sparse)?,
            quota_suite(t.quota_max_classes, t.quota_max_count),
            ista_suite(t.ista_instances, t.seed, &round.ista)?,
            gradient_suite(t.gradient_instances, t.seed),
            budget_suite(&ecfg, t.seed)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_agree_on_small_cases() {
        assert_eq!(brute_force_simplex_projection(&[0.3]), vec![1.0]);
        assert_eq!(brute_force_quotas(&[5, 3, 2], 5), Some(vec![3, 1, 1]));
        assert_eq!(brute_force_quotas(&[1, 1], 1), Some(vec![1, 0]));
        assert_eq!(brute_force_quotas(&[2], 3), None);
        assert_eq!(brute_force_quotas(&[0, 0], 0), Some(vec![0, 0]));
    }

    #[test]
    fn antipodal_instance_is_tight() {
        let (p, e) = antipodal_instance(5, 2, 3, 0.3);
        let c = verify_truncation_bound(&p, &e, 2, true).unwrap();
        assert!((c.error - c.bound).abs() < 1e-12 && c.bound > 0.5);
    }

    #[test]
    fn small_suites_pass() {
        assert!(sparsemax_oracle_suite(50, 5, 1).passed());
        assert!(truncation_suite(100, 4, 1, true).unwrap().passed());
        assert!(stability_suite(20, 10, 1, SparseMap::Sparsemax).unwrap().passed());
        assert!(quota_suite(3, 4).passed());
        assert!(ista_suite(5, 1, &IstaConfig::default()).unwrap().passed());
        assert!(gradient_suite(1, 1).passed());
    }

    #[test]
    fn without_renormalization_weight_sums_break() {
        let ok = budget_suite(&EvidenceConfig::default(), 3).unwrap();
        assert!(ok.passed(), "{:?}", ok.detail);
        let bad = budget_suite(&EvidenceConfig { renormalize: false, ..EvidenceConfig::default() }, 3).unwrap();
        assert!(!bad.passed());
        assert!(truncation_suite(100, 4, 1, false).unwrap().passed());
    }
}
