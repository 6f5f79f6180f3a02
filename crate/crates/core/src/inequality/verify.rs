//! Sampling checks of the pointwise lemmas about `v`: it is small only near
//! the nontrivial degenerate states, it grows at infinity, and small `v`
//! forces some large positive residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pointwise::{check_exponent, eval_with_f};
use crate::coefficients::{CoefficientSystem, IndexSet};
use crate::error::{input, Result};
use crate::polytope::{all_degenerate_states, sigma_obs, truncation_bound_of, DegenerateStates};
use crate::table::{fmt_f64, Table};

const CHUNK: usize = 1024;
/// Rays whose leading coefficient of `v` is below this are skipped.
const RAY_LEADING_TOL: f64 = 1e-9;
/// Draws allowed per requested slab sample before giving up on thin slabs.
const SLAB_ATTEMPTS_PER_SAMPLE: usize = 64;
/// Violations of the slab gap are counted beyond this slack.
pub const SLAB_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub samples: usize,
    pub seed: u64,
    pub p: f64,
    /// Upper edges of the cumulative `v`-bins, largest first.
    pub bins: Vec<f64>,
    /// Candidate thresholds for `v < ε₀`, largest first.
    pub eps0_candidates: Vec<f64>,
    pub delta: f64,
    pub rays: usize,
    /// Overrides the LP gap.
    pub sigma: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 100_000,
            seed: 0,
            p: 2.0,
            bins: vec![1e-1, 1e-2, 1e-3, 1e-4],
            eps0_candidates: vec![0.5, 0.2, 0.1, 0.05, 0.02, 0.01, 1e-3, 1e-4],
            delta: 1e-3,
            rays: 1000,
            sigma: None,
        }
    }
}

/// Samples with `v < upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GstabBin {
    pub upper: f64,
    pub count: usize,
    /// Largest `min_{I≠∅} |u − u_I|` (Euclidean).
    pub max_distance: f64,
    /// Largest `min_{I≠∅} (Σ_{i∈I} u_i + Σ_{j∉I} |f_j|)`.
    pub max_corollary: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sigma1Row {
    pub eps0: f64,
    pub count: usize,
    /// No `i` with `f_i > σ`.
    pub signed_counterexamples: usize,
    /// No `i` with `|f_i| > σ`.
    pub abs_counterexamples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub sigma: f64,
    pub m_trunc: f64,
    pub gstab: Vec<GstabBin>,
    pub gstab_non_increasing: bool,
    pub gstab_strictly_decreasing: bool,
    pub rays_tested: usize,
    pub rays_skipped: usize,
    pub limv_failures: usize,
    pub sigma1: Vec<Sigma1Row>,
    /// Largest candidate without a signed counterexample.
    pub eps0: Option<f64>,
    /// Largest candidate without an absolute-value counterexample.
    pub eps0_abs: Option<f64>,
    /// Some sample passes the absolute-value form but fails the signed one.
    pub abs_form_differs: bool,
    /// Samples with `u_i ≤ σ`, `f_i ≤ σ` for some `i` but no `j ≠ i` with `f_j ≤ −σ`.
    pub condition2_counterexamples: usize,
    pub delta: f64,
    pub delta_count: usize,
    /// Smallest `ε` such that every sample with `v < δ` has an `I ≠ ∅` with
    /// `f_i > σ` on `I` and the corollary quantity at most `ε`.
    pub eps_of_delta: f64,
    pub genlimv_counterexamples: usize,
    /// `max g` over samples with `v < 1`.
    pub g_cap: f64,
    pub flagged: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }

    pub fn gstab_csv(&self) -> String {
        let mut t = Table::new(["v_upper", "count", "max_distance", "max_corollary"]);
        for b in &self.gstab {
            t.push(vec![
                fmt_f64(b.upper),
                b.count.to_string(),
                fmt_f64(b.max_distance),
                fmt_f64(b.max_corollary),
            ]);
        }
        t.to_csv()
    }

    pub fn sigma1_csv(&self) -> String {
        let mut t = Table::new([
            "eps0",
            "count",
            "signed_counterexamples",
            "abs_counterexamples",
        ]);
        for r in &self.sigma1 {
            t.push(vec![
                fmt_f64(r.eps0),
                r.count.to_string(),
                r.signed_counterexamples.to_string(),
                r.abs_counterexamples.to_string(),
            ]);
        }
        t.to_csv()
    }

    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), fmt_f64);
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        line("samples", self.samples.to_string());
        line("sigma", fmt_f64(self.sigma));
        line("m_trunc", fmt_f64(self.m_trunc));
        line(
            "gstab_non_increasing",
            self.gstab_non_increasing.to_string(),
        );
        line(
            "gstab_strictly_decreasing",
            self.gstab_strictly_decreasing.to_string(),
        );
        line("rays_tested", self.rays_tested.to_string());
        line("rays_skipped", self.rays_skipped.to_string());
        line("limv_failures", self.limv_failures.to_string());
        line("eps0", opt(self.eps0));
        line("eps0_abs", opt(self.eps0_abs));
        line("abs_form_differs", self.abs_form_differs.to_string());
        line(
            "condition2_counterexamples",
            self.condition2_counterexamples.to_string(),
        );
        line("delta", fmt_f64(self.delta));
        line("delta_count", self.delta_count.to_string());
        line("eps_of_delta", fmt_f64(self.eps_of_delta));
        line(
            "genlimv_counterexamples",
            self.genlimv_counterexamples.to_string(),
        );
        line("g_cap", fmt_f64(self.g_cap));
        line(
            "flagged",
            if self.flagged.is_empty() {
                "none".into()
            } else {
                self.flagged.join(",")
            },
        );
        s
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Half uniform in `[0, 2M]^N`; half at log-uniform radius `[1e-7, 1]·M`
/// around a random `u_I`, `I ≠ ∅`, clipped at 0.
fn sample_point(states: &DegenerateStates, m: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = states.n_species();
    if rng.gen_bool(0.5) {
        return (0..n).map(|_| rng.gen::<f64>() * 2.0 * m).collect();
    }
    let pick = rng.gen_range(1..(1u64 << n));
    let base = &states.get(IndexSet::from_bits(pick)).u;
    let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-300);
    let r = m * 10f64.powf(rng.gen_range(-7.0..0.0));
    dir.iter_mut().for_each(|d| *d *= r / norm);
    base.iter()
        .zip(&dir)
        .map(|(b, d)| (b + d).max(0.0))
        .collect()
}

/// Per-sample quantities reduced over the whole run.
#[derive(Clone, Default)]
struct Accum {
    bin_count: Vec<usize>,
    bin_dist: Vec<f64>,
    bin_cor: Vec<f64>,
    s1_count: Vec<usize>,
    s1_signed: Vec<usize>,
    s1_abs: Vec<usize>,
    abs_differs: bool,
    cond2: usize,
    delta_count: usize,
    eps_delta: f64,
    genlimv_bad: usize,
    g_cap: f64,
}

impl Accum {
    fn new(bins: usize, cands: usize) -> Self {
        Accum {
            bin_count: vec![0; bins],
            bin_dist: vec![0.0; bins],
            bin_cor: vec![0.0; bins],
            s1_count: vec![0; cands],
            s1_signed: vec![0; cands],
            s1_abs: vec![0; cands],
            ..Default::default()
        }
    }

    fn merge(mut self, o: Accum) -> Accum {
        for b in 0..self.bin_count.len() {
            self.bin_count[b] += o.bin_count[b];
            self.bin_dist[b] = self.bin_dist[b].max(o.bin_dist[b]);
            self.bin_cor[b] = self.bin_cor[b].max(o.bin_cor[b]);
        }
        for c in 0..self.s1_count.len() {
            self.s1_count[c] += o.s1_count[c];
            self.s1_signed[c] += o.s1_signed[c];
            self.s1_abs[c] += o.s1_abs[c];
        }
        self.abs_differs |= o.abs_differs;
        self.cond2 += o.cond2;
        self.delta_count += o.delta_count;
        self.eps_delta = self.eps_delta.max(o.eps_delta);
        self.genlimv_bad += o.genlimv_bad;
        self.g_cap = self.g_cap.max(o.g_cap);
        self
    }
}

/// `Σ_{i∈I} u_i + Σ_{j∉I} |f_j|`.
fn corollary_quantity(u: &[f64], f: &[f64], set: IndexSet) -> f64 {
    (0..u.len())
        .map(|i| if set.contains(i) { u[i] } else { f[i].abs() })
        .sum()
}

pub fn verify_limit_lemmas(sys: &CoefficientSystem, config: &VerifyConfig) -> Result<VerifyReport> {
    check_exponent(config.p)?;
    if config.samples == 0 {
        return Err(input("at least one sample is required"));
    }
    if config.bins.windows(2).any(|w| w[1] >= w[0]) || config.bins.is_empty() {
        return Err(input("v-bins must be nonempty and strictly decreasing"));
    }
    if config.eps0_candidates.windows(2).any(|w| w[1] >= w[0]) {
        return Err(input("eps0 candidates must be strictly decreasing"));
    }
    if !(config.delta > 0.0) {
        return Err(input("delta must be positive"));
    }
    let states = all_degenerate_states(sys)?;
    let m = truncation_bound_of(&states);
    let sigma = match config.sigma {
        Some(s) if s > 0.0 => s,
        Some(_) => return Err(input("sigma override must be positive")),
        None => sigma_obs(sys)?.sigma,
    };
    let n = sys.n_species();
    let p = config.p;
    let nontrivial: Vec<(IndexSet, &[f64])> = states
        .nontrivial()
        .map(|s| (s.i_set, s.u.as_slice()))
        .collect();

    let chunks = config.samples.div_ceil(CHUNK);
    let acc = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(config.seed, c as u64);
            let mut acc = Accum::new(config.bins.len(), config.eps0_candidates.len());
            let mut f = vec![0.0; n];
            for _ in 0..CHUNK.min(config.samples - c * CHUNK) {
                let u = sample_point(&states, m, &mut rng);
                sys.f_into(&u, &mut f);
                let v = eval_with_f(&u, &f, p);
                let vv = v.v_value;

                if vv < config.bins[0] {
                    let dist = nontrivial
                        .iter()
                        .map(|(_, s)| {
                            u.iter()
                                .zip(*s)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    let cor = nontrivial
                        .iter()
                        .map(|(set, _)| corollary_quantity(&u, &f, *set))
                        .fold(f64::INFINITY, f64::min);
                    for (b, &upper) in config.bins.iter().enumerate() {
                        if vv < upper {
                            acc.bin_count[b] += 1;
                            acc.bin_dist[b] = acc.bin_dist[b].max(dist);
                            acc.bin_cor[b] = acc.bin_cor[b].max(cor);
                        }
                    }
                }

                let signed_ok = f.iter().any(|&x| x > sigma);
                let abs_ok = f.iter().any(|&x| x.abs() > sigma);
                for (k, &e) in config.eps0_candidates.iter().enumerate() {
                    if vv < e {
                        acc.s1_count[k] += 1;
                        acc.s1_signed[k] += usize::from(!signed_ok);
                        acc.s1_abs[k] += usize::from(!abs_ok);
                        acc.abs_differs |= abs_ok != signed_ok;
                    }
                }

                let in_slab = (0..n).any(|i| {
                    u[i] <= sigma && f[i] <= sigma && !(0..n).any(|j| j != i && f[j] <= -sigma)
                });
                acc.cond2 += usize::from(in_slab);

                if vv < config.delta {
                    acc.delta_count += 1;
                    let best = nontrivial
                        .iter()
                        .filter(|(set, _)| set.members().all(|i| f[i] > sigma))
                        .map(|(set, _)| corollary_quantity(&u, &f, *set))
                        .fold(f64::INFINITY, f64::min);
                    if best.is_finite() {
                        acc.eps_delta = acc.eps_delta.max(best);
                    } else {
                        acc.genlimv_bad += 1;
                    }
                }
                if vv < 1.0 {
                    acc.g_cap = acc.g_cap.max(v.g_value);
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(
            Accum::new(config.bins.len(), config.eps0_candidates.len()),
            Accum::merge,
        );

    let (rays_tested, rays_skipped, limv_failures) = check_rays(sys, p, config);

    let gstab: Vec<GstabBin> = config
        .bins
        .iter()
        .enumerate()
        .map(|(b, &upper)| GstabBin {
            upper,
            count: acc.bin_count[b],
            max_distance: acc.bin_dist[b],
            max_corollary: acc.bin_cor[b],
        })
        .collect();
    let gstab_non_increasing = gstab
        .windows(2)
        .all(|w| w[1].max_distance <= w[0].max_distance);
    let gstab_strictly_decreasing = gstab.iter().all(|b| b.count > 0)
        && gstab
            .windows(2)
            .all(|w| w[1].max_distance < w[0].max_distance);

    let sigma1: Vec<Sigma1Row> = config
        .eps0_candidates
        .iter()
        .enumerate()
        .map(|(k, &eps0)| Sigma1Row {
            eps0,
            count: acc.s1_count[k],
            signed_counterexamples: acc.s1_signed[k],
            abs_counterexamples: acc.s1_abs[k],
        })
        .collect();
    let eps0 = sigma1
        .iter()
        .find(|r| r.signed_counterexamples == 0)
        .map(|r| r.eps0);
    let eps0_abs = sigma1
        .iter()
        .find(|r| r.abs_counterexamples == 0)
        .map(|r| r.eps0);
    if let (Some(first), Some(e)) = (config.eps0_candidates.first(), eps0) {
        if e < *first {
            log::info!("eps0 lowered from {first} to {e} after counterexamples");
        }
    }

    let mut flagged = Vec::new();
    if !gstab_non_increasing {
        flagged.push("gstab".to_string());
    }
    if limv_failures > 0 {
        flagged.push("limv".to_string());
    }
    if eps0.is_none() {
        flagged.push("sigma1".to_string());
    }
    if acc.cond2 > 0 {
        flagged.push("condition2".to_string());
    }
    if acc.genlimv_bad > 0 {
        flagged.push("genlimv".to_string());
    }

    Ok(VerifyReport {
        samples: config.samples,
        sigma,
        m_trunc: m,
        gstab,
        gstab_non_increasing,
        gstab_strictly_decreasing,
        rays_tested,
        rays_skipped,
        limv_failures,
        sigma1,
        eps0,
        eps0_abs,
        abs_form_differs: acc.abs_differs,
        condition2_counterexamples: acc.cond2,
        delta: config.delta,
        delta_count: acc.delta_count,
        eps_of_delta: acc.eps_delta,
        genlimv_counterexamples: acc.genlimv_bad,
        g_cap: acc.g_cap,
        flagged,
    })
}

/// `v(1000 b) > 10 v(10 b)` along random unit rays `b ≥ 0`.
fn check_rays(sys: &CoefficientSystem, p: f64, config: &VerifyConfig) -> (usize, usize, usize) {
    let n = sys.n_species();
    let mut rng = stream_rng(config.seed ^ 0x7a75, u64::MAX);
    let (mut tested, mut skipped, mut failures) = (0, 0, 0);
    let mut f = vec![0.0; n];
    for _ in 0..config.rays {
        let mut b: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let norm = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
        b.iter_mut().for_each(|x| *x /= norm);
        let ab: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| sys.a(i, k) * b[k]).sum())
            .collect();
        let den: f64 = ab.iter().map(|x| x.abs().powf(p)).sum();
        let num: f64 = ab.iter().zip(&b).map(|(x, bi)| bi * x.abs().powf(p)).sum();
        if den < RAY_LEADING_TOL || num / den < RAY_LEADING_TOL {
            skipped += 1;
            continue;
        }
        tested += 1;
        let mut v_at = |tau: f64| {
            let u: Vec<f64> = b.iter().map(|x| tau * x).collect();
            sys.f_into(&u, &mut f);
            eval_with_f(&u, &f, p).v_value
        };
        if !(v_at(1000.0) > 10.0 * v_at(10.0)) {
            failures += 1;
        }
    }
    (tested, skipped, failures)
}

/// Sampling check of the gap `σ` inside the slabs
/// `{u ≥ 0, u_j ≤ σ, f_j ≤ σ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabCheck {
    /// Points drawn inside a slab; fewer than requested when the nonempty
    /// slabs are too thin to hit.
    pub samples: usize,
    /// One-based indices `j` whose slab is empty.
    pub empty_slabs: Vec<usize>,
    /// Points with `min_i f_i > −σ + SLAB_SLACK`.
    pub violations: usize,
    /// Largest `min_i f_i + σ` seen.
    pub worst_excess: f64,
}

/// Draws `samples` points, each inside the slab of a random index `j`:
/// `u_j` uniform in `[0, σ]`, the rest uniform in `[0, 2M]`, then moved
/// along a random nonnegative direction that lowers `f_j` until `f_j ≤ σ`
/// with a random overshoot.
pub fn slab_violations(
    sys: &CoefficientSystem,
    sigma: f64,
    samples: usize,
    seed: u64,
) -> Result<SlabCheck> {
    if !(sigma > 0.0) {
        return Err(input("sigma must be positive"));
    }
    let states = all_degenerate_states(sys)?;
    let m = truncation_bound_of(&states);
    let n = sys.n_species();
    // The slab is nonempty iff some other species lowers f_j, or f_j ≤ σ
    // already at u_j = σ with the others at zero.
    let reachable: Vec<usize> = (0..n)
        .filter(|&j| {
            (0..n).any(|k| k != j && sys.a(j, k) > 0.0)
                || sys.vector_m()[j] - sys.a(j, j).max(0.0) * sigma <= sigma
        })
        .collect();
    let empty_slabs: Vec<usize> = (0..n)
        .filter(|j| !reachable.contains(j))
        .map(|j| j + 1)
        .collect();
    if reachable.is_empty() {
        return Ok(SlabCheck {
            samples: 0,
            empty_slabs,
            violations: 0,
            worst_excess: f64::NEG_INFINITY,
        });
    }
    let chunks = samples.div_ceil(CHUNK);
    let per_chunk: Vec<(usize, usize, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut f = vec![0.0; n];
            let mut u = vec![0.0; n];
            let (mut taken, mut bad, mut worst) = (0, 0, f64::NEG_INFINITY);
            let want = CHUNK.min(samples - c * CHUNK);
            let mut attempts = 0;
            while taken < want && attempts < SLAB_ATTEMPTS_PER_SAMPLE * want {
                attempts += 1;
                let j = reachable[rng.gen_range(0..reachable.len())];
                for (k, x) in u.iter_mut().enumerate() {
                    *x = rng.gen::<f64>() * if k == j { sigma } else { 2.0 * m };
                }
                sys.f_into(&u, &mut f);
                if f[j] > sigma {
                    let dir: Vec<f64> = (0..n)
                        .map(|k| {
                            if k != j && sys.a(j, k) > 0.0 {
                                rng.gen::<f64>()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let rate: f64 = (0..n).map(|k| sys.a(j, k) * dir[k]).sum();
                    if rate <= 0.0 {
                        continue;
                    }
                    let t = (f[j] - sigma) / rate * (1.0 + rng.gen::<f64>());
                    for (x, d) in u.iter_mut().zip(&dir) {
                        *x += t * d;
                    }
                    sys.f_into(&u, &mut f);
                    if f[j] > sigma {
                        continue;
                    }
                }
                taken += 1;
                let min_f = f.iter().copied().fold(f64::INFINITY, f64::min);
                worst = worst.max(min_f + sigma);
                bad += usize::from(min_f > -sigma + SLAB_SLACK);
            }
            (taken, bad, worst)
        })
        .collect();
    let mut out = SlabCheck {
        samples: 0,
        empty_slabs,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
    };
    for (t, b, w) in per_chunk {
        out.samples += t;
        out.violations += b;
        out.worst_excess = out.worst_excess.max(w);
    }
    Ok(out)
}
