//! Self-checks run by `ucbf verify`: learning-rate weight properties,
//! kernel structure and agreement of the two exact solvers.

use std::fmt;
use std::time::Instant;

use rand::Rng;

use crate::dp::{brute_force_values, optimal_values};
use crate::envgen::{derive_seed, random_mdp, rng_from, GenConfig, PmfFamily};
use crate::lr::{alpha_weights, column_partial_sums, rate};
use crate::mdp::{DisturbancePmf, MdpSpec};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({:.2}s): {}", self.name, self.seconds, self.detail)
    }
}

fn timed(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> CheckResult {
    let started = Instant::now();
    let outcome = body();
    let seconds = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => CheckResult { name, passed: true, detail, seconds },
        Err(detail) => CheckResult { name, passed: false, detail, seconds },
    }
}

pub const LR_HORIZONS: [usize; 4] = [1, 2, 5, 10];
pub const LR_EXPONENTS: [f64; 3] = [0.5, 0.75, 1.0];
pub const LR_MAX_T: usize = 10_000;
pub const LR_COLUMNS: [usize; 3] = [1, 10, 100];

/// Weight properties for every `t <= 10^4`, `H` in {1, 2, 5, 10} and
/// exponent in {1/2, 3/4, 1}:
///
/// * weights sum to one,
/// * `1/t^a <= sum_i alpha_t^i / i^a <= (1 + 1/H) / t^a`,
/// * `max_i alpha_t^i <= 2H/t` and `sum_i (alpha_t^i)^2 <= 2H/t`,
/// * column sums `sum_{t >= i} alpha_t^i` are nondecreasing, stay below
///   `1 + 1/H` and are within `1e-3` of it once `T >= 10^4 i`.
///
/// The per-`t` statistics are carried forward with the recursion
/// `alpha_t^i = (1 - alpha_t) alpha_{t-1}^i`, and spot-checked against a
/// fresh weight vector.
pub fn check_learning_rate(tol: f64) -> CheckResult {
    timed("learning-rate weights", || {
        let mut checked = 0usize;
        for &hn in &LR_HORIZONS {
            let two_h = 2.0 * hn as f64;
            let cap = 1.0 + 1.0 / hn as f64;
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut max = 0.0f64;
            let mut scaled = [0.0; 3];
            for t in 1..=LR_MAX_T {
                let a = rate(t, hn);
                let keep = 1.0 - a;
                sum = keep * sum + a;
                sq = keep * keep * sq + a * a;
                max = (keep * max).max(a);
                let tf = t as f64;
                if (sum - 1.0).abs() > tol {
                    return Err(format!("H={hn} t={t}: weights sum to {sum}"));
                }
                if max > two_h / tf + tol || sq > two_h / tf + tol {
                    return Err(format!("H={hn} t={t}: max {max}, squares {sq} exceed 2H/t"));
                }
                for (slot, &e) in scaled.iter_mut().zip(&LR_EXPONENTS) {
                    *slot = keep * *slot + a / tf.powf(e);
                    let base = tf.powf(-e);
                    if *slot < base - tol || *slot > cap * base + tol {
                        return Err(format!("H={hn} t={t} a={e}: {slot} outside [{base}, {}]", cap * base));
                    }
                }
                checked += 1;
                if matches!(t, 1 | 10 | 100 | 1000 | LR_MAX_T) {
                    let w = alpha_weights(t, hn).map_err(|e| e.to_string())?;
                    let direct: f64 = w.updates().iter().sum();
                    let direct_max = w.updates().iter().copied().fold(0.0, f64::max);
                    if (direct - sum).abs() > tol || (direct_max - max).abs() > tol {
                        return Err(format!("H={hn} t={t}: recursion disagrees with direct weights"));
                    }
                }
            }
            for &i in &LR_COLUMNS {
                let sums = column_partial_sums(i, LR_MAX_T * i, hn).map_err(|e| e.to_string())?;
                if sums.windows(2).any(|w| w[1] < w[0]) {
                    return Err(format!("H={hn} i={i}: column sums decrease"));
                }
                let last = *sums.last().expect("nonempty range");
                if last > cap + tol || (cap - last).abs() > 1e-3 {
                    return Err(format!("H={hn} i={i}: column sum {last}, expected {cap}"));
                }
            }
        }
        Ok(format!("{checked} (H, t) points, 3 exponents, columns {LR_COLUMNS:?}"))
    })
}

fn random_structure_spec(index: u64, seed: u64) -> MdpSpec {
    let mut rng = rng_from(derive_seed(&[seed, index]));
    let sn = rng.random_range(2..=16);
    let an = rng.random_range(1..=5);
    let hn = rng.random_range(1..=5);
    let w = rng.random_range(0..sn.min(5));
    let mut gen = GenConfig::new(sn, an, hn, w).with_seed(rng.random());
    gen.pmf_family = PmfFamily::Random;
    gen.state_only_rewards = rng.random();
    let spec = random_mdp(&gen).expect("generated sizes are valid");
    if index.is_multiple_of(2) {
        return spec;
    }
    // Odd instances get a different disturbance law at every step.
    let per_step = (0..hn)
        .map(|_| {
            let raw: Vec<f64> = (0..=w).map(|_| 1.0 - rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect()
        })
        .collect();
    MdpSpec::new(
        spec.dynamics().to_vec(),
        spec.rewards().clone(),
        DisturbancePmf::per_step(per_step).expect("normalized"),
        spec.initial_dist().to_vec(),
    )
    .expect("same shape as the generated spec")
}

/// On `count` random specs: pairs with `f(s1, a1) = f(s2, a2)` have
/// identical next-state rows at every step, and each row is the disturbance
/// pmf shifted by `f(s, a)`.
pub fn check_kernel_structure(count: usize, seed: u64) -> CheckResult {
    timed("kernel structure", || {
        let mut collisions = 0usize;
        for index in 0..count {
            let spec = random_structure_spec(index as u64, seed);
            let kernel = spec.build_kernel();
            let (sn, an) = (spec.num_states(), spec.num_actions());
            for h in 0..spec.horizon() {
                let pmf = spec.disturbance().probs(h);
                for p in 0..sn * an {
                    let (s1, a1) = (p / an, p % an);
                    let base = spec.f(s1, a1);
                    let row = kernel.row(h, s1, a1);
                    for (next, &prob) in row.iter().enumerate() {
                        let want = if (base..=base + pmf.len() - 1).contains(&next) { pmf[next - base] } else { 0.0 };
                        if prob != want {
                            return Err(format!("spec {index}: P_{h}({next} | {s1}, {a1}) = {prob}, expected {want}"));
                        }
                    }
                    for q in p + 1..sn * an {
                        let (s2, a2) = (q / an, q % an);
                        if spec.f(s2, a2) == base {
                            collisions += 1;
                            if kernel.row(h, s2, a2) != row {
                                return Err(format!("spec {index}: rows ({s1},{a1}) and ({s2},{a2}) differ at step {h}"));
                            }
                        }
                    }
                }
            }
        }
        Ok(format!("{count} specs, {collisions} colliding pairs compared"))
    })
}

/// Backward induction against exhaustive policy enumeration on `count`
/// instances with `S = 3, A = 2, H = 2, W = 1`.
pub fn check_oracle_equivalence(count: usize, seed: u64, tol: f64) -> CheckResult {
    timed("oracle equivalence", || {
        let mut worst = 0.0f64;
        for index in 0..count {
            let mut gen = GenConfig::new(3, 2, 2, 1).with_seed(derive_seed(&[seed, index as u64]));
            gen.state_only_rewards = false;
            gen.pmf_family = PmfFamily::Random;
            let spec = random_mdp(&gen).map_err(|e| e.to_string())?;
            let (dp, _) = optimal_values(&spec.build_kernel(), spec.rewards()).map_err(|e| e.to_string())?;
            let brute = brute_force_values(&spec).map_err(|e| e.to_string())?;
            for h in 0..spec.horizon() {
                for s in 0..spec.num_states() {
                    worst = worst.max((dp.v(h, s) - brute.v(h, s)).abs());
                    for a in 0..spec.num_actions() {
                        worst = worst.max((dp.q(h, s, a) - brute.q(h, s, a)).abs());
                    }
                }
            }
        }
        if worst < tol {
            Ok(format!("{count} instances, max abs diff {worst:.3e}"))
        } else {
            Err(format!("max abs diff {worst:.3e} over {count} instances"))
        }
    })
}

/// All checks at their standard sizes.
pub fn verify_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check_learning_rate(1e-9),
        check_kernel_structure(100, seed),
        check_oracle_equivalence(20, seed, 1e-10),
    ]
}
