//! Quick invariant checks runnable from the command line.

use serde::Serialize;

use incoherence::basis::{BasisConfig, FourierIndex};
use incoherence::coherence::{frequency_coherence, WaveletKind};
use incoherence::ordering::{count_sublevel, verify_hyperbolic_asymptotics, ConsistencyFn};
use incoherence::recon::HaarLayout;
use incoherence::sampling::build_scheme;
use incoherence::wavelet::build_family;
use incoherence::{Complex64, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
    Check { name: name.into(), passed, detail }
}

fn brute_count(d: usize, k: f64, zero: bool) -> u64 {
    let r = k.floor() as i64;
    let lo = if zero { -r } else { 1 };
    let mut n = 0;
    let mut idx = vec![lo; d];
    loop {
        let p: f64 = idx.iter().map(|&v| (v.unsigned_abs().max(1)) as f64).product();
        if p <= k {
            n += 1;
        }
        let mut a = 0;
        loop {
            if a == d {
                return n;
            }
            idx[a] += 1;
            if idx[a] <= r {
                break;
            }
            idx[a] = lo;
            a += 1;
        }
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        check("filter_families", || {
            let mut worst = 0.0f64;
            for p in 1..=10 {
                let h = build_family(p)?.h().to_vec();
                worst = worst.max((h.iter().sum::<f64>() - std::f64::consts::SQRT_2).abs());
                for shift in (0..h.len()).step_by(2) {
                    let dot: f64 = h.iter().zip(&h[shift..]).map(|(a, b)| a * b).sum();
                    worst = worst.max((dot - if shift == 0 { 1.0 } else { 0.0 }).abs());
                }
            }
            Ok((worst < 1e-10, format!("max identity defect {worst:.2e}")))
        }),
        check("hyperbolic_counts", || {
            let mut bad = Vec::new();
            for d in 1..=3 {
                for k in [1.0, 2.0, 3.0, 5.0, 8.0] {
                    for (zero, cons) in [(false, ConsistencyFn::HyperbolicN { d }), (true, ConsistencyFn::HyperbolicZ { d })] {
                        let got = count_sublevel(&cons, k)?;
                        let want = brute_count(d, k, zero);
                        if got != want {
                            bad.push(format!("{} K={k}: {got} vs {want}", cons.name()));
                        }
                    }
                }
            }
            Ok((bad.is_empty(), if bad.is_empty() { "exact counts match enumeration".into() } else { bad.join("; ") }))
        }),
        check("hyperbolic_asymptotics", || {
            let r = verify_hyperbolic_asymptotics(2, &[1e2, 1e4, 1e6])?;
            let ok = r.iter().all(|v| v.is_finite() && *v > 0.0);
            Ok((ok, format!("ratios {r:?}")))
        }),
        check("haar_coherence_at_first_frequency", || {
            let cfg = BasisConfig::with_default_eps(1, build_family(1)?, 0)?;
            let v = frequency_coherence(&cfg, &FourierIndex::new(&[0]), WaveletKind::Separable);
            Ok(((v - 0.5).abs() < 1e-12, format!("{v}")))
        }),
        check("haar_transform_round_trip", || {
            let mut worst = 0.0f64;
            for kind in [WaveletKind::Separable, WaveletKind::Tensor] {
                let l = HaarLayout::new(2, 16, kind)?;
                let x: Vec<Complex64> = (0..l.len()).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64).cos())).collect();
                let mut back = x.clone();
                l.synthesize(&mut back);
                l.analyze(&mut back);
                worst = worst.max(x.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
            }
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        check("sampling_counts_per_level", || {
            let n = [10, 40, 120];
            let m = [10, 12, 9];
            let s = build_scheme(&n, &m, seed)?;
            let mut per = [0usize; 3];
            for &r in &s.omega {
                per[n.iter().position(|&b| r <= b).unwrap_or(2)] += 1;
            }
            Ok((per == m && s.omega.windows(2).all(|w| w[0] < w[1]), format!("{per:?}")))
        }),
    ]
}
