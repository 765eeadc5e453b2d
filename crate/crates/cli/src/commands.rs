use std::io::Write;

use serde::Serialize;

use incoherence::basis::FourierIndex;
use incoherence::coherence::{
    coherence_grid, default_window, fit_decay, row_profile, wavelet_row_profile, CoherenceProfile, DecayFit,
    WaveletKind, WaveletSeq, DEFAULT_SCAN_MULTIPLIER,
};
use incoherence::io::{encode_f32, sqrt_scaled_u16, encode_pgm16, RawSidecar};
use incoherence::legendre::{legendre_column_profile, legendre_row_profile};
use incoherence::ordering::{
    count_sublevel, generate_prefix, lattice_prefix, write_prefix_csv, ConsistencyFn, OrderingSpec, Prefix,
};
use incoherence::recon::experiment::{run_experiment, ExperimentConfig, ExperimentOutput};
use incoherence::recon::Raster;
use incoherence::sampling::{build_scheme, rasterize_mask, SchemeConfig, SCHEME_SCHEMA};
use incoherence::{Error, Result};

use crate::config::{check_schema, Basis, CoherenceConfig, CountsConfig, OrderingConfig, ProfileSide};
use crate::manifest::Outputs;

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct CoherenceSummary {
    side: ProfileSide,
    ordering: String,
    horizon: usize,
    valid_ranks: usize,
    tail_bound: Option<f64>,
    boundary_ranks: usize,
    fit: Option<DecayFit>,
}

pub fn coherence(cfg: &CoherenceConfig, strict: bool) -> Result<Outputs> {
    check_schema(cfg.schema)?;
    if cfg.horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be positive".into()));
    }
    let basis = cfg.basis.resolve(cfg.dimension)?;
    let mut out = Outputs::default();
    let (profile, boundary): (CoherenceProfile, Vec<usize>) = match (&basis, cfg.profile) {
        (Basis::Legendre { eps }, side) => {
            if cfg.dimension != 1 {
                return Err(Error::InvalidConfig("Legendre profiles are one-dimensional".into()));
            }
            if cfg.extent.is_some() {
                return Err(Error::InvalidConfig("extent export needs a wavelet basis".into()));
            }
            match side {
                ProfileSide::Fourier => {
                    let o = lattice_prefix(&ConsistencyFn::StandardFourier, cfg.horizon)?;
                    let ks: Vec<i64> = o.items.iter().map(|f| f.k[0]).collect();
                    (legendre_row_profile(&ks, *eps)?, Vec::new())
                }
                ProfileSide::Basis => {
                    let c = legendre_column_profile(cfg.horizon, *eps)?;
                    (c.profile, c.boundary_ranks)
                }
            }
        }
        (Basis::Wavelet(b), ProfileSide::Fourier) => {
            let spec = cfg.ordering.as_ref().ok_or_else(|| Error::InvalidConfig("missing field `ordering`".into()))?;
            let cons = spec.to_consistency(cfg.dimension, Some(b.lattice()))?;
            if !cons.is_lattice() {
                return Err(Error::InvalidConfig(format!("ordering {} does not order frequencies", cons.name())));
            }
            let Prefix::Lattice(o) = generate_prefix(&cons, cfg.horizon)? else { unreachable!() };
            (row_profile(b, &o.items, cfg.kind, &cons.name())?, Vec::new())
        }
        (Basis::Wavelet(b), ProfileSide::Basis) => {
            let spec = match cfg.kind {
                WaveletKind::Separable => OrderingSpec::Leveled,
                WaveletKind::Tensor => OrderingSpec::TensorHyperbolic,
            };
            let cons = spec.to_consistency(cfg.dimension, Some(b.lattice()))?;
            let r = match generate_prefix(&cons, cfg.horizon)? {
                Prefix::Separable(o) => wavelet_row_profile(b, WaveletSeq::Separable(&o.items), DEFAULT_SCAN_MULTIPLIER, strict)?,
                Prefix::Tensor(o) => wavelet_row_profile(b, WaveletSeq::Tensor(&o.items), DEFAULT_SCAN_MULTIPLIER, strict)?,
                Prefix::Lattice(_) => unreachable!(),
            };
            (r.profile, r.boundary_ranks)
        }
    };
    if !boundary.is_empty() {
        eprintln!("warning: {} rank(s) attain their maximum on the scan boundary", boundary.len());
    }
    let fit = match &cfg.fit {
        Some(f) => Some(fit_decay(&profile, f.decay, f.window.unwrap_or_else(|| default_window(&profile)))?),
        None => None,
    };
    out.add("profile.csv", csv(|w| profile.write_csv(w))?);
    if let (Some(extent), Basis::Wavelet(b)) = (cfg.extent, &basis) {
        let side = 2 * extent + 1;
        if (side as u128).pow(cfg.dimension as u32) > 1 << 26 {
            return Err(Error::Capacity(format!("coherence box of side {side}")));
        }
        let grid = coherence_grid(b, cfg.kind, extent);
        match cfg.dimension {
            1 => out.add(
                "coherence.csv",
                csv(|w| {
                    writeln!(w, "n,value")?;
                    for (i, v) in grid.iter().enumerate() {
                        writeln!(w, "{},{v}", i as i64 - extent as i64)?;
                    }
                    Ok(())
                })?,
            ),
            2 => out.add("coherence.pgm", encode_pgm16(side, side, &sqrt_scaled_u16(&grid))),
            d => {
                let range = [-(extent as f64), extent as f64];
                out.add("coherence.f32", encode_f32(&grid));
                out.add("coherence.json", json(&RawSidecar::new(vec![side; d], vec![range; d]))?);
            }
        }
    }
    let summary = CoherenceSummary {
        side: cfg.profile,
        ordering: profile.ordering.clone(),
        horizon: profile.horizon,
        valid_ranks: profile.valid_ranks,
        tail_bound: profile.tail_bound,
        boundary_ranks: boundary.len(),
        fit,
    };
    out.add("summary.json", json(&summary)?);
    Ok(out)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Leading asymptotic term of the hyperbolic counts, `c·K ln^{d−1}(K+1)/(d−1)!`
/// with `c = 1` on ℕ^d and `c = 2^d` on ℤ^d.
fn leading_term(cons: &ConsistencyFn, k: f64) -> Option<f64> {
    let (d, c) = match cons {
        ConsistencyFn::HyperbolicN { d } => (*d, 1.0),
        ConsistencyFn::HyperbolicZ { d } => (*d, 2f64.powi(*d as i32)),
        _ => return None,
    };
    Some(c * k * (k + 1.0).ln().powi(d as i32 - 1) / factorial(d - 1))
}

pub fn counts(cfg: &CountsConfig) -> Result<Outputs> {
    check_schema(cfg.schema)?;
    let cons = cfg.ordering.to_consistency(cfg.dimension, None)?;
    if !cons.is_lattice() {
        return Err(Error::InvalidConfig(format!("{} is not a lattice ordering", cons.name())));
    }
    if cfg.thresholds.iter().any(|k| !k.is_finite() || *k < 0.0) {
        return Err(Error::InvalidConfig("thresholds must be finite and nonnegative".into()));
    }
    let rows = cfg.thresholds.iter().map(|&k| Ok((k, count_sublevel(&cons, k)?))).collect::<Result<Vec<_>>>()?;
    let mut out = Outputs::default();
    out.add(
        "counts.csv",
        csv(|w| {
            writeln!(w, "K,count,leading_term,ratio")?;
            for (k, c) in &rows {
                match leading_term(&cons, *k) {
                    Some(l) if l > 0.0 => writeln!(w, "{k},{c},{l},{}", *c as f64 / l)?,
                    _ => writeln!(w, "{k},{c},,")?,
                }
            }
            Ok(())
        })?,
    );
    Ok(out)
}

pub fn ordering(cfg: &OrderingConfig) -> Result<Outputs> {
    check_schema(cfg.schema)?;
    let lattice = match &cfg.basis {
        Some(b) => match b.resolve(cfg.dimension)? {
            Basis::Wavelet(c) => Some(c.lattice()),
            Basis::Legendre { .. } => None,
        },
        None => None,
    };
    let cons = cfg.ordering.to_consistency(cfg.dimension, lattice)?;
    let prefix = generate_prefix(&cons, cfg.length)?;
    let mut out = Outputs::default();
    out.add("ordering.csv", csv(|w| write_prefix_csv(w, &prefix))?);
    Ok(out)
}

pub fn pattern(cfg: &SchemeConfig, strict: bool) -> Result<Outputs> {
    if cfg.schema != SCHEME_SCHEMA {
        return Err(Error::InvalidConfig(format!("schema {} (expected {SCHEME_SCHEMA})", cfg.schema)));
    }
    let cons = cfg.ordering.to_consistency(cfg.dimension, None)?;
    if !cons.is_lattice() {
        return Err(Error::InvalidConfig(format!("{} is not a frequency ordering", cons.name())));
    }
    let scheme = build_scheme(&cfg.levels, &cfg.counts, cfg.seed)?;
    let o = lattice_prefix(&cons, scheme.horizon())?;
    let extent = match cfg.extent {
        Some(e) => e,
        None => o.items.iter().map(FourierIndex::linf).max().unwrap_or(0) as usize,
    };
    let mask = rasterize_mask(&scheme, &o, extent, strict)?;
    if !mask.outside.is_empty() {
        eprintln!("warning: {} sampled frequencies fall outside the mask extent {extent}", mask.outside.len());
    }
    let mut out = Outputs::default();
    if cfg.dimension <= 2 {
        out.add("mask.pgm", mask.to_pgm()?);
    }
    out.add("samples.csv", csv(|w| mask.write_csv(w, &o))?);
    out.add("scheme.json", json(&scheme)?);
    Ok(out)
}

fn add_raster(out: &mut Outputs, name: &str, r: &Raster) -> Result<()> {
    if r.d <= 2 {
        out.add(format!("{name}.pgm"), r.to_pgm16()?);
    }
    out.add(format!("{name}.f32"), encode_f32(&r.data));
    out.add(format!("{name}.json"), json(&RawSidecar::new(vec![r.side; r.d], vec![[-1.0, 1.0]; r.d]))?);
    Ok(())
}

pub fn reconstruct(cfg: &ExperimentConfig) -> Result<(Outputs, ExperimentOutput)> {
    let res = run_experiment(cfg)?;
    let mut out = Outputs::default();
    add_raster(&mut out, "reference", &res.reference)?;
    for run in &res.runs {
        let label = &run.result.label;
        add_raster(&mut out, label, &run.image)?;
        if run.mask.d <= 2 {
            out.add(format!("{label}_mask.pgm"), run.mask.to_pgm()?);
        }
        out.add(
            format!("{label}_residuals.csv"),
            csv(|w| {
                writeln!(w, "iteration,residual")?;
                for (i, r) in run.result.residual_history.iter().enumerate() {
                    writeln!(w, "{},{r:e}", i + 1)?;
                }
                Ok(())
            })?,
        );
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        name: &'a str,
        runs: Vec<serde_json::Value>,
    }
    let runs = res
        .results()
        .into_iter()
        .map(|mut r| {
            r.residual_history.clear();
            let mut v = serde_json::to_value(&r).expect("plain data");
            v.as_object_mut().expect("struct").remove("residual_history");
            v
        })
        .collect();
    out.add("results.json", json(&Summary { name: &cfg.name, runs })?);
    Ok((out, res))
}
