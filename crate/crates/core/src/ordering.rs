//! Consistency functions, consistent orderings and exact sublevel counts.
//!
//! An ordering is realized by expanding the bounded sublevel set
//! `{F ≤ K}` for the smallest `K` that holds at least `N` indices, then
//! sorting by `(F, index tuple)`.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::basis::{
    all_types, for_each_in_box, ivec, FourierIndex, IVec, JVec, SeparableWaveletIndex,
    TensorWaveletIndex, WaveletLattice,
};
use crate::error::{Error, Result};
use crate::MAX_DIM;

pub const DEFAULT_PREFIX_BUDGET: usize = 1 << 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeDescriptor {
    Linf,
    L2,
    L1,
    Polytope { vertices: Vec<Vec<f64>> },
}

/// A scaling shape ready for evaluation; polytopes carry their facets
/// as `a · x ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Shape {
    desc: ShapeDescriptor,
    d: usize,
    facets: Vec<Vec<f64>>,
    /// Largest vertex coordinate, bounds the sublevel box.
    reach: f64,
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[piv][c].abs() < 1e-12 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

impl Shape {
    pub fn new(desc: ShapeDescriptor, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidConfig(format!("shape dimension {d}")));
        }
        let mut facets = Vec::new();
        let mut reach = 1.0;
        if let ShapeDescriptor::Polytope { vertices } = &desc {
            if vertices.len() < d + 1 || vertices.iter().any(|v| v.len() != d) {
                return Err(Error::InvalidConfig(format!(
                    "polytope needs at least {} vertices of length {d}",
                    d + 1
                )));
            }
            if vertices.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("non-finite polytope vertex".into()));
            }
            for idx in subsets(vertices.len(), d) {
                let a: Vec<Vec<f64>> = idx.iter().map(|&i| vertices[i].clone()).collect();
                let Some(n) = solve(a, vec![1.0; d]) else { continue };
                let ok = vertices
                    .iter()
                    .all(|v| v.iter().zip(&n).map(|(x, y)| x * y).sum::<f64>() <= 1.0 + 1e-9);
                if ok && !facets.iter().any(|f: &Vec<f64>| f.iter().zip(&n).all(|(a, b)| (a - b).abs() < 1e-12)) {
                    facets.push(n);
                }
            }
            reach = vertices.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            let shape = Shape { desc: desc.clone(), d, facets: facets.clone(), reach };
            // the origin is interior iff the gauge is positive in every direction
            let mut dirs: Vec<Vec<f64>> = Vec::new();
            for i in 0..d {
                for sgn in [-1.0, 1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = sgn;
                    dirs.push(e);
                }
            }
            dirs.extend(vertices.iter().map(|v| v.iter().map(|x| -x).collect()));
            dirs.extend(vertices.iter().cloned());
            if facets.is_empty() || dirs.iter().any(|u| shape.gauge(u) <= 1e-12) {
                return Err(Error::InvalidConfig(
                    "polytope must contain the origin in its interior".into(),
                ));
            }
        }
        Ok(Shape { desc, d, facets, reach })
    }

    pub fn descriptor(&self) -> &ShapeDescriptor {
        &self.desc
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `S_D(x) = inf { t > 0 : x ∈ tD }`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        match &self.desc {
            ShapeDescriptor::Linf => x.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            ShapeDescriptor::L1 => x.iter().map(|v| v.abs()).sum(),
            ShapeDescriptor::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            ShapeDescriptor::Polytope { .. } => self
                .facets
                .iter()
                .map(|a| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>())
                .fold(0.0f64, f64::max),
        }
    }

    fn sign_symmetric(&self) -> bool {
        !matches!(self.desc, ShapeDescriptor::Polytope { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConsistencyFn {
    /// `|k|` on ℤ (one dimension).
    StandardFourier,
    /// `j` for separable wavelets.
    WaveletLevel(WaveletLattice),
    /// `Σ j_i` for tensor wavelets.
    TensorWaveletHyp(WaveletLattice),
    /// `Π n_i` on ℕ^d.
    HyperbolicN { d: usize },
    /// `Π max(|n_i|, 1)` on ℤ^d.
    HyperbolicZ { d: usize },
    /// Largest product of `r` of the factors `max(|n_i|, 1)`.
    SemiHyperbolic { d: usize, r: usize },
    LinearShape(Shape),
}

/// Borrowed view of any index the consistency functions accept.
#[derive(Clone, Copy, Debug)]
pub enum IndexRef<'a> {
    Lattice(&'a [i64]),
    Separable(&'a SeparableWaveletIndex),
    Tensor(&'a TensorWaveletIndex),
}

/// Product of the `r` largest entries.
fn top_r_product(m: &mut [i64], r: usize) -> f64 {
    m.sort_unstable_by(|a, b| b.cmp(a));
    m[..r].iter().map(|&v| v as f64).product()
}

fn semi_hyperbolic(n: &[i64], r: usize) -> f64 {
    let mut m: ArrayBuf = n.iter().map(|v| v.abs().max(1)).collect();
    top_r_product(&mut m, r)
}

type ArrayBuf = arrayvec::ArrayVec<i64, MAX_DIM>;

impl ConsistencyFn {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            ConsistencyFn::HyperbolicN { d } | ConsistencyFn::HyperbolicZ { d } if *d == 0 || *d > MAX_DIM => {
                bad(format!("dimension {d}"))
            }
            ConsistencyFn::SemiHyperbolic { d, r } if *d == 0 || *d > MAX_DIM || *r == 0 || r > d => {
                bad(format!("semi-hyperbolic order r = {r} in d = {d}"))
            }
            _ => Ok(()),
        }
    }

    /// Dimension of the lattice the function lives on.
    pub fn dim(&self) -> usize {
        match self {
            ConsistencyFn::StandardFourier => 1,
            ConsistencyFn::WaveletLevel(l) | ConsistencyFn::TensorWaveletHyp(l) => l.d,
            ConsistencyFn::HyperbolicN { d }
            | ConsistencyFn::HyperbolicZ { d }
            | ConsistencyFn::SemiHyperbolic { d, .. } => *d,
            ConsistencyFn::LinearShape(s) => s.dim(),
        }
    }

    pub fn is_lattice(&self) -> bool {
        !matches!(self, ConsistencyFn::WaveletLevel(_) | ConsistencyFn::TensorWaveletHyp(_))
    }

    pub fn name(&self) -> String {
        match self {
            ConsistencyFn::StandardFourier => "standard".into(),
            ConsistencyFn::WaveletLevel(_) => "leveled".into(),
            ConsistencyFn::TensorWaveletHyp(_) => "tensor_hyperbolic".into(),
            ConsistencyFn::HyperbolicN { .. } => "hyperbolic_n".into(),
            ConsistencyFn::HyperbolicZ { .. } => "hyperbolic".into(),
            ConsistencyFn::SemiHyperbolic { r, .. } => format!("semi_hyperbolic_{r}"),
            ConsistencyFn::LinearShape(s) => match s.descriptor() {
                ShapeDescriptor::Linf => "linear_linf".into(),
                ShapeDescriptor::L2 => "linear_l2".into(),
                ShapeDescriptor::L1 => "linear_l1".into(),
                ShapeDescriptor::Polytope { .. } => "linear_polytope".into(),
            },
        }
    }

    fn eval_lattice(&self, n: &[i64]) -> Result<f64> {
        if n.len() != self.dim() {
            return Err(Error::IndexKind(format!(
                "{}-dimensional index for a {}-dimensional function",
                n.len(),
                self.dim()
            )));
        }
        Ok(match self {
            ConsistencyFn::StandardFourier => n[0].abs() as f64,
            ConsistencyFn::HyperbolicN { .. } => {
                if n.iter().any(|&v| v < 1) {
                    return Err(Error::IndexKind("hyperbolic cross on ℕ^d needs entries ≥ 1".into()));
                }
                n.iter().map(|&v| v as f64).product()
            }
            ConsistencyFn::HyperbolicZ { d } => semi_hyperbolic(n, *d),
            ConsistencyFn::SemiHyperbolic { r, .. } => semi_hyperbolic(n, *r),
            ConsistencyFn::LinearShape(s) => {
                let x: ArrayBufF = n.iter().map(|&v| v as f64).collect();
                s.gauge(&x)
            }
            _ => unreachable!(),
        })
    }
}

type ArrayBufF = arrayvec::ArrayVec<f64, MAX_DIM>;

pub fn eval_consistency(cons: &ConsistencyFn, idx: IndexRef<'_>) -> Result<f64> {
    match (cons, idx) {
        (ConsistencyFn::WaveletLevel(lat), IndexRef::Separable(w)) => {
            w.validate(lat)?;
            Ok(w.j as f64)
        }
        (ConsistencyFn::TensorWaveletHyp(lat), IndexRef::Tensor(w)) => {
            w.validate(lat)?;
            Ok(w.level_sum() as f64)
        }
        (c, IndexRef::Lattice(n)) if c.is_lattice() => c.eval_lattice(n),
        (c, other) => Err(Error::IndexKind(format!("{} cannot score {other:?}", c.name()))),
    }
}

/// A consistent ordering prefix together with its scores.
#[derive(Clone, Debug)]
pub struct Ordering<I> {
    pub cons: ConsistencyFn,
    pub items: Vec<I>,
    pub values: Vec<f64>,
}

impl<I> Ordering<I> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub type FourierOrdering = Ordering<FourierIndex>;

impl FourierOrdering {
    /// Zero-based rank of every listed frequency.
    pub fn rank_map(&self) -> HashMap<IVec, usize> {
        self.items.iter().enumerate().map(|(i, f)| (f.k.clone(), i)).collect()
    }
}

/// Any prefix, tagged by index kind.
#[derive(Clone, Debug)]
pub enum Prefix {
    Lattice(Ordering<FourierIndex>),
    Separable(Ordering<SeparableWaveletIndex>),
    Tensor(Ordering<TensorWaveletIndex>),
}

impl Prefix {
    pub fn len(&self) -> usize {
        match self {
            Prefix::Lattice(o) => o.len(),
            Prefix::Separable(o) => o.len(),
            Prefix::Tensor(o) => o.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn grid_kind(cons: &ConsistencyFn) -> Threshold {
    match cons {
        ConsistencyFn::LinearShape(s) => match s.descriptor() {
            ShapeDescriptor::L2 => Threshold::SquaredInteger,
            ShapeDescriptor::Polytope { .. } => Threshold::Real,
            _ => Threshold::Integer,
        },
        _ => Threshold::Integer,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Threshold {
    Integer,
    SquaredInteger,
    Real,
}

/// Magnitude-vector DFS for sign-symmetric functions nondecreasing in every `|n_i|`.
fn symmetric_walk(d: usize, k: f64, f: &dyn Fn(&[i64]) -> f64, emit: &mut dyn FnMut(&[i64])) {
    let mut a = [0i64; MAX_DIM];
    fn rec(t: usize, d: usize, k: f64, a: &mut [i64; MAX_DIM], f: &dyn Fn(&[i64]) -> f64, emit: &mut dyn FnMut(&[i64])) {
        if t == d {
            emit(&a[..d]);
            return;
        }
        let mut v = 0i64;
        loop {
            a[t] = v;
            if f(&a[..d]) > k {
                break;
            }
            rec(t + 1, d, k, a, f, emit);
            v += 1;
        }
        a[t] = 0;
    }
    if f(&a[..d]) <= k {
        rec(0, d, k, &mut a, f, emit);
    }
}

fn expand_signs(mag: &[i64], out: &mut dyn FnMut(&[i64])) {
    let d = mag.len();
    let nz: ArrayBuf = (0..d as i64).filter(|&i| mag[i as usize] != 0).collect();
    let mut cur: ArrayBuf = mag.iter().copied().collect();
    for mask in 0..(1u32 << nz.len()) {
        for (b, &i) in nz.iter().enumerate() {
            let v = mag[i as usize];
            cur[i as usize] = if mask >> b & 1 == 1 { -v } else { v };
        }
        out(&cur);
    }
}

fn hyperbolic_n_walk(d: usize, k: f64, emit: &mut dyn FnMut(&[i64])) {
    let mut a = [1i64; MAX_DIM];
    fn rec(t: usize, d: usize, budget: i64, a: &mut [i64; MAX_DIM], emit: &mut dyn FnMut(&[i64])) {
        if t == d {
            emit(&a[..d]);
            return;
        }
        for v in 1..=budget {
            a[t] = v;
            rec(t + 1, d, budget / v, a, emit);
        }
        a[t] = 1;
    }
    if k >= 1.0 {
        rec(0, d, k.floor() as i64, &mut a, emit);
    }
}

/// Visit every lattice point with `F ≤ k` (no particular order).
fn lattice_walk(cons: &ConsistencyFn, k: f64, emit: &mut dyn FnMut(&[i64])) -> Result<()> {
    match cons {
        ConsistencyFn::StandardFourier => {
            let r = k.floor() as i64;
            for v in -r..=r {
                emit(&[v]);
            }
        }
        ConsistencyFn::HyperbolicN { d } => hyperbolic_n_walk(*d, k, emit),
        ConsistencyFn::HyperbolicZ { d } | ConsistencyFn::SemiHyperbolic { d, .. } => {
            let f = |n: &[i64]| cons.eval_lattice(n).expect("dimension checked");
            symmetric_walk(*d, k, &f, &mut |m| expand_signs(m, emit));
        }
        ConsistencyFn::LinearShape(s) if s.sign_symmetric() => {
            let f = |n: &[i64]| cons.eval_lattice(n).expect("dimension checked");
            symmetric_walk(s.dim(), k, &f, &mut |m| expand_signs(m, emit));
        }
        ConsistencyFn::LinearShape(s) => {
            let r = (k * s.reach).ceil() as i64 + 1;
            let mut x = [0.0f64; MAX_DIM];
            for_each_in_box(s.dim(), -r, r, |n| {
                for (i, v) in n.iter().enumerate() {
                    x[i] = *v as f64;
                }
                if s.gauge(&x[..s.dim()]) <= k {
                    emit(n);
                }
            });
        }
        _ => return Err(Error::IndexKind(format!("{} is not a lattice function", cons.name()))),
    }
    Ok(())
}

/// `S_d(N) = #{m ∈ ℕ^d : Π m_i ≤ N}` via `S_{k+1}(N) = Σ_i S_k(⌊N/i⌋)`.
pub fn count_hyperbolic_n(d: usize, n: u64) -> u64 {
    fn rec(d: usize, n: u64, memo: &mut HashMap<(usize, u64), u64>) -> u64 {
        if n == 0 {
            return 0;
        }
        if d == 1 {
            return n;
        }
        if d == 0 {
            return 1;
        }
        if let Some(v) = memo.get(&(d, n)) {
            return *v;
        }
        // group the i with equal ⌊n/i⌋
        let mut total = 0u64;
        let mut i = 1u64;
        while i <= n {
            let q = n / i;
            let last = n / q;
            total += (last - i + 1) * rec(d - 1, q, memo);
            i = last + 1;
        }
        memo.insert((d, n), total);
        total
    }
    rec(d, n, &mut HashMap::new())
}

/// `R_d(K) = #{n ∈ ℤ^d : Π max(|n_i|, 1) ≤ K}`.
pub fn count_hyperbolic_z(d: usize, k: u64) -> u64 {
    fn rec(d: usize, k: u64, memo: &mut HashMap<(usize, u64), u64>) -> u64 {
        if k == 0 {
            return 0;
        }
        if d == 0 {
            return 1;
        }
        if d == 1 {
            return 2 * k + 1;
        }
        if let Some(v) = memo.get(&(d, k)) {
            return *v;
        }
        // last coordinate in {-1, 0, 1}, or |n| = m ≥ 2 with two signs
        let mut total = 3 * rec(d - 1, k, memo);
        let mut m = 2u64;
        while m <= k {
            let q = k / m;
            let last = k / q;
            total += 2 * (last - m + 1) * rec(d - 1, q, memo);
            m = last + 1;
        }
        memo.insert((d, k), total);
        total
    }
    rec(d, k, &mut HashMap::new())
}

fn tensor_scale_vectors(lat: &WaveletLattice, k: f64) -> Vec<JVec> {
    let mut out = Vec::new();
    if k < (lat.j0 as f64) * lat.d as f64 {
        return out;
    }
    let total = k.floor() as u32;
    let mut cur: JVec = (0..lat.d).map(|_| lat.j0).collect();
    fn rec(t: usize, lat: &WaveletLattice, left: u32, cur: &mut JVec, out: &mut Vec<JVec>) {
        if t == lat.d {
            out.push(cur.clone());
            return;
        }
        // the remaining axes each need at least j0
        let reserve = lat.j0 * (lat.d - t - 1) as u32;
        let mut j = lat.j0;
        while j + reserve <= left {
            cur[t] = j;
            rec(t + 1, lat, left - j, cur, out);
            j += 1;
        }
        cur[t] = lat.j0;
    }
    rec(0, lat, total, &mut cur, &mut out);
    out
}

/// Exact `#{idx : F(idx) ≤ K}`.
pub fn count_sublevel(cons: &ConsistencyFn, k: f64) -> Result<u64> {
    cons.validate()?;
    if !k.is_finite() {
        return Err(Error::InvalidConfig("threshold must be finite".into()));
    }
    if k < 0.0 {
        return Ok(0);
    }
    Ok(match cons {
        ConsistencyFn::StandardFourier => 2 * k.floor() as u64 + 1,
        ConsistencyFn::HyperbolicN { d } => count_hyperbolic_n(*d, k.floor() as u64),
        ConsistencyFn::HyperbolicZ { d } => count_hyperbolic_z(*d, k.floor() as u64),
        ConsistencyFn::SemiHyperbolic { d, r } if r == d => count_hyperbolic_z(*d, k.floor() as u64),
        ConsistencyFn::LinearShape(s) if matches!(s.descriptor(), ShapeDescriptor::Linf) => {
            (2 * k.floor() as u64 + 1).pow(s.dim() as u32)
        }
        ConsistencyFn::WaveletLevel(lat) => {
            if k < lat.j0 as f64 {
                0
            } else {
                (lat.j0..=k.floor().min(62.0) as u32).map(|j| lat.separable_level_size(j)).sum()
            }
        }
        ConsistencyFn::TensorWaveletHyp(lat) => tensor_scale_vectors(lat, k)
            .iter()
            .map(|j| lat.tensor_block_size(j))
            .sum(),
        _ => {
            let mut c = 0u64;
            lattice_walk(cons, k, &mut |_| c += 1)?;
            c
        }
    })
}

/// Smallest attainable threshold `K` with `count_sublevel(K) ≥ n`.
fn threshold_for(cons: &ConsistencyFn, n: usize) -> Result<f64> {
    let kind = grid_kind(cons);
    let to_k = |t: u64| match kind {
        Threshold::SquaredInteger => (t as f64).sqrt(),
        _ => t as f64,
    };
    let count = |t: u64| count_sublevel(cons, to_k(t));
    if kind == Threshold::Real {
        let mut hi = 1.0f64;
        while count_sublevel(cons, hi)? < n as u64 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Capacity("threshold search diverged".into()));
            }
        }
        let mut lo = 0.0f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if count_sublevel(cons, mid)? >= n as u64 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        return Ok(hi);
    }
    let mut hi = 1u64;
    while count(hi)? < n as u64 {
        hi *= 2;
        if hi > 1 << 50 {
            return Err(Error::Capacity("threshold search diverged".into()));
        }
    }
    let mut lo = 0u64;
    if count(0)? >= n as u64 {
        return Ok(to_k(0));
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if count(mid)? >= n as u64 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(to_k(hi))
}

/// Every lattice point with `F ≤ k`, sorted by `(F, tuple)`.
pub fn lattice_sublevel(cons: &ConsistencyFn, k: f64, budget: usize) -> Result<Ordering<FourierIndex>> {
    cons.validate()?;
    let mut pts: Vec<(f64, IVec)> = Vec::new();
    let mut over = false;
    lattice_walk(cons, k, &mut |n| {
        if pts.len() >= budget {
            over = true;
            return;
        }
        let v = cons.eval_lattice(n).expect("dimension checked");
        pts.push((v, ivec(n)));
    })?;
    if over {
        return Err(Error::Capacity(format!("sublevel set exceeds budget {budget}")));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let (values, items) = pts.into_iter().map(|(v, k)| (v, FourierIndex { k })).unzip();
    Ok(Ordering { cons: cons.clone(), items, values })
}

/// The ordering restricted to the box `‖n‖_∞ ≤ radius`: every box point,
/// sorted by `(F, tuple)`.
pub fn box_ordering(cons: &ConsistencyFn, radius: i64) -> Result<FourierOrdering> {
    cons.validate()?;
    if !cons.is_lattice() || radius < 0 {
        return Err(Error::InvalidConfig("box ordering needs a lattice consistency function and radius ≥ 0".into()));
    }
    let d = cons.dim();
    let side = (2 * radius + 1) as u128;
    if side.pow(d as u32) > DEFAULT_PREFIX_BUDGET as u128 {
        return Err(Error::Capacity(format!("box of radius {radius} in {d} dimensions")));
    }
    let mut pts: Vec<(f64, IVec)> = Vec::new();
    for_each_in_box(d, -radius, radius, |n| {
        pts.push((cons.eval_lattice(n).expect("dimension checked"), ivec(n)));
    });
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let (values, items) = pts.into_iter().map(|(v, k)| (v, FourierIndex { k })).unzip();
    Ok(Ordering { cons: cons.clone(), items, values })
}

pub fn lattice_prefix_with_budget(cons: &ConsistencyFn, n: usize, budget: usize) -> Result<FourierOrdering> {
    if n == 0 {
        return Err(Error::InvalidConfig("prefix length must be at least 1".into()));
    }
    if n > budget {
        return Err(Error::Capacity(format!("prefix {n} exceeds budget {budget}")));
    }
    let k = threshold_for(cons, n)?;
    let mut o = lattice_sublevel(cons, k, budget.saturating_mul(1 << cons.dim().min(5)))?;
    o.items.truncate(n);
    o.values.truncate(n);
    Ok(o)
}

pub fn lattice_prefix(cons: &ConsistencyFn, n: usize) -> Result<FourierOrdering> {
    lattice_prefix_with_budget(cons, n, DEFAULT_PREFIX_BUDGET)
}

pub fn separable_prefix(lat: &WaveletLattice, n: usize, budget: usize) -> Result<Ordering<SeparableWaveletIndex>> {
    if n == 0 {
        return Err(Error::InvalidConfig("prefix length must be at least 1".into()));
    }
    if n > budget {
        return Err(Error::Capacity(format!("prefix {n} exceeds budget {budget}")));
    }
    let mut items = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut j = lat.j0;
    'levels: loop {
        let (lo, hi) = lat.k_range(j);
        for s in all_types(lat.d) {
            if j != lat.j0 && s.iter().all(|&b| b == 0) {
                continue;
            }
            let mut done = false;
            for_each_in_box(lat.d, lo, hi, |k| {
                if items.len() < n {
                    items.push(SeparableWaveletIndex { s: s.clone(), j, k: k.clone() });
                    values.push(j as f64);
                } else {
                    done = true;
                }
            });
            if done || items.len() == n {
                break 'levels;
            }
        }
        j += 1;
    }
    Ok(Ordering { cons: ConsistencyFn::WaveletLevel(*lat), items, values })
}

pub fn tensor_prefix(lat: &WaveletLattice, n: usize, budget: usize) -> Result<Ordering<TensorWaveletIndex>> {
    if n == 0 {
        return Err(Error::InvalidConfig("prefix length must be at least 1".into()));
    }
    if n > budget {
        return Err(Error::Capacity(format!("prefix {n} exceeds budget {budget}")));
    }
    let cons = ConsistencyFn::TensorWaveletHyp(*lat);
    let k = threshold_for(&cons, n)?;
    let total = count_sublevel(&cons, k)?;
    if total > budget as u64 * 4 {
        return Err(Error::Capacity(format!("sublevel set of {total} exceeds budget")));
    }
    let mut all: Vec<TensorWaveletIndex> = Vec::with_capacity(total as usize);
    for jv in tensor_scale_vectors(lat, k) {
        let ranges: Vec<(i64, i64)> = jv.iter().map(|&ji| lat.k_range(ji)).collect();
        for s in all_types(lat.d) {
            if (0..lat.d).any(|i| s[i] == 0 && jv[i] != lat.j0) {
                continue;
            }
            let mut cur: IVec = ranges.iter().map(|r| r.0).collect();
            'odo: loop {
                all.push(TensorWaveletIndex { s: s.clone(), j: jv.clone(), k: cur.clone() });
                let mut axis = lat.d;
                loop {
                    if axis == 0 {
                        break 'odo;
                    }
                    axis -= 1;
                    if cur[axis] < ranges[axis].1 {
                        cur[axis] += 1;
                        break;
                    }
                    cur[axis] = ranges[axis].0;
                }
            }
        }
    }
    all.sort_by(|a, b| a.level_sum().cmp(&b.level_sum()).then_with(|| a.cmp(b)));
    all.truncate(n);
    let values = all.iter().map(|w| w.level_sum() as f64).collect();
    Ok(Ordering { cons, items: all, values })
}

/// First `n` indices of the consistent ordering with lexicographic tie-break.
pub fn generate_prefix(cons: &ConsistencyFn, n: usize) -> Result<Prefix> {
    generate_prefix_with_budget(cons, n, DEFAULT_PREFIX_BUDGET)
}

pub fn generate_prefix_with_budget(cons: &ConsistencyFn, n: usize, budget: usize) -> Result<Prefix> {
    cons.validate()?;
    match cons {
        ConsistencyFn::WaveletLevel(lat) => Ok(Prefix::Separable(separable_prefix(lat, n, budget)?)),
        ConsistencyFn::TensorWaveletHyp(lat) => Ok(Prefix::Tensor(tensor_prefix(lat, n, budget)?)),
        _ => Ok(Prefix::Lattice(lattice_prefix_with_budget(cons, n, budget)?)),
    }
}

/// `h_d(x) = x / ln^{d-1}(x + 1)`.
pub fn h_d(x: f64, d: usize) -> f64 {
    x / (x + 1.0).ln().powi(d as i32 - 1)
}

/// Inverse of `y ↦ y ln^{d-1} y` on `[1, ∞)`, by bisection to 1e-12 relative.
pub fn g_d(x: f64, d: usize) -> f64 {
    if d <= 1 {
        return x;
    }
    let f = |y: f64| y * y.ln().powi(d as i32 - 1);
    let mut lo = 1.0f64;
    let mut hi = x.max(2.0);
    while f(hi) < x {
        hi *= 2.0;
    }
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ratios `g_d(x) / h_d(x)` along the grid.
pub fn verify_hyperbolic_asymptotics(d: usize, x_grid: &[f64]) -> Result<Vec<f64>> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::InvalidConfig(format!("dimension {d}")));
    }
    if x_grid.windows(2).any(|w| w[1] <= w[0]) || x_grid.iter().any(|&x| !(x >= 10.0)) {
        return Err(Error::InvalidConfig("grid must be increasing with x ≥ 10".into()));
    }
    Ok(x_grid.iter().map(|&x| g_d(x, d) / h_d(x, d)).collect())
}

fn join<T: ToString>(v: impl IntoIterator<Item = T>) -> String {
    v.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// CSV with one row per rank: rank, index columns, F value.
pub fn write_prefix_csv<W: Write>(w: &mut W, prefix: &Prefix) -> std::io::Result<()> {
    match prefix {
        Prefix::Lattice(o) => {
            let d = o.items.first().map_or(0, |f| f.dim());
            writeln!(w, "rank,{},value", join((1..=d).map(|i| format!("n{i}"))))?;
            for (r, (f, v)) in o.items.iter().zip(&o.values).enumerate() {
                writeln!(w, "{},{},{}", r + 1, join(f.k.iter()), v)?;
            }
        }
        Prefix::Separable(o) => {
            let d = o.items.first().map_or(0, |f| f.k.len());
            writeln!(
                w,
                "rank,{},j,{},value",
                join((1..=d).map(|i| format!("s{i}"))),
                join((1..=d).map(|i| format!("k{i}")))
            )?;
            for (r, (x, v)) in o.items.iter().zip(&o.values).enumerate() {
                writeln!(w, "{},{},{},{},{}", r + 1, join(x.s.iter()), x.j, join(x.k.iter()), v)?;
            }
        }
        Prefix::Tensor(o) => {
            let d = o.items.first().map_or(0, |f| f.k.len());
            writeln!(
                w,
                "rank,{},{},{},value",
                join((1..=d).map(|i| format!("s{i}"))),
                join((1..=d).map(|i| format!("j{i}"))),
                join((1..=d).map(|i| format!("k{i}")))
            )?;
            for (r, (x, v)) in o.items.iter().zip(&o.values).enumerate() {
                writeln!(w, "{},{},{},{},{}", r + 1, join(x.s.iter()), join(x.j.iter()), join(x.k.iter()), v)?;
            }
        }
    }
    Ok(())
}

/// Serializable ordering choice used by configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OrderingSpec {
    Standard,
    Linear {
        #[serde(default = "default_shape")]
        shape: ShapeDescriptor,
    },
    Hyperbolic,
    HyperbolicN,
    SemiHyperbolic { r: usize },
    Leveled,
    TensorHyperbolic,
}

fn default_shape() -> ShapeDescriptor {
    ShapeDescriptor::Linf
}

impl OrderingSpec {
    pub fn to_consistency(&self, d: usize, lattice: Option<WaveletLattice>) -> Result<ConsistencyFn> {
        let need_lat = || {
            lattice.ok_or_else(|| Error::InvalidConfig("wavelet ordering needs a wavelet basis".into()))
        };
        let c = match self {
            OrderingSpec::Standard => {
                if d != 1 {
                    return Err(Error::InvalidConfig("standard ordering is one-dimensional".into()));
                }
                ConsistencyFn::StandardFourier
            }
            OrderingSpec::Linear { shape } => ConsistencyFn::LinearShape(Shape::new(shape.clone(), d)?),
            OrderingSpec::Hyperbolic => ConsistencyFn::HyperbolicZ { d },
            OrderingSpec::HyperbolicN => ConsistencyFn::HyperbolicN { d },
            OrderingSpec::SemiHyperbolic { r } => ConsistencyFn::SemiHyperbolic { d, r: *r },
            OrderingSpec::Leveled => ConsistencyFn::WaveletLevel(need_lat()?),
            OrderingSpec::TensorHyperbolic => ConsistencyFn::TensorWaveletHyp(need_lat()?),
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linf(d: usize) -> ConsistencyFn {
        ConsistencyFn::LinearShape(Shape::new(ShapeDescriptor::Linf, d).unwrap())
    }

    fn lat(cons: &ConsistencyFn, n: usize) -> Vec<IVec> {
        lattice_prefix(cons, n).unwrap().items.into_iter().map(|f| f.k).collect()
    }

    #[test]
    fn evaluation_examples() {
        let v = |c: &ConsistencyFn, n: &[i64]| eval_consistency(c, IndexRef::Lattice(n)).unwrap();
        assert_eq!(v(&ConsistencyFn::HyperbolicZ { d: 2 }, &[3, -2]), 6.0);
        assert_eq!(v(&ConsistencyFn::SemiHyperbolic { d: 3, r: 2 }, &[2, 3, 1]), 6.0);
        assert_eq!(v(&linf(2), &[3, -4]), 4.0);
        assert_eq!(v(&ConsistencyFn::HyperbolicZ { d: 2 }, &[0, 0]), 1.0);
        assert!(eval_consistency(&ConsistencyFn::HyperbolicZ { d: 2 }, IndexRef::Lattice(&[1])).is_err());
        assert!(eval_consistency(&ConsistencyFn::HyperbolicN { d: 1 }, IndexRef::Lattice(&[0])).is_err());
        let l = WaveletLattice { d: 1, p: 1, j0: 0 };
        let w = SeparableWaveletIndex { s: [1].into_iter().collect(), j: 3, k: ivec(&[2]) };
        assert_eq!(eval_consistency(&ConsistencyFn::WaveletLevel(l), IndexRef::Separable(&w)).unwrap(), 3.0);
        assert!(eval_consistency(&linf(1), IndexRef::Separable(&w)).is_err());
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(lat(&ConsistencyFn::StandardFourier, 3), vec![ivec(&[0]), ivec(&[-1]), ivec(&[1])]);
        let hz = lattice_prefix(&ConsistencyFn::HyperbolicZ { d: 2 }, 21).unwrap();
        let mut brute: Vec<IVec> = Vec::new();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                if a.abs().max(1) * b.abs().max(1) <= 2 {
                    brute.push(ivec(&[a, b]));
                }
            }
        }
        assert_eq!(brute.len(), 21);
        let mut got: Vec<IVec> = hz.items.iter().map(|f| f.k.clone()).collect();
        got.sort();
        brute.sort();
        assert_eq!(got, brute);
        let cube = lat(&ConsistencyFn::SemiHyperbolic { d: 3, r: 1 }, 27);
        assert!(cube.iter().all(|k| k.iter().all(|v| v.abs() <= 1)));
        assert!(lattice_prefix(&linf(2), 0).is_err());
    }

    #[test]
    fn counting_examples() {
        assert_eq!(count_sublevel(&ConsistencyFn::HyperbolicN { d: 2 }, 3.0).unwrap(), 5);
        assert_eq!(count_sublevel(&ConsistencyFn::HyperbolicZ { d: 2 }, 2.0).unwrap(), 21);
        assert_eq!(count_sublevel(&ConsistencyFn::HyperbolicN { d: 1 }, 17.0).unwrap(), 17);
        for n in 1..200u64 {
            let direct: u64 = (1..=n).map(|i| n / i).sum();
            assert_eq!(count_hyperbolic_n(2, n), direct);
        }
    }

    fn variants() -> Vec<ConsistencyFn> {
        let mut v = vec![ConsistencyFn::StandardFourier];
        for d in 1..=3 {
            v.push(ConsistencyFn::HyperbolicN { d });
            v.push(ConsistencyFn::HyperbolicZ { d });
            for r in 1..=d {
                v.push(ConsistencyFn::SemiHyperbolic { d, r });
            }
            for s in [ShapeDescriptor::Linf, ShapeDescriptor::L1, ShapeDescriptor::L2] {
                v.push(ConsistencyFn::LinearShape(Shape::new(s, d).unwrap()));
            }
            let l = WaveletLattice { d, p: 1 + d % 2, j0: d as u32 % 2 };
            v.push(ConsistencyFn::WaveletLevel(l));
            v.push(ConsistencyFn::TensorWaveletHyp(l));
        }
        let tri = ShapeDescriptor::Polytope { vertices: vec![vec![2.0, -1.0], vec![-1.0, 2.0], vec![-1.0, -1.0]] };
        v.push(ConsistencyFn::LinearShape(Shape::new(tri, 2).unwrap()));
        v
    }

    #[test]
    fn enumeration_agrees_with_counts_and_is_consistent() {
        for cons in variants() {
            for &k in &[1.0, 2.0, 3.0, 4.5] {
                let c = count_sublevel(&cons, k).unwrap() as usize;
                if c == 0 || c > 200_000 {
                    continue;
                }
                let p = generate_prefix(&cons, c).unwrap();
                assert_eq!(p.len(), c, "{} K={k}", cons.name());
                let vals = match &p {
                    Prefix::Lattice(o) => o.values.clone(),
                    Prefix::Separable(o) => o.values.clone(),
                    Prefix::Tensor(o) => o.values.clone(),
                };
                assert!(vals.windows(2).all(|w| w[0] <= w[1]));
                assert!(*vals.last().unwrap() <= k);
                if let Prefix::Lattice(o) = &p {
                    for (f, v) in o.items.iter().zip(&o.values) {
                        assert_eq!(eval_consistency(&cons, IndexRef::Lattice(&f.k)).unwrap(), *v);
                    }
                    let mut seen = std::collections::HashSet::new();
                    assert!(o.items.iter().all(|f| seen.insert(f.k.clone())));
                    // brute force on a box
                    if cons.dim() <= 2 {
                        let mut brute = 0;
                        for_each_in_box(cons.dim(), -40, 40, |n| {
                            if let Ok(v) = eval_consistency(&cons, IndexRef::Lattice(n)) {
                                if v <= k {
                                    brute += 1;
                                }
                            }
                        });
                        assert_eq!(brute, c, "{} K={k}", cons.name());
                    }
                }
                // a strictly longer prefix extends this one
                let q = generate_prefix(&cons, c + 3).unwrap();
                match (&p, &q) {
                    (Prefix::Lattice(a), Prefix::Lattice(b)) => assert_eq!(a.items[..], b.items[..c]),
                    (Prefix::Separable(a), Prefix::Separable(b)) => assert_eq!(a.items[..], b.items[..c]),
                    (Prefix::Tensor(a), Prefix::Tensor(b)) => assert_eq!(a.items[..], b.items[..c]),
                    _ => unreachable!(),
                }
            }
        }
    }

    #[test]
    fn wavelet_prefixes_cover_levels() {
        let l = WaveletLattice { d: 2, p: 1, j0: 0 };
        let o = separable_prefix(&l, 16 + 48, 1 << 20).unwrap();
        assert_eq!(o.values.iter().filter(|&&v| v == 0.0).count(), 16);
        assert_eq!(o.values.iter().filter(|&&v| v == 1.0).count(), 48);
        let t = tensor_prefix(&l, 16, 1 << 20).unwrap();
        assert!(t.items.iter().all(|w| w.level_sum() == 0));
    }

    #[test]
    fn hyperbolic_growth_helpers() {
        assert_eq!(h_d(5.0, 1), 5.0);
        assert!((h_d(9.0, 2) - 9.0 / 10f64.ln()).abs() < 1e-12);
        let r = verify_hyperbolic_asymptotics(1, &[10.0, 100.0]).unwrap();
        assert!(r.iter().all(|&x| (x - 1.0).abs() < 1e-10));
        let r = verify_hyperbolic_asymptotics(2, &[1e4, 1e6, 1e8]).unwrap();
        assert!(r[1] > 1.0 && r[1] < 1.3);
        assert!((r[2] - 1.0).abs() < (r[0] - 1.0).abs());
        assert!(verify_hyperbolic_asymptotics(2, &[5.0]).is_err());
        let mut prev = h_d(3.0, 3);
        for i in 1..1000 {
            let x = 3.0 * 1.02f64.powi(i);
            let v = h_d(x, 3);
            if x > 50.0 {
                assert!(v >= prev);
            }
            prev = v;
        }
    }

    #[test]
    fn polytope_validation() {
        let bad = ShapeDescriptor::Polytope { vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]] };
        assert!(Shape::new(bad, 2).is_err());
        let sq = ShapeDescriptor::Polytope {
            vertices: vec![vec![1.0, 1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0]],
        };
        let s = Shape::new(sq, 2).unwrap();
        assert!((s.gauge(&[3.0, -4.0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_export() {
        let p = generate_prefix(&ConsistencyFn::HyperbolicZ { d: 2 }, 5).unwrap();
        let mut buf = Vec::new();
        write_prefix_csv(&mut buf, &p).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "rank,n1,n2,value");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("1,-1,-1,1"));
    }
}
