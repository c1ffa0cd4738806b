//! Sparse bosonic Fock states over labeled temporal-spatial modes.
//!
//! A [`FockState`] carries its mode universe explicitly, so vacuum modes are
//! first-class: tensoring two vacua on the same mode is an error, and an
//! unused beam-splitter port can be declared with [`FockState::with_vacuum_mode`]
//! before it is mixed in.
//!
//! Beam splitters use the symmetric 50:50 convention
//! `in1† → (out1† + out2†)/√2`, `in2† → (out1† − out2†)/√2`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default magnitude below which amplitudes are dropped.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Spatial port of the interferometer network.
///
/// The vacuum variants are the otherwise unused input ports of the three
/// splitters that divide a single beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Port {
    A,
    B,
    C,
    D,
    E,
    DPrime,
    DDoublePrime,
    FPrime,
    GPrime,
    HPrime,
    JPrime,
    FDoublePrime,
    GDoublePrime,
    HDoublePrime,
    JDoublePrime,
    PrepVacuum,
    SplitterVacuum,
    AliceVacuum,
    BobVacuum,
}

impl Port {
    pub fn label(self) -> &'static str {
        match self {
            Port::A => "a",
            Port::B => "b",
            Port::C => "c",
            Port::D => "d",
            Port::E => "e",
            Port::DPrime => "d'",
            Port::DDoublePrime => "d''",
            Port::FPrime => "f'",
            Port::GPrime => "g'",
            Port::HPrime => "h'",
            Port::JPrime => "j'",
            Port::FDoublePrime => "f''",
            Port::GDoublePrime => "g''",
            Port::HDoublePrime => "h''",
            Port::JDoublePrime => "j''",
            Port::PrepVacuum => "vac_prep",
            Port::SplitterVacuum => "vac_fbs",
            Port::AliceVacuum => "vac_alice",
            Port::BobVacuum => "vac_bob",
        }
    }
}

/// A temporal mode on a given port; `bin` counts grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeId {
    pub port: Port,
    pub bin: i64,
}

impl ModeId {
    pub const fn new(port: Port, bin: i64) -> Self {
        Self { port, bin }
    }
}

impl fmt::Display for ModeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.port.label(), self.bin)
    }
}

/// Photon counts per mode, sorted by mode, zero counts omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationVector(Vec<(ModeId, u32)>);

impl OccupationVector {
    pub fn vacuum() -> Self {
        Self(Vec::new())
    }

    /// Builds the canonical form; repeated modes are summed.
    pub fn from_pairs<I: IntoIterator<Item = (ModeId, u32)>>(pairs: I) -> Self {
        let mut map: BTreeMap<ModeId, u32> = BTreeMap::new();
        for (m, n) in pairs {
            *map.entry(m).or_insert(0) += n;
        }
        Self(map.into_iter().filter(|&(_, n)| n > 0).collect())
    }

    pub fn count(&self, mode: ModeId) -> u32 {
        match self.0.binary_search_by(|(m, _)| m.cmp(&mode)) {
            Ok(i) => self.0[i].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u32 {
        self.0.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModeId, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeId> + '_ {
        self.0.iter().map(|&(m, _)| m)
    }

    /// Returns a copy with the count of `mode` replaced.
    pub fn with_count(&self, mode: ModeId, n: u32) -> Self {
        let mut v = self.0.clone();
        match v.binary_search_by(|(m, _)| m.cmp(&mode)) {
            Ok(i) if n == 0 => {
                v.remove(i);
            }
            Ok(i) => v[i].1 = n,
            Err(_) if n == 0 => {}
            Err(i) => v.insert(i, (mode, n)),
        }
        Self(v)
    }

    /// Splits into the part on `keep` and the remainder.
    pub fn split(&self, keep: &BTreeSet<ModeId>) -> (Self, Self) {
        let (kept, rest): (Vec<_>, Vec<_>) = self.0.iter().partition(|(m, _)| keep.contains(m));
        (Self(kept), Self(rest))
    }

    /// Concatenates two vectors on disjoint modes.
    pub fn merge(&self, other: &Self) -> Self {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        v.sort_unstable_by_key(|&(m, _)| m);
        Self(v)
    }
}

impl fmt::Display for OccupationVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "|vac>");
        }
        write!(f, "|")?;
        for (i, (m, n)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}:{n}")?;
        }
        write!(f, ">")
    }
}

/// Superposition of occupation vectors with complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: BTreeSet<ModeId>,
    amplitudes: BTreeMap<OccupationVector, Complex64>,
    prune_threshold: f64,
}

impl FockState {
    /// The vacuum on the given modes.
    pub fn vacuum<I: IntoIterator<Item = ModeId>>(modes: I) -> Self {
        let mut amplitudes = BTreeMap::new();
        amplitudes.insert(OccupationVector::vacuum(), Complex64::new(1.0, 0.0));
        Self {
            modes: modes.into_iter().collect(),
            amplitudes,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }

    /// The zero vector on the given modes.
    pub fn zero<I: IntoIterator<Item = ModeId>>(modes: I) -> Self {
        Self {
            modes: modes.into_iter().collect(),
            amplitudes: BTreeMap::new(),
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }

    /// A single basis vector. Every occupied mode must be in `modes`.
    pub fn basis<I: IntoIterator<Item = ModeId>>(modes: I, occ: OccupationVector) -> Result<Self> {
        Self::from_terms(modes, [(occ, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms<I, T>(modes: I, terms: T) -> Result<Self>
    where
        I: IntoIterator<Item = ModeId>,
        T: IntoIterator<Item = (OccupationVector, Complex64)>,
    {
        let mut state = Self::zero(modes);
        for (occ, amp) in terms {
            if let Some(m) = occ.modes().find(|m| !state.modes.contains(m)) {
                return Err(Error::MissingMode(m));
            }
            *state.amplitudes.entry(occ).or_default() += amp;
        }
        state.prune();
        Ok(state)
    }

    /// `Σ_n amps[n] |n⟩` on one mode.
    pub fn single_mode(mode: ModeId, amps: &[Complex64]) -> Self {
        let terms = amps
            .iter()
            .enumerate()
            .map(|(n, &a)| (OccupationVector::from_pairs([(mode, n as u32)]), a));
        Self::from_terms([mode], terms).expect("single mode is in its own universe")
    }

    pub fn with_prune_threshold(mut self, threshold: f64) -> Self {
        self.prune_threshold = threshold;
        self.prune();
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune_threshold
    }

    /// Adds an empty mode to the universe (e.g. an unused splitter port).
    pub fn with_vacuum_mode(mut self, mode: ModeId) -> Self {
        self.modes.insert(mode);
        self
    }

    pub fn modes(&self) -> &BTreeSet<ModeId> {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationVector, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn amplitude(&self, occ: &OccupationVector) -> Complex64 {
        self.amplitudes.get(occ).copied().unwrap_or_default()
    }

    fn prune(&mut self) {
        let thr = self.prune_threshold;
        self.amplitudes.retain(|_, a| a.norm() >= thr);
    }

    fn rebuilt(
        &self,
        modes: BTreeSet<ModeId>,
        amplitudes: BTreeMap<OccupationVector, Complex64>,
    ) -> Self {
        let mut s = Self {
            modes,
            amplitudes,
            prune_threshold: self.prune_threshold,
        };
        s.prune();
        s
    }

    pub fn norm2(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &FockState) -> Complex64 {
        let (small, large, flip) = if self.len() <= other.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::default();
        for (occ, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(occ) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        acc
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let amps = self
            .amplitudes
            .iter()
            .map(|(o, a)| (o.clone(), a * factor))
            .collect();
        self.rebuilt(self.modes.clone(), amps)
    }

    /// `self + factor * other`; the universes are united.
    pub fn add_scaled(&self, other: &FockState, factor: Complex64) -> Self {
        let mut amps = self.amplitudes.clone();
        for (o, a) in &other.amplitudes {
            *amps.entry(o.clone()).or_default() += a * factor;
        }
        let modes = self.modes.union(&other.modes).copied().collect();
        self.rebuilt(modes, amps)
    }

    pub fn tensor(&self, other: &FockState) -> Result<Self> {
        if let Some(m) = self.modes.intersection(&other.modes).next() {
            return Err(Error::OverlappingModes(*m));
        }
        let mut amps = BTreeMap::new();
        for (o1, a1) in &self.amplitudes {
            for (o2, a2) in &other.amplitudes {
                amps.insert(o1.merge(o2), a1 * a2);
            }
        }
        let modes = self.modes.union(&other.modes).copied().collect();
        Ok(self.rebuilt(modes, amps))
    }

    /// Multiplies each term by `e^{i n φ}` with `n` the count in `mode`.
    pub fn apply_phase(&self, mode: ModeId, phi: f64) -> Self {
        let amps = self
            .amplitudes
            .iter()
            .map(|(o, a)| {
                let n = o.count(mode);
                let rot = if n == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, n as f64 * phi)
                };
                (o.clone(), a * rot)
            })
            .collect();
        self.rebuilt(self.modes.clone(), amps)
    }

    /// Bosonic lowering operator on `mode`; the result is generally subnormalized.
    pub fn apply_annihilation(&self, mode: ModeId) -> Self {
        let mut amps = BTreeMap::new();
        for (o, a) in &self.amplitudes {
            let n = o.count(mode);
            if n > 0 {
                amps.insert(o.with_count(mode, n - 1), a * (n as f64).sqrt());
            }
        }
        self.rebuilt(self.modes.clone(), amps)
    }

    /// Symmetric 50:50 splitter from `(in1, in2)` onto `(out1, out2)`.
    ///
    /// Input modes must belong to the universe (declare unused ports with
    /// [`with_vacuum_mode`](Self::with_vacuum_mode)); output modes must be
    /// fresh or coincide with an input mode.
    pub fn apply_beamsplitter(
        &self,
        in1: ModeId,
        in2: ModeId,
        out1: ModeId,
        out2: ModeId,
    ) -> Result<Self> {
        for m in [in1, in2] {
            if !self.modes.contains(&m) {
                return Err(Error::MissingMode(m));
            }
        }
        if in1 == in2 {
            return Err(Error::RelabelCollision(in1));
        }
        if out1 == out2 {
            return Err(Error::RelabelCollision(out1));
        }
        for m in [out1, out2] {
            if m != in1 && m != in2 && self.modes.contains(&m) {
                return Err(Error::OccupiedOutput(m));
            }
        }

        let mut amps: BTreeMap<OccupationVector, Complex64> = BTreeMap::new();
        for (occ, amp) in &self.amplitudes {
            let n1 = occ.count(in1);
            let n2 = occ.count(in2);
            let rest = occ.with_count(in1, 0).with_count(in2, 0);
            for (m, c) in split_coefficients(n1, n2) {
                let out = rest.with_count(out1, m).with_count(out2, n1 + n2 - m);
                *amps.entry(out).or_default() += amp * c;
            }
        }

        let mut modes = self.modes.clone();
        modes.remove(&in1);
        modes.remove(&in2);
        modes.insert(out1);
        modes.insert(out2);
        Ok(self.rebuilt(modes, amps))
    }

    /// Renames modes. `f` must be injective on the universe.
    pub fn relabel<F: Fn(ModeId) -> ModeId>(&self, f: F) -> Result<Self> {
        let mut modes = BTreeSet::new();
        for &m in &self.modes {
            let target = f(m);
            if !modes.insert(target) {
                return Err(Error::RelabelCollision(target));
            }
        }
        let amps = self
            .amplitudes
            .iter()
            .map(|(o, a)| {
                (
                    OccupationVector::from_pairs(o.iter().map(|(m, n)| (f(m), n))),
                    *a,
                )
            })
            .collect();
        Ok(self.rebuilt(modes, amps))
    }

    /// Partial trace onto `keep`.
    ///
    /// The basis of the result lists every kept occupation pattern that
    /// appears in the state, sorted. Kept modes outside the universe are
    /// rejected.
    pub fn reduced_density(&self, keep: &BTreeSet<ModeId>) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyKeep);
        }
        if let Some(m) = keep.iter().find(|m| !self.modes.contains(m)) {
            return Err(Error::MissingMode(*m));
        }

        let mut groups: BTreeMap<OccupationVector, Vec<(OccupationVector, Complex64)>> =
            BTreeMap::new();
        let mut basis_set = BTreeSet::new();
        for (occ, amp) in &self.amplitudes {
            let (kept, rest) = occ.split(keep);
            basis_set.insert(kept.clone());
            groups.entry(rest).or_default().push((kept, *amp));
        }

        let basis: Vec<OccupationVector> = basis_set.into_iter().collect();
        let index: BTreeMap<&OccupationVector, usize> =
            basis.iter().enumerate().map(|(i, o)| (o, i)).collect();
        let dim = basis.len();
        let mut entries = vec![Complex64::default(); dim * dim];
        for members in groups.values() {
            for (ki, ai) in members {
                let i = index[ki];
                for (kj, aj) in members {
                    entries[i * dim + index[kj]] += ai * aj.conj();
                }
            }
        }
        Ok(DensityMatrix { basis, entries })
    }
}

/// Output distribution of `|n1, n2⟩` through the symmetric splitter:
/// pairs `(m, c)` meaning amplitude `c` on `|m, n1 + n2 − m⟩`.
pub(crate) fn split_coefficients(n1: u32, n2: u32) -> Vec<(u32, f64)> {
    let total = n1 + n2;
    let norm = (2f64).powf(total as f64 / 2.0) * (factorial(n1) * factorial(n2)).sqrt();
    let mut coeffs = vec![0.0; total as usize + 1];
    for k in 0..=n1 {
        for l in 0..=n2 {
            let sign = if (n2 - l).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            coeffs[(k + l) as usize] += sign * binomial(n1, k) * binomial(n2, l);
        }
    }
    coeffs
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c != 0.0)
        .map(|(m, c)| {
            let m = m as u32;
            (m, c * (factorial(m) * factorial(total - m)).sqrt() / norm)
        })
        .collect()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Dense density matrix over an explicit occupation basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    basis: Vec<OccupationVector>,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[OccupationVector] {
        &self.basis
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim() + j]
    }

    fn index_of(&self, occ: &OccupationVector) -> Option<usize> {
        self.basis.binary_search(occ).ok()
    }

    /// `⟨a|ρ|b⟩`; zero for patterns outside the basis.
    pub fn element(&self, a: &OccupationVector, b: &OccupationVector) -> Complex64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.get(i, j),
            _ => Complex64::default(),
        }
    }

    pub fn population(&self, occ: &OccupationVector) -> f64 {
        self.element(occ, occ).re
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i).re).sum()
    }

    pub fn diagonal(&self) -> impl Iterator<Item = (&OccupationVector, f64)> + '_ {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, o)| (o, self.get(i, i).re))
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}
