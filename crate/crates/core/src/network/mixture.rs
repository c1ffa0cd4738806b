//! Sparse density operator used by the forward route once modes start being
//! traced out.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{split_coefficients, FockState, ModeId, OccupationVector};

type Entries = BTreeMap<(OccupationVector, OccupationVector), Complex64>;

#[derive(Debug, Clone)]
pub(crate) struct Mixture {
    modes: BTreeSet<ModeId>,
    entries: Entries,
}

impl Mixture {
    /// The empty product: no modes, unit trace.
    pub fn unit() -> Self {
        let vac = OccupationVector::vacuum();
        Self {
            modes: BTreeSet::new(),
            entries: [((vac.clone(), vac), Complex64::new(1.0, 0.0))].into(),
        }
    }

    pub fn modes(&self) -> &BTreeSet<ModeId> {
        &self.modes
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `ρ ⊗ |ψ⟩⟨ψ|` for a pure state on fresh modes.
    pub fn tensor_pure(&self, state: &FockState) -> Result<Self> {
        if let Some(&m) = self.modes.intersection(state.modes()).next() {
            return Err(Error::OverlappingModes(m));
        }
        let mut entries = Entries::new();
        for ((ket, bra), value) in &self.entries {
            for (ko, ka) in state.iter() {
                for (bo, ba) in state.iter() {
                    entries.insert((ket.merge(ko), bra.merge(bo)), value * ka * ba.conj());
                }
            }
        }
        let modes = self.modes.union(state.modes()).copied().collect();
        Ok(Self { modes, entries })
    }

    /// `ρ ⊗ σ`, keeping only entries whose ket and bra photon numbers differ
    /// by at most `slack`.
    ///
    /// Splitters, phases and partial traces all preserve that difference, so
    /// once every input mode is present only balanced entries can reach the
    /// diagonal.
    pub fn tensor(&self, other: &Mixture, slack: u32) -> Result<Self> {
        if let Some(&m) = self.modes.intersection(&other.modes).next() {
            return Err(Error::OverlappingModes(m));
        }
        let imbalance = |k: &OccupationVector, b: &OccupationVector| {
            i64::from(k.total()) - i64::from(b.total())
        };
        let mut entries = Entries::new();
        for ((k1, b1), v1) in &self.entries {
            let d1 = imbalance(k1, b1);
            for ((k2, b2), v2) in &other.entries {
                if (d1 + imbalance(k2, b2)).unsigned_abs() <= u64::from(slack) {
                    entries.insert((k1.merge(k2), b1.merge(b2)), v1 * v2);
                }
            }
        }
        let modes = self.modes.union(&other.modes).copied().collect();
        Ok(Self { modes, entries })
    }

    pub fn with_vacuum_mode(mut self, mode: ModeId) -> Self {
        self.modes.insert(mode);
        self
    }

    /// `ρ → L ρ L†` where `L` maps each basis pattern to `image(pattern)`.
    fn map_patterns<F>(&self, modes: BTreeSet<ModeId>, image: F) -> Self
    where
        F: Fn(&OccupationVector) -> Vec<(OccupationVector, Complex64)>,
    {
        let mut images: HashMap<&OccupationVector, Vec<(OccupationVector, Complex64)>> =
            HashMap::new();
        for (ket, bra) in self.entries.keys() {
            for occ in [ket, bra] {
                images.entry(occ).or_insert_with(|| image(occ));
            }
        }
        let mut entries = Entries::new();
        for ((ket, bra), value) in &self.entries {
            for (ko, ka) in &images[ket] {
                for (bo, ba) in &images[bra] {
                    *entries.entry((ko.clone(), bo.clone())).or_default() += value * ka * ba.conj();
                }
            }
        }
        entries.retain(|_, v| v.norm() > 0.0);
        Self { modes, entries }
    }

    /// Symmetric splitter with the same convention as
    /// [`FockState::apply_beamsplitter`].
    pub fn beamsplitter(
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
        for m in [out1, out2] {
            if m != in1 && m != in2 && self.modes.contains(&m) {
                return Err(Error::OccupiedOutput(m));
            }
        }
        let mut modes = self.modes.clone();
        modes.remove(&in1);
        modes.remove(&in2);
        modes.insert(out1);
        modes.insert(out2);
        Ok(self.map_patterns(modes, |occ| {
            let (n1, n2) = (occ.count(in1), occ.count(in2));
            let rest = occ.with_count(in1, 0).with_count(in2, 0);
            split_coefficients(n1, n2)
                .into_iter()
                .map(|(m, c)| {
                    let out = rest.with_count(out1, m).with_count(out2, n1 + n2 - m);
                    (out, Complex64::new(c, 0.0))
                })
                .collect()
        }))
    }

    /// `e^{i n φ}` on `mode`.
    pub fn phase(mut self, mode: ModeId, phi: f64) -> Self {
        for ((ket, bra), value) in self.entries.iter_mut() {
            let dn = f64::from(ket.count(mode)) - f64::from(bra.count(mode));
            if dn != 0.0 {
                *value *= Complex64::from_polar(1.0, dn * phi);
            }
        }
        self
    }

    /// Renames `from` to the fresh mode `to`.
    pub fn relabel(&self, from: ModeId, to: ModeId) -> Result<Self> {
        if !self.modes.contains(&from) {
            return Err(Error::MissingMode(from));
        }
        if self.modes.contains(&to) {
            return Err(Error::RelabelCollision(to));
        }
        let rename = |o: &OccupationVector| o.with_count(from, 0).with_count(to, o.count(from));
        let entries = self
            .entries
            .iter()
            .map(|((k, b), v)| ((rename(k), rename(b)), *v))
            .collect();
        let mut modes = self.modes.clone();
        modes.remove(&from);
        modes.insert(to);
        Ok(Self { modes, entries })
    }

    /// `a ρ a†` for the lowering operator on `mode`.
    pub fn annihilate(&self, mode: ModeId) -> Self {
        let mut entries = Entries::new();
        for ((ket, bra), value) in &self.entries {
            let (nk, nb) = (ket.count(mode), bra.count(mode));
            if nk > 0 && nb > 0 {
                let key = (ket.with_count(mode, nk - 1), bra.with_count(mode, nb - 1));
                *entries.entry(key).or_default() += value * (f64::from(nk) * f64::from(nb)).sqrt();
            }
        }
        Self {
            modes: self.modes.clone(),
            entries,
        }
    }

    pub fn trace_out(&self, mode: ModeId) -> Self {
        let mut entries = Entries::new();
        for ((ket, bra), value) in &self.entries {
            if ket.count(mode) == bra.count(mode) {
                let key = (ket.with_count(mode, 0), bra.with_count(mode, 0));
                *entries.entry(key).or_default() += value;
            }
        }
        let mut modes = self.modes.clone();
        modes.remove(&mode);
        Self { modes, entries }
    }

    pub fn trace(&self) -> f64 {
        self.entries
            .iter()
            .filter(|((k, b), _)| k == b)
            .map(|(_, v)| v.re)
            .sum()
    }

    #[cfg(test)]
    pub fn population(&self, occ: &OccupationVector) -> f64 {
        self.entries
            .get(&(occ.clone(), occ.clone()))
            .map_or(0.0, |v| v.re)
    }
}
