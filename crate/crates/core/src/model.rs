//! Model specifications, block partitions, disorder realizations and exact
//! Hamiltonians.
//!
//! A configuration of `N` spins is split into `n` consecutive blocks of
//! `k(1,N), ..., k(n,N)` spins. Each disorder index `s` is a tuple of block
//! labels; the variable attached to `s` for a configuration is looked up by the
//! projection `sigma(s)`, the concatenation of the named blocks. Configurations
//! that agree on those blocks read the same entry, which is how GREM and BKM
//! disorder is correlated.
//!
//! Block labels are 0-based inside the crate and 1-based in documents and
//! error messages.

use rayon::prelude::*;

use crate::disorder::DisorderFamily;
use crate::error::{Error, Result};
use crate::seed;

/// Largest number of blocks accepted; constraint checks enumerate all `2^n - 1`
/// block subsets.
pub const MAX_BLOCKS: usize = 8;

/// Upper bound on the total number of sampled disorder variables.
pub const MAX_TABLE_ENTRIES: f64 = (1u64 << 30) as f64;

const SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rem,
    Grem,
    Bkm,
    ExternalField,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Rem => "REM",
            Variant::Grem => "GREM",
            Variant::Bkm => "BKM",
            Variant::ExternalField => "ExternalField",
        }
    }
}

/// One disorder index `s` with its weight `a_s` and family `lambda^s_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexTerm {
    blocks: Vec<usize>,
    weight: f64,
    family: DisorderFamily,
}

impl IndexTerm {
    /// `blocks` are 0-based block labels in the order they are concatenated.
    pub fn new(blocks: Vec<usize>, weight: f64, family: DisorderFamily) -> Self {
        IndexTerm { blocks, weight, family }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn family(&self) -> &DisorderFamily {
        &self.family
    }

    /// Bitmask of the blocks named by the index.
    pub fn mask(&self) -> u32 {
        self.blocks.iter().fold(0, |m, &b| m | (1 << b))
    }

    /// 1-based display form, e.g. `(1,3)`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.blocks.iter().map(|b| (b + 1).to_string()).collect();
        format!("({})", parts.join(","))
    }
}

/// Validated model specification.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    variant: Variant,
    proportions: Vec<f64>,
    branching: u32,
    terms: Vec<IndexTerm>,
    field: f64,
}

impl ModelSpec {
    /// Checks every structural invariant and builds the spec.
    pub fn new(
        variant: Variant,
        proportions: Vec<f64>,
        branching: u32,
        terms: Vec<IndexTerm>,
        field: f64,
    ) -> Result<Self> {
        let n = proportions.len();
        if n == 0 {
            return Err(Error::Model("p must not be empty".into()));
        }
        if n > MAX_BLOCKS {
            return Err(Error::Model(format!("at most {MAX_BLOCKS} blocks are supported, got {n}")));
        }
        if proportions.iter().any(|p| !p.is_finite()) {
            return Err(Error::Model("p must be finite".into()));
        }
        if proportions.iter().any(|&p| p <= 0.0) {
            return Err(Error::Model(
                "p must be strictly positive (blocks with p_j = 0 are not supported)".into(),
            ));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::Model(format!("p must sum to 1 (sum is {total})")));
        }
        if branching < 2 {
            return Err(Error::Model(format!("branching factor b must be >= 2, got {branching}")));
        }
        if terms.is_empty() {
            return Err(Error::Model("index set must be non-empty".into()));
        }
        for t in &terms {
            if t.blocks.is_empty() {
                return Err(Error::Model("indices must be non-empty".into()));
            }
            if let Some(&b) = t.blocks.iter().find(|&&b| b >= n) {
                return Err(Error::Model(format!(
                    "index {} names block {} but the model has {n} blocks",
                    t.label(),
                    b + 1
                )));
            }
            if t.mask().count_ones() as usize != t.blocks.len() {
                return Err(Error::Model(format!("index {} repeats a block", t.label())));
            }
            if !t.weight.is_finite() || t.weight < 0.0 {
                return Err(Error::Model(format!(
                    "weights must be finite and non-negative (index {} has {})",
                    t.label(),
                    t.weight
                )));
            }
            if t.family.rate(0.0) != 0.0 {
                return Err(Error::Model(format!("family of index {} must have rate(0) = 0", t.label())));
            }
        }
        for (i, a) in terms.iter().enumerate() {
            if terms[..i].iter().any(|b| b.blocks == a.blocks) {
                return Err(Error::Model(format!("index {} appears twice", a.label())));
            }
        }
        if !field.is_finite() || field < 0.0 {
            return Err(Error::Model(format!("field h must be finite and non-negative, got {field}")));
        }
        match variant {
            Variant::Rem => {
                if n != 1 {
                    return Err(Error::Model("REM has exactly one block (p = [1.0])".into()));
                }
                if terms.len() != 1 {
                    return Err(Error::Model("REM has exactly one index [1]".into()));
                }
            }
            Variant::Grem => {
                let chain = terms.len() == n
                    && terms.iter().enumerate().all(|(j, t)| t.blocks == (0..=j).collect::<Vec<_>>());
                if !chain {
                    return Err(Error::Model("GREM indices must form the chain [1], [1,2], ..., [1..n]".into()));
                }
            }
            Variant::Bkm => {
                if let Some(t) = terms.iter().find(|t| t.blocks.windows(2).any(|w| w[0] >= w[1])) {
                    return Err(Error::Model(format!(
                        "BKM indices are subsets and must be listed in increasing order (got {})",
                        t.label()
                    )));
                }
            }
            Variant::ExternalField => {
                if branching != 2 {
                    return Err(Error::Model("ExternalField requires b = 2".into()));
                }
            }
        }
        if variant != Variant::ExternalField && field != 0.0 {
            return Err(Error::Model(format!("field h is only allowed for ExternalField ({} has h = {field})", variant.name())));
        }
        Ok(ModelSpec { variant, proportions, branching, terms, field })
    }

    /// REM with a single weight-one index.
    pub fn rem(family: DisorderFamily) -> Self {
        Self::rem_with(family, 2, 1.0).expect("valid REM")
    }

    pub fn rem_with(family: DisorderFamily, branching: u32, weight: f64) -> Result<Self> {
        Self::new(Variant::Rem, vec![1.0], branching, vec![IndexTerm::new(vec![0], weight, family)], 0.0)
    }

    /// GREM from per-level `(weight, family)` pairs.
    pub fn grem(proportions: Vec<f64>, levels: Vec<(f64, DisorderFamily)>, branching: u32) -> Result<Self> {
        let terms = levels
            .into_iter()
            .enumerate()
            .map(|(j, (w, f))| IndexTerm::new((0..=j).collect(), w, f))
            .collect();
        Self::new(Variant::Grem, proportions, branching, terms, 0.0)
    }

    pub fn bkm(proportions: Vec<f64>, terms: Vec<IndexTerm>, branching: u32) -> Result<Self> {
        Self::new(Variant::Bkm, proportions, branching, terms, 0.0)
    }

    pub fn external_field(proportions: Vec<f64>, terms: Vec<IndexTerm>, field: f64) -> Result<Self> {
        Self::new(Variant::ExternalField, proportions, 2, terms, field)
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn n_blocks(&self) -> usize {
        self.proportions.len()
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn branching(&self) -> u32 {
        self.branching
    }

    pub fn terms(&self) -> &[IndexTerm] {
        &self.terms
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    /// Whether block magnetizations `sigma_bar_i / N` are part of the
    /// coordinate space (and of the Hamiltonian).
    pub fn has_magnetizations(&self) -> bool {
        self.variant == Variant::ExternalField
    }

    /// Dimension of the coordinate space: one per index, plus one per block
    /// for external-field models.
    pub fn coordinate_dim(&self) -> usize {
        self.terms.len() + if self.has_magnetizations() { self.n_blocks() } else { 0 }
    }

    /// Capacity `log b * sum_{i in A} p_i` of the block subset `A` (bitmask).
    pub fn capacity(&self, mask: u32) -> f64 {
        let s: f64 = (0..self.n_blocks()).filter(|i| mask & (1 << i) != 0).map(|i| self.proportions[i]).sum();
        s * (self.branching as f64).ln()
    }
}

/// Integer split of `N` spins into blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    n_spins: u32,
    sizes: Vec<u32>,
}

impl BlockPartition {
    pub fn n_spins(&self) -> u32 {
        self.n_spins
    }

    pub fn sizes(&self) -> &[u32] {
        &self.sizes
    }

    /// Total spins in the blocks of `mask`.
    pub fn size_of(&self, mask: u32) -> u32 {
        self.sizes.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &k)| k).sum()
    }
}

/// Largest-remainder apportionment of `n_spins` among the proportions, ties
/// broken towards the lowest block index. Blocks left empty receive one spin
/// from the most over-allocated block holding at least two.
pub fn block_partition(spec: &ModelSpec, n_spins: u32) -> Result<BlockPartition> {
    let p = spec.proportions();
    let n = p.len();
    if (n_spins as usize) < n {
        return Err(Error::Argument(format!("N = {n_spins} is smaller than the number of blocks ({n})")));
    }
    let nf = n_spins as f64;
    let quotas: Vec<f64> = p.iter().map(|&pj| pj * nf).collect();
    let mut sizes: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = sizes.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among equal remainders
    order.sort_by(|&i, &j| {
        let ri = quotas[i] - quotas[i].floor();
        let rj = quotas[j] - quotas[j].floor();
        rj.partial_cmp(&ri).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut left = n_spins.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    while let Some(empty) = sizes.iter().position(|&k| k == 0) {
        let donor = (0..n)
            .filter(|&i| sizes[i] >= 2)
            .max_by(|&i, &j| {
                let di = sizes[i] as f64 - quotas[i];
                let dj = sizes[j] as f64 - quotas[j];
                // on ties prefer the lower index
                di.partial_cmp(&dj).unwrap_or(std::cmp::Ordering::Equal).then(j.cmp(&i))
            })
            .expect("N >= n leaves a block with two spins");
        sizes[donor] -= 1;
        sizes[empty] = 1;
    }
    Ok(BlockPartition { n_spins, sizes })
}

/// One configuration, stored block by block as base-`b` integers.
///
/// For `b = 2` digit 0 is spin `+1` and digit 1 is spin `-1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    branching: u32,
    sizes: Vec<u32>,
    blocks: Vec<u64>,
}

impl Configuration {
    /// Decodes configuration number `index` in `[0, b^N)`; block 1 holds
    /// the most significant digits.
    pub fn from_index(partition: &BlockPartition, branching: u32, index: u64) -> Result<Self> {
        let b = branching as u64;
        let total = (b as f64).powi(partition.n_spins as i32);
        if index as f64 >= total {
            return Err(Error::Argument(format!("configuration index {index} out of range")));
        }
        let mut rest = index;
        let mut blocks = vec![0u64; partition.sizes.len()];
        for (j, &k) in partition.sizes.iter().enumerate().rev() {
            let radix = b.pow(k);
            blocks[j] = rest % radix;
            rest /= radix;
        }
        Ok(Configuration { branching, sizes: partition.sizes.clone(), blocks })
    }

    /// Builds a binary configuration from `+1/-1` spins.
    pub fn from_spins(partition: &BlockPartition, spins: &[i8]) -> Result<Self> {
        if spins.len() != partition.n_spins as usize {
            return Err(Error::Argument(format!("expected {} spins, got {}", partition.n_spins, spins.len())));
        }
        let mut blocks = Vec::with_capacity(partition.sizes.len());
        let mut it = spins.iter();
        for &k in &partition.sizes {
            let mut v = 0u64;
            for _ in 0..k {
                let bit = match it.next() {
                    Some(1) => 0,
                    Some(-1) => 1,
                    _ => return Err(Error::Argument("spins must be +1 or -1".into())),
                };
                v = (v << 1) | bit;
            }
            blocks.push(v);
        }
        Ok(Configuration { branching: 2, sizes: partition.sizes.clone(), blocks })
    }

    /// Block values as base-`b` integers.
    pub fn block_values(&self) -> &[u64] {
        &self.blocks
    }

    /// Spins `+1/-1` in order (binary configurations only).
    pub fn spins(&self) -> Option<Vec<i8>> {
        if self.branching != 2 {
            return None;
        }
        let mut out = Vec::new();
        for (&v, &k) in self.blocks.iter().zip(&self.sizes) {
            for bit in (0..k).rev() {
                out.push(if (v >> bit) & 1 == 0 { 1 } else { -1 });
            }
        }
        Some(out)
    }

    /// Block sums `sigma_bar_i` (binary configurations only).
    pub fn block_sums(&self) -> Option<Vec<i64>> {
        if self.branching != 2 {
            return None;
        }
        Some(
            self.blocks
                .iter()
                .zip(&self.sizes)
                .map(|(&v, &k)| k as i64 - 2 * v.count_ones() as i64)
                .collect(),
        )
    }

    /// Projection key `sigma(s)` of the index with the given blocks.
    pub fn projection_key(&self, blocks: &[usize]) -> u64 {
        let b = self.branching as u64;
        blocks.iter().fold(0u64, |key, &j| key * b.pow(self.sizes[j]) + self.blocks[j])
    }
}

/// Sampled disorder for one `N`: one table per index, of length `b^{k(s,N)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    partition: BlockPartition,
    branching: u32,
    seed: u64,
    index_blocks: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
}

impl Realization {
    pub fn n_spins(&self) -> u32 {
        self.partition.n_spins
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tables(&self) -> &[Vec<f64>] {
        &self.tables
    }

    pub fn table(&self, index: usize) -> &[f64] {
        &self.tables[index]
    }

    /// Total number of sampled variables.
    pub fn len(&self) -> usize {
        self.tables.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Errors unless this realization was sampled for `spec`'s index set.
    pub fn check_compatible(&self, spec: &ModelSpec) -> Result<()> {
        if spec.branching() != self.branching
            || spec.n_blocks() != self.partition.sizes.len()
            || spec.terms().len() != self.index_blocks.len()
            || spec.terms().iter().zip(&self.index_blocks).any(|(t, b)| t.blocks() != b.as_slice())
        {
            return Err(Error::Mismatch("realization was sampled for a different model".into()));
        }
        Ok(())
    }
}

/// Draws one independent variable per `(index, projection)` pair from the
/// index's family at size `N`. Deterministic in `seed`; see [`crate::seed`]
/// for the stream layout.
pub fn sample_disorder(spec: &ModelSpec, n_spins: u32, seed: u64) -> Result<Realization> {
    let partition = block_partition(spec, n_spins)?;
    let b = spec.branching() as f64;
    let entries: f64 = spec
        .terms()
        .iter()
        .map(|t| b.powi(partition.size_of(t.mask()) as i32))
        .sum();
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::TooLarge { entries });
    }
    let tables = spec
        .terms()
        .iter()
        .map(|t| {
            let len = (spec.branching() as usize).pow(partition.size_of(t.mask()));
            let ih = seed::index_hash(t.blocks());
            let mut table = vec![0.0; len];
            table.par_chunks_mut(1 << 14).enumerate().for_each(|(c, chunk)| {
                let base = (c << 14) as u64;
                for (off, v) in chunk.iter_mut().enumerate() {
                    let mut rng = seed::stream(seed, ih, n_spins, base + off as u64);
                    *v = t.family().sample(n_spins, &mut rng);
                }
            });
            table
        })
        .collect();
    Ok(Realization {
        partition,
        branching: spec.branching(),
        seed,
        index_blocks: spec.terms().iter().map(|t| t.blocks().to_vec()).collect(),
        tables,
    })
}

/// `H_N(sigma) = N sum_s a_s xi(s, sigma(s)) + h sigma_bar`.
pub fn hamiltonian(spec: &ModelSpec, realization: &Realization, config: &Configuration) -> Result<f64> {
    realization.check_compatible(spec)?;
    if config.sizes != realization.partition.sizes || config.branching != spec.branching() {
        return Err(Error::Mismatch("configuration does not match the realization's partition".into()));
    }
    let mut lin = 0.0;
    for (t, table) in spec.terms().iter().zip(&realization.tables) {
        lin += t.weight() * table[config.projection_key(t.blocks()) as usize];
    }
    let mut energy = realization.n_spins() as f64 * lin;
    if spec.has_magnetizations() {
        let total: i64 = config.block_sums().expect("binary").iter().sum();
        energy += spec.field() * total as f64;
    }
    Ok(energy)
}

/// If every positively weighted index of a BKM spec lies on the chain
/// `{1}, {1,2}, ..., {1..n}`, the equivalent GREM. Zero-weight indices are
/// dropped; chain levels missing from the BKM get weight 0 and borrow the
/// family of the nearest present chain level (the family of a zero-weight
/// level never enters the Hamiltonian).
pub fn reduce_to_chain(bkm: &ModelSpec) -> Option<ModelSpec> {
    if bkm.variant() != Variant::Bkm {
        return None;
    }
    let n = bkm.n_blocks();
    let chain: Vec<Vec<usize>> = (0..n).map(|j| (0..=j).collect()).collect();
    let on_chain = |t: &IndexTerm| chain.iter().any(|c| c.as_slice() == t.blocks());
    if bkm.terms().iter().any(|t| t.weight() > 0.0 && !on_chain(t)) {
        return None;
    }
    let present: Vec<Option<&IndexTerm>> = chain
        .iter()
        .map(|c| bkm.terms().iter().find(|t| t.blocks() == c.as_slice()))
        .collect();
    let fallback = bkm
        .terms()
        .iter()
        .find(|t| t.weight() > 0.0)
        .unwrap_or(&bkm.terms()[0])
        .family()
        .clone();
    let levels = (0..n)
        .map(|j| match present[j] {
            Some(t) => (t.weight(), t.family().clone()),
            None => {
                let near = (0..n)
                    .filter_map(|i| present[i].map(|t| (i.abs_diff(j), t)))
                    .min_by_key(|(d, _)| *d)
                    .map(|(_, t)| t.family().clone())
                    .unwrap_or_else(|| fallback.clone());
                (0.0, near)
            }
        })
        .collect();
    ModelSpec::grem(bkm.proportions().to_vec(), levels, bkm.branching()).ok()
}
