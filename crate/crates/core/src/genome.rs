//! Activation-function strings and the two genetic operators acting on them.
//!
//! Positions are 1-based in the public operator API (`mutate` point `j` in
//! `1..=n`, `crossover` point `k` in `2..=n-1`), matching how the operators
//! are usually written down; storage is an ordinary 0-based vector.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::activation::Activation;
use crate::error::{Error, Result};

/// Ordered set of candidate activations (`m` = its size).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSet(Vec<Activation>);

impl FunctionSet {
    pub fn new(functions: Vec<Activation>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Config("function set is empty".into()));
        }
        for (i, f) in functions.iter().enumerate() {
            if functions[..i].contains(f) {
                return Err(Error::Config(alloc::format!("duplicate function {f}")));
            }
        }
        Ok(Self(functions))
    }

    /// RELU, SIG, TANH, ELU.
    pub fn standard() -> Self {
        Self(Activation::ALL.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Activation] {
        &self.0
    }

    pub fn position(&self, f: Activation) -> Option<usize> {
        self.0.iter().position(|&g| g == f)
    }
}

impl Default for FunctionSet {
    fn default() -> Self {
        Self::standard()
    }
}

impl Serialize for FunctionSet {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let v = Vec::<Activation>::deserialize(d)?;
        FunctionSet::new(v).map_err(serde::de::Error::custom)
    }
}

/// Per-conv-layer activation assignment, `[g1 g2 ... gn]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome(Vec<Activation>);

impl Genome {
    pub fn new(genes: Vec<Activation>) -> Result<Self> {
        if genes.is_empty() {
            return Err(Error::GenomeArity {
                expected: 1,
                found: 0,
            });
        }
        Ok(Self(genes))
    }

    pub fn uniform(f: Activation, n: usize) -> Result<Self> {
        Self::new(alloc::vec![f; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn genes(&self) -> &[Activation] {
        &self.0
    }

    /// True when every layer uses the same function (a traditional CNN).
    pub fn is_single_function(&self) -> bool {
        self.0.iter().all(|&g| g == self.0[0])
    }

    pub fn hamming(&self, other: &Genome) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }

    /// Hyphenated form, e.g. `RELU-SIG-TANH-ELU`.
    pub fn to_hyphenated(&self) -> String {
        let mut s = String::new();
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                s.push('-');
            }
            s.push_str(g.name());
        }
        s
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hyphenated())
    }
}

impl FromStr for Genome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let genes = s
            .split(['-', ','])
            .filter(|t| !t.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        Genome::new(genes)
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hyphenated())
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Draws each of the `n` genes independently and uniformly from `set`.
pub fn random_genome<R: Rng + ?Sized>(n: usize, set: &FunctionSet, rng: &mut R) -> Result<Genome> {
    if n == 0 {
        return Err(Error::GenomeArity {
            expected: 1,
            found: 0,
        });
    }
    let fs = set.as_slice();
    let genes = (0..n).map(|_| fs[rng.random_range(0..fs.len())]).collect();
    Ok(Genome(genes))
}

/// Replaces gene `j` (1-based) with a function drawn uniformly from the set
/// minus the current gene. The input is left untouched.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    j: usize,
    set: &FunctionSet,
    rng: &mut R,
) -> Result<Genome> {
    let n = genome.len();
    if j == 0 || j > n {
        return Err(Error::Index { index: j, len: n });
    }
    let current = genome.0[j - 1];
    let choices: Vec<Activation> = set
        .as_slice()
        .iter()
        .copied()
        .filter(|&f| f != current)
        .collect();
    if choices.is_empty() {
        return Err(Error::Config(alloc::format!(
            "no alternative to {current} in a function set of size {}",
            set.len()
        )));
    }
    let mut out = genome.clone();
    out.0[j - 1] = choices[rng.random_range(0..choices.len())];
    Ok(out)
}

/// One-point crossover at `k` (1-based, `2 <= k <= n-1`):
/// `a[1..k] ++ b[k+1..n]` and `b[1..k] ++ a[k+1..n]`.
pub fn crossover(a: &Genome, b: &Genome, k: usize) -> Result<(Genome, Genome)> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::Crossover(alloc::format!(
            "parent lengths differ ({n} vs {})",
            b.len()
        )));
    }
    if n < 3 || k < 2 || k > n - 1 {
        return Err(Error::Crossover(alloc::format!(
            "point {k} outside 2..={} for length {n}",
            n.saturating_sub(1)
        )));
    }
    let mut c1 = a.0[..k].to_vec();
    c1.extend_from_slice(&b.0[k..]);
    let mut c2 = b.0[..k].to_vec();
    c2.extend_from_slice(&a.0[k..]);
    Ok((Genome(c1), Genome(c2)))
}

/// Counts of all genomes (`m^n`), multi-function ones (`m^n - m`) and
/// single-function ones (`m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub total: u128,
    pub multi_function: u128,
    pub single_function: u128,
}

pub fn search_space_size(n: usize, m: usize) -> Result<SearchSpace> {
    if n == 0 {
        return Err(Error::Domain("genome length must be >= 1".into()));
    }
    if m == 0 {
        return Err(Error::Domain("function set size must be >= 1".into()));
    }
    let exp = u32::try_from(n).map_err(|_| Error::Unrepresentable { n, m })?;
    let total = (m as u128)
        .checked_pow(exp)
        .ok_or(Error::Unrepresentable { n, m })?;
    Ok(SearchSpace {
        total,
        multi_function: total - m as u128,
        single_function: m as u128,
    })
}

/// Decodes `index` (in `0..m^n`) as the `index`-th genome in lexicographic
/// order over the set's ordering, first position most significant.
pub fn genome_at(index: u128, n: usize, set: &FunctionSet) -> Genome {
    let m = set.len() as u128;
    let mut genes = alloc::vec![set.as_slice()[0]; n];
    let mut rest = index;
    for slot in genes.iter_mut().rev() {
        *slot = set.as_slice()[(rest % m) as usize];
        rest /= m;
    }
    Genome(genes)
}
