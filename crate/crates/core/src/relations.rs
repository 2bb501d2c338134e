//! The RCC-5 relation algebra.
//!
//! Five base relations hold between two nonempty sets: congruence (`==`),
//! proper inclusion (`<`), inverse proper inclusion (`>`), overlap (`><`)
//! and exclusion (`!`). A [`RelationMask`] is a disjunction of base relations
//! packed into five bits with the fixed order `==, <, >, ><, !`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseRelation {
    Equals,
    IsIncludedIn,
    Includes,
    Overlaps,
    Disjoint,
}

impl BaseRelation {
    /// All base relations in canonical bit order.
    pub const ALL: [BaseRelation; 5] = [
        BaseRelation::Equals,
        BaseRelation::IsIncludedIn,
        BaseRelation::Includes,
        BaseRelation::Overlaps,
        BaseRelation::Disjoint,
    ];

    pub const fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub const fn converse(self) -> Self {
        match self {
            BaseRelation::IsIncludedIn => BaseRelation::Includes,
            BaseRelation::Includes => BaseRelation::IsIncludedIn,
            other => other,
        }
    }

    pub const fn long_name(self) -> &'static str {
        match self {
            BaseRelation::Equals => "equals",
            BaseRelation::IsIncludedIn => "is_included_in",
            BaseRelation::Includes => "includes",
            BaseRelation::Overlaps => "overlaps",
            BaseRelation::Disjoint => "disjoint",
        }
    }

    pub const fn symbol(self) -> &'static str {
        match self {
            BaseRelation::Equals => "==",
            BaseRelation::IsIncludedIn => "<",
            BaseRelation::Includes => ">",
            BaseRelation::Overlaps => "><",
            BaseRelation::Disjoint => "!",
        }
    }

    /// Parses either the long name or the short symbol.
    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.long_name() == token || r.symbol() == token)
    }
}

impl fmt::Display for BaseRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for BaseRelation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for BaseRelation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let token = String::deserialize(d)?;
        BaseRelation::from_token(&token)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown relation `{token}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelationError {
    #[error("relation mask must be nonempty")]
    EmptyMask,
    #[error("relation mask bits out of range: {0:#x}")]
    OutOfRange(u8),
    #[error("unknown relation token `{0}`")]
    UnknownToken(String),
    #[error("cannot classify the relation of an empty set")]
    EmptySet,
}

/// A set of base relations, read as their disjunction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct RelationMask(u8);

impl RelationMask {
    pub const EMPTY: RelationMask = RelationMask(0);
    pub const FULL: RelationMask = RelationMask(0b1_1111);

    pub const fn from_bits_truncate(bits: u8) -> Self {
        RelationMask(bits & Self::FULL.0)
    }

    pub fn from_bits(bits: u8) -> Result<Self, RelationError> {
        if bits & !Self::FULL.0 != 0 {
            Err(RelationError::OutOfRange(bits))
        } else {
            Ok(RelationMask(bits))
        }
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn single(r: BaseRelation) -> Self {
        RelationMask(r.bit())
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn is_full(self) -> bool {
        self.0 == Self::FULL.0
    }

    pub const fn contains(self, r: BaseRelation) -> bool {
        self.0 & r.bit() != 0
    }

    pub const fn is_subset_of(self, other: RelationMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn union(self, other: RelationMask) -> Self {
        RelationMask(self.0 | other.0)
    }

    pub const fn intersection(self, other: RelationMask) -> Self {
        RelationMask(self.0 & other.0)
    }

    pub const fn complement(self) -> Self {
        RelationMask(!self.0 & Self::FULL.0)
    }

    pub fn insert(&mut self, r: BaseRelation) {
        self.0 |= r.bit();
    }

    /// The unique member of a singleton mask.
    pub fn as_single(self) -> Option<BaseRelation> {
        if self.len() == 1 {
            self.iter().next()
        } else {
            None
        }
    }

    /// Members in canonical order.
    pub fn iter(self) -> impl Iterator<Item = BaseRelation> {
        BaseRelation::ALL.into_iter().filter(move |r| self.contains(*r))
    }

    /// Elementwise converse.
    pub fn converse(self) -> Self {
        self.iter().map(BaseRelation::converse).collect()
    }

    /// Composition: every relation `t` such that `A r B`, `B s C`, `A t C`
    /// is realizable for some `r` in `self` and `s` in `other`.
    pub fn compose(self, other: RelationMask) -> Self {
        let mut out = RelationMask::EMPTY;
        for r in self.iter() {
            for s in other.iter() {
                out = out.union(compose_base(r, s));
            }
        }
        out
    }

    /// All 31 nonempty masks, ascending by bit value.
    pub fn all_nonempty() -> impl Iterator<Item = RelationMask> {
        (1..=Self::FULL.0).map(RelationMask)
    }
}

impl FromIterator<BaseRelation> for RelationMask {
    fn from_iter<I: IntoIterator<Item = BaseRelation>>(iter: I) -> Self {
        let mut m = RelationMask::EMPTY;
        for r in iter {
            m.insert(r);
        }
        m
    }
}

impl From<BaseRelation> for RelationMask {
    fn from(r: BaseRelation) -> Self {
        RelationMask::single(r)
    }
}

impl fmt::Debug for RelationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, r) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", r.symbol())?;
        }
        write!(f, "}}")
    }
}

/// Short form: `<` for a singleton, `{== <}` otherwise.
impl fmt::Display for RelationMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_single() {
            return f.write_str(r.symbol());
        }
        let parts: Vec<_> = self.iter().map(BaseRelation::symbol).collect();
        write!(f, "{{{}}}", parts.join(" "))
    }
}

impl RelationMask {
    /// Long form used by the canonical text serialization.
    pub fn long_form(self) -> String {
        if let Some(r) = self.as_single() {
            return r.long_name().to_string();
        }
        let parts: Vec<_> = self.iter().map(BaseRelation::long_name).collect();
        format!("{{{}}}", parts.join(" "))
    }
}

/// Accepts a single token (`<`, `includes`) or a braced set separated by
/// spaces or commas (`{== <}`, `{equals,is_included_in}`).
impl FromStr for RelationMask {
    type Err = RelationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let inner = match s.strip_prefix('{') {
            Some(rest) => rest
                .strip_suffix('}')
                .ok_or_else(|| RelationError::UnknownToken(s.to_string()))?,
            None => {
                return BaseRelation::from_token(s)
                    .map(RelationMask::single)
                    .ok_or_else(|| RelationError::UnknownToken(s.to_string()));
            }
        };
        let mut mask = RelationMask::EMPTY;
        for tok in inner.split(|c: char| c == ',' || c.is_whitespace()) {
            if tok.is_empty() {
                continue;
            }
            let r = BaseRelation::from_token(tok)
                .ok_or_else(|| RelationError::UnknownToken(tok.to_string()))?;
            mask.insert(r);
        }
        if mask.is_empty() {
            return Err(RelationError::EmptyMask);
        }
        Ok(mask)
    }
}

/// Serialized as the list of short symbols in canonical order.
impl Serialize for RelationMask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let symbols: Vec<&str> = self.iter().map(BaseRelation::symbol).collect();
        symbols.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RelationMask {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tokens = Vec::<BaseRelation>::deserialize(d)?;
        Ok(tokens.into_iter().collect())
    }
}

const EQ: u8 = BaseRelation::Equals.bit();
const LT: u8 = BaseRelation::IsIncludedIn.bit();
const GT: u8 = BaseRelation::Includes.bit();
const OV: u8 = BaseRelation::Overlaps.bit();
const DJ: u8 = BaseRelation::Disjoint.bit();
const ALL: u8 = EQ | LT | GT | OV | DJ;

/// Rows indexed by the first relation, columns by the second. Checked against
/// a brute-force subset enumeration in the tests below.
const COMPOSITION: [[u8; 5]; 5] = [
    // ==
    [EQ, LT, GT, OV, DJ],
    // <
    [LT, LT, ALL, LT | OV | DJ, DJ],
    // >
    [GT, EQ | LT | GT | OV, GT, GT | OV, GT | OV | DJ],
    // ><
    [OV, LT | OV, GT | OV | DJ, ALL, GT | OV | DJ],
    // !
    [DJ, LT | OV | DJ, DJ, LT | OV | DJ, ALL],
];

pub fn compose_base(r: BaseRelation, s: BaseRelation) -> RelationMask {
    RelationMask(COMPOSITION[r.index()][s.index()])
}

/// Classifies the relation between two nonempty sets.
pub fn base_relation_of<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<BaseRelation, RelationError> {
    if a.is_empty() || b.is_empty() {
        return Err(RelationError::EmptySet);
    }
    let common = a.intersection(b).count();
    Ok(classify_counts(a.len() - common, common, b.len() - common))
}

/// Classification from region cardinalities (or any inhabitation flags):
/// `left_only` = |a \ b|, `common` = |a ∩ b|, `right_only` = |b \ a|.
/// Both sets are assumed nonempty.
pub fn classify_counts(left_only: usize, common: usize, right_only: usize) -> BaseRelation {
    match (left_only > 0, common > 0, right_only > 0) {
        (_, false, _) => BaseRelation::Disjoint,
        (false, true, false) => BaseRelation::Equals,
        (false, true, true) => BaseRelation::IsIncludedIn,
        (true, true, false) => BaseRelation::Includes,
        (true, true, true) => BaseRelation::Overlaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Every realizable third relation over nonempty subsets of `0..n`.
    fn oracle_table(n: u32) -> [[RelationMask; 5]; 5] {
        let subsets: Vec<BTreeSet<u32>> = (1u32..(1 << n))
            .map(|bits| (0..n).filter(|i| bits & (1 << i) != 0).collect())
            .collect();
        let mut table = [[RelationMask::EMPTY; 5]; 5];
        for a in &subsets {
            for b in &subsets {
                let r = base_relation_of(a, b).unwrap();
                for c in &subsets {
                    let s = base_relation_of(b, c).unwrap();
                    let t = base_relation_of(a, c).unwrap();
                    table[r.index()][s.index()].insert(t);
                }
            }
        }
        table
    }

    #[test]
    fn composition_table_matches_subset_oracle() {
        let six = oracle_table(6);
        let five = oracle_table(5);
        assert_eq!(five, six, "universe of 5 already witnesses every entry");
        for r in BaseRelation::ALL {
            for s in BaseRelation::ALL {
                assert_eq!(compose_base(r, s), six[r.index()][s.index()], "{r} ∘ {s}");
            }
        }
    }

    #[test]
    fn converse_examples() {
        let lt = RelationMask::single(BaseRelation::IsIncludedIn);
        assert_eq!(lt.converse(), RelationMask::single(BaseRelation::Includes));
        let ov = RelationMask::single(BaseRelation::Overlaps);
        assert_eq!(ov.converse(), ov);
        let m: RelationMask = "{== <}".parse().unwrap();
        assert_eq!(m.converse(), "{== >}".parse().unwrap());
    }

    #[test]
    fn compose_examples() {
        let eq = RelationMask::single(BaseRelation::Equals);
        for m in RelationMask::all_nonempty() {
            assert_eq!(eq.compose(m), m);
        }
        let lt = RelationMask::single(BaseRelation::IsIncludedIn);
        assert_eq!(lt.compose(lt), lt);
        let dj = RelationMask::single(BaseRelation::Disjoint);
        assert_eq!(dj.compose(dj), RelationMask::FULL);
    }

    #[test]
    fn classify_examples() {
        let s = |v: &[u32]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(base_relation_of(&s(&[1, 2]), &s(&[1, 2])).unwrap(), BaseRelation::Equals);
        assert_eq!(base_relation_of(&s(&[1]), &s(&[1, 2])).unwrap(), BaseRelation::IsIncludedIn);
        assert_eq!(base_relation_of(&s(&[1, 2]), &s(&[2, 3])).unwrap(), BaseRelation::Overlaps);
        assert_eq!(base_relation_of(&s(&[1]), &s(&[2])).unwrap(), BaseRelation::Disjoint);
        assert_eq!(base_relation_of(&s(&[]), &s(&[2])), Err(RelationError::EmptySet));
    }

    #[test]
    fn there_are_31_masks() {
        assert_eq!(RelationMask::all_nonempty().count(), 31);
        assert!(RelationMask::all_nonempty().all(|m| !m.is_empty()));
    }

    #[test]
    fn parse_tokens() {
        assert_eq!("is_included_in".parse::<RelationMask>().unwrap(), "<".parse().unwrap());
        assert_eq!(
            "{equals,is_included_in}".parse::<RelationMask>().unwrap().bits(),
            EQ | LT
        );
        assert_eq!("{}".parse::<RelationMask>(), Err(RelationError::EmptyMask));
        assert!("subset".parse::<RelationMask>().is_err());
        assert_eq!(RelationMask::from_bits(EQ | LT).unwrap().long_form(), "{equals is_included_in}");
        assert_eq!(RelationMask::from_bits(0x20), Err(RelationError::OutOfRange(0x20)));
    }

    proptest! {
        #[test]
        fn converse_is_involutive(bits in 1u8..32) {
            let m = RelationMask::from_bits(bits).unwrap();
            prop_assert_eq!(m.converse().converse(), m);
        }

        #[test]
        fn composition_converse_duality(a in 1u8..32, b in 1u8..32) {
            let a = RelationMask::from_bits(a).unwrap();
            let b = RelationMask::from_bits(b).unwrap();
            prop_assert_eq!(b.converse().compose(a.converse()), a.compose(b).converse());
        }

        #[test]
        fn exactly_one_relation_per_pair(a in 1u32..256, b in 1u32..256) {
            let set = |bits: u32| (0..8).filter(|i| bits & (1 << i) != 0).collect::<BTreeSet<u32>>();
            let (sa, sb) = (set(a), set(b));
            let r = base_relation_of(&sa, &sb).unwrap();
            let holds = |rel: BaseRelation| match rel {
                BaseRelation::Equals => sa == sb,
                BaseRelation::IsIncludedIn => sa.is_subset(&sb) && sa != sb,
                BaseRelation::Includes => sb.is_subset(&sa) && sa != sb,
                BaseRelation::Disjoint => sa.is_disjoint(&sb),
                BaseRelation::Overlaps => !sa.is_disjoint(&sb) && !sa.is_subset(&sb) && !sb.is_subset(&sa),
            };
            prop_assert_eq!(BaseRelation::ALL.iter().filter(|x| holds(**x)).count(), 1);
            prop_assert!(holds(r));
        }
    }
}
