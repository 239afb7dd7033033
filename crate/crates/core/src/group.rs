//! Finite abelian subgroups of PGL2 over a field of residue characteristic p.
//! Three families occur: cyclic of order prime to p, the Klein four-group
//! when p is odd, and elementary abelian p-groups. Descriptors are kept
//! canonical per characteristic so isomorphic groups compare equal.

use crate::rat::Rat;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Isomorphism type of a finite abelian subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupDesc {
    Trivial,
    Cyclic { n: u64 },
    Klein4,
    #[serde(rename = "elemab")]
    ElemAb { p: u64, r: u32 },
}

use GroupDesc::*;

impl GroupDesc {
    pub fn cyclic(n: u64) -> Self {
        Cyclic { n }
    }

    pub fn elemab(p: u64, r: u32) -> Self {
        ElemAb { p, r }
    }

    pub fn order(&self) -> u64 {
        match *self {
            Trivial => 1,
            Cyclic { n } => n,
            Klein4 => 4,
            ElemAb { p, r } => p.checked_pow(r).expect("group order overflows u64"),
        }
    }

    pub fn is_trivial(&self) -> bool {
        *self == Trivial
    }

    /// Orders of a minimal generating set, in fixed order.
    pub fn generator_orders(&self) -> Vec<u64> {
        match *self {
            Trivial => vec![],
            Cyclic { n } => vec![n],
            Klein4 => vec![2, 2],
            ElemAb { p, r } => vec![p; r as usize],
        }
    }
}

impl fmt::Display for GroupDesc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Trivial => write!(f, "1"),
            Cyclic { n } => write!(f, "Z{n}"),
            Klein4 => write!(f, "D2"),
            ElemAb { p, r } => write!(f, "E({p},{r})"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("group {group} is inadmissible in residue characteristic {p}")]
    InadmissibleGroup { group: GroupDesc, p: u64 },
    #[error("the trivial group has no branch points")]
    NoRamification,
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    if n % 3 == 0 {
        return n == 3;
    }
    let mut d = 5;
    while d * d <= n {
        if n % d == 0 || n % (d + 2) == 0 {
            return false;
        }
        d += 6;
    }
    true
}

fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// One of the three families of abelian subgroups in characteristic p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AbelianFamily {
    /// Cyclic of order n ≥ 2 with gcd(n, p) = 1.
    CyclicPrimeToP,
    /// Klein four-group, only when p ≠ 2.
    Klein4,
    /// (Z/p)^r with r ≥ 1.
    ElemAb,
}

impl AbelianFamily {
    /// Members of the family in characteristic p with order at most `max_order`.
    pub fn members_up_to(&self, p: u64, max_order: u64) -> Vec<GroupDesc> {
        match self {
            AbelianFamily::CyclicPrimeToP => (2..=max_order)
                .filter(|n| gcd(*n, p) == 1)
                .map(GroupDesc::cyclic)
                .collect(),
            AbelianFamily::Klein4 => {
                if max_order >= 4 {
                    vec![GroupDesc::Klein4]
                } else {
                    vec![]
                }
            }
            AbelianFamily::ElemAb => {
                let mut out = Vec::new();
                let mut order = p;
                let mut r = 1;
                while order <= max_order {
                    out.push(GroupDesc::elemab(p, r));
                    r += 1;
                    order = match order.checked_mul(p) {
                        Some(o) => o,
                        None => break,
                    };
                }
                out
            }
        }
    }
}

impl fmt::Display for AbelianFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbelianFamily::CyclicPrimeToP => write!(f, "cyclic prime to p"),
            AbelianFamily::Klein4 => write!(f, "Klein four-group"),
            AbelianFamily::ElemAb => write!(f, "elementary abelian p-group"),
        }
    }
}

/// The families of nontrivial finite abelian subgroups of PGL2 in residue
/// characteristic p. The semidirect products E(r)⋊Z/n are never abelian
/// and are excluded.
pub fn classify_abelian_families(p: u64) -> Result<Vec<AbelianFamily>, GroupError> {
    if !is_prime(p) {
        return Err(GroupError::NotPrime(p));
    }
    let mut fams = vec![AbelianFamily::CyclicPrimeToP];
    if p != 2 {
        fams.push(AbelianFamily::Klein4);
    }
    fams.push(AbelianFamily::ElemAb);
    Ok(fams)
}

/// All canonical nontrivial descriptors in characteristic p with order at
/// most `max_order`, sorted by order then family.
pub fn admissible_groups_up_to(p: u64, max_order: u64) -> Result<Vec<GroupDesc>, GroupError> {
    let mut out: Vec<GroupDesc> = classify_abelian_families(p)?
        .iter()
        .flat_map(|f| f.members_up_to(p, max_order))
        .collect();
    out.sort_by_key(|g| (g.order(), *g));
    Ok(out)
}

/// Branch data of the quotient map P¹ → P¹/g.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RamificationProfile {
    pub indices: Vec<u64>,
}

impl RamificationProfile {
    /// Σ (1 − 1/e) over the branch points. Stays below 2 for genus-0 quotients.
    pub fn defect(&self) -> Rat {
        self.indices
            .iter()
            .map(|&e| Rat::one() - Rat::recip_of(e))
            .sum()
    }
}

/// Ramification indices of the branch points of P¹ → P¹/g: two points of
/// index n in the cyclic case, three of index 2 for Klein4, one of index
/// p^r in the wild case.
pub fn ramification_profile(g: &GroupDesc) -> Result<RamificationProfile, GroupError> {
    let indices = match *g {
        Trivial => return Err(GroupError::NoRamification),
        Cyclic { n } => vec![n, n],
        Klein4 => vec![2, 2, 2],
        ElemAb { .. } => vec![g.order()],
    };
    Ok(RamificationProfile { indices })
}

/// Whether h embeds in g as abstract groups, within the three families.
pub fn admissible_subgroup(h: &GroupDesc, g: &GroupDesc) -> bool {
    match (*h, *g) {
        (Trivial, _) => true,
        (Cyclic { n: m }, Cyclic { n }) => n % m == 0,
        (Cyclic { n: 2 }, Klein4) => true,
        (Klein4, Klein4) => true,
        (ElemAb { p: q, r: s }, ElemAb { p, r }) => q == p && s <= r,
        _ => false,
    }
}

/// Rewrite a descriptor to the canonical form for characteristic p:
/// order-1 descriptors become Trivial, and 2-groups in characteristic 2
/// become elementary abelian.
pub fn canonicalize(g: &GroupDesc, p: u64) -> Result<GroupDesc, GroupError> {
    if !is_prime(p) {
        return Err(GroupError::NotPrime(p));
    }
    let inadmissible = || GroupError::InadmissibleGroup { group: *g, p };
    match *g {
        Trivial => Ok(Trivial),
        Cyclic { n: 0 } => Err(inadmissible()),
        Cyclic { n: 1 } => Ok(Trivial),
        Cyclic { n: 2 } if p == 2 => Ok(GroupDesc::elemab(2, 1)),
        Cyclic { n } if n % p == 0 => Err(inadmissible()),
        Cyclic { n } => Ok(GroupDesc::cyclic(n)),
        Klein4 if p == 2 => Ok(GroupDesc::elemab(2, 2)),
        Klein4 => Ok(Klein4),
        ElemAb { p: q, .. } if q != p => Err(inadmissible()),
        ElemAb { r: 0, .. } => Ok(Trivial),
        ElemAb { .. } => Ok(*g),
    }
}

/// Whether g is already the canonical descriptor of an admissible subgroup
/// in characteristic p.
pub fn valid_in_char(g: &GroupDesc, p: u64) -> bool {
    canonicalize(g, p) == Ok(*g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders() {
        assert_eq!(Trivial.order(), 1);
        assert_eq!(GroupDesc::cyclic(6).order(), 6);
        assert_eq!(Klein4.order(), 4);
        assert_eq!(GroupDesc::elemab(3, 2).order(), 9);
    }

    #[test]
    fn families_by_characteristic() {
        let f5 = classify_abelian_families(5).unwrap();
        assert_eq!(
            f5,
            vec![
                AbelianFamily::CyclicPrimeToP,
                AbelianFamily::Klein4,
                AbelianFamily::ElemAb
            ]
        );
        let f2 = classify_abelian_families(2).unwrap();
        assert!(!f2.contains(&AbelianFamily::Klein4));
        assert_eq!(classify_abelian_families(6), Err(GroupError::NotPrime(6)));
        assert_eq!(classify_abelian_families(1), Err(GroupError::NotPrime(1)));
    }

    #[test]
    fn family_members_respect_characteristic() {
        let cyc = AbelianFamily::CyclicPrimeToP.members_up_to(3, 10);
        assert!(cyc.contains(&GroupDesc::cyclic(4)));
        assert!(!cyc.contains(&GroupDesc::cyclic(3)));
        assert!(!cyc.contains(&GroupDesc::cyclic(9)));
        let ea = AbelianFamily::ElemAb.members_up_to(2, 16);
        assert_eq!(
            ea,
            vec![
                GroupDesc::elemab(2, 1),
                GroupDesc::elemab(2, 2),
                GroupDesc::elemab(2, 3),
                GroupDesc::elemab(2, 4)
            ]
        );
    }

    #[test]
    fn admissible_pool_is_sorted_and_canonical() {
        let pool = admissible_groups_up_to(2, 8).unwrap();
        assert_eq!(
            pool,
            vec![
                GroupDesc::elemab(2, 1),
                GroupDesc::cyclic(3),
                GroupDesc::elemab(2, 2),
                GroupDesc::cyclic(5),
                GroupDesc::cyclic(7),
                GroupDesc::elemab(2, 3),
            ]
        );
        for g in admissible_groups_up_to(7, 64).unwrap() {
            assert!(valid_in_char(&g, 7), "{g} not canonical");
        }
    }

    #[test]
    fn ramification_profiles() {
        assert_eq!(
            ramification_profile(&GroupDesc::cyclic(4)).unwrap().indices,
            vec![4, 4]
        );
        assert_eq!(
            ramification_profile(&Klein4).unwrap().indices,
            vec![2, 2, 2]
        );
        assert_eq!(
            ramification_profile(&GroupDesc::elemab(3, 2))
                .unwrap()
                .indices,
            vec![9]
        );
        assert_eq!(
            ramification_profile(&Trivial),
            Err(GroupError::NoRamification)
        );
    }

    #[test]
    fn spherical_condition_exhaustive() {
        for p in [2u64, 3, 5, 7, 11] {
            for g in admissible_groups_up_to(p, 1000).unwrap() {
                let defect = ramification_profile(&g).unwrap().defect();
                assert!(defect < Rat::int(2), "defect {defect} for {g} at p={p}");
            }
        }
    }

    #[test]
    fn subgroup_lattice() {
        let c = GroupDesc::cyclic;
        assert!(admissible_subgroup(&c(2), &Klein4));
        assert!(admissible_subgroup(&c(3), &c(6)));
        assert!(!admissible_subgroup(&c(2), &c(3)));
        assert!(!admissible_subgroup(&c(4), &Klein4));
        assert!(!admissible_subgroup(&Klein4, &c(4)));
        assert!(admissible_subgroup(&GroupDesc::elemab(2, 1), &GroupDesc::elemab(2, 3)));
        assert!(!admissible_subgroup(&GroupDesc::elemab(2, 3), &GroupDesc::elemab(2, 1)));
        assert!(!admissible_subgroup(&GroupDesc::elemab(3, 1), &c(9)));
        assert!(admissible_subgroup(&Trivial, &Trivial));
    }

    #[test]
    fn subgroup_relation_is_a_partial_order_with_lagrange() {
        let mut pool = vec![Trivial];
        pool.extend(admissible_groups_up_to(5, 64).unwrap());
        for h in &pool {
            assert!(admissible_subgroup(h, h));
            for g in &pool {
                if admissible_subgroup(h, g) {
                    assert_eq!(g.order() % h.order(), 0, "{h} in {g}");
                    for k in &pool {
                        if admissible_subgroup(g, k) {
                            assert!(admissible_subgroup(h, k), "{h} ≤ {g} ≤ {k}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_rewrites() {
        let c = GroupDesc::cyclic;
        assert_eq!(canonicalize(&c(1), 7), Ok(Trivial));
        assert_eq!(canonicalize(&c(2), 2), Ok(GroupDesc::elemab(2, 1)));
        assert_eq!(canonicalize(&Klein4, 2), Ok(GroupDesc::elemab(2, 2)));
        assert_eq!(canonicalize(&Klein4, 5), Ok(Klein4));
        assert_eq!(canonicalize(&GroupDesc::elemab(3, 0), 3), Ok(Trivial));
        assert_eq!(
            canonicalize(&c(6), 3),
            Err(GroupError::InadmissibleGroup {
                group: c(6),
                p: 3
            })
        );
        assert_eq!(
            canonicalize(&c(4), 2),
            Err(GroupError::InadmissibleGroup {
                group: c(4),
                p: 2
            })
        );
        assert_eq!(
            canonicalize(&GroupDesc::elemab(3, 1), 5),
            Err(GroupError::InadmissibleGroup {
                group: GroupDesc::elemab(3, 1),
                p: 5
            })
        );
        assert_eq!(canonicalize(&c(2), 4), Err(GroupError::NotPrime(4)));
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let mut pool = vec![Trivial, Klein4, GroupDesc::elemab(2, 2), GroupDesc::elemab(3, 0)];
        pool.extend((0..=12).map(GroupDesc::cyclic));
        for p in [2u64, 3, 5] {
            for g in &pool {
                if let Ok(c1) = canonicalize(g, p) {
                    assert_eq!(canonicalize(&c1, p), Ok(c1), "{g} at p={p}");
                }
            }
        }
    }

    #[test]
    fn display_names() {
        assert_eq!(Trivial.to_string(), "1");
        assert_eq!(GroupDesc::cyclic(12).to_string(), "Z12");
        assert_eq!(Klein4.to_string(), "D2");
        assert_eq!(GroupDesc::elemab(2, 3).to_string(), "E(2,3)");
    }

    #[test]
    fn json_tagging() {
        let j = serde_json::to_string(&GroupDesc::cyclic(6)).unwrap();
        assert_eq!(j, r#"{"kind":"cyclic","n":6}"#);
        assert_eq!(serde_json::to_string(&Trivial).unwrap(), r#"{"kind":"trivial"}"#);
        assert_eq!(serde_json::to_string(&Klein4).unwrap(), r#"{"kind":"klein4"}"#);
        let e: GroupDesc = serde_json::from_str(r#"{"kind":"elemab","p":3,"r":2}"#).unwrap();
        assert_eq!(e, GroupDesc::elemab(3, 2));
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
    }
}
