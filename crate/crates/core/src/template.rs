//! Parametric targets and residue classes shared by kernels and set maps.
//!
//! A template on a sequence block `Z` of the codomain describes the row at
//! every index `d*k + r` with `k >= k0`. Its atoms point either at a fixed
//! point of the domain or at the moving point `X:(a*k + b)` of a sequence
//! block `X`.

use std::fmt;

use serde::Serialize;

use crate::space::{Index, Point, Space};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Target {
    Fixed(Point),
    Indexed { block: String, a: u64, b: i64 },
}

impl Target {
    pub fn indexed(block: &str, a: u64, b: i64) -> Self {
        Target::Indexed {
            block: block.to_string(),
            a,
            b,
        }
    }

    /// The point hit at parameter `k`; `None` if the index would be negative.
    pub fn at(&self, k: u64) -> Option<Point> {
        match self {
            Target::Fixed(p) => Some(p.clone()),
            Target::Indexed { block, a, b } => {
                let v = *a as i128 * k as i128 + *b as i128;
                (v >= 0).then(|| Point::at(block, v as u64))
            }
        }
    }

    /// Where the target goes as `k` grows.
    pub fn limit(&self) -> Point {
        match self {
            Target::Fixed(p) => p.clone(),
            Target::Indexed { block, .. } => Point::inf(block),
        }
    }

    pub fn block(&self) -> &str {
        match self {
            Target::Fixed(p) => &p.block,
            Target::Indexed { block, .. } => block,
        }
    }

    /// Validity against the domain space.
    pub fn check(&self, space: &Space) -> Result<(), String> {
        match self {
            Target::Fixed(p) if space.contains(p) => Ok(()),
            Target::Fixed(p) => Err(format!("unknown point {p}")),
            Target::Indexed { block, a, .. } => match space.block(block) {
                Some(bl) if bl.is_seq() && *a >= 1 => Ok(()),
                Some(_) if *a == 0 => Err(format!("indexed target {self} has slope 0")),
                Some(_) => Err(format!("indexed target {self} on a finite block")),
                None => Err(format!("unknown block {block}")),
            },
        }
    }

    /// Least `k` from which the target index is non-negative.
    pub fn nonnegative_from(&self) -> u64 {
        match self {
            Target::Fixed(_) => 0,
            Target::Indexed { a, b, .. } => {
                if *b >= 0 {
                    0
                } else {
                    ((-*b) as u64).div_ceil(*a)
                }
            }
        }
    }

    /// Parameters `k` at which `self` and `other` hit the same point when that
    /// happens only sporadically (identical targets are not sporadic).
    pub fn collision(&self, other: &Target) -> Option<u64> {
        if self.block() != other.block() || self == other {
            return None;
        }
        match (self, other) {
            (Target::Fixed(_), Target::Fixed(_)) => None,
            (Target::Indexed { a, b, .. }, Target::Fixed(p))
            | (Target::Fixed(p), Target::Indexed { a, b, .. }) => match p.index {
                Index::Inf => None,
                Index::At(j) => {
                    let diff = j as i128 - *b as i128;
                    (diff >= 0 && diff % *a as i128 == 0).then(|| (diff / *a as i128) as u64)
                }
            },
            (Target::Indexed { a: a1, b: b1, .. }, Target::Indexed { a: a2, b: b2, .. }) => {
                if a1 == a2 {
                    return None;
                }
                let num = *b2 as i128 - *b1 as i128;
                let den = *a1 as i128 - *a2 as i128;
                (num % den == 0 && num / den >= 0).then(|| (num / den) as u64)
            }
        }
    }
}

/// Text of `a*k + b` in the file syntax (`k`, `k+1`, `2*k-1`, ...).
pub fn affine_text(a: u64, b: i64) -> String {
    let lead = if a == 1 {
        "k".to_string()
    } else {
        format!("{a}*k")
    };
    match b.cmp(&0) {
        std::cmp::Ordering::Equal => lead,
        std::cmp::Ordering::Greater => format!("{lead}+{b}"),
        std::cmp::Ordering::Less => format!("{lead}{b}"),
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Fixed(p) => write!(f, "{p}"),
            Target::Indexed { block, a, b } => write!(f, "{block}[{}]", affine_text(*a, *b)),
        }
    }
}

/// Indices `modulus*k + residue` for `k >= start`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ResidueClass {
    pub modulus: u64,
    pub residue: u64,
    pub start: u64,
}

impl ResidueClass {
    pub fn new(modulus: u64, residue: u64, start: u64) -> Self {
        ResidueClass {
            modulus,
            residue,
            start,
        }
    }

    pub fn index(&self, k: u64) -> u64 {
        self.modulus * k + self.residue
    }

    pub fn first_index(&self) -> u64 {
        self.index(self.start)
    }

    pub fn matches(&self, n: u64) -> bool {
        n % self.modulus == self.residue
    }

    /// Parameter of index `n` if it is in the class.
    pub fn parameter(&self, n: u64) -> Option<u64> {
        (self.matches(n) && n >= self.first_index()).then(|| (n - self.residue) / self.modulus)
    }

    pub fn is_well_formed(&self) -> bool {
        self.modulus >= 1 && self.residue < self.modulus
    }
}

impl fmt::Display for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mod {} rem {} from {}",
            self.modulus, self.residue, self.start
        )
    }
}

/// Smallest start `>= class.start` past every sporadic collision and every
/// negative index among `targets`.
pub fn raised_start<'a>(
    class: &ResidueClass,
    targets: impl Iterator<Item = &'a Target> + Clone,
) -> u64 {
    let mut start = class.start;
    for t in targets.clone() {
        start = start.max(t.nonnegative_from());
    }
    let list: Vec<&Target> = targets.collect();
    for (i, t) in list.iter().enumerate() {
        for u in &list[i + 1..] {
            if let Some(k) = t.collision(u) {
                if k >= class.start {
                    start = start.max(k + 1);
                }
            }
        }
    }
    start
}

/// Checks that the classes partition all sufficiently large indices.
/// Returns a description of the first defect.
pub fn partition_defect(classes: &[ResidueClass]) -> Option<String> {
    if classes.is_empty() {
        return Some("no residue classes".to_string());
    }
    let lcm = classes
        .iter()
        .fold(1u64, |acc, c| num_integer::lcm(acc, c.modulus));
    for rho in 0..lcm {
        let hits = classes.iter().filter(|c| c.matches(rho)).count();
        if hits == 0 {
            return Some(format!("residue {rho} mod {lcm} is not covered"));
        }
        if hits > 1 {
            return Some(format!("residue {rho} mod {lcm} is covered {hits} times"));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_of_two_progressions() {
        let t1 = Target::indexed("X", 1, 0);
        let t2 = Target::indexed("X", 2, -1);
        assert_eq!(t1.collision(&t2), Some(1));
        let class = ResidueClass::new(2, 1, 0);
        assert_eq!(raised_start(&class, [t1, t2].iter()), 2);
    }

    #[test]
    fn collision_with_fixed_point() {
        let t = Target::indexed("X", 2, 1);
        assert_eq!(t.collision(&Target::Fixed(Point::at("X", 7))), Some(3));
        assert_eq!(t.collision(&Target::Fixed(Point::at("X", 6))), None);
        assert_eq!(t.collision(&Target::Fixed(Point::inf("X"))), None);
        assert_eq!(t.collision(&Target::indexed("X", 2, 3)), None);
    }

    #[test]
    fn negative_offsets_raise_start() {
        let t = Target::indexed("Y", 1, -1);
        assert_eq!(t.nonnegative_from(), 1);
        assert_eq!(t.at(0), None);
        assert_eq!(t.at(3), Some(Point::at("Y", 2)));
    }

    #[test]
    fn partition_checks() {
        let odd = ResidueClass::new(2, 1, 0);
        let even = ResidueClass::new(2, 0, 1);
        assert_eq!(partition_defect(&[odd, even]), None);
        assert!(partition_defect(&[odd]).is_some());
        assert!(partition_defect(&[odd, even, ResidueClass::new(1, 0, 0)]).is_some());
    }

    #[test]
    fn affine_rendering() {
        assert_eq!(affine_text(1, 0), "k");
        assert_eq!(affine_text(1, -1), "k-1");
        assert_eq!(affine_text(2, 3), "2*k+3");
    }
}
