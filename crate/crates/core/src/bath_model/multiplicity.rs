//! Degeneracy counts that outgrow the integer range.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::ops::Add;

/// Dimension of a degenerate bath eigenspace.
///
/// Counts stay exact while they fit in a `u64` and switch to a natural-log
/// representation on overflow (a homogeneous bath of more than ~60 spins
/// has central degeneracies beyond `u64::MAX`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplicity {
    Exact(u64),
    /// Natural logarithm of the count.
    Log(f64),
}

impl Multiplicity {
    pub const ONE: Multiplicity = Multiplicity::Exact(1);

    pub fn ln(&self) -> f64 {
        match *self {
            Multiplicity::Exact(n) => (n as f64).ln(),
            Multiplicity::Log(l) => l,
        }
    }

    pub fn log2(&self) -> f64 {
        self.ln() / std::f64::consts::LN_2
    }

    /// Count as a float; `inf` once beyond `f64::MAX`.
    pub fn to_f64(&self) -> f64 {
        match *self {
            Multiplicity::Exact(n) => n as f64,
            Multiplicity::Log(l) => l.exp(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Multiplicity::Exact(_))
    }

    /// `ln(n choose k)`, exact integer when it fits.
    pub fn binomial(n: u64, k: u64) -> Multiplicity {
        if k > n {
            return Multiplicity::Exact(0);
        }
        let k = k.min(n - k);
        let mut acc: u128 = 1;
        for i in 0..k {
            // acc * (n - i) / (i + 1) stays integral at every step
            match acc.checked_mul((n - i) as u128) {
                Some(v) => acc = v / (i as u128 + 1),
                None => return Multiplicity::Log(ln_binomial(n, k)),
            }
        }
        match u64::try_from(acc) {
            Ok(v) => Multiplicity::Exact(v),
            Err(_) => Multiplicity::Log((acc as f64).ln()),
        }
    }
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    // sum of logs is exact enough for n in the thousands
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

impl Add for Multiplicity {
    type Output = Multiplicity;

    fn add(self, rhs: Multiplicity) -> Multiplicity {
        match (self, rhs) {
            (Multiplicity::Exact(a), Multiplicity::Exact(b)) => match a.checked_add(b) {
                Some(s) => Multiplicity::Exact(s),
                None => Multiplicity::Log(ln_add((a as f64).ln(), (b as f64).ln())),
            },
            (a, b) => Multiplicity::Log(ln_add(a.ln(), b.ln())),
        }
    }
}

impl PartialOrd for Multiplicity {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Multiplicity::Exact(a), Multiplicity::Exact(b)) => a.partial_cmp(b),
            _ => self.ln().partial_cmp(&other.ln()),
        }
    }
}

impl std::iter::Sum for Multiplicity {
    fn sum<I: Iterator<Item = Multiplicity>>(iter: I) -> Multiplicity {
        iter.fold(Multiplicity::Exact(0), |a, b| a + b)
    }
}
