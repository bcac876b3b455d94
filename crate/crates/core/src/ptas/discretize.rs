//! Discretization parameters and the two-step rounding of item laws.

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::dist::{Atom, SizeDistribution};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::num::{fmt_rational, gcd_rational, parse_rational, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizationParams {
    eps: Q,
    grid: Q,
}

/// `ε ≤ √6(√15 − 3)`, squared out: `216ε² ≤ (36 − ε²)²` with `ε² ≤ 36`.
pub fn eps_in_range(eps: &Q) -> bool {
    if !eps.is_positive() {
        return false;
    }
    let e2 = eps * eps;
    let rest = Q::from_integer(36.into()) - &e2;
    !rest.is_negative() && Q::from_integer(216.into()) * &e2 <= &rest * &rest
}

impl DiscretizationParams {
    /// Grid `ε⁵`.
    pub fn new(eps: Q) -> Result<Self> {
        let grid = pow(&eps, 5);
        Self::with_grid(eps, grid)
    }

    /// Any grid in `(0, ε⁴]`.
    pub fn with_grid(eps: Q, grid: Q) -> Result<Self> {
        if !eps_in_range(&eps) {
            return Err(Error::InvalidParams(format!("eps {} outside (0, √6(√15−3)]", fmt_rational(&eps))));
        }
        if !grid.is_positive() || grid > pow(&eps, 4) {
            return Err(Error::InvalidParams(format!("grid {} outside (0, eps^4]", fmt_rational(&grid))));
        }
        Ok(Self { eps, grid })
    }

    pub fn eps(&self) -> &Q {
        &self.eps
    }

    pub fn grid(&self) -> &Q {
        &self.grid
    }

    /// `ε⁴`.
    pub fn small_cut(&self) -> Q {
        pow(&self.eps, 4)
    }

    /// Level spacing of the DP: both `ε⁴` and the grid are multiples of it.
    pub fn unit(&self) -> Q {
        gcd_rational(&self.grid, &self.small_cut())
    }

    /// Largest item size, `1 + ε`.
    pub fn support_cap(&self) -> Q {
        Q::one() + &self.eps
    }

    /// `1 + 4ε`, the bin size of the discretized problem.
    pub fn dp_capacity(&self) -> Q {
        Q::one() + Q::from_integer(4.into()) * &self.eps
    }

    /// `1 + 6ε`, the bin size of the tracked execution.
    pub fn track_capacity(&self) -> Q {
        Q::one() + Q::from_integer(6.into()) * &self.eps
    }

    /// `⌈(1 + 4ε) / grid⌉`.
    pub fn levels(&self) -> u64 {
        let r = (self.dp_capacity() / &self.grid).ceil().to_integer();
        u64::try_from(r).unwrap_or(u64::MAX)
    }

    pub fn to_json(&self) -> Value {
        json!({ "eps": fmt_rational(&self.eps), "grid": fmt_rational(&self.grid) })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |k: &str| -> Result<Q> {
            parse_rational(v[k].as_str().ok_or_else(|| Error::Parse(format!("params: missing {k}")))?)
        };
        Self::with_grid(field("eps")?, field("grid")?)
    }
}

pub(crate) fn pow(x: &Q, k: u32) -> Q {
    (0..k).fold(Q::one(), |acc, _| acc * x)
}

fn atoms_of(d: &SizeDistribution) -> Result<&[Atom]> {
    d.atoms().ok_or(Error::NonDiscreteItem(0))
}

/// Step 1: outcomes `≤ ε⁴` become `0` or `ε⁴` with the same conditional
/// mean; larger outcomes are kept.
pub fn discretize_step1(d: &SizeDistribution, params: &DiscretizationParams) -> Result<SizeDistribution> {
    let cut = params.small_cut();
    let atoms = atoms_of(d)?;
    let (mut p_small, mut mass) = (Q::zero(), Q::zero());
    let mut pairs = Vec::new();
    for a in atoms {
        if a.value <= cut {
            p_small += &a.prob;
            mass += &a.value * &a.prob;
        } else {
            pairs.push((a.value.clone(), a.prob.clone()));
        }
    }
    if p_small.is_positive() {
        // P(ε⁴) = P(small) · q/ε⁴ with q = mass / P(small)
        let up = &mass / &cut;
        let down = &p_small - &up;
        if up.is_positive() {
            pairs.push((cut.clone(), up));
        }
        if down.is_positive() {
            pairs.push((Q::zero(), down));
        }
    }
    SizeDistribution::discrete(pairs)
}

/// Step 2 on one value: values above `ε⁴` round up to the grid.
pub fn round_up(v: &Q, params: &DiscretizationParams) -> Q {
    if v <= &params.small_cut() {
        v.clone()
    } else {
        (v / params.grid()).ceil() * params.grid()
    }
}

/// Both steps. Atoms are merged by value after rounding.
pub fn discretize(d: &SizeDistribution, params: &DiscretizationParams) -> Result<SizeDistribution> {
    let step1 = discretize_step1(d, params)?;
    let pairs = atoms_of(&step1)?.iter().map(|a| (round_up(&a.value, params), a.prob.clone())).collect();
    SizeDistribution::discrete(pairs)
}

/// Sizes in units of the capacity, with mass above `1 + ε` moved to `1 + ε`.
pub fn normalize(d: &SizeDistribution, cap: &Q, params: &DiscretizationParams) -> Result<SizeDistribution> {
    let top = params.support_cap();
    let pairs = atoms_of(d)?
        .iter()
        .map(|a| {
            let v = &a.value / cap;
            (if v > top { top.clone() } else { v }, a.prob.clone())
        })
        .collect();
    SizeDistribution::discrete(pairs)
}

/// The discretized instance: normalized laws after both steps, capacity 1,
/// same penalty.
pub fn discretize_instance(inst: &Instance, params: &DiscretizationParams) -> Result<Instance> {
    if let Some(i) = inst.first_non_discrete() {
        return Err(Error::NonDiscreteItem(i));
    }
    let laws = inst
        .laws()
        .iter()
        .map(|d| discretize(&normalize(d, inst.capacity(), params)?, params))
        .collect::<Result<Vec<_>>>()?;
    Instance::from_laws(laws, inst.law_indices().to_vec(), inst.penalty().clone(), Q::one())
}

/// Value of an atom in DP levels.
pub(crate) fn level_of(v: &Q, unit: &Q) -> Result<i64> {
    let l = v / unit;
    if !l.is_integer() {
        return Err(Error::InvalidParams(format!("size {} is not on the level grid", fmt_rational(v))));
    }
    i64::try_from(l.to_integer()).map_err(|_| Error::InvalidParams("level out of range".into()))
}

/// True when `unit` divides `v`; used by callers that check grids.
pub fn on_grid(v: &Q, unit: &Q) -> bool {
    (v / unit).is_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::q;

    fn p03() -> DiscretizationParams {
        DiscretizationParams::new(q(3, 10)).unwrap()
    }

    #[test]
    fn eps_range_edge() {
        assert!(eps_in_range(&q(2, 1)));
        assert!(eps_in_range(&q(2138, 1000)));
        assert!(!eps_in_range(&q(2139, 1000)));
        assert!(!eps_in_range(&Q::zero()));
    }

    #[test]
    fn half_cut_point_mass() {
        let p = p03();
        let d = SizeDistribution::point(p.small_cut() / Q::from_integer(2.into())).unwrap();
        let out = discretize(&d, &p).unwrap();
        let atoms = out.atoms().unwrap();
        assert_eq!(atoms.len(), 2);
        assert_eq!(atoms[0], Atom { value: Q::zero(), prob: q(1, 2) });
        assert_eq!(atoms[1], Atom { value: p.small_cut(), prob: q(1, 2) });
    }

    #[test]
    fn large_point_rounds_up() {
        let p = p03();
        let out = discretize(&SizeDistribution::point(q(1, 2)).unwrap(), &p).unwrap();
        let g = pow(&q(3, 10), 5);
        let want = (q(1, 2) / &g).ceil() * &g;
        assert_eq!(out, SizeDistribution::point(want).unwrap());
    }

    #[test]
    fn unit_divides_cut_and_grid() {
        let p = p03();
        assert!(on_grid(&p.small_cut(), &p.unit()));
        assert!(on_grid(p.grid(), &p.unit()));
        assert_eq!(p.unit(), q(81, 100_000));
    }

    #[test]
    fn params_json_roundtrip() {
        let p = DiscretizationParams::with_grid(q(3, 10), q(81, 10_000)).unwrap();
        assert_eq!(DiscretizationParams::from_json(&p.to_json()).unwrap(), p);
        assert!(DiscretizationParams::with_grid(q(3, 10), q(1, 100)).is_err());
    }
}
