//! Big-integer packing instances encoding the satisfying-assignment count
//! of a symmetric 4CNF.
//!
//! Sizes are base-10 numbers with `4n + m` digits split into four blocks:
//! variable digits, mirror digits, equivalence digit pairs and clause
//! digits. The capacity is `1ⁿ | 1ⁿ | 1²ⁿ | 4ᵐ`.

use num_bigint::BigInt;
use num_traits::{One, Pow, Zero};
use serde_json::{json, Value};

use crate::dist::SizeDistribution;
use crate::error::{Error, Result};
use crate::generators::cnf::Cnf;
use crate::instance::Instance;
use crate::num::{q, qi, Q};

/// Penalty used when none is given.
pub const DEFAULT_PENALTY: i64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Random item for variable `i`, first copy.
    X(usize),
    /// Random item for variable `i`, second copy.
    XPrime(usize),
    C(usize),
    D(usize),
    F(usize),
    G(usize),
    H(usize),
    /// The final item with a one in every clause digit.
    Total,
}

impl Role {
    pub fn label(&self) -> String {
        match self {
            Role::X(i) => format!("X{i}"),
            Role::XPrime(i) => format!("X{i}'"),
            Role::C(i) => format!("c{i}"),
            Role::D(i) => format!("d{i}"),
            Role::F(j) => format!("f{j}"),
            Role::G(j) => format!("g{j}"),
            Role::H(j) => format!("h{j}"),
            Role::Total => "h".into(),
        }
    }
}

/// Digit positions, as powers of ten. Variables and clauses are 1-based.
#[derive(Clone, Copy, Debug)]
pub struct DigitLayout {
    pub n: u32,
    pub m: u32,
}

impl DigitLayout {
    pub fn width(&self) -> u32 {
        4 * self.n + self.m
    }
    pub fn var(&self, i: u32) -> u32 {
        4 * self.n + self.m - i
    }
    pub fn mirror(&self, i: u32) -> u32 {
        3 * self.n + self.m - i
    }
    pub fn pos_eq(&self, i: u32) -> u32 {
        2 * self.n - 2 * i + 1 + self.m
    }
    pub fn neg_eq(&self, i: u32) -> u32 {
        2 * self.n - 2 * i + self.m
    }
    pub fn clause(&self, j: u32) -> u32 {
        self.m - j
    }

    /// Decimal digits, most significant first, zero-padded to the layout
    /// width. `None` when `x` does not fit.
    pub fn digits(&self, x: &BigInt) -> Option<Vec<u8>> {
        let s = x.to_str_radix(10);
        let w = self.width() as usize;
        if s.len() > w || x < &BigInt::zero() {
            return None;
        }
        let mut d = vec![0u8; w - s.len()];
        d.extend(s.bytes().map(|b| b - b'0'));
        Some(d)
    }

    /// Digits with `|` between blocks.
    pub fn render(&self, x: &BigInt) -> String {
        let d = match self.digits(x) {
            Some(d) => d,
            None => return x.to_string(),
        };
        let n = self.n as usize;
        let cuts = [n, 2 * n, 4 * n];
        let mut s = String::new();
        for (k, v) in d.iter().enumerate() {
            if cuts.contains(&k) && k > 0 {
                s.push('|');
            }
            s.push((b'0' + v) as char);
        }
        s
    }
}

pub fn pow10(e: u32) -> BigInt {
    Pow::pow(BigInt::from(10u32), e)
}

#[derive(Clone, Debug)]
pub struct ReductionArtifacts {
    pub formula: Cnf,
    pub instance: Instance,
    pub capacity: BigInt,
    pub layout: DigitLayout,
    pub roles: Vec<Role>,
    pub a: Vec<BigInt>,
    pub b: Vec<BigInt>,
    pub c: Vec<BigInt>,
    pub d: Vec<BigInt>,
    /// `f_j = g_j = h_j`.
    pub slack: Vec<BigInt>,
    pub h: BigInt,
}

impl ReductionArtifacts {
    pub fn n_vars(&self) -> usize {
        self.layout.n as usize
    }

    pub fn n_clauses(&self) -> usize {
        self.layout.m as usize
    }

    /// Role, support values and digit rendering of every item.
    pub fn metadata_json(&self) -> Value {
        let items: Vec<Value> = self
            .roles
            .iter()
            .enumerate()
            .map(|(t, r)| {
                let support: Vec<BigInt> = self
                    .instance
                    .item(t)
                    .atoms()
                    .unwrap()
                    .iter()
                    .map(|a| a.value.to_integer())
                    .collect();
                json!({
                    "index": t,
                    "role": r.label(),
                    "support": support.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                    "digits": support.iter().map(|v| self.layout.render(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "formula": self.formula.to_dimacs(),
            "n_vars": self.layout.n,
            "n_clauses": self.layout.m,
            "capacity": self.capacity.to_string(),
            "capacity_digits": self.layout.render(&self.capacity),
            "blocks": ["variable", "mirror", "equivalence", "clause"],
            "items": items,
        })
    }
}

/// Builds the instance. `penalty` must exceed 2.
pub fn reduction_instance(phi: &Cnf, penalty: &Q) -> Result<ReductionArtifacts> {
    if penalty <= &qi(2) {
        return Err(Error::InvalidParams("reduction penalty must exceed 2".into()));
    }
    if !phi.is_symmetric()? {
        return Err(Error::NotSymmetric);
    }
    let (n, m) = (phi.n_vars, phi.clauses.len());
    let layout = DigitLayout { n: n as u32, m: m as u32 };
    let mut occ_pos = vec![vec![0usize; m]; n + 1];
    let mut occ_neg = vec![vec![0usize; m]; n + 1];
    for (k, cl) in phi.clauses.iter().enumerate() {
        for &l in cl {
            let v = l.unsigned_abs() as usize;
            if l > 0 {
                occ_pos[v][k] += 1;
            } else {
                occ_neg[v][k] += 1;
            }
        }
        for v in 1..=n {
            let count = occ_pos[v][k] + occ_neg[v][k];
            if count > 2 {
                return Err(Error::OccurrenceBound { var: v, clause: k + 1, count });
            }
        }
    }
    let p = |e: u32| pow10(e);
    let mut capacity = BigInt::zero();
    for e in 0..m as u32 {
        capacity += BigInt::from(4) * p(e);
    }
    for e in m as u32..layout.width() {
        capacity += p(e);
    }
    let clause_digits = |occ: &[usize]| -> BigInt {
        occ.iter().enumerate().map(|(k, &c)| BigInt::from(c) * p(layout.clause(k as u32 + 1))).sum()
    };
    let (mut a, mut b, mut c, mut d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 1..=n as u32 {
        a.push(p(layout.var(i)) + p(layout.neg_eq(i)));
        b.push(p(layout.var(i)) + p(layout.pos_eq(i)));
        c.push(p(layout.mirror(i)) + p(layout.pos_eq(i)) + clause_digits(&occ_pos[i as usize]));
        d.push(p(layout.mirror(i)) + p(layout.neg_eq(i)) + clause_digits(&occ_neg[i as usize]));
    }
    let slack: Vec<BigInt> = (1..=m as u32).map(|j| p(layout.clause(j))).collect();
    let h: BigInt = slack.iter().sum();

    let int = |x: &BigInt| Q::from_integer(x.clone());
    let mut items = Vec::new();
    let mut roles = Vec::new();
    for i in 0..n {
        let law = SizeDistribution::discrete(vec![(int(&a[i]), q(1, 2)), (int(&b[i]), q(1, 2))])?;
        items.push(law.clone());
        roles.push(Role::X(i + 1));
        items.push(law);
        roles.push(Role::XPrime(i + 1));
    }
    for i in 0..n {
        items.push(SizeDistribution::point(int(&c[i]))?);
        roles.push(Role::C(i + 1));
        items.push(SizeDistribution::point(int(&d[i]))?);
        roles.push(Role::D(i + 1));
    }
    for j in 0..m {
        for role in [Role::F(j + 1), Role::G(j + 1), Role::H(j + 1)] {
            items.push(SizeDistribution::point(int(&slack[j]))?);
            roles.push(role);
        }
    }
    if m > 0 {
        items.push(SizeDistribution::point(int(&h))?);
        roles.push(Role::Total);
    }
    let instance = Instance::new(items, penalty.clone(), int(&capacity))?;
    Ok(ReductionArtifacts { formula: phi.clone(), instance, capacity, layout, roles, a, b, c, d, slack, h })
}

/// `5/2 − 2/2ⁿ − s/2²ⁿ`.
pub fn reduction_value(n_vars: usize, s: u64) -> Result<Q> {
    if n_vars >= 63 || s > 1u64 << n_vars {
        return Err(Error::CountOutOfRange { count: s.to_string(), n_vars });
    }
    let two_n = Q::from_integer(BigInt::one() << n_vars);
    Ok(q(5, 2) - qi(2) / &two_n - Q::from_integer(BigInt::from(s)) / (&two_n * &two_n))
}

/// `5/2 + 1/2ⁿ⁺¹ − s/2²ⁿ`, the value of the case split
/// `3·P(E_b) + 2·P(E_a) + (3 − s/2ⁿ)·P(E)` with `P(E) = 1/2ⁿ` and
/// `P(E_a) = P(E_b) = (1 − 1/2ⁿ)/2`. This is what the restricted search
/// returns; [`reduction_value`] differs from it by `5/2ⁿ⁺¹`.
pub fn reduction_value_corrected(n_vars: usize, s: u64) -> Result<Q> {
    let stated = reduction_value(n_vars, s)?;
    let two_n = Q::from_integer(BigInt::one() << n_vars);
    Ok(stated + q(5, 2) / two_n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::cnf::symmetrize_2cnf;

    fn sample() -> ReductionArtifacts {
        let phi = symmetrize_2cnf(&Cnf::new(1, vec![vec![1, 1]]).unwrap()).unwrap();
        reduction_instance(&phi, &qi(10)).unwrap()
    }

    #[test]
    fn capacity_digits() {
        let r = sample();
        let (n, m) = (r.n_vars(), r.n_clauses());
        let want = format!("{}|{}|{}|{}", "1".repeat(n), "1".repeat(n), "1".repeat(2 * n), "4".repeat(m));
        assert_eq!(r.layout.render(&r.capacity), want);
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(reduction_value(1, 0).unwrap(), q(3, 2));
        assert_eq!(reduction_value(2, 4).unwrap(), q(7, 4));
        assert_eq!(reduction_value(2, 0).unwrap(), qi(2));
        assert!(reduction_value(2, 5).is_err());
        assert_eq!(reduction_value_corrected(1, 0).unwrap(), q(11, 4));
        assert_eq!(reduction_value_corrected(2, 2).unwrap(), q(5, 2));
    }

    #[test]
    fn rejects_asymmetric() {
        let phi = Cnf::new(2, vec![vec![1, 1, 2, 2]]).unwrap();
        assert!(matches!(reduction_instance(&phi, &qi(10)), Err(Error::NotSymmetric)));
    }

    #[test]
    fn item_order() {
        let r = sample();
        let n = r.n_vars();
        assert_eq!(r.roles[0], Role::X(1));
        assert_eq!(r.roles[1], Role::XPrime(1));
        assert_eq!(r.roles[2 * n], Role::C(1));
        assert_eq!(r.roles[4 * n], Role::F(1));
        assert_eq!(*r.roles.last().unwrap(), Role::Total);
        assert_eq!(r.instance.len(), 4 * n + 3 * r.n_clauses() + 1);
    }
}
