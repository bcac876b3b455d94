//! CNF formulas, satisfying-assignment counting and symmetrization.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Literals are `±i` for variable `i` in `1..=n_vars`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    pub n_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    pub fn new(n_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Self> {
        for (j, c) in clauses.iter().enumerate() {
            if c.is_empty() {
                return Err(Error::Parse(format!("clause {} is empty", j + 1)));
            }
            for &l in c {
                if l == 0 || l.unsigned_abs() as usize > n_vars {
                    return Err(Error::Parse(format!("literal {l} out of range in clause {}", j + 1)));
                }
            }
        }
        Ok(Self { n_vars, clauses })
    }

    /// DIMACS: optional `c` comments, a `p cnf N M` header, clauses
    /// terminated by `0`.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut n_vars = None;
        let mut clauses = Vec::new();
        let mut cur = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('p') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                if f.len() != 3 || f[0] != "cnf" {
                    return Err(Error::Parse(format!("bad header {line:?}")));
                }
                n_vars = Some(f[1].parse().map_err(|_| Error::Parse(format!("bad header {line:?}")))?);
                continue;
            }
            for tok in line.split_whitespace() {
                let l: i32 = tok.parse().map_err(|_| Error::Parse(format!("bad literal {tok:?}")))?;
                if l == 0 {
                    clauses.push(std::mem::take(&mut cur));
                } else {
                    cur.push(l);
                }
            }
        }
        if !cur.is_empty() {
            clauses.push(cur);
        }
        let n = match n_vars {
            Some(n) => n,
            None => clauses.iter().flatten().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0),
        };
        Self::new(n, clauses)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n_vars, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                s += &format!("{l} ");
            }
            s += "0\n";
        }
        s
    }

    /// Bit `i-1` of `assignment` is the value of variable `i`.
    pub fn eval(&self, assignment: u64) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = assignment >> (l.unsigned_abs() - 1) & 1 == 1;
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }

    pub fn width(&self) -> Option<usize> {
        let w = self.clauses.first()?.len();
        self.clauses.iter().all(|c| c.len() == w).then_some(w)
    }

    fn all_ones(&self) -> u64 {
        if self.n_vars == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_vars) - 1
        }
    }

    /// `φ(x) = φ(x̄)` for every assignment. Checked syntactically (clause set
    /// closed under negation), else by enumeration when `n ≤ 24`.
    pub fn is_symmetric(&self) -> Result<bool> {
        let canon = |c: &[i32]| -> Vec<i32> {
            let mut v = c.to_vec();
            v.sort_unstable();
            v
        };
        let set: BTreeSet<Vec<i32>> = self.clauses.iter().map(|c| canon(c)).collect();
        let closed = self.clauses.iter().all(|c| {
            let neg: Vec<i32> = c.iter().map(|l| -l).collect();
            set.contains(&canon(&neg))
        });
        if closed {
            return Ok(true);
        }
        if self.n_vars > 24 {
            return Err(Error::TooManyVariables(self.n_vars));
        }
        let full = self.all_ones();
        Ok((0..=full).all(|a| self.eval(a) == self.eval(!a & full)))
    }
}

impl fmt::Display for Cnf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lit = |l: i32| if l > 0 { format!("x{l}") } else { format!("¬x{}", -l) };
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| format!("({})", c.iter().map(|&l| lit(l)).collect::<Vec<_>>().join(" ∨ ")))
            .collect();
        if parts.is_empty() {
            write!(f, "true")
        } else {
            write!(f, "{}", parts.join(" ∧ "))
        }
    }
}

pub fn count_sat_bruteforce(phi: &Cnf) -> Result<u64> {
    if phi.n_vars > 24 {
        return Err(Error::TooManyVariables(phi.n_vars));
    }
    Ok((0..1u64 << phi.n_vars).filter(|&a| phi.eval(a)).count() as u64)
}

/// Adds a variable `x0` (numbered 1 in the output; inputs shift up by one)
/// and returns the symmetric 4CNF of `(¬x0 ∧ φ(x)) ∨ (x0 ∧ φ(x̄))`, whose
/// count is twice that of `φ`. Tautological clauses are dropped.
pub fn symmetrize_2cnf(phi: &Cnf) -> Result<Cnf> {
    if let Some(j) = phi.clauses.iter().position(|c| c.len() != 2) {
        return Err(Error::NotWidth2(j + 1));
    }
    let sh = |l: i32| if l > 0 { l + 1 } else { l - 1 };
    let pos: Vec<[i32; 2]> = phi.clauses.iter().map(|c| [sh(c[0]), sh(c[1])]).collect();
    let mut out = Vec::new();
    for c in &pos {
        out.push(vec![1, 1, c[0], c[1]]);
    }
    for c in &pos {
        out.push(vec![-1, -1, -c[0], -c[1]]);
    }
    for cj in &pos {
        for ck in &pos {
            let cl = vec![cj[0], cj[1], -ck[0], -ck[1]];
            let taut = cl.iter().any(|l| cl.contains(&-l));
            if !taut {
                out.push(cl);
            }
        }
    }
    Cnf::new(phi.n_vars + 1, out)
}
