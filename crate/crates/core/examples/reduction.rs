//! Counting reduction: a 2CNF formula becomes an instance whose optimal cost
//! encodes the number of satisfying assignments.

use adaptive_binpack::exact::{constructive_policy_value, restricted_policy_search, SearchLimits};
use adaptive_binpack::generators::reduction::DEFAULT_PENALTY;
use adaptive_binpack::generators::{
    count_sat_bruteforce, reduction_instance, reduction_value, reduction_value_corrected, symmetrize_2cnf, Cnf,
};
use adaptive_binpack::num::{fmt_rational, qi};

fn main() -> adaptive_binpack::Result<()> {
    let phi = Cnf::parse_dimacs("p cnf 2 2\n1 2 0\n-1 -2 0\n")?;
    let sym = symmetrize_2cnf(&phi)?;
    println!("φ = {phi}\nsymmetrized: {sym}");
    let s = count_sat_bruteforce(&sym)?;
    let art = reduction_instance(&sym, &qi(DEFAULT_PENALTY))?;
    println!("{} items, {} satisfying assignments", art.instance.len(), s);
    let search = restricted_policy_search(&art, &SearchLimits::default())?;
    println!("searched optimum     {}", fmt_rational(&search.value));
    println!("constructive policy  {}", fmt_rational(&constructive_policy_value(&art)?));
    println!("closed form (stated) {}", fmt_rational(&reduction_value(sym.n_vars, s)?));
    println!("closed form (fixed)  {}", fmt_rational(&reduction_value_corrected(sym.n_vars, s)?));
    println!("digit carries        {}", search.carries);
    Ok(())
}
