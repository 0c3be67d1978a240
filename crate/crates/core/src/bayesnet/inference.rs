//! Exact inference by variable elimination.
//!
//! Only the ancestors of observed nodes are relevant to `P(evidence)`: every other
//! node is barren and sums out to one. Hidden ancestors are eliminated greedily,
//! always picking the variable whose combined factor is smallest (ties go to the
//! lowest node index, so the arithmetic is identical on every call).

use std::collections::HashMap;

use smallvec::SmallVec;

use super::{BayesNode, NodeId};
use crate::error::{Error, Result};

type Vars = SmallVec<[u32; 16]>;

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    parents: Vec<SmallVec<[u32; 4]>>,
    /// `P(node = true)` indexed by parent mask (bit `j` = parent `j` true).
    p_true: Vec<Vec<f64>>,
}

impl Compiled {
    pub(crate) fn new(nodes: &[BayesNode], index: &HashMap<NodeId, usize>) -> Result<Self> {
        let parents: Vec<SmallVec<[u32; 4]>> = nodes
            .iter()
            .map(|n| n.parents.iter().map(|p| index[p] as u32).collect())
            .collect();
        check_acyclic(nodes, &parents)?;
        let p_true = nodes
            .iter()
            .map(|n| {
                let k = n.parents.len();
                (0..1usize << k)
                    .map(|m| n.cpt.prob_for_mask(m, k))
                    .collect()
            })
            .collect();
        Ok(Compiled { parents, p_true })
    }

    pub(crate) fn len(&self) -> usize {
        self.parents.len()
    }

    /// `P(obs)` where `obs` holds `(node index, value)` pairs. Contradictory pairs
    /// for the same node give zero.
    pub(crate) fn evidence_probability(&self, obs: &[(usize, bool)]) -> f64 {
        if obs.is_empty() {
            return 1.0;
        }
        let n = self.len();
        // 0 = unobserved, 1 = false, 2 = true
        let mut value = vec![0u8; n];
        for &(i, v) in obs {
            let code = if v { 2 } else { 1 };
            if value[i] != 0 && value[i] != code {
                return 0.0;
            }
            value[i] = code;
        }

        let mut relevant = vec![false; n];
        let mut stack: Vec<usize> = obs.iter().map(|&(i, _)| i).collect();
        while let Some(v) = stack.pop() {
            if !relevant[v] {
                relevant[v] = true;
                stack.extend(self.parents[v].iter().map(|&p| p as usize));
            }
        }

        let mut factors: Vec<Factor> = (0..n)
            .filter(|&v| relevant[v])
            .map(|v| self.family_factor(v, &value))
            .collect();

        let mut hidden: Vec<u32> = (0..n)
            .filter(|&v| relevant[v] && value[v] == 0)
            .map(|v| v as u32)
            .collect();

        while !hidden.is_empty() {
            let (pick, _) = hidden
                .iter()
                .enumerate()
                .map(|(k, &v)| (k, union_width(&factors, v)))
                .min_by_key(|&(k, w)| (w, hidden[k]))
                .expect("hidden is non-empty");
            let var = hidden.swap_remove(pick);
            let (with, without): (Vec<Factor>, Vec<Factor>) =
                factors.into_iter().partition(|f| f.vars.contains(&var));
            factors = without;
            factors.push(sum_product(&with, var));
        }

        factors.iter().map(|f| f.table[0]).product()
    }

    /// Factor for `P(v | parents(v))` with observed members fixed.
    fn family_factor(&self, v: usize, value: &[u8]) -> Factor {
        let parents = &self.parents[v];
        let mut family: SmallVec<[u32; 8]> = parents.clone().into_iter().collect();
        family.push(v as u32);
        let mut vars: Vars = family
            .iter()
            .copied()
            .filter(|&u| value[u as usize] == 0)
            .collect();
        vars.sort_unstable();
        vars.dedup();

        let size = 1usize << vars.len();
        let mut table = Vec::with_capacity(size);
        for a in 0..size {
            let get = |u: u32| -> bool {
                match value[u as usize] {
                    0 => {
                        let pos = vars.iter().position(|&x| x == u).expect("hidden var");
                        a >> pos & 1 == 1
                    }
                    code => code == 2,
                }
            };
            let mask = parents
                .iter()
                .enumerate()
                .fold(0usize, |m, (j, &p)| if get(p) { m | 1 << j } else { m });
            let p = self.p_true[v][mask];
            table.push(if get(v as u32) { p } else { 1.0 - p });
        }
        Factor { vars, table }
    }
}

#[derive(Clone, Debug)]
struct Factor {
    /// Sorted node indices; bit `i` of a table index is the value of `vars[i]`.
    vars: Vars,
    table: Vec<f64>,
}

fn union_vars<'a>(factors: impl Iterator<Item = &'a Factor>) -> Vars {
    let mut u: Vars = SmallVec::new();
    for f in factors {
        u.extend(f.vars.iter().copied());
    }
    u.sort_unstable();
    u.dedup();
    u
}

fn union_width(factors: &[Factor], var: u32) -> usize {
    union_vars(factors.iter().filter(|f| f.vars.contains(&var))).len()
}

/// `sum_{var} prod_i factors[i]`.
fn sum_product(factors: &[Factor], var: u32) -> Factor {
    let union = union_vars(factors.iter());
    let pv = union.iter().position(|&x| x == var).expect("var in union");
    let positions: Vec<SmallVec<[u32; 16]>> = factors
        .iter()
        .map(|f| {
            f.vars
                .iter()
                .map(|v| union.iter().position(|x| x == v).unwrap() as u32)
                .collect()
        })
        .collect();
    let out_vars: Vars = union.iter().copied().filter(|&x| x != var).collect();
    let low_mask = (1usize << pv) - 1;
    let size = 1usize << out_vars.len();
    let mut table = Vec::with_capacity(size);
    for r in 0..size {
        let base = (r & low_mask) | ((r & !low_mask) << 1);
        let mut acc = 0.0;
        for x in 0..2usize {
            let u = base | x << pv;
            let mut prod = 1.0;
            for (f, pos) in factors.iter().zip(&positions) {
                let idx = pos
                    .iter()
                    .enumerate()
                    .fold(0usize, |i, (j, &p)| i | (u >> p & 1) << j);
                prod *= f.table[idx];
            }
            acc += prod;
        }
        table.push(acc);
    }
    Factor {
        vars: out_vars,
        table,
    }
}

fn check_acyclic(nodes: &[BayesNode], parents: &[SmallVec<[u32; 4]>]) -> Result<()> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = parents.iter().map(|p| p.len()).collect();
    let mut children = vec![Vec::new(); n];
    for (v, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p as usize].push(v);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    if seen != n {
        let stuck = (0..n).find(|&v| indegree[v] > 0).unwrap();
        return Err(Error::InvalidNetwork(format!(
            "graph has a cycle through `{}`",
            nodes[stuck].id
        )));
    }
    Ok(())
}
