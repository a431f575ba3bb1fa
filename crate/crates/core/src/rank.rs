//! Structural ranking of a prerequisite DAG: the stationary distribution of a
//! random walk over reversed dependency edges with uniform restart.
//!
//! A walker at node `v` follows a reversed edge (child to parent) with
//! probability `beta`, otherwise restarts uniformly. Nodes without a parent are
//! dangling and jump uniformly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tsi::DependencyDag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConfig {
    pub beta: f64,
    /// L1 residual at which iteration stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { beta: 0.85, tol: 1e-13, max_iter: 1000 }
    }
}

pub fn structural_rank(dag: &DependencyDag, cfg: &RankConfig) -> Result<BTreeMap<u64, f64>> {
    if dag.is_empty() {
        return Err(Error::usage("structural rank of an empty graph"));
    }
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(Error::usage(format!("beta must lie in (0, 1), got {}", cfg.beta)));
    }
    let n = dag.len();
    let uniform = 1.0 / n as f64;
    // out[v] = target of v's reversed edge (its parent), if any.
    let mut out: Vec<Option<usize>> = vec![None; n];
    for (p, c) in dag.edges() {
        out[c] = Some(p);
    }

    let mut r = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let dangling: f64 = (0..n).filter(|&v| out[v].is_none()).map(|v| r[v]).sum();
        let base = (1.0 - cfg.beta) * uniform + cfg.beta * dangling * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for v in 0..n {
            if let Some(u) = out[v] {
                next[u] += cfg.beta * r[v];
            }
        }
        residual = r.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut r, &mut next);
        if residual <= cfg.tol {
            return Ok(dag.nodes().iter().copied().zip(r).collect());
        }
    }
    Err(Error::NoConvergence { iterations: cfg.max_iter, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    /// Dense solve of `(I - beta P^T) r = (1 - beta) u`.
    fn dense(dag: &DependencyDag, beta: f64) -> Vec<f64> {
        let n = dag.len();
        let mut p = DMatrix::<f64>::zeros(n, n); // p[(v, u)] = P(u | v)
        let mut has_out = vec![false; n];
        for (par, child) in dag.edges() {
            p[(child, par)] = 1.0;
            has_out[child] = true;
        }
        for v in 0..n {
            if !has_out[v] {
                for u in 0..n {
                    p[(v, u)] = 1.0 / n as f64;
                }
            }
        }
        let a = DMatrix::<f64>::identity(n, n) - p.transpose() * beta;
        let b = DVector::from_element(n, (1.0 - beta) / n as f64);
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn two_isolated_nodes_uniform() {
        let mut d = DependencyDag::new();
        d.add_node(1, 1).unwrap();
        d.add_node(2, 1).unwrap();
        let r = structural_rank(&d, &RankConfig::default()).unwrap();
        assert!((r[&1] - 0.5).abs() < 1e-12 && (r[&2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chain_matches_dense_solve() {
        let mut d = DependencyDag::new();
        for id in [10, 20, 30] {
            d.add_node(id, 1).unwrap();
        }
        d.add_edge(10, 20).unwrap();
        d.add_edge(20, 30).unwrap();
        let r = structural_rank(&d, &RankConfig::default()).unwrap();
        let want = dense(&d, 0.85);
        for (i, id) in [10, 20, 30].iter().enumerate() {
            assert!((r[id] - want[i]).abs() <= 1e-10);
        }
        assert!(r[&10] > r[&20] && r[&20] > r[&30]);
        assert!((r.values().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn errors() {
        assert!(structural_rank(&DependencyDag::new(), &RankConfig::default()).is_err());
        let mut d = DependencyDag::new();
        d.add_node(1, 1).unwrap();
        d.add_node(2, 1).unwrap();
        d.add_edge(1, 2).unwrap();
        let cfg = RankConfig { max_iter: 1, tol: 0.0, ..RankConfig::default() };
        assert!(matches!(structural_rank(&d, &cfg), Err(Error::NoConvergence { iterations: 1, .. })));
        assert!(structural_rank(&d, &RankConfig { beta: 1.0, ..RankConfig::default() }).is_err());
    }
}
