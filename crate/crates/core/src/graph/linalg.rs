//! Dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use super::WeightedGraph;

/// Weighted adjacency restricted to `nodes` (in the given order).
pub fn adjacency(g: &WeightedGraph, nodes: &[usize], unit: bool) -> DMatrix<f64> {
    let k = nodes.len();
    let mut pos = vec![usize::MAX; g.n()];
    for (i, &v) in nodes.iter().enumerate() {
        pos[v] = i;
    }
    let mut a = DMatrix::zeros(k, k);
    for (i, &u) in nodes.iter().enumerate() {
        for &(v, w) in g.neighbors(u) {
            if pos[v] != usize::MAX {
                a[(i, pos[v])] = if unit { 1.0 } else { w };
            }
        }
    }
    a
}

pub fn laplacian(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut l = -a.clone();
    for i in 0..a.nrows() {
        l[(i, i)] = a.row(i).sum();
    }
    l
}

/// Inverse of the Laplacian with the first node grounded, embedded back with a
/// zero first row and column. For a connected component this yields node
/// potentials `C b` for any balanced injection `b`, and effective resistances
/// `C_ss + C_tt - 2 C_st`.
pub fn grounded_inverse(l: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let k = l.nrows();
    let mut c = DMatrix::zeros(k, k);
    if k <= 1 {
        return Some(c);
    }
    let reduced = l.view((1, 1), (k - 1, k - 1)).clone_owned();
    let inv = reduced.cholesky()?.inverse();
    c.view_mut((1, 1), (k - 1, k - 1)).copy_from(&inv);
    Some(c)
}

pub fn symmetric_eigen(a: DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(a)
}
