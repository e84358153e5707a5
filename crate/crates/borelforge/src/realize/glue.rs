//! Partition-of-unity gluing of local expressions on a box decomposition.

use super::RealizeError;
use crate::smoothfn::expr::{ExprBuilder, NodeId, SmoothExpr};
use crate::smoothfn::set::Region;

/// Each cell is widened by this fraction of its size on every side.
pub const OVERLAP: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct GlueCell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub expr: SmoothExpr,
}

/// Weight equal to 1 on the cell and 0 off its widened box.
fn weight(b: &mut ExprBuilder, c: &GlueCell) -> (NodeId, Vec<(f64, f64)>) {
    let mut factors = Vec::new();
    let mut bx = Vec::new();
    for (i, (lo, hi)) in c.lo.iter().zip(&c.hi).enumerate() {
        let w = OVERLAP * (hi - lo);
        let x = b.coord(i);
        let up = b.affine(x, 1.0 / w, -(lo - w) / w);
        let down = b.affine(x, -1.0 / w, (hi + w) / w);
        factors.push(b.step(up));
        factors.push(b.step(down));
        bx.push((lo - w, hi + w));
    }
    (b.mul(factors), bx)
}

/// `sum_i psi_i f_i / sum_i psi_i`; the cells must cover the region.
pub fn glue(cells: &[GlueCell], region: &Region) -> Result<SmoothExpr, RealizeError> {
    let dim = region.dim();
    if cells.is_empty() {
        return Err(RealizeError::Unsupported("no cells to glue".into()));
    }
    for c in cells {
        if c.lo.len() != dim || c.hi.len() != dim || c.expr.dim() != dim {
            return Err(RealizeError::Dimension);
        }
        if c.lo.iter().zip(&c.hi).any(|(a, b)| !(a < b)) {
            return Err(RealizeError::Unsupported("empty glue cell".into()));
        }
    }
    let covered = |p: &Vec<f64>| cells.iter().any(|c| p.iter().enumerate().all(|(i, v)| *v >= c.lo[i] && *v <= c.hi[i]));
    if let Some(p) = region.grid(if dim == 1 { 1001 } else { 101 }).iter().find(|p| !covered(p)) {
        return Err(RealizeError::Unsupported(format!("cells do not cover {p:?}")));
    }
    let mut b = ExprBuilder::new(region);
    let mut num = Vec::new();
    let mut den = Vec::new();
    for c in cells {
        let (psi, bx) = weight(&mut b, c);
        let f = b.embed(&c.expr);
        let t = b.mul(vec![psi, f]);
        num.push((t, Some(vec![bx.clone()])));
        den.push((psi, Some(vec![bx])));
    }
    let n = b.sum(num);
    let d = b.sum(den);
    // some weight is 1 at every covered point
    let q = b.div(n, d, 0.5);
    Ok(b.finish(q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rat;

    #[test]
    fn gluing_a_global_function_returns_it() {
        let r = Region::interval(Rat::int(0), Rat::int(2));
        let mut b = ExprBuilder::new(&r);
        let x = b.coord(0);
        let s = b.pow(x, 3);
        let f = b.finish(s).unwrap();
        let cells = vec![
            GlueCell { lo: vec![0.0], hi: vec![1.0], expr: f.clone() },
            GlueCell { lo: vec![1.0], hi: vec![2.0], expr: f.clone() },
        ];
        let g = glue(&cells, &r).unwrap();
        for p in [0.0, 0.9, 1.0, 1.1, 1.7, 2.0] {
            let a = g.eval_derivs(&[p], 3).unwrap();
            let w = f.eval_derivs(&[p], 3).unwrap();
            for (u, v) in a.iter().zip(&w) {
                assert!((u - v).abs() < 1e-10 * v.abs().max(1.0), "{p}: {a:?} {w:?}");
            }
        }
    }

    #[test]
    fn uncovered_region_is_rejected() {
        let r = Region::interval(Rat::int(0), Rat::int(2));
        let cells = vec![GlueCell { lo: vec![0.0], hi: vec![1.0], expr: SmoothExpr::zero(&r) }];
        assert!(glue(&cells, &r).is_err());
    }
}
