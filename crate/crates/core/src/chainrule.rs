//! Lifted chain rule for cascades of two-ports.
//!
//! Each element relates its output port to its input port through
//! `[v_out; i_out] = [D −B; −C A] [v_in; i_in]` in lifted form, with every
//! entry a `(X_{i,0}, X_{i,1})` pair. With inter-block interference the
//! cascade follows a two-term recursion that needs the partial cascade at the
//! previous block index; with trailing zeros only the `_{i,0}` blocks matter
//! and the cascade is a plain product of `2P×2P` matrices.

use crate::error::{Error, Result};
use crate::kernels::AbcdKernels;
use crate::lifting::{enforce_band, enforce_corner, lift_lti, lift_ltv, LiftedPair, TvTaps};
use crate::linalg::{max_abs, CMatrix, C64};

/// Entries outside the declared structure smaller than this, relative to the
/// matrix maximum, are rounding and get zeroed.
pub const STRUCTURE_TOL: f64 = 1e-14;

/// Lifted ABCD kernels of one element or a partial cascade at block index `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedTwoPort {
    pub a0: CMatrix,
    pub a1: CMatrix,
    pub b0: CMatrix,
    pub b1: CMatrix,
    pub c0: CMatrix,
    pub c1: CMatrix,
    pub d0: CMatrix,
    pub d1: CMatrix,
    pub p: usize,
    pub l: usize,
    pub block_index: i64,
    /// Alignment shift, in samples, carried by the kernels.
    pub delay: usize,
}

/// The `_{i,0}` blocks only, as used with trailing zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct TzBlocks {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
    pub p: usize,
    pub l: usize,
    pub delay: usize,
}

fn check_block(p: usize, l: usize) -> Result<()> {
    if p <= l {
        Err(Error::BlockTooSmall { p, l })
    } else {
        Ok(())
    }
}

impl LiftedTwoPort {
    pub fn identity(p: usize) -> Self {
        let z = CMatrix::zeros(p, p);
        let i = CMatrix::identity(p, p);
        Self {
            a0: i.clone(),
            a1: z.clone(),
            b0: z.clone(),
            b1: z.clone(),
            c0: z.clone(),
            c1: z.clone(),
            d0: i,
            d1: z,
            p,
            l: 0,
            block_index: 0,
            delay: 0,
        }
    }

    /// Assembles the element from four lifted pairs sharing `p`; the declared
    /// memory is the largest of theirs.
    pub fn from_pairs(a: LiftedPair, b: LiftedPair, c: LiftedPair, d: LiftedPair, delay: usize) -> Result<Self> {
        let p = a.p;
        if [b.p, c.p, d.p].iter().any(|&q| q != p) {
            return Err(Error::InvalidParameter("lifted pairs differ in block size".into()));
        }
        let l = a.l.max(b.l).max(c.l).max(d.l);
        check_block(p, l)?;
        Ok(Self {
            a0: a.h0,
            a1: a.h1,
            b0: b.h0,
            b1: b.h1,
            c0: c.h0,
            c1: c.h1,
            d0: d.h0,
            d1: d.h1,
            p,
            l,
            block_index: a.block_index,
            delay,
        })
    }

    pub fn from_kernels(k: &AbcdKernels, p: usize) -> Result<Self> {
        Self::from_pairs(
            lift_lti(&k.a, p)?,
            lift_lti(&k.b, p)?,
            lift_lti(&k.c, p)?,
            lift_lti(&k.d, p)?,
            k.shift,
        )
    }

    pub fn from_tv(a: &dyn TvTaps, b: &dyn TvTaps, c: &dyn TvTaps, d: &dyn TvTaps, p: usize, i: i64) -> Result<Self> {
        Self::from_pairs(
            lift_ltv(a, p, i)?,
            lift_ltv(b, p, i)?,
            lift_ltv(c, p, i)?,
            lift_ltv(d, p, i)?,
            0,
        )
    }

    /// Shunt element: only the `C` kernel is nontrivial.
    pub fn shunt(c: LiftedPair) -> Self {
        let mut x = Self::identity(c.p);
        x.l = c.l;
        x.block_index = c.block_index;
        x.c0 = c.h0;
        x.c1 = c.h1;
        x
    }

    /// Series element: only the `B` kernel is nontrivial.
    pub fn series(b: LiftedPair) -> Self {
        let mut x = Self::identity(b.p);
        x.l = b.l;
        x.block_index = b.block_index;
        x.b0 = b.h0;
        x.b1 = b.h1;
        x
    }

    pub fn pair(&self, which: char) -> LiftedPair {
        let (h0, h1) = match which {
            'a' => (&self.a0, &self.a1),
            'b' => (&self.b0, &self.b1),
            'c' => (&self.c0, &self.c1),
            'd' => (&self.d0, &self.d1),
            _ => panic!("ABCD entry must be one of a, b, c, d"),
        };
        LiftedPair {
            h0: h0.clone(),
            h1: h1.clone(),
            p: self.p,
            l: self.l,
            block_index: self.block_index,
        }
    }

    pub fn check_structure(&self) -> Result<()> {
        for w in ['a', 'b', 'c', 'd'] {
            self.pair(w).check_structure().map_err(|e| match e {
                Error::Structure(m) => Error::Structure(format!("{w}: {m}")),
                other => other,
            })?;
        }
        Ok(())
    }

    fn zeros_like(&self) -> [&CMatrix; 4] {
        [&self.a1, &self.b1, &self.c1, &self.d1]
    }

    pub fn tz(&self) -> TzBlocks {
        TzBlocks {
            a: self.a0.clone(),
            b: self.b0.clone(),
            c: self.c0.clone(),
            d: self.d0.clone(),
            p: self.p,
            l: self.l,
            delay: self.delay,
        }
    }
}

/// Zeroes entries outside band (`_0`) or corner (`_1`) of order `l`, failing
/// if anything larger than rounding had to be removed.
fn settle(m: &mut CMatrix, l: usize, corner: bool, name: &str) -> Result<()> {
    let scale = max_abs(m);
    let removed = if corner { enforce_corner(m, l) } else { enforce_band(m, l) };
    if removed > STRUCTURE_TOL * scale {
        return Err(Error::Structure(format!(
            "{name} has an entry of size {removed:.3e} outside its order-{l} structure"
        )));
    }
    Ok(())
}

/// Verifies that every corner of `right` times every corner of `left` is zero
/// by checking the rows of `left`'s corners that `right`'s corners can reach.
fn assert_corner_products_vanish(left: &LiftedTwoPort, right: &LiftedTwoPort) -> Result<()> {
    let p = left.p;
    let reach = right.l.min(p);
    for (name, m) in ['a', 'b', 'c', 'd'].iter().zip(left.zeros_like()) {
        for r in (p - reach)..p {
            if m.row(r).iter().any(|&v| v != C64::new(0.0, 0.0)) {
                return Err(Error::Structure(format!(
                    "corner product does not vanish: left {name}_1 row {r} is nonzero within reach of the right element's memory {}",
                    right.l
                )));
            }
        }
    }
    Ok(())
}

/// Appends element `right` (index `i`) to the partial cascade `left`
/// (index `i`), given the partial cascade's `_{i−1,0}` blocks `left_prev`.
pub fn cascade_ibi(left: &LiftedTwoPort, left_prev: &TzBlocks, right: &LiftedTwoPort) -> Result<LiftedTwoPort> {
    if left.p != right.p || left_prev.p != left.p {
        return Err(Error::InvalidParameter("cascade operands differ in block size".into()));
    }
    let l = left.l + right.l;
    check_block(left.p, l)?;
    left.check_structure()?;
    right.check_structure()?;
    assert_corner_products_vanish(left, right)?;

    let (ck, ak, dk, bk) = (&right.c0, &right.a0, &right.d0, &right.b0);
    let (ck1, ak1, dk1, bk1) = (&right.c1, &right.a1, &right.d1, &right.b1);
    let mut out = LiftedTwoPort {
        a0: ck * &left.b0 + ak * &left.a0,
        a1: ck1 * &left_prev.b + ck * &left.b1 + ak1 * &left_prev.a + ak * &left.a1,
        b0: dk * &left.b0 + bk * &left.a0,
        b1: dk1 * &left_prev.b + dk * &left.b1 + bk1 * &left_prev.a + bk * &left.a1,
        c0: ck * &left.d0 + ak * &left.c0,
        c1: ck1 * &left_prev.d + ck * &left.d1 + ak1 * &left_prev.c + ak * &left.c1,
        d0: dk * &left.d0 + bk * &left.c0,
        d1: dk1 * &left_prev.d + dk * &left.d1 + bk1 * &left_prev.c + bk * &left.c1,
        p: left.p,
        l,
        block_index: right.block_index,
        delay: left.delay + right.delay,
    };
    settle(&mut out.a0, l, false, "A_0")?;
    settle(&mut out.b0, l, false, "B_0")?;
    settle(&mut out.c0, l, false, "C_0")?;
    settle(&mut out.d0, l, false, "D_0")?;
    settle(&mut out.a1, l, true, "A_1")?;
    settle(&mut out.b1, l, true, "B_1")?;
    settle(&mut out.c1, l, true, "C_1")?;
    settle(&mut out.d1, l, true, "D_1")?;
    Ok(out)
}

/// Full cascade at block index `i` from each element at `i` and at `i − 1`
/// (pass the same slice twice for time-invariant elements).
pub fn cascade_chain_ibi(at_i: &[LiftedTwoPort], at_prev: &[LiftedTwoPort]) -> Result<LiftedTwoPort> {
    if at_i.is_empty() || at_i.len() != at_prev.len() {
        return Err(Error::InvalidParameter(
            "cascade needs matching, nonempty element lists for indices i and i − 1".into(),
        ));
    }
    let mut state = at_i[0].clone();
    let mut prev = at_prev[0].tz();
    for (cur, before) in at_i[1..].iter().zip(&at_prev[1..]) {
        state = cascade_ibi(&state, &prev, cur)?;
        prev = cascade_tz_step(&prev, &before.tz())?;
    }
    Ok(state)
}

/// One step of the trailing-zeros recursions.
pub fn cascade_tz_step(left: &TzBlocks, right: &TzBlocks) -> Result<TzBlocks> {
    if left.p != right.p {
        return Err(Error::InvalidParameter("cascade operands differ in block size".into()));
    }
    let l = left.l + right.l;
    check_block(left.p, l)?;
    let mut out = TzBlocks {
        a: &right.c * &left.b + &right.a * &left.a,
        b: &right.d * &left.b + &right.b * &left.a,
        c: &right.c * &left.d + &right.a * &left.c,
        d: &right.d * &left.d + &right.b * &left.c,
        p: left.p,
        l,
        delay: left.delay + right.delay,
    };
    for (m, name) in [(&mut out.a, "A"), (&mut out.b, "B"), (&mut out.c, "C"), (&mut out.d, "D")] {
        settle(m, l, false, name)?;
    }
    Ok(out)
}

/// Trailing-zeros cascade through the incremental recursions.
pub fn cascade_tz_recursive(elements: &[TzBlocks]) -> Result<TzBlocks> {
    let (first, rest) = elements
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("cascade needs at least one element".into()))?;
    rest.iter().try_fold(first.clone(), |acc, e| cascade_tz_step(&acc, e))
}

/// Trailing-zeros cascade as the ordered product of `[D −B; −C A]` blocks,
/// last element leftmost.
pub fn cascade_tz(elements: &[TzBlocks]) -> Result<TzBlocks> {
    let first = elements
        .first()
        .ok_or_else(|| Error::InvalidParameter("cascade needs at least one element".into()))?;
    let p = first.p;
    if elements.iter().any(|e| e.p != p) {
        return Err(Error::InvalidParameter("cascade operands differ in block size".into()));
    }
    let l: usize = elements.iter().map(|e| e.l).sum();
    check_block(p, l)?;
    let delay = elements.iter().map(|e| e.delay).sum();

    let backward = |e: &TzBlocks| {
        let mut m = CMatrix::zeros(2 * p, 2 * p);
        m.view_mut((0, 0), (p, p)).copy_from(&e.d);
        m.view_mut((0, p), (p, p)).copy_from(&(-&e.b));
        m.view_mut((p, 0), (p, p)).copy_from(&(-&e.c));
        m.view_mut((p, p), (p, p)).copy_from(&e.a);
        m
    };
    let mut prod = backward(first);
    for e in &elements[1..] {
        prod = backward(e) * prod;
    }
    let mut out = TzBlocks {
        d: prod.view((0, 0), (p, p)).into_owned(),
        b: -prod.view((0, p), (p, p)).into_owned(),
        c: -prod.view((p, 0), (p, p)).into_owned(),
        a: prod.view((p, p), (p, p)).into_owned(),
        p,
        l,
        delay,
    };
    for (m, name) in [(&mut out.a, "A"), (&mut out.b, "B"), (&mut out.c, "C"), (&mut out.d, "D")] {
        settle(m, l, false, name)?;
    }
    Ok(out)
}

/// Largest entrywise difference between two block sets, relative to the
/// largest entry of `reference`.
pub fn tz_relative_difference(x: &TzBlocks, reference: &TzBlocks) -> f64 {
    let pairs = [(&x.a, &reference.a), (&x.b, &reference.b), (&x.c, &reference.c), (&x.d, &reference.d)];
    let scale = pairs.iter().map(|(_, r)| max_abs(r)).fold(0.0, f64::max);
    let diff = pairs.iter().map(|(a, r)| max_abs(&(*a - *r))).fold(0.0, f64::max);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::DtKernel;
    use crate::lifting::lift_lti;
    use crate::linalg::ONE;

    fn re(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    fn lifted_shunt(k: f64, p: usize) -> LiftedTwoPort {
        LiftedTwoPort::shunt(lift_lti(&DtKernel::scaled_delta(re(k), 1.0), p).unwrap())
    }

    fn lifted_series(taps: &[f64], p: usize) -> LiftedTwoPort {
        LiftedTwoPort::series(lift_lti(&DtKernel::from_real(taps, 1.0), p).unwrap())
    }

    #[test]
    fn identity_is_neutral() {
        let p = 8;
        let x = lifted_series(&[2.0, 1.0, 0.5], p);
        let id = LiftedTwoPort::identity(p);
        let left = cascade_ibi(&x, &x.tz(), &id).unwrap();
        assert_eq!(left.b0, x.b0);
        assert_eq!(left.b1, x.b1);
        let right = cascade_ibi(&id, &id.tz(), &x).unwrap();
        assert_eq!(right.b0, x.b0);
        assert_eq!(right.b1, x.b1);
    }

    #[test]
    fn shunts_add() {
        let p = 6;
        let y = cascade_ibi(&lifted_shunt(0.01, p), &lifted_shunt(0.01, p).tz(), &lifted_shunt(0.03, p)).unwrap();
        let expect = CMatrix::identity(p, p) * re(0.04);
        assert!(max_abs(&(&y.c0 - &expect)) < 1e-17);
        assert_eq!(y.a0, CMatrix::identity(p, p));
        assert!(max_abs(&y.b0) == 0.0);
    }

    #[test]
    fn order_matters_for_mixed_elements() {
        let p = 8;
        let s = lifted_series(&[10.0, 3.0], p).tz();
        let h = lifted_shunt(0.02, p).tz();
        let sh = cascade_tz(&[s.clone(), h.clone()]).unwrap();
        let hs = cascade_tz(&[h.clone(), s]).unwrap();
        assert!(tz_relative_difference(&sh, &hs) > 1e-3);
        let h2 = lifted_shunt(0.05, p).tz();
        let a = cascade_tz(&[h.clone(), h2.clone()]).unwrap();
        let b = cascade_tz(&[h2, h]).unwrap();
        assert!(tz_relative_difference(&a, &b) < 1e-15);
    }

    #[test]
    fn block_too_small_for_combined_memory() {
        let p = 4;
        let x = lifted_series(&[1.0, 1.0, 1.0], p);
        assert!(matches!(cascade_ibi(&x, &x.tz(), &x), Err(Error::BlockTooSmall { .. })));
        assert!(matches!(cascade_tz(&[x.tz(), x.tz()]), Err(Error::BlockTooSmall { .. })));
    }

    #[test]
    fn corrupted_corner_is_rejected() {
        let p = 8;
        let mut x = lifted_series(&[1.0, 0.5], p);
        x.b1[(5, 0)] = ONE;
        let y = lifted_series(&[1.0, 0.5], p);
        assert!(matches!(cascade_ibi(&x, &x.tz(), &y), Err(Error::Structure(_))));
    }
}
