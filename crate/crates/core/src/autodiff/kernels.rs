//! Dense matrix kernels. All are accumulate-into (`out +=`) and row-major.

/// `out[p,r] += a[p,q] · b[q,r]`
pub(crate) fn mm_acc(a: &[f64], b: &[f64], out: &mut [f64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let out_row = &mut out[i * r..(i + 1) * r];
        let a_row = &a[i * q..(i + 1) * q];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[k * r..(k + 1) * r];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
}

/// `out[p,q] += g[p,r] · b[q,r]ᵀ`
pub(crate) fn mm_nt_acc(g: &[f64], b: &[f64], out: &mut [f64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let g_row = &g[i * r..(i + 1) * r];
        for k in 0..q {
            let b_row = &b[k * r..(k + 1) * r];
            let mut s = 0.0;
            for (x, y) in g_row.iter().zip(b_row) {
                s += x * y;
            }
            out[i * q + k] += s;
        }
    }
}

/// `out[q,r] += a[p,q]ᵀ · g[p,r]`
pub(crate) fn mm_tn_acc(a: &[f64], g: &[f64], out: &mut [f64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        let a_row = &a[i * q..(i + 1) * q];
        let g_row = &g[i * r..(i + 1) * r];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let out_row = &mut out[k * r..(k + 1) * r];
            for (o, &gv) in out_row.iter_mut().zip(g_row) {
                *o += aik * gv;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], p: usize, q: usize, r: usize) -> Vec<f64> {
        let mut out = vec![0.0; p * r];
        for i in 0..p {
            for j in 0..r {
                for k in 0..q {
                    out[i * r + j] += a[i * q + k] * b[k * r + j];
                }
            }
        }
        out
    }

    #[test]
    fn kernels_agree_with_triple_loop() {
        let (p, q, r) = (3, 4, 5);
        let a: Vec<f64> = (0..p * q).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..q * r).map(|i| (i as f64 * 0.91).cos()).collect();
        let mut out = vec![0.0; p * r];
        mm_acc(&a, &b, &mut out, p, q, r);
        let want = naive(&a, &b, p, q, r);
        for (x, y) in out.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        // a·b = c  =>  c·bᵀ via nt, aᵀ·c via tn, both against naive transposes
        let mut bt = vec![0.0; r * q];
        for k in 0..q {
            for j in 0..r {
                bt[j * q + k] = b[k * r + j];
            }
        }
        let mut nt = vec![0.0; p * q];
        mm_nt_acc(&want, &b, &mut nt, p, q, r);
        let want_nt = naive(&want, &bt, p, r, q);
        for (x, y) in nt.iter().zip(&want_nt) {
            assert!((x - y).abs() < 1e-12);
        }

        let mut at = vec![0.0; q * p];
        for i in 0..p {
            for k in 0..q {
                at[k * p + i] = a[i * q + k];
            }
        }
        let mut tn = vec![0.0; q * r];
        mm_tn_acc(&a, &want, &mut tn, p, q, r);
        let want_tn = naive(&at, &want, q, p, r);
        for (x, y) in tn.iter().zip(&want_tn) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
