//! Box-constrained derivative-free minimization: Nelder–Mead followed by a
//! shrinking coordinate search.

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

struct Budget<'a, F> {
    f: F,
    lo: &'a [f64],
    hi: &'a [f64],
    evals: usize,
    max: usize,
    best: Minimum,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn exhausted(&self) -> bool {
        self.evals >= self.max
    }

    fn eval(&mut self, x: &mut [f64]) -> f64 {
        for ((xi, l), h) in x.iter_mut().zip(self.lo).zip(self.hi) {
            *xi = xi.clamp(*l, *h);
        }
        self.evals += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < self.best.value {
            self.best.x = x.to_vec();
            self.best.value = v;
        }
        v
    }
}

/// Minimizes `f` over the box `[lo, hi]` starting at `x0`, using at most
/// `max_evals` evaluations. Non-finite values count as `+∞`. The returned
/// point is the best ever evaluated, so it is never worse than `x0`.
pub fn minimize_box<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
) -> Minimum {
    let d = x0.len();
    assert!(
        lo.len() == d && hi.len() == d,
        "bounds do not match dimension"
    );
    let mut b = Budget {
        f,
        lo,
        hi,
        evals: 0,
        max: max_evals.max(1),
        best: Minimum {
            x: x0.to_vec(),
            value: f64::INFINITY,
            evals: 0,
        },
    };
    let mut start = x0.to_vec();
    b.eval(&mut start);
    let nm_budget = (b.max * 4) / 5;
    nelder_mead(&mut b, nm_budget);
    coordinate_search(&mut b);
    let mut out = b.best;
    out.evals = b.evals;
    out
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(b: &mut Budget<'_, F>, budget: usize) {
    let d = b.best.x.len();
    let width: Vec<f64> = b.lo.iter().zip(b.hi).map(|(l, h)| h - l).collect();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((b.best.x.clone(), b.best.value));
    for i in 0..d {
        if b.evals >= budget {
            return;
        }
        let mut x = simplex[0].0.clone();
        let step = 0.1 * width[i];
        x[i] = if x[i] + step <= b.hi[i] {
            x[i] + step
        } else {
            x[i] - step
        };
        let v = b.eval(&mut x);
        simplex.push((x, v));
    }

    while b.evals < budget {
        simplex.sort_by(|a, c| a.1.total_cmp(&c.1));
        let (fbest, fworst) = (simplex[0].1, simplex[d].1);
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .zip(&width)
                    .map(|((a, c), w)| (a - c).abs() / w.max(1e-300))
            })
            .fold(0.0_f64, f64::max);
        if spread < 1e-10
            || (fworst - fbest).abs() <= 1e-14 * (fbest.abs() + 1e-300) && spread < 1e-6
        {
            return;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|i| simplex[..d].iter().map(|(x, _)| x[i]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let mut xr = along(1.0);
        let fr = b.eval(&mut xr);
        if fr < simplex[0].1 {
            let mut xe = along(2.0);
            let fe = b.eval(&mut xe);
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let t = if fr < simplex[d].1 { 0.5 } else { -0.5 };
            let mut xc = along(t);
            let fc = b.eval(&mut xc);
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if b.evals >= budget {
                        return;
                    }
                    let mut xs: Vec<f64> = x0
                        .iter()
                        .zip(&v.0)
                        .map(|(a, c)| a + 0.5 * (c - a))
                        .collect();
                    let fs = b.eval(&mut xs);
                    *v = (xs, fs);
                }
            }
        }
    }
}

fn coordinate_search<F: FnMut(&[f64]) -> f64>(b: &mut Budget<'_, F>) {
    let d = b.best.x.len();
    let width: Vec<f64> = b.lo.iter().zip(b.hi).map(|(l, h)| h - l).collect();
    let mut scale = 1e-2;
    while scale > 1e-9 && !b.exhausted() {
        let mut improved = false;
        for i in 0..d {
            for sign in [1.0, -1.0] {
                if b.exhausted() {
                    return;
                }
                let base = b.best.value;
                let mut x = b.best.x.clone();
                x[i] += sign * scale * width[i];
                if b.eval(&mut x) < base {
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            scale *= 0.5;
        }
    }
}
