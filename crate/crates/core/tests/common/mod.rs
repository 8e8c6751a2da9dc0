//! Reference implementations used as oracles. None of these call into the
//! code paths they check.

#![allow(dead_code)]

use rand::Rng;
use structformer::trees::ConstTree;

/// Sigmoid written out directly.
pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `p(pos in C(i))` straight from the definition with sentinel positions.
pub fn member(pos: isize, i: usize, d: &[f64], h: &[f64], mu1: f64) -> f64 {
    let n = h.len() as isize;
    if pos < 0 || pos >= n {
        return 0.0;
    }
    let pos = pos as usize;
    if pos == i {
        return 1.0;
    }
    let (a, b) = if pos < i { (pos, i) } else { (i, pos) };
    let mut m = f64::NEG_INFINITY;
    for v in &d[a..b] {
        if *v > m {
            m = *v;
        }
    }
    sig((h[i] - m) / mu1)
}

/// O(n^4) enumeration of every span `[l, r]` around `i`.
pub fn brute_force_dep_matrix(d: &[f64], h: &[f64], mu1: f64, mu2: f64) -> Vec<f64> {
    let n = h.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut total = 0.0;
            for l in 0..n {
                for r in l..n {
                    if !(l <= i && i <= r) {
                        continue;
                    }
                    let pl =
                        member(l as isize, i, d, h, mu1) - member(l as isize - 1, i, d, h, mu1);
                    let pr =
                        member(r as isize, i, d, h, mu1) - member(r as isize + 1, i, d, h, mu1);
                    if j < l || j > r {
                        continue;
                    }
                    let z: f64 = (l..=r).map(|k| (h[k] / mu2).exp()).sum();
                    total += pl * pr * (h[j] / mu2).exp() / z;
                }
            }
            out[i * n + j] = total;
        }
    }
    out
}

/// Central difference of a scalar function of one coordinate.
pub fn central_diff(mut f: impl FnMut(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Relative error with an absolute floor for near-zero gradients.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Naive Algorithm-1 rendering: returns the bracket string directly.
pub fn naive_constituent(tokens: &[&str], d: &[f64]) -> String {
    if tokens.len() == 1 {
        return tokens[0].to_string();
    }
    let mut best = 0;
    for k in 0..d.len() {
        if d[k] > d[best] {
            best = k;
        }
    }
    let left = naive_constituent(&tokens[..=best], &d[..best]);
    let right = naive_constituent(&tokens[best + 1..], &d[best + 1..]);
    format!("(X {left} {right})")
}

/// Dependency heads for distinct heights: the head of every constituent is
/// its highest token, and each child constituent's head attaches to it.
pub fn naive_dependency(h: &[f64], tree: &ConstTree) -> Vec<Option<usize>> {
    let mut heads = vec![None; h.len()];
    fn argmax(h: &[f64], lo: usize, hi: usize) -> usize {
        (lo..=hi).fold(lo, |b, k| if h[k] > h[b] { k } else { b })
    }
    fn go(h: &[f64], t: &ConstTree, heads: &mut Vec<Option<usize>>) {
        let s = t.span();
        let top = argmax(h, s.start, s.end);
        for c in t.children() {
            let cs = c.span();
            let ch = argmax(h, cs.start, cs.end);
            if ch != top {
                heads[ch] = Some(top);
            }
            go(h, c, heads);
        }
    }
    go(h, tree, &mut heads);
    heads
}

/// Uniform random binary tree over `n` leaves named `t0..`.
pub fn random_binary_tree(rng: &mut impl Rng, n: usize) -> ConstTree {
    fn build(rng: &mut impl Rng, lo: usize, hi: usize) -> ConstTree {
        if lo == hi {
            return ConstTree::leaf(format!("t{lo}"), lo);
        }
        let split = rng.gen_range(lo..hi);
        ConstTree::node("X", vec![build(rng, lo, split), build(rng, split + 1, hi)])
    }
    build(rng, 0, n - 1)
}

/// Random tree with arbitrary fan-out and unary nodes, labels from a small set.
pub fn random_tree(rng: &mut impl Rng, n: usize) -> ConstTree {
    fn build(rng: &mut impl Rng, lo: usize, hi: usize, depth: usize) -> ConstTree {
        const LABELS: [&str; 4] = ["X", "NP", "VP", "SWC"];
        if lo == hi && (depth > 3 || rng.gen_bool(0.6)) {
            return ConstTree::leaf(format!("w{}", lo), lo);
        }
        let label = LABELS[rng.gen_range(0..LABELS.len())];
        if lo == hi {
            return ConstTree::node(label, vec![build(rng, lo, hi, depth + 1)]);
        }
        let mut cuts: Vec<usize> = (lo..hi).filter(|_| rng.gen_bool(0.5)).collect();
        if cuts.is_empty() {
            cuts.push(rng.gen_range(lo..hi));
        }
        let mut children = Vec::new();
        let mut start = lo;
        for c in cuts {
            children.push(build(rng, start, c, depth + 1));
            start = c + 1;
        }
        children.push(build(rng, start, hi, depth + 1));
        ConstTree::node(label, children)
    }
    build(rng, 0, n - 1, 0)
}

/// All permutations of `0..k`.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}
