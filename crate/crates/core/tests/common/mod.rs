//! Oracles and data generators shared by the integration tests.
#![allow(dead_code)]

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_distr::{Distribution, Normal, Uniform};
use tbrf::geometry::{AxisBox, Cell};
use tbrf::partition::{AxisSplit, ObliqueSplit, PartitionTree};
use tbrf::{Dataset, Geometry, RandomStream};

/// `n` draws of `y = sin(x) + N(0, sd^2)` with `x ~ U(0, 10)`.
pub fn sine_data(n: usize, sd: f64, seed: u64) -> Dataset<f64> {
    let mut s = RandomStream::at(seed, vec![u64::MAX, 7]);
    let ux = Uniform::new(0.0, 10.0).unwrap();
    let noise = Normal::new(0.0, sd).unwrap();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = ux.sample(&mut s);
        xs.push(x);
        ys.push(x.sin() + noise.sample(&mut s));
    }
    Dataset::new(xs, ys, 1).unwrap()
}

/// Solves `a x = b` exactly by Gaussian elimination over the rationals.
pub fn solve_exact(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n)
            .find(|&i| !a[i][k].is_zero())
            .expect("singular system");
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &a[k][k];
            for j in k..n {
                let v = &f * &a[k][j];
                a[i][j] -= v;
            }
            let v = &f * &b[k];
            b[i] -= v;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i].clone();
        for j in i + 1..n {
            s -= &a[i][j] * &x[j];
        }
        x[i] = s / &a[i][i];
    }
    x
}

/// Ordinary least squares with intercept, fitted through the exact normal
/// equations; returns predictions at `queries`.
pub fn ols_predictions(xs: &[Vec<f64>], ys: &[f64], queries: &[Vec<f64>]) -> Vec<f64> {
    let d = xs[0].len();
    let design: Vec<Vec<BigRational>> = xs
        .iter()
        .map(|x| {
            let mut row = vec![BigRational::one()];
            row.extend(x.iter().map(|&v| exact(v)));
            row
        })
        .collect();
    let y: Vec<BigRational> = ys.iter().map(|&v| exact(v)).collect();
    let m = d + 1;
    let mut xtx = vec![vec![BigRational::zero(); m]; m];
    let mut xty = vec![BigRational::zero(); m];
    for (row, yi) in design.iter().zip(&y) {
        for i in 0..m {
            for j in 0..m {
                xtx[i][j] += &row[i] * &row[j];
            }
            xty[i] += &row[i] * yi;
        }
    }
    let beta = solve_exact(xtx, xty);
    queries
        .iter()
        .map(|q| {
            let mut v = beta[0].clone();
            for (b, &x) in beta[1..].iter().zip(q) {
                v += b * exact(x);
            }
            v.to_f64().unwrap()
        })
        .collect()
}

/// Probability that each of `q.len()` leaves wins a plurality vote of `t`
/// independent draws with leaf probabilities `q`, ties to the smaller id.
/// Enumerates all `q.len()^t` vote sequences.
pub fn plurality_distribution(q: &[f64], t: usize) -> Vec<f64> {
    let k = q.len();
    let mut out = vec![0.0; k];
    let total = k.pow(t as u32);
    for code in 0..total {
        let mut c = code;
        let mut counts = vec![0usize; k];
        let mut prob = 1.0;
        for _ in 0..t {
            let leaf = c % k;
            c /= k;
            counts[leaf] += 1;
            prob *= q[leaf];
        }
        let mut best = 0;
        for leaf in 1..k {
            if counts[leaf] > counts[best] {
                best = leaf;
            }
        }
        out[best] += prob;
    }
    out
}

/// Mean absolute difference between consecutive values.
pub fn mean_abs_jump(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / n as f64
}

pub fn max_abs(v: &[BigRational]) -> BigRational {
    v.iter()
        .map(|x| x.abs())
        .fold(BigRational::zero(), |a, b| if b > a { b } else { a })
}

pub fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

pub fn exact_volume(b: &AxisBox<f64>) -> BigRational {
    b.lower
        .iter()
        .zip(&b.upper)
        .fold(BigRational::one(), |acc, (&l, &u)| {
            acc * (exact(u) - exact(l))
        })
}

/// Random axis-parallel partition of a random box.
pub fn random_axis_tree(seed: u64) -> PartitionTree<f64> {
    let mut s = RandomStream::new(seed);
    let d = 1 + s.index(4);
    let lower: Vec<f64> = (0..d).map(|_| s.uniform() * 20.0 - 10.0).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + 0.1 + s.uniform() * 5.0).collect();
    let mut tree = PartitionTree::new(
        Cell::boxed(0, AxisBox::new(lower, upper).unwrap()),
        Geometry::AxisParallel,
    );
    let p = s.index(25);
    for _ in 0..p {
        let leaf = s.index(tree.leaf_count());
        let split = AxisSplit {
            leaf_id: leaf,
            dim: s.index(d),
            ratio: s.open_unit(),
        };
        tree.apply_axis_split(split).unwrap();
    }
    tree
}

/// Random oblique partition of the unit cube in 2 or 3 dimensions.
pub fn random_oblique_tree(seed: u64) -> PartitionTree<f64> {
    let mut s = RandomStream::new(seed);
    let d = 2 + s.index(2);
    let mut tree = PartitionTree::new(Cell::boxed(0, AxisBox::unit(d)), Geometry::Oblique);
    let p = 1 + s.index(8);
    while tree.split_count() < p {
        let leaf = s.index(tree.leaf_count());
        let b = tree.leaf(leaf).unwrap().bounds().clone();
        let centroid: Vec<f64> = (0..d)
            .map(|i| b.lower[i] + (0.25 + 0.5 * s.uniform()) * b.extent(i))
            .collect();
        let normal: Vec<f64> = (0..d).map(|_| 2.0 * s.uniform() - 1.0).collect();
        let _ = tree.apply_oblique_split(ObliqueSplit::through(leaf, normal, &centroid));
    }
    tree
}

pub fn uniform_points(n: usize, d: usize, seed: u64) -> Dataset<f64> {
    let mut s = RandomStream::new(seed);
    let xs: Vec<f64> = (0..n * d).map(|_| s.uniform()).collect();
    Dataset::new(xs, vec![0.0; n], d).unwrap()
}
