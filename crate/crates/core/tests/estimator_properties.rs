mod common;

use common::*;
use hsic_select::data::Labels;
use hsic_select::estimator::*;
use hsic_select::kernels::*;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ZD: DiagonalConvention = DiagonalConvention::ZeroDiagonal;
const FD: DiagonalConvention = DiagonalConvention::FullDiagonal;

fn symmetric(m: usize, entries: &[f64]) -> KernelMatrix {
    let mut a = Array2::zeros((m, m));
    let mut it = entries.iter().cycle();
    for i in 0..m {
        for j in 0..i {
            let v = *it.next().unwrap();
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    KernelMatrix::new(a, ZD).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unbiased_equals_enumeration(
        m in 4usize..=8,
        k in prop::collection::vec(-2.0f64..2.0, 28),
        l in prop::collection::vec(-2.0f64..2.0, 28),
    ) {
        let (k, l) = (symmetric(m, &k), symmetric(m, &l));
        let fast = hsic_unbiased(&k, &l).unwrap().value;
        let slow = hsic_ustat_oracle(&k, &l).unwrap().value;
        prop_assert!((fast - slow).abs() <= 1e-10 * slow.abs().max(1.0));
    }

    #[test]
    fn variance_is_non_negative(
        m in 4usize..=12,
        k in prop::collection::vec(0.0f64..1.0, 66),
        l in prop::collection::vec(0.0f64..1.0, 66),
    ) {
        let v = hsic_variance(&symmetric(m, &k), &symmetric(m, &l)).unwrap();
        prop_assert!(v >= 0.0 && v.is_finite());
    }
}

/// `R` of the asymptotic variance written out from the definition: for
/// each `i`, average `h(i, j, q, r)` over ordered distinct triples, with `h`
/// averaging the three-term summand over all 24 orderings.
fn enumerated_variance(k: &KernelMatrix, l: &KernelMatrix) -> f64 {
    let m = k.size();
    let (kv, lv) = (k.values(), l.values());
    let h = |idx: [usize; 4]| {
        let mut total = 0.0;
        let mut count = 0;
        for s in 0..4 {
            for t in 0..4 {
                for u in 0..4 {
                    for v in 0..4 {
                        let set = [s, t, u, v];
                        if (0..4).all(|a| (0..4).all(|b| a == b || set[a] != set[b])) {
                            let (s, t, u, v) = (idx[s], idx[t], idx[u], idx[v]);
                            total += kv[[s, t]] * lv[[s, t]] + kv[[s, t]] * lv[[u, v]]
                                - 2.0 * kv[[s, t]] * lv[[s, u]];
                            count += 1;
                        }
                    }
                }
            }
        }
        total / f64::from(count)
    };
    let mut all = 0.0;
    let mut r = 0.0;
    for i in 0..m {
        let mut s = 0.0;
        let mut n = 0.0;
        for j in 0..m {
            for q in 0..m {
                for rr in 0..m {
                    let idx = [i, j, q, rr];
                    if (0..4).all(|a| (0..4).all(|b| a == b || idx[a] != idx[b])) {
                        s += h(idx);
                        n += 1.0;
                    }
                }
            }
        }
        all += s;
        r += (s / n) * (s / n);
    }
    let hsic = all / (m * (m - 1) * (m - 2) * (m - 3)) as f64;
    r /= m as f64;
    (16.0 / m as f64 * (r - hsic * hsic)).max(0.0)
}

#[test]
fn variance_matches_definition_on_small_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m in [4, 5, 6, 7] {
        for _ in 0..3 {
            let k = random_zero_diag(m, false, &mut rng);
            let l = random_zero_diag(m, false, &mut rng);
            let want = enumerated_variance(&k, &l);
            let got = hsic_variance(&k, &l).unwrap();
            assert!((got - want).abs() <= 1e-10 * want.max(1e-3), "m={m}: {got} vs {want}");
        }
    }
}

#[test]
fn standardized_statistic_has_unit_scale_under_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let m = 50;
    let z: Vec<f64> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k = gaussian_kernel_matrix(squared_distances(column(&x).view()).view(), 1.0, ZD).unwrap();
            let l = gaussian_kernel_matrix(squared_distances(column(&y).view()).view(), 1.0, ZD).unwrap();
            let e = hsic_unbiased_with_variance(&k, &l).unwrap();
            e.value / e.variance.unwrap().sqrt()
        })
        .collect();
    let spread = sample_sd(&z);
    assert!((0.5..2.0).contains(&spread), "spread {spread}");
}

#[test]
fn permuting_label_kernel_equals_rebuilding_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let m = 15;
    let perm = {
        use rand::seq::SliceRandom;
        let mut p: Vec<usize> = (0..m).collect();
        p.shuffle(&mut rng);
        p
    };
    let cases = [
        (LabelKernelSpec::Binary, Labels::Binary((0..m).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect())),
        (LabelKernelSpec::Multiclass, Labels::Multiclass((0..m).map(|i| i % 3).collect())),
        (
            LabelKernelSpec::RegressionRbf { sigma: None },
            Labels::Real((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()),
        ),
    ];
    for (spec, labels) in cases {
        let l = build_label_kernel(&spec, &labels, ZD).unwrap().matrix;
        let rebuilt = build_label_kernel(&spec, &labels.permuted(&perm), ZD).unwrap().matrix;
        let permuted = l.permuted(&perm);
        for (a, b) in rebuilt.values().iter().zip(permuted.values().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn mmd_equals_trace_against_signed_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..10 {
        let m = rng.random_range(6..30);
        let x = Array2::from_shape_fn((m, 2), |_| rng.random_range(-1.0..1.0));
        let mut y: Vec<i8> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        {
            use rand::seq::SliceRandom;
            y.shuffle(&mut rng);
        }
        let k = gaussian_kernel_matrix(squared_distances(x.view()).view(), 0.8, FD).unwrap();
        let rho = binary_label_weights(&y).unwrap();
        let mut trace = 0.0;
        for i in 0..m {
            for j in 0..m {
                trace += k.get(i, j) * rho[i] * rho[j];
            }
        }
        assert!((mmd_statistic(&k, &y).unwrap() - trace).abs() < 1e-10);
        let l = binary_label_matrix(&y, FD).unwrap();
        assert!((kta_unnormalized(&k, &l).unwrap() - trace).abs() < 1e-10);
    }
}

#[test]
fn binary_label_rows_sum_to_zero() {
    let l = binary_label_matrix(&[1, -1, -1, 1, 1, -1, -1], FD).unwrap();
    for row in l.values().rows() {
        assert!(row.sum().abs() < 1e-12);
    }
}

#[test]
fn permutation_test_is_order_independent_across_pools() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let m = 40;
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = Labels::Real(x.iter().map(|v| v * v + rng.random_range(-0.3..0.3)).collect());
    let k = gaussian_kernel_matrix(squared_distances(column(&x).view()).view(), 1.0, ZD).unwrap();
    let spec = LabelKernelSpec::RegressionRbf { sigma: None };
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| permutation_test(&k, &spec, &y, 99, 5).unwrap());
    let b = four.install(|| permutation_test(&k, &spec, &y, 99, 5).unwrap());
    assert_eq!(a, b);
}
