use std::collections::BTreeMap;

use actstat::analytics::{block_average, fit_power_law};
use actstat::binarize::{binarize, flatten_conv, linearity, pixel_slice, BinaryMatrix};
use actstat::datamodel::{read_nact, write_nact, ActivationTensor, LayerObservables};
use actstat::datasets::{colorize_embed, make_tear_plan, randomize_labels, synth_blobs, tear, BlobSpec, LabeledDataset};
use actstat::effdim::explained_variance_ratios;
use actstat::entropy::{self, joint_entropy_counts, EstimatorConfig, Method};
use nalgebra::DMatrix;
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((rows, cols), values.to_vec()).unwrap()
}

fn arb_matrix(max_r: usize, max_c: usize) -> impl Strategy<Value = Array2<f64>> {
    (2..=max_r, 1..=max_c).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c).prop_map(move |v| matrix(r, c, &v))
    })
}

fn arb_bits(max_r: usize, max_c: usize) -> impl Strategy<Value = BinaryMatrix> {
    (1..=max_r, 1..=max_c).prop_flat_map(|(r, c)| {
        prop::collection::vec(0u8..=1, r * c).prop_map(move |v| BinaryMatrix::new(r, c, v).unwrap())
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nact_round_trip_is_bit_exact(
        dims in prop::collection::vec(1usize..4, 1..=4),
        seed_bits in prop::collection::vec(any::<u32>(), 0..64),
        binary in any::<bool>(),
    ) {
        let n: usize = dims.iter().product();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.nact");
        let t = if binary {
            let v = (0..n).map(|i| (seed_bits.get(i % seed_bits.len().max(1)).copied().unwrap_or(0) & 1) as u8).collect();
            ActivationTensor::from_binary(dims.clone(), v).unwrap()
        } else {
            let v = (0..n).map(|i| f32::from_bits(seed_bits.get(i % seed_bits.len().max(1)).copied().unwrap_or(0))).collect();
            ActivationTensor::from_f32(dims.clone(), v).unwrap()
        };
        write_nact(&t, &path).unwrap();
        let size = std::fs::metadata(&path).unwrap().len() as usize;
        prop_assert_eq!(size, 8 + 8 * dims.len() + n * if binary { 1 } else { 4 });
        let bytes = std::fs::read(&path).unwrap();
        let back = read_nact(&path).unwrap();
        prop_assert_eq!(back.dims(), t.dims());
        prop_assert_eq!(back.dtype(), t.dtype());
        match (t.as_f32(), back.as_f32()) {
            (Some(a), Some(b)) => {
                let a: Vec<u32> = a.iter().map(|x| x.to_bits()).collect();
                let b: Vec<u32> = b.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
            _ => prop_assert_eq!(t.as_binary(), back.as_binary()),
        }
        write_nact(&back, &path).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn binarize_ignores_positive_scaling(m in arb_matrix(12, 6), s in 1e-3f64..1e3, col_scale in prop::collection::vec(1e-3f64..1e3, 6)) {
        let b = binarize(&m).unwrap();
        let scaled = &m * s;
        prop_assert_eq!(&binarize(&scaled).unwrap(), &b);
        let mut per_col = m.clone();
        for (c, mut col) in per_col.columns_mut().into_iter().enumerate() {
            col *= col_scale[c];
        }
        let bc = binarize(&per_col).unwrap();
        prop_assert_eq!(&bc, &b);
        prop_assert_eq!(linearity(&bc), linearity(&b));
    }

    #[test]
    fn flatten_keeps_channel_multisets(n in 1usize..3, c in 1usize..4, h in 1usize..4, w in 1usize..4) {
        let len = n * c * h * w;
        let t = ActivationTensor::from_f32(vec![n, c, h, w], (0..len).map(|v| v as f32).collect()).unwrap();
        let m = flatten_conv(&t).unwrap();
        prop_assert_eq!(m.dim(), (n * h * w, c));
        for ci in 0..c {
            let mut got: Vec<f64> = m.column(ci).to_vec();
            got.sort_by(f64::total_cmp);
            let mut want = Vec::new();
            for ni in 0..n {
                for k in 0..h * w {
                    want.push(((ni * c + ci) * h * w + k) as f64);
                }
            }
            want.sort_by(f64::total_cmp);
            prop_assert_eq!(got, want);
        }
        for hi in 0..h {
            for wi in 0..w {
                let p = pixel_slice(&t, hi, wi).unwrap();
                for ni in 0..n {
                    for ci in 0..c {
                        prop_assert_eq!(p[[ni, ci]], m[[ni * h * w + hi * w + wi, ci]]);
                    }
                }
            }
        }
    }

    #[test]
    fn counts_entropy_bounds_and_symmetries(b in arb_bits(40, 8), perm_seed in any::<u64>()) {
        let h = joint_entropy_counts(&b).unwrap().bits;
        let (r, c) = (b.rows(), b.cols());
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= (c as f64).min((r as f64).log2()) + 1e-9);
        let marg: f64 = entropy::marginal_entropies(&b).iter().sum();
        prop_assert!(h <= marg + 1e-9);
        let mut g = actstat::rng::stream(perm_seed, actstat::rng::Stream::Subsample, 0);
        let cols = actstat::rng::permutation(&mut g, c);
        let rows = actstat::rng::permutation(&mut g, r);
        let hc = joint_entropy_counts(&b.select_columns(&cols)).unwrap().bits;
        let hr = joint_entropy_counts(&b.select_rows(&rows)).unwrap().bits;
        prop_assert!((hc - h).abs() < 1e-9);
        prop_assert!((hr - h).abs() < 1e-9);
    }

    #[test]
    fn effdim_invariances(m in arb_matrix(20, 5), scale in 1e-3f64..1e3, perm_seed in any::<u64>(), rot in prop::collection::vec(-1.0f64..1.0, 25)) {
        let base = explained_variance_ratios(&m).unwrap();
        let c = m.ncols();
        prop_assert!(base.effective_dimension <= c as f64 + 1e-9);
        if base.degenerate {
            return Ok(());
        }
        let e = base.effective_dimension;
        let scaled = explained_variance_ratios(&(&m * scale)).unwrap().effective_dimension;
        prop_assert!(rel_close(scaled, e, 1e-9), "{} vs {}", scaled, e);
        let mut g = actstat::rng::stream(perm_seed, actstat::rng::Stream::Subsample, 0);
        let p = actstat::rng::permutation(&mut g, c);
        let permuted = m.select(ndarray::Axis(1), &p);
        prop_assert!(rel_close(explained_variance_ratios(&permuted).unwrap().effective_dimension, e, 1e-9));
        // orthogonal factor of a random square matrix
        let q = DMatrix::from_row_slice(c, c, &rot[..c * c]).qr().q();
        let rotated = Array2::from_shape_fn(m.dim(), |(i, j)| (0..c).map(|k| m[[i, k]] * q[(k, j)]).sum());
        let er = explained_variance_ratios(&rotated).unwrap().effective_dimension;
        prop_assert!(rel_close(er, e, 1e-9), "{} vs {}", er, e);
        let with_const = ndarray::concatenate![ndarray::Axis(1), m, Array2::from_elem((m.nrows(), 1), 3.25)];
        prop_assert!(rel_close(explained_variance_ratios(&with_const).unwrap().effective_dimension, e, 1e-9));
    }

    #[test]
    fn chain_is_deterministic_and_per_bit_bounded(b in arb_bits(60, 5), seed in any::<u64>()) {
        prop_assume!(b.rows() >= 4);
        let cfg = EstimatorConfig { shuffle_seed: seed, ..EstimatorConfig::default() };
        let a = entropy::complexity(&b, &cfg).unwrap();
        let again = entropy::complexity(&b, &cfg).unwrap();
        prop_assert_eq!(&a, &again);
        let cap = 1.0 + (1.0 - cfg.prob_clip).log2().abs();
        for &x in &a.per_bit {
            prop_assert!((0.0..=cap + 1e-12).contains(&x), "{}", x);
        }
    }

    #[test]
    fn tear_preserves_labels_and_pixels_and_inverts(seed in any::<u64>(), n in 1usize..3, ch in 1usize..3) {
        let len = n * ch * 16 * 16;
        let inputs = ActivationTensor::from_f32(vec![n, ch, 16, 16], (0..len).map(|v| (v % 97) as f32).collect()).unwrap();
        let ds = LabeledDataset::new(inputs, (0..n).map(|i| i % 2).collect(), 2).unwrap();
        let plan = make_tear_plan(16, 16, 4, seed).unwrap();
        prop_assert_eq!(&plan, &make_tear_plan(16, 16, 4, seed).unwrap());
        let torn = tear(&ds, &plan).unwrap();
        prop_assert_eq!(&torn.labels, &ds.labels);
        let (a, b) = (ds.inputs.as_f32().unwrap(), torn.inputs.as_f32().unwrap());
        for img in 0..n * ch {
            let mut x: Vec<u32> = a[img * 256..(img + 1) * 256].iter().map(|v| v.to_bits()).collect();
            let mut y: Vec<u32> = b[img * 256..(img + 1) * 256].iter().map(|v| v.to_bits()).collect();
            x.sort_unstable();
            y.sort_unstable();
            prop_assert_eq!(x, y);
        }
        let back = tear(&torn, &plan.inverse()).unwrap();
        prop_assert_eq!(back.inputs.as_f32().unwrap(), a);
    }

    #[test]
    fn generators_are_seed_deterministic(seed in any::<u64>()) {
        let blob = BlobSpec { classes: 3, shape: vec![5], spread: 2.0, noise: 0.5, samples: 12, seed };
        let a = synth_blobs(&blob).unwrap();
        let b = synth_blobs(&blob).unwrap();
        prop_assert_eq!(a.inputs.as_f32(), b.inputs.as_f32());
        prop_assert_eq!(&randomize_labels(&a, 4, seed).unwrap().labels, &randomize_labels(&b, 4, seed).unwrap().labels);
    }

    #[test]
    fn colorize_output_shape_and_range(seed in any::<u64>(), v in prop::collection::vec(-0.5f32..1.5, 784)) {
        let ds = LabeledDataset::new(ActivationTensor::from_f32(vec![1, 28, 28], v).unwrap(), vec![0], 1).unwrap();
        let out = colorize_embed(&ds, seed).unwrap();
        prop_assert_eq!(out.inputs.dims(), &[1, 3, 32, 32]);
        prop_assert!(out.inputs.as_f32().unwrap().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn power_law_equivariance(a in 0.1f64..10.0, alpha in -2.0f64..2.0, s in 0.1f64..10.0, m in 2u32..5) {
        let series: Vec<(u32, f64)> = (1..=30).map(|n| (n, a / (n as f64).powf(alpha))).collect();
        let f = fit_power_law(&series, None).unwrap();
        prop_assert!(rel_close(f.alpha, alpha, 1e-9) || (f.alpha - alpha).abs() < 1e-9);
        prop_assert!(rel_close(f.amplitude, a, 1e-9));
        let ys: Vec<(u32, f64)> = series.iter().map(|&(n, y)| (n, s * y)).collect();
        let fs = fit_power_law(&ys, None).unwrap();
        prop_assert!(rel_close(fs.amplitude, s * f.amplitude, 1e-9));
        prop_assert!((fs.alpha - f.alpha).abs() < 1e-9);
        // same values observed at n·m
        let ns: Vec<(u32, f64)> = series.iter().map(|&(n, y)| (n * m, y)).collect();
        let fm = fit_power_law(&ns, None).unwrap();
        prop_assert!((fm.alpha - f.alpha).abs() < 1e-9);
        prop_assert!(rel_close(fm.amplitude, f.amplitude * (m as f64).powf(f.alpha), 1e-9));
    }

    #[test]
    fn block_average_ignores_layer_order(vals in prop::collection::vec(0.0f64..10.0, 2..8), perm_seed in any::<u64>()) {
        let rows: Vec<LayerObservables> = vals.iter().enumerate().map(|(i, &v)| LayerObservables {
            epoch: 1,
            layer: format!("L{}", i + 1),
            depth_index: i + 1,
            neuron_count: i + 1,
            complexity_bits: v,
            complexity_per_neuron: v / (i + 1) as f64,
            effective_dimension: v / 2.0,
            linearity: 0.5,
            total_correlation_norm: v / 10.0,
            estimator: "counts".into(),
            sample_rows: 10,
        }).collect();
        let blocks: BTreeMap<String, String> = rows.iter().enumerate()
            .map(|(i, r)| (r.layer.clone(), if i < rows.len() / 2 { "low" } else { "top" }.to_string()))
            .collect();
        let mut g = actstat::rng::stream(perm_seed, actstat::rng::Stream::Subsample, 0);
        let p = actstat::rng::permutation(&mut g, rows.len());
        let shuffled: Vec<LayerObservables> = p.iter().map(|&i| rows[i].clone()).collect();
        let a = block_average(&rows, &blocks).unwrap();
        let b = block_average(&shuffled, &blocks).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.block, &y.block);
            prop_assert!((x.complexity_bits - y.complexity_bits).abs() < 1e-12);
            prop_assert!((x.effective_dimension - y.effective_dimension).abs() < 1e-12);
        }
    }
}

#[test]
fn counts_and_chain_share_dispatch() {
    let b = BinaryMatrix::from_rows(&[[0u8, 1], [1, 0], [1, 1], [0, 0]]).unwrap();
    let c = entropy::complexity(&b, &EstimatorConfig::with_method(Method::Counts)).unwrap();
    assert!((c.bits - 2.0).abs() < 1e-12);
    assert!((entropy::complexity_per_neuron(&b, &EstimatorConfig::with_method(Method::Counts)).unwrap() - 1.0).abs() < 1e-12);
}
