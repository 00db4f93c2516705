use diner::lensless::{propagate, propagate_adjoint, Complex64, ComplexField};
use diner::math::linear_forward;
use diner::model::checkpoint::{decode_checkpoint, encode_checkpoint};
use diner::model::{AnyModel, BackboneConfig, BackboneKind, CoordinateModel, DinerModel, MetricsLog, MetricsRow, PositionalEncoding};
use diner::signal::{attribute_rank, make_rank_deficient, permute, psnr, random_convex_mix};
use diner::spectrum::{band_ratios, dft2};
use diner::{DenseMatrix, GridIndexer, GridSignal, HashInit, HashTable, Permutation};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn signal(dims: Vec<usize>, d_out: usize, values: &[f64]) -> GridSignal {
    let n: usize = dims.iter().product::<usize>() * d_out;
    let attrs = values.iter().cycle().take(n).copied().collect();
    GridSignal::new(GridIndexer::new(dims).unwrap(), d_out, attrs).unwrap()
}

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..7, 1..4)
}

fn unit_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flatten_and_unflatten_are_inverse(dims in dims()) {
        let g = GridIndexer::new(dims.clone()).unwrap();
        for i in 0..g.len() {
            let c = g.unflatten(i).unwrap();
            prop_assert!(c.iter().zip(&dims).all(|(a, d)| a < d));
            prop_assert_eq!(g.flatten(&c).unwrap(), i);
        }
        prop_assert!(g.unflatten(g.len()).is_err());
    }

    #[test]
    fn permutations_keep_the_attribute_multiset(dims in dims(), d_out in 1usize..4, values in unit_values(), seed: u64) {
        let s = signal(dims, d_out, &values);
        let p = Permutation::random(s.len(), &mut rng(seed));
        let moved = permute(&s, &p).unwrap();
        let key = |g: &GridSignal| {
            let mut rows: Vec<Vec<u64>> = (0..g.len()).map(|i| g.attribute(i).iter().map(|v| v.to_bits()).collect()).collect();
            rows.sort();
            rows
        };
        prop_assert_eq!(key(&moved), key(&s));
        prop_assert_eq!(permute(&moved, &p.inverse()).unwrap(), s);
    }

    #[test]
    fn embed_width_keeps_every_prediction(n in 1usize..60, width in 1usize..4, d_out in 1usize..4, layers in 0usize..3, siren: bool, seed: u64) {
        let cfg = BackboneConfig {
            kind: if siren { BackboneKind::siren() } else { BackboneKind::Mlp },
            hidden_layers: layers,
            hidden_width: 8,
            encoding: PositionalEncoding::fourier(2),
        };
        let m = DinerModel::<f64>::new(n, width, d_out, &cfg, HashInit::Uniform { low: -1.0, high: 1.0 }, seed).unwrap();
        let all: Vec<usize> = (0..n).collect();
        prop_assert_eq!(m.embed_width(2).predict(&all).unwrap(), m.predict(&all).unwrap());
    }

    #[test]
    fn metrics_csv_round_trips(rows in prop::collection::vec((0.0f64..1e3, 0.0f64..10.0, -10.0f64..200.0), 0..20)) {
        let log = MetricsLog {
            rows: rows.iter().enumerate().map(|(i, &(wall_ms, loss, psnr_db))| MetricsRow { epoch: i + 1, wall_ms, loss, psnr_db }).collect(),
        };
        prop_assert_eq!(MetricsLog::from_csv(&log.to_csv()).unwrap(), log);
    }

    #[test]
    fn batched_affine_map_equals_column_by_column(rows in 1usize..12, inner in 1usize..12, cols in 1usize..20, seed: u64) {
        use rand::Rng;
        let mut r = rng(seed);
        let w = DenseMatrix::from_fn(rows, inner, |_, _| r.gen_range(-1.0..1.0));
        let b = DenseMatrix::from_fn(rows, 1, |_, _| r.gen_range(-1.0..1.0));
        let x = DenseMatrix::from_fn(inner, cols, |_, _| r.gen_range(-1.0..1.0));
        let all = linear_forward(&w, &b, &x).unwrap();
        for c in 0..cols {
            let one = linear_forward(&w, &b, &x.select_columns(&[c])).unwrap();
            prop_assert_eq!(one.column(0), all.column(c));
        }
    }

    #[test]
    fn band_ratios_partition_energy_and_ignore_transposition(h in 1usize..12, w in 1usize..12, bands in 1usize..6, values in unit_values()) {
        let plane: Vec<f64> = values.iter().cycle().take(h * w).copied().collect();
        let ratios = band_ratios(&dft2(&plane, h, w).unwrap(), bands).unwrap();
        prop_assert!((ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(ratios.iter().all(|&r| r >= 0.0));
        let transposed: Vec<f64> = (0..w * h).map(|i| plane[(i % h) * w + i / h]).collect();
        let flipped = band_ratios(&dft2(&transposed, w, h).unwrap(), bands).unwrap();
        for (a, b) in ratios.iter().zip(&flipped) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_is_symmetric(dims in dims(), a in unit_values(), b in unit_values()) {
        let (x, y) = (signal(dims.clone(), 2, &a), signal(dims, 2, &b));
        let (p, q) = (psnr(&x, &y).unwrap(), psnr(&y, &x).unwrap());
        prop_assert!(p == q || (p.is_infinite() && q.is_infinite()));
        prop_assert!(psnr(&x, &x).unwrap().is_infinite());
    }

    #[test]
    fn propagation_adjoint_identity(h in 2usize..10, w in 2usize..10, z in -2e-3f64..2e-3, seed: u64) {
        use rand::Rng;
        let mut r = rng(seed);
        let mut field = || {
            let v = (0..h * w).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
            ComplexField::new(h, w, 2e-6, 532e-9, v).unwrap()
        };
        let (u, v) = (field(), field());
        let inner = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(x, y)| x * y.conj()).sum() };
        let lhs = inner(propagate(&u, z).unwrap().values(), v.values());
        let rhs = inner(u.values(), propagate_adjoint(&v, z).unwrap().values());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-300));
    }

    #[test]
    fn scatter_update_touches_only_batch_rows(len in 1usize..200, width in 1usize..4, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..30), seed: u64) {
        use rand::Rng;
        let mut table = HashTable::<f64>::init(len, width, HashInit::Uniform { low: -1.0, high: 1.0 }, seed).unwrap();
        let before = table.clone();
        let indices: Vec<usize> = picks.iter().map(|p| p.index(len)).collect();
        let mut r = rng(seed);
        let grad = DenseMatrix::from_fn(width, indices.len(), |_, _| r.gen_range(0.1..1.0));
        let g = table.scatter_grad(&indices, &grad).unwrap();
        table.apply_sparse(&g).unwrap();
        for i in 0..len {
            let touched = indices.contains(&i);
            prop_assert_eq!(table.row(i) != before.row(i), touched, "row {}", i);
        }
    }

    #[test]
    fn checkpoints_round_trip(n in 1usize..40, width in 1usize..4, d_out in 1usize..4, siren: bool, baseline: bool, seed: u64, config in "[a-z =\n0-9]{0,40}") {
        let cfg = BackboneConfig {
            kind: if siren { BackboneKind::siren() } else { BackboneKind::Mlp },
            hidden_layers: 1,
            hidden_width: 5,
            encoding: PositionalEncoding::fourier(1),
        };
        let model = if baseline {
            AnyModel::Baseline(diner::BaselineModel::<f64>::new(GridIndexer::new(vec![n]).unwrap(), d_out, &cfg, seed).unwrap())
        } else {
            AnyModel::Diner(DinerModel::<f64>::new(n, width, d_out, &cfg, HashInit::Uniform { low: -0.5, high: 0.5 }, seed).unwrap())
        };
        let restored = decode_checkpoint::<f64>(&encode_checkpoint(&model, &config).unwrap()).unwrap();
        prop_assert_eq!(&restored.config, &config);
        let all: Vec<usize> = (0..n).collect();
        prop_assert_eq!(restored.model.predict(&all).unwrap(), model.predict(&all).unwrap());
    }

    #[test]
    fn mixed_channels_have_the_base_rank(n in 8usize..40, base in 1usize..4, extra in 0usize..4, seed: u64) {
        use rand::Rng;
        let mut r = rng(seed);
        let attrs = (0..n * base).map(|_| r.gen_range(0.0..1.0)).collect();
        let s = GridSignal::new(GridIndexer::new(vec![n]).unwrap(), base, attrs).unwrap();
        let mix = random_convex_mix(base, base + extra, &mut r);
        let mixed = make_rank_deficient(&s, base + extra, &mix, false).unwrap();
        prop_assert_eq!(attribute_rank(&mixed, 1e-6).unwrap(), attribute_rank(&s, 1e-6).unwrap());
        prop_assert!(attribute_rank(&s, 1e-6).unwrap() <= base);
    }
}
