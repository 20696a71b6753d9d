use proptest::prelude::*;

use roofsense_core::downstream::{Classifier, Candidate, Criterion, ModelSpec};
use roofsense_core::fusion::{check_softmax, concat_features, concat_softmax, mean_softmax, IdRows};
use roofsense_core::metrics::{confusion_matrix, macro_metrics, ConfusionMatrix};
use roofsense_core::patch::{crop_window, extract_patch};
use roofsense_core::raster::{compute_ndsm, resample, sample_tiles, Extent, Resampling, TileSampling};
use roofsense_core::scale::{ScalerKind, ScalerParams};
use roofsense_core::split::{stratified_split, SplitParams};
use roofsense_core::synth::{synth_generate, SynthParams};
use roofsense_core::{geom::Polygon, Country, Matrix, PixelGrid, RasterGrid, Split, Task};

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn cm_strategy() -> impl Strategy<Value = ConfusionMatrix> {
    (2usize..=6).prop_flat_map(|k| {
        proptest::collection::vec(0u64..50, k * k).prop_map(move |c| ConfusionMatrix::from_counts(k, c).unwrap())
    })
}

fn softmax_rows(n: usize, k: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(0.0f64..10.0, n * k).prop_map(move |raw| {
        let mut m = Matrix::new(n, k, raw).unwrap();
        for i in 0..n {
            let row = m.row_mut(i);
            let s: f64 = row.iter().sum::<f64>() + 1e-9;
            row.iter_mut().for_each(|v| *v = (*v + 1e-9 / k as f64) / s);
        }
        m
    })
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("b{i}")).collect()
}

proptest! {
    #[test]
    fn macro_metrics_match_brute_force(cm in cm_strategy()) {
        let k = cm.num_classes();
        let report = macro_metrics(&cm);
        let total: u64 = (0..k).flat_map(|i| (0..k).map(move |j| (i, j))).map(|(i, j)| cm.get(i, j)).sum();
        let (mut mp, mut mr, mut mf) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for i in 0..k {
                for j in 0..k {
                    let v = cm.get(i, j);
                    match (i == c, j == c) {
                        (true, true) => tp += v,
                        (false, true) => fp += v,
                        (true, false) => fn_ += v,
                        _ => {}
                    }
                }
            }
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            prop_assert!((report.per_class[c].precision - p).abs() <= 1e-12);
            prop_assert!((report.per_class[c].recall - r).abs() <= 1e-12);
            prop_assert!((report.per_class[c].f1 - f1(p, r)).abs() <= 1e-12);
            mp += p;
            mr += r;
            mf += f1(p, r);
        }
        let kf = k as f64;
        prop_assert!((report.macro_precision - mp / kf).abs() <= 1e-12);
        prop_assert!((report.macro_recall - mr / kf).abs() <= 1e-12);
        prop_assert!((report.macro_f1 - mf / kf).abs() <= 1e-12);
        let trace: u64 = (0..k).map(|i| cm.get(i, i)).sum();
        prop_assert!((report.accuracy - ratio(trace, total)).abs() <= 1e-12);
    }

    #[test]
    fn metrics_bounded_and_macro_between_extremes(cm in cm_strategy()) {
        let r = macro_metrics(&cm);
        let f1s: Vec<f64> = r.per_class.iter().map(|c| c.f1).collect();
        let lo = f1s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = f1s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.macro_f1 >= lo - 1e-12 && r.macro_f1 <= hi + 1e-12);
        for c in &r.per_class {
            for v in [c.precision, c.recall, c.f1, c.accuracy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn relabelling_classes_keeps_macro_scores(
        pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..200),
        perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let a = macro_metrics(&confusion_matrix(&t, &p, 5).unwrap());
        let tp: Vec<usize> = t.iter().map(|&c| perm[c]).collect();
        let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        let b = macro_metrics(&confusion_matrix(&tp, &pp, 5).unwrap());
        prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        prop_assert!((a.macro_precision - b.macro_precision).abs() < 1e-12);
        prop_assert!((a.macro_recall - b.macro_recall).abs() < 1e-12);
        prop_assert_eq!(a.accuracy, b.accuracy);
        for (c, &pc) in perm.iter().enumerate() {
            prop_assert_eq!(a.per_class[c].f1, b.per_class[pc].f1);
        }
    }

    #[test]
    fn ndsm_is_cellwise_difference(
        w in 1usize..40, h in 1usize..40, seed in any::<u64>(), clamp in any::<bool>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = w * h;
        let dsm: Vec<f32> = (0..n).map(|_| if rng.random_bool(0.05) { -9999.0 } else { rng.random_range(0.0..60.0) }).collect();
        let dtm: Vec<f32> = (0..n).map(|_| rng.random_range(0.0..60.0)).collect();
        let g = |v| RasterGrid::new(w, h, 1, 0.5, (0.0, 100.0), "EPSG:32620", Some(-9999.0), v).unwrap();
        let out = compute_ndsm(&g(dsm.clone()), &g(dtm.clone()), clamp).unwrap();
        for i in 0..n {
            let got = out.band(0)[i];
            if dsm[i] == -9999.0 {
                prop_assert!(out.is_nodata(got));
            } else {
                let d = dsm[i] - dtm[i];
                prop_assert_eq!(got, if clamp && d < 0.0 { 0.0 } else { d });
            }
        }
    }

    #[test]
    fn resample_keeps_constant_fields(
        w in 1usize..20, h in 1usize..20, v in -100.0f32..100.0, target in 0.1f64..3.0, nearest in any::<bool>(),
    ) {
        let g = RasterGrid::new(w, h, 1, 0.5, (0.0, 10.0), "x", None, vec![v; w * h]).unwrap();
        let method = if nearest { Resampling::Nearest } else { Resampling::Bilinear };
        let out = resample(&g, target, method).unwrap();
        prop_assert!(out.band(0).iter().all(|&x| x == v));
    }

    #[test]
    fn tile_sampling_is_reproducible(seed in any::<u64>(), n in 1usize..50) {
        let ext = Extent { min_x: 0.0, min_y: 0.0, max_x: 5000.0, max_y: 3000.0 };
        let a = sample_tiles(&ext, n, 500.0, seed, TileSampling::Overlapping).unwrap();
        let b = sample_tiles(&ext, n, 500.0, seed, TileSampling::Overlapping).unwrap();
        prop_assert_eq!(&a, &b);
        for t in &a {
            let e = t.extent();
            prop_assert!(e.min_x >= 0.0 && e.max_x <= 5000.0 && e.min_y >= 0.0 && e.max_y <= 3000.0);
        }
    }

    #[test]
    fn pad_to_square_conserves_pixels(w in 1usize..30, h in 1usize..30, c in 1usize..4, seed in any::<u64>()) {
        let mut s = seed;
        let g = PixelGrid::from_fn(c, h, w, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 40) as f32 / 1024.0
        });
        let p = g.pad_to_square();
        let side = w.max(h);
        prop_assert_eq!((p.height(), p.width()), (side, side));
        prop_assert_eq!(p.sum(), g.sum());
        let (top, left) = ((side - h) / 2, (side - w) / 2);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    prop_assert_eq!(p.get(ch, y + top, x + left), g.get(ch, y, x));
                }
            }
        }
    }

    #[test]
    fn quarter_rotations_permute_pixels(side in 1usize..24, angle in prop_oneof![Just(-90.0), Just(0.0), Just(90.0)]) {
        let g = PixelGrid::from_fn(2, side, side, |c, y, x| (c * 10_000 + y * 100 + x) as f32);
        let r = g.rotate(angle);
        let mut a = g.data().to_vec();
        let mut b = r.data().to_vec();
        a.sort_by(f32::total_cmp);
        b.sort_by(f32::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn crop_dims_follow_scaled_rectangle(
        x0 in 5.0f64..40.0, y0 in 5.0f64..40.0, w in 1.0f64..15.0, h in 1.0f64..15.0, scale in 1.0f64..2.0,
    ) {
        let raster = RasterGrid::filled(120, 120, 1, 0.5, (0.0, 60.0), "x", 1.0).unwrap();
        let poly = Polygon::rect(x0, y0, x0 + w, y0 + h);
        let win = crop_window(&raster, &poly, scale).unwrap();
        let patch = extract_patch(&raster, &poly, scale).unwrap();
        prop_assert!((win.cols as f64 - scale * w / 0.5).abs() <= 1.0);
        prop_assert!((win.rows as f64 - scale * h / 0.5).abs() <= 1.0);
        prop_assert_eq!((patch.height(), patch.width()), (win.rows, win.cols));
        let cx = (win.col0 as f64 + win.cols as f64 / 2.0) * 0.5;
        let cy = 60.0 - (win.row0 as f64 + win.rows as f64 / 2.0) * 0.5;
        prop_assert!((cx - (x0 + w / 2.0)).abs() < 0.5 + 1e-9);
        prop_assert!((cy - (y0 + h / 2.0)).abs() < 0.5 + 1e-9);
    }

    #[test]
    fn split_partitions_are_stratified(
        labels in proptest::collection::vec(0usize..4, 8..400), seed in any::<u64>(),
    ) {
        let l: Vec<Option<usize>> = labels.iter().map(|&c| Some(c)).collect();
        let countries = vec![Country::Dominica; l.len()];
        let params = SplitParams { seed, ..Default::default() };
        let a = stratified_split(&l, &countries, Task::RoofType, &params).unwrap();
        let b = stratified_split(&l, &countries, Task::RoofType, &params).unwrap();
        prop_assert_eq!(&a.splits, &b.splits);
        prop_assert!(a.splits.iter().all(|s| *s != Split::Unassigned));
        for (c, counts) in a.counts.iter().enumerate() {
            let total = labels.iter().filter(|&&x| x == c).count();
            prop_assert_eq!(counts.train + counts.test, total);
            prop_assert!((counts.train as f64 - 0.75 * total as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn synth_is_bit_identical(seed in any::<u64>()) {
        let p = SynthParams { side: 12, ..Default::default() };
        let a = synth_generate(8, Task::RoofMaterial, seed, &p).unwrap();
        let b = synth_generate(8, Task::RoofMaterial, seed, &p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn feature_concat_round_trips(n in 0usize..10, da in 1usize..6, db in 1usize..6, seed in any::<u32>()) {
        let v: Vec<f64> = (0..n * (da + db)).map(|i| (i as f64 + seed as f64).sin()).collect();
        let whole = Matrix::new(n, da + db, v).unwrap();
        let left = IdRows::new(ids(n), whole.slice_cols(0, da)).unwrap();
        let right = IdRows::new(ids(n), whole.slice_cols(da, db)).unwrap();
        prop_assert_eq!(concat_features(&left, &right).unwrap().values, whole);
    }

    #[test]
    fn softmax_fusions_stay_distributions(p1 in softmax_rows(6, 4), p2 in softmax_rows(6, 4)) {
        let a = IdRows::new(ids(6), p1.clone()).unwrap();
        let b = IdRows::new(ids(6), p2.clone()).unwrap();
        let mean = mean_softmax(&a, &b).unwrap();
        prop_assert!(check_softmax(&mean.values).is_ok());
        for i in 0..6 {
            for j in 0..4 {
                prop_assert_eq!(mean.values.get(i, j), (p1.get(i, j) + p2.get(i, j)) / 2.0);
            }
        }
        let cat = concat_softmax(&a, &b).unwrap();
        prop_assert_eq!(cat.values.slice_cols(0, 4), p1);
        prop_assert_eq!(cat.values.slice_cols(4, 4), p2);
    }

    #[test]
    fn scaler_params_reproduce_train_transform(
        data in proptest::collection::vec(-50.0f64..50.0, 3 * 12), kind in 0usize..4,
    ) {
        let train = Matrix::new(12, 3, data).unwrap();
        let (scaled, _, params) = roofsense_core::scale::scale_features(&train, &train, ScalerKind::ALL[kind]).unwrap();
        prop_assert_eq!(params.transform(&train).unwrap(), scaled);
        let refit = ScalerParams::fit(ScalerKind::ALL[kind], &train).unwrap();
        prop_assert_eq!(refit, params);
    }
}

#[test]
fn forest_predictions_ignore_minmax_scaling() {
    let n = 60;
    let raw: Vec<f64> = (0..n * 3).map(|i| ((i * 7919) % 101) as f64 * 3.7 - 40.0).collect();
    let x = Matrix::new(n, 3, raw).unwrap();
    let y: Vec<usize> = (0..n).map(|i| usize::from(x.get(i, 0) + 0.5 * x.get(i, 2) > 0.0)).collect();
    let model = ModelSpec::Forest { n_trees: 15, max_depth: 4, criterion: Criterion::Gini };
    let raw_clf = Classifier::fit(&Candidate { model, scaler: ScalerKind::None }, &x, &y, 2, 5).unwrap();
    let mm_clf = Classifier::fit(&Candidate { model, scaler: ScalerKind::MinMax }, &x, &y, 2, 5).unwrap();
    assert_eq!(raw_clf.predict(&x).unwrap(), mm_clf.predict(&x).unwrap());
}
