use std::collections::BTreeMap;
use std::path::Path;

use actionvlm::blob;
use actionvlm::eval::{average_precision, tiou, MetricsReport, VideoDetections};
use actionvlm::model::{aggregate, lambda_from_advantage, nms, Proposal};
use actionvlm::nn::{Interval, Matrix, Rng};
use actionvlm::synth::{generate_corpus, inject_conflict, validate_segments, GenConfig, LanguageBundle, Segment};
use actionvlm::train::ClasswiseLossTable;
use proptest::prelude::*;

fn interval() -> impl Strategy<Value = Interval> {
    (0.0..100.0f64, 0.01..50.0f64).prop_map(|(s, len)| Interval::new(s, s + len))
}

fn proposal() -> impl Strategy<Value = Proposal> {
    (interval(), 0..3usize, 0.0..1.0f64).prop_map(|(iv, class, score)| Proposal {
        start: iv.start,
        end: iv.end,
        class,
        score,
    })
}

proptest! {
    #[test]
    fn tiou_is_symmetric_and_bounded(a in interval(), b in interval()) {
        let ab = tiou(a, b).unwrap();
        prop_assert_eq!(ab, tiou(b, a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((tiou(a, a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_is_bounded_and_monotone(mut xs in prop::collection::vec(-30.0..30.0f64, 1..40)) {
        xs.sort_by(f64::total_cmp);
        let lambda = lambda_from_advantage(&Matrix::column(&xs));
        for (i, &x) in xs.iter().enumerate() {
            let g = lambda[(i, 0)];
            prop_assert!((0.0..1.0).contains(&g));
            if x <= 0.0 {
                prop_assert_eq!(g, 0.0);
            }
            if i > 0 {
                prop_assert!(g >= lambda[(i - 1, 0)]);
            }
        }
    }

    #[test]
    fn zero_gate_copies_vision(seed in any::<u64>(), frames in 1..20usize, dim in 1..6usize) {
        let mut rng = Rng::new(seed);
        let mut m = || Matrix::from_fn(frames, dim, |_, _| rng.normal());
        let vis = m();
        let lang = LanguageBundle { cls_stream: m(), loc_stream: m(), adv_stream: m(), aligned: true, donor: None };
        let (c, l) = aggregate(&vis, &lang, &Matrix::zeros(frames, 1)).unwrap();
        prop_assert_eq!(&c, &vis);
        prop_assert_eq!(&l, &vis);
    }

    #[test]
    fn nms_keeps_a_nonoverlapping_subset(props in prop::collection::vec(proposal(), 0..30), thr in 0.1..0.9f64) {
        let kept = nms(&props, thr);
        prop_assert!(kept.len() <= props.len());
        for k in &kept {
            prop_assert!(props.contains(k));
        }
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                prop_assert!(a.class != b.class || a.interval().iou(&b.interval()) <= thr);
                prop_assert!(a.score >= b.score);
            }
        }
        prop_assert_eq!(nms(&kept, thr), kept);
    }

    #[test]
    fn ap_is_a_fraction_and_perfect_detection_scores_one(
        segs in prop::collection::vec((0..200usize, 1..30usize, 0..3usize), 1..6),
        props in prop::collection::vec(proposal(), 0..20),
        thr in 0.1..0.9f64,
    ) {
        let gt: Vec<Segment> = segs.iter().enumerate().map(|(i, &(s, len, c))| {
            let start = i * 300 + s;
            Segment::new(start, start + len, c)
        }).collect();
        let noisy = [VideoDetections { proposals: props, gt: gt.clone() }];
        let perfect = [VideoDetections {
            proposals: gt.iter().map(|s| Proposal { start: s.start as f64, end: s.end as f64, class: s.class, score: 0.9 }).collect(),
            gt: gt.clone(),
        }];
        for class in 0..3 {
            let ap = average_precision(&noisy, class, thr);
            prop_assert_eq!(ap.is_some(), gt.iter().any(|s| s.class == class));
            if let Some(ap) = ap {
                prop_assert!((0.0..=1.0).contains(&ap));
                prop_assert_eq!(average_precision(&perfect, class, thr), Some(1.0));
            }
        }
    }

    #[test]
    fn table_mean_is_arithmetic_mean(losses in prop::collection::vec((0.0..10.0f64, 0..4usize), 1..30)) {
        let mut table = ClasswiseLossTable::new(4);
        for &(loss, c) in &losses {
            table.record(&[c], loss);
        }
        for c in 0..4 {
            let mine: Vec<f64> = losses.iter().filter(|x| x.1 == c).map(|x| x.0).collect();
            match table.mean(c) {
                Ok(m) => prop_assert!((m - mine.iter().sum::<f64>() / mine.len() as f64).abs() < 1e-12),
                Err(_) => prop_assert!(mine.is_empty()),
            }
        }
    }

    #[test]
    fn blob_round_trip(rows in 0..8usize, cols in 0..8usize, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = Matrix::from_fn(rows, cols, |_, _| rng.normal() * 1e3);
        let back = blob::decode_matrix(&blob::encode_matrix(&m), Path::new("mem")).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn canonical_json_is_a_fixed_point(
        maps in prop::collection::vec(0.0..1.0f64, 1..6),
        lap in prop::option::of(-50.0..50.0f64),
        rates in (0.0..1.0f64, 0.0..1.0f64),
        mla in prop::collection::vec(0.0..1.0f64, 0..3),
        probe in prop::option::of((0.0..1.0f64, 0.0..1.0f64)),
    ) {
        let names = ["easy", "medium", "hard"];
        let report = MetricsReport {
            map_per_threshold: maps.iter().enumerate().map(|(i, &m)| (0.3 + 0.1 * i as f64, m)).collect(),
            map_avg: maps.iter().sum::<f64>() / maps.len() as f64,
            lap,
            fixed_rate: rates.0,
            infinite_rate: rates.1,
            mla_per_bucket: mla.iter().zip(names).map(|(&v, n)| (n.to_string(), v)).collect::<BTreeMap<_, _>>(),
            mconf: probe.map(|p| p.0),
            mlen: probe.map(|p| p.1),
            acc_at: if probe.is_some() { vec![(0.3, 0.5), (0.5, 0.75)] } else { Vec::new() },
        };
        let text = report.to_canonical_json().unwrap();
        let back = MetricsReport::from_json(&text).unwrap();
        prop_assert_eq!(back.to_canonical_json().unwrap(), text);
        prop_assert!((back.map_avg - report.map_avg).abs() <= 5e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_corpora_are_well_formed(
        seed in any::<u64>(),
        classes in 2..6usize,
        frames in 16..96usize,
        bg in 0.1..0.9f64,
        decoy in 0.0..1.0f64,
    ) {
        let mut cfg = GenConfig::uniform(classes, 6, 0.5, 0.5, seed);
        cfg.frames = frames;
        cfg.background_fraction = bg;
        cfg.decoy_rate = decoy;
        let corpus = generate_corpus(&cfg).unwrap();
        prop_assert_eq!(corpus.len(), 6);
        for v in &corpus.videos {
            validate_segments(&v.gt, frames, classes).unwrap();
            prop_assert_eq!(v.classes().len(), 1);
            for m in [&v.vis, &v.lang.cls_stream, &v.lang.loc_stream, &v.lang.adv_stream] {
                prop_assert_eq!(m.shape(), (frames, cfg.dim));
                prop_assert!(m.is_finite());
            }
        }
        let first = corpus.videos[0].classes();
        if corpus.videos.iter().all(|v| v.classes() == first) {
            // Every video shares one class, so no donor can be disjoint.
            prop_assert!(inject_conflict(&corpus, &mut Rng::new(seed ^ 1)).is_err());
            return Ok(());
        }
        let conflicted = inject_conflict(&corpus, &mut Rng::new(seed ^ 1)).unwrap();
        for (orig, c) in corpus.videos.iter().zip(&conflicted.videos) {
            prop_assert_eq!(&orig.vis, &c.vis);
            let donor = corpus.videos.iter().find(|d| Some(&d.id) == c.lang.donor.as_ref()).unwrap();
            prop_assert!(donor.classes().iter().all(|k| !orig.classes().contains(k)));
        }
    }
}
