use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vqspk::signal::default_profiles;
use vqspk::{
    distance_matrix, extract_mfcc, load_db, save_db, synth_speaker_clip, Codebook, FeatureMatrix,
    LbgConfig, MfccConfig, SpeakerDb, SpeakerModel,
};

fn cloud(rng: &mut ChaCha8Rng, center: &[f64], spread: f64, n: usize) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, spread).unwrap();
    (0..n)
        .map(|_| center.iter().map(|c| c + noise.sample(rng)).collect())
        .collect()
}

fn feature_db(
    seed: u64,
    speakers: usize,
    dim: usize,
    spread: f64,
) -> (SpeakerDb, Vec<Vec<Vec<f64>>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mfcc = MfccConfig {
        coeff_lo: 2,
        coeff_hi: 1 + dim,
        ..MfccConfig::default()
    };
    let mut db = SpeakerDb::new(mfcc, LbgConfig::default()).unwrap();
    let mut sets = Vec::new();
    for s in 0..speakers {
        // Centers sit on distinct axes, 10 spreads from the origin and from each other.
        let mut center = vec![0.0; dim];
        center[s % dim] = 10.0 * spread * (1 + s / dim) as f64;
        let points = cloud(&mut rng, &center, spread, 60);
        let (codebook, _) = vqspk::train_codebook(&points, &LbgConfig::default()).unwrap();
        db = db
            .add_model(SpeakerModel {
                id: format!("s{}", s + 1),
                codebook,
            })
            .unwrap();
        sets.push(points);
    }
    (db, sets)
}

#[test]
fn well_separated_speakers_match_themselves() {
    let (db, sets) = feature_db(11, 6, 4, 1.0);
    for (s, points) in sets.iter().enumerate() {
        let r = db
            .identify_features(&FeatureMatrix::from_rows(points).unwrap())
            .unwrap();
        let own = r.distance(&format!("s{}", s + 1)).unwrap();
        assert!(r.distances.iter().all(|(_, d)| own <= *d));
    }
}

#[test]
fn eleven_synthetic_speakers_give_eight_by_twelve_codebooks() {
    let clips: Vec<(String, Vec<_>)> = default_profiles(11)
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (
                format!("s{}", k + 1),
                vec![synth_speaker_clip(p, 0.5, 8000, 1).unwrap()],
            )
        })
        .collect();
    let (db, _) = SpeakerDb::new(MfccConfig::default(), LbgConfig::default())
        .unwrap()
        .enroll_all(&clips)
        .unwrap();
    assert_eq!(db.len(), 11);
    for m in db.speakers() {
        assert_eq!((m.codebook.size(), m.codebook.dim()), (8, 12));
    }
}

#[test]
fn two_clip_enrollment_pools_frames() {
    let p = &default_profiles(1)[0];
    let a = synth_speaker_clip(p, 0.4, 8000, 1).unwrap();
    let b = synth_speaker_clip(p, 0.7, 8000, 2).unwrap();
    let cfg = MfccConfig::default();
    let expected = extract_mfcc(&a, &cfg).unwrap().rows() + extract_mfcc(&b, &cfg).unwrap().rows();
    let (_, stats) = SpeakerDb::new(cfg, LbgConfig::default())
        .unwrap()
        .enroll_with_stats("s1", &[a, b])
        .unwrap();
    assert_eq!(stats.frames, expected);
}

#[test]
fn saved_file_loads_back_equal() {
    let (db, _) = feature_db(5, 3, 3, 0.5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.txt");
    save_db(&db, &path).unwrap();
    let back = load_db(&path).unwrap();
    assert_eq!(back, db);
    let again = dir.path().join("again.txt");
    save_db(&back, &again).unwrap();
    assert_eq!(
        std::fs::read(&path).unwrap(),
        std::fs::read(&again).unwrap()
    );
}

proptest! {
    #[test]
    fn scaling_codewords_and_features_scales_distances(seed in any::<u64>(), k in 0.01f64..100.0) {
        let (db, sets) = feature_db(seed, 4, 3, 1.0);
        let mut scaled = SpeakerDb::new(db.mfcc_config().clone(), db.lbg_config().clone()).unwrap();
        for m in db.speakers() {
            let rows: Vec<Vec<f64>> = m.codebook.iter().map(|c| c.iter().map(|x| x * k).collect()).collect();
            scaled = scaled
                .add_model(SpeakerModel { id: m.id.clone(), codebook: Codebook::from_rows(&rows).unwrap() })
                .unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let pick = rng.random_range(0..sets.len());
        let probe = FeatureMatrix::from_rows(&sets[pick]).unwrap();
        let probe_k = FeatureMatrix::from_rows(
            &sets[pick].iter().map(|r| r.iter().map(|x| x * k).collect::<Vec<_>>()).collect::<Vec<_>>(),
        )
        .unwrap();
        let a = db.identify_features(&probe).unwrap();
        let b = scaled.identify_features(&probe_k).unwrap();
        prop_assert_eq!(&a.predicted, &b.predicted);
        for ((_, x), (_, y)) in a.distances.iter().zip(&b.distances) {
            prop_assert!((x * k - y).abs() <= 1e-9 * y.max(1.0));
        }
    }
}

#[test]
fn accuracy_ignores_clip_order() {
    let fs = 8000;
    let profiles = default_profiles(5);
    let train: Vec<(String, Vec<_>)> = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (
                format!("s{}", k + 1),
                vec![synth_speaker_clip(p, 0.5, fs, 1).unwrap()],
            )
        })
        .collect();
    let (db, _) = SpeakerDb::new(MfccConfig::default(), LbgConfig::default())
        .unwrap()
        .enroll_all(&train)
        .unwrap();
    // Mislabel one clip so accuracy is not trivially 1.
    let mut labeled: Vec<(String, _)> = profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (
                format!("s{}", (k + 1) % 5 + 1),
                synth_speaker_clip(p, 0.5, fs, 2).unwrap(),
            )
        })
        .collect();
    labeled[0].0 = "s1".into();
    let base = distance_matrix(&labeled, &db).unwrap().accuracy();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        for i in (1..labeled.len()).rev() {
            labeled.swap(i, rng.random_range(0..=i));
        }
        let m = distance_matrix(&labeled, &db).unwrap();
        assert_eq!(m.accuracy(), base);
        let ids: Vec<&str> = m.rows.iter().map(|r| r.true_id.as_str()).collect();
        let expected: Vec<&str> = labeled.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, expected);
    }
}
