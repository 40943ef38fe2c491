use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spherefield::data_io::{
    decode_checkpoint, decode_field, encode_checkpoint, encode_field, import_csv_reader, load_checkpoint,
    save_checkpoint, synth_field, synth_series, FIELD_HEADER_LEN,
};
use spherefield::nn::{ActivationKind, AdamWConfig, MlpConfig};
use spherefield::tasks::{
    task_sets, train, EncoderConfig, ExperimentConfig, FieldDataset, FieldModel, Geometry, TaskConfig,
};
use spherefield::{Error, SphericalPoint};

const GOLDEN: &[u8] = include_bytes!("data/golden_2x4.fld");

fn golden_dataset() -> FieldDataset {
    FieldDataset::new(
        Geometry::Equirect {
            n_lat_pts: 2,
            n_lon_pts: 4,
        },
        1,
        1,
        vec![0.0, 1.0, -1.0, 0.5, 2.0, -2.5, 3.25, 100.0],
    )
    .unwrap()
}

fn format_offset(e: Error) -> u64 {
    match e {
        Error::Format { offset, .. } => offset,
        other => panic!("expected a format error, got {other}"),
    }
}

#[test]
fn golden_bytes() {
    let bytes = encode_field(&golden_dataset());
    assert_eq!(bytes, GOLDEN);
    assert_eq!(&bytes[..8], b"SPHFLD01");
    assert_eq!(bytes.len(), FIELD_HEADER_LEN + 8 * 4);
    assert_eq!(decode_field(GOLDEN).unwrap(), golden_dataset());
}

#[test]
fn field_decode_errors_report_offsets() {
    let mut bad = GOLDEN.to_vec();
    bad[3] = b'X';
    assert_eq!(format_offset(decode_field(&bad).unwrap_err()), 0);

    let mut bad = GOLDEN.to_vec();
    bad[8] = 7;
    assert_eq!(format_offset(decode_field(&bad).unwrap_err()), 8);

    assert_eq!(format_offset(decode_field(&GOLDEN[..10]).unwrap_err()), 10);
    assert_eq!(
        format_offset(decode_field(&GOLDEN[..GOLDEN.len() - 1]).unwrap_err()),
        GOLDEN.len() as u64 - 1
    );

    let mut long = GOLDEN.to_vec();
    long.push(0);
    assert!(decode_field(&long).is_err());

    // healpix tag with n_side 3
    let mut bad = GOLDEN.to_vec();
    bad[8] = 1;
    bad[9..13].copy_from_slice(&3u32.to_le_bytes());
    bad[13..17].copy_from_slice(&0u32.to_le_bytes());
    assert_eq!(format_offset(decode_field(&bad).unwrap_err()), 9);
}

fn arb_dataset() -> impl Strategy<Value = FieldDataset> {
    let geometry = prop_oneof![
        (1usize..6, 1usize..7).prop_map(|(a, b)| Geometry::Equirect {
            n_lat_pts: a,
            n_lon_pts: b
        }),
        (0u32..3).prop_map(|k| Geometry::Healpix { n_side: 1 << k }),
    ];
    (geometry, 1usize..3, 1usize..3).prop_flat_map(|(g, c, s)| {
        let n = g.n_points() * c * s;
        proptest::collection::vec(any::<u32>().prop_map(f32::from_bits), n)
            .prop_map(move |v| FieldDataset::new(g, c, s, v).unwrap())
    })
}

proptest! {
    #[test]
    fn field_round_trip_is_bit_exact(ds in arb_dataset()) {
        let back = decode_field(&encode_field(&ds)).unwrap();
        prop_assert_eq!(back.geometry(), ds.geometry());
        prop_assert_eq!(back.channels(), ds.channels());
        prop_assert_eq!(back.snapshots(), ds.snapshots());
        let a: Vec<u32> = ds.values().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn csv_import_places_rows_on_the_grid() {
    let g = Geometry::Equirect {
        n_lat_pts: 1,
        n_lon_pts: 2,
    };
    let ds = import_csv_reader("lat,lon,value\n0,180,2.5\n0,0,-1\n".as_bytes(), g).unwrap();
    assert_eq!(ds.values(), &[-1.0, 2.5]);

    // negative longitudes wrap; snapshots come from the fourth column
    let g = Geometry::Equirect {
        n_lat_pts: 3,
        n_lon_pts: 2,
    };
    let mut text = String::new();
    for s in 0..2 {
        for (i, lat) in [90.0, 0.0, -90.0].iter().enumerate() {
            for (j, lon) in [0.0, -180.0].iter().enumerate() {
                text.push_str(&format!("{lat},{lon},{},{s}\n", 100 * s + 10 * i + j));
            }
        }
    }
    let ds = import_csv_reader(text.as_bytes(), g).unwrap();
    assert_eq!(ds.snapshots(), 2);
    assert_eq!(ds.value(1, 3, 0), 111.0);
}

#[test]
fn csv_import_rejects_bad_rows() {
    let g = Geometry::Equirect {
        n_lat_pts: 1,
        n_lon_pts: 2,
    };
    for text in [
        "0,0,1\n",
        "0,0,1\n0,180,2\n0,0,3\n",
        "5,0,1\n0,180,2\n",
        "0,0\n0,180,2\n",
        "0,0,x\n0,180,2\n",
    ] {
        assert!(import_csv_reader(text.as_bytes(), g).is_err(), "{text:?}");
    }
    let hp = Geometry::Healpix { n_side: 1 };
    let centers = spherefield::healpix::pixel_centers(1).unwrap();
    let text: String = centers
        .iter()
        .enumerate()
        .map(|(k, c)| format!("{},{},{k}\n", c.lat().to_degrees(), c.lon().to_degrees()))
        .collect();
    let ds = import_csv_reader(text.as_bytes(), hp).unwrap();
    assert_eq!(ds.values()[7], 7.0);
}

fn small_mlp(activation: ActivationKind, output_dim: usize) -> MlpConfig {
    MlpConfig {
        hidden_dim: 8,
        hidden_layers: 2,
        output_dim,
        activation,
        omega0: 20.0,
    }
}

fn encoders() -> Vec<EncoderConfig> {
    vec![
        EncoderConfig::Equirect {
            levels: 3,
            feature_dim: 2,
            gamma: 1.5,
            base_lat: 4,
            base_lon: Some(6),
        },
        EncoderConfig::Healpix {
            levels: 2,
            feature_dim: 3,
            first_level: 2,
        },
        EncoderConfig::Positional { levels: 4 },
        EncoderConfig::Fourier {
            features: 5,
            sigma: 2.0,
            seed: 9,
        },
        EncoderConfig::SphericalHarmonics { degree: 3 },
    ]
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points: Vec<SphericalPoint> = (0..50)
        .map(|k| SphericalPoint::new(-1.5 + 0.06 * k as f64, 0.37 * k as f64).unwrap())
        .collect();
    let times: Vec<f64> = (0..50).map(|k| k as f64 / 49.0).collect();
    for (i, enc) in encoders().into_iter().enumerate() {
        let with_time = i % 2 == 1;
        let act = if i % 2 == 0 {
            ActivationKind::Relu
        } else {
            ActivationKind::Sine
        };
        let cfg = small_mlp(act, 1 + i % 2);
        let model = FieldModel::new(&enc, &cfg, with_time, &mut rng).unwrap();
        let geometry = Some(Geometry::Healpix { n_side: 4 });
        let bytes = encode_checkpoint(&model, &cfg, geometry, None);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.model.encoder_config, enc);
        assert_eq!(back.model.with_time, with_time);
        assert_eq!(back.model_config, cfg);
        assert_eq!(back.geometry, geometry);
        assert!(back.optimizer.is_none());
        let t = with_time.then_some(&times[..]);
        let a = model.predict(&points, t).unwrap();
        let b = back.model.predict(&points, t).unwrap();
        assert_eq!(a, b, "encoder {i}");
        assert_eq!(
            encode_checkpoint(&back.model, &back.model_config, back.geometry, None),
            bytes
        );
    }
}

fn trained() -> (ExperimentConfig, spherefield::tasks::TrainOutcome, Geometry) {
    let g = Geometry::Equirect {
        n_lat_pts: 7,
        n_lon_pts: 12,
    };
    let ds = synth_field(g, 2, 3, 1.0).unwrap();
    let cfg = ExperimentConfig {
        seed: 5,
        steps: 40,
        eval_every: 20,
        batch_size: 16,
        encoder: encoders().remove(0),
        model: small_mlp(ActivationKind::Relu, 1),
        optimizer: AdamWConfig {
            lr: 1e-3,
            ..Default::default()
        },
        task: TaskConfig::Fit,
    };
    let (tr, ev) = task_sets(&cfg, &ds).unwrap();
    let out = train(&cfg, &tr, &ev).unwrap();
    (cfg, out, g)
}

#[test]
fn checkpoint_keeps_optimizer_state() {
    let (cfg, out, g) = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.sfc");
    save_checkpoint(&path, &out.last, &cfg.model, Some(g), Some(&out.optimizer)).unwrap();
    let back = load_checkpoint(&path).unwrap();
    let opt = back.optimizer.unwrap();
    assert_eq!(opt.steps_taken(), 40);
    assert_eq!(opt.config(), &cfg.optimizer);
    assert_eq!(opt.moments(), out.optimizer.moments());
    assert_eq!(back.geometry, Some(g));
}

#[test]
fn corrupted_checkpoints_fail_with_offsets() {
    let (cfg, out, g) = trained();
    let bytes = encode_checkpoint(&out.best, &cfg.model, Some(g), Some(&out.optimizer));

    let mut bad = bytes.clone();
    bad[0] = b'x';
    assert_eq!(format_offset(decode_checkpoint(&bad).unwrap_err()), 0);

    // first table entry offset pointing past the end
    let mut bad = bytes.clone();
    bad[16..24].copy_from_slice(&u64::MAX.to_le_bytes());
    assert!(matches!(decode_checkpoint(&bad), Err(Error::Format { .. })));

    for cut in [4, 12, 30, bytes.len() / 2, bytes.len() - 1] {
        let err = decode_checkpoint(&bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "cut {cut}: {err}");
    }

    let mut bad = bytes.clone();
    bad.extend_from_slice(&[1, 2, 3]);
    assert!(decode_checkpoint(&bad).is_err());
}

#[test]
fn series_round_trip_through_files() {
    let ds = synth_series(Geometry::Healpix { n_side: 4 }, 1, 4, 1.0, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("series.fld");
    spherefield::data_io::save_field(&ds, &path).unwrap();
    assert_eq!(spherefield::data_io::load_field(&path).unwrap(), ds);
    let missing = spherefield::data_io::load_field(dir.path().join("nope.fld")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}
