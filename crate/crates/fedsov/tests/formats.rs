use fedsov::files::{self, ClientKeyFile, RunDir, WatermarkFile};
use fedsov_core::fl_sim::{setup_federation, FlConfig, RoundMetrics, TaskSpec};
use fedsov_core::hash_watermark::Watermark;
use fedsov_core::pairing_sig::{Bls12, Desk, PairingBackend};

fn cfg() -> FlConfig {
    FlConfig {
        clients: 2,
        task: TaskSpec { samples_per_client: 10, test_samples: 10, ..TaskSpec::default() },
        ..FlConfig::default()
    }
}

#[test]
fn model_round_trip_and_tamper_check() {
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::new(dir.path());
    let fed = setup_federation::<Desk>(&cfg()).unwrap();
    files::write_model(&run.model(), &fed.sim.model).unwrap();
    assert_eq!(files::read_model(&run.model()).unwrap(), fed.sim.model);
    let mut bytes = std::fs::read(run.model()).unwrap();
    bytes[5] ^= 1;
    std::fs::write(run.model(), &bytes).unwrap();
    assert!(files::read_model(&run.model()).is_err());
    std::fs::write(run.model(), &bytes[..16]).unwrap();
    assert!(files::read_model(&run.model()).is_err());
}

fn keys_round_trip<B: PairingBackend>() {
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::new(dir.path());
    let fed = setup_federation::<B>(&cfg()).unwrap();
    files::write_pk_con(&run.pk_con(), &fed.pk_con, B::CURVE_ID).unwrap();
    let (pk_con, meta) = files::read_pk_con(&run.pk_con()).unwrap();
    assert_eq!(pk_con, fed.pk_con);
    assert_eq!(meta.count, 2);
    assert_eq!(meta.pk_len_bytes, fedsov_core::pairing_sig::pk_len::<B>());
    let side: serde_json::Value = files::read_json(&run.pk_con().with_extension("json")).unwrap();
    assert!(side.get("count").is_some() && side.get("pk_len_bytes").is_some());

    let file = ClientKeyFile::from_keypair(1, &fed.keys[1]);
    files::write_json(&run.client_key(1), &file).unwrap();
    let back: ClientKeyFile = files::read_json(&run.client_key(1)).unwrap();
    assert_eq!(back.secret::<B>().unwrap(), fed.keys[1].sk);
    assert_eq!(hex::decode(&back.pk_hex).unwrap(), pk_con.key(1).unwrap());
}

#[test]
fn key_files_round_trip_on_both_curves() {
    keys_round_trip::<Desk>();
    keys_round_trip::<Bls12>();
    let kp = setup_federation::<Desk>(&cfg()).unwrap().keys[0];
    assert!(ClientKeyFile::from_keypair(0, &kp).secret::<Bls12>().is_err());
}

#[test]
fn metrics_and_watermark_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = RunDir::new(dir.path());
    let m = vec![
        RoundMetrics { round: 1, main_accuracy: 0.5, detection_rate: 0.75, hinge_loss: 12.25 },
        RoundMetrics { round: 2, main_accuracy: 0.8125, detection_rate: 1.0, hinge_loss: 0.0 },
    ];
    files::write_metrics(&run.metrics(), &m).unwrap();
    assert_eq!(files::read_metrics(&run.metrics()).unwrap(), m);
    let header = std::fs::read_to_string(run.metrics()).unwrap();
    assert!(header.starts_with("round,main_acc,detection_rate,hinge_loss\n"));

    let wm = Watermark::from_bits(&[true, false, true, true, false, false, true, false, true]).unwrap();
    let f = WatermarkFile::new(&wm);
    assert_eq!(f.n, 9);
    assert_eq!(f.watermark().unwrap(), wm);
    assert!(WatermarkFile { n: 9, hex: "zz".into() }.watermark().is_err());
}
