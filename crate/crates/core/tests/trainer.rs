//! Training loop behaviour: determinism, resume, mode limits, failure paths.

use mvrecon::geometry::Camera;
use mvrecon::synthdata::{generate_dataset, DatasetConfig, ShapeFamily, TrainingSample};
use mvrecon::trainer::{
    initial_checkpoint, loss_trend, reconstruct, train, train_until, Checkpoint, Mode, TrainConfig, TrainData, TrainError,
    NAN_DUMP_FILE,
};
use mvrecon::Array;

fn samples(family: ShapeFamily, n: usize) -> Vec<TrainingSample> {
    let cfg = DatasetConfig { train: n, eval: 0, family, ..DatasetConfig::default() };
    generate_dataset(&cfg).unwrap()
}

fn config(mode: Mode, steps: usize) -> TrainConfig {
    TrainConfig { mode, steps, ..TrainConfig::default() }
}

fn same_params(a: &Checkpoint, b: &Checkpoint) -> bool {
    a.params.entries.len() == b.params.entries.len()
        && a.params.entries.iter().zip(&b.params.entries).all(|((na, xa), (nb, xb))| {
            na == nb && xa.data().iter().zip(xb.data()).all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

fn inputs(s: &TrainingSample) -> Vec<(Camera, Array)> {
    (0..s.views.len()).map(|i| (*s.views.camera(i), s.images[i].clone())).collect()
}

#[test]
fn zero_steps_returns_the_initialisation() {
    let mut data = TrainData::from_samples(&samples(ShapeFamily::Sphere, 1));
    let cfg = config(Mode::A5, 0);
    let run = train(&mut data, &cfg, None).unwrap();
    assert!(run.log.is_empty());
    assert_eq!(run.checkpoint.step, 0);
    assert!(same_params(&run.checkpoint, &initial_checkpoint(&cfg).unwrap()));
}

#[test]
fn same_seed_same_trace() {
    let s = samples(ShapeFamily::Composite, 2);
    let cfg = config(Mode::A5, 12);
    let a = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap();
    let b = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap();
    assert_eq!(a.log, b.log);
    assert!(same_params(&a.checkpoint, &b.checkpoint));
    let c = train(&mut TrainData::from_samples(&s), &TrainConfig { seed: 1, ..cfg }, None).unwrap();
    assert_ne!(a.log, c.log);
}

#[test]
fn resume_is_bitwise_identical() {
    let s = samples(ShapeFamily::Composite, 3);
    let cfg = config(Mode::A5, 10);
    let full = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut data = TrainData::from_samples(&s);
    let half = train_until(&mut data, initial_checkpoint(&cfg).unwrap(), 4, Some(dir.path())).unwrap();
    assert_eq!(half.checkpoint.step, 4);
    let loaded = Checkpoint::load(&dir.path().join("ckpt")).unwrap();
    let rest = train_until(&mut data, loaded, 10, Some(dir.path())).unwrap();

    assert!(same_params(&full.checkpoint, &rest.checkpoint));
    assert_eq!(full.checkpoint.rng_word_pos, rest.checkpoint.rng_word_pos);
    let joined: Vec<_> = half.log.iter().chain(&rest.log).cloned().collect();
    assert_eq!(full.log, joined);
    let csv = std::fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 10);
}

#[test]
fn periodic_checkpoints_are_written() {
    let s = samples(ShapeFamily::Sphere, 1);
    let cfg = TrainConfig { checkpoint_every: 2, ..config(Mode::A5, 5) };
    let dir = tempfile::tempdir().unwrap();
    train(&mut TrainData::from_samples(&s), &cfg, Some(dir.path())).unwrap();
    for step in [2, 4] {
        let c = Checkpoint::load(&dir.path().join(format!("ckpt-{step:06}"))).unwrap();
        assert_eq!(c.step, step);
    }
    assert_eq!(Checkpoint::load(&dir.path().join("ckpt")).unwrap().step, 5);
}

#[test]
fn zero_jitter_collapses_a2_to_a1() {
    let s = samples(ShapeFamily::Composite, 2);
    let a1 = config(Mode::A1, 4);
    let a2 = TrainConfig { mode: Mode::A2, jitter_deg: 0.0, jitter_radius: 0.0, ..a1.clone() };
    let r1 = train(&mut TrainData::from_samples(&s), &a1, None).unwrap();
    let r2 = train(&mut TrainData::from_samples(&s), &a2, None).unwrap();
    assert_eq!(r1.log, r2.log);
    let jittered = train(&mut TrainData::from_samples(&s), &TrainConfig { mode: Mode::A2, ..a1 }, None).unwrap();
    assert_ne!(r1.log, jittered.log);
}

#[test]
fn non_finite_parameters_abort_with_a_dump() {
    let s = samples(ShapeFamily::Sphere, 1);
    let cfg = config(Mode::A5, 3);
    let mut start = initial_checkpoint(&cfg).unwrap();
    for (_, a) in start.params.entries.iter_mut() {
        a.data_mut().fill(f64::NAN as mvrecon::Real);
    }
    let dir = tempfile::tempdir().unwrap();
    let err = train_until(&mut TrainData::from_samples(&s), start, 3, Some(dir.path())).unwrap_err();
    assert!(matches!(err, TrainError::NonFinite { step: 0, .. }), "{err}");
    assert!(dir.path().join(NAN_DUMP_FILE).exists());
}

#[test]
fn resolution_mismatch_names_the_fix() {
    let s = samples(ShapeFamily::Sphere, 1);
    let cfg = TrainConfig { resolution: 32, ..config(Mode::A5, 1) };
    let err = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap_err().to_string();
    assert!(err.contains("resolution = 64"), "{err}");
}

#[test]
fn sphere_training_lowers_the_loss_and_stays_closed() {
    let s = samples(ShapeFamily::Sphere, 1);
    let cfg = config(Mode::A5, 150);
    let run = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap();
    let (first, last) = loss_trend(&run.log);
    assert!(last < first, "{first} -> {last}");
    let model = run.checkpoint.model().unwrap();
    let mesh = reconstruct(&model, cfg.resolution, &inputs(&s[0])[1..]).unwrap();
    assert_eq!(mesh.euler_characteristic(), 2);
}

#[test]
fn reconstruction_accepts_view_subsets_and_ignores_order() {
    let s = samples(ShapeFamily::Composite, 1);
    let model = initial_checkpoint(&config(Mode::A5, 0)).unwrap().model().unwrap();
    let all = inputs(&s[0]);
    for n in [4, 6] {
        assert!(reconstruct(&model, 64, &all[..n]).is_ok());
    }
    let mut rev = all.clone();
    rev.reverse();
    let a = reconstruct(&model, 64, &all).unwrap();
    let b = reconstruct(&model, 64, &rev).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reconstruction_rejects_bad_images() {
    let s = samples(ShapeFamily::Sphere, 1);
    let model = initial_checkpoint(&config(Mode::A5, 0)).unwrap().model().unwrap();
    assert!(reconstruct(&model, 64, &[]).is_err());
    let cam = *s[0].views.camera(1);
    let small = Array::zeros(&[3, 32, 32]);
    let err = reconstruct(&model, 64, &[(cam, small)]).unwrap_err().to_string();
    assert!(err.contains("--resolution"), "{err}");
    let grey = Array::zeros(&[1, 64, 64]);
    assert!(reconstruct(&model, 64, &[(cam, grey)]).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let s = samples(ShapeFamily::Sphere, 1);
    let cfg = config(Mode::A4, 3);
    let run = train(&mut TrainData::from_samples(&s), &cfg, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    run.checkpoint.save(dir.path()).unwrap();
    let back = Checkpoint::load(dir.path()).unwrap();
    assert!(same_params(&run.checkpoint, &back));
    assert_eq!(back.config, run.checkpoint.config);
    assert_eq!(back.step, 3);
    assert_eq!(back.rng_word_pos, run.checkpoint.rng_word_pos);
    assert_eq!(back.adam, run.checkpoint.adam);
}
