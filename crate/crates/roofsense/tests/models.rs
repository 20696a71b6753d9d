use candle_core::{Device, Tensor};
use roofsense::models::checkpoint;
use roofsense::models::train::{accuracy, train, Examples, TrainConfig};
use roofsense::models::{Arch, BackboneSpec, Modality, Model, Offline};
use roofsense_core::synth::{synth_generate, SynthParams};
use roofsense_core::{PixelGrid, Task};

fn max_abs(t: &Tensor) -> f32 {
    t.abs().unwrap().flatten_all().unwrap().max(0).unwrap().to_scalar::<f32>().unwrap()
}

#[test]
fn paper_backbones_have_documented_embedding_widths() {
    for (arch, width) in [(Arch::ResNet50, 2048), (Arch::InceptionV3, 2048), (Arch::EfficientNetB0, 1280)] {
        let spec = BackboneSpec { pretrained: false, ..BackboneSpec::new(arch, 3, 4) };
        assert_eq!(spec.embedding_dim, width);
        let model = Model::build(&spec, Task::RoofType, 1, &Offline).unwrap();
        let side = arch.default_side();
        let x = Tensor::zeros((1, 3, side, side), candle_core::DType::F32, &Device::Cpu).unwrap();
        let (emb, logits) = model.forward(&x, false, 0).unwrap();
        assert_eq!(emb.dims(), &[1, width], "{}", arch.as_str());
        assert_eq!(logits.dims(), &[1, 4]);
    }
}

#[test]
fn batch_embeddings_have_one_row_per_patch() {
    for (arch, width) in [(Arch::ResNet50, 2048), (Arch::EfficientNetB0, 1280)] {
        let spec = BackboneSpec { pretrained: false, ..BackboneSpec::new(arch, 3, 5) };
        let model = Model::build(&spec, Task::RoofMaterial, 1, &Offline).unwrap();
        let patches = vec![PixelGrid::filled(3, 40, 30, 100.0); 5];
        let e = model.extract_embeddings(&patches).unwrap();
        assert_eq!((e.rows(), e.cols()), (5, width));
    }
}

#[test]
fn zero_input_gives_zero_tiny_embedding() {
    let model = Model::build(&BackboneSpec::tiny(32, 16, 1, 4), Task::RoofType, 8, &Offline).unwrap();
    let x = Tensor::zeros((1, 1, 32, 32), candle_core::DType::F32, &Device::Cpu).unwrap();
    let (emb, logits) = model.forward(&x, false, 0).unwrap();
    assert_eq!(max_abs(&emb), 0.0);
    assert_eq!(logits.dims(), &[1, 4]);
}

#[test]
fn input_sides_follow_the_architecture() {
    assert_eq!(Arch::ResNet50.default_side(), 224);
    assert_eq!(Arch::EfficientNetB0.default_side(), 224);
    assert_eq!(Arch::InceptionV3.default_side(), 299);
    assert_eq!(Arch::ResNet50.default_dropout(), 0.5);
    assert_eq!(Arch::InceptionV3.default_dropout(), 0.0);
}

#[test]
fn wrong_input_shape_is_rejected() {
    let model = Model::build(&BackboneSpec::tiny(16, 8, 1, 4), Task::RoofType, 0, &Offline).unwrap();
    let x = Tensor::zeros((1, 3, 16, 16), candle_core::DType::F32, &Device::Cpu).unwrap();
    assert!(model.forward(&x, false, 0).is_err());
}

#[test]
fn tiny_single_channel_conv_is_a_third_of_replicated_rgb() {
    let rgb = Model::build(&BackboneSpec::tiny(16, 8, 3, 4), Task::RoofType, 5, &Offline).unwrap();
    let w3 = rgb.first_conv().clone();
    let w1 = (w3.sum_keepdim(1).unwrap() / 3.0).unwrap();
    let x = Tensor::randn(0f32, 1.0, (2, 1, 16, 16), &Device::Cpu).unwrap();
    let x3 = Tensor::cat(&[&x, &x, &x], 1).unwrap();
    let a = x3.conv2d(&w3, 1, 1, 1, 1).unwrap();
    let b = (x.conv2d(&w1, 1, 1, 1, 1).unwrap() * 3.0).unwrap();
    assert!(max_abs(&(a - b).unwrap()) < 1e-4);
}

fn examples(n: usize, task: Task, m: Modality, seed: u64, difficulty: f32) -> Examples {
    let params = SynthParams { side: 16, difficulty, ..SynthParams::default() };
    let s = synth_generate(n, task, seed, &params).unwrap();
    Examples {
        ids: s.iter().map(|s| s.building_id.clone()).collect(),
        patches: s.iter().map(|s| m.patch(s).clone()).collect(),
        labels: s.iter().map(|s| s.label(task).unwrap()).collect(),
    }
}

#[test]
fn softmax_rows_are_distributions() {
    let model = Model::build(&BackboneSpec::tiny(16, 8, 3, 5), Task::RoofMaterial, 2, &Offline).unwrap();
    let ex = examples(40, Task::RoofMaterial, Modality::Rgb, 0, 0.5);
    let p = model.predict_softmax(&ex.patches).unwrap();
    assert_eq!((p.rows(), p.cols()), (40, 5));
    for row in p.iter_rows() {
        assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }
    assert_eq!(model.extract_embeddings(&ex.patches).unwrap().cols(), 8);
}

#[test]
fn zero_epochs_leave_weights_untouched() {
    let mut model = Model::build(&BackboneSpec::tiny(16, 8, 1, 4), Task::RoofType, 3, &Offline).unwrap();
    let before = model.weights_hash().unwrap();
    let cfg = TrainConfig { max_epochs: 0, ..TrainConfig::default() };
    let state = train(&mut model, &examples(20, Task::RoofType, Modality::Lidar, 1, 0.5), None, &cfg, None).unwrap();
    assert!(state.history.is_empty());
    assert_eq!(model.weights_hash().unwrap(), before);
}

#[test]
fn separable_heights_are_learned() {
    let ex = examples(160, Task::RoofType, Modality::Lidar, 4, 0.0);
    let mut model = Model::build(&BackboneSpec::tiny(16, 16, 1, 4), Task::RoofType, 7, &Offline).unwrap();
    let cfg = TrainConfig { learning_rate: 3e-3, max_epochs: 30, batch_size: 16, seed: 11, ..TrainConfig::default() };
    let state = train(&mut model, &ex, None, &cfg, None).unwrap();
    let h = &state.history;
    assert_eq!(h.len(), 30);
    assert!(h[4].train_loss < h[0].train_loss, "{h:?}");
    let acc = accuracy(&model, &ex).unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn training_is_reproducible() {
    let ex = examples(24, Task::RoofType, Modality::Lidar, 5, 0.5);
    let run = || {
        let mut m = Model::build(&BackboneSpec::tiny(16, 8, 1, 4), Task::RoofType, 1, &Offline).unwrap();
        let cfg = TrainConfig { max_epochs: 2, batch_size: 8, seed: 3, ..TrainConfig::default() };
        train(&mut m, &ex, None, &cfg, None).unwrap();
        m.weights_hash().unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn checkpoint_round_trip_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let ex = examples(24, Task::RoofType, Modality::Rgb, 6, 0.5);
    let mut model = Model::build(&BackboneSpec::tiny(16, 8, 3, 4), Task::RoofType, 1, &Offline).unwrap();
    let refs: Vec<&PixelGrid> = ex.patches.iter().collect();
    model.norm.fit(&refs);
    let cfg = TrainConfig { max_epochs: 2, batch_size: 8, ..TrainConfig::default() };
    let state = train(&mut model, &ex, None, &cfg, None).unwrap();
    checkpoint::save(dir.path(), &model, Modality::Rgb, &cfg, &state, Some("abc".into())).unwrap();

    let (loaded, meta) = checkpoint::load(dir.path()).unwrap();
    assert_eq!(meta.dataset_hash.as_deref(), Some("abc"));
    assert_eq!(loaded.norm, model.norm);
    let (a, b) = (model.predict_softmax(&ex.patches).unwrap(), loaded.predict_softmax(&ex.patches).unwrap());
    assert_eq!(a, b);

    let (mut resumed, _, st) = checkpoint::resume(dir.path()).unwrap();
    assert_eq!(st.epochs_done, 2);
    let more = TrainConfig { max_epochs: 4, ..cfg };
    let st = train(&mut resumed, &ex, None, &more, Some(st)).unwrap();
    let epochs: Vec<usize> = st.history.iter().map(|r| r.epoch).collect();
    assert_eq!(epochs, vec![1, 2, 3, 4]);
}

#[test]
fn corrupted_weights_fail_the_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = Model::build(&BackboneSpec::tiny(16, 8, 1, 4), Task::RoofType, 1, &Offline).unwrap();
    let cfg = TrainConfig { max_epochs: 1, batch_size: 8, ..TrainConfig::default() };
    let state = train(&mut model, &examples(12, Task::RoofType, Modality::Lidar, 2, 0.5), None, &cfg, None).unwrap();
    checkpoint::save(dir.path(), &model, Modality::Lidar, &cfg, &state, None).unwrap();
    let other = Model::build(&BackboneSpec::tiny(16, 8, 1, 4), Task::RoofType, 99, &Offline).unwrap();
    let w: std::collections::HashMap<String, Tensor> = other.tensors().into_iter().collect();
    candle_core::safetensors::save(&w, dir.path().join(checkpoint::WEIGHTS_FILE)).unwrap();
    assert!(checkpoint::load(dir.path()).is_err());
}
