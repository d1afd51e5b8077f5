"""Model assembly: variants, embedding sources, gradient reach."""

import numpy as np
import pytest

from poselift import train as T
from poselift.config import Config
from poselift.data import save_embedding_file
from poselift.errors import ConfigError, FormatError
from poselift.losses import action_loss, pose_loss, total_loss
from poselift.model import PoseLifter
from poselift.tensor import Tensor


@pytest.fixture(scope="module")
def small_dataset():
    cfg = Config()
    cfg.data.train_per_action = 8
    cfg.data.eval_per_action = 4
    return T.dataset_from_config(cfg)


def small_config(**atp_kw):
    cfg = Config()
    cfg.data.train_per_action = 8
    cfg.data.eval_per_action = 4
    for key, value in atp_kw.items():
        setattr(cfg.atp, key, value)
    return cfg


def test_parameter_names_unique_and_pathlike():
    model = PoseLifter(small_config())
    names = list(model.params)
    assert len(names) == len(set(names))
    assert all("." in n for n in names)
    assert "atp.context" in names and "app.prompts" in names


def test_gradients_reach_all_prompt_components(small_dataset):
    model = PoseLifter(small_config())
    result = model.forward_train(small_dataset.train.input2d[:6],
                                 small_dataset.train.labels[:6])
    lp = pose_loss(result.pred3d, Tensor(small_dataset.train.target3d[:6]))
    la = action_loss(result.class_probs, small_dataset.train.labels[:6])
    total_loss(lp, la, 0.1).backward()
    for name in ("atp.context", "atp.class_tokens", "atp.text_encoder.proj",
                 "proj.out.weight", "encoder.block1.conv", "head.out.weight"):
        grad = model.params[name].grad
        assert grad is not None and np.abs(grad).sum() > 0, name


def test_learnable_embedding_mode(small_dataset):
    model = PoseLifter(small_config(text_mode="learnable"))
    assert model.text_encoder is None
    assert model.params["atp.embeddings"].trainable
    t = model.text_embeddings()
    assert t.shape == (4, 16)
    result = model.forward_train(small_dataset.train.input2d[:4],
                                 small_dataset.train.labels[:4])
    assert result.class_probs.shape == (4, 4)


def test_file_embedding_mode(tmp_path, small_dataset):
    rng = np.random.default_rng(3)
    embeddings = rng.normal(size=(4, 16)).astype(np.float32)
    save_embedding_file(tmp_path / "emb", embeddings,
                        small_dataset.manifest.action_names)
    cfg = small_config(text_mode="file", embeddings_path=str(tmp_path / "emb"))
    model = PoseLifter(cfg)
    assert not model.params["atp.embeddings"].trainable
    assert np.array_equal(model.text_embeddings().data, embeddings)
    # classification with loaded embeddings matches passing them explicitly
    x = small_dataset.eval.input2d[:5]
    pred_a, labels_a, probs_a = model.forward_eval(x, embeddings=embeddings)
    reference = PoseLifter(small_config())
    pred_b, labels_b, probs_b = reference.forward_eval(x, embeddings=embeddings)
    assert np.array_equal(probs_a, probs_b)


def test_file_embedding_shape_mismatch(tmp_path, small_dataset):
    save_embedding_file(tmp_path / "emb", np.zeros((4, 8), dtype=np.float32),
                        small_dataset.manifest.action_names)
    cfg = small_config(text_mode="file", embeddings_path=str(tmp_path / "emb"))
    with pytest.raises(FormatError, match="shape"):
        PoseLifter(cfg)


def test_file_embedding_missing_files(tmp_path):
    cfg = small_config(text_mode="file", embeddings_path=str(tmp_path / "nope"))
    with pytest.raises(FormatError):
        PoseLifter(cfg)


def test_eval_requires_embeddings_for_text_prompts(small_dataset):
    model = PoseLifter(small_config())
    with pytest.raises(ConfigError, match="saved text embeddings"):
        model.forward_eval(small_dataset.eval.input2d[:2])


def test_tap_layer_validation():
    cfg = small_config()
    cfg.atp.tap_layer = 4          # F=27 has 3 blocks
    with pytest.raises(ConfigError, match="tap_layer"):
        PoseLifter(cfg)


def test_baseline_has_no_classifier(small_dataset):
    cfg = small_config()
    cfg.atp.enabled = False
    cfg.app.enabled = False
    cfg.train.label_aux = "off"
    model = PoseLifter(cfg)
    result = model.forward_train(small_dataset.train.input2d[:3],
                                 small_dataset.train.labels[:3])
    assert result.class_probs is None
    pred, labels, probs = model.forward_eval(small_dataset.eval.input2d[:3])
    assert labels is None and probs is None
    assert pred.shape == (3, 8, 3)


def test_app_without_classifier_uses_gt_or_fails(small_dataset):
    cfg = small_config()
    cfg.atp.enabled = False
    cfg.train.label_aux = "off"    # force: pose prompts but no label source
    model = PoseLifter(cfg)
    x = small_dataset.eval.input2d[:3]
    gt = small_dataset.eval.labels[:3]
    pred, _, _ = model.forward_eval(x, gt_labels=gt)
    assert pred.shape == (3, 8, 3)
    with pytest.raises(ConfigError, match="label"):
        model.forward_eval(x)
