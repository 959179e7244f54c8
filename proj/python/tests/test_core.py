import numpy as np
import pytest

import minivlm
from conftest import SMALL_MODEL


def test_grid_and_budget_examples():
    assert minivlm.compute_grid(672, 672) == (2, 2)
    assert minivlm.compute_grid(1008, 1344) == (3, 4)
    assert minivlm.budget(dims=(672, 672), strategy="uniform4")["views"] == 5
    video = minivlm.budget(frames=30, window=2)
    assert (video["naive_position_ids"], video["shared_position_ids"]) == (4320, 30)
    single = minivlm.budget(dims=(336, 336), strategy="resize")
    assert (single["views"], single["raw_tokens"]) == (1, 576)
    with pytest.raises(ValueError):
        minivlm.budget(dims=(10, 10), strategy="ds13")


def test_merge_matches_numpy_means():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((24 * 24, 5))
    merged = minivlm.merge(x, 24, 24, 3)
    assert merged.shape == (64, 5)
    grid = x.reshape(8, 3, 8, 3, 5).mean(axis=(1, 3)).reshape(64, 5)
    np.testing.assert_allclose(merged, grid, atol=1e-12)
    assert minivlm.merged_token_count(24, 8) == 9


def test_positions():
    segments = [("text", 3), ("visual", 2), ("text", 1)]
    assert minivlm.assign_positions(segments, "shared_fpid") == [0, 1, 2, 3, 3, 4]
    assert minivlm.count_positions([("visual", 144)] * 30, "naive") == 4320
    with pytest.raises(ValueError):
        minivlm.assign_positions([])


def test_split_image_quadrants():
    img = np.zeros((672, 672, 3))
    img[:336, 336:, 1] = 1.0
    views = minivlm.split_image(img)
    assert len(views) == 5
    assert all(v.shape == (336, 336, 3) for v in views)
    assert views[2][..., 1].min() == 1.0
    assert views[1][..., 1].max() == 0.0


def test_generate_sample_is_deterministic():
    a = minivlm.generate_sample(5, "video")
    b = minivlm.generate_sample(5, "video")
    assert a["caption"] == b["caption"]
    assert 2 <= len(a["media"]) <= 8
    np.testing.assert_array_equal(a["media"][0], b["media"][0])


def test_gradcheck_small_model(schema):
    import jsonschema

    report = minivlm.gradcheck({"model": SMALL_MODEL})
    jsonschema.validate(report, schema("gradcheck_report"))
    assert report["passed"]
    text_only = minivlm.gradcheck({"model": SMALL_MODEL, "text_only": True})
    ve = next(g for g in text_only["groups"] if g["group"] == "visual_experts")
    assert ve["analytic_all_zero"]


def test_train_evaluate_and_load(tmp_path, schema):
    import jsonschema

    cfg = minivlm.default_train_config()
    cfg["model"] = SMALL_MODEL
    cfg["output_dir"] = str(tmp_path)
    cfg["data"] = {"train_images": 6, "train_videos": 6, "heldout_images": 2, "heldout_videos": 2, "max_patches": 4}
    for p in cfg["phases"]:
        p["steps"] = 2
        p["batch_size"] = 2
    out = minivlm.train(cfg)
    assert len(out["checkpoints"]) == 3
    config, tensors = minivlm.load_checkpoint(out["checkpoints"][-1])
    assert config["decoder"]["d_m"] == 32
    assert tensors["projector.w"].shape == (16, 32)
    report = minivlm.evaluate(out["checkpoints"][-1], {"merge_windows_eval": [1, 2], "heldout_images": 2, "heldout_videos": 0})
    jsonschema.validate(report, schema("eval_report"))
    assert [w["visual_tokens_per_view"] for w in report["windows"]] == [16, 4]
    with pytest.raises(ValueError):
        minivlm.evaluate(out["checkpoints"][-1], {"heldout_images": 0, "heldout_videos": 0})
    with pytest.raises(ValueError, match="phases\\[1\\].phase"):
        minivlm.train({"phases": [{"phase": "sft"}, {"phase": "alignment"}]})
