import io
import json

import numpy as np
import pytest

from floordiff import engine as E
from floordiff.denoiser import DenoiserConfig, continuous_loss, forward_continuous, prepare_batch
from floordiff.diffusion import cosine_schedule, forward_sample
from floordiff.floorplan import dequantize
from floordiff.training import (NonFiniteLoss, TrainConfig, Trainer, load_config, load_model,
                                plan_targets, train_step)

from oracles import central_difference, scaled_rel_error

TINY = DenoiserConfig(d=16, heads=2, blocks_continuous=1, blocks_discrete=1, T=50)


def tiny_config(**kw):
    base = dict(model=TINY, batch_size=4, total_steps=6, seed=3, log_every=1)
    base.update(kw)
    return TrainConfig(**base)


def params_equal(a, b):
    return all(a[k].data.tobytes() == b[k].data.tobytes() for k in a)


def test_train_step_finite_and_reports(small_corpus):
    tr = Trainer.create(small_corpus, tiny_config())
    res = train_step(tr.model, tr.optimizer, small_corpus.plans[:4], cosine_schedule(50),
                     tr.config, tr.rng)
    assert np.isfinite(res.loss) and res.loss > 0
    assert set(res.grad_norms) == {"continuous", "discrete"}
    assert res.discrete_active == int(np.sum(res.t < 20))


def test_discrete_gradients_zero_when_all_t_at_least_20(small_corpus):
    tr = Trainer.create(small_corpus, tiny_config())
    items = small_corpus.plans[:4]
    sched = cosine_schedule(50)
    for t in ([20, 20, 20, 20], [20, 35, 50, 27]):
        res = train_step(tr.model, tr.optimizer, items, sched, tr.config, tr.rng, t=np.array(t))
        assert res.grad_norms["discrete"] == 0.0 and res.discrete_active == 0
        assert res.grad_norms["continuous"] > 0
    res = train_step(tr.model, tr.optimizer, items, sched, tr.config, tr.rng, t=np.array([19, 40, 40, 40]))
    assert res.grad_norms["discrete"] > 0 and res.discrete_active == 1


def test_training_is_deterministic(small_corpus):
    a = Trainer.create(small_corpus, tiny_config()).run(small_corpus)
    b = Trainer.create(small_corpus, tiny_config()).run(small_corpus)
    assert a.history == b.history
    assert params_equal(a.model.params, b.model.params)
    c = Trainer.create(small_corpus, tiny_config(seed=4)).run(small_corpus)
    assert not params_equal(a.model.params, c.model.params)


def test_lr_schedule():
    cfg = TrainConfig()
    assert cfg.lr_at(0) == 1e-3 and cfg.lr_at(7999) == 1e-3
    assert cfg.lr_at(8000) == pytest.approx(1e-4)
    assert cfg.lr_at(16000) == pytest.approx(1e-5)
    assert TrainConfig(decay_interval=None).lr_at(10**6) == 1e-3


def test_resume_matches_uninterrupted(small_corpus, tmp_path):
    straight = Trainer.create(small_corpus, tiny_config()).run(small_corpus)
    first = Trainer.create(small_corpus, tiny_config()).run(small_corpus, steps=3)
    path = tmp_path / "mid.ckpt"
    first.save(path)
    resumed = Trainer.load(path)
    assert resumed.step == 3
    resumed.run(small_corpus)
    assert resumed.step == straight.step == 6
    assert params_equal(resumed.model.params, straight.model.params)


def test_checkpoint_bytes_and_model_load(small_corpus, tmp_path):
    tr = Trainer.create(small_corpus, tiny_config()).run(small_corpus, steps=2)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    tr.save(p1)
    Trainer.load(p1).save(p2)
    assert p1.read_bytes() == p2.read_bytes()
    model = load_model(p1)
    assert model.config == TINY and model.histogram == tr.model.histogram


def test_checkpoint_write_failure_keeps_state(small_corpus, tmp_path):
    tr = Trainer.create(small_corpus, tiny_config()).run(small_corpus, steps=2)
    with pytest.raises(RuntimeError, match="step 2"):
        tr.save(tmp_path / "missing-dir" / "x.ckpt")
    tr.save(tmp_path / "ok.ckpt")
    assert Trainer.load(tmp_path / "ok.ckpt").step == 2


def test_log_file_lines(small_corpus):
    buf = io.StringIO()
    Trainer.create(small_corpus, tiny_config()).run(small_corpus, log_file=buf)
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    assert [r["step"] for r in rows] == list(range(1, 7))
    assert set(rows[0]) == {"step", "loss", "lr", "wall"}


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_is_reported(small_corpus):
    tr = Trainer.create(small_corpus, tiny_config())
    tr.model.params["cont.head.W"].data[0, 0] = np.inf
    with pytest.raises(NonFiniteLoss, match="step 7"):
        train_step(tr.model, tr.optimizer, small_corpus.plans[:2], cosine_schedule(50),
                   tr.config, tr.rng, step=7)


def test_x0_target_gradient(small_corpus):
    cfg = DenoiserConfig(d=16, heads=2, blocks_continuous=2, blocks_discrete=1, T=50, target="x0")
    tr = Trainer.create(small_corpus, TrainConfig(model=cfg, seed=1))
    params = tr.model.params
    items = small_corpus.plans[:2]
    ints, counts = plan_targets([p for p, _ in items])
    batch = prepare_batch([d for _, d in items], counts, cfg)
    x0 = dequantize(batch.scatter(ints, 2)) * batch.real[..., None]
    rng = np.random.default_rng(0)
    t = np.array([7, 31])
    x_t = forward_sample(x0, t, rng.standard_normal(x0.shape) * batch.real[..., None], cosine_schedule(50))

    def build():
        return continuous_loss(forward_continuous(params, batch, x_t, t, cfg), x0, batch.real)

    grads = E.gradients(build(), params)
    analytic, numeric = [], []
    for name in ("cont.embed.W", "cont.block1.rca.Wq", "cont.block0.norm.gain", "cont.head.b"):
        picks = [tuple(int(rng.integers(0, s)) for s in params[name].shape) for _ in range(6)]
        num = central_difference(lambda: float(build().data), params[name].data, indices=picks)
        analytic.extend(grads[name][i] for i in picks)
        numeric.extend(num[i] for i in picks)
    assert scaled_rel_error([np.array(analytic)], [np.array(numeric)]) < 1e-5


def test_config_file(tmp_path):
    path = tmp_path / "train.ini"
    path.write_text("[train]\nbatch_size = 8\nlr = 5e-4\ndecay_interval = none\n"
                    "[model]\nd = 32\nT = 100\nffn = true\n")
    cfg = load_config(path)
    assert cfg.batch_size == 8 and cfg.lr == 5e-4 and cfg.decay_interval is None
    assert cfg.model.d == 32 and cfg.model.ffn is True and cfg.T == 100
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    path.write_text("[train]\nbatchsize = 8\n")
    with pytest.raises(ValueError, match="batchsize"):
        load_config(path)
    path.write_text("[optim]\nlr = 1\n")
    with pytest.raises(ValueError, match="optim"):
        load_config(path)


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(lr=-1.0)


@pytest.mark.slow
def test_overfit_loss_smoothed_non_increasing_until_reproduced():
    from floordiff.dataset import synthesize_plan
    from floordiff.training import overfit_single
    plan, diagram = synthesize_plan(5, np.random.default_rng(123))
    result = overfit_single(plan, diagram, TrainConfig(total_steps=4000), check_every=500)
    assert result.reproduced
    history = np.array(result.trainer.history[: result.steps])
    windows = history[: len(history) // 100 * 100].reshape(-1, 100).mean(axis=1)
    assert np.all(np.diff(windows) <= 0), np.round(windows, 4)
