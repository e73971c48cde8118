import numpy as np
import pytest

from domainchar.flow import ConditionalFlow
from domainchar.npe import DivergenceError, TrainConfig, TrainReport, fit, npe_loss, train
from domainchar.params import default_space
from domainchar.simulator import generate_dataset

SPACE = default_space()
SMALL = dict(num_layers=2, hidden=(16,), num_bins=4)


@pytest.fixture(scope="module")
def small_data():
    return generate_dataset(SPACE, 2000, seed=0, fractions=(0.8, 0.2, 0.0))


def test_initial_loss_at_midpoints():
    flow = ConditionalFlow(SPACE, 8, rng=np.random.default_rng(0))
    mid = 0.5 * (SPACE.lower + SPACE.upper)
    theta = np.tile(mid, (10, 1))
    x = np.random.default_rng(1).normal(size=(10, 8))
    expected = 6 * np.log(np.sqrt(2 * np.pi)) - SPACE.log_jacobian
    assert abs(npe_loss(flow, theta, x) - expected) <= 1e-9


def test_empty_batch_rejected():
    flow = ConditionalFlow(SPACE, 8)
    with pytest.raises(ValueError):
        npe_loss(flow, np.zeros((0, 6)), np.zeros((0, 8)))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)


def test_loss_decreases_over_first_epochs(small_data):
    _, report = train(small_data, TrainConfig(max_epochs=10, patience=100, **SMALL))
    vals = [v for _, _, v in report.epochs]
    trains = [t for _, t, _ in report.epochs]
    assert len(vals) == 10
    assert vals[-1] < vals[0] and trains[-1] < trains[0]


def test_training_deterministic(small_data):
    cfg = TrainConfig(max_epochs=3, seed=4, **SMALL)
    f1, r1 = train(small_data, cfg)
    f2, r2 = train(small_data, cfg)
    assert r1 == r2
    assert all(np.array_equal(a, b) for a, b in zip(f1.get_params(), f2.get_params()))


def test_best_checkpoint_restored(small_data):
    flow, report = train(small_data, TrainConfig(max_epochs=8, patience=2, **SMALL))
    assert report.best_val_loss == report.epochs[report.best_epoch][2]
    val = small_data.subset("val")
    assert npe_loss(flow, val.theta, val.features) == pytest.approx(report.best_val_loss,
                                                                    rel=1e-12)


def _scripted_fit(val_losses, patience):
    """Run fit with a validation curve forced by monkeypatched loss values."""
    import domainchar.npe as npe
    it = iter(val_losses)
    orig = npe._batched_loss
    npe._batched_loss = lambda *a, **k: next(it)
    try:
        space = SPACE
        flow = ConditionalFlow(space, 8, **SMALL, rng=np.random.default_rng(0))
        rng = np.random.default_rng(0)
        th = space.sample_prior(32, rng)[:, space.predicted_index]
        x = rng.normal(size=(32, 8))
        return fit(flow, th, x, th, x,
                   TrainConfig(max_epochs=len(val_losses), patience=patience, **SMALL), rng)
    finally:
        npe._batched_loss = orig


def test_patience_zero_stops_at_first_non_improving_epoch():
    report = _scripted_fit([5.0, 4.0, 4.5, 3.0, 2.0], patience=0)
    assert len(report.epochs) == 3
    assert report.best_epoch == 1 and report.stopped_early


def test_patience_counts_consecutive_failures():
    report = _scripted_fit([5.0, 6.0, 4.0, 4.1, 4.2, 4.3, 1.0], patience=2)
    assert len(report.epochs) == 6 and report.best_epoch == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_raises():
    flow = ConditionalFlow(SPACE, 8, **SMALL, rng=np.random.default_rng(0))
    rng = np.random.default_rng(0)
    th = SPACE.sample_prior(16, rng)[:, SPACE.predicted_index]
    x = rng.normal(size=(16, 8))
    flow.parameters()[0][...] = np.nan
    with pytest.raises(DivergenceError):
        fit(flow, th, x, th, x, TrainConfig(max_epochs=1, **SMALL), rng)


def test_train_requires_val_split():
    ds = generate_dataset(SPACE, 50, seed=0)
    with pytest.raises(ValueError):
        train(ds, TrainConfig(max_epochs=1, **SMALL))


def test_report_csv(tmp_path):
    rep = TrainReport([(0, 2.5, 3.0), (1, 2.0, 2.75)], best_epoch=1)
    rep.to_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "epoch,train_loss,val_loss\n0,2.5,3.0\n1,2.0,2.75\n"
    assert rep.best_val_loss == 2.75
