import numpy as np
import pytest
import scipy.linalg
import scipy.stats

from dqdwtd import _kernels
from dqdwtd._accel import HAVE_NUMBA
from dqdwtd.errors import DQDWTDError
from dqdwtd.liouvillian import ELECTRON_IN, ELECTRON_OUT, PHOTON_LEAK
from dqdwtd.model import ModelParams, build_model, initial_ket
from dqdwtd.trajectories import (
    BLOCK,
    ensemble_uniforms,
    run_ensemble,
    run_trajectory,
    simulate_records,
    summarize,
    trajectory_uniforms,
    write_click_dump,
)

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba unavailable or disabled")


def model_for(alpha, coop, n, kappa=1.0):
    p = ModelParams.from_dimensionless(alpha, coop, n_max=n, kappa=kappa)
    m = build_model(p)
    return m.H, m.channels, initial_ket(n, n)


# random streams

def test_trajectory_uniforms_replays_ensemble_rows():
    rows = ensemble_uniforms(123, 50)
    for i in (0, 1, 17, 49):
        np.testing.assert_array_equal(trajectory_uniforms(123, i, BLOCK), rows[i])
    long = trajectory_uniforms(123, 5, 3 * BLOCK)
    np.testing.assert_array_equal(long[:BLOCK], rows[5])
    assert len(set(long[BLOCK:]) & set(ensemble_uniforms(123, 1000).ravel())) == 0


def test_uniform_streams_reject_bad_seeds():
    with pytest.raises(ValueError):
        trajectory_uniforms(-1, 0, 4)
    with pytest.raises(ValueError):
        ensemble_uniforms(2**64, 3)


# single trajectories

def test_seed_replay_bitwise():
    h, ch, psi = model_for(2.0, 3.0, 2)
    a = run_trajectory(h, ch, psi, 99, 200.0, traj_index=7)
    b = run_trajectory(h, ch, psi, 99, 200.0, traj_index=7)
    assert a.clicks == b.clicks and a.terminated and not a.t_max_exceeded


@pytest.mark.parametrize("n", [1, 2])
def test_replay_matches_batch_member(n):
    h, ch, psi = model_for(1.0, 1.0, n)
    names, labels, times, counts, _ = simulate_records(h, ch, psi, 30, 5, 200.0, backend="numpy")
    for i in (0, 13, 29):
        rec = run_trajectory(h, ch, psi, 5, 200.0, traj_index=i)
        assert rec.labels == [names[k] for k in labels[i, :counts[i]]]
        np.testing.assert_allclose(rec.times, times[i, :counts[i]], rtol=1e-12)


@pytest.mark.parametrize("alpha,coop", [(1.0, 1.0), (5.0, 10.0)])
@pytest.mark.parametrize("n", [1, 2])
def test_exactly_n_monitored_clicks(alpha, coop, n):
    h, ch, psi = model_for(alpha, coop, n)
    _, labels, times, counts, status = simulate_records(h, ch, psi, 10_000, 1, 200.0)
    done = status == _kernels.DARK
    assert done.all()
    assert np.all(counts[done] == n)
    if n == 2:
        assert np.all(np.diff(times[:, :2], axis=1) > 0)


def test_norm_strictly_decreases_between_jumps():
    h, ch, psi = model_for(1.3, 4.0, 2)
    rec = run_trajectory(h, ch, psi, 11, 200.0, keep_norms=400)
    norms = rec.norms[~np.isnan(rec.norms)]
    assert norms.size >= 3
    segments = np.split(rec.norms, np.flatnonzero(np.isnan(rec.norms)))
    for seg in segments:
        seg = seg[~np.isnan(seg)]
        assert np.all(np.diff(seg) < 0)
        assert np.all((seg > 0) & (seg <= 1))
    # dense check of the same no-jump flow from the initial state
    ops = [np.sqrt(c.rate) * c.op for c in ch]
    gen = -1j * (h - 0.5j * sum(o.conj().T @ o for o in ops))
    dense = [np.linalg.norm(scipy.linalg.expm(gen * t) @ psi) ** 2 for t in np.linspace(0, 10, 201)]
    assert np.all(np.diff(dense) < 0)


def test_time_limit_flags_record():
    h, ch, psi = model_for(0.5, 2.0, 2)
    rec = run_trajectory(h, ch, psi, 3, 1e-6)
    assert rec.t_max_exceeded and not rec.terminated and rec.clicks == []


def test_click_buffer_overflow_raises():
    h, ch, psi = model_for(1.0, 1.0, 2)
    with pytest.raises(DQDWTDError):
        run_trajectory(h, ch, psi, 0, 200.0, max_clicks=1)
    with pytest.raises(DQDWTDError):
        simulate_records(h, ch, psi, 10, 0, 200.0, max_clicks=1)


def test_unknown_labels_and_backend():
    h, ch, psi = model_for(1.0, 1.0, 1)
    with pytest.raises(ValueError):
        run_trajectory(h, ch, psi, 0, 10.0, record=["nope"])
    with pytest.raises(ValueError):
        simulate_records(h, ch, psi, 4, 0, 10.0, backend="fortran")


# ensemble statistics

def test_bare_cavity_decay_is_exponential():
    kappa = 1.6
    h, ch, psi = model_for(1.0, 0.0, 1, kappa=kappa)
    names, labels, times, counts, _ = simulate_records(h, ch, psi, 10_000, 2024, 200.0 / kappa)
    assert np.all(counts == 1)
    assert set(labels[:, 0]) == {names.index(PHOTON_LEAK)}
    ks = scipy.stats.kstest(times[:, 0], "expon", args=(0, 1 / kappa))
    assert ks.pvalue > 0.01


def test_recording_unmonitored_then_filtering_changes_nothing():
    h, ch, psi = model_for(2.0, 3.0, 2)
    names, l1, t1, c1, s1 = simulate_records(h, ch, psi, 2000, 8, 200.0)
    _, l2, t2, c2, s2 = simulate_records(h, ch, psi, 2000, 8, 200.0,
                                         record=[ELECTRON_IN, ELECTRON_OUT, PHOTON_LEAK], max_clicks=16)
    inj = names.index(ELECTRON_IN)
    assert np.array_equal(s1, s2)
    for i in range(2000):
        keep = l2[i, :c2[i]] != inj
        assert np.array_equal(l1[i, :c1[i]], l2[i, :c2[i]][keep])
        assert np.array_equal(t1[i, :c1[i]], t2[i, :c2[i]][keep])
    # every photocurrent click is preceded by its own injection
    out = names.index(ELECTRON_OUT)
    for i in range(2000):
        seq = l2[i, :c2[i]]
        assert np.all(np.cumsum(seq == inj) - np.cumsum(seq == out) >= 0)
    assert np.any(l2 == inj)


@needs_numba
@pytest.mark.parametrize("n", [1, 2])
def test_backends_agree(n):
    h, ch, psi = model_for(0.5, 2.0, n)
    a = simulate_records(h, ch, psi, 3000, 77, 200.0, backend="numba")
    b = simulate_records(h, ch, psi, 3000, 77, 200.0, backend="numpy")
    assert np.array_equal(a[1], b[1]) and np.array_equal(a[3], b[3]) and np.array_equal(a[4], b[4])
    np.testing.assert_allclose(a[2], b[2], rtol=1e-9, atol=1e-12)


def test_ensemble_reproducible_and_consistent():
    p = ModelParams.from_dimensionless(1.0, 1.0)
    s1 = run_ensemble(p, 1, 4000, seed=31)
    s2 = run_ensemble(p, 1, 4000, seed=31)
    assert s1 == s2
    assert s1.n_unterminated == 0
    total = sum(v for v, _ in s1.first_click_freq.values())
    assert total == pytest.approx(1.0, abs=1e-12)
    p_e, se = s1.first_click_freq[ELECTRON_OUT]
    assert se == pytest.approx(np.sqrt(p_e * (1 - p_e) / 4000))
    assert s1.click_count_hist == {1: 4000}
    assert run_ensemble(p, 1, 4000, seed=32) != s1


def test_ensemble_two_photon_positions():
    p = ModelParams.from_dimensionless(5.0, 10.0)
    s = run_ensemble(p, 2, 5000, seed=4)
    assert s.click_count_hist == {2: 5000}
    total = sum(v for v, _ in s.sequence_freq.values())
    assert total == pytest.approx(1.0, abs=1e-12)
    e1 = s.position_freq(0, ELECTRON_OUT)[0]
    e2 = s.position_freq(1, ELECTRON_OUT)[0]
    assert e1 == pytest.approx(s.sequence_freq[(ELECTRON_OUT, ELECTRON_OUT)][0]
                               + s.sequence_freq[(ELECTRON_OUT, PHOTON_LEAK)][0])
    assert e2 > e1


def test_ensemble_warns_on_cutoff():
    p = ModelParams.from_dimensionless(0.5, 2.0)
    with pytest.warns(RuntimeWarning, match="t_max"):
        s = run_ensemble(p, 1, 200, seed=0, t_max=0.05)
    assert s.n_unterminated > 0
    with pytest.raises(ValueError):
        run_ensemble(p, 1, 0, seed=0)


def test_summary_and_dump_format(tmp_path):
    h, ch, psi = model_for(1.0, 1.0, 2, kappa=2.0)
    names, labels, times, counts, status = simulate_records(h, ch, psi, 5, 0, 100.0)
    stats = summarize(names, labels, times, counts, status, 0)
    assert stats.n_traj == 5 and stats.seed == 0
    path = tmp_path / "dump.csv"
    with open(path, "w") as fh:
        write_click_dump(fh, names, labels, times, counts, time_unit=0.5)
    lines = path.read_text().splitlines()
    assert lines[0] == "traj_id,channel,time"
    assert len(lines) == 1 + counts.sum()
    i, lab, t = lines[1].split(",")
    assert i == "0" and lab in (ELECTRON_OUT, PHOTON_LEAK)
    assert float(t) == pytest.approx(times[0, 0] / 0.5, rel=1e-14)
