"""Channel generator and dataset file-format checks."""
import numpy as np
import pytest

from fddlab import channels as ch


def test_steering_broadside_all_ones():
    a = ch.steering_vector("ula", 8, 0.0)
    assert np.allclose(a, np.ones(8), atol=1e-15)


def test_steering_unit_modulus_and_norm():
    rng = np.random.default_rng(0)
    for _ in range(25):
        m = int(rng.integers(1, 16))
        theta = rng.uniform(-np.pi / 2, np.pi / 2)
        a = ch.steering_vector("ula", m, theta)
        assert np.allclose(np.abs(a), 1.0, atol=1e-14)
        assert abs(np.sum(np.abs(a) ** 2) - m) < 1e-12


def test_steering_m2_endfire():
    # half-wavelength ULA, sin(theta)=1 -> phase pi at the second element
    a = ch.steering_vector("ula", 2, np.pi / 2)
    assert np.allclose(a, [1.0, np.exp(1j * np.pi)], atol=1e-12)


def test_steering_upa_norm():
    a = ch.steering_vector("upa", 8, 0.3, 0.1, upa_rows=2)
    assert a.shape == (8,)
    assert np.allclose(np.abs(a), 1.0, atol=1e-14)


def test_single_path_unit_gain_norm():
    p = ch.GeometryParams(m_antennas=8)
    h = ch.multipath_vector(p, [0.4], [1.0])
    assert abs(np.sum(np.abs(h) ** 2) - 8) < 1e-12


def test_generate_deterministic():
    p = ch.GeometryParams(m_antennas=8, seed=42)
    a = ch.generate(p, 64)
    b = ch.generate(p, 64)
    assert np.array_equal(a.samples, b.samples)
    for k in a.splits:
        assert np.array_equal(a.splits[k], b.splits[k])


def test_generate_normalization_monte_carlo():
    p = ch.GeometryParams(m_antennas=8, seed=7)
    ds = ch.generate(p, 10_000)
    ratio = np.mean(np.sum(np.abs(ds.samples) ** 2, axis=1)) / 8
    assert 0.99 <= ratio <= 1.01


def test_splits_disjoint_and_complete():
    ds = ch.generate(ch.GeometryParams(seed=3), 1000)
    all_idx = np.concatenate([ds.splits[k] for k in ("train", "val", "test")])
    assert len(all_idx) == len(np.unique(all_idx))
    ds.validate()


def test_environments_differ():
    a = ch.generate(ch.GeometryParams(seed=1, environment=0), 16)
    b = ch.generate(ch.GeometryParams(seed=2, environment=1), 16)
    assert not np.allclose(a.samples, b.samples)


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        ch.GeometryParams(min_paths=0)
    with pytest.raises(ValueError):
        ch.GeometryParams(min_paths=5, max_paths=3)
    with pytest.raises(ValueError):
        ch.GeometryParams(layout="upa", upa_rows=3, m_antennas=8)


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    for trial in range(50):
        p = ch.GeometryParams(m_antennas=int(rng.integers(2, 10)), seed=trial)
        ds = ch.generate(p, int(rng.integers(4, 40)))
        path = tmp_path / f"d{trial}.mmc"
        ch.save(ds, path)
        back = ch.load(path)
        # float32 on disk: the round-trip must reproduce the stored values
        stored = ds.samples.real.astype(np.float32).astype(np.float64) \
            + 1j * ds.samples.imag.astype(np.float32).astype(np.float64)
        assert np.array_equal(back.samples, stored)
        for k in ds.splits:
            assert np.array_equal(back.splits[k], ds.splits[k])
        assert back.noise_power == ds.noise_power
        # save(load(x)) is bit-exact
        path2 = tmp_path / f"d{trial}b.mmc"
        ch.save(back, path2)
        assert path.read_bytes() == path2.read_bytes()


def test_bad_magic(tmp_path):
    ds = ch.generate(ch.GeometryParams(seed=1), 8)
    path = tmp_path / "d.mmc"
    ch.save(ds, path)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(ch.BadMagicError):
        ch.load(path)


def test_version_mismatch(tmp_path):
    ds = ch.generate(ch.GeometryParams(seed=1), 8)
    path = tmp_path / "d.mmc"
    ch.save(ds, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 99
    path.write_bytes(bytes(raw))
    with pytest.raises(ch.VersionMismatchError):
        ch.load(path)


def test_truncated_payload(tmp_path):
    ds = ch.generate(ch.GeometryParams(seed=1), 8)
    path = tmp_path / "d.mmc"
    ch.save(ds, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(ch.TruncatedPayloadError):
        ch.load(path)


def test_manifest_count_mismatch(tmp_path):
    ds = ch.generate(ch.GeometryParams(seed=1), 8)
    path = tmp_path / "d.mmc"
    ch.save(ds, path)
    import json
    m = json.loads((tmp_path / "d.mmc.json").read_text())
    m["count"] = 999
    (tmp_path / "d.mmc.json").write_text(json.dumps(m))
    with pytest.raises(ch.TruncatedPayloadError):
        ch.load(path)


def test_awgn_power():
    rng = np.random.default_rng(11)
    n = ch.complex_awgn(rng, 100_000, 0.25)
    assert abs(np.mean(np.abs(n) ** 2) - 0.25) / 0.25 < 0.02
