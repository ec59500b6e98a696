import dataclasses

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from feynman_dirichlet import ConfigError, Disc, ExperimentConfig, Interval
from feynman_dirichlet.config import Discretization, Plan

BASE = {
    "domain": {"kind": "interval", "lo": 0.0, "hi": float(np.pi)},
    "operator": {"a": 1.0, "b": 0.0, "c": 0.0},
    "initial": {"kind": "sine", "coefficients": [1.0]},
}


def with_(**kw):
    raw = dict(BASE)
    raw.update(kw)
    return raw


def test_defaults():
    cfg = ExperimentConfig.from_dict(BASE)
    assert cfg.cutoff_betas == (0.5,)
    assert cfg.plan == Plan()
    assert cfg.discretization.h_max == 0.02
    assert isinstance(cfg.build_domain(), Interval)


def test_round_trip_through_yaml(tmp_path):
    cfg = ExperimentConfig.from_dict(
        with_(cutoff_betas=[0.5, 0.25], plan={"n_list": [1, 2]}, mc={"x": [1.0], "paths": 20000})
    )
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    path = tmp_path / "c.yaml"
    path.write_text(cfg.dump())
    assert ExperimentConfig.load(path) == cfg
    assert ExperimentConfig.load(path).digest() == cfg.digest()


@given(
    st.lists(st.sampled_from([0.5, 0.25, 0.1]), min_size=1, max_size=3),
    st.lists(st.integers(1, 128), min_size=1, max_size=5),
    st.floats(1e-3, 1.0),
)
def test_round_trip_property(betas, n_list, T):
    cfg = ExperimentConfig.from_dict(with_(cutoff_betas=betas, plan={"T": T, "n_list": n_list}))
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_digest_tracks_content():
    a = ExperimentConfig.from_dict(BASE)
    b = ExperimentConfig.from_dict(with_(plan={"T": 0.2}))
    assert a.digest() != b.digest()
    assert a.digest() == ExperimentConfig.from_dict(BASE).digest()


@pytest.mark.parametrize(
    "raw, path",
    [
        ({k: v for k, v in BASE.items() if k != "domain"}, "domain"),
        (with_(bogus=1), "bogus"),
        (with_(plan={"nn": 3}), "plan.nn"),
        (with_(plan={"T": "soon"}), "plan.T"),
        (with_(plan={"T": -1.0}), "plan.T"),
        (with_(plan={"n_list": [0]}), "plan.n_list"),
        (with_(plan={"n_list": 3}), "plan.n_list"),
        (with_(discretization={"n_charts": 2.5}), "discretization.n_charts"),
        (with_(discretization={"quadrature": "simpson"}), "discretization.quadrature"),
        (with_(cutoff_betas=[0.75]), "cutoff_betas"),
        (with_(oracle="guess"), "oracle"),
        (with_(domain={"kind": "square"}), "domain.kind"),
        (with_(domain={"kind": "disc", "center": [0, 0]}), "domain.radius"),
        (with_(mc={"paths": True}), "mc.paths"),
        (with_(name=None), "name"),
    ],
)
def test_errors_name_the_key(raw, path):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(raw)
    assert info.value.path == path


def test_non_mapping_top_level(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict([1, 2])
    bad = tmp_path / "bad.yaml"
    bad.write_text("domain: [unclosed")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(bad)
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.yaml")


def test_frozen():
    cfg = ExperimentConfig.from_dict(BASE)
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.oracle = "none"
    with pytest.raises(dataclasses.FrozenInstanceError):
        Discretization().h_max = 1.0


def test_builders():
    raw = with_(
        domain={"kind": "disc", "center": [0.0, 0.0], "radius": 1.0},
        operator={"a": [[1.0, 0.0], [0.0, 2.0]], "b": [0.0, 1.0], "c": -1.0},
        initial={"kind": "harness", "seed": 4},
    )
    cfg = ExperimentConfig.from_dict(raw)
    dom = cfg.build_domain()
    assert isinstance(dom, Disc)
    op = cfg.build_operator(dom)
    A, b, c = op.coefficients([[0.1, 0.2]])
    assert A[0].tolist() == [[1.0, 0.0], [0.0, 2.0]] and b[0].tolist() == [0.0, 1.0] and c[0] == -1.0
    u = cfg.build_initial(op, dom)
    assert np.abs(u.value(dom.boundary_samples(32))).max() < 1e-10
    assert np.array_equal(cfg.mc_point(dom), [0.0, 0.0])


def test_sine_needs_interval():
    cfg = ExperimentConfig.from_dict(with_(domain={"kind": "disc", "center": [0.0, 0.0], "radius": 1.0},
                                           operator={"a": [[1.0, 0.0], [0.0, 1.0]]}))
    with pytest.raises(ConfigError):
        cfg.build_initial(cfg.build_operator(), cfg.build_domain())


def test_yaml_dump_is_plain():
    text = ExperimentConfig.from_dict(BASE).dump()
    assert yaml.safe_load(text)["plan"]["n_list"] == [8, 16, 32, 64]
