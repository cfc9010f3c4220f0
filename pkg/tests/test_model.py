import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from embedchan import (
    DimensionError,
    HermiticityError,
    LatticeSpec,
    ModelValidationError,
    build_lead_blocks,
    parse_model,
    parse_model_dict,
    serialize_model,
)

from helpers import impurity_chain_model


def test_chain_preset_blocks():
    spec = LatticeSpec(kind="chain", params={"t": 1.0, "eps": 0.0})
    blocks = build_lead_blocks(spec)
    assert np.array_equal(blocks.h00, np.array([[0.0]]))
    assert np.array_equal(blocks.h01, np.array([[-1.0]]))


def test_ladder_preset_blocks():
    spec = LatticeSpec(kind="ladder", params={"t": 1.0, "t_perp": 0.5})
    blocks = build_lead_blocks(spec)
    assert np.array_equal(blocks.h00, np.array([[0.0, -0.5], [-0.5, 0.0]]))
    assert np.array_equal(blocks.h01, np.array([[-1.0, 0.0], [0.0, -1.0]]))


def test_dimer_preset_blocks():
    spec = LatticeSpec(kind="dimer_chain", params={"t1": 1.5, "t2": 0.5})
    blocks = build_lead_blocks(spec)
    assert np.array_equal(blocks.h00, np.array([[0.0, -1.5], [-1.5, 0.0]]))
    assert np.array_equal(blocks.h01, np.array([[0.0, 0.0], [-0.5, 0.0]]))


def test_explicit_hermiticity_violation_names_entry():
    with pytest.raises(HermiticityError, match=r"\(0, 1\)"):
        LatticeSpec(kind="explicit",
                    h00=np.array([[0.0, 1j], [1j, 0.0]]),
                    h01=np.eye(2))


def test_square_strip_momentum_reduction():
    spec = LatticeSpec(kind="square_strip", params={"t": 1.0, "width": 2, "periodic": True})
    b0 = build_lead_blocks(spec, k=0.0)
    assert b0.n == 1
    # transverse Bloch diagonalization by hand: on-site eps - 2 t cos(K)
    assert b0.h00[0, 0] == pytest.approx(-2.0, abs=1e-15)
    bpi = build_lead_blocks(spec, k=math.pi)
    assert bpi.h00[0, 0] == pytest.approx(2.0, abs=1e-15)
    assert np.array_equal(b0.h01, np.array([[-1.0]]))


def test_chain_ignores_missing_momentum():
    spec = LatticeSpec(kind="chain", params={})
    blocks = build_lead_blocks(spec)  # no k needed
    assert blocks.k is None
    with pytest.raises(ModelValidationError, match="non-periodic"):
        build_lead_blocks(spec, k=0.3)


def test_periodic_strip_requires_momentum():
    spec = LatticeSpec(kind="square_strip", params={"width": 2, "periodic": True})
    with pytest.raises(ModelValidationError, match="momentum"):
        build_lead_blocks(spec)


@given(st.floats(min_value=-20.0, max_value=20.0, allow_nan=False))
@settings(max_examples=60, deadline=None)
def test_momentum_folding_period(k):
    spec = LatticeSpec(kind="square_strip", params={"width": 3, "periodic": True})
    b1 = build_lead_blocks(spec, k=k)
    b2 = build_lead_blocks(spec, k=k + 2 * math.pi)
    # folding is exact up to the rounding of the k + 2 pi float addition
    assert np.abs(b1.h00 - b2.h00).max() <= 1e-14
    assert -math.pi <= b1.k < math.pi


def test_momentum_conjugation_symmetry():
    spec = LatticeSpec(kind="square_strip", params={"width": 4, "periodic": True})
    for k in (0.3, 1.1, 2.9):
        bp = build_lead_blocks(spec, k=k)
        bm = build_lead_blocks(spec, k=-k)
        assert np.abs(bm.h00 - bp.h00.conj()).max() <= 1e-14


def test_parse_example_document():
    text = json.dumps({
        "lead_left": {"preset": "chain", "params": {"t": 1.0, "eps": 0.0}},
        "lead_right": {"h00": [[0.0]], "h01": [[[-1.0, 0.0]]]},
        "device": {"h": [[1.0]], "coupling_left": [[1.0]], "coupling_right": [[1.0]]},
    })
    model = parse_model(text)
    assert model.lead_l.kind == "chain"
    assert model.lead_r.kind == "explicit"
    assert np.array_equal(model.lead_r.h01, np.array([[-1.0]]))
    assert model.device.s_l == (0,)
    assert model.device.s_r == (0,)  # single shared site is the allowed degenerate case


def test_parse_error_reports_location():
    with pytest.raises(ModelValidationError, match="line"):
        parse_model("{ not json }")


def test_parse_error_reports_field_path():
    with pytest.raises(ModelValidationError, match="device.coupling_left"):
        parse_model_dict({
            "lead_left": {"preset": "chain"},
            "lead_right": {"preset": "chain"},
            "device": {"h": [[0.0]], "coupling_left": [["x"]], "coupling_right": [[1.0]]},
        })


def test_unknown_preset_rejected():
    with pytest.raises(ModelValidationError, match="unknown lattice kind"):
        LatticeSpec(kind="hexagon", params={})


def test_width_positivity_rule():
    with pytest.raises(ModelValidationError, match="width"):
        LatticeSpec(kind="square_strip", params={"width": 0})


def test_unknown_parameter_rejected():
    with pytest.raises(ModelValidationError, match="unknown parameter"):
        LatticeSpec(kind="chain", params={"tt": 1.0})


def test_dimension_mismatch_names_blocks():
    with pytest.raises(DimensionError, match="h01"):
        LatticeSpec(kind="explicit", h00=np.zeros((2, 2)), h01=np.zeros((3, 3)))


def test_coupling_lead_dimension_checked():
    with pytest.raises(DimensionError, match="coupling_left"):
        parse_model_dict({
            "lead_left": {"preset": "ladder"},
            "lead_right": {"preset": "chain"},
            "device": {"h": [[0.0]], "coupling_left": [[1.0]], "coupling_right": [[1.0]]},
        })


def test_overlapping_surfaces_rejected():
    with pytest.raises(ModelValidationError, match="overlap"):
        parse_model_dict({
            "lead_left": {"preset": "chain"},
            "lead_right": {"preset": "chain"},
            "device": {"h": [[0.0, 0.0], [0.0, 0.0]],
                       "coupling_left": [[1.0, 0.0]],
                       "coupling_right": [[1.0, 0.0]]},
        })


_params = st.fixed_dictionaries({
    "t": st.floats(min_value=0.2, max_value=3.0),
    "eps": st.floats(min_value=-2.0, max_value=2.0),
})


@given(_params)
@settings(max_examples=50, deadline=None)
def test_preset_blocks_hermitian(params):
    for kind in ("chain", "ladder"):
        blocks = build_lead_blocks(LatticeSpec(kind=kind, params=params))
        assert np.abs(blocks.h00 - blocks.h00.conj().T).max() <= 1e-12


def test_serialize_roundtrip_identical_blocks():
    rng = np.random.default_rng(11)
    for _ in range(20):
        h = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = (h + h.conj().T) / 2
        h01 = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        model = parse_model_dict({
            "lead_left": {"h00": [[[v.real, v.imag] for v in row] for row in h],
                          "h01": [[[v.real, v.imag] for v in row] for row in h01]},
            "lead_right": {"preset": "dimer_chain",
                           "params": {"t1": float(rng.uniform(0.3, 2)),
                                      "t2": float(rng.uniform(0.3, 2))}},
            "device": {"h": [[0.0, 0.0], [0.0, float(rng.normal())]],
                       "coupling_left": [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
                       "coupling_right": [[0.0, 0.0], [0.0, 1.0]]},
        })
        again = parse_model(serialize_model(model))
        b1 = build_lead_blocks(model.lead_l)
        b2 = build_lead_blocks(again.lead_l)
        assert np.array_equal(b1.h00, b2.h00) and np.array_equal(b1.h01, b2.h01)
        c1 = build_lead_blocks(model.lead_r)
        c2 = build_lead_blocks(again.lead_r)
        assert np.array_equal(c1.h00, c2.h00) and np.array_equal(c1.h01, c2.h01)
        assert np.array_equal(model.device.h_c, again.device.h_c)
        assert serialize_model(model) == serialize_model(again)


def test_blocks_are_readonly():
    model = impurity_chain_model()
    blocks = build_lead_blocks(model.lead_l)
    with pytest.raises(ValueError):
        blocks.h00[0, 0] = 5.0
