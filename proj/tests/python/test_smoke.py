import math
from pathlib import Path

import pytest

import fcn

DATA = Path(__file__).resolve().parents[2] / "data"


def test_params_parse_and_digest():
    p = fcn.parse_params("n = 1024\nprecision_bits = 12\n")
    assert p.n == 1024
    assert p.precision_bits == 12
    assert len(p.digest()) == 32
    again = fcn.parse_params(str(p))
    assert again.digest() == p.digest()


def test_params_errors_carry_line():
    with pytest.raises(fcn.ParseError, match="2"):
        fcn.parse_params("n = 1024\nbogus = 1\n")


def test_weights_roundtrip():
    net = fcn.load_weights(str(DATA / "tiny.fcnw"))
    assert net.input_shape == (1, 4, 4)
    assert net.output_shape == (3, 1, 1)
    back = fcn.weights_from_bytes(net.to_bytes())
    assert back == net
    with pytest.raises(fcn.WeightsFormatError):
        fcn.weights_from_bytes(net.to_bytes()[:-3])


def test_swish_exponents():
    r = fcn.fit_activation("swish")
    assert r["optimal_exponents"] == [-3, -1, -4]
    assert r["rounded_exponents"] == [-3, -1, -3]
    assert r["optimal_delta"] <= r["rounded_delta"]


def test_hop_ratio():
    crypto, faster = fcn.mnist_configs()
    a = fcn.project_hops(crypto)["totals"]["total"]
    b = fcn.project_hops(faster)["totals"]["total"]
    assert 9.0 <= a / b <= 12.0


def test_encrypted_matches_plain():
    net = fcn.load_weights(str(DATA / "tiny.fcnw"))
    params = fcn.load_params(str(DATA / "tiny.params"))
    x = [math.sin(i) * 0.9 for i in range(16)]
    plain = fcn.eval_plain(net, x)
    out = fcn.Session(params, 7).infer(net, x, seed=1)
    assert len(out["scores"]) == len(plain)
    for s, p in zip(out["scores"], plain):
        assert abs(s - p) < 1e-3
    assert out["hops"]["totals"]["total"] == fcn.project_hops(net, params.precision_bits)["totals"]["total"]
    assert out["noise_budget"] > 0
