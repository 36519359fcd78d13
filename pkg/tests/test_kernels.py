import numpy as np
import pytest

from icgt import _kernels
from icgt._kernels import py_impl
from icgt.rng import substream

BACKENDS = _kernels.available_backends()


@pytest.fixture(autouse=True)
def restore_backend():
    current = _kernels.backend_name()
    yield
    _kernels.use(current)


def test_compiled_backend_present():
    # the build step should have produced the extension in this environment
    assert "py" in BACKENDS
    assert "compiled" in BACKENDS


@pytest.mark.parametrize("backend", BACKENDS)
def test_mix_matches_blas(backend):
    _kernels.use(backend)
    rng = substream(0, "kern")
    W = rng.random((7, 7))
    X = rng.standard_normal((7, 4))
    assert np.allclose(_kernels.mix(W, X), W @ X, atol=1e-13)


def test_quantize_bit_identical_across_backends():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend built")
    rng = substream(1, "kern")
    x = rng.standard_normal((5, 6)) * 3
    u = rng.random((5, 6))
    outs = []
    for backend in BACKENDS:
        _kernels.use(backend)
        outs.append(_kernels.prob_quantize(x, 4, u))
    assert np.array_equal(outs[0], outs[1])


@pytest.mark.parametrize("backend", BACKENDS)
def test_quantize_semantics(backend):
    _kernels.use(backend)
    # on-grid values pass through for any uniform draw
    x = np.array([-1.5, 0.0, 0.25, 3.75])
    for u in (np.zeros(4), np.full(4, 0.999)):
        assert np.array_equal(_kernels.prob_quantize(x, 4, u), x)
    # threshold: u below the fractional part rounds up, at/above rounds down
    x = np.array([0.3])
    assert _kernels.prob_quantize(x, 2, np.array([0.599]))[0] == 0.5
    assert _kernels.prob_quantize(x, 2, np.array([0.601]))[0] == 0.0
    # negative inputs round to the enclosing grid cell
    x = np.array([-0.3])
    out = {_kernels.prob_quantize(x, 2, np.array([u]))[0] for u in (0.01, 0.99)}
    assert out == {-0.5, 0.0}


@pytest.mark.parametrize("backend", BACKENDS)
def test_quantize_outputs_on_grid(backend):
    _kernels.use(backend)
    rng = substream(2, "kern")
    x = rng.standard_normal(1000) * 10
    out = _kernels.prob_quantize(x, 3, rng.random(1000))
    assert np.allclose(out * 3, np.round(out * 3), atol=1e-9)


def test_shape_validation():
    with pytest.raises(ValueError):
        _kernels.prob_quantize(np.zeros(3), 2, np.zeros(4))


def test_use_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.use("fortran")


def test_py_impl_direct():
    W = np.eye(3)
    X = np.arange(6, dtype=float).reshape(3, 2)
    assert np.array_equal(py_impl.mix(W, X), X)
