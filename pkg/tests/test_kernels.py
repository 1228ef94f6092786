import numpy as np
import pytest
from hypothesis import given, strategies as st

from matterwave import kernels

needs_c = pytest.mark.skipif("cython" not in kernels.available_backends(), reason="compiled core not built")


def _slit_case(rng, scale_mult):
    n, period, width = 12, 2e-6, 6e-7
    first = -(n - 1) / 2 * period - width / 2
    x_det = np.linspace(-4e-6, 4e-6, 37)
    x_src = rng.uniform(-n / 2 * period, n / 2 * period, 25)
    # scale * width sets the Fresnel argument range: small -> series branch, large -> asymptotic branch
    scale = np.full(x_src.size, scale_mult / width)
    w = rng.uniform(0.5, 1.5, x_src.size)
    c = rng.uniform(0.5, 1.5, n)
    return x_det, x_src, scale, w, first, period, width, c, 0.3


def run(backend, fn, *args, threads=None):
    with kernels.using(backend, threads):
        return getattr(kernels, fn)(*args)


@needs_c
# at large arguments the chirp phase pi t^2 / 2 ~ 1e6 rad carries ~1e-10 rad of rounding
# in either backend, so agreement is limited by conditioning, not by the kernel
@pytest.mark.parametrize("mult,tol", [(0.3, 1e-12), (3.0, 1e-12), (30.0, 1e-9), (300.0, 1e-8)])
def test_slit_kernel_backends_agree(mult, tol):
    args = _slit_case(np.random.default_rng(1), mult)
    a = run("python", "slit_source_intensity", *args)
    b = run("cython", "slit_source_intensity", *args)
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < tol


@needs_c
def test_fresnel_sum_backends_agree():
    rng = np.random.default_rng(2)
    xo, xi = np.linspace(-1, 1, 50), np.linspace(-0.5, 0.5, 300)
    f = rng.normal(size=300) + 1j * rng.normal(size=300)
    a = run("python", "fresnel_sum", xo, xi, f, 40.0)
    b = run("cython", "fresnel_sum", xo, xi, f, 40.0)
    assert np.max(np.abs(a - b)) / np.max(np.abs(a)) < 1e-12


@given(st.floats(-1, 1), st.floats(1.0, 100.0))
def test_fresnel_sum_matches_definition(x, k):
    xi = np.linspace(-0.5, 0.5, 7)
    f = np.arange(7) + 1j
    ref = np.sum(f * np.exp(1j * k * (x - xi) ** 2))
    out = kernels.fresnel_sum(np.array([x]), xi, f, k)[0]
    assert out == pytest.approx(ref, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("backend", kernels.available_backends())
def test_thread_count_does_not_change_bits(backend):
    args = _slit_case(np.random.default_rng(3), 30.0)
    a = run(backend, "slit_source_intensity", *args, threads=1)
    b = run(backend, "slit_source_intensity", *args, threads=3)
    assert a.tobytes() == b.tobytes()
    xo, xi = np.linspace(-1, 1, 64), np.linspace(-0.5, 0.5, 200)
    f = np.exp(1j * xi)
    assert run(backend, "fresnel_sum", xo, xi, f, 9.0, threads=1).tobytes() == \
        run(backend, "fresnel_sum", xo, xi, f, 9.0, threads=4).tobytes()


def test_backend_switching():
    assert kernels.backend() in kernels.available_backends()
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")
    before = kernels.backend()
    with kernels.using("python", 2):
        assert kernels.backend() == "python" and kernels.threads() == 2
    assert kernels.backend() == before


@needs_c
def test_slit_kernel_threads_large_case():
    # big enough that threads overlap inside the slit loop; catches shared scratch variables
    rng = np.random.default_rng(0)
    xd = np.linspace(-1e-5, 1e-5, 301)
    xs = rng.uniform(-1e-5, 1e-5, 500)
    sc = rng.uniform(1e5, 1e7, 500)
    w = np.full(500, 1 / 500)
    args = (xd, xs, sc, w, -2e-5, 1e-6, 3e-7, np.ones(40), 0.3)
    ref = run("cython", "slit_source_intensity", *args, threads=1)
    for t in (2, 3, 4):
        assert run("cython", "slit_source_intensity", *args, threads=t).tobytes() == ref.tobytes()
