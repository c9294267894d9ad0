"""
Slow reference computations for the test suite.

Nothing here shares a numerical kernel with the solver: integrals use
adaptive quadrature, sums are explicit loops and eigenvalues come from
Jacobi rotations.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate


@dataclass(frozen=True)
class OracleResult:
    value: Union[float, Tuple, np.ndarray]
    error: float
    method: str


def _radial_integral(exponent: float, profile: Callable[[float], float], r_max: float) -> Tuple[float, float]:
    def integrand(r):
        return 4.0 * np.pi * r ** (exponent + 2.0) * profile(r)

    value, error = integrate.quad(integrand, 0.0, r_max, limit=400, epsabs=1e-13, epsrel=1e-12)
    # the same integral on two halves
    mid = 0.5 * r_max
    left, _ = integrate.quad(integrand, 0.0, mid, limit=400, epsabs=1e-13, epsrel=1e-12)
    right, _ = integrate.quad(integrand, mid, r_max, limit=400, epsabs=1e-13, epsrel=1e-12)
    return value, max(error, abs(left + right - value))


def radial_kernel_integral(gamma: float, weight_exponent: float, radial_profile: Callable[[float], float],
                           r_max: float = np.inf) -> OracleResult:
    """int_{R^3} |w|^(gamma + weight_exponent) g(|w|) dw after the angular integration."""
    exponent = gamma + weight_exponent
    if exponent <= -3.0:
        raise ValueError(f"|w|^{exponent} is not locally integrable in three dimensions")
    if np.isinf(r_max):
        value, error = integrate.quad(lambda r: 4.0 * np.pi * r ** (exponent + 2.0) * radial_profile(r), 0.0,
                                      np.inf, limit=400, epsabs=1e-13, epsrel=1e-12)
        return OracleResult(value, error, "quad")
    value, error = _radial_integral(exponent, radial_profile, r_max)
    return OracleResult(value, error, "quad+halving")


def radial_coefficients(gamma: float, radial_profile: Callable[[float], float], speed: float,
                        r_max: float) -> OracleResult:
    """Eigenvalues of abar and the convolution behind cbar for a radial density, at |v| = speed.

    With u = s (mu v^ + sqrt(1 - mu^2) e(phi)) and w = v - u the azimuth
    integrates out:
        lambda_par = 2 pi int s^2 g(s) int_{-1}^{1} (|w|^(gamma+2) - (|v| - s mu)^2 |w|^gamma) dmu ds,
        trace      = 2 pi int s^2 g(s) int 2 |w|^(gamma+2) dmu ds,
        conv_c     = 2 pi int s^2 g(s) int |w|^gamma dmu ds,
    with |w|^2 = |v|^2 + s^2 - 2 |v| s mu. Returns (lambda_par, lambda_perp, conv_c).
    """
    if speed <= 0.0:
        raise ValueError("radial_coefficients needs a positive speed")

    def w2(s, mu):
        return max(speed ** 2 + s ** 2 - 2.0 * speed * s * mu, 0.0)

    def inner(kernel, s):
        value, _ = integrate.quad(lambda mu: kernel(s, mu), -1.0, 1.0, limit=200, epsabs=1e-14, epsrel=1e-12)
        return value

    def parallel(s, mu):
        r2 = w2(s, mu)
        if r2 == 0.0:
            return 0.0
        return r2 ** ((gamma + 2.0) / 2.0) - (speed - s * mu) ** 2 * r2 ** (gamma / 2.0)

    def trace(s, mu):
        r2 = w2(s, mu)
        return 2.0 * r2 ** ((gamma + 2.0) / 2.0) if r2 > 0.0 else 0.0

    def scalar(s, mu):
        r2 = w2(s, mu)
        return r2 ** (gamma / 2.0) if r2 > 0.0 else 0.0

    results = []
    errors = []
    points = [speed] if speed < r_max else None
    for kernel in (parallel, trace, scalar):
        if kernel is scalar and gamma <= -3.0:
            results.append(float("nan"))
            errors.append(0.0)
            continue
        value, error = integrate.quad(lambda s: 2.0 * np.pi * s ** 2 * radial_profile(s) * inner(kernel, s),
                                      0.0, r_max, points=points, limit=400, epsabs=1e-12, epsrel=1e-10)
        results.append(value)
        errors.append(error)
    lam_par, tr, conv_c = results
    return OracleResult((lam_par, 0.5 * (tr - lam_par), conv_c), max(errors), "nested quad")


def _sphere_integral(g: Callable[[float], float]) -> Tuple[float, float]:
    """int over the unit sphere of g(rho(omega)), rho the distance from the origin to the face of
    [-1, 1]^3 along omega. Eight octants by symmetry."""

    def integrand(theta, phi):
        omega = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta))
        rho = 1.0 / max(abs(c) for c in omega)
        return g(rho) * np.sin(theta)

    value, error = integrate.dblquad(integrand, 0.0, np.pi / 2.0, 0.0, np.pi / 2.0, epsabs=1e-13, epsrel=1e-11)
    return 8.0 * value, 8.0 * error


def cube_cell_integral(p: float, h: float) -> OracleResult:
    """int over [-h/2, h/2]^3 of |w|^p, radial part exact."""
    if p <= -3.0:
        raise ValueError(f"|w|^{p} is not locally integrable in three dimensions")
    half = 0.5 * h
    value, error = _sphere_integral(lambda rho: (half * rho) ** (p + 3.0) / (p + 3.0))
    return OracleResult(value, error, "spherical dblquad")


def direct_convolution(values_v: np.ndarray, grid, v_point: Sequence[float], gamma: float,
                       a_origin: float, c_origin: float) -> OracleResult:
    """abar (3x3) and the |w|^gamma convolution at one velocity node, one node at a time.

    `values_v` is one velocity slice; a_origin and c_origin are the weights of
    the node coinciding with v_point.
    """
    axis = grid.velocity_axis()
    cell = grid.h_v ** 3
    v = np.asarray(v_point, dtype=np.float64)
    abar = np.zeros((3, 3))
    conv_c = 0.0
    n = grid.n_v
    for i in range(n):
        for j in range(n):
            for k in range(n):
                value = values_v[i, j, k]
                if value == 0.0:
                    continue
                w = v - np.array([axis[i], axis[j], axis[k]])
                r = float(np.sqrt(w @ w))
                if r < 1e-9 * grid.h_v:
                    abar += a_origin * value * cell * np.eye(3)
                    conv_c += c_origin * value * cell
                    continue
                abar += value * cell * (r ** (gamma + 2.0) * np.eye(3) - np.outer(w, w) * r ** gamma)
                conv_c += value * cell * r ** gamma
    return OracleResult((abar, conv_c), 0.0, "direct sum")


def jacobi_eigenvalues(M: np.ndarray, sweeps: int = 50, tolerance: float = 1e-15) -> OracleResult:
    """Ascending eigenvalues of a symmetric 3x3 matrix by cyclic Jacobi rotations."""
    A = np.array(M, dtype=np.float64)
    scale = max(float(np.abs(A).max()), 1e-300)
    for _ in range(sweeps):
        off = np.sqrt(A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2)
        if off <= tolerance * scale:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            if A[p, q] == 0.0:
                continue
            theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
            t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1.0)) if theta != 0.0 else 1.0
            c = 1.0 / np.sqrt(t ** 2 + 1.0)
            s = t * c
            J = np.eye(3)
            J[p, p] = c
            J[q, q] = c
            J[p, q] = s
            J[q, p] = -s
            A = J.T @ A @ J
    off = float(np.sqrt(A[0, 1] ** 2 + A[0, 2] ** 2 + A[1, 2] ** 2))
    return OracleResult(np.sort(np.diag(A)), off, "jacobi")


def lattice_sum_direct(s: float, N: int) -> OracleResult:
    """sum over nonzero m in [-N, N]^3 of |m|^-s, plus the integral of |m|^-s outside the
    cube [-N - 1/2, N + 1/2]^3 as the tail (s > 3)."""
    if s <= 3.0:
        raise ValueError(f"the direct lattice sum diverges for s = {s} <= 3")
    total = 0.0
    for i in range(-N, N + 1):
        for j in range(-N, N + 1):
            for k in range(-N, N + 1):
                if i == 0 and j == 0 and k == 0:
                    continue
                total += (i * i + j * j + k * k) ** (-s / 2.0)
    a = N + 0.5
    tail, tail_error = _sphere_integral(lambda rho: (a * rho) ** (3.0 - s) / (s - 3.0))
    # the midpoint rule error of the tail is of relative order N^-2
    return OracleResult(total + tail, tail_error + abs(tail) / (24.0 * a ** 2), "direct sum+tail")


def gaussian_moments(density: float = 1.0, temperature: float = 1.0) -> OracleResult:
    """(M, E, H) of density (2 pi T)^(-3/2) exp(-|v|^2 / 2T) by radial quadrature."""
    norm = density * (2.0 * np.pi * temperature) ** -1.5

    def f(r):
        return norm * np.exp(-r * r / (2.0 * temperature))

    def log_f(r):
        return np.log(norm) - r * r / (2.0 * temperature)

    out = []
    errors = []
    for integrand in (lambda r: f(r), lambda r: r * r * f(r), lambda r: f(r) * log_f(r)):
        value, error = integrate.quad(lambda r: 4.0 * np.pi * r * r * integrand(r), 0.0, np.inf,
                                      epsabs=1e-14, epsrel=1e-12)
        out.append(value)
        errors.append(error)
    return OracleResult(tuple(out), max(errors), "quad")


@dataclass(frozen=True)
class ItoMoments:
    mean_V: np.ndarray
    cov_V: np.ndarray
    mean_X: np.ndarray
    var_X: float
    cov_XV: float


def ito_moments(t: float, x: Sequence[float] = (0.0, 0.0, 0.0), v: Sequence[float] = (0.0, 0.0, 0.0),
                ds: Optional[float] = None, noise_variance: float = 1.0) -> ItoMoments:
    """Moments of V_t = v + s W_t, X_t = x - int_0^t V, per axis, with s^2 = noise_variance.

    Ito isometry: X_t - E X_t = -s int_0^t (t - r) dW_r, so Var X = s^2 t^3/3 and
    Cov(X, V) = -s^2 int_0^t (t - r) dr = -s^2 t^2/2. With the trapezoidal
    position update at step ds the variance becomes s^2 (t^3/3 - t ds^2/12)
    while the covariance stays exact.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    var_X = t ** 3 / 3.0
    if ds is not None:
        var_X -= t * ds ** 2 / 12.0
    return ItoMoments(v.copy(), noise_variance * t * np.eye(3), x - v * t, noise_variance * var_X,
                      -noise_variance * t ** 2 / 2.0)
