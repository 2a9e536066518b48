"""Small dense linear algebra and polynomial toolkit.

Matrices are 2-D float ``numpy`` arrays and polynomials are 1-D coefficient
arrays in descending degree. numpy is only used for storage and elementwise
arithmetic; elimination, characteristic polynomials and root finding are done
here so every step is inspectable at desk scale (n <= 8).
"""

import numpy as np

from .errors import NoConvergence, SingularMatrix

PIVOT_TOL = 1e-12
SNAP_IMAG = 1e-8
DK_MAX_ITER = 500
DK_SEED = 0.4 + 0.9j


def as_matrix(m):
    """Return ``m`` as a finite, non-empty 2-D float array."""
    a = np.array(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def _square(m):
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def norm_inf(m):
    """Maximum absolute row sum."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    return float(np.max(np.sum(np.abs(a), axis=1)))


def invert(m):
    """Inverse by Gauss-Jordan elimination with partial pivoting.

    Raises
    ------
    SingularMatrix
        If a pivot smaller than 1e-12 in magnitude remains after pivoting.
    """
    a = _square(m)
    n = a.shape[0]
    aug = np.hstack([a, np.eye(n)])
    for col in range(n):
        p = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[p, col]) < PIVOT_TOL:
            raise SingularMatrix(f"pivot {aug[p, col]:.3e} in column {col}")
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        aug[col] /= aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0.0:
                aug[r] -= aug[r, col] * aug[col]
    return aug[:, n:].copy()


def rank(m, tol=None):
    """Numerical rank from row echelon reduction with partial pivoting.

    The default tolerance is ``1e-9 * ||m||_inf * max(rows, cols)``.
    """
    a = as_matrix(m).copy()
    rows, cols = a.shape
    if tol is None:
        tol = 1e-9 * norm_inf(a) * max(rows, cols)
    if tol <= 0:
        # zero matrix under the default tolerance
        return 0
    r = 0
    for col in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(a[r:, col])))
        if abs(a[p, col]) < tol:
            continue
        a[[r, p]] = a[[p, r]]
        a[r + 1:] -= np.outer(a[r + 1:, col] / a[r, col], a[r])
        r += 1
    return r


def char_poly(m):
    """Monic coefficients of det(sI - m) via the Faddeev-LeVerrier recursion."""
    a = _square(m)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    mk = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        mk = a @ mk + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ mk) / k
    return coeffs


def poly_eval(coeffs, s):
    """Horner evaluation; ``s`` may be complex or an array."""
    acc = np.zeros_like(np.asarray(s), dtype=complex) if np.ndim(s) else 0j
    for c in coeffs:
        acc = acc * s + c
    return acc


def poly_from_roots(roots):
    """Coefficients of prod(s - r), complex-valued in general."""
    coeffs = np.array([1.0 + 0j])
    for r in roots:
        coeffs = np.append(coeffs, 0j) - r * np.insert(coeffs, 0, 0j)
    return coeffs


def poly_roots(coeffs, max_iter=DK_MAX_ITER):
    """All complex roots by Durand-Kerner (Weierstrass) iteration.

    The polynomial is made monic and rescaled by a power of two close to its
    Fujiwara root bound, so the starting points ``(0.4 + 0.9j) ** k`` sit on
    the same scale as the roots. Iteration continues past the residual test
    until the corrections stall, which squeezes clustered roots.

    Returns
    -------
    list of complex
        Sorted by (real, imag); imaginary parts below 1e-8 are snapped to 0.

    Raises
    ------
    NoConvergence
        If some root has ``|p(r)| >= 1e-8 * max|coeffs|`` (and a relative
        backward error above 1e-10) after ``max_iter`` sweeps.
    """
    p = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if p.size < 2:
        raise ValueError("polynomial must have degree >= 1")
    scale_c = float(np.max(np.abs(p)))
    n = p.size - 1
    monic = p / p[0]

    # Fujiwara bound, rounded to a power of two so the rescaling is exact
    ratios = [abs(monic[k]) ** (1.0 / k) for k in range(1, n + 1)]
    ratios[-1] = abs(monic[-1]) ** (1.0 / n) * 0.5 ** (1.0 / n)
    bound = 2.0 * max(ratios)
    e = int(np.round(np.log2(bound))) if bound > 0 else 0
    rho = np.ldexp(1.0, e)
    # monic[k] / rho**k, without forming rho**k (it under/overflows for
    # coefficients near the ends of the double range)
    scaled = np.ldexp(monic, -e * np.arange(n + 1))

    z = DK_SEED ** np.arange(n, dtype=complex)
    tol = 1e-8 * scale_c

    def residual_ok(zz):
        r = zz * rho
        res = np.abs(poly_eval(p, r))
        # relative backward error, for roots whose size makes the absolute
        # test unreachable in double precision
        backward = poly_eval(np.abs(p), np.abs(r)).real
        return np.all((res < tol) | (res <= 1e-10 * backward))

    for _ in range(max_iter):
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        w = poly_eval(scaled, z) / np.prod(diff, axis=1)
        z = z - w
        if np.max(np.abs(w)) <= 1e-15 * max(1.0, float(np.max(np.abs(z)))):
            break
        if not np.all(np.isfinite(z)):
            break
    roots = z * rho
    if not np.all(np.isfinite(roots)) or not residual_ok(z):
        raise NoConvergence(f"Durand-Kerner did not converge for degree {n}")

    out = []
    for r in roots:
        r = complex(r)
        if abs(r.imag) < SNAP_IMAG:
            r = complex(r.real, 0.0)
        out.append(r)
    out.sort(key=lambda c: (c.real, c.imag))
    return out


def eigenvalues(m):
    """Eigenvalues as the roots of the characteristic polynomial."""
    return poly_roots(char_poly(m))


def solve_dense(a, b):
    """Solve ``a @ x = b`` by LU factorisation with partial pivoting."""
    lu = _square(a).copy()
    rhs = np.array(b, dtype=float)
    vector = rhs.ndim == 1
    rhs = rhs.reshape(lu.shape[0], -1) if vector else as_matrix(rhs).copy()
    n = lu.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"row mismatch: a is {lu.shape}, b is {rhs.shape}")

    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_TOL:
            raise SingularMatrix(f"pivot {lu[p, k]:.3e} in column {k}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])

    y = rhs[perm]
    for i in range(1, n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y.ravel() if vector else y
