"""Polynomials in the gain symbol psi, linear state forms and polynomial matrices.

Everything here is a small immutable value type. Coefficients are Python
floats; integer-valued inputs stay exactly integer-valued through the
arithmetic as long as the magnitudes remain below 2**53.
"""
from __future__ import annotations

from dataclasses import dataclass
from numbers import Real
from typing import Iterable, Sequence

import numpy as np


def _trim(coeffs: Iterable[float]) -> tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    return tuple(c)


def horner(coeffs, psi):
    """Evaluate ascending ``coeffs`` at ``psi`` (scalar or array)."""
    out = np.zeros_like(np.asarray(psi, dtype=float)) if np.ndim(psi) else 0.0
    for c in reversed(coeffs):
        out = out * psi + c
    return out


@dataclass(frozen=True, init=False)
class PsiPoly:
    """Univariate polynomial in psi; ``coeffs[k]`` multiplies ``psi**k``."""

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Iterable[float] = ()):
        object.__setattr__(self, "coeffs", _trim(coeffs))

    @classmethod
    def const(cls, c: float) -> "PsiPoly":
        return cls((c,))

    @classmethod
    def monomial(cls, k: int, c: float = 1.0) -> "PsiPoly":
        return cls([0.0] * k + [c])

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_integral(self) -> bool:
        return all(float(c).is_integer() for c in self.coeffs)

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def __bool__(self):
        return bool(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k: int) -> float:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0.0

    @staticmethod
    def _coerce(other) -> "PsiPoly":
        if isinstance(other, PsiPoly):
            return other
        if isinstance(other, Real):
            return PsiPoly((float(other),))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = max(len(self), len(other))
        return PsiPoly(self[k] + other[k] for k in range(n))

    __radd__ = __add__

    def __neg__(self):
        return PsiPoly(-c for c in self.coeffs)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Real):
            return PsiPoly(float(other) * c for c in self.coeffs)
        if not isinstance(other, PsiPoly):
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return ZERO
        out = [0.0] * (len(self) + len(other) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0.0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return PsiPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = ONE
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, psi):
        return horner(self.coeffs, psi)

    def deriv(self) -> "PsiPoly":
        return PsiPoly(k * c for k, c in enumerate(self.coeffs) if k)

    def shift(self, k: int) -> "PsiPoly":
        """Multiply by ``psi**k``."""
        if self.is_zero():
            return ZERO
        return PsiPoly([0.0] * k + list(self.coeffs))

    def close_to(self, other: "PsiPoly", tol: float = 0.0) -> bool:
        return (self - other).max_abs() <= tol

    def __str__(self):
        return format_poly(self)

    def __repr__(self):
        return f"PsiPoly({list(self.coeffs)!r})"


ZERO = PsiPoly()
ONE = PsiPoly((1.0,))
PSI = PsiPoly((0.0, 1.0))


def _fmt_num(c: float) -> str:
    if float(c).is_integer() and abs(c) < 1e15:
        return str(int(c))
    return f"{c:.12g}"


def format_poly(p: PsiPoly, var: str = "psi") -> str:
    """Descending-power text such as ``psi^6 + psi^3 + 3*psi^2``."""
    if p.is_zero():
        return "0"
    parts = []
    for k in range(p.degree, -1, -1):
        c = p.coeffs[k]
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        mono = "" if k == 0 else (var if k == 1 else f"{var}^{k}")
        if not mono:
            body = _fmt_num(mag)
        elif mag == 1.0:
            body = mono
        else:
            body = f"{_fmt_num(mag)}*{mono}"
        parts.append((sign, body))
    head_sign, head = parts[0]
    text = ("-" if head_sign == "-" else "") + head
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


def poly_arith(op: str, p: PsiPoly, q) -> PsiPoly:
    """Dispatch ``add``, ``sub``, ``mul`` or ``scale`` on two operands."""
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * PsiPoly._coerce(q)
    if op == "scale":
        return p * float(q)
    raise ValueError(f"unknown op {op!r}")


def poly_eval(p: PsiPoly | Sequence[float], psi):
    coeffs = p.coeffs if isinstance(p, PsiPoly) else tuple(p)
    return horner(coeffs, psi)


@dataclass(frozen=True, init=False)
class StateLinearForm:
    """Expression ``sum_j terms[j](psi) * x_{j+1} + const(psi)``."""

    terms: tuple[PsiPoly, ...]
    const: PsiPoly

    def __init__(self, terms: Iterable[PsiPoly], const: PsiPoly = ZERO):
        object.__setattr__(self, "terms", tuple(PsiPoly._coerce(t) for t in terms))
        object.__setattr__(self, "const", PsiPoly._coerce(const))

    @property
    def n(self) -> int:
        return len(self.terms)

    @classmethod
    def zero(cls, n: int) -> "StateLinearForm":
        return cls([ZERO] * n)

    @classmethod
    def basis(cls, n: int, j: int, coeff: PsiPoly = ONE) -> "StateLinearForm":
        """``coeff * x_{j+1}`` (0-based ``j``)."""
        terms = [ZERO] * n
        terms[j] = coeff
        return cls(terms)

    def _check(self, other: "StateLinearForm"):
        if not isinstance(other, StateLinearForm):
            raise TypeError("expected a StateLinearForm")
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        self._check(other)
        return StateLinearForm(
            (a + b for a, b in zip(self.terms, other.terms)), self.const + other.const
        )

    def __sub__(self, other):
        self._check(other)
        return StateLinearForm(
            (a - b for a, b in zip(self.terms, other.terms)), self.const - other.const
        )

    def __neg__(self):
        return StateLinearForm((-a for a in self.terms), -self.const)

    def __mul__(self, k):
        if not isinstance(k, (PsiPoly, Real)):
            return NotImplemented
        return StateLinearForm((a * k for a in self.terms), self.const * k)

    __rmul__ = __mul__

    def coeff(self, j: int) -> PsiPoly:
        return self.terms[j]

    def is_zero(self) -> bool:
        return self.const.is_zero() and all(t.is_zero() for t in self.terms)

    def max_abs(self) -> float:
        return max([t.max_abs() for t in self.terms] + [self.const.max_abs()])

    def evaluate(self, psi, x):
        """Value at gain ``psi`` and state ``x`` (last axis of ``x`` is the state)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"state has dimension {x.shape[-1]}, form expects {self.n}")
        out = self.const(psi)
        for j, p in enumerate(self.terms):
            if p:
                out = out + p(psi) * x[..., j]
        return out

    def __str__(self):
        return format_form(self)


def format_form(f: StateLinearForm, var: str = "psi") -> str:
    parts = []
    for j in range(f.n - 1, -1, -1):
        p = f.terms[j]
        if p.is_zero():
            continue
        sym = f"x{j + 1}"
        if p == ONE:
            parts.append(sym)
        elif p == -ONE:
            parts.append(f"-{sym}")
        elif len([c for c in p.coeffs if c]) == 1:
            parts.append(f"{format_poly(p, var)}*{sym}")
        else:
            parts.append(f"({format_poly(p, var)})*{sym}")
    if not f.const.is_zero():
        parts.append(f"({format_poly(f.const, var)})")
    if not parts:
        return "0"
    text = parts[0]
    for part in parts[1:]:
        text += f" - {part[1:]}" if part.startswith("-") else f" + {part}"
    return text


def _chain(p: PsiPoly, closure: tuple[float, float]) -> PsiPoly:
    """``d/dt p(psi)`` with ``dpsi/dt = c0 + c1*psi``."""
    c0, c1 = closure
    return p.deriv() * PsiPoly((c0, c1))


def form_nominal_derivative(
    f: StateLinearForm, closure: tuple[float, float], n: int | None = None
) -> tuple[StateLinearForm, PsiPoly]:
    """Time derivative of ``f`` along ``x_j' = x_{j+1}``, ``psi' = c0 + c1*psi``.

    The last state's derivative is not substituted. Its multiplier is returned
    separately as the input-channel coefficient.
    """
    if n is not None and f.n != n:
        raise ValueError(f"form has dimension {f.n}, expected {n}")
    size = f.n
    terms = [_chain(p, closure) for p in f.terms]
    for j in range(size - 1):
        terms[j + 1] = terms[j + 1] + f.terms[j]
    return StateLinearForm(terms, _chain(f.const, closure)), f.terms[-1]


def form_disturbed_derivative(
    f: StateLinearForm, closure: tuple[float, float]
) -> tuple[StateLinearForm, PsiPoly, tuple[PsiPoly, ...]]:
    """Derivative along ``x_j' = x_{j+1} + d_j``, ``x_n' = u + d_n``.

    Returns the drift, the multiplier of ``u`` and the multipliers of each
    ``d_j``. The disturbance enters every channel additively, so the
    multiplier of ``d_j`` is the coefficient of ``x_j`` in ``f``.
    """
    drift, input_coeff = form_nominal_derivative(f, closure)
    return drift, input_coeff, tuple(f.terms)


@dataclass(frozen=True, init=False)
class PolyMatrix:
    """Square matrix with PsiPoly entries."""

    rows: tuple[tuple[PsiPoly, ...], ...]

    def __init__(self, rows: Iterable[Iterable[PsiPoly]]):
        rows = tuple(tuple(PsiPoly._coerce(e) for e in r) for r in rows)
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("PolyMatrix must be square")
        object.__setattr__(self, "rows", rows)

    @property
    def n(self) -> int:
        return len(self.rows)

    @classmethod
    def identity(cls, n: int) -> "PolyMatrix":
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, n: int) -> "PolyMatrix":
        return cls([[ZERO] * n for _ in range(n)])

    @classmethod
    def from_forms(cls, forms: Sequence[StateLinearForm]) -> "PolyMatrix":
        return cls([f.terms for f in forms])

    def __getitem__(self, ij: tuple[int, int]) -> PsiPoly:
        i, j = ij
        return self.rows[i][j]

    def row(self, i: int) -> tuple[PsiPoly, ...]:
        return self.rows[i]

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        return PolyMatrix(
            [[a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)]
        )

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        return PolyMatrix(
            [[a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)]
        )

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        n = self.n
        out = []
        for i in range(n):
            row = []
            for j in range(n):
                acc = ZERO
                for k in range(n):
                    a, b = self.rows[i][k], other.rows[k][j]
                    if a and b:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def max_degree(self) -> int:
        return max(e.degree for r in self.rows for e in r)

    def max_abs(self) -> float:
        return max(e.max_abs() for r in self.rows for e in r)

    def coeff_tensor(self) -> np.ndarray:
        """Array ``C[i, j, k]`` holding the ``psi**k`` coefficient of entry (i, j)."""
        deg = max(self.max_degree(), 0)
        out = np.zeros((self.n, self.n, deg + 1))
        for i, r in enumerate(self.rows):
            for j, e in enumerate(r):
                out[i, j, : len(e)] = e.coeffs
        return out

    def evaluate(self, psi) -> np.ndarray:
        """Numeric matrix at ``psi``; array ``psi`` adds leading axes."""
        return horner_tensor(self.coeff_tensor(), psi)

    def is_unit_lower_triangular(self) -> bool:
        n = self.n
        for i in range(n):
            for j in range(n):
                e = self.rows[i][j]
                if i == j and e != ONE:
                    return False
                if j > i and not e.is_zero():
                    return False
        return True

    def is_upper_bidiagonal(self) -> bool:
        n = self.n
        return all(
            self.rows[i][j].is_zero()
            for i in range(n)
            for j in range(n)
            if not (j == i or j == i + 1)
        )

    def __str__(self):
        return format_matrix(self)


def horner_tensor(coeffs: np.ndarray, psi) -> np.ndarray:
    """Evaluate a coefficient tensor (last axis = powers) at ``psi``."""
    psi = np.asarray(psi, dtype=float)
    base = coeffs.shape[:-1]
    out = np.zeros(psi.shape + base)
    p = psi.reshape(psi.shape + (1,) * len(base))
    for k in range(coeffs.shape[-1] - 1, -1, -1):
        out = out * p + coeffs[..., k]
    return out


def format_matrix(A: PolyMatrix, var: str = "psi") -> str:
    return "\n".join(
        "[" + ", ".join(format_poly(e, var) for e in row) + "]" for row in A.rows
    )


def polymatrix_inverse_unitriangular(A: PolyMatrix) -> PolyMatrix:
    """Exact inverse of a unit lower-triangular polynomial matrix."""
    if not A.is_unit_lower_triangular():
        raise ValueError("matrix is not unit lower triangular")
    n = A.n
    B = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i):
            acc = ZERO
            for k in range(j, i):
                if A.rows[i][k] and B[k][j]:
                    acc = acc + A.rows[i][k] * B[k][j]
            B[i][j] = -acc
    return PolyMatrix(B)
