"""Left-invariant connections as bilinear tables on the algebra.

A left-invariant affine connection is encoded by its connection function, a
bilinear map on the algebra stored densely as a rank-3 coefficient table
``coeffs[k, i, j]`` meaning ``alpha(e_i, e_j) = sum_k coeffs[k, i, j] e_k``.
Two constructions are provided:

* the torsion-free bi-invariant connection, ``alpha = 1/2 [.,.]``;
* the Levi-Civita connection of a left-invariant metric,
  ``alpha = 1/2 [.,.] + U``, with U the symmetric bilinear solving
  ``2 <U(A,B), C> = <A, [C,B]> + <[C,A], B>`` for every basis C.

For the non-compact catalog groups the diagonal U(L, L) also has
known closed forms; ``closed_form_u`` encodes them as printed
(by polarization) and ``regress_closed_forms`` compares every variant
against the metric solve, flagging disagreements instead of patching them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GroupMismatchError, MetricError, UnsupportedGroupError
from .groups import AlgebraVector, GroupSpec, get_group, structure_constants
from .linalg import solve_linear, spd_cholesky

# Agreement threshold between closed forms and the metric solve.
REGRESSION_TOL = 1e-10


@dataclass(frozen=True)
class MetricSpec:
    """Left-invariant metric as the Gram matrix of the declared basis."""

    group: GroupSpec
    gram: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        gram = np.asarray(self.gram, dtype=np.float64)
        n = self.group.algebra_dim
        if gram.shape != (n, n):
            raise MetricError(f"gram must be {n}x{n}, got {gram.shape}")
        spd_cholesky(gram, what="gram matrix")  # validates symmetry + SPD
        gram = gram.copy()
        gram.setflags(write=False)
        object.__setattr__(self, "gram", gram)


@dataclass(frozen=True)
class ConnectionFunction:
    """Bilinear connection function as a dense coefficient table."""

    group: GroupSpec
    coeffs: np.ndarray
    label: str = ""

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.float64)
        n = self.group.algebra_dim
        if coeffs.shape != (n, n, n):
            raise MetricError(f"coeffs must be {n}x{n}x{n}, got {coeffs.shape}")
        coeffs = coeffs.copy()
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def symmetric_part(self):
        """Table of the symmetric part in (i, j).

        This is the only part that enters quadratic corrections
        ``alpha(v, v)``; for an exactly antisymmetric table (bi-invariant
        case) it is exactly zero, which is what makes the Ito and
        Stratonovich solvers coincide to the bit there.
        """
        return 0.5 * (self.coeffs + np.swapaxes(self.coeffs, 1, 2))

    def antisymmetric_part(self):
        return 0.5 * (self.coeffs - np.swapaxes(self.coeffs, 1, 2))

    def is_quadratic_free(self, tol=1e-12):
        """True when alpha(A, A) = 0 identically (symmetric part vanishes)."""
        return float(np.max(np.abs(self.symmetric_part()))) <= tol


def metric_for(group, lam=1.0) -> MetricSpec:
    """Catalog metric: rotation/H block weight 1, translation-like block
    weight lam^2 (diagonal in the declared basis)."""
    spec = group if isinstance(group, GroupSpec) else get_group(group)
    if lam <= 0:
        raise MetricError("lam must be positive")
    if spec.name == "so3":
        diag = np.ones(3)
    elif spec.name == "se3":
        diag = np.array([1.0, 1.0, 1.0, lam**2, lam**2, lam**2])
    else:  # se2, e11, n3, sl2r: basis (H-like, two lam-weighted directions)
        diag = np.array([1.0, lam**2, lam**2])
    return MetricSpec(spec, np.diag(diag), lam)


def u_from_metric(metric: MetricSpec) -> ConnectionFunction:
    """Symmetric U bilinear of the Levi-Civita connection, by direct solve.

    For every basis pair (i, j) the coordinates of U(e_i, e_j) solve the
    Gram system ``2 G u = r`` with
    ``r_k = <e_i, [e_k, e_j]> + <[e_k, e_i], e_j>``.
    """
    spec = metric.group
    n = spec.algebra_dim
    c = structure_constants(spec)  # c[k, i, j]
    g = metric.gram
    # rhs[k, i, j] = <e_i, [e_k, e_j]> + <[e_k, e_i], e_j>
    rhs = np.einsum("im,mkj->kij", g, c) + np.einsum("mki,mj->kij", c, g)
    coords = solve_linear(2.0 * g, rhs.reshape(n, n * n))
    table = coords.reshape(n, n, n)
    return ConnectionFunction(spec, table, label=f"levi-civita-u lam={metric.lam:g}")


def alpha_levi_civita(metric: MetricSpec) -> ConnectionFunction:
    """Connection function 1/2 [.,.] + U of the metric's Levi-Civita
    connection."""
    spec = metric.group
    half_bracket = 0.5 * structure_constants(spec)
    u = u_from_metric(metric)
    return ConnectionFunction(
        spec, half_bracket + u.coeffs, label=f"levi-civita lam={metric.lam:g}"
    )


def alpha_biinvariant(group) -> ConnectionFunction:
    """Connection function 1/2 [.,.]; alpha(A, A) = 0 identically."""
    spec = group if isinstance(group, GroupSpec) else get_group(group)
    return ConnectionFunction(
        spec, 0.5 * structure_constants(spec), label="bi-invariant"
    )


def eval_alpha_coords(conn: ConnectionFunction, x, y):
    """Batched bilinear contraction coeffs[k,i,j] x_i y_j."""
    return np.einsum("kij,...i,...j->...k", conn.coeffs, x, y)


def eval_alpha(conn: ConnectionFunction, a: AlgebraVector, b: AlgebraVector) -> AlgebraVector:
    """Evaluate the connection function on two algebra vectors."""
    if a.group != conn.group or b.group != conn.group:
        raise GroupMismatchError(
            f"connection on {conn.group.name} applied to "
            f"{a.group.name}/{b.group.name} vectors"
        )
    return AlgebraVector(conn.group, eval_alpha_coords(conn, a.coords, b.coords))


def _polarize(spec, diagonal_map) -> np.ndarray:
    """Symmetric bilinear table from its diagonal, u(A,B) =
    1/4 (f(A+B) - f(A-B))."""
    n = spec.algebra_dim
    table = np.zeros((n, n, n))
    eye = np.eye(n)
    for i in range(n):
        for j in range(n):
            table[:, i, j] = 0.25 * (
                diagonal_map(eye[i] + eye[j]) - diagonal_map(eye[i] - eye[j])
            )
    return table


def closed_form_u_variants(name, lam=1.0):
    """All closed-form encodings of U for one group.

    Returns an ordered dict label -> ConnectionFunction. The first entry is
    the primary (as-printed) form returned by ``closed_form_u``. Groups
    whose sources print two conflicting displays, or whose notation admits
    two readings, get one entry per reading; the regression report compares
    each against the metric solve.
    """
    key = str(name).lower()
    spec = get_group(key)
    if lam <= 0:
        raise MetricError("lam must be positive")
    l2 = lam * lam

    if key == "se3":

        def cross(v):
            out = np.zeros(6)
            out[3:] = np.cross(v[:3], v[3:])
            return out

        forms = {"cross-product": cross}
    elif key == "se2":

        def rot_action(v):
            return np.array([0.0, -v[0] * v[2], v[0] * v[1]])

        forms = {"rotation-action": rot_action}
    elif key == "e11":

        def pseudo(v):
            return np.array(
                [l2 * (v[1] ** 2 - v[2] ** 2), -v[0] * v[1], v[0] * v[2]]
            )

        def euclid(v):
            return np.array(
                [l2 * (v[1] ** 2 + v[2] ** 2), -v[0] * v[1], v[0] * v[2]]
            )

        forms = {"pseudo-norm-as-printed": pseudo, "euclidean-norm-reading": euclid}
    elif key == "n3":

        def u_display(v):
            return np.array([l2 * v[1] * v[2], l2 * v[0] * v[2], 0.0])

        def compensator_display(v):
            return np.array([-l2 * v[1] * v[2], l2 * v[0] * v[2], 0.0])

        forms = {"u-display": u_display, "compensator-display": compensator_display}
    elif key == "sl2r":

        def printed(v):
            a, b, c = v
            return np.array(
                [
                    (2.0 / l2) * (b * b - c * c),
                    -2.0 * a * b + a * c * lam,
                    -a * b * lam + 2.0 * a * c,
                ]
            )

        forms = {"as-printed": printed}
    else:
        raise UnsupportedGroupError(
            f"no closed-form U for group {name!r} (supported: se3, se2, e11, n3, sl2r)"
        )

    return {
        label: ConnectionFunction(spec, _polarize(spec, f), label=f"closed-u {label}")
        for label, f in forms.items()
    }


def closed_form_u(name, lam=1.0) -> ConnectionFunction:
    """Primary (as-printed) closed-form U table for one group."""
    variants = closed_form_u_variants(name, lam)
    return next(iter(variants.values()))


@dataclass(frozen=True)
class RegressionRow:
    group: str
    lam: float
    variant: str
    max_abs_diff: float
    worst_entry: tuple
    flagged: bool


@dataclass(frozen=True)
class RegressionReport:
    rows: list = field(default_factory=list)
    tol: float = REGRESSION_TOL

    @property
    def flagged_rows(self):
        return [r for r in self.rows if r.flagged]

    def max_diff(self, group, lam=None, variant=None):
        sel = [
            r.max_abs_diff
            for r in self.rows
            if r.group == group
            and (lam is None or r.lam == lam)
            and (variant is None or r.variant == variant)
        ]
        return max(sel) if sel else None


def regress_closed_forms(lam_grid=(0.5, 1.0, 2.0), groups_=None, tol=REGRESSION_TOL):
    """Compare every closed-form U variant against the metric solve.

    Disagreements are reported as data (flagged rows), never patched: the
    point of the report is to make the known sign and lambda-placement
    conflicts between the printed displays visible next to the
    authoritative solve.
    """
    names = list(groups_) if groups_ is not None else ["se3", "se2", "e11", "n3", "sl2r"]
    rows = []
    for name in names:
        for lam in lam_grid:
            oracle = u_from_metric(metric_for(name, lam)).coeffs
            for label, conn in closed_form_u_variants(name, lam).items():
                diff = np.abs(conn.coeffs - oracle)
                worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
                rows.append(
                    RegressionRow(
                        group=name,
                        lam=float(lam),
                        variant=label,
                        max_abs_diff=float(diff[worst]),
                        worst_entry=tuple(int(w) for w in worst),
                        flagged=bool(diff[worst] > tol),
                    )
                )
    return RegressionReport(rows=rows, tol=tol)
