"""Reservoir connectivity: sparse normal, R-FORCE and the circle ablations.

The R-FORCE reservoir is built from its eigendecomposition.  A random
antisymmetric matrix supplies an orthonormal basis of conjugate-pair planes;
eigenvalues are sampled on circular arcs described by a :class:`SpectrumPlan`
and realised as real 2x2 rotation-scaling blocks, so the assembled matrix is
real by construction.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .seeding import substream

#: Base radius multipliers of the four R-FORCE arcs (times g).
RFORCE_RADII = (0.7, 0.72, 0.9, 1.2)
#: Non-uniform radius multipliers of the ablation circles (times g).
NONUNIFORM_RADII = (0.70, 0.81, 0.88, 1.2)
#: Radius pivot of the density rule.
DENSITY_PIVOT = 1.15
#: Largest radius for which all circles share the density rule.
RADIUS_THRESHOLD = 1.55
#: Fraction of eigenvalues left on the largest circle above the threshold.
CAPPED_FRACTION = 0.01
#: Lower clamp on ``|r - pivot|`` in the density rule.
DENOMINATOR_FLOOR = 1e-3
#: Gain range the uniform-circle ablation is tuned for.
G_MIN, G_MAX = 1.0, 2.0

ABLATION_KINDS = (
    "one-circle",
    "four-uniform",
    "four-nonuniform",
    "four-nonuniform-density",
    "segmented-nonuniform-density",
    "segmented-fixed-overlap",
)
INIT_KINDS = ("normal", "rforce") + ABLATION_KINDS


@dataclass
class ReservoirMatrix:
    """Square connectivity matrix plus provenance.

    For spectral constructions ``eigenvalues`` holds the full planned spectrum
    (each sampled value followed by its conjugate) and ``arc_index`` the arc
    each came from.
    """

    entries: np.ndarray
    init_kind: str
    eigenvalues: np.ndarray | None = None
    arc_index: np.ndarray | None = None

    def __post_init__(self):
        self.entries = np.ascontiguousarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise ValueError(f"reservoir must be square, got shape {self.entries.shape}")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("reservoir entries must be finite")

    @property
    def n(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class Arc:
    radius: float
    theta_min_deg: float
    theta_max_deg: float
    count: int

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"arc radius must be positive, got {self.radius}")
        if not 0.0 <= self.theta_min_deg <= self.theta_max_deg <= 180.0:
            raise ValueError(
                f"invalid angular range [{self.theta_min_deg}, {self.theta_max_deg}]"
            )
        if self.count < 0:
            raise ValueError("arc count must be non-negative")


@dataclass(frozen=True)
class SpectrumPlan:
    """Placement of the upper-half-plane eigenvalues on circular arcs."""

    arcs: tuple
    g: float
    n_half: int
    kind: str = "rforce"
    fractions: tuple = field(default=(), compare=False)

    def __post_init__(self):
        total = sum(a.count for a in self.arcs)
        if total != self.n_half:
            raise ValueError(f"arc counts sum to {total}, expected {self.n_half}")

    @property
    def radii(self):
        return tuple(a.radius for a in self.arcs)

    @property
    def counts(self):
        return tuple(a.count for a in self.arcs)


@dataclass
class OrthogonalBasis:
    """Real orthogonal basis with one column pair per conjugate eigenpair.

    ``beta[j]`` is the imaginary part of the source antisymmetric matrix's
    eigenvalue ``i * beta[j]`` carried by the pair ``pairing[j]``.
    """

    columns: np.ndarray
    pairing: list
    beta: np.ndarray

    @property
    def n(self):
        return self.columns.shape[0]

    def orthogonality_defect(self):
        v = self.columns
        return float(np.max(np.abs(v.T @ v - np.eye(v.shape[1]))))


def _check_n(n, even=False):
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise ValueError(f"unit count must be an integer >= 2, got {n!r}")
    if even and n % 2:
        raise ValueError(f"unit count must be even for conjugate-pair construction, got {n}")
    return int(n)


def sample_normal_reservoir(n, p, seed):
    """Sparse Gaussian reservoir: each entry nonzero with probability ``p``.

    Nonzero entries are N(0, 1/sqrt(p*n)) (standard deviation).
    """
    n = _check_n(n)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"sparsity p must lie in (0, 1], got {p}")
    rng = substream(seed, "reservoir")
    mask = rng.random((n, n)) < p
    values = rng.standard_normal((n, n)) / math.sqrt(p * n)
    return ReservoirMatrix(np.where(mask, values, 0.0), "normal")


def sample_feedback(n, k, seed):
    """Fixed feedback weights, i.i.d. U(-1, 1), shape ``(n, k)``."""
    n = _check_n(n)
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ValueError(f"readout count must be a positive integer, got {k!r}")
    rng = substream(seed, "feedback")
    return rng.uniform(-1.0, 1.0, size=(n, int(k)))


def antisymmetric_source(n, seed):
    """The antisymmetric matrix ``A - A.T`` whose eigenvectors seed the basis."""
    rng = substream(seed, "basis")
    a = rng.standard_normal((n, n))
    return a - a.T


def generate_orthogonal_basis(n, seed):
    """Orthonormal real basis from the eigenvectors of a random antisymmetric matrix.

    Each eigenvector ``u + i v`` of the antisymmetric source (eigenvalue
    ``i beta``, ``beta > 0``) contributes the column pair
    ``(sqrt(2) u, sqrt(2) v)``.
    """
    n = _check_n(n, even=True)
    source = antisymmetric_source(n, seed)
    # i*A is Hermitian: its eigensolver returns orthonormal eigenvectors.
    # (iA) q = mu q  <=>  A q = -i mu q, so mu < 0 gives beta = -mu > 0.
    try:
        mu, q = np.linalg.eigh(1j * source)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigensolver failed on the {n}x{n} antisymmetric source (seed={seed}): {exc}"
        ) from exc
    half = n // 2
    beta = -mu[:half]
    q = q[:, :half]
    # q is orthogonal to its conjugate, so |u| = |v| and u.v = 0 up to
    # round-off; rotating the free phase makes q^T q real and u.v exactly 0
    q = q * np.exp(-0.5j * np.angle(np.sum(q * q, axis=0)))
    columns = np.empty((n, n))
    columns[:, 0::2] = math.sqrt(2.0) * q.real
    columns[:, 1::2] = math.sqrt(2.0) * q.imag
    columns /= np.linalg.norm(columns, axis=0)
    pairing = [(2 * j, 2 * j + 1) for j in range(half)]
    basis = OrthogonalBasis(columns, pairing, beta)
    _repair_degenerate_pairs(basis)
    return basis


def _repair_degenerate_pairs(basis, tol=1e-10):
    """Gram-Schmidt the column pairs whose beta repeats within ``tol``."""
    beta = basis.beta
    close = np.flatnonzero(np.abs(np.diff(beta)) <= tol * max(1.0, float(np.max(np.abs(beta)))))
    if close.size == 0:
        return
    affected = sorted({j for i in close for j in (i, i + 1)})
    v = basis.columns
    for j in affected:
        for c in basis.pairing[j]:
            col = v[:, c].copy()
            for _ in range(2):  # twice is enough
                others = np.delete(np.arange(v.shape[1]), c)
                col -= v[:, others] @ (v[:, others].T @ col)
            v[:, c] = col / np.linalg.norm(col)


def _largest_remainder(fractions, total):
    raw = np.asarray(fractions, dtype=float) * total
    counts = np.floor(raw).astype(int)
    short = total - int(counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return [int(c) for c in counts]


def density_fractions(radii, g):
    """Fraction of eigenvalues per circle from the inverse-distance rule.

    ``l_i = g^2 / |r_i - 1.15|``.  If the largest radius is at most 1.55 all
    circles share 100% proportionally to ``l_i``; otherwise the largest
    circle (last entry) keeps 1% and the rest share 99%.
    """
    radii = np.asarray(radii, dtype=float)
    if radii[-1] <= RADIUS_THRESHOLD:
        share, active = 1.0, len(radii)
    else:
        share, active = 1.0 - CAPPED_FRACTION, len(radii) - 1
    weights = g**2 / np.maximum(np.abs(radii[:active] - DENSITY_PIVOT), DENOMINATOR_FLOOR)
    fractions = list(share * weights / weights.sum())
    if active < len(radii):
        fractions.append(CAPPED_FRACTION)
    return fractions


def rforce_angles(g):
    """Angular ranges in degrees of the four R-FORCE arcs at gain ``g``."""
    if g < 1.8:
        ranges = [(60.0, 120.0), (120.0, 180.0), (0.0, 60.0)]
    else:
        ranges = [(72.0, 144.0), (0.0, 72.0), (144.0, 180.0)]
    # the largest circle overlaps arc 3 at low gain, arc 1 otherwise
    ranges.append(ranges[2] if g < 1.4 else ranges[0])
    return ranges


def _build_plan(radii, ranges, fractions, g, n, kind):
    n_half = n // 2
    counts = _largest_remainder(fractions, n_half)
    arcs = tuple(Arc(float(r), lo, hi, c) for r, (lo, hi), c in zip(radii, ranges, counts))
    return SpectrumPlan(arcs, float(g), n_half, kind, tuple(float(f) for f in fractions))


def _check_gain(g):
    if not (isinstance(g, (int, float, np.floating)) and math.isfinite(g) and g > 0):
        raise ValueError(f"gain g must be a positive finite number, got {g!r}")
    return float(g)


def plan_rforce(g, n):
    """Four segmented arcs with radii [0.7, 0.72, 0.9, 1.2]*g and inverse-distance densities."""
    g = _check_gain(g)
    n = _check_n(n, even=True)
    radii = [m * g for m in RFORCE_RADII]
    return _build_plan(radii, rforce_angles(g), density_fractions(radii, g), g, n, "rforce")


def plan_ablation(kind, g, n, m=4):
    """Spectrum plans of the circle configurations R-FORCE was distilled from.

    ``m`` is the circle count of ``four-uniform``; the other kinds use one
    or four circles.
    """
    if kind not in ABLATION_KINDS:
        raise ValueError(f"unknown ablation kind {kind!r}; expected one of {ABLATION_KINDS}")
    g = _check_gain(g)
    n = _check_n(n, even=True)
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise ValueError(f"circle count m must be a positive integer, got {m!r}")
    m = int(m)
    full = (0.0, 180.0)

    if kind == "one-circle":
        return _build_plan([g], [full], [1.0], g, n, kind)
    if kind == "four-uniform":
        largest = 1.2 * g / G_MIN
        smallest = 1.4 * g / G_MAX
        radii = [largest] if m == 1 else list(np.linspace(smallest, largest, m))
        return _build_plan(radii, [full] * m, [1.0 / m] * m, g, n, kind)

    radii = [r * g for r in NONUNIFORM_RADII]
    if kind == "four-nonuniform":
        return _build_plan(radii, [full] * 4, [0.25] * 4, g, n, kind)
    fractions = density_fractions(radii, g)
    if kind == "four-nonuniform-density":
        return _build_plan(radii, [full] * 4, fractions, g, n, kind)
    sectors = [(45.0 * i, 45.0 * (i + 1)) for i in range(4)]
    if kind == "segmented-fixed-overlap":
        sectors[3] = sectors[1]
    return _build_plan(radii, sectors, fractions, g, n, kind)


def sample_plan_eigenvalues(plan, seed):
    """Sample the upper-half-plane eigenvalues of ``plan``.

    Returns ``(eigenvalues, arc_index)`` of length ``plan.n_half``.
    """
    rng = substream(seed, "angles")
    values, index = [], []
    for i, arc in enumerate(plan.arcs):
        theta = np.deg2rad(rng.uniform(arc.theta_min_deg, arc.theta_max_deg, arc.count))
        values.append(arc.radius * np.exp(1j * theta))
        index.append(np.full(arc.count, i))
    return np.concatenate(values), np.concatenate(index)


def block_form(basis, eigenvalues):
    """``V B V^T`` with one ``[[a, b], [-b, a]]`` block per eigenvalue ``a + ib``."""
    v = basis.columns
    vb = np.empty_like(v)
    a, b = eigenvalues.real, eigenvalues.imag
    pairs = np.asarray(basis.pairing, dtype=np.intp).reshape(-1, 2)
    c0, c1 = pairs[:, 0], pairs[:, 1]
    vb[:, c0] = v[:, c0] * a - v[:, c1] * b
    vb[:, c1] = v[:, c0] * b + v[:, c1] * a
    return vb @ v.T


def assemble_reservoir(basis, plan, seed):
    """Real reservoir whose spectrum is the sampled plan plus conjugates."""
    if basis.n != 2 * plan.n_half:
        raise ValueError(
            f"basis dimension {basis.n} does not match plan with {plan.n_half} conjugate pairs"
        )
    eig, arc = sample_plan_eigenvalues(plan, seed)
    entries = block_form(basis, eig)
    full = np.empty(basis.n, dtype=complex)
    full[0::2], full[1::2] = eig, eig.conj()
    return ReservoirMatrix(entries, plan.kind, full, np.repeat(arc, 2))


def make_reservoir(init_kind, g, n, seed, p=0.1, m=4):
    """Reservoir of any supported kind.

    ``normal`` returns unit-gain connectivity (the dynamics scale it by
    ``g``); spectral kinds return the assembled matrix whose spectrum already
    sits at the planned radii.
    """
    if init_kind == "normal":
        return sample_normal_reservoir(n, p, seed)
    if init_kind == "rforce":
        plan = plan_rforce(g, n)
    elif init_kind in ABLATION_KINDS:
        plan = plan_ablation(init_kind, g, n, m)
    else:
        raise ValueError(f"unknown init kind {init_kind!r}; expected one of {INIT_KINDS}")
    return assemble_reservoir(generate_orthogonal_basis(n, seed), plan, seed)
