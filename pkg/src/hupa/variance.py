"""Growing-window variance analysis and scaling classification.

The measurement: drop many equal-radius windows into the periodic box,
record how much the per-window statistic (point count, or dark-pixel
fraction) fluctuates, repeat over a sweep of radii, and fit the log-log
slope of variance against radius.  The slope separates Poisson-like
patterns, whose count variance grows like the window volume, from
hyperuniform ones, where growth tracks the window surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import CannotFitError, DegenerateInputError, WindowTooLargeError
from .pattern import BoxDomain, PointPattern

MODE_NUMBER = "number_count"
MODE_FRACTION = "dark_fraction"

MEMBERSHIP_TOL = 1e-12
MIN_FIT_POINTS = 3
R_SQUARED_FLOOR = 0.9
CLASS_DEAD_BAND = 0.25

DEFAULT_N_WINDOWS = {2: 10_000, 3: 4_000}
DEFAULT_N_RADII = 16
DEFAULT_R_MAX_FACTOR = 0.25
DEFAULT_R_MIN_SPACINGS = 2.0

NON_HYPERUNIFORM = "non_hyperuniform"
HYPERUNIFORM = "hyperuniform"
INTERMEDIATE = "intermediate"
UNDETERMINED = "undetermined"


def window_radius_limit(box: BoxDomain) -> float:
    """Largest usable window radius: half the shortest box edge.  Beyond it
    a window overlaps its own periodic image and counts double."""
    return box.min_length / 2.0


def check_window_radius(box: BoxDomain, radius: float) -> float:
    radius = float(radius)
    limit = window_radius_limit(box)
    if not 0.0 < radius < limit:
        raise WindowTooLargeError(radius, limit)
    return radius


def random_centers(box: BoxDomain, n: int, seed: int) -> np.ndarray:
    """n window centers drawn uniformly over the box."""
    if n < 1:
        raise ValueError("need at least one window center")
    rng = np.random.default_rng(seed)
    return rng.random((n, box.dim)) * box.lengths_array()


def grid_centers(box: BoxDomain, shape) -> np.ndarray:
    """Regular grid of window centers, one per cell center.  Dense grids
    approximate the exhaustive (every possible placement) variance."""
    shape = tuple(int(s) for s in shape)
    if len(shape) != box.dim or any(s < 1 for s in shape):
        raise ValueError(f"grid shape {shape} does not fit a {box.dim}D box")
    axes = [(np.arange(s) + 0.5) * (L / s) for s, L in zip(shape, box.lengths)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def window_counts(pattern: PointPattern, radius: float, centers: np.ndarray,
                  workers: int = 1) -> np.ndarray:
    """Number of pattern points inside a periodic ball around each center.

    Membership is distance <= radius + MEMBERSHIP_TOL, so points sitting
    exactly on the boundary count as inside regardless of rounding
    direction.  ``workers`` affects speed only; counts are identical for
    any thread count.
    """
    radius = check_window_radius(pattern.box, radius)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if len(pattern) == 0:
        return np.zeros(len(centers), dtype=np.int64)
    tree = cKDTree(pattern.points, boxsize=pattern.box.lengths_array())
    counts = tree.query_ball_point(
        centers, radius + MEMBERSHIP_TOL, workers=workers, return_length=True
    )
    return np.asarray(counts, dtype=np.int64)


def count_in_window(pattern: PointPattern, center, radius: float) -> int:
    """Count points within periodic distance radius of one center."""
    return int(window_counts(pattern, radius, np.asarray(center, dtype=float))[0])


@dataclass(frozen=True)
class VarianceCurve:
    """Variance-versus-radius measurement for one pattern or field.

    mean/variance are the per-radius sample mean and unbiased sample
    variance of the window statistic over n_windows windows.
    """

    radii: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    n_windows: int
    mode: str
    dim: int
    source: str = ""

    def __post_init__(self):
        for name in ("radii", "mean", "variance"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.radii) == len(self.mean) == len(self.variance)):
            raise ValueError("radii, mean, variance must have equal length")
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be strictly increasing")
        if self.n_windows < 2:
            raise ValueError("n_windows must be >= 2")
        if self.mode not in (MODE_NUMBER, MODE_FRACTION):
            raise ValueError(f"unknown curve mode {self.mode!r}")
        if np.any(self.variance < 0):
            raise ValueError("variance must be nonnegative")
        if self.mode == MODE_FRACTION:
            # Fractions live in [0,1]; the unbiased variance of n such
            # values is at most n/(4(n-1)).
            vmax = 0.25 * self.n_windows / (self.n_windows - 1) + 1e-12
            if (np.any(self.mean < -1e-12) or np.any(self.mean > 1 + 1e-12)
                    or np.any(self.variance > vmax)):
                raise ValueError("dark_fraction statistics out of range")

    def to_csv(self) -> str:
        lines = ["R,mean,variance,n_windows,mode"]
        for r, m, v in zip(self.radii, self.mean, self.variance):
            lines.append(f"{r:.17g},{m:.17g},{v:.17g},{self.n_windows},{self.mode}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (ln R, ln variance)."""

    alpha: float
    log_prefactor: float
    r_squared: float
    n_points: int
    fit_range: tuple[float, float]


@dataclass(frozen=True)
class OrderClass:
    """Classification verdict for one fitted curve."""

    label: str
    alpha: float
    dim: int
    mode: str


def radius_sweep(r_min: float, r_max: float, n_radii: int) -> np.ndarray:
    if n_radii < 1:
        raise ValueError("n_radii must be >= 1")
    if not 0 < r_min <= r_max:
        raise DegenerateInputError(
            f"cannot build a radius sweep over [{r_min:g}, {r_max:g}]"
        )
    if n_radii == 1:
        return np.array([float(r_min)])
    return np.exp(np.linspace(np.log(r_min), np.log(r_max), n_radii))


def default_radii(pattern: PointPattern, n_radii: int = DEFAULT_N_RADII) -> np.ndarray:
    """Log-spaced sweep from twice the mean nearest-neighbor spacing (below
    that, counts are mostly 0/1) up to a quarter of the shortest box edge
    (above that, periodic self-overlap artifacts set in)."""
    if len(pattern) < 2:
        raise DegenerateInputError(
            "need at least 2 points to choose a default radius sweep"
        )
    r_min = DEFAULT_R_MIN_SPACINGS * pattern.mean_nearest_neighbor_distance()
    r_max = DEFAULT_R_MAX_FACTOR * pattern.box.min_length
    if r_min >= r_max:
        raise DegenerateInputError(
            f"default sweep collapsed: 2x mean spacing {r_min:g} reaches the "
            f"window limit {r_max:g}; pass radii explicitly"
        )
    return radius_sweep(r_min, r_max, n_radii)


def number_variance_curve(pattern: PointPattern, radii=None,
                          n_windows: int | None = None, seed: int = 0,
                          workers: int = 1,
                          centers: np.ndarray | None = None) -> VarianceCurve:
    """Count-variance curve over a radius sweep.

    Window centers are drawn once and reused for every radius: common
    random numbers make the curve smoother and cross-radius ratios less
    noisy than independent draws would.  Pass explicit ``centers`` (e.g. an
    exhaustive grid) to bypass random placement.
    """
    if len(pattern) == 0:
        raise DegenerateInputError("cannot measure variance of an empty pattern")
    if radii is None:
        radii = default_radii(pattern)
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("radii must be a nonempty 1D array")
    for r in radii:
        check_window_radius(pattern.box, r)
    if centers is None:
        if n_windows is None:
            n_windows = DEFAULT_N_WINDOWS[pattern.dim]
        if n_windows < 2:
            raise ValueError("n_windows must be >= 2")
        centers = random_centers(pattern.box, int(n_windows), seed)
    else:
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
    means = np.empty(len(radii))
    variances = np.empty(len(radii))
    for i, r in enumerate(radii):
        counts = window_counts(pattern, r, centers, workers=workers)
        means[i] = counts.mean()
        variances[i] = counts.var(ddof=1)
    return VarianceCurve(radii=radii, mean=means, variance=variances,
                         n_windows=len(centers), mode=MODE_NUMBER,
                         dim=pattern.dim, source=pattern.provenance)


def fraction_variance_curve(field, radii=None, n_windows: int | None = None,
                            seed: int = 0, workers: int = 1,
                            centers: np.ndarray | None = None) -> VarianceCurve:
    """Dark-fraction variance curve for a binary raster field.

    Same sampling scheme as number_variance_curve; the window statistic is
    the fraction of in-window pixels that are dark.
    """
    box = field.box
    if radii is None:
        radii = field.default_radii()
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or len(radii) == 0:
        raise ValueError("radii must be a nonempty 1D array")
    for r in radii:
        check_window_radius(box, r)
    if centers is None:
        if n_windows is None:
            n_windows = DEFAULT_N_WINDOWS[box.dim]
        if n_windows < 2:
            raise ValueError("n_windows must be >= 2")
        centers = random_centers(box, int(n_windows), seed)
    else:
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
    means = np.empty(len(radii))
    variances = np.empty(len(radii))
    for i, r in enumerate(radii):
        fracs = field.window_dark_fractions(centers, r, workers=workers)
        means[i] = fracs.mean()
        variances[i] = fracs.var(ddof=1)
    return VarianceCurve(radii=radii, mean=means, variance=variances,
                         n_windows=len(centers), mode=MODE_FRACTION,
                         dim=box.dim, source=field.provenance)


def fit_scaling(curve: VarianceCurve,
                fit_range: tuple[float, float] | None = None) -> ScalingFit:
    """Fit ln(variance) = alpha * ln(R) + c by ordinary least squares.

    Radii outside fit_range are excluded before fitting.  Fewer than
    MIN_FIT_POINTS usable radii, or any zero variance in range, is an
    error: a log-log slope from such data would be meaningless, and
    silently dropping zero-variance radii would bias the slope.
    """
    if fit_range is None:
        lo, hi = -np.inf, np.inf
    else:
        lo, hi = float(fit_range[0]), float(fit_range[1])
    keep = (curve.radii >= lo) & (curve.radii <= hi)
    radii = curve.radii[keep]
    var = curve.variance[keep]
    if len(radii) < MIN_FIT_POINTS:
        raise CannotFitError(
            f"need at least {MIN_FIT_POINTS} radii in the fit range, have {len(radii)}"
        )
    if np.any(var <= 0):
        raise CannotFitError(
            "zero variance at one or more radii in range; narrow the fit "
            "range to exclude them"
        )
    x = np.log(radii)
    y = np.log(var)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise CannotFitError("all radii in range are identical")
    ss_tot = float(dy @ dy)
    if ss_tot == 0.0:
        # Flat response: OLS slope is exactly 0 and the fit is exact.
        alpha, r_squared = 0.0, 1.0
    else:
        alpha = float(dx @ dy) / sxx
        resid = dy - alpha * dx
        r_squared = max(0.0, 1.0 - float(resid @ resid) / ss_tot)
    log_prefactor = float(y.mean() - alpha * x.mean())
    return ScalingFit(alpha=alpha, log_prefactor=log_prefactor,
                      r_squared=r_squared, n_points=len(radii),
                      fit_range=(float(radii.min()), float(radii.max())))


def classify(fit: ScalingFit, dim: int, mode: str = MODE_NUMBER) -> OrderClass:
    """Map a fitted slope to a hyperuniformity label.

    Anchors: count variance grows like R^dim for Poisson-like patterns and
    like R^(dim-1) for strongly hyperuniform ones; dark-fraction variance
    decays like R^-dim versus R^-(dim+1).  A dead band of CLASS_DEAD_BAND
    around each anchor absorbs estimator noise; slopes between the bands
    are "intermediate" rather than a forced binary call, and a fit with
    r_squared below R_SQUARED_FLOOR is "undetermined" because the curve is
    not a power law to begin with.
    """
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")
    if mode == MODE_NUMBER:
        upper, lower = float(dim), float(dim - 1)
    elif mode == MODE_FRACTION:
        upper, lower = float(-dim), float(-(dim + 1))
    else:
        raise ValueError(f"unknown curve mode {mode!r}")
    if fit.r_squared < R_SQUARED_FLOOR:
        label = UNDETERMINED
    elif fit.alpha >= upper - CLASS_DEAD_BAND:
        label = NON_HYPERUNIFORM
    elif fit.alpha <= lower + CLASS_DEAD_BAND:
        label = HYPERUNIFORM
    else:
        label = INTERMEDIATE
    return OrderClass(label=label, alpha=fit.alpha, dim=dim, mode=mode)


def analyze(pattern_or_field, radii=None, n_windows: int | None = None,
            seed: int = 0, workers: int = 1,
            fit_range: tuple[float, float] | None = None
            ) -> tuple[VarianceCurve, ScalingFit, OrderClass]:
    """End-to-end pipeline: curve, then fit, then classification."""
    if isinstance(pattern_or_field, PointPattern):
        curve = number_variance_curve(pattern_or_field, radii=radii,
                                      n_windows=n_windows, seed=seed,
                                      workers=workers)
    else:
        curve = fraction_variance_curve(pattern_or_field, radii=radii,
                                        n_windows=n_windows, seed=seed,
                                        workers=workers)
    fit = fit_scaling(curve, fit_range=fit_range)
    order = classify(fit, curve.dim, curve.mode)
    return curve, fit, order
