"""Multipath channel parameter estimation via spatially augmented CPD.

The observation tensor is reshaped so that frequency-domain samples augment
both spatial dimensions, which restores identifiability when paths share an
AOA and differ only in delay.  The augmented tensor is factored by complex
alternating least squares; per-path delay comes from the phase progression of
the frequency factor, elevation and azimuth from 1-D correlation peaks against
the augmented steering models, and gains from a final least-squares fit on the
original (unaugmented) tensor.

Augmentation stacking: with augmentation orders (aug_z, aug_x) and
V = S - aug_z - aug_x, the augmented tensor is

    aug[iz*(aug_z+1) + jz, ix*(aug_x+1) + jx, v] = Y[iz, ix, jz + jx + v]

which makes its noiseless part a sum of rank-1 terms whose factors are
a_z(theta) kron d(tau)[:aug_z+1], a_x(theta) kron d(tau)[:aug_x+1], and
d(tau)[:V].  (For the horizontal factor the first aug_x+1 delay samples are
used, mirroring the vertical construction.)
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import SPEED_OF_LIGHT_M_S, ConfigurationError
from .signal import ArrayConfig, WaveformConfig, delay_steering, steering_vector


@dataclass(frozen=True)
class SaConfig:
    """Spatial augmentation orders for the two array axes."""

    aug_x: int = 4
    aug_z: int = 4

    def __post_init__(self):
        if self.aug_x < 0 or self.aug_z < 0:
            raise ConfigurationError("augmentation orders must be >= 0")

    def freq_len(self, num_subcarriers: int) -> int:
        v = num_subcarriers - self.aug_x - self.aug_z
        if v < 2:
            raise ConfigurationError(
                f"augmented frequency length V = {v} < 2; reduce aug_x/aug_z or add subcarriers"
            )
        return v


@dataclass
class CpdFactors:
    """Rank-T factors of the augmented tensor, one column per path."""

    vertical: np.ndarray  # (N_z*(aug_z+1), T)
    horizontal: np.ndarray  # (N_x*(aug_x+1), T)
    frequency: np.ndarray  # (V, T)
    residual: float
    converged: bool
    n_iter: int
    restart: int

    @property
    def n_paths(self) -> int:
        return self.vertical.shape[1]


@dataclass(frozen=True)
class EstimatedPath:
    """Estimated per-path channel parameters (delay as meters of range)."""

    delay_range: float
    aoa_az: float
    aoa_el: float
    gain: complex = 0.0j
    delay_wrapped: bool = False  # set when the delay phase wrapped negative


@dataclass(frozen=True)
class CpdOptions:
    n_restarts: int = 5
    max_iter: int = 200
    tol: float = 1e-8
    seed: int | tuple[int, ...] = 0
    # Restarts stop early once a fit reaches this relative residual; None
    # disables the shortcut.  The minimum-residual winner is unchanged.
    good_enough_residual: float | None = None


def identifiability_bound(shape: tuple[int, int, int]) -> int:
    """Largest generically identifiable CP rank for the given tensor shape.

    For T <= min(dims) the generic Kruskal ranks of the three factors sum to
    3T >= 2T + 2, so any rank up to the smallest tensor dimension is safe.
    """
    return int(min(shape))


def spatial_augment(tensor: np.ndarray, sa: SaConfig) -> np.ndarray:
    """Reshape an (N_z, N_x, S) tensor into its spatially augmented form.

    Output shape is (N_z*(aug_z+1), N_x*(aug_x+1), V) with
    V = S - aug_z - aug_x.  With aug_x = aug_z = 0 this is the identity.
    """
    n_z, n_x, s = tensor.shape
    v = sa.freq_len(s)
    jz = np.arange(sa.aug_z + 1)
    jx = np.arange(sa.aug_x + 1)
    kappa = (
        jz[:, None, None]
        + jx[None, :, None]
        + np.arange(v)[None, None, :]
    )  # (aug_z+1, aug_x+1, V)
    # gather -> (N_z, aug_z+1, N_x, aug_x+1, V), then merge the paired axes
    aug = tensor[:, :, kappa]  # (N_z, N_x, aug_z+1, aug_x+1, V)
    aug = np.transpose(aug, (0, 2, 1, 3, 4))
    return aug.reshape(n_z * (sa.aug_z + 1), n_x * (sa.aug_x + 1), v)


def augmented_steering(
    aoa_az: float,
    aoa_el: float,
    delay_range: float,
    sa: SaConfig,
    array: ArrayConfig,
    waveform: WaveformConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Model factors (vertical, horizontal, frequency) of one augmented path."""
    d = delay_steering(delay_range, waveform)
    a_z = steering_vector(aoa_az, aoa_el, "vertical", array)
    a_x = steering_vector(aoa_az, aoa_el, "horizontal", array)
    v = sa.freq_len(waveform.num_subcarriers)
    return (
        np.kron(a_z, d[: sa.aug_z + 1]),
        np.kron(a_x, d[: sa.aug_x + 1]),
        d[:v],
    )


def _unfold(tensor: np.ndarray, mode: int) -> np.ndarray:
    return np.moveaxis(tensor, mode, 0).reshape(tensor.shape[mode], -1)


def _khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def _reconstruct(factors: list[np.ndarray]) -> np.ndarray:
    a, b, c = factors
    return np.einsum("it,jt,kt->ijk", a, b, c)


def _svd_init(tensor: np.ndarray, t: int, rng: np.random.Generator) -> list[np.ndarray]:
    factors = []
    for mode in range(3):
        u, _, _ = np.linalg.svd(_unfold(tensor, mode), full_matrices=False)
        k = min(t, u.shape[1])
        f = u[:, :k].astype(complex)
        if k < t:
            extra = rng.standard_normal((f.shape[0], t - k)) + 1j * rng.standard_normal((f.shape[0], t - k))
            f = np.concatenate([f, extra], axis=1)
        factors.append(f)
    return factors


def _random_init(shape: tuple[int, int, int], t: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [
        rng.standard_normal((dim, t)) + 1j * rng.standard_normal((dim, t))
        for dim in shape
    ]


def _gevd_init(tensor: np.ndarray, t: int) -> list[np.ndarray]:
    """Algebraic initialization from the generalized EVD of two compressed slices.

    Compressing the tensor to t x t x 2 turns the CP structure into a matrix
    pencil whose eigenvectors recover the first two factors up to scale; the
    third follows by least squares.  Far more swamp-resistant than plain SVD
    initialization when paths are closely spaced.  Raises LinAlgError on
    degenerate pencils; callers fall back to other initializations.
    """
    bases = []
    for mode in range(3):
        u, _, _ = np.linalg.svd(_unfold(tensor, mode), full_matrices=False)
        bases.append(u[:, : (t if mode < 2 else 2)])
    u1, u2, u3 = bases
    if u1.shape[1] < t or u2.shape[1] < t or u3.shape[1] < 2:
        raise np.linalg.LinAlgError("tensor too small for pencil initialization")
    core = np.einsum("ip,jq,kr,ijk->pqr", u1.conj(), u2.conj(), u3.conj(), tensor, optimize=True)
    s1, s2 = core[:, :, 0], core[:, :, 1]
    evals_a, vecs_a = np.linalg.eig(s1 @ np.linalg.inv(s2))
    evals_b, vecs_b = np.linalg.eig(np.linalg.solve(s2, s1).T)
    # pair the two eigendecompositions by eigenvalue proximity
    order = []
    used: set[int] = set()
    for ea in evals_a:
        j = min((j for j in range(t) if j not in used), key=lambda j: abs(ea - evals_b[j]))
        order.append(j)
        used.add(j)
    a = u1 @ vecs_a
    b = u2 @ vecs_b[:, order]
    z = _khatri_rao(a, b)
    gram = z.conj().T @ z
    c = np.linalg.solve(gram, (_unfold(tensor, 2) @ z.conj()).T).T
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
        raise np.linalg.LinAlgError("pencil initialization produced non-finite factors")
    return [a, b, c]


def _als_sweeps(tensor: np.ndarray, factors: list[np.ndarray], opts: CpdOptions) -> tuple[list[np.ndarray], float, bool, int]:
    norm = float(np.linalg.norm(tensor))
    if norm == 0.0:
        return factors, 0.0, True, 0
    unfoldings = [_unfold(tensor, m) for m in range(3)]
    prev = np.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        res = np.inf
        for mode in range(3):
            others = [factors[m] for m in range(3) if m != mode]
            z = _khatri_rao(others[0], others[1])
            gram = z.conj().T @ z
            rhs = unfoldings[mode] @ z.conj()
            # regularized solve guards near-collinear columns mid-iteration
            reg = 1e-12 * np.trace(gram).real / max(gram.shape[0], 1) * np.eye(gram.shape[0])
            f = np.linalg.solve(gram + reg, rhs.T).T
            factors[mode] = f
            if mode == 2:
                # ||X - Xhat||^2 = ||X||^2 - 2 Re<Xhat, X> + ||Xhat||^2, all in
                # factor space; cheap but cancellation-limited near zero
                cross = float(np.real(np.sum(f.conj() * rhs)))
                fit = float(np.real(np.einsum("it,is,ts->", f.conj(), f, gram.conj())))
                res = float(np.sqrt(max(norm**2 - 2.0 * cross + fit, 0.0))) / norm
        if abs(prev - res) <= opts.tol * max(res, 1e-300):
            converged = True
            break
        prev = res
    # exact residual for reporting and restart comparison
    res = float(np.linalg.norm(tensor - _reconstruct(factors))) / norm
    return factors, res, converged, it


def cpd_als(aug_tensor: np.ndarray, t: int, opts: CpdOptions | None = None) -> CpdFactors:
    """Rank-T CPD of the augmented tensor by multi-restart complex ALS.

    Restart 0 initializes algebraically (matrix-pencil GEVD of compressed
    slices, falling back to truncated SVDs of the unfoldings), restart 1
    from the SVDs, and the rest from seeded random factors; the restart with
    the smallest relative Frobenius residual wins (ties broken by restart
    index).  A non-converged best fit is returned with ``converged=False``
    rather than raised.
    """
    opts = opts or CpdOptions()
    if t < 1:
        raise ValueError("path count T must be >= 1")
    bound = identifiability_bound(aug_tensor.shape)
    if t > bound:
        raise ValueError(f"T = {t} exceeds the identifiability bound {bound} for shape {aug_tensor.shape}")
    best = None
    base_seed = opts.seed if isinstance(opts.seed, tuple) else (opts.seed,)
    for restart in range(max(opts.n_restarts, 1)):
        rng = np.random.default_rng((*base_seed, restart))
        if restart == 0:
            try:
                init = _gevd_init(aug_tensor, t)
            except np.linalg.LinAlgError:
                init = _svd_init(aug_tensor, t, rng)
        elif restart == 1:
            init = _svd_init(aug_tensor, t, rng)
        else:
            init = _random_init(aug_tensor.shape, t, rng)
        factors, res, converged, n_iter = _als_sweeps(aug_tensor, init, opts)
        if best is None or res < best.residual:
            best = CpdFactors(factors[0], factors[1], factors[2], res, converged, n_iter, restart)
        if opts.good_enough_residual is not None and best.residual <= opts.good_enough_residual:
            break
    return best


def estimate_model_order(
    aug_tensor: np.ndarray, gamma: float = 3.0, singular_values: np.ndarray | None = None
) -> int:
    """Estimated path count from the frequency-mode singular spectrum.

    The noise level is the median of the trailing half of the mode-3 singular
    values; components above gamma times that level count as paths.  The
    result is clamped to the identifiability bound.
    """
    s = singular_values
    if s is None:
        s = np.linalg.svd(_unfold(aug_tensor, 2), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    noise_level = float(np.median(s[s.size // 2 :]))
    t = int(np.count_nonzero(s > gamma * noise_level))
    return min(t, identifiability_bound(aug_tensor.shape))


def _golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Argmax of a unimodal function on [lo, hi] by golden-section search."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _correlation_peak(factor: np.ndarray, candidate_of, tol: float = 1e-6, n_grid: int = 512) -> float:
    """Angle maximizing the normalized correlation with a factor column."""
    grid = np.linspace(-np.pi / 2 + 1e-9, np.pi / 2 - 1e-9, n_grid)
    f_norm = float(np.linalg.norm(factor))

    def objective(theta: float) -> float:
        cand = candidate_of(theta)
        return abs(np.vdot(cand, factor)) ** 2 / (np.linalg.norm(cand) * f_norm) ** 2

    values = np.array([objective(g) for g in grid])
    i = int(np.argmax(values))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n_grid - 1)]
    return _golden_max(objective, lo, hi, tol)


def extract_path_params(
    factors: CpdFactors,
    sa: SaConfig,
    array: ArrayConfig,
    waveform: WaveformConfig,
) -> list[EstimatedPath]:
    """Per-path (delay_range, elevation, azimuth) from CPD factor columns.

    Delay comes from the average phase step of the frequency factor and is
    invariant to the CPD's per-column complex scaling; angles come from
    normalized-correlation peaks located by a 512-point coarse grid plus
    golden-section refinement.  Delays whose phase wrapped negative (true
    delay at or beyond the 1/subcarrier-spacing unambiguous range, or noise
    around zero) are wrapped into range and flagged.
    """
    out = []
    unambiguous = SPEED_OF_LIGHT_M_S / waveform.subcarrier_spacing
    for t in range(factors.n_paths):
        d = factors.frequency[:, t]
        phase = float(np.angle(np.vdot(d[:-1], d[1:])))
        delay_range = -phase / (2.0 * np.pi * waveform.subcarrier_spacing) * SPEED_OF_LIGHT_M_S
        wrapped = delay_range < 0.0
        if wrapped:
            delay_range += unambiguous

        a_z = factors.vertical[:, t]
        d_ref_z = delay_steering(delay_range, waveform)[: sa.aug_z + 1]

        def vertical_candidate(el: float):
            return np.kron(steering_vector(0.0, el, "vertical", array), d_ref_z)

        aoa_el = _correlation_peak(a_z, vertical_candidate)

        a_x = factors.horizontal[:, t]
        d_ref_x = delay_steering(delay_range, waveform)[: sa.aug_x + 1]

        def horizontal_candidate(az: float):
            return np.kron(steering_vector(az, aoa_el, "horizontal", array), d_ref_x)

        aoa_az = _correlation_peak(a_x, horizontal_candidate)
        out.append(EstimatedPath(delay_range, aoa_az, aoa_el, delay_wrapped=wrapped))
    return out


def _delay_from_phase(freq_factor: np.ndarray, waveform: WaveformConfig) -> tuple[float, bool]:
    """Delay range (meters) from the mean phase step of a frequency factor."""
    phase = float(np.angle(np.vdot(freq_factor[:-1], freq_factor[1:])))
    delay_range = -phase / (2.0 * np.pi * waveform.subcarrier_spacing) * SPEED_OF_LIGHT_M_S
    wrapped = delay_range < 0.0
    if wrapped:
        delay_range += SPEED_OF_LIGHT_M_S / waveform.subcarrier_spacing
    return delay_range, wrapped


def _path_tensor(p: EstimatedPath, gain: complex, array: ArrayConfig, waveform: WaveformConfig) -> np.ndarray:
    a_z = steering_vector(p.aoa_az, p.aoa_el, "vertical", array)
    a_x = steering_vector(p.aoa_az, p.aoa_el, "horizontal", array)
    d = delay_steering(p.delay_range, waveform)
    return gain * (a_z[:, None, None] * a_x[None, :, None] * d[None, None, :])


def _dominant_factors(tensor: np.ndarray) -> list[np.ndarray]:
    return [np.linalg.svd(_unfold(tensor, m), full_matrices=False)[0][:, 0] for m in range(3)]


def _rank1_path(tensor: np.ndarray, array: ArrayConfig, waveform: WaveformConfig) -> tuple[EstimatedPath, float]:
    """Best single-path fit to a tensor, with its steering-consistency score."""
    a_z, a_x, d = _dominant_factors(tensor)
    delay_range, wrapped = _delay_from_phase(d, waveform)
    aoa_el = _correlation_peak(a_z, lambda el: steering_vector(0.0, el, "vertical", array))
    aoa_az = _correlation_peak(a_x, lambda az: steering_vector(az, aoa_el, "horizontal", array))
    path = EstimatedPath(delay_range, aoa_az, aoa_el, delay_wrapped=wrapped)
    score = min(
        abs(np.vdot(steering_vector(0.0, aoa_el, "vertical", array), a_z)) / (np.sqrt(array.n_z) * np.linalg.norm(a_z)),
        abs(np.vdot(steering_vector(aoa_az, aoa_el, "horizontal", array), a_x)) / (np.sqrt(array.n_x) * np.linalg.norm(a_x)),
        abs(np.vdot(delay_steering(delay_range, waveform), d)) / (np.sqrt(waveform.num_subcarriers) * np.linalg.norm(d)),
    )
    return path, float(score)


def refine_paths(
    tensor: np.ndarray,
    params: list[EstimatedPath],
    array: ArrayConfig,
    waveform: WaveformConfig,
    rounds: int = 2,
) -> tuple[list[EstimatedPath], np.ndarray]:
    """Sequential deflation refinement of extracted path parameters.

    For each path in descending gain order, the reconstruction of all other
    paths is subtracted from the observation tensor and the path is refit as
    the best rank-1 term of the residual.  This untangles components the
    tensor decomposition left mixed (closely spaced or aliased paths) and is
    cheap because it works on the unaugmented tensor.  Returns refined
    parameters with per-path consistency scores in [0, 1].
    """
    params = list(params)
    scores = np.ones(len(params))
    for _ in range(max(rounds, 0)):
        gains = _safe_gains(tensor, params, array, waveform)
        order = np.argsort(-np.abs(gains))
        components = [_path_tensor(p, g, array, waveform) for p, g in zip(params, gains)]
        total = np.sum(components, axis=0)
        for t in order:
            residual = tensor - (total - components[t])
            params[t], scores[t] = _rank1_path(residual, array, waveform)
            gains_t = _safe_gains(tensor, params, array, waveform)[t]
            new_component = _path_tensor(params[t], gains_t, array, waveform)
            total += new_component - components[t]
            components[t] = new_component
    return params, scores


def _safe_gains(tensor, params, array, waveform) -> np.ndarray:
    """Gain LS that tolerates (near-)duplicate columns via lstsq fallback."""
    try:
        return estimate_gains(tensor, params, array, waveform)
    except RankDeficientPathsError:
        cols = []
        for p in params:
            a_z = steering_vector(p.aoa_az, p.aoa_el, "vertical", array)
            a_x = steering_vector(p.aoa_az, p.aoa_el, "horizontal", array)
            d = delay_steering(p.delay_range, waveform)
            cols.append(np.kron(d, np.kron(a_x, a_z)))
        b = np.stack(cols, axis=1)
        y = np.transpose(tensor, (2, 1, 0)).reshape(-1)
        return np.linalg.lstsq(b, y, rcond=None)[0]


class RankDeficientPathsError(ValueError):
    """Raised when the gain LS matrix has (near-)duplicate path columns."""

    def __init__(self, pairs: list[tuple[int, int]]):
        self.pairs = pairs
        super().__init__(f"path parameter collisions between indices: {pairs}")


def estimate_gains(
    tensor: np.ndarray,
    params: list[EstimatedPath],
    array: ArrayConfig,
    waveform: WaveformConfig,
) -> np.ndarray:
    """Least-squares per-path amplitudes on the original observation tensor.

    Solves vec(Y) ~= B rho where column t of B is
    d(tau_t) kron a_x(theta_t) kron a_z(theta_t); the returned complex gains
    follow the order of ``params``.
    """
    if not params:
        raise ValueError("estimate_gains requires a nonempty parameter list")
    cols = []
    for p in params:
        a_z = steering_vector(p.aoa_az, p.aoa_el, "vertical", array)
        a_x = steering_vector(p.aoa_az, p.aoa_el, "horizontal", array)
        d = delay_steering(p.delay_range, waveform)
        cols.append(np.kron(d, np.kron(a_x, a_z)))
    b = np.stack(cols, axis=1)
    # duplicate paths make B rank deficient; report the colliding pair(s)
    gram = b.conj().T @ b
    norms = np.sqrt(np.real(np.diag(gram)))
    coherence = np.abs(gram) / np.outer(norms, norms)
    pairs = [
        (i, j)
        for i in range(len(params))
        for j in range(i + 1, len(params))
        if coherence[i, j] > 1.0 - 1e-10
    ]
    if pairs:
        raise RankDeficientPathsError(pairs)
    y = np.transpose(tensor, (2, 1, 0)).reshape(-1)  # vec with iz fastest
    gains, *_ = np.linalg.lstsq(b, y, rcond=None)
    return gains


def steering_consistency(
    factors: CpdFactors,
    params: list[EstimatedPath],
    sa: SaConfig,
    array: ArrayConfig,
    waveform: WaveformConfig,
) -> np.ndarray:
    """Per-path agreement between CPD factors and their best-fit steering model.

    Returns min over the three modes of the normalized correlation magnitude
    in [0, 1].  Components that merely absorb noise or model mismatch (rather
    than representing one physical path) score visibly lower than real paths.
    """
    scores = np.zeros(len(params))
    for t, p in enumerate(params):
        model = augmented_steering(p.aoa_az, p.aoa_el, p.delay_range, sa, array, waveform)
        fitted = (factors.vertical[:, t], factors.horizontal[:, t], factors.frequency[:, t])
        scores[t] = min(
            abs(np.vdot(m, f)) / (np.linalg.norm(m) * np.linalg.norm(f))
            for m, f in zip(model, fitted)
        )
    return scores


def estimate_channel(
    tensor: np.ndarray,
    sa: SaConfig,
    array: ArrayConfig,
    waveform: WaveformConfig,
    n_paths: int | None = None,
    opts: CpdOptions | None = None,
    min_steering_corr: float | None = 0.6,
    refine_rounds: int = 2,
) -> list[EstimatedPath]:
    """Full estimator: augment, pick model order, decompose, extract, refine.

    ``n_paths`` overrides the model-order estimate; an all-noise tensor (or
    ``n_paths=0``) yields an empty list.  When the options leave
    ``good_enough_residual`` unset, restarts stop early once the fit reaches
    the rank-T residual floor implied by the trailing mode-3 singular values.
    Extracted parameters are polished by deflation refinement, then
    components whose deflated residual does not resemble a single steering
    structure (consistency below ``min_steering_corr``) are dropped: those
    are overfit artifacts that would otherwise feed positioning with phantom
    short-delay paths.
    """
    aug = spatial_augment(tensor, sa)
    s = np.linalg.svd(_unfold(aug, 2), compute_uv=False)
    t = estimate_model_order(aug, singular_values=s) if n_paths is None else int(n_paths)
    if t == 0:
        return []
    opts = opts or CpdOptions()
    if opts.good_enough_residual is None and s.size > t:
        floor = float(np.sqrt(np.sum(s[t:] ** 2)) / max(np.linalg.norm(aug), 1e-300))
        opts = replace(opts, good_enough_residual=1.02 * floor)
    factors = cpd_als(aug, t, opts)
    params = extract_path_params(factors, sa, array, waveform)
    if refine_rounds > 0 and params:
        params, scores = refine_paths(tensor, params, array, waveform, rounds=refine_rounds)
        if min_steering_corr is not None:
            kept = [p for p, score in zip(params, scores) if score >= min_steering_corr]
            # never gate away the whole snapshot: keep the best-matching component
            params = kept or [params[int(np.argmax(scores))]]
    params = _dedupe_paths(params)
    gains = _safe_gains(tensor, params, array, waveform)
    return [
        EstimatedPath(p.delay_range, p.aoa_az, p.aoa_el, complex(g), p.delay_wrapped)
        for p, g in zip(params, gains)
    ]


def _dedupe_paths(params: list[EstimatedPath], tol_delay: float = 1e-3, tol_angle: float = 1e-5) -> list[EstimatedPath]:
    """Drop later paths that duplicate an earlier one to within tolerances."""
    out: list[EstimatedPath] = []
    for p in params:
        if all(
            abs(p.delay_range - q.delay_range) > tol_delay
            or abs(p.aoa_az - q.aoa_az) > tol_angle
            or abs(p.aoa_el - q.aoa_el) > tol_angle
            for q in out
        ):
            out.append(p)
    return out
