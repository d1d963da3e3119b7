"""Synthetic panel generators and the Monte Carlo harness.

Five data-generating processes over unit factors a_i and period factors
l_t, each with t0 untreated pre-periods and a single post period where
treatment is drawn from a logistic propensity in a_i:

  model 1: y = a + l + tau * w + u           a, l ~ U(-1, 1)
  model 2: y = a * l + tau * w + u           a, l ~ U(-1, 1)
  model 3: y(0) = (a - l)^2 + u              a, l ~ U(0, 1)
  model 4: y(0) = gaussian bump of (a - l) + u
  model 5: y(0) = exp(-10 |a - l|) + u

Models 3-5 share the post-period pair y(0) = a + a^2 + e and
y(1) = 2a + a^2 + 1 + e, so the harness targets the counterfactual mean
of the treated group there, and the ATT (exactly tau) for models 1-2.

Each replication derives five independent substreams (factors, period
factors, pre-period noise, post-period noise, treatment) from its seed,
so method variants compare on identical data and a re-drawn treatment
cannot disturb the pre-period block.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import twfe
from .bandwidth import BandwidthGrid, default_grid
from .errors import ConfigError, EstimationError, LatentPanelError
from .estimator import EstimatorConfig, estimate_cf_mean, estimate_period
from .panel import Panel, slice_period

__all__ = [
    "CellConfig",
    "DgpSpec",
    "SyntheticPanel",
    "MethodSpec",
    "MethodStats",
    "SimReport",
    "generate",
    "parse_methods",
    "run_cell",
    "emit_table",
    "load_table",
    "merge_tables",
]

MODELS = (1, 2, 3, 4, 5)
_S_ALPHA, _S_LAMBDA, _S_U, _S_EPS, _S_W = range(5)
_MAX_TREATMENT_RETRIES = 100


@dataclass(frozen=True)
class DgpSpec:
    model: int
    n: int
    t0: int
    tau: float = 0.5
    # Pre-period residual scale. The default differs by model family:
    # 0.5 for models 1-2, 1.0 for models 3-5 (the comparison-study tables
    # are only reproducible with unit-scale pre-period noise there).
    noise_sd: float | None = None
    post_noise_sd: float = 1.0  # post-period residual scale, models 3-5
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model}")
        if self.n < 4:
            raise ConfigError(f"need n >= 4, got {self.n}")
        if self.t0 < 2:
            raise ConfigError(f"need t0 >= 2, got {self.t0}")

    @property
    def pre_noise_sd(self) -> float:
        if self.noise_sd is not None:
            return self.noise_sd
        return 0.5 if self.model <= 2 else 1.0


@dataclass(frozen=True)
class SyntheticPanel:
    panel: Panel
    alphas: np.ndarray
    true_p: np.ndarray
    true_estimand: float
    lam_post: float  # post-period factor draw (enters outcomes in models 1-2)
    treatment_retries: int = 0


def _stream(seed: int, which: int, extra: int = 0) -> np.random.Generator:
    key = (which,) if extra == 0 else (which, extra)
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=key))
    )


def _propensity(model: int, alphas: np.ndarray) -> np.ndarray:
    if model <= 2:
        x = alphas
    else:
        c = alphas - 0.5
        x = c + c * c
    return 1.0 / (1.0 + np.exp(-x))


def _pre_mean(model: int, alphas: np.ndarray, lams: np.ndarray) -> np.ndarray:
    a = alphas[:, None]
    l = lams[None, :]
    if model == 1:
        return a + l
    if model == 2:
        return a * l
    if model == 3:
        return (a - l) ** 2
    if model == 4:
        return (1.0 / (0.1 * math.sqrt(2.0 * math.pi))) * np.exp(-100.0 * (a - l) ** 2)
    return np.exp(-10.0 * np.abs(a - l))


def _draw_treatment(p: np.ndarray, seed: int, attempt: int) -> np.ndarray:
    rng = _stream(seed, _S_W, attempt)
    return (rng.uniform(size=p.shape[0]) < p).astype(np.int8)


def generate(spec: DgpSpec, estimand_convention: str = "conditional") -> SyntheticPanel:
    """Draw one synthetic panel with t0 pre-periods and one post period.

    ``estimand_convention`` picks the recorded target for models 3-5:
    "conditional" is the mean of a + a^2 over the realized treated set,
    "realized" additionally includes the realized post-period noise mean.
    A treatment draw leaving zero or N treated units is redrawn from a
    bumped substream (bounded retries, count recorded).
    """
    if estimand_convention not in ("conditional", "realized"):
        raise ConfigError(
            f"estimand convention must be 'conditional' or 'realized', "
            f"got {estimand_convention!r}"
        )
    n, t0, model = spec.n, spec.t0, spec.model
    t_total = t0 + 1
    lo, hi = (-1.0, 1.0) if model <= 2 else (0.0, 1.0)
    alphas = _stream(spec.seed, _S_ALPHA).uniform(lo, hi, size=n)
    lams = _stream(spec.seed, _S_LAMBDA).uniform(lo, hi, size=t_total)

    p = _propensity(model, alphas)
    retries = 0
    w_post = _draw_treatment(p, spec.seed, 0)
    while w_post.sum() in (0, n):
        retries += 1
        if retries > _MAX_TREATMENT_RETRIES:
            raise EstimationError(
                "treatment draw degenerate after retries", stage="generate"
            )
        w_post = _draw_treatment(p, spec.seed, retries)

    outcomes = np.empty((n, t_total))
    if model <= 2:
        u = _stream(spec.seed, _S_U).normal(0.0, spec.pre_noise_sd, size=(n, t_total))
        outcomes[:] = _pre_mean(model, alphas, lams) + u
        outcomes[:, -1] += spec.tau * w_post
        estimand = spec.tau
    else:
        u = _stream(spec.seed, _S_U).normal(0.0, spec.pre_noise_sd, size=(n, t0))
        outcomes[:, :t0] = _pre_mean(model, alphas, lams[:t0]) + u
        eps = _stream(spec.seed, _S_EPS).normal(0.0, spec.post_noise_sd, size=n)
        y0 = alphas + alphas**2 + eps
        y1 = 2.0 * alphas + alphas**2 + 1.0 + eps
        outcomes[:, -1] = np.where(w_post == 1, y1, y0)
        treated = w_post == 1
        estimand = float((alphas[treated] + alphas[treated] ** 2).mean())
        if estimand_convention == "realized":
            estimand += float(eps[treated].mean())

    treatment = np.zeros((n, t_total), dtype=np.int8)
    treatment[:, -1] = w_post
    panel = Panel(outcomes, treatment, t0)
    return SyntheticPanel(
        panel=panel,
        alphas=alphas,
        true_p=p,
        true_estimand=estimand,
        lam_post=float(lams[-1]),
        treatment_retries=retries,
    )


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: str  # "twfe" or "dr"
    distance: str = "pseudo"  # "pseudo" or "oracle_l2"
    folds: int | str = 2
    use_true_p: bool = False


def _parse_folds(token: str) -> int | str:
    if token in ("loo", "none"):
        return token
    try:
        return int(token)
    except ValueError:
        raise ConfigError(
            f"bad fold token {token!r} (want an integer, 'loo', or 'none')"
        ) from None


def parse_methods(spec: str) -> tuple[MethodSpec, ...]:
    """Parse a comma-separated method list.

    Tokens: ``twfe``, ``dr_pseudo[:folds]``, ``dr_oracle_alpha[:folds]``,
    ``dr_true_p[:folds]``. Defaults mirror the usual comparison setups:
    pseudo-distance runs 2-fold, the known-factor variant leave-one-out,
    and the known-propensity variant without cross-fitting.
    """
    out = []
    for raw in spec.split(","):
        token = raw.strip()
        if not token:
            continue
        head, _, tail = token.partition(":")
        if head == "twfe":
            if tail:
                raise ConfigError("twfe takes no fold suffix")
            out.append(MethodSpec(name=token, kind="twfe"))
        elif head == "dr_pseudo":
            folds = _parse_folds(tail) if tail else 2
            out.append(MethodSpec(name=token, kind="dr", distance="pseudo", folds=folds))
        elif head == "dr_oracle_alpha":
            folds = _parse_folds(tail) if tail else "loo"
            out.append(
                MethodSpec(name=token, kind="dr", distance="oracle_l2", folds=folds)
            )
        elif head == "dr_true_p":
            folds = _parse_folds(tail) if tail else "none"
            out.append(
                MethodSpec(
                    name=token,
                    kind="dr",
                    distance="oracle_l2",
                    folds=folds,
                    use_true_p=True,
                )
            )
        else:
            raise ConfigError(f"unknown method {token!r}")
    if not out:
        raise ConfigError("empty method list")
    names = [m.name for m in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate methods in {spec!r}")
    return tuple(out)


@dataclass(frozen=True)
class CellConfig:
    """Estimator options shared by every replication of a cell."""

    kernel: str = "epanechnikov"
    grid: BandwidthGrid | None = None
    eps_trim: float = 0.01
    alpha: float = 0.05
    twfe_se: str = "robust"
    estimand_convention: str = "conditional"

    def resolved_grid(self) -> BandwidthGrid:
        return self.grid if self.grid is not None else default_grid()


def _rep_seed(base_seed: int, rep: int, salt: int = 0) -> int:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep, salt))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _apply_method(
    method: MethodSpec,
    synth: SyntheticPanel,
    model: int,
    seed: int,
    cell: CellConfig,
) -> tuple[float, float, float]:
    """Return (estimate, ci_low, ci_high) on the cell's estimand scale."""
    panel = synth.panel
    t_post = panel.t
    if method.kind == "twfe":
        est = twfe(panel, alpha=cell.alpha, se=cell.twfe_se)
        value, lo, hi = est.tau, est.ci_low, est.ci_high
        if model >= 3:
            slc = slice_period(panel, t_post)
            treated_mean = float(slc.y[slc.w == 1.0].mean())
            # counterfactual mean = treated mean - effect; interval flips
            value, lo, hi = treated_mean - value, treated_mean - hi, treated_mean - lo
        return value, lo, hi
    config = EstimatorConfig(
        folds=method.folds,
        kernel=cell.kernel,
        grid=cell.resolved_grid(),
        alpha=cell.alpha,
        eps_trim=cell.eps_trim,
        seed=seed,
        distance_source=method.distance,
        alphas=synth.alphas if method.distance == "oracle_l2" else None,
        true_p=synth.true_p if method.use_true_p else None,
    )
    if model >= 3:
        est = estimate_cf_mean(panel, t_post, config)
        return est.value, est.ci_low, est.ci_high
    est = estimate_period(panel, t_post, config)
    return est.att, est.ci_low, est.ci_high


def _run_rep(args):
    dgp, methods, cell, base_seed, rep = args
    spec = replace(dgp, seed=_rep_seed(base_seed, rep))
    synth = generate(spec, estimand_convention=cell.estimand_convention)
    truth = synth.true_estimand
    rows = []
    for m_idx, method in enumerate(methods):
        seed = _rep_seed(base_seed, rep, salt=1000 + m_idx)
        try:
            value, lo, hi = _apply_method(method, synth, dgp.model, seed, cell)
        except LatentPanelError as err:
            rows.append(("fail", f"{type(err).__name__}: {err}"))
            continue
        rows.append(
            ("ok", (abs(value - truth), float(lo <= truth <= hi), hi - lo))
        )
    return rows


@dataclass(frozen=True)
class MethodStats:
    name: str
    median_abs_dev: float
    coverage: float
    median_ci_length: float
    n_failed: int


@dataclass(frozen=True)
class SimReport:
    model: int
    n: int
    t0: int
    reps: int
    estimand: str  # "att" or "cf_mean"
    methods: tuple[MethodStats, ...]


def run_cell(
    dgp: DgpSpec,
    methods,
    reps: int,
    base_seed: int,
    jobs: int = 1,
    cell: CellConfig | None = None,
) -> SimReport:
    """Run every method on ``reps`` independent replications of one DGP.

    Per replication all methods see identical data (paired comparison);
    per-replication seeds are a pure function of (base_seed, index), so
    serial and parallel runs produce identical reports. A method failing
    on more than 2% of replications fails the whole cell.
    """
    if reps < 1:
        raise ConfigError(f"reps must be >= 1, got {reps}")
    if isinstance(methods, str):
        methods = parse_methods(methods)
    methods = tuple(methods)
    if not methods:
        raise ConfigError("at least one method is required")
    cell = cell or CellConfig()
    tasks = [(dgp, methods, cell, base_seed, rep) for rep in range(reps)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_rep, tasks, chunksize=max(1, reps // (8 * jobs))))
    else:
        results = [_run_rep(t) for t in tasks]

    stats = []
    failures = {}
    for m_idx, method in enumerate(methods):
        devs, covered, lengths, failed = [], [], [], []
        for rep_rows in results:
            status, payload = rep_rows[m_idx]
            if status == "fail":
                failed.append(payload)
            else:
                dev, cov, length = payload
                devs.append(dev)
                covered.append(cov)
                lengths.append(length)
        if len(failed) > 0.02 * reps:
            failures[method.name] = failed
            continue
        stats.append(
            MethodStats(
                name=method.name,
                median_abs_dev=float(np.median(devs)),
                coverage=float(np.mean(covered)),
                median_ci_length=float(np.median(lengths)),
                n_failed=len(failed),
            )
        )
    if failures:
        lines = "; ".join(
            f"{name}: {len(msgs)}/{reps} failed (first: {msgs[0]})"
            for name, msgs in failures.items()
        )
        raise EstimationError(f"cell failed: {lines}", stage="simulate")
    return SimReport(
        model=dgp.model,
        n=dgp.n,
        t0=dgp.t0,
        reps=reps,
        estimand="att" if dgp.model <= 2 else "cf_mean",
        methods=tuple(stats),
    )


_STAT_ROWS = (
    ("median_abs_dev", lambda s: s.median_abs_dev),
    ("coverage95", lambda s: s.coverage),
    ("median_ci_length", lambda s: s.median_ci_length),
)


def emit_table(report: SimReport, fmt: str = "csv") -> str:
    """Render the three per-method statistics as CSV or aligned text."""
    if not report.methods:
        raise ConfigError("report has no method columns")
    names = [m.name for m in report.methods]
    if fmt == "csv":
        lines = ["statistic," + ",".join(names)]
        for label, getter in _STAT_ROWS:
            lines.append(
                label + "," + ",".join(f"{getter(m):.17g}" for m in report.methods)
            )
        return "\n".join(lines) + "\n"
    if fmt == "text":
        width = max(12, *(len(n) for n in names)) + 2
        head = f"{'statistic':<18}" + "".join(f"{n:>{width}}" for n in names)
        lines = [
            f"model {report.model}  N={report.n}  T0={report.t0}  "
            f"reps={report.reps}  estimand={report.estimand}",
            head,
        ]
        for label, getter in _STAT_ROWS:
            lines.append(
                f"{label:<18}"
                + "".join(f"{getter(m):>{width}.6g}" for m in report.methods)
            )
        return "\n".join(lines) + "\n"
    raise ConfigError(f"unknown table format {fmt!r}")


def load_table(text: str) -> dict[str, dict[str, float]]:
    """Parse emit_table CSV output back into {method: {statistic: value}}."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if header[0] != "statistic":
        raise ConfigError("not a statistics table")
    methods = header[1:]
    out = {m: {} for m in methods}
    for line in lines[1:]:
        cells = line.split(",")
        for m, cell in zip(methods, cells[1:]):
            out[m][cells[0]] = float(cell)
    return out


def merge_tables(base: str, extra: str) -> str:
    """Append the columns of a second statistics CSV to a base table.

    The extra table must carry the same statistic rows; this is the slot
    for results produced by external methods so they can sit alongside
    the built-in columns.
    """
    base_lines = [ln for ln in base.strip().splitlines() if ln]
    extra_lines = [ln for ln in extra.strip().splitlines() if ln]
    if len(base_lines) != len(extra_lines):
        raise ConfigError("external table has a different row count")
    merged = []
    for b, e in zip(base_lines, extra_lines):
        b_cells = b.split(",")
        e_cells = e.split(",")
        if b_cells[0] != e_cells[0]:
            raise ConfigError(
                f"external table rows do not line up: {b_cells[0]!r} vs {e_cells[0]!r}"
            )
        merged.append(",".join(b_cells + e_cells[1:]))
    return "\n".join(merged) + "\n"
