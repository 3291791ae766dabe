"""Model fitting and cross-validated evaluation.

The time model is fitted in two stages. Stage 1 drops the offset time and
solves the log-linearized model by linear least squares. Stage 2 refines
all free parameters, including the offset, with Levenberg-Marquardt on the
configured residual (relative by default, matching the MAPE metric).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .descriptors import DescriptorSet
from .errors import ConfigurationError, DomainError, JoinError, RankDeficiencyError
from .models import (ContentFactorSpec, EncodingRecord, EnergyModelParams, TimeModelParams,
                     content_factor, predict_time_kpix)

_logger = logging.getLogger(__name__)

OBJECTIVES = ("relative-squared", "absolute-squared")
PARAM_NAMES = TimeModelParams.NAMES
# stage-1 design columns, in order
LOG_LINEAR_NAMES = ("xi", "delta", "alpha", "beta", "gamma")


def mape(measured, predicted) -> float:
    """Mean absolute percentage error, in percent."""
    y = np.asarray(measured, dtype=np.float64).ravel()
    yhat = np.asarray(predicted, dtype=np.float64).ravel()
    if y.shape != yhat.shape or y.size == 0:
        raise DomainError(f"MAPE needs equal nonempty inputs, got {y.size} and {yhat.size}")
    if np.any(y == 0):
        raise DomainError("MAPE undefined for a zero measured value")
    return float(100.0 * np.mean(np.abs(y - yhat) / y))


def _ols_line(x: np.ndarray, y: np.ndarray):
    if len(x) < 2:
        raise RankDeficiencyError("line fit needs at least two points")
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    sxx = float(np.dot(dx, dx))
    if sxx == 0.0:
        raise RankDeficiencyError("all abscissae identical; slope undefined")
    slope = float(np.dot(dx, y - ym)) / sxx
    return float(ym - slope * xm), slope


def _relative_line(x: np.ndarray, y: np.ndarray):
    """Line minimizing sum(((y - e0 - p x) / y)^2)."""
    a = np.column_stack([1.0 / y, x / y])
    if len(x) < 2 or np.linalg.matrix_rank(a) < 2:
        raise RankDeficiencyError("all abscissae identical; slope undefined")
    (e0, p), *_ = np.linalg.lstsq(a, np.ones_like(y), rcond=None)
    return float(e0), float(p)


def fit_energy_linear(records: Sequence[EncodingRecord],
                      weighting: str = "ordinary") -> EnergyModelParams:
    """Least-squares line of measured energy against total CPU time.

    ``weighting="ordinary"`` is plain OLS; ``"relative"`` minimizes squared
    relative residuals, which keeps long encodes from dominating the intercept.
    """
    pts = [(r.time_s, r.energy_j) for r in records if r.energy_j is not None]
    if not pts:
        raise RankDeficiencyError("no records carry energy measurements")
    x, y = (np.array(v, dtype=np.float64) for v in zip(*pts))
    if weighting == "ordinary":
        e0, p = _ols_line(x, y)
    elif weighting == "relative":
        e0, p = _relative_line(x, y)
    else:
        raise ConfigurationError(f"unknown energy weighting {weighting!r}")
    return EnergyModelParams(e0, p)


@dataclass(frozen=True)
class FitConfig:
    objective: str = "relative-squared"
    max_iterations: int = 200
    tolerance: float = 1e-12
    init: Optional[TimeModelParams] = None
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {OBJECTIVES}")
        if not self.tolerance > 0 or self.max_iterations < 1:
            raise ConfigurationError("tolerance must be > 0 and max_iterations >= 1")


@dataclass
class FitResult:
    params: TimeModelParams
    objective: float
    stage1_params: TimeModelParams
    stage1_objective: float
    iterations: int
    converged: bool
    fixed: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    train_mape: float = float("nan")

    def metadata(self) -> dict:
        return {
            "objective_value": self.objective,
            "stage1_objective_value": self.stage1_objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "fixed_params": dict(sorted(self.fixed.items())),
            "notes": list(self.notes),
            "train_mape": self.train_mape,
        }


class _Design:
    """Per-record model inputs gathered once per fit."""

    def __init__(self, records, descriptors, spec):
        missing = set()
        cs = []
        for r in records:
            d = None if spec.is_blind else descriptors.get(r.sequence_id)
            if d is None and not spec.is_blind:
                missing.add(r.sequence_id)
                continue
            cs.append(content_factor(d, spec))
        if missing:
            raise JoinError("no descriptors for sequences: " + ", ".join(sorted(missing)), missing)
        self.c = np.array(cs, dtype=np.float64)
        self.n_intra = np.array([r.intra_count for r in records], dtype=np.float64)
        self.crf = np.array([r.crf for r in records], dtype=np.float64)
        self.preset = np.array([r.preset for r in records], dtype=np.float64)
        self.t = np.array([r.time_kpix for r in records], dtype=np.float64)

    def columns(self) -> Dict[str, np.ndarray]:
        return {
            "xi": np.log(self.c),
            "delta": np.log(self.n_intra),
            "alpha": np.log(self.preset),
            "beta": self.preset,
            "gamma": np.ones_like(self.t),
        }


def _objective(resid: np.ndarray) -> float:
    return float(np.dot(resid, resid))


def _residuals(theta: np.ndarray, design: _Design, relative: bool):
    """Residuals and their Jacobian w.r.t. all six parameters."""
    alpha, beta, gamma, delta, xi, t0 = theta
    cols = design.columns()
    with np.errstate(over="ignore", invalid="ignore"):
        g = np.exp(xi * cols["xi"] + delta * cols["delta"] + alpha * cols["alpha"]
                   + beta * cols["beta"] + gamma - np.log(design.crf))
        model = g + t0
        jac_model = np.column_stack([g * cols["alpha"], g * cols["beta"], g, g * cols["delta"],
                                     g * cols["xi"], np.ones_like(g)])
    scale = design.t if relative else 1.0
    resid = (design.t - model) / scale
    jac = -jac_model / (scale[:, None] if relative else 1.0)
    return resid, jac


def _check_coverage(design: _Design):
    pairs = set(zip(design.preset.tolist(), design.crf.tolist()))
    presets = set(design.preset.tolist())
    crfs = set(design.crf.tolist())
    if len(pairs) < 6 or len(presets) < 2 or len(crfs) < 2:
        raise RankDeficiencyError(
            f"need >= 6 distinct (preset, crf) points over >= 2 presets and >= 2 CRFs; "
            f"got {len(pairs)} points, {len(presets)} presets, {len(crfs)} CRFs")


def log_linear_fit(design: _Design, fixed: Mapping[str, float]) -> Dict[str, float]:
    """Closed-form least squares of ln t + ln crf on the stage-1 columns."""
    cols = design.columns()
    target = np.log(design.t) + np.log(design.crf)
    free = [n for n in LOG_LINEAR_NAMES if n not in fixed]
    for name, value in fixed.items():
        if name in cols:
            target = target - value * cols[name]
    a = np.column_stack([cols[n] for n in free])
    rank = np.linalg.matrix_rank(a)
    if rank < len(free):
        raise RankDeficiencyError(f"log-linear design has rank {rank} < {len(free)} "
                                  f"for parameters {free}")
    coef, *_ = np.linalg.lstsq(a, target, rcond=None)
    out = dict(fixed)
    out.update(zip(free, (float(v) for v in coef)))
    return out


def _unidentifiable(design: _Design, spec: ContentFactorSpec, fixed: dict, notes: list) -> dict:
    fixed = dict(fixed)
    cols = design.columns()
    for name in ("xi", "delta"):
        if name in fixed:
            continue
        col = cols[name]
        if np.ptp(col) == 0.0:
            fixed[name] = 0.0
            if not (name == "xi" and spec.is_blind):
                notes.append(f"{name} not identifiable (constant column); fixed to 0")
    return fixed


def _levenberg_marquardt(theta0, free_idx, design, cfg):
    relative = cfg.objective == "relative-squared"
    theta = theta0.copy()
    resid, jac = _residuals(theta, design, relative)
    cost = _objective(resid)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if cost == 0.0:
            converged = True
            break
        active = free_idx
        if theta[5] == 0.0 and 5 in free_idx:
            # t0 pinned at its bound while the gradient pushes it negative
            g_t0 = float(jac[:, 5] @ resid)
            if g_t0 > 0:
                active = free_idx[free_idx != 5]
        j = jac[:, active]
        jtj = j.T @ j
        grad = j.T @ resid
        accepted = False
        while lam < 1e16:
            a = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                step = np.linalg.solve(a, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = theta.copy()
            trial[active] += step
            trial[5] = max(trial[5], 0.0)
            t_resid, t_jac = _residuals(trial, design, relative)
            t_cost = _objective(t_resid)
            if np.isfinite(t_cost) and t_cost < cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left at any damping
            converged = True
            break
        change = (cost - t_cost) / cost
        theta, resid, jac, cost = trial, t_resid, t_jac, t_cost
        lam = max(lam / 10.0, 1e-15)
        if change < cfg.tolerance:
            converged = True
            break
    return theta, cost, it, converged


def fit_time_model(records: Sequence[EncodingRecord], descriptors: Mapping[str, DescriptorSet],
                   spec: ContentFactorSpec, cfg: FitConfig = FitConfig(),
                   fixed: Optional[Mapping[str, float]] = None) -> FitResult:
    """Fit the encoding-time model to measured per-kilopixel times.

    ``fixed`` pins named parameters (e.g. ``{"xi": 1.0}``); pinned values are
    excluded from both stages.
    """
    design = _Design(records, descriptors, spec)
    _check_coverage(design)
    notes: List[str] = []
    fixed = _unidentifiable(design, spec, fixed or {}, notes)

    stage1 = log_linear_fit(design, {k: v for k, v in fixed.items() if k != "t0"})
    stage1["t0"] = 0.0
    stage1_params = TimeModelParams(**stage1)
    relative = cfg.objective == "relative-squared"
    theta0 = stage1_params.as_array()
    cost0 = _objective(_residuals(theta0, design, relative)[0])

    if cfg.init is not None:
        init = cfg.init.as_array()
        for name, value in fixed.items():
            init[PARAM_NAMES.index(name)] = value
        init_cost = _objective(_residuals(init, design, relative)[0])
        if np.isfinite(init_cost) and init_cost < cost0:
            theta0 = init

    free_idx = np.array([i for i, n in enumerate(PARAM_NAMES) if n not in fixed])
    theta, cost, iterations, converged = _levenberg_marquardt(theta0, free_idx, design, cfg)
    if not converged:
        _logger.warning("time-model refinement stopped after %d iterations without meeting "
                        "tolerance; returning best parameters found", iterations)
        notes.append("not converged")
    for note in notes:
        _logger.info("fit %s: %s", spec.label, note)

    params = TimeModelParams.from_array(theta)
    pred = predict_time_kpix(params, design.c, design.n_intra, design.crf, design.preset)
    return FitResult(params=params, objective=cost, stage1_params=stage1_params,
                     stage1_objective=cost0, iterations=iterations, converged=converged,
                     fixed=fixed, notes=notes, train_mape=mape(design.t, pred))


def predict_times(params: TimeModelParams, records: Sequence[EncodingRecord],
                  descriptors: Mapping[str, DescriptorSet], spec: ContentFactorSpec) -> np.ndarray:
    """Predicted total encoding time in seconds for each record."""
    design = _Design(records, descriptors, spec)
    t_kpix = predict_time_kpix(params, design.c, design.n_intra, design.crf, design.preset)
    scale = np.array([r.kilopixels * r.n_frames for r in records])
    return np.atleast_1d(t_kpix) * scale


def predict_energies(ep: EnergyModelParams, predicted_times: np.ndarray) -> np.ndarray:
    return ep.e0 + ep.p * np.asarray(predicted_times)


@dataclass
class OracleFactors:
    factor: Dict[str, float]
    std: Dict[str, float]

    def to_csv(self) -> str:
        lines = ["sequence_id,factor,std"]
        for seq in sorted(self.factor):
            lines.append(f"{seq},{self.factor[seq]!r},{self.std[seq]!r}")
        return "\n".join(lines) + "\n"


def oracle_content_factors(records: Sequence[EncodingRecord], params: TimeModelParams,
                           sequence_ids: Optional[Sequence[str]] = None) -> OracleFactors:
    """Per-sequence mean and spread of measured / content-blind predicted time."""
    ratios: Dict[str, list] = {}
    for r in records:
        pred = predict_time_kpix(params, 1.0, r.intra_count, r.crf, r.preset)
        ratios.setdefault(r.sequence_id, []).append(r.time_kpix / pred)
    for seq in sequence_ids or ():
        if seq not in ratios:
            _logger.warning("sequence %s has no records; excluded from oracle factors", seq)
    factor = {s: float(np.mean(v)) for s, v in sorted(ratios.items())}
    std = {s: float(np.std(v)) for s, v in sorted(ratios.items())}
    return OracleFactors(factor, std)


def fit_oracle(records: Sequence[EncodingRecord], cfg: FitConfig = FitConfig()):
    """Content-blind fit (content exponent pinned to 1) and its oracle factors."""
    blind = ContentFactorSpec()
    fit = fit_time_model(records, {}, blind, cfg, fixed={"xi": 1.0})
    return fit, oracle_content_factors(records, fit.params)


def oracle_bound_mape(records: Sequence[EncodingRecord], params: TimeModelParams,
                      oracle: OracleFactors) -> float:
    """MAPE when each sequence's blind prediction is scaled by its oracle factor."""
    measured, predicted = [], []
    for r in records:
        blind = predict_time_kpix(params, 1.0, r.intra_count, r.crf, r.preset)
        measured.append(r.time_kpix)
        predicted.append(oracle.factor[r.sequence_id] * blind)
    return mape(measured, predicted)


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: Mapping[str, int]
    n_folds: int = 3

    def sequences(self, fold: int) -> List[str]:
        return sorted(s for s, f in self.fold_of.items() if f == fold)

    def validate(self, sequence_ids):
        missing = set(sequence_ids) - set(self.fold_of)
        if missing:
            raise ConfigurationError("sequences without a fold: " + ", ".join(sorted(missing)))
        bad = {s for s, f in self.fold_of.items() if not 0 <= f < self.n_folds}
        if bad:
            raise ConfigurationError("fold index out of range for: " + ", ".join(sorted(bad)))


def assign_folds(class_of: Mapping[str, str], n_folds: int = 3, seed: int = 0) -> FoldAssignment:
    """Deal sequences to folds round-robin within each class.

    Sequences are sorted by id within a class, shuffled with ``seed``, then
    dealt. The dealing position carries over between classes so folds stay
    balanced when class sizes are not multiples of ``n_folds``.
    """
    if n_folds < 2:
        raise ConfigurationError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    by_class: Dict[str, list] = {}
    for seq, cls in class_of.items():
        by_class.setdefault(cls, []).append(seq)
    fold_of = {}
    pos = 0
    for cls in sorted(by_class):
        members = sorted(by_class[cls])
        for i in rng.permutation(len(members)):
            fold_of[members[i]] = pos % n_folds
            pos += 1
    return FoldAssignment(fold_of, n_folds)


def class_map(records: Sequence[EncodingRecord]) -> Dict[str, str]:
    out = {}
    for r in records:
        if out.setdefault(r.sequence_id, r.class_id) != r.class_id:
            raise ConfigurationError(f"sequence {r.sequence_id} listed under two classes")
    return out


def _breakdown(records, measured, predicted, key) -> Dict[int, float]:
    groups: Dict[int, list] = {}
    for i, r in enumerate(records):
        groups.setdefault(getattr(r, key), []).append(i)
    return {k: mape(measured[idx], predicted[idx]) for k, idx in sorted(groups.items())}


@dataclass
class EvaluationReport:
    spec: str
    per_fold_mape: List[float]
    mean_mape: float
    per_preset_mape: Dict[int, float]
    per_crf_mape: Dict[int, float]
    n_records: int
    validation_sequences: List[List[str]]
    train_sequences: List[List[str]]
    energy_per_fold_mape: Optional[List[float]] = None
    energy_mean_mape: Optional[float] = None
    energy_per_preset_mape: Optional[Dict[int, float]] = None
    energy_per_crf_mape: Optional[Dict[int, float]] = None
    energy_mode: Optional[str] = None
    unconverged_folds: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        def keyed(d):
            return None if d is None else {str(k): v for k, v in sorted(d.items())}
        return {
            "spec": self.spec,
            "per_fold_mape": self.per_fold_mape,
            "mean_mape": self.mean_mape,
            "per_preset_mape": keyed(self.per_preset_mape),
            "per_crf_mape": keyed(self.per_crf_mape),
            "n_records": self.n_records,
            "validation_sequences": self.validation_sequences,
            "train_sequences": self.train_sequences,
            "energy_per_fold_mape": self.energy_per_fold_mape,
            "energy_mean_mape": self.energy_mean_mape,
            "energy_per_preset_mape": keyed(self.energy_per_preset_mape),
            "energy_per_crf_mape": keyed(self.energy_per_crf_mape),
            "energy_mode": self.energy_mode,
            "unconverged_folds": self.unconverged_folds,
        }


def cross_validate(records: Sequence[EncodingRecord], descriptors: Mapping[str, DescriptorSet],
                   spec: ContentFactorSpec, cfg: FitConfig, folds: FoldAssignment,
                   energy_mode: Optional[str] = "all") -> EvaluationReport:
    """K-fold evaluation of the time model, and of energy via predicted time.

    ``energy_mode`` is ``"all"`` (energy line fitted once on every record with
    energy), ``"cv"`` (refitted on each training split) or None to skip.
    """
    folds.validate({r.sequence_id for r in records})
    has_energy = energy_mode is not None and any(r.energy_j is not None for r in records)
    if energy_mode not in (None, "all", "cv"):
        raise ConfigurationError(f"energy mode must be 'all' or 'cv', got {energy_mode!r}")
    global_ep = fit_energy_linear(records) if has_energy and energy_mode == "all" else None

    per_fold, e_per_fold = [], []
    val_seqs, train_seqs = [], []
    pooled_idx, pooled_pred, pooled_epred, pooled_eidx = [], [], [], []
    unconverged = []
    for f in range(folds.n_folds):
        train_idx = [i for i, r in enumerate(records) if folds.fold_of[r.sequence_id] != f]
        val_idx = [i for i, r in enumerate(records) if folds.fold_of[r.sequence_id] == f]
        if not val_idx:
            raise ConfigurationError(f"fold {f} has no validation records")
        train = [records[i] for i in train_idx]
        val = [records[i] for i in val_idx]
        val_seqs.append(sorted({r.sequence_id for r in val}))
        train_seqs.append(sorted({r.sequence_id for r in train}))

        fit = fit_time_model(train, descriptors, spec, cfg)
        if not fit.converged:
            unconverged.append(f)
        pred = predict_times(fit.params, val, descriptors, spec)
        per_fold.append(mape([r.time_s for r in val], pred))
        pooled_idx.extend(val_idx)
        pooled_pred.extend(pred.tolist())

        if has_energy:
            ep = global_ep if energy_mode == "all" else fit_energy_linear(train)
            with_e = [k for k, r in enumerate(val) if r.energy_j is not None]
            if with_e:
                epred = predict_energies(ep, pred[with_e])
                e_per_fold.append(mape([val[k].energy_j for k in with_e], epred))
                pooled_eidx.extend(val_idx[k] for k in with_e)
                pooled_epred.extend(epred.tolist())

    pooled = [records[i] for i in pooled_idx]
    measured = np.array([r.time_s for r in pooled])
    predicted = np.array(pooled_pred)
    report = EvaluationReport(
        spec=spec.label,
        per_fold_mape=per_fold,
        mean_mape=float(np.mean(per_fold)),
        per_preset_mape=_breakdown(pooled, measured, predicted, "preset"),
        per_crf_mape=_breakdown(pooled, measured, predicted, "crf"),
        n_records=len(records),
        validation_sequences=val_seqs,
        train_sequences=train_seqs,
        unconverged_folds=unconverged,
    )
    if e_per_fold:
        epooled = [records[i] for i in pooled_eidx]
        emeasured = np.array([r.energy_j for r in epooled])
        epred = np.array(pooled_epred)
        report.energy_per_fold_mape = e_per_fold
        report.energy_mean_mape = float(np.mean(e_per_fold))
        report.energy_per_preset_mape = _breakdown(epooled, emeasured, epred, "preset")
        report.energy_per_crf_mape = _breakdown(epooled, emeasured, epred, "crf")
        report.energy_mode = energy_mode
    return report


GRID_SPATIAL = ("si", "vca", "var")
GRID_TEMPORAL = ("ti", "vca", "flow")
_ROW_LABEL = {"ti": "TI", "vca": "VCA h", "flow": "Optical flow", "ultrafast": "Ultrafast"}
_COL_LABEL = {"si": "SI", "vca": "VCA E", "var": "Variance", "ultrafast": "Ultrafast"}


def grid_specs(spatial_normalizer="ln", temporal_normalizer="identity",
               floor=1e-6) -> List[ContentFactorSpec]:
    specs = [ContentFactorSpec(s, t, spatial_normalizer, temporal_normalizer, floor)
             for t in GRID_TEMPORAL for s in GRID_SPATIAL]
    specs.append(ContentFactorSpec("ultrafast", "ultrafast", "identity", "identity", floor))
    specs.append(ContentFactorSpec("none", "none", spatial_normalizer, temporal_normalizer, floor))
    return specs


@dataclass
class GridCell:
    spec: ContentFactorSpec
    report: Optional[EvaluationReport] = None
    error: Optional[str] = None

    @property
    def time_mape(self):
        return self.report.mean_mape if self.report else None

    @property
    def energy_mape(self):
        return self.report.energy_mean_mape if self.report else None


@dataclass
class GridReport:
    cells: List[GridCell]

    def cell(self, spatial: str, temporal: str) -> GridCell:
        for c in self.cells:
            if (c.spec.spatial_source, c.spec.temporal_source) == (spatial, temporal):
                return c
        raise KeyError(f"{spatial}/{temporal}")

    def best(self, metric: str = "time") -> Optional[GridCell]:
        """Lowest-error content-aware cell (the content-blind baseline excluded)."""
        scored = [(getattr(c, f"{metric}_mape"), i) for i, c in enumerate(self.cells)
                  if not c.spec.is_blind and getattr(c, f"{metric}_mape") is not None]
        return self.cells[min(scored)[1]] if scored else None

    def to_dict(self) -> dict:
        return {"cells": [{"spec": c.spec.label,
                           "time_mape": c.time_mape,
                           "energy_mape": c.energy_mape,
                           "error": c.error,
                           "report": c.report.to_dict() if c.report else None}
                          for c in self.cells]}

    def table(self, metric: str = "time") -> str:
        """Aligned text table, temporal sources as rows and spatial as columns."""
        best = self.best(metric)

        def fmt(cell):
            value = getattr(cell, f"{metric}_mape")
            if value is None:
                return "n/a"
            mark = "*" if cell is best else ""
            return f"{value:.2f}{mark}"

        cols = list(GRID_SPATIAL) + ["ultrafast"]
        width = 14
        lines = ["".ljust(width) + "".join(_COL_LABEL[c].rjust(width) for c in cols)]
        for t in list(GRID_TEMPORAL) + ["ultrafast"]:
            row = _ROW_LABEL[t].ljust(width)
            for s in cols:
                if (s == "ultrafast") != (t == "ultrafast"):
                    row += "-".rjust(width)
                else:
                    row += fmt(self.cell(s, t)).rjust(width)
            lines.append(row)
        lines.append("No content".ljust(width) + fmt(self.cell("none", "none")).rjust(width))
        return "\n".join(lines) + "\n"


def descriptor_grid_evaluation(records: Sequence[EncodingRecord],
                               descriptors: Mapping[str, DescriptorSet], cfg: FitConfig,
                               folds: FoldAssignment, energy_mode: Optional[str] = "all",
                               specs: Optional[Sequence[ContentFactorSpec]] = None) -> GridReport:
    """Cross-validate every spatial/temporal descriptor pairing."""
    cells = []
    for spec in specs or grid_specs():
        try:
            report = cross_validate(records, descriptors, spec, cfg, folds, energy_mode)
            cells.append(GridCell(spec, report))
        except (ConfigurationError, RankDeficiencyError, DomainError) as exc:
            _logger.warning("grid cell %s unavailable: %s", spec.label, exc)
            cells.append(GridCell(spec, error=str(exc)))
    return GridReport(cells)
