"""Seeded closed-loop trial execution, Monte-Carlo batches, and CSV emission.

A trial alternates design -> apply first input -> measure -> update filters
and beliefs -> decision check, stopping when one model probability exceeds the
decision threshold or after ``max_steps`` measurements.  Everything is
deterministic given the seed: per-trial substreams are counter-based Philox
generators keyed by (base_seed, method, true model, replicate), so results do
not depend on scheduling order and worker pools merge deterministically.
"""

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .beliefs import BeliefState, decide, gaussian_loglik, update_beliefs
from .bhattacharyya import all_pairs, pair_quadratic, prefix_pair_sets
from .concavity import level_offset, spectrum
from .design import (BoxRatePolytope, ConstraintSet, EnergyBallProduct,
                     design_bc, design_bd, design_ol, design_qta, design_sbc,
                     feasible_clip)
from .estimation import FilterState, kf_step
from .models import NoiseModel, StateSpaceModel, build_lifted

METHODS = ("ol", "bd", "qta", "bc", "sbc")
#: stable ids used in seed derivation; "zero" is the no-auxiliary-input baseline
_METHOD_ID = {"ol": 0, "bd": 1, "qta": 2, "bc": 3, "sbc": 4, "zero": 5}

SUMMARY_COLUMNS = ("method", "true_model", "trial", "decided", "correct",
                   "steps", "mean_design_ms", "certified_fraction")


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one discrimination experiment."""

    models: tuple
    noises: tuple
    constraint: ConstraintSet
    horizon: int
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    priors: np.ndarray
    decision_threshold: float = 0.98
    max_steps: int = 400
    method: str = "bc"
    ol_horizon: int = 200
    ol_starts: int = 20
    true_model: int | None = None
    seed: int = 0
    sample_initial_state: bool = True
    # optional per-model overrides of the initial filter state; used when the
    # hypotheses condition on different histories (e.g. a loop at steady state)
    init_means: tuple | None = None
    init_covs: tuple | None = None

    def __post_init__(self):
        if not (0.0 < self.decision_threshold < 1.0):
            raise ValueError("decision threshold must lie in (0, 1)")
        if self.max_steps < self.horizon:
            raise ValueError("max_steps must be at least the horizon")
        if len(self.models) != len(self.noises):
            raise ValueError("one noise model per candidate model is required")
        priors = np.asarray(self.priors, dtype=float)
        if abs(priors.sum() - 1.0) > 1e-9 or np.any(priors < 0):
            raise ValueError("initial probabilities must be a distribution")
        if self.method not in _METHOD_ID:
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "noises", tuple(self.noises))
        object.__setattr__(self, "x0_mean", np.asarray(self.x0_mean, dtype=float).reshape(-1))
        object.__setattr__(self, "x0_cov", np.asarray(self.x0_cov, dtype=float))
        object.__setattr__(self, "priors", priors)
        if self.init_means is not None:
            object.__setattr__(self, "init_means",
                               tuple(np.asarray(m, dtype=float).reshape(-1)
                                     for m in self.init_means))
        if self.init_covs is not None:
            object.__setattr__(self, "init_covs",
                               tuple(np.asarray(c, dtype=float) for c in self.init_covs))

    @property
    def n_models(self) -> int:
        return len(self.models)

    def initial_filter(self, i: int) -> FilterState:
        mean = self.init_means[i] if self.init_means is not None else self.x0_mean
        cov = self.init_covs[i] if self.init_covs is not None else self.x0_cov
        return FilterState(mean, cov)


@dataclass(frozen=True)
class TrialRecord:
    """Everything one trial produced, row material for the CSV outputs."""

    trial_id: str
    method: str
    true_model: int
    decided: int | None
    steps: int
    inputs: np.ndarray
    outputs: np.ndarray
    beliefs: np.ndarray
    certificates: tuple
    design_ms: np.ndarray

    @property
    def correct(self) -> bool:
        return self.decided is not None and self.decided == self.true_model

    @property
    def certified_fraction(self) -> float | None:
        flags = [c for c in self.certificates if c != "na"]
        if not flags:
            return None
        return sum(c == "yes" for c in flags) / len(flags)

    @property
    def mean_design_ms(self) -> float:
        return float(np.mean(self.design_ms)) if self.design_ms.size else 0.0


def _psd_factor(M: np.ndarray) -> np.ndarray:
    """Factor F with F F' = M for PSD (possibly singular) M."""
    M = 0.5 * (M + M.T)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        val, vec = np.linalg.eigh(M)
        if val.min() < -1e-8 * max(1.0, abs(val.max())):
            raise ValueError("covariance is not PSD") from None
        val = np.clip(val, 0.0, None)
        return vec * np.sqrt(val)


def simulate_step(true_model: StateSpaceModel, noise: NoiseModel, x, u, rng,
                  factor: np.ndarray | None = None):
    """One plant step: y = C x + v, x_next = A x + B u + w, (v, w) joint."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if factor is None:
        factor = _psd_factor(noise.joint)
    draw = factor @ rng.standard_normal(factor.shape[1])
    n_y = true_model.n_y
    v, w = draw[:n_y], draw[n_y:]
    y = true_model.C @ x + v
    x_next = true_model.A @ x + true_model.B @ u + w
    return x_next, y


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def trial_seed_sequence(base_seed: int, method: str, true_model: int,
                        replicate: int) -> np.random.SeedSequence:
    """Substream key: independent of scheduling and of the other methods."""
    return np.random.SeedSequence([int(base_seed), _METHOD_ID[method],
                                   int(true_model), int(replicate)])


def compute_ol_sequence(cfg: ExperimentConfig) -> np.ndarray:
    """The open-loop sequence for a configuration (shared across its trials)."""
    rng = _rng_from(np.random.SeedSequence([int(cfg.seed), _METHOD_ID["ol"], 0xA11CE]))
    filters = [cfg.initial_filter(i) for i in range(cfg.n_models)]
    return design_ol(cfg.models, cfg.noises, cfg.constraint, filters, cfg.priors,
                     horizon=cfg.ol_horizon, n_starts=cfg.ol_starts, rng=rng)


def _step_constraint(cfg: ExperimentConfig, u_prev: np.ndarray) -> ConstraintSet:
    if isinstance(cfg.constraint, BoxRatePolytope):
        return replace(cfg.constraint, u_prev=tuple(u_prev))
    return cfg.constraint


def _design(method: str, lifts, belief: BeliefState, cs: ConstraintSet, rng):
    if method == "bd":
        return design_bd(all_pairs(lifts, belief.filters), cs, rng)
    if method == "qta":
        return design_qta(all_pairs(lifts, belief.filters), belief, cs, rng)
    if method == "bc":
        return design_bc(all_pairs(lifts, belief.filters), belief, cs, rng)
    if method == "sbc":
        return design_sbc(prefix_pair_sets(lifts, belief.filters), belief, cs, rng)
    raise ValueError(f"unknown design method {method!r}")


def run_trial(cfg: ExperimentConfig, true_index: int, seed,
              ol_sequence: np.ndarray | None = None,
              trial_id: str | None = None) -> TrialRecord:
    """Run one seeded closed-loop discrimination trial."""
    if not 0 <= true_index < cfg.n_models:
        raise ValueError("true model index out of range")
    method = cfg.method
    rng = _rng_from(seed)
    n_u = cfg.constraint.n_u
    n_m = cfg.n_models

    lifts = [build_lifted(mdl, nz, cfg.horizon)
             for mdl, nz in zip(cfg.models, cfg.noises)]
    filters = [cfg.initial_filter(i) for i in range(n_m)]
    belief = BeliefState(np.log(cfg.priors), tuple(filters))

    true_model = cfg.models[true_index]
    true_noise = cfg.noises[true_index]
    factor = _psd_factor(true_noise.joint)
    init = filters[true_index]
    if cfg.sample_initial_state:
        x = init.x_pred + _psd_factor(init.Xi_pred) @ rng.standard_normal(init.x_pred.size)
    else:
        x = init.x_pred.copy()

    if method == "ol" and ol_sequence is None:
        ol_sequence = compute_ol_sequence(cfg)

    inputs, outputs, beliefs, certs, design_ms = [], [], [], [], []
    u_prev = np.zeros(n_u)
    decided = decide(belief, cfg.decision_threshold)
    steps = 0

    if decided is None:
        for k in range(cfg.max_steps):
            t0 = time.perf_counter()
            if method == "zero":
                cs = cfg.constraint
                center = (np.asarray(cs.center) if isinstance(cs, EnergyBallProduct)
                          else np.zeros(n_u))
                u_step, cert = center, "na"
            elif method == "ol":
                pos = k % cfg.ol_horizon
                raw = ol_sequence[pos * n_u:(pos + 1) * n_u]
                if isinstance(cfg.constraint, BoxRatePolytope):
                    one = replace(cfg.constraint, u_prev=tuple(u_prev), horizon=1)
                    u_step = feasible_clip(one, raw)
                else:
                    u_step = raw
                cert = "na"
            else:
                cs = _step_constraint(cfg, u_prev)
                result = _design(method, lifts, belief, cs, rng)
                u_step, cert = result.first_input, result.certified_concave
            design_ms.append(1e3 * (time.perf_counter() - t0))

            try:
                x, y = simulate_step(true_model, true_noise, x, u_step, rng, factor)
                logliks = np.empty(n_m)
                new_filters = []
                for i in range(n_m):
                    fs, mean, cov = kf_step(belief.filters[i], cfg.models[i],
                                            cfg.noises[i], u_step, y)
                    logliks[i] = gaussian_loglik(y, mean, cov)
                    new_filters.append(fs)
                belief = update_beliefs(belief, logliks)
                belief = replace(belief, filters=tuple(new_filters))
            except (ValueError, np.linalg.LinAlgError) as exc:
                raise RuntimeError(f"numeric failure at step {k}: {exc}") from exc

            inputs.append(np.asarray(u_step, dtype=float))
            outputs.append(y)
            beliefs.append(belief.probs)
            certs.append(cert)
            u_prev = np.asarray(u_step, dtype=float)
            steps = k + 1
            decided = decide(belief, cfg.decision_threshold)
            if decided is not None:
                break

    return TrialRecord(
        trial_id=trial_id or f"{method}-m{true_index}",
        method=method,
        true_model=true_index,
        decided=decided,
        steps=steps,
        inputs=np.array(inputs).reshape(len(inputs), n_u),
        outputs=np.array(outputs).reshape(len(outputs), true_model.n_y),
        beliefs=np.array(beliefs).reshape(len(beliefs), n_m),
        certificates=tuple(certs),
        design_ms=np.array(design_ms),
    )


def _mc_job(args):
    cfg, method, model_idx, rep, base_seed, ol_seq = args
    cfg_m = replace(cfg, method=method)
    seed = trial_seed_sequence(base_seed, method, model_idx, rep)
    tid = f"{method}-m{model_idx}-r{rep}"
    return run_trial(cfg_m, model_idx, seed, ol_sequence=ol_seq, trial_id=tid)


def run_monte_carlo(cfg: ExperimentConfig, methods, runs_per_model: int,
                    base_seed: int, workers: int = 1, out_dir=None):
    """Independent seeded trials per (method, true model, replicate).

    Returns (records, summary) where summary maps each method to its median
    steps-to-decision, decide rate, accuracy among decided trials, mean design
    time, and mean certified fraction.  Writes ``summary.csv`` when ``out_dir``
    is given.
    """
    if runs_per_model < 1:
        raise ValueError("runs_per_model must be >= 1")
    for m in methods:
        if m not in _METHOD_ID:
            raise ValueError(f"unknown method {m!r}")
    model_indices = ([cfg.true_model] if cfg.true_model is not None
                     else list(range(cfg.n_models)))
    ol_seq = compute_ol_sequence(replace(cfg, seed=base_seed)) if "ol" in methods else None

    jobs = [(replace(cfg, seed=base_seed), method, mi, rep, base_seed,
             ol_seq if method == "ol" else None)
            for method in methods for mi in model_indices
            for rep in range(runs_per_model)]

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_mc_job, jobs, chunksize=4))
    else:
        records = [_mc_job(j) for j in jobs]

    summary = summarize(records)
    if out_dir is not None:
        import pathlib
        out = pathlib.Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(out / "summary.csv", records)
    return records, summary


def summarize(records) -> dict:
    """Per-method aggregates of a record batch."""
    out = {}
    for method in dict.fromkeys(r.method for r in records):
        rs = [r for r in records if r.method == method]
        steps = np.array([r.steps for r in rs])
        decided = [r for r in rs if r.decided is not None]
        fracs = [r.certified_fraction for r in rs if r.certified_fraction is not None]
        out[method] = {
            "trials": len(rs),
            "median_steps": float(np.median(steps)),
            "decide_rate": len(decided) / len(rs),
            "accuracy": (sum(r.correct for r in decided) / len(decided)
                         if decided else None),
            "mean_design_ms": float(np.mean([r.mean_design_ms for r in rs])),
            "certified_fraction": float(np.mean(fracs)) if fracs else None,
        }
    return out


# ---------------------------------------------------------------------------
# concavity sweep
# ---------------------------------------------------------------------------

def concavity_sweep(base_cfg: ExperimentConfig, R_scales, C_scales, u_fixed):
    """Pass/fail grid of the concavity condition over noise level and model gap.

    For each (R scale, C scale) the pair is the base model against a copy with
    its output matrix multiplied by the C scale; the condition is evaluated at
    the fixed input with the initial-condition filter states.
    """
    u_fixed = np.asarray(u_fixed, dtype=float).reshape(-1)
    base = base_cfg.models[0]
    nz = base_cfg.noises[0]
    fs = FilterState(base_cfg.x0_mean, base_cfg.x0_cov)
    rows = []
    for r in R_scales:
        noise = NoiseModel(nz.Q, float(r) * np.eye(base.n_y), nz.S)
        lift0 = build_lifted(base, noise, base_cfg.horizon)
        for s in C_scales:
            other = StateSpaceModel(base.A, base.B, float(s) * base.C)
            lift1 = build_lifted(other, noise, base_cfg.horizon)
            pq = pair_quadratic(lift0, lift1, fs, fs)
            spec = spectrum(pq)
            val = float(u_fixed @ pq.H @ u_fixed + pq.c @ u_fixed
                        + level_offset(pq, spec))
            rows.append((float(r), float(s), val <= 0.5))
    return rows


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def write_summary_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for r in records:
            frac = r.certified_fraction
            writer.writerow([
                r.method, r.true_model, r.trial_id,
                -1 if r.decided is None else r.decided,
                int(r.correct), r.steps,
                f"{r.mean_design_ms:.6f}",
                "" if frac is None else f"{frac:.6f}",
            ])


def write_trace_csv(path, record: TrialRecord) -> None:
    n_u = record.inputs.shape[1]
    n_y = record.outputs.shape[1]
    n_m = record.beliefs.shape[1]
    header = (["step"] + [f"u_{i}" for i in range(n_u)]
              + [f"y_{i}" for i in range(n_y)]
              + [f"P_{i}" for i in range(n_m)] + ["certified"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(record.steps):
            writer.writerow([k + 1]
                            + [repr(float(v)) for v in record.inputs[k]]
                            + [repr(float(v)) for v in record.outputs[k]]
                            + [repr(float(v)) for v in record.beliefs[k]]
                            + [record.certificates[k]])


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["R", "scale", "pass"])
        for r, s, ok in rows:
            writer.writerow([repr(float(r)), repr(float(s)), int(ok)])
