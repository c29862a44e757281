"""Experiment configuration, multi-seed runs and trace summaries.

A run writes, into the output directory,

* ``<agent>__seed<k>.csv``: one training trace per (agent, seed),
* ``<agent>__aggregate.csv``: per-row mean and population std over seeds,
* ``manifest.json``: the fully resolved config, code version and file list.

Sample traces have columns ``SAMPLE_COLUMNS`` (x axis ``env_steps``, metric
``exact_J``); DP traces have ``DP_COLUMNS`` (x axis ``iteration``, metric
``J``). Aggregate files keep the x column and add ``<col>_mean`` and
``<col>_std`` for every other column.
"""
from __future__ import annotations

import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .agents.dp import DP_COLUMNS, DpAgentConfig, run_dp
from .agents.sample import ALGORITHMS, SAMPLE_COLUMNS, SampleAgentConfig, run_sample_agent
from .envs import FOURROOM_ROWS, DEFAULT_GOAL, FourRoomSpec, fourroom_mdp, random_mdp
from .mdp import TabularMdp, load_mdp
from .trace import TrainingTrace
from .verify.oracles import optimal_objective

MODES = ("dp", "sample", "verify")
AGENT_NAME = re.compile(r"^[A-Za-z0-9_.+-]+$")
TRACE_FILE = re.compile(r"^(?P<agent>.+)__seed(?P<seed>-?\d+)\.csv$")

AXES = {"sample": ("env_steps", "exact_J"), "dp": ("iteration", "J")}

DEFAULT_DP_AGENTS = (
    ("PG+Exact", "PG", "ExactEvaluation"),
    ("PG+BR", "PG", "BellmanResidualFull"),
    ("PG+TD", "PG", "TemporalDifferenceSemi"),
    ("ActorO+BR", "ActorO", "BellmanResidualFull"),
    ("ActorO+TD", "ActorO", "TemporalDifferenceSemi"),
    ("ActorG+BR", "ActorG", "BellmanResidualFull"),
    ("ActorG+TD", "ActorG", "TemporalDifferenceSemi"),
)


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class SchemaError(ValueError):
    """Trace files that cannot be summarized together."""


@dataclass
class AgentSpec:
    name: str
    config: object

    def to_dict(self) -> dict:
        return {"name": self.name, **self.config.to_dict()}


@dataclass
class ExperimentConfig:
    mode: str = "sample"
    env: dict = field(default_factory=lambda: {"name": "fourroom"})
    agents: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    out: Optional[str] = None
    threshold: float = 0.9
    verify: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "env": dict(self.env),
            "agents": [a.to_dict() for a in self.agents],
            "seeds": list(self.seeds),
            "out": self.out,
            "threshold": self.threshold,
            "verify": dict(self.verify),
        }


def _default_agents(mode: str) -> list[dict]:
    if mode == "sample":
        return [{"name": alg, "algorithm": alg} for alg in ALGORITHMS]
    if mode == "dp":
        return [{"name": n, "actor_rule": a, "critic_rule": c} for n, a, c in DEFAULT_DP_AGENTS]
    return []


def _agent_spec(mode: str, raw: dict, gamma: float) -> AgentSpec:
    raw = dict(raw)
    if mode == "sample":
        raw.setdefault("gamma", gamma)
        name = raw.pop("name", raw.get("algorithm", "ResAC"))
        cls = SampleAgentConfig
    else:
        name = raw.pop("name", f"{raw.get('actor_rule', 'PG')}+{raw.get('critic_rule', 'ExactEvaluation')}")
        cls = DpAgentConfig
    if not isinstance(name, str) or not AGENT_NAME.match(name):
        raise ConfigError(f"agent name {name!r} must match {AGENT_NAME.pattern}")
    try:
        return AgentSpec(name, cls(**raw))
    except TypeError as exc:
        raise ConfigError(f"agent {name}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"agent {name}: {exc}") from None


def build_env(env: dict) -> TabularMdp:
    """MDP from an env section: ``fourroom``, ``random`` or ``file``."""
    kind = env.get("name", "fourroom")
    try:
        if kind == "fourroom":
            spec = FourRoomSpec(grid=tuple(env.get("grid", FOURROOM_ROWS)),
                                goal_cell=tuple(env.get("goal", DEFAULT_GOAL)),
                                gamma=float(env.get("gamma", 0.9)))
            return fourroom_mdp(spec)
        if kind == "random":
            return random_mdp(int(env["n_states"]), int(env["n_actions"]), seed=int(env.get("seed", 0)),
                              reward_scale=float(env.get("reward_scale", 1.0)),
                              gamma=float(env.get("gamma", 0.9)))
        if kind == "file":
            return load_mdp(env["path"])
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"env {kind}: {exc}") from None
    raise ConfigError(f"unknown env {kind!r}; expected fourroom, random or file")


def parse_config(data: dict, seeds=None, out=None, agents=None) -> ExperimentConfig:
    """Validate a config dict, applying CLI overrides; raises ``ConfigError``."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - {"mode", "env", "agents", "seeds", "out", "threshold", "verify"}
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    mode = data.get("mode", "sample")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    env = dict(data.get("env", {"name": "fourroom"}))
    seeds = list(data.get("seeds", [0, 1, 2]) if seeds is None else seeds)
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be a non-empty list of integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    threshold = data.get("threshold", 0.9)
    if not isinstance(threshold, (int, float)) or not 0 < threshold <= 1:
        raise ConfigError("threshold must lie in (0, 1]")
    cfg = ExperimentConfig(mode=mode, env=env, seeds=seeds, out=out or data.get("out"),
                           threshold=float(threshold), verify=dict(data.get("verify", {})))
    if mode == "verify":
        return cfg
    mdp = build_env(env)
    raw_agents = data.get("agents") or _default_agents(mode)
    specs = [_agent_spec(mode, a, mdp.gamma) for a in raw_agents]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate agent names in {names}")
    if agents:
        missing = set(agents) - set(names)
        if missing:
            raise ConfigError(f"--agent names not in config: {sorted(missing)}")
        specs = [s for s in specs if s.name in agents]
    if mode == "sample":
        for s in specs:
            if abs(s.config.gamma - mdp.gamma) > 1e-15:
                raise ConfigError(f"agent {s.name}: gamma {s.config.gamma} differs from env gamma {mdp.gamma}")
    cfg.agents = specs
    return cfg


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(data, **overrides)


def code_version() -> dict:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {"package": "acgap", "version": version, "kernel_backend": kernels.BACKEND,
            "numpy": np.__version__}


def trace_filename(agent: str, seed: int) -> str:
    return f"{agent}__seed{seed}.csv"


def _run_one(job) -> str:
    mode, env, agent, seed, out_dir = job
    mdp = build_env(env)
    if mode == "sample":
        trace = run_sample_agent(mdp, agent.config, seed)
    else:
        trace = run_dp(mdp, agent.config, seed)
    path = Path(out_dir) / trace_filename(agent.name, seed)
    trace.to_csv(path)
    return path.name


def aggregate_traces(traces: list[TrainingTrace], x_column: str) -> TrainingTrace:
    """Row-wise mean and population std over seeds (NaN cells are skipped)."""
    if not traces:
        raise SchemaError("nothing to aggregate")
    cols = traces[0].columns
    lengths = {len(t) for t in traces}
    if any(t.columns != cols for t in traces) or len(lengths) != 1:
        raise SchemaError("traces differ in columns or length")
    x = traces[0].column(x_column)
    if any(not np.array_equal(t.column(x_column), x) for t in traces):
        raise SchemaError(f"traces disagree on {x_column}")
    metrics = [c for c in cols if c != x_column]
    out = TrainingTrace([x_column] + [f"{c}_{s}" for c in metrics for s in ("mean", "std")])
    stacked = {c: np.vstack([t.column(c) for t in traces]) for c in metrics}
    for i in range(len(x)):
        row = {x_column: int(x[i])}
        for c in metrics:
            vals = stacked[c][:, i]
            vals = vals[~np.isnan(vals)]
            row[f"{c}_mean"] = float(np.mean(vals)) if vals.size else None
            row[f"{c}_std"] = float(np.std(vals)) if vals.size else None
        out.append(**row)
    return out


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run every (agent, seed) pair and write traces, aggregates and manifest.

    Returns the manifest dict.
    """
    if config.mode == "verify":
        raise ConfigError("verify mode is handled by the verify command")
    out = Path(out_dir or config.out or "results")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}") from None
    mdp = build_env(config.env)
    work = [(config.mode, config.env, a, s, str(out)) for a in config.agents for s in config.seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            files = list(pool.map(_run_one, work))
    else:
        files = [_run_one(w) for w in work]
    x_col = AXES[config.mode][0]
    aggregates = []
    for agent in config.agents:
        traces = [TrainingTrace.from_csv(out / trace_filename(agent.name, s)) for s in config.seeds]
        name = f"{agent.name}__aggregate.csv"
        aggregate_traces(traces, x_col).to_csv(out / name)
        aggregates.append(name)
    manifest = {
        "config": config.to_dict(),
        "code": code_version(),
        "env": {"n_states": mdp.n_states, "n_actions": mdp.n_actions, "gamma": mdp.gamma,
                "optimal_J": optimal_objective(mdp)},
        "columns": list(SAMPLE_COLUMNS if config.mode == "sample" else DP_COLUMNS),
        "traces": files,
        "aggregates": aggregates,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


# -- summaries -------------------------------------------------------------------

@dataclass
class AgentSummary:
    agent: str
    seeds: int
    final_mean: float
    final_std: float
    steps_to_threshold: Optional[float]
    reached: int


def _steps_to(x: np.ndarray, y: np.ndarray, target: float) -> Optional[float]:
    hit = np.nonzero(y >= target)[0]
    return float(x[hit[0]]) if hit.size else None


def _group_traces(paths) -> dict[str, list[Path]]:
    groups: dict[str, list[Path]] = {}
    for p in sorted(Path(p) for p in paths):
        m = TRACE_FILE.match(p.name)
        groups.setdefault(m.group("agent") if m else p.stem, []).append(p)
    return groups


def summarize(paths, threshold: float = 0.9, optimal_j: Optional[float] = None,
              reference: str = "auto") -> dict:
    """Per-agent final mean/std, steps-to-threshold and pairwise ordering.

    ``reference="jstar"`` measures steps until ``threshold * optimal_j``;
    ``"own"`` uses each seed's own final value; ``"auto"`` picks ``jstar``
    when ``optimal_j`` is known.
    """
    groups = _group_traces(paths)
    if not groups:
        raise SchemaError("no trace files given")
    if reference == "auto":
        reference = "jstar" if optimal_j is not None else "own"
    if reference not in ("jstar", "own"):
        raise ValueError("reference must be 'jstar', 'own' or 'auto'")
    if reference == "jstar" and optimal_j is None:
        raise ValueError("reference 'jstar' needs optimal_j")
    schema = None
    summaries = []
    for agent, files in groups.items():
        traces = [TrainingTrace.from_csv(f) for f in files]
        cols = traces[0].columns
        if schema is None:
            schema = cols
        if any(t.columns != schema for t in traces):
            raise SchemaError(f"{agent}: columns differ from {list(schema)}")
        if "exact_J" in cols and "env_steps" in cols:
            x_col, y_col = "env_steps", "exact_J"
        elif "J" in cols and "iteration" in cols:
            x_col, y_col = "iteration", "J"
        else:
            raise SchemaError(f"{agent}: no recognised return column in {list(cols)}")
        finals, steps = [], []
        for t in traces:
            y = t.column(y_col)
            if y.size == 0:
                raise SchemaError(f"{agent}: empty trace")
            finals.append(y[-1])
            target = threshold * (optimal_j if reference == "jstar" else y[-1])
            steps.append(_steps_to(t.column(x_col), y, target))
        reached = [s for s in steps if s is not None]
        summaries.append(AgentSummary(
            agent=agent, seeds=len(traces), final_mean=float(np.mean(finals)),
            final_std=float(np.std(finals)),
            steps_to_threshold=float(np.mean(reached)) if reached else None,
            reached=len(reached),
        ))
    ordering = []
    for i, a in enumerate(summaries):
        for b in summaries[i + 1:]:
            rel = "=" if a.final_mean == b.final_mean else (">" if a.final_mean > b.final_mean else "<")
            ordering.append((a.agent, rel, b.agent))
    return {"threshold": threshold, "reference": reference, "optimal_J": optimal_j,
            "agents": summaries, "ordering": ordering}


def format_summary(summary: dict) -> str:
    ref = "J*" if summary["reference"] == "jstar" else "own final"
    lines = [f"{'agent':<16}{'seeds':>6}{'final mean':>14}{'std':>12}"
             f"{'steps to ' + format(summary['threshold'], '.0%') + ' ' + ref:>28}"]
    for s in summary["agents"]:
        steps = "never" if s.steps_to_threshold is None else f"{s.steps_to_threshold:.1f} ({s.reached}/{s.seeds})"
        lines.append(f"{s.agent:<16}{s.seeds:>6}{s.final_mean:>14.6f}{s.final_std:>12.6f}{steps:>28}")
    for a, rel, b in summary["ordering"]:
        lines.append(f"{a} {rel} {b}" + ("  (tie)" if rel == "=" else ""))
    return "\n".join(lines)
