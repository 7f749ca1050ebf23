"""The iteration loop: prompt, complete, extract, parse, fit, store, feed back.

One engine run drives a single conversation-free loop against a backend:
iteration 1 sends the initial prompt, later iterations embed feedback selected
from the candidate store. Every raw response (scratchpad text included) is
kept in the run log, and a log replays deterministically through a scripted
backend built from its own responses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .data import Dataset, load_builtin
from .expressions import (
    Expression,
    ExpressionSyntaxError,
    ImplicitFormError,
    OperatorSet,
    UnknownOperatorError,
    canonicalize,
    complexity,
    render,
    sr_equivalent,
)
from .llm import (
    BackendError,
    ChatRequest,
    HttpBackend,
    ScriptedBackend,
    TokenUsage,
)
from .optimize import (
    FitConfig,
    NoFiniteObjectiveError,
    TooManyConstantsError,
    repeat_fit,
)
from .pareto import Candidate, CandidateStore, FeedbackPolicy, to_feedback_json
from .parsing import parse
from .prompts import (
    PromptConfig,
    build_initial,
    build_iteration,
    build_system,
    extract_expressions,
    make_data_view,
    operator_note,
    retry_reminder,
)


class ConfigError(Exception):
    """The run configuration cannot be executed as given."""


class BackendFailure(Exception):
    """The backend gave up mid-run; carries the partial log."""

    def __init__(self, message: str, log: "RunLog"):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"  # "http" | "scripted"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    key_env_var: str = "OPENAI_API_KEY"
    timeout: float = 120.0
    max_retries: int = 3
    max_tokens: int | None = None
    transcript: str | None = None


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs; serialized next to its log for replay."""

    dataset: str
    operators: str | OperatorSet = "easy"
    prompt: PromptConfig = PromptConfig()
    policy: FeedbackPolicy = FeedbackPolicy.standard()
    fit: FitConfig = FitConfig()
    iterations: int = 15
    runs: int = 5
    backend: BackendConfig = BackendConfig()
    temperature: float = 0.7
    seed: int = 0
    subsample: int | None = None
    score_mode: str = "cumulative"  # or "front"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.score_mode not in ("cumulative", "front"):
            raise ValueError(f"unknown score mode {self.score_mode!r}")


@dataclass
class ParseOutcome:
    text: str
    status: str  # fitted | duplicate | syntax_error | unknown_operator |
    #              implicit_form | operator_rejected | missing_variables |
    #              too_many_constants | unfittable
    detail: str = ""


@dataclass
class IterationRecord:
    index: int
    prompt: str
    responses: list[str]
    extracted: list[str]
    outcomes: list[ParseOutcome]
    candidates: list[Candidate]
    prompt_tokens: int
    completion_tokens: int
    target_on_front: bool


@dataclass
class RunLog:
    """Append-only record of one run plus the final store snapshot."""

    dataset_id: str
    config: dict
    records: list[IterationRecord] = field(default_factory=list)
    store: CandidateStore = field(default_factory=CandidateStore)
    rediscovery_iteration: int | None = None
    error: str | None = None

    @property
    def usage(self) -> TokenUsage:
        u = TokenUsage()
        for rec in self.records:
            u.prompt_tokens += rec.prompt_tokens
            u.completion_tokens += rec.completion_tokens
        return u


def resolve_operator_set(spec: str | OperatorSet, dataset: Dataset) -> OperatorSet:
    if isinstance(spec, OperatorSet):
        return spec
    if spec == "easy":
        return OperatorSet.easy(dataset.easy_extra_ops)
    if spec == "hard":
        return OperatorSet.hard(dataset.easy_extra_ops)
    raise ConfigError(f"unknown operator set {spec!r}")


def make_backend(bcfg: BackendConfig):
    if bcfg.kind == "scripted":
        if not bcfg.transcript:
            raise ConfigError("scripted backend needs a transcript path")
        return ScriptedBackend.from_file(bcfg.transcript)
    if bcfg.kind == "http":
        return HttpBackend(
            endpoint=bcfg.endpoint,
            model=bcfg.model,
            key_env_var=bcfg.key_env_var,
            timeout=bcfg.timeout,
            max_retries=bcfg.max_retries,
        )
    raise ConfigError(f"unknown backend kind {bcfg.kind!r}")


def check_rediscovery(cand: Candidate, target: Expression) -> bool:
    """Structural match of canonical forms only: a free-exponent power never
    matches a fixed-exponent target."""
    return sr_equivalent(cand.expr, target)


def run(cfg: RunConfig, dataset: Dataset | None = None, backend=None) -> RunLog:
    """Execute one run. A malformed candidate never aborts the loop: it is
    logged and skipped. Backend failure raises BackendFailure carrying the
    partial log."""
    dataset = dataset if dataset is not None else load_builtin(cfg.dataset)
    opset = resolve_operator_set(cfg.operators, dataset)
    pcfg = cfg.prompt
    if not pcfg.operator_note:
        pcfg = replace(pcfg, operator_note=operator_note(opset))
    if backend is None:
        backend = make_backend(cfg.backend)
    view = make_data_view(dataset, pcfg.rounding_decimals, cfg.subsample, seed=cfg.seed)
    system = build_system()
    target_canonical = canonicalize(dataset.target) if dataset.target is not None else None
    required_vars = frozenset(range(1, len(dataset.variables) + 1))

    resolved = replace(cfg, prompt=pcfg, operators=opset)
    log = RunLog(dataset_id=dataset.id, config=config_to_dict(resolved))

    try:
        for iteration in range(1, cfg.iterations + 1):
            if iteration == 1:
                user = build_initial(view, dataset.context, pcfg)
            else:
                chosen = log.store.select_feedback(cfg.policy)
                feedback = to_feedback_json(chosen, cfg.policy.include_params)
                user = build_iteration(view, feedback, dataset.context, pcfg)
            responses = []
            resp = backend.complete(
                ChatRequest(system=system, user=user, temperature=cfg.temperature,
                            model=cfg.backend.model, max_tokens=cfg.backend.max_tokens)
            )
            responses.append(resp)
            extracted = extract_expressions(resp.text, pcfg.n_expressions)
            if not extracted:
                # one re-prompt with a format reminder; an empty retry is recorded as-is
                resp = backend.complete(
                    ChatRequest(system=system,
                                user=user + "\n\n" + retry_reminder(pcfg),
                                temperature=cfg.temperature, model=cfg.backend.model,
                                max_tokens=cfg.backend.max_tokens)
                )
                responses.append(resp)
                extracted = extract_expressions(resp.text, pcfg.n_expressions)

            outcomes: list[ParseOutcome] = []
            fitted: list[Candidate] = []
            batch_keys: set[str] = set()
            for text in extracted:
                cand = _evaluate_candidate(
                    text, dataset, opset, required_vars, batch_keys, log.store,
                    cfg.fit, iteration, pcfg, outcomes,
                )
                if cand is None:
                    continue
                log.store.insert(cand)
                fitted.append(cand)
                if (
                    log.rediscovery_iteration is None
                    and target_canonical is not None
                    and cand.canonical.root == target_canonical.root
                ):
                    log.rediscovery_iteration = iteration

            on_front = False
            if target_canonical is not None:
                incumbent = log.store.find_equivalent(target_canonical)
                if incumbent is not None:
                    on_front = any(c is incumbent for c in log.store.pareto_front())
            log.records.append(
                IterationRecord(
                    index=iteration,
                    prompt=user,
                    responses=[r.text for r in responses],
                    extracted=extracted,
                    outcomes=outcomes,
                    candidates=fitted,
                    prompt_tokens=sum(r.prompt_tokens for r in responses),
                    completion_tokens=sum(r.completion_tokens for r in responses),
                    target_on_front=on_front,
                )
            )
    except BackendError as exc:
        log.error = str(exc)
        raise BackendFailure(str(exc), log) from exc
    return log


def _evaluate_candidate(text, dataset, opset, required_vars, batch_keys, store,
                        fit_cfg, iteration, pcfg, outcomes) -> Candidate | None:
    try:
        expr = parse(text, pcfg.dialect, list(dataset.variables))
    except ImplicitFormError as exc:
        outcomes.append(ParseOutcome(text, "implicit_form", str(exc)))
        return None
    except UnknownOperatorError as exc:
        outcomes.append(ParseOutcome(text, "unknown_operator", str(exc)))
        return None
    except ExpressionSyntaxError as exc:
        outcomes.append(ParseOutcome(text, "syntax_error", str(exc)))
        return None
    violations = opset.violations(expr)
    if violations:
        outcomes.append(ParseOutcome(text, "operator_rejected", ", ".join(violations)))
        return None
    if expr.variables != required_vars:
        outcomes.append(ParseOutcome(text, "missing_variables"))
        return None
    canonical = canonicalize(expr)
    key = render(canonical)
    if key in batch_keys or store.find_equivalent(canonical) is not None:
        outcomes.append(ParseOutcome(text, "duplicate"))
        return None
    batch_keys.add(key)
    try:
        result = repeat_fit(expr, dataset, fit_cfg)
    except TooManyConstantsError as exc:
        outcomes.append(ParseOutcome(text, "too_many_constants", str(exc)))
        return None
    except NoFiniteObjectiveError as exc:
        # stored with infinite error for duplicate suppression; never fed back
        outcomes.append(ParseOutcome(text, "unfittable", str(exc)))
        return Candidate(
            expr=expr, canonical=canonical, params=expr.initial_guess(),
            mse=math.inf, mae=math.inf, complexity=complexity(expr),
            iteration_born=iteration,
        )
    outcomes.append(ParseOutcome(text, "fitted"))
    return Candidate(
        expr=expr, canonical=canonical, params=result.params,
        mse=result.mse, mae=result.mae, complexity=complexity(expr),
        iteration_born=iteration,
    )


def score_runs(logs: list[RunLog], iterations: int | None = None,
               mode: str = "cumulative") -> list[int]:
    """Per-iteration count of runs that found the target.

    ``cumulative`` counts runs whose rediscovery iteration is <= i (the
    default, non-decreasing); ``front`` counts runs whose target sits on the
    complexity/error front at iteration i.
    """
    if iterations is None:
        iterations = max((len(log.records) for log in logs), default=0)
    score = []
    for i in range(1, iterations + 1):
        if mode == "cumulative":
            n = sum(
                1 for log in logs
                if log.rediscovery_iteration is not None and log.rediscovery_iteration <= i
            )
        elif mode == "front":
            n = sum(
                1 for log in logs
                if len(log.records) >= i and log.records[i - 1].target_on_front
            )
        else:
            raise ValueError(f"unknown score mode {mode!r}")
        score.append(n)
    return score


# ---------------------------------------------------------------------------
# Config and log (de)serialization

def config_to_dict(cfg: RunConfig) -> dict:
    ops = cfg.operators
    if isinstance(ops, OperatorSet):
        ops = {"binary": sorted(ops.binary), "unary": sorted(ops.unary), "name": ops.name}
    prompt = {
        "use_scratchpad": cfg.prompt.use_scratchpad,
        "use_context": cfg.prompt.use_context,
        "include_data": cfg.prompt.include_data,
        "n_expressions": cfg.prompt.n_expressions,
        "operator_note": cfg.prompt.operator_note,
        "extra_instructions": list(cfg.prompt.extra_instructions),
        "rounding_decimals": cfg.prompt.rounding_decimals,
        "dialect": cfg.prompt.dialect.value,
    }
    return {
        "dataset": cfg.dataset,
        "operators": ops,
        "prompt": prompt,
        "policy": {
            "kind": cfg.policy.kind,
            "min_count": cfg.policy.min_count,
            "k": cfg.policy.k,
            "include_params": cfg.policy.include_params,
        },
        "fit": {
            "hops": cfg.fit.hops,
            "step_scale": cfg.fit.step_scale,
            "reflection": cfg.fit.reflection,
            "expansion": cfg.fit.expansion,
            "contraction": cfg.fit.contraction,
            "shrink": cfg.fit.shrink,
            "max_evals": cfg.fit.max_evals,
            "tol": cfg.fit.tol,
            "seed": cfg.fit.seed,
            "refits": cfg.fit.refits,
        },
        "iterations": cfg.iterations,
        "runs": cfg.runs,
        "backend": {
            "kind": cfg.backend.kind,
            "endpoint": cfg.backend.endpoint,
            "model": cfg.backend.model,
            "key_env_var": cfg.backend.key_env_var,
            "timeout": cfg.backend.timeout,
            "max_retries": cfg.backend.max_retries,
            "max_tokens": cfg.backend.max_tokens,
            "transcript": cfg.backend.transcript,
        },
        "temperature": cfg.temperature,
        "seed": cfg.seed,
        "subsample": cfg.subsample,
        "score_mode": cfg.score_mode,
    }


def config_from_dict(d: dict) -> RunConfig:
    from .expressions import Dialect

    ops = d["operators"]
    if isinstance(ops, dict):
        ops = OperatorSet(frozenset(ops["binary"]), frozenset(ops["unary"]), ops["name"])
    p = d["prompt"]
    prompt = PromptConfig(
        use_scratchpad=p["use_scratchpad"],
        use_context=p["use_context"],
        include_data=p["include_data"],
        n_expressions=p["n_expressions"],
        operator_note=p["operator_note"],
        extra_instructions=tuple(p["extra_instructions"]),
        rounding_decimals=p["rounding_decimals"],
        dialect=Dialect(p["dialect"]),
    )
    return RunConfig(
        dataset=d["dataset"],
        operators=ops,
        prompt=prompt,
        policy=FeedbackPolicy(**d["policy"]),
        fit=FitConfig(**d["fit"]),
        iterations=d["iterations"],
        runs=d["runs"],
        backend=BackendConfig(**d["backend"]),
        temperature=d["temperature"],
        seed=d["seed"],
        subsample=d["subsample"],
        score_mode=d.get("score_mode", "cumulative"),
    )


def _num(v: float):
    return v if math.isfinite(v) else None


def _candidate_dict(c: Candidate) -> dict:
    return {
        "equation": c.equation,
        "params": list(c.params),
        "mse": _num(c.mse),
        "mae": _num(c.mae),
        "complexity": c.complexity,
        "iteration": c.iteration_born,
    }


def save_runlog(log: RunLog, path) -> None:
    """Persist as line-delimited JSON: header, one record per iteration, summary.
    Infinite errors are stored as null."""
    lines = [json.dumps({"type": "header", "dataset": log.dataset_id, "config": log.config})]
    for rec in log.records:
        lines.append(json.dumps({
            "type": "iteration",
            "index": rec.index,
            "prompt": rec.prompt,
            "responses": rec.responses,
            "extracted": rec.extracted,
            "outcomes": [{"text": o.text, "status": o.status, "detail": o.detail}
                         for o in rec.outcomes],
            "candidates": [_candidate_dict(c) for c in rec.candidates],
            "prompt_tokens": rec.prompt_tokens,
            "completion_tokens": rec.completion_tokens,
            "target_on_front": rec.target_on_front,
        }))
    usage = log.usage
    lines.append(json.dumps({
        "type": "summary",
        "rediscovery_iteration": log.rediscovery_iteration,
        "store": [_candidate_dict(c) for c in log.store],
        "prompt_tokens": usage.prompt_tokens,
        "completion_tokens": usage.completion_tokens,
        "error": log.error,
    }))
    Path(path).write_text("\n".join(lines) + "\n")


def load_runlog_data(path) -> dict:
    """Load the raw JSONL structure: {header, iterations, summary}."""
    header = None
    iterations = []
    summary = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj["type"] == "header":
            header = obj
        elif obj["type"] == "iteration":
            iterations.append(obj)
        elif obj["type"] == "summary":
            summary = obj
    if header is None or summary is None:
        raise ValueError(f"{path}: not a complete run log")
    return {"header": header, "iterations": iterations, "summary": summary}


def replay(log_data: dict, dataset: Dataset | None = None) -> RunLog:
    """Re-run the engine against a scripted backend built from the logged
    responses; with an unchanged log this reproduces the store exactly."""
    cfg = config_from_dict(log_data["header"]["config"])
    responses = [text for rec in log_data["iterations"] for text in rec["responses"]]
    return run(cfg, dataset=dataset, backend=ScriptedBackend(responses, name="replay"))


def diff_replay(log_data: dict, fresh: RunLog, rtol: float = 1e-9) -> list[str]:
    """Compare a stored summary against a freshly replayed run. Returns
    human-readable divergences (empty when everything matches within rtol)."""
    problems = []
    logged = {c["equation"]: c for c in log_data["summary"]["store"]}
    current = {c.equation: c for c in fresh.store}
    for eq in sorted(set(logged) - set(current)):
        problems.append(f"missing from replay: {eq}")
    for eq in sorted(set(current) - set(logged)):
        problems.append(f"absent from log: {eq}")
    for eq in sorted(set(logged) & set(current)):
        old, new = logged[eq], current[eq]
        checks = [
            ("mse", math.inf if old["mse"] is None else old["mse"], new.mse),
            ("mae", math.inf if old["mae"] is None else old["mae"], new.mae),
            ("complexity", old["complexity"], new.complexity),
        ]
        for name, a, b in checks:
            if a == b:
                continue
            if not (math.isfinite(a) and math.isfinite(b)):
                problems.append(f"{eq}: {name} {a} != {b}")
            elif abs(a - b) > rtol * max(1.0, abs(a), abs(b)):
                problems.append(f"{eq}: {name} diverged {a} vs {b}")
    old_red = log_data["summary"]["rediscovery_iteration"]
    if old_red != fresh.rediscovery_iteration:
        problems.append(
            f"rediscovery iteration {old_red} != {fresh.rediscovery_iteration}"
        )
    return problems
