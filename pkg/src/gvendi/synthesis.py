"""Iterative cluster -> generate -> sparse-filter data growth.

Each step clusters the current pool in gradient space, asks a generator for
new candidates (few-shot prompted from the pool), verifies them by majority
vote across independent solver runs, screens them against a protected corpus
by exact n-gram overlap, and keeps only the survivors whose nearest centroid
sits in a sparse cluster. Accepted samples are appended to the pool, so the
loop preferentially fills the underrepresented regions of gradient space.

Generators and solvers are pluggable: in-process built-ins for testing
(RecombinationGenerator, EchoSolver), child processes speaking
newline-delimited JSON over stdio, or HTTP targets receiving the same
objects via POST. Wire protocol:

    {"type": "generate", "exemplars": [sample...], "count": n, "seed": s}
        -> {"samples": [{"input": ..., "output": ...}, ...]}
    {"type": "solve", "problem": text, "n": n, "seed": s}
        -> {"answers": [str x n], "traces": [str x n]}
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
import threading
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .cluster import dynamic_k, kmeans_fit, sparse_clusters
from .corpus import Corpus, Sample, content_id, ingest_jsonl, write_jsonl
from .featmat import FeatureMatrix, load_features, store_features
from .metrics import vendi_score
from .proxy import ProjectionSpec, ProxyModel, featurize
from .rng import mix64, rng_from


class EndpointError(RuntimeError):
    """A generator/solver request failed or returned a malformed response."""


class Generator(Protocol):
    def generate(self, exemplars: Sequence[Sample], count: int, seed: int) -> list[dict]: ...


class Solver(Protocol):
    def solve(self, sample: Sample, n: int, seed: int) -> tuple[list[str], list[str]]: ...


# ---------------------------------------------------------------------------
# answer extraction


def extract_answer(text: str) -> str:
    r"""Final answer of a solution trace.

    The content of the last balanced ``\boxed{...}`` if present, else the
    last whitespace token.
    """
    marker = "\\boxed{"
    pos = text.rfind(marker)
    if pos >= 0:
        i = pos + len(marker)
        depth = 1
        start = i
        while i < len(text) and depth > 0:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            return text[start : i - 1].strip()
    tokens = text.split()
    return tokens[-1] if tokens else ""


def _with_final_answer(text: str, answer: str) -> str:
    """Rewrite the last boxed answer of a trace, or append one."""
    marker = "\\boxed{"
    pos = text.rfind(marker)
    if pos >= 0:
        i = pos + len(marker)
        depth = 1
        while i < len(text) and depth > 0:
            if text[i] == "{":
                depth += 1
            elif text[i] == "}":
                depth -= 1
            i += 1
        if depth == 0:
            return text[:pos] + marker + answer + "}" + text[i:]
    sep = " " if text and not text.endswith(" ") else ""
    return f"{text}{sep}\\boxed{{{answer}}}"


# ---------------------------------------------------------------------------
# built-in endpoints


class RecombinationGenerator:
    """LLM-free generator: splice two exemplars and perturb their numerals.

    Exists so the whole loop is exercisable hermetically; outputs end in a
    boxed answer derived from the new input's numerals, which keeps the echo
    solver's votes self-consistent.
    """

    def generate(self, exemplars: Sequence[Sample], count: int, seed: int) -> list[dict]:
        if not exemplars:
            raise EndpointError("recombination generator needs at least one exemplar")
        out = []
        for c in range(count):
            rng = rng_from(seed, 0x6E6, c)
            if len(exemplars) >= 2:
                i, j = rng.choice(len(exemplars), size=2, replace=False)
                a, b = exemplars[int(i)], exemplars[int(j)]
            else:
                a = b = exemplars[0]
            in_toks = self._perturb(self._splice(a.input.split(), b.input.split(), rng), rng)
            out_toks = self._splice(a.output.split(), b.output.split(), rng)
            numerals = [int(t) for t in in_toks if t.isdigit()]
            answer = sum(numerals) % 1000 if numerals else int(rng.integers(0, 1000))
            output = " ".join(out_toks) + f" \\boxed{{{answer}}}"
            out.append({"input": " ".join(in_toks), "output": output})
        return out

    @staticmethod
    def _splice(ta: list[str], tb: list[str], rng: np.random.Generator) -> list[str]:
        if not ta and not tb:
            return ["item"]
        if not ta or not tb:
            return list(ta or tb)
        cut_a = int(rng.integers(1, len(ta) + 1))
        cut_b = int(rng.integers(0, len(tb) + 1))
        toks = ta[:cut_a] + tb[cut_b:]
        return toks if toks else list(ta)

    @staticmethod
    def _perturb(tokens: list[str], rng: np.random.Generator) -> list[str]:
        out = []
        for t in tokens:
            if t.isdigit() and rng.random() < 0.5:
                out.append(str(int(t) + int(rng.integers(1, 10))))
            else:
                out.append(t)
        return out


class EchoSolver:
    """LLM-free solver: echoes the candidate's own final answer.

    An error_rate > 0 corrupts individual votes, which is how tests exercise
    the reject path of majority voting.
    """

    def __init__(self, error_rate: float = 0.0):
        if not 0.0 <= error_rate <= 1.0:
            raise ValueError("error_rate must be in [0, 1]")
        self.error_rate = error_rate

    def solve(self, sample: Sample, n: int, seed: int) -> tuple[list[str], list[str]]:
        truth = extract_answer(sample.output)
        answers, traces = [], []
        for v in range(n):
            rng = rng_from(seed, 0xEC0, v)
            ans = truth
            if self.error_rate > 0.0 and rng.random() < self.error_rate:
                ans = self._corrupt(truth, rng)
            answers.append(ans)
            traces.append(_with_final_answer(sample.output, ans))
        return answers, traces

    @staticmethod
    def _corrupt(answer: str, rng: np.random.Generator) -> str:
        if answer.lstrip("-").isdigit():
            return str(int(answer) + int(rng.integers(1, 10)))
        return answer + "'"


# ---------------------------------------------------------------------------
# external endpoints


class JsonLinesProcess:
    """One request/response JSON line pair per call to a child process."""

    def __init__(self, command: str | Sequence[str]):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def request(self, obj: dict) -> dict:
        with self._lock:
            proc = self._ensure()
            try:
                proc.stdin.write(json.dumps(obj, ensure_ascii=False) + "\n")
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as e:
                self._drop()
                raise EndpointError(f"worker pipe failed: {e}") from e
            if not line:
                self._drop()
                raise EndpointError("worker closed its output stream")
        try:
            resp = json.loads(line)
        except json.JSONDecodeError as e:
            raise EndpointError(f"invalid JSON from worker: {e.msg}") from e
        if not isinstance(resp, dict):
            raise EndpointError("worker response is not a JSON object")
        return resp

    def _drop(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc = None

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class HttpJson:
    """POST a JSON object, read a JSON object back."""

    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def request(self, obj: dict) -> dict:
        body = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except OSError as e:
            raise EndpointError(f"http request to {self.url} failed: {e}") from e
        try:
            out = json.loads(payload)
        except json.JSONDecodeError as e:
            raise EndpointError(f"invalid JSON from {self.url}: {e.msg}") from e
        if not isinstance(out, dict):
            raise EndpointError(f"{self.url}: response is not a JSON object")
        return out


def _parse_generate_response(resp: dict) -> list[dict]:
    samples = resp.get("samples")
    if not isinstance(samples, list):
        raise EndpointError("generator response missing 'samples' list")
    cleaned = []
    for rec in samples:
        if not isinstance(rec, dict) or "input" not in rec:
            raise EndpointError("generator sample record missing 'input'")
        cleaned.append(
            {
                "input": str(rec["input"]),
                "output": str(rec.get("output", "")),
                "label": None if rec.get("label") is None else str(rec["label"]),
            }
        )
    return cleaned


def _parse_solve_response(resp: dict, n: int) -> tuple[list[str], list[str]]:
    answers = resp.get("answers")
    traces = resp.get("traces")
    if not isinstance(answers, list) or len(answers) != n:
        raise EndpointError(f"solver response needs {n} answers")
    if not isinstance(traces, list) or len(traces) != n:
        raise EndpointError(f"solver response needs {n} traces")
    return [str(a) for a in answers], [str(t) for t in traces]


class ProcessGenerator:
    def __init__(self, command: str | Sequence[str]):
        self.transport = JsonLinesProcess(command)

    def generate(self, exemplars: Sequence[Sample], count: int, seed: int) -> list[dict]:
        resp = self.transport.request(
            {
                "type": "generate",
                "exemplars": [s.to_json_dict() for s in exemplars],
                "count": count,
                "seed": seed,
            }
        )
        return _parse_generate_response(resp)

    def close(self) -> None:
        self.transport.close()


class ProcessSolver:
    def __init__(self, command: str | Sequence[str]):
        self.transport = JsonLinesProcess(command)

    def solve(self, sample: Sample, n: int, seed: int) -> tuple[list[str], list[str]]:
        resp = self.transport.request(
            {"type": "solve", "problem": sample.input, "n": n, "seed": seed}
        )
        return _parse_solve_response(resp, n)

    def close(self) -> None:
        self.transport.close()


class HttpGenerator:
    def __init__(self, url: str, timeout: float = 60.0):
        self.transport = HttpJson(url, timeout)

    def generate(self, exemplars: Sequence[Sample], count: int, seed: int) -> list[dict]:
        resp = self.transport.request(
            {
                "type": "generate",
                "exemplars": [s.to_json_dict() for s in exemplars],
                "count": count,
                "seed": seed,
            }
        )
        return _parse_generate_response(resp)


class HttpSolver:
    def __init__(self, url: str, timeout: float = 60.0):
        self.transport = HttpJson(url, timeout)

    def solve(self, sample: Sample, n: int, seed: int) -> tuple[list[str], list[str]]:
        resp = self.transport.request(
            {"type": "solve", "problem": sample.input, "n": n, "seed": seed}
        )
        return _parse_solve_response(resp, n)


# ---------------------------------------------------------------------------
# pipeline stages


def generate_candidates(
    generator: Generator,
    pool: Corpus,
    fewshot_count: int,
    batch: int,
    rng_seed: int,
    max_attempts: int = 3,
    max_workers: int = 1,
) -> tuple[list[Sample], int]:
    """Draw few-shot exemplars and request one candidate per batch slot.

    Returns (candidates, failed_requests). Candidates get fresh content-hash
    ids; anything content-identical to a pool member (or an earlier candidate
    in the same batch) is dropped.
    """
    if batch < 0:
        raise ValueError("batch must be >= 0")
    if fewshot_count < 1 or fewshot_count > len(pool):
        raise ValueError(f"fewshot_count must be in [1, {len(pool)}]")

    jobs = []
    for c in range(batch):
        rng = rng_from(rng_seed, 0x6E0, c)
        idx = rng.choice(len(pool), size=fewshot_count, replace=False)
        jobs.append(([pool[int(i)] for i in idx], mix64(rng_seed, 0x6E1, c)))

    def run(job):
        exemplars, req_seed = job
        last = "no attempts made"
        for attempt in range(max_attempts):
            try:
                return generator.generate(exemplars, 1, mix64(req_seed, attempt))
            except EndpointError as e:
                last = f"attempt {attempt + 1}/{max_attempts}: {e}"
        return EndpointError(last)

    if max_workers > 1 and jobs:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    known = {s.content_id() for s in pool} | set(pool.ids())
    candidates: list[Sample] = []
    failures = 0
    for res in results:
        if isinstance(res, EndpointError):
            failures += 1
            continue
        for rec in res:
            text_in = str(rec["input"])
            text_out = str(rec.get("output", ""))
            label = None if rec.get("label") is None else str(rec["label"])
            sid = content_id(text_in, text_out, label)
            if sid in known:
                continue
            known.add(sid)
            candidates.append(Sample(id=sid, input=text_in, output=text_out, label=label))
    return candidates, failures


@dataclass(frozen=True)
class VerifiedCandidate:
    sample: Sample
    votes: tuple[str, ...]
    majority_answer: str
    majority_count: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "votes", tuple(self.votes))
        if self.votes.count(self.majority_answer) != self.majority_count:
            raise ValueError("majority_count does not match votes")


def majority_vote_filter(
    solver: Solver,
    candidates: Sequence[Sample],
    vote_n: int,
    vote_tau: int,
    rng_seed: int,
    max_workers: int = 1,
) -> tuple[list[VerifiedCandidate], int]:
    """Keep candidates whose answer is reproduced by >= vote_tau of vote_n runs.

    A kept candidate's output is replaced by the first solver trace that
    yields the majority answer, and its content-hash id is refreshed to
    match. Solver failures drop the candidate; the count is returned.
    """
    if not 1 <= vote_tau <= vote_n:
        raise ValueError("need 1 <= vote_tau <= vote_n")

    def run(item):
        i, cand = item
        try:
            return solver.solve(cand, vote_n, mix64(rng_seed, 0x50F, i))
        except EndpointError as e:
            return e

    items = list(enumerate(candidates))
    if max_workers > 1 and items:
        with ThreadPoolExecutor(max_workers=max_workers) as ex:
            results = list(ex.map(run, items))
    else:
        results = [run(it) for it in items]

    verified: list[VerifiedCandidate] = []
    failures = 0
    for cand, res in zip(candidates, results):
        if isinstance(res, EndpointError):
            failures += 1
            continue
        answers, traces = res
        majority, count = Counter(answers).most_common(1)[0]
        if count < vote_tau:
            continue
        trace = next(t for a, t in zip(answers, traces) if a == majority)
        sample = Sample(
            id=content_id(cand.input, trace, cand.label),
            input=cand.input,
            output=trace,
            label=cand.label,
            tags=cand.tags,
            split=cand.split,
            extra=cand.extra,
        )
        verified.append(
            VerifiedCandidate(
                sample=sample,
                votes=tuple(answers),
                majority_answer=majority,
                majority_count=count,
            )
        )
    return verified, failures


def _ngram_windows(text: str, n: int) -> set[str]:
    toks = text.lower().split()
    return {" ".join(toks[i : i + n]) for i in range(len(toks) - n + 1)}


ParaphraseHook = Callable[[Sample, Sample], bool]


def decontaminate(
    candidates: Sequence[Sample],
    protected: Corpus,
    ngram: int = 10,
    paraphrase_hook: ParaphraseHook | None = None,
) -> tuple[list[Sample], list[Sample]]:
    """Split candidates into (kept, flagged) by exact n-gram overlap.

    A candidate is flagged iff its input shares any contiguous window of
    `ngram` case-folded word tokens with any protected input. All protected
    windows go into one set, so recall is exact.

    `paraphrase_hook` is the attachment point for a second, semantic stage:
    each survivor of the n-gram stage is paired with its nearest protected
    sample (by built-in embedding cosine) and flagged when the hook returns
    True. The hook itself -- typically an external model call -- is the
    caller's business.
    """
    if ngram < 1:
        raise ValueError("ngram must be >= 1")
    protected_windows: set[str] = set()
    for s in protected:
        protected_windows |= _ngram_windows(s.input, ngram)
    kept: list[Sample] = []
    flagged: list[Sample] = []
    for c in candidates:
        if protected_windows and _ngram_windows(c.input, ngram) & protected_windows:
            flagged.append(c)
        else:
            kept.append(c)
    if paraphrase_hook is not None and kept and len(protected) > 0:
        kept, more_flagged = _paraphrase_stage(kept, protected, paraphrase_hook)
        flagged.extend(more_flagged)
    return kept, flagged


def _paraphrase_stage(
    kept: list[Sample], protected: Corpus, hook: ParaphraseHook
) -> tuple[list[Sample], list[Sample]]:
    from .proxy import embed_hashed_tfidf

    cand_corpus = Corpus(tuple(kept), name="candidates")
    cand_emb = embed_hashed_tfidf(cand_corpus, dim=4096, seed=0xDECAF).data.astype(np.float64)
    prot_emb = embed_hashed_tfidf(protected, dim=4096, seed=0xDECAF).data.astype(np.float64)
    nearest = np.argmax(cand_emb @ prot_emb.T, axis=1)
    still_kept: list[Sample] = []
    flagged: list[Sample] = []
    for cand, j in zip(kept, nearest):
        if hook(cand, protected[int(j)]):
            flagged.append(cand)
        else:
            still_kept.append(cand)
    return still_kept, flagged


# ---------------------------------------------------------------------------
# the loop


@dataclass(frozen=True)
class SynthesisConfig:
    iterations: int
    gen_batch: int
    vote_n: int = 3
    vote_tau: int = 2
    k_fraction: float = 0.01
    sparse_fraction: float | None = None  # None: keep the smallest floor(k/2) clusters
    fewshot_count: int = 5
    decontam_ngram: int = 10
    seed: int = 606
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.gen_batch < 0:
            raise ValueError("gen_batch must be >= 0")
        if not 1 <= self.vote_tau <= self.vote_n:
            raise ValueError("need 1 <= vote_tau <= vote_n")
        if not 0.0 < self.k_fraction < 1.0:
            raise ValueError("k_fraction must be in (0, 1)")
        if self.sparse_fraction is not None and not 0.0 < self.sparse_fraction <= 1.0:
            raise ValueError("sparse_fraction must be in (0, 1]")
        if self.fewshot_count < 1:
            raise ValueError("fewshot_count must be >= 1")
        if self.decontam_ngram < 1:
            raise ValueError("decontam_ngram must be >= 1")
        if self.max_workers < 1:
            raise ValueError("max_workers must be >= 1")


@dataclass(frozen=True)
class SynthesisState:
    pool: Corpus
    pool_features: FeatureMatrix
    iteration: int
    history: tuple[dict, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "history", tuple(self.history))
        if tuple(self.pool.ids()) != self.pool_features.sample_ids:
            raise ValueError("pool and pool_features are not row-aligned")
        if len(self.history) != self.iteration:
            raise ValueError("history length must equal iteration")


Featurizer = Callable[[Corpus], FeatureMatrix]


def gradient_featurizer(model: ProxyModel, proj: ProjectionSpec) -> Featurizer:
    """Featurizer closure for the loop: corpus -> projected gradient matrix."""

    def run(corpus: Corpus) -> FeatureMatrix:
        return featurize(model, proj, corpus)

    return run


def _pool_vendi(features: FeatureMatrix) -> float:
    mask = features.degenerate_mask()
    if mask.all():
        raise ValueError("pool has no non-degenerate feature rows")
    usable = features.take(np.flatnonzero(~mask)) if mask.any() else features
    return vendi_score(usable)


def prismatic_step(
    state: SynthesisState,
    config: SynthesisConfig,
    generator: Generator,
    solver: Solver,
    featurizer: Featurizer,
    protected: Corpus | None = None,
) -> SynthesisState:
    """One cluster -> generate -> vote -> decontaminate -> sparse-filter pass.

    Cluster sizes are frozen at step start: a survivor is judged against the
    sparsity of its nearest centroid as it was before any admission, so
    admissions within a step cannot crowd each other out.
    """
    step_seed = mix64(config.seed, 0x57E, state.iteration)
    k = dynamic_k(len(state.pool), config.k_fraction)
    model = kmeans_fit(state.pool_features, k, seed=mix64(step_seed, 1))
    if config.sparse_fraction is None:
        sparse = sparse_clusters(model, count=k // 2)
    else:
        sparse = sparse_clusters(model, fraction=config.sparse_fraction)

    candidates, gen_failed = generate_candidates(
        generator,
        state.pool,
        config.fewshot_count,
        config.gen_batch,
        mix64(step_seed, 2),
        max_workers=config.max_workers,
    )
    verified, solver_failed = majority_vote_filter(
        solver,
        candidates,
        config.vote_n,
        config.vote_tau,
        mix64(step_seed, 3),
        max_workers=config.max_workers,
    )
    survivors = [v.sample for v in verified]
    if protected is not None and len(protected) > 0:
        survivors, flagged = decontaminate(survivors, protected, config.decontam_ngram)
    else:
        flagged = []

    # trace replacement can re-collide ids; keep pool ids unique
    pool_ids = set(state.pool.ids())
    unique: list[Sample] = []
    seen: set[str] = set()
    for s in survivors:
        if s.id in pool_ids or s.id in seen:
            continue
        seen.add(s.id)
        unique.append(s)
    survivors = sorted(unique, key=lambda s: s.id)

    accepted: list[Sample] = []
    new_pool, new_features = state.pool, state.pool_features
    if survivors:
        cand_corpus = Corpus(tuple(survivors), name=state.pool.name)
        cand_feats = featurizer(cand_corpus)
        nearest = model.nearest_centroid(cand_feats.data.astype(np.float64))
        keep = [i for i, c in enumerate(nearest) if int(c) in sparse]
        if keep:
            accepted = [survivors[i] for i in keep]
            new_pool = Corpus(state.pool.samples + tuple(accepted), name=state.pool.name)
            new_features = state.pool_features.append(cand_feats.take(keep))

    record = {
        "generated": len(candidates),
        "gen_failed": gen_failed,
        "vote_accepted": len(verified),
        "solver_failed": solver_failed,
        "decontam_flagged": len(flagged),
        "sparse_accepted": len(accepted),
        "pool_g_vendi": _pool_vendi(new_features),
    }
    return SynthesisState(
        pool=new_pool,
        pool_features=new_features,
        iteration=state.iteration + 1,
        history=state.history + (record,),
    )


# checkpoint file names
POOL_FILE = "pool.jsonl"
FEATURES_FILE = "features.gvfm"
STATE_FILE = "state.json"


def save_checkpoint(state: SynthesisState, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    write_jsonl(state.pool, os.path.join(directory, POOL_FILE))
    store_features(state.pool_features, os.path.join(directory, FEATURES_FILE))
    tmp = os.path.join(directory, STATE_FILE + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "iteration": state.iteration,
                "history": list(state.history),
                "pool_size": len(state.pool),
                "pool_name": state.pool.name,
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")
    os.replace(tmp, os.path.join(directory, STATE_FILE))


def load_checkpoint(directory) -> SynthesisState | None:
    """State from a checkpoint directory, or None if no checkpoint exists."""
    state_path = os.path.join(directory, STATE_FILE)
    if not os.path.exists(state_path):
        return None
    with open(state_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    pool = ingest_jsonl(os.path.join(directory, POOL_FILE))
    pool = Corpus(pool.samples, name=meta.get("pool_name", pool.name))
    features = load_features(os.path.join(directory, FEATURES_FILE))
    if len(pool) != meta.get("pool_size"):
        raise ValueError(f"{directory}: checkpoint pool size mismatch; delete and rerun")
    return SynthesisState(
        pool=pool,
        pool_features=features,
        iteration=int(meta["iteration"]),
        history=tuple(meta["history"]),
    )


def run_synthesis(
    seed_corpus: Corpus,
    config: SynthesisConfig,
    generator: Generator,
    solver: Solver,
    featurizer: Featurizer,
    protected: Corpus | None = None,
    checkpoint_dir=None,
) -> SynthesisState:
    """Featurize the seed pool and apply prismatic_step `iterations` times.

    With a checkpoint_dir, state is persisted after every step and a partial
    run resumes from the last completed step; seeds derive from (config.seed,
    iteration), so a resumed run reproduces an uninterrupted one exactly.
    """
    state = load_checkpoint(checkpoint_dir) if checkpoint_dir is not None else None
    if state is None:
        state = SynthesisState(
            pool=seed_corpus,
            pool_features=featurizer(seed_corpus),
            iteration=0,
            history=(),
        )
        if checkpoint_dir is not None:
            save_checkpoint(state, checkpoint_dir)
    while state.iteration < config.iterations:
        state = prismatic_step(state, config, generator, solver, featurizer, protected)
        if checkpoint_dir is not None:
            save_checkpoint(state, checkpoint_dir)
    return state
