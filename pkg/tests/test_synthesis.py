import http.server
import json
import sys
import threading
import textwrap

import pytest

from gvendi import (
    Corpus,
    EchoSolver,
    EndpointError,
    HttpGenerator,
    HttpSolver,
    ProcessGenerator,
    ProcessSolver,
    ProjectionSpec,
    ProxyModel,
    RecombinationGenerator,
    Sample,
    SynthesisConfig,
    SynthesisState,
    decontaminate,
    extract_answer,
    generate_candidates,
    gradient_featurizer,
    majority_vote_filter,
    prismatic_step,
    run_synthesis,
    template_corpus,
)
from gvendi.synthesis import VerifiedCandidate, load_checkpoint


# ---------------------------------------------------------------------------
# answer extraction

def test_extract_answer_boxed():
    assert extract_answer(r"thus the total is \boxed{42}") == "42"


def test_extract_answer_last_boxed_and_nesting():
    assert extract_answer(r"\boxed{1} then \boxed{\frac{2}{3}}") == r"\frac{2}{3}"


def test_extract_answer_fallback_last_token():
    assert extract_answer("the answer is seven") == "seven"
    assert extract_answer("") == ""


def test_extract_answer_unbalanced_falls_back():
    assert extract_answer(r"broken \boxed{42") == r"\boxed{42"


# ---------------------------------------------------------------------------
# built-in endpoints

@pytest.fixture()
def small_pool():
    return template_corpus(3, 6, seed=5, name="pool")


def test_recombination_generator_contract(small_pool):
    gen = RecombinationGenerator()
    recs = gen.generate(list(small_pool)[:5], count=4, seed=9)
    assert len(recs) == 4
    for rec in recs:
        assert rec["input"]
        assert extract_answer(rec["output"]) != ""
    again = gen.generate(list(small_pool)[:5], count=4, seed=9)
    assert recs == again


def test_echo_solver_votes_match_own_answer():
    s = Sample(id="x", input="p", output=r"steps \boxed{17}")
    answers, traces = EchoSolver().solve(s, 3, seed=4)
    assert answers == ["17", "17", "17"]
    assert all(extract_answer(t) == "17" for t in traces)


def test_echo_solver_error_rate_corrupts():
    s = Sample(id="x", input="p", output=r"steps \boxed{17}")
    answers, _ = EchoSolver(error_rate=1.0).solve(s, 4, seed=4)
    assert all(a != "17" for a in answers)


# ---------------------------------------------------------------------------
# candidate generation

def test_generate_candidates_batch(small_pool):
    cands, failed = generate_candidates(RecombinationGenerator(), small_pool, 5, 8, rng_seed=1)
    assert failed == 0
    assert 0 < len(cands) <= 8
    pool_ids = set(small_pool.ids())
    for c in cands:
        assert c.id not in pool_ids
        assert c.id == c.content_id()


def test_generate_candidates_zero_batch(small_pool):
    cands, failed = generate_candidates(RecombinationGenerator(), small_pool, 5, 0, rng_seed=1)
    assert cands == [] and failed == 0


class FlakyGenerator:
    """Fails every request regardless of retries."""

    def generate(self, exemplars, count, seed):
        raise EndpointError("simulated outage")


def test_generate_candidates_counts_failures(small_pool):
    cands, failed = generate_candidates(FlakyGenerator(), small_pool, 5, 6, rng_seed=1)
    assert cands == []
    assert failed == 6


def test_generate_candidates_drops_pool_clones(small_pool):
    class CloneGenerator:
        def __init__(self, pool):
            self.pool = list(pool)

        def generate(self, exemplars, count, seed):
            s = self.pool[0]
            return [{"input": s.input, "output": s.output, "label": s.label}] * count

    cands, failed = generate_candidates(CloneGenerator(small_pool), small_pool, 5, 4, rng_seed=1)
    assert cands == [] and failed == 0


def test_generate_candidates_validates_fewshot(small_pool):
    with pytest.raises(ValueError):
        generate_candidates(RecombinationGenerator(), small_pool, len(small_pool) + 1, 2, rng_seed=1)


# ---------------------------------------------------------------------------
# majority voting

class ScriptedSolver:
    def __init__(self, answers):
        self.answers = answers

    def solve(self, sample, n, seed):
        votes = self.answers[sample.id][:n]
        return votes, [rf"trace \boxed{{{a}}}" for a in votes]


def make_candidates(*ids):
    return [Sample(id=i, input=f"problem {i}", output=r"\boxed{0}") for i in ids]


def test_majority_vote_accepts_two_of_three():
    solver = ScriptedSolver({"a": ["4", "4", "5"]})
    kept, failed = majority_vote_filter(solver, make_candidates("a"), 3, 2, rng_seed=1)
    assert failed == 0
    assert len(kept) == 1
    v = kept[0]
    assert v.majority_answer == "4"
    assert v.majority_count == 2
    assert extract_answer(v.sample.output) == "4"
    assert v.sample.id == v.sample.content_id()  # id refreshed after trace swap


def test_majority_vote_rejects_all_distinct():
    solver = ScriptedSolver({"a": ["4", "5", "6"]})
    kept, failed = majority_vote_filter(solver, make_candidates("a"), 3, 2, rng_seed=1)
    assert kept == [] and failed == 0


def test_majority_vote_unanimity_pair():
    solver = ScriptedSolver({"a": ["e", "e"]})
    kept, _ = majority_vote_filter(solver, make_candidates("a"), 2, 2, rng_seed=1)
    assert len(kept) == 1 and kept[0].majority_count == 2


def test_majority_vote_solver_failure_drops():
    class Boom:
        def solve(self, sample, n, seed):
            raise EndpointError("down")

    kept, failed = majority_vote_filter(Boom(), make_candidates("a", "b"), 3, 2, rng_seed=1)
    assert kept == [] and failed == 2


def test_majority_vote_validates_thresholds():
    with pytest.raises(ValueError):
        majority_vote_filter(EchoSolver(), [], 2, 3, rng_seed=1)


def test_verified_candidate_invariant():
    s = Sample(id="a", input="x", output="y")
    with pytest.raises(ValueError):
        VerifiedCandidate(sample=s, votes=("1", "2"), majority_answer="1", majority_count=2)


# ---------------------------------------------------------------------------
# decontamination

def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


def test_decontaminate_flags_verbatim_span():
    span = words(12, "shared")
    protected = Corpus((Sample(id="p", input=f"prefix {span} suffix", output=""),), name="prot")
    cand = Sample(id="c", input=f"other start {span} other end", output="")
    kept, flagged = decontaminate([cand], protected, ngram=10)
    assert kept == [] and flagged == [cand]


def test_decontaminate_keeps_nine_token_overlap():
    span = words(9, "shared")
    protected = Corpus((Sample(id="p", input=f"{span} tailA tailB", output=""),), name="prot")
    cand = Sample(id="c", input=f"{span} different end here", output="")
    kept, flagged = decontaminate([cand], protected, ngram=10)
    assert flagged == [] and kept == [cand]


def test_decontaminate_empty_protected_keeps_all():
    cands = make_candidates("a", "b")
    kept, flagged = decontaminate(cands, Corpus((), name="prot"), ngram=10)
    assert kept == cands and flagged == []


def test_decontaminate_case_folds():
    span = words(10, "tok")
    protected = Corpus((Sample(id="p", input=span.upper(), output=""),), name="prot")
    cand = Sample(id="c", input=f"lead {span}", output="")
    _, flagged = decontaminate([cand], protected, ngram=10)
    assert flagged == [cand]


def test_decontaminate_paraphrase_hook_pairs_with_nearest():
    protected = Corpus(
        (
            Sample(id="p0", input="the quick brown fox jumps over dogs", output=""),
            Sample(id="p1", input="integrals of rational functions by parts", output=""),
        ),
        name="prot",
    )
    # paraphrase of p1 with no shared 10-gram
    cand = Sample(id="c", input="rational functions and their integrals done by parts", output="")
    seen = []

    def hook(candidate, nearest):
        seen.append((candidate.id, nearest.id))
        return True

    kept, flagged = decontaminate([cand], protected, ngram=10, paraphrase_hook=hook)
    assert kept == [] and flagged == [cand]
    assert seen == [("c", "p1")]


def test_decontaminate_paraphrase_hook_can_keep():
    protected = Corpus((Sample(id="p0", input=words(12), output=""),), name="prot")
    cand = Sample(id="c", input="entirely unrelated candidate text here", output="")
    kept, flagged = decontaminate([cand], protected, ngram=10,
                                  paraphrase_hook=lambda c, n: False)
    assert kept == [cand] and flagged == []


# ---------------------------------------------------------------------------
# the loop

def loop_fixture(seed=0, families=6, skew=True):
    sizes = [30] + [6] * (families - 1) if skew else [10] * families
    pool = template_corpus(families, sizes, seed=31, name="seedpool")
    model = ProxyModel.create(vocab_size=256, feature_dim=64, hash_seed=101, weight_seed=202)
    proj = ProjectionSpec(model.n_params, 64, seed=303)
    featurizer = gradient_featurizer(model, proj)
    config = SynthesisConfig(
        iterations=2, gen_batch=12, vote_n=3, vote_tau=2, k_fraction=0.1,
        fewshot_count=5, seed=seed,
    )
    return pool, featurizer, config


def test_prismatic_step_respects_sparse_filter():
    pool, featurizer, config = loop_fixture()
    state = SynthesisState(pool, featurizer(pool), 0, ())
    new = prismatic_step(state, config, RecombinationGenerator(), EchoSolver(), featurizer)
    rec = new.history[-1]
    assert new.iteration == 1
    assert rec["sparse_accepted"] == len(new.pool) - len(pool)
    assert rec["sparse_accepted"] <= rec["vote_accepted"] <= rec["generated"]
    assert tuple(new.pool.ids()) == new.pool_features.sample_ids


def test_prismatic_step_fraction_one_admits_all_survivors():
    pool, featurizer, _ = loop_fixture()
    config = SynthesisConfig(
        iterations=1, gen_batch=10, vote_n=3, vote_tau=2, k_fraction=0.1,
        sparse_fraction=1.0, fewshot_count=5, seed=3,
    )
    state = SynthesisState(pool, featurizer(pool), 0, ())
    new = prismatic_step(state, config, RecombinationGenerator(), EchoSolver(), featurizer)
    rec = new.history[-1]
    assert rec["sparse_accepted"] == rec["vote_accepted"] - rec["decontam_flagged"]


def test_prismatic_step_zero_survivors_still_advances():
    pool, featurizer, config = loop_fixture()
    state = SynthesisState(pool, featurizer(pool), 0, ())
    new = prismatic_step(state, config, FlakyGenerator(), EchoSolver(), featurizer)
    assert new.iteration == 1
    assert len(new.pool) == len(pool)
    assert new.history[-1]["generated"] == 0
    assert new.history[-1]["gen_failed"] == config.gen_batch


def test_prismatic_step_decontaminates_against_protected():
    pool, featurizer, config = loop_fixture()
    state = SynthesisState(pool, featurizer(pool), 0, ())
    # protect every pool input: recombined candidates share long spans with them
    new = prismatic_step(
        state, config, RecombinationGenerator(), EchoSolver(), featurizer,
        protected=pool,
    )
    rec = new.history[-1]
    assert rec["decontam_flagged"] > 0


def test_run_synthesis_zero_iterations():
    pool, featurizer, _ = loop_fixture()
    config = SynthesisConfig(iterations=0, gen_batch=5, vote_n=3, vote_tau=2,
                             k_fraction=0.1, seed=1)
    state = run_synthesis(pool, config, RecombinationGenerator(), EchoSolver(), featurizer)
    assert state.iteration == 0
    assert state.pool.ids() == pool.ids()


def test_run_synthesis_resume_matches_uninterrupted(tmp_path):
    pool, featurizer, _ = loop_fixture()
    config = SynthesisConfig(iterations=3, gen_batch=10, vote_n=3, vote_tau=2,
                             k_fraction=0.1, seed=11)
    full = run_synthesis(pool, config, RecombinationGenerator(), EchoSolver(), featurizer)

    # simulate a kill after step 2: run 2 iterations with checkpoints, then resume
    part_cfg = SynthesisConfig(iterations=2, gen_batch=10, vote_n=3, vote_tau=2,
                               k_fraction=0.1, seed=11)
    ckpt = tmp_path / "run"
    run_synthesis(pool, part_cfg, RecombinationGenerator(), EchoSolver(), featurizer,
                  checkpoint_dir=str(ckpt))
    resumed = run_synthesis(pool, config, RecombinationGenerator(), EchoSolver(), featurizer,
                            checkpoint_dir=str(ckpt))
    assert resumed.iteration == full.iteration == 3
    assert resumed.pool.ids() == full.pool.ids()
    assert resumed.pool_features.data.tobytes() == full.pool_features.data.tobytes()
    assert list(resumed.history) == list(full.history)


def test_checkpoint_roundtrip(tmp_path):
    pool, featurizer, config = loop_fixture()
    state = run_synthesis(pool, config, RecombinationGenerator(), EchoSolver(), featurizer,
                          checkpoint_dir=str(tmp_path / "ck"))
    loaded = load_checkpoint(str(tmp_path / "ck"))
    assert loaded.iteration == state.iteration
    assert loaded.pool.ids() == state.pool.ids()
    assert list(loaded.history) == list(state.history)


def test_pool_alignment_invariant_checked():
    pool, featurizer, _ = loop_fixture()
    feats = featurizer(pool)
    with pytest.raises(ValueError, match="aligned"):
        SynthesisState(pool, feats.take(list(range(len(pool) - 1))), 0, ())


# ---------------------------------------------------------------------------
# external process protocol

WORKER = textwrap.dedent(
    """
    import json, sys
    for line in sys.stdin:
        req = json.loads(line)
        if req["type"] == "generate":
            n = req["count"]
            first = req["exemplars"][0]["input"].split()[0]
            out = [{"input": f"{first} generated {req['seed']} item {i}",
                    "output": f"steps \\\\boxed{{{i}}}"} for i in range(n)]
            print(json.dumps({"samples": out}), flush=True)
        elif req["type"] == "solve":
            n = req["n"]
            print(json.dumps({"answers": ["9"] * n,
                              "traces": ["trace \\\\boxed{9}"] * n}), flush=True)
    """
)


@pytest.fixture()
def worker_script(tmp_path):
    path = tmp_path / "worker.py"
    path.write_text(WORKER, encoding="utf-8")
    return str(path)


def test_process_generator_roundtrip(worker_script, small_pool):
    gen = ProcessGenerator([sys.executable, worker_script])
    try:
        recs = gen.generate(list(small_pool)[:2], count=3, seed=5)
        assert len(recs) == 3
        assert recs[0]["input"].endswith("item 0")
        assert extract_answer(recs[1]["output"]) == "1"
    finally:
        gen.close()


def test_process_solver_roundtrip(worker_script):
    solver = ProcessSolver([sys.executable, worker_script])
    try:
        answers, traces = solver.solve(Sample(id="x", input="q", output=""), 2, seed=5)
        assert answers == ["9", "9"]
        assert len(traces) == 2
    finally:
        solver.close()


def test_process_endpoint_in_generate_candidates(worker_script, small_pool):
    gen = ProcessGenerator([sys.executable, worker_script])
    try:
        cands, failed = generate_candidates(gen, small_pool, 3, 4, rng_seed=2)
        assert failed == 0
        assert len(cands) == 4
    finally:
        gen.close()


def test_process_garbage_output_is_endpoint_error(tmp_path, small_pool):
    bad = tmp_path / "bad.py"
    bad.write_text("import sys\nfor line in sys.stdin:\n    print('not json', flush=True)\n")
    gen = ProcessGenerator([sys.executable, str(bad)])
    try:
        with pytest.raises(EndpointError, match="invalid JSON"):
            gen.generate(list(small_pool)[:1], 1, seed=1)
    finally:
        gen.close()


def test_process_early_exit_counts_as_failures(tmp_path, small_pool):
    dead = tmp_path / "dead.py"
    dead.write_text("import sys; sys.exit(0)\n")
    gen = ProcessGenerator([sys.executable, str(dead)])
    try:
        cands, failed = generate_candidates(gen, small_pool, 3, 3, rng_seed=2, max_attempts=2)
        assert cands == [] and failed == 3
    finally:
        gen.close()


def test_solver_length_mismatch_rejected(tmp_path):
    short = tmp_path / "short.py"
    short.write_text(
        "import json, sys\n"
        "for line in sys.stdin:\n"
        "    print(json.dumps({'answers': ['1'], 'traces': ['t']}), flush=True)\n"
    )
    solver = ProcessSolver([sys.executable, str(short)])
    try:
        with pytest.raises(EndpointError, match="answers"):
            solver.solve(Sample(id="x", input="q", output=""), 3, seed=1)
    finally:
        solver.close()


# ---------------------------------------------------------------------------
# HTTP protocol

class _Handler(http.server.BaseHTTPRequestHandler):
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        req = json.loads(self.rfile.read(length))
        if req["type"] == "generate":
            body = {"samples": [{"input": f"http item {i}", "output": rf"\boxed{{{i}}}"}
                                for i in range(req["count"])]}
        else:
            body = {"answers": ["7"] * req["n"], "traces": [r"t \boxed{7}"] * req["n"]}
        payload = json.dumps(body).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_endpoint():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/"
    server.shutdown()


def test_http_generator_and_solver(http_endpoint):
    gen = HttpGenerator(http_endpoint)
    recs = gen.generate([Sample(id="a", input="x", output="")], 2, seed=1)
    assert [r["input"] for r in recs] == ["http item 0", "http item 1"]
    solver = HttpSolver(http_endpoint)
    answers, traces = solver.solve(Sample(id="a", input="x", output=""), 3, seed=1)
    assert answers == ["7", "7", "7"]


def test_http_connection_refused_is_endpoint_error():
    gen = HttpGenerator("http://127.0.0.1:9/", timeout=0.5)
    with pytest.raises(EndpointError):
        gen.generate([Sample(id="a", input="x", output="")], 1, seed=1)
