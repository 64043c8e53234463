"""Multi-turn session runner, answer verification, and metric aggregation.

One session serves all four metrics: the initial question is asked and
recorded (IDA), every finding loop is walked step by step with prefix
depth scoring, a wrong answer freezes the loop and replaces that loop's
exchanges with ground truth in the running history, and a final fresh
exchange supplies the full ground-truth reasoning history before asking
only the diagnostic decision (GT-RDA).
"""

from __future__ import annotations

import base64
import json
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import requests

from .benchgen import (
    STEP_CRITERION,
    STEP_DECISION,
    STEP_GROUND_LEAD,
    STEP_GROUND_MEASUREMENT,
    STEP_GROUND_WAVE,
    STEP_IDENTIFY,
    STEP_INITIAL,
    BenchmarkCase,
    Turn,
    stable_rng,
)
from .errors import EmptyInput, EndpointError, VerifierError

GROUND_STEPS = {STEP_GROUND_LEAD, STEP_GROUND_WAVE, STEP_GROUND_MEASUREMENT}

STEP_KEYS = {
    STEP_INITIAL: "initial",
    STEP_CRITERION: "criterion",
    STEP_IDENTIFY: "identify",
    STEP_GROUND_LEAD: "ground_lead",
    STEP_GROUND_WAVE: "ground_wave",
    STEP_GROUND_MEASUREMENT: "ground_measurement",
    STEP_DECISION: "decision",
}

YES_TOKENS = {"yes", "y", "true", "correct", "present", "confirmed", "affirmative"}
NO_TOKENS = {"no", "n", "false", "incorrect", "absent", "excluded", "negative"}


def default_system_prompt() -> str:
    path = resources.files("ecgexam").joinpath("data/system_prompt.txt")
    return path.read_text(encoding="utf-8").strip()


# ---------------------------------------------------------------------------
# Endpoint configuration and clients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelEndpoint:
    base_url: str
    model: str
    path: str = "/v1/chat/completions"
    auth_header: str = "Authorization"
    auth_value: str = ""
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_s: float = 0.5
    temperature: float = 0.0

    def __post_init__(self):
        if self.temperature != 0.0:
            raise ValueError("decoding temperature is fixed at 0")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + self.path


class RateLimiter:
    """Thread-safe minimum-interval limiter shared by concurrent sessions."""

    def __init__(self, max_per_second: float | None = None):
        self._interval = 1.0 / max_per_second if max_per_second else 0.0
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if wait > 0:
            time.sleep(wait)


class HttpChatModel:
    """JSON-over-HTTP chat client with retries and deterministic decoding."""

    def __init__(self, endpoint: ModelEndpoint, rate_limiter: RateLimiter | None = None):
        self.endpoint = endpoint
        self.rate_limiter = rate_limiter or RateLimiter()

    def reply(self, messages: list[dict], turn: Turn | None = None,
              session: str | None = None, phase: str = "session") -> str:
        body = {
            "model": self.endpoint.model,
            "messages": messages,
            "temperature": 0.0,
        }
        headers = {"Content-Type": "application/json"}
        if self.endpoint.auth_value:
            headers[self.endpoint.auth_header] = self.endpoint.auth_value
        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_retries + 1):
            if attempt:
                time.sleep(self.endpoint.backoff_s * (2 ** (attempt - 1)))
            try:
                self.rate_limiter.acquire()
                resp = requests.post(
                    self.endpoint.url, json=body, headers=headers,
                    timeout=self.endpoint.timeout_s,
                )
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
        raise EndpointError(f"endpoint failed after {self.endpoint.max_retries + 1} attempts: {last_error}")


# ---------------------------------------------------------------------------
# Scripted models (offline evaluation and tests)
# ---------------------------------------------------------------------------

class PerfectModel:
    """Answers every turn with the ground truth."""

    def reply(self, messages, turn=None, session=None, phase="session"):
        return turn.gt_answer


class AlwaysWrongModel:
    """Answers every turn incorrectly."""

    def reply(self, messages, turn=None, session=None, phase="session"):
        return wrong_answer(turn)


class PatternModel:
    """Correct by default; wrong at scripted (loop, step-key) positions.

    Keys are (finding_loop_index, step_key) with step keys ``initial``,
    ``criterion``, ``identify``, ``ground_lead``, ``ground_wave``,
    ``ground_measurement``, ``decision`` and ``gt_rda``; the initial and
    gt_rda entries use loop index 0.
    """

    def __init__(self, wrong_at: dict):
        self.wrong_at = dict(wrong_at)

    def reply(self, messages, turn=None, session=None, phase="session"):
        if phase == "gt_rda":
            key = (0, "gt_rda")
        else:
            key = (turn.finding_loop_index or 0, STEP_KEYS[turn.step])
        if self.wrong_at.get(key, False):
            return wrong_answer(turn)
        return turn.gt_answer


class RandomModel:
    """Uniform choice over presented options; coin flip on yes/no turns."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def reply(self, messages, turn=None, session=None, phase="session"):
        rng = stable_rng(self.seed, session, phase, turn.step,
                         turn.finding_loop_index, turn.prompt_text)
        if turn.options:
            return rng.choice(turn.options)
        return rng.choice(["yes", "no"])


def wrong_answer(turn: Turn) -> str:
    if turn.options:
        return next(o for o in turn.options if o != turn.gt_answer)
    return "no" if turn.gt_answer == "yes" else "yes"


# ---------------------------------------------------------------------------
# Answer verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Verifier:
    kind: str = "normalized-choice-match"
    judge: ModelEndpoint | None = None

    def __post_init__(self):
        if self.kind not in ("normalized-choice-match", "external-judge"):
            raise ValueError(f"unknown verifier kind {self.kind!r}")
        if self.kind == "external-judge" and self.judge is None:
            raise ValueError("external-judge verifier needs a judge endpoint")


@dataclass(frozen=True)
class MatchResult:
    correct: bool
    ambiguous: bool = False


def _normalize(text: str) -> str:
    text = text.casefold()
    text = re.sub(r"[^a-z0-9]+", " ", text)
    return text.strip()


def classify_reply(reply: str, turn: Turn) -> MatchResult:
    """Offline normalized matching: letter, text, letter+text, or containment."""
    n = _normalize(reply)
    if not n:
        return MatchResult(False)
    if turn.options is None:
        tokens = n.split()
        first = tokens[0]
        if first in YES_TOKENS and not (set(tokens) & NO_TOKENS):
            return MatchResult(turn.gt_answer == "yes")
        if first in NO_TOKENS and not (set(tokens) & YES_TOKENS):
            return MatchResult(turn.gt_answer == "no")
        has_yes = bool(set(tokens) & YES_TOKENS)
        has_no = bool(set(tokens) & NO_TOKENS)
        if has_yes and has_no:
            return MatchResult(False, ambiguous=True)
        if has_yes or has_no:
            return MatchResult(turn.gt_answer == ("yes" if has_yes else "no"))
        return MatchResult(False)

    norm_options = [_normalize(o) for o in turn.options]
    letters = [chr(ord("a") + i) for i in range(len(turn.options))]

    exact = {
        i for i, (t, letter) in enumerate(zip(norm_options, letters))
        if n in (t, letter, f"{letter} {t}")
    }
    matches = exact
    if not matches:
        contained = {i for i, t in enumerate(norm_options) if t and t in n}
        if not contained:
            tokens = n.split()
            if len(tokens) == 1:
                if tokens[0] in letters:
                    contained = {letters.index(tokens[0])}
                else:
                    first_words = {i for i, t in enumerate(norm_options)
                                   if t.split() and t.split()[0] == tokens[0]}
                    contained = first_words
            elif tokens and tokens[0] in letters:
                contained = {letters.index(tokens[0])}
        matches = contained
    if len(matches) > 1:
        return MatchResult(False, ambiguous=True)
    if not matches:
        return MatchResult(False)
    chosen = matches.pop()
    return MatchResult(turn.options[chosen] == turn.gt_answer)


def verify_answer(reply: str, turn: Turn, verifier: Verifier | None = None) -> bool:
    verifier = verifier or Verifier()
    if verifier.kind == "normalized-choice-match":
        return classify_reply(reply, turn).correct
    return _judge_verify(reply, turn, verifier)


def _judge_verify(reply: str, turn: Turn, verifier: Verifier) -> bool:
    endpoint = verifier.judge
    body = {"question": turn.prompt_text, "ground_truth": turn.gt_answer, "response": reply}
    headers = {"Content-Type": "application/json"}
    if endpoint.auth_value:
        headers[endpoint.auth_header] = endpoint.auth_value
    last_error: Exception | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt:
            time.sleep(endpoint.backoff_s * (2 ** (attempt - 1)))
        try:
            resp = requests.post(endpoint.url, json=body, headers=headers, timeout=endpoint.timeout_s)
            resp.raise_for_status()
            data = resp.json()
            return bool(data["consistent"])
        except (requests.RequestException, KeyError, ValueError) as exc:
            last_error = exc
    raise VerifierError(f"judge endpoint failed: {last_error}")


# ---------------------------------------------------------------------------
# Session protocol
# ---------------------------------------------------------------------------

@dataclass
class TurnRecord:
    step: str
    loop: int | None
    prompt: str
    reply: str | None
    correct: bool
    asked: bool
    ambiguous: bool = False

    def to_dict(self) -> dict:
        return {
            "step": self.step, "loop": self.loop, "prompt": self.prompt,
            "reply": self.reply, "correct": self.correct, "asked": self.asked,
            "ambiguous": self.ambiguous,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TurnRecord":
        return cls(
            step=d["step"], loop=d.get("loop"), prompt=d["prompt"], reply=d.get("reply"),
            correct=d["correct"], asked=d["asked"], ambiguous=d.get("ambiguous", False),
        )


@dataclass
class SessionTranscript:
    case_id: str
    diagnosis_id: str
    polarity: str
    initial_correct: bool = False
    completion_clean: bool = False
    completion_clean_incl_initial: bool = False
    gt_rda_correct: bool = False
    loop_depths: list[float] = field(default_factory=list)
    turns: list[TurnRecord] = field(default_factory=list)
    failed: bool = False
    error: str | None = None
    verifier_kind: str = "normalized-choice-match"

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "diagnosis_id": self.diagnosis_id,
            "polarity": self.polarity,
            "initial_correct": self.initial_correct,
            "completion_clean": self.completion_clean,
            "completion_clean_incl_initial": self.completion_clean_incl_initial,
            "gt_rda_correct": self.gt_rda_correct,
            "loop_depths": self.loop_depths,
            "failed": self.failed,
            "error": self.error,
            "verifier_kind": self.verifier_kind,
            "turns": [t.to_dict() for t in self.turns],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionTranscript":
        out = cls(
            case_id=d["case_id"], diagnosis_id=d["diagnosis_id"], polarity=d["polarity"],
            initial_correct=d["initial_correct"], completion_clean=d["completion_clean"],
            completion_clean_incl_initial=d.get("completion_clean_incl_initial", False),
            gt_rda_correct=d["gt_rda_correct"], loop_depths=list(d["loop_depths"]),
            failed=d.get("failed", False), error=d.get("error"),
            verifier_kind=d.get("verifier_kind", "normalized-choice-match"),
        )
        out.turns = [TurnRecord.from_dict(t) for t in d.get("turns", [])]
        return out


def render_prompt(turn: Turn) -> str:
    """User-visible text for a turn: the prompt plus lettered options."""
    if turn.options is None:
        return turn.prompt_text + "\nAnswer yes or no."
    lines = [turn.prompt_text]
    for i, option in enumerate(turn.options):
        lines.append(f"{chr(ord('A') + i)}) {option}")
    lines.append("Answer with the letter of the correct option.")
    return "\n".join(lines)


def _image_content(png_path: str | Path, text: str) -> list[dict]:
    payload = base64.b64encode(Path(png_path).read_bytes()).decode("ascii")
    return [
        {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{payload}"}},
        {"type": "text", "text": text},
    ]


def run_session(
    case: BenchmarkCase,
    model,
    verifier: Verifier | None = None,
    system_prompt: str | None = None,
    with_images: bool = False,
) -> SessionTranscript:
    """Run the single protocol serving IDA, Completion, Depth, and GT-RDA.

    With ``with_images`` the initial user message carries the case's PNG
    rendering as an inline base64 payload (the case must point to one).
    """
    verifier = verifier or Verifier()
    system = system_prompt if system_prompt is not None else default_system_prompt()
    transcript = SessionTranscript(
        case_id=case.case_id,
        diagnosis_id=case.diagnosis_id,
        polarity=case.polarity,
        verifier_kind=verifier.kind,
    )
    messages: list[dict] = [{"role": "system", "content": system}]
    png_path = case.record_paths.get("png") if with_images else None

    def user_content(turn: Turn):
        prompt = render_prompt(turn)
        if png_path and turn.step == STEP_INITIAL:
            return _image_content(png_path, prompt)
        return prompt

    def ask(turn: Turn, history: list[dict], phase: str = "session") -> tuple[str, bool]:
        reply = model.reply(
            history + [{"role": "user", "content": user_content(turn)}],
            turn=turn, session=case.case_id, phase=phase,
        )
        ok = verify_answer(reply, turn, verifier)
        ambiguous = (
            verifier.kind == "normalized-choice-match"
            and classify_reply(reply, turn).ambiguous
        )
        transcript.turns.append(
            TurnRecord(
                step=turn.step, loop=turn.finding_loop_index, prompt=render_prompt(turn),
                reply=reply, correct=ok, asked=True, ambiguous=ambiguous,
            )
        )
        return reply, ok

    initial = case.turns[0]
    reply, ok = ask(initial, messages)
    transcript.initial_correct = ok
    messages.append({"role": "user", "content": user_content(initial)})
    messages.append({"role": "assistant", "content": reply})

    any_loop_wrong = False
    for loop_index in range(1, case.n_loops + 1):
        loop_turns = case.loop_turns(loop_index)
        ground_turns = [t for t in loop_turns if t.step in GROUND_STEPS]
        n_sub = len(ground_turns)
        depth = 0.0
        failed = False
        pending: list[dict] = []
        for turn in loop_turns:
            if failed:
                transcript.turns.append(
                    TurnRecord(step=turn.step, loop=loop_index, prompt=render_prompt(turn),
                               reply=None, correct=False, asked=False)
                )
                continue
            reply, ok = ask(turn, messages + pending)
            if not ok:
                failed = True
                any_loop_wrong = True
                continue
            pending.append({"role": "user", "content": render_prompt(turn)})
            pending.append({"role": "assistant", "content": reply})
            if turn.step in GROUND_STEPS:
                depth += 1.0 / n_sub
            else:
                depth += 1.0
                if turn.step == STEP_IDENTIFY and n_sub == 0:
                    # No grounding sub-tasks declared (or an absent finding):
                    # stage 3 is vacuously complete.
                    depth += 1.0
        if failed:
            pending = []
            for turn in loop_turns:
                pending.append({"role": "user", "content": render_prompt(turn)})
                pending.append({"role": "assistant", "content": turn.gt_answer})
        messages.extend(pending)
        transcript.loop_depths.append(round(depth, 10))

    transcript.completion_clean = not any_loop_wrong
    transcript.completion_clean_incl_initial = transcript.completion_clean and transcript.initial_correct

    # GT-RDA: fresh exchange with the full ground-truth reasoning history.
    # The initial Q&A is excluded (its answer would reveal the decision); the
    # image, when attached, rides on the first history message instead.
    final_turn = case.turns[-1]
    gt_history: list[dict] = [{"role": "system", "content": system}]
    for i, turn in enumerate(case.turns[1:-1]):
        text = render_prompt(turn)
        content = _image_content(png_path, text) if (png_path and i == 0) else text
        gt_history.append({"role": "user", "content": content})
        gt_history.append({"role": "assistant", "content": turn.gt_answer})
    _, ok = ask(final_turn, gt_history, phase="gt_rda")
    transcript.gt_rda_correct = ok
    return transcript


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    n_sessions: int
    n_failed: int
    ida_pct: float
    completion_pct: float
    completion_incl_initial_pct: float
    depth: float
    gt_rda_pct: float
    n_loops: int
    per_diagnosis: dict

    def to_dict(self) -> dict:
        return {
            "n_sessions": self.n_sessions,
            "n_failed": self.n_failed,
            "ida_pct": self.ida_pct,
            "completion_pct": self.completion_pct,
            "completion_incl_initial_pct": self.completion_incl_initial_pct,
            "depth": self.depth,
            "gt_rda_pct": self.gt_rda_pct,
            "n_loops": self.n_loops,
            "per_diagnosis": self.per_diagnosis,
        }

    def to_table(self) -> str:
        header = f"{'Diagnosis':<12}{'N':>5}{'IDA (%)':>10}{'Completion (%)':>16}{'Depth (0-4)':>13}{'GT-RDA (%)':>12}"
        lines = [header, "-" * len(header)]
        for dx, row in sorted(self.per_diagnosis.items()):
            lines.append(
                f"{dx:<12}{row['n']:>5}{row['ida_pct']:>10.2f}{row['completion_pct']:>16.2f}"
                f"{row['depth']:>13.3f}{row['gt_rda_pct']:>12.2f}"
            )
        lines.append("-" * len(header))
        lines.append(
            f"{'overall':<12}{self.n_sessions:>5}{self.ida_pct:>10.2f}{self.completion_pct:>16.2f}"
            f"{self.depth:>13.3f}{self.gt_rda_pct:>12.2f}"
        )
        if self.n_failed:
            lines.append(f"excluded failed sessions: {self.n_failed}")
        return "\n".join(lines)


def _pct(part: int, whole: int) -> float:
    return 100.0 * part / whole if whole else 0.0


def compute_metrics(transcripts: list[SessionTranscript]) -> MetricsReport:
    """Pool loop depths across all sessions (micro-average) plus rate metrics."""
    usable = [t for t in transcripts if not t.failed]
    n_failed = len(transcripts) - len(usable)
    if not usable:
        raise EmptyInput("no usable transcripts")

    def rollup(items: list[SessionTranscript]) -> dict:
        depths = [d for t in items for d in t.loop_depths]
        return {
            "n": len(items),
            "ida_pct": _pct(sum(t.initial_correct for t in items), len(items)),
            "completion_pct": _pct(sum(t.completion_clean for t in items), len(items)),
            "completion_incl_initial_pct": _pct(
                sum(t.completion_clean_incl_initial for t in items), len(items)
            ),
            "depth": (sum(depths) / len(depths)) if depths else 0.0,
            "gt_rda_pct": _pct(sum(t.gt_rda_correct for t in items), len(items)),
            "n_loops": len(depths),
        }

    overall = rollup(usable)
    per_dx: dict[str, dict] = {}
    for dx in sorted({t.diagnosis_id for t in usable}):
        per_dx[dx] = rollup([t for t in usable if t.diagnosis_id == dx])
    return MetricsReport(
        n_sessions=overall["n"],
        n_failed=n_failed,
        ida_pct=overall["ida_pct"],
        completion_pct=overall["completion_pct"],
        completion_incl_initial_pct=overall["completion_incl_initial_pct"],
        depth=overall["depth"],
        gt_rda_pct=overall["gt_rda_pct"],
        n_loops=overall["n_loops"],
        per_diagnosis=per_dx,
    )


# ---------------------------------------------------------------------------
# Batch evaluation with incremental persistence
# ---------------------------------------------------------------------------

def load_transcripts(path: str | Path) -> list[SessionTranscript]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SessionTranscript.from_dict(json.loads(line)))
    return out


def evaluate_cases(
    cases: list[BenchmarkCase],
    model,
    verifier: Verifier | None = None,
    system_prompt: str | None = None,
    jobs: int = 1,
    transcript_path: str | Path | None = None,
    resume: bool = True,
    with_images: bool = False,
) -> list[SessionTranscript]:
    """Run sessions (optionally in parallel) with append-only persistence."""
    from concurrent.futures import ThreadPoolExecutor

    done: dict[str, SessionTranscript] = {}
    if transcript_path and resume:
        for t in load_transcripts(transcript_path):
            done[t.case_id] = t
    todo = [c for c in cases if c.case_id not in done]

    write_lock = threading.Lock()
    sink = open(transcript_path, "a", encoding="utf-8") if transcript_path else None

    def run_one(case: BenchmarkCase) -> SessionTranscript:
        try:
            transcript = run_session(case, model, verifier, system_prompt,
                                     with_images=with_images)
        except (EndpointError, VerifierError) as exc:
            transcript = SessionTranscript(
                case_id=case.case_id, diagnosis_id=case.diagnosis_id,
                polarity=case.polarity, failed=True, error=str(exc),
            )
        if sink is not None:
            with write_lock:
                sink.write(json.dumps(transcript.to_dict(), ensure_ascii=False) + "\n")
                sink.flush()
        return transcript

    try:
        if jobs <= 1:
            fresh = [run_one(c) for c in todo]
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                fresh = list(pool.map(run_one, todo))
    finally:
        if sink is not None:
            sink.close()

    results = list(done.values()) + fresh
    results.sort(key=lambda t: t.case_id)
    return results
