"""Synthetic review worlds with known latent quality, and author reporting policies.

Every random draw comes from a ``numpy.random.SeedSequence`` rooted at the
config seed, so a world is a pure function of its config (and policy
assignment). Independent streams are used for world generation, policy
assignment and each author's report so that changing one does not shift the
others.
"""

from __future__ import annotations

import enum
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from isomech._backend import kernels
from isomech.data import Author, Dataset, Ranking, Submission, raw_score
from isomech.evaluation import EvaluationReport, aggregate, summarize
from isomech.mechanism import MechanismOptions, run_mechanism

EXACT_SEARCH_LIMIT = 8

# Stream tags for SeedSequence spawn keys.
_WORLD, _ASSIGN, _REPORT = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class WorldConfig:
    n_authors: int = 2000
    # {"kind": "zipf", "exponent": e, "cap": c} | {"kind": "fixed", "value": k}
    # | {"kind": "uniform", "low": a, "high": b}
    submissions_per_author: Mapping = field(
        default_factory=lambda: {"kind": "zipf", "exponent": 1.5, "cap": 17}
    )
    coauthor_rate: float = 0.15
    n_topics: int = 30
    # Chance that an author's next paper opens a new topic is
    # topic_novelty / (papers so far + topic_novelty).
    topic_novelty: float = 1.0
    quality_prior: Mapping = field(default_factory=lambda: {"mean": 5.5, "stddev": 1.5})
    reviewer_bias_stddev: float = 1.0
    review_noise_stddev: float = 1.5
    reviews_per_paper: tuple[int, int] = (3, 5)
    scale: tuple[float, float] = (1.0, 10.0)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "submissions_per_author", dict(self.submissions_per_author))
        object.__setattr__(self, "quality_prior", dict(self.quality_prior))
        object.__setattr__(self, "reviews_per_paper", tuple(int(v) for v in self.reviews_per_paper))
        object.__setattr__(self, "scale", tuple(float(v) for v in self.scale))
        self.validate()

    def validate(self) -> None:
        if int(self.n_authors) < 1:
            raise ConfigError("n_authors must be >= 1")
        spa = self.submissions_per_author
        kind = spa.get("kind")
        if kind == "fixed":
            if int(spa.get("value", 0)) < 1:
                raise ConfigError("fixed submissions_per_author must be >= 1")
        elif kind == "uniform":
            if not 1 <= int(spa.get("low", 0)) <= int(spa.get("high", 0)):
                raise ConfigError("uniform submissions_per_author needs 1 <= low <= high")
        elif kind == "zipf":
            if float(spa.get("exponent", 0)) <= 0 or int(spa.get("cap", 0)) < 1:
                raise ConfigError("zipf submissions_per_author needs exponent > 0 and cap >= 1")
        else:
            raise ConfigError(f"unknown submissions_per_author kind {kind!r}")
        if not 0.0 <= self.coauthor_rate <= 1.0:
            raise ConfigError("coauthor_rate must be a probability")
        if self.n_topics < 1:
            raise ConfigError("n_topics must be >= 1")
        if self.topic_novelty < 0:
            raise ConfigError("topic_novelty must be >= 0")
        for name, v in (
            ("quality_prior.stddev", self.quality_prior.get("stddev", -1)),
            ("reviewer_bias_stddev", self.reviewer_bias_stddev),
            ("review_noise_stddev", self.review_noise_stddev),
        ):
            if not (isinstance(v, (int, float)) and v >= 0):
                raise ConfigError(f"{name} must be >= 0")
        if "mean" not in self.quality_prior:
            raise ConfigError("quality_prior needs a mean")
        lo, hi = self.reviews_per_paper
        if not 1 <= lo <= hi <= 10:
            raise ConfigError("reviews_per_paper must satisfy 1 <= low <= high <= 10")
        if not self.scale[0] < self.scale[1]:
            raise ConfigError("scale must be (min, max) with min < max")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_dict(cls, d: Mapping) -> "WorldConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reviews_per_paper"] = list(self.reviews_per_paper)
        d["scale"] = list(self.scale)
        return d

    def with_seed(self, seed: int) -> "WorldConfig":
        d = self.to_dict()
        d["seed"] = int(seed)
        return WorldConfig(**d)


class PolicyKind(enum.Enum):
    TRUTHFUL = "truthful"
    THRESHOLD_GAMING = "threshold"
    NOISY_SWAP = "noisy_swap"
    FAVOR_SUBSET = "favor_subset"


@dataclass(frozen=True)
class ReportPolicy:
    kind: PolicyKind = PolicyKind.TRUTHFUL
    threshold: float | None = None
    p: float | None = None
    paper_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind is PolicyKind.THRESHOLD_GAMING and self.threshold is None:
            raise ConfigError("threshold gaming needs a threshold")
        if self.kind is PolicyKind.NOISY_SWAP:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ConfigError("noisy swap probability must be in [0, 1]")
        if self.kind is PolicyKind.FAVOR_SUBSET and not self.paper_ids:
            raise ConfigError("favor_subset needs at least one paper id")

    @classmethod
    def truthful(cls):
        return cls()

    @classmethod
    def threshold_gaming(cls, threshold: float):
        return cls(PolicyKind.THRESHOLD_GAMING, threshold=float(threshold))

    @classmethod
    def noisy_swap(cls, p: float):
        return cls(PolicyKind.NOISY_SWAP, p=float(p))

    @classmethod
    def favor_subset(cls, paper_ids: Sequence[str]):
        return cls(PolicyKind.FAVOR_SUBSET, paper_ids=tuple(paper_ids))

    def describe(self) -> dict:
        d: dict = {"kind": self.kind.value}
        if self.threshold is not None:
            d["threshold"] = self.threshold
        if self.p is not None:
            d["p"] = self.p
        if self.paper_ids:
            d["paper_ids"] = list(self.paper_ids)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReportPolicy":
        try:
            kind = PolicyKind(d.get("kind", "truthful"))
        except ValueError:
            raise ConfigError(f"unknown policy kind {d.get('kind')!r}") from None
        return cls(
            kind,
            threshold=None if d.get("threshold") is None else float(d["threshold"]),
            p=None if d.get("p") is None else float(d["p"]),
            paper_ids=tuple(d.get("paper_ids", ())),
        )


@dataclass(frozen=True)
class PolicyMix:
    """Assign each ranking author one policy, drawn with the given weights."""

    components: tuple[tuple[float, ReportPolicy], ...]

    def __post_init__(self):
        if not self.components or any(w < 0 for w, _ in self.components):
            raise ConfigError("policy mix needs non-negative weights")
        if sum(w for w, _ in self.components) <= 0:
            raise ConfigError("policy mix weights sum to zero")

    @classmethod
    def from_dict(cls, d: Mapping) -> "PolicyMix":
        return cls(tuple(
            (float(c["weight"]), ReportPolicy.from_dict(c["policy"])) for c in d["components"]
        ))


PolicyAssignment = (
    ReportPolicy | PolicyMix | Mapping[str, ReportPolicy] | Callable[[str], ReportPolicy] | None
)


def policy_from_config(d: Mapping | None):
    if d is None:
        return None
    if d.get("kind") == "mix":
        return PolicyMix.from_dict(d)
    return ReportPolicy.from_dict(d)


@dataclass(frozen=True)
class SyntheticWorld:
    dataset: Dataset
    theta: Mapping[str, float]
    policy_log: Mapping[str, dict] = field(default_factory=dict)
    seed: int = 0


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def derive_seed(seed: int, replication: int) -> int:
    """Seed for replication ``replication`` (1-based) of an experiment."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(3, int(replication)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _draw_counts(cfg: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    spa = cfg.submissions_per_author
    n = cfg.n_authors
    if spa["kind"] == "fixed":
        return np.full(n, int(spa["value"]))
    if spa["kind"] == "uniform":
        return rng.integers(int(spa["low"]), int(spa["high"]) + 1, size=n)
    cap = int(spa["cap"])
    k = np.arange(1, cap + 1, dtype=np.float64)
    pmf = k ** -float(spa["exponent"])
    return rng.choice(np.arange(1, cap + 1), size=n, p=pmf / pmf.sum())


def _count_cap(cfg: WorldConfig) -> int:
    spa = cfg.submissions_per_author
    if spa["kind"] == "fixed":
        return int(spa["value"])
    if spa["kind"] == "uniform":
        return int(spa["high"])
    return int(spa["cap"])


def _generate_base(cfg: WorldConfig):
    rng = _stream(cfg.seed, _WORLD)
    lo, hi = cfg.scale
    counts = _draw_counts(cfg, rng)
    cap = _count_cap(cfg)
    width = max(4, len(str(cfg.n_authors)))
    author_ids = [f"A{i:0{width}d}" for i in range(1, cfg.n_authors + 1)]
    papers_of: list[list[str]] = [[] for _ in author_ids]
    paper_authors: dict[str, list[int]] = {}
    topics: dict[str, str] = {}
    n_papers = int(counts.sum())
    pwidth = max(5, len(str(n_papers)))
    pid_counter = 0
    for a, k in enumerate(counts):
        own_topics: list[int] = []
        for j in range(int(k)):
            pid_counter += 1
            pid = f"P{pid_counter:0{pwidth}d}"
            if not own_topics or rng.random() < cfg.topic_novelty / (j + cfg.topic_novelty):
                t = int(rng.integers(cfg.n_topics))
            else:
                t = own_topics[int(rng.integers(len(own_topics)))]
            own_topics.append(t)
            topics[pid] = f"T{t + 1:02d}"
            papers_of[a].append(pid)
            paper_authors[pid] = [a]

    if cfg.n_authors > 1 and cfg.coauthor_rate > 0:
        for pid, members in paper_authors.items():
            while len(members) < 5 and rng.random() < cfg.coauthor_rate:
                for _ in range(10):
                    b = int(rng.integers(cfg.n_authors))
                    if b not in members and len(papers_of[b]) < cap:
                        members.append(b)
                        papers_of[b].append(pid)
                        break

    mu = float(cfg.quality_prior["mean"])
    sd = float(cfg.quality_prior["stddev"])
    pids = list(paper_authors)
    theta_arr = mu + sd * rng.standard_normal(len(pids))
    rlo, rhi = cfg.reviews_per_paper
    submissions = {}
    theta = {}
    for pid, th in zip(pids, theta_arr):
        m = int(rng.integers(rlo, rhi + 1))
        latent = (
            th
            + cfg.reviewer_bias_stddev * rng.standard_normal(m)
            + cfg.review_noise_stddev * rng.standard_normal(m)
        )
        scores = np.clip(np.rint(latent), lo, hi)
        submissions[pid] = Submission(pid, tuple(float(s) for s in scores), topics[pid])
        theta[pid] = float(th)
    authors = {
        author_ids[a]: Author(author_ids[a], tuple(ps))
        for a, ps in enumerate(papers_of)
        if ps
    }
    return Dataset(cfg.scale, submissions, authors, {}), theta


def truthful_order(paper_ids: Sequence[str], theta: Mapping[str, float]) -> list[str]:
    return sorted(paper_ids, key=lambda p: (-theta[p], p))


def acceptance(scores: Mapping[str, float], threshold: float) -> set[str]:
    """Papers whose score strictly exceeds the threshold."""
    return {p for p, s in scores.items() if s > threshold}


def _accept_counts(raw_rows: np.ndarray, threshold: float) -> np.ndarray:
    return kernels.row_utilities(raw_rows, kernels.ACCEPT, float(threshold))


def _gaming_order(order: list[str], raw: Mapping[str, float], threshold: float) -> list[str]:
    y = np.array([raw[p] for p in order])
    n = len(order)
    if n <= EXACT_SEARCH_LIMIT:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
        counts = _accept_counts(y[perms], threshold)
        best = perms[int(np.argmax(counts))]
        return [order[i] for i in best]
    # Greedy pairwise-swap hill climbing from the truthful order.
    cur = list(range(n))
    cur_val = float(_accept_counts(y[np.array([cur])], threshold)[0])
    while True:
        cands = []
        for i, j in itertools.combinations(range(n), 2):
            c = cur.copy()
            c[i], c[j] = c[j], c[i]
            cands.append(c)
        vals = _accept_counts(y[np.array(cands)], threshold)
        k = int(np.argmax(vals))
        if vals[k] <= cur_val:
            break
        cur, cur_val = cands[k], float(vals[k])
    return [order[i] for i in cur]


def author_report(
    author: Author,
    world: SyntheticWorld,
    policy: ReportPolicy,
    rng: np.random.Generator | None = None,
) -> Ranking | None:
    """The ranking an author submits under ``policy``; None for single-paper authors."""
    papers = list(author.submission_ids)
    if len(papers) < 2:
        return None
    order = truthful_order(papers, world.theta)
    if policy.kind is PolicyKind.TRUTHFUL:
        return Ranking.strict(author.id, order)
    if policy.kind is PolicyKind.THRESHOLD_GAMING:
        lo, hi = world.dataset.scale
        if not lo <= policy.threshold <= hi:
            raise ValueError(f"threshold {policy.threshold} outside scale [{lo}, {hi}]")
        raw = {p: raw_score(world.dataset.submissions[p]) for p in papers}
        return Ranking.strict(author.id, _gaming_order(order, raw, policy.threshold))
    if policy.kind is PolicyKind.NOISY_SWAP:
        if rng is None:
            rng = _stream(world.seed, _REPORT, _author_index(author.id))
        for i in range(len(order) - 1):
            if rng.random() < policy.p:
                order[i], order[i + 1] = order[i + 1], order[i]
        return Ranking.strict(author.id, order)
    if policy.kind is PolicyKind.FAVOR_SUBSET:
        favored = set(policy.paper_ids)
        stray = favored - set(papers)
        if stray:
            raise ValueError(f"author {author.id!r} is not on papers {sorted(stray)}")
        top = tuple(p for p in order if p in favored)
        rest = tuple((p,) for p in order if p not in favored)
        return Ranking(author.id, (top,) + rest)
    raise ValueError(f"unsupported policy {policy.kind}")


def _author_index(author_id: str) -> int:
    digits = "".join(ch for ch in author_id if ch.isdigit())
    if digits and digits == author_id[1:]:
        return int(digits)
    # Stable fallback for arbitrary ids.
    return int.from_bytes(author_id.encode("utf-8")[:8].ljust(8, b"\0"), "little")


def _policy_for(assignment, author_id: str, rng: np.random.Generator) -> ReportPolicy:
    if assignment is None:
        return ReportPolicy.truthful()
    if isinstance(assignment, ReportPolicy):
        return assignment
    if isinstance(assignment, PolicyMix):
        w = np.array([c[0] for c in assignment.components], dtype=np.float64)
        k = int(rng.choice(len(w), p=w / w.sum()))
        return assignment.components[k][1]
    if isinstance(assignment, Mapping):
        return assignment.get(author_id, ReportPolicy.truthful())
    return assignment(author_id)


def gen_world(cfg: WorldConfig, policy_assignment: PolicyAssignment = None) -> SyntheticWorld:
    """Generate a world and collect every eligible author's ranking."""
    base, theta = _generate_base(cfg)
    draft = SyntheticWorld(base, theta, {}, int(cfg.seed))
    assign_rng = _stream(cfg.seed, _ASSIGN)
    rankings = {}
    log = {}
    for aid, author in base.authors.items():
        if len(author.submission_ids) < 2:
            continue
        policy = _policy_for(policy_assignment, aid, assign_rng)
        r = author_report(author, draft, policy)
        if r is not None:
            rankings[aid] = r
            log[aid] = policy.describe()
    ds = Dataset(base.scale, base.submissions, base.authors, rankings)
    return SyntheticWorld(ds, theta, log, int(cfg.seed))


def _replicate(args):
    cfg, policy_assignment, options_list, r, regression_level = args
    world = gen_world(cfg.with_seed(derive_seed(cfg.seed, r)), policy_assignment)
    return [summarize(world, run_mechanism(world.dataset, o)) for o in options_list]


def run_paired_experiment(
    cfg: WorldConfig,
    policy_assignment: PolicyAssignment,
    options_list: Sequence[MechanismOptions],
    replications: int,
    jobs: int = 1,
    regression_level: str = "author",
) -> list[EvaluationReport]:
    """Run several mechanism variants on the same replicated worlds.

    Output does not depend on ``jobs``: replication r always uses
    ``derive_seed(cfg.seed, r)`` and results are pooled in index order.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    tasks = [(cfg, policy_assignment, tuple(options_list), r, regression_level)
             for r in range(1, replications + 1)]
    if jobs <= 1 or replications == 1:
        results = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_replicate, tasks, chunksize=max(1, replications // (4 * jobs))))
    return [
        aggregate([res[k] for res in results], o, regression_level)
        for k, o in enumerate(options_list)
    ]


def run_experiment(
    cfg: WorldConfig,
    policy_assignment: PolicyAssignment,
    mechanism_options: MechanismOptions,
    replications: int,
    jobs: int = 1,
    regression_level: str = "author",
) -> EvaluationReport:
    return run_paired_experiment(
        cfg, policy_assignment, [mechanism_options], replications, jobs, regression_level
    )[0]
