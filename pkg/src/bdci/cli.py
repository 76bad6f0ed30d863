"""Command-line entry point.

Subcommands:

* ``analyze`` -- resolve a trigger policy against a repository, run the
  version tests to collect traces (cached per revision), mine conditions
  for the monitored points, and report higher-order conflicts.
  Exit status: 0 no live conflicts, 3 live conflicts found, 1 error.
* ``mine`` -- stage isolation: parse trace files and write the mined
  condition per listed program point.
* ``inject`` -- run a mutation campaign from a spec file.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import shlex
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import analyzer, benchkit, miner, proplogic, scm, scoper, trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFLICTS = 3


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, label: str, cause: Exception):
        super().__init__(f"stage {stage} failed for version {label}: {cause}")
        self.stage = stage
        self.label = label


@dataclass
class Config:
    repo: str = ""
    branches: list[str] = field(default_factory=list)
    policy: str = "merge-request"
    base: str = ""
    a: str = ""
    b: str = ""
    tests: str = ""
    traces: str = ".bdci-traces"
    report: str = ""                 # empty: stdout
    min_samples: int = miner.DEFAULT_MIN_SAMPLES
    grid_budget: int = proplogic.DEFAULT_GRID_BUDGET
    suppress: list[str] = field(default_factory=list)

    def validate(self):
        if self.min_samples < 2:
            raise ConfigError("min_samples must be >= 2")
        if self.grid_budget < 10**3:
            raise ConfigError("grid_budget must be >= 1000")


def load_config_file(path: str | Path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        values[key.strip()] = value.strip()
    return values


_LIST_KEYS = {"branches", "suppress"}
_INT_KEYS = {"min_samples", "grid_budget"}


def apply_config_values(config: Config, values: dict[str, str]) -> Config:
    """Config-file values override flag values."""
    updates = {}
    for key, value in values.items():
        if not hasattr(config, key):
            raise ConfigError(f"unknown config key {key!r}")
        if key in _LIST_KEYS:
            updates[key] = [v.strip() for v in value.split(",") if v.strip()]
        elif key in _INT_KEYS:
            updates[key] = int(value)
        else:
            updates[key] = value
    return replace(config, **updates)


def _config_from_args(args: argparse.Namespace) -> Config:
    config = Config(
        repo=args.repo or "",
        branches=[b.strip() for b in (args.branches or "").split(",") if b.strip()],
        policy=args.policy,
        base=args.base or "",
        a=args.a or "",
        b=args.b or "",
        tests=args.tests or "",
        traces=args.traces,
        report=args.report or "",
        min_samples=args.min_samples,
        grid_budget=args.grid_budget,
        suppress=[s.strip() for s in (args.suppress or "").split(",") if s.strip()],
    )
    if args.config:
        config = apply_config_values(config, load_config_file(args.config))
    config.validate()
    return config


# ---------------------------------------------------------------------------
# analyze


def _policy_from_config(config: Config) -> tuple[scm.Policy, list[str]]:
    branches = list(config.branches)
    if config.policy == "merge-request":
        if not (config.a and config.b):
            raise ConfigError("merge-request policy needs --a and --b")
        if not branches:
            branches = [config.a, config.b]
        return scm.OnMergeRequest(config.a, config.b), branches
    if config.policy == "on-commit":
        if not config.a:
            raise ConfigError("on-commit policy needs --a (the committed rev)")
        if not branches:
            raise ConfigError("on-commit policy needs --branches")
        if config.a not in branches:
            branches = [config.a] + branches
        return scm.OnCommit(config.a), branches
    if config.policy == "nightly":
        if not branches:
            raise ConfigError("nightly policy needs --branches")
        return scm.Nightly(), branches
    raise ConfigError(f"unknown policy {config.policy!r}")


def _run_version_tests(config: Config, workdir: Path, tracedir: Path, label: str):
    cmd = config.tests.format(workdir=shlex.quote(str(workdir)),
                              tracedir=shlex.quote(str(tracedir)),
                              label=shlex.quote(label))
    proc = subprocess.run(cmd, shell=True, capture_output=True, text=True)
    if proc.returncode != 0:
        raise RuntimeError(f"test command exited {proc.returncode}: "
                           f"{proc.stderr.strip() or proc.stdout.strip()}")


def _collect_samples(config: Config, ref: scm.VersionRef, workdir: Path,
                     monitored: list, monitored_hash: str) -> dict:
    """Run (or reuse cached) traces for one materialized version."""
    label = ref.rev[:12]
    tracedir = Path(config.traces) / f"{label}-{monitored_hash}"
    if not any(tracedir.glob("*.trace")):
        tracedir.mkdir(parents=True, exist_ok=True)
        (tracedir / "monitored.points").write_text(
            "".join(f"{p.rendered}\n" for p in monitored), encoding="utf-8")
        try:
            _run_version_tests(config, workdir, tracedir, label)
        except Exception as exc:
            raise StageError("test execution", ref.short(), exc) from exc
    try:
        log = trace.load_trace_dir(tracedir)
    except trace.TraceError as exc:
        raise StageError("trace parsing", ref.short(), exc) from exc
    return trace.samples_by_point(log)


def _analyze_triple(config: Config, adapter: scm.GitAdapter,
                    triple: tuple[scm.VersionRef, scm.VersionRef, scm.VersionRef],
                    scratch: Path) -> analyzer.AnalysisOutcome:
    base_ref, ref_a, ref_b = triple

    # materialize the trees first; they determine the monitored set, which
    # keys the trace cache together with the revision
    workdirs = {}
    for ref in triple:
        label = ref.rev[:12]
        workdir = scratch / label
        if not workdir.exists():
            try:
                scm.materialize(adapter, ref.rev, workdir)
            except scm.ScmError as exc:
                raise StageError("materialize", ref.short(), exc) from exc
        workdirs[ref.rev] = workdir

    try:
        trees = {rev: scoper.load_tree(wd) for rev, wd in workdirs.items()}
        monitored = sorted(scoper.monitored_for_comparison(
            trees[base_ref.rev], trees[ref_a.rev], trees[ref_b.rev]),
            key=lambda p: p.rendered)
    except OSError as exc:
        raise StageError("diff scoping", base_ref.short(), exc) from exc
    monitored_hash = hashlib.md5(
        "\n".join(p.rendered for p in monitored).encode()).hexdigest()[:8]

    maps = {}
    for ref in triple:
        samples = _collect_samples(config, ref, workdirs[ref.rev], monitored,
                                   monitored_hash)
        try:
            maps[ref.rev] = miner.mine_point_map(samples, monitored,
                                                 min_samples=config.min_samples)
        except miner.MinerInputError as exc:
            raise StageError("mining", ref.short(), exc) from exc

    try:
        return analyzer.detect_conflicts(
            maps[base_ref.rev], maps[ref_a.rev], maps[ref_b.rev],
            suppressed_variables=config.suppress,
            labels=(ref_a.short(), ref_b.short()),
            grid_budget=config.grid_budget)
    except Exception as exc:
        raise StageError("conflict detection", f"{ref_a.short()}/{ref_b.short()}", exc) from exc


def cmd_analyze(config: Config) -> int:
    if not config.repo:
        raise ConfigError("analyze needs --repo")
    if not config.tests:
        raise ConfigError("analyze needs --tests (the test command template)")
    adapter = scm.GitAdapter(config.repo)
    policy, branches = _policy_from_config(config)
    plan = scm.plan_comparisons(adapter, policy, branches)
    if config.base:
        base_sha = adapter.resolve(config.base)
        plan = scm.ComparisonPlan(tuple(
            (scm.VersionRef(adapter.repo, base_sha, scm.Role.BASE, config.base), a, b)
            for _, a, b in plan.triples))

    sections = []
    any_live = False
    with tempfile.TemporaryDirectory(prefix="bdci-work-") as scratch:
        for triple in plan.triples:
            base_ref, ref_a, ref_b = triple
            outcome = _analyze_triple(config, adapter, triple, Path(scratch))
            any_live = any_live or bool(outcome.live_conflicts())
            text = analyzer.render_report(
                outcome, labels=(base_ref.short(), ref_a.short(), ref_b.short()))
            if len(plan.triples) > 1:
                header = (f"== {ref_a.short()} vs {ref_b.short()} "
                          f"(base {base_ref.rev[:12]}) ==")
                text = header + "\n" + text
            sections.append(text)

    report = "\n".join(sections)
    if config.report:
        Path(config.report).parent.mkdir(parents=True, exist_ok=True)
        Path(config.report).write_text(report, encoding="utf-8")
    else:
        sys.stdout.write(report)
    return EXIT_CONFLICTS if any_live else EXIT_OK


# ---------------------------------------------------------------------------
# mine


def cmd_mine(traces_dir: str, points_file: str, out_file: str,
             min_samples: int = miner.DEFAULT_MIN_SAMPLES) -> int:
    log = trace.load_trace_dir(traces_dir)
    by_point = trace.samples_by_point(log)
    points = []
    for raw in Path(points_file).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            points.append(trace.ProgramPoint.parse(line))
    mined = miner.mine_point_map(by_point, points, min_samples=min_samples)
    lines = []
    for pp in points:
        ps = mined[pp]
        condition = None if ps.uncomparable else ps.condition()
        lines.append(proplogic.format_condition_line(pp.rendered, condition))
    text = "\n".join(lines) + ("\n" if lines else "")
    Path(out_file).write_text(text, encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inject


def cmd_inject(config: Config, spec_file: str, out_file: str = "") -> int:
    spec_path = Path(spec_file)
    corpus, cases = benchkit.parse_campaign_spec(
        spec_path.read_text(encoding="utf-8"), spec_path.parent)
    result = benchkit.run_campaign(corpus, cases,
                                   min_samples=config.min_samples,
                                   grid_budget=config.grid_budget,
                                   suppressed_variables=config.suppress)
    table = result.to_table()
    if out_file:
        Path(out_file).write_text(table, encoding="utf-8")
        sys.stdout.write(result.summary())
    else:
        sys.stdout.write(table + "\n" + result.summary())
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdci",
        description="Detect higher-order conflicts between parallel branches "
                    "by mining and comparing behavioral conditions.")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the full detection pipeline")
    pa.add_argument("--repo", help="repository path")
    pa.add_argument("--policy", default="merge-request",
                    choices=["on-commit", "merge-request", "nightly"])
    pa.add_argument("--base", help="override the latest common ancestor")
    pa.add_argument("--a", help="first branch (or the committed rev for on-commit)")
    pa.add_argument("--b", help="second branch")
    pa.add_argument("--branches", help="comma-separated branch list")
    pa.add_argument("--tests", help="test command template; receives "
                                    "{workdir} {tracedir} {label}")
    pa.add_argument("--traces", default=".bdci-traces", help="trace cache directory")
    pa.add_argument("--report", help="report output path (default: stdout)")
    pa.add_argument("--min-samples", type=int, default=miner.DEFAULT_MIN_SAMPLES,
                    dest="min_samples")
    pa.add_argument("--grid-budget", type=int, default=proplogic.DEFAULT_GRID_BUDGET,
                    dest="grid_budget")
    pa.add_argument("--suppress", help="comma-separated noise variable names")
    pa.add_argument("--config", help="key=value config file overriding flags")

    pm = sub.add_parser("mine", help="mine conditions from trace files")
    pm.add_argument("--traces", required=True, help="directory of *.trace files")
    pm.add_argument("--points", required=True, help="monitored-set file, one point per line")
    pm.add_argument("--out", required=True, help="output condition-map file")
    pm.add_argument("--min-samples", type=int, default=miner.DEFAULT_MIN_SAMPLES,
                    dest="min_samples")

    pi = sub.add_parser("inject", help="run an injection campaign")
    pi.add_argument("--spec", required=True, help="campaign spec file")
    pi.add_argument("--out", help="write the result table to this path")
    pi.add_argument("--min-samples", type=int, default=miner.DEFAULT_MIN_SAMPLES,
                    dest="min_samples")
    pi.add_argument("--grid-budget", type=int, default=proplogic.DEFAULT_GRID_BUDGET,
                    dest="grid_budget")
    pi.add_argument("--suppress", help="comma-separated noise variable names")
    pi.add_argument("--config", help="key=value config file overriding flags")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="bdci: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            return cmd_analyze(_config_from_args(args))
        if args.command == "mine":
            return cmd_mine(args.traces, args.points, args.out, args.min_samples)
        if args.command == "inject":
            config = Config(min_samples=args.min_samples, grid_budget=args.grid_budget,
                            suppress=[s.strip() for s in (args.suppress or "").split(",")
                                      if s.strip()])
            if args.config:
                config = apply_config_values(config, load_config_file(args.config))
            config.validate()
            return cmd_inject(config, args.spec, args.out or "")
    except (ConfigError, StageError, scm.ScmError, benchkit.MutationError,
            trace.TraceError, proplogic.ConditionParseError, analyzer.AnalyzerInputError,
            OSError, ValueError) as exc:
        print(f"bdci: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
