"""Command line driver: ``loadproxy simulate | calibrate | analyze | report``.

Exit codes: 0 success, 1 invalid input or configuration, 2 calibration
failure, 3 I/O failure. Diagnostics go to standard error.

``--config PATH`` reads a flat ``key = value`` file whose keys are the long
option names (dashes or underscores); explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import InvalidArgumentError, LoadProxyError
from ..ingest import SubscaleMap, parse_events, parse_items, parse_questionnaires
from ..irt import CalibrationConfig
from ..proxy import learner_rows
from ..simgen import FIXTURE_FILES, SimConfig, emit_fixture, simulate_study
from . import pipeline
from .svg import heatmap_svg, line_chart_svg

EXIT_OK, EXIT_INPUT, EXIT_CALIBRATION, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _read_text(path) -> str:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None


def _write_text(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _parse(parser_fn, path):
    text = _read_text(path)
    try:
        return parser_fn(text)
    except LoadProxyError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None


def load_config_file(path) -> dict[str, str]:
    values = {}
    for n, raw in enumerate(_read_text(path).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}: line {n}: expected key = value", EXIT_INPUT)
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _config_defaults(path, parser) -> dict:
    """Convert a config file into defaults for ``parser``."""
    actions = {a.dest: a for a in parser._actions}
    out = {}
    for key, text in load_config_file(path).items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise CliError(f"{path}: unknown key {key!r}", EXIT_INPUT)
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            truthy = text.lower() in ("1", "true", "yes", "on")
            out[key] = truthy
            continue
        try:
            out[key] = (action.type or str)(text)
        except (TypeError, ValueError):
            raise CliError(f"{path}: bad value for {key}: {text!r}", EXIT_INPUT) from None
        if action.choices is not None and out[key] not in action.choices:
            raise CliError(f"{path}: {key} must be one of {sorted(action.choices)}", EXIT_INPUT)
    return out


def _fixture_path(args, attr, key):
    value = getattr(args, attr, None)
    if value is not None:
        return Path(value)
    if getattr(args, "fixture", None) is not None:
        return Path(args.fixture) / FIXTURE_FILES[key]
    raise CliError(f"--{attr.replace('_', '-')} or --fixture is required", EXIT_INPUT)


def _require_file(path: Path):
    if not path.is_file():
        raise CliError(f"input file not found: {path}", EXIT_IO)


def cmd_simulate(args) -> int:
    session = args.session_items if args.session_items is not None else min(90, max(args.items, 0))
    routing = args.routing_items if args.routing_items is not None else min(20, session // 2)
    try:
        config = SimConfig(
            n_learners=args.learners,
            n_items=args.items,
            theta_mean=args.theta_mean,
            theta_sd=args.theta_sd,
            b_min=args.b_min,
            b_max=args.b_max,
            routing_item_count=routing,
            routing_level=args.routing_level,
            adaptation_step=args.step,
            session_item_count=session,
            administration_every=args.every,
            noise_sd=args.noise_sd,
            seed=args.seed,
            study_learners=args.study_learners,
        )
        study = simulate_study(config)
    except InvalidArgumentError as exc:
        raise CliError(f"invalid simulation config: {exc}", EXIT_INPUT) from None
    except LoadProxyError as exc:
        raise CliError(f"simulation failed: {exc}", EXIT_INPUT) from None
    out = Path(args.out)
    try:
        emit_fixture(study, out)
    except OSError as exc:
        raise CliError(str(exc), EXIT_IO) from None
    print(f"seed {config.seed}")
    print(f"database: {config.n_learners} learners x {config.n_items} items, "
          f"{len(study.responses)} responses")
    print(f"study: {config.study_learners} learners, {len(study.session_events())} events, "
          f"{len(study.administrations())} questionnaires")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    events_path = _fixture_path(args, "events", "events")
    _require_file(events_path)
    events = _parse(parse_events, events_path)
    items = None
    if args.kind != "all":
        items_path = _fixture_path(args, "items", "items")
        _require_file(items_path)
        items = _parse(parse_items, items_path)
    try:
        calib_config = CalibrationConfig(
            max_iterations=args.max_iterations,
            convergence_tolerance=args.tolerance,
        )
        run = pipeline.run_calibration(
            events, args.min_responses, calib_config, items,
            None if args.kind == "all" else args.kind,
        )
    except InvalidArgumentError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    except LoadProxyError as exc:
        raise CliError(f"calibration failed: {exc}", EXIT_CALIBRATION) from None

    out = Path(args.out)
    _write_text(out / "calibration.csv", pipeline.calibration_csv(run))
    _write_text(out / "exclusions.csv", pipeline.exclusions_csv(run.result))
    res = run.result
    print(f"items kept {run.kept_item_count}, removed {run.removed_item_count} "
          f"(fewer than {args.min_responses} responses)")
    print(f"calibrated {len(res.items)} items, {len(res.abilities)} learners, "
          f"{len(res.exclusions)} exclusions, {res.iterations_used} sweeps, "
          f"converged={res.converged}")
    return EXIT_OK


def _render_svgs(out: Path, rows, trends):
    labels, grid = pipeline.heatmap_grid(rows)
    _write_text(out / "heatmap.svg", heatmap_svg(
        list(pipeline.HEATMAP_ROWS), labels, grid,
        title="Per-learner means (learners ascending by reported CL)",
    ))
    x = [t["administration_index"] for t in trends]
    series = {
        "difficulty": [t["diff_std_mean"] for t in trends],
        "intrinsic (reported)": [t["il_mean"] for t in trends],
        "cognitive load (reported)": [t["cl_mean"] for t in trends],
        "extraneous (reported)": [t["el_mean"] for t in trends],
        "difficulty + extraneous": [t["combined_std_mean"] for t in trends],
    }
    _write_text(out / "trends.svg", line_chart_svg(
        x, series, title="Measures by questionnaire administration",
        x_label="administration index",
    ))


def cmd_analyze(args) -> int:
    out = Path(args.out)
    calibration_path = Path(args.calibration) if args.calibration else out / "calibration.csv"
    events_path = _fixture_path(args, "events", "session_events")
    q_path = _fixture_path(args, "questionnaires", "questionnaires")
    map_path = _fixture_path(args, "subscale_map", "subscale_map")
    routing_path = None
    if args.routing is not None:
        routing_path = Path(args.routing)
    elif args.fixture is not None:
        routing_path = Path(args.fixture) / FIXTURE_FILES["ground_truth"]
    for p in (calibration_path, events_path, q_path, map_path):
        _require_file(p)
    if routing_path is not None:
        _require_file(routing_path)

    difficulties = _parse(pipeline.parse_calibration, calibration_path)
    events = _parse(parse_events, events_path)
    admins = _parse(parse_questionnaires, q_path)
    if not admins:
        raise CliError(f"{q_path}: no administrations", EXIT_INPUT)
    smap = _parse(SubscaleMap.from_json, map_path)
    routing = {}
    if routing_path is not None:
        is_json = routing_path.suffix.lower() == ".json"
        routing = _parse(lambda t: pipeline.parse_routing(t, is_json), routing_path)

    try:
        analysis = pipeline.run_analysis(difficulties, events, admins, smap, routing)
    except LoadProxyError as exc:
        raise CliError(f"analysis failed: {exc}", EXIT_INPUT) from None

    _write_text(out / "segments.csv", pipeline.segments_csv(analysis))
    _write_text(out / "proxy.csv", pipeline.proxy_csv(analysis.records))
    _write_text(out / "trends.csv", pipeline.trends_csv(analysis.trends))
    _write_text(out / "warnings.csv", pipeline.warnings_csv(analysis))
    _write_text(out / "metadata.json", pipeline.metadata_json(analysis))
    if args.svg:
        trends = pipeline.parse_trends(pipeline.trends_csv(analysis.trends))
        _render_svgs(out, analysis.rows, trends)
    if analysis.undefined:
        print(f"warning: {len(analysis.undefined)} segments without calibrated items "
              f"(see {out / 'warnings.csv'})", file=sys.stderr)
    print(f"{len(analysis.segments)} segments, {len(analysis.records)} proxy records, "
          f"{len(analysis.rows)} learners")
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    proxy_path = Path(args.proxy) if args.proxy else out / "proxy.csv"
    trends_path = Path(args.trends) if args.trends else out / "trends.csv"
    for p in (proxy_path, trends_path):
        _require_file(p)
    records = _parse(pipeline.parse_proxy, proxy_path)
    if not records:
        raise CliError(f"{proxy_path}: no records", EXIT_INPUT)
    trends = _parse(pipeline.parse_trends, trends_path)
    _render_svgs(out, learner_rows(records), trends)
    print(f"wrote {out / 'heatmap.svg'} and {out / 'trends.svg'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loadproxy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="flat key = value option file")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory")

    sim = sub.add_parser("simulate", help="write a synthetic fixture directory")
    common(sim)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--learners", type=int, default=1000, help="database learners")
    sim.add_argument("--items", type=int, default=200, help="item bank size")
    sim.add_argument("--study-learners", type=int, default=35)
    sim.add_argument("--session-items", type=int, default=None,
                     help="items per adaptive session (default: min(90, items))")
    sim.add_argument("--routing-items", type=int, default=None,
                     help="routing phase length (default: min(20, session_items // 2))")
    sim.add_argument("--routing-level", type=float, default=1.5)
    sim.add_argument("--step", type=float, default=0.3, help="adaptation step in logits")
    sim.add_argument("--every", type=int, default=10, help="items per questionnaire interval")
    sim.add_argument("--noise-sd", type=float, default=0.05)
    sim.add_argument("--theta-mean", type=float, default=0.0)
    sim.add_argument("--theta-sd", type=float, default=1.0)
    sim.add_argument("--b-min", type=float, default=-3.0)
    sim.add_argument("--b-max", type=float, default=3.0)
    sim.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calibrate", help="estimate item difficulties from events.csv")
    common(cal)
    cal.add_argument("--fixture", metavar="DIR", help="directory with the standard file names")
    cal.add_argument("--events", metavar="PATH")
    cal.add_argument("--items", metavar="PATH")
    cal.add_argument("--kind", choices=("all", "independent", "passage"), default="all")
    cal.add_argument("--min-responses", type=int, default=100)
    cal.add_argument("--max-iterations", type=int, default=100)
    cal.add_argument("--tolerance", type=float, default=1e-4)
    cal.set_defaults(func=cmd_calibrate)

    ana = sub.add_parser("analyze", help="segments, proxy and trends for a study")
    common(ana)
    ana.add_argument("--fixture", metavar="DIR")
    ana.add_argument("--calibration", metavar="PATH", help="default: OUT/calibration.csv")
    ana.add_argument("--events", metavar="PATH", help="study session events")
    ana.add_argument("--questionnaires", metavar="PATH")
    ana.add_argument("--subscale-map", metavar="PATH")
    ana.add_argument("--routing", metavar="PATH",
                     help="ground_truth.json or CSV learner_id,routing_end_ts")
    ana.add_argument("--no-svg", dest="svg", action="store_false")
    ana.set_defaults(func=cmd_analyze)

    rep = sub.add_parser("report", help="re-render SVGs from proxy.csv and trends.csv")
    common(rep)
    rep.add_argument("--proxy", metavar="PATH")
    rep.add_argument("--trends", metavar="PATH")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            subparser = parser._subparsers._group_actions[0].choices[args.command]
            subparser.set_defaults(**_config_defaults(args.config, subparser))
            args = parser.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"loadproxy {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
