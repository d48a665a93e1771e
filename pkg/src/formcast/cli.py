"""Command-line entry point: simulate, train, predict, evaluate, states.

Exit codes: 0 on success, 1 on invalid input or usage, 2 on I/O failure.
Grid options come from flags, then the JSON file named by ``FFC_CONFIG``,
then built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import queue
import secrets
import socket
import sys
import threading
from dataclasses import dataclass, fields
from pathlib import Path

from formcast import __version__
from formcast.errors import ValidationError
from formcast.evaluator import run_evaluation
from formcast.grid import GridSpec, format_state_row, iter_states
from formcast.model import TrainingSession, load_table, save_table, train_stream
from formcast.predictor import format_predictions, predict_play, predictions_to_json
from formcast.simulator import SimulatorConfig, load_plays, run as run_simulator
from formcast.vision import DatagramReceiver, iter_packages, read_package

log = logging.getLogger("formcast")

CONFIG_ENV = "FFC_CONFIG"
FIFO_CAPACITY = 1024

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


@dataclass
class AppConfig:
    spec: GridSpec
    plays: str | None = None
    verbosity: int = 0


_SPEC_KEYS = {f.name for f in fields(GridSpec)}


def load_config_file(path: str | Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"config file {path} must hold a JSON object")
    unknown = set(doc) - _SPEC_KEYS - {"plays", "verbosity"}
    if unknown:
        raise ValidationError(f"unknown config keys {sorted(unknown)}")
    return doc


def resolve_config(args: argparse.Namespace, environ=os.environ) -> AppConfig:
    values: dict = {}
    if environ.get(CONFIG_ENV):
        values.update(load_config_file(environ[CONFIG_ENV]))
    if args.field is not None:
        x0, y0, w, h = args.field
        values.update(field_min_x=x0, field_min_y=y0, field_width=w, field_height=h)
    if args.cells_x is not None:
        values["cells_x"] = args.cells_x
    if args.cells_y is not None:
        values["cells_y"] = args.cells_y
    if getattr(args, "plays", None):
        values["plays"] = args.plays
    if args.verbose:
        values["verbosity"] = args.verbose
    spec_args = {k: v for k, v in values.items() if k in _SPEC_KEYS}
    for k in ("field_min_x", "field_min_y", "field_width", "field_height"):
        if k in spec_args:
            spec_args[k] = float(spec_args[k])
    return AppConfig(GridSpec(**spec_args), values.get("plays"), int(values.get("verbosity", 0)))


def _field(text: str) -> tuple[float, float, float, float]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected X0,Y0,WIDTH,HEIGHT") from None
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("expected X0,Y0,WIDTH,HEIGHT")
    return parts


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _seed(args, name: str = "seed") -> int:
    seed = getattr(args, name)
    if seed is None:
        seed = secrets.randbits(63)
        print(f"using seed {seed}", file=sys.stderr)
    return seed


def cmd_states(args, cfg: AppConfig) -> int:
    out = sys.stdout
    for i, state in iter_states(cfg.spec):
        out.write(format_state_row(i, state) + "\n")
    return EXIT_OK


def cmd_simulate(args, cfg: AppConfig) -> int:
    plays = load_plays(cfg.plays, cfg.spec)
    config = SimulatorConfig(
        seed=_seed(args),
        draws=args.draws,
        interval=args.interval,
        out=args.out,
        udp=args.udp,
        plays=plays,
        spec=cfg.spec,
    )
    run_simulator(config)
    return EXIT_OK


def _listen(endpoint: str, limit: int | None, idle_timeout: float, stats: dict):
    """Yield packages received on ``endpoint`` through a bounded FIFO.

    The receiver thread drops packages when the FIFO is full.  The stream
    ends after ``limit`` packages or ``idle_timeout`` seconds of silence.
    """
    fifo: queue.Queue = queue.Queue(FIFO_CAPACITY)
    stop = threading.Event()
    receiver = DatagramReceiver.bind(endpoint, timeout=0.2)
    log.info("listening on %s:%d", *receiver.address)

    def pump():
        while not stop.is_set():
            try:
                pkg = receiver.recv()
            except socket.timeout:
                continue
            if pkg is None:
                break
            try:
                fifo.put_nowait(pkg)
            except queue.Full:
                stats["dropped"] += 1

    thread = threading.Thread(target=pump, daemon=True)
    thread.start()
    received = 0
    try:
        while limit is None or received < limit:
            try:
                pkg = fifo.get(timeout=idle_timeout)
            except queue.Empty:
                log.info("no package for %.1f s, stopping", idle_timeout)
                break
            received += 1
            yield pkg
    finally:
        stop.set()
        thread.join()
        stats["garbage"] = receiver.skipped
        stats["stale"] = receiver.stale
        receiver.close()


def cmd_train(args, cfg: AppConfig) -> int:
    session = TrainingSession(cfg.spec)
    stats = {"dropped": 0}
    if args.input is not None:
        with open(args.input, "rb") as fh:
            train_stream(session, iter_packages(fh, skip_invalid=True), args.episodic, args.packages)
    else:
        packages = _listen(args.listen, args.packages, args.idle_timeout, stats)
        train_stream(session, packages, args.episodic)
    save_table(session.table, args.table)
    extra = "".join(f", {k} {v}" for k, v in stats.items() if v)
    print(
        f"consumed {session.packages_consumed} packages, recorded "
        f"{session.table.total_recorded} transitions "
        f"({session.table.nonzero_count()} distinct){extra}; table written to {args.table}"
    )
    return EXIT_OK


def cmd_predict(args, cfg: AppConfig) -> int:
    table = load_table(args.table, cfg.spec)
    with open(args.formation, "rb") as fh:
        pkg = read_package(fh)
    if pkg is None:
        raise ValidationError(f"{args.formation} holds no package")
    predictions = predict_play(table, cfg.spec, pkg, args.steps)
    if args.json:
        print(predictions_to_json(predictions, cfg.spec))
    else:
        print(format_predictions(predictions, cfg.spec))
    return EXIT_OK


def cmd_evaluate(args, cfg: AppConfig) -> int:
    table = load_table(args.table, cfg.spec)
    plays = load_plays(cfg.plays, cfg.spec)
    report = run_evaluation(table, cfg.spec, plays, args.tests, _seed(args), args.csv_dir)
    sys.stdout.write(report.summary())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    grid = common.add_argument_group("grid")
    grid.add_argument("--cells-x", type=_pos_int, help="cells along the field length (default 3)")
    grid.add_argument("--cells-y", type=_pos_int, help="cells along the field width (default 2)")
    grid.add_argument(
        "--field", type=_field, metavar="X0,Y0,W,H", help="field rectangle in mm (default 0,0,6000,4000)"
    )
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="formcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("states", parents=[common], help="list every state with its index as TSV")
    p.set_defaults(func=cmd_states)

    p = sub.add_parser("simulate", parents=[common], help="emit synthetic vision packages")
    p.add_argument("--seed", type=_nonneg_int, help="RNG seed (random and printed if omitted)")
    p.add_argument("--draws", type=_pos_int, required=True, help="number of simulator draws")
    p.add_argument("--interval", type=float, default=2.0, help="seconds between packages; 0 = fast")
    sink = p.add_mutually_exclusive_group(required=True)
    sink.add_argument("--out", metavar="FILE", help="write a .vpl log")
    sink.add_argument("--udp", metavar="HOST:PORT", help="send datagrams")
    p.add_argument("--plays", metavar="FILE", help="plays JSON (default: bundled plays)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="count state transitions into a table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input", metavar="FILE", help="read a .vpl log")
    src.add_argument("--listen", metavar="HOST:PORT", help="receive datagrams")
    p.add_argument("--table", metavar="OUT.ftab", required=True)
    p.add_argument("--packages", type=_pos_int, metavar="N", help="stop after N packages")
    p.add_argument("--episodic", action="store_true", help="reset between simulator draws")
    p.add_argument(
        "--idle-timeout", type=float, default=10.0, metavar="SECS",
        help="with --listen, stop after this long without packages",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict formations from one package")
    p.add_argument("--table", required=True, metavar="FILE")
    p.add_argument("--formation", required=True, metavar="PKG_FILE", help="log whose first package is observed")
    p.add_argument("--steps", type=_pos_int, default=2)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="score predictions against the plays")
    p.add_argument("--table", required=True, metavar="FILE")
    p.add_argument("--plays", metavar="FILE")
    p.add_argument("--tests", type=_nonneg_int, default=5000)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--csv-dir", metavar="DIR")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    try:
        cfg = resolve_config(args)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(cfg.verbosity, 2),
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args, cfg)
    except ValidationError as exc:
        print(f"formcast: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"formcast: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
