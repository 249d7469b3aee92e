"""
gait-auth-service command line

    python app.py synth    --out data/            synthetic cohort + truth + manifest
    python app.py pipeline data/ --out feats.csv  logs -> 289-value feature vectors [--dump-dir debug/]
    python app.py train    data/ --model m.txt    PCA + kNN gallery or per-user SVMs
    python app.py eval     data/ --out report.json [--roc roc.csv] [--sweep] [--ab-disorientation]
    python app.py identify data/ --model m.txt    per-session predicted subject (CSV)

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 internal error.
"""

import argparse
import contextlib
import logging
import sys
from typing import Dict, List, Optional, Sequence

import pandas as pd

from gaitauth import __version__
from gaitauth.config import ORIENTATION_MODES, SCHEMES, PipelineConfig, resolve_config
from gaitauth.console import banner, setup_logging, status, step
from gaitauth.errors import ConfigError, DataError
from gaitauth.evaluation import (
    disorientation_ab,
    evaluate,
    plurality,
    sweep_train_fraction,
    verification_dict,
    write_report_json,
    write_roc_csv,
)
from gaitauth.features import FeatureVector, read_features_csv, write_features_csv
from gaitauth.ingest import RawSession, load_session
from gaitauth.model import identify, load_model, save_model, train_gait_model
from gaitauth.pipeline import VARIANTS, collect_inputs, process_files, write_session_dump
from gaitauth.synth import gen_cohort, write_cohort

logger = logging.getLogger("gaitauth.app")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
SWEEP_FRACTIONS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)

# flag name -> PipelineConfig field
CONFIG_FLAGS = {
    "rate_hz": float, "wavelet_levels": int, "tau": float, "epsilon_fraction": float,
    "n_s": int, "fft_offset": int, "pca_variance": float, "svm_c": float,
    "train_fraction": float, "seed": int, "jobs": int,
    "subjects": int, "sessions": int, "duration_s": float, "noise_sigma": float,
    "drift_rate": float, "min_param_distance": float,
}


class UsageParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = UsageParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug diagnostics")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    for name, kind in CONFIG_FLAGS.items():
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=kind, default=None)
    common.add_argument("--scheme", choices=SCHEMES, default=None)
    common.add_argument("--orientation-mode", dest="orientation_mode", choices=ORIENTATION_MODES, default=None)

    parser = UsageParser(prog="app.py", description="Orientation-independent gait verification and identification")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic cohort")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("pipeline", parents=[common], help="extract feature vectors from logs")
    p.add_argument("inputs", nargs="+", help="log files or directories")
    p.add_argument("--out", help="features CSV (default: stdout)")
    p.add_argument("--variant", choices=VARIANTS, default="earth")
    p.add_argument("--dump-dir", dest="dump_dir", help="per-session denoised channels and cycle starts")

    p = sub.add_parser("train", parents=[common], help="train a model file")
    p.add_argument("inputs", nargs="+", help="features CSV, log files or directories")
    p.add_argument("--model", required=True, help="model file to write")

    p = sub.add_parser("eval", parents=[common], help="verification and identification report")
    p.add_argument("inputs", nargs="*", help="features CSV, log files or directories")
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.add_argument("--roc", help="pattern ROC as CSV threshold,far,frr")
    p.add_argument("--sweep", action="store_true", help="EER per training fraction")
    p.add_argument("--ab-disorientation", dest="ab_disorientation", action="store_true",
                   help="compare device-frame, magnitude-only and Earth-frame pipelines")

    p = sub.add_parser("identify", parents=[common], help="predict the subject of each session")
    p.add_argument("inputs", nargs="+", help="log files or directories")
    p.add_argument("--model", required=True, help="model file")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {name: getattr(args, name, None) for name in list(CONFIG_FLAGS) + ["scheme", "orientation_mode"]}
    return resolve_config(overrides=overrides, config_path=args.config)


def print_config(command: str, config: PipelineConfig) -> None:
    rows = [(name, value) for name, value in config.as_dict().items()]
    rows.append(("config_digest", config.digest()))
    banner(f"🔧 gait-auth-service {__version__}: {command}", rows)


@contextlib.contextmanager
def open_output(path: Optional[str]):
    """Text stream for path, or stdout when no path is given."""
    if not path:
        yield sys.stdout
        return
    try:
        f = open(path, "w", encoding="utf-8", newline="")
    except OSError as e:
        raise DataError(f"cannot write {path}: {e.strerror}") from None
    with f:
        yield f


def _is_features_csv(path: str) -> bool:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.readline().startswith("subject_id,session_id,")
    except (OSError, UnicodeDecodeError):
        return False


def load_vectors(inputs: Sequence[str], config: PipelineConfig) -> List[FeatureVector]:
    """Feature vectors from features CSVs or, for logs, by running the pipeline."""
    files = collect_inputs(inputs)
    vectors: List[FeatureVector] = []
    logs = []
    for path in files:
        if _is_features_csv(path):
            with open(path, "r", encoding="utf-8", newline="") as f:
                vectors += read_features_csv(f)
        else:
            logs.append(path)
    if logs:
        outcomes = process_files(logs, config)
        if not any(o.ok for o in outcomes):
            raise DataError(f"all {len(logs)} input logs failed")
        vectors += [v for o in outcomes if o.ok for v in o.result.vectors]
    if not vectors:
        raise DataError("no feature vectors")
    return vectors


def load_sessions(inputs: Sequence[str]) -> List[RawSession]:
    sessions = []
    for path in collect_inputs(inputs):
        try:
            sessions.append(load_session(path))
        except DataError as e:
            logger.warning(f"⚠️ skipping {path}: {e}")
    if not sessions:
        raise DataError("no readable session logs")
    return sessions


def cmd_synth(config: PipelineConfig, out_dir: str) -> List[str]:
    with step("generate cohort"):
        cohort = gen_cohort(config.subjects, config.sessions, config)
    with step("write files"):
        written = write_cohort(cohort, out_dir, config)
    status(f"✅ {len(cohort.sessions)} sessions written to {out_dir}")
    return written


def cmd_pipeline(config: PipelineConfig, inputs: Sequence[str], out: Optional[str],
                 variant: str = "earth", dump_dir: Optional[str] = None) -> List[FeatureVector]:
    files = collect_inputs(inputs)
    with step(f"process {len(files)} logs"):
        outcomes = process_files(files, config, variant)
    failed = [o for o in outcomes if not o.ok]
    if len(failed) == len(outcomes):
        raise DataError(f"all {len(outcomes)} input logs failed")

    vectors = [v for o in outcomes if o.ok for v in o.result.vectors]
    with open_output(out) as stream:
        write_features_csv(vectors, stream)
    if dump_dir:
        for o in outcomes:
            if o.ok:
                write_session_dump(o.result, dump_dir)
        status(f"📝 signals and cycle starts written to {dump_dir}")
    status(f"✅ {len(vectors)} feature vectors from {len(outcomes) - len(failed)} logs")
    if failed:
        status(f"⚠️ {len(failed)} log(s) skipped")
    return vectors


def cmd_train(config: PipelineConfig, inputs: Sequence[str], model_path: str) -> None:
    vectors = load_vectors(inputs, config)
    with step(f"train {config.scheme}"):
        model = train_gait_model(vectors, config.scheme, config.pca_variance,
                                 config.svm_c, config.seed, config.jobs)
    with open_output(model_path) as stream:
        save_model(model, stream)
    status(f"✅ model for {len(model.subjects)} subjects written to {model_path}")


def cmd_eval(config: PipelineConfig, inputs: Sequence[str], out: Optional[str], roc_path: Optional[str] = None,
             sweep: bool = False, ab_disorientation: bool = False) -> Dict:
    payload: Dict = {"config": config.as_dict(), "config_digest": config.digest(), "scheme": config.scheme}

    if ab_disorientation:
        with step("disorientation study"):
            if inputs:
                sessions = load_sessions(inputs)
            else:
                sessions = [s.session for s in gen_cohort(config.subjects, config.sessions, config).sessions]
            results = disorientation_ab(sessions, config)
        payload["disorientation"] = {variant: verification_dict(r) for variant, r in results.items()}
        pattern_report = (results.get("earth") or next(iter(results.values()))).pattern
        for variant, r in results.items():
            status(f"   {variant:<10} EER {r.pattern.eer:.4f}")
    else:
        if not inputs:
            raise ConfigError("eval needs inputs unless --ab-disorientation is given")
        vectors = load_vectors(inputs, config)
        with step(f"evaluate {config.scheme}"):
            verification, identification = evaluate(config.scheme, vectors, config)
        payload["verification"] = verification_dict(verification)
        payload["identification"] = {
            "pattern_accuracy": identification.pattern_accuracy,
            "session_accuracy": identification.session_accuracy,
            "n_patterns": identification.n_patterns,
            "n_sessions": identification.n_sessions,
        }
        pattern_report = verification.pattern
        if sweep:
            with step("training fraction sweep"):
                curve = sweep_train_fraction(config.scheme, vectors, SWEEP_FRACTIONS, config)
            payload["sweep"] = [{"train_fraction": f, "eer": eer} for f, eer in curve]
        status(f"✅ pattern EER {verification.pattern.eer:.4f}, "
               f"session identification {identification.session_accuracy:.4f}")

    with open_output(out) as stream:
        write_report_json(payload, stream)
    if roc_path:
        with open_output(roc_path) as stream:
            write_roc_csv(pattern_report, stream)
    return payload


def cmd_identify(config: PipelineConfig, model_path: str, inputs: Sequence[str]) -> List[List[str]]:
    try:
        with open(model_path, "r", encoding="utf-8") as f:
            model = load_model(f)
    except OSError as e:
        raise DataError(f"cannot read {model_path}: {e.strerror}") from None

    outcomes = process_files(collect_inputs(inputs), config)
    rows = []
    for o in outcomes:
        if not o.ok or not o.result.vectors:
            continue
        predictions = [identify(model, v.values) for v in o.result.vectors]
        rows.append([o.result.session_id, o.result.subject_id, plurality(predictions)])
    if not rows:
        raise DataError("no session produced a gait pattern")

    table = pd.DataFrame(rows, columns=["session_id", "subject_id", "predicted"])
    table.to_csv(sys.stdout, index=False, lineterminator="\n")
    return rows


def run(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging("DEBUG" if args.verbose else "WARNING" if args.quiet else None)
    config = config_from_args(args)
    print_config(args.command, config)

    if args.command == "synth":
        cmd_synth(config, args.out)
    elif args.command == "pipeline":
        cmd_pipeline(config, args.inputs, args.out, args.variant, args.dump_dir)
    elif args.command == "train":
        cmd_train(config, args.inputs, args.model)
    elif args.command == "eval":
        cmd_eval(config, args.inputs, args.out, args.roc, args.sweep, args.ab_disorientation)
    elif args.command == "identify":
        cmd_identify(config, args.model, args.inputs)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        return run(argv)
    except ConfigError as e:
        status(f"❌ usage: {e}")
        return EXIT_USAGE
    except DataError as e:
        status(f"❌ data error: {e}")
        return EXIT_DATA
    except Exception as e:  # noqa: BLE001
        logger.debug("internal error", exc_info=True)
        status(f"❌ internal error: {type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
