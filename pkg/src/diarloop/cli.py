"""Command-line surface.

Batch subcommands (simulate, sweep, evaluate, synth) run the engine
in-process over bundle directories; ``serve`` starts the HTTP session
service and ``stream`` acts as a thin live client pushing a bundle into
a served session. Exit codes: 0 success, 1 invalid input, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bundles import load_bundle, parse_rttm, save_bundle
from .engine import Toggles
from .errors import DiarloopError, ValidationError
from .gateway import HttpGateway
from .metrics import Timeline, compute_der
from .model import SessionConfig, segment_to_dict
from .simulator import RunSpec, expand_grid, run_meeting, sweep
from .synth import SynthParams, synth_meeting


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


CONFIG_KEY_MAP = {
    "swm.window_s": "swm_window_s",
    "swm.stride_s": "swm_stride_s",
    "swm.theta": "dominance",
    "loop.interval": "summary_interval",
    "loop.correction_limit": "correction_limit",
    "loop.max_online_enrollments": "max_online_enrollments",
    "loop.display_mode": "display_mode",
    "loop.correction_context_turns": "correction_context_turns",
    "score.collar": "collar_s",
}


def _load_config_file(path: str | None) -> tuple[dict, dict]:
    """Config file with dotted keys; returns (SessionConfig kwargs, llm/score extras)."""
    if not path:
        return {}, {}
    raw = json.loads(Path(path).read_text("utf-8"))
    cfg_kwargs: dict = {}
    extras: dict = {}
    for key, value in raw.items():
        if key in CONFIG_KEY_MAP:
            cfg_kwargs[CONFIG_KEY_MAP[key]] = value
        elif key in ("score.mapping", "llm.endpoint", "llm.mock"):
            extras[key] = value
        else:
            raise ValidationError(f"unknown config key {key!r}", location=path)
    return cfg_kwargs, extras


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, args: argparse.Namespace, inputs: list[Path]) -> None:
    """Reproducibility record: flags, seeds and input checksums."""
    manifest = {
        "argv": sys.argv[1:],
        "options": {
            k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
        },
        "inputs": {
            str(p): _sha256_file(p) for p in sorted(inputs) if p.is_file()
        },
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", "utf-8"
    )


def _bundle_inputs(bundle_dir: Path) -> list[Path]:
    return sorted(p for p in bundle_dir.iterdir() if p.is_file())


def _config_from_args(args: argparse.Namespace) -> tuple[SessionConfig, dict]:
    """SessionConfig from the config file plus flag overrides; extras
    carry score.mapping / llm.* file entries for the caller."""
    cfg_kwargs, extras = _load_config_file(getattr(args, "config", None))
    for attr, key in (
        ("interval", "summary_interval"),
        ("limit", "correction_limit"),
        ("oe", "max_online_enrollments"),
        ("display", "display_mode"),
        ("collar", "collar_s"),
        ("theta", "dominance"),
        ("window", "swm_window_s"),
        ("stride", "swm_stride_s"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            cfg_kwargs[key] = value
    return SessionConfig(**cfg_kwargs), extras


def cmd_evaluate(args: argparse.Namespace) -> int:
    ref = Timeline.from_annotation(
        parse_rttm(Path(args.ref).read_text("utf-8").splitlines())
    )
    hyp = Timeline.from_annotation(
        parse_rttm(Path(args.hyp).read_text("utf-8").splitlines())
    )
    report = compute_der(ref, hyp, collar_s=args.collar, mapping=args.mapping)
    print(report.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8"
        )
        _write_manifest(out, args, [Path(args.ref), Path(args.hyp)])
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    params = SynthParams(
        n_speakers=args.speakers,
        duration_s=args.duration,
        merge_rate=args.merge_rate,
        confusion_rate=args.confusion_rate,
        vote_noise=args.vote_noise,
        seed=args.seed,
    )
    made = []
    for i in range(args.meetings):
        bundle = synth_meeting(replace(params, seed=args.seed + i))
        target = out / bundle.meeting_id if args.meetings > 1 else out
        save_bundle(bundle, target)
        made.append(bundle.meeting_id)
        print(f"wrote {target} ({len(bundle.segments)} segments)")
    _write_manifest(out, args, [])
    return 0


def _spec_from_args(args: argparse.Namespace) -> tuple[RunSpec, dict]:
    cfg, extras = _config_from_args(args)
    gateway_url = args.gateway or extras.get("llm.endpoint")
    mapping = args.mapping
    if mapping == "identity" and "score.mapping" in extras:
        mapping = extras["score.mapping"]
    toggles = Toggles(
        swm=args.swm,
        oe=args.oe != 0 if args.oe is not None else True,
        corrections=args.corrections,
    )
    spec = RunSpec(
        cfg=cfg,
        toggles=toggles,
        oracle_user=gateway_url is None,
        seed=args.seed,
        mapping=mapping,
    )
    return spec, {**extras, "gateway_url": gateway_url}


def cmd_simulate(args: argparse.Namespace) -> int:
    bundle_dir = Path(args.bundle)
    bundle = load_bundle(bundle_dir)
    spec, extras = _spec_from_args(args)
    gateway = None
    if extras.get("gateway_url"):
        gateway = HttpGateway(extras["gateway_url"])
    elif extras.get("llm.mock"):
        from .gateway import make_gateway

        gateway = make_gateway(str(extras["llm.mock"]))
        spec = replace(spec, oracle_user=False)
    result = run_meeting(bundle, spec, gateway=gateway)
    print(result.report.to_text())
    for key, value in sorted(result.stats.items()):
        print(f"{key}={value}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(
                {"report": result.report.to_dict(), "stats": result.stats},
                indent=2,
                sort_keys=True,
            )
            + "\n",
            "utf-8",
        )
        (out / "transcript.jsonl").write_text(
            "\n".join(
                json.dumps(segment_to_dict(seg), sort_keys=True)
                for seg in result.transcript.segments()
            )
            + "\n",
            "utf-8",
        )
        (out / "audit.jsonl").write_text(
            "\n".join(json.dumps(ev, sort_keys=True) for ev in result.audit) + "\n",
            "utf-8",
        )
        _write_manifest(out, args, _bundle_inputs(bundle_dir))
    return 0


def _discover_bundles(paths: list[str]) -> list[Path]:
    dirs: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if (p / "manifest.json").exists():
            dirs.append(p)
        elif p.is_dir():
            dirs.extend(sorted(d for d in p.iterdir() if (d / "manifest.json").exists()))
    if not dirs:
        raise ValidationError(f"no bundles found under {paths}")
    return dirs


def cmd_sweep(args: argparse.Namespace) -> int:
    bundle_dirs = _discover_bundles(args.bundles)
    bundles = [load_bundle(d) for d in bundle_dirs]
    grid = json.loads(Path(args.grid).read_text("utf-8"))
    points = expand_grid(grid)
    cfg, extras = _config_from_args(args)
    mapping = args.mapping
    if mapping == "identity" and "score.mapping" in extras:
        mapping = extras["score.mapping"]
    base = RunSpec(cfg=cfg, seed=args.seed, mapping=mapping)
    result = sweep(bundles, points, base=base)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.json").write_text(result.to_json() + "\n", "utf-8")
    inputs = [Path(args.grid)]
    for d in bundle_dirs:
        inputs.extend(_bundle_inputs(d))
    _write_manifest(out, args, inputs)
    for point in result.points:
        print(
            f"{json.dumps(point.params, sort_keys=True)} "
            f"mean_im_der={point.aggregate['mean_im_der']:.2f} "
            f"mean_im_serr={point.aggregate['mean_im_serr']:.2f}"
        )
    print(f"wrote {out / 'sweep.json'} ({len(result.points)} grid points)")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("diarloop.service.app:app", host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_stream(args: argparse.Namespace) -> int:
    """Thin live-mode client: replay a bundle into a served session."""
    import httpx

    from .metrics import Timeline

    bundle = load_bundle(Path(args.bundle))
    cfg, _ = _config_from_args(args)
    ref_timeline = Timeline.from_annotation(bundle.reference)
    with httpx.Client(base_url=args.url, timeout=30.0) as client:
        resp = client.post(
            "/sessions",
            json={
                "config": {
                    "summary_interval": cfg.summary_interval,
                    "correction_limit": cfg.correction_limit,
                    "display_mode": cfg.display_mode,
                },
                "seeds": [
                    {"speaker": spk, "embedding": [float(x) for x in vec]}
                    for spk, vecs in bundle.seeds.items()
                    for vec in vecs
                ],
                "gateway": {"kind": "rule"},
                "toggles": {"swm": False, "oe": True, "corrections": True},
            },
        )
        resp.raise_for_status()
        session_id = resp.json()["session_id"]
        print(f"session {session_id}")
        for seg in bundle.segments:
            rec = segment_to_dict(seg)
            body = {
                "id": rec["id"],
                "start": rec["start"],
                "end": rec["end"],
                "words": rec["words"],
                "embedding": rec.get("embedding"),
            }
            events = client.post(f"/sessions/{session_id}/segments", json=body).json()[
                "events"
            ]
            for ev in events:
                print(f"[{ev['i']}] {ev['kind']}")
                if ev["kind"] == "summary" and args.oracle_feedback:
                    snap = client.get(f"/sessions/{session_id}/snapshot").json()
                    message = _oracle_message_from_rows(
                        snap["rows"][-cfg.summary_interval :],
                        ref_timeline,
                        bundle.speakers,
                    )
                    if message:
                        fb = client.post(
                            f"/sessions/{session_id}/feedback", json={"text": message}
                        ).json()["events"]
                        for fev in fb:
                            print(f"[{fev['i']}] {fev['kind']}")
        snap = client.get(f"/sessions/{session_id}/snapshot").json()
        print(
            f"done: {len(snap['rows'])} rows, "
            f"{snap['corrections_used']} corrections applied"
        )
    return 0


def _oracle_message_from_rows(rows: list[dict], ref: Timeline, speakers: list[str]) -> str | None:
    best = None
    for row in rows:
        overlaps = {
            spk: ref.overlap(spk, row["t_start"], row["t_end"]) for spk in speakers
        }
        top = max(overlaps.values(), default=0.0)
        if top <= 0:
            continue
        true_spk = min(s for s, v in overlaps.items() if v == top)
        if true_spk == row["speaker"]:
            continue
        if best is None or top >= best[0]:
            best = (top, row, true_spk)
    if best is None:
        return None
    _, row, true_spk = best
    quote = " ".join(row["text"].split()[:5])
    return f"Hey COBI: Predicted {row['speaker']}, saying {quote}, was actually {true_spk}."


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="diarloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score hypothesis RTTM against reference RTTM")
    ev.add_argument("--ref", required=True)
    ev.add_argument("--hyp", required=True)
    ev.add_argument("--collar", type=float, default=0.0)
    ev.add_argument("--mapping", choices=["identity", "optimal"], default="identity")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    sy = sub.add_parser("synth", help="generate synthetic meeting bundles")
    sy.add_argument("--out", required=True)
    sy.add_argument("--speakers", type=int, default=4)
    sy.add_argument("--duration", type=float, default=600.0)
    sy.add_argument("--merge-rate", type=float, default=0.25)
    sy.add_argument("--confusion-rate", type=float, default=0.15)
    sy.add_argument("--vote-noise", type=float, default=0.05)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--meetings", type=int, default=1)
    sy.set_defaults(func=cmd_synth)

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file with dotted keys")
        p.add_argument("--interval", type=int)
        p.add_argument("--limit", type=int)
        p.add_argument("--oe", type=int, help="online enrollment cap (0 disables)")
        p.add_argument("--display", choices=["summary", "conversation"])
        p.add_argument("--collar", type=float)
        p.add_argument("--theta", type=float)
        p.add_argument("--window", type=float)
        p.add_argument("--stride", type=float)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mapping", choices=["identity", "optimal"], default="identity")

    si = sub.add_parser("simulate", help="replay one bundle through the engine")
    si.add_argument("--bundle", required=True)
    si.add_argument("--out")
    si.add_argument("--swm", action=argparse.BooleanOptionalAction, default=True)
    si.add_argument(
        "--corrections", action=argparse.BooleanOptionalAction, default=True
    )
    user = si.add_mutually_exclusive_group()
    user.add_argument(
        "--oracle-user", action="store_true", default=True,
        help="deterministic simulated reviewer (default)",
    )
    user.add_argument("--gateway", help="LLM gateway URL for simulated feedback")
    add_run_flags(si)
    si.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run a parameter grid over bundles")
    sw.add_argument("--bundles", nargs="+", required=True)
    sw.add_argument("--grid", required=True)
    sw.add_argument("--out", required=True)
    add_run_flags(sw)
    sw.set_defaults(func=cmd_sweep)

    se = sub.add_parser("serve", help="start the HTTP session service")
    se.add_argument("--host", default="127.0.0.1")
    se.add_argument("--port", type=int, default=8321)
    se.set_defaults(func=cmd_serve)

    st = sub.add_parser("stream", help="push a bundle into a live session")
    st.add_argument("--bundle", required=True)
    st.add_argument("--url", required=True)
    st.add_argument("--oracle-feedback", action="store_true")
    add_run_flags(st)
    st.set_defaults(func=cmd_stream)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (DiarloopError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
