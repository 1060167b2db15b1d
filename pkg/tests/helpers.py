"""Shared drivers for cross-module tests."""

from __future__ import annotations

from diarloop.model import SessionConfig, copy_segment
from diarloop.session import open_session
from diarloop.simulator import OracleGateway, RunSpec, run_meeting
from diarloop.swm import PrecomputedVoteProvider


def simulator_and_live_session(bundle, cfg: SessionConfig, toggles):
    """Run the simulator, then stream the same segments and the same
    oracle messages into a live session with identical settings.

    Returns (simulator RunResult, session) for comparison.
    """
    spec = RunSpec(cfg=cfg, toggles=toggles)
    sim_gateway = OracleGateway()
    sim = run_meeting(bundle, spec, gateway=sim_gateway)

    feedback_after: dict[int, list[str]] = {}
    cursor = -1
    for ev in sim.audit:
        if ev["kind"] == "segment":
            seg_id = ev["payload"]["segment"]["id"].split(".")[0]
            cursor = int(seg_id.split("-")[1])
        elif ev["kind"] == "feedback":
            feedback_after.setdefault(cursor, []).append(ev["payload"]["raw_text"])

    session = open_session(
        cfg,
        {k: list(v) for k, v in bundle.seeds.items()},
        OracleGateway(dict(sim_gateway.scripted.responses)),
        toggles=toggles,
        vote_provider=PrecomputedVoteProvider(bundle.votes),
    )
    for idx, segment in enumerate(bundle.segments):
        session.push_segment(copy_segment(segment))
        for raw in feedback_after.get(idx, []):
            session.push_feedback(raw)
    return sim, session
