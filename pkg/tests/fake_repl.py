"""A fake tactic-REPL process for driver tests.

Speaks the line-delimited JSON wire protocol on stdin/stdout and behaves like
a toy environment: transitions come from a spec file given as argv[1]. Spec
extras beyond the toy-environment format:

    "fallback_tactic": tactic closing states listed in auto_tactic_closes
    "parse_header":    parse the init statement into goal + hypotheses
    "sleep_on":        {tactic: seconds} delay before answering
    "die_on":          tactic that makes the process exit without answering

Run as: python3 fake_repl.py spec.json
"""

import json
import sys
import time

ERR = "ERR"
QED = "QED"

_OPENERS = {"(": ")", "[": "]", "{": "}"}
_CLOSERS = set(_OPENERS.values())


def top_level_binders(header: str) -> list[tuple[str, str]]:
    """Extract (name, statement) from top-level parenthesized binder groups."""
    binders = []
    depth = 0
    start = -1
    for i, ch in enumerate(header):
        if ch in _OPENERS:
            if depth == 0 and ch == "(":
                start = i
            depth += 1
        elif ch in _CLOSERS:
            depth -= 1
            if depth == 0 and start >= 0:
                group = header[start + 1 : i]
                name, _, stmt = group.partition(":")
                binders.append((name.strip(), stmt.strip()))
                start = -1
    return binders


def parse_statement(statement: str) -> dict:
    from proofsearch.dataset import parse_header

    _, goal = parse_header(statement)
    assign = statement.find(":=")
    header = statement[: assign if assign >= 0 else len(statement)]
    binder_region = header
    if goal:
        goal_pos = header.rfind(goal)
        if goal_pos > 0:
            binder_region = header[:goal_pos]
    return {"goal": goal, "hypotheses": top_level_binders(binder_region)}


def main() -> int:
    spec = json.loads(open(sys.argv[1], encoding="utf-8").read())
    transitions = {(s, t): dest for s, t, dest in spec.get("transitions", [])}
    auto = set(spec.get("auto_tactic_closes", []))
    fallback = spec.get("fallback_tactic", "nlinarith")
    sleep_on = spec.get("sleep_on", {})
    die_on = spec.get("die_on")

    labels: dict[str, str] = {}
    goals: dict[str, list] = {}
    counter = 0

    def issue(label: str, goal_list: list) -> str:
        nonlocal counter
        state_id = f"s{counter}"
        counter += 1
        labels[state_id] = label
        goals[state_id] = goal_list
        return state_id

    def reply(payload: dict) -> None:
        print(json.dumps(payload, ensure_ascii=False), flush=True)

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        rid = req.get("id")
        op = req.get("op")
        if op == "init":
            if spec.get("parse_header"):
                try:
                    parsed = parse_statement(req.get("statement", ""))
                except ValueError as exc:
                    reply({"id": rid, "status": "error", "message": f"bad statement: {exc}"})
                    continue
                goal_list = [parsed]
            else:
                goal_list = [{"goal": spec["initial"], "hypotheses": []}]
            state_id = issue(spec["initial"], goal_list)
            reply({"id": rid, "status": "ok", "state_id": state_id, "goals": goals[state_id]})
            continue
        if op == "apply":
            tactic = req.get("tactic", "")
            if tactic == die_on:
                return 3
            if tactic in sleep_on:
                time.sleep(sleep_on[tactic])
            label = labels.get(str(req.get("state_id")))
            if label is None:
                reply({"id": rid, "status": "error", "message": "unknown state id"})
                continue
            dest = transitions.get((label, tactic))
            if dest is None:
                dest = QED if (tactic == fallback and label in auto) else ERR
            if dest == QED:
                reply({"id": rid, "status": "qed", "state_id": "qed", "goals": []})
            elif dest == ERR:
                reply(
                    {
                        "id": rid,
                        "status": "error",
                        "message": f"tactic '{tactic}' failed in state {label}",
                    }
                )
            else:
                state_id = issue(dest, [{"goal": dest, "hypotheses": []}])
                reply({"id": rid, "status": "ok", "state_id": state_id, "goals": goals[state_id]})
            continue
        reply({"id": rid, "status": "error", "message": f"unknown op {op!r}"})
    return 0


if __name__ == "__main__":
    sys.exit(main())
