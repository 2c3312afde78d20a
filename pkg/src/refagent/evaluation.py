"""Alignment of refactoring records, pass@k, and the signed-rank test.

Two matching scenarios: the strict one compares (type, class, method,
line range) with range intersection counting as alignment; the loose one
ignores ranges. Matching is greedy one-to-one over both sides sorted by
(class, start line), which keeps reports deterministic and prevents
double counting.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import (
    AllZeroDifferences,
    ArityMismatch,
    IncompleteJournal,
    MissingRange,
    SchemaError,
)

logger = logging.getLogger(__name__)

UNDEFINED = "undefined"


@dataclass
class RefactoringRecord:
    source: str  # engine | miner | baseline
    refactoring_type: str
    class_fqn: str
    method_signature: Optional[str] = None
    line_range: Optional[tuple[int, int]] = None
    commit_id: Optional[str] = None


@dataclass
class AlignmentReport:
    tp: int
    fp: int
    fn: int
    precision: float | str
    recall: float | str
    f1: float | str
    matched_pairs: list[tuple[RefactoringRecord, RefactoringRecord]] = field(
        default_factory=list
    )

    def to_json_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


def normalize_type(name: str) -> str:
    return " ".join(name.strip().lower().split())


def _prf(tp: int, fp: int, fn: int) -> tuple[float | str, float | str, float | str]:
    precision: float | str = tp / (tp + fp) if tp + fp else UNDEFINED
    recall: float | str = tp / (tp + fn) if tp + fn else UNDEFINED
    if (
        isinstance(precision, float)
        and isinstance(recall, float)
        and precision + recall > 0
    ):
        f1: float | str = 2 * precision * recall / (precision + recall)
    else:
        f1 = UNDEFINED
    return precision, recall, f1


def _sort_key(record: RefactoringRecord) -> tuple:
    start = record.line_range[0] if record.line_range else 0
    return (record.class_fqn, start, normalize_type(record.refactoring_type))


def _ranges_align(
    ours: tuple[int, int], theirs: tuple[int, int], mode: str, tau: float
) -> bool:
    lo = max(ours[0], theirs[0])
    hi = min(ours[1], theirs[1])
    if mode == "exact":
        return ours == theirs
    if mode == "jaccard":
        if hi < lo:
            return False
        union = max(ours[1], theirs[1]) - min(ours[0], theirs[0]) + 1
        return (hi - lo + 1) / union >= tau
    return hi >= lo  # intersection: at least one shared line


def match_scenario1(
    ours: list[RefactoringRecord],
    theirs: list[RefactoringRecord],
    range_mode: str = "intersect",
    jaccard_tau: float = 0.5,
) -> AlignmentReport:
    """Strict alignment: type, class, method, and overlapping line ranges."""
    for record in itertools.chain(ours, theirs):
        if record.line_range is None:
            raise MissingRange(
                f"record {record.refactoring_type} in {record.class_fqn} has no line range"
            )
    ours_sorted = sorted(ours, key=_sort_key)
    theirs_sorted = sorted(theirs, key=_sort_key)
    matched_theirs: set[int] = set()
    pairs = []
    for record in ours_sorted:
        for i, candidate in enumerate(theirs_sorted):
            if i in matched_theirs:
                continue
            if normalize_type(record.refactoring_type) != normalize_type(
                candidate.refactoring_type
            ):
                continue
            if record.class_fqn != candidate.class_fqn:
                continue
            if record.method_signature != candidate.method_signature:
                continue
            if not _ranges_align(
                record.line_range, candidate.line_range, range_mode, jaccard_tau
            ):
                continue
            matched_theirs.add(i)
            pairs.append((record, candidate))
            break
    tp = len(pairs)
    fp = len(ours) - tp
    fn = len(theirs) - tp
    precision, recall, f1 = _prf(tp, fp, fn)
    return AlignmentReport(tp, fp, fn, precision, recall, f1, pairs)


def match_scenario2(
    ours: list[RefactoringRecord], theirs: list[RefactoringRecord]
) -> AlignmentReport:
    """Loose alignment: same type applied to the same class and method."""
    ours_sorted = sorted(ours, key=_sort_key)
    theirs_sorted = sorted(theirs, key=_sort_key)
    matched_theirs: set[int] = set()
    pairs = []
    for record in ours_sorted:
        key = (
            normalize_type(record.refactoring_type),
            record.class_fqn,
            record.method_signature,
        )
        for i, candidate in enumerate(theirs_sorted):
            if i in matched_theirs:
                continue
            candidate_key = (
                normalize_type(candidate.refactoring_type),
                candidate.class_fqn,
                candidate.method_signature,
            )
            if key == candidate_key:
                matched_theirs.add(i)
                pairs.append((record, candidate))
                break
    tp = len(pairs)
    fp = len(ours) - tp
    fn = len(theirs) - tp
    precision, recall, f1 = _prf(tp, fp, fn)
    return AlignmentReport(tp, fp, fn, precision, recall, f1, pairs)


# -- refactoring-miner ingestion -----------------------------------------

_MODIFIER_PREFIX = re.compile(
    r"^(public|private|protected|static|abstract|final|synchronized|native)\s+"
)
_IN_CLASS = re.compile(r"\bin class\s+(\S+)")


def _parse_code_element(element: str) -> tuple[Optional[str], Optional[str]]:
    """Split 'modifiers name(params) : ret in class X' into (method, class)."""
    class_match = _IN_CLASS.search(element)
    class_fqn = class_match.group(1) if class_match else None
    head = element.split(" in class ")[0]
    head = head.split(" : ")[0].strip()
    while _MODIFIER_PREFIX.match(head):
        head = _MODIFIER_PREFIX.sub("", head, count=1)
    method = " ".join(head.split()) if "(" in head else None
    return method, class_fqn


def _class_from_path(file_path: str) -> str:
    stem = Path(file_path).stem
    return stem


def load_miner_records(json_path: str | Path) -> list[RefactoringRecord]:
    """Ingest refactoring-detector JSON into engine records."""
    json_path = Path(json_path)
    try:
        data = json.loads(json_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(str(json_path), str(exc)) from exc
    if not isinstance(data, dict) or "commits" not in data:
        raise SchemaError(str(json_path), "expected top-level object with 'commits'")
    records: list[RefactoringRecord] = []
    for commit in data["commits"]:
        if not isinstance(commit, dict):
            raise SchemaError(str(json_path), "commit entry is not an object")
        commit_id = commit.get("sha1")
        for refactoring in commit.get("refactorings", []):
            try:
                rtype = refactoring["type"]
            except (TypeError, KeyError) as exc:
                raise SchemaError(str(json_path), "refactoring missing 'type'") from exc
            rights = refactoring.get("rightSideLocations") or []
            location = None
            for loc in rights:
                if "METHOD" in str(loc.get("codeElementType", "")).upper():
                    location = loc
                    break
            if location is None and rights:
                location = rights[0]
            method = class_fqn = None
            line_range = None
            if location is not None:
                element = location.get("codeElement") or ""
                method, class_fqn = _parse_code_element(element)
                if class_fqn is None:
                    class_fqn = _class_from_path(location.get("filePath", ""))
                start = location.get("startLine")
                end = location.get("endLine")
                if isinstance(start, int) and isinstance(end, int):
                    line_range = (start, end)
            else:
                logger.warning(
                    "refactoring %r in %s has no right-side location", rtype, json_path
                )
                description = refactoring.get("description", "")
                method, class_fqn = _parse_code_element(description)
            records.append(
                RefactoringRecord(
                    source="miner",
                    refactoring_type=rtype,
                    class_fqn=class_fqn or "",
                    method_signature=method,
                    line_range=line_range,
                    commit_id=commit_id,
                )
            )
    return records


# -- pass@k and the signed-rank test ---------------------------------------


def pass_at_k(verdicts: list[bool], k: int) -> bool:
    """Success when any of the k independently generated candidates passed."""
    if len(verdicts) != k:
        raise ArityMismatch(f"expected {k} verdicts, got {len(verdicts)}")
    return any(verdicts)


def _ranks(values: list[float]) -> list[float]:
    """Average ranks for tied absolute differences."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j) / 2 + 1
        for idx in order[i : j + 1]:
            ranks[idx] = average
        i = j + 1
    return ranks


def wilcoxon_signed_rank(
    pairs: list[tuple[float, float]], exact_limit: int = 20
) -> dict[str, float]:
    """Two-sided paired signed-rank test.

    Zero differences are dropped and ties receive average ranks. The
    p-value is exact (full enumeration of sign assignments) up to
    `exact_limit` pairs, and a tie-corrected normal approximation above.
    """
    diffs = [after - before for before, after in pairs if after != before]
    if not diffs:
        raise AllZeroDifferences("every pair has a zero difference")
    n = len(diffs)
    abs_diffs = [abs(d) for d in diffs]
    ranks = _ranks(abs_diffs)
    w_plus = sum(r for d, r in zip(diffs, ranks) if d > 0)
    w_minus = sum(r for d, r in zip(diffs, ranks) if d < 0)
    statistic = min(w_plus, w_minus)
    total = w_plus + w_minus

    if n <= exact_limit:
        center = total / 2
        observed = abs(w_plus - center)
        count = 0
        for signs in itertools.product((0, 1), repeat=n):
            t = sum(r for s, r in zip(signs, ranks) if s)
            if abs(t - center) >= observed - 1e-12:
                count += 1
        p_value = count / 2**n
    else:
        mean = n * (n + 1) / 4
        variance = n * (n + 1) * (2 * n + 1) / 24
        # tie correction over groups of equal absolute differences
        groups: dict[float, int] = {}
        for v in abs_diffs:
            groups[v] = groups.get(v, 0) + 1
        variance -= sum(t**3 - t for t in groups.values()) / 48
        z = (w_plus - mean) / math.sqrt(variance)
        p_value = math.erfc(abs(z) / math.sqrt(2))
    return {"statistic": statistic, "p_value": min(1.0, p_value)}


# -- report emission --------------------------------------------------------


def load_journal_records(journal_dir: str | Path) -> list[RefactoringRecord]:
    """Planned refactorings of COMMITTED sessions, as engine-side records."""
    journal_dir = Path(journal_dir)
    records: list[RefactoringRecord] = []
    for verdict_path in sorted(journal_dir.glob("*/verdict.json")):
        verdict = json.loads(verdict_path.read_text(encoding="utf-8"))
        if verdict.get("phase") != "COMMITTED":
            continue
        plan_path = verdict_path.parent / "plan.json"
        if not plan_path.is_file():
            continue
        plan = json.loads(plan_path.read_text(encoding="utf-8"))
        for entry in plan.get("entries", []):
            line_range = entry.get("line_range")
            records.append(
                RefactoringRecord(
                    source="engine",
                    refactoring_type=entry.get("refactoring_type", ""),
                    class_fqn=plan.get("target_fqn", verdict_path.parent.name),
                    method_signature=(
                        entry["identifier"]
                        if entry.get("region_kind") == "method"
                        else None
                    ),
                    line_range=tuple(line_range) if line_range else None,
                )
            )
    return records


@contextmanager
def _reports_lock(reports_dir: Path):
    """Exclusive advisory lock so concurrent emitters cannot interleave."""
    import fcntl

    lock_path = reports_dir / ".lock"
    with open(lock_path, "w", encoding="utf-8") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _rate(before: int, after: int) -> float | str:
    return (before - after) / before * 100.0 if before else UNDEFINED


def _qi(before: float, after: float) -> float | str:
    return (after - before) / abs(before) * 100.0 if before != 0 else UNDEFINED


def emit_reports(
    journal_dir: str | Path,
    reports_dir: str | Path,
    miner_records: Optional[list[RefactoringRecord]] = None,
    pass_verdicts: Optional[dict[str, list[bool]]] = None,
) -> list[Path]:
    """Write the CSV/JSON artifact set from a completed journal.

    Alignment tables are emitted only when miner records are supplied;
    pass@k defaults to k=1 derived from session verdicts unless explicit
    per-class verdict lists are given. Re-running over the same inputs
    produces byte-identical files.
    """
    journal_dir = Path(journal_dir)
    manifest_path = journal_dir / "manifest.json"
    if not manifest_path.is_file():
        raise IncompleteJournal(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    verdicts = manifest.get("verdicts", [])
    if not verdicts:
        raise IncompleteJournal("manifest lists no sessions")
    for fqn in manifest.get("class_order", []):
        if not (journal_dir / fqn / "verdict.json").is_file():
            raise IncompleteJournal(f"missing verdict.json for {fqn}")

    reports_dir = Path(reports_dir)
    reports_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    with _reports_lock(reports_dir):
        # smell reduction rate per kind
        before_counts = manifest.get("smell_kind_counts_before", {})
        after_counts = manifest.get("smell_kind_counts_after", {})
        kinds = sorted(set(before_counts) | set(after_counts))
        srr_rows = [
            [
                kind,
                before_counts.get(kind, 0),
                after_counts.get(kind, 0),
                _rate(before_counts.get(kind, 0), after_counts.get(kind, 0)),
            ]
            for kind in kinds
        ]
        total_before = manifest.get("smells_before", sum(before_counts.values()))
        total_after = manifest.get("smells_after", sum(after_counts.values()))
        srr_rows.append(
            ["__total__", total_before, total_after, _rate(total_before, total_after)]
        )
        path = reports_dir / "srr.csv"
        _write_csv(path, ["smell_kind", "before", "after", "reduction_rate"], srr_rows)
        created.append(path)

        # quality improvement per attribute
        qmood_before = manifest.get("qmood_before", {})
        qmood_after = manifest.get("qmood_after", {})
        qi_rows = [
            [
                attribute,
                qmood_before[attribute],
                qmood_after.get(attribute, qmood_before[attribute]),
                _qi(
                    qmood_before[attribute],
                    qmood_after.get(attribute, qmood_before[attribute]),
                ),
            ]
            for attribute in sorted(qmood_before)
        ]
        path = reports_dir / "qmood_qi.csv"
        _write_csv(
            path, ["attribute", "before", "after", "quality_improvement"], qi_rows
        )
        created.append(path)

        # alignment against an external detector, when available
        align_header = ["scenario", "tp", "fp", "fn", "precision", "recall", "f1"]
        engine_records = load_journal_records(journal_dir)
        s1 = s2 = None
        if miner_records is not None:
            ranged_engine = [r for r in engine_records if r.line_range]
            ranged_miner = [r for r in miner_records if r.line_range]
            s1 = match_scenario1(ranged_engine, ranged_miner)
            s2 = match_scenario2(engine_records, miner_records)
        path = reports_dir / "align_s1.csv"
        _write_csv(
            path,
            align_header,
            [["scenario1", s1.tp, s1.fp, s1.fn, s1.precision, s1.recall, s1.f1]]
            if s1
            else [],
        )
        created.append(path)
        path = reports_dir / "align_s2.csv"
        _write_csv(
            path,
            align_header,
            [["scenario2", s2.tp, s2.fp, s2.fn, s2.precision, s2.recall, s2.f1]]
            if s2
            else [],
        )
        created.append(path)

        # pass@k: defaults to one attempt per class from the session verdicts
        if pass_verdicts is None:
            pass_verdicts = {
                v["target_fqn"]: [v["phase"] == "COMMITTED"] for v in verdicts
            }
        passk_rows = []
        passed_total = 0
        for fqn in sorted(pass_verdicts):
            attempts = pass_verdicts[fqn]
            k = len(attempts)
            passed = pass_at_k(attempts, k)
            passed_total += int(passed)
            passk_rows.append([fqn, k, int(passed)])
        passk_rows.append(
            ["__overall__", len(pass_verdicts), passed_total]
        )
        path = reports_dir / "passk.csv"
        _write_csv(path, ["class", "k", "passed"], passk_rows)
        created.append(path)

        # consolidated report
        report = {
            "seed": manifest.get("seed"),
            "verdict_counts": manifest.get("verdict_counts", {}),
            "smells_before": total_before,
            "smells_after": total_after,
            "smell_reduction_rate": _rate(total_before, total_after),
            "srr_by_kind": {
                kind: {
                    "before": before_counts.get(kind, 0),
                    "after": after_counts.get(kind, 0),
                    "reduction_rate": _rate(
                        before_counts.get(kind, 0), after_counts.get(kind, 0)
                    ),
                }
                for kind in kinds
            },
            "qmood": {
                attribute: {
                    "before": qmood_before[attribute],
                    "after": qmood_after.get(attribute, qmood_before[attribute]),
                    "quality_improvement": _qi(
                        qmood_before[attribute],
                        qmood_after.get(attribute, qmood_before[attribute]),
                    ),
                }
                for attribute in sorted(qmood_before)
            },
            "alignment": {
                "matching": "one-to-one greedy, sorted by (class, start line)",
                "scenario1": s1.to_json_dict() if s1 else None,
                "scenario2": s2.to_json_dict() if s2 else None,
            },
            "pass_at_k": {
                "passed": passed_total,
                "total": len(pass_verdicts),
            },
            "ablation": manifest.get("ablation", {}),
        }
        path = reports_dir / "report.json"
        path.write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        created.append(path)
    return created


def exact_statistic_distribution(ranks: list[float]) -> dict[float, float]:
    """Probability of each W+ value under random signs (testing aid)."""
    distribution: dict[float, float] = {}
    n = len(ranks)
    for signs in itertools.product((0, 1), repeat=n):
        t = sum(r for s, r in zip(signs, ranks) if s)
        distribution[t] = distribution.get(t, 0.0) + 1.0 / 2**n
    return distribution
