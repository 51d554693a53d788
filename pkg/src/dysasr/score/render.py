"""
Dysasr Report Rendering

Score reports as JSON, as a flat TSV table and as a fixed-width text
summary rendered from a YAML-held jinja2 template.
"""

import json
from pathlib import Path

import yaml
from jinja2 import Template

from dysasr.core.models import GroupScore, ScoreReport

REPORTS_DIR = Path(__file__).parent.parent / "reports"

TSV_COLUMNS = ["system", "group", "utterances", "words", "subs", "dels", "ins", "wer"]


def _pct(g: GroupScore | None) -> str:
    if g is None or g.utterances == 0:
        return "-"
    return f"{g.wer:.2f}"


def write_report_json(path: Path | str, report: ScoreReport) -> None:
    payload = report.model_dump(mode="python")
    payload["wer"] = round(report.wer, 2)
    payload["oracle_wer"] = None if report.oracle_wer is None else round(report.oracle_wer, 2)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_report_json(path: Path | str) -> ScoreReport:
    return ScoreReport.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))


def report_rows(report: ScoreReport) -> list[list[str]]:
    """One row per group: overall, each band, seen, unseen and oracle."""
    groups: list[tuple[str, GroupScore | None]] = [("overall", report.overall)]
    groups += [(f"band:{band}", g) for band, g in report.bands.items()]
    groups += [("seen", report.seen), ("unseen", report.unseen), ("oracle", report.oracle)]
    rows = []
    for name, g in groups:
        if g is None:
            continue
        rows.append(
            [
                report.system,
                name,
                str(g.utterances),
                str(g.words),
                str(g.subs),
                str(g.dels),
                str(g.ins),
                f"{g.wer:.2f}",
            ]
        )
    return rows


def write_report_tsv(path: Path | str, reports: list[ScoreReport]) -> None:
    lines = ["\t".join(TSV_COLUMNS)]
    for report in reports:
        lines.extend("\t".join(row) for row in report_rows(report))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class ReportTemplate:
    """A text report template loaded from YAML."""

    def __init__(self, name: str, description: str, template: str):
        self.name = name
        self.description = description
        self.template = Template(template, trim_blocks=False, keep_trailing_newline=True)

    @classmethod
    def load(cls, name: str = "summary", reports_path: Path | None = None) -> "ReportTemplate":
        reports_path = reports_path or REPORTS_DIR
        yaml_path = reports_path / f"{name}.yaml"
        if not yaml_path.exists():
            raise FileNotFoundError(f"Report template not found: {name} (looked in {yaml_path})")
        with open(yaml_path) as f:
            data = yaml.safe_load(f)
        return cls(
            name=data.get("name", name),
            description=data.get("description", ""),
            template=data.get("template", ""),
        )

    def render(self, reports: list[ScoreReport]) -> str:
        bands: list[str] = []
        for report in reports:
            bands.extend(b for b in report.bands if b not in bands)
        rows = [
            {
                "system": r.system,
                "utterances": r.utterances,
                "bands": {b: _pct(g) for b, g in r.bands.items()},
                "seen": _pct(r.seen),
                "unseen": _pct(r.unseen),
                "overall": _pct(r.overall),
                "oracle": _pct(r.oracle),
            }
            for r in reports
        ]
        significance = [test for r in reports for test in r.significance]
        return self.template.render(bands=bands, rows=rows, significance=significance)


def render_summary(reports: list[ScoreReport], template: str = "summary") -> str:
    return ReportTemplate.load(template).render(reports)
