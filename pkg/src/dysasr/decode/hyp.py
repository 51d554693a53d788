"""
Hypothesis and N-best files.

Hypothesis file: ``utt_id<TAB>words<TAB>score`` per utterance.
N-best file: ``utt_id<TAB>rank<TAB>words<TAB>score``, ranks from 1.
Words are space separated; an empty hypothesis has an empty words field.
"""

from pathlib import Path

from dysasr.decode.viterbi import Hypothesis, NBest


def _fmt(score: float) -> str:
    return f"{score:.6f}"


def write_hypotheses(path: Path | str, nbests: list[NBest]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for nbest in nbests:
            best = nbest.best
            f.write(f"{nbest.utt_id}\t{best.text}\t{_fmt(best.score)}\n")


def read_hypotheses(path: Path | str) -> dict[str, Hypothesis]:
    hyps = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
        utt_id, words, score = fields
        hyps[utt_id] = Hypothesis(tuple(words.split()), float(score))
    return hyps


def write_nbest(path: Path | str, nbests: list[NBest]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for nbest in nbests:
            for rank, hyp in enumerate(nbest, 1):
                f.write(f"{nbest.utt_id}\t{rank}\t{hyp.text}\t{_fmt(hyp.score)}\n")


def read_nbest(path: Path | str) -> dict[str, NBest]:
    rows: dict[str, list[tuple[int, Hypothesis]]] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ValueError(f"{path}:{line_no}: expected 4 tab-separated fields")
        utt_id, rank, words, score = fields
        hyp = Hypothesis(tuple(words.split()), float(score))
        rows.setdefault(utt_id, []).append((int(rank), hyp))
    return {
        utt_id: NBest([h for _, h in sorted(entries, key=lambda e: e[0])], utt_id)
        for utt_id, entries in rows.items()
    }
