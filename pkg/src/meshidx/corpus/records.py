"""Record types for the joined corpus and their JSON line format."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from typing import Optional

SECTIONS = ("title", "abstract", "intro", "methods", "results", "discuss", "fig_captions", "table_captions")
SECTION_KEYS = {s: s.upper() for s in SECTIONS}
# order of keys in an emitted record
RECORD_KEYS = (
    "PMID",
    "TITLE",
    "ABSTRACT",
    "INTRO",
    "METHODS",
    "RESULTS",
    "DISCUSS",
    "FIG_CAPTIONS",
    "TABLE_CAPTIONS",
    "JOURNAL",
    "YEAR",
    "DOI",
    "AUTHORS",
    "MeSH",
    "CHEMICALS",
    "SUPPLMeSH",
)
ABSENT = "None"
INDEXING_MODES = ("human", "curated", "auto")

_CONTROL = re.compile(r"[\x00-\x1f\x7f]")
_WS = re.compile(r"\s+")
_MESH_UI = re.compile(r"^D\d+$")


class SchemaError(ValueError):
    pass


def normalize_text(text: str) -> str:
    """Collapse whitespace runs (control characters included) to one space."""
    return _WS.sub(" ", _CONTROL.sub(" ", text)).strip()


@dataclass(frozen=True)
class FullTextSections:
    pmid: str
    title: Optional[str] = None
    abstract: Optional[str] = None
    intro: Optional[str] = None
    methods: Optional[str] = None
    results: Optional[str] = None
    discuss: Optional[str] = None
    fig_captions: Optional[str] = None
    table_captions: Optional[str] = None

    def __post_init__(self):
        if not self.pmid:
            raise SchemaError("full-text record without an identifier")
        for s in SECTIONS:
            v = getattr(self, s)
            if v is not None and _CONTROL.search(v):
                raise SchemaError(f"{self.pmid}: section {s} contains control characters")


@dataclass(frozen=True)
class CitationMetadata:
    pmid: str
    language: str = "eng"
    indexing_mode: str = "human"
    journal: str = ""
    year: Optional[int] = None
    doi: Optional[str] = None
    authors: tuple[str, ...] = ()
    mesh: dict[str, str] = field(default_factory=dict)
    # tuple of names, or the literal "None" when the citation lists none
    chemicals: tuple[str, ...] | str = ABSENT
    suppl_mesh: tuple[str, ...] | str = ABSENT

    def __post_init__(self):
        if not self.pmid:
            raise SchemaError("citation without a PMID")
        if self.indexing_mode not in INDEXING_MODES:
            raise SchemaError(f"{self.pmid}: unknown indexing mode {self.indexing_mode!r}")
        for ui in self.mesh:
            if not _MESH_UI.match(ui):
                raise SchemaError(f"{self.pmid}: malformed MeSH descriptor UI {ui!r}")


@dataclass(frozen=True)
class ArticleRecord:
    """One joined document.

    Language and indexing mode are not carried: every record has passed the
    citation filter, and the emitted line format has no key for them.
    """

    pmid: str
    title: Optional[str] = None
    abstract: Optional[str] = None
    intro: Optional[str] = None
    methods: Optional[str] = None
    results: Optional[str] = None
    discuss: Optional[str] = None
    fig_captions: Optional[str] = None
    table_captions: Optional[str] = None
    journal: str = ""
    year: Optional[int] = None
    doi: Optional[str] = None
    authors: tuple[str, ...] = ()
    mesh: dict[str, str] = field(default_factory=dict)
    chemicals: tuple[str, ...] | str = ABSENT
    suppl_mesh: tuple[str, ...] | str = ABSENT

    @classmethod
    def combine(cls, text: FullTextSections, cit: CitationMetadata) -> "ArticleRecord":
        if text.pmid != cit.pmid:
            raise SchemaError(f"cannot join full text {text.pmid} with citation {cit.pmid}")
        kw = {s: getattr(text, s) for s in SECTIONS}
        return cls(
            pmid=text.pmid,
            journal=cit.journal,
            year=cit.year,
            doi=cit.doi,
            authors=tuple(cit.authors),
            mesh=dict(cit.mesh),
            chemicals=cit.chemicals,
            suppl_mesh=cit.suppl_mesh,
            **kw,
        )

    def section(self, name: str) -> Optional[str]:
        return getattr(self, name)

    def replace(self, **changes) -> "ArticleRecord":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ArticleRecord(**kw)


def _list_or_absent(v):
    return ABSENT if v == ABSENT else list(v)


def record_to_dict(r: ArticleRecord) -> dict:
    d: dict = {"PMID": r.pmid}
    for s in SECTIONS:
        v = getattr(r, s)
        d[SECTION_KEYS[s]] = ABSENT if v is None else v
    d["JOURNAL"] = r.journal
    d["YEAR"] = ABSENT if r.year is None else str(r.year)
    d["DOI"] = ABSENT if r.doi is None else r.doi
    d["AUTHORS"] = list(r.authors)
    d["MeSH"] = dict(r.mesh)
    d["CHEMICALS"] = _list_or_absent(r.chemicals)
    d["SUPPLMeSH"] = _list_or_absent(r.suppl_mesh)
    return d


def emit_record(r: ArticleRecord) -> str:
    """Serialise to one compact JSON line (no trailing newline)."""
    return json.dumps(record_to_dict(r), ensure_ascii=False, separators=(",", ":"))


def _opt(v):
    return None if v == ABSENT else v


def record_from_dict(d: dict) -> ArticleRecord:
    missing = [k for k in RECORD_KEYS if k not in d]
    if missing:
        raise SchemaError(f"record missing keys {missing}")
    year = _opt(d["YEAR"])
    return ArticleRecord(
        pmid=str(d["PMID"]),
        journal=d["JOURNAL"],
        year=None if year is None else int(year),
        doi=_opt(d["DOI"]),
        authors=tuple(d["AUTHORS"]),
        mesh=dict(d["MeSH"]),
        chemicals=ABSENT if d["CHEMICALS"] == ABSENT else tuple(d["CHEMICALS"]),
        suppl_mesh=ABSENT if d["SUPPLMeSH"] == ABSENT else tuple(d["SUPPLMeSH"]),
        **{s: _opt(d[SECTION_KEYS[s]]) for s in SECTIONS},
    )


def parse_record(line: str) -> ArticleRecord:
    return record_from_dict(json.loads(line))


def read_records(path) -> list[ArticleRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(parse_record(line))
            except (json.JSONDecodeError, SchemaError, KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_records(records, path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(emit_record(r))
            fh.write("\n")
            n += 1
    return n
