"""Parsers for BioC full-text XML and MEDLINE/PubMed citation XML.

Both come in a whole-string form (``parse_bioc_article``,
``parse_medline_citation``) and a streaming per-file form that yields one
item at a time and clears parsed elements as it goes.
"""

from __future__ import annotations

import datetime
import gzip
import re
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import IO, Iterator, Optional

from .records import ABSENT, SECTIONS, CitationMetadata, FullTextSections, SchemaError, normalize_text

# BioC section_type infon -> section field; anything else is dropped
BIOC_SECTION_MAP = {
    "TITLE": "title",
    "ABSTRACT": "abstract",
    "INTRO": "intro",
    "METHODS": "methods",
    "RESULTS": "results",
    "DISCUSS": "discuss",
    "FIG": "fig_captions",
    "TABLE": "table_captions",
}
_HEADING_TYPE = re.compile(r"(^|_)title(_\d+)?$")
MIN_YEAR = 1800


class XMLParseError(ValueError):
    """Malformed XML; ``offset`` is the byte offset of the error when known."""

    def __init__(self, message: str, offset: Optional[int] = None, source: Optional[str] = None):
        self.offset = offset
        self.source = source
        where = f"{source}: " if source else ""
        at = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{where}malformed XML{at}: {message}")
        self.message = message

    def __reduce__(self):
        return (XMLParseError, (self.message, self.offset, self.source))


def _byte_offset(raw: bytes, line: int, column: int) -> int:
    pos = 0
    for _ in range(line - 1):
        nl = raw.find(b"\n", pos)
        if nl < 0:
            break
        pos = nl + 1
    return pos + column


def _parse_root(xml_text: str | bytes, source: Optional[str] = None) -> ET.Element:
    raw = xml_text.encode("utf-8") if isinstance(xml_text, str) else xml_text
    try:
        return ET.fromstring(raw)
    except ET.ParseError as exc:
        line, col = exc.position
        raise XMLParseError(str(exc), _byte_offset(raw, line, col), source) from None


def _text(e: Optional[ET.Element]) -> str:
    return "" if e is None else normalize_text("".join(e.itertext()))


# -- BioC ---------------------------------------------------------------


def _infons(e: ET.Element) -> dict[str, str]:
    return {i.get("key", ""): (i.text or "").strip() for i in e.findall("infon")}


def _keep_passage(section: str, ptype: str) -> bool:
    if not ptype:
        return True
    if section in ("fig_captions", "table_captions"):
        return "caption" in ptype
    if section == "title":
        return True
    return not _HEADING_TYPE.search(ptype)


def bioc_document_sections(doc: ET.Element) -> FullTextSections:
    """Build the eight sections from one ``<document>`` element."""
    doc_id = (doc.findtext("id") or "").strip()
    parts: dict[str, list[str]] = {s: [] for s in SECTIONS}
    pmid = ""
    for passage in doc.findall("passage"):
        inf = _infons(passage)
        pmid = pmid or inf.get("article-id_pmid", "")
        section = BIOC_SECTION_MAP.get(inf.get("section_type", "").upper())
        if section is None or not _keep_passage(section, inf.get("type", "")):
            continue
        text = _text(passage.find("text"))
        if text:
            parts[section].append(text)
    if not pmid:
        if not doc_id:
            raise SchemaError("BioC document has no <id> and no article-id_pmid infon")
        if not doc_id.isdigit():
            raise SchemaError(f"BioC document {doc_id} carries no PMID")
        pmid = doc_id
    values = {s: (" ".join(p) if p else None) for s, p in parts.items()}
    if values["title"] is None:
        raise SchemaError(f"BioC document {pmid} has no title passage")
    return FullTextSections(pmid=pmid, **values)


def parse_bioc_article(xml_text: str | bytes) -> FullTextSections:
    """Parse a BioC collection (or bare document) holding one article."""
    root = _parse_root(xml_text)
    doc = root if root.tag == "document" else root.find("document")
    if doc is None:
        raise SchemaError("no <document> element in BioC input")
    return bioc_document_sections(doc)


def _open_maybe_gzip(path) -> IO[bytes]:
    path = Path(path)
    fh = open(path, "rb")
    if fh.read(2) == b"\x1f\x8b":
        fh.close()
        return gzip.open(path, "rb")
    fh.seek(0)
    return fh


def _iterparse(path, tags: set[str]) -> Iterator[ET.Element]:
    with _open_maybe_gzip(path) as fh:
        try:
            for event, elem in ET.iterparse(fh, events=("end",)):
                if elem.tag in tags:
                    yield elem
                    elem.clear()
        except ET.ParseError as exc:
            line, col = exc.position
            raise XMLParseError(str(exc), _offset_in_file(path, line, col), str(path)) from None


def _offset_in_file(path, line: int, column: int) -> int:
    with _open_maybe_gzip(path) as fh:
        return _byte_offset(fh.read(), line, column)


def iter_bioc_file(path) -> Iterator[FullTextSections]:
    for doc in _iterparse(path, {"document"}):
        yield bioc_document_sections(doc)


# -- MEDLINE ------------------------------------------------------------


def _indexing_mode(attr: Optional[str]) -> str:
    if attr is None or not attr.strip():
        return "human"
    a = attr.strip().lower()
    if a.startswith("curated"):
        return "curated"
    if a.startswith("auto"):
        return "auto"
    raise SchemaError(f"unknown IndexingMethod {attr!r}")


def _year(article: Optional[ET.Element]) -> Optional[int]:
    if article is None:
        return None
    pub = article.find("Journal/JournalIssue/PubDate")
    candidates = []
    if pub is not None:
        candidates.append(pub.findtext("Year"))
        m = re.search(r"\d{4}", pub.findtext("MedlineDate") or "")
        candidates.append(m.group(0) if m else None)
    candidates.append(article.findtext("ArticleDate/Year"))
    for c in candidates:
        if c and c.strip().isdigit():
            return int(c.strip())
    return None


def _author(a: ET.Element) -> Optional[str]:
    collective = _text(a.find("CollectiveName"))
    if collective:
        return collective
    last, fore = _text(a.find("LastName")), _text(a.find("ForeName"))
    if not last:
        return None
    return f"{fore},{last}" if fore else last


def medline_citation(elem: ET.Element) -> CitationMetadata:
    """Extract metadata from a ``<PubmedArticle>`` or ``<MedlineCitation>`` element."""
    mc = elem if elem.tag == "MedlineCitation" else elem.find("MedlineCitation")
    if mc is None:
        raise SchemaError(f"<{elem.tag}> has no MedlineCitation")
    pmid = (mc.findtext("PMID") or "").strip()
    if not pmid:
        raise SchemaError("citation without a PMID element")
    article = mc.find("Article")
    year = _year(article)
    if year is not None and not MIN_YEAR <= year <= datetime.date.today().year:
        raise SchemaError(f"{pmid}: publication year {year} out of range")
    doi = None
    for aid in elem.findall("PubmedData/ArticleIdList/ArticleId"):
        if aid.get("IdType") == "doi" and (aid.text or "").strip():
            doi = aid.text.strip()
            break
    if doi is None and article is not None:
        for loc in article.findall("ELocationID"):
            if loc.get("EIdType") == "doi" and (loc.text or "").strip():
                doi = loc.text.strip()
                break
    authors = []
    if article is not None:
        for a in article.findall("AuthorList/Author"):
            name = _author(a)
            if name:
                authors.append(name)
    mesh = {}
    for h in mc.findall("MeshHeadingList/MeshHeading"):
        d = h.find("DescriptorName")
        if d is not None and d.get("UI"):
            mesh[d.get("UI")] = _text(d)
    chems = tuple(t for t in (_text(c) for c in mc.findall("ChemicalList/Chemical/NameOfSubstance")) if t)
    suppl = tuple(t for t in (_text(s) for s in mc.findall("SupplMeshList/SupplMeshName")) if t)
    lang = (article.findtext("Language") if article is not None else None) or ""
    return CitationMetadata(
        pmid=pmid,
        language=lang.strip().lower(),
        indexing_mode=_indexing_mode(mc.get("IndexingMethod")),
        journal=_text(article.find("Journal/Title")) if article is not None else "",
        year=year,
        doi=doi,
        authors=tuple(authors),
        mesh=mesh,
        chemicals=chems or ABSENT,
        suppl_mesh=suppl or ABSENT,
    )


def parse_medline_citation(xml_text: str | bytes) -> CitationMetadata:
    root = _parse_root(xml_text)
    if root.tag in ("PubmedArticle", "MedlineCitation"):
        return medline_citation(root)
    elem = root.find("PubmedArticle")
    if elem is None:
        elem = root.find("MedlineCitation")
    if elem is None:
        raise SchemaError(f"no citation found under <{root.tag}>")
    return medline_citation(elem)


def iter_medline_file(path) -> Iterator[CitationMetadata]:
    """Stream citations from a baseline file (plain or gzip)."""
    stack: list[str] = []
    with _open_maybe_gzip(path) as fh:
        try:
            for event, elem in ET.iterparse(fh, events=("start", "end")):
                if event == "start":
                    stack.append(elem.tag)
                    continue
                stack.pop()
                if elem.tag == "PubmedArticle" or (
                    elem.tag == "MedlineCitation" and (not stack or stack[-1] != "PubmedArticle")
                ):
                    yield medline_citation(elem)
                    elem.clear()
        except ET.ParseError as exc:
            line, col = exc.position
            raise XMLParseError(str(exc), _offset_in_file(path, line, col), str(path)) from None
