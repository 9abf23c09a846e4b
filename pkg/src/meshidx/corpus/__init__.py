"""Corpus construction: parse BioC full text and MEDLINE citations, join on PMID."""

from .records import (
    ABSENT,
    RECORD_KEYS,
    SECTIONS,
    ArticleRecord,
    CitationMetadata,
    FullTextSections,
    SchemaError,
    emit_record,
    normalize_text,
    parse_record,
    read_records,
    write_records,
)
from .parsers import (
    XMLParseError,
    iter_bioc_file,
    iter_medline_file,
    parse_bioc_article,
    parse_medline_citation,
)
from .build import (
    COMPLETE_SECTIONS,
    BuildCounts,
    FileParseError,
    KeyIndex,
    SectionStat,
    SplitSpec,
    build_corpus,
    corpus_stats,
    filter_citation,
    join_records,
    largest_remainder,
    read_pmid_list,
    select_complete,
    stats_to_json,
    stratified_split,
    write_split_manifests,
)
