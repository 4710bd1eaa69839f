"""Translation dictionaries: XML parsing, statistics, and centroid projection.

Accepted XML (one document per source language)::

    <dictionary src="myv">
      <e>
        <l pos="N">kudo</l>
        <mg><t lang="fin">talo</t><t lang="rus">дом</t></mg>
        <mg><t lang="eng">home</t></mg>
      </e>
    </dictionary>

Giella-style sources (``<r>`` root, ``<lg>``/``<tg xml:lang=..>`` wrappers)
are read through :func:`convert_giella`.
"""

from __future__ import annotations

import json
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .embed_store import NormalizationPolicy, WordEmbeddings
from .errors import ConstructionError, FormatError, SchemaError, ShapeError

log = logging.getLogger(__name__)

_ISO3 = re.compile(r"[a-z]{3}")
_XML_LANG = "{http://www.w3.org/XML/1998/namespace}lang"


@dataclass(frozen=True)
class MeaningGroup:
    translations: tuple[tuple[str, str], ...]  # (language, lemma)


@dataclass(frozen=True)
class Lexeme:
    lemma: str
    pos: str | None = None
    meaning_groups: tuple[MeaningGroup, ...] = ()

    def translations(self):
        for mg in self.meaning_groups:
            yield from mg.translations


@dataclass(frozen=True)
class TranslationDictionary:
    source_language: str
    lexemes: tuple[Lexeme, ...] = ()

    def __len__(self):
        return len(self.lexemes)

    def by_lemma(self) -> dict[str, list[Lexeme]]:
        out: dict[str, list[Lexeme]] = {}
        for lx in self.lexemes:
            out.setdefault(lx.lemma, []).append(lx)
        return out

    def pairs(self, target_language: str) -> list[tuple[str, str]]:
        """(source lemma, translation) pairs into one language, in document order."""
        return [(lx.lemma, lemma) for lx in self.lexemes
                for lang, lemma in lx.translations() if lang == target_language]


def _check_lang(code, where):
    if code is None or not _ISO3.fullmatch(code):
        raise SchemaError(f"{where}: invalid ISO 639-3 code {code!r}")
    return code


def _text(el):
    return "".join(el.itertext()).strip()


def _parse(path):
    try:
        return ET.parse(path).getroot()
    except ET.ParseError as e:
        line, col = e.position
        raise FormatError(f"{path}: XML syntax error at line {line}, column {col}") from None


def parse_dictionary_xml(path) -> TranslationDictionary:
    root = _parse(path)
    if root.tag != "dictionary":
        raise SchemaError(f"{path}: unknown root element <{root.tag}>")
    src = _check_lang(root.get("src"), f"{path}: <dictionary src>")
    lexemes = []
    n_empty = 0
    for i, e in enumerate(root.iter("e"), start=1):
        l_el = e.find("l")
        if l_el is None or not _text(l_el):
            raise SchemaError(f"{path}: entry {i} has no lemma")
        groups = []
        for mg in e.findall("mg"):
            ts = tuple((_check_lang(t.get("lang"), f"{path}: entry {i}"), _text(t))
                       for t in mg.findall("t") if _text(t))
            if ts:
                groups.append(MeaningGroup(ts))
        if not groups:
            n_empty += 1
        lexemes.append(Lexeme(_text(l_el), l_el.get("pos"), tuple(groups)))
    if n_empty:
        log.info("%s: %d entries carry no translation", path, n_empty)
    return TranslationDictionary(src, tuple(lexemes))


def convert_giella(path, source_language: str) -> TranslationDictionary:
    """Read a Giella dictionary file into the simplified structure.

    Uses ``e/lg/l`` for the lemma and ``e/mg/tg[@xml:lang]/t`` for
    translations. Two-letter ``xml:lang`` values are not mapped.
    """
    root = _parse(path)
    src = _check_lang(source_language, "source language")
    lexemes = []
    for e in root.iter("e"):
        l_el = e.find("lg/l")
        if l_el is None:
            l_el = e.find("l")
        if l_el is None or not _text(l_el):
            continue
        groups = []
        for mg in e.findall("mg"):
            ts = []
            for tg in mg.findall("tg"):
                lang = tg.get(_XML_LANG) or tg.get("lang")
                if lang is None or not _ISO3.fullmatch(lang):
                    continue
                ts.extend((lang, _text(t)) for t in tg.findall("t") if _text(t))
            if ts:
                groups.append(MeaningGroup(tuple(ts)))
        lexemes.append(Lexeme(_text(l_el), l_el.get("pos"), tuple(groups)))
    return TranslationDictionary(src, tuple(lexemes))


# --------------------------------------------------------------------------
# statistics

@dataclass(frozen=True)
class TargetStats:
    meaning_group_count: int
    translation_count: int
    translation_share: float  # percent, 2 decimals


@dataclass(frozen=True)
class DictionaryStats:
    source_language: str
    targets: dict[str, TargetStats]
    total_translations: int

    def as_dict(self):
        return {
            "source": self.source_language,
            "total_translations": self.total_translations,
            "targets": {lang: vars(s) for lang, s in self.targets.items()},
        }

    def format_table(self) -> str:
        lines = ["source target meaning_groups translations share"]
        for lang, s in self.targets.items():
            lines.append(f"{self.source_language} {lang} {s.meaning_group_count} "
                         f"{s.translation_count} {s.translation_share:.2f}%")
        lines.append(f"{self.source_language} total - {self.total_translations} 100.00%"
                     if self.targets else f"{self.source_language} total - 0 0.00%")
        return "\n".join(lines)


def dictionary_stats(dictionary: TranslationDictionary) -> DictionaryStats:
    """Per-target meaning-group and translation counts.

    A meaning group counts once for every language it holds a translation into.
    """
    groups: dict[str, int] = {}
    translations: dict[str, int] = {}
    for lx in dictionary.lexemes:
        for mg in lx.meaning_groups:
            langs = [lang for lang, _ in mg.translations]
            for lang in dict.fromkeys(langs):
                groups[lang] = groups.get(lang, 0) + 1
            for lang in langs:
                translations[lang] = translations.get(lang, 0) + 1
    total = sum(translations.values())
    targets = {
        lang: TargetStats(groups[lang], translations[lang],
                          round(100.0 * translations[lang] / total, 2) if total else 0.0)
        for lang in sorted(translations)
    }
    return DictionaryStats(dictionary.source_language, targets, total)


# --------------------------------------------------------------------------
# projection

def _common_dim(target_spaces: Mapping[str, WordEmbeddings]) -> int | None:
    dims = {emb.dim for emb in target_spaces.values()}
    if len(dims) > 1:
        raise ShapeError(f"target spaces disagree on dimension: {sorted(dims)}")
    return dims.pop() if dims else None


def _resolve(lexeme: Lexeme, target_spaces, policies):
    """Vectors for every translation found in its language's space."""
    found = []
    for lang, lemma in lexeme.translations():
        emb = target_spaces.get(lang)
        if emb is None:
            continue
        policy = policies.get(lang) if policies else None
        key = policy.apply(lemma) if policy is not None else lemma
        for i in emb.entries.get(key, ()):
            found.append((lang, emb.matrix[i]))
    return found


def project_lexeme(lexeme: Lexeme, target_spaces: Mapping[str, WordEmbeddings],
                   policies: Mapping[str, NormalizationPolicy] | None = None) -> np.ndarray | None:
    """Centroid of all vectors of all resolvable translations, or None."""
    _common_dim(target_spaces)
    found = _resolve(lexeme, target_spaces, policies)
    if not found:
        return None
    return np.mean(np.stack([v for _, v in found]), axis=0)


@dataclass
class CoverageReport:
    language: str
    lexemes: int = 0
    projected: int = 0
    skipped: int = 0
    resolved_by_language: dict[str, int] = field(default_factory=dict)
    skipped_lemmas: list[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"language: {self.language}", f"lexemes: {self.lexemes}",
                 f"projected: {self.projected}", f"skipped: {self.skipped}"]
        lines += [f"resolved[{lang}]: {n}" for lang, n in sorted(self.resolved_by_language.items())]
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        records = [{"record": "summary", "language": self.language, "lexemes": self.lexemes,
                    "projected": self.projected, "skipped": self.skipped}]
        records += [{"record": "resolved", "language": self.language, "target": lang,
                     "translations": n} for lang, n in sorted(self.resolved_by_language.items())]
        records += [{"record": "skipped", "language": self.language, "lemma": w}
                    for w in self.skipped_lemmas]
        return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n" for r in records)


def build_endangered_embeddings(dictionary: TranslationDictionary,
                                target_spaces: Mapping[str, WordEmbeddings],
                                language: str | None = None,
                                policies: Mapping[str, NormalizationPolicy] | None = None):
    """Project every lexeme of ``dictionary`` into the shared aligned space.

    Returns ``(embeddings, report)``. Homonymous lexemes become one lemma with
    several vectors; frequency rank follows dictionary order.
    """
    language = language or dictionary.source_language
    dim = _common_dim(target_spaces)
    report = CoverageReport(language, lexemes=len(dictionary.lexemes),
                            resolved_by_language={lang: 0 for lang in target_spaces})
    entries: dict[str, list[int]] = {}
    rows = []
    for lx in dictionary.lexemes:
        found = _resolve(lx, target_spaces, policies)
        if not found:
            report.skipped += 1
            report.skipped_lemmas.append(lx.lemma)
            continue
        # count resolved translations, not vectors
        for lang, lemma in lx.translations():
            if lang in target_spaces:
                policy = policies.get(lang) if policies else None
                key = policy.apply(lemma) if policy is not None else lemma
                if key in target_spaces[lang].entries:
                    report.resolved_by_language[lang] += 1
        report.projected += 1
        entries.setdefault(lx.lemma, []).append(len(rows))
        rows.append(np.mean(np.stack([v for _, v in found]), axis=0))
    if not rows:
        raise ConstructionError(f"no lexeme of the {language} dictionary could be projected")
    emb = WordEmbeddings(language, dim, {k: tuple(v) for k, v in entries.items()}, np.stack(rows))
    return emb, report
