"""Deterministic synthetic corpora for the test suite.

Human-side documents are built from natural-language sentence templates
with slot filling and light word-level noise.  Generated-side documents
are sampled from an order-2 character Markov chain fitted on the template
text, which preserves character statistics while scrambling word shapes,
so the two classes are separable but not trivially identical runs.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from mgtdetect.corpus import Corpus, Document, Label, Language

_EN_TEMPLATES = (
    "The {adj} {noun} near the {place} was surprisingly {adj2} this morning.",
    "Many people visited the {place} to see the {adj} {noun} last {time}.",
    "A {noun} can become {adj} when the weather turns {adj2} in the {place}.",
    "Researchers described the {adj} {noun} in a report published last {time}.",
    "Children often imagine that every {noun} hides a {adj2} secret.",
    "Nobody expected the {noun} to look so {adj} after the long {time}.",
)

_EN_POOLS = {
    "adj": ("quiet", "bright", "ancient", "gentle", "curious", "heavy", "delicate"),
    "adj2": ("beautiful", "mysterious", "ordinary", "remarkable", "peaceful"),
    "noun": ("garden", "library", "river", "mountain", "market", "bridge", "orchard"),
    "place": ("village", "harbor", "valley", "station", "museum", "forest"),
    "time": ("summer", "winter", "season", "decade", "weekend"),
}

_ES_TEMPLATES = (
    "El {noun} {adj} cerca de la {place} parecía muy {adj2} esta mañana.",
    "Muchas personas visitaron la {place} para ver el {noun} {adj} el {time} pasado.",
    "Un {noun} puede volverse {adj} cuando el clima cambia en la {place}.",
    "Los investigadores describieron el {noun} {adj} en un informe reciente.",
    "Los niños imaginan que cada {noun} esconde un secreto {adj2}.",
    "Nadie esperaba que el {noun} se viera tan {adj} después del {time}.",
)

_ES_POOLS = {
    "adj": ("tranquilo", "brillante", "antiguo", "curioso", "pesado", "delicado"),
    "adj2": ("hermoso", "misterioso", "ordinario", "notable", "apacible"),
    "noun": ("jardín", "río", "mercado", "puente", "camino", "huerto"),
    "place": ("aldea", "bahía", "estación", "biblioteca", "plaza"),
    "time": ("verano", "invierno", "fin de semana", "mes"),
}

_FILLERS = {
    Language.EN: ("indeed", "perhaps", "certainly", "however"),
    Language.ES: ("quizás", "ciertamente", "además", "entonces"),
}

_TEMPLATES = {Language.EN: _EN_TEMPLATES, Language.ES: _ES_TEMPLATES}
_POOLS = {Language.EN: _EN_POOLS, Language.ES: _ES_POOLS}


def _human_sentence(rng: np.random.Generator, language: Language) -> str:
    templates = _TEMPLATES[language]
    pools = _POOLS[language]
    template = templates[int(rng.integers(len(templates)))]
    filled = template.format(
        **{slot: pool[int(rng.integers(len(pool)))] for slot, pool in pools.items()}
    )
    words = filled.split()
    if rng.random() < 0.3:
        fillers = _FILLERS[language]
        pos = int(rng.integers(1, len(words)))
        words.insert(pos, fillers[int(rng.integers(len(fillers)))])
    if rng.random() < 0.15 and len(words) > 6:
        words.pop(int(rng.integers(1, len(words) - 1)))
    return " ".join(words)


def human_text(rng: np.random.Generator, language: Language) -> str:
    n_sentences = int(rng.integers(2, 6))
    return " ".join(_human_sentence(rng, language) for _ in range(n_sentences))


def _markov_table(language: Language) -> dict[str, list[str]]:
    source = " ".join(
        template.format(**{slot: pool[0] for slot, pool in _POOLS[language].items()})
        for template in _TEMPLATES[language]
    ).lower()
    source = "".join(ch for ch in source if ch.isalpha() or ch == " ")
    table: dict[str, list[str]] = defaultdict(list)
    for i in range(len(source) - 2):
        table[source[i : i + 2]].append(source[i + 2])
    return dict(table)


_TABLES: dict[Language, dict[str, list[str]]] = {}


def _markov_sentence(rng: np.random.Generator, language: Language) -> str:
    if language not in _TABLES:
        _TABLES[language] = _markov_table(language)
    table = _TABLES[language]
    states = sorted(table)
    state = states[int(rng.integers(len(states)))]
    chars = list(state)
    length = int(rng.integers(40, 90))
    while len(chars) < length:
        options = table.get("".join(chars[-2:]))
        if not options:
            state = states[int(rng.integers(len(states)))]
            chars.extend(state)
            continue
        chars.append(options[int(rng.integers(len(options)))])
    sentence = "".join(chars).strip()
    if not any(ch.isalpha() for ch in sentence):
        sentence = "zq" + sentence
    return sentence + "."


def generated_text(rng: np.random.Generator, language: Language) -> str:
    n_sentences = int(rng.integers(2, 6))
    return " ".join(_markov_sentence(rng, language) for _ in range(n_sentences))


def synthetic_corpus(
    n_human: int,
    n_generated: int,
    seed: int = 0,
    name: str = "synthetic",
    labeled: bool = True,
) -> Corpus:
    """Balanced bilingual corpus: human templates vs Markov-chain samples."""
    rng = np.random.default_rng(seed)
    docs = []
    for i in range(n_human):
        language = Language.EN if i % 2 == 0 else Language.ES
        docs.append(
            Document(
                id=f"h{i}",
                text=human_text(rng, language),
                language=language,
                label=Label.HUMAN if labeled else None,
            )
        )
    for i in range(n_generated):
        language = Language.EN if i % 2 == 0 else Language.ES
        docs.append(
            Document(
                id=f"g{i}",
                text=generated_text(rng, language),
                language=language,
                label=Label.GENERATED if labeled else None,
            )
        )
    return Corpus(docs, name=name)
