"""Regenerate the synthetic corpora and datasets under fixtures/.

Every document mixes short facts about many entities with filler prose, so a
whole-document chunk matches most questions about as well as any other
document, while a chunk that isolates one fact matches its question sharply.
Output is deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import json
import random
from pathlib import Path

ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "kr", "st", "tr", "sh"]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ou", "ei"]
CODAS = ["", "n", "r", "s", "l", "x", "m", "th"]
ATTRIBUTES = [
    "hometown", "profession", "color", "pet", "instrument", "sport",
    "cuisine", "vehicle", "hobby", "language", "mentor", "river",
]
FILLER = (
    "morning evening river market stone bridge window garden letter winter summer "
    "village harbor mountain forest story lantern journey quiet gentle bright narrow "
    "ancient golden silver wooden distant crowded empty late early slowly often "
    "always never sometimes people travelers merchants children farmers sailors "
    "walked talked waited listened remembered watched carried opened closed built "
    "along across behind beneath beyond near over under through around"
).split()


def word(rng: random.Random, syllables: int) -> str:
    return "".join(rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS) for _ in range(syllables))


def unique_words(rng: random.Random, n: int, syllables: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < n:
        w = word(rng, syllables)
        if w not in taken and w not in FILLER:
            taken.add(w)
            out.append(w)
    return out


def filler_sentence(rng: random.Random) -> str:
    words = [rng.choice(FILLER) for _ in range(rng.randint(6, 10))]
    return " ".join(words).capitalize() + "."


def generate(n_docs: int, n_entities: int, n_questions: int, seed: int, triples: bool, filler: float = 0.5):
    rng = random.Random(seed)
    taken: set[str] = set()
    entities = [
        f"{a.capitalize()} {b.capitalize()}"
        for a, b in zip(unique_words(rng, n_entities, 2, taken), unique_words(rng, n_entities, 2, taken))
    ]
    facts = []
    for e in entities:
        values = unique_words(rng, len(ATTRIBUTES), 2, taken)
        for attr, v in zip(ATTRIBUTES, values):
            facts.append((e, attr, v.capitalize()))
    rng.shuffle(facts)
    docs: list[list[str]] = [[] for _ in range(n_docs)]
    home: dict[tuple[str, str], int] = {}
    for i, (e, attr, v) in enumerate(facts):
        d = i % n_docs
        home[(e, attr)] = d
        sentence = f"{e} has {attr} {v}."
        if triples:
            sentence += f" ({e}; {attr}; {v})"
        docs[d].append(sentence)
    texts = []
    for sentences in docs:
        sentences += [filler_sentence(rng) for _ in range(int(len(sentences) * filler))]
        rng.shuffle(sentences)
        texts.append(" ".join(sentences))

    asked = rng.sample(entities, n_questions) if n_questions <= n_entities else entities
    questions = []
    for i, e in enumerate(asked):
        attr = rng.choice(ATTRIBUTES)
        value = next(v for (fe, fa, v) in facts if fe == e and fa == attr)
        questions.append(
            {
                "qid": f"q{i:03d}",
                "question": f"Which {attr} does {e} have?",
                "answer": value,
                "gold_passages": [f"doc{home[(e, attr)]:02d}"],
            }
        )
    return texts, questions


def write(out: Path, texts, questions) -> None:
    corpus = out / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    for old in corpus.glob("*.txt"):
        old.unlink()
    for i, text in enumerate(texts):
        (corpus / f"doc{i:02d}.txt").write_text(text + "\n", encoding="utf-8")
    with open(out / "questions.jsonl", "w", encoding="utf-8") as fp:
        for q in questions:
            fp.write(json.dumps(q, sort_keys=True) + "\n")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", default=str(Path(__file__).resolve().parent.parent / "fixtures"))
    args = parser.parse_args()
    root = Path(args.root)
    write(root / "tuning", *generate(n_docs=30, n_entities=40, n_questions=40, seed=20240501, triples=False, filler=7.0))
    write(root / "demo", *generate(n_docs=8, n_entities=10, n_questions=10, seed=7, triples=True))


if __name__ == "__main__":
    main()
