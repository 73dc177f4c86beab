#!/usr/bin/env python3
"""Generate the bundled toy corpus: a templated German-like -> English-like
grammar with a generic domain and a news domain.

    python3 tools/make_toy_data.py data/toy
"""

import random
import sys
from pathlib import Path

SEED = 2017

# (German nominative, English)
GENERIC_SUBJECTS = [
    ("der Hund", "the dog"), ("die Katze", "the cat"), ("das Kind", "the child"),
    ("der Lehrer", "the teacher"), ("die Frau", "the woman"), ("mein Bruder", "my brother"),
    ("unsere Nachbarin", "our neighbour"), ("der Gärtner", "the gardener"),
]
# (German 3sg, German participle, English 3sg, English participle, English base)
GENERIC_VERBS = [
    ("sieht", "gesehen", "sees", "seen", "see"), ("mag", "gemocht", "likes", "liked", "like"),
    ("sucht", "gesucht", "seeks", "sought", "seek"), ("kauft", "gekauft", "buys", "bought", "buy"),
    ("malt", "gemalt", "paints", "painted", "paint"), ("findet", "gefunden", "finds", "found", "find"),
    ("baut", "gebaut", "builds", "built", "build"),
    ("repariert", "repariert", "repairs", "repaired", "repair"),
]
# (German accusative, English)
GENERIC_OBJECTS = [
    ("den Ball", "the ball"), ("das Haus", "the house"), ("den Garten", "the garden"),
    ("das Buch", "the book"), ("die Blume", "the flower"), ("den Apfel", "the apple"),
    ("den Baum", "the tree"), ("den Zaun", "the fence"), ("den Topf", "the pot"),
    ("das Fahrrad", "the bicycle"), ("den Gartenzaun", "the garden fence"),
    ("den Apfelbaum", "the apple tree"), ("den Blumentopf", "the flower pot"),
]
GENERIC_TIMES = [
    ("heute", "today"), ("morgen", "tomorrow"), ("oft", "often"),
    ("am Abend", "in the evening"), ("wieder", "again"),
]

NEWS_SUBJECTS = [
    ("die Regierung", "the government"), ("der Minister", "the minister"),
    ("die Bank", "the bank"), ("der Konzern", "the group"), ("die EU", "the EU"),
    ("die NATO", "NATO"), ("der Präsident", "the president"),
    ("die Opposition", "the opposition"), ("die Zentralbank", "the central bank"),
]
NEWS_VERBS = [
    ("senkt", "gesenkt", "lowers", "lowered", "lower"),
    ("erhöht", "erhöht", "raises", "raised", "raise"),
    ("kritisiert", "kritisiert", "criticises", "criticised", "criticise"),
    ("erwartet", "erwartet", "expects", "expected", "expect"),
    ("meldet", "gemeldet", "reports", "reported", "report"),
    ("plant", "geplant", "plans", "planned", "plan"),
    ("prüft", "geprüft", "examines", "examined", "examine"),
]
NEWS_OBJECTS = [
    ("die Steuern", "taxes"), ("die Zinsen", "interest rates"), ("die Aktien", "the shares"),
    ("die Kurse", "the rates"), ("die Aktienkurse", "share prices"), ("die Preise", "prices"),
    ("die Energie", "energy"), ("die Energiepreise", "energy prices"),
    ("den Haushalt", "the budget"), ("die Reform", "the reform"),
    ("die Steuerreform", "the tax reform"), ("die Zahlen", "the figures"),
    ("die Exportzahlen", "the export figures"), ("das Wachstum", "growth"),
    ("die Gewinne", "the profits"), ("die Bankgewinne", "bank profits"),
]
NEWS_TIMES = [
    ("heute", "today"), ("am Montag", "on Monday"), ("am Freitag", "on Friday"),
    ("im Januar", "in January"), ("erneut", "again"), ("im Jahr 2016", "in 2016"),
    ("im Jahr 2017", "in 2017"),
]

DOMAINS = {
    "generic": (GENERIC_SUBJECTS, GENERIC_VERBS, GENERIC_OBJECTS, GENERIC_TIMES),
    "news": (NEWS_SUBJECTS, NEWS_VERBS, NEWS_OBJECTS, NEWS_TIMES),
}


def cap(text):
    return text[:1].upper() + text[1:]


def sentence(rng, domain):
    subjects, verbs, objects, times = DOMAINS[domain]
    s_de, s_en = rng.choice(subjects)
    v_de, p_de, v_en, p_en, b_en = rng.choice(verbs)
    o_de, o_en = rng.choice(objects)
    t_de, t_en = rng.choice(times)
    template = rng.randrange(4)
    if template == 0:
        de = f"{s_de} {v_de} {t_de} {o_de}."
        en = f"{s_en} {v_en} {o_en} {t_en}."
    elif template == 1:
        de = f"{s_de} hat {t_de} {o_de} {p_de}."
        en = f"{s_en} has {p_en} {o_en} {t_en}."
    elif template == 2:
        de = f"{t_de} {v_de} {s_de} {o_de}."
        en = f"{t_en}, {s_en} {v_en} {o_en}."
    else:
        de = f"{s_de} {v_de} {o_de} nicht."
        en = f"{s_en} does not {b_en} {o_en}."
    return cap(de), cap(en)


def draw(rng, domain, n, taken):
    out = []
    while len(out) < n:
        pair = sentence(rng, domain)
        if pair not in taken:
            taken.add(pair)
            out.append(pair)
    return out


def write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def main():
    out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "data/toy")
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    taken = set()

    tests = {label: draw(rng, "news", 100, taken) for label in ("t2015", "t2016", "t2017")}
    valid = draw(rng, "generic", 75, taken) + draw(rng, "news", 75, taken)
    rng.shuffle(valid)
    train = draw(rng, "generic", 1200, taken) + draw(rng, "news", 800, taken)
    rng.shuffle(train)
    mono = draw(rng, "news", 1400, taken) + draw(rng, "generic", 200, taken)
    rng.shuffle(mono)

    write(out_dir / "train.de", [de for de, _ in train])
    write(out_dir / "train.en", [en for _, en in train])
    write(out_dir / "valid.de", [de for de, _ in valid])
    write(out_dir / "valid.en", [en for _, en in valid])
    write(out_dir / "mono.en", [en for _, en in mono])
    for label, pairs in tests.items():
        write(out_dir / f"{label}.de", [de for de, _ in pairs])
        write(out_dir / f"{label}.en", [en for _, en in pairs])


if __name__ == "__main__":
    main()
