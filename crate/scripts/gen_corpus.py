#!/usr/bin/env python3
"""Regenerates crates/core/data/corpus.txt.

The corpus is a deterministic mix of grammar-generated prose, Byron's
"She Walks in Beauty" (1814, public domain) and a short refrain. Punctuation
is emitted as separate whitespace-delimited tokens.
"""
import random
import sys

POEM = """
she walks in beauty , like the night
of cloudless climes and starry skies ;
and all that's best of dark and bright
meet in her aspect and her eyes ;
thus mellowed to that tender light
which heaven to gaudy day denies .
one shade the more , one ray the less ,
had half impaired the nameless grace
which waves in every raven tress ,
or softly lightens o'er her face ;
where thoughts serenely sweet express ,
how pure , how dear their dwelling-place .
and on that cheek , and o'er that brow ,
so soft , so calm , yet eloquent ,
the smiles that win , the tints that glow ,
but tell of days in goodness spent ,
a mind at peace with all below ,
a heart whose love is innocent !
"""

NOUNS = """night sky star river stone garden door window road mountain field
forest tree flower bird wind rain sea shore wave light shadow fire song voice
heart hand eye face dream memory morning evening winter summer spring autumn
city village house room table book letter word name story king queen child
mother father friend stranger traveler soldier sailor poet singer dancer
shepherd miller farmer hunter lamp candle bell clock mirror ring crown sword
ship boat bridge tower wall gate path valley hill lake pond meadow orchard
vine rose lily moon sun cloud storm thunder snow frost dust ash smoke silver
gold iron glass silk wool bread wine water salt honey milk apple pear cherry
feather leaf branch root seed harvest horse dog cat wolf fox deer owl raven
swan dove lark crow bee moth spider fish whale island harbor market church
chapel grave garden path well fountain cave cliff desert plain marsh reed
willow oak pine elm cedar maple ivy moss fern thorn blossom petal ribbon
lantern compass map key coin purse cloak boot hat glove scarf blanket pillow
cradle hearth chimney roof floor stair cellar attic barn mill forge anvil
hammer needle thread loom spindle basket bucket cup plate bowl knife spoon
""".split()

ADJS = """old young dark bright silent quiet gentle wild cold warm soft hard
deep shallow long short tall small great little pale golden silver broken
hidden lonely distant ancient early late heavy light sweet bitter strange
familiar empty full quick slow proud humble tender fierce narrow wide green
blue red white black grey crimson violet amber restless patient weary eager
faithful gentle bold shy kind cruel wise foolish hollow sacred secret tired
gleaming fading rising falling burning frozen wandering sleeping""".split()

VERBS_T = """holds carries finds keeps breaks opens closes watches follows
remembers forgets loves fears seeks gathers lifts drops sings hears sees
touches builds burns mends paints writes reads leaves greets calls crosses
guards hides shows gives takes wakes shakes fills empties""".split()

VERBS_I = """sleeps waits rests dreams weeps laughs falls rises turns trembles
shines fades burns sings listens wanders lingers sighs smiles glows returns
stays grows""".split()

ADVS = """slowly softly quietly gently often never always again alone still
together forever tonight today quickly silently brightly""".split()

PREPS = """in on under over beside near behind beyond across through along
toward upon within without among""".split()

DETS = "the the the a a this that every some her his their my our no".split()

SUBJ_PRONS = "he she they it we i you".split()

CONJS = "and but while as when until because".split()


def zipf_choice(rng, words, s=1.1):
    weights = [1.0 / (r + 1) ** s for r in range(len(words))]
    return rng.choices(words, weights=weights, k=1)[0]


def noun_phrase(rng):
    parts = [zipf_choice(rng, DETS, 0.8)]
    if rng.random() < 0.55:
        parts.append(zipf_choice(rng, ADJS))
    parts.append(zipf_choice(rng, NOUNS))
    return parts


def subject(rng):
    if rng.random() < 0.35:
        return [zipf_choice(rng, SUBJ_PRONS, 0.6)]
    return noun_phrase(rng)


def prep_phrase(rng):
    return [zipf_choice(rng, PREPS)] + noun_phrase(rng)


def verb_phrase(rng):
    r = rng.random()
    if r < 0.45:
        vp = [zipf_choice(rng, VERBS_T)] + noun_phrase(rng)
    elif r < 0.8:
        vp = [zipf_choice(rng, VERBS_I)] + prep_phrase(rng)
    else:
        vp = [zipf_choice(rng, VERBS_I), zipf_choice(rng, ADVS)]
    if rng.random() < 0.2:
        vp += prep_phrase(rng)
    return vp


def clause(rng):
    return subject(rng) + verb_phrase(rng)


def sentence(rng):
    r = rng.random()
    if r < 0.55:
        body = clause(rng)
    elif r < 0.8:
        body = clause(rng) + [","] + [zipf_choice(rng, CONJS)] + clause(rng)
    else:
        body = prep_phrase(rng) + [","] + clause(rng)
    return body + ["."]


def main(out_path, target_tokens=50000, seed=2022):
    rng = random.Random(seed)
    poem = POEM.split()
    refrain = "she walks in beauty .".split()
    tokens = []
    chapter = 0
    while len(tokens) < target_tokens:
        chapter += 1
        for _ in range(rng.randint(12, 24)):
            tokens += sentence(rng)
        # chorus: one to three repetitions of the refrain
        for _ in range(rng.randint(1, 3)):
            tokens += refrain
        if chapter % 6 == 0:
            tokens += poem
    lines = []
    line = []
    for tok in tokens:
        line.append(tok)
        if tok in {".", "!"} and len(line) > 40:
            lines.append(" ".join(line))
            line = []
    if line:
        lines.append(" ".join(line))
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/data/corpus.txt")
