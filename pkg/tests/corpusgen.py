"""Deterministic corpus generators for the test suite.

substitute_corpus builds punctuated pseudo-classical text with the
regularities the feature templates are supposed to exploit:

- clause-final particles (也矣焉哉乎耳) and clause-initial particles
  (而則故乃若夫蓋): strong window-1 cues;
- collocation pairs l_i r_i that only ever occur inside a clause, while the
  same l_i characters also end clauses right before some r_j (j != i) opens
  the next one. Character unigrams cannot separate the two cases (it is an
  equality test over pairs), the bigram template can;
- marker characters planted exactly 2, 3, or 4 positions before a boundary
  and nowhere else: signal that only windows of at least that radius see;
- four-character idioms and Zipf-weighted filler so nothing saturates.

Labels always come from the real pipeline (parse_corpus + labelize), never
from generator bookkeeping.
"""

import random

from gujiseg.corpus import Document, LabeledSequence, labelize

# Thousand Character Classic excerpt: every character distinct by design.
_INVENTORY_TEXT = (
    "天地玄黃宇宙洪荒日月盈昃辰宿列張寒來暑往秋收冬藏閏餘成歲律呂調陽"
    "雲騰致雨露結為霜金生麗水玉出崑岡劍號巨闕珠稱夜光果珍李柰菜重芥薑"
    "海鹹河淡鱗潛羽翔龍師火帝鳥官人皇始制文字乃服衣裳推位讓國有虞陶唐"
    "弔民伐罪周發殷湯坐朝問道垂拱平章愛育黎首臣伏戎羌遐邇壹體率賓歸王"
    "鳴鳳在樹白駒食場化被草木賴及萬方蓋此身髮四大五常恭惟鞠養豈敢毀傷"
    "女慕貞絜男效才良知過必改得能莫忘罔談彼短靡恃己長信使可覆器欲難量"
    "墨悲絲染詩讚羔羊景行維賢剋念作聖德建名立形端表正空谷傳聲虛堂習聽"
    "禍因惡積福緣善慶尺璧非寶寸陰是競資父事君曰嚴與敬孝當竭力忠則盡命"
    "臨深履薄夙興溫凊似蘭斯馨如松之盛川流不息淵澄取映容止若思言辭安定"
    "篤初誠美慎終宜令榮業所基籍甚無竟學優登仕攝職從政存以甘棠去而益詠"
    "樂殊貴賤禮別尊卑上和下睦夫唱婦隨外受傅訓入奉母儀諸姑伯叔猶子比兒"
    "孔懷兄弟同氣連枝交友投分切磨箴規仁慈隱惻造次弗離節義廉退顛沛匪虧"
)

FINAL_PARTICLES = "也矣焉哉乎耳"
INITIAL_PARTICLES = "而則故乃若夫蓋"
MARKS = "。，；"

_reserved = set(FINAL_PARTICLES) | set(INITIAL_PARTICLES)
_inventory = []
for _c in _INVENTORY_TEXT:
    if _c not in _reserved and _c not in _inventory:
        _inventory.append(_c)

L_CHARS = _inventory[0:24]
R_CHARS = _inventory[24:48]
MARKERS = {
    2: _inventory[48:54],
    3: _inventory[54:60],
    4: _inventory[60:66],
}
IDIOMS = ["".join(_inventory[66 + 4 * i : 70 + 4 * i]) for i in range(25)]
FILLER = _inventory[166:]
_FILLER_WEIGHTS = [1.0 / (rank + 3) for rank in range(len(FILLER))]


def _filler(rng, n):
    return rng.choices(FILLER, weights=_FILLER_WEIGHTS, k=n)


def _clause(rng, forced_first, allow_gadget):
    """Returns (clause text, char forced onto the next clause's start)."""
    ending = None
    pending = None
    roll = rng.random()
    if roll < 0.42:
        ending = rng.choice(FINAL_PARTICLES)
    elif roll < 0.60 and allow_gadget:
        i = rng.randrange(len(L_CHARS))
        j = rng.randrange(len(L_CHARS) - 1)
        if j >= i:
            j += 1
        ending = L_CHARS[i]
        pending = R_CHARS[j]

    chars = []
    fixed = []
    if forced_first is not None:
        chars.append(forced_first)
        fixed.append(True)
    elif rng.random() < 0.5:
        chars.append(rng.choice(INITIAL_PARTICLES))
        fixed.append(True)
    if rng.random() < 0.22:
        chars.extend(rng.choice(IDIOMS))
        fixed.extend([True] * 4)
    else:
        body_len = rng.choices((2, 3, 4, 5, 6), weights=(12, 22, 38, 18, 10))[0]
        start = len(chars)
        chars.extend(_filler(rng, body_len))
        fixed.extend([False] * body_len)
        # collocations must not supply the clause-final character
        slack = body_len - 1 if ending is not None else body_len - 2
        if slack >= 1 and rng.random() < 0.5:
            i = rng.randrange(len(L_CHARS))
            pos = start + rng.randrange(slack)
            chars[pos], chars[pos + 1] = L_CHARS[i], R_CHARS[i]
            fixed[pos] = fixed[pos + 1] = True
    if ending is not None:
        chars.append(ending)
        fixed.append(True)
    if rng.random() < 0.5:
        dist = rng.choices((2, 3, 4), weights=(25, 35, 40))[0]
        idx = len(chars) - 1 - dist
        if idx >= 0 and not fixed[idx]:
            chars[idx] = rng.choice(MARKERS[dist])
    return "".join(chars), pending


def make_raw_document(rng, min_clauses=9, max_clauses=16):
    clauses = rng.randint(min_clauses, max_clauses)
    parts = []
    pending = None
    for ci in range(clauses):
        text, pending = _clause(rng, pending, allow_gadget=ci < clauses - 1)
        parts.append(text)
        parts.append(rng.choices(MARKS, weights=(25, 60, 15))[0])
    return "".join(parts)


def substitute_corpus(n_docs=1050, seed=20240601, min_clauses=9, max_clauses=16):
    """Labeled pseudo-classical corpus; deterministic for a given seed."""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        raw = make_raw_document(rng, min_clauses, max_clauses)
        docs.append(labelize(Document(f"{i + 1:04d}", raw)))
    return docs


def learnability_corpus(n_docs=2000, seed=7, trigger="之"):
    """Toy rule: the trigger character is always followed by a mark."""
    rng = random.Random(seed)
    pool = [c for c in FILLER[:40] if c != trigger] + [trigger]
    docs = []
    for i in range(n_docs):
        raw = []
        for _ in range(rng.randint(10, 24)):
            c = rng.choice(pool)
            raw.append(c)
            if c == trigger:
                raw.append("，")
        raw.append("。")
        docs.append(labelize(Document(f"{i + 1:04d}", "".join(raw))))
    return docs


def distance2_corpus(n_docs=400, seed=31, trigger="之"):
    """Toy rule at offset -2: position t is M iff chars[t-2] == trigger.

    Invisible to a radius-1 window, trivial for radius 2, so F1(k=2) must
    beat F1(k=1). Built directly as labeled sequences (the rule is about
    label placement, not about real punctuation).
    """
    rng = random.Random(seed)
    pool = [c for c in FILLER[:30] if c != trigger] + [trigger]
    docs = []
    for i in range(n_docs):
        chars = rng.choices(pool, k=rng.randint(12, 24))
        labels = [
            "M" if t >= 2 and chars[t - 2] == trigger else "O"
            for t in range(len(chars))
        ]
        docs.append(LabeledSequence(f"{i + 1:04d}", "".join(chars), "".join(labels)))
    return docs
