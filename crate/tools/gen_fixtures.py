#!/usr/bin/env python3
"""Regenerate the test fixtures in ../fixtures and their expected values.

Expected values come from a straightforward Python re-implementation of
the tokenizer, TF-IDF weighting, threshold clustering, glossary pivot and
BM25 scoring. It shares no code with the Rust crates, so the frozen
numbers act as an independent oracle. Run from anywhere:

    python3 tools/gen_fixtures.py
"""

import json
import math
import random
import re
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "fixtures"
BASE_TS = 1_585_699_200  # 2020-04-01T00:00:00Z

# ---------------------------------------------------------------- text


def is_cjk(c):
    o = ord(c)
    return (
        0x3040 <= o <= 0x30FF
        or 0x3400 <= o <= 0x4DBF
        or 0x4E00 <= o <= 0x9FFF
        or 0xAC00 <= o <= 0xD7AF
        or 0xF900 <= o <= 0xFAFF
        or 0x20000 <= o <= 0x2A6DF
    )


ASCII_WORDS = re.compile(r"[a-z]+")


def tokenize(text):
    """Lowercase words of length >= 2; CJK runs become char bigrams.

    Fixture text is restricted to ASCII letters, spaces, newlines and CJK
    ideographs, where word segmentation is just splitting on non-letters.
    """
    assert all(c in " \n" or ("a" <= c.lower() <= "z") or is_cjk(c) for c in text), text
    out = []
    for run, cjk in split_runs(text):
        if cjk:
            if len(run) == 1:
                out.append(run)
            else:
                out.extend(run[i : i + 2] for i in range(len(run) - 1))
        else:
            out.extend(w for w in ASCII_WORDS.findall(run.lower()) if len(w) >= 2)
    return out


def split_runs(text):
    runs, cur, cur_cjk = [], "", None
    for c in text:
        k = is_cjk(c)
        if cur and k != cur_cjk:
            runs.append((cur, cur_cjk))
            cur = ""
        cur += c
        cur_cjk = k
    if cur:
        runs.append((cur, cur_cjk))
    return runs


def glossary_translate(gloss, text):
    longest = max(len(k) for k in gloss)
    pieces = []
    for tok in text.split():
        if tok in gloss:
            pieces.append(gloss[tok])
            continue
        i, pending = 0, None
        while i < len(tok):
            hit = None
            for n in range(min(longest, len(tok) - i), 0, -1):
                if tok[i : i + n] in gloss:
                    hit = n
                    break
            if hit:
                if pending is not None:
                    pieces.append(tok[pending:i])
                    pending = None
                pieces.append(gloss[tok[i : i + hit]])
                i += hit
            else:
                if pending is None:
                    pending = i
                i += 1
        if pending is not None:
            pieces.append(tok[pending:])
    return " ".join(pieces)


def pivot_text(a, gloss):
    if a["language"] == "en":
        return a["title"] + "\n" + a["body"]
    return glossary_translate(gloss, a["title"]) + "\n" + glossary_translate(gloss, a["body"])


def tfidf_vectors(docs):
    """Dense matrix over the corpus vocabulary, rows L2-normalized."""
    vocab = sorted({t for d in docs for t in d})
    col = {t: i for i, t in enumerate(vocab)}
    n = len(docs)
    df = np.zeros(len(vocab))
    for d in docs:
        for t in set(d):
            df[col[t]] += 1
    m = np.zeros((n, len(vocab)))
    for r, d in enumerate(docs):
        for t in set(d):
            tf = d.count(t)
            m[r, col[t]] = (1 + math.log(tf)) * math.log((n + 1) / (df[col[t]] + 1))
        norm = np.linalg.norm(m[r])
        if norm > 0:
            m[r] /= norm
    return vocab, m


def cos(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


def cluster(articles, vectors, vocab, tau, k, window_days):
    """Brute-force replay of the threshold rule.

    Returns per-article event index, each cluster's hashtags, and the
    smallest distance between a decisive similarity and tau.
    """
    clusters = []  # dicts: members, first, last
    labels, margin = [], float("inf")
    for i, (a, v) in enumerate(zip(articles, vectors)):
        at = a["ts"]
        best, best_s = None, None
        if np.linalg.norm(v) > 0:
            for ci, c in enumerate(clusters):
                if window_days is not None:
                    gap = max(c["first"] - at, at - c["last"], 0)
                    if gap > window_days * 86400:
                        continue
                centroid = vectors[c["members"]].mean(axis=0)
                s = cos(v, centroid)
                if best_s is None or s > best_s:
                    best, best_s = ci, s
        if best_s is not None:
            margin = min(margin, abs(best_s - tau))
        if best is not None and best_s >= tau:
            c = clusters[best]
            c["members"].append(i)
            c["first"], c["last"] = min(c["first"], at), max(c["last"], at)
            labels.append(best)
        else:
            clusters.append({"members": [i], "first": at, "last": at})
            labels.append(len(clusters) - 1)
    hashtags = []
    for c in clusters:
        centroid = vectors[c["members"]].mean(axis=0)
        n = np.linalg.norm(centroid)
        if n > 0:
            centroid = centroid / n
        terms = [(vocab[j], centroid[j]) for j in np.nonzero(centroid)[0]]
        terms.sort(key=lambda tw: (-tw[1], tw[0]))
        hashtags.append([t for t, _ in terms[:k]])
    return labels, hashtags, margin


def iso(ts):
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def article_record(a):
    rec = {
        "source": a["source"],
        "language": a["language"],
        "published_at": iso(a["ts"]),
        "title": a["title"],
        "body": a["body"],
    }
    if "url" in a:
        rec["url"] = a["url"]
    return rec


# ------------------------------------------------------------ glossary

# zh -> en. Chinese fixture text is written from these keys only.
GLOSSARY = {
    "瑞幸咖啡": "luckin coffee",
    "瑞幸": "luckin",
    "咖啡": "coffee",
    "财务造假": "accounting fraud",
    "丑闻": "scandal",
    "股价": "shares",
    "暴跌": "plunge",
    "审计": "audit",
    "调查": "investigation",
    "美联储": "federal reserve",
    "加息": "rate hike",
    "利率": "interest rates",
    "通胀": "inflation",
    "原油": "crude oil",
    "欧佩克": "opec",
    "减产": "output cut",
    "油价": "oil prices",
    "芯片": "chip",
    "出口管制": "export controls",
    "半导体": "semiconductor",
    "电动汽车": "electric vehicle",
    "销量": "sales",
    "特斯拉": "tesla",
    "比亚迪": "byd",
    "房地产": "property",
    "开发商": "developer",
    "债务": "debt",
    "违约": "default",
    "恒大": "evergrande",
    "人民币": "yuan",
    "汇率": "exchange rate",
    "贬值": "depreciation",
    "央行": "central bank",
    "疫苗": "vaccine",
    "试验": "trial",
    "批准": "approval",
    "制药": "pharmaceutical",
    "收购": "acquisition",
    "合并": "merger",
    "银行": "bank",
    "监管": "regulator",
    "罚款": "fine",
    "市场": "market",
    "投资者": "investors",
    "分析师": "analysts",
    "公司": "company",
    "报告": "report",
}


def write_glossary():
    lines = [f"{k}\t{v}" for k, v in sorted(GLOSSARY.items())]
    (OUT / "glossary.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ------------------------------------------------------- 30-doc cluster

TOPICS = [
    ["refinery", "pipeline", "barrel", "crude", "drilling", "opec"],
    ["chipmaker", "wafer", "foundry", "semiconductor", "fabrication", "lithography"],
    ["vaccine", "trial", "dose", "regulators", "efficacy", "pharma"],
    ["mortgage", "housing", "developer", "property", "homebuyers", "default"],
    ["airline", "flights", "passengers", "jet", "routes", "aviation"],
    ["cryptocurrency", "bitcoin", "exchange", "token", "wallet", "blockchain"],
]
FILLER = ["market", "shares", "report", "investors", "week", "company", "analysts", "trading"]
SOURCES = ["reuters", "bloomberg", "wsj", "ft", "cnbc"]
CLUSTER_CONFIGS = [
    {"tau": 0.30, "k_hashtags": 5, "time_window_days": None},
    {"tau": 0.20, "k_hashtags": 3, "time_window_days": 1},
    {"tau": 0.55, "k_hashtags": 2, "time_window_days": None},
]


def gen_cluster30(seed):
    rng = random.Random(seed)
    order = [t for t in range(len(TOPICS)) for _ in range(5)]
    rng.shuffle(order)
    arts = []
    for i, t in enumerate(order):
        words = rng.sample(TOPICS[t], 4) + rng.sample(FILLER, 2)
        rng.shuffle(words)
        body = rng.sample(TOPICS[t], 3) + rng.sample(FILLER, 3)
        rng.shuffle(body)
        arts.append(
            {
                "source": SOURCES[i % len(SOURCES)],
                "language": "en",
                "ts": BASE_TS + i * 3 * 3600,
                "title": " ".join(words),
                "body": " ".join(body),
                "topic": t,
            }
        )
    return arts


def build_cluster30():
    for seed in range(1, 200):
        arts = gen_cluster30(seed)
        vocab, vecs = tfidf_vectors([tokenize(pivot_text(a, GLOSSARY)) for a in arts])
        runs, ok = [], True
        for cfg in CLUSTER_CONFIGS:
            labels, tags, margin = cluster(arts, vecs, vocab, cfg["tau"], cfg["k_hashtags"], cfg["time_window_days"])
            if margin < 0.02:
                ok = False
                break
            runs.append({"config": cfg, "assignments": labels, "hashtags": tags, "min_margin": round(margin, 6)})
        if ok:
            break
    else:
        raise SystemExit("no seed gives comfortable margins")
    fixture = {
        "seed": seed,
        "articles": [article_record(a) for a in arts],
        "topics": [a["topic"] for a in arts],
        "runs": runs,
    }
    (OUT / "cluster30.json").write_text(json.dumps(fixture, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"cluster30: seed {seed}, events per run {[max(r['assignments']) + 1 for r in runs]}, "
          f"margins {[r['min_margin'] for r in runs]}")


# ------------------------------------------------------- cross-lingual

def build_crosslingual():
    arts = [
        {
            "source": "reuters",
            "language": "en",
            "ts": BASE_TS + 3600,
            "title": "Luckin Coffee shares plunge on accounting fraud scandal",
            "body": "Luckin Coffee investors react as an audit and investigation confirm accounting fraud",
        },
        {
            "source": "sina",
            "language": "zh",
            "ts": BASE_TS + 2 * 3600,
            "title": "瑞幸咖啡财务造假丑闻 股价暴跌",
            "body": "瑞幸 公司 审计 调查 财务造假 投资者",
        },
        {
            "source": "bloomberg",
            "language": "en",
            "ts": BASE_TS + 3 * 3600,
            "title": "Federal Reserve signals rate hike as inflation climbs",
            "body": "Analysts expect interest rates to rise again this year",
        },
    ]
    pivots = [pivot_text(a, GLOSSARY) for a in arts]
    vocab, vecs = tfidf_vectors([tokenize(p) for p in pivots])
    tau = 0.30
    labels, tags, margin = cluster(arts, vecs, vocab, tau, 5, None)
    fixture = {
        "articles": [article_record(a) for a in arts],
        "pivot_texts": pivots,
        "tau": tau,
        "cosine_zh_en": cos(vecs[0], vecs[1]),
        "cosine_distractor_en": cos(vecs[0], vecs[2]),
        "cosine_distractor_zh": cos(vecs[1], vecs[2]),
        "assignments": labels,
        "hashtags": tags,
    }
    assert labels[0] == labels[1] != labels[2], labels
    (OUT / "crosslingual.json").write_text(json.dumps(fixture, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"crosslingual: cos(zh,en) {fixture['cosine_zh_en']:.4f}, distractor {fixture['cosine_distractor_en']:.4f}")


# --------------------------------------------------- 100-article corpus

EVENTS = [
    (["瑞幸咖啡", "财务造假", "丑闻", "审计"], ["股价", "暴跌", "调查"]),
    (["美联储", "加息", "通胀"], ["利率", "央行", "分析师"]),
    (["欧佩克", "减产", "原油"], ["油价", "市场"]),
    (["芯片", "出口管制", "半导体"], ["公司", "监管"]),
    (["电动汽车", "销量", "比亚迪", "特斯拉"], ["市场", "报告"]),
    (["恒大", "债务", "违约", "房地产"], ["开发商", "投资者"]),
    (["人民币", "汇率", "贬值"], ["央行", "市场"]),
    (["疫苗", "试验", "批准", "制药"], ["公司", "监管"]),
    (["银行", "合并", "收购"], ["监管", "投资者"]),
    (["监管", "罚款", "银行"], ["报告", "分析师"]),
]
ZH_SOURCES = ["sina", "caixin", "xinhua"]
EN_SOURCES = ["reuters", "bloomberg", "wsj", "ft"]


def build_bilingual100():
    rng = random.Random(2020)
    arts = []
    slots = [e for e in range(len(EVENTS)) for _ in range(10)]
    rng.shuffle(slots)
    for i, e in enumerate(slots):
        core, extra = EVENTS[e]
        zh = rng.random() < 0.5
        title_terms = rng.sample(core, min(3, len(core))) + rng.sample(extra, 1)
        body_terms = rng.sample(core, 2) + rng.sample(extra, 2)
        if zh:
            title = "".join(title_terms)
            body = " ".join(body_terms)
            src = ZH_SOURCES[i % len(ZH_SOURCES)]
        else:
            title = " ".join(GLOSSARY[t] for t in title_terms).capitalize()
            body = " ".join(GLOSSARY[t] for t in body_terms)
            src = EN_SOURCES[i % len(EN_SOURCES)]
        arts.append(
            {
                "source": src,
                "language": "zh" if zh else "en",
                "ts": BASE_TS + i * 2 * 3600,
                "title": title,
                "body": body,
                "url": f"https://news.example/{src}/{i}",
                "event": e,
            }
        )
    vocab, vecs = tfidf_vectors([tokenize(pivot_text(a, GLOSSARY)) for a in arts])
    labels, tags, margin = cluster(arts, vecs, vocab, 0.30, 5, None)
    with open(OUT / "bilingual100.jsonl", "w", encoding="utf-8") as f:
        for a in arts:
            f.write(json.dumps(article_record(a), ensure_ascii=False) + "\n")
    expected = {"tau": 0.30, "assignments": labels, "hashtags": tags, "min_margin": margin,
                "generated_events": [a["event"] for a in arts]}
    (OUT / "bilingual100.expected.json").write_text(json.dumps(expected, indent=1) + "\n")
    print(f"bilingual100: {max(labels) + 1} events, margin {margin:.4f}, "
          f"zh {sum(a['language'] == 'zh' for a in arts)}")


# ----------------------------------------------------------- search

K1, B = 1.2, 0.75

SEARCH_DOCS = [
    # (text, hashtags)
    ("merger talks between two regional lenders", ["merger", "lenders"]),
    ("bank merger merger merger synergy merger review by regulators", ["regulators", "review"]),
    ("oil prices rise after supply cut", ["oil", "supply"]),
    ("quarterly results beat estimates", ["results"]),
    ("merger", ["antitrust"]),
]
SEARCH_QUERIES = ["merger", "merger oil", "oil", "regulators merger review", "results estimates", "nothing"]


def bm25(docs, query, d):
    n = len(docs)
    avg = sum(len(x) for x in docs) / n
    score = 0.0
    for t in sorted(set(query)):
        tf = docs[d].count(t)
        if tf == 0:
            continue
        df = sum(1 for x in docs if t in x)
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf * (K1 + 1) / (tf + K1 * (1 - B + B * len(docs[d]) / avg))
    return score


def build_search():
    docs = [tokenize(t) for t, _ in SEARCH_DOCS]
    cases = []
    for q in SEARCH_QUERIES:
        qt = tokenize(q)
        rows = []
        for d, (_, tags) in enumerate(SEARCH_DOCS):
            matched = sorted(set(qt) & set(tags))
            content = bm25(docs, qt, d)
            score = 2.0 * len(matched) + 1.0 * content
            if score > 0:
                rows.append({"doc": d, "score": score, "bm25": content, "matched_hashtags": matched})
        rows.sort(key=lambda r: (-r["score"], r["doc"]))
        cases.append({"query": q, "ranking": rows})
    fixture = {
        "docs": [{"text": t, "hashtags": h} for t, h in SEARCH_DOCS],
        "w_hashtag": 2.0,
        "w_content": 1.0,
        "cases": cases,
    }
    (OUT / "search.json").write_text(json.dumps(fixture, indent=1) + "\n")
    first = cases[0]["ranking"]
    print("search 'merger':", [(r["doc"], round(r["score"], 4), round(r["bm25"], 4)) for r in first])


# ------------------------------------------------------------- stats


def build_stats():
    from scipy import stats

    rng = random.Random(11)
    samples = [([1, 2, 3, 4, 5], [2, 3, 4, 5, 6]), ([0.79, 0.81, 0.80], [0.75, 0.74, 0.76])]
    for _ in range(20):
        na, nb = rng.randint(2, 12), rng.randint(2, 12)
        shift = rng.uniform(-1, 1)
        samples.append(([round(rng.gauss(0, 1), 6) for _ in range(na)], [round(rng.gauss(shift, 1.5), 6) for _ in range(nb)]))
    ttests = []
    for a, b in samples:
        r = stats.ttest_ind(a, b, equal_var=True)
        ttests.append({"a": a, "b": b, "t": float(r.statistic), "df": len(a) + len(b) - 2, "p": float(r.pvalue)})
    tp, tn, fp, fn = 6, 5, 2, 3
    metrics = {
        "tp": tp, "tn": tn, "fp": fp, "fn": fn,
        "mcc": (tp * tn - fp * fn) / math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)),
        "accuracy": (tp + tn) / (tp + tn + fp + fn),
        "f1": 2 * tp / (2 * tp + fp + fn),
    }
    (OUT / "stats.json").write_text(json.dumps({"ttests": ttests, "metrics": metrics}, indent=1) + "\n")
    print(f"stats: p(1..5 vs 2..6) = {ttests[0]['p']:.6f}, mcc = {metrics['mcc']:.6f}")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write_glossary()
    build_cluster30()
    build_crosslingual()
    build_bilingual100()
    build_search()
    build_stats()
