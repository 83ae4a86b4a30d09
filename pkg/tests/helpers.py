"""Shared random-instance builders and brute-force oracles for the test suite."""

import numpy as np

from sdpkit.graph import Edge, PartialGraph, SemanticGraph, SyntacticTree, Token

LABELS = ("ACT-arg", "PAT-arg", "RSTR", "APP", "TWHEN", "NE")
DEPRELS = ("root", "nsubj", "obj", "nmod", "amod")
FORMS = ("rok", "zprava", "stanovuje", "priority", "jine", "evropa", "znat", "k")
POS = ("N", "V", "J", "R")


def random_sentence(rng: np.random.Generator, n: int,
                    frames: bool = True) -> tuple[Token, ...]:
    return tuple(
        Token(j + 1,
              str(rng.choice(FORMS)),
              str(rng.choice(FORMS)),
              str(rng.choice(POS)),
              f"f{int(rng.integers(9))}" if frames and rng.random() >= 0.7 else "")
        for j in range(n))


def random_graph(rng: np.random.Generator, n: int | None = None,
                 max_n: int = 12, acyclic: bool = False) -> SemanticGraph:
    if n is None:
        n = int(rng.integers(1, max_n + 1))
    sentence = random_sentence(rng, n)
    edges = set()
    for j in range(1, n + 1):
        if rng.random() < 0.25:
            edges.add(Edge(0, j, "TOP"))
    cells = [(h, d) for h in range(1, n + 1) for d in range(1, n + 1)
             if h != d and (not acyclic or h < d)]
    for h, d in cells:
        if rng.random() < 0.2:
            edges.add(Edge(h, d, str(rng.choice(LABELS))))
    return SemanticGraph(sentence, frozenset(edges))


def random_partial(rng: np.random.Generator, n: int | None = None,
                   max_n: int = 12) -> PartialGraph:
    if n is None:
        n = int(rng.integers(1, max_n + 1))
    aligned = {j for j in range(1, n + 1) if rng.random() < 0.7}
    sentence = random_sentence(rng, n)
    edges = set()
    for j in sorted(aligned):
        if rng.random() < 0.25:
            edges.add(Edge(0, j, "TOP"))
    for h in sorted(aligned):
        for d in sorted(aligned):
            if h < d and rng.random() < 0.2:  # forward edges keep the graph writable
                edges.add(Edge(h, d, str(rng.choice(LABELS))))
    return PartialGraph(SemanticGraph(sentence, frozenset(edges)), frozenset(aligned))


def random_tree(rng: np.random.Generator, n: int | None = None,
                max_n: int = 12) -> SyntacticTree:
    if n is None:
        n = int(rng.integers(1, max_n + 1))
    sentence = random_sentence(rng, n, frames=False)  # CoNLL-U has no frame column
    order = rng.permutation(n) + 1
    rank = {int(tok): r for r, tok in enumerate(order)}
    heads = []
    deprels = []
    for j in range(1, n + 1):
        if rank[j] == 0:
            heads.append(0)
            deprels.append("root")
        else:
            candidates = [c for c in range(1, n + 1) if rank[c] < rank[j]]
            heads.append(int(rng.choice(candidates)))
            deprels.append(str(rng.choice(DEPRELS[1:])))
    comments = (f"# sent_id = {int(rng.integers(10000))}",) if rng.random() < 0.5 else ()
    return SyntacticTree(sentence, tuple(heads), tuple(deprels), comments)


def random_alignment_links(rng: np.random.Generator, m: int, n: int,
                           p: float = 0.4) -> frozenset:
    links = set()
    for s in range(1, m + 1):
        if rng.random() < p and n >= 1:
            links.add((s, int(rng.integers(1, n + 1))))
    return frozenset(links)


def brute_force_project(source: SemanticGraph, mapping: dict[int, int],
                        target_sentence) -> PartialGraph:
    """Cell-by-cell enumeration oracle for project_graph."""
    n = len(target_sentence)
    m = source.n
    label_at = {(h, d): l for h, d, l in source.edges}
    edges = set()
    for i in range(0, m + 1):
        for j in range(1, m + 1):
            if (i, j) not in label_at:
                continue
            ai = 0 if i == 0 else mapping.get(i)
            aj = mapping.get(j)
            if ai is None or aj is None:
                continue
            edges.add(Edge(ai, aj, label_at[(i, j)]))
    aligned = frozenset({0} | set(mapping.values()))
    return PartialGraph(SemanticGraph(tuple(target_sentence), frozenset(edges)), aligned)


def brute_force_score(predicted, gold):
    """Set-intersection oracle returning the six scorer counts."""
    lg = lp = lc = ug = up = uc = 0
    for p, g in zip(predicted, gold):
        pl = {(h, d, l) for h, d, l in p.edges}
        gl = {(h, d, l) for h, d, l in g.edges}
        pu = {(h, d) for h, d, _ in p.edges}
        gu = {(h, d) for h, d, _ in g.edges}
        lg += len(gl)
        lp += len(pl)
        lc += len(pl & gl)
        ug += len(gu)
        up += len(pu)
        uc += len(pu & gu)
    return lg, lp, lc, ug, up, uc
